use log::warn;
use serde::{Deserialize, Serialize};
use varsphere::clustering::{
    centroid_separation, cluster_summary, inertia_ratio_curve, kmeans, second_differences,
};
use varsphere::{ClusterModel, ClusteringConfig, DistanceKind};

use super::{resolve_criterion, Outcome};
use crate::args::ClusterArgs;
use crate::error::{CliError, Result};
use crate::ingest::load;
use crate::output::{fmt_f64, OutDir};

/// A fitted model together with what is needed to reuse it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub variables: Vec<String>,
    pub weights: Vec<f64>,
    pub model: ClusterModel,
}

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    command: &'static str,
    data: String,
    n: usize,
    variables: usize,
    config: &'a ClusteringConfig,
    ranks: &'a [usize],
    within_inertia: f64,
    between_over_total: f64,
    iterations: usize,
    converged: bool,
    centroids_converged: bool,
    best_start: usize,
    inertia_trace: &'a [f64],
}

pub fn run(args: &ClusterArgs) -> Result<Outcome> {
    let (manifest, data) = load(args.input.data.as_deref(), args.input.manifest.as_deref())?;
    let clusters = args
        .clusters
        .or(manifest.clusters)
        .ok_or_else(|| CliError::invalid("number of clusters missing: pass --L"))?;
    let config = ClusteringConfig {
        clusters,
        distance: args.distance.or(manifest.distance).unwrap_or(DistanceKind::Chord),
        criterion: resolve_criterion(&args.rank, &manifest)?,
        max_iter: args.max_iter.or(manifest.max_iter).unwrap_or(100),
        n_starts: args.starts.or(manifest.starts).unwrap_or(10),
        seed: args.seed.or(manifest.seed).unwrap_or(0),
    };
    config.validate()?;

    let w = &data.weights;
    let resultants = data.resultants()?;
    let model = kmeans(&resultants, &config, w)?;
    let names = data.names();
    let out = OutDir::create(&args.out_dir)?;
    let mut files = Vec::new();

    let rows: Vec<Vec<String>> = names
        .iter()
        .zip(&data.specs)
        .zip(&model.assignments)
        .map(|((name, spec), a)| {
            vec![
                name.clone(),
                format!("{:?}", spec.kind).to_lowercase(),
                (a + 1).to_string(),
            ]
        })
        .collect();
    files.push(out.write_csv("assignments.csv", &["variable", "kind", "cluster"], &rows)?);

    let summary = cluster_summary(&model, &resultants, w)?;
    let rows: Vec<Vec<String>> = summary
        .iter()
        .map(|m| {
            vec![
                names[m.index].clone(),
                (m.cluster + 1).to_string(),
                fmt_f64(m.cosine),
                fmt_f64(m.chord),
                fmt_f64(m.geodesic),
            ]
        })
        .collect();
    files.push(out.write_csv(
        "members.csv",
        &["variable", "cluster", "cosine", "chord", "geodesic"],
        &rows,
    )?);

    let sep = centroid_separation(&model, w);
    let mut header = vec!["cluster".to_string()];
    header.extend((1..=sep.ncols()).map(|l| format!("c{l}")));
    let rows: Vec<Vec<String>> = (0..sep.nrows())
        .map(|a| {
            let mut row = vec![(a + 1).to_string()];
            row.extend((0..sep.ncols()).map(|b| fmt_f64(sep[(a, b)])));
            row
        })
        .collect();
    files.push(out.write_csv("centroid_cosines.csv", &header, &rows)?);

    if let Some(lmax) = args.ratio_curve {
        let counts: Vec<usize> = (1..=lmax.min(resultants.len())).collect();
        let curve = inertia_ratio_curve(&resultants, &config, &counts, w)?;
        let diffs = second_differences(&curve);
        let rows: Vec<Vec<String>> = counts
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let d = if i == 0 || i + 1 == counts.len() {
                    String::new()
                } else {
                    fmt_f64(diffs[i - 1])
                };
                vec![l.to_string(), fmt_f64(curve[i]), d]
            })
            .collect();
        files.push(out.write_csv("inertia_curve.csv", &["L", "between_over_total", "second_difference"], &rows)?);
    }

    files.push(out.write_json(
        "model.json",
        &ModelFile {
            variables: names.clone(),
            weights: w.as_vector().iter().cloned().collect(),
            model: model.clone(),
        },
    )?);
    let converged = model.converged && model.centroids_converged;
    if !converged {
        warn!("outputs written, but the fit did not fully converge");
    }
    files.push(out.write_json(
        "metadata.json",
        &Metadata {
            command: "cluster",
            data: manifest.data.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            n: data.n(),
            variables: names.len(),
            config: &config,
            ranks: &model.ranks,
            within_inertia: model.within_inertia,
            between_over_total: model.between_over_total,
            iterations: model.iterations,
            converged: model.converged,
            centroids_converged: model.centroids_converged,
            best_start: model.start,
            inertia_trace: &model.inertia_trace,
        },
    )?);
    Ok(Outcome { files, converged })
}
