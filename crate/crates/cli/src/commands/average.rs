use log::warn;
use serde::Serialize;
use varsphere::averaging::{
    choose_rank, chord_objective, rank_h_average_geodesic, weighted_average, GeodesicOptions,
};
use varsphere::clustering::geodesic_inertia_profile;
use varsphere::{DistanceKind, RankCriterion, RankHOperator, WeightSystem};

use super::{resolve_criterion, Outcome};
use crate::args::AverageArgs;
use crate::error::Result;
use crate::ingest::load;
use crate::output::{fmt_f64, OutDir};

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    command: &'static str,
    data: String,
    n: usize,
    variables: usize,
    distance: DistanceKind,
    criterion: RankCriterion,
    rank: usize,
    objective: f64,
    iterations: usize,
    converged: bool,
    residual: Option<f64>,
    objective_trace: &'a [f64],
}

pub fn run(args: &AverageArgs) -> Result<Outcome> {
    let (manifest, data) = load(args.input.data.as_deref(), args.input.manifest.as_deref())?;
    let criterion = resolve_criterion(&args.rank, &manifest)?;
    let distance = args.distance.or(manifest.distance).unwrap_or(DistanceKind::Chord);
    let w = &data.weights;
    let resultants = data.resultants()?;
    let omega = WeightSystem::uniform(resultants.len());

    let avg = weighted_average(&resultants, &omega, w)?;
    let eig = avg.eigen(w)?;
    let spectrum: Vec<f64> = eig.values.iter().cloned().collect();
    let h = choose_rank(&spectrum, criterion)?;

    let (average, objective, iterations, converged, residual, trace) = match distance {
        DistanceKind::Chord => {
            let c = RankHOperator::from_eigen(eig, h)?;
            let obj = chord_objective(&c.to_operator(w), &resultants, &omega, w)?;
            (c, obj, 0, true, None, Vec::new())
        }
        DistanceKind::Geodesic => {
            let fit = rank_h_average_geodesic(&resultants, &omega, h, w, &GeodesicOptions::default())?;
            (fit.average, fit.objective, fit.iterations, fit.converged, Some(fit.residual), fit.trace)
        }
    };

    let profile = match distance {
        DistanceKind::Geodesic => Some(geodesic_inertia_profile(&resultants, args.hmax.unwrap_or(h), w)?),
        DistanceKind::Chord => None,
    };

    let out = OutDir::create(&args.out_dir)?;
    let mut files = Vec::new();

    let total: f64 = spectrum.iter().sum();
    let mut cum = 0.0;
    let rows: Vec<Vec<String>> = spectrum
        .iter()
        .enumerate()
        .map(|(i, v)| {
            cum += v;
            vec![(i + 1).to_string(), fmt_f64(*v), fmt_f64(v / total), fmt_f64(cum / total)]
        })
        .collect();
    files.push(out.write_csv("spectrum.csv", &["h", "eigenvalue", "share", "cumulative_share"], &rows)?);

    let rows: Vec<Vec<String>> = average
        .lambda()
        .iter()
        .enumerate()
        .map(|(i, v)| vec![(i + 1).to_string(), fmt_f64(*v)])
        .collect();
    files.push(out.write_csv("lambda.csv", &["h", "lambda"], &rows)?);

    let u = average.u();
    let mut header = vec!["row".to_string()];
    header.extend((1..=u.ncols()).map(|h| format!("u{h}")));
    let rows: Vec<Vec<String>> = (0..u.nrows())
        .map(|i| {
            let mut row = vec![(i + 1).to_string()];
            row.extend((0..u.ncols()).map(|j| fmt_f64(u[(i, j)])));
            row
        })
        .collect();
    files.push(out.write_csv("factors.csv", &header, &rows)?);

    if let Some(profile) = &profile {
        let rows: Vec<Vec<String>> = profile
            .iter()
            .enumerate()
            .map(|(i, d)| vec![(i + 1).to_string(), fmt_f64(*d)])
            .collect();
        files.push(out.write_csv("profile.csv", &["H", "D_H"], &rows)?);
    }

    if !converged {
        warn!("outputs written, but the geodesic average did not converge");
    }
    files.push(out.write_json(
        "metadata.json",
        &Metadata {
            command: "average",
            data: manifest.data.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            n: data.n(),
            variables: resultants.len(),
            distance,
            criterion,
            rank: h,
            objective,
            iterations,
            converged,
            residual,
            objective_trace: &trace,
        },
    )?);
    Ok(Outcome { files, converged })
}
