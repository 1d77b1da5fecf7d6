use std::fs;

use nalgebra::DMatrix;
use varsphere::clustering::{centroid_separation, classical_mds};
use varsphere::Weights;

use super::cluster::ModelFile;
use super::Outcome;
use crate::args::MdsArgs;
use crate::error::{CliError, Result};
use crate::output::{fmt_f64, OutDir};

pub fn run(args: &MdsArgs) -> Result<Outcome> {
    let text = fs::read_to_string(&args.model).map_err(|source| CliError::Io {
        path: args.model.clone(),
        source,
    })?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: args.model.clone(),
        source,
    })?;
    let l = file.model.centroids.len();
    if l < 2 {
        return Err(CliError::invalid(format!("MDS needs at least 2 centroids, the model has {l}")));
    }
    if args.dims == 0 {
        return Err(CliError::invalid("--dims must be at least 1"));
    }
    let w = Weights::new(file.weights.clone())?;
    let cos = centroid_separation(&file.model, &w);
    let mut dist = DMatrix::zeros(l, l);
    for a in 0..l {
        for b in 0..l {
            if a != b {
                dist[(a, b)] = file.model.distance.from_cos(cos[(a, b)])?;
            }
        }
    }
    let coords = classical_mds(&dist, args.dims)?;

    let out = OutDir::create(&args.out_dir)?;
    let mut header = vec!["cluster".to_string()];
    header.extend((1..=args.dims).map(|d| format!("dim{d}")));
    let rows: Vec<Vec<String>> = (0..l)
        .map(|a| {
            let mut row = vec![(a + 1).to_string()];
            row.extend((0..args.dims).map(|d| fmt_f64(coords[(a, d)])));
            row
        })
        .collect();
    let files = vec![out.write_csv("mds.csv", &header, &rows)?];
    Ok(Outcome { files, converged: true })
}
