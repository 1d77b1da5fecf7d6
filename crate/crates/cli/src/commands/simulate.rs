use std::f64::consts::PI;

use serde::Serialize;
use varsphere::simulation::{run_benchmark, BenchmarkGrid};

use super::Outcome;
use crate::args::SimulateArgs;
use crate::error::{CliError, Result};
use crate::output::{fmt_f64, OutDir};

/// Angle in radians from `pi`, `pi/4`, `2*pi/3` or a plain number.
pub fn parse_angle(text: &str) -> Result<f64> {
    let bad = || CliError::invalid(format!("cannot read angle {text:?}"));
    let s = text.trim().to_ascii_lowercase();
    if !s.contains("pi") {
        return s.parse().map_err(|_| bad());
    }
    let (num, rest) = match s.split_once("pi") {
        Some((pre, rest)) => (pre.trim().trim_end_matches('*').trim(), rest.trim()),
        None => return Err(bad()),
    };
    let factor: f64 = if num.is_empty() { 1.0 } else { num.parse().map_err(|_| bad())? };
    let divisor: f64 = match rest.strip_prefix('/') {
        Some(d) => d.trim().parse().map_err(|_| bad())?,
        None if rest.is_empty() => 1.0,
        None => return Err(bad()),
    };
    Ok(factor * PI / divisor)
}

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    command: &'static str,
    grid: &'a BenchmarkGrid,
    failures: usize,
}

pub fn run(args: &SimulateArgs) -> Result<Outcome> {
    let grid = BenchmarkGrid {
        ns: args.ns.clone(),
        betas: args.betas.iter().map(|b| parse_angle(b)).collect::<Result<_>>()?,
        sigma2s: args.sigma2s.clone(),
        thetas: args.thetas.clone(),
        replications: args.reps,
        seed: args.seed,
        n_starts: args.starts,
    };
    if grid.ns.is_empty() || grid.betas.is_empty() || grid.sigma2s.is_empty() || grid.thetas.is_empty() {
        return Err(CliError::invalid("every grid axis needs at least one value"));
    }
    for cell in grid.cells() {
        cell.validate()?;
    }
    let rows = run_benchmark(&grid)?;
    let failures: usize = rows
        .iter()
        .filter(|r| r.theta == grid.thetas[0])
        .map(|r| r.failures)
        .sum();

    let out = OutDir::create(&args.out_dir)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                fmt_f64(r.beta),
                fmt_f64(r.sigma2),
                fmt_f64(r.theta),
                fmt_f64(r.mean_rand),
                fmt_f64(r.sd_rand),
                r.replications.to_string(),
                r.failures.to_string(),
            ]
        })
        .collect();
    let files = vec![
        out.write_csv(
            "benchmark.csv",
            &["n", "beta", "sigma2", "theta", "mean_rand", "sd_rand", "replications", "failures"],
            &table,
        )?,
        out.write_json(
            "metadata.json",
            &Metadata {
                command: "simulate",
                grid: &grid,
                failures,
            },
        )?,
    ];
    Ok(Outcome {
        files,
        converged: failures == 0,
    })
}
