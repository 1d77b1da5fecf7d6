//! Simulated variable clusters around latent directions, the partition
//! discrepancy index used to score them, and the benchmark sweep.

use std::f64::consts::PI;

use log::warn;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaging::RankCriterion;
use crate::clustering::{kmeans, ClusteringConfig};
use crate::encoding::{encode_categorical, encode_numeric, resultant, Resultant};
use crate::error::{Error, Result};
use crate::geometry::{center, standardize, w_dot, Weights};
use crate::operator_space::DistanceKind;

/// Number of numeric variables per cluster A, B, C.
const NUMERIC_COUNTS: [usize; 3] = [7, 5, 5];
const QUANTILE_LEVELS: usize = 5;

/// One cell of the design, plus how many samples to draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub beta: f64,
    pub sigma2: f64,
    pub seed: u64,
    pub replications: usize,
    pub thetas: Vec<f64>,
    pub clusters: usize,
    pub n_starts: usize,
}

impl SimConfig {
    pub fn new(n: usize, beta: f64, sigma2: f64) -> Self {
        Self {
            n,
            beta,
            sigma2,
            seed: 0,
            replications: 100,
            thetas: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            clusters: 3,
            n_starts: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_cell(self.n, self.beta, self.sigma2)?;
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be at least 1".into()));
        }
        if self.n_starts == 0 {
            return Err(Error::InvalidConfig("n_starts must be at least 1".into()));
        }
        if self.clusters == 0 {
            return Err(Error::InvalidConfig("cluster count must be at least 1".into()));
        }
        for &theta in &self.thetas {
            RankCriterion::trace_ratio(theta)?;
        }
        Ok(())
    }
}

fn validate_cell(n: usize, beta: f64, sigma2: f64) -> Result<()> {
    if n < QUANTILE_LEVELS {
        return Err(Error::InvalidConfig(format!("sample size {n} below 5")));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidConfig(format!("noise variance {sigma2} must be positive")));
    }
    if !(beta > 0.0 && beta <= PI / 2.0 + 1e-12) {
        return Err(Error::InvalidConfig(format!("β = {beta} outside (0, π/2]")));
    }
    Ok(())
}

/// A drawn sample: 17 numeric and 4 five-level categorical variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSample {
    pub latents: [DVector<f64>; 4],
    pub numeric: Vec<DVector<f64>>,
    pub categorical: Vec<Vec<usize>>,
    /// Cluster of each variable x¹..x²¹ (0 = A, 1 = B, 2 = C).
    pub truth: Vec<usize>,
}

impl SimSample {
    /// Normed resultants of the 21 variables, numeric first.
    pub fn resultants(&self, w: &Weights) -> Result<Vec<Resultant>> {
        let mut out = Vec::with_capacity(self.numeric.len() + self.categorical.len());
        for x in &self.numeric {
            out.push(resultant(&encode_numeric(x, w)?, w, true)?);
        }
        for c in &self.categorical {
            out.push(resultant(&encode_categorical(c, QUANTILE_LEVELS, w)?, w, true)?);
        }
        Ok(out)
    }
}

fn normal_vector(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// `ξ₁..ξ₄`: centred, `ξ₂` orthogonalised against `ξ₁`, all standardised, then
/// `ξ₃` tilted towards `ξ₁` by [`mix_latent`].
pub fn simulate_latents(n: usize, beta: f64, rng: &mut ChaCha8Rng) -> Result<[DVector<f64>; 4]> {
    let w = Weights::uniform(n);
    loop {
        let xi: Vec<DVector<f64>> = (0..4)
            .map(|_| center(&normal_vector(n, rng), &w))
            .collect::<Result<_>>()?;
        let proj = w_dot(&xi[1], &xi[0], &w)? / w_dot(&xi[0], &xi[0], &w)?;
        let xi2 = &xi[1] - &xi[0] * proj;
        let standardized = (|| -> Result<[DVector<f64>; 4]> {
            let s1 = standardize(&xi[0], &w)?;
            let s2 = standardize(&xi2, &w)?;
            let s3 = standardize(&xi[2], &w)?;
            let s4 = standardize(&xi[3], &w)?;
            let mixed = mix_latent(&s1, &s3, beta, &w)?;
            Ok([s1, s2, mixed, s4])
        })();
        match standardized {
            Ok(latents) => return Ok(latents),
            Err(Error::ZeroVariance) => {
                warn!("degenerate latent draw, resampling");
                continue;
            }
            Err(e) => return Err(e),
        }
    }
}

/// `ξ₃ sinβ + ξ₁ cosβ`, re-standardised: independent of cluster A at
/// `β = π/2`, increasingly confused with it as `β` decreases.
pub fn mix_latent(xi1: &DVector<f64>, xi3: &DVector<f64>, beta: f64, w: &Weights) -> Result<DVector<f64>> {
    standardize(&(xi3 * beta.sin() + xi1 * beta.cos()), w)
}

/// Level `1..=5` (returned as `0..5`) of each entry by empirical quintiles,
/// bins `]q_{(j−1)/5}, q_{j/5}]` with the lowest bin closed.
pub fn quintile_levels(x: &DVector<f64>) -> Result<Vec<usize>> {
    let n = x.len();
    if n < QUANTILE_LEVELS {
        return Err(Error::InvalidConfig(format!("need at least 5 values, got {n}")));
    }
    let mut sorted: Vec<f64> = x.iter().cloned().collect();
    sorted.sort_by(f64::total_cmp);
    let cuts: Vec<f64> = (1..=QUANTILE_LEVELS)
        .map(|j| sorted[(j * n).div_ceil(QUANTILE_LEVELS) - 1])
        .collect();
    let levels: Vec<usize> = x
        .iter()
        .map(|v| cuts.iter().position(|c| v <= c).unwrap_or(QUANTILE_LEVELS - 1))
        .collect();
    for j in 0..QUANTILE_LEVELS {
        if !levels.contains(&j) {
            return Err(Error::InvalidCategorical(format!("quintile bin {} is empty", j + 1)));
        }
    }
    Ok(levels)
}

/// Draws the 21 variables around freshly simulated latents.
pub fn simulate_sample(n: usize, beta: f64, sigma2: f64, rng: &mut ChaCha8Rng) -> Result<SimSample> {
    validate_cell(n, beta, sigma2)?;
    let latents = simulate_latents(n, beta, rng)?;
    let noise = Normal::new(0.0, sigma2.sqrt()).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let eps = |rng: &mut ChaCha8Rng| DVector::from_fn(n, |_, _| noise.sample(rng));

    let mut numeric = Vec::with_capacity(17);
    let mut truth = Vec::with_capacity(21);
    for _ in 0..NUMERIC_COUNTS[0] {
        let alpha = rng.random_range(0.0..2.0 * PI);
        let x = &latents[0] * alpha.cos() + &latents[1] * alpha.sin() + eps(rng);
        numeric.push(x);
        truth.push(0);
    }
    for (cluster, latent) in [(1, &latents[2]), (2, &latents[3])] {
        for _ in 0..NUMERIC_COUNTS[cluster] {
            numeric.push(latent + eps(rng));
            truth.push(cluster);
        }
    }
    let categorical = latents
        .iter()
        .map(quintile_levels)
        .collect::<Result<Vec<_>>>()?;
    truth.extend([0, 0, 1, 2]);
    Ok(SimSample {
        latents,
        numeric,
        categorical,
        truth,
    })
}

/// Pairs co-clustered in exactly one partition over pairs co-clustered in at
/// least one; 0 when neither partition co-clusters any pair.
pub fn rand_index(p: &[usize], q: &[usize]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::GroundSetMismatch(p.len(), q.len()));
    }
    let (mut either, mut one) = (0usize, 0usize);
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            let a = p[i] == p[j];
            let b = q[i] == q[j];
            if a || b {
                either += 1;
            }
            if a != b {
                one += 1;
            }
        }
    }
    Ok(if either == 0 { 0.0 } else { one as f64 / either as f64 })
}

/// A grid of design cells sharing replications and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkGrid {
    pub ns: Vec<usize>,
    pub betas: Vec<f64>,
    pub sigma2s: Vec<f64>,
    pub thetas: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
    pub n_starts: usize,
}

impl Default for BenchmarkGrid {
    /// The full 2 × 2 × 3 × 5 design at 100 replications.
    fn default() -> Self {
        Self {
            ns: vec![30, 40],
            betas: vec![PI / 4.0, PI / 3.0, PI / 2.0],
            sigma2s: vec![0.1, 0.15],
            thetas: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            replications: 100,
            seed: 0,
            n_starts: 10,
        }
    }
}

impl BenchmarkGrid {
    /// Cells in output order: n, then σ², then β.
    pub fn cells(&self) -> Vec<SimConfig> {
        let mut cells = Vec::new();
        for &n in &self.ns {
            for &sigma2 in &self.sigma2s {
                for &beta in &self.betas {
                    cells.push(SimConfig {
                        seed: self.seed,
                        replications: self.replications,
                        thetas: self.thetas.clone(),
                        n_starts: self.n_starts,
                        ..SimConfig::new(n, beta, sigma2)
                    });
                }
            }
        }
        cells
    }
}

/// Mean and spread of the index for one `(n, β, σ², θ)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub n: usize,
    pub beta: f64,
    pub sigma2: f64,
    pub theta: f64,
    pub mean_rand: f64,
    pub sd_rand: f64,
    pub replications: usize,
    pub failures: usize,
}

/// Generator for replication `rep` of a cell: the master seed selects the key,
/// the cell parameters and replication index select the stream.
fn replication_rng(cell: &SimConfig, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cell.seed);
    let key = (cell.n as u64) << 48
        ^ cell.beta.to_bits().rotate_left(17)
        ^ cell.sigma2.to_bits().rotate_left(31);
    rng.set_stream(key ^ rep as u64);
    rng
}

/// One sample, clustered once per θ, scored against the truth.
fn replicate(cell: &SimConfig, rep: usize) -> Result<Vec<f64>> {
    let mut rng = replication_rng(cell, rep);
    let sample = simulate_sample(cell.n, cell.beta, cell.sigma2, &mut rng)?;
    let w = Weights::uniform(cell.n);
    let rs = sample.resultants(&w)?;
    let kmeans_seed: u64 = rng.random();
    cell.thetas
        .iter()
        .map(|&theta| {
            let cfg = ClusteringConfig {
                clusters: cell.clusters,
                distance: DistanceKind::Chord,
                criterion: RankCriterion::trace_ratio(theta)?,
                max_iter: 100,
                n_starts: cell.n_starts,
                seed: kmeans_seed,
            };
            let model = kmeans(&rs, &cfg, &w)?;
            rand_index(&model.assignments, &sample.truth)
        })
        .collect()
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, var.sqrt())
}

/// Rows for one cell, one per θ.
pub fn run_cell(cell: &SimConfig) -> Result<Vec<BenchmarkRow>> {
    cell.validate()?;
    let outcomes: Vec<Result<Vec<f64>>> = (0..cell.replications)
        .into_par_iter()
        .map(|rep| replicate(cell, rep))
        .collect();
    let mut scores = vec![Vec::with_capacity(cell.replications); cell.thetas.len()];
    let mut failures = 0;
    for (rep, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(values) => {
                for (t, v) in values.into_iter().enumerate() {
                    scores[t].push(v);
                }
            }
            Err(e) => {
                warn!(
                    "replication {rep} of cell n={} β={} σ²={} failed: {e}",
                    cell.n, cell.beta, cell.sigma2
                );
                failures += 1;
            }
        }
    }
    Ok(cell
        .thetas
        .iter()
        .zip(&scores)
        .map(|(&theta, s)| {
            let (mean_rand, sd_rand) = mean_sd(s);
            BenchmarkRow {
                n: cell.n,
                beta: cell.beta,
                sigma2: cell.sigma2,
                theta,
                mean_rand,
                sd_rand,
                replications: s.len(),
                failures,
            }
        })
        .collect())
}

/// All cells of the grid, in [`BenchmarkGrid::cells`] order, θ innermost.
pub fn run_benchmark(grid: &BenchmarkGrid) -> Result<Vec<BenchmarkRow>> {
    let mut rows = Vec::new();
    for cell in grid.cells() {
        rows.extend(run_cell(&cell)?);
    }
    Ok(rows)
}
