//! K-means-type clustering of normed resultants around rank-H centroids.

mod mds;
mod report;

use std::collections::HashSet;

use log::{debug, warn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaging::{rank_h_average, RankCriterion, RankHOperator, WeightSystem};
use crate::encoding::Resultant;
use crate::error::{Error, Result};
use crate::geometry::Weights;
use crate::operator_space::{checked_cos, DistanceKind};

pub use mds::classical_mds;
pub use report::{
    centroid_separation, cluster_summary, geodesic_inertia_profile, inertia_ratio_curve,
    second_differences, MemberSummary,
};

/// Settings of a K-means run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringConfig {
    /// Number of clusters `L`.
    pub clusters: usize,
    pub distance: DistanceKind,
    pub criterion: RankCriterion,
    pub max_iter: usize,
    pub n_starts: usize,
    pub seed: u64,
}

impl ClusteringConfig {
    /// Chord distance, rank-1 centroids, 100 iterations, 10 starts, seed 0.
    pub fn new(clusters: usize) -> Self {
        Self {
            clusters,
            distance: DistanceKind::Chord,
            criterion: RankCriterion::Fixed { h: 1 },
            max_iter: 100,
            n_starts: 10,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.clusters == 0 {
            return Err(Error::InvalidConfig("cluster count must be at least 1".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if self.n_starts == 0 {
            return Err(Error::InvalidConfig("n_starts must be at least 1".into()));
        }
        self.criterion.validate()
    }
}

/// A fitted partition with its centroids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub assignments: Vec<usize>,
    pub centroids: Vec<RankHOperator>,
    pub ranks: Vec<usize>,
    pub distance: DistanceKind,
    pub criterion: RankCriterion,
    /// `Σ_l Σ_{k∈c_l} dist²(R̃_k, centroid_l)`.
    pub within_inertia: f64,
    pub between_over_total: f64,
    /// Assignments reached a fixed point (no cycle, no iteration cap).
    pub converged: bool,
    /// Every geodesic centroid met its fixed-point tolerance.
    pub centroids_converged: bool,
    pub iterations: usize,
    /// Index of the start that produced this model.
    pub start: usize,
    /// Within-inertia after each centroid update and each reassignment.
    pub inertia_trace: Vec<f64>,
}

impl ClusterModel {
    pub fn n_clusters(&self) -> usize {
        self.centroids.len()
    }

    /// Member indices of cluster `l`.
    pub fn members(&self, l: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == l)
            .map(|(k, _)| k)
            .collect()
    }
}

/// Cosines `[R̃_k|centroid_l]` for every centroid.
fn cosines(r: &Resultant, centroids: &[RankHOperator], w: &Weights) -> Result<Vec<f64>> {
    centroids
        .iter()
        .map(|c| checked_cos(c.dot_operator(r.op(), w)))
        .collect()
}

/// Index of the closest centroid; ties go to the lowest index.
pub fn assign(r: &Resultant, centroids: &[RankHOperator], distance: DistanceKind, w: &Weights) -> Result<usize> {
    if centroids.is_empty() {
        return Err(Error::Empty("no centroids"));
    }
    let cos = cosines(r, centroids, w)?;
    let best = match distance {
        DistanceKind::Chord => {
            let mut best = 0;
            for (l, c) in cos.iter().enumerate() {
                if *c > cos[best] {
                    best = l;
                }
            }
            best
        }
        DistanceKind::Geodesic => {
            let deltas: Vec<f64> = cos.iter().map(|c| c.acos()).collect();
            let mut best = 0;
            for (l, d) in deltas.iter().enumerate() {
                if *d < deltas[best] {
                    best = l;
                }
            }
            best
        }
    };
    Ok(best)
}

fn check_resultants(resultants: &[Resultant]) -> Result<()> {
    if resultants.is_empty() {
        return Err(Error::Empty("no resultants to cluster"));
    }
    let n = resultants[0].n();
    for r in resultants {
        if r.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: r.n(),
            });
        }
        if !r.is_normed() {
            return Err(Error::NotNormed(f64::NAN));
        }
    }
    Ok(())
}

struct Centroids {
    ops: Vec<RankHOperator>,
    ranks: Vec<usize>,
    converged: bool,
}

fn update_centroids(
    resultants: &[Resultant],
    assignments: &[usize],
    clusters: usize,
    criterion: RankCriterion,
    distance: DistanceKind,
    w: &Weights,
) -> Result<Centroids> {
    let mut ops = Vec::with_capacity(clusters);
    let mut ranks = Vec::with_capacity(clusters);
    let mut converged = true;
    for l in 0..clusters {
        let members: Vec<&Resultant> = resultants
            .iter()
            .zip(assignments)
            .filter(|(_, &a)| a == l)
            .map(|(r, _)| r)
            .collect();
        let fit = rank_h_average(&members, &WeightSystem::uniform(members.len()), criterion, distance, w)?;
        converged &= fit.converged;
        ranks.push(fit.rank);
        ops.push(fit.centroid);
    }
    Ok(Centroids { ops, ranks, converged })
}

/// Squared distance of every resultant to every centroid.
fn distance_table(
    resultants: &[Resultant],
    centroids: &[RankHOperator],
    distance: DistanceKind,
    w: &Weights,
) -> Result<Vec<Vec<f64>>> {
    resultants
        .iter()
        .map(|r| {
            cosines(r, centroids, w)?
                .into_iter()
                .map(|c| distance.squared_from_cos(c))
                .collect()
        })
        .collect()
}

fn within(table: &[Vec<f64>], assignments: &[usize]) -> f64 {
    table.iter().zip(assignments).map(|(row, &a)| row[a]).sum()
}

/// Moves the member farthest from its centroid into each empty cluster.
fn repair_empty(assignments: &mut [usize], table: &[Vec<f64>], clusters: usize) {
    loop {
        let mut sizes = vec![0usize; clusters];
        for &a in assignments.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let mut far = None;
        for (k, &a) in assignments.iter().enumerate() {
            if sizes[a] < 2 {
                continue;
            }
            if far.is_none_or(|(_, d)| table[k][a] > d) {
                far = Some((k, table[k][a]));
            }
        }
        let (k, _) = far.expect("K >= L leaves a cluster with two members");
        debug!("reseeding empty cluster {empty} with resultant {k}");
        assignments[k] = empty;
    }
}

fn random_partition(k: usize, clusters: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(rng);
    let mut assignments = vec![0; k];
    for (pos, &item) in order.iter().enumerate() {
        assignments[item] = if pos < clusters {
            pos
        } else {
            rng.random_range(0..clusters)
        };
    }
    assignments
}

fn start_rng(seed: u64, start: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(start as u64);
    rng
}

fn single_run(resultants: &[Resultant], config: &ClusteringConfig, start: usize, w: &Weights) -> Result<ClusterModel> {
    let l = config.clusters;
    let mut rng = start_rng(config.seed, start);
    let mut assignments = random_partition(resultants.len(), l, &mut rng);
    let mut seen = HashSet::new();
    seen.insert(assignments.clone());
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let (centroids, table) = loop {
        iterations += 1;
        let centroids = update_centroids(resultants, &assignments, l, config.criterion, config.distance, w)?;
        let table = distance_table(resultants, &centroids.ops, config.distance, w)?;
        trace.push(within(&table, &assignments));

        let mut next: Vec<usize> = resultants
            .iter()
            .map(|r| assign(r, &centroids.ops, config.distance, w))
            .collect::<Result<_>>()?;
        repair_empty(&mut next, &table, l);
        if next == assignments {
            converged = true;
            break (centroids, table);
        }
        trace.push(within(&table, &next));
        if !seen.insert(next.clone()) {
            debug!("start {start}: assignment cycle after {iterations} iterations");
            break (centroids, table);
        }
        if iterations >= config.max_iter {
            break (centroids, table);
        }
        assignments = next;
    };
    let within_inertia = within(&table, &assignments);
    Ok(ClusterModel {
        assignments,
        ranks: centroids.ranks,
        centroids: centroids.ops,
        distance: config.distance,
        criterion: config.criterion,
        within_inertia,
        between_over_total: f64::NAN,
        converged,
        centroids_converged: centroids.converged,
        iterations,
        start,
        inertia_trace: trace,
    })
}

/// Best of `n_starts` random-partition runs, by within-inertia.
pub fn kmeans(resultants: &[Resultant], config: &ClusteringConfig, w: &Weights) -> Result<ClusterModel> {
    config.validate()?;
    check_resultants(resultants)?;
    if resultants.len() < config.clusters {
        return Err(Error::InvalidConfig(format!(
            "{} clusters requested for {} resultants",
            config.clusters,
            resultants.len()
        )));
    }
    let runs: Vec<Result<ClusterModel>> = (0..config.n_starts)
        .into_par_iter()
        .map(|s| single_run(resultants, config, s, w))
        .collect();
    let mut best: Option<ClusterModel> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().is_none_or(|b| run.within_inertia < b.within_inertia) {
            best = Some(run);
        }
    }
    let mut model = best.expect("n_starts >= 1");
    if !model.converged {
        warn!("k-means stopped without a stable partition after {} iterations", model.iterations);
    }
    model.between_over_total = match inertia_ratio(&model, resultants, w) {
        Ok(r) => r,
        Err(Error::ZeroInertia) => 0.0,
        Err(e) => return Err(e),
    };
    Ok(model)
}

/// `(total − within)/total`, total inertia taken about the global rank-H average.
pub fn inertia_ratio(model: &ClusterModel, resultants: &[Resultant], w: &Weights) -> Result<f64> {
    check_resultants(resultants)?;
    if model.assignments.len() != resultants.len() {
        return Err(Error::DimensionMismatch {
            expected: model.assignments.len(),
            actual: resultants.len(),
        });
    }
    let global = rank_h_average(
        resultants,
        &WeightSystem::uniform(resultants.len()),
        model.criterion,
        model.distance,
        w,
    )?;
    let total: f64 = distance_table(resultants, std::slice::from_ref(&global.centroid), model.distance, w)?
        .iter()
        .map(|row| row[0])
        .sum();
    let within = within(
        &distance_table(resultants, &model.centroids, model.distance, w)?,
        &model.assignments,
    );
    if total <= 1e-14 * resultants.len() as f64 {
        return Err(Error::ZeroInertia);
    }
    Ok((total - within) / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::averaging::test_support::*;
    use crate::averaging::rank_h_average_euclidean;

    fn config(l: usize) -> ClusteringConfig {
        ClusteringConfig {
            n_starts: 4,
            seed: 7,
            ..ClusteringConfig::new(l)
        }
    }

    #[test]
    fn config_validation() {
        assert!(config(0).validate().is_err());
        assert!(ClusteringConfig { max_iter: 0, ..config(2) }.validate().is_err());
        assert!(ClusteringConfig { n_starts: 0, ..config(2) }.validate().is_err());
        assert!(config(2).validate().is_ok());
    }

    #[test]
    fn too_many_clusters_or_empty_input() {
        let w = Weights::uniform(5);
        let rs = random_resultants(5, 3, &w, &mut rng(1));
        assert!(kmeans(&rs, &config(4), &w).is_err());
        assert!(kmeans(&[], &config(1), &w).is_err());
    }

    #[test]
    fn singletons_have_zero_within_inertia() {
        let mut rng = rng(2);
        let w = random_weights(6, &mut rng);
        let rs = random_resultants(6, 4, &w, &mut rng);
        for distance in [DistanceKind::Chord, DistanceKind::Geodesic] {
            let cfg = ClusteringConfig {
                distance,
                criterion: RankCriterion::TraceRatio { theta: 1.0 },
                ..config(4)
            };
            let model = kmeans(&rs, &cfg, &w).unwrap();
            assert!(model.within_inertia.abs() < 1e-10);
            assert!((model.between_over_total - 1.0).abs() < 1e-10);
            let mut sorted = model.assignments.clone();
            sorted.sort();
            assert_eq!(sorted, vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn single_cluster_is_global_average() {
        let mut rng = rng(3);
        let w = random_weights(6, &mut rng);
        let rs = random_resultants(6, 5, &w, &mut rng);
        let model = kmeans(&rs, &config(1), &w).unwrap();
        let global = rank_h_average_euclidean(&rs, &WeightSystem::uniform(5), 1, &w).unwrap();
        assert!((model.centroids[0].to_operator(&w) - global.to_operator(&w)).norm() < 1e-10);
        assert!(model.between_over_total.abs() < 1e-12);
    }

    #[test]
    fn assignment_ties_and_identity() {
        let mut rng = rng(4);
        let w = random_weights(5, &mut rng);
        let rs = random_resultants(5, 3, &w, &mut rng);
        let c: Vec<RankHOperator> = rs
            .iter()
            .map(|r| RankHOperator::truncate(r.op(), 1, &w).unwrap())
            .collect();
        let rank1 = random_rank1(5, &w, &mut rng);
        let own = RankHOperator::truncate(rank1.op(), 1, &w).unwrap();
        let cents = vec![c[0].clone(), own.clone(), own];
        for d in [DistanceKind::Chord, DistanceKind::Geodesic] {
            assert_eq!(assign(&rank1, &cents, d, &w).unwrap(), 1);
        }
        assert!(assign(&rank1, &[], DistanceKind::Chord, &w).is_err());
    }

    #[test]
    fn argmax_cosine_equals_argmin_distances() {
        let mut rng = rng(5);
        for _ in 0..100 {
            let w = random_weights(5, &mut rng);
            let rs = random_resultants(5, 6, &w, &mut rng);
            let cents: Vec<RankHOperator> = rs[..3]
                .iter()
                .map(|r| RankHOperator::truncate(r.op(), 1, &w).unwrap())
                .collect();
            for r in &rs[3..] {
                let a = assign(r, &cents, DistanceKind::Chord, &w).unwrap();
                let b = assign(r, &cents, DistanceKind::Geodesic, &w).unwrap();
                assert_eq!(a, b);
                let chord: Vec<f64> = cents
                    .iter()
                    .map(|c| crate::operator_space::chord_dist(r, &c.to_resultant(&w), &w).unwrap())
                    .collect();
                let min = chord.iter().cloned().fold(f64::INFINITY, f64::min);
                assert!((chord[a] - min).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fixed_rank_chord_inertia_never_increases() {
        let mut rng = rng(6);
        for _ in 0..10 {
            let w = random_weights(8, &mut rng);
            let rs = random_resultants(8, 12, &w, &mut rng);
            let cfg = ClusteringConfig {
                criterion: RankCriterion::Fixed { h: 2 },
                ..config(3)
            };
            let model = kmeans(&rs, &cfg, &w).unwrap();
            for pair in model.inertia_trace.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-12, "{:?}", model.inertia_trace);
            }
            assert_eq!(model.n_clusters(), 3);
            for l in 0..3 {
                assert!(!model.members(l).is_empty());
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let mut rng = rng(7);
        let w = random_weights(7, &mut rng);
        let rs = random_resultants(7, 10, &w, &mut rng);
        let cfg = ClusteringConfig {
            distance: DistanceKind::Geodesic,
            criterion: RankCriterion::TraceRatio { theta: 0.5 },
            ..config(3)
        };
        let a = kmeans(&rs, &cfg, &w).unwrap();
        let b = kmeans(&rs, &cfg, &w).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_cluster_repair_moves_farthest() {
        let table = vec![vec![0.1, 0.0], vec![0.5, 0.0], vec![0.3, 0.0]];
        let mut a = vec![0, 0, 0];
        repair_empty(&mut a, &table, 2);
        assert_eq!(a, vec![0, 1, 0]);
    }

    #[test]
    fn random_partition_covers_all_clusters() {
        let mut rng = rng(8);
        for _ in 0..50 {
            let p = random_partition(7, 4, &mut rng);
            for l in 0..4 {
                assert!(p.contains(&l));
            }
        }
    }

    #[test]
    fn well_separated_groups_are_recovered() {
        let mut rng = rng(9);
        let n = 20;
        let w = Weights::uniform(n);
        use nalgebra::DVector;
        use rand_distr::{Distribution, StandardNormal};
        let latents: Vec<DVector<f64>> = (0..3)
            .map(|_| DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng)))
            .collect();
        let mut rs = Vec::new();
        let mut truth = Vec::new();
        for (g, z) in latents.iter().enumerate() {
            for _ in 0..4 {
                let x = z + DVector::from_fn(n, |_, _| { let e: f64 = StandardNormal.sample(&mut rng); 0.1 * e });
                let s = crate::encoding::encode_numeric(&x, &w).unwrap();
                rs.push(crate::encoding::resultant(&s, &w, true).unwrap());
                truth.push(g);
            }
        }
        let model = kmeans(&rs, &config(3), &w).unwrap();
        for i in 0..rs.len() {
            for j in 0..rs.len() {
                assert_eq!(truth[i] == truth[j], model.assignments[i] == model.assignments[j]);
            }
        }
        assert!(model.converged);
    }
}
