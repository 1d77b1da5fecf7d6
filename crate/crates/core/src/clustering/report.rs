use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{check_resultants, kmeans, ClusterModel, ClusteringConfig};
use crate::averaging::{rank_h_average_geodesic, weighted_average, GeodesicOptions, WeightSystem};
use crate::encoding::Resultant;
use crate::error::{Error, Result};
use crate::geometry::Weights;
use crate::operator_space::{checked_cos, chord_from_cos, geodesic_from_cos};

/// Closeness of one variable to the centroid of its cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberSummary {
    pub index: usize,
    pub cluster: usize,
    pub cosine: f64,
    pub chord: f64,
    pub geodesic: f64,
}

/// One row per resultant, in input order.
pub fn cluster_summary(model: &ClusterModel, resultants: &[Resultant], w: &Weights) -> Result<Vec<MemberSummary>> {
    if model.assignments.len() != resultants.len() {
        return Err(Error::DimensionMismatch {
            expected: model.assignments.len(),
            actual: resultants.len(),
        });
    }
    resultants
        .iter()
        .zip(&model.assignments)
        .enumerate()
        .map(|(index, (r, &cluster))| {
            let cosine = checked_cos(model.centroids[cluster].dot_operator(r.op(), w))?;
            Ok(MemberSummary {
                index,
                cluster,
                cosine,
                chord: chord_from_cos(cosine)?,
                geodesic: geodesic_from_cos(cosine)?,
            })
        })
        .collect()
}

/// Cosines between centroids, unit diagonal.
pub fn centroid_separation(model: &ClusterModel, w: &Weights) -> DMatrix<f64> {
    let l = model.centroids.len();
    let mut m = DMatrix::identity(l, l);
    for a in 0..l {
        for b in a + 1..l {
            let c = model.centroids[a].dot(&model.centroids[b], w);
            m[(a, b)] = c;
            m[(b, a)] = c;
        }
    }
    m
}

/// `D_H = Σ_k δ²(R̃_k, R̃_H)` about the global geodesic rank-H average, `H = 1..=h_max`.
pub fn geodesic_inertia_profile(resultants: &[Resultant], h_max: usize, w: &Weights) -> Result<Vec<f64>> {
    check_resultants(resultants)?;
    let omega = WeightSystem::uniform(resultants.len());
    let rank = weighted_average(resultants, &omega, w)?.eigen(w)?.numerical_rank();
    if h_max == 0 || h_max > rank {
        return Err(Error::RankTooLarge {
            requested: h_max,
            available: rank,
        });
    }
    (1..=h_max)
        .map(|h| {
            let fit = rank_h_average_geodesic(resultants, &omega, h, w, &GeodesicOptions::default())?;
            if !fit.converged {
                warn!("geodesic rank-{h} average: residual {:e}", fit.residual);
            }
            let mut total = 0.0;
            for r in resultants {
                let d = geodesic_from_cos(fit.average.dot_operator(r.op(), w))?;
                total += d * d;
            }
            Ok(total)
        })
        .collect()
}

/// Between/total inertia ratio for each cluster count in `counts`.
pub fn inertia_ratio_curve(
    resultants: &[Resultant],
    base: &ClusteringConfig,
    counts: &[usize],
    w: &Weights,
) -> Result<Vec<f64>> {
    counts
        .iter()
        .map(|&l| {
            let cfg = ClusteringConfig {
                clusters: l,
                ..base.clone()
            };
            Ok(kmeans(resultants, &cfg, w)?.between_over_total)
        })
        .collect()
}

/// `v_{i−1} − 2v_i + v_{i+1}` at interior points; empty below three values.
pub fn second_differences(values: &[f64]) -> Vec<f64> {
    values
        .windows(3)
        .map(|v| v[0] - 2.0 * v[1] + v[2])
        .collect()
}
