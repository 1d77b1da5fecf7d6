//! Weighted averages of normed resultants.
//!
//! The classical average `R̄ = Σ ω_k R̃_k` lies inside the unit ball; projecting
//! it back to the sphere gives the sphere-constrained average, and truncating
//! its spectrum to the leading `H` eigenpairs before projecting gives the
//! euclidean rank-H average. The geodesic rank-H average lives in
//! [`geodesic`].

pub mod geodesic;
mod rank;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::encoding::Resultant;
use crate::error::{Error, Result};
use crate::geometry::{
    factored_operator, fix_column_signs, w_gram, w_spsd_eigen, Operator, WEigen, Weights,
};
use crate::operator_space::DistanceKind;

pub use geodesic::{
    arc_line_search, fixed_point_residual, geodesic_gradients, geodesic_objective,
    geodesic_objective_operator, geodesic_step, rank_h_average_geodesic, GeodesicAverage,
    GeodesicOptions,
};
pub use rank::{choose_rank, RankCriterion};

impl AsRef<Resultant> for Resultant {
    fn as_ref(&self) -> &Resultant {
        self
    }
}

/// Non-negative weights `ω_k` summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSystem(Vec<f64>);

impl WeightSystem {
    pub fn new(omega: Vec<f64>) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::Empty("weight system"));
        }
        if omega.iter().any(|o| !o.is_finite() || *o < 0.0) {
            return Err(Error::InvalidConfig("weights must be non-negative".into()));
        }
        let total: f64 = omega.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self(omega))
    }

    pub fn uniform(k: usize) -> Self {
        assert!(k > 0, "uniform weight system needs k >= 1");
        Self(vec![1.0 / k as f64; k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// A unit-norm rank-H operator in factored form `U diag(λ) U'W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankHOperator {
    u: DMatrix<f64>,
    lambda: DVector<f64>,
}

impl RankHOperator {
    /// Validates `U'WU = I`, `‖λ‖ = 1` and `λ ≥ 0`; columns are re-ordered by
    /// decreasing `λ` and signs canonicalised.
    pub fn new(u: DMatrix<f64>, lambda: DVector<f64>, w: &Weights) -> Result<Self> {
        if u.ncols() != lambda.len() || u.ncols() == 0 {
            return Err(Error::DimensionMismatch {
                expected: u.ncols(),
                actual: lambda.len(),
            });
        }
        if u.nrows() != w.len() {
            return Err(Error::DimensionMismatch {
                expected: w.len(),
                actual: u.nrows(),
            });
        }
        let h = u.ncols();
        let gram_err = (w_gram(&u, w) - DMatrix::identity(h, h)).norm();
        if gram_err > 1e-10 * (h as f64).sqrt().max(1.0) * 10.0 {
            return Err(Error::InvalidConfig(format!(
                "factor is not W-orthonormal (error {gram_err:e})"
            )));
        }
        if lambda.iter().any(|l| *l < -1e-12) {
            return Err(Error::InvalidConfig("negative λ".into()));
        }
        if (lambda.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormed(lambda.norm()));
        }
        Ok(Self::canonical(u, lambda))
    }

    /// Sorts by decreasing `λ` and fixes column signs without validation.
    pub(crate) fn canonical(u: DMatrix<f64>, lambda: DVector<f64>) -> Self {
        let h = lambda.len();
        let mut order: Vec<usize> = (0..h).collect();
        order.sort_by(|&a, &b| lambda[b].total_cmp(&lambda[a]));
        let mut su = DMatrix::zeros(u.nrows(), h);
        let mut sl = DVector::zeros(h);
        for (dst, &src) in order.iter().enumerate() {
            su.set_column(dst, &u.column(src));
            sl[dst] = lambda[src].max(0.0);
        }
        fix_column_signs(&mut su);
        Self { u: su, lambda: sl }
    }

    /// Leading `h` eigenpairs of a W-eigendecomposition, with `λ` renormalised.
    pub fn from_eigen(eig: &WEigen, h: usize) -> Result<Self> {
        let available = eig.numerical_rank();
        if h == 0 || h > available {
            return Err(Error::RankTooLarge {
                requested: h,
                available,
            });
        }
        let (u, lambda) = eig.truncated(h);
        let norm = lambda.norm();
        Ok(Self::canonical(u, lambda / norm))
    }

    /// Rank-`h` truncation of an arbitrary W-spsd operator, projected to the sphere.
    pub fn truncate(op: &Operator, h: usize, w: &Weights) -> Result<Self> {
        Self::from_eigen(&w_spsd_eigen(op, w)?, h)
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn lambda(&self) -> &DVector<f64> {
        &self.lambda
    }

    pub fn rank(&self) -> usize {
        self.lambda.len()
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    /// Dense operator `U diag(λ) U'W`.
    pub fn to_operator(&self, w: &Weights) -> Operator {
        factored_operator(&self.u, &self.lambda, w)
    }

    pub fn to_resultant(&self, w: &Weights) -> Resultant {
        Resultant::from_parts(self.to_operator(w), true)
    }

    /// `[R|A] = Σ_h λ_h u_h'WAu_h` for a W-spsd operator `A`.
    pub fn dot_operator(&self, a: &Operator, w: &Weights) -> f64 {
        let wa = w.left_mul(a);
        let au = &wa * &self.u;
        (0..self.rank())
            .map(|h| self.lambda[h] * self.u.column(h).dot(&au.column(h)))
            .sum()
    }

    /// `[R|R']` between two factored operators.
    pub fn dot(&self, other: &RankHOperator, w: &Weights) -> f64 {
        let cross = self.u.transpose() * w.left_mul(&other.u);
        let mut acc = 0.0;
        for h in 0..self.rank() {
            for g in 0..other.rank() {
                acc += self.lambda[h] * other.lambda[g] * cross[(h, g)].powi(2);
            }
        }
        acc
    }
}

fn check_inputs<R: AsRef<Resultant>>(resultants: &[R], omega: &WeightSystem) -> Result<usize> {
    if resultants.is_empty() {
        return Err(Error::Empty("no resultants to average"));
    }
    if omega.len() != resultants.len() {
        return Err(Error::DimensionMismatch {
            expected: resultants.len(),
            actual: omega.len(),
        });
    }
    let n = resultants[0].as_ref().n();
    for r in resultants {
        let r = r.as_ref();
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
    Ok(n)
}

/// `R̄ = Σ ω_k R̃_k`; lies in the unit ball.
pub fn weighted_average<R: AsRef<Resultant>>(
    resultants: &[R],
    omega: &WeightSystem,
    w: &Weights,
) -> Result<Resultant> {
    let n = check_inputs(resultants, omega)?;
    let mut acc = DMatrix::zeros(n, n);
    for (r, om) in resultants.iter().zip(omega.as_slice()) {
        if *om > 0.0 {
            acc += r.as_ref().op() * *om;
        }
    }
    let norm = crate::geometry::operator_norm(&acc, w)?;
    Ok(Resultant::from_parts(acc, (norm - 1.0).abs() <= 1e-10))
}

/// `R̄/‖R̄‖`, the minimiser of `Σ ω_k ‖R̃_k − R‖²` over the sphere.
pub fn sphere_average<R: AsRef<Resultant>>(
    resultants: &[R],
    omega: &WeightSystem,
    w: &Weights,
) -> Result<Resultant> {
    let avg = weighted_average(resultants, omega, w)?;
    let norm = avg.norm(w)?;
    if norm <= 1e-300 {
        return Err(Error::ZeroOperator("weighted average is zero"));
    }
    Ok(Resultant::from_parts(avg.into_op() / norm, true))
}

/// Weighted sum of squared chord distances `Σ ω_k ‖R̃_k − R‖²` to a unit-norm `R`.
pub fn chord_objective<R: AsRef<Resultant>>(
    op: &Operator,
    resultants: &[R],
    omega: &WeightSystem,
    w: &Weights,
) -> Result<f64> {
    let mut total = 0.0;
    for (r, om) in resultants.iter().zip(omega.as_slice()) {
        let diff = r.as_ref().op() - op;
        total += om * crate::geometry::operator_dot(&diff, &diff, w)?;
    }
    Ok(total)
}

/// Euclidean rank-H average: leading `h` eigenpairs of `R̄`, normed.
pub fn rank_h_average_euclidean<R: AsRef<Resultant>>(
    resultants: &[R],
    omega: &WeightSystem,
    h: usize,
    w: &Weights,
) -> Result<RankHOperator> {
    let avg = weighted_average(resultants, omega, w)?;
    let eig = avg.eigen(w)?;
    RankHOperator::from_eigen(eig, h)
}

/// A fitted rank-H average together with how it was obtained.
#[derive(Debug, Clone)]
pub struct AverageFit {
    pub centroid: RankHOperator,
    /// Spectrum of the classical weighted average, descending.
    pub spectrum: Vec<f64>,
    pub rank: usize,
    pub iterations: usize,
    pub converged: bool,
}

/// Rank chosen by `criterion` on the spectrum of `R̄`, then the euclidean or
/// geodesic rank-H average depending on `distance`.
pub fn rank_h_average<R: AsRef<Resultant>>(
    resultants: &[R],
    omega: &WeightSystem,
    criterion: RankCriterion,
    distance: DistanceKind,
    w: &Weights,
) -> Result<AverageFit> {
    let avg = weighted_average(resultants, omega, w)?;
    let eig = avg.eigen(w)?;
    let spectrum: Vec<f64> = eig.values.iter().cloned().collect();
    let h = choose_rank(&spectrum, criterion)?;
    match distance {
        DistanceKind::Chord => Ok(AverageFit {
            centroid: RankHOperator::from_eigen(eig, h)?,
            spectrum,
            rank: h,
            iterations: 0,
            converged: true,
        }),
        DistanceKind::Geodesic => {
            let fit = rank_h_average_geodesic(resultants, omega, h, w, &GeodesicOptions::default())?;
            Ok(AverageFit {
                centroid: fit.average,
                spectrum,
                rank: h,
                iterations: fit.iterations,
                converged: fit.converged,
            })
        }
    }
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use crate::geometry::operator_dot;
    use rand::Rng;

    #[test]
    fn weight_system_validation() {
        assert!(WeightSystem::new(vec![0.5, 0.5]).is_ok());
        assert!(WeightSystem::new(vec![0.5, 0.6]).is_err());
        assert!(WeightSystem::new(vec![-0.5, 1.5]).is_err());
        assert!(WeightSystem::new(vec![]).is_err());
    }

    #[test]
    fn classical_average_basics() {
        let mut rng = rng(60);
        let n = 6;
        let w = random_weights(n, &mut rng);
        let rs = random_resultants(n, 3, &w, &mut rng);
        let single = weighted_average(&rs[..1], &WeightSystem::uniform(1), &w).unwrap();
        assert!((single.op() - rs[0].op()).norm() < 1e-14);
        assert!(single.is_normed());

        let same = [rs[1].clone(), rs[1].clone()];
        let omega = WeightSystem::new(vec![0.3, 0.7]).unwrap();
        let avg = weighted_average(&same, &omega, &w).unwrap();
        assert!((avg.op() - rs[1].op()).norm() < 1e-12);

        let pair = weighted_average(&rs[..2], &WeightSystem::uniform(2), &w).unwrap();
        assert!(pair.norm(&w).unwrap() < 1.0 - 1e-6);
        assert!(crate::geometry::w_spsd_eigen(pair.op(), &w).is_ok());
        let empty: Vec<Resultant> = vec![];
        assert!(weighted_average(&empty, &WeightSystem::uniform(1), &w).is_err());
    }

    #[test]
    fn huygens_identity() {
        let mut rng = rng(61);
        for _ in 0..20 {
            let n = 6;
            let w = random_weights(n, &mut rng);
            let rs = random_resultants(n, 5, &w, &mut rng);
            let omega = random_omega(5, &mut rng);
            let avg = weighted_average(&rs, &omega, &w).unwrap();
            let r = random_resultants(n, 3, &w, &mut rng).pop().unwrap();
            let lhs = chord_objective(r.op(), &rs, &omega, &w).unwrap();
            let spread = chord_objective(avg.op(), &rs, &omega, &w).unwrap();
            let diff = r.op() - avg.op();
            let rhs = spread + operator_dot(&diff, &diff, &w).unwrap();
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn sphere_average_beats_random_candidates() {
        let mut rng = rng(62);
        let n = 4;
        let w = random_weights(n, &mut rng);
        let rs = random_resultants(n, 4, &w, &mut rng);
        let omega = random_omega(4, &mut rng);
        let best = sphere_average(&rs, &omega, &w).unwrap();
        let obj = chord_objective(best.op(), &rs, &omega, &w).unwrap();
        for _ in 0..10_000 {
            // random unit-norm W-spsd candidate of random rank
            let q = rng.random_range(1..=n);
            let x = DMatrix::from_fn(n, q, |_, _| rng.random_range(-1.0..1.0));
            let cand = w.right_mul(&(&x * x.transpose()));
            let cand = &cand / crate::geometry::operator_norm(&cand, &w).unwrap();
            assert!(chord_objective(&cand, &rs, &omega, &w).unwrap() >= obj - 1e-12);
        }
    }

    #[test]
    fn sphere_average_single_input() {
        let mut rng = rng(63);
        let w = random_weights(5, &mut rng);
        let rs = random_resultants(5, 1, &w, &mut rng);
        let avg = sphere_average(&rs, &WeightSystem::uniform(1), &w).unwrap();
        assert!((avg.op() - rs[0].op()).norm() < 1e-12);
    }

    #[test]
    fn full_rank_euclidean_average_is_sphere_average() {
        let mut rng = rng(64);
        for _ in 0..10 {
            let n = 6;
            let w = random_weights(n, &mut rng);
            let rs = random_resultants(n, 4, &w, &mut rng);
            let omega = random_omega(4, &mut rng);
            let avg = weighted_average(&rs, &omega, &w).unwrap();
            let rank = avg.eigen(&w).unwrap().numerical_rank();
            let rh = rank_h_average_euclidean(&rs, &omega, rank, &w).unwrap();
            let sphere = sphere_average(&rs, &omega, &w).unwrap();
            assert!((rh.to_operator(&w) - sphere.op()).norm() < 1e-10);
            assert!(matches!(
                rank_h_average_euclidean(&rs, &omega, rank + 1, &w),
                Err(Error::RankTooLarge { .. })
            ));
        }
    }

    #[test]
    fn rank_one_single_input_is_itself() {
        let mut rng = rng(65);
        let w = random_weights(5, &mut rng);
        let r = random_rank1(5, &w, &mut rng);
        let rh = rank_h_average_euclidean(std::slice::from_ref(&r), &WeightSystem::uniform(1), 1, &w)
            .unwrap();
        assert!((rh.to_operator(&w) - r.op()).norm() < 1e-10);
    }

    #[test]
    fn rank_one_average_beats_sampled_candidates() {
        let mut rng = rng(66);
        let n = 3;
        let w = random_weights(n, &mut rng);
        let rs = vec![random_rank1(n, &w, &mut rng), random_rank1(n, &w, &mut rng)];
        let omega = WeightSystem::uniform(2);
        let rh = rank_h_average_euclidean(&rs, &omega, 1, &w).unwrap();
        let obj = chord_objective(&rh.to_operator(&w), &rs, &omega, &w).unwrap();
        for _ in 0..100_000 {
            let cand = random_unit_rank1(n, &w, &mut rng);
            assert!(chord_objective(&cand, &rs, &omega, &w).unwrap() >= obj - 1e-12);
        }
    }

    #[test]
    fn rank_h_operator_validation_and_dots() {
        let mut rng = rng(67);
        let n = 6;
        let w = random_weights(n, &mut rng);
        let rs = random_resultants(n, 4, &w, &mut rng);
        let omega = random_omega(4, &mut rng);
        let a = rank_h_average_euclidean(&rs, &omega, 2, &w).unwrap();
        let b = rank_h_average_euclidean(&rs[..2], &WeightSystem::uniform(2), 1, &w).unwrap();
        let op_a = a.to_operator(&w);
        let op_b = b.to_operator(&w);
        assert!((a.dot(&b, &w) - operator_dot(&op_a, &op_b, &w).unwrap()).abs() < 1e-12);
        assert!((a.dot_operator(rs[0].op(), &w) - operator_dot(&op_a, rs[0].op(), &w).unwrap()).abs() < 1e-12);
        assert!((a.dot(&a, &w) - 1.0).abs() < 1e-10);
        assert!(RankHOperator::new(a.u().clone(), a.lambda() * 2.0, &w).is_err());
        assert!(RankHOperator::new(a.u() * 2.0, a.lambda().clone(), &w).is_err());
        let again = RankHOperator::new(a.u().clone(), a.lambda().clone(), &w).unwrap();
        assert_eq!(again, a);
    }
}
