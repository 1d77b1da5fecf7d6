//! Geodesic rank-H average.
//!
//! Maximises `g(λ, U) = −Σ ω_k arccos²(h_k)` with `h_k = tr(U'A_kUΛ)` and
//! `A_k = WR̃_k`, over `‖λ‖ = 1`, `U'WU = I_H`. Each step jumps to
//! `λ⁺ = γ/‖γ‖`, `U⁺ = W⁻¹Γ(Γ'W⁻¹Γ)^{-1/2}` (an ascent direction), then
//! searches the arc between the current and the proposed operator for the best
//! point and brings it back to rank `H`.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{rank_h_average_euclidean, RankHOperator, WeightSystem};
use crate::encoding::Resultant;
use crate::error::{Error, Result};
use crate::geometry::{operator_dot, w_gram, w_orthonormal_polar, Operator, Weights, INV_SQRT_FLOOR};
use crate::operator_space::checked_cos;

/// Above this scalar product `arccos(h)/√(1−h²)` is replaced by its limit 1.
const LIMIT_THRESHOLD: f64 = 1.0 - 1e-9;
const GOLDEN_ITERATIONS: usize = 60;
const MAX_BACKTRACKS: usize = 30;

/// Stopping rules for [`rank_h_average_geodesic`].
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicOptions {
    pub max_iter: usize,
    /// Absolute objective change below which the iteration may stop.
    pub objective_tol: f64,
    /// Fixed-point residual required alongside a small objective change.
    pub residual_tol: f64,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            objective_tol: 1e-10,
            residual_tol: 1e-8,
        }
    }
}

/// Result of the geodesic ascent.
#[derive(Debug, Clone)]
pub struct GeodesicAverage {
    pub average: RankHOperator,
    pub objective: f64,
    /// Objective after initialisation and after every accepted step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    /// Set when a negative `γ` component had to be clamped to zero.
    pub gamma_clamped: bool,
}

/// `arccos(h)/√(1−h²)`, continuous at `h = 1`.
fn acos_ratio(h: f64) -> f64 {
    if h > LIMIT_THRESHOLD {
        1.0
    } else {
        h.acos() / (1.0 - h * h).sqrt()
    }
}

/// Precomputed `A_k = WR̃_k` with weights.
struct Problem<'a> {
    a: Vec<Operator>,
    omega: &'a [f64],
    w: &'a Weights,
}

impl<'a> Problem<'a> {
    fn new<R: AsRef<Resultant>>(
        resultants: &[R],
        omega: &'a WeightSystem,
        w: &'a Weights,
    ) -> Result<Self> {
        super::check_inputs(resultants, omega)?;
        let a = resultants
            .iter()
            .map(|r| {
                let wa = w.left_mul(r.as_ref().op());
                (&wa + wa.transpose()) * 0.5
            })
            .collect();
        Ok(Self {
            a,
            omega: omega.as_slice(),
            w,
        })
    }

    /// `h_k` and `η_k = (u_h'A_ku_h)_h` for every input.
    fn scalar_products(&self, u: &DMatrix<f64>, lambda: &DVector<f64>) -> Vec<(f64, DVector<f64>, DMatrix<f64>)> {
        self.a
            .iter()
            .map(|a| {
                let au = a * u;
                let eta = DVector::from_fn(u.ncols(), |h, _| u.column(h).dot(&au.column(h)));
                (eta.dot(lambda), eta, au)
            })
            .collect()
    }

    fn objective(&self, u: &DMatrix<f64>, lambda: &DVector<f64>) -> Result<f64> {
        let mut g = 0.0;
        for ((h, _, _), om) in self.scalar_products(u, lambda).iter().zip(self.omega) {
            let d = checked_cos(*h)?.acos();
            g -= om * d * d;
        }
        Ok(g)
    }

    fn gradients(&self, u: &DMatrix<f64>, lambda: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let hd = u.ncols();
        let mut gamma = DVector::zeros(hd);
        let mut big_gamma = DMatrix::zeros(u.nrows(), hd);
        for ((h, eta, au), om) in self.scalar_products(u, lambda).into_iter().zip(self.omega) {
            let h = checked_cos(h)?;
            let c = 2.0 * om * acos_ratio(h);
            gamma += &eta * c;
            // Γ += c · 2A_kUΛ
            for j in 0..hd {
                let scale = 2.0 * c * lambda[j];
                let mut col = big_gamma.column_mut(j);
                col.axpy(scale, &au.column(j), 1.0);
            }
        }
        Ok((gamma, big_gamma))
    }

    /// `None` for the direction when `Γ` is rank deficient, which happens when
    /// trailing `λ_h` are numerically zero.
    #[allow(clippy::type_complexity)]
    fn step(&self, u: &DMatrix<f64>, lambda: &DVector<f64>) -> Result<Option<(DMatrix<f64>, DVector<f64>, bool)>> {
        let (gamma, big_gamma) = self.gradients(u, lambda)?;
        let scale = gamma.amax().max(f64::MIN_POSITIVE);
        let clamped = gamma.iter().any(|v| *v < -1e-12 * scale);
        let gamma = gamma.map(|v| v.max(0.0));
        let norm = gamma.norm();
        if norm <= 0.0 || !norm.is_finite() {
            return Err(Error::ZeroGradient);
        }
        match w_orthonormal_polar(&big_gamma, self.w) {
            Ok(u_next) => Ok(Some((u_next, gamma / norm, clamped))),
            Err(Error::RankDeficient { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Maximiser of the linearisation `Σ c_k [R̃_k|R]` over rank-`h` points,
    /// i.e. the rank-`h` truncation of `Σ c_k R̃_k`.
    fn linearized_target(&self, u: &DMatrix<f64>, lambda: &DVector<f64>) -> Result<Option<RankHOperator>> {
        let n = u.nrows();
        let mut b = DMatrix::zeros(n, n);
        for ((h, _, _), (a, om)) in self.scalar_products(u, lambda).into_iter().zip(self.a.iter().zip(self.omega)) {
            let c = 2.0 * om * acos_ratio(checked_cos(h)?);
            b += a * c;
        }
        let eig = crate::geometry::w_spsd_eigen(&self.w.left_div(&b), self.w)?;
        Ok(RankHOperator::from_eigen(&eig, u.ncols()).ok())
    }

    fn residual(&self, u: &DMatrix<f64>, lambda: &DVector<f64>) -> Result<f64> {
        let (gamma, big_gamma) = self.gradients(u, lambda)?;
        let norm = gamma.norm();
        if norm <= 0.0 {
            return Err(Error::ZeroGradient);
        }
        let r_lambda = (lambda - gamma / norm).norm();
        let v = match w_orthonormal_polar(&big_gamma, self.w) {
            Ok(v) => v,
            Err(Error::RankDeficient { .. }) => {
                return Ok(r_lambda.max(self.subspace_residual(u, &big_gamma)));
            }
            Err(e) => return Err(e),
        };
        let mut r_u = 0.0;
        for h in 0..u.ncols() {
            let uc = u.column(h);
            let vc = v.column(h);
            let minus: f64 = (0..u.nrows()).map(|i| self.w.get(i) * (uc[i] - vc[i]).powi(2)).sum();
            let plus: f64 = (0..u.nrows()).map(|i| self.w.get(i) * (uc[i] + vc[i]).powi(2)).sum();
            r_u += minus.min(plus);
        }
        Ok(r_lambda.max(r_u.sqrt()))
    }

    /// Relative size of the part of `W⁻¹Γ` outside span `U`, plus the asymmetry
    /// of `U'Γ`; both vanish at a fixed point whatever the rank of `Γ`.
    fn subspace_residual(&self, u: &DMatrix<f64>, big_gamma: &DMatrix<f64>) -> f64 {
        let scale = w_gram(&self.w.left_div(big_gamma), self.w).trace().sqrt();
        if scale <= 0.0 {
            return 0.0;
        }
        let g = self.w.left_div(big_gamma);
        let s = u.transpose() * big_gamma;
        let outside = &g - u * &s;
        let off = w_gram(&outside, self.w).trace().max(0.0).sqrt();
        let asym = (&s - s.transpose()).norm();
        (off + asym) / scale
    }

    /// `[R̃_k|R]` for a dense operator.
    fn cosines_operator(&self, op: &Operator) -> Vec<f64> {
        // [R̃_k|R] = tr(A_k R W⁻¹ ...) reduces to Σ_ij (A_k)_ij R_ij / w_j with A_k = W R̃_k
        let n = op.nrows();
        self.a
            .iter()
            .map(|a| {
                let mut acc = 0.0;
                for j in 0..n {
                    let inv = 1.0 / self.w.get(j);
                    for i in 0..n {
                        acc += a[(i, j)] * op[(i, j)] * inv;
                    }
                }
                acc
            })
            .collect()
    }

    fn cosines_factored(&self, r: &RankHOperator) -> Vec<f64> {
        self.scalar_products(r.u(), r.lambda())
            .into_iter()
            .map(|(h, _, _)| h)
            .collect()
    }

    fn objective_from_cosines(&self, cosines: &[f64]) -> Result<f64> {
        let mut g = 0.0;
        for (c, om) in cosines.iter().zip(self.omega) {
            let d = checked_cos(*c)?.acos();
            g -= om * d * d;
        }
        Ok(g)
    }
}

/// Arc between two unit-norm operators, reduced to scalars.
struct Arc {
    prev: Vec<f64>,
    next: Vec<f64>,
    cross: f64,
}

impl Arc {
    fn norm(&self, tau: f64) -> f64 {
        let s = 1.0 - tau;
        (s * s + tau * tau + 2.0 * s * tau * self.cross).max(0.0).sqrt()
    }

    fn cosines(&self, tau: f64) -> Vec<f64> {
        let norm = self.norm(tau);
        self.prev
            .iter()
            .zip(&self.next)
            .map(|(p, q)| ((1.0 - tau) * p + tau * q) / norm)
            .collect()
    }

    /// Golden-section maximum on `[0, 1]`, compared against both endpoints.
    fn maximize(&self, problem: &Problem) -> Result<(f64, f64)> {
        let f = |tau: f64| problem.objective_from_cosines(&self.cosines(tau));
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let mut x1 = hi - ratio * (hi - lo);
        let mut x2 = lo + ratio * (hi - lo);
        let mut f1 = f(x1)?;
        let mut f2 = f(x2)?;
        for _ in 0..GOLDEN_ITERATIONS {
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + ratio * (hi - lo);
                f2 = f(x2)?;
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - ratio * (hi - lo);
                f1 = f(x1)?;
            }
        }
        let (mut best_tau, mut best) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
        for tau in [0.0, 1.0] {
            let v = f(tau)?;
            if v > best {
                best = v;
                best_tau = tau;
            }
        }
        Ok((best_tau, best))
    }
}

fn build_arc(problem: &Problem, prev: &RankHOperator, next: &RankHOperator) -> Result<Arc> {
    let cross = prev.dot(next, problem.w);
    if cross <= -1.0 + 1e-12 {
        return Err(Error::DegenerateArc);
    }
    Ok(Arc {
        prev: problem.cosines_factored(prev),
        next: problem.cosines_factored(next),
        cross,
    })
}

/// Rank-`h` truncation of `((1−τ)R_prev + τR_next)/‖·‖`, computed inside the
/// span of the two factors.
fn truncate_on_arc(
    prev: &RankHOperator,
    next: &RankHOperator,
    tau: f64,
    h: usize,
    w: &Weights,
) -> Result<RankHOperator> {
    if tau <= 0.0 {
        return Ok(prev.clone());
    }
    if tau >= 1.0 {
        return Ok(next.clone());
    }
    let n = prev.n();
    let (hp, hn) = (prev.rank(), next.rank());
    let mut basis = DMatrix::zeros(n, hp + hn);
    basis.columns_mut(0, hp).copy_from(prev.u());
    basis.columns_mut(hp, hn).copy_from(next.u());
    let mut coeffs = DVector::zeros(hp + hn);
    coeffs.rows_mut(0, hp).copy_from(&(prev.lambda() * (1.0 - tau)));
    coeffs.rows_mut(hp, hn).copy_from(&(next.lambda() * tau));

    // W-orthonormal basis Q of span(basis)
    let gram = w_gram(&basis, w);
    let eig = SymmetricEigen::new((&gram + gram.transpose()) * 0.5);
    let max = eig.eigenvalues.amax();
    let keep: Vec<usize> = (0..hp + hn).filter(|&i| eig.eigenvalues[i] > 1e-12 * max).collect();
    let mut q = DMatrix::zeros(n, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        let v = &basis * eig.eigenvectors.column(i) / eig.eigenvalues[i].sqrt();
        q.set_column(c, &v);
    }
    // S = Q'W B diag(coeffs) B'W Q
    let proj = q.transpose() * w.left_mul(&basis);
    let mut scaled = proj.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= coeffs[j];
    }
    let s = &scaled * proj.transpose();
    let small = SymmetricEigen::new((&s + s.transpose()) * 0.5);
    let mut order: Vec<usize> = (0..keep.len()).collect();
    order.sort_by(|&a, &b| small.eigenvalues[b].total_cmp(&small.eigenvalues[a]));
    if h > order.len() {
        return Err(Error::RankTooLarge {
            requested: h,
            available: order.len(),
        });
    }
    let mut u = DMatrix::zeros(n, h);
    let mut lambda = DVector::zeros(h);
    for (dst, &src) in order.iter().take(h).enumerate() {
        u.set_column(dst, &(&q * small.eigenvectors.column(src)));
        lambda[dst] = small.eigenvalues[src].max(0.0);
    }
    let norm = lambda.norm();
    if norm <= 0.0 {
        return Err(Error::ZeroOperator("truncated arc point"));
    }
    Ok(RankHOperator::canonical(u, lambda / norm))
}

/// Best rank-`h` point found on the arc towards `next` that improves on `g`.
fn best_on_arc(
    problem: &Problem,
    current: &RankHOperator,
    next: &RankHOperator,
    g: f64,
    h: usize,
) -> Result<Option<(RankHOperator, f64)>> {
    let arc = build_arc(problem, current, next)?;
    let (tau, _) = arc.maximize(problem)?;
    let mut candidates = vec![tau, 1.0];
    let mut t = tau;
    for _ in 0..MAX_BACKTRACKS {
        t *= 0.5;
        candidates.push(t);
    }
    for t in candidates {
        if t <= 0.0 {
            continue;
        }
        let cand = truncate_on_arc(current, next, t, h, problem.w)?;
        let gc = problem.objective(cand.u(), cand.lambda())?;
        if gc > g {
            return Ok(Some((cand, gc)));
        }
    }
    Ok(None)
}

/// `g(R) = −Σ ω_k arccos²([R̃_k|R])` for a factored unit-norm operator.
pub fn geodesic_objective<R: AsRef<Resultant>>(
    r: &RankHOperator,
    resultants: &[R],
    omega: &WeightSystem,
    w: &Weights,
) -> Result<f64> {
    if (r.lambda().norm() - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormed(r.lambda().norm()));
    }
    let problem = Problem::new(resultants, omega, w)?;
    problem.objective(r.u(), r.lambda())
}

/// `g(R)` for a dense unit-norm operator.
pub fn geodesic_objective_operator<R: AsRef<Resultant>>(
    op: &Operator,
    resultants: &[R],
    omega: &WeightSystem,
    w: &Weights,
) -> Result<f64> {
    let norm = operator_dot(op, op, w)?.sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormed(norm));
    }
    let problem = Problem::new(resultants, omega, w)?;
    problem.objective_from_cosines(&problem.cosines_operator(op))
}

/// Exact partial derivatives `(∂g/∂λ, ∂g/∂U)` at `(U, λ)`.
pub fn geodesic_gradients<R: AsRef<Resultant>>(
    u: &DMatrix<f64>,
    lambda: &DVector<f64>,
    resultants: &[R],
    omega: &WeightSystem,
    w: &Weights,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let problem = Problem::new(resultants, omega, w)?;
    problem.gradients(u, lambda)
}

/// One ascent step `λ⁺ = γ/‖γ‖`, `U⁺ = W⁻¹Γ(Γ'W⁻¹Γ)^{-1/2}`.
pub fn geodesic_step<R: AsRef<Resultant>>(
    u: &DMatrix<f64>,
    lambda: &DVector<f64>,
    resultants: &[R],
    omega: &WeightSystem,
    w: &Weights,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let problem = Problem::new(resultants, omega, w)?;
    let Some((u_next, l_next, clamped)) = problem.step(u, lambda)? else {
        return Err(Error::RankDeficient {
            smallest: 0.0,
            floor: INV_SQRT_FLOOR,
        });
    };
    if clamped {
        warn!("negative γ component clamped to zero");
    }
    Ok((u_next, l_next))
}

/// Distance of `(U, λ)` from the fixed-point equations, columns of `U` matched up to sign.
pub fn fixed_point_residual<R: AsRef<Resultant>>(
    r: &RankHOperator,
    resultants: &[R],
    omega: &WeightSystem,
    w: &Weights,
) -> Result<f64> {
    let problem = Problem::new(resultants, omega, w)?;
    problem.residual(r.u(), r.lambda())
}

/// Maximises `g` on the arc `R_τ = (R_prev + τ(R_next − R_prev))/‖·‖`, `τ ∈ [0, 1]`.
pub fn arc_line_search<R: AsRef<Resultant>>(
    prev: &RankHOperator,
    next: &RankHOperator,
    resultants: &[R],
    omega: &WeightSystem,
    w: &Weights,
) -> Result<(f64, Operator)> {
    let problem = Problem::new(resultants, omega, w)?;
    let arc = build_arc(&problem, prev, next)?;
    let (tau, _) = arc.maximize(&problem)?;
    let op = prev.to_operator(w) * (1.0 - tau) + next.to_operator(w) * tau;
    let norm = arc.norm(tau);
    Ok((tau, op / norm))
}

/// Geodesic rank-`h` average, started from the euclidean rank-`h` average.
pub fn rank_h_average_geodesic<R: AsRef<Resultant>>(
    resultants: &[R],
    omega: &WeightSystem,
    h: usize,
    w: &Weights,
    options: &GeodesicOptions,
) -> Result<GeodesicAverage> {
    let problem = Problem::new(resultants, omega, w)?;
    let mut current = rank_h_average_euclidean(resultants, omega, h, w)?;
    let mut g = problem.objective(current.u(), current.lambda())?;
    let mut trace = vec![g];
    let mut gamma_clamped = false;
    let mut iterations = 0;

    let mut residual = match problem.residual(current.u(), current.lambda()) {
        Ok(r) => r,
        Err(Error::ZeroGradient) => 0.0,
        Err(e) => return Err(e),
    };
    while iterations < options.max_iter && residual > options.residual_tol {
        iterations += 1;
        let mut targets = Vec::with_capacity(2);
        match problem.step(current.u(), current.lambda()) {
            Ok(Some((u_next, l_next, clamped))) => {
                gamma_clamped |= clamped;
                targets.push(RankHOperator::canonical(u_next, l_next));
            }
            Ok(None) => {}
            Err(Error::ZeroGradient) => break,
            Err(e) => return Err(e),
        }
        if let Some(t) = problem.linearized_target(current.u(), current.lambda())? {
            targets.push(t);
        }
        let mut accepted: Option<(RankHOperator, f64)> = None;
        for next in &targets {
            if let Some((cand, gc)) = best_on_arc(&problem, &current, next, g, h)? {
                if accepted.as_ref().is_none_or(|(_, ga)| gc > *ga) {
                    accepted = Some((cand, gc));
                }
            }
        }
        let Some((cand, gc)) = accepted else {
            debug!("geodesic ascent stalled after {iterations} iterations");
            break;
        };
        let delta = gc - g;
        current = cand;
        g = gc;
        trace.push(g);
        residual = problem.residual(current.u(), current.lambda())?;
        if delta < options.objective_tol && residual <= options.residual_tol {
            break;
        }
    }
    let converged = residual <= options.residual_tol.max(1e-6);
    if !converged {
        warn!(
            "geodesic rank-{h} average did not converge: residual {residual:e} after {iterations} iterations"
        );
    }
    Ok(GeodesicAverage {
        average: current,
        objective: g,
        trace,
        iterations,
        residual,
        converged,
        gamma_clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::*;
    use crate::averaging::{sphere_average, weighted_average};
    use crate::operator_space::geodesic_dist;
    use rand::Rng;

    /// g(U, λ) straight from the definition, without any constraint.
    fn raw_objective(u: &DMatrix<f64>, lambda: &DVector<f64>, rs: &[Resultant], omega: &WeightSystem, w: &Weights) -> f64 {
        let op = crate::geometry::factored_operator(u, lambda, w);
        rs.iter()
            .zip(omega.as_slice())
            .map(|(r, om)| {
                let c = operator_dot(r.op(), &op, w).unwrap();
                -om * c.acos().powi(2)
            })
            .sum()
    }

    #[test]
    fn objective_trivial_values() {
        let mut rng = rng(80);
        let w = random_weights(5, &mut rng);
        let r = random_rank1(5, &w, &mut rng);
        let single = std::slice::from_ref(&r);
        let rh = RankHOperator::truncate(r.op(), 1, &w).unwrap();
        let g = geodesic_objective(&rh, single, &WeightSystem::uniform(1), &w).unwrap();
        assert!(g.abs() < 1e-12);
    }

    #[test]
    fn objective_orthogonal_is_minus_quarter_pi_squared() {
        let w = Weights::uniform(4);
        // centred standardised vectors, W-orthogonal
        let x = DVector::from_vec(vec![1.0, -1.0, 1.0, -1.0]);
        let y = DVector::from_vec(vec![1.0, 1.0, -1.0, -1.0]);
        let rx = crate::encoding::resultant(&crate::encoding::encode_numeric(&x, &w).unwrap(), &w, true).unwrap();
        let ry = RankHOperator::new(
            DMatrix::from_column_slice(4, 1, y.as_slice()),
            DVector::from_element(1, 1.0),
            &w,
        )
        .unwrap();
        let g = geodesic_objective(&ry, std::slice::from_ref(&rx), &WeightSystem::uniform(1), &w).unwrap();
        assert!((g + std::f64::consts::FRAC_PI_2.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn objective_matches_distance_sum() {
        let mut rng = rng(81);
        let n = 6;
        let w = random_weights(n, &mut rng);
        let rs = random_resultants(n, 5, &w, &mut rng);
        let omega = random_omega(5, &mut rng);
        let r = rank_h_average_euclidean(&rs, &omega, 2, &w).unwrap();
        let res = r.to_resultant(&w);
        let direct: f64 = rs
            .iter()
            .zip(omega.as_slice())
            .map(|(x, om)| -om * geodesic_dist(x, &res, &w).unwrap().powi(2))
            .sum();
        let g = geodesic_objective(&r, &rs, &omega, &w).unwrap();
        assert!((g - direct).abs() < 1e-12);
        let g_op = geodesic_objective_operator(&r.to_operator(&w), &rs, &omega, &w).unwrap();
        assert!((g - g_op).abs() < 1e-12);
    }

    fn fd_check(rs: &[Resultant], omega: &WeightSystem, u: &DMatrix<f64>, lambda: &DVector<f64>, w: &Weights) {
        let (gamma, big_gamma) = geodesic_gradients(u, lambda, rs, omega, w).unwrap();
        let eps = 1e-6;
        for h in 0..lambda.len() {
            let mut lp = lambda.clone();
            let mut lm = lambda.clone();
            lp[h] += eps;
            lm[h] -= eps;
            let fd = (raw_objective(u, &lp, rs, omega, w) - raw_objective(u, &lm, rs, omega, w)) / (2.0 * eps);
            assert!((fd - gamma[h]).abs() <= 1e-5 * gamma[h].abs().max(1e-3), "γ {fd} vs {}", gamma[h]);
        }
        for i in 0..u.nrows() {
            for h in 0..u.ncols() {
                let mut up = u.clone();
                let mut um = u.clone();
                up[(i, h)] += eps;
                um[(i, h)] -= eps;
                let fd = (raw_objective(&up, lambda, rs, omega, w) - raw_objective(&um, lambda, rs, omega, w)) / (2.0 * eps);
                let exact = big_gamma[(i, h)];
                assert!((fd - exact).abs() <= 1e-5 * exact.abs().max(1e-3), "Γ {fd} vs {exact}");
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = rng(82);
        for _ in 0..10 {
            let n = 5;
            let w = random_weights(n, &mut rng);
            let rs = random_resultants(n, 4, &w, &mut rng);
            let omega = random_omega(4, &mut rng);
            let r = rank_h_average_euclidean(&rs, &omega, 2, &w).unwrap();
            fd_check(&rs, &omega, r.u(), r.lambda(), &w);
        }
    }

    #[test]
    fn gradient_near_coincidence() {
        // K = 1 and R a slight perturbation of the input, so h = 1 − 1e-3
        let mut rng = rng(83);
        let n = 5;
        let w = random_weights(n, &mut rng);
        let r = random_rank1(n, &w, &mut rng);
        let base = RankHOperator::truncate(r.op(), 1, &w).unwrap();
        let other = random_rank1(n, &w, &mut rng);
        let dir = RankHOperator::truncate(other.op(), 1, &w).unwrap();
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut u = base.u().clone();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let cand = base.u() * (1.0 - mid) + dir.u() * mid;
            let cand = &cand / crate::geometry::w_norm(&cand.column(0).into_owned(), &w).unwrap();
            let h = operator_dot(r.op(), &crate::geometry::factored_operator(&cand, &DVector::from_element(1, 1.0), &w), &w).unwrap();
            if h > 1.0 - 1e-3 {
                lo = mid;
                u = cand;
            } else {
                hi = mid;
            }
        }
        let lambda = DVector::from_element(1, 1.0);
        let single = std::slice::from_ref(&r);
        fd_check(single, &WeightSystem::uniform(1), &u, &lambda, &w);
    }

    #[test]
    fn step_follows_ascent_direction() {
        let mut rng = rng(84);
        for _ in 0..20 {
            let n = 6;
            let w = random_weights(n, &mut rng);
            let rs = random_resultants(n, 5, &w, &mut rng);
            let omega = random_omega(5, &mut rng);
            let h = rng.random_range(1..=2);
            let start = rank_h_average_euclidean(&rs, &omega, h, &w).unwrap();
            let (gamma, big_gamma) = geodesic_gradients(start.u(), start.lambda(), &rs, &omega, &w).unwrap();
            let (u1, l1) = geodesic_step(start.u(), start.lambda(), &rs, &omega, &w).unwrap();
            assert!((&l1 - start.lambda()).dot(&gamma) >= -1e-12);
            assert!(((&u1 - start.u()).transpose() * &big_gamma).trace() >= -1e-12);
            assert!((w_gram(&u1, &w) - DMatrix::identity(h, h)).norm() < 1e-10);
        }
    }

    #[test]
    fn step_symmetric_under_input_swap() {
        let mut rng = rng(85);
        let n = 5;
        let w = random_weights(n, &mut rng);
        let rs = random_resultants(n, 2, &w, &mut rng);
        let swapped = vec![rs[1].clone(), rs[0].clone()];
        let omega = WeightSystem::uniform(2);
        let r = rank_h_average_euclidean(&rs, &omega, 1, &w).unwrap();
        let (g1, _) = geodesic_gradients(r.u(), r.lambda(), &rs, &omega, &w).unwrap();
        let (g2, _) = geodesic_gradients(r.u(), r.lambda(), &swapped, &omega, &w).unwrap();
        assert!((g1 - g2).norm() < 1e-12);
    }

    #[test]
    fn single_input_is_stationary() {
        let mut rng = rng(86);
        let n = 6;
        let w = random_weights(n, &mut rng);
        let rs = random_resultants(n, 3, &w, &mut rng);
        let target = rs[2].clone();
        let rank = target.eigen(&w).unwrap().numerical_rank();
        let single = std::slice::from_ref(&target);
        let omega = WeightSystem::uniform(1);
        let fit = rank_h_average_geodesic(single, &omega, rank, &w, &GeodesicOptions::default()).unwrap();
        assert!((fit.average.to_operator(&w) - target.op()).norm() < 1e-8);
        assert!(fit.converged);
        let start = RankHOperator::truncate(target.op(), rank, &w).unwrap();
        let (u1, l1) = geodesic_step(start.u(), start.lambda(), single, &omega, &w).unwrap();
        let stepped = RankHOperator::canonical(u1, l1);
        assert!((stepped.to_operator(&w) - target.op()).norm() < 1e-8);
    }

    #[test]
    fn equal_inputs_give_truncation() {
        let mut rng = rng(87);
        let n = 6;
        let w = random_weights(n, &mut rng);
        let r = random_resultants(n, 3, &w, &mut rng).pop().unwrap();
        let rs = vec![r.clone(), r.clone(), r.clone()];
        let omega = random_omega(3, &mut rng);
        let fit = rank_h_average_geodesic(&rs, &omega, 1, &w, &GeodesicOptions::default()).unwrap();
        let truncated = RankHOperator::truncate(r.op(), 1, &w).unwrap();
        assert!((fit.average.to_operator(&w) - truncated.to_operator(&w)).norm() < 1e-8);
    }

    #[test]
    fn line_search_dominates_grid() {
        let mut rng = rng(88);
        for _ in 0..10 {
            let n = 5;
            let w = random_weights(n, &mut rng);
            let rs = random_resultants(n, 4, &w, &mut rng);
            let omega = random_omega(4, &mut rng);
            let a = rank_h_average_euclidean(&rs[..2], &WeightSystem::uniform(2), 1, &w).unwrap();
            let b = rank_h_average_euclidean(&rs[2..], &WeightSystem::uniform(2), 1, &w).unwrap();
            let (tau, best) = arc_line_search(&a, &b, &rs, &omega, &w).unwrap();
            assert!((0.0..=1.0).contains(&tau));
            let g_best = geodesic_objective_operator(&best, &rs, &omega, &w).unwrap();
            let g_prev = geodesic_objective(&a, &rs, &omega, &w).unwrap();
            let g_next = geodesic_objective(&b, &rs, &omega, &w).unwrap();
            assert!(g_best >= g_prev.max(g_next) - 1e-12);
            let (pa, pb) = (a.to_operator(&w), b.to_operator(&w));
            let grid_best = (0..=1000)
                .map(|i| {
                    let t = i as f64 / 1000.0;
                    let op = &pa * (1.0 - t) + &pb * t;
                    let op = &op / crate::geometry::operator_norm(&op, &w).unwrap();
                    geodesic_objective_operator(&op, &rs, &omega, &w).unwrap()
                })
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(g_best >= grid_best - 1e-9);
        }
    }

    #[test]
    fn line_search_endpoints() {
        let mut rng = rng(89);
        let n = 5;
        let w = random_weights(n, &mut rng);
        let r = random_rank1(n, &w, &mut rng);
        let other = random_rank1(n, &w, &mut rng);
        let single = std::slice::from_ref(&r);
        let omega = WeightSystem::uniform(1);
        let opt = RankHOperator::truncate(r.op(), 1, &w).unwrap();
        let off = RankHOperator::truncate(other.op(), 1, &w).unwrap();
        let (tau, _) = arc_line_search(&off, &opt, single, &omega, &w).unwrap();
        assert!(tau > 1.0 - 1e-6);
        let (tau, best) = arc_line_search(&opt, &off, single, &omega, &w).unwrap();
        assert!(tau < 1e-6);
        assert!(geodesic_objective_operator(&best, single, &omega, &w).unwrap().abs() < 1e-10);
    }

    #[test]
    fn iteration_is_monotone_and_reaches_fixed_point() {
        let mut rng = rng(90);
        for _ in 0..20 {
            let n = rng.random_range(4..8);
            let k = rng.random_range(2..6);
            let w = random_weights(n, &mut rng);
            let rs = random_resultants(n, k, &w, &mut rng);
            let omega = random_omega(k, &mut rng);
            let rank = weighted_average(&rs, &omega, &w).unwrap().eigen(&w).unwrap().numerical_rank();
            let h = rng.random_range(1..=rank.min(3));
            let fit = rank_h_average_geodesic(&rs, &omega, h, &w, &GeodesicOptions::default()).unwrap();
            for pair in fit.trace.windows(2) {
                assert!(pair[1] >= pair[0] - 1e-12);
            }
            assert!(fit.converged, "residual {}", fit.residual);
            let residual = fixed_point_residual(&fit.average, &rs, &omega, &w).unwrap();
            assert!(residual <= 1e-6);
        }
    }

    #[test]
    fn rank_one_geodesic_beats_sampled_candidates() {
        let mut rng = rng(91);
        let n = 4;
        let w = random_weights(n, &mut rng);
        let rs = random_resultants(n, 3, &w, &mut rng);
        let omega = WeightSystem::uniform(3);
        let fit = rank_h_average_geodesic(&rs, &omega, 1, &w, &GeodesicOptions::default()).unwrap();
        for _ in 0..100_000 {
            let cand = random_unit_rank1(n, &w, &mut rng);
            let g = geodesic_objective_operator(&cand, &rs, &omega, &w).unwrap();
            assert!(g <= fit.objective + 1e-9);
        }
        let _ = sphere_average(&rs, &omega, &w).unwrap();
    }
}
