//! Linear algebra under the W-metric.
//!
//! Observation weights `w` define the scalar product `<x|y>_W = x'Wy` on
//! variables and `[A|B] = tr(A*B)` on n×n operators, where `A* = W⁻¹A'W`.
//! W-symmetric positive semi-definite (W-spsd) operators are diagonalised by
//! symmetrising with `W^{1/2}`, so a standard symmetric eigensolver applies.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Dense n×n operator.
pub type Operator = DMatrix<f64>;

/// Relative tolerance for the W-symmetry of `WA`.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Relative tolerance below which negative eigenvalues are treated as round-off.
pub const NEGATIVE_EIGEN_TOL: f64 = 1e-10;
/// Relative eigenvalue floor for inverse square roots.
pub const INV_SQRT_FLOOR: f64 = 1e-12;
/// Relative threshold defining the numerical rank of a spectrum.
pub const RANK_TOL: f64 = 1e-10;

/// Positive observation weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    w: DVector<f64>,
}

impl Weights {
    /// Uniform weights `1/n`.
    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "weights need at least one observation");
        Self {
            w: DVector::from_element(n, 1.0 / n as f64),
        }
    }

    /// Validates weights that already sum to one.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        Self::check_positive(&w)?;
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidWeights(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { w: DVector::from_vec(w) })
    }

    /// Rescales arbitrary positive weights to unit sum.
    pub fn normalized(raw: Vec<f64>) -> Result<Self> {
        Self::check_positive(&raw)?;
        let total: f64 = raw.iter().sum();
        Ok(Self {
            w: DVector::from_iterator(raw.len(), raw.iter().map(|v| v / total)),
        })
    }

    fn check_positive(w: &[f64]) -> Result<()> {
        if w.is_empty() {
            return Err(Error::InvalidWeights("no observations".into()));
        }
        if let Some(bad) = w.iter().find(|v| !v.is_finite() || **v <= 0.0) {
            return Err(Error::InvalidWeights(format!("non-positive weight {bad}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.w
    }

    pub fn get(&self, i: usize) -> f64 {
        self.w[i]
    }

    /// `W` as a dense diagonal matrix.
    pub fn diag(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.w)
    }

    /// Left-multiplies by `W` (scales row `i` by `w_i`).
    pub fn left_mul(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        for (i, mut row) in out.row_iter_mut().enumerate() {
            row *= self.w[i];
        }
        out
    }

    /// Left-multiplies by `W⁻¹`.
    pub fn left_div(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        for (i, mut row) in out.row_iter_mut().enumerate() {
            row /= self.w[i];
        }
        out
    }

    /// Right-multiplies by `W` (scales column `j` by `w_j`).
    pub fn right_mul(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col *= self.w[j];
        }
        out
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: n,
            });
        }
        Ok(())
    }
}

fn check_square(a: &DMatrix<f64>, w: &Weights) -> Result<()> {
    w.check_dim(a.nrows())?;
    w.check_dim(a.ncols())
}

/// `x'Wy`.
pub fn w_dot(x: &DVector<f64>, y: &DVector<f64>, w: &Weights) -> Result<f64> {
    w.check_dim(x.len())?;
    w.check_dim(y.len())?;
    Ok(x.iter()
        .zip(y.iter())
        .zip(w.as_vector().iter())
        .map(|((a, b), wi)| wi * (a * b))
        .sum())
}

/// W-norm `‖x‖_W`.
pub fn w_norm(x: &DVector<f64>, w: &Weights) -> Result<f64> {
    Ok(w_dot(x, x, w)?.sqrt())
}

/// Removes the W-mean, so that `<x|1>_W = 0`.
pub fn center(x: &DVector<f64>, w: &Weights) -> Result<DVector<f64>> {
    w.check_dim(x.len())?;
    let mean = x.dot(w.as_vector());
    Ok(x.map(|v| v - mean))
}

/// Centres and scales to unit W-variance.
pub fn standardize(x: &DVector<f64>, w: &Weights) -> Result<DVector<f64>> {
    let c = center(x, w)?;
    let var = w_dot(&c, &c, w)?;
    let scale = w_dot(x, x, w)?;
    if var <= 0.0 || var <= 1e-24 * scale || !var.is_finite() {
        return Err(Error::ZeroVariance);
    }
    Ok(c / var.sqrt())
}

/// W-adjoint `A* = W⁻¹A'W`.
pub fn adjoint(a: &Operator, w: &Weights) -> Result<Operator> {
    check_square(a, w)?;
    let n = a.nrows();
    Ok(DMatrix::from_fn(n, n, |i, j| a[(j, i)] * w.get(j) / w.get(i)))
}

/// Operator scalar product `[A|B] = tr(A*B)`.
pub fn operator_dot(a: &Operator, b: &Operator, w: &Weights) -> Result<f64> {
    check_square(a, w)?;
    check_square(b, w)?;
    let n = a.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        let inv_wj = 1.0 / w.get(j);
        for i in 0..n {
            acc += a[(i, j)] * b[(i, j)] * w.get(i) * inv_wj;
        }
    }
    Ok(acc)
}

/// Operator norm induced by [`operator_dot`].
pub fn operator_norm(a: &Operator, w: &Weights) -> Result<f64> {
    Ok(operator_dot(a, a, w)?.max(0.0).sqrt())
}

/// Checks that `WA` is symmetric within [`SYMMETRY_TOL`] relative to `‖WA‖`.
pub fn check_w_symmetric(a: &Operator, w: &Weights) -> Result<()> {
    check_square(a, w)?;
    let wa = w.left_mul(a);
    let scale = wa.norm();
    let asym = (&wa - wa.transpose()).norm() / 2.0;
    if asym > SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE) && asym > 0.0 {
        return Err(Error::NotWSpsd(format!(
            "asymmetry {asym:e} relative to scale {scale:e}"
        )));
    }
    Ok(())
}

/// Eigendecomposition `A = U diag(λ) U'W` of a W-spsd operator.
#[derive(Debug, Clone)]
pub struct WEigen {
    /// W-orthonormal eigenvectors as columns, `U'WU = I`.
    pub vectors: DMatrix<f64>,
    /// Eigenvalues, non-negative and sorted descending.
    pub values: DVector<f64>,
}

impl WEigen {
    /// Number of eigenvalues above `RANK_TOL · λ_max`.
    pub fn numerical_rank(&self) -> usize {
        numerical_rank(self.values.as_slice())
    }

    /// Leading `h` eigenpairs.
    pub fn truncated(&self, h: usize) -> (DMatrix<f64>, DVector<f64>) {
        let h = h.min(self.values.len());
        (
            self.vectors.columns(0, h).into_owned(),
            self.values.rows(0, h).into_owned(),
        )
    }

    pub fn reconstruct(&self, w: &Weights) -> Operator {
        factored_operator(&self.vectors, &self.values, w)
    }
}

/// Number of entries above `RANK_TOL` times the largest one.
pub fn numerical_rank(values: &[f64]) -> usize {
    let max = values.iter().cloned().fold(0.0_f64, f64::max);
    if max <= 0.0 {
        return 0;
    }
    values.iter().filter(|v| **v > RANK_TOL * max).count()
}

/// `U diag(λ) U'W`.
pub fn factored_operator(u: &DMatrix<f64>, lambda: &DVector<f64>, w: &Weights) -> Operator {
    let mut scaled = u.clone();
    for (h, mut col) in scaled.column_iter_mut().enumerate() {
        col *= lambda[h];
    }
    w.right_mul(&(scaled * u.transpose()))
}

/// Flips column signs so the largest-magnitude entry of each column is positive.
pub fn fix_column_signs(u: &mut DMatrix<f64>) {
    for mut col in u.column_iter_mut() {
        let mut best = 0.0_f64;
        for v in col.iter() {
            if v.abs() > best.abs() + 1e-14 * best.abs().max(1.0) {
                best = *v;
            }
        }
        if best < 0.0 {
            col.neg_mut();
        }
    }
}

/// Diagonalises a W-spsd operator via `S = W^{1/2} A W^{-1/2}`.
pub fn w_spsd_eigen(a: &Operator, w: &Weights) -> Result<WEigen> {
    check_w_symmetric(a, w)?;
    let n = a.nrows();
    let sq: Vec<f64> = w.as_vector().iter().map(|v| v.sqrt()).collect();
    let s = DMatrix::from_fn(n, n, |i, j| {
        let sij = a[(i, j)] * sq[i] / sq[j];
        let sji = a[(j, i)] * sq[j] / sq[i];
        0.5 * (sij + sji)
    });
    let eig = SymmetricEigen::new(s);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| eig.eigenvalues[q].total_cmp(&eig.eigenvalues[p]));
    let max = eig.eigenvalues[order[0]].max(0.0);

    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let lambda = eig.eigenvalues[src];
        if lambda < -NEGATIVE_EIGEN_TOL * max {
            return Err(Error::NotWSpsd(format!(
                "eigenvalue {lambda:e} below tolerance (max {max:e})"
            )));
        }
        values[dst] = lambda.max(0.0);
        for i in 0..n {
            vectors[(i, dst)] = eig.eigenvectors[(i, src)] / sq[i];
        }
    }
    fix_column_signs(&mut vectors);
    Ok(WEigen { vectors, values })
}

/// Inverse square root of a symmetric positive definite matrix.
pub fn spd_inv_sqrt(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spd_power(c, -0.5)
}

/// Square root of a symmetric positive semi-definite matrix.
pub fn spd_sqrt(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spd_power(c, 0.5)
}

fn spd_power(c: &DMatrix<f64>, p: f64) -> Result<DMatrix<f64>> {
    let sym = (c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let floor = INV_SQRT_FLOOR * max;
    let powered = if p < 0.0 {
        if max <= 0.0 || min < floor {
            return Err(Error::RankDeficient { smallest: min, floor });
        }
        eig.eigenvalues.map(|v| v.powf(p))
    } else {
        if min < -NEGATIVE_EIGEN_TOL * max.max(f64::MIN_POSITIVE) {
            return Err(Error::NotSpd);
        }
        eig.eigenvalues.map(|v| v.max(0.0).powf(p))
    };
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&powered) * v.transpose())
}

/// `V = W⁻¹G(G'W⁻¹G)^{-1/2}`, the W-orthonormal maximiser of `tr(U'G)`.
pub fn w_orthonormal_polar(g: &DMatrix<f64>, w: &Weights) -> Result<DMatrix<f64>> {
    w.check_dim(g.nrows())?;
    let winv_g = w.left_div(g);
    let gram = g.transpose() * &winv_g;
    let inv_sqrt = spd_inv_sqrt(&gram)?;
    Ok(winv_g * inv_sqrt)
}

/// `U'WU`.
pub fn w_gram(u: &DMatrix<f64>, w: &Weights) -> DMatrix<f64> {
    u.transpose() * w.left_mul(u)
}
