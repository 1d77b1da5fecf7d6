//! Variable-structures and their resultant operators.
//!
//! A variable-structure pairs a centred data block `X` (n×q) with a metric
//! `M` (q×q). Its resultant `R = XMX'W` is W-spsd; divided by its norm it
//! becomes a point of the unit sphere of the operator space.

use std::collections::HashMap;
use std::hash::Hash;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{
    center, check_w_symmetric, operator_norm, spd_sqrt, w_spsd_eigen, Operator, WEigen, Weights,
};

/// Nature of the variables a structure was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Numeric,
    Categorical,
    Block,
}

/// Declared description of a variable before encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableSpec {
    pub name: String,
    pub kind: VariableKind,
    pub columns: Vec<String>,
    /// Level labels in first-appearance order (categorical only).
    pub levels: Vec<String>,
}

/// A centred data block together with the metric it is looked at through.
#[derive(Debug, Clone)]
pub struct VariableStructure {
    x: DMatrix<f64>,
    m: DMatrix<f64>,
    label: String,
    kind: VariableKind,
    levels: usize,
    dim_weight: f64,
}

impl VariableStructure {
    pub fn data(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn metric(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> VariableKind {
        self.kind
    }

    /// Number of levels for categorical structures, 0 otherwise.
    pub fn levels(&self) -> usize {
        self.levels
    }

    /// `1/‖R_{X,M}‖`, the implicit reweighting applied by norming.
    pub fn dim_weight(&self) -> f64 {
        self.dim_weight
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// `X* = XM^{1/2}`, the block whose identity-metric resultant equals `R_{X,M}`.
    pub fn transformed(&self) -> Result<DMatrix<f64>> {
        Ok(&self.x * spd_sqrt(&self.m)?)
    }
}

/// A W-spsd operator `XMX'W`, optionally scaled to unit norm.
#[derive(Debug, Clone)]
pub struct Resultant {
    op: Operator,
    normed: bool,
    eigen: OnceLock<WEigen>,
}

impl Resultant {
    /// Wraps an operator after checking that it is W-spsd.
    pub fn from_operator(op: Operator, w: &Weights) -> Result<Self> {
        check_w_symmetric(&op, w)?;
        let eigen = w_spsd_eigen(&op, w)?;
        let norm = operator_norm(&op, w)?;
        let cell = OnceLock::new();
        let _ = cell.set(eigen);
        Ok(Self {
            op,
            normed: (norm - 1.0).abs() <= 1e-10,
            eigen: cell,
        })
    }

    pub(crate) fn from_parts(op: Operator, normed: bool) -> Self {
        Self {
            op,
            normed,
            eigen: OnceLock::new(),
        }
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn into_op(self) -> Operator {
        self.op
    }

    pub fn is_normed(&self) -> bool {
        self.normed
    }

    pub fn n(&self) -> usize {
        self.op.nrows()
    }

    pub fn norm(&self, w: &Weights) -> Result<f64> {
        operator_norm(&self.op, w)
    }

    /// Unit-norm copy.
    pub fn normalized(&self, w: &Weights) -> Result<Self> {
        let norm = self.norm(w)?;
        if norm <= 0.0 || !norm.is_finite() {
            return Err(Error::ZeroOperator("resultant has zero norm"));
        }
        Ok(Self::from_parts(&self.op / norm, true))
    }

    /// W-eigendecomposition, computed on first use.
    pub fn eigen(&self, w: &Weights) -> Result<&WEigen> {
        if let Some(e) = self.eigen.get() {
            return Ok(e);
        }
        let e = w_spsd_eigen(&self.op, w)?;
        Ok(self.eigen.get_or_init(|| e))
    }
}

/// Assigns level ids in first-appearance order; returns ids and the level values.
pub fn level_ids<T: Eq + Hash + Clone>(values: &[T]) -> (Vec<usize>, Vec<T>) {
    let mut index: HashMap<&T, usize> = HashMap::new();
    let mut levels = Vec::new();
    let ids = values
        .iter()
        .map(|v| {
            *index.entry(v).or_insert_with(|| {
                levels.push(v.clone());
                levels.len() - 1
            })
        })
        .collect();
    (ids, levels)
}

/// Single numeric variable: `X = x - mean`, `M = 1/v(x)`.
pub fn encode_numeric(x: &DVector<f64>, w: &Weights) -> Result<VariableStructure> {
    let c = center(x, w)?;
    let var = c.iter().zip(w.as_vector().iter()).map(|(v, wi)| wi * v * v).sum::<f64>();
    let scale = x.iter().zip(w.as_vector().iter()).map(|(v, wi)| wi * v * v).sum::<f64>();
    if var <= 0.0 || var <= 1e-24 * scale {
        return Err(Error::ZeroVariance);
    }
    Ok(VariableStructure {
        x: DMatrix::from_column_slice(c.len(), 1, c.as_slice()),
        m: DMatrix::from_element(1, 1, 1.0 / var),
        label: String::new(),
        kind: VariableKind::Numeric,
        levels: 0,
        dim_weight: 1.0,
    })
}

/// Categorical variable with level ids in `0..n_levels`.
///
/// The reference (dropped) indicator is the level that appears last in
/// first-appearance order; the projector does not depend on that choice.
pub fn encode_categorical(
    labels: &[usize],
    n_levels: usize,
    w: &Weights,
) -> Result<VariableStructure> {
    let mut first_seen = vec![usize::MAX; n_levels];
    for (i, &l) in labels.iter().enumerate() {
        if l >= n_levels {
            return Err(Error::InvalidCategorical(format!(
                "level id {l} outside 0..{n_levels}"
            )));
        }
        if first_seen[l] == usize::MAX {
            first_seen[l] = i;
        }
    }
    let dropped = (0..n_levels)
        .max_by_key(|&l| first_seen[l])
        .ok_or_else(|| Error::InvalidCategorical("no levels".into()))?;
    encode_categorical_with_reference(labels, n_levels, dropped, w)
}

/// Categorical encoding that drops the indicator of level `reference`.
pub fn encode_categorical_with_reference(
    labels: &[usize],
    n_levels: usize,
    reference: usize,
    w: &Weights,
) -> Result<VariableStructure> {
    let n = labels.len();
    if n != w.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            actual: n,
        });
    }
    if n_levels < 2 {
        return Err(Error::InvalidCategorical(format!(
            "need at least 2 levels, got {n_levels}"
        )));
    }
    if reference >= n_levels {
        return Err(Error::InvalidCategorical(format!(
            "reference level {reference} outside 0..{n_levels}"
        )));
    }
    let mut mass = vec![0.0; n_levels];
    for (i, &l) in labels.iter().enumerate() {
        if l >= n_levels {
            return Err(Error::InvalidCategorical(format!(
                "level id {l} outside 0..{n_levels}"
            )));
        }
        mass[l] += w.get(i);
    }
    if let Some(empty) = mass.iter().position(|m| *m <= 0.0) {
        return Err(Error::InvalidCategorical(format!("level {empty} is empty")));
    }

    let retained: Vec<usize> = (0..n_levels).filter(|&l| l != reference).collect();
    let x = DMatrix::from_fn(n, retained.len(), |i, j| {
        let level = retained[j];
        let indicator = if labels[i] == level { 1.0 } else { 0.0 };
        indicator - mass[level]
    });
    let gram = x.transpose() * w.left_mul(&x);
    let m = gram.try_inverse().ok_or(Error::RankDeficient {
        smallest: 0.0,
        floor: 0.0,
    })?;
    let m = (&m + m.transpose()) * 0.5;
    Ok(VariableStructure {
        x,
        m,
        label: String::new(),
        kind: VariableKind::Categorical,
        levels: n_levels,
        dim_weight: 1.0 / ((n_levels - 1) as f64).sqrt(),
    })
}

fn is_spd(m: &DMatrix<f64>) -> bool {
    if !m.is_square() || m.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let asym = (m - m.transpose()).norm();
    if asym > 1e-10 * m.norm() {
        return false;
    }
    ((m + m.transpose()) * 0.5).cholesky().is_some()
}

/// Arbitrary block `X` with spd metric `M`; columns are W-centred on entry.
pub fn encode_block(x: &DMatrix<f64>, m: &DMatrix<f64>, w: &Weights) -> Result<VariableStructure> {
    if x.nrows() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            actual: x.nrows(),
        });
    }
    if m.nrows() != x.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            actual: m.nrows(),
        });
    }
    if !is_spd(m) {
        return Err(Error::NotSpd);
    }
    let mut centred = x.clone();
    for mut col in centred.column_iter_mut() {
        let mean = col.dot(w.as_vector());
        col.add_scalar_mut(-mean);
    }
    let scale = x.norm();
    if centred.norm() <= 1e-12 * scale.max(f64::MIN_POSITIVE) || centred.norm() == 0.0 {
        return Err(Error::ZeroOperator("block is zero after centring"));
    }
    let m = (m + m.transpose()) * 0.5;
    let raw = raw_resultant(&centred, &m, w);
    let norm = operator_norm(&raw, w)?;
    if norm <= 0.0 {
        return Err(Error::ZeroOperator("block resultant is zero"));
    }
    Ok(VariableStructure {
        x: centred,
        m,
        label: String::new(),
        kind: VariableKind::Block,
        levels: 0,
        dim_weight: 1.0 / norm,
    })
}

/// Block metric `diag(1/σ²(x^j))`, which standardises every column.
pub fn standardizing_metric(x: &DMatrix<f64>, w: &Weights) -> Result<DMatrix<f64>> {
    let mut diag = DVector::zeros(x.ncols());
    for (j, col) in x.column_iter().enumerate() {
        let c = center(&col.into_owned(), w)?;
        let var: f64 = c.iter().zip(w.as_vector().iter()).map(|(v, wi)| wi * v * v).sum();
        if var <= 0.0 {
            return Err(Error::ZeroVariance);
        }
        diag[j] = 1.0 / var;
    }
    Ok(DMatrix::from_diagonal(&diag))
}

/// Projector metric `(X'WX)⁻¹` of a centred block.
pub fn projector_metric(x: &DMatrix<f64>, w: &Weights) -> Result<DMatrix<f64>> {
    let mut centred = x.clone();
    for mut col in centred.column_iter_mut() {
        let mean = col.dot(w.as_vector());
        col.add_scalar_mut(-mean);
    }
    let gram = centred.transpose() * w.left_mul(&centred);
    let inv = crate::geometry::spd_inv_sqrt(&gram)?;
    Ok(&inv * &inv)
}

fn raw_resultant(x: &DMatrix<f64>, m: &DMatrix<f64>, w: &Weights) -> Operator {
    w.right_mul(&(x * m * x.transpose()))
}

/// `R_{X,M} = XMX'W`, divided by its norm when `normed`.
pub fn resultant(vs: &VariableStructure, w: &Weights, normed: bool) -> Result<Resultant> {
    if vs.n() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            actual: vs.n(),
        });
    }
    let mut op = raw_resultant(&vs.x, &vs.m, w);
    // exact W-symmetry: WR = XMX'... scaled; symmetrise away round-off
    let wr = w.left_mul(&op);
    let sym = (&wr + wr.transpose()) * 0.5;
    op = w.left_div(&sym);
    let norm = operator_norm(&op, w)?;
    if norm <= 0.0 || !norm.is_finite() {
        return Err(Error::ZeroOperator("resultant has zero norm"));
    }
    if normed {
        op /= norm;
    }
    Ok(Resultant::from_parts(op, normed))
}

/// Concatenates `[√ω₁ X₁*, …, √ω_H X_H*]` under the identity metric.
///
/// Each member is first brought to unit resultant norm (scaled by its
/// `dim_weight`), so the normed resultant of the compound equals the normed
/// weighted average of the members' normed resultants.
pub fn compound_structure(
    structures: &[VariableStructure],
    omega: &[f64],
    w: &Weights,
) -> Result<VariableStructure> {
    if structures.is_empty() {
        return Err(Error::Empty("no structures to compound"));
    }
    if omega.len() != structures.len() {
        return Err(Error::DimensionMismatch {
            expected: structures.len(),
            actual: omega.len(),
        });
    }
    if omega.iter().any(|o| *o < 0.0 || !o.is_finite())
        || (omega.iter().sum::<f64>() - 1.0).abs() > 1e-12
    {
        return Err(Error::InvalidConfig(
            "compound weights must be non-negative and sum to 1".into(),
        ));
    }
    let n = structures[0].n();
    let mut blocks = Vec::with_capacity(structures.len());
    for vs in structures {
        if vs.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: vs.n(),
            });
        }
        blocks.push(vs.transformed()?);
    }
    let q: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut x = DMatrix::zeros(n, q);
    let mut offset = 0;
    for ((block, vs), om) in blocks.iter().zip(structures).zip(omega) {
        let scale = (om * vs.dim_weight).sqrt();
        x.columns_mut(offset, block.ncols()).copy_from(&(block * scale));
        offset += block.ncols();
    }
    let m = DMatrix::identity(q, q);
    let norm = operator_norm(&raw_resultant(&x, &m, w), w)?;
    if norm <= 0.0 {
        return Err(Error::ZeroOperator("compound resultant is zero"));
    }
    Ok(VariableStructure {
        x,
        m,
        label: String::new(),
        kind: VariableKind::Block,
        levels: 0,
        dim_weight: 1.0 / norm,
    })
}
