//! Cosines and distances between normed resultants on the operator sphere.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::encoding::{Resultant, VariableKind, VariableStructure};
use crate::error::{Error, Result};
use crate::geometry::{operator_dot, spd_sqrt, Weights};

/// Admissible overshoot of a scalar product outside `[-1, 1]` before it is
/// treated as corruption rather than round-off.
pub const COSINE_SLACK: f64 = 1e-8;

/// Distance used on the operator sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    /// Euclidean chord, `d² = 2(1 - [A|B])`.
    #[default]
    Chord,
    /// Arc length, `δ = arccos([A|B])`.
    Geodesic,
}

impl DistanceKind {
    /// Distance between two unit-norm operators with scalar product `cos`.
    pub fn from_cos(self, cos: f64) -> Result<f64> {
        match self {
            DistanceKind::Chord => chord_from_cos(cos),
            DistanceKind::Geodesic => geodesic_from_cos(cos),
        }
    }

    pub fn squared_from_cos(self, cos: f64) -> Result<f64> {
        match self {
            DistanceKind::Chord => Ok(2.0 * (1.0 - checked_cos(cos)?)),
            DistanceKind::Geodesic => geodesic_from_cos(cos).map(|d| d * d),
        }
    }
}

impl std::fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DistanceKind::Chord => f.write_str("chord"),
            DistanceKind::Geodesic => f.write_str("geodesic"),
        }
    }
}

impl std::str::FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "chord" => Ok(DistanceKind::Chord),
            "geodesic" => Ok(DistanceKind::Geodesic),
            other => Err(Error::InvalidConfig(format!("unknown distance '{other}'"))),
        }
    }
}

/// Rejects scalar products outside `[-1 - slack, 1 + slack]` and clamps the rest.
pub fn checked_cos(cos: f64) -> Result<f64> {
    if !cos.is_finite() || !(-1.0 - COSINE_SLACK..=1.0 + COSINE_SLACK).contains(&cos) {
        return Err(Error::CosineOutOfRange(cos));
    }
    Ok(cos.clamp(-1.0, 1.0))
}

pub fn chord_from_cos(cos: f64) -> Result<f64> {
    Ok((2.0 * (1.0 - checked_cos(cos)?)).max(0.0).sqrt())
}

pub fn geodesic_from_cos(cos: f64) -> Result<f64> {
    Ok(checked_cos(cos)?.acos())
}

fn require_normed(a: &Resultant) -> Result<()> {
    if !a.is_normed() {
        return Err(Error::NotNormed(f64::NAN));
    }
    Ok(())
}

/// `[A|B]` for two normed resultants.
pub fn cosine(a: &Resultant, b: &Resultant, w: &Weights) -> Result<f64> {
    require_normed(a)?;
    require_normed(b)?;
    operator_dot(a.op(), b.op(), w)
}

/// Chord distance `√(2(1 - [A|B]))`.
pub fn chord_dist(a: &Resultant, b: &Resultant, w: &Weights) -> Result<f64> {
    chord_from_cos(cosine(a, b, w)?)
}

/// Geodesic distance `arccos([A|B])`.
pub fn geodesic_dist(a: &Resultant, b: &Resultant, w: &Weights) -> Result<f64> {
    geodesic_from_cos(cosine(a, b, w)?)
}

pub fn distance(kind: DistanceKind, a: &Resultant, b: &Resultant, w: &Weights) -> Result<f64> {
    kind.from_cos(cosine(a, b, w)?)
}

/// RV coefficient: cosine between two (not necessarily normed) resultants.
pub fn rv_cos(rx: &Resultant, ry: &Resultant, w: &Weights) -> Result<f64> {
    let nx = rx.norm(w)?;
    let ny = ry.norm(w)?;
    if nx <= 0.0 || ny <= 0.0 {
        return Err(Error::ZeroOperator("RV coefficient of a zero resultant"));
    }
    Ok(operator_dot(rx.op(), ry.op(), w)? / (nx * ny))
}

fn require_categorical(vs: &VariableStructure) -> Result<()> {
    if vs.kind() != VariableKind::Categorical {
        return Err(Error::InvalidCategorical(format!(
            "'{}' is not categorical",
            vs.label()
        )));
    }
    Ok(())
}

fn projector(vs: &VariableStructure, w: &Weights) -> Result<Resultant> {
    crate::encoding::resultant(vs, w, false)
}

/// `Φ²(X, Y) = tr(Π_Y* Π_X)` for two categorical structures.
pub fn phi2(x: &VariableStructure, y: &VariableStructure, w: &Weights) -> Result<f64> {
    require_categorical(x)?;
    require_categorical(y)?;
    let px = projector(x, w)?;
    let py = projector(y, w)?;
    operator_dot(py.op(), px.op(), w)
}

/// `Φ²/(√(r-1)√(s-1))`, the cosine of the two normed projectors.
pub fn tschuprow(x: &VariableStructure, y: &VariableStructure, w: &Weights) -> Result<f64> {
    let p = phi2(x, y, w)?;
    let r = x.levels() as f64;
    let s = y.levels() as f64;
    Ok(p / ((r - 1.0).sqrt() * (s - 1.0).sqrt()))
}

/// `Σ_{j,k} <x̃^j|ỹ^k>²_W` with `X̃ = XM^{1/2}`, `Ỹ = YN^{1/2}`.
pub fn resultant_dot_expanded(
    x: &DMatrix<f64>,
    m: &DMatrix<f64>,
    y: &DMatrix<f64>,
    n: &DMatrix<f64>,
    w: &Weights,
) -> Result<f64> {
    for block in [x, y] {
        if block.nrows() != w.len() {
            return Err(Error::DimensionMismatch {
                expected: w.len(),
                actual: block.nrows(),
            });
        }
    }
    if m.nrows() != x.ncols() || n.nrows() != y.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            actual: m.nrows(),
        });
    }
    let xt = x * spd_sqrt(m)?;
    let yt = y * spd_sqrt(n)?;
    let cross = xt.transpose() * w.left_mul(&yt);
    Ok(cross.iter().map(|v| v * v).sum())
}
