use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::numerical_rank;

/// Rule picking the rank `H` of an average from its spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RankCriterion {
    /// Smallest `H` whose leading eigenvalues carry a share `θ` of the trace.
    TraceRatio { theta: f64 },
    /// Largest second-order difference `λ_{h-1} − 2λ_h + λ_{h+1}`.
    Cattell,
    /// A fixed rank, capped at the numerical rank.
    Fixed { h: usize },
}

impl RankCriterion {
    pub fn trace_ratio(theta: f64) -> Result<Self> {
        let c = RankCriterion::TraceRatio { theta };
        c.validate()?;
        Ok(c)
    }

    pub fn fixed(h: usize) -> Result<Self> {
        let c = RankCriterion::Fixed { h };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            RankCriterion::TraceRatio { theta } if !(0.0..=1.0).contains(&theta) => Err(
                Error::InvalidConfig(format!("trace ratio θ = {theta} outside [0, 1]")),
            ),
            RankCriterion::Fixed { h: 0 } => {
                Err(Error::InvalidConfig("fixed rank must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }
}

impl std::fmt::Display for RankCriterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RankCriterion::TraceRatio { theta } => write!(f, "trace_ratio({theta})"),
            RankCriterion::Cattell => f.write_str("cattell"),
            RankCriterion::Fixed { h } => write!(f, "fixed({h})"),
        }
    }
}

/// Picks `H` from a descending non-negative spectrum.
pub fn choose_rank(eigenvalues: &[f64], criterion: RankCriterion) -> Result<usize> {
    criterion.validate()?;
    if eigenvalues.is_empty() {
        return Err(Error::Empty("spectrum"));
    }
    if eigenvalues.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidConfig("spectrum must be finite and non-negative".into()));
    }
    let rank = numerical_rank(eigenvalues);
    if rank == 0 {
        return Err(Error::ZeroOperator("all-zero spectrum"));
    }
    let kept = &eigenvalues[..rank];
    match criterion {
        RankCriterion::TraceRatio { theta } => {
            if theta >= 1.0 {
                return Ok(rank);
            }
            let total: f64 = kept.iter().sum();
            let target = theta * total - 1e-12 * total;
            let mut cum = 0.0;
            for (h, v) in kept.iter().enumerate() {
                cum += v;
                if cum >= target {
                    return Ok(h + 1);
                }
            }
            Ok(rank)
        }
        RankCriterion::Cattell => {
            if rank < 3 {
                return Ok(1);
            }
            // interior 1-based indices 2..=rank-1
            let best = (1..rank - 1)
                .map(|i| (i, kept[i - 1] - 2.0 * kept[i] + kept[i + 1]))
                .fold((1, f64::NEG_INFINITY), |acc, (i, d)| if d > acc.1 { (i, d) } else { acc });
            Ok(best.0 + 1)
        }
        RankCriterion::Fixed { h } => Ok(h.min(rank)),
    }
}
