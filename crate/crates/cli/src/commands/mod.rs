pub mod average;
pub mod cluster;
pub mod mds;
pub mod simulate;

use std::path::PathBuf;

use varsphere::RankCriterion;

use crate::args::RankArgs;
use crate::error::{CliError, Result};
use crate::manifest::{CriterionKind, DatasetManifest};

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// False when an iteration stopped short of its tolerance.
    pub converged: bool,
}

/// Flags first, then manifest entries; without either, rank-1 averages.
pub fn resolve_criterion(flags: &RankArgs, manifest: &DatasetManifest) -> Result<RankCriterion> {
    let kind = flags.criterion.or(manifest.criterion);
    let theta = flags.theta.or(manifest.theta);
    let h = flags.h.or(manifest.h);
    let criterion = match (kind, theta, h) {
        (Some(CriterionKind::Trace), Some(theta), _) | (None, Some(theta), None) => {
            RankCriterion::TraceRatio { theta }
        }
        (Some(CriterionKind::Trace), None, _) => {
            return Err(CliError::invalid("the trace criterion needs --theta"))
        }
        (Some(CriterionKind::Cattell), _, _) => RankCriterion::Cattell,
        (Some(CriterionKind::Fixed), _, h) | (None, _, h) => RankCriterion::Fixed { h: h.unwrap_or(1) },
    };
    criterion.validate()?;
    Ok(criterion)
}
