//! Dataset manifests: which CSV columns to read and how to encode them.
//!
//! A manifest is a small TOML file:
//!
//! ```toml
//! data = "wine.csv"
//! weight_column = "w"
//! columns = [
//!   { name = "Label", kind = "categorical" },
//!   { name = "Odor.Intensity", kind = "numeric" },
//! ]
//!
//! [[blocks]]
//! name = "colour"
//! columns = ["Hue", "Intensity"]
//! metric = "projector"
//!
//! # optional defaults, overridden by command-line flags
//! clusters = 2
//! distance = "geodesic"
//! criterion = "trace"
//! theta = 0.5
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use varsphere::DistanceKind;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

/// Metric a block of numeric columns is looked at through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockMetric {
    /// `(X'WX)⁻¹`: the resultant is the projector onto the block's span.
    #[default]
    Projector,
    /// `diag(1/σ²)`: every column standardised.
    Standardized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub name: String,
    pub columns: Vec<String>,
    #[serde(default)]
    pub metric: BlockMetric,
}

/// Rank-selection rule as named on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CriterionKind {
    /// Cumulative trace ratio reaching θ.
    Trace,
    /// Largest second-order eigenvalue difference.
    Cattell,
    /// Fixed rank H.
    Fixed,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    /// CSV path, relative to the manifest's directory.
    pub data: Option<PathBuf>,
    pub weight_column: Option<String>,
    #[serde(default)]
    pub columns: Vec<ColumnSpec>,
    #[serde(default)]
    pub blocks: Vec<BlockSpec>,

    pub clusters: Option<usize>,
    pub distance: Option<DistanceKind>,
    pub criterion: Option<CriterionKind>,
    pub theta: Option<f64>,
    #[serde(rename = "H")]
    pub h: Option<usize>,
    pub seed: Option<u64>,
    pub starts: Option<usize>,
    pub max_iter: Option<usize>,
}

impl DatasetManifest {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let manifest: DatasetManifest = toml::from_str(text).map_err(|source| CliError::Manifest {
            path: origin.to_path_buf(),
            source,
        })?;
        manifest.check()?;
        Ok(manifest)
    }

    /// Reads a manifest and resolves `data` against the manifest's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut manifest = Self::parse(&text, path)?;
        if let Some(data) = &manifest.data {
            if data.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                manifest.data = Some(base.join(data));
            }
        }
        Ok(manifest)
    }

    fn check(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(CliError::invalid(format!("column {:?} declared twice", c.name)));
            }
        }
        let mut in_block = std::collections::HashSet::new();
        for b in &self.blocks {
            if b.columns.is_empty() {
                return Err(CliError::invalid(format!("block {:?} has no columns", b.name)));
            }
            for col in &b.columns {
                match self.columns.iter().find(|c| &c.name == col) {
                    None => {
                        return Err(CliError::invalid(format!(
                            "block {:?} references undeclared column {col:?}",
                            b.name
                        )))
                    }
                    Some(c) if c.kind != ColumnKind::Numeric => {
                        return Err(CliError::invalid(format!(
                            "block {:?}: column {col:?} is not numeric",
                            b.name
                        )))
                    }
                    _ => {}
                }
                if !in_block.insert(col.as_str()) {
                    return Err(CliError::invalid(format!("column {col:?} belongs to two blocks")));
                }
            }
        }
        if let Some(wc) = &self.weight_column {
            if seen.contains(wc.as_str()) {
                return Err(CliError::invalid(format!(
                    "weight column {wc:?} is also declared as a variable"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_columns_blocks_and_settings() {
        let text = r#"
            data = "d.csv"
            weight_column = "w"
            columns = [
              { name = "a", kind = "numeric" },
              { name = "b", kind = "numeric" },
              { name = "c", kind = "categorical" },
            ]
            clusters = 2
            distance = "geodesic"
            criterion = "trace"
            theta = 0.5
            H = 3

            [[blocks]]
            name = "ab"
            columns = ["a", "b"]
            metric = "standardized"
        "#;
        let m = DatasetManifest::parse(text, Path::new("m.toml")).unwrap();
        assert_eq!(m.columns.len(), 3);
        assert_eq!(m.blocks[0].metric, BlockMetric::Standardized);
        assert_eq!(m.distance, Some(DistanceKind::Geodesic));
        assert_eq!(m.criterion, Some(CriterionKind::Trace));
        assert_eq!(m.h, Some(3));
    }

    #[test]
    fn rejects_bad_blocks_and_unknown_keys() {
        let undeclared = r#"
            columns = [{ name = "a", kind = "numeric" }]
            [[blocks]]
            name = "x"
            columns = ["zz"]
        "#;
        assert!(DatasetManifest::parse(undeclared, Path::new("m")).is_err());
        let categorical = r#"
            columns = [{ name = "a", kind = "categorical" }]
            [[blocks]]
            name = "x"
            columns = ["a"]
        "#;
        assert!(DatasetManifest::parse(categorical, Path::new("m")).is_err());
        assert!(DatasetManifest::parse("colour = 1", Path::new("m")).is_err());
        let twice = r#"columns = [{ name = "a", kind = "numeric" }, { name = "a", kind = "numeric" }]"#;
        assert!(DatasetManifest::parse(twice, Path::new("m")).is_err());
    }
}
