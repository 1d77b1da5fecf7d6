//! Reading a CSV table into encoded variable-structures.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use varsphere::encoding::{
    encode_block, encode_categorical, encode_numeric, level_ids, projector_metric, resultant,
    standardizing_metric,
};
use varsphere::{Resultant, VariableKind, VariableSpec, VariableStructure, Weights};

use crate::error::{CliError, Result};
use crate::manifest::{BlockMetric, ColumnKind, ColumnSpec, DatasetManifest};

/// Raw CSV contents: a header and string cells.
#[derive(Debug, Clone)]
pub struct Table {
    pub path: PathBuf,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let csv_err = |source| CliError::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(csv_err)?;
        let headers = reader
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            rows.push(record.map_err(csv_err)?.iter().map(str::to_string).collect());
        }
        Ok(Self {
            path: path.to_path_buf(),
            headers,
            rows,
        })
    }

    fn column_index(&self, name: &str) -> Result<usize> {
        self.headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::invalid(format!("column {name:?} not found in {}", self.path.display()))
        })
    }

    /// Cells of one column; empty and `NA` cells are rejected with their position.
    fn cells(&self, name: &str) -> Result<Vec<&str>> {
        let j = self.column_index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let cell = row.get(j).map(String::as_str).unwrap_or("");
                if cell.is_empty() || cell == "NA" {
                    Err(CliError::invalid(format!(
                        "missing value at row {}, column {name:?}",
                        i + 1
                    )))
                } else {
                    Ok(cell)
                }
            })
            .collect()
    }

    fn numeric(&self, name: &str) -> Result<DVector<f64>> {
        let cells = self.cells(name)?;
        let mut values = Vec::with_capacity(cells.len());
        for (i, cell) in cells.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                CliError::invalid(format!(
                    "unparseable number {cell:?} at row {}, column {name:?}",
                    i + 1
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::invalid(format!(
                    "non-finite number at row {}, column {name:?}",
                    i + 1
                )));
            }
            values.push(v);
        }
        Ok(DVector::from_vec(values))
    }

    /// Manifest declaring every column, numeric when all its cells parse as numbers.
    pub fn infer_manifest(&self) -> DatasetManifest {
        let columns = self
            .headers
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let numeric = self.rows.iter().all(|row| {
                    row.get(j)
                        .is_some_and(|c| c.parse::<f64>().is_ok_and(f64::is_finite))
                });
                ColumnSpec {
                    name: name.clone(),
                    kind: if numeric {
                        ColumnKind::Numeric
                    } else {
                        ColumnKind::Categorical
                    },
                }
            })
            .collect();
        DatasetManifest {
            data: Some(self.path.clone()),
            columns,
            ..DatasetManifest::default()
        }
    }
}

/// Encoded variables of a dataset, in manifest order (plain columns, then blocks).
#[derive(Debug, Clone)]
pub struct Dataset {
    pub specs: Vec<VariableSpec>,
    pub structures: Vec<VariableStructure>,
    pub weights: Weights,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.specs.iter().map(|s| s.name.clone()).collect()
    }

    /// Normed resultant of every variable.
    pub fn resultants(&self) -> Result<Vec<Resultant>> {
        self.structures
            .iter()
            .map(|s| Ok(resultant(s, &self.weights, true)?))
            .collect()
    }
}

fn read_weights(table: &Table, column: Option<&str>) -> Result<Weights> {
    let n = table.rows.len();
    match column {
        None => Ok(Weights::uniform(n)),
        Some(name) => {
            let raw = table.numeric(name)?;
            Ok(Weights::normalized(raw.iter().cloned().collect())?)
        }
    }
}

/// Parses and encodes the columns a manifest declares.
pub fn ingest(manifest: &DatasetManifest, table: &Table) -> Result<Dataset> {
    if table.rows.is_empty() {
        return Err(CliError::invalid(format!("{} has no data rows", table.path.display())));
    }
    if manifest.columns.is_empty() {
        return Err(CliError::invalid("manifest declares no columns"));
    }
    let w = read_weights(table, manifest.weight_column.as_deref())?;
    let in_block: std::collections::HashSet<&str> = manifest
        .blocks
        .iter()
        .flat_map(|b| b.columns.iter().map(String::as_str))
        .collect();

    let mut specs = Vec::new();
    let mut structures = Vec::new();
    for col in &manifest.columns {
        // parse every declared column so that missing values surface even inside blocks
        let (structure, levels, kind) = match col.kind {
            ColumnKind::Numeric => {
                let x = table.numeric(&col.name)?;
                if in_block.contains(col.name.as_str()) {
                    continue;
                }
                let s = encode_numeric(&x, &w).map_err(|e| with_name(e, &col.name))?;
                (s, Vec::new(), VariableKind::Numeric)
            }
            ColumnKind::Categorical => {
                let cells = table.cells(&col.name)?;
                let (ids, labels) = level_ids(&cells);
                let s = encode_categorical(&ids, labels.len(), &w).map_err(|e| with_name(e, &col.name))?;
                (s, labels.iter().map(|l| l.to_string()).collect(), VariableKind::Categorical)
            }
        };
        specs.push(VariableSpec {
            name: col.name.clone(),
            kind,
            columns: vec![col.name.clone()],
            levels,
        });
        structures.push(structure.with_label(col.name.clone()));
    }
    for block in &manifest.blocks {
        let cols: Vec<DVector<f64>> = block
            .columns
            .iter()
            .map(|c| table.numeric(c))
            .collect::<Result<_>>()?;
        let x = DMatrix::from_columns(&cols);
        let m = match block.metric {
            BlockMetric::Projector => projector_metric(&x, &w),
            BlockMetric::Standardized => standardizing_metric(&x, &w),
        }
        .map_err(|e| with_name(e, &block.name))?;
        let s = encode_block(&x, &m, &w).map_err(|e| with_name(e, &block.name))?;
        specs.push(VariableSpec {
            name: block.name.clone(),
            kind: VariableKind::Block,
            columns: block.columns.clone(),
            levels: Vec::new(),
        });
        structures.push(s.with_label(block.name.clone()));
    }
    Ok(Dataset {
        specs,
        structures,
        weights: w,
    })
}

fn with_name(e: varsphere::Error, name: &str) -> CliError {
    match e {
        varsphere::Error::ZeroVariance => CliError::invalid(format!("variable {name:?} is constant")),
        varsphere::Error::InvalidCategorical(msg) => {
            CliError::invalid(format!("variable {name:?}: {msg}"))
        }
        other => CliError::Core(other),
    }
}

/// Table and manifest for a run: the manifest when given (its `data` entry
/// overridden by `data`), otherwise every column of `data` with inferred kinds.
pub fn load(data: Option<&Path>, manifest: Option<&Path>) -> Result<(DatasetManifest, Dataset)> {
    let manifest = match manifest {
        Some(path) => Some(DatasetManifest::load(path)?),
        None => None,
    };
    let data_path = data
        .map(Path::to_path_buf)
        .or_else(|| manifest.as_ref().and_then(|m| m.data.clone()))
        .ok_or_else(|| CliError::invalid("no data file: pass --data or set `data` in the manifest"))?;
    let table = Table::read(&data_path)?;
    let manifest = match manifest {
        Some(mut m) => {
            m.data = Some(data_path);
            m
        }
        None => table.infer_manifest(),
    };
    let dataset = ingest(&manifest, &table)?;
    Ok((manifest, dataset))
}
