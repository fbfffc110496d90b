use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::io::Read;
use std::path::Path;
use thiserror::Error;

/// The exoplanet table shipped with the crate.
pub const BUNDLED_CATALOG_CSV: &str = include_str!("../../data/exoplanets.csv");
pub const BUNDLED_TARGET_COLUMN: &str = "Orbital Period (days)";
pub const BUNDLED_RETRIEVE_COLUMN: &str = "Planet";

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("cannot read catalog: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed catalog CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("column `{0}` not found in catalog header")]
    MissingColumn(String),
    #[error("duplicate value `{value}` in identity column `{column}`")]
    DuplicateIdentity { column: String, value: String },
    #[error("row {row}: target value `{value}` is not a finite number")]
    NonNumericTarget { row: usize, value: String },
    #[error("catalog has no rows")]
    EmptyCatalog,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogRow {
    /// Cell text, aligned with `Catalog::columns`.
    pub cells: Vec<String>,
}

/// An immutable table of entities with one numeric target column and one
/// unique identity column.
#[derive(Clone, Debug)]
pub struct Catalog {
    columns: Vec<String>,
    rows: Vec<CatalogRow>,
    target: usize,
    retrieve: usize,
    target_values: Vec<f64>,
}

pub fn load_catalog(
    path: impl AsRef<Path>,
    target_column: &str,
    retrieve_column: &str,
) -> Result<Catalog, CatalogError> {
    let file = std::fs::File::open(path)?;
    Catalog::from_reader(file, target_column, retrieve_column)
}

impl Catalog {
    pub fn bundled() -> Catalog {
        Catalog::from_reader(
            BUNDLED_CATALOG_CSV.as_bytes(),
            BUNDLED_TARGET_COLUMN,
            BUNDLED_RETRIEVE_COLUMN,
        )
        .expect("bundled catalog is valid")
    }

    pub fn from_reader<R: Read>(
        reader: R,
        target_column: &str,
        retrieve_column: &str,
    ) -> Result<Catalog, CatalogError> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let columns: Vec<String> = csv
            .headers()?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let find = |name: &str| {
            columns
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| CatalogError::MissingColumn(name.to_string()))
        };
        let target = find(target_column)?;
        let retrieve = find(retrieve_column)?;

        let mut rows = Vec::new();
        let mut target_values = Vec::new();
        let mut seen = HashSet::new();
        for (i, record) in csv.records().enumerate() {
            let record = record?;
            let cells: Vec<String> = record.iter().map(|c| c.trim().to_string()).collect();
            let raw = &cells[target];
            let value: f64 = raw
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| CatalogError::NonNumericTarget {
                    row: i + 1,
                    value: raw.clone(),
                })?;
            if !seen.insert(cells[retrieve].clone()) {
                return Err(CatalogError::DuplicateIdentity {
                    column: retrieve_column.to_string(),
                    value: cells[retrieve].clone(),
                });
            }
            target_values.push(value);
            rows.push(CatalogRow { cells });
        }
        if rows.is_empty() {
            return Err(CatalogError::EmptyCatalog);
        }
        Ok(Catalog {
            columns,
            rows,
            target,
            retrieve,
            target_values,
        })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[CatalogRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn target_column(&self) -> &str {
        &self.columns[self.target]
    }

    pub fn retrieve_column(&self) -> &str {
        &self.columns[self.retrieve]
    }

    pub fn target_index(&self) -> usize {
        self.target
    }

    pub fn retrieve_index(&self) -> usize {
        self.retrieve
    }

    pub fn target_value(&self, row: usize) -> f64 {
        self.target_values[row]
    }

    pub fn target_text(&self, row: usize) -> &str {
        &self.rows[row].cells[self.target]
    }

    pub fn identity(&self, row: usize) -> &str {
        &self.rows[row].cells[self.retrieve]
    }
}
