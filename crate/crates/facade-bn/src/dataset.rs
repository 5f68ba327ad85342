//! Datasets of complete categorical observations and contingency tables.
//!
//! Rows are stored as level indices in schema order, so counting and CPT
//! estimation are plain integer indexing. Ingestion validates every cell
//! against the declared levels; missing cells are either rejected or the row
//! is dropped, never imputed.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::schema::Schema;

/// What to do with a source row that has a missing cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingPolicy {
    /// Fail ingestion on the first missing cell.
    #[default]
    Reject,
    /// Drop the offending row and record it.
    DropRow,
}

/// A complete, validated table of observations over a [`Schema`].
///
/// Immutable after construction. Columns are in schema order regardless of
/// the order in the source file.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    rows: Vec<Vec<u8>>,
}

/// Ingestion result: the dataset plus anything worth telling the user about.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    /// Human-readable notes (ignored columns, dropped rows).
    pub warnings: Vec<String>,
    /// Number of rows removed under [`MissingPolicy::DropRow`].
    pub dropped_rows: usize,
}

impl Dataset {
    /// Build a dataset from rows of level codes (each row in schema order).
    pub fn from_rows<S: AsRef<str>>(schema: Schema, rows: &[Vec<S>]) -> Result<Dataset> {
        let mut index_rows = Vec::with_capacity(rows.len());
        for (r, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(Error::SchemaMismatch(format!(
                    "row {} has {} cells, schema has {} variables",
                    r + 1,
                    row.len(),
                    schema.len()
                )));
            }
            let mut encoded = Vec::with_capacity(row.len());
            for (v, cell) in row.iter().enumerate() {
                let var = schema.variable(v);
                let idx = var
                    .level_index(cell.as_ref())
                    .ok_or_else(|| Error::InvalidLevel {
                        row: r + 1,
                        column: var.name().to_string(),
                        value: cell.as_ref().to_string(),
                    })?;
                encoded.push(idx as u8);
            }
            index_rows.push(encoded);
        }
        Ok(Dataset {
            schema,
            rows: index_rows,
        })
    }

    /// Build directly from level indices. Indices must be in range.
    pub(crate) fn from_index_rows(schema: Schema, rows: Vec<Vec<u8>>) -> Dataset {
        debug_assert!(rows.iter().all(|r| {
            r.len() == schema.len()
                && r.iter()
                    .enumerate()
                    .all(|(v, &l)| (l as usize) < schema.variable(v).cardinality())
        }));
        Dataset { schema, rows }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Level index of `var_index` in row `row`.
    pub fn level(&self, row: usize, var_index: usize) -> usize {
        self.rows[row][var_index] as usize
    }

    pub fn index_rows(&self) -> impl Iterator<Item = &[u8]> {
        self.rows.iter().map(|r| r.as_slice())
    }

    /// Level codes of one row, in schema order.
    pub fn row_codes(&self, row: usize) -> Vec<&str> {
        self.rows[row]
            .iter()
            .enumerate()
            .map(|(v, &l)| self.schema.variable(v).levels()[l as usize].as_str())
            .collect()
    }

    /// Serialize back to CSV in schema order.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let names: Vec<&str> = self.schema.variables().iter().map(|v| v.name()).collect();
        let _ = writeln!(out, "{}", names.join(","));
        for r in 0..self.rows.len() {
            let _ = writeln!(out, "{}", self.row_codes(r).join(","));
        }
        out
    }

    /// Guard for statistical operations, which all need at least one row.
    pub fn require_rows(&self) -> Result<()> {
        if self.rows.is_empty() {
            Err(Error::NoData("dataset has no rows".into()))
        } else {
            Ok(())
        }
    }
}

/// Parse CSV text against a schema.
///
/// The header must name every schema variable; extra columns are ignored with
/// a warning. Cells are trimmed; an empty cell is treated as missing and
/// handled per `policy`. Loading an empty body is an error, as is ending up
/// with zero rows after dropping.
pub fn load_csv(text: &str, schema: &Schema, policy: MissingPolicy) -> Result<LoadedDataset> {
    // Spreadsheet exports often prepend a UTF-8 BOM, which would otherwise
    // corrupt the first header name.
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());

    let headers = reader.headers()?.clone();
    let mut warnings = Vec::new();

    // Map each schema variable to its source column.
    let mut columns = Vec::with_capacity(schema.len());
    for var in schema.variables() {
        let col = headers
            .iter()
            .position(|h| h == var.name())
            .ok_or_else(|| {
                Error::SchemaMismatch(format!(
                    "header is missing schema variable {:?}",
                    var.name()
                ))
            })?;
        columns.push(col);
    }
    for (i, h) in headers.iter().enumerate() {
        if !columns.contains(&i) {
            warnings.push(format!("ignoring column {h:?} not in schema"));
        }
    }

    let mut rows: Vec<Vec<u8>> = Vec::new();
    let mut dropped_rows = 0usize;
    'records: for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row_number = r + 1;
        let mut encoded = Vec::with_capacity(schema.len());
        for (v, &col) in columns.iter().enumerate() {
            let var = schema.variable(v);
            let cell = record.get(col).unwrap_or("");
            if cell.is_empty() {
                match policy {
                    MissingPolicy::Reject => {
                        return Err(Error::MissingValue {
                            row: row_number,
                            column: var.name().to_string(),
                        })
                    }
                    MissingPolicy::DropRow => {
                        dropped_rows += 1;
                        warnings.push(format!(
                            "dropped row {row_number}: missing value for {:?}",
                            var.name()
                        ));
                        continue 'records;
                    }
                }
            }
            let idx = var.level_index(cell).ok_or_else(|| Error::InvalidLevel {
                row: row_number,
                column: var.name().to_string(),
                value: cell.to_string(),
            })?;
            encoded.push(idx as u8);
        }
        rows.push(encoded);
    }

    if rows.is_empty() {
        return Err(Error::NoData(
            "dataset is empty after ingestion (need at least one row)".into(),
        ));
    }

    Ok(LoadedDataset {
        dataset: Dataset::from_index_rows(schema.clone(), rows),
        warnings,
        dropped_rows,
    })
}

/// Counts over the cross-product of axis levels, among rows matching a
/// conditioning assignment. Dense, row-major, last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTable {
    axes: Vec<String>,
    dims: Vec<usize>,
    given: Vec<(String, String)>,
    counts: Vec<u64>,
    total: u64,
}

impl CountTable {
    pub fn axes(&self) -> &[String] {
        &self.axes
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn given(&self) -> &[(String, String)] {
        &self.given
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, levels: &[usize]) -> u64 {
        self.counts[self.offset(levels)]
    }

    fn offset(&self, levels: &[usize]) -> usize {
        debug_assert_eq!(levels.len(), self.dims.len());
        let mut idx = 0usize;
        for (l, d) in levels.iter().zip(&self.dims) {
            debug_assert!(l < d);
            idx = idx * d + l;
        }
        idx
    }
}

/// Tabulate `axes` among rows of `data` matching the `given` assignment.
pub fn contingency_table(
    data: &Dataset,
    axes: &[&str],
    given: &[(&str, &str)],
) -> Result<CountTable> {
    if axes.is_empty() {
        return Err(Error::DomainError(
            "contingency table needs at least one axis".into(),
        ));
    }
    let schema = data.schema();

    let mut axis_idx = Vec::with_capacity(axes.len());
    for name in axes {
        axis_idx.push(schema.require(name)?);
    }
    let mut given_idx = Vec::with_capacity(given.len());
    for (name, value) in given {
        let vi = schema.require(name)?;
        if axis_idx.contains(&vi) {
            return Err(Error::DomainError(format!(
                "variable {name:?} appears both as an axis and in the conditioning assignment"
            )));
        }
        let li = schema.variable(vi).level_index(value).ok_or_else(|| {
            Error::DomainError(format!("{value:?} is not a level of variable {name:?}"))
        })?;
        given_idx.push((vi, li));
    }

    let dims: Vec<usize> = axis_idx
        .iter()
        .map(|&i| schema.variable(i).cardinality())
        .collect();
    let size = dims.iter().product();
    let mut counts = vec![0u64; size];
    let mut total = 0u64;

    for row in data.index_rows() {
        if given_idx.iter().any(|&(vi, li)| row[vi] as usize != li) {
            continue;
        }
        let mut idx = 0usize;
        for (&vi, &d) in axis_idx.iter().zip(&dims) {
            idx = idx * d + row[vi] as usize;
        }
        counts[idx] += 1;
        total += 1;
    }

    Ok(CountTable {
        axes: axes.iter().map(|s| s.to_string()).collect(),
        dims,
        given: given
            .iter()
            .map(|(n, v)| (n.to_string(), v.to_string()))
            .collect(),
        counts,
        total,
    })
}
