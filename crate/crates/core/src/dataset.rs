//! Tabular classification datasets: ingestion from delimited text, typed
//! columns with missing-value masks, and dense label encoding.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

const MISSING_TOKENS: &[&str] = &["", "?", "NA", "N/A", "NaN", "nan", "null", "NULL"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Binary,
}

/// One feature column. Categorical and binary columns store level codes
/// (indices into `levels`); numeric columns store raw values. Missing
/// cells hold `NaN` and are flagged in the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    name: String,
    kind: ColumnKind,
    values: Vec<f64>,
    missing: Vec<bool>,
    levels: Vec<String>,
}

impl Column {
    pub fn numeric(name: impl Into<String>, values: Vec<f64>) -> Self {
        let missing = values.iter().map(|v| v.is_nan()).collect();
        Self {
            name: name.into(),
            kind: ColumnKind::Numeric,
            values,
            missing,
            levels: Vec::new(),
        }
    }

    /// Builds a categorical (or binary, when exactly two levels occur)
    /// column from optional string cells.
    pub fn categorical(name: impl Into<String>, cells: &[Option<&str>]) -> Self {
        let mut levels: Vec<String> = cells.iter().flatten().map(|s| s.to_string()).collect();
        sort_levels(&mut levels);
        levels.dedup();
        let index: BTreeMap<&str, usize> =
            levels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let values = cells
            .iter()
            .map(|c| c.map_or(f64::NAN, |s| index[s] as f64))
            .collect();
        let missing = cells.iter().map(Option::is_none).collect();
        let kind = if levels.len() == 2 {
            ColumnKind::Binary
        } else {
            ColumnKind::Categorical
        };
        Self {
            name: name.into(),
            kind,
            values,
            missing,
            levels,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ColumnKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn missing(&self) -> &[bool] {
        &self.missing
    }

    pub fn levels(&self) -> &[String] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    /// Non-missing values in row order.
    pub fn present(&self) -> Vec<f64> {
        self.values.iter().copied().filter(|v| !v.is_nan()).collect()
    }

    fn cell_text(&self, row: usize) -> String {
        if self.missing[row] {
            return String::new();
        }
        match self.kind {
            ColumnKind::Numeric => format!("{}", self.values[row]),
            _ => self.levels[self.values[row] as usize].clone(),
        }
    }

    fn take(&self, rows: &[usize]) -> Column {
        Column {
            name: self.name.clone(),
            kind: self.kind,
            values: rows.iter().map(|&r| self.values[r]).collect(),
            missing: rows.iter().map(|&r| self.missing[r]).collect(),
            levels: self.levels.clone(),
        }
    }
}

/// Numeric-aware ordering so "2" < "10" when every level parses.
fn sort_levels(levels: &mut [String]) {
    let all_numeric = levels.iter().all(|l| l.trim().parse::<f64>().is_ok());
    if all_numeric {
        levels.sort_by(|a, b| {
            let x: f64 = a.trim().parse().unwrap();
            let y: f64 = b.trim().parse().unwrap();
            x.total_cmp(&y).then_with(|| a.cmp(b))
        });
    } else {
        levels.sort();
    }
}

/// An immutable classification task.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    id: String,
    name: String,
    features: Vec<Column>,
    target_name: String,
    target: Vec<usize>,
    class_labels: Vec<String>,
    dropped_rows: usize,
}

impl Dataset {
    /// Builds a dataset from typed columns and string class labels. Labels
    /// are remapped to `0..c` in sorted order.
    pub fn new(
        id: impl Into<String>,
        name: impl Into<String>,
        features: Vec<Column>,
        target_name: impl Into<String>,
        labels: &[String],
    ) -> Result<Self> {
        let mut class_labels = labels.to_vec();
        sort_levels(&mut class_labels);
        class_labels.dedup();
        let index: BTreeMap<&str, usize> = class_labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        let target = labels.iter().map(|l| index[l.as_str()]).collect();
        let ds = Self {
            id: id.into(),
            name: name.into(),
            features,
            target_name: target_name.into(),
            target,
            class_labels,
            dropped_rows: 0,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Convenience constructor for all-numeric data with integer labels.
    pub fn from_numeric(id: impl Into<String>, x: &Matrix, labels: &[usize]) -> Result<Self> {
        let features = (0..x.cols())
            .map(|j| Column::numeric(format!("x{j}"), x.column(j)))
            .collect();
        let labels: Vec<String> = labels.iter().map(|l| l.to_string()).collect();
        let id = id.into();
        Self::new(id.clone(), id, features, "class", &labels)
    }

    fn validate(&self) -> Result<()> {
        let n = self.target.len();
        if n == 0 {
            return Err(Error::InvalidDataset("no instances".into()));
        }
        if self.features.is_empty() {
            return Err(Error::InvalidDataset("no feature columns".into()));
        }
        if self.class_labels.len() < 2 {
            return Err(Error::SingleClassTarget);
        }
        for col in &self.features {
            if col.len() != n || col.missing.len() != n {
                return Err(Error::InvalidDataset(format!(
                    "column `{}` has length {}, expected {n}",
                    col.name,
                    col.len()
                )));
            }
        }
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn features(&self) -> &[Column] {
        &self.features
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    /// Dense class indices in `0..c`.
    pub fn labels(&self) -> &[usize] {
        &self.target
    }

    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    pub fn n(&self) -> usize {
        self.target.len()
    }

    pub fn p(&self) -> usize {
        self.features.len()
    }

    pub fn c(&self) -> usize {
        self.class_labels.len()
    }

    /// Rows removed at load because their target was missing.
    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.c()];
        for &y in &self.target {
            counts[y] += 1;
        }
        counts
    }

    pub fn missing_count(&self) -> usize {
        self.features.iter().map(Column::missing_count).sum()
    }

    pub fn rows_with_missing(&self) -> usize {
        (0..self.n())
            .filter(|&r| self.features.iter().any(|c| c.missing[r]))
            .count()
    }

    /// Missing mask in row-major order (row, column).
    pub fn missing_mask(&self) -> Vec<Vec<bool>> {
        (0..self.n())
            .map(|r| self.features.iter().map(|c| c.missing[r]).collect())
            .collect()
    }

    /// Design matrix: numeric values as-is, categorical/binary as level
    /// codes, missing cells as `NaN`.
    pub fn feature_matrix(&self) -> Matrix {
        let (n, p) = (self.n(), self.p());
        let mut data = Vec::with_capacity(n * p);
        for r in 0..n {
            data.extend(self.features.iter().map(|c| c.values[r]));
        }
        Matrix::new(n, p, data)
    }

    /// Row subset keeping the full class set (so `c` is unchanged).
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            id: self.id.clone(),
            name: self.name.clone(),
            features: self.features.iter().map(|c| c.take(rows)).collect(),
            target_name: self.target_name.clone(),
            target: rows.iter().map(|&r| self.target[r]).collect(),
            class_labels: self.class_labels.clone(),
            dropped_rows: 0,
        }
    }

    /// Writes the dataset back as comma-separated text with the target as
    /// the last column.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        let mut header: Vec<&str> = self.features.iter().map(|c| c.name.as_str()).collect();
        header.push(&self.target_name);
        w.write_record(&header).map_err(|e| csv_io(path, e))?;
        for r in 0..self.n() {
            let mut rec: Vec<String> = self.features.iter().map(|c| c.cell_text(r)).collect();
            rec.push(self.class_labels[self.target[r]].clone());
            w.write_record(&rec).map_err(|e| csv_io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            row: 0,
            col: 0,
            message: format!("{other:?}"),
        },
    }
}

fn detect_delimiter(header: &str) -> u8 {
    [b',', b';', b'\t']
        .into_iter()
        .max_by_key(|&d| (header.bytes().filter(|&b| b == d).count(), d == b','))
        .unwrap_or(b',')
}

fn is_missing(cell: &str) -> bool {
    MISSING_TOKENS.contains(&cell.trim())
}

/// Loads a delimited text file with a header row. The delimiter is
/// detected among comma, semicolon and tab. Rows with a missing target are
/// dropped; missing feature cells are kept and masked.
pub fn load_dataset(path: impl AsRef<Path>, target_name: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header_line = text.lines().next().unwrap_or("");
    let delimiter = detect_delimiter(header_line);
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(e, 1))?
        .iter()
        .map(str::to_string)
        .collect();
    let target_idx = headers
        .iter()
        .position(|h| h == target_name)
        .ok_or_else(|| Error::TargetMissing(target_name.to_string()))?;

    let mut cells: Vec<Vec<Option<String>>> = vec![Vec::new(); headers.len()];
    let mut dropped = 0;
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(e, i + 2))?;
        if rec.len() != headers.len() {
            return Err(Error::Parse {
                row: i + 2,
                col: rec.len().min(headers.len()) + 1,
                message: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        if is_missing(&rec[target_idx]) {
            dropped += 1;
            continue;
        }
        for (j, cell) in rec.iter().enumerate() {
            cells[j].push((!is_missing(cell)).then(|| cell.to_string()));
        }
    }
    if dropped > 0 {
        log::warn!("{}: dropped {dropped} rows with missing target", path.display());
    }

    let labels: Vec<String> = cells[target_idx].iter().map(|c| c.clone().unwrap()).collect();
    {
        let mut distinct = labels.clone();
        distinct.sort();
        distinct.dedup();
        if distinct.len() < 2 {
            return Err(Error::SingleClassTarget);
        }
    }

    let mut features = Vec::with_capacity(headers.len() - 1);
    for (j, name) in headers.iter().enumerate() {
        if j == target_idx {
            continue;
        }
        features.push(infer_column(name, &cells[j]));
    }
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let mut ds = Dataset::new(stem.clone(), stem, features, target_name, &labels)?;
    ds.dropped_rows = dropped;
    Ok(ds)
}

fn parse_err(e: csv::Error, row: usize) -> Error {
    let row = e.position().map_or(row, |p| p.line() as usize);
    Error::Parse {
        row,
        col: 0,
        message: e.to_string(),
    }
}

/// Binary when exactly two distinct values occur, numeric when every
/// present cell parses as a number, categorical otherwise.
fn infer_column(name: &str, cells: &[Option<String>]) -> Column {
    let present: Vec<&str> = cells.iter().flatten().map(String::as_str).collect();
    let mut distinct = present.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let refs: Vec<Option<&str>> = cells.iter().map(|c| c.as_deref()).collect();
    if distinct.len() == 2 {
        return Column::categorical(name, &refs);
    }
    let parsed: Option<Vec<f64>> = cells
        .iter()
        .map(|c| match c {
            None => Some(f64::NAN),
            Some(s) => s.parse::<f64>().ok().filter(|v| v.is_finite()),
        })
        .collect();
    match parsed {
        Some(values) => Column::numeric(name, values),
        None => Column::categorical(name, &refs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn four_rows_two_classes() {
        let f = write_tmp("x,y\n1,a\n2,a\n3,b\n4,b\n");
        let ds = load_dataset(f.path(), "y").unwrap();
        assert_eq!(ds.n(), 4);
        assert_eq!(ds.c(), 2);
        assert_eq!(ds.labels(), &[0, 0, 1, 1]);
    }

    #[test]
    fn single_class_target_rejected() {
        let f = write_tmp("x,y\n1,a\n2,a\n3,a\n");
        assert!(matches!(load_dataset(f.path(), "y"), Err(Error::SingleClassTarget)));
    }

    #[test]
    fn blank_cell_is_counted_missing() {
        let mut s = String::from("a,b,c,y\n");
        for i in 0..10 {
            let b = if i == 4 { String::new() } else { format!("{}", i * 2 + 1) };
            s.push_str(&format!("{}.5,{b},{},{}\n", i, i * i, i % 2));
        }
        let f = write_tmp(&s);
        let ds = load_dataset(f.path(), "y").unwrap();
        assert_eq!(ds.p(), 3);
        assert_eq!(ds.missing_count(), 1);
        assert!(ds.features().iter().all(|c| c.kind() == ColumnKind::Numeric));
    }

    #[test]
    fn missing_file_and_missing_target() {
        assert!(matches!(
            load_dataset("/nonexistent/nowhere.csv", "y"),
            Err(Error::FileNotFound(_))
        ));
        let f = write_tmp("x,z\n1,a\n2,b\n");
        assert!(matches!(load_dataset(f.path(), "y"), Err(Error::TargetMissing(_))));
    }

    #[test]
    fn ragged_row_reports_position() {
        let f = write_tmp("x,w,y\n1,2,a\n2,b\n3,4,b\n");
        match load_dataset(f.path(), "y") {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn delimiter_detection_and_types() {
        let f = write_tmp("color;flag;v;y\nred;yes;1.5;p\nblue;no;2;q\ngreen;yes;3;p\n");
        let ds = load_dataset(f.path(), "y").unwrap();
        let kinds: Vec<_> = ds.features().iter().map(Column::kind).collect();
        assert_eq!(
            kinds,
            vec![ColumnKind::Categorical, ColumnKind::Binary, ColumnKind::Numeric]
        );
        let f = write_tmp("a\tb\ty\n1\t5\tx\n2\t6\ty\n3\t7\tx\n");
        assert_eq!(load_dataset(f.path(), "y").unwrap().p(), 2);
    }

    #[test]
    fn missing_target_rows_dropped() {
        let f = write_tmp("x,y\n1,a\n2,\n3,b\n4,?\n");
        let ds = load_dataset(f.path(), "y").unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.dropped_rows(), 2);
    }

    #[test]
    fn write_then_reload_round_trips() {
        let f = write_tmp("c,v,y\nred,1.25,a\n,2,b\nblue,,a\ngreen,-3e-7,c\n");
        let ds = load_dataset(f.path(), "y").unwrap();
        let out = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        ds.write_csv(out.path()).unwrap();
        let back = load_dataset(out.path(), "y").unwrap();
        assert_eq!((back.n(), back.p(), back.c()), (ds.n(), ds.p(), ds.c()));
        assert_eq!(back.missing_mask(), ds.missing_mask());
        assert_eq!(back.feature_matrix().as_slice().len(), 8);
    }
}
