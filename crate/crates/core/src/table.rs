//! Tabular ingestion and preprocessing.
//!
//! Source tables arrive as CSV with a header row whose first column carries
//! the row labels. Loading classifies every other column as numeric,
//! categorical or rejected (identifier-like data such as serial numbers and
//! hex hashes), and drops aggregate rows whose numeric cells are the column
//! sums of the remaining rows. Merging, decomposition and imputation are
//! separate operations so the corpus builder can assemble its table pool.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use regex::Regex;
use thiserror::Error;

/// Relative tolerance used when comparing a candidate aggregate row against
/// the column sums of the other rows.
pub const AGGREGATE_REL_TOL: f64 = 1e-9;

/// Fraction of identifier-like cells above which a column is rejected.
pub const REJECT_FRACTION: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum TableError {
    #[error("CSV parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("table has no data rows")]
    Empty,
    #[error("table has no label column")]
    NoLabelColumn,
    #[error("duplicate column header {0:?}")]
    DuplicateHeader(String),
    #[error("duplicate row label {label:?} in table {table:?}")]
    DuplicateRowLabel { table: String, label: String },
    #[error("row labels of {table:?} do not match: missing {missing:?}, extra {extra:?}")]
    MergeMismatch {
        table: String,
        missing: Vec<String>,
        extra: Vec<String>,
    },
    #[error("nothing to merge")]
    NothingToMerge,
    #[error("column {header:?} is not numeric")]
    NotNumeric { header: String },
    #[error("column {header:?} has {observed} observed values; at least 2 are needed")]
    TooFewObserved { header: String, observed: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Number(f64),
    Text(String),
}

impl Scalar {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Scalar::Number(v) => Some(*v),
            Scalar::Text(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Rejected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub header: String,
    pub kind: ColumnKind,
    pub values: Vec<Option<Scalar>>,
}

impl Column {
    pub fn numeric(header: impl Into<String>, values: Vec<Option<f64>>) -> Self {
        Column {
            header: header.into(),
            kind: ColumnKind::Numeric,
            values: values.into_iter().map(|v| v.map(Scalar::Number)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn number(&self, row: usize) -> Option<f64> {
        self.values.get(row)?.as_ref()?.as_number()
    }

    pub fn numbers(&self) -> Vec<Option<f64>> {
        (0..self.values.len()).map(|i| self.number(i)).collect()
    }

    /// Observed (non-missing) numeric values in row order.
    pub fn observed(&self) -> Vec<f64> {
        self.numbers().into_iter().flatten().collect()
    }

    pub fn has_missing(&self) -> bool {
        self.values.iter().any(Option::is_none)
    }

    fn project(&self, rows: &[usize]) -> Column {
        Column {
            header: self.header.clone(),
            kind: self.kind,
            values: rows.iter().map(|&r| self.values[r].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    pub name: String,
    /// Header of the label column, e.g. "Country" or "Year".
    pub label_header: String,
    pub row_labels: Vec<String>,
    pub columns: Vec<Column>,
}

impl DataTable {
    /// Parse a CSV document. The first column holds row labels.
    pub fn from_csv(name: &str, csv_bytes: &[u8]) -> Result<DataTable, TableError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .trim(csv::Trim::All)
            .from_reader(csv_bytes);

        let headers: Vec<String> = reader
            .headers()
            .map_err(csv_error)?
            .iter()
            .map(str::to_string)
            .collect();
        if headers.is_empty() {
            return Err(TableError::NoLabelColumn);
        }
        let mut seen = BTreeSet::new();
        for h in &headers[1..] {
            if !seen.insert(h.as_str()) {
                return Err(TableError::DuplicateHeader(h.clone()));
            }
        }

        let mut row_labels = Vec::new();
        let mut cells: Vec<Vec<String>> = vec![Vec::new(); headers.len() - 1];
        for record in reader.records() {
            let record = record.map_err(csv_error)?;
            row_labels.push(record.get(0).unwrap_or_default().to_string());
            for (c, cell) in record.iter().skip(1).enumerate() {
                cells[c].push(cell.to_string());
            }
        }
        if row_labels.is_empty() {
            return Err(TableError::Empty);
        }

        let columns = headers[1..]
            .iter()
            .zip(cells)
            .map(|(h, raw)| classify_column(h, &raw))
            .collect();
        let mut table = DataTable {
            name: name.to_string(),
            label_header: headers[0].clone(),
            row_labels,
            columns,
        };
        table.remove_aggregate_rows();
        Ok(table)
    }

    pub fn n_rows(&self) -> usize {
        self.row_labels.len()
    }

    pub fn numeric_columns(&self) -> impl Iterator<Item = &Column> {
        self.columns.iter().filter(|c| c.kind == ColumnKind::Numeric)
    }

    pub fn column(&self, header: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.header == header)
    }

    /// Remove rows whose every numeric cell equals the sum of that column
    /// over the remaining rows. Returns the labels of removed rows.
    pub fn remove_aggregate_rows(&mut self) -> Vec<String> {
        let mut removed = Vec::new();
        let numeric: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind == ColumnKind::Numeric)
            .map(|(i, _)| i)
            .collect();
        if numeric.is_empty() {
            return removed;
        }
        loop {
            // An aggregate needs at least two constituent rows.
            if self.n_rows() < 3 {
                break;
            }
            let found = (0..self.n_rows()).find(|&row| self.is_aggregate_row(row, &numeric));
            match found {
                Some(row) => {
                    removed.push(self.row_labels.remove(row));
                    for col in &mut self.columns {
                        col.values.remove(row);
                    }
                }
                None => break,
            }
        }
        removed
    }

    fn is_aggregate_row(&self, row: usize, numeric: &[usize]) -> bool {
        numeric.iter().all(|&c| {
            let col = &self.columns[c];
            let Some(cell) = col.number(row) else {
                return false;
            };
            let rest: f64 = (0..self.n_rows())
                .filter(|&r| r != row)
                .filter_map(|r| col.number(r))
                .sum();
            approx_eq_rel(cell, rest, AGGREGATE_REL_TOL)
        })
    }

    /// Restrict the table to the given rows (in the given order).
    pub fn select_rows(&self, rows: &[usize]) -> DataTable {
        DataTable {
            name: self.name.clone(),
            label_header: self.label_header.clone(),
            row_labels: rows.iter().map(|&r| self.row_labels[r].clone()).collect(),
            columns: self.columns.iter().map(|c| c.project(rows)).collect(),
        }
    }
}

fn approx_eq_rel(a: f64, b: f64, tol: f64) -> bool {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        return true;
    }
    (a - b).abs() <= tol * scale
}

fn csv_error(err: csv::Error) -> TableError {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    TableError::Parse {
        line,
        message: err.to_string(),
    }
}

/// Parse CSV with the default table name.
pub fn load_table(csv_bytes: &[u8]) -> Result<DataTable, TableError> {
    DataTable::from_csv("table", csv_bytes)
}

/// Empty cell, "N/A", "NA" and "null" (case-insensitive) mark missing data.
pub fn is_missing_marker(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty()
        || t.eq_ignore_ascii_case("n/a")
        || t.eq_ignore_ascii_case("na")
        || t.eq_ignore_ascii_case("null")
}

fn thousands_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[+-]?\d{1,3}(,\d{3})+(\.\d+)?$").unwrap())
}

fn hex_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(0[xX][0-9A-Fa-f]+|[0-9A-Fa-f]{8,})$").unwrap())
}

fn serial_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[A-Za-z0-9]+([-_/.#][A-Za-z0-9]+)*$").unwrap())
}

/// Parse a numeric cell; accepts plain floats and comma-grouped thousands.
pub fn parse_number(cell: &str) -> Option<f64> {
    let t = cell.trim();
    let parsed = if thousands_re().is_match(t) {
        t.replace(',', "").parse::<f64>().ok()
    } else {
        t.parse::<f64>().ok()
    };
    parsed.filter(|v| v.is_finite())
}

/// Identifier-like cell: a hex hash (`0x…` or ≥ 8 hex digits mixing letters
/// and digits) or a serial code (a single alphanumeric token, optionally
/// joined by `-_/.#`, of length ≥ 5 with at least one letter and at least
/// three digits).
pub fn looks_like_identifier(cell: &str) -> bool {
    let t = cell.trim();
    if hex_re().is_match(t) {
        let prefixed = t.starts_with("0x") || t.starts_with("0X");
        let has_alpha = t.chars().any(|c| c.is_ascii_alphabetic());
        let has_digit = t.chars().any(|c| c.is_ascii_digit());
        if prefixed || (has_alpha && has_digit) {
            return true;
        }
    }
    if t.len() >= 5 && serial_re().is_match(t) {
        let letters = t.chars().filter(|c| c.is_ascii_alphabetic()).count();
        let digits = t.chars().filter(|c| c.is_ascii_digit()).count();
        return letters >= 1 && digits >= 3;
    }
    false
}

/// Classify raw cells into a typed column.
pub fn classify_column(header: &str, raw: &[String]) -> Column {
    let present: Vec<&str> = raw
        .iter()
        .map(String::as_str)
        .filter(|c| !is_missing_marker(c))
        .collect();
    let identifiers = present.iter().filter(|c| looks_like_identifier(c)).count();
    let kind = if present.is_empty()
        || identifiers as f64 > REJECT_FRACTION * present.len() as f64
    {
        ColumnKind::Rejected
    } else if present.iter().all(|c| parse_number(c).is_some()) {
        ColumnKind::Numeric
    } else {
        ColumnKind::Categorical
    };
    let values = raw
        .iter()
        .map(|c| {
            if is_missing_marker(c) {
                None
            } else if kind == ColumnKind::Numeric {
                parse_number(c).map(Scalar::Number)
            } else {
                Some(Scalar::Text(c.trim().to_string()))
            }
        })
        .collect();
    Column {
        header: header.to_string(),
        kind,
        values,
    }
}

/// Combine tables that share a row-label set into one wide table.
///
/// Rows follow the first table's order; other tables are aligned by label.
/// A header present in more than one input is suffixed with its source
/// table name, e.g. `price (A)`.
pub fn merge_tables(tables: &[DataTable]) -> Result<DataTable, TableError> {
    let first = tables.first().ok_or(TableError::NothingToMerge)?;
    for t in tables {
        check_unique_labels(t)?;
    }
    let reference: BTreeSet<&str> = first.row_labels.iter().map(String::as_str).collect();
    for t in &tables[1..] {
        let labels: BTreeSet<&str> = t.row_labels.iter().map(String::as_str).collect();
        if labels != reference {
            return Err(TableError::MergeMismatch {
                table: t.name.clone(),
                missing: reference.difference(&labels).map(|s| s.to_string()).collect(),
                extra: labels.difference(&reference).map(|s| s.to_string()).collect(),
            });
        }
    }

    let mut header_count: HashMap<&str, usize> = HashMap::new();
    for t in tables {
        for c in &t.columns {
            *header_count.entry(c.header.as_str()).or_default() += 1;
        }
    }

    let mut columns = Vec::new();
    let mut used = BTreeSet::new();
    for t in tables {
        let position: HashMap<&str, usize> = t
            .row_labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        let order: Vec<usize> = first.row_labels.iter().map(|l| position[l.as_str()]).collect();
        for c in &t.columns {
            let mut header = if header_count[c.header.as_str()] > 1 {
                format!("{} ({})", c.header, t.name)
            } else {
                c.header.clone()
            };
            let base = header.clone();
            let mut k = 2;
            while used.contains(&header) {
                header = format!("{base} #{k}");
                k += 1;
            }
            used.insert(header.clone());
            let mut col = c.project(&order);
            col.header = header;
            columns.push(col);
        }
    }

    Ok(DataTable {
        name: tables
            .iter()
            .map(|t| t.name.as_str())
            .collect::<Vec<_>>()
            .join(" + "),
        label_header: first.label_header.clone(),
        row_labels: first.row_labels.clone(),
        columns,
    })
}

fn check_unique_labels(t: &DataTable) -> Result<(), TableError> {
    let mut seen = BTreeSet::new();
    for l in &t.row_labels {
        if !seen.insert(l) {
            return Err(TableError::DuplicateRowLabel {
                table: t.name.clone(),
                label: l.clone(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decomposition {
    /// One table per column.
    ByColumn,
    /// Contiguous row groups of `group_size` rows (the last may be shorter).
    ByRowGroup { group_size: usize },
}

/// Split a table into smaller tables. Outputs without a numeric column are
/// discarded.
pub fn decompose_table(table: &DataTable, axis: Decomposition) -> Vec<DataTable> {
    let parts: Vec<DataTable> = match axis {
        Decomposition::ByColumn => table
            .columns
            .iter()
            .map(|c| DataTable {
                name: format!("{} / {}", table.name, c.header),
                label_header: table.label_header.clone(),
                row_labels: table.row_labels.clone(),
                columns: vec![c.clone()],
            })
            .collect(),
        Decomposition::ByRowGroup { group_size } => {
            if group_size == 0 {
                return Vec::new();
            }
            let rows: Vec<usize> = (0..table.n_rows()).collect();
            rows.chunks(group_size)
                .enumerate()
                .map(|(i, chunk)| {
                    let mut part = table.select_rows(chunk);
                    part.name = format!("{} [{}]", table.name, i + 1);
                    part
                })
                .collect()
        }
    };
    parts
        .into_iter()
        .filter(|t| t.numeric_columns().next().is_some())
        .collect()
}

/// Sample mean and sample standard deviation (n − 1 denominator).
pub fn mean_and_sample_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Fill missing numeric cells with draws from a normal distribution fitted
/// to the observed values. Columns without missing cells are returned
/// unchanged and consume no randomness.
pub fn impute_missing<R: Rng + ?Sized>(column: &Column, rng: &mut R) -> Result<Column, TableError> {
    if column.kind != ColumnKind::Numeric {
        return Err(TableError::NotNumeric {
            header: column.header.clone(),
        });
    }
    let observed = column.observed();
    if observed.len() < 2 {
        return Err(TableError::TooFewObserved {
            header: column.header.clone(),
            observed: observed.len(),
        });
    }
    if !column.has_missing() {
        return Ok(column.clone());
    }
    let (mean, std) = mean_and_sample_std(&observed);
    let normal = if std > 0.0 {
        Some(Normal::new(mean, std).expect("finite std"))
    } else {
        None
    };
    let values = column
        .values
        .iter()
        .map(|v| match v {
            Some(s) => Some(s.clone()),
            None => {
                let draw = match &normal {
                    Some(n) => n.sample(rng),
                    None => mean,
                };
                Some(Scalar::Number(draw))
            }
        })
        .collect();
    Ok(Column {
        header: column.header.clone(),
        kind: column.kind,
        values,
    })
}

/// Impute every numeric column; columns that cannot be imputed become
/// rejected. Returns the headers that were rejected.
pub fn impute_table<R: Rng + ?Sized>(table: &mut DataTable, rng: &mut R) -> Vec<String> {
    let mut rejected = Vec::new();
    for col in &mut table.columns {
        if col.kind != ColumnKind::Numeric {
            continue;
        }
        match impute_missing(col, rng) {
            Ok(filled) => *col = filled,
            Err(_) => {
                col.kind = ColumnKind::Rejected;
                rejected.push(col.header.clone());
            }
        }
    }
    rejected
}

/// Group tables by identical row-label sets; returns groups with at least
/// two members, keyed by the sorted label list.
pub fn mergeable_groups(tables: &[DataTable]) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<Vec<String>, Vec<usize>> = BTreeMap::new();
    for (i, t) in tables.iter().enumerate() {
        let mut labels = t.row_labels.clone();
        labels.sort();
        groups.entry(labels).or_default().push(i);
    }
    groups.into_values().filter(|g| g.len() > 1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table(csv: &str) -> DataTable {
        DataTable::from_csv("t", csv.as_bytes()).unwrap()
    }

    #[test]
    fn loads_simple_table() {
        let t = load_table(b"id,a\nr1,1\nr2,2").unwrap();
        assert_eq!(t.row_labels, vec!["r1", "r2"]);
        assert_eq!(t.columns.len(), 1);
        assert_eq!(t.columns[0].kind, ColumnKind::Numeric);
        assert_eq!(t.columns[0].numbers(), vec![Some(1.0), Some(2.0)]);
    }

    #[test]
    fn malformed_csv_reports_line() {
        let err = load_table(b"id,a\nr1,1\nr2,2,3\n").unwrap_err();
        match err {
            TableError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_only_is_empty() {
        assert_eq!(load_table(b"id,a\n").unwrap_err(), TableError::Empty);
    }

    #[test]
    fn duplicate_header_rejected() {
        assert!(matches!(
            load_table(b"id,a,a\nr,1,2\n"),
            Err(TableError::DuplicateHeader(_))
        ));
    }

    #[test]
    fn aggregate_row_removed() {
        let t = table("name,x,y\na,1,10\nb,2,20\nc,3.5,30\nTotal,6.5,60\n");
        assert_eq!(t.row_labels, vec!["a", "b", "c"]);
    }

    #[test]
    fn near_aggregate_row_kept() {
        let t = table("name,x,y\na,1,10\nb,2,20\nc,3,30\nTotal,6,61\n");
        assert_eq!(t.n_rows(), 4);
    }

    #[test]
    fn aggregate_needs_two_constituents() {
        let t = table("name,x\na,1\nb,1\n");
        assert_eq!(t.n_rows(), 2);
    }

    #[test]
    fn hex_and_serial_columns_rejected() {
        let t = table(
            "name,hash,serial,v,cat\n\
             a,0x3fa9c1,SN-00123,1,red\n\
             b,0x99ab02,SN-00456,2,blue\n\
             c,0x1234ff,SN-00789,3,green\n",
        );
        let kinds: Vec<_> = t.columns.iter().map(|c| c.kind).collect();
        assert_eq!(
            kinds,
            vec![
                ColumnKind::Rejected,
                ColumnKind::Rejected,
                ColumnKind::Numeric,
                ColumnKind::Categorical
            ]
        );
    }

    #[test]
    fn bundled_census_fixture_rejects_identifiers() {
        let bytes = include_bytes!("../../../fixtures/tables/standard/state_census_2010.csv");
        let t = DataTable::from_csv("census", bytes).unwrap();
        assert_eq!(t.column("Tract ID").unwrap().kind, ColumnKind::Rejected);
        assert_eq!(t.column("Record Hash").unwrap().kind, ColumnKind::Rejected);
        assert_eq!(t.column("Median Income").unwrap().kind, ColumnKind::Numeric);
        assert_eq!(t.column("Men (M)").unwrap().kind, ColumnKind::Numeric);
    }

    #[test]
    fn bundled_population_fixture_drops_total() {
        let bytes = include_bytes!("../../../fixtures/tables/standard/population_millions.csv");
        let t = DataTable::from_csv("pop", bytes).unwrap();
        assert!(!t.row_labels.iter().any(|l| l == "Total"));
        assert_eq!(t.n_rows(), 16);
    }

    #[test]
    fn plain_large_integers_stay_numeric() {
        assert!(!looks_like_identifier("12345678"));
        assert!(!looks_like_identifier("2017-03-01"));
        assert!(looks_like_identifier("3fa9c1d2e8"));
        assert!(looks_like_identifier("AB12345"));
        assert!(!looks_like_identifier("Brazil"));
    }

    #[test]
    fn missing_markers() {
        for m in ["", " ", "N/A", "n/a", "NA", "na", "null", "NULL"] {
            assert!(is_missing_marker(m), "{m:?}");
        }
        assert!(!is_missing_marker("0"));
        let t = table("k,v\na,1\nb,N/A\nc,null\nd,3\n");
        assert_eq!(t.columns[0].kind, ColumnKind::Numeric);
        assert_eq!(t.columns[0].numbers(), vec![Some(1.0), None, None, Some(3.0)]);
    }

    #[test]
    fn thousands_separators() {
        assert_eq!(parse_number("1,234,567.5"), Some(1234567.5));
        assert_eq!(parse_number("12,34"), None);
        assert_eq!(parse_number("inf"), None);
    }

    #[test]
    fn merge_two_tables() {
        let a = DataTable::from_csv("A", b"k,x\nr1,1\nr2,2\nr3,5\n").unwrap();
        let b = DataTable::from_csv("B", b"k,y\nr1,10\nr2,20\nr3,50\n").unwrap();
        let m = merge_tables(&[a, b]).unwrap();
        assert_eq!(m.n_rows(), 3);
        assert_eq!(m.columns.len(), 2);
    }

    #[test]
    fn merge_aligns_by_label() {
        let a = DataTable::from_csv("A", b"k,x\nr1,1\nr2,2\nr3,5\n").unwrap();
        let b = DataTable::from_csv("B", b"k,y\nr3,50\nr1,10\nr2,20\n").unwrap();
        let m = merge_tables(&[a, b]).unwrap();
        assert_eq!(m.columns[1].numbers(), vec![Some(10.0), Some(20.0), Some(50.0)]);
    }

    #[test]
    fn merge_disambiguates_headers() {
        let a = DataTable::from_csv("A", b"k,price\nr1,1\nr2,2\n").unwrap();
        let b = DataTable::from_csv("B", b"k,price\nr1,3\nr2,4\n").unwrap();
        let m = merge_tables(&[a, b]).unwrap();
        let headers: Vec<_> = m.columns.iter().map(|c| c.header.as_str()).collect();
        assert_eq!(headers, vec!["price (A)", "price (B)"]);
    }

    #[test]
    fn merge_mismatch_lists_labels() {
        let a = DataTable::from_csv("A", b"k,x\nr1,1\nr2,2\n").unwrap();
        let b = DataTable::from_csv("B", b"k,y\nr1,1\nr9,2\n").unwrap();
        match merge_tables(&[a, b]).unwrap_err() {
            TableError::MergeMismatch { table, missing, extra } => {
                assert_eq!(table, "B");
                assert_eq!(missing, vec!["r2"]);
                assert_eq!(extra, vec!["r9"]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn decompose_by_column() {
        let t = table("k,a,b,c,d\nr,1,2,3,4\ns,5,6,7,8\n");
        let parts = decompose_table(&t, Decomposition::ByColumn);
        assert_eq!(parts.len(), 4);
        assert!(parts.iter().all(|p| p.columns.len() == 1));
    }

    #[test]
    fn decompose_by_row_group() {
        let mut csv = String::from("k,v\n");
        for i in 0..10 {
            csv.push_str(&format!("r{i},{}\n", i * i + 1));
        }
        let t = table(&csv);
        let parts = decompose_table(&t, Decomposition::ByRowGroup { group_size: 5 });
        assert_eq!(parts.len(), 2);
        assert!(parts.iter().all(|p| p.n_rows() == 5));
    }

    #[test]
    fn decompose_discards_non_numeric() {
        let t = table("k,v,h\na,1,0x3fa9c1\nb,2,0x99ab02\nc,4,0x1234ff\n");
        let parts = decompose_table(&t, Decomposition::ByColumn);
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].columns[0].header, "v");
    }

    #[test]
    fn impute_without_missing_is_identity() {
        let col = Column::numeric("v", vec![Some(1.5), Some(2.5), Some(-3.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(impute_missing(&col, &mut rng).unwrap(), col);
    }

    #[test]
    fn impute_draw_within_six_sigma() {
        let col = Column::numeric("v", vec![Some(2.0), Some(4.0), None]);
        let sigma = 2f64.sqrt();
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let filled = impute_missing(&col, &mut rng).unwrap().number(2).unwrap();
            assert!((filled - 3.0).abs() <= 6.0 * sigma, "{filled}");
        }
    }

    #[test]
    fn impute_degenerate_normal() {
        let col = Column::numeric("v", vec![Some(5.0), None, None, Some(5.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let filled = impute_missing(&col, &mut rng).unwrap();
        assert_eq!(filled.numbers(), vec![Some(5.0); 4]);
    }

    #[test]
    fn impute_needs_two_observations() {
        let col = Column::numeric("v", vec![Some(5.0), None]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(matches!(
            impute_missing(&col, &mut rng),
            Err(TableError::TooFewObserved { observed: 1, .. })
        ));
    }

    #[test]
    fn impute_is_seed_deterministic() {
        let col = Column::numeric("v", vec![Some(1.0), None, Some(7.0), None]);
        let a = impute_missing(&col, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = impute_missing(&col, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn numeric_table() -> impl Strategy<Value = DataTable> {
            (1usize..5, 2usize..8).prop_flat_map(|(cols, rows)| {
                prop::collection::vec(prop::collection::vec(-1e6f64..1e6, rows), cols).prop_map(
                    move |data| DataTable {
                        name: "p".into(),
                        label_header: "k".into(),
                        row_labels: (0..rows).map(|r| format!("row{r}")).collect(),
                        columns: data
                            .into_iter()
                            .enumerate()
                            .map(|(i, v)| {
                                Column::numeric(format!("c{i}"), v.into_iter().map(Some).collect())
                            })
                            .collect(),
                    },
                )
            })
        }

        proptest! {
            #[test]
            fn decompose_then_merge_reproduces_numeric_content(t in numeric_table()) {
                let parts = decompose_table(&t, Decomposition::ByColumn);
                let merged = merge_tables(&parts).unwrap();
                prop_assert_eq!(&merged.row_labels, &t.row_labels);
                prop_assert_eq!(merged.columns, t.columns);
            }

            #[test]
            fn merge_invariant_to_row_permutation(t in numeric_table(), seed in any::<u64>()) {
                use rand::seq::SliceRandom;
                let other = DataTable { name: "q".into(), ..t.clone() };
                let mut order: Vec<usize> = (0..t.n_rows()).collect();
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                let shuffled = other.select_rows(&order);
                let a = merge_tables(&[t.clone(), other]).unwrap();
                let b = merge_tables(&[t.clone(), shuffled]).unwrap();
                prop_assert_eq!(a, b);
            }
        }
    }
}
