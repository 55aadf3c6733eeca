//! Chart specifications drawn from data tables.

pub mod style;

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{ColumnKind, DataTable};
pub use style::{palette_colors, sample_style, PaletteError, PieLabeling, StyleConfig};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("cannot build {chart_type} from table {table:?}: {reason}")]
    UnsupportedCombination {
        chart_type: ChartType,
        table: String,
        reason: String,
    },
    #[error("no admissible selection of {k} columns")]
    Selection { k: usize },
    #[error(transparent)]
    Palette(#[from] PaletteError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartType {
    GroupedBarH,
    GroupedBarV,
    StackedBarH,
    StackedBarV,
    Pie,
    Donut,
    BoxH,
    BoxV,
    Line,
    Scatter,
}

impl ChartType {
    pub const ALL: [ChartType; 10] = [
        ChartType::GroupedBarH,
        ChartType::GroupedBarV,
        ChartType::StackedBarH,
        ChartType::StackedBarV,
        ChartType::Pie,
        ChartType::Donut,
        ChartType::BoxH,
        ChartType::BoxV,
        ChartType::Line,
        ChartType::Scatter,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ChartType::GroupedBarH => "grouped_bar_h",
            ChartType::GroupedBarV => "grouped_bar_v",
            ChartType::StackedBarH => "stacked_bar_h",
            ChartType::StackedBarV => "stacked_bar_v",
            ChartType::Pie => "pie",
            ChartType::Donut => "donut",
            ChartType::BoxH => "box_h",
            ChartType::BoxV => "box_v",
            ChartType::Line => "line",
            ChartType::Scatter => "scatter",
        }
    }

    /// The answer string for chart-type questions.
    pub fn display_name(self) -> &'static str {
        match self {
            ChartType::GroupedBarH => "horizontal grouped bar",
            ChartType::GroupedBarV => "vertical grouped bar",
            ChartType::StackedBarH => "horizontal stacked bar",
            ChartType::StackedBarV => "vertical stacked bar",
            ChartType::Pie => "pie",
            ChartType::Donut => "donut",
            ChartType::BoxH => "horizontal box",
            ChartType::BoxV => "vertical box",
            ChartType::Line => "line",
            ChartType::Scatter => "scatter",
        }
    }

    pub fn from_id(id: &str) -> Option<ChartType> {
        ChartType::ALL.into_iter().find(|t| t.id() == id)
    }

    pub fn index(self) -> usize {
        ChartType::ALL.iter().position(|&t| t == self).expect("listed")
    }

    pub fn is_horizontal(self) -> bool {
        matches!(self, ChartType::GroupedBarH | ChartType::StackedBarH | ChartType::BoxH)
    }

    pub fn is_pie(self) -> bool {
        matches!(self, ChartType::Pie | ChartType::Donut)
    }

    pub fn is_stacked(self) -> bool {
        matches!(self, ChartType::StackedBarH | ChartType::StackedBarV)
    }

    pub fn is_grouped(self) -> bool {
        matches!(self, ChartType::GroupedBarH | ChartType::GroupedBarV)
    }

    pub fn is_box(self) -> bool {
        matches!(self, ChartType::BoxH | ChartType::BoxV)
    }

    /// Bar and box charts, whose glyph extents reveal the orientation.
    pub fn has_oriented_glyphs(self) -> bool {
        self.is_grouped() || self.is_stacked() || self.is_box()
    }
}

impl std::fmt::Display for ChartType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub errors: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub minimum: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub maximum: f64,
    pub std: f64,
}

/// Quantile by linear interpolation at position `p·(n−1)` of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl BoxStats {
    pub fn from_values(values: &[f64]) -> Option<BoxStats> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let (_, std) = crate::table::mean_and_sample_std(&v);
        Some(BoxStats {
            minimum: v[0],
            q1: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q3: quantile_sorted(&v, 0.75),
            maximum: v[v.len() - 1],
            std,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisTitles {
    pub x: String,
    pub y: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub chart_type: ChartType,
    pub title: String,
    pub axis_titles: Option<AxisTitles>,
    /// Row-label header in lower case, used to phrase questions.
    pub category_noun: String,
    pub category_labels: Vec<String>,
    pub series: Vec<Series>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box_stats: Option<Vec<BoxStats>>,
    pub legend_title: Option<String>,
    pub style: StyleConfig,
    pub seed: u64,
    pub source_table: String,
}

impl ChartSpec {
    pub fn has_legend(&self) -> bool {
        match self.chart_type {
            ChartType::Pie | ChartType::Donut => self.style.pie_labeling == PieLabeling::Legend,
            ChartType::StackedBarH | ChartType::StackedBarV => true,
            ChartType::GroupedBarH | ChartType::GroupedBarV | ChartType::Line => self.series.len() >= 2,
            ChartType::BoxH | ChartType::BoxV | ChartType::Scatter => false,
        }
    }

    /// Strings shown as legend entries, in entry order.
    pub fn legend_entries(&self) -> Vec<String> {
        if !self.has_legend() {
            Vec::new()
        } else if self.chart_type.is_pie() {
            self.category_labels.clone()
        } else {
            self.series.iter().map(|s| s.label.clone()).collect()
        }
    }

    pub fn n_categories(&self) -> usize {
        match self.chart_type {
            ChartType::Scatter => self.x_values.as_ref().map_or(0, |v| v.len()),
            _ => self.category_labels.len(),
        }
    }

    /// Every structural invariant a renderable spec must satisfy.
    pub fn check(&self) -> Result<(), String> {
        let n = self.category_labels.len();
        match self.chart_type {
            ChartType::Scatter => {
                let xs = self.x_values.as_ref().ok_or("scatter without x values")?;
                if self.series.len() != 1 || self.series[0].values.len() != xs.len() {
                    return Err("scatter needs one y series matching x".into());
                }
            }
            ChartType::BoxH | ChartType::BoxV => {
                let stats = self.box_stats.as_ref().ok_or("box chart without stats")?;
                if stats.len() != n || n == 0 {
                    return Err("box stats do not match categories".into());
                }
                for b in stats {
                    if !(b.minimum <= b.q1 && b.q1 <= b.median && b.median <= b.q3 && b.q3 <= b.maximum) {
                        return Err("box stats out of order".into());
                    }
                }
            }
            _ => {
                if self.series.is_empty() || n == 0 {
                    return Err("no data".into());
                }
                for s in &self.series {
                    if s.values.len() != n {
                        return Err(format!("series {:?} length mismatch", s.label));
                    }
                    if let Some(e) = &s.errors {
                        if e.len() != n {
                            return Err("error length mismatch".into());
                        }
                    }
                }
            }
        }
        let all_values = self
            .series
            .iter()
            .flat_map(|s| s.values.iter())
            .chain(self.x_values.iter().flatten());
        for v in all_values {
            if !v.is_finite() {
                return Err("non-finite value".into());
            }
        }
        if self.chart_type.is_pie() {
            if self.series.len() != 1 {
                return Err("pie needs exactly one series".into());
            }
            if self.series[0].values.iter().any(|&v| v <= 0.0) {
                return Err("pie values must be positive".into());
            }
        }
        if self.chart_type.is_stacked() && self.series.iter().any(|s| s.values.iter().any(|&v| v <= 0.0)) {
            return Err("stacked values must be positive".into());
        }
        let mut seen = HashSet::new();
        let mut strings: Vec<&str> = vec![self.title.as_str()];
        strings.extend(self.category_labels.iter().map(String::as_str));
        if self.has_legend() && !self.chart_type.is_pie() {
            strings.extend(self.series.iter().map(|s| s.label.as_str()));
        }
        if let Some(t) = &self.axis_titles {
            strings.push(&t.x);
            strings.push(&t.y);
        }
        if let Some(t) = &self.legend_title {
            strings.push(t);
        }
        for s in strings {
            if s.trim().is_empty() {
                return Err("empty label".into());
            }
            if !seen.insert(s) {
                return Err(format!("label {s:?} is not unique"));
            }
        }
        Ok(())
    }
}

/// "population_millions" → "Population millions".
pub fn display_name(table_name: &str) -> String {
    let spaced = table_name.replace('_', " ");
    let mut chars = spaced.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

pub const MAX_LABEL_CHARS: usize = 24;
pub const CATEGORY_ROWS: (usize, usize) = (3, 12);
pub const LINE_POINTS: (usize, usize) = (10, 20);
pub const SCATTER_POINTS: (usize, usize) = (10, 60);
pub const MAX_MAGNITUDE_RATIO: f64 = 100.0;
/// Smallest wedge share, keeping every wedge and its label legible.
pub const MIN_PIE_SHARE: f64 = 0.01;
const ATTEMPTS: usize = 8;

/// Inclusive bounds on the number of co-plotted columns per chart type.
pub fn series_bounds(chart_type: ChartType) -> (usize, usize) {
    match chart_type {
        ChartType::GroupedBarH | ChartType::GroupedBarV | ChartType::Line => (1, 6),
        ChartType::StackedBarH | ChartType::StackedBarV => (2, 6),
        ChartType::Pie | ChartType::Donut => (1, 1),
        ChartType::BoxH | ChartType::BoxV => (2, 8),
        ChartType::Scatter => (2, 2),
    }
}

fn abs_median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().map(|x| x.abs()).filter(|x| *x > 0.0).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(quantile_sorted(&v, 0.5))
}

/// Picks `k` numeric columns (returned as column indices in table order)
/// whose medians of absolute nonzero values lie within a factor of 100.
pub fn select_columns<R: Rng + ?Sized>(table: &DataTable, k: usize, rng: &mut R) -> Result<Vec<usize>, SynthError> {
    let numeric: Vec<usize> = table
        .columns
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind == ColumnKind::Numeric && !c.observed().is_empty())
        .map(|(i, _)| i)
        .collect();
    if k == 0 || numeric.len() < k {
        return Err(SynthError::Selection { k });
    }
    if k == 1 {
        return Ok(vec![*numeric.choose(rng).expect("non-empty")]);
    }
    let medians: Vec<(usize, f64)> = numeric
        .iter()
        .filter_map(|&i| abs_median(&table.columns[i].observed()).map(|m| (i, m)))
        .collect();
    let window = |m: f64| -> Vec<usize> {
        medians
            .iter()
            .filter(|(_, o)| *o >= m && *o <= m * MAX_MAGNITUDE_RATIO)
            .map(|(i, _)| *i)
            .collect()
    };
    let anchors: Vec<(usize, f64)> = medians.iter().copied().filter(|&(_, m)| window(m).len() >= k).collect();
    let &(anchor, m) = anchors.choose(rng).ok_or(SynthError::Selection { k })?;
    let mut rest: Vec<usize> = window(m).into_iter().filter(|&i| i != anchor).collect();
    rest.shuffle(rng);
    let mut chosen: Vec<usize> = rest.into_iter().take(k - 1).collect();
    chosen.push(anchor);
    chosen.sort_unstable();
    Ok(chosen)
}

fn unsupported(chart_type: ChartType, table: &DataTable, reason: impl Into<String>) -> SynthError {
    SynthError::UnsupportedCombination {
        chart_type,
        table: table.name.clone(),
        reason: reason.into(),
    }
}

/// Rows whose label is short enough and whose values in `cols` are all
/// present and satisfy `accept`.
fn eligible_rows(table: &DataTable, cols: &[usize], accept: impl Fn(f64) -> bool) -> Vec<usize> {
    (0..table.n_rows())
        .filter(|&r| {
            let label = &table.row_labels[r];
            !label.trim().is_empty()
                && label.chars().count() <= MAX_LABEL_CHARS
                && cols.iter().all(|&c| table.columns[c].number(r).is_some_and(|v| v.is_finite() && accept(v)))
        })
        .collect()
}

fn sample_subset<R: Rng + ?Sized>(rng: &mut R, pool: &[usize], n: usize) -> Vec<usize> {
    let mut picked: Vec<usize> = pool.choose_multiple(rng, n).copied().collect();
    picked.sort_unstable();
    picked
}

/// Contiguous window of `eligible` rows with length in `bounds`.
fn sample_window<R: Rng + ?Sized>(rng: &mut R, eligible: &[usize], bounds: (usize, usize)) -> Option<Vec<usize>> {
    let mut runs: Vec<Vec<usize>> = Vec::new();
    for &r in eligible {
        match runs.last_mut() {
            Some(run) if *run.last().expect("non-empty run") + 1 == r => run.push(r),
            _ => runs.push(vec![r]),
        }
    }
    let longest = runs.iter().map(Vec::len).max().unwrap_or(0);
    if longest < bounds.0 {
        return None;
    }
    let n = rng.random_range(bounds.0..=longest.min(bounds.1));
    let starts: Vec<(usize, usize)> = runs
        .iter()
        .enumerate()
        .flat_map(|(ri, run)| (0..=run.len().saturating_sub(n)).filter(move |_| run.len() >= n).map(move |s| (ri, s)))
        .collect();
    let &(ri, s) = starts.choose(rng)?;
    Some(runs[ri][s..s + n].to_vec())
}

fn column_values(table: &DataTable, col: usize, rows: &[usize]) -> Vec<f64> {
    rows.iter()
        .map(|&r| table.columns[col].number(r).expect("eligible row"))
        .collect()
}

fn pick_series_count<R: Rng + ?Sized>(
    rng: &mut R,
    table: &DataTable,
    chart_type: ChartType,
) -> Result<Vec<usize>, SynthError> {
    let (lo, hi) = series_bounds(chart_type);
    let available = table.numeric_columns().count();
    if available < lo {
        return Err(unsupported(chart_type, table, format!("needs {lo} numeric columns, has {available}")));
    }
    let mut k = rng.random_range(lo..=hi.min(available));
    loop {
        match select_columns(table, k, rng) {
            Ok(cols) => return Ok(cols),
            Err(_) if k > lo => k -= 1,
            Err(e) => return Err(e),
        }
    }
}

/// Builds a randomized, renderable chart spec; identical inputs give
/// identical specs.
pub fn make_chart_spec(table: &DataTable, chart_type: ChartType, seed: u64) -> Result<ChartSpec, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = String::from("no attempt");
    for _ in 0..ATTEMPTS {
        let spec = match draw_spec(table, chart_type, seed, &mut rng)? {
            Ok(spec) => spec,
            Err(reason) => {
                last = reason;
                continue;
            }
        };
        if let Err(reason) = spec.check() {
            last = reason;
            continue;
        }
        match crate::render::check_renderable(&spec) {
            Ok(()) => return Ok(spec),
            Err(e) => last = e.to_string(),
        }
    }
    Err(unsupported(chart_type, table, last))
}

/// One randomized draw. The outer error is fatal for this table; the inner
/// one asks for another attempt.
fn draw_spec(
    table: &DataTable,
    chart_type: ChartType,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<Result<ChartSpec, String>, SynthError> {
    let cols = pick_series_count(rng, table, chart_type)?;
    let title = display_name(&table.name);
    let noun = table.label_header.to_lowercase();
    let mut category_labels = Vec::new();
    let mut series = Vec::new();
    let mut x_values = None;
    let mut box_stats = None;
    let mut min_colors = cols.len();
    let mut axis = None;
    let value_title = |series: &[Series]| {
        if series.len() == 1 {
            series[0].label.clone()
        } else {
            "Value".to_string()
        }
    };

    match chart_type {
        ChartType::Scatter => {
            let eligible = eligible_rows(table, &cols, |_| true);
            if eligible.len() < SCATTER_POINTS.0 {
                return Err(unsupported(chart_type, table, "too few complete rows"));
            }
            let n = rng.random_range(SCATTER_POINTS.0..=eligible.len().min(SCATTER_POINTS.1));
            let rows = sample_subset(rng, &eligible, n);
            let (cx, cy) = if rng.random_bool(0.5) { (cols[0], cols[1]) } else { (cols[1], cols[0]) };
            x_values = Some(column_values(table, cx, &rows));
            series.push(Series {
                label: table.columns[cy].header.clone(),
                values: column_values(table, cy, &rows),
                errors: None,
            });
            axis = Some(AxisTitles {
                x: table.columns[cx].header.clone(),
                y: table.columns[cy].header.clone(),
            });
            min_colors = 1;
        }
        ChartType::BoxH | ChartType::BoxV => {
            let rows = eligible_rows(table, &cols, |_| true);
            if rows.len() < 5 {
                return Err(unsupported(chart_type, table, "box plots need five complete rows"));
            }
            let mut stats = Vec::new();
            for &c in &cols {
                let header = &table.columns[c].header;
                if header.chars().count() > MAX_LABEL_CHARS {
                    return Ok(Err(format!("header {header:?} too long")));
                }
                category_labels.push(header.clone());
                stats.push(BoxStats::from_values(&column_values(table, c, &rows)).expect("finite values"));
            }
            box_stats = Some(stats);
            let (cat, val) = ("Variable".to_string(), "Value".to_string());
            axis = Some(if chart_type.is_horizontal() {
                AxisTitles { x: val, y: cat }
            } else {
                AxisTitles { x: cat, y: val }
            });
            min_colors = 1;
        }
        _ => {
            let accept: fn(f64) -> bool = if chart_type.is_pie() || chart_type.is_stacked() {
                |v| v > 0.0
            } else {
                |_| true
            };
            let eligible = eligible_rows(table, &cols, accept);
            let rows = if chart_type == ChartType::Line {
                match sample_window(rng, &eligible, LINE_POINTS) {
                    Some(rows) => rows,
                    None => return Err(unsupported(chart_type, table, "no contiguous run of rows long enough")),
                }
            } else {
                if eligible.len() < CATEGORY_ROWS.0 {
                    return Err(unsupported(chart_type, table, "too few eligible rows"));
                }
                let n = rng.random_range(CATEGORY_ROWS.0..=eligible.len().min(CATEGORY_ROWS.1));
                sample_subset(rng, &eligible, n)
            };
            category_labels = rows.iter().map(|&r| table.row_labels[r].clone()).collect();
            for &c in &cols {
                series.push(Series {
                    label: table.columns[c].header.clone(),
                    values: column_values(table, c, &rows),
                    errors: None,
                });
            }
            if chart_type.is_pie() {
                let total: f64 = series[0].values.iter().sum();
                if series[0].values.iter().any(|v| v / total < MIN_PIE_SHARE) {
                    return Ok(Err("wedge below minimum share".into()));
                }
                min_colors = category_labels.len();
            } else {
                let (cat, val) = (table.label_header.clone(), value_title(&series));
                axis = Some(if chart_type.is_horizontal() {
                    AxisTitles { x: val, y: cat }
                } else {
                    AxisTitles { x: cat, y: val }
                });
            }
        }
    }

    let mut style = sample_style(rng, min_colors)?;
    if chart_type != ChartType::Donut {
        style.pie_inner_radius_fraction = 0.0;
    }
    if chart_type.is_grouped() && style.error_bars {
        for s in &mut series {
            s.errors = Some(s.values.iter().map(|v| v.abs() * rng.random_range(0.05..0.15)).collect());
        }
    } else {
        style.error_bars = false;
    }
    if !style.axis_titles {
        axis = None;
    }

    let mut spec = ChartSpec {
        chart_type,
        title,
        axis_titles: axis,
        category_noun: if chart_type.is_box() {
            "box".into()
        } else if chart_type == ChartType::Scatter {
            "point".into()
        } else {
            noun
        },
        category_labels,
        series,
        x_values,
        box_stats,
        legend_title: None,
        style,
        seed,
        source_table: table.name.clone(),
    };
    if spec.chart_type.is_pie() && spec.has_legend() && spec.style.legend_title {
        spec.legend_title = Some(spec.series[0].label.clone());
    }
    Ok(Ok(spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{load_table, Column};

    fn fixture(name: &str) -> DataTable {
        let path = format!("{}/../../fixtures/tables/{name}", env!("CARGO_MANIFEST_DIR"));
        let bytes = std::fs::read(&path).unwrap();
        let stem = std::path::Path::new(name).file_stem().unwrap().to_str().unwrap();
        DataTable::from_csv(stem, &bytes).unwrap()
    }

    fn table_with(columns: Vec<(&str, Vec<f64>)>) -> DataTable {
        let n = columns[0].1.len();
        DataTable {
            name: "t".into(),
            label_header: "Row".into(),
            row_labels: (0..n).map(|i| format!("r{i}")).collect(),
            columns: columns
                .into_iter()
                .map(|(h, v)| Column::numeric(h, v.into_iter().map(Some).collect()))
                .collect(),
        }
    }

    #[test]
    fn box_stats_of_one_to_five() {
        let b = BoxStats::from_values(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((b.minimum, b.q1, b.median, b.q3, b.maximum), (1.0, 2.0, 3.0, 4.0, 5.0));
        assert!((b.std - 2.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn box_stats_match_brute_force() {
        // Oracle: quartile as the weighted mean of the two order statistics
        // bracketing p·(n−1), found by counting rather than sorting.
        fn order_stat(v: &[f64], k: usize) -> f64 {
            *v.iter()
                .find(|&&x| {
                    let below = v.iter().filter(|&&y| y < x).count();
                    let equal = v.iter().filter(|&&y| y == x).count();
                    below <= k && k < below + equal
                })
                .unwrap()
        }
        let data = [7.5, -2.0, 3.25, 3.25, 11.0, 0.5, 9.0, 4.0];
        let b = BoxStats::from_values(&data).unwrap();
        for (p, got) in [(0.25, b.q1), (0.5, b.median), (0.75, b.q3)] {
            let pos: f64 = p * 7.0;
            let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
            let w = pos - lo as f64;
            let want = order_stat(&data, lo) * (1.0 - w) + order_stat(&data, hi) * w;
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(b.minimum, -2.0);
        assert_eq!(b.maximum, 11.0);
    }

    #[test]
    fn wide_magnitude_gap_never_coselected() {
        let t = table_with(vec![("small", vec![8.0, 10.0, 12.0]), ("big", vec![9000.0, 10000.0, 11000.0])]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert!(matches!(select_columns(&t, 2, &mut rng), Err(SynthError::Selection { k: 2 })));
        }
        let close = table_with(vec![("a", vec![2.0, 3.0, 4.0]), ("b", vec![20.0, 30.0, 40.0])]);
        assert_eq!(select_columns(&close, 2, &mut rng).unwrap(), vec![0, 1]);
    }

    #[test]
    fn selections_respect_ratio_brute_force() {
        let meds = [1.0, 3.0, 30.0, 99.0, 150.0, 10_000.0];
        let t = table_with(meds.iter().enumerate().map(|(i, &m)| (["a", "b", "c", "d", "e", "f"][i], vec![m, m, m])).collect());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut seen = HashSet::new();
        for _ in 0..2000 {
            let k = rng.random_range(1..=4);
            if let Ok(sel) = select_columns(&t, k, &mut rng) {
                let ms: Vec<f64> = sel.iter().map(|&i| meds[i]).collect();
                let ratio = ms.iter().cloned().fold(f64::MIN, f64::max) / ms.iter().cloned().fold(f64::MAX, f64::min);
                assert!(ratio <= 100.0);
                assert!(sel.windows(2).all(|w| w[0] < w[1]));
                seen.insert(sel);
            }
        }
        // Every admissible pair shows up.
        for i in 0..meds.len() {
            for j in i + 1..meds.len() {
                let admissible = meds[j] / meds[i] <= 100.0;
                assert_eq!(seen.contains(&vec![i, j]), admissible, "{i},{j}");
            }
        }
    }

    #[test]
    fn single_column_any_numeric() {
        let t = table_with(vec![("z", vec![0.0, 0.0, 0.0])]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_columns(&t, 1, &mut rng).unwrap(), vec![0]);
    }

    #[test]
    fn pie_from_one_column() {
        let t = load_table(b"Country,1983\nA,5\nB,7\nC,3\nD,9\n").unwrap();
        let spec = make_chart_spec(&t, ChartType::Pie, 4).unwrap();
        assert_eq!(spec.series.len(), 1);
        assert!(spec.category_labels.len() >= 3 && spec.category_labels.len() <= 4);
        assert!(spec.series[0].values.iter().all(|&v| v > 0.0));
        assert_eq!(spec.style.pie_inner_radius_fraction, 0.0);
    }

    #[test]
    fn pie_four_rows_gives_four_wedges_eventually() {
        let t = load_table(b"Country,1983\nA,5\nB,7\nC,3\nD,9\n").unwrap();
        let found = (0..64).any(|s| make_chart_spec(&t, ChartType::Pie, s).unwrap().category_labels == ["A", "B", "C", "D"]);
        assert!(found);
    }

    #[test]
    fn box_from_column() {
        let t = load_table(b"k,a,b\nr1,1,2\nr2,2,3\nr3,3,4\nr4,4,5\nr5,5,7\n").unwrap();
        let spec = make_chart_spec(&t, ChartType::BoxV, 1).unwrap();
        let stats = spec.box_stats.unwrap();
        assert_eq!(stats[0].median, 3.0);
        assert_eq!(stats[0].minimum, 1.0);
        assert_eq!(stats[0].maximum, 5.0);
    }

    #[test]
    fn scatter_pairs_rows() {
        let t = fixture("novel/tumor_measurements.csv");
        let spec = make_chart_spec(&t, ChartType::Scatter, 9).unwrap();
        let xs = spec.x_values.as_ref().unwrap();
        assert_eq!(xs.len(), spec.series[0].values.len());
        assert!(xs.len() >= 10);
    }

    #[test]
    fn pie_rejects_nonpositive_rows() {
        let t = fixture("standard/gdp_growth_rate.csv");
        for seed in 0..20 {
            if let Ok(spec) = make_chart_spec(&t, ChartType::Pie, seed) {
                assert!(spec.series[0].values.iter().all(|&v| v > 0.0));
            }
        }
    }

    #[test]
    fn reproducible_for_fixed_seed() {
        let t = fixture("standard/population_millions.csv");
        for ct in ChartType::ALL {
            let a = make_chart_spec(&t, ct, 77);
            let b = make_chart_spec(&t, ct, 77);
            assert_eq!(a, b);
            if let Ok(a) = a {
                assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b.unwrap()).unwrap());
            }
        }
    }

    #[test]
    fn line_window_is_contiguous_and_bounded() {
        let t = fixture("standard/gdp_growth_rate.csv");
        for seed in 0..10 {
            let spec = make_chart_spec(&t, ChartType::Line, seed).unwrap();
            let n = spec.category_labels.len();
            assert!((LINE_POINTS.0..=LINE_POINTS.1).contains(&n));
            let first = t.row_labels.iter().position(|l| *l == spec.category_labels[0]).unwrap();
            assert_eq!(&t.row_labels[first..first + n], &spec.category_labels[..]);
        }
    }

    #[test]
    fn arity_unmet_is_unsupported() {
        let t = load_table(b"k,a\nr1,1\nr2,2\n").unwrap();
        assert!(matches!(
            make_chart_spec(&t, ChartType::Scatter, 0),
            Err(SynthError::UnsupportedCombination { .. })
        ));
        assert!(matches!(
            make_chart_spec(&t, ChartType::StackedBarV, 0),
            Err(SynthError::UnsupportedCombination { .. })
        ));
    }

    #[test]
    fn display_names() {
        assert_eq!(display_name("population_millions"), "Population millions");
        assert_eq!(ChartType::ALL.len(), 10);
        for t in ChartType::ALL {
            assert_eq!(ChartType::from_id(t.id()), Some(t));
        }
    }
}
