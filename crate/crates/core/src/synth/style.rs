//! Style catalog and palette table.

use std::sync::OnceLock;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::render::fonts::FontFamily;

#[derive(Debug, Error, PartialEq)]
pub enum PaletteError {
    #[error("unknown palette {0}")]
    Unknown(usize),
    #[error("palette {id} has {size} colors, {requested} requested")]
    TooSmall { id: usize, size: usize, requested: usize },
    #[error("no palette has {0} colors")]
    NoneLargeEnough(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TitlePosition {
    Left,
    Center,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkerStyle {
    Circle,
    Square,
    Triangle,
    Diamond,
    Cross,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineStyle {
    Solid,
    Dashed,
    Dotted,
    Dashdot,
}

impl LineStyle {
    pub fn dasharray(self) -> Option<&'static str> {
        match self {
            LineStyle::Solid => None,
            LineStyle::Dashed => Some("6,3"),
            LineStyle::Dotted => Some("1.5,2.5"),
            LineStyle::Dashdot => Some("6,2.5,1.5,2.5"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridStyle {
    None,
    Horizontal,
    Vertical,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LegendPlacement {
    Right,
    Top,
    Bottom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PieLabeling {
    /// Categories listed in a legend.
    Legend,
    /// Category names written next to each wedge.
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleConfig {
    pub canvas_width: f64,
    pub canvas_height: f64,
    pub title_position: TitlePosition,
    pub font_family: FontFamily,
    pub font_size: f64,
    pub marker_style: MarkerStyle,
    pub line_width: f64,
    pub line_style: LineStyle,
    pub grid_style: GridStyle,
    pub grid_color: String,
    pub legend_placement: LegendPlacement,
    pub legend_border: bool,
    pub legend_columns: usize,
    pub legend_title: bool,
    pub bar_width_fraction: f64,
    pub pie_inner_radius_fraction: f64,
    pub pie_outer_radius: f64,
    pub pie_labeling: PieLabeling,
    pub pie_values: bool,
    pub error_bars: bool,
    pub axis_titles: bool,
    pub palette_id: usize,
}

pub const CANVAS_SIZES: [(f64, f64); 3] = [(640.0, 480.0), (800.0, 600.0), (960.0, 640.0)];
pub const TITLE_POSITIONS: [TitlePosition; 3] =
    [TitlePosition::Left, TitlePosition::Center, TitlePosition::Right];
pub const FONT_SIZES: [f64; 5] = [10.0, 11.0, 12.0, 13.0, 14.0];
pub const MARKER_STYLES: [MarkerStyle; 5] = [
    MarkerStyle::Circle,
    MarkerStyle::Square,
    MarkerStyle::Triangle,
    MarkerStyle::Diamond,
    MarkerStyle::Cross,
];
pub const LINE_WIDTHS: [f64; 5] = [1.0, 1.5, 2.0, 2.5, 3.0];
pub const LINE_STYLES: [LineStyle; 4] =
    [LineStyle::Solid, LineStyle::Dashed, LineStyle::Dotted, LineStyle::Dashdot];
pub const GRID_STYLES: [GridStyle; 4] =
    [GridStyle::None, GridStyle::Horizontal, GridStyle::Vertical, GridStyle::Both];
pub const GRID_COLORS: [&str; 4] = ["#dddddd", "#cccccc", "#b0b0b0", "#e8e8e8"];
pub const LEGEND_PLACEMENTS: [LegendPlacement; 3] =
    [LegendPlacement::Right, LegendPlacement::Top, LegendPlacement::Bottom];
pub const LEGEND_COLUMNS: [usize; 2] = [1, 2];
pub const BAR_WIDTH_FRACTIONS: [f64; 5] = [0.5, 0.6, 0.7, 0.8, 0.9];
pub const PIE_INNER_RADIUS_FRACTIONS: [f64; 4] = [0.3, 0.4, 0.5, 0.6];
pub const PIE_OUTER_RADII: [f64; 4] = [100.0, 120.0, 140.0, 160.0];
pub const PIE_LABELINGS: [PieLabeling; 2] = [PieLabeling::Legend, PieLabeling::Direct];

fn pick<T: Copy, R: Rng + ?Sized>(rng: &mut R, items: &[T]) -> T {
    *items.choose(rng).expect("non-empty catalog")
}

/// Draws every field uniformly from its catalog. The palette is drawn
/// among palettes holding at least `min_colors` entries.
pub fn sample_style<R: Rng + ?Sized>(rng: &mut R, min_colors: usize) -> Result<StyleConfig, PaletteError> {
    let (canvas_width, canvas_height) = pick(rng, &CANVAS_SIZES);
    let style = StyleConfig {
        canvas_width,
        canvas_height,
        title_position: pick(rng, &TITLE_POSITIONS),
        font_family: pick(rng, &FontFamily::ALL),
        font_size: pick(rng, &FONT_SIZES),
        marker_style: pick(rng, &MARKER_STYLES),
        line_width: pick(rng, &LINE_WIDTHS),
        line_style: pick(rng, &LINE_STYLES),
        grid_style: pick(rng, &GRID_STYLES),
        grid_color: pick(rng, &GRID_COLORS).to_string(),
        legend_placement: pick(rng, &LEGEND_PLACEMENTS),
        legend_border: rng.random_bool(0.5),
        legend_columns: pick(rng, &LEGEND_COLUMNS),
        legend_title: rng.random_bool(0.5),
        bar_width_fraction: pick(rng, &BAR_WIDTH_FRACTIONS),
        pie_inner_radius_fraction: pick(rng, &PIE_INNER_RADIUS_FRACTIONS),
        pie_outer_radius: pick(rng, &PIE_OUTER_RADII),
        pie_labeling: pick(rng, &PIE_LABELINGS),
        pie_values: rng.random_bool(0.5),
        error_bars: rng.random_bool(0.5),
        axis_titles: rng.random_bool(0.5),
        palette_id: {
            let eligible: Vec<usize> = palettes()
                .iter()
                .enumerate()
                .filter(|(_, p)| p.colors.len() >= min_colors)
                .map(|(i, _)| i)
                .collect();
            if eligible.is_empty() {
                return Err(PaletteError::NoneLargeEnough(min_colors));
            }
            pick(rng, &eligible)
        },
    };
    Ok(style)
}

#[derive(Debug, Deserialize)]
pub struct Palette {
    pub id: String,
    pub colors: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct PaletteFile {
    min_delta_e76: f64,
    palettes: Vec<Palette>,
}

fn palette_file() -> &'static PaletteFile {
    static FILE: OnceLock<PaletteFile> = OnceLock::new();
    FILE.get_or_init(|| {
        serde_json::from_str(include_str!("../../data/palettes.json")).expect("valid palettes.json")
    })
}

pub fn palettes() -> &'static [Palette] {
    &palette_file().palettes
}

/// Documented lower bound on CIE76 distance between colors of one palette.
pub fn palette_min_distance() -> f64 {
    palette_file().min_delta_e76
}

pub fn max_palette_size() -> usize {
    palettes().iter().map(|p| p.colors.len()).max().unwrap_or(0)
}

pub fn palette_colors(palette_id: usize, n: usize) -> Result<Vec<String>, PaletteError> {
    let p = palettes().get(palette_id).ok_or(PaletteError::Unknown(palette_id))?;
    if n > p.colors.len() {
        return Err(PaletteError::TooSmall {
            id: palette_id,
            size: p.colors.len(),
            requested: n,
        });
    }
    Ok(p.colors[..n].to_vec())
}
