//! Bundled font metric tables.
//!
//! Text extents are computed from per-glyph advance widths (Adobe core-font
//! AFM data, 1000 units per em) so layout is identical on every platform.
//! Characters outside printable ASCII use the font's mean lowercase advance.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::geometry::Rect;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FontFamily {
    Helvetica,
    HelveticaNarrow,
    Times,
    Palatino,
    CenturySchoolbook,
    Courier,
}

impl FontFamily {
    pub const ALL: [FontFamily; 6] = [
        FontFamily::Helvetica,
        FontFamily::HelveticaNarrow,
        FontFamily::Times,
        FontFamily::Palatino,
        FontFamily::CenturySchoolbook,
        FontFamily::Courier,
    ];

    pub fn id(self) -> &'static str {
        match self {
            FontFamily::Helvetica => "helvetica",
            FontFamily::HelveticaNarrow => "helvetica_narrow",
            FontFamily::Times => "times",
            FontFamily::Palatino => "palatino",
            FontFamily::CenturySchoolbook => "century_schoolbook",
            FontFamily::Courier => "courier",
        }
    }

    pub fn metrics(self) -> &'static FontMetrics {
        let table = font_table();
        table
            .fonts
            .iter()
            .find(|f| f.id == self.id())
            .expect("bundled font table covers every family")
    }
}

#[derive(Debug, Deserialize)]
struct FontTable {
    units_per_em: f64,
    first_char: u32,
    fonts: Vec<FontMetrics>,
}

#[derive(Debug, Deserialize)]
pub struct FontMetrics {
    pub id: String,
    pub svg_family: String,
    pub ascender: f64,
    pub descender: f64,
    pub fallback_width: f64,
    ascii_widths: Vec<f64>,
}

fn font_table() -> &'static FontTable {
    static TABLE: OnceLock<FontTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        serde_json::from_str(include_str!("../../data/fonts.json")).expect("valid fonts.json")
    })
}

impl FontMetrics {
    fn units(&self) -> f64 {
        font_table().units_per_em
    }

    pub fn char_width(&self, c: char, size: f64) -> f64 {
        let first = font_table().first_char;
        let code = c as u32;
        let w = if code >= first && ((code - first) as usize) < self.ascii_widths.len() {
            self.ascii_widths[(code - first) as usize]
        } else {
            self.fallback_width
        };
        w * size / self.units()
    }

    pub fn text_width(&self, text: &str, size: f64) -> f64 {
        text.chars().map(|c| self.char_width(c, size)).sum()
    }

    pub fn ascent(&self, size: f64) -> f64 {
        self.ascender * size / self.units()
    }

    /// Positive distance below the baseline.
    pub fn descent(&self, size: f64) -> f64 {
        -self.descender * size / self.units()
    }

    pub fn line_height(&self, size: f64) -> f64 {
        self.ascent(size) + self.descent(size)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextAnchor {
    Start,
    Middle,
    End,
}

impl TextAnchor {
    pub fn svg(self) -> &'static str {
        match self {
            TextAnchor::Start => "start",
            TextAnchor::Middle => "middle",
            TextAnchor::End => "end",
        }
    }
}

/// A single run of text placed at an anchor point on its baseline,
/// optionally rotated about that anchor (degrees, clockwise positive as in
/// SVG; only 0 and −90 are produced by the layout engine).
#[derive(Debug, Clone, PartialEq)]
pub struct TextRun {
    pub text: String,
    pub x: f64,
    pub y: f64,
    pub anchor: TextAnchor,
    pub rotate: f64,
    pub size: f64,
    pub font: FontFamily,
}

impl TextRun {
    /// Axis-aligned bounds of the (possibly rotated) glyph box.
    pub fn bounds(&self) -> Rect {
        text_bounds(
            &self.text,
            self.font,
            self.size,
            self.x,
            self.y,
            self.anchor,
            self.rotate,
        )
    }
}

pub fn text_bounds(
    text: &str,
    font: FontFamily,
    size: f64,
    x: f64,
    y: f64,
    anchor: TextAnchor,
    rotate: f64,
) -> Rect {
    let m = font.metrics();
    let w = m.text_width(text, size);
    let x0 = match anchor {
        TextAnchor::Start => 0.0,
        TextAnchor::Middle => -w / 2.0,
        TextAnchor::End => -w,
    };
    let local = [
        (x0, -m.ascent(size)),
        (x0 + w, -m.ascent(size)),
        (x0 + w, m.descent(size)),
        (x0, m.descent(size)),
    ];
    let (s, c) = rotate.to_radians().sin_cos();
    // Exact quarter turns keep the bounds free of rounding noise.
    let (s, c) = if rotate.rem_euclid(90.0) == 0.0 {
        (s.round(), c.round())
    } else {
        (s, c)
    };
    Rect::bounding(local.iter().map(|&(lx, ly)| (x + lx * c - ly * s, y + lx * s + ly * c)))
        .expect("four corners")
}
