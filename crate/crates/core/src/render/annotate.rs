//! Element classes and the per-chart annotation record.

use serde::{Deserialize, Serialize};

use super::geometry::{Point, Rect};
use super::layout::LayoutTree;
use crate::synth::{ChartSpec, ChartType};

pub const ANNOTATION_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementClass {
    ChartTitle,
    XAxisTitle,
    YAxisTitle,
    XAxisLabel,
    YAxisLabel,
    LegendBox,
    LegendTitle,
    LegendLabel,
    LegendPreview,
    PieLabel,
    PieValue,
    BarV,
    BarH,
    StackedSegmentV,
    StackedSegmentH,
    Wedge,
    BoxGlyphV,
    BoxGlyphH,
    LineSegment,
    ScatterMarker,
}

impl ElementClass {
    pub const ALL: [ElementClass; 20] = [
        ElementClass::ChartTitle,
        ElementClass::XAxisTitle,
        ElementClass::YAxisTitle,
        ElementClass::XAxisLabel,
        ElementClass::YAxisLabel,
        ElementClass::LegendBox,
        ElementClass::LegendTitle,
        ElementClass::LegendLabel,
        ElementClass::LegendPreview,
        ElementClass::PieLabel,
        ElementClass::PieValue,
        ElementClass::BarV,
        ElementClass::BarH,
        ElementClass::StackedSegmentV,
        ElementClass::StackedSegmentH,
        ElementClass::Wedge,
        ElementClass::BoxGlyphV,
        ElementClass::BoxGlyphH,
        ElementClass::LineSegment,
        ElementClass::ScatterMarker,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ElementClass::ChartTitle => "chart_title",
            ElementClass::XAxisTitle => "x_axis_title",
            ElementClass::YAxisTitle => "y_axis_title",
            ElementClass::XAxisLabel => "x_axis_label",
            ElementClass::YAxisLabel => "y_axis_label",
            ElementClass::LegendBox => "legend_box",
            ElementClass::LegendTitle => "legend_title",
            ElementClass::LegendLabel => "legend_label",
            ElementClass::LegendPreview => "legend_preview",
            ElementClass::PieLabel => "pie_label",
            ElementClass::PieValue => "pie_value",
            ElementClass::BarV => "bar_v",
            ElementClass::BarH => "bar_h",
            ElementClass::StackedSegmentV => "stacked_segment_v",
            ElementClass::StackedSegmentH => "stacked_segment_h",
            ElementClass::Wedge => "wedge",
            ElementClass::BoxGlyphV => "box_glyph_v",
            ElementClass::BoxGlyphH => "box_glyph_h",
            ElementClass::LineSegment => "line_segment",
            ElementClass::ScatterMarker => "scatter_marker",
        }
    }

    pub fn from_id(id: &str) -> Option<ElementClass> {
        ElementClass::ALL.into_iter().find(|c| c.id() == id)
    }

    /// The eleven text and structural classes.
    pub fn is_structural(self) -> bool {
        (self as usize) <= ElementClass::PieValue as usize
    }

    /// Structural classes whose annotation carries a non-empty string.
    pub fn carries_text(self) -> bool {
        self.is_structural() && !matches!(self, ElementClass::LegendBox | ElementClass::LegendPreview)
    }

    pub fn has_mask(self) -> bool {
        matches!(self, ElementClass::Wedge | ElementClass::LineSegment)
    }

    /// Bar and box glyphs, whose extents reveal the chart orientation.
    pub fn is_oriented_glyph(self) -> bool {
        matches!(
            self,
            ElementClass::BarV
                | ElementClass::BarH
                | ElementClass::StackedSegmentV
                | ElementClass::StackedSegmentH
                | ElementClass::BoxGlyphV
                | ElementClass::BoxGlyphH
        )
    }
}

impl std::fmt::Display for ElementClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    /// Matches the `id` attribute of the SVG node drawing this element.
    pub id: String,
    pub element_class: ElementClass,
    #[serde(rename = "box")]
    pub bbox: Rect,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "flat_polygon")]
    pub mask: Option<Vec<Point>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    pub order_hint: usize,
    /// Data series index for plot glyphs and legend entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<usize>,
    /// Category (or point) index for plot glyphs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub schema_version: u32,
    pub chart_id: String,
    pub chart_type: ChartType,
    pub canvas: (f64, f64),
    pub elements: Vec<Annotation>,
}

impl AnnotationSet {
    pub fn of_class(&self, class: ElementClass) -> impl Iterator<Item = &Annotation> {
        self.elements.iter().filter(move |a| a.element_class == class)
    }

    pub fn count(&self, class: ElementClass) -> usize {
        self.of_class(class).count()
    }

    /// Checks the record-level invariants; returns one message per breach.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let canvas = Rect::new(0.0, 0.0, self.canvas.0, self.canvas.1);
        if self.count(ElementClass::ChartTitle) != 1 {
            out.push("chart must have exactly one chart_title".to_string());
        }
        for a in &self.elements {
            if !canvas.contains_rect(&a.bbox, 1e-6) {
                out.push(format!("{}: box outside canvas", a.id));
            }
            if a.bbox.x0 > a.bbox.x1 || a.bbox.y0 > a.bbox.y1 {
                out.push(format!("{}: inverted box", a.id));
            }
            match (&a.mask, a.element_class.has_mask()) {
                (Some(m), true) => {
                    if Rect::bounding(m.iter().copied()) != Some(a.bbox) {
                        out.push(format!("{}: box is not the tight bounds of its mask", a.id));
                    }
                }
                (None, false) => {}
                (Some(_), false) => out.push(format!("{}: unexpected mask", a.id)),
                (None, true) => out.push(format!("{}: missing mask", a.id)),
            }
            let has_text = a.text.as_ref().is_some_and(|t| !t.is_empty());
            if a.element_class.carries_text() != has_text {
                out.push(format!("{}: text presence does not match class", a.id));
            }
            if !a.element_class.is_structural() && a.text.is_some() {
                out.push(format!("{}: plot element with text", a.id));
            }
        }
        out
    }
}

/// Masks are stored as flat `[x0, y0, x1, y1, ...]` arrays.
pub(crate) mod flat_polygon {
    use super::Point;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(mask: &Option<Vec<Point>>, s: S) -> Result<S::Ok, S::Error> {
        match mask {
            Some(m) => m.iter().flat_map(|&(x, y)| [x, y]).collect::<Vec<f64>>().serialize(s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<Point>>, D::Error> {
        let flat: Option<Vec<f64>> = Option::deserialize(d)?;
        match flat {
            None => Ok(None),
            Some(v) if v.len() % 2 == 1 => Err(serde::de::Error::custom("odd number of mask coordinates")),
            Some(v) => Ok(Some(v.chunks_exact(2).map(|c| (c[0], c[1])).collect())),
        }
    }
}

/// Fixed precision for emitted coordinates.
pub fn round6(v: f64) -> f64 {
    let r = (v * 1e6).round() / 1e6;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn round_rect(r: Rect) -> Rect {
    Rect::new(round6(r.x0), round6(r.y0), round6(r.x1), round6(r.y1))
}

/// Emits one annotation per annotated layout node, in draw order.
pub fn annotate(layout: &LayoutTree, spec: &ChartSpec, chart_id: &str) -> AnnotationSet {
    let mut elements = Vec::new();
    for node in layout.nodes.iter() {
        let Some(class) = node.class else { continue };
        let n = elements.len();
        let mask: Option<Vec<Point>> = node
            .mask
            .as_ref()
            .map(|m| m.iter().map(|&(x, y)| (round6(x), round6(y))).collect());
        let bbox = match &mask {
            Some(m) => Rect::bounding(m.iter().copied()).expect("non-empty mask"),
            None => round_rect(node.bounds),
        };
        elements.push(Annotation {
            id: format!("e{n}"),
            element_class: class,
            bbox,
            mask,
            text: if class.is_structural() {
                Some(node.text.clone().unwrap_or_default())
            } else {
                None
            },
            order_hint: n,
            series: node.series,
            index: node.index,
        });
    }
    AnnotationSet {
        schema_version: ANNOTATION_SCHEMA_VERSION,
        chart_id: chart_id.to_string(),
        chart_type: spec.chart_type,
        canvas: layout.canvas,
        elements,
    }
}
