//! Layout, SVG emission and element annotation.

pub mod annotate;
pub mod fonts;
pub mod geometry;
pub mod layout;
pub mod svg;
pub mod ticks;

pub use annotate::{annotate, Annotation, AnnotationSet, ElementClass};
pub use geometry::{line_interval_boxes, wedge_polygon, Point, Rect};
pub use layout::{layout, LayoutError, LayoutTree};
pub use svg::render_svg;

use crate::synth::ChartSpec;

/// Everything emitted for one chart.
#[derive(Debug, Clone)]
pub struct RenderedChart {
    pub layout: LayoutTree,
    pub annotations: AnnotationSet,
    pub svg: Vec<u8>,
}

pub fn render_chart(spec: &ChartSpec, chart_id: &str) -> Result<RenderedChart, LayoutError> {
    let layout = layout(spec)?;
    let annotations = annotate(&layout, spec, chart_id);
    let svg = render_svg(&layout, spec);
    Ok(RenderedChart {
        layout,
        annotations,
        svg,
    })
}

/// Lays the spec out and checks the properties downstream stages rely on:
/// record invariants hold and the glyph extents reveal the orientation.
pub fn check_renderable(spec: &ChartSpec) -> Result<(), LayoutError> {
    let tree = layout(spec)?;
    let set = annotate(&tree, spec, "check");
    if let Some(v) = set.violations().into_iter().next() {
        return Err(LayoutError::DoesNotFit(v));
    }
    if spec.chart_type.has_oriented_glyphs() {
        let plot: Vec<&Annotation> = set.elements.iter().filter(|a| a.element_class.is_oriented_glyph()).collect();
        let boxes: Vec<Rect> = plot.iter().map(|a| a.bbox).collect();
        if crate::encode::detect_axis_swap(&boxes) != spec.chart_type.is_horizontal() {
            return Err(LayoutError::DoesNotFit("glyph extents do not reveal orientation".into()));
        }
    }
    Ok(())
}
