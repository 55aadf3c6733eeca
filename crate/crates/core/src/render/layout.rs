//! Deterministic layout of a chart spec onto a pixel canvas.
//!
//! Coordinates are SVG pixels with the origin at the top-left corner and
//! y pointing down. Text extents come from the bundled font metrics.

use thiserror::Error;

use super::annotate::ElementClass;
use super::fonts::{FontFamily, FontMetrics, TextAnchor, TextRun};
use super::geometry::{clock_angle, clock_point, line_interval_boxes, wedge_polygon, GeometryError, Point, Rect};
use super::ticks::{format_value, nice_ticks, Ticks};
use crate::synth::style::{palette_colors, GridStyle, LegendPlacement, MarkerStyle, PieLabeling, TitlePosition};
use crate::synth::{ChartSpec, ChartType};

pub const MARGIN: f64 = 10.0;
pub const MIN_FONT_SIZE: f64 = 8.0;
const GAP: f64 = 8.0;
const TICK: f64 = 4.0;
const LEGEND_PAD: f64 = 6.0;
const LEGEND_COL_GAP: f64 = 12.0;
const MIN_PLOT: f64 = 60.0;
const MIN_PIE_RADIUS: f64 = 40.0;
const SCATTER_MARKER: f64 = 7.0;
const AXIS_COLOR: &str = "#333333";
const ERROR_BAR_COLOR: &str = "#222222";

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("does not fit: {0}")]
    DoesNotFit(String),
    #[error("text runs overlap: {0:?} and {1:?}")]
    TextOverlap(String, String),
    #[error("pie labels out of clockwise order")]
    PieOrder,
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stroke {
    pub color: String,
    pub width: f64,
    pub dash: Option<&'static str>,
}

impl Stroke {
    fn solid(color: &str, width: f64) -> Stroke {
        Stroke {
            color: color.to_string(),
            width,
            dash: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    Rect {
        rect: Rect,
        fill: Option<String>,
        stroke: Option<Stroke>,
    },
    Polygon {
        points: Vec<Point>,
        fill: String,
    },
    Circle {
        center: Point,
        r: f64,
        fill: String,
    },
    Line {
        from: Point,
        to: Point,
        stroke: Stroke,
    },
    Text(TextRun),
    Group(Vec<Primitive>),
}

impl Primitive {
    /// Geometric bounds, ignoring stroke width.
    pub fn bounds(&self) -> Rect {
        match self {
            Primitive::Rect { rect, .. } => *rect,
            Primitive::Polygon { points, .. } => Rect::bounding(points.iter().copied()).expect("non-empty polygon"),
            Primitive::Circle { center, r, .. } => Rect::new(center.0 - r, center.1 - r, center.0 + r, center.1 + r),
            Primitive::Line { from, to, .. } => Rect::bounding([*from, *to]).expect("two points"),
            Primitive::Text(run) => run.bounds(),
            Primitive::Group(children) => children
                .iter()
                .map(Primitive::bounds)
                .reduce(|a, b| a.union(&b))
                .expect("non-empty group"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutNode {
    /// `None` for decorations (axes, grid, markers on lines, error bars).
    pub class: Option<ElementClass>,
    pub primitive: Primitive,
    pub bounds: Rect,
    pub mask: Option<Vec<Point>>,
    pub text: Option<String>,
    pub series: Option<usize>,
    pub index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutTree {
    pub canvas: (f64, f64),
    pub plot: Option<Rect>,
    /// Category tick positions along the x axis for line charts.
    pub category_ticks: Vec<f64>,
    pub font: FontFamily,
    pub text_size: f64,
    pub title_size: f64,
    pub nodes: Vec<LayoutNode>,
}

impl LayoutTree {
    pub fn annotated(&self) -> impl Iterator<Item = &LayoutNode> {
        self.nodes.iter().filter(|n| n.class.is_some())
    }
}

/// Lays out the spec, shrinking the text size toward 8 pt until every
/// mandatory element fits.
pub fn layout(spec: &ChartSpec) -> Result<LayoutTree, LayoutError> {
    spec.check().map_err(LayoutError::InvalidSpec)?;
    let mut size = spec.style.font_size;
    loop {
        match layout_at(spec, size) {
            Ok(tree) => return Ok(tree),
            Err(e @ (LayoutError::InvalidSpec(_) | LayoutError::Geometry(_))) => return Err(e),
            Err(e) if size - 1.0 < MIN_FONT_SIZE => return Err(e),
            Err(_) => size -= 1.0,
        }
    }
}

struct Builder<'a> {
    spec: &'a ChartSpec,
    font: FontFamily,
    size: f64,
    colors: Vec<String>,
    nodes: Vec<LayoutNode>,
}

impl<'a> Builder<'a> {
    fn metrics(&self) -> &'static FontMetrics {
        self.font.metrics()
    }

    fn width(&self, text: &str) -> f64 {
        self.metrics().text_width(text, self.size)
    }

    fn line_height(&self) -> f64 {
        self.metrics().line_height(self.size)
    }

    fn run(&self, text: &str, x: f64, y: f64, anchor: TextAnchor, rotate: f64, size: f64) -> TextRun {
        TextRun {
            text: text.to_string(),
            x,
            y,
            anchor,
            rotate,
            size,
            font: self.font,
        }
    }

    /// Text centered vertically on `cy`.
    fn centered_run(&self, text: &str, x: f64, cy: f64, anchor: TextAnchor) -> TextRun {
        let m = self.metrics();
        let baseline = cy + (m.ascent(self.size) - m.descent(self.size)) / 2.0;
        self.run(text, x, baseline, anchor, 0.0, self.size)
    }

    fn push(&mut self, class: Option<ElementClass>, primitive: Primitive) -> &mut LayoutNode {
        let text = match &primitive {
            Primitive::Text(run) => Some(run.text.clone()),
            _ => None,
        };
        self.nodes.push(LayoutNode {
            class,
            bounds: primitive.bounds(),
            primitive,
            mask: None,
            text,
            series: None,
            index: None,
        });
        self.nodes.last_mut().expect("just pushed")
    }

    fn decoration(&mut self, primitive: Primitive) {
        self.push(None, primitive);
    }
}

fn color_count(spec: &ChartSpec) -> usize {
    match spec.chart_type {
        ChartType::Pie | ChartType::Donut => spec.category_labels.len(),
        ChartType::BoxH | ChartType::BoxV | ChartType::Scatter => 1,
        _ => spec.series.len(),
    }
}

fn layout_at(spec: &ChartSpec, size: f64) -> Result<LayoutTree, LayoutError> {
    let style = &spec.style;
    let (w, h) = (style.canvas_width, style.canvas_height);
    let colors = palette_colors(style.palette_id, color_count(spec)).map_err(|e| LayoutError::InvalidSpec(e.to_string()))?;
    let mut b = Builder {
        spec,
        font: style.font_family,
        size,
        colors,
        nodes: Vec::new(),
    };
    let m = b.metrics();

    let mut title_size = size + 4.0;
    while m.text_width(&spec.title, title_size) > w - 2.0 * MARGIN {
        title_size -= 1.0;
        if title_size < MIN_FONT_SIZE {
            return Err(LayoutError::DoesNotFit("chart title".into()));
        }
    }
    let (tx, anchor) = match style.title_position {
        TitlePosition::Left => (MARGIN, TextAnchor::Start),
        TitlePosition::Center => (w / 2.0, TextAnchor::Middle),
        TitlePosition::Right => (w - MARGIN, TextAnchor::End),
    };
    let title = b.run(&spec.title, tx, MARGIN + m.ascent(title_size), anchor, 0.0, title_size);
    b.push(Some(ElementClass::ChartTitle), Primitive::Text(title));

    let mut region = Rect::new(MARGIN, MARGIN + m.line_height(title_size) + GAP, w - MARGIN, h - MARGIN);
    let legend = if spec.has_legend() {
        Some(place_legend(&mut b, &mut region)?)
    } else {
        None
    };

    let (plot, category_ticks) = if spec.chart_type.is_pie() {
        layout_pie(&mut b, region)?;
        (None, Vec::new())
    } else {
        let (plot, ticks) = layout_axes(&mut b, region)?;
        (Some(plot), ticks)
    };

    let tree = LayoutTree {
        canvas: (w, h),
        plot,
        category_ticks,
        font: b.font,
        text_size: size,
        title_size,
        nodes: b.nodes,
    };
    validate(&tree, legend)?;
    Ok(tree)
}

fn place_legend(b: &mut Builder, region: &mut Rect) -> Result<Rect, LayoutError> {
    let spec = b.spec;
    let entries = spec.legend_entries();
    let n = entries.len();
    let m = b.metrics();
    let lh = b.line_height();
    let asc = m.ascent(b.size);
    let row_h = lh + 4.0;
    let swatch = (lh * 0.8).max(6.0);
    let is_line = spec.chart_type == ChartType::Line;
    let cell_w = if is_line { swatch * 2.5 } else { swatch };
    let entry_w: Vec<f64> = entries.iter().map(|e| cell_w + 5.0 + b.width(e)).collect();
    let title_w = spec.legend_title.as_ref().map_or(0.0, |t| b.width(t));
    let title_h = if spec.legend_title.is_some() { lh + 4.0 } else { 0.0 };

    let col_widths = |cols: usize| -> Vec<f64> {
        let rows = n.div_ceil(cols);
        let cols = n.div_ceil(rows);
        (0..cols)
            .map(|c| entry_w[c * rows..((c + 1) * rows).min(n)].iter().cloned().fold(0.0, f64::max))
            .collect()
    };
    let total_w = |cols: usize| -> f64 {
        let widths = col_widths(cols);
        let inner: f64 = widths.iter().sum::<f64>() + (widths.len() - 1) as f64 * LEGEND_COL_GAP;
        inner.max(title_w) + 2.0 * LEGEND_PAD
    };
    let cols = match spec.style.legend_placement {
        LegendPlacement::Right => spec.style.legend_columns.min(n),
        LegendPlacement::Top | LegendPlacement::Bottom => {
            (1..=n).rev().find(|&c| total_w(c) <= region.width()).unwrap_or(1)
        }
    };
    // Columns are filled top to bottom; trailing empty columns are dropped.
    let rows = n.div_ceil(cols);
    let cols = n.div_ceil(rows);
    let widths = col_widths(cols);
    let width = total_w(cols);
    let height = 2.0 * LEGEND_PAD + title_h + rows as f64 * row_h - 4.0;
    if width > region.width() || height > region.height() {
        return Err(LayoutError::DoesNotFit("legend".into()));
    }
    let (x0, y0) = match spec.style.legend_placement {
        LegendPlacement::Right => (region.x1 - width, region.y0 + (region.height() - height) / 2.0),
        LegendPlacement::Top => (region.x0 + (region.width() - width) / 2.0, region.y0),
        LegendPlacement::Bottom => (region.x0 + (region.width() - width) / 2.0, region.y1 - height),
    };
    let frame = Rect::from_xywh(x0, y0, width, height);
    let stroke = spec.style.legend_border.then(|| Stroke::solid("#555555", 1.0));
    b.push(
        Some(ElementClass::LegendBox),
        Primitive::Rect {
            rect: frame,
            fill: Some("#ffffff".into()),
            stroke,
        },
    );
    if let Some(t) = &spec.legend_title {
        let run = b.run(t, x0 + LEGEND_PAD, y0 + LEGEND_PAD + asc, TextAnchor::Start, 0.0, b.size);
        b.push(Some(ElementClass::LegendTitle), Primitive::Text(run));
    }
    let is_pie = spec.chart_type.is_pie();
    for (e, label) in entries.iter().enumerate() {
        let (c, r) = (e / rows, e % rows);
        let cx = x0 + LEGEND_PAD + widths[..c].iter().sum::<f64>() + c as f64 * LEGEND_COL_GAP;
        let ry = y0 + LEGEND_PAD + title_h + r as f64 * row_h;
        let cell = Rect::from_xywh(cx, ry + (lh - swatch) / 2.0, cell_w, swatch);
        let color = b.colors[e].clone();
        let preview = if is_line {
            let mid = cell.center();
            Primitive::Group(vec![
                Primitive::Rect {
                    rect: cell,
                    fill: None,
                    stroke: None,
                },
                Primitive::Line {
                    from: (cell.x0, mid.1),
                    to: (cell.x1, mid.1),
                    stroke: Stroke::solid(&color, spec.style.line_width),
                },
                marker(spec.style.marker_style, mid, swatch * 0.6, &color),
            ])
        } else {
            Primitive::Rect {
                rect: cell,
                fill: Some(color),
                stroke: None,
            }
        };
        let node = b.push(Some(ElementClass::LegendPreview), preview);
        if is_pie {
            node.index = Some(e);
        } else {
            node.series = Some(e);
        }
        let run = b.run(label, cell.x1 + 5.0, ry + asc, TextAnchor::Start, 0.0, b.size);
        let node = b.push(Some(ElementClass::LegendLabel), Primitive::Text(run));
        if is_pie {
            node.index = Some(e);
        } else {
            node.series = Some(e);
        }
    }
    match spec.style.legend_placement {
        LegendPlacement::Right => region.x1 = x0 - LEGEND_COL_GAP,
        LegendPlacement::Top => region.y0 = y0 + height + GAP,
        LegendPlacement::Bottom => region.y1 = y0 - GAP,
    }
    Ok(frame)
}

/// Filled marker glyph of the given overall size.
pub fn marker(style: MarkerStyle, c: Point, size: f64, fill: &str) -> Primitive {
    let h = size / 2.0;
    let (x, y) = c;
    let points = match style {
        MarkerStyle::Circle => {
            return Primitive::Circle {
                center: c,
                r: h,
                fill: fill.to_string(),
            }
        }
        MarkerStyle::Square => vec![(x - h, y - h), (x + h, y - h), (x + h, y + h), (x - h, y + h)],
        MarkerStyle::Triangle => vec![(x, y - h), (x + h, y + h), (x - h, y + h)],
        MarkerStyle::Diamond => vec![(x, y - h), (x + h, y), (x, y + h), (x - h, y)],
        MarkerStyle::Cross => {
            let t = size / 6.0;
            vec![
                (x - t, y - h),
                (x + t, y - h),
                (x + t, y - t),
                (x + h, y - t),
                (x + h, y + t),
                (x + t, y + t),
                (x + t, y + h),
                (x - t, y + h),
                (x - t, y + t),
                (x - h, y + t),
                (x - h, y - t),
                (x - t, y - t),
            ]
        }
    };
    Primitive::Polygon {
        points,
        fill: fill.to_string(),
    }
}

enum PieAttempt {
    Shrink,
    Fail(LayoutError),
}

fn layout_pie(b: &mut Builder, region: Rect) -> Result<(), LayoutError> {
    let mut r = b.spec.style.pie_outer_radius.min(region.width().min(region.height()) / 2.0 - 4.0);
    loop {
        if r < MIN_PIE_RADIUS {
            return Err(LayoutError::DoesNotFit("pie radius".into()));
        }
        match try_pie(b, region, r) {
            Ok(nodes) => {
                b.nodes.extend(nodes);
                return Ok(());
            }
            Err(PieAttempt::Shrink) => r *= 0.9,
            Err(PieAttempt::Fail(e)) => return Err(e),
        }
    }
}

fn try_pie(b: &Builder, region: Rect, r: f64) -> Result<Vec<LayoutNode>, PieAttempt> {
    let spec = b.spec;
    let values = &spec.series[0].values;
    let total: f64 = values.iter().sum();
    let center = region.center();
    let r_in = r * spec.style.pie_inner_radius_fraction;
    let m = b.metrics();
    let (asc, desc) = (m.ascent(b.size), m.descent(b.size));
    let hh = (asc + desc) / 2.0;
    let mut nodes = Vec::new();
    let mut cum = 0.0;
    let mut mids = Vec::with_capacity(values.len());
    for (i, v) in values.iter().enumerate() {
        let start = 360.0 * cum / total;
        cum += v;
        let end = if i + 1 == values.len() { 360.0 } else { 360.0 * cum / total };
        mids.push((start + end) / 2.0);
        let poly = wedge_polygon(center, r_in, r, start, end).map_err(|e| PieAttempt::Fail(e.into()))?;
        nodes.push(LayoutNode {
            class: Some(ElementClass::Wedge),
            bounds: Rect::bounding(poly.iter().copied()).expect("non-empty"),
            primitive: Primitive::Polygon {
                points: poly.clone(),
                fill: b.colors[i].clone(),
            },
            mask: Some(poly),
            text: None,
            series: Some(0),
            index: Some(i),
        });
    }

    let text_node = |class, run: TextRun, i: usize| LayoutNode {
        class: Some(class),
        bounds: run.bounds(),
        text: Some(run.text.clone()),
        primitive: Primitive::Text(run),
        mask: None,
        series: None,
        index: Some(i),
    };

    let mut label_boxes: Vec<Rect> = Vec::new();
    if spec.style.pie_labeling == PieLabeling::Direct {
        for (i, label) in spec.category_labels.iter().enumerate() {
            let a = mids[i];
            let (s, c) = a.to_radians().sin_cos();
            let hw = b.width(label) / 2.0;
            let base = r + 6.0 + hw * s.abs() + hh * c.abs();
            let mut d = base;
            let place = |d: f64| {
                let (cx, cy) = clock_point(center, d, a);
                b.centered_run(label, cx, cy, TextAnchor::Middle)
            };
            let mut run = place(d);
            while label_boxes.iter().any(|o| o.overlaps(&run.bounds())) {
                d += 2.0;
                if d > base + 200.0 {
                    return Err(PieAttempt::Shrink);
                }
                run = place(d);
            }
            if !region.contains_rect(&run.bounds(), 1e-9) {
                return Err(PieAttempt::Shrink);
            }
            label_boxes.push(run.bounds());
            nodes.push(text_node(ElementClass::PieLabel, run, i));
        }
    }
    if spec.style.pie_values {
        let dist = if r_in > 0.0 { (r_in + r) / 2.0 } else { 0.62 * r };
        let mut value_boxes: Vec<Rect> = Vec::new();
        for (i, v) in values.iter().enumerate() {
            let (cx, cy) = clock_point(center, dist, mids[i]);
            let run = b.centered_run(&format_value(*v), cx, cy, TextAnchor::Middle);
            let bx = run.bounds();
            if value_boxes.iter().chain(label_boxes.iter()).any(|o| o.overlaps(&bx)) {
                return Err(PieAttempt::Fail(LayoutError::DoesNotFit("pie values overlap".into())));
            }
            value_boxes.push(bx);
            nodes.push(text_node(ElementClass::PieValue, run, i));
        }
    }
    Ok(nodes)
}

fn value_domain(spec: &ChartSpec) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut include = |v: f64| {
        lo = lo.min(v);
        hi = hi.max(v);
    };
    match spec.chart_type {
        ChartType::GroupedBarH | ChartType::GroupedBarV => {
            include(0.0);
            for s in &spec.series {
                for (i, v) in s.values.iter().enumerate() {
                    let e = s.errors.as_ref().map_or(0.0, |e| e[i]);
                    include(v - e);
                    include(v + e);
                }
            }
        }
        ChartType::StackedBarH | ChartType::StackedBarV => {
            include(0.0);
            for i in 0..spec.category_labels.len() {
                include(spec.series.iter().map(|s| s.values[i]).sum());
            }
        }
        ChartType::BoxH | ChartType::BoxV => {
            for b in spec.box_stats.iter().flatten() {
                include(b.minimum);
                include(b.maximum);
            }
        }
        _ => {
            for s in &spec.series {
                for &v in &s.values {
                    include(v);
                }
            }
        }
    }
    (lo, hi)
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn layout_axes(b: &mut Builder, region: Rect) -> Result<(Rect, Vec<f64>), LayoutError> {
    let spec = b.spec;
    let style = &spec.style;
    let ct = spec.chart_type;
    let horiz = ct.is_horizontal();
    let scatter = ct == ChartType::Scatter;
    let m = b.metrics();
    let lh = b.line_height();
    let (asc, desc) = (m.ascent(b.size), m.descent(b.size));

    let (vlo, vhi) = value_domain(spec);
    let vt = nice_ticks(vlo, vhi);
    let xt: Option<Ticks> = spec.x_values.as_ref().map(|xs| {
        let (lo, hi) = min_max(xs);
        nice_ticks(lo, hi)
    });
    let cats = &spec.category_labels;
    let n = cats.len();

    let (left_labels, bottom_labels): (Vec<String>, Vec<String>) = if scatter {
        (vt.labels.clone(), xt.as_ref().expect("scatter x ticks").labels.clone())
    } else if horiz {
        (cats.clone(), vt.labels.clone())
    } else {
        (vt.labels.clone(), cats.clone())
    };
    let left_is_value = !horiz;
    let bottom_is_value = horiz || scatter;
    let bottom_ticks: &Ticks = if scatter { xt.as_ref().expect("scatter x ticks") } else { &vt };

    let titles = spec.axis_titles.as_ref();
    let y_title_w = if titles.is_some() { lh + 6.0 } else { 0.0 };
    let left_w = left_labels.iter().map(|l| b.width(l)).fold(0.0, f64::max);
    let x0 = region.x0 + y_title_w + left_w + 3.0 + TICK;
    let right_pad = if bottom_is_value {
        (b.width(bottom_labels.last().expect("ticks")) / 2.0 + 2.0).max(6.0)
    } else {
        6.0
    };
    let x1 = region.x1 - right_pad;
    let pw = x1 - x0;
    if pw < MIN_PLOT {
        return Err(LayoutError::DoesNotFit("plot width".into()));
    }
    let bottom_w = bottom_labels.iter().map(|l| b.width(l)).fold(0.0, f64::max);
    let rotate = !bottom_is_value && bottom_w + 4.0 > pw / n as f64;
    if rotate && lh + 1.0 > pw / n as f64 {
        return Err(LayoutError::DoesNotFit("category labels".into()));
    }
    let bottom_h = TICK + 4.0 + if rotate { bottom_w } else { lh };
    let x_title_h = if titles.is_some() { lh + 6.0 } else { 0.0 };
    let y1 = region.y1 - x_title_h - bottom_h;
    let y0 = region.y0 + if left_is_value { lh / 2.0 + 2.0 } else { 4.0 };
    let ph = y1 - y0;
    if ph < MIN_PLOT {
        return Err(LayoutError::DoesNotFit("plot height".into()));
    }
    let plot = Rect::new(x0, y0, x1, y1);

    let vy = |t: &Ticks, v: f64| y1 - t.fraction(v) * ph;
    let vx = |t: &Ticks, v: f64| x0 + t.fraction(v) * pw;
    let cat_x = |i: usize| x0 + (i as f64 + 0.5) * pw / n as f64;
    let cat_y = |i: usize| y1 - (i as f64 + 0.5) * ph / n as f64;

    let left_pos: Vec<f64> = if left_is_value {
        vt.values.iter().map(|&v| vy(&vt, v)).collect()
    } else {
        (0..n).map(cat_y).collect()
    };
    let bottom_pos: Vec<f64> = if bottom_is_value {
        bottom_ticks.values.iter().map(|&v| vx(bottom_ticks, v)).collect()
    } else {
        (0..n).map(cat_x).collect()
    };
    let left_spacing = ph / (left_pos.len().max(2) - 1) as f64;
    if left_is_value && left_spacing < lh + 1.0 {
        return Err(LayoutError::DoesNotFit("value tick labels".into()));
    }
    if !left_is_value && ph / (n as f64) < lh + 1.0 {
        return Err(LayoutError::DoesNotFit("category labels".into()));
    }
    if bottom_is_value {
        for k in 1..bottom_pos.len() {
            let need = (b.width(&bottom_labels[k - 1]) + b.width(&bottom_labels[k])) / 2.0 + 4.0;
            if bottom_pos[k] - bottom_pos[k - 1] < need {
                return Err(LayoutError::DoesNotFit("value tick labels".into()));
            }
        }
    }

    let grid_stroke = Stroke {
        color: style.grid_color.clone(),
        width: 1.0,
        dash: style.line_style.dasharray(),
    };
    if matches!(style.grid_style, GridStyle::Horizontal | GridStyle::Both) {
        for &y in &left_pos {
            b.decoration(Primitive::Line {
                from: (x0, y),
                to: (x1, y),
                stroke: grid_stroke.clone(),
            });
        }
    }
    if matches!(style.grid_style, GridStyle::Vertical | GridStyle::Both) {
        for &x in &bottom_pos {
            b.decoration(Primitive::Line {
                from: (x, y0),
                to: (x, y1),
                stroke: grid_stroke.clone(),
            });
        }
    }

    let mut category_ticks = Vec::new();
    match ct {
        ChartType::GroupedBarV | ChartType::GroupedBarH => {
            let k = spec.series.len();
            let slot = if horiz { ph } else { pw } / n as f64;
            let gw = style.bar_width_fraction * slot;
            let bw = gw / k as f64;
            for i in 0..n {
                for (j, s) in spec.series.iter().enumerate() {
                    let v = s.values[i];
                    let err = s.errors.as_ref().map(|e| e[i]);
                    let (rect, class) = if horiz {
                        let bottom = cat_y(i) + gw / 2.0 - j as f64 * bw;
                        let (a, c) = (vx(&vt, v.min(0.0)), vx(&vt, v.max(0.0)));
                        (Rect::new(a, bottom - bw, c, bottom), ElementClass::BarH)
                    } else {
                        let left = cat_x(i) - gw / 2.0 + j as f64 * bw;
                        let (top, bot) = (vy(&vt, v.max(0.0)), vy(&vt, v.min(0.0)));
                        (Rect::new(left, top, left + bw, bot), ElementClass::BarV)
                    };
                    let node = b.push(
                        Some(class),
                        Primitive::Rect {
                            rect,
                            fill: Some(b.colors[j].clone()),
                            stroke: None,
                        },
                    );
                    node.series = Some(j);
                    node.index = Some(i);
                    if let Some(e) = err {
                        let stroke = Stroke::solid(ERROR_BAR_COLOR, 1.0);
                        let cap = bw / 3.0;
                        let (c, lo, hi) = if horiz {
                            (rect.center().1, vx(&vt, v - e), vx(&vt, v + e))
                        } else {
                            (rect.center().0, vy(&vt, v - e), vy(&vt, v + e))
                        };
                        let seg = |p: f64, q0: f64, q1: f64| {
                            if horiz {
                                ((p, q0), (p, q1))
                            } else {
                                ((q0, p), (q1, p))
                            }
                        };
                        let main = if horiz { ((lo, c), (hi, c)) } else { ((c, lo), (c, hi)) };
                        for (from, to) in [main, seg(lo, c - cap, c + cap), seg(hi, c - cap, c + cap)] {
                            b.decoration(Primitive::Line {
                                from,
                                to,
                                stroke: stroke.clone(),
                            });
                        }
                    }
                }
            }
        }
        ChartType::StackedBarV | ChartType::StackedBarH => {
            let slot = if horiz { ph } else { pw } / n as f64;
            let gw = style.bar_width_fraction * slot;
            for i in 0..n {
                let mut cum = 0.0;
                for (j, s) in spec.series.iter().enumerate() {
                    let next = cum + s.values[i];
                    let (rect, class) = if horiz {
                        let c = cat_y(i);
                        (Rect::new(vx(&vt, cum), c - gw / 2.0, vx(&vt, next), c + gw / 2.0), ElementClass::StackedSegmentH)
                    } else {
                        let c = cat_x(i);
                        (Rect::new(c - gw / 2.0, vy(&vt, next), c + gw / 2.0, vy(&vt, cum)), ElementClass::StackedSegmentV)
                    };
                    cum = next;
                    let node = b.push(
                        Some(class),
                        Primitive::Rect {
                            rect,
                            fill: Some(b.colors[j].clone()),
                            stroke: None,
                        },
                    );
                    node.series = Some(j);
                    node.index = Some(i);
                }
            }
        }
        ChartType::BoxV | ChartType::BoxH => {
            let slot = if horiz { ph } else { pw } / n as f64;
            let gw = style.bar_width_fraction * slot;
            let whisker = Stroke {
                color: AXIS_COLOR.into(),
                width: 1.0,
                dash: style.line_style.dasharray(),
            };
            let solid = Stroke::solid(AXIS_COLOR, 1.0);
            for (i, st) in spec.box_stats.as_ref().expect("checked").iter().enumerate() {
                // Build in (along-category, along-value) terms, then orient.
                let c = if horiz { cat_y(i) } else { cat_x(i) };
                let p = |v: f64| if horiz { vx(&vt, v) } else { vy(&vt, v) };
                let pt = |a: f64, v: f64| if horiz { (v, a) } else { (a, v) };
                let bx = Rect::bounding([pt(c - gw / 2.0, p(st.q1)), pt(c + gw / 2.0, p(st.q3))]).expect("two points");
                let line = |a0: f64, v0: f64, a1: f64, v1: f64, stroke: &Stroke| Primitive::Line {
                    from: pt(a0, v0),
                    to: pt(a1, v1),
                    stroke: stroke.clone(),
                };
                let glyph = Primitive::Group(vec![
                    line(c, p(st.q3), c, p(st.maximum), &whisker),
                    line(c, p(st.q1), c, p(st.minimum), &whisker),
                    line(c - gw / 4.0, p(st.maximum), c + gw / 4.0, p(st.maximum), &solid),
                    line(c - gw / 4.0, p(st.minimum), c + gw / 4.0, p(st.minimum), &solid),
                    Primitive::Rect {
                        rect: bx,
                        fill: Some(b.colors[0].clone()),
                        stroke: Some(solid.clone()),
                    },
                    line(c - gw / 2.0, p(st.median), c + gw / 2.0, p(st.median), &Stroke::solid(AXIS_COLOR, 2.0)),
                ]);
                let class = if horiz { ElementClass::BoxGlyphH } else { ElementClass::BoxGlyphV };
                let node = b.push(Some(class), glyph);
                node.index = Some(i);
            }
        }
        ChartType::Line => {
            let xs: Vec<f64> = (0..n).map(cat_x).collect();
            for (j, s) in spec.series.iter().enumerate() {
                let pts: Vec<Point> = s.values.iter().enumerate().map(|(i, &v)| (xs[i], vy(&vt, v))).collect();
                for (k, (rect, mask)) in line_interval_boxes(&pts, &xs, style.line_width)?.into_iter().enumerate() {
                    b.nodes.push(LayoutNode {
                        class: Some(ElementClass::LineSegment),
                        primitive: Primitive::Polygon {
                            points: mask.clone(),
                            fill: b.colors[j].clone(),
                        },
                        bounds: rect,
                        mask: Some(mask),
                        text: None,
                        series: Some(j),
                        index: Some(k),
                    });
                }
                let size = 2.0 * style.line_width + 4.0;
                for &p in &pts {
                    let glyph = marker(style.marker_style, p, size, &b.colors[j]);
                    b.decoration(glyph);
                }
            }
            category_ticks = xs;
        }
        ChartType::Scatter => {
            let xt = xt.as_ref().expect("scatter x ticks");
            let xs = spec.x_values.as_ref().expect("checked");
            for (i, (&x, &y)) in xs.iter().zip(&spec.series[0].values).enumerate() {
                let glyph = marker(style.marker_style, (vx(xt, x), vy(&vt, y)), SCATTER_MARKER, &b.colors[0]);
                let node = b.push(Some(ElementClass::ScatterMarker), glyph);
                node.series = Some(0);
                node.index = Some(i);
            }
        }
        ChartType::Pie | ChartType::Donut => unreachable!("pies have no axes"),
    }

    let axis = Stroke::solid(AXIS_COLOR, 1.0);
    b.decoration(Primitive::Line {
        from: (x0, y0),
        to: (x0, y1),
        stroke: axis.clone(),
    });
    b.decoration(Primitive::Line {
        from: (x0, y1),
        to: (x1, y1),
        stroke: axis.clone(),
    });
    if !scatter && vt.first() < 0.0 && vt.last() > 0.0 {
        let (from, to) = if horiz {
            let x = vx(&vt, 0.0);
            ((x, y0), (x, y1))
        } else {
            let y = vy(&vt, 0.0);
            ((x0, y), (x1, y))
        };
        b.decoration(Primitive::Line {
            from,
            to,
            stroke: axis.clone(),
        });
    }
    for &y in &left_pos {
        b.decoration(Primitive::Line {
            from: (x0 - TICK, y),
            to: (x0, y),
            stroke: axis.clone(),
        });
    }
    for &x in &bottom_pos {
        b.decoration(Primitive::Line {
            from: (x, y1),
            to: (x, y1 + TICK),
            stroke: axis.clone(),
        });
    }

    for (i, (label, &y)) in left_labels.iter().zip(&left_pos).enumerate() {
        let run = b.centered_run(label, x0 - TICK - 3.0, y, TextAnchor::End);
        b.push(Some(ElementClass::YAxisLabel), Primitive::Text(run)).index = Some(i);
    }
    for (i, (label, &x)) in bottom_labels.iter().zip(&bottom_pos).enumerate() {
        let top = y1 + TICK + 4.0;
        let run = if rotate {
            b.run(label, x + (asc - desc) / 2.0, top, TextAnchor::End, -90.0, b.size)
        } else {
            b.run(label, x, top + asc, TextAnchor::Middle, 0.0, b.size)
        };
        b.push(Some(ElementClass::XAxisLabel), Primitive::Text(run)).index = Some(i);
    }

    if let Some(t) = titles {
        if b.width(&t.x) > region.width() || b.width(&t.y) > region.height() {
            return Err(LayoutError::DoesNotFit("axis title".into()));
        }
        let xt_run = b.run(&t.x, (x0 + x1) / 2.0, region.y1 - desc, TextAnchor::Middle, 0.0, b.size);
        b.push(Some(ElementClass::XAxisTitle), Primitive::Text(xt_run));
        let yt_run = b.run(&t.y, region.x0 + asc, (y0 + y1) / 2.0, TextAnchor::Middle, -90.0, b.size);
        b.push(Some(ElementClass::YAxisTitle), Primitive::Text(yt_run));
    }
    Ok((plot, category_ticks))
}

fn validate(tree: &LayoutTree, legend: Option<Rect>) -> Result<(), LayoutError> {
    let canvas = Rect::new(0.0, 0.0, tree.canvas.0, tree.canvas.1);
    for node in tree.annotated() {
        if !canvas.contains_rect(&node.bounds, 1e-9) {
            return Err(LayoutError::DoesNotFit(format!("{:?} leaves the canvas", node.class)));
        }
    }
    let texts: Vec<&LayoutNode> = tree.nodes.iter().filter(|n| matches!(n.primitive, Primitive::Text(_))).collect();
    for (i, a) in texts.iter().enumerate() {
        for bnode in &texts[i + 1..] {
            if a.bounds.overlaps(&bnode.bounds) {
                return Err(LayoutError::TextOverlap(
                    a.text.clone().unwrap_or_default(),
                    bnode.text.clone().unwrap_or_default(),
                ));
            }
        }
    }
    if let (Some(plot), Some(legend)) = (tree.plot, legend) {
        if plot.overlaps(&legend) {
            return Err(LayoutError::DoesNotFit("legend overlaps plot".into()));
        }
    }
    let wedges: Vec<Rect> = tree
        .annotated()
        .filter(|n| n.class == Some(ElementClass::Wedge))
        .map(|n| n.bounds)
        .collect();
    if let Some(union) = wedges.iter().copied().reduce(|a, b| a.union(&b)) {
        if let Some(legend) = legend {
            if union.overlaps(&legend) {
                return Err(LayoutError::DoesNotFit("legend overlaps pie".into()));
            }
        }
        let c = union.center();
        for class in [ElementClass::PieLabel, ElementClass::PieValue] {
            let angles: Vec<f64> = tree
                .annotated()
                .filter(|n| n.class == Some(class))
                .map(|n| clock_angle(c, n.bounds.center()))
                .collect();
            if angles.windows(2).any(|w| w[0] >= w[1]) {
                return Err(LayoutError::PieOrder);
            }
        }
    }
    Ok(())
}
