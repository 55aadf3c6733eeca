//! SVG 1.1 serialization of a layout tree.

use std::fmt::Write;

use super::layout::{LayoutTree, Primitive, Stroke};
use crate::synth::ChartSpec;

/// Coordinates are written with three decimals.
fn f(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".to_string()
    } else {
        s
    }
}

pub fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn stroke_attrs(stroke: &Stroke) -> String {
    let mut s = format!(r#" stroke="{}" stroke-width="{}""#, stroke.color, f(stroke.width));
    if let Some(d) = stroke.dash {
        let _ = write!(s, r#" stroke-dasharray="{d}""#);
    }
    s
}

fn path_data(points: &[(f64, f64)]) -> String {
    let mut d = String::new();
    for (i, (x, y)) in points.iter().enumerate() {
        let _ = write!(d, "{}{} {} ", if i == 0 { "M" } else { "L" }, f(*x), f(*y));
    }
    d.push('Z');
    d
}

fn write_primitive(out: &mut String, p: &Primitive, attrs: &str, indent: usize) {
    let pad = " ".repeat(indent);
    match p {
        Primitive::Rect { rect, fill, stroke } => {
            let _ = writeln!(
                out,
                r#"{pad}<rect{attrs} x="{}" y="{}" width="{}" height="{}" fill="{}"{}/>"#,
                f(rect.x0),
                f(rect.y0),
                f(rect.width()),
                f(rect.height()),
                fill.as_deref().unwrap_or("none"),
                stroke.as_ref().map(stroke_attrs).unwrap_or_default()
            );
        }
        Primitive::Polygon { points, fill } => {
            let _ = writeln!(out, r#"{pad}<path{attrs} d="{}" fill="{fill}"/>"#, path_data(points));
        }
        Primitive::Circle { center, r, fill } => {
            let _ = writeln!(
                out,
                r#"{pad}<circle{attrs} cx="{}" cy="{}" r="{}" fill="{fill}"/>"#,
                f(center.0),
                f(center.1),
                f(*r)
            );
        }
        Primitive::Line { from, to, stroke } => {
            let _ = writeln!(
                out,
                r#"{pad}<line{attrs} x1="{}" y1="{}" x2="{}" y2="{}"{}/>"#,
                f(from.0),
                f(from.1),
                f(to.0),
                f(to.1),
                stroke_attrs(stroke)
            );
        }
        Primitive::Text(run) => {
            let transform = if run.rotate != 0.0 {
                format!(r#" transform="rotate({} {} {})""#, f(run.rotate), f(run.x), f(run.y))
            } else {
                String::new()
            };
            let _ = writeln!(
                out,
                r#"{pad}<text{attrs} x="{}" y="{}" text-anchor="{}" font-family="{}" font-size="{}"{transform}>{}</text>"#,
                f(run.x),
                f(run.y),
                run.anchor.svg(),
                run.font.metrics().svg_family,
                f(run.size),
                escape_xml(&run.text)
            );
        }
        Primitive::Group(children) => {
            let _ = writeln!(out, "{pad}<g{attrs}>");
            for c in children {
                write_primitive(out, c, "", indent + 2);
            }
            let _ = writeln!(out, "{pad}</g>");
        }
    }
}

/// Serializes the layout. Annotated nodes carry `id="e{n}"` in annotation
/// order and a `class` naming their element class.
pub fn render_svg(layout: &LayoutTree, spec: &ChartSpec) -> Vec<u8> {
    let (w, h) = layout.canvas;
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        f(w),
        f(h),
        f(w),
        f(h)
    );
    let _ = writeln!(out, "  <title>{}</title>", escape_xml(&spec.title));
    let _ = writeln!(out, r##"  <rect x="0" y="0" width="{}" height="{}" fill="#ffffff"/>"##, f(w), f(h));
    let mut n = 0;
    for node in &layout.nodes {
        let attrs = match node.class {
            Some(class) => {
                let a = format!(r#" id="e{n}" class="{}""#, class.id());
                n += 1;
                a
            }
            None => String::new(),
        };
        write_primitive(&mut out, &node.primitive, &attrs, 2);
    }
    out.push_str("</svg>\n");
    out.into_bytes()
}
