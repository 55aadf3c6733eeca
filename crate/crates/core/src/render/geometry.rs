//! Planar geometry in pixel space (y axis pointing down).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("angle span must lie in (0, 360], got {0}")]
    AngleSpan(f64),
    #[error("radii must satisfy r_outer > r_inner >= 0, got inner {inner}, outer {outer}")]
    Radii { inner: f64, outer: f64 },
    #[error("need at least two ticks, got {0}")]
    TooFewTicks(usize),
    #[error("need at least two points, got {0}")]
    TooFewPoints(usize),
}

pub type Point = (f64, f64);

/// Axis-aligned rectangle given by its min and max corners.
/// Serialized as `[x_min, y_min, x_max, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl From<[f64; 4]> for Rect {
    fn from(v: [f64; 4]) -> Self {
        Rect::new(v[0], v[1], v[2], v[3])
    }
}

impl From<Rect> for [f64; 4] {
    fn from(r: Rect) -> Self {
        [r.x0, r.y0, r.x1, r.y1]
    }
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn from_xywh(x: f64, y: f64, w: f64, h: f64) -> Self {
        Rect::new(x, y, x + w, y + h)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn center(&self) -> Point {
        ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)
    }

    pub fn bounding<I: IntoIterator<Item = Point>>(points: I) -> Option<Rect> {
        let mut it = points.into_iter();
        let (x, y) = it.next()?;
        let mut r = Rect::new(x, y, x, y);
        for (x, y) in it {
            r.x0 = r.x0.min(x);
            r.y0 = r.y0.min(y);
            r.x1 = r.x1.max(x);
            r.y1 = r.y1.max(y);
        }
        Some(r)
    }

    pub fn union(&self, other: &Rect) -> Rect {
        Rect::new(
            self.x0.min(other.x0),
            self.y0.min(other.y0),
            self.x1.max(other.x1),
            self.y1.max(other.y1),
        )
    }

    pub fn intersection_area(&self, other: &Rect) -> f64 {
        let w = self.x1.min(other.x1) - self.x0.max(other.x0);
        let h = self.y1.min(other.y1) - self.y0.max(other.y0);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Interiors overlap (touching edges do not count).
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }

    pub fn contains_rect(&self, other: &Rect, tol: f64) -> bool {
        other.x0 >= self.x0 - tol
            && other.y0 >= self.y0 - tol
            && other.x1 <= self.x1 + tol
            && other.y1 <= self.y1 + tol
    }

    pub fn inflate(&self, d: f64) -> Rect {
        Rect::new(self.x0 - d, self.y0 - d, self.x1 + d, self.y1 + d)
    }

    /// Box IoU. Two identical degenerate boxes have IoU 1.
    pub fn iou(&self, other: &Rect) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            return if self == other { 1.0 } else { 0.0 };
        }
        inter / union
    }
}

/// Shoelace area (absolute value) of a closed polygon.
pub fn polygon_area(poly: &[Point]) -> f64 {
    signed_area(poly).abs()
}

pub fn signed_area(poly: &[Point]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..poly.len() {
        let (x0, y0) = poly[i];
        let (x1, y1) = poly[(i + 1) % poly.len()];
        s += x0 * y1 - x1 * y0;
    }
    s / 2.0
}

/// Point on a circle at `angle_deg` measured clockwise from 12 o'clock.
pub fn clock_point(center: Point, r: f64, angle_deg: f64) -> Point {
    let (s, c) = angle_deg.to_radians().sin_cos();
    (center.0 + r * s, center.1 - r * c)
}

/// Clockwise angle from 12 o'clock of `p` around `center`, in [0, 360).
pub fn clock_angle(center: Point, p: Point) -> f64 {
    let a = (p.0 - center.0).atan2(center.1 - p.1).to_degrees();
    let a = a.rem_euclid(360.0);
    if a >= 360.0 {
        0.0
    } else {
        a
    }
}

/// Angles (degrees) sampled every whole degree from `start` to `end`,
/// always including `end`. A full turn omits the duplicate closing angle.
fn arc_angles(start: f64, end: f64) -> Vec<f64> {
    let span = end - start;
    let steps = span.floor() as usize;
    let mut angles: Vec<f64> = (0..=steps).map(|k| start + k as f64).collect();
    if (span - steps as f64) > 1e-9 {
        angles.push(end);
    }
    if (span - 360.0).abs() < 1e-9 {
        angles.pop();
    }
    angles
}

/// Polygon approximating a pie or donut wedge with a vertex at every degree
/// of arc. Angles are clockwise from 12 o'clock. For a solid wedge the
/// outer arc is closed through the center; for a donut the inner arc is
/// traversed in reverse.
pub fn wedge_polygon(
    center: Point,
    r_inner: f64,
    r_outer: f64,
    start_angle: f64,
    end_angle: f64,
) -> Result<Vec<Point>, GeometryError> {
    let span = end_angle - start_angle;
    if !(span > 0.0 && span <= 360.0 + 1e-9) {
        return Err(GeometryError::AngleSpan(span));
    }
    if !(r_inner >= 0.0 && r_outer > r_inner) {
        return Err(GeometryError::Radii {
            inner: r_inner,
            outer: r_outer,
        });
    }
    let angles = arc_angles(start_angle, end_angle.min(start_angle + 360.0));
    let mut poly: Vec<Point> = angles
        .iter()
        .map(|&a| clock_point(center, r_outer, a))
        .collect();
    if r_inner == 0.0 {
        poly.push(center);
    } else {
        poly.extend(angles.iter().rev().map(|&a| clock_point(center, r_inner, a)));
    }
    Ok(poly)
}

/// Analytic area of an annular sector.
pub fn sector_area(r_inner: f64, r_outer: f64, span_deg: f64) -> f64 {
    0.5 * (r_outer * r_outer - r_inner * r_inner) * span_deg.to_radians()
}

/// One annotation per consecutive tick pair for a polyline sorted by x.
///
/// The box is the tight bounds of the polyline restricted to the tick
/// interval (including interpolated crossings at the interval ends),
/// widened vertically by half the stroke width on each side. The mask is
/// the same sub-path thickened vertically by the stroke width.
pub fn line_interval_boxes(
    points: &[Point],
    ticks: &[f64],
    stroke_width: f64,
) -> Result<Vec<(Rect, Vec<Point>)>, GeometryError> {
    if ticks.len() < 2 {
        return Err(GeometryError::TooFewTicks(ticks.len()));
    }
    if points.len() < 2 {
        return Err(GeometryError::TooFewPoints(points.len()));
    }
    let half = stroke_width / 2.0;
    let mut out = Vec::with_capacity(ticks.len() - 1);
    for pair in ticks.windows(2) {
        let (lo, hi) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
        let mut path = vec![(lo, interpolate_y(points, lo))];
        path.extend(points.iter().copied().filter(|p| p.0 > lo && p.0 < hi));
        path.push((hi, interpolate_y(points, hi)));

        let mut mask: Vec<Point> = path.iter().map(|&(x, y)| (x, y - half)).collect();
        mask.extend(path.iter().rev().map(|&(x, y)| (x, y + half)));
        let rect = Rect::bounding(mask.iter().copied()).expect("non-empty mask");
        out.push((rect, mask));
    }
    Ok(out)
}

/// Linear interpolation of a polyline sorted by x; clamps outside its span.
pub fn interpolate_y(points: &[Point], x: f64) -> f64 {
    if x <= points[0].0 {
        return points[0].1;
    }
    for w in points.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x <= x1 {
            if x1 == x0 {
                return y1;
            }
            return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
        }
    }
    points[points.len() - 1].1
}

/// Vertical sampling step for [`mask_iou`], in pixels.
pub const MASK_ROW_STEP: f64 = 0.25;

/// Horizontal spans of a polygon (even–odd rule) on sampled scanlines.
///
/// Row `k` samples `y = (k + 0.5) * MASK_ROW_STEP`; coverage along each row
/// is exact. Used to compare masks without polygon clipping.
#[derive(Debug, Clone)]
pub struct ScanMask {
    first_row: i64,
    rows: Vec<Vec<(f64, f64)>>,
    area: f64,
}

impl ScanMask {
    pub fn new(poly: &[Point]) -> ScanMask {
        let Some(bounds) = Rect::bounding(poly.iter().copied()) else {
            return ScanMask {
                first_row: 0,
                rows: Vec::new(),
                area: 0.0,
            };
        };
        let first_row = (bounds.y0 / MASK_ROW_STEP - 0.5).ceil() as i64;
        let last_row = (bounds.y1 / MASK_ROW_STEP - 0.5).floor() as i64;
        let mut rows = Vec::new();
        let mut area = 0.0;
        let mut xs = Vec::new();
        for k in first_row..=last_row {
            let y = (k as f64 + 0.5) * MASK_ROW_STEP;
            xs.clear();
            for i in 0..poly.len() {
                let (x0, y0) = poly[i];
                let (x1, y1) = poly[(i + 1) % poly.len()];
                if (y0 <= y && y < y1) || (y1 <= y && y < y0) {
                    xs.push(x0 + (y - y0) * (x1 - x0) / (y1 - y0));
                }
            }
            xs.sort_by(f64::total_cmp);
            let spans: Vec<(f64, f64)> = xs
                .chunks_exact(2)
                .map(|c| (c[0], c[1]))
                .filter(|s| s.1 > s.0)
                .collect();
            area += spans.iter().map(|s| s.1 - s.0).sum::<f64>() * MASK_ROW_STEP;
            rows.push(spans);
        }
        ScanMask {
            first_row,
            rows,
            area,
        }
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn intersection_area(&self, other: &ScanMask) -> f64 {
        let lo = self.first_row.max(other.first_row);
        let hi = (self.first_row + self.rows.len() as i64).min(other.first_row + other.rows.len() as i64);
        let mut total = 0.0;
        for k in lo..hi {
            let a = &self.rows[(k - self.first_row) as usize];
            let b = &other.rows[(k - other.first_row) as usize];
            let (mut i, mut j) = (0, 0);
            while i < a.len() && j < b.len() {
                let l = a[i].0.max(b[j].0);
                let r = a[i].1.min(b[j].1);
                if r > l {
                    total += r - l;
                }
                if a[i].1 < b[j].1 {
                    i += 1;
                } else {
                    j += 1;
                }
            }
        }
        total * MASK_ROW_STEP
    }

    pub fn iou(&self, other: &ScanMask) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area + other.area - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

/// Mask IoU of two polygons on sampled scanlines; identical polygons
/// with any covered row give exactly 1.
pub fn mask_iou(a: &[Point], b: &[Point]) -> f64 {
    ScanMask::new(a).iou(&ScanMask::new(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent area oracle: a fan of isosceles triangles about the
    /// center has area Σ ½ r² sin δ over its arc steps.
    fn fan_area(r: f64, span_deg: f64) -> f64 {
        let full = span_deg.floor();
        let rest = span_deg - full;
        0.5 * r * r * (full * 1f64.to_radians().sin() + rest.to_radians().sin())
    }

    #[test]
    fn full_circle_has_361_vertices() {
        let poly = wedge_polygon((0.0, 0.0), 0.0, 50.0, 0.0, 360.0).unwrap();
        assert_eq!(poly.len(), 361);
        assert_eq!(*poly.last().unwrap(), (0.0, 0.0));
    }

    #[test]
    fn quarter_wedge_area_ratio() {
        let poly = wedge_polygon((200.0, 200.0), 0.0, 100.0, 0.0, 90.0).unwrap();
        assert_eq!(poly.len(), 92);
        let ratio = polygon_area(&poly) / sector_area(0.0, 100.0, 90.0);
        let expected = 1f64.to_radians().sin() / 1f64.to_radians();
        assert!((ratio - expected).abs() < 1e-12, "{ratio} vs {expected}");
        assert!((ratio - 0.9999492).abs() < 1e-7);
        assert!((polygon_area(&poly) - fan_area(100.0, 90.0)).abs() < 1e-6);
    }

    #[test]
    fn donut_wedge_ratio_matches_fan_factor() {
        let poly = wedge_polygon((0.0, 0.0), 50.0, 100.0, 10.0, 130.5).unwrap();
        let ratio = polygon_area(&poly) / sector_area(50.0, 100.0, 120.5);
        let oracle = (fan_area(100.0, 120.5) - fan_area(50.0, 120.5)) / sector_area(50.0, 100.0, 120.5);
        assert!((ratio - oracle).abs() < 1e-12);
        assert!(ratio >= 1.0 - 1e-4 && ratio <= 1.0);
    }

    #[test]
    fn wedge_winds_clockwise_from_noon() {
        let poly = wedge_polygon((0.0, 0.0), 0.0, 10.0, 0.0, 90.0).unwrap();
        let (x, y) = poly[0];
        assert!(x.abs() < 1e-12 && (y + 10.0).abs() < 1e-12);
        let (x, y) = poly[90];
        assert!((x - 10.0).abs() < 1e-12 && y.abs() < 1e-12);
    }

    #[test]
    fn wedge_rejects_bad_input() {
        assert!(matches!(
            wedge_polygon((0.0, 0.0), 0.0, 1.0, 10.0, 10.0),
            Err(GeometryError::AngleSpan(_))
        ));
        assert!(matches!(
            wedge_polygon((0.0, 0.0), 2.0, 1.0, 0.0, 10.0),
            Err(GeometryError::Radii { .. })
        ));
    }

    #[test]
    fn interval_count_is_ticks_minus_one() {
        let pts: Vec<Point> = (0..6).map(|i| (i as f64 * 10.0, (i * i) as f64)).collect();
        let ticks: Vec<f64> = pts.iter().map(|p| p.0).collect();
        assert_eq!(line_interval_boxes(&pts, &ticks, 2.0).unwrap().len(), 5);
        assert!(matches!(
            line_interval_boxes(&pts, &ticks[..1], 2.0),
            Err(GeometryError::TooFewTicks(1))
        ));
    }

    #[test]
    fn flat_series_boxes_have_stroke_height() {
        let pts: Vec<Point> = (0..5).map(|i| (i as f64 * 20.0, 40.0)).collect();
        let ticks = [0.0, 20.0, 40.0, 60.0, 80.0];
        for (rect, _) in line_interval_boxes(&pts, &ticks, 3.0).unwrap() {
            assert!((rect.height() - 3.0).abs() < 1e-12);
            assert!((rect.center().1 - 40.0).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_series_box_spans_crossings() {
        // Ticks fall between data points so crossings are interpolated.
        let pts: Vec<Point> = vec![(0.0, 100.0), (30.0, 70.0), (55.0, 20.0), (100.0, 5.0)];
        let ticks = [5.0, 40.0, 90.0];
        let w = 2.0;
        let boxes = line_interval_boxes(&pts, &ticks, w).unwrap();
        for ((rect, _), pair) in boxes.iter().zip(ticks.windows(2)) {
            // Brute-force oracle: dense sampling of the polyline.
            let n = 20_000;
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for k in 0..=n {
                let x = pair[0] + (pair[1] - pair[0]) * k as f64 / n as f64;
                let y = interpolate_y(&pts, x);
                lo = lo.min(y);
                hi = hi.max(y);
            }
            assert!((rect.y0 - (lo - w / 2.0)).abs() < 1e-9);
            assert!((rect.y1 - (hi + w / 2.0)).abs() < 1e-9);
            assert_eq!((rect.x0, rect.x1), (pair[0], pair[1]));
        }
    }

    #[test]
    fn box_iou_basics() {
        let a = Rect::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(a.iou(&a), 1.0);
        let b = Rect::new(5.0, 0.0, 15.0, 10.0);
        assert!((a.iou(&b) - 50.0 / 150.0).abs() < 1e-12);
        let z = Rect::new(3.0, 3.0, 3.0, 3.0);
        assert_eq!(z.iou(&z), 1.0);
        assert_eq!(z.iou(&a), 0.0);
    }

    #[test]
    fn scan_mask_matches_exact_area_for_convex_shapes() {
        let sq = vec![(0.3, 0.1), (10.3, 0.1), (10.3, 10.1), (0.3, 10.1)];
        let tri = vec![(5.0, 0.0), (15.0, 0.0), (5.0, 10.0)];
        assert!((ScanMask::new(&sq).area() - 100.0).abs() < 0.5);
        // Exact intersection of the square and triangle, by hand: the
        // triangle x + y <= 15 inside [5, 10.3] x [0.1, 10].
        let exact = {
            // Integrate width of {5 <= x <= min(10.3, 15 - y)} over y in [0.1, 10].
            let n = 100_000;
            let mut s = 0.0;
            for k in 0..n {
                let y = 0.1 + (10.0 - 0.1) * (k as f64 + 0.5) / n as f64;
                let right = (15.0 - y).min(10.3);
                s += (right - 5.0).max(0.0);
            }
            s * (10.0 - 0.1) / n as f64
        };
        let got = ScanMask::new(&sq).intersection_area(&ScanMask::new(&tri));
        // At most one sampled row of error along the clipped bottom edge.
        assert!((got - exact).abs() < MASK_ROW_STEP * 5.3, "{got} vs {exact}");
        assert_eq!(mask_iou(&tri, &tri), 1.0);
    }

    #[test]
    fn clock_angles() {
        let c = (0.0, 0.0);
        assert!((clock_angle(c, (0.0, -1.0)) - 0.0).abs() < 1e-12);
        assert!((clock_angle(c, (1.0, 0.0)) - 90.0).abs() < 1e-12);
        assert!((clock_angle(c, (0.0, 1.0)) - 180.0).abs() < 1e-12);
        assert!((clock_angle(c, (-1.0, 0.0)) - 270.0).abs() < 1e-12);
    }
}
