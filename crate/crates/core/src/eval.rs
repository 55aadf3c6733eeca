//! Detection and question-answering scores for external predictions, and a
//! character-noise model for simulated OCR.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::encode::{attach_text, decode_answer, detect_axis_swap_elements, order_elements, Element};
use crate::qa::{AnswerType, QaRecord, QuestionType};
use crate::render::geometry::ScanMask;
use crate::render::{AnnotationSet, ElementClass, Point, Rect};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("prediction for unknown question {0:?}")]
    UnknownQuestion(String),
    #[error("prediction for unknown chart {0:?}")]
    UnknownChart(String),
    #[error("invalid prediction: {0}")]
    InvalidPrediction(String),
    #[error("no charts to score")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub chart_id: String,
    pub element_class: ElementClass,
    #[serde(rename = "box")]
    pub bbox: Rect,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        with = "crate::render::annotate::flat_polygon"
    )]
    pub mask: Option<Vec<Point>>,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl Prediction {
    /// Ground truth replayed as a confident prediction.
    pub fn from_truth(chart_id: &str, a: &crate::render::Annotation) -> Prediction {
        Prediction {
            chart_id: chart_id.to_string(),
            element_class: a.element_class,
            bbox: a.bbox,
            mask: a.mask.clone(),
            confidence: 1.0,
            text: a.text.clone(),
        }
    }

    /// Rejects non-finite scores; clips geometry to the canvas with a warning.
    pub fn sanitize(&mut self, canvas: (f64, f64)) -> Result<(), EvalError> {
        if !self.confidence.is_finite() {
            return Err(EvalError::InvalidPrediction(format!("non-finite confidence on {}", self.chart_id)));
        }
        let c = Rect::new(0.0, 0.0, canvas.0, canvas.1);
        if !c.contains_rect(&self.bbox, 1e-6) {
            warn!("{}: {} box outside canvas, clipped", self.chart_id, self.element_class);
            let b = self.bbox;
            self.bbox = Rect::new(
                b.x0.clamp(0.0, canvas.0),
                b.y0.clamp(0.0, canvas.1),
                b.x1.clamp(0.0, canvas.0),
                b.y1.clamp(0.0, canvas.1),
            );
        }
        Ok(())
    }
}

/// Overlap measure between a prediction and a truth element: mask IoU when
/// both carry a mask of a masked class, box IoU otherwise.
struct Shape {
    bbox: Rect,
    mask: Option<ScanMask>,
}

impl Shape {
    fn new(class: ElementClass, bbox: Rect, mask: Option<&[Point]>) -> Shape {
        let mask = if class.has_mask() {
            mask.map(ScanMask::new).filter(|m| m.area() > 0.0)
        } else {
            None
        };
        Shape { bbox, mask }
    }

    fn iou(&self, other: &Shape) -> f64 {
        match (&self.mask, &other.mask) {
            (Some(a), Some(b)) => a.iou(b),
            _ => self.bbox.iou(&other.bbox),
        }
    }
}

/// Prediction index → matched truth index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Assignment {
    pub matches: Vec<Option<usize>>,
}

impl Assignment {
    pub fn matched(&self) -> usize {
        self.matches.iter().flatten().count()
    }
}

/// Indices by descending confidence; equal confidences keep input order.
pub fn confidence_order(preds: &[Prediction]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].confidence.total_cmp(&preds[a].confidence).then(a.cmp(&b)));
    order
}

/// Greedy matching: predictions in descending confidence each take the
/// unassigned same-class truth element of highest IoU (lowest index on
/// ties), provided that IoU exceeds the threshold.
pub fn match_detections(preds: &[Prediction], truth: &AnnotationSet, iou_threshold: f64) -> Assignment {
    let truth_shapes: Vec<Shape> = truth
        .elements
        .iter()
        .map(|a| Shape::new(a.element_class, a.bbox, a.mask.as_deref()))
        .collect();
    let mut taken = vec![false; truth.elements.len()];
    let mut matches = vec![None; preds.len()];
    for p in confidence_order(preds) {
        let pred = &preds[p];
        let shape = Shape::new(pred.element_class, pred.bbox, pred.mask.as_deref());
        let mut best: Option<(f64, usize)> = None;
        for (t, a) in truth.elements.iter().enumerate() {
            if taken[t] || a.element_class != pred.element_class {
                continue;
            }
            // Cheap reject before mask work.
            if pred.bbox.intersection_area(&a.bbox) <= 0.0 && !(pred.bbox.area() == 0.0 && pred.bbox == a.bbox) {
                continue;
            }
            let iou = shape.iou(&truth_shapes[t]);
            if best.is_none_or(|(b, _)| iou > b) {
                best = Some((iou, t));
            }
        }
        if let Some((iou, t)) = best {
            if iou > iou_threshold {
                taken[t] = true;
                matches[p] = Some(t);
            }
        }
    }
    Assignment { matches }
}

/// Per-class tallies for one chart.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub predicted: usize,
    pub truth: usize,
    pub matched: usize,
}

pub type ChartCounts = BTreeMap<ElementClass, ClassCounts>;

pub fn chart_counts(preds: &[Prediction], truth: &AnnotationSet, assignment: &Assignment) -> ChartCounts {
    let mut out = ChartCounts::new();
    for a in &truth.elements {
        out.entry(a.element_class).or_default().truth += 1;
    }
    for (p, m) in preds.iter().zip(&assignment.matches) {
        let c = out.entry(p.element_class).or_default();
        c.predicted += 1;
        if m.is_some() {
            c.matched += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub charts_with_predictions: usize,
    pub charts_with_truth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub charts: usize,
    pub classes: BTreeMap<ElementClass, ClassScore>,
    /// Unweighted mean over classes with a defined precision.
    pub mean_precision: f64,
    /// Unweighted mean over classes with a defined recall.
    pub mean_recall: f64,
    pub notes: Vec<String>,
}

/// Precision and recall per class, each averaged over the charts where it
/// is defined: precision over charts with predictions of the class, recall
/// over charts with truth of the class. A chart with truth but no
/// predictions adds a recall of 0 and no precision.
pub fn precision_recall(charts: &[ChartCounts]) -> Result<DetectionReport, EvalError> {
    if charts.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut classes = BTreeMap::new();
    let mut notes = Vec::new();
    for class in ElementClass::ALL {
        let (mut ps, mut np, mut rs, mut nr) = (0.0, 0, 0.0, 0);
        for c in charts {
            let Some(k) = c.get(&class) else { continue };
            if k.predicted > 0 {
                ps += k.matched as f64 / k.predicted as f64;
                np += 1;
            }
            if k.truth > 0 {
                rs += k.matched as f64 / k.truth as f64;
                nr += 1;
            }
        }
        if np == 0 && nr == 0 {
            notes.push(format!("{class}: absent from corpus, omitted"));
            continue;
        }
        classes.insert(
            class,
            ClassScore {
                precision: (np > 0).then(|| ps / np as f64),
                recall: (nr > 0).then(|| rs / nr as f64),
                charts_with_predictions: np,
                charts_with_truth: nr,
            },
        );
    }
    let mean = |f: fn(&ClassScore) -> Option<f64>| {
        let v: Vec<f64> = classes.values().filter_map(f).collect();
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    Ok(DetectionReport {
        charts: charts.len(),
        mean_precision: mean(|s| s.precision),
        mean_recall: mean(|s| s.recall),
        classes,
        notes,
    })
}

/// Scores predictions grouped by chart against their truth sets.
pub fn evaluate_detection(
    preds: &[Prediction],
    truth: &BTreeMap<String, AnnotationSet>,
    iou_threshold: f64,
) -> Result<DetectionReport, EvalError> {
    let by_chart = group_predictions(preds, truth)?;
    let counts: Vec<ChartCounts> = truth
        .iter()
        .map(|(id, set)| {
            let p: Vec<Prediction> = by_chart.get(id).cloned().unwrap_or_default();
            let a = match_detections(&p, set, iou_threshold);
            chart_counts(&p, set, &a)
        })
        .collect();
    precision_recall(&counts)
}

fn group_predictions(
    preds: &[Prediction],
    truth: &BTreeMap<String, AnnotationSet>,
) -> Result<HashMap<String, Vec<Prediction>>, EvalError> {
    let mut by_chart: HashMap<String, Vec<Prediction>> = HashMap::new();
    for p in preds {
        let set = truth.get(&p.chart_id).ok_or_else(|| EvalError::UnknownChart(p.chart_id.clone()))?;
        let mut p = p.clone();
        p.sanitize(set.canvas)?;
        by_chart.entry(p.chart_id.clone()).or_default().push(p);
    }
    Ok(by_chart)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub correct: usize,
    pub total: usize,
}

impl Cell {
    pub fn accuracy(&self) -> Option<f64> {
        (self.total > 0).then(|| self.correct as f64 / self.total as f64)
    }

    fn add(&mut self, ok: bool) {
        self.total += 1;
        self.correct += ok as usize;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaReport {
    pub overall: Cell,
    /// Keyed "question_type/answer_type".
    pub cells: BTreeMap<String, Cell>,
    pub by_question_type: BTreeMap<QuestionType, Cell>,
    pub by_answer_type: BTreeMap<AnswerType, Cell>,
    pub unanswered: usize,
}

impl QaReport {
    pub fn accuracy(&self) -> f64 {
        self.overall.accuracy().unwrap_or(0.0)
    }
}

fn type_id<T: Serialize>(t: &T) -> String {
    serde_json::to_value(t)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// Exact-match accuracy: a prediction is correct when it equals any of the
/// question's answers. Questions without a prediction count as wrong.
pub fn qa_accuracy(predicted: &BTreeMap<String, String>, truth: &[QaRecord]) -> Result<QaReport, EvalError> {
    let known: HashMap<&str, &QaRecord> = truth.iter().map(|r| (r.question_id.as_str(), r)).collect();
    if let Some(q) = predicted.keys().find(|q| !known.contains_key(q.as_str())) {
        return Err(EvalError::UnknownQuestion(q.clone()));
    }
    let mut report = QaReport {
        overall: Cell::default(),
        cells: BTreeMap::new(),
        by_question_type: BTreeMap::new(),
        by_answer_type: BTreeMap::new(),
        unanswered: 0,
    };
    for r in truth {
        let ok = match predicted.get(&r.question_id) {
            Some(p) => r.pair.answers.iter().any(|a| a == p),
            None => {
                report.unanswered += 1;
                false
            }
        };
        let qt = r.pair.question_type;
        let at = r.pair.answer_type;
        report.overall.add(ok);
        report.cells.entry(format!("{}/{}", type_id(&qt), type_id(&at))).or_default().add(ok);
        report.by_question_type.entry(qt).or_default().add(ok);
        report.by_answer_type.entry(at).or_default().add(ok);
    }
    Ok(report)
}

const OCR_ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

fn random_char<R: Rng + ?Sized>(rng: &mut R, not: Option<char>) -> char {
    loop {
        let c = OCR_ALPHABET[rng.random_range(0..OCR_ALPHABET.len())] as char;
        if Some(c) != not {
            return c;
        }
    }
}

/// Perturbs one string; returns it with the number of perturbed characters.
pub fn perturb<R: Rng + ?Sized>(s: &str, rng: &mut R, rate: f64) -> (String, usize) {
    let mut out = String::with_capacity(s.len() + 4);
    let mut hits = 0;
    for c in s.chars() {
        if rng.random_bool(rate) {
            hits += 1;
            match rng.random_range(0..3) {
                0 => out.push(random_char(rng, Some(c))),
                1 => {}
                _ => {
                    out.push(random_char(rng, None));
                    out.push(c);
                }
            }
        } else {
            out.push(c);
        }
    }
    (out, hits)
}

/// Character-level OCR noise: each character is, with probability `rate`,
/// substituted, deleted, or preceded by an inserted character, chosen
/// uniformly.
pub fn simulate_ocr<R: Rng + ?Sized>(strings: &[String], rng: &mut R, rate: f64) -> Vec<String> {
    let rate = rate.clamp(0.0, 1.0);
    strings.iter().map(|s| perturb(s, rng, rate).0).collect()
}

/// Seed for per-chart randomness, independent of processing order.
pub fn chart_seed(seed: u64, chart_id: &str) -> u64 {
    let d = Sha256::digest(format!("{seed}:{chart_id}").as_bytes());
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TextSource {
    /// Strings of the overlapping ground-truth elements.
    Oracle,
    /// Oracle strings passed through [`simulate_ocr`] at this rate.
    Ocr { rate: f64, seed: u64 },
}

/// Answers each question from a predicted chart parse: text is attached to
/// predicted boxes, elements are ordered from predicted geometry, and the
/// stored answer vector's highest slot is decoded through that order. A
/// perfect parse therefore reproduces every answer.
pub fn end_to_end_answers(
    preds: &[Prediction],
    truth: &BTreeMap<String, AnnotationSet>,
    records: &[QaRecord],
    source: TextSource,
) -> Result<BTreeMap<String, String>, EvalError> {
    let by_chart = group_predictions(preds, truth)?;
    let mut by_question: BTreeMap<&str, Vec<&QaRecord>> = BTreeMap::new();
    for r in records {
        by_question.entry(r.pair.chart_id.as_str()).or_default().push(r);
    }
    let mut out = BTreeMap::new();
    for (chart_id, qs) in by_question {
        let set = truth.get(chart_id).ok_or_else(|| EvalError::UnknownChart(chart_id.to_string()))?;
        let empty = Vec::new();
        let chart_preds = by_chart.get(chart_id).unwrap_or(&empty);
        let boxes: Vec<(ElementClass, Rect)> = chart_preds.iter().map(|p| (p.element_class, p.bbox)).collect();
        let mut texts = attach_text(&boxes, set);
        if let TextSource::Ocr { rate, seed } = source {
            let mut rng = ChaCha8Rng::seed_from_u64(chart_seed(seed, chart_id));
            for t in texts.iter_mut().flatten() {
                *t = perturb(t, &mut rng, rate.clamp(0.0, 1.0)).0;
            }
        }
        let elements: Vec<Element> = boxes
            .iter()
            .zip(texts)
            .map(|(&(class, bbox), text)| Element { class, bbox, text })
            .collect();
        let swap = detect_axis_swap_elements(&elements);
        let ordered = order_elements(&elements, swap);
        for r in qs {
            let scores: Vec<f64> = r.answer_vector.iter().map(|&v| v as f64).collect();
            if let Ok(a) = decode_answer(&scores, &ordered, set.chart_type) {
                out.insert(r.question_id.clone(), a);
            }
        }
    }
    Ok(out)
}

/// Drops exactly `round(fraction · n)` predictions chosen uniformly.
pub fn drop_predictions<R: Rng + ?Sized>(preds: &[Prediction], fraction: f64, rng: &mut R) -> Vec<Prediction> {
    let n = preds.len();
    let k = ((fraction.clamp(0.0, 1.0) * n as f64).round() as usize).min(n);
    let mut drop = vec![false; n];
    for i in rand::seq::index::sample(rng, n, k) {
        drop[i] = true;
    }
    preds
        .iter()
        .zip(drop)
        .filter(|(_, d)| !d)
        .map(|(p, _)| p.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection: Option<DetectionReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qa: Option<QaReport>,
}

fn pct(v: Option<f64>) -> String {
    v.map_or("-".to_string(), |x| format!("{:.2}", 100.0 * x))
}

impl EvalReport {
    /// Plain-text tables: per-class precision/recall and QA accuracy by
    /// question and answer type.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(d) = &self.detection {
            let _ = writeln!(s, "Detection over {} charts", d.charts);
            let _ = writeln!(s, "{:<20} {:>9} {:>9}", "class", "precision", "recall");
            for (class, score) in &d.classes {
                let _ = writeln!(s, "{:<20} {:>9} {:>9}", class.id(), pct(score.precision), pct(score.recall));
            }
            let _ = writeln!(s, "{:<20} {:>9} {:>9}", "mean", pct(Some(d.mean_precision)), pct(Some(d.mean_recall)));
            for n in &d.notes {
                let _ = writeln!(s, "note: {n}");
            }
        }
        if let Some(q) = &self.qa {
            if !s.is_empty() {
                s.push('\n');
            }
            let ats = [AnswerType::ChartVocabulary, AnswerType::CommonVocabulary, AnswerType::ChartType];
            let _ = write!(s, "{:<12}", "QA accuracy");
            for at in ats {
                let _ = write!(s, " {:>18}", type_id(&at));
            }
            let _ = writeln!(s, " {:>10}", "all");
            for qt in [QuestionType::Structural, QuestionType::Relational] {
                let _ = write!(s, "{:<12}", type_id(&qt));
                for at in ats {
                    let cell = q.cells.get(&format!("{}/{}", type_id(&qt), type_id(&at)));
                    let _ = write!(s, " {:>18}", pct(cell.and_then(Cell::accuracy)));
                }
                let _ = writeln!(s, " {:>10}", pct(q.by_question_type.get(&qt).and_then(Cell::accuracy)));
            }
            let _ = write!(s, "{:<12}", "all");
            for at in ats {
                let _ = write!(s, " {:>18}", pct(q.by_answer_type.get(&at).and_then(Cell::accuracy)));
            }
            let _ = writeln!(s, " {:>10}", pct(q.overall.accuracy()));
            let _ = writeln!(s, "questions: {}  unanswered: {}", q.overall.total, q.unanswered);
        }
        s
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::render::annotate::{Annotation, ANNOTATION_SCHEMA_VERSION};
    use crate::synth::ChartType;

    pub(crate) fn truth_set(items: &[(ElementClass, Rect)]) -> AnnotationSet {
        AnnotationSet {
            schema_version: ANNOTATION_SCHEMA_VERSION,
            chart_id: "c".into(),
            chart_type: ChartType::GroupedBarV,
            canvas: (200.0, 200.0),
            elements: items
                .iter()
                .enumerate()
                .map(|(i, &(class, bbox))| Annotation {
                    id: format!("e{i}"),
                    element_class: class,
                    bbox,
                    mask: None,
                    text: None,
                    order_hint: i,
                    series: None,
                    index: None,
                })
                .collect(),
        }
    }

    pub(crate) fn pred(class: ElementClass, bbox: Rect, confidence: f64) -> Prediction {
        Prediction {
            chart_id: "c".into(),
            element_class: class,
            bbox,
            mask: None,
            confidence,
            text: None,
        }
    }

    #[test]
    fn exact_copies_match_fully() {
        let items = [
            (ElementClass::BarV, Rect::new(10.0, 10.0, 20.0, 100.0)),
            (ElementClass::BarV, Rect::new(30.0, 50.0, 40.0, 100.0)),
            (ElementClass::ChartTitle, Rect::new(0.0, 0.0, 80.0, 8.0)),
        ];
        let t = truth_set(&items);
        let preds: Vec<Prediction> = items.iter().map(|&(c, b)| pred(c, b, 1.0)).collect();
        let a = match_detections(&preds, &t, 0.5);
        assert_eq!(a.matches, vec![Some(0), Some(1), Some(2)]);
    }

    #[test]
    fn below_threshold_is_unmatched() {
        let t = truth_set(&[(ElementClass::BarV, Rect::new(0.0, 0.0, 10.0, 10.0))]);
        let p = pred(ElementClass::BarV, Rect::new(0.0, 0.0, 4.0, 10.0), 0.9);
        assert!((p.bbox.iou(&t.elements[0].bbox) - 0.4).abs() < 1e-12);
        assert_eq!(match_detections(&[p], &t, 0.5).matches, vec![None]);
        // Exactly at the threshold is not enough.
        let half = pred(ElementClass::BarV, Rect::new(0.0, 0.0, 5.0, 10.0), 0.9);
        assert_eq!(match_detections(&[half], &t, 0.5).matches, vec![None]);
    }

    #[test]
    fn classes_never_cross() {
        let t = truth_set(&[(ElementClass::BarV, Rect::new(0.0, 0.0, 10.0, 10.0))]);
        let p = pred(ElementClass::BarH, Rect::new(0.0, 0.0, 10.0, 10.0), 0.9);
        assert_eq!(match_detections(&[p], &t, 0.5).matches, vec![None]);
    }

    #[test]
    fn higher_confidence_claims_first() {
        let t = truth_set(&[
            (ElementClass::BarV, Rect::new(0.0, 0.0, 10.0, 10.0)),
            (ElementClass::BarV, Rect::new(0.0, 20.0, 10.0, 30.0)),
        ]);
        // Both predictions prefer truth 0; the confident one wins it, the
        // other has no acceptable alternative.
        let p = vec![
            pred(ElementClass::BarV, Rect::new(0.0, 0.0, 10.0, 9.0), 0.3),
            pred(ElementClass::BarV, Rect::new(0.0, 1.0, 10.0, 10.0), 0.8),
            pred(ElementClass::BarV, Rect::new(0.0, 21.0, 10.0, 31.0), 0.5),
        ];
        assert_eq!(match_detections(&p, &t, 0.5).matches, vec![None, Some(0), Some(1)]);
    }

    #[test]
    fn missing_predictions_give_zero_recall_and_no_precision() {
        let mut a = ChartCounts::new();
        a.insert(ElementClass::BarV, ClassCounts { predicted: 2, truth: 2, matched: 2 });
        let mut b = ChartCounts::new();
        b.insert(ElementClass::BarV, ClassCounts { predicted: 0, truth: 4, matched: 0 });
        let r = precision_recall(&[a, b]).unwrap();
        let s = &r.classes[&ElementClass::BarV];
        assert_eq!(s.precision, Some(1.0));
        assert_eq!(s.recall, Some(0.5));
        assert_eq!(s.charts_with_predictions, 1);
        assert!(r.notes.iter().any(|n| n.starts_with("wedge")));
        assert_eq!(precision_recall(&[]), Err(EvalError::Empty));
    }

    #[test]
    fn adding_a_correct_prediction_never_lowers_recall() {
        let t = truth_set(&[
            (ElementClass::BarV, Rect::new(0.0, 0.0, 10.0, 10.0)),
            (ElementClass::BarV, Rect::new(20.0, 0.0, 30.0, 10.0)),
        ]);
        let mut p = vec![pred(ElementClass::BarV, Rect::new(1.0, 0.0, 11.0, 10.0), 0.5)];
        let before = chart_counts(&p, &t, &match_detections(&p, &t, 0.5));
        p.push(pred(ElementClass::BarV, Rect::new(20.0, 0.0, 30.0, 10.0), 1.0));
        let after = chart_counts(&p, &t, &match_detections(&p, &t, 0.5));
        assert!(after[&ElementClass::BarV].matched >= before[&ElementClass::BarV].matched);
    }

    fn record(id: &str, answers: &[&str], qt: QuestionType, at: AnswerType) -> QaRecord {
        QaRecord {
            question_id: id.into(),
            pair: crate::qa::QAPair {
                chart_id: "c".into(),
                template_id: "t".into(),
                question: "q".into(),
                question_type: qt,
                answer_type: at,
                answers: answers.iter().map(|s| s.to_string()).collect(),
                semantic_form: crate::oracle::SemanticForm::ChartType,
            },
            encoded_question: "q".into(),
            answer_vector: vec![0; crate::encode::ANSWER_DIM],
        }
    }

    #[test]
    fn any_listed_answer_counts() {
        let truth = vec![
            record("q1", &["2005", "2007"], QuestionType::Relational, AnswerType::ChartVocabulary),
            record("q2", &["Peru"], QuestionType::Relational, AnswerType::ChartVocabulary),
            record("q3", &["Yes"], QuestionType::Structural, AnswerType::CommonVocabulary),
        ];
        let mut p = BTreeMap::new();
        p.insert("q1".to_string(), "2007".to_string());
        p.insert("q2".to_string(), "Perú".to_string());
        let r = qa_accuracy(&p, &truth).unwrap();
        assert_eq!(r.overall, Cell { correct: 1, total: 3 });
        assert_eq!(r.unanswered, 1);
        assert_eq!(r.cells["relational/chart_vocabulary"], Cell { correct: 1, total: 2 });
        let sum: usize = r.cells.values().map(|c| c.total).sum();
        assert_eq!(sum, r.overall.total);
        p.insert("q9".to_string(), "x".to_string());
        assert_eq!(qa_accuracy(&p, &truth), Err(EvalError::UnknownQuestion("q9".into())));
        let text = EvalReport { mode: "qa".into(), detection: None, qa: Some(r) }.to_text();
        assert!(text.contains("relational"));
    }

    #[test]
    fn ocr_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = vec!["Antigua and Barbuda".to_string()];
        assert_eq!(simulate_ocr(&s, &mut rng, 0.0), s);
        let (_, hits) = perturb("ab", &mut rng, 1.0);
        assert_eq!(hits, 2);
        let text: String = (0..100_000).map(|i| (b'a' + (i % 26) as u8) as char).collect();
        let (_, hits) = perturb(&text, &mut rng, 0.05);
        let frac = hits as f64 / 100_000.0;
        assert!((frac - 0.05).abs() < 0.005, "{frac}");
        let mut a = ChaCha8Rng::seed_from_u64(8);
        let mut b = ChaCha8Rng::seed_from_u64(8);
        assert_eq!(simulate_ocr(&s, &mut a, 0.3), simulate_ocr(&s, &mut b, 0.3));
    }

    #[test]
    fn drop_is_exact() {
        let p: Vec<Prediction> = (0..10)
            .map(|i| pred(ElementClass::BarV, Rect::new(i as f64, 0.0, i as f64 + 1.0, 1.0), 1.0))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(drop_predictions(&p, 0.3, &mut rng).len(), 7);
        assert_eq!(drop_predictions(&p, 0.0, &mut rng).len(), 10);
    }

    #[test]
    fn prediction_json() {
        let mut p = pred(ElementClass::Wedge, Rect::new(0.0, 0.0, 1.0, 1.0), 0.5);
        p.mask = Some(vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)]);
        let v = serde_json::to_value(&p).unwrap();
        assert_eq!(v["box"], serde_json::json!([0.0, 0.0, 1.0, 1.0]));
        assert_eq!(v["mask"].as_array().unwrap().len(), 6);
        assert_eq!(serde_json::from_value::<Prediction>(v).unwrap(), p);
        let mut bad = p.clone();
        bad.confidence = f64::NAN;
        assert!(bad.sanitize((10.0, 10.0)).is_err());
        let mut out = pred(ElementClass::BarV, Rect::new(-5.0, 0.0, 20.0, 5.0), 0.5);
        out.sanitize((10.0, 10.0)).unwrap();
        assert_eq!(out.bbox, Rect::new(0.0, 0.0, 10.0, 5.0));
    }

    /// Reference outcome of the greedy rule by exhaustive search: among all
    /// one-to-one same-class assignments with IoU above the threshold, the
    /// one whose per-prediction IoU sequence (in confidence order) is
    /// lexicographically largest, ties going to lower truth indices.
    pub(crate) fn exhaustive_matches(preds: &[Prediction], truth: &AnnotationSet, thr: f64) -> Vec<Option<usize>> {
        let order = confidence_order(preds);
        let iou = |p: usize, t: usize| -> f64 {
            let pr = &preds[p];
            let a = &truth.elements[t];
            if pr.element_class != a.element_class {
                return -1.0;
            }
            Shape::new(pr.element_class, pr.bbox, pr.mask.as_deref())
                .iou(&Shape::new(a.element_class, a.bbox, a.mask.as_deref()))
        };
        type Key = Vec<(f64, i64)>;
        fn search(
            k: usize,
            order: &[usize],
            nt: usize,
            used: &mut Vec<bool>,
            cur: &mut Vec<Option<usize>>,
            best: &mut Option<(Key, Vec<Option<usize>>)>,
            iou: &dyn Fn(usize, usize) -> f64,
            thr: f64,
        ) {
            if k == order.len() {
                let key: Key = order
                    .iter()
                    .map(|&p| match cur[p] {
                        Some(t) => (iou(p, t), -(t as i64)),
                        None => (-1.0, 0),
                    })
                    .collect();
                let better = match best {
                    None => true,
                    Some((b, _)) => key.partial_cmp(b) == Some(std::cmp::Ordering::Greater),
                };
                if better {
                    *best = Some((key, cur.clone()));
                }
                return;
            }
            let p = order[k];
            search(k + 1, order, nt, used, cur, best, iou, thr);
            for t in 0..nt {
                if !used[t] && iou(p, t) > thr {
                    used[t] = true;
                    cur[p] = Some(t);
                    search(k + 1, order, nt, used, cur, best, iou, thr);
                    cur[p] = None;
                    used[t] = false;
                }
            }
        }
        let mut best = None;
        let mut used = vec![false; truth.elements.len()];
        let mut cur = vec![None; preds.len()];
        search(0, &order, truth.elements.len(), &mut used, &mut cur, &mut best, &iou, thr);
        best.expect("empty assignment always exists").1
    }

    #[test]
    fn greedy_agrees_with_exhaustive_on_three_by_two() {
        let t = truth_set(&[
            (ElementClass::BarV, Rect::new(0.0, 0.0, 10.0, 10.0)),
            (ElementClass::BarV, Rect::new(4.0, 0.0, 14.0, 10.0)),
        ]);
        let p = vec![
            pred(ElementClass::BarV, Rect::new(2.0, 0.0, 12.0, 10.0), 0.9),
            pred(ElementClass::BarV, Rect::new(0.0, 0.0, 10.0, 10.0), 0.7),
            pred(ElementClass::BarV, Rect::new(5.0, 0.0, 15.0, 10.0), 0.7),
        ];
        let greedy = match_detections(&p, &t, 0.5).matches;
        assert_eq!(greedy, exhaustive_matches(&p, &t, 0.5));
        // Hand-enumerated: p0 ties between both truths (IoU 2/3) and takes
        // truth 0; p1 then has nothing above 0.5; p2 takes truth 1.
        assert_eq!(greedy, vec![Some(0), None, Some(1)]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn rect() -> impl Strategy<Value = Rect> {
            (0u8..6, 0u8..6, 2u8..7, 2u8..7).prop_map(|(x, y, w, h)| {
                Rect::from_xywh(x as f64 * 2.0, y as f64 * 2.0, w as f64 * 2.0, h as f64 * 2.0)
            })
        }

        fn class() -> impl Strategy<Value = ElementClass> {
            prop_oneof![Just(ElementClass::BarV), Just(ElementClass::LegendLabel)]
        }

        proptest! {
            #[test]
            fn greedy_matches_exhaustive(
                truth in proptest::collection::vec((class(), rect()), 0..=5),
                preds in proptest::collection::vec((class(), rect(), 0u8..3), 0..=5),
            ) {
                let t = truth_set(&truth);
                let p: Vec<Prediction> = preds.iter().map(|&(c, r, s)| pred(c, r, s as f64 / 2.0)).collect();
                let greedy = match_detections(&p, &t, 0.5).matches;
                prop_assert_eq!(&greedy, &exhaustive_matches(&p, &t, 0.5));
                let mut seen = std::collections::HashSet::new();
                for (i, m) in greedy.iter().enumerate() {
                    if let Some(j) = m {
                        prop_assert!(seen.insert(*j));
                        prop_assert_eq!(p[i].element_class, t.elements[*j].element_class);
                    }
                }
            }

            #[test]
            fn input_order_is_irrelevant_with_distinct_confidences(
                truth in proptest::collection::vec(rect(), 1..=5),
                preds in proptest::collection::vec(rect(), 1..=5),
                seed in any::<u64>(),
            ) {
                use rand::seq::SliceRandom;
                let t = truth_set(&truth.iter().map(|&r| (ElementClass::BarV, r)).collect::<Vec<_>>());
                let p: Vec<Prediction> = preds
                    .iter()
                    .enumerate()
                    .map(|(i, &r)| pred(ElementClass::BarV, r, 1.0 - i as f64 / 10.0))
                    .collect();
                let mut perm: Vec<usize> = (0..p.len()).collect();
                perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                let q: Vec<Prediction> = perm.iter().map(|&i| p[i].clone()).collect();
                let a = match_detections(&p, &t, 0.5).matches;
                let b = match_detections(&q, &t, 0.5).matches;
                for (k, &i) in perm.iter().enumerate() {
                    prop_assert_eq!(b[k], a[i]);
                }
            }
        }
    }
}
