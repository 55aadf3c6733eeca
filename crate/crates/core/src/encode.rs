//! Chart-element ordering, question encoding with reserved tokens, and the
//! fixed-width answer vector.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::OnceLock;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::render::geometry::{clock_angle, Rect};
use crate::render::{AnnotationSet, ElementClass};
use crate::synth::ChartType;

pub const ANSWER_DIM: usize = 75;
pub const CATEGORY_SLOTS: usize = 20;
pub const LEGEND_SLOTS: usize = 15;
const LEGEND_BASE: usize = 20;
const CHART_TITLE_SLOT: usize = 35;
const X_AXIS_TITLE_SLOT: usize = 36;
const Y_AXIS_TITLE_SLOT: usize = 37;
const LEGEND_TITLE_SLOT: usize = 38;
const CHART_TYPE_BASE: usize = 39;
const COMMON_BASE: usize = 49;
const NUMERAL_BASE: usize = 54;
pub const MAX_NUMERAL: usize = 15;
pub const RESERVED_SLOTS: std::ops::Range<usize> = 69..75;
pub const COMMON_WORDS: [&str; 5] = ["Yes", "No", "None", "negative", "positive"];
/// Minimum IoU for a detected text box to take a ground-truth string.
pub const ATTACH_MIN_IOU: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum EncodeError {
    #[error("answer {0:?} cannot be encoded for this chart")]
    NotEncodable(String),
    #[error("score vector has {0} entries, expected {ANSWER_DIM}")]
    Dimension(usize),
    #[error("score vector contains a non-finite value")]
    NonFinite,
    #[error("highest score falls on reserved slot {0}")]
    ReservedSlot(usize),
    #[error("highest score falls on slot {0}, which has no chart element")]
    EmptySlot(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementType {
    XLabel,
    YLabel,
    LegendLabel,
    LegendTitle,
    PieLabel,
    PieValue,
    ChartTitle,
    XAxisTitle,
    YAxisTitle,
}

impl ElementType {
    pub const ALL: [ElementType; 9] = [
        ElementType::XLabel,
        ElementType::YLabel,
        ElementType::LegendLabel,
        ElementType::LegendTitle,
        ElementType::PieLabel,
        ElementType::PieValue,
        ElementType::ChartTitle,
        ElementType::XAxisTitle,
        ElementType::YAxisTitle,
    ];

    pub fn of_class(class: ElementClass) -> Option<ElementType> {
        Some(match class {
            ElementClass::XAxisLabel => ElementType::XLabel,
            ElementClass::YAxisLabel => ElementType::YLabel,
            ElementClass::LegendLabel => ElementType::LegendLabel,
            ElementClass::LegendTitle => ElementType::LegendTitle,
            ElementClass::PieLabel => ElementType::PieLabel,
            ElementClass::PieValue => ElementType::PieValue,
            ElementClass::ChartTitle => ElementType::ChartTitle,
            ElementClass::XAxisTitle => ElementType::XAxisTitle,
            ElementClass::YAxisTitle => ElementType::YAxisTitle,
            _ => return None,
        })
    }

    /// How many orders of this type receive a reserved token.
    pub fn token_capacity(self) -> usize {
        match self {
            ElementType::XLabel | ElementType::YLabel => 24,
            ElementType::LegendLabel | ElementType::PieLabel | ElementType::PieValue => 16,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ElementKey {
    pub element_type: ElementType,
    pub order: usize,
}

impl ElementKey {
    pub fn new(element_type: ElementType, order: usize) -> Self {
        ElementKey { element_type, order }
    }
}

/// A located element with optional text, as annotated or as detected.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub class: ElementClass,
    pub bbox: Rect,
    pub text: Option<String>,
}

impl Element {
    pub fn from_annotations(set: &AnnotationSet) -> Vec<Element> {
        set.elements
            .iter()
            .map(|a| Element {
                class: a.element_class,
                bbox: a.bbox,
                text: a.text.clone(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderedText {
    pub text: String,
    pub bbox: Rect,
}

/// Text elements keyed by (element type, order).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OrderedElements {
    pub map: BTreeMap<ElementKey, OrderedText>,
}

impl OrderedElements {
    pub fn text(&self, key: ElementKey) -> Option<&str> {
        self.map.get(&key).map(|t| t.text.as_str())
    }

    pub fn keys_with_text<'a>(&'a self, text: &'a str) -> impl Iterator<Item = ElementKey> + 'a {
        self.map.iter().filter(move |(_, v)| v.text == text).map(|(k, _)| *k)
    }

    pub fn count(&self, element_type: ElementType) -> usize {
        self.map.keys().filter(|k| k.element_type == element_type).count()
    }
}

/// Population variance.
fn variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64
}

/// True when bar or box glyph widths vary more than their heights, i.e.
/// the glyphs grow horizontally. Ties (including a single glyph) are no swap.
pub fn detect_axis_swap(glyph_boxes: &[Rect]) -> bool {
    if glyph_boxes.is_empty() {
        warn!("no bar or box glyphs; assuming vertical orientation");
        return false;
    }
    let widths: Vec<f64> = glyph_boxes.iter().map(Rect::width).collect();
    let heights: Vec<f64> = glyph_boxes.iter().map(Rect::height).collect();
    variance(&widths) > variance(&heights)
}

/// Swap decision from any element list (plot glyphs are picked out).
pub fn detect_axis_swap_elements(elements: &[Element]) -> bool {
    let boxes: Vec<Rect> = elements
        .iter()
        .filter(|e| e.class.is_oriented_glyph())
        .map(|e| e.bbox)
        .collect();
    if boxes.is_empty() {
        return false;
    }
    detect_axis_swap(&boxes)
}

fn cmp_f(a: f64, b: f64) -> Ordering {
    a.total_cmp(&b)
}

/// Stable, input-order-independent tie break.
fn tie(a: &Element, b: &Element) -> Ordering {
    cmp_f(a.bbox.x0, b.bbox.x0)
        .then(cmp_f(a.bbox.y0, b.bbox.y0))
        .then(cmp_f(a.bbox.x1, b.bbox.x1))
        .then(cmp_f(a.bbox.y1, b.bbox.y1))
        .then(a.text.cmp(&b.text))
}

fn left_to_right(a: &Element, b: &Element) -> Ordering {
    cmp_f(a.bbox.center().0, b.bbox.center().0).then_with(|| tie(a, b))
}

fn bottom_to_top(a: &Element, b: &Element) -> Ordering {
    cmp_f(b.bbox.center().1, a.bbox.center().1).then_with(|| tie(a, b))
}

fn reading_order(a: &Element, b: &Element) -> Ordering {
    cmp_f(a.bbox.center().1, b.bbox.center().1).then_with(|| left_to_right(a, b))
}

/// Legend entries: columns by left edge (left to right), then top to bottom.
fn legend_order(items: &mut [&Element]) {
    if items.is_empty() {
        return;
    }
    let min_h = items.iter().map(|e| e.bbox.height()).fold(f64::INFINITY, f64::min);
    let tol = (min_h / 2.0).max(1.0);
    items.sort_by(|a, b| cmp_f(a.bbox.x0, b.bbox.x0).then_with(|| tie(a, b)));
    let mut column = vec![0usize; items.len()];
    let mut start = items[0].bbox.x0;
    for i in 1..items.len() {
        if items[i].bbox.x0 - start > tol {
            start = items[i].bbox.x0;
            column[i] = column[i - 1] + 1;
        } else {
            column[i] = column[i - 1];
        }
    }
    let mut keyed: Vec<(usize, &Element)> = column.into_iter().zip(items.iter().copied()).collect();
    keyed.sort_by(|(ca, a), (cb, b)| {
        ca.cmp(cb)
            .then(cmp_f(a.bbox.center().1, b.bbox.center().1))
            .then_with(|| tie(a, b))
    });
    for (slot, (_, e)) in items.iter_mut().zip(keyed) {
        *slot = e;
    }
}

/// Assigns element orders from geometry alone. When `swap` is set, labels
/// found on the x axis take the y-label role and vice versa; each group is
/// still ordered along the axis it was found on.
pub fn order_elements(elements: &[Element], swap: bool) -> OrderedElements {
    let mut groups: BTreeMap<ElementClass, Vec<&Element>> = BTreeMap::new();
    for e in elements {
        if e.class.carries_text() && e.text.as_ref().is_some_and(|t| !t.is_empty()) {
            groups.entry(e.class).or_default().push(e);
        }
    }
    let wedges: Vec<Rect> = elements.iter().filter(|e| e.class == ElementClass::Wedge).map(|e| e.bbox).collect();
    let pie_center = wedges
        .iter()
        .copied()
        .reduce(|a, b| a.union(&b))
        .or_else(|| {
            elements
                .iter()
                .filter(|e| matches!(e.class, ElementClass::PieLabel | ElementClass::PieValue))
                .map(|e| e.bbox)
                .reduce(|a, b| a.union(&b))
        })
        .map(|r| r.center());

    let mut out = OrderedElements::default();
    for (class, mut items) in groups {
        match class {
            ElementClass::XAxisLabel => items.sort_by(|a, b| left_to_right(a, b)),
            ElementClass::YAxisLabel => items.sort_by(|a, b| bottom_to_top(a, b)),
            ElementClass::LegendLabel => legend_order(&mut items),
            ElementClass::PieLabel | ElementClass::PieValue => {
                let c = pie_center.expect("pie text present");
                items.sort_by(|a, b| {
                    cmp_f(clock_angle(c, a.bbox.center()), clock_angle(c, b.bbox.center())).then_with(|| tie(a, b))
                })
            }
            _ => items.sort_by(|a, b| reading_order(a, b)),
        }
        let mut element_type = ElementType::of_class(class).expect("text class");
        if swap {
            element_type = match element_type {
                ElementType::XLabel => ElementType::YLabel,
                ElementType::YLabel => ElementType::XLabel,
                other => other,
            };
        }
        for (order, e) in items.into_iter().enumerate() {
            out.map.insert(
                ElementKey::new(element_type, order),
                OrderedText {
                    text: e.text.clone().expect("filtered"),
                    bbox: e.bbox,
                },
            );
        }
    }
    out
}

/// Orders a ground-truth annotation set, detecting the swap from its glyphs.
pub fn order_annotations(set: &AnnotationSet) -> (OrderedElements, bool) {
    let elements = Element::from_annotations(set);
    let swap = detect_axis_swap_elements(&elements);
    (order_elements(&elements, swap), swap)
}

/// Gives detected boxes the strings of overlapping ground-truth text
/// elements. Pairs are taken in descending IoU; each truth string is used
/// at most once and only when IoU ≥ 0.5. Returns one entry per detection.
pub fn attach_text(detections: &[(ElementClass, Rect)], truth: &AnnotationSet) -> Vec<Option<String>> {
    let texts: Vec<(Rect, &str)> = truth
        .elements
        .iter()
        .filter(|a| a.element_class.carries_text())
        .filter_map(|a| a.text.as_deref().map(|t| (a.bbox, t)))
        .collect();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (d, (class, bbox)) in detections.iter().enumerate() {
        if !class.carries_text() {
            continue;
        }
        for (t, (tb, _)) in texts.iter().enumerate() {
            let iou = bbox.iou(tb);
            if iou >= ATTACH_MIN_IOU {
                pairs.push((iou, d, t));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = vec![None; detections.len()];
    let mut used = vec![false; texts.len()];
    for (_, d, t) in pairs {
        if out[d].is_none() && !used[t] {
            out[d] = Some(texts[t].1.to_string());
            used[t] = true;
        }
    }
    out
}

/// Reads text for detected boxes from an external source, e.g. OCR.
pub trait TextProvider {
    fn read(&mut self, class: ElementClass, bbox: Rect) -> Option<String>;
}

pub fn attach_text_with(detections: &[(ElementClass, Rect)], provider: &mut dyn TextProvider) -> Vec<Option<String>> {
    detections
        .iter()
        .map(|&(class, bbox)| if class.carries_text() { provider.read(class, bbox) } else { None })
        .collect()
}

#[derive(Debug, Deserialize)]
struct TokenFile {
    tokens: Vec<String>,
}

/// Bijection from element keys to rare words.
#[derive(Debug, Clone)]
pub struct ReservedTokenMap {
    by_key: BTreeMap<ElementKey, String>,
}

impl ReservedTokenMap {
    pub fn from_words(words: &[String]) -> Result<ReservedTokenMap, String> {
        let mut by_key = BTreeMap::new();
        let mut it = words.iter();
        for t in ElementType::ALL {
            for order in 0..t.token_capacity() {
                let w = it.next().ok_or("token list too short")?;
                by_key.insert(ElementKey::new(t, order), w.clone());
            }
        }
        Ok(ReservedTokenMap { by_key })
    }

    pub fn bundled() -> &'static ReservedTokenMap {
        static MAP: OnceLock<ReservedTokenMap> = OnceLock::new();
        MAP.get_or_init(|| {
            let file: TokenFile =
                serde_json::from_str(include_str!("../data/reserved_tokens.json")).expect("valid reserved_tokens.json");
            ReservedTokenMap::from_words(&file.tokens).expect("enough bundled tokens")
        })
    }

    pub fn token(&self, key: ElementKey) -> Option<&str> {
        self.by_key.get(&key).map(String::as_str)
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.by_key.values().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.by_key.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_key.is_empty()
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// A match may not start or end inside a word.
fn at_boundaries(s: &str, start: usize, end: usize) -> bool {
    let matched = &s[start..end];
    let first_ok = !matched.chars().next().is_some_and(is_word_char) || !s[..start].chars().next_back().is_some_and(is_word_char);
    let last_ok = !matched.chars().next_back().is_some_and(is_word_char) || !s[end..].chars().next().is_some_and(is_word_char);
    first_ok && last_ok
}

fn find_all(haystack: &str, needle: &str) -> Vec<usize> {
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(p) = haystack[from..].find(needle) {
        out.push(from + p);
        from += p + needle.len().max(1);
        while from < haystack.len() && !haystack.is_char_boundary(from) {
            from += 1;
        }
    }
    out
}

/// Replaces chart strings in `question` with their reserved tokens,
/// longest string first, left to right, without overlaps. Matching is
/// case-sensitive and respects word boundaries at alphanumeric edges.
/// Tokens already present are left alone, so encoding is idempotent.
pub fn encode_question(question: &str, ordered: &OrderedElements, tokens: &ReservedTokenMap) -> String {
    let mut candidates: Vec<(&str, &str)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (key, t) in &ordered.map {
        if t.text.is_empty() || !seen.insert(t.text.as_str()) {
            continue;
        }
        if let Some(tok) = tokens.token(*key) {
            candidates.push((t.text.as_str(), tok));
        }
    }
    candidates.sort_by(|a, b| b.0.len().cmp(&a.0.len()));

    let mut claimed: Vec<(usize, usize, Option<&str>)> = Vec::new();
    for tok in tokens.tokens() {
        for p in find_all(question, tok) {
            if at_boundaries(question, p, p + tok.len()) {
                claimed.push((p, p + tok.len(), None));
            }
        }
    }
    for (text, tok) in candidates {
        for p in find_all(question, text) {
            let end = p + text.len();
            if !at_boundaries(question, p, end) {
                continue;
            }
            if claimed.iter().any(|&(s, e, _)| p < e && s < end) {
                continue;
            }
            claimed.push((p, end, Some(tok)));
        }
    }
    claimed.sort_by_key(|c| c.0);
    let mut out = String::with_capacity(question.len());
    let mut pos = 0;
    for (s, e, tok) in claimed {
        out.push_str(&question[pos..s]);
        out.push_str(tok.unwrap_or(&question[s..e]));
        pos = e;
    }
    out.push_str(&question[pos..]);
    out
}

/// What an answer-vector slot stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Category(usize),
    Legend(usize),
    ChartTitle,
    XAxisTitle,
    YAxisTitle,
    LegendTitle,
    ChartType(ChartType),
    Common(&'static str),
    Numeral(usize),
    Reserved,
}

pub fn slot_meaning(index: usize) -> Slot {
    match index {
        i if i < LEGEND_BASE => Slot::Category(i),
        i if i < CHART_TITLE_SLOT => Slot::Legend(i - LEGEND_BASE),
        CHART_TITLE_SLOT => Slot::ChartTitle,
        X_AXIS_TITLE_SLOT => Slot::XAxisTitle,
        Y_AXIS_TITLE_SLOT => Slot::YAxisTitle,
        LEGEND_TITLE_SLOT => Slot::LegendTitle,
        i if i < COMMON_BASE => Slot::ChartType(ChartType::ALL[i - CHART_TYPE_BASE]),
        i if i < NUMERAL_BASE => Slot::Common(COMMON_WORDS[i - COMMON_BASE]),
        i if i < RESERVED_SLOTS.start => Slot::Numeral(i - NUMERAL_BASE + 1),
        _ => Slot::Reserved,
    }
}

fn category_type(chart_type: ChartType) -> ElementType {
    if chart_type.is_pie() {
        ElementType::PieLabel
    } else {
        ElementType::XLabel
    }
}

/// The chart element behind an element slot, if any.
pub fn slot_key(index: usize, chart_type: ChartType) -> Option<ElementKey> {
    Some(match slot_meaning(index) {
        Slot::Category(i) => ElementKey::new(category_type(chart_type), i),
        Slot::Legend(i) => ElementKey::new(ElementType::LegendLabel, i),
        Slot::ChartTitle => ElementKey::new(ElementType::ChartTitle, 0),
        Slot::XAxisTitle => ElementKey::new(ElementType::XAxisTitle, 0),
        Slot::YAxisTitle => ElementKey::new(ElementType::YAxisTitle, 0),
        Slot::LegendTitle => ElementKey::new(ElementType::LegendTitle, 0),
        _ => return None,
    })
}

fn key_slot(key: ElementKey, chart_type: ChartType) -> Option<usize> {
    let t = key.element_type;
    let i = key.order;
    if t == category_type(chart_type) && i < CATEGORY_SLOTS {
        return Some(i);
    }
    match t {
        ElementType::LegendLabel if i < LEGEND_SLOTS => Some(LEGEND_BASE + i),
        ElementType::ChartTitle if i == 0 => Some(CHART_TITLE_SLOT),
        ElementType::XAxisTitle if i == 0 => Some(X_AXIS_TITLE_SLOT),
        ElementType::YAxisTitle if i == 0 => Some(Y_AXIS_TITLE_SLOT),
        ElementType::LegendTitle if i == 0 => Some(LEGEND_TITLE_SLOT),
        _ => None,
    }
}

/// Multi-hot encoding: every slot whose string equals an answer is set.
pub fn encode_answer(answers: &[String], ordered: &OrderedElements, chart_type: ChartType) -> Result<Vec<u8>, EncodeError> {
    let mut v = vec![0u8; ANSWER_DIM];
    for a in answers {
        let mut hit = false;
        for key in ordered.keys_with_text(a) {
            if let Some(s) = key_slot(key, chart_type) {
                v[s] = 1;
                hit = true;
            }
        }
        if let Some(t) = ChartType::ALL.iter().position(|t| t.display_name() == a) {
            v[CHART_TYPE_BASE + t] = 1;
            hit = true;
        }
        if let Some(w) = COMMON_WORDS.iter().position(|w| w == a) {
            v[COMMON_BASE + w] = 1;
            hit = true;
        }
        if let Ok(n) = a.parse::<usize>() {
            if (1..=MAX_NUMERAL).contains(&n) && a == &n.to_string() {
                v[NUMERAL_BASE + n - 1] = 1;
                hit = true;
            }
        }
        if !hit {
            return Err(EncodeError::NotEncodable(a.clone()));
        }
    }
    Ok(v)
}

/// Index of the highest score; the lowest index wins ties.
pub fn argmax(scores: &[f64]) -> Result<usize, EncodeError> {
    if scores.len() != ANSWER_DIM {
        return Err(EncodeError::Dimension(scores.len()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(EncodeError::NonFinite);
    }
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Maps the highest-scoring slot back to an answer string.
pub fn decode_answer(scores: &[f64], ordered: &OrderedElements, chart_type: ChartType) -> Result<String, EncodeError> {
    let i = argmax(scores)?;
    match slot_meaning(i) {
        Slot::Reserved => Err(EncodeError::ReservedSlot(i)),
        Slot::ChartType(t) => Ok(t.display_name().to_string()),
        Slot::Common(w) => Ok(w.to_string()),
        Slot::Numeral(n) => Ok(n.to_string()),
        _ => {
            let key = slot_key(i, chart_type).expect("element slot");
            ordered.text(key).map(str::to_string).ok_or(EncodeError::EmptySlot(i))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn el(class: ElementClass, x: f64, y: f64, w: f64, h: f64, text: &str) -> Element {
        Element {
            class,
            bbox: Rect::from_xywh(x, y, w, h),
            text: Some(text.to_string()),
        }
    }

    fn ordered(items: &[(ElementType, &str)]) -> OrderedElements {
        let mut o = OrderedElements::default();
        let mut counts: BTreeMap<ElementType, usize> = BTreeMap::new();
        for (t, s) in items {
            let c = counts.entry(*t).or_default();
            o.map.insert(
                ElementKey::new(*t, *c),
                OrderedText {
                    text: s.to_string(),
                    bbox: Rect::new(0.0, 0.0, 1.0, 1.0),
                },
            );
            *c += 1;
        }
        o
    }

    #[test]
    fn swap_from_widths() {
        let boxes: Vec<Rect> = [40.0, 90.0, 140.0].iter().map(|&w| Rect::from_xywh(0.0, 0.0, w, 20.0)).collect();
        assert!(detect_axis_swap(&boxes));
        let vertical: Vec<Rect> = [40.0, 90.0, 140.0].iter().map(|&h| Rect::from_xywh(0.0, 0.0, 20.0, h)).collect();
        assert!(!detect_axis_swap(&vertical));
        assert!(!detect_axis_swap(&[Rect::from_xywh(0.0, 0.0, 5.0, 9.0)]));
        assert!(!detect_axis_swap(&[]));
        assert!((variance(&[40.0, 90.0, 140.0]) - 5000.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn x_labels_left_to_right() {
        let els = vec![
            el(ElementClass::XAxisLabel, 100.0, 0.0, 20.0, 10.0, "c"),
            el(ElementClass::XAxisLabel, 20.0, 0.0, 20.0, 10.0, "a"),
            el(ElementClass::XAxisLabel, 60.0, 0.0, 20.0, 10.0, "b"),
        ];
        let o = order_elements(&els, false);
        for (i, t) in ["a", "b", "c"].iter().enumerate() {
            assert_eq!(o.text(ElementKey::new(ElementType::XLabel, i)), Some(*t));
        }
    }

    #[test]
    fn y_labels_bottom_to_top_and_swap() {
        let els = vec![
            el(ElementClass::YAxisLabel, 0.0, 10.0, 20.0, 10.0, "top"),
            el(ElementClass::YAxisLabel, 5.0, 50.0, 15.0, 10.0, "bottom"),
        ];
        let o = order_elements(&els, false);
        assert_eq!(o.text(ElementKey::new(ElementType::YLabel, 0)), Some("bottom"));
        let s = order_elements(&els, true);
        assert_eq!(s.text(ElementKey::new(ElementType::XLabel, 0)), Some("bottom"));
        assert_eq!(s.text(ElementKey::new(ElementType::XLabel, 1)), Some("top"));
    }

    #[test]
    fn legend_column_major() {
        let els = vec![
            el(ElementClass::LegendLabel, 200.0, 10.0, 30.0, 10.0, "d"),
            el(ElementClass::LegendLabel, 100.0, 30.0, 60.0, 10.0, "b"),
            el(ElementClass::LegendLabel, 100.0, 10.0, 20.0, 10.0, "a"),
            el(ElementClass::LegendLabel, 200.0, 30.0, 30.0, 10.0, "e"),
            el(ElementClass::LegendLabel, 100.0, 50.0, 30.0, 10.0, "c"),
        ];
        let o = order_elements(&els, false);
        let got: Vec<&str> = (0..5).map(|i| o.text(ElementKey::new(ElementType::LegendLabel, i)).unwrap()).collect();
        assert_eq!(got, ["a", "b", "c", "d", "e"]);
    }

    #[test]
    fn pie_labels_clockwise_from_noon() {
        // Wedge bounds centered on (100, 100); labels at 1, 5 and 9 o'clock.
        let mut els = vec![Element {
            class: ElementClass::Wedge,
            bbox: Rect::new(50.0, 50.0, 150.0, 150.0),
            text: None,
        }];
        let at = |hour: f64, text: &str| {
            let a = (hour * 30.0f64).to_radians();
            let (x, y) = (100.0 + 70.0 * a.sin(), 100.0 - 70.0 * a.cos());
            el(ElementClass::PieLabel, x - 10.0, y - 5.0, 20.0, 10.0, text)
        };
        els.push(at(9.0, "nine"));
        els.push(at(1.0, "one"));
        els.push(at(5.0, "five"));
        let o = order_elements(&els, false);
        let got: Vec<&str> = (0..3).map(|i| o.text(ElementKey::new(ElementType::PieLabel, i)).unwrap()).collect();
        assert_eq!(got, ["one", "five", "nine"]);
    }

    #[test]
    fn ordering_ignores_input_order() {
        let mut els = vec![
            el(ElementClass::XAxisLabel, 30.0, 0.0, 10.0, 10.0, "p"),
            el(ElementClass::XAxisLabel, 10.0, 0.0, 10.0, 10.0, "q"),
            el(ElementClass::LegendLabel, 10.0, 10.0, 10.0, 10.0, "r"),
            el(ElementClass::ChartTitle, 0.0, 0.0, 50.0, 10.0, "T"),
        ];
        let a = order_elements(&els, false);
        els.reverse();
        assert_eq!(a, order_elements(&els, false));
    }

    #[test]
    fn question_legend_title_token() {
        let o = ordered(&[(ElementType::LegendTitle, "1983"), (ElementType::LegendLabel, "Antigua and Barbuda")]);
        let tokens = ReservedTokenMap::bundled();
        let q = "Which country has the minimum value for 1983?";
        let tok = tokens.token(ElementKey::new(ElementType::LegendTitle, 0)).unwrap();
        assert_eq!(encode_question(q, &o, tokens), format!("Which country has the minimum value for {tok}?"));
        assert_eq!(encode_question("What type of graph is this?", &o, tokens), "What type of graph is this?");
    }

    #[test]
    fn longest_string_wins() {
        let o = ordered(&[(ElementType::XLabel, "GDP"), (ElementType::XLabel, "GDP growth")]);
        let tokens = ReservedTokenMap::bundled();
        let q = "Is GDP growth above GDP?";
        let t_long = tokens.token(ElementKey::new(ElementType::XLabel, 1)).unwrap();
        let t_short = tokens.token(ElementKey::new(ElementType::XLabel, 0)).unwrap();
        let got = encode_question(q, &o, tokens);
        assert_eq!(got, format!("Is {t_long} above {t_short}?"));
        // Brute force over both match orders: only longest-first leaves no
        // raw chart string behind.
        let short_first = q.replacen("GDP", t_short, 2);
        assert!(short_first.contains("growth"));
        assert!(!got.contains("growth"));
        assert_eq!(encode_question(&got, &o, tokens), got);
    }

    #[test]
    fn no_match_inside_words() {
        let o = ordered(&[(ElementType::XLabel, "in")]);
        let tokens = ReservedTokenMap::bundled();
        assert_eq!(encode_question("Which bin is in?", &o, tokens).matches("bin").count(), 1);
    }

    #[test]
    fn token_map_is_injective() {
        let t = ReservedTokenMap::bundled();
        let set: std::collections::HashSet<&str> = t.tokens().collect();
        assert_eq!(set.len(), t.len());
    }

    #[test]
    fn answer_slots() {
        let o = ordered(&[
            (ElementType::LegendLabel, "Antigua and Barbuda"),
            (ElementType::XLabel, "2004"),
            (ElementType::XLabel, "2005"),
            (ElementType::XLabel, "2006"),
            (ElementType::XLabel, "2007"),
        ]);
        let v = encode_answer(&["Antigua and Barbuda".into()], &o, ChartType::Line).unwrap();
        assert_eq!(v.iter().position(|&x| x == 1), Some(20));
        let v = encode_answer(&["Yes".into()], &o, ChartType::Line).unwrap();
        assert_eq!(v[49], 1);
        let v = encode_answer(&["2005".into(), "2007".into()], &o, ChartType::Line).unwrap();
        let set: Vec<usize> = (0..ANSWER_DIM).filter(|&i| v[i] == 1).collect();
        assert_eq!(set, vec![1, 3]);
        assert_eq!(encode_answer(&["donut".into()], &o, ChartType::Donut).unwrap()[39 + 5], 1);
        assert_eq!(encode_answer(&["15".into()], &o, ChartType::Line).unwrap()[68], 1);
        assert_eq!(
            encode_answer(&["Narnia".into()], &o, ChartType::Line),
            Err(EncodeError::NotEncodable("Narnia".into()))
        );
        assert!(encode_answer(&["16".into()], &o, ChartType::Line).is_err());
    }

    #[test]
    fn decode_examples() {
        let o = ordered(&[
            (ElementType::LegendLabel, "Antigua and Barbuda"),
            (ElementType::XLabel, "2005"),
            (ElementType::XLabel, "2006"),
            (ElementType::XLabel, "2007"),
            (ElementType::XLabel, "2008"),
            (ElementType::XLabel, "2009"),
            (ElementType::XLabel, "2010"),
        ]);
        let mut s = vec![0.0; ANSWER_DIM];
        s[20] = 1.0;
        assert_eq!(decode_answer(&s, &o, ChartType::Line).unwrap(), "Antigua and Barbuda");
        let mut s = vec![0.0; ANSWER_DIM];
        s[49] = 1.0;
        assert_eq!(decode_answer(&s, &o, ChartType::Line).unwrap(), "Yes");
        let mut s = vec![0.1; ANSWER_DIM];
        s[5] = 0.9;
        assert_eq!(decode_answer(&s, &o, ChartType::Line).unwrap(), "2010");
        let mut s = vec![0.0; ANSWER_DIM];
        s[70] = 1.0;
        assert_eq!(decode_answer(&s, &o, ChartType::Line), Err(EncodeError::ReservedSlot(70)));
        let mut s = vec![0.0; ANSWER_DIM];
        s[19] = 1.0;
        assert_eq!(decode_answer(&s, &o, ChartType::Line), Err(EncodeError::EmptySlot(19)));
        // Ties go to the lowest index.
        let s = vec![0.5; ANSWER_DIM];
        assert_eq!(argmax(&s).unwrap(), 0);
    }

    #[test]
    fn attach_consumes_truth() {
        use crate::render::annotate::{Annotation, AnnotationSet, ANNOTATION_SCHEMA_VERSION};
        let truth = AnnotationSet {
            schema_version: ANNOTATION_SCHEMA_VERSION,
            chart_id: "c".into(),
            chart_type: ChartType::Line,
            canvas: (100.0, 100.0),
            elements: vec![Annotation {
                id: "e0".into(),
                element_class: ElementClass::ChartTitle,
                bbox: Rect::new(10.0, 10.0, 50.0, 20.0),
                mask: None,
                text: Some("Title".into()),
                order_hint: 0,
                series: None,
                index: None,
            }],
        };
        let exact = (ElementClass::ChartTitle, Rect::new(10.0, 10.0, 50.0, 20.0));
        let shifted = (ElementClass::ChartTitle, Rect::new(14.0, 10.0, 54.0, 20.0));
        assert_eq!(attach_text(&[shifted, exact], &truth), vec![None, Some("Title".to_string())]);
        // IoU of 0.4 does not attach.
        let weak = (ElementClass::ChartTitle, Rect::new(10.0, 10.0, 26.0, 20.0));
        assert!((weak.1.iou(&exact.1) - 0.4).abs() < 1e-12);
        assert_eq!(attach_text(&[weak], &truth), vec![None]);
    }
}
