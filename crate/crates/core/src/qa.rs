//! Question templates and their instantiation against a chart.

use std::collections::{BTreeSet, HashSet};
use std::sync::OnceLock;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encode::{encode_answer, order_annotations, ElementKey, ElementType, OrderedElements};
use crate::oracle::{
    resolve_category, solve, CountTarget, OracleError, PresentTarget, Relation, SemanticForm, TitleKind,
};
use crate::render::AnnotationSet;
use crate::synth::{ChartSpec, ChartType, PieLabeling};

pub const TEMPLATE_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_QUOTA: usize = 8;
pub const SLOTS: [&str; 5] = ["a", "b", "ref", "series", "noun"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionType {
    Structural,
    Relational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerType {
    ChartVocabulary,
    CommonVocabulary,
    ChartType,
}

impl AnswerType {
    pub fn of(form: &SemanticForm) -> AnswerType {
        match form {
            SemanticForm::ChartType => AnswerType::ChartType,
            SemanticForm::TitleText { .. }
            | SemanticForm::Argmax { .. }
            | SemanticForm::Argmin { .. }
            | SemanticForm::ArgmaxAcross { .. }
            | SemanticForm::ArgminAcross { .. }
            | SemanticForm::FilterAbove { .. }
            | SemanticForm::FilterBelow { .. } => AnswerType::ChartVocabulary,
            _ => AnswerType::CommonVocabulary,
        }
    }
}

/// Chart properties a template needs beyond its chart type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Requirement {
    Legend,
    LegendTitle,
    AxisTitles,
}

/// The unbound operation of a template.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum FormTemplate {
    ChartType,
    Count { target: CountTarget },
    Present { target: PresentTarget },
    TitleText { which: TitleKind },
    Argmax,
    Argmin,
    ArgmaxAcross,
    ArgminAcross,
    Compare { relation: Relation },
    CountAbove,
    CountBelow,
    FilterAbove,
    FilterBelow,
    MedianCompare { relation: Relation },
    TrendSign,
    ShareCompare { relation: Relation },
}

impl FormTemplate {
    /// Category slots the operation binds, besides an optional series.
    fn category_slots(self) -> &'static [&'static str] {
        match self {
            FormTemplate::ArgmaxAcross | FormTemplate::ArgminAcross => &["a"],
            FormTemplate::Compare { .. } | FormTemplate::MedianCompare { .. } | FormTemplate::ShareCompare { .. } => {
                &["a", "b"]
            }
            FormTemplate::CountAbove | FormTemplate::CountBelow | FormTemplate::FilterAbove | FormTemplate::FilterBelow => {
                &["ref"]
            }
            _ => &[],
        }
    }

    fn takes_series(self) -> bool {
        matches!(
            self,
            FormTemplate::Argmax
                | FormTemplate::Argmin
                | FormTemplate::Compare { .. }
                | FormTemplate::CountAbove
                | FormTemplate::CountBelow
                | FormTemplate::FilterAbove
                | FormTemplate::FilterBelow
                | FormTemplate::TrendSign
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Template {
    pub id: String,
    pub question_type: QuestionType,
    pub applicable_chart_types: Vec<ChartType>,
    #[serde(default)]
    pub requires: Vec<Requirement>,
    pub form: FormTemplate,
    pub paraphrases: Vec<String>,
}

/// Slot names appearing in `text`, e.g. `{a}` → "a".
pub fn slot_names(text: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        match rest[open..].find('}') {
            Some(close) => {
                out.insert(rest[open + 1..open + close].to_string());
                rest = &rest[open + close + 1..];
            }
            None => break,
        }
    }
    out
}

impl Template {
    pub fn slots(&self) -> BTreeSet<String> {
        slot_names(&self.paraphrases[0])
    }

    pub fn uses_series(&self) -> bool {
        self.slots().contains("series")
    }

    fn check(&self) -> Result<(), String> {
        if !(3..=10).contains(&self.paraphrases.len()) {
            return Err(format!("{}: needs 3 to 10 paraphrases", self.id));
        }
        let slots = self.slots();
        for p in &self.paraphrases {
            if slot_names(p) != slots {
                return Err(format!("{}: paraphrases disagree on slots", self.id));
            }
        }
        if let Some(s) = slots.iter().find(|s| !SLOTS.contains(&s.as_str())) {
            return Err(format!("{}: unknown slot {s:?}", self.id));
        }
        for s in self.form.category_slots() {
            if !slots.contains(*s) {
                return Err(format!("{}: missing slot {{{s}}}", self.id));
            }
        }
        if slots.contains("series") && !self.form.takes_series() {
            return Err(format!("{}: operation takes no series", self.id));
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
struct TemplateFile {
    schema_version: u32,
    templates: Vec<Template>,
}

pub fn parse_templates(json: &str) -> Result<Vec<Template>, String> {
    let file: TemplateFile = serde_json::from_str(json).map_err(|e| e.to_string())?;
    if file.schema_version != TEMPLATE_SCHEMA_VERSION {
        return Err(format!("unsupported template schema {}", file.schema_version));
    }
    let mut ids = HashSet::new();
    for t in &file.templates {
        t.check()?;
        if !ids.insert(t.id.as_str()) {
            return Err(format!("duplicate template id {}", t.id));
        }
    }
    Ok(file.templates)
}

pub fn bundled_templates() -> &'static [Template] {
    static BANK: OnceLock<Vec<Template>> = OnceLock::new();
    BANK.get_or_init(|| parse_templates(include_str!("../data/templates.json")).expect("valid bundled templates"))
}

pub fn applicable_templates(chart_type: ChartType) -> Vec<&'static Template> {
    bundled_templates()
        .iter()
        .filter(|t| t.applicable_chart_types.contains(&chart_type))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAPair {
    pub chart_id: String,
    pub template_id: String,
    pub question: String,
    pub question_type: QuestionType,
    pub answer_type: AnswerType,
    pub answers: Vec<String>,
    pub semantic_form: SemanticForm,
}

pub const QA_SCHEMA_VERSION: u32 = 1;

/// One line of a split's QA file: the pair plus its encodings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaRecord {
    pub question_id: String,
    #[serde(flatten)]
    pub pair: QAPair,
    pub encoded_question: String,
    pub answer_vector: Vec<u8>,
}

#[derive(Debug, Error, PartialEq)]
pub enum InstantiateError {
    #[error("template {0} does not apply to this chart")]
    NotApplicable(String),
    #[error("question has no answer on this chart")]
    NoAnswer,
    #[error("answer {0:?} falls outside the answer vector")]
    Unencodable(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("rendered text {rendered:?} differs from the bound label {bound:?}")]
    Inconsistent { rendered: String, bound: String },
}

/// Element type under which category labels are read.
pub fn category_element(spec: &ChartSpec) -> ElementType {
    match spec.chart_type {
        ChartType::Pie | ChartType::Donut => match spec.style.pie_labeling {
            PieLabeling::Direct => ElementType::PieLabel,
            PieLabeling::Legend => ElementType::LegendLabel,
        },
        _ => ElementType::XLabel,
    }
}

/// References to every series that is named on the chart.
pub fn series_refs(spec: &ChartSpec) -> Vec<ElementKey> {
    let ct = spec.chart_type;
    if ct.is_pie() {
        spec.legend_title
            .iter()
            .map(|_| ElementKey::new(ElementType::LegendTitle, 0))
            .collect()
    } else if spec.has_legend() && !ct.is_box() && ct != ChartType::Scatter {
        (0..spec.series.len())
            .map(|j| ElementKey::new(ElementType::LegendLabel, j))
            .collect()
    } else {
        Vec::new()
    }
}

fn requirement_met(r: Requirement, spec: &ChartSpec) -> bool {
    match r {
        Requirement::Legend => spec.has_legend(),
        Requirement::LegendTitle => spec.legend_title.is_some(),
        Requirement::AxisTitles => spec.axis_titles.is_some(),
    }
}

struct Binding {
    a: Option<ElementKey>,
    b: Option<ElementKey>,
    reference: Option<ElementKey>,
    series: Option<ElementKey>,
}

fn bind(form: FormTemplate, b: &Binding) -> SemanticForm {
    let a = || b.a.expect("bound a");
    let bb = || b.b.expect("bound b");
    let r = || b.reference.expect("bound ref");
    let series = b.series;
    match form {
        FormTemplate::ChartType => SemanticForm::ChartType,
        FormTemplate::Count { target } => SemanticForm::Count { target },
        FormTemplate::Present { target } => SemanticForm::Present { target },
        FormTemplate::TitleText { which } => SemanticForm::TitleText { which },
        FormTemplate::Argmax => SemanticForm::Argmax { series },
        FormTemplate::Argmin => SemanticForm::Argmin { series },
        FormTemplate::ArgmaxAcross => SemanticForm::ArgmaxAcross { category: a() },
        FormTemplate::ArgminAcross => SemanticForm::ArgminAcross { category: a() },
        FormTemplate::Compare { relation } => SemanticForm::Compare {
            a: a(),
            b: bb(),
            series,
            relation,
        },
        FormTemplate::CountAbove => SemanticForm::CountAbove { reference: r(), series },
        FormTemplate::CountBelow => SemanticForm::CountBelow { reference: r(), series },
        FormTemplate::FilterAbove => SemanticForm::FilterAbove { reference: r(), series },
        FormTemplate::FilterBelow => SemanticForm::FilterBelow { reference: r(), series },
        FormTemplate::MedianCompare { relation } => SemanticForm::MedianCompare {
            a: a(),
            b: bb(),
            relation,
        },
        FormTemplate::TrendSign => SemanticForm::TrendSign { series },
        FormTemplate::ShareCompare { relation } => SemanticForm::ShareCompare {
            a: a(),
            b: bb(),
            relation,
        },
    }
}

/// Whether the template can be grounded on this chart at all.
pub fn is_feasible(template: &Template, spec: &ChartSpec) -> bool {
    if !template.applicable_chart_types.contains(&spec.chart_type)
        || !template.requires.iter().all(|&r| requirement_met(r, spec))
    {
        return false;
    }
    let series = series_refs(spec);
    if template.uses_series() && series.is_empty() {
        return false;
    }
    let n = if spec.chart_type == ChartType::Scatter { 0 } else { spec.category_labels.len() };
    let needed = template.form.category_slots().len();
    if n < needed.max(if needed > 0 { 2 } else { 0 }) {
        return false;
    }
    let cat = category_element(spec);
    let binding = Binding {
        a: Some(ElementKey::new(cat, 0)),
        b: Some(ElementKey::new(cat, 1.min(n.saturating_sub(1)))),
        reference: Some(ElementKey::new(cat, 0)),
        series: template.uses_series().then(|| series[0]),
    };
    solve(&bind(template.form, &binding), spec).is_ok()
}

fn rendered<'a>(ordered: &'a OrderedElements, key: ElementKey, bound: &str) -> Result<&'a str, InstantiateError> {
    let text = ordered.text(key).unwrap_or("");
    if text != bound {
        return Err(InstantiateError::Inconsistent {
            rendered: text.to_string(),
            bound: bound.to_string(),
        });
    }
    Ok(text)
}

/// Grounds one template: picks a paraphrase and slot bindings uniformly,
/// fills slots with the rendered strings and asks the oracle for answers.
pub fn instantiate<R: Rng + ?Sized>(
    template: &Template,
    spec: &ChartSpec,
    ordered: &OrderedElements,
    chart_id: &str,
    rng: &mut R,
) -> Result<QAPair, InstantiateError> {
    if !is_feasible(template, spec) {
        return Err(InstantiateError::NotApplicable(template.id.clone()));
    }
    let paraphrase = template.paraphrases.choose(rng).expect("non-empty");
    let cat = category_element(spec);
    let n = spec.category_labels.len();
    let slots = template.form.category_slots();
    let picks: Vec<usize> = if slots.is_empty() {
        Vec::new()
    } else {
        rand::seq::index::sample(rng, n, slots.len()).into_vec()
    };
    let key = |s: &str| slots.iter().position(|x| *x == s).map(|i| ElementKey::new(cat, picks[i]));
    let series = if template.uses_series() {
        Some(*series_refs(spec).choose(rng).expect("feasible"))
    } else {
        None
    };
    let binding = Binding {
        a: key("a"),
        b: key("b"),
        reference: key("ref"),
        series,
    };
    let form = bind(template.form, &binding);

    let mut question = paraphrase.replace("{noun}", &spec.category_noun);
    for (slot, k) in [("a", binding.a), ("b", binding.b), ("ref", binding.reference)] {
        if let Some(k) = k {
            let label = &spec.category_labels[resolve_category(spec, k)?];
            question = question.replace(&format!("{{{slot}}}"), rendered(ordered, k, label)?);
        }
    }
    if let Some(k) = series {
        let label = if spec.chart_type.is_pie() {
            spec.legend_title.clone().expect("feasible")
        } else {
            spec.series[k.order].label.clone()
        };
        question = question.replace("{series}", rendered(ordered, k, &label)?);
    }

    let answers = solve(&form, spec)?;
    if answers.is_empty() {
        return Err(InstantiateError::NoAnswer);
    }
    if let Err(e) = encode_answer(&answers, ordered, spec.chart_type) {
        return Err(InstantiateError::Unencodable(match e {
            crate::encode::EncodeError::NotEncodable(s) => s,
            other => other.to_string(),
        }));
    }
    Ok(QAPair {
        chart_id: chart_id.to_string(),
        template_id: template.id.clone(),
        question,
        question_type: template.question_type,
        answer_type: AnswerType::of(&form),
        answers,
        semantic_form: form,
    })
}

/// Share of relational questions in the reference corpus's training split
/// (1,330,395 of 1,529,299).
pub const RELATIONAL_SHARE: f64 = 1_330_395.0 / 1_529_299.0;

/// Up to `quota` distinct questions for one chart. Each draw first picks a
/// question type (relational with probability [`RELATIONAL_SHARE`] when the
/// chart admits both), then a template uniformly among the feasible ones of
/// that type. Failed draws are retried a bounded number of times.
pub fn generate_all<R: Rng + ?Sized>(
    spec: &ChartSpec,
    annotations: &AnnotationSet,
    rng: &mut R,
    quota: usize,
) -> Result<Vec<QAPair>, InstantiateError> {
    let (ordered, _) = order_annotations(annotations);
    let (relational, structural): (Vec<&Template>, Vec<&Template>) = applicable_templates(spec.chart_type)
        .into_iter()
        .filter(|t| is_feasible(t, spec))
        .partition(|t| t.question_type == QuestionType::Relational);
    let mut out: Vec<QAPair> = Vec::new();
    let mut seen = HashSet::new();
    if relational.is_empty() && structural.is_empty() {
        return Ok(out);
    }
    for _ in 0..quota * 4 {
        if out.len() >= quota {
            break;
        }
        let pool = if structural.is_empty() || (!relational.is_empty() && rng.random_bool(RELATIONAL_SHARE)) {
            &relational
        } else {
            &structural
        };
        let t = pool.choose(rng).expect("non-empty");
        match instantiate(t, spec, &ordered, &annotations.chart_id, rng) {
            Ok(pair) => {
                if seen.insert(pair.question.clone()) {
                    out.push(pair);
                }
            }
            Err(InstantiateError::NoAnswer | InstantiateError::Unencodable(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::ReservedTokenMap;
    use crate::render::render_chart;
    use crate::synth::make_chart_spec;
    use crate::table::DataTable;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixture_table() -> DataTable {
        let csv = "Country,1983,1990,2000\n\
                   Antigua and Barbuda,2,3,4\n\
                   Chile,9,7,6\n\
                   Peru,4,8,3\n\
                   Kenya,6,2,9\n\
                   Egypt,5,5,5\n";
        DataTable::from_csv("exports", csv.as_bytes()).unwrap()
    }

    #[test]
    fn bank_loads_and_is_well_formed() {
        let bank = bundled_templates();
        assert!(bank.len() >= 40);
        for t in ChartType::ALL {
            assert!(applicable_templates(t).iter().any(|x| x.id == "chart_type"));
        }
        let box_ids: Vec<&str> = applicable_templates(ChartType::BoxV).iter().map(|t| t.id.as_str()).collect();
        assert!(box_ids.contains(&"median_greater"));
        assert!(!box_ids.iter().any(|id| id.starts_with("share")));
        let pie_ids: Vec<&str> = applicable_templates(ChartType::Pie).iter().map(|t| t.id.as_str()).collect();
        assert!(!pie_ids.iter().any(|id| id.contains("axis")));
    }

    #[test]
    fn malformed_banks_are_rejected() {
        let bad = r#"{"schema_version":1,"templates":[{"id":"x","question_type":"relational",
            "applicable_chart_types":["pie"],"form":{"op":"compare","relation":"greater"},
            "paraphrases":["Is {a} above {b}?","Is {a} over {b}?","Is {a} more?"]}]}"#;
        assert!(parse_templates(bad).unwrap_err().contains("disagree"));
        let two = r#"{"schema_version":1,"templates":[{"id":"x","question_type":"structural",
            "applicable_chart_types":["pie"],"form":{"op":"chart_type"},
            "paraphrases":["a?","b?"]}]}"#;
        assert!(parse_templates(two).is_err());
    }

    #[test]
    fn tokens_never_collide_with_template_words() {
        let words: HashSet<String> = bundled_templates()
            .iter()
            .flat_map(|t| t.paraphrases.iter())
            .flat_map(|p| p.split(|c: char| !c.is_alphanumeric()).map(str::to_lowercase).collect::<Vec<_>>())
            .collect();
        for tok in ReservedTokenMap::bundled().tokens() {
            assert!(!words.contains(tok), "{tok}");
        }
    }

    #[test]
    fn paraphrases_are_uniform() {
        let table = fixture_table();
        let spec = make_chart_spec(&table, ChartType::Donut, 3).unwrap();
        let chart = render_chart(&spec, "c").unwrap();
        let (ordered, _) = order_annotations(&chart.annotations);
        let t = bundled_templates().iter().find(|t| t.id == "chart_type").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let trials = 12_000;
        let mut counts = vec![0usize; t.paraphrases.len()];
        for _ in 0..trials {
            let q = instantiate(t, &spec, &ordered, "c", &mut rng).unwrap();
            assert_eq!(q.answers, ["donut"]);
            counts[t.paraphrases.iter().position(|p| *p == q.question).unwrap()] += 1;
        }
        let k = counts.len() as f64;
        let p = 1.0 / k;
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - trials as f64 * p).abs() < 5.0 * sigma, "{c}");
        }
    }

    #[test]
    fn quota_zero_and_determinism() {
        let table = fixture_table();
        let spec = make_chart_spec(&table, ChartType::GroupedBarV, 1).unwrap();
        let chart = render_chart(&spec, "c").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(generate_all(&spec, &chart.annotations, &mut rng, 0).unwrap().is_empty());
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            generate_all(&spec, &chart.annotations, &mut rng, 8).unwrap()
        };
        assert_eq!(run(5), run(5));
    }

    #[test]
    fn generated_pairs_hold_their_invariants() {
        let table = fixture_table();
        let tokens = ReservedTokenMap::bundled();
        for ct in ChartType::ALL {
            if ct == ChartType::Line || ct == ChartType::Scatter {
                continue;
            }
            for seed in 0..12 {
                let spec = make_chart_spec(&table, ct, seed).unwrap();
                let chart = render_chart(&spec, "c").unwrap();
                let (ordered, _) = order_annotations(&chart.annotations);
                let texts: HashSet<&str> = chart.annotations.elements.iter().filter_map(|a| a.text.as_deref()).collect();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let pairs = generate_all(&spec, &chart.annotations, &mut rng, 8).unwrap();
                assert!(!pairs.is_empty());
                for q in pairs {
                    assert!(slot_names(&q.question).is_empty(), "{}", q.question);
                    assert_eq!(solve(&q.semantic_form, &spec).unwrap(), q.answers);
                    assert!(encode_answer(&q.answers, &ordered, ct).is_ok());
                    for a in &q.answers {
                        match q.answer_type {
                            AnswerType::ChartVocabulary => assert!(texts.contains(a.as_str())),
                            AnswerType::ChartType => assert!(ChartType::ALL.iter().any(|t| t.display_name() == a)),
                            AnswerType::CommonVocabulary => assert!(
                                ["Yes", "No", "None", "negative", "positive"].contains(&a.as_str())
                                    || (1..=15).any(|n| n.to_string() == *a)
                            ),
                        }
                    }
                    let enc = crate::encode::encode_question(&q.question, &ordered, tokens);
                    assert_eq!(crate::encode::encode_question(&enc, &ordered, tokens), enc);
                }
            }
        }
    }

    #[test]
    fn count_above_two_of_five() {
        let spec = crate::oracle::tests::spec(
            ChartType::GroupedBarV,
            &["a", "b", "c", "d", "r"],
            &[("v", &[1.0, 6.0, 7.0, 2.0, 4.0])],
        );
        let chart = render_chart(&spec, "c").unwrap();
        let (ordered, _) = order_annotations(&chart.annotations);
        let t = bundled_templates().iter().find(|t| t.id == "count_above").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..40 {
            let q = instantiate(t, &spec, &ordered, "c", &mut rng).unwrap();
            let SemanticForm::CountAbove { reference, .. } = q.semantic_form else { panic!() };
            let v = &spec.series[0].values;
            let brute = v.iter().filter(|&&x| x > v[reference.order]).count();
            let want = if brute == 0 { "None".to_string() } else { brute.to_string() };
            assert_eq!(q.answers, [want]);
            if reference.order == 4 {
                assert_eq!(q.answers, ["2"]);
            }
        }
    }

    #[test]
    fn multi_answer_filter() {
        let spec = crate::oracle::tests::spec(
            ChartType::Line,
            &["2003", "2004", "2005", "2006", "2007", "2008", "2009", "2010", "2011", "2012"],
            &[("GDP growth", &[1.0, 2.0, 3.0, 0.5, 2.5, 2.1, 1.0, 0.0, 1.0, 1.5])],
        );
        let chart = render_chart(&spec, "c").unwrap();
        let (ordered, _) = order_annotations(&chart.annotations);
        let t = bundled_templates().iter().find(|t| t.id == "filter_above").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let q = (0..200)
            .map(|_| instantiate(t, &spec, &ordered, "c", &mut rng))
            .find_map(|r| r.ok().filter(|q| q.question.contains("2004")))
            .unwrap();
        assert_eq!(q.answers, ["2005", "2007", "2008"]);
    }
}
