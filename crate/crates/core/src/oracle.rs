//! Semantic forms and the rule-based solver that answers them from a chart
//! spec.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encode::{ElementKey, ElementType};
use crate::synth::{ChartSpec, ChartType, PieLabeling};

/// A binding to a rendered text element by (type, order).
pub type ElementRef = ElementKey;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("binding {0:?} does not resolve on this chart")]
    Unresolvable(ElementRef),
    #[error("a series binding is required on this chart")]
    SeriesRequired,
    #[error("operation {op} does not apply to {chart_type}")]
    Unsupported { op: &'static str, chart_type: ChartType },
    #[error("chart has no {0}")]
    Missing(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Greater,
    Less,
}

/// Values closer than this relative gap count as equal, so float noise
/// from sums and quantiles never decides an answer.
pub const VALUE_REL_TOL: f64 = 1e-9;

pub fn nearly_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= VALUE_REL_TOL * a.abs().max(b.abs())
}

impl Relation {
    fn holds(self, a: f64, b: f64) -> bool {
        !nearly_equal(a, b)
            && match self {
                Relation::Greater => a > b,
                Relation::Less => a < b,
            }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountTarget {
    /// Every bar across all groups.
    Bars,
    /// Bar groups or stacks, one per category.
    Groups,
    /// Segments in each stacked bar.
    Segments,
    LegendEntries,
    Wedges,
    Lines,
    Boxes,
    Points,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresentTarget {
    Legend,
    LegendTitle,
    AxisTitles,
    ErrorBars,
    WedgeValues,
    GridLines,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TitleKind {
    Chart,
    XAxis,
    YAxis,
    Legend,
}

/// A question's meaning with every slot bound to a chart element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum SemanticForm {
    ChartType,
    Count {
        target: CountTarget,
    },
    Present {
        target: PresentTarget,
    },
    TitleText {
        which: TitleKind,
    },
    /// Category with the largest value. Without a series binding this is the
    /// single series, the stack total, or the box median.
    Argmax {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        series: Option<ElementRef>,
    },
    Argmin {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        series: Option<ElementRef>,
    },
    /// Series with the largest value at one category.
    ArgmaxAcross {
        category: ElementRef,
    },
    ArgminAcross {
        category: ElementRef,
    },
    Compare {
        a: ElementRef,
        b: ElementRef,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        series: Option<ElementRef>,
        relation: Relation,
    },
    /// Number of other categories whose value exceeds the reference's.
    CountAbove {
        reference: ElementRef,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        series: Option<ElementRef>,
    },
    CountBelow {
        reference: ElementRef,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        series: Option<ElementRef>,
    },
    /// Every category whose value exceeds the reference's.
    FilterAbove {
        reference: ElementRef,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        series: Option<ElementRef>,
    },
    FilterBelow {
        reference: ElementRef,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        series: Option<ElementRef>,
    },
    MedianCompare {
        a: ElementRef,
        b: ElementRef,
        relation: Relation,
    },
    /// Sign of the least-squares slope of a line series or scatter cloud.
    TrendSign {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        series: Option<ElementRef>,
    },
    ShareCompare {
        a: ElementRef,
        b: ElementRef,
        relation: Relation,
    },
}

impl SemanticForm {
    pub fn op_name(&self) -> &'static str {
        match self {
            SemanticForm::ChartType => "chart_type",
            SemanticForm::Count { .. } => "count",
            SemanticForm::Present { .. } => "present",
            SemanticForm::TitleText { .. } => "title_text",
            SemanticForm::Argmax { .. } => "argmax",
            SemanticForm::Argmin { .. } => "argmin",
            SemanticForm::ArgmaxAcross { .. } => "argmax_across",
            SemanticForm::ArgminAcross { .. } => "argmin_across",
            SemanticForm::Compare { .. } => "compare",
            SemanticForm::CountAbove { .. } => "count_above",
            SemanticForm::CountBelow { .. } => "count_below",
            SemanticForm::FilterAbove { .. } => "filter_above",
            SemanticForm::FilterBelow { .. } => "filter_below",
            SemanticForm::MedianCompare { .. } => "median_compare",
            SemanticForm::TrendSign { .. } => "trend_sign",
            SemanticForm::ShareCompare { .. } => "share_compare",
        }
    }

    /// Structural forms ask about chart composition; the rest relate values.
    pub fn is_structural(&self) -> bool {
        matches!(
            self,
            SemanticForm::ChartType
                | SemanticForm::Count { .. }
                | SemanticForm::Present { .. }
                | SemanticForm::TitleText { .. }
        )
    }
}

fn unsupported(form: &SemanticForm, spec: &ChartSpec) -> OracleError {
    OracleError::Unsupported {
        op: form.op_name(),
        chart_type: spec.chart_type,
    }
}

/// Category index behind a reference, if it names a rendered category label.
pub fn resolve_category(spec: &ChartSpec, r: ElementRef) -> Result<usize, OracleError> {
    let ct = spec.chart_type;
    let ok = match ct {
        ChartType::Scatter => false,
        ChartType::Pie | ChartType::Donut => match spec.style.pie_labeling {
            PieLabeling::Direct => r.element_type == ElementType::PieLabel,
            PieLabeling::Legend => r.element_type == ElementType::LegendLabel,
        },
        _ => r.element_type == ElementType::XLabel,
    };
    if ok && r.order < spec.category_labels.len() {
        Ok(r.order)
    } else {
        Err(OracleError::Unresolvable(r))
    }
}

/// Series index behind a reference: a legend entry on multi-series charts,
/// the legend title on a pie.
pub fn resolve_series(spec: &ChartSpec, r: ElementRef) -> Result<usize, OracleError> {
    let ct = spec.chart_type;
    let ok = if ct.is_pie() {
        r.element_type == ElementType::LegendTitle && r.order == 0 && spec.legend_title.is_some()
    } else {
        r.element_type == ElementType::LegendLabel && spec.has_legend() && r.order < spec.series.len()
    };
    if ok && !ct.is_box() && ct != ChartType::Scatter {
        Ok(r.order)
    } else {
        Err(OracleError::Unresolvable(r))
    }
}

/// The per-category values a relational question ranges over.
pub fn category_values(spec: &ChartSpec, series: Option<ElementRef>) -> Result<Vec<f64>, OracleError> {
    let ct = spec.chart_type;
    match (ct, series) {
        (ChartType::Scatter, _) => Err(OracleError::Missing("categories")),
        (ChartType::BoxH | ChartType::BoxV, None) => Ok(spec
            .box_stats
            .as_ref()
            .ok_or(OracleError::Missing("box statistics"))?
            .iter()
            .map(|b| b.median)
            .collect()),
        (ChartType::BoxH | ChartType::BoxV, Some(r)) => Err(OracleError::Unresolvable(r)),
        (ChartType::StackedBarH | ChartType::StackedBarV, None) => {
            let n = spec.category_labels.len();
            Ok((0..n).map(|i| spec.series.iter().map(|s| s.values[i]).sum()).collect())
        }
        (_, Some(r)) => Ok(spec.series[resolve_series(spec, r)?].values.clone()),
        (_, None) if spec.series.len() == 1 => Ok(spec.series[0].values.clone()),
        (_, None) => Err(OracleError::SeriesRequired),
    }
}

fn labels_where(spec: &ChartSpec, keep: impl Fn(usize) -> bool) -> Vec<String> {
    (0..spec.category_labels.len())
        .filter(|&i| keep(i))
        .map(|i| spec.category_labels[i].clone())
        .collect()
}

fn extreme_indices(values: &[f64], greatest: bool) -> Vec<usize> {
    let best = if greatest {
        values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    } else {
        values.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    (0..values.len()).filter(|&i| nearly_equal(values[i], best)).collect()
}

fn yes_no(b: bool) -> Vec<String> {
    vec![if b { "Yes" } else { "No" }.to_string()]
}

fn count_answer(n: usize) -> Vec<String> {
    vec![if n == 0 { "None".to_string() } else { n.to_string() }]
}

/// Sign of the least-squares slope; `None` when flat.
pub fn slope_sign(xs: &[f64], ys: &[f64]) -> Option<bool> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut mag = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let t = (x - mx) * (y - my);
        cov += t;
        mag += t.abs();
    }
    if cov.abs() <= VALUE_REL_TOL * mag || mag == 0.0 {
        None
    } else {
        Some(cov > 0.0)
    }
}

/// Ground-truth answers for a bound form. An empty result means the
/// question has no answer on this chart and must not be asked. Multiple
/// answers come in category (or series) order.
pub fn solve(form: &SemanticForm, spec: &ChartSpec) -> Result<Vec<String>, OracleError> {
    let ct = spec.chart_type;
    Ok(match form {
        SemanticForm::ChartType => vec![ct.display_name().to_string()],
        SemanticForm::Count { target } => {
            let n = spec.category_labels.len();
            let k = spec.series.len();
            let count = match target {
                CountTarget::Bars if ct.is_grouped() => n * k,
                CountTarget::Groups if ct.is_grouped() || ct.is_stacked() => n,
                CountTarget::Segments if ct.is_stacked() => k,
                CountTarget::LegendEntries if spec.has_legend() => spec.legend_entries().len(),
                CountTarget::LegendEntries => 0,
                CountTarget::Wedges if ct.is_pie() => n,
                CountTarget::Lines if ct == ChartType::Line => k,
                CountTarget::Boxes if ct.is_box() => n,
                CountTarget::Points if ct == ChartType::Scatter => spec.n_categories(),
                _ => return Err(unsupported(form, spec)),
            };
            count_answer(count)
        }
        SemanticForm::Present { target } => yes_no(match target {
            PresentTarget::Legend => spec.has_legend(),
            PresentTarget::LegendTitle => spec.legend_title.is_some(),
            PresentTarget::AxisTitles if !ct.is_pie() => spec.axis_titles.is_some(),
            PresentTarget::ErrorBars if ct.is_grouped() => spec.series.iter().any(|s| s.errors.is_some()),
            PresentTarget::WedgeValues if ct.is_pie() => spec.style.pie_values,
            PresentTarget::GridLines if !ct.is_pie() => spec.style.grid_style != crate::synth::style::GridStyle::None,
            _ => return Err(unsupported(form, spec)),
        }),
        SemanticForm::TitleText { which } => vec![match which {
            TitleKind::Chart => spec.title.clone(),
            TitleKind::XAxis => spec.axis_titles.as_ref().ok_or(OracleError::Missing("axis titles"))?.x.clone(),
            TitleKind::YAxis => spec.axis_titles.as_ref().ok_or(OracleError::Missing("axis titles"))?.y.clone(),
            TitleKind::Legend => spec.legend_title.clone().ok_or(OracleError::Missing("legend title"))?,
        }],
        SemanticForm::Argmax { series } | SemanticForm::Argmin { series } => {
            let v = category_values(spec, *series)?;
            let idx = extreme_indices(&v, matches!(form, SemanticForm::Argmax { .. }));
            labels_where(spec, |i| idx.contains(&i))
        }
        SemanticForm::ArgmaxAcross { category } | SemanticForm::ArgminAcross { category } => {
            if !(ct.is_grouped() || ct.is_stacked() || ct == ChartType::Line) || !spec.has_legend() {
                return Err(unsupported(form, spec));
            }
            let i = resolve_category(spec, *category)?;
            let v: Vec<f64> = spec.series.iter().map(|s| s.values[i]).collect();
            let idx = extreme_indices(&v, matches!(form, SemanticForm::ArgmaxAcross { .. }));
            idx.into_iter().map(|j| spec.series[j].label.clone()).collect()
        }
        SemanticForm::Compare { a, b, series, relation } => {
            if ct.is_box() || ct == ChartType::Scatter {
                return Err(unsupported(form, spec));
            }
            let (ia, ib) = (resolve_category(spec, *a)?, resolve_category(spec, *b)?);
            let v = category_values(spec, *series)?;
            yes_no(relation.holds(v[ia], v[ib]))
        }
        SemanticForm::CountAbove { reference, series }
        | SemanticForm::CountBelow { reference, series }
        | SemanticForm::FilterAbove { reference, series }
        | SemanticForm::FilterBelow { reference, series } => {
            let r = resolve_category(spec, *reference)?;
            let v = category_values(spec, *series)?;
            let relation = match form {
                SemanticForm::CountAbove { .. } | SemanticForm::FilterAbove { .. } => Relation::Greater,
                _ => Relation::Less,
            };
            let hit = |i: usize| i != r && relation.holds(v[i], v[r]);
            match form {
                SemanticForm::CountAbove { .. } | SemanticForm::CountBelow { .. } => {
                    count_answer((0..v.len()).filter(|&i| hit(i)).count())
                }
                _ => labels_where(spec, hit),
            }
        }
        SemanticForm::MedianCompare { a, b, relation } => {
            if !ct.is_box() {
                return Err(unsupported(form, spec));
            }
            let (ia, ib) = (resolve_category(spec, *a)?, resolve_category(spec, *b)?);
            let v = category_values(spec, None)?;
            yes_no(relation.holds(v[ia], v[ib]))
        }
        SemanticForm::TrendSign { series } => {
            let (xs, ys): (Vec<f64>, Vec<f64>) = match ct {
                ChartType::Scatter => {
                    if let Some(r) = series {
                        return Err(OracleError::Unresolvable(*r));
                    }
                    (
                        spec.x_values.clone().ok_or(OracleError::Missing("x values"))?,
                        spec.series[0].values.clone(),
                    )
                }
                ChartType::Line => {
                    let ys = category_values(spec, *series)?;
                    ((0..ys.len()).map(|i| i as f64).collect(), ys)
                }
                _ => return Err(unsupported(form, spec)),
            };
            match slope_sign(&xs, &ys) {
                Some(true) => vec!["positive".to_string()],
                Some(false) => vec!["negative".to_string()],
                None => Vec::new(),
            }
        }
        SemanticForm::ShareCompare { a, b, relation } => {
            if !ct.is_pie() {
                return Err(unsupported(form, spec));
            }
            let (ia, ib) = (resolve_category(spec, *a)?, resolve_category(spec, *b)?);
            let v = &spec.series[0].values;
            yes_no(relation.holds(v[ia], v[ib]))
        }
    })
}
