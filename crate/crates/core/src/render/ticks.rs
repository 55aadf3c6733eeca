//! Nice-number tick selection for linear value axes.

/// Step multipliers tried at every power of ten.
pub const NICE_STEPS: [f64; 4] = [1.0, 2.0, 2.5, 5.0];
pub const MIN_TICKS: usize = 4;
pub const MAX_TICKS: usize = 8;
const PREFERRED_TICKS: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct Ticks {
    pub values: Vec<f64>,
    pub step: f64,
    pub labels: Vec<String>,
}

impl Ticks {
    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Fraction of the axis span at which `v` sits.
    pub fn fraction(&self, v: f64) -> f64 {
        (v - self.first()) / (self.last() - self.first())
    }
}

/// Ticks covering `[lo, hi]` with 4 to 8 marks at a step of 1, 2, 2.5 or 5
/// times a power of ten. Among candidates the count nearest 6 wins, then
/// the tightest cover, then the smaller step.
pub fn nice_ticks(lo: f64, hi: f64) -> Ticks {
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()).max(1.0) {
        let d = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        lo -= d;
        hi += d;
    }
    let span = hi - lo;
    let base = (span / MAX_TICKS as f64).log10().floor() as i32;
    let mut best: Option<((usize, f64, f64), f64, i64, i64)> = None;
    for exp in base - 1..=base + 2 {
        for mult in NICE_STEPS {
            let step = mult * 10f64.powi(exp);
            let i0 = (lo / step + 1e-9).floor() as i64;
            let i1 = (hi / step - 1e-9).ceil() as i64;
            let count = (i1 - i0 + 1) as usize;
            if !(MIN_TICKS..=MAX_TICKS).contains(&count) {
                continue;
            }
            let cover = (i1 - i0) as f64 * step / span;
            let key = (count.abs_diff(PREFERRED_TICKS), cover, step);
            let better = match &best {
                None => true,
                Some((k, ..)) => {
                    (key.0, key.1, key.2).partial_cmp(&(k.0, k.1, k.2)) == Some(std::cmp::Ordering::Less)
                }
            };
            if better {
                best = Some((key, step, i0, i1));
            }
        }
    }
    let (_, step, i0, i1) = best.expect("a nice step always exists between span/7 and span/3");
    let values: Vec<f64> = (i0..=i1).map(|i| i as f64 * step).collect();
    let labels = format_ticks(&values, step);
    Ticks { values, step, labels }
}

/// Tick labels rounded to the step's precision, trailing zeros trimmed,
/// with compact k/M suffixes.
pub fn format_ticks(values: &[f64], step: f64) -> Vec<String> {
    let max = values.iter().fold(0f64, |m, v| m.max(v.abs()));
    let (scale, suffix) = if max >= 1e6 {
        (1e6, "M")
    } else if max >= 1e4 {
        (1e3, "k")
    } else {
        (1.0, "")
    };
    let decimals = decimals_for(step / scale);
    values
        .iter()
        .map(|v| {
            let mut s = format!("{:.*}", decimals, v / scale);
            if s.contains('.') {
                s = s.trim_end_matches('0').trim_end_matches('.').to_string();
            }
            let s = if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
                s.trim_start_matches('-').to_string()
            } else {
                s
            };
            if s.chars().all(|c| c == '0' || c == '.') {
                "0".to_string()
            } else {
                format!("{s}{suffix}")
            }
        })
        .collect()
}

fn decimals_for(step: f64) -> usize {
    let mut d = 0;
    while d < 12 {
        let scaled = step * 10f64.powi(d as i32);
        if (scaled - scaled.round()).abs() < 1e-6 * scaled.max(1.0) {
            return d;
        }
        d += 1;
    }
    d
}

/// Short decimal rendering of a data value (at most two decimals).
pub fn format_value(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}
