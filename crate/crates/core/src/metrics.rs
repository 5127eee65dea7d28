//! Detection metrics over before/after-commit alarm locations.

use std::collections::BTreeSet;
use std::ops::{Add, AddAssign};
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

/// Largest sample size for which p-values come from the exact null distribution.
pub const EXACT_LIMIT: usize = 25;

/// Absolute differences closer than this are ranked as ties.
pub const TIE_EPSILON: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("samples are empty")]
    Empty,
    #[error("paired samples differ in length ({0} vs {1})")]
    Length(usize, usize),
    #[error("non-finite sample value")]
    NonFinite,
    #[error("{0} is undefined: zero denominator")]
    Undefined(&'static str),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Format {
        path: String,
        source: serde_json::Error,
    },
    #[error("record {id}: line numbers must be positive")]
    LineZero { id: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VulnRecord {
    pub id: String,
    pub truth_before: BTreeSet<usize>,
    pub truth_after: BTreeSet<usize>,
    pub detect_before: BTreeSet<usize>,
    pub detect_after: BTreeSet<usize>,
}

impl VulnRecord {
    fn check(&self) -> Result<(), MetricsError> {
        let sets = [
            &self.truth_before,
            &self.truth_after,
            &self.detect_before,
            &self.detect_after,
        ];
        if sets.iter().any(|s| s.contains(&0)) {
            return Err(MetricsError::LineZero {
                id: self.id.clone(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Strict,
    Relaxed,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Mode, String> {
        match s {
            "strict" => Ok(Mode::Strict),
            "relaxed" => Ok(Mode::Relaxed),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub fp: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fn_: u64, tn: u64, fp: u64) -> Self {
        ConfusionMatrix { tp, fn_, tn, fp }
    }
}

impl Add for ConfusionMatrix {
    type Output = ConfusionMatrix;
    fn add(self, o: ConfusionMatrix) -> ConfusionMatrix {
        ConfusionMatrix::new(
            self.tp + o.tp,
            self.fn_ + o.fn_,
            self.tn + o.tn,
            self.fp + o.fp,
        )
    }
}

impl AddAssign for ConfusionMatrix {
    fn add_assign(&mut self, o: ConfusionMatrix) {
        *self = *self + o;
    }
}

impl std::iter::Sum for ConfusionMatrix {
    fn sum<I: Iterator<Item = ConfusionMatrix>>(iter: I) -> Self {
        iter.fold(ConfusionMatrix::default(), Add::add)
    }
}

fn n(x: usize) -> u64 {
    x as u64
}

pub fn confusion_strict(rec: &VulnRecord) -> ConfusionMatrix {
    ConfusionMatrix {
        tp: n(rec.truth_before.intersection(&rec.detect_before).count()),
        fn_: n(rec.truth_before.difference(&rec.detect_before).count()),
        tn: n(rec.truth_after.difference(&rec.detect_after).count()),
        fp: n(rec.detect_before.difference(&rec.truth_before).count()) + n(rec.detect_after.len()),
    }
}

pub fn confusion_relaxed(rec: &VulnRecord) -> ConfusionMatrix {
    let (tb, db) = (n(rec.truth_before.len()), n(rec.detect_before.len()));
    let (ta, da) = (n(rec.truth_after.len()), n(rec.detect_after.len()));
    ConfusionMatrix {
        tp: tb.min(db),
        fn_: tb.saturating_sub(db),
        tn: ta.saturating_sub(da),
        fp: db.saturating_sub(tb) + da,
    }
}

pub fn confusion(rec: &VulnRecord, mode: Mode) -> ConfusionMatrix {
    match mode {
        Mode::Strict => confusion_strict(rec),
        Mode::Relaxed => confusion_relaxed(rec),
    }
}

/// Per-location totals: matrices are summed before any ratio is taken.
pub fn aggregate(records: &[VulnRecord], mode: Mode) -> ConfusionMatrix {
    records.iter().map(|r| confusion(r, mode)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
}

pub fn sensitivity(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    match cm.tp + cm.fn_ {
        0 => Err(MetricsError::Undefined("sensitivity")),
        d => Ok(cm.tp as f64 / d as f64),
    }
}

pub fn specificity(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    match cm.tn + cm.fp {
        0 => Err(MetricsError::Undefined("specificity")),
        d => Ok(cm.tn as f64 / d as f64),
    }
}

pub fn precision(cm: &ConfusionMatrix) -> f64 {
    match cm.tp + cm.fp {
        0 => 0.0,
        d => cm.tp as f64 / d as f64,
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics, MetricsError> {
    Ok(Metrics {
        sensitivity: sensitivity(cm)?,
        specificity: specificity(cm)?,
        precision: precision(cm),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Wilcoxon {
    pub n: usize,
    pub zeros: usize,
    pub r_plus: f64,
    pub r_minus: f64,
    /// Two-sided.
    pub p_value: f64,
    pub effect_size: f64,
    pub method: PMethod,
}

/// Average ranks of `values` (1-based), ties within [`TIE_EPSILON`].
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && values[idx[j]] - values[idx[i]] <= TIE_EPSILON {
            j += 1;
        }
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<Wilcoxon, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::Length(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricsError::Empty);
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(MetricsError::NonFinite);
    }
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            if (x - y).abs() <= TIE_EPSILON {
                0.0
            } else {
                x - y
            }
        })
        .collect();
    let ranks = average_ranks(&d.iter().map(|x| x.abs()).collect::<Vec<_>>());
    // Ranks are multiples of 1/2, so doubled ranks are exact integers.
    let doubled: Vec<u64> = ranks.iter().map(|r| (r * 2.0).round() as u64).collect();
    let mut plus2 = 0u64;
    let mut zero2 = 0u64;
    let mut signed2 = Vec::new();
    for (di, &r2) in d.iter().zip(&doubled) {
        if *di > 0.0 {
            plus2 += r2;
            signed2.push(r2);
        } else if *di < 0.0 {
            signed2.push(r2);
        } else {
            zero2 += r2;
        }
    }
    let total2: u64 = doubled.iter().sum();
    let r_plus = (plus2 as f64 + zero2 as f64 / 2.0) / 2.0;
    let r_minus = total2 as f64 / 2.0 - r_plus;
    let effect_size = r_plus / (r_plus + r_minus);
    let (p_value, method) = if a.len() <= EXACT_LIMIT {
        (exact_p(&signed2, plus2), PMethod::Exact)
    } else {
        (normal_p(&signed2, plus2), PMethod::Normal)
    };
    Ok(Wilcoxon {
        n: a.len(),
        zeros: d.iter().filter(|x| **x == 0.0).count(),
        r_plus,
        r_minus,
        p_value,
        effect_size,
        method,
    })
}

/// P(|S - mean| >= |observed - mean|) over the 2^m sign assignments of the
/// non-zero doubled ranks `r2`; `obs2` is the doubled positive sum.
fn exact_p(r2: &[u64], obs2: u64) -> f64 {
    let total: u64 = r2.iter().sum();
    if r2.is_empty() {
        return 1.0;
    }
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    for &r in r2 {
        for s in (r as usize..=total as usize).rev() {
            counts[s] += counts[s - r as usize];
        }
    }
    // Compare |2S - total| with |2*obs - total| in integers.
    let dev = |s: u64| (2 * s).abs_diff(total);
    let observed = dev(obs2);
    let hits: u64 = (0..=total)
        .filter(|&s| dev(s) >= observed)
        .map(|s| counts[s as usize])
        .sum();
    (hits as f64 / 2f64.powi(r2.len() as i32)).min(1.0)
}

fn normal_p(r2: &[u64], obs2: u64) -> f64 {
    let mean2 = r2.iter().sum::<u64>() as f64 / 2.0;
    let var2: f64 = r2.iter().map(|&r| (r as f64).powi(2)).sum::<f64>() / 4.0;
    if var2 == 0.0 {
        return 1.0;
    }
    let z = (obs2 as f64 - mean2).abs() / var2.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * (1.0 - normal.cdf(z))).min(1.0)
}

/// Reads every `*.json` file in `dir` (sorted by name); each holds one record
/// or a list of records.
pub fn load_records(dir: &Path) -> Result<Vec<VulnRecord>, MetricsError> {
    let io = |source| MetricsError::Io {
        path: dir.display().to_string(),
        source,
    };
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(io)?
        .collect::<Result<Vec<_>, _>>()
        .map_err(io)?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let path = p.display().to_string();
        let text = std::fs::read_to_string(&p).map_err(|source| MetricsError::Io {
            path: path.clone(),
            source,
        })?;
        out.extend(parse_records(&text).map_err(|source| MetricsError::Format { path, source })?);
    }
    for r in &out {
        r.check()?;
    }
    Ok(out)
}

pub fn parse_records(text: &str) -> Result<Vec<VulnRecord>, serde_json::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(VulnRecord),
        Many(Vec<VulnRecord>),
    }
    Ok(match serde_json::from_str(text)? {
        OneOrMany::One(r) => vec![r],
        OneOrMany::Many(v) => v,
    })
}
