//! Evaluation: character error rate, sampling grid search, error taxonomy,
//! budget sweeps, Pareto frontiers and report files.

mod errors;
mod report;
mod sweep;
mod tune;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_argument, Result};
use crate::generator::DecodeDiag;
use crate::mixture::{SamplingConfig, SamplingMethod};

pub use errors::{error_study, ErrorRow, ErrorStudy};
pub use report::{emit_report, errors_csv, frontier_svg, grid_csv, EvalReport, SampleFigure};
pub use sweep::{budget_sweep, measure_batch_timing, row_cost, BatchTiming, SweepReport, SweepRow};
pub use tune::{evaluate_sampling, tune_sampling, GridRow, TuneResult};

/// Levenshtein distance over Unicode scalar values with unit costs.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Character error rate of `hypothesis` against a non-empty `reference`.
pub fn cer(hypothesis: &str, reference: &str) -> Result<f64> {
    let n = reference.chars().count();
    if n == 0 {
        return Err(invalid_argument("CER reference must be non-empty"));
    }
    Ok(edit_distance(hypothesis, reference) as f64 / n as f64)
}

/// The biases searched by default; `inf` collapses to component means.
pub const DEFAULT_BIASES: [f64; 6] = [0.0, 1.0, 5.0, 25.0, 100.0, f64::INFINITY];

/// Candidate sampling configurations for grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SamplingPool {
    pub configs: Vec<SamplingConfig>,
}

impl SamplingPool {
    pub fn new(configs: Vec<SamplingConfig>) -> Result<Self> {
        let pool = SamplingPool { configs };
        pool.validate()?;
        Ok(pool)
    }

    pub fn validate(&self) -> Result<()> {
        if self.configs.is_empty() {
            return Err(invalid_argument("sampling pool is empty"));
        }
        self.configs.iter().try_for_each(SamplingConfig::validate)
    }

    /// Top-P and Typical with `m` in 0.0, 0.1, ..., 1.0 and Top-K with `m`
    /// in 1..=10, each crossed with [`DEFAULT_BIASES`]: 192 configurations.
    pub fn default_grid() -> Self {
        let mut configs = Vec::new();
        for &bias in &DEFAULT_BIASES {
            for method in [SamplingMethod::TopP, SamplingMethod::Typical] {
                for i in 0..=10 {
                    configs.push(SamplingConfig {
                        method,
                        m: i as f64 / 10.0,
                        bias,
                    });
                }
            }
            for k in 1..=10 {
                configs.push(SamplingConfig {
                    method: SamplingMethod::TopK,
                    m: k as f64,
                    bias,
                });
            }
        }
        SamplingPool { configs }
    }

    /// Greedy or ancestral component choice with zero or infinite bias.
    pub fn baseline() -> Self {
        let mut configs = Vec::new();
        for m in [0.0, 1.0] {
            for bias in [0.0, f64::INFINITY] {
                configs.push(SamplingConfig {
                    method: SamplingMethod::TopP,
                    m,
                    bias,
                });
            }
        }
        SamplingPool { configs }
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }
}

impl Default for SamplingPool {
    fn default() -> Self {
        SamplingPool::default_grid()
    }
}

/// Whether `cfg` belongs to the baseline subset.
pub fn is_baseline(cfg: &SamplingConfig) -> bool {
    cfg.method == SamplingMethod::TopP && (cfg.m == 0.0 || cfg.m == 1.0) && (cfg.bias == 0.0 || cfg.bias == f64::INFINITY)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Ok,
    /// Unrecognized and stopped at the frame cap.
    Overconfidence,
    /// Unrecognized and ended before the cap.
    Incoherence,
}

/// Recognized samples are `Ok` whatever their length; only failures are
/// split by whether the frame cap was reached.
pub fn classify_error(diag: &DecodeDiag, recognized: &str, label: &str) -> ErrorKind {
    if recognized == label {
        ErrorKind::Ok
    } else if diag.hit_cap {
        ErrorKind::Overconfidence
    } else {
        ErrorKind::Incoherence
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub ok: usize,
    pub overconfidence: usize,
    pub incoherence: usize,
}

impl ErrorCounts {
    pub fn add(&mut self, kind: ErrorKind) {
        match kind {
            ErrorKind::Ok => self.ok += 1,
            ErrorKind::Overconfidence => self.overconfidence += 1,
            ErrorKind::Incoherence => self.incoherence += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.ok + self.overconfidence + self.incoherence
    }

    pub fn merge(&mut self, other: &ErrorCounts) {
        self.ok += other.ok;
        self.overconfidence += other.overconfidence;
        self.incoherence += other.incoherence;
    }
}

/// Flags the points not dominated by any other point, where `(t, c)`
/// dominates `(t', c')` when `t <= t'`, `c <= c'` and one is strict.
pub fn pareto_frontier(points: &[(f64, f64)]) -> Vec<bool> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| points[a].0.total_cmp(&points[b].0).then(points[a].1.total_cmp(&points[b].1)));
    let mut flags = vec![false; points.len()];
    // best cost among strictly cheaper points
    let mut best_cheaper = f64::INFINITY;
    let mut i = 0;
    while i < idx.len() {
        let t = points[idx[i]].0;
        let mut j = i;
        while j < idx.len() && points[idx[j]].0 == t {
            j += 1;
        }
        let group_min = points[idx[i]].1;
        for &k in &idx[i..j] {
            let c = points[k].1;
            flags[k] = c < best_cheaper && c == group_min;
        }
        best_cheaper = best_cheaper.min(group_min);
        i = j;
    }
    flags
}

/// Spearman rank correlation with average ranks for ties; `None` when
/// either side is constant or the lengths differ.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Mean and population standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}
