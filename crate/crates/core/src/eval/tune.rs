use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cer, is_baseline, SamplingPool};
use crate::error::{invalid_argument, Result};
use crate::generator::Generator;
use crate::mixture::SamplingConfig;
use crate::nn::substream_seed;
use crate::ranking::Recognizer;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub sampling: SamplingConfig,
    pub mean_cer: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    /// One row per pool entry, in pool order.
    pub rows: Vec<GridRow>,
    pub best: GridRow,
    /// Best of the baseline subset, evaluated even when the pool lacks it.
    pub baseline: GridRow,
}

/// Mean unranked CER of `cfg`: one candidate per (label, sample). Sample
/// `(j, s)` always uses RNG substream `j * samples_per_label + s`, so every
/// configuration sees the same random numbers.
pub fn evaluate_sampling(
    gen: &Generator,
    rec: &dyn Recognizer,
    cfg: &SamplingConfig,
    labels: &[String],
    samples_per_label: usize,
    seed: u64,
) -> Result<GridRow> {
    if labels.is_empty() || samples_per_label == 0 {
        return Err(invalid_argument("tuning needs labels and samples"));
    }
    let mut total = 0.0;
    for (j, label) in labels.iter().enumerate() {
        for s in 0..samples_per_label {
            let stream = (j * samples_per_label + s) as u64;
            let cand = gen.decode_batch(label, cfg, 1, substream_seed(seed, stream))?;
            total += cer(&rec.recognize(&cand[0].sequence), label)?;
        }
    }
    let n = labels.len() * samples_per_label;
    Ok(GridRow {
        sampling: *cfg,
        mean_cer: total / n as f64,
        n,
    })
}

/// Lower CER first, then smaller `m`, larger bias, and method order.
fn row_order(a: &GridRow, b: &GridRow) -> Ordering {
    a.mean_cer
        .total_cmp(&b.mean_cer)
        .then(a.sampling.m.total_cmp(&b.sampling.m))
        .then(b.sampling.bias.total_cmp(&a.sampling.bias))
        .then(a.sampling.method.cmp(&b.sampling.method))
}

/// Grid search over `pool` by mean unranked CER.
pub fn tune_sampling(
    gen: &Generator,
    rec: &dyn Recognizer,
    pool: &SamplingPool,
    labels: &[String],
    samples_per_label: usize,
    seed: u64,
) -> Result<TuneResult> {
    pool.validate()?;
    let rows: Vec<GridRow> = pool
        .configs
        .par_iter()
        .map(|cfg| evaluate_sampling(gen, rec, cfg, labels, samples_per_label, seed))
        .collect::<Result<_>>()?;
    let best = *rows.iter().min_by(|a, b| row_order(a, b)).expect("pool is non-empty");
    let baseline_rows: Vec<GridRow> = SamplingPool::baseline()
        .configs
        .par_iter()
        .map(|cfg| match rows.iter().find(|r| r.sampling == *cfg) {
            Some(r) => Ok(*r),
            None => evaluate_sampling(gen, rec, cfg, labels, samples_per_label, seed),
        })
        .collect::<Result<_>>()?;
    debug_assert!(baseline_rows.iter().all(|r| is_baseline(&r.sampling)));
    let baseline = *baseline_rows.iter().min_by(|a, b| row_order(a, b)).expect("four rows");
    Ok(TuneResult { rows, best, baseline })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::SamplingMethod;

    fn row(cer: f64, method: SamplingMethod, m: f64, bias: f64) -> GridRow {
        GridRow {
            sampling: SamplingConfig { method, m, bias },
            mean_cer: cer,
            n: 1,
        }
    }

    #[test]
    fn tie_break_order() {
        use SamplingMethod::*;
        let mut rows = vec![
            row(0.2, TopP, 0.5, 0.0),
            row(0.1, Typical, 0.5, 5.0),
            row(0.1, TopP, 0.5, 5.0),
            row(0.1, TopP, 0.5, f64::INFINITY),
            row(0.1, TopP, 0.3, 0.0),
        ];
        rows.sort_by(row_order);
        assert_eq!(rows[0].sampling.m, 0.3);
        assert_eq!(rows[1].sampling.bias, f64::INFINITY);
        assert_eq!(rows[2].sampling.method, TopP);
        assert_eq!(rows[3].sampling.method, Typical);
    }
}
