use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cer, classify_error, pareto_frontier, ErrorCounts};
use crate::error::{invalid_argument, Result};
use crate::generator::Generator;
use crate::ink::TokenSequence;
use crate::mixture::SamplingConfig;
use crate::nn::substream_seed;
use crate::pipeline::select;
use crate::ranking::{r1_score, Ranker, Recognizer};

/// R values tried for every B, filtered to `R <= B`.
pub const RERANK_GRID: [usize; 7] = [1, 2, 4, 8, 16, 32, 64];

/// Stage costs for one batch size, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchTiming {
    pub batch: usize,
    /// One decoding step for the whole batch.
    pub gen_step_ms: f64,
    /// Step time multiplied by the frame cap per character: the analytic
    /// worst case.
    pub gen_bound_per_char_ms: f64,
    /// Slowest observed decoding per character over the timing labels.
    pub gen_observed_per_char_ms: f64,
    /// Slowest R1 time per character for scoring the whole batch.
    pub r1_per_char_ms: f64,
    /// Slowest R2 time per character for one candidate.
    pub r2_per_candidate_per_char_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub batch: usize,
    pub rerank: usize,
    pub sampling: SamplingConfig,
    pub mean_cer: f64,
    pub worst_per_char_ms: f64,
    pub error_counts: ErrorCounts,
    pub n_labels: usize,
    pub seed: u64,
    pub frontier: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub batch_table: Vec<BatchTiming>,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Worst-case time per character of configuration `(B, R)`: the decoding
/// bound plus the rankers that actually run.
pub fn row_cost(t: &BatchTiming, rerank: usize) -> f64 {
    let b = t.batch;
    let mut cost = t.gen_bound_per_char_ms;
    if b > 1 {
        if rerank < b {
            cost += t.r1_per_char_ms;
        }
        if rerank > 1 {
            cost += rerank as f64 * t.r2_per_candidate_per_char_ms;
        }
    }
    cost
}

/// Measures stage costs for every batch size on `timing_labels`, taking the
/// fastest of `repeats` runs of each measurement.
pub fn measure_batch_timing(
    gen: &Generator,
    ranker: &Ranker,
    rec: &dyn Recognizer,
    timing_labels: &[String],
    sampling: &SamplingConfig,
    batches: &[usize],
    seed: u64,
    repeats: usize,
) -> Result<Vec<BatchTiming>> {
    if timing_labels.is_empty() || batches.is_empty() {
        return Err(invalid_argument("timing needs labels and batch sizes"));
    }
    let repeats = repeats.max(1);
    let frames = gen.config().max_frames_per_char;
    let bmax = *batches.iter().max().expect("non-empty");
    let probe = timing_labels.iter().max_by_key(|l| l.chars().count()).expect("non-empty");
    let steps = frames * probe.chars().count();

    // per-candidate ranker costs, measured once on the largest batch
    let mut r1_unit = 0.0f64;
    let mut r2_unit = 0.0f64;
    let mut observed: Vec<(usize, f64)> = batches.iter().map(|&b| (b, 0.0)).collect();
    for (j, label) in timing_labels.iter().enumerate() {
        let chars = label.chars().count() as f64;
        let s = substream_seed(seed, j as u64);
        let mut cands = Vec::new();
        for (b, worst) in observed.iter_mut() {
            let mut best = f64::INFINITY;
            for _ in 0..repeats {
                let t = Instant::now();
                let c = gen.decode_batch(label, sampling, *b, s)?;
                best = best.min(ms(t));
                if *b == bmax {
                    cands = c;
                }
            }
            *worst = worst.max(best / chars);
        }
        let seqs: Vec<TokenSequence> = cands.into_iter().map(|c| c.sequence).collect();
        let mut best = f64::INFINITY;
        for _ in 0..repeats {
            let t = Instant::now();
            std::hint::black_box(r1_score(ranker, &seqs));
            best = best.min(ms(t));
        }
        r1_unit = r1_unit.max(best / (seqs.len() as f64 * chars));
        for seq in &seqs {
            let mut best = f64::INFINITY;
            for _ in 0..repeats {
                let t = Instant::now();
                std::hint::black_box(rec.recognize(seq));
                best = best.min(ms(t));
            }
            r2_unit = r2_unit.max(best / chars);
        }
    }
    let mut out = Vec::with_capacity(batches.len());
    for &b in batches {
        let mut step = f64::INFINITY;
        for _ in 0..repeats {
            step = step.min(gen.step_time_ms(probe, sampling, b, steps, seed)?);
        }
        let obs = observed.iter().find(|(x, _)| *x == b).map_or(0.0, |(_, w)| *w);
        out.push(BatchTiming {
            batch: b,
            gen_step_ms: step,
            gen_bound_per_char_ms: step * frames as f64,
            gen_observed_per_char_ms: obs,
            r1_per_char_ms: if b > 1 { r1_unit * b as f64 } else { 0.0 },
            r2_per_candidate_per_char_ms: if b > 1 { r2_unit } else { 0.0 },
        });
    }
    Ok(out)
}

/// Mean winner CER and worst-case time per character for every `(B, R)`
/// with `R` from [`RERANK_GRID`] and `R <= B`. Candidates for label `j`
/// come from RNG substream `j`, and candidate `i` does not depend on `B`,
/// so smaller budgets see a prefix of the same candidates.
#[allow(clippy::too_many_arguments)]
pub fn budget_sweep(
    gen: &Generator,
    ranker: &Ranker,
    rec: &dyn Recognizer,
    labels: &[String],
    sampling: &SamplingConfig,
    batches: &[usize],
    seed: u64,
    timing_labels: usize,
) -> Result<SweepReport> {
    if labels.is_empty() || batches.is_empty() || batches.contains(&0) {
        return Err(invalid_argument("sweep needs labels and positive batch sizes"));
    }
    let mut batches = batches.to_vec();
    batches.sort_unstable();
    batches.dedup();
    let bmax = *batches.last().expect("non-empty");
    let pairs: Vec<(usize, usize)> = batches
        .iter()
        .flat_map(|&b| RERANK_GRID.iter().filter(move |&&r| r <= b).map(move |&r| (b, r)))
        .collect();

    let per_label: Vec<Vec<(f64, crate::eval::ErrorKind)>> = labels
        .par_iter()
        .enumerate()
        .map(|(j, label)| {
            let cands = gen.decode_batch(label, sampling, bmax, substream_seed(seed, j as u64))?;
            let seqs: Vec<TokenSequence> = cands.iter().map(|c| c.sequence.clone()).collect();
            pairs
                .iter()
                .map(|&(b, r)| {
                    let sel = select(ranker, rec, &seqs[..b], label, r, false)?;
                    let w = &cands[sel.winner];
                    let recognized = sel
                        .r2_evaluated
                        .iter()
                        .find(|e| e.index == sel.winner)
                        .map(|e| e.recognized.clone())
                        .unwrap_or_else(|| rec.recognize(&w.sequence));
                    Ok((cer(&recognized, label)?, classify_error(&w.diag, &recognized, label)))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let n_timing = timing_labels.clamp(1, labels.len());
    let batch_table = measure_batch_timing(gen, ranker, rec, &labels[..n_timing], sampling, &batches, seed, 3)?;
    let mut rows: Vec<SweepRow> = pairs
        .iter()
        .enumerate()
        .map(|(k, &(b, r))| {
            let mut counts = ErrorCounts::default();
            let mut total = 0.0;
            for res in &per_label {
                total += res[k].0;
                counts.add(res[k].1);
            }
            let t = batch_table.iter().find(|t| t.batch == b).expect("timed every batch");
            SweepRow {
                batch: b,
                rerank: r,
                sampling: *sampling,
                mean_cer: total / labels.len() as f64,
                worst_per_char_ms: row_cost(t, r),
                error_counts: counts,
                n_labels: labels.len(),
                seed,
                frontier: false,
            }
        })
        .collect();
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.worst_per_char_ms, r.mean_cer)).collect();
    for (row, flag) in rows.iter_mut().zip(pareto_frontier(&points)) {
        row.frontier = flag;
    }
    Ok(SweepReport { rows, batch_table })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cost_model_cases() {
        let t = BatchTiming {
            batch: 4,
            gen_step_ms: 1.0,
            gen_bound_per_char_ms: 10.0,
            gen_observed_per_char_ms: 5.0,
            r1_per_char_ms: 2.0,
            r2_per_candidate_per_char_ms: 3.0,
        };
        assert_eq!(row_cost(&t, 1), 12.0);
        assert_eq!(row_cost(&t, 2), 18.0);
        assert_eq!(row_cost(&t, 4), 22.0);
        let one = BatchTiming { batch: 1, ..t };
        assert_eq!(row_cost(&one, 1), 10.0);
    }
}
