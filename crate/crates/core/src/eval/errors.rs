use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{classify_error, spearman, ErrorCounts};
use crate::error::{invalid_argument, Result};
use crate::generator::Generator;
use crate::ink::TokenSequence;
use crate::mixture::{SamplingConfig, SamplingMethod};
use crate::nn::substream_seed;
use crate::pipeline::select;
use crate::ranking::{Ranker, Recognizer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    /// Top-P mass.
    pub p: f64,
    pub ranked: bool,
    pub counts: ErrorCounts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorStudy {
    pub rows: Vec<ErrorRow>,
    /// Batch size of the ranked rows.
    pub batch: usize,
}

impl ErrorStudy {
    fn column(&self, ranked: bool, f: impl Fn(&ErrorCounts) -> usize) -> (Vec<f64>, Vec<f64>) {
        self.rows
            .iter()
            .filter(|r| r.ranked == ranked)
            .map(|r| (r.p, f(&r.counts) as f64))
            .unzip()
    }

    /// Spearman correlation of P with the unranked overconfidence counts.
    pub fn rho_overconfidence(&self) -> Option<f64> {
        let (p, c) = self.column(false, |c| c.overconfidence);
        spearman(&p, &c)
    }

    /// Spearman correlation of P with the unranked incoherence counts.
    pub fn rho_incoherence(&self) -> Option<f64> {
        let (p, c) = self.column(false, |c| c.incoherence);
        spearman(&p, &c)
    }

    /// Number of P values whose ranked overconfidence count is at most the
    /// unranked one.
    pub fn ranked_overconfidence_not_worse(&self) -> usize {
        let (p, unranked) = self.column(false, |c| c.overconfidence);
        let (pr, ranked) = self.column(true, |c| c.overconfidence);
        p.iter()
            .zip(&unranked)
            .filter(|(p, u)| pr.iter().zip(&ranked).any(|(q, r)| q == *p && r <= u))
            .count()
    }
}

/// Error counts per Top-P mass with zero bias, unranked (first candidate)
/// and, when a ranker is given, with R1 choosing among `batch` candidates.
/// Generation `g` uses the same RNG substream for every P.
pub fn error_study(
    gen: &Generator,
    ranker: Option<&Ranker>,
    rec: &dyn Recognizer,
    labels: &[String],
    ps: &[f64],
    generations: usize,
    batch: usize,
    seed: u64,
) -> Result<ErrorStudy> {
    if labels.is_empty() || ps.is_empty() || generations == 0 || batch == 0 {
        return Err(invalid_argument("error study needs labels, P values, generations and a batch"));
    }
    let mut rows = Vec::new();
    for &p in ps {
        let cfg = SamplingConfig::new(SamplingMethod::TopP, p, 0.0)?;
        let b = if ranker.is_some() { batch } else { 1 };
        let per_gen: Vec<(ErrorCounts, ErrorCounts)> = (0..generations)
            .into_par_iter()
            .map(|g| {
                let label = &labels[g % labels.len()];
                let cands = gen.decode_batch(label, &cfg, b, substream_seed(seed, g as u64))?;
                let mut plain = ErrorCounts::default();
                let first = &cands[0];
                plain.add(classify_error(&first.diag, &rec.recognize(&first.sequence), label));
                let mut ranked = ErrorCounts::default();
                if let Some(r) = ranker {
                    let seqs: Vec<TokenSequence> = cands.iter().map(|c| c.sequence.clone()).collect();
                    let sel = select(r, rec, &seqs, label, 1, false)?;
                    let w = &cands[sel.winner];
                    ranked.add(classify_error(&w.diag, &rec.recognize(&w.sequence), label));
                }
                Ok((plain, ranked))
            })
            .collect::<Result<_>>()?;
        let mut plain = ErrorCounts::default();
        let mut ranked = ErrorCounts::default();
        for (a, b) in &per_gen {
            plain.merge(a);
            ranked.merge(b);
        }
        rows.push(ErrorRow {
            p,
            ranked: false,
            counts: plain,
        });
        if ranker.is_some() {
            rows.push(ErrorRow {
                p,
                ranked: true,
                counts: ranked,
            });
        }
    }
    Ok(ErrorStudy { rows, batch })
}
