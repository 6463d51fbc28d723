//! Budget-constrained inference: generate `B` candidates, score them with
//! R1, re-rank the best `R` with R2 and return the winner.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_argument, Result};
use crate::eval::cer;
use crate::generator::{Candidate, Generator};
use crate::ink::TokenSequence;
use crate::mixture::SamplingConfig;
use crate::ranking::{order_entries, R2Entry, Ranker, Recognizer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub sampling: SamplingConfig,
    /// Candidates generated (`B`).
    pub batch: usize,
    /// Candidates re-ranked by R2 (`R`).
    pub rerank: usize,
    #[serde(default)]
    pub early_stop: bool,
    #[serde(default)]
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(sampling: SamplingConfig, batch: usize, rerank: usize) -> Self {
        PipelineConfig {
            sampling,
            batch,
            rerank,
            early_stop: false,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(invalid_argument("B must be at least 1"));
        }
        if self.rerank == 0 || self.rerank > self.batch {
            return Err(invalid_argument(format!("R = {} must be in 1..=B = {}", self.rerank, self.batch)));
        }
        self.sampling.validate()
    }
}

/// Wall-clock stage times in milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub gen_ms: f64,
    pub r1_ms: f64,
    pub r2_ms: f64,
    pub total_ms: f64,
    pub per_char_ms: f64,
}

/// Outcome of ranking a fixed candidate set.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub winner: usize,
    /// One score per candidate, empty when R1 did not run.
    pub r1_scores: Vec<f64>,
    /// R2 verdicts in evaluation order.
    pub r2_evaluated: Vec<R2Entry>,
    pub r1_ms: f64,
    pub r2_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    pub winner: usize,
    pub candidates: Vec<Candidate>,
    pub r1_scores: Vec<f64>,
    pub r2_evaluated: Vec<R2Entry>,
    pub timing: StageTiming,
}

impl PipelineResult {
    pub fn winner_sequence(&self) -> &TokenSequence {
        &self.candidates[self.winner].sequence
    }

    pub fn winner_candidate(&self) -> &Candidate {
        &self.candidates[self.winner]
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Picks the winner among `candidates` with budget `rerank`.
///
/// * one candidate: returned without running a ranker;
/// * `rerank == len`: R1 is skipped and R2 ranks everything;
/// * `rerank == 1`: the highest R1 score wins;
/// * otherwise R2 re-ranks the `rerank` best by R1.
///
/// With `early_stop`, R2 runs in R1 order (index order when R1 is skipped)
/// and stops at the first exact match.
pub fn select(
    ranker: &Ranker,
    rec: &dyn Recognizer,
    candidates: &[TokenSequence],
    label: &str,
    rerank: usize,
    early_stop: bool,
) -> Result<Selection> {
    let b = candidates.len();
    if b == 0 {
        return Err(invalid_argument("no candidates to select from"));
    }
    if rerank == 0 || rerank > b {
        return Err(invalid_argument(format!("R = {rerank} must be in 1..=B = {b}")));
    }
    let mut sel = Selection {
        winner: 0,
        r1_scores: Vec::new(),
        r2_evaluated: Vec::new(),
        r1_ms: 0.0,
        r2_ms: 0.0,
    };
    if b == 1 {
        return Ok(sel);
    }
    let shortlist: Vec<usize> = if rerank == b {
        (0..b).collect()
    } else {
        let t = Instant::now();
        sel.r1_scores = crate::ranking::r1_score(ranker, candidates);
        let mut order: Vec<usize> = (0..b).collect();
        order.sort_by(|&x, &y| sel.r1_scores[y].total_cmp(&sel.r1_scores[x]).then(x.cmp(&y)));
        order.truncate(rerank);
        sel.r1_ms = ms_since(t);
        if rerank == 1 {
            sel.winner = order[0];
            return Ok(sel);
        }
        order
    };
    let t = Instant::now();
    for &i in &shortlist {
        let recognized = rec.recognize(&candidates[i]);
        let c = cer(&recognized, label)?;
        let exact = recognized == label;
        sel.r2_evaluated.push(R2Entry {
            index: i,
            recognized,
            cer: c,
        });
        if early_stop && exact {
            break;
        }
    }
    let scores = (!sel.r1_scores.is_empty()).then_some(sel.r1_scores.as_slice());
    sel.winner = order_entries(&sel.r2_evaluated, label, scores)[0];
    sel.r2_ms = ms_since(t);
    Ok(sel)
}

/// Generates `B` candidates for `label` and returns the best one.
pub fn generate_best(
    gen: &Generator,
    ranker: &Ranker,
    rec: &dyn Recognizer,
    label: &str,
    cfg: &PipelineConfig,
) -> Result<PipelineResult> {
    cfg.validate()?;
    let t = Instant::now();
    let candidates = gen.decode_batch(label, &cfg.sampling, cfg.batch, cfg.seed)?;
    let gen_ms = ms_since(t);
    let seqs: Vec<TokenSequence> = candidates.iter().map(|c| c.sequence.clone()).collect();
    let sel = select(ranker, rec, &seqs, label, cfg.rerank, cfg.early_stop)?;
    let total_ms = gen_ms + sel.r1_ms + sel.r2_ms;
    Ok(PipelineResult {
        winner: sel.winner,
        candidates,
        r1_scores: sel.r1_scores,
        r2_evaluated: sel.r2_evaluated,
        timing: StageTiming {
            gen_ms,
            r1_ms: sel.r1_ms,
            r2_ms: sel.r2_ms,
            total_ms,
            per_char_ms: total_ms / label.chars().count() as f64,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::GeneratorConfig;
    use crate::ink::{InkToken, Repr};
    use crate::ranking::{CountingRecognizer, RankerConfig};

    /// Reads the candidate's first x offset as an index into a word list.
    struct TableRecognizer(Vec<&'static str>);
    impl Recognizer for TableRecognizer {
        fn recognize(&self, seq: &TokenSequence) -> String {
            self.0[seq.tokens[0].geom[0] as usize].to_string()
        }
    }

    fn cand(i: usize, len: usize) -> TokenSequence {
        let mut toks: Vec<InkToken> = (0..len).map(|_| InkToken::new(vec![i as f64, 0.0], false, false)).collect();
        toks.last_mut().unwrap().end_of_ink = true;
        TokenSequence::new(Repr::Raw, toks).unwrap()
    }

    #[test]
    fn rerank_all_picks_min_cer() {
        let rec = TableRecognizer(vec!["xx", "ab", "ax", "zz"]);
        let r = Ranker::zeros(RankerConfig::new(2)).unwrap();
        let c: Vec<_> = (0..4).map(|i| cand(i, 3)).collect();
        let sel = select(&r, &rec, &c, "ab", 4, false).unwrap();
        assert!(sel.r1_scores.is_empty());
        assert_eq!(sel.r2_evaluated.len(), 4);
        assert_eq!(sel.winner, 1);
    }

    #[test]
    fn single_candidate_skips_rankers() {
        let rec = CountingRecognizer::new(TableRecognizer(vec!["ab"]));
        let r = Ranker::zeros(RankerConfig::new(2)).unwrap();
        let sel = select(&r, &rec, &[cand(0, 2)], "ab", 1, false).unwrap();
        assert_eq!(sel.winner, 0);
        assert!(sel.r1_scores.is_empty() && sel.r2_evaluated.is_empty());
        assert_eq!(rec.calls(), 0);
    }

    #[test]
    fn rerank_one_uses_r1_only() {
        let rec = CountingRecognizer::new(TableRecognizer(vec!["ab"; 5]));
        let r = Ranker::init(RankerConfig::new(2), 1).unwrap();
        let c: Vec<_> = (0..5).map(|i| cand(i, 2 + i)).collect();
        let sel = select(&r, &rec, &c, "ab", 1, false).unwrap();
        let best = (0..5).max_by(|&a, &b| sel.r1_scores[a].total_cmp(&sel.r1_scores[b]).then(b.cmp(&a))).unwrap();
        assert_eq!(sel.winner, best);
        assert_eq!(rec.calls(), 0);
    }

    #[test]
    fn early_stop_after_first_exact() {
        let rec = CountingRecognizer::new(TableRecognizer(vec!["ab", "ab", "ab"]));
        let r = Ranker::zeros(RankerConfig::new(2)).unwrap();
        let c: Vec<_> = (0..3).map(|i| cand(i, 2)).collect();
        let sel = select(&r, &rec, &c, "ab", 3, true).unwrap();
        assert_eq!(rec.calls(), 1);
        assert_eq!(sel.winner, 0);
    }

    #[test]
    fn rerank_larger_than_batch_rejected() {
        let g = Generator::init(GeneratorConfig::new("ab", Repr::Raw), 0).unwrap();
        let r = Ranker::zeros(RankerConfig::new(2)).unwrap();
        let rec = TableRecognizer(vec!["ab"]);
        let cfg = PipelineConfig::new(SamplingConfig::ancestral(), 2, 3);
        assert!(matches!(
            generate_best(&g, &r, &rec, "ab", &cfg),
            Err(crate::Error::InvalidArgument(_))
        ));
    }
}
