//! Candidate ranking: a fast learned scorer (R1), a recognizer-based
//! re-ranker (R2), the real-versus-synthetic baseline, and construction of
//! the R1 training set from generator samples.

mod dtw;
mod r1;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_argument, Result};
use crate::eval::cer;
use crate::generator::Generator;
use crate::ink::TokenSequence;
use crate::mixture::SamplingConfig;
use crate::nn::{substream_rng, substream_seed};

pub use dtw::{dtw_distance, normalize_stroke, CountingRecognizer, DtwRecognizer, Recognizer, DEFAULT_RESOLUTION};
pub use r1::{
    r1_score, roc_auc, train_ranker, train_rbase, Ranker, RankerConfig, RankerHyper, RankerTrainReport,
    RANKER_FORMAT_VERSION, RANKER_MAGIC,
};

/// How sampling parameters are chosen when generating R1 training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankerTrainMode {
    /// Uniformly at random from the pool, per sample.
    RandomSampling,
    /// Always ancestral sampling.
    AncestralOnly,
    Fixed(SamplingConfig),
}

/// One R2 verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct R2Entry {
    pub index: usize,
    pub recognized: String,
    pub cer: f64,
}

/// Ranks candidates by (exact match, CER, R1 score descending, index).
/// `r1_scores`, when given, must align with `candidates`. Returns the order
/// and the per-candidate verdicts in input order.
pub fn r2_rank(
    rec: &dyn Recognizer,
    candidates: &[TokenSequence],
    label: &str,
    r1_scores: Option<&[f64]>,
) -> Result<(Vec<usize>, Vec<R2Entry>)> {
    if candidates.is_empty() {
        return Err(invalid_argument("r2_rank needs at least one candidate"));
    }
    if r1_scores.is_some_and(|s| s.len() != candidates.len()) {
        return Err(invalid_argument("R1 scores do not align with candidates"));
    }
    let entries = candidates
        .iter()
        .enumerate()
        .map(|(index, c)| {
            let recognized = rec.recognize(c);
            let cer = cer(&recognized, label)?;
            Ok(R2Entry { index, recognized, cer })
        })
        .collect::<Result<Vec<_>>>()?;
    let order = order_entries(&entries, label, r1_scores);
    Ok((order, entries))
}

/// Sort order of already evaluated entries, returned as their `index`
/// fields.
pub(crate) fn order_entries(entries: &[R2Entry], label: &str, r1_scores: Option<&[f64]>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.sort_by(|&a, &b| {
        let (ea, eb) = (&entries[a], &entries[b]);
        let exact = |e: &R2Entry| e.recognized != label;
        exact(ea)
            .cmp(&exact(eb))
            .then(ea.cer.total_cmp(&eb.cer))
            .then_with(|| match r1_scores {
                Some(s) => s[eb.index].total_cmp(&s[ea.index]),
                None => std::cmp::Ordering::Equal,
            })
            .then(ea.index.cmp(&eb.index))
    });
    order.into_iter().map(|i| entries[i].index).collect()
}

/// A generated sample with its recognizability bit.
#[derive(Debug, Clone, PartialEq)]
pub struct R1Example {
    pub label: String,
    pub sampling: SamplingConfig,
    pub sequence: TokenSequence,
    pub recognizable: bool,
}

/// Generates `n` labelled candidates for R1 training: labels round-robin,
/// sampling per `mode`, one candidate each, target = recognizer output
/// equals the label.
pub fn build_r1_dataset(
    gen: &Generator,
    labels: &[String],
    mode: &RankerTrainMode,
    pool: &[SamplingConfig],
    rec: &dyn Recognizer,
    n: usize,
    seed: u64,
) -> Result<Vec<R1Example>> {
    if labels.is_empty() || n == 0 {
        return Err(invalid_argument("R1 dataset needs labels and a positive size"));
    }
    if matches!(mode, RankerTrainMode::RandomSampling) && pool.is_empty() {
        return Err(invalid_argument("sampling pool is empty"));
    }
    let pick_seed = substream_seed(seed, u64::MAX);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let label = &labels[i % labels.len()];
            let sampling = match mode {
                RankerTrainMode::RandomSampling => {
                    let mut rng = substream_rng(pick_seed, i as u64);
                    pool[rng.random_range(0..pool.len())]
                }
                RankerTrainMode::AncestralOnly => SamplingConfig::ancestral(),
                RankerTrainMode::Fixed(s) => *s,
            };
            let cand = gen.decode_batch(label, &sampling, 1, substream_seed(seed, i as u64))?.remove(0);
            let recognizable = rec.recognize(&cand.sequence) == *label;
            Ok(R1Example {
                label: label.clone(),
                sampling,
                sequence: cand.sequence,
                recognizable,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ink::{InkToken, Repr};

    /// Recognizes a sequence as the label stored in its token count.
    struct LenRecognizer;
    impl Recognizer for LenRecognizer {
        fn recognize(&self, seq: &TokenSequence) -> String {
            ["abc", "abd", "xyz", "abx"][seq.len() - 1].to_string()
        }
    }

    fn cand(len: usize) -> TokenSequence {
        TokenSequence::new(Repr::Raw, (0..len).map(|_| InkToken::new(vec![0.0, 0.0], false, false)).collect()).unwrap()
    }

    #[test]
    fn exact_match_first() {
        let c = vec![cand(2), cand(3), cand(1), cand(4)];
        let (order, entries) = r2_rank(&LenRecognizer, &c, "abc", None).unwrap();
        assert_eq!(order[0], 2);
        assert_eq!(entries[2].cer, 0.0);
        assert_eq!(order, vec![2, 0, 3, 1]);
    }

    #[test]
    fn identical_candidates_keep_input_order() {
        let c = vec![cand(3); 5];
        let (order, _) = r2_rank(&LenRecognizer, &c, "abc", None).unwrap();
        assert_eq!(order, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn cer_order_then_r1_then_index() {
        let entries = vec![
            R2Entry {
                index: 0,
                recognized: "a".into(),
                cer: 0.5,
            },
            R2Entry {
                index: 1,
                recognized: "ab".into(),
                cer: 0.0,
            },
            R2Entry {
                index: 2,
                recognized: "x".into(),
                cer: 0.2,
            },
        ];
        assert_eq!(order_entries(&entries, "zz", None), vec![1, 2, 0]);
        let mut tied = entries.clone();
        tied.iter_mut().for_each(|e| e.cer = 0.5);
        assert_eq!(order_entries(&tied, "zz", Some(&[0.1, 0.9, 0.5])), vec![1, 2, 0]);
    }

    #[test]
    fn empty_candidate_list_rejected() {
        assert!(r2_rank(&LenRecognizer, &[], "abc", None).is_err());
    }
}
