//! Fast recognizability ranker: two 1-D convolutions over the token
//! sequence, global average pooling and a single logit.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Container, TensorRecord};
use crate::error::{invalid_argument, invalid_input, Error, Result};
use crate::ink::TokenSequence;
use crate::mixture::{sigmoid, softplus};
use crate::nn::{mix64, round_to_f32, Adam, ParamLayout};

pub const RANKER_MAGIC: &[u8; 7] = b"INKRNK1";
pub const RANKER_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankerConfig {
    pub d: usize,
    pub kernel1: usize,
    pub channels1: usize,
    pub kernel2: usize,
    pub channels2: usize,
}

impl RankerConfig {
    pub fn new(d: usize) -> Self {
        RankerConfig {
            d,
            kernel1: 5,
            channels1: 32,
            kernel2: 3,
            channels2: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if crate::ink::Repr::from_dim(self.d).is_none() {
            return Err(invalid_argument(format!("geometry width {} not in {{2, 6}}", self.d)));
        }
        if self.kernel1 % 2 == 0 || self.kernel2 % 2 == 0 {
            return Err(invalid_argument("kernel widths must be odd"));
        }
        if self.channels1 == 0 || self.channels2 == 0 {
            return Err(invalid_argument("channel counts must be positive"));
        }
        Ok(())
    }

    /// Input channels per token: geometry, pen-up, end-of-ink.
    pub fn in_channels(&self) -> usize {
        self.d + 2
    }

    fn layout(&self) -> ParamLayout {
        let c = self.in_channels();
        ParamLayout::new(&[
            ("conv1.w", vec![self.channels1, c, self.kernel1]),
            ("conv1.b", vec![self.channels1]),
            ("conv2.w", vec![self.channels2, self.channels1, self.kernel2]),
            ("conv2.b", vec![self.channels2]),
            ("out.w", vec![self.channels2]),
            ("out.b", vec![1]),
        ])
    }
}

const CONV1_W: usize = 0;
const CONV1_B: usize = 1;
const CONV2_W: usize = 2;
const CONV2_B: usize = 3;
const OUT_W: usize = 4;
const OUT_B: usize = 5;

/// Ranker weights plus the geometry standardization statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranker {
    config: RankerConfig,
    layout: ParamLayout,
    params: Vec<f64>,
    feat_mean: Vec<f64>,
    feat_std: Vec<f64>,
}

struct Forward {
    x: Vec<f64>,
    a1: Vec<f64>,
    a2: Vec<f64>,
    pooled: Vec<f64>,
    logit: f64,
}

/// Same-padded 1-D convolution, `x` laid out as `[t][c_in]`.
fn conv_forward(x: &[f64], t: usize, cin: usize, w: &[f64], b: &[f64], cout: usize, k: usize, relu_in: bool) -> Vec<f64> {
    let pad = k / 2;
    let mut out = vec![0.0; t * cout];
    for o in 0..cout {
        let wo = &w[o * cin * k..(o + 1) * cin * k];
        for s in 0..t {
            let mut acc = b[o];
            for kk in 0..k {
                let src = s + kk;
                if src < pad || src - pad >= t {
                    continue;
                }
                let row = &x[(src - pad) * cin..(src - pad + 1) * cin];
                for i in 0..cin {
                    let v = if relu_in { row[i].max(0.0) } else { row[i] };
                    acc += wo[i * k + kk] * v;
                }
            }
            out[s * cout + o] = acc;
        }
    }
    out
}

impl Ranker {
    /// Random initialization, uniform in `+-1/sqrt(fan_in)`, with identity
    /// standardization.
    pub fn init(config: RankerConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layout = config.layout();
        let mut params = vec![0.0; layout.total()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (idx, (_, shape, range)) in layout.iter().enumerate() {
            let fan_in = match idx {
                CONV1_W | CONV2_W => shape[1] * shape[2],
                OUT_W => shape[0],
                _ => continue,
            };
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut params[range] {
                *p = rng.random_range(-bound..bound);
            }
        }
        round_to_f32(&mut params);
        let d = config.d;
        Ok(Ranker {
            config,
            layout,
            params,
            feat_mean: vec![0.0; d],
            feat_std: vec![1.0; d],
        })
    }

    /// All weights zero: every input scores exactly 0.5.
    pub fn zeros(config: RankerConfig) -> Result<Self> {
        let mut r = Ranker::init(config, 0)?;
        r.params.iter_mut().for_each(|p| *p = 0.0);
        Ok(r)
    }

    pub fn config(&self) -> &RankerConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn feature_stats(&self) -> (&[f64], &[f64]) {
        (&self.feat_mean, &self.feat_std)
    }

    /// Sets the geometry standardization from the tokens of `data`.
    pub fn fit_feature_stats(&mut self, data: &[&TokenSequence]) {
        let d = self.config.d;
        let mut sum = vec![0.0; d];
        let mut sq = vec![0.0; d];
        let mut n = 0usize;
        for seq in data {
            for tok in masked(seq) {
                for j in 0..d {
                    sum[j] += tok.geom[j];
                    sq[j] += tok.geom[j] * tok.geom[j];
                }
                n += 1;
            }
        }
        if n == 0 {
            return;
        }
        for j in 0..d {
            let mean = sum[j] / n as f64;
            let var = (sq[j] / n as f64 - mean * mean).max(0.0);
            self.feat_mean[j] = mean as f32 as f64;
            self.feat_std[j] = if var.sqrt() > 1e-8 { var.sqrt() as f32 as f64 } else { 1.0 };
        }
    }

    fn t(&self, idx: usize) -> &[f64] {
        &self.params[self.layout.range(idx)]
    }

    /// Per-token input channels, truncated after the first end-of-ink.
    pub fn featurize(&self, seq: &TokenSequence) -> Vec<f64> {
        let c = self.config.in_channels();
        let toks = masked(seq);
        let mut x = Vec::with_capacity(toks.len() * c);
        for tok in toks {
            for j in 0..self.config.d {
                x.push((tok.geom[j] - self.feat_mean[j]) / self.feat_std[j]);
            }
            x.push(tok.pen_up as u8 as f64);
            x.push(tok.end_of_ink as u8 as f64);
        }
        x
    }

    fn forward(&self, x: Vec<f64>) -> Forward {
        let cfg = &self.config;
        let c = cfg.in_channels();
        let t = x.len() / c;
        let a1 = conv_forward(&x, t, c, self.t(CONV1_W), self.t(CONV1_B), cfg.channels1, cfg.kernel1, false);
        let a2 = conv_forward(&a1, t, cfg.channels1, self.t(CONV2_W), self.t(CONV2_B), cfg.channels2, cfg.kernel2, true);
        let mut pooled = vec![0.0; cfg.channels2];
        for s in 0..t {
            for o in 0..cfg.channels2 {
                pooled[o] += a2[s * cfg.channels2 + o].max(0.0);
            }
        }
        pooled.iter_mut().for_each(|p| *p /= t as f64);
        let logit = self.t(OUT_B)[0] + crate::nn::dot(self.t(OUT_W), &pooled);
        Forward { x, a1, a2, pooled, logit }
    }

    /// Recognizability logit; `None` for an empty sequence.
    pub fn logit(&self, seq: &TokenSequence) -> Option<f64> {
        let x = self.featurize(seq);
        if x.is_empty() {
            return None;
        }
        Some(self.forward(x).logit)
    }

    /// Score in `[0, 1]`. An empty sequence scores 0.
    pub fn score(&self, seq: &TokenSequence) -> f64 {
        self.logit(seq).map_or(0.0, sigmoid)
    }

    /// Binary cross-entropy of one example and its parameter gradient.
    pub fn loss_and_grad(&self, seq: &TokenSequence, target: bool) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.bce_and_grad(seq, target, 1.0, &mut grad);
        (loss, grad)
    }

    /// Binary cross-entropy of one example and its parameter gradient,
    /// accumulated into `grad` scaled by `scale`.
    pub(crate) fn bce_and_grad(&self, seq: &TokenSequence, target: bool, scale: f64, grad: &mut [f64]) -> f64 {
        let x = self.featurize(seq);
        if x.is_empty() {
            return 0.0;
        }
        let cfg = &self.config;
        let f = self.forward(x);
        let y = target as u8 as f64;
        let loss = softplus(f.logit) - y * f.logit;
        let dlogit = (sigmoid(f.logit) - y) * scale;
        let (c, c1, c2) = (cfg.in_channels(), cfg.channels1, cfg.channels2);
        let t = f.x.len() / c;
        let lr = |i: usize| self.layout.range(i);

        grad[lr(OUT_B)][0] += dlogit;
        for (g, p) in grad[lr(OUT_W)].iter_mut().zip(&f.pooled) {
            *g += dlogit * p;
        }
        let w_out = self.t(OUT_W);
        // d a2, through pooling and the ReLU
        let mut da2 = vec![0.0; t * c2];
        for s in 0..t {
            for o in 0..c2 {
                if f.a2[s * c2 + o] > 0.0 {
                    da2[s * c2 + o] = dlogit * w_out[o] / t as f64;
                }
            }
        }
        let mut da1 = vec![0.0; t * c1];
        conv_backward(&da2, &f.a1, t, c1, self.t(CONV2_W), c2, cfg.kernel2, true, grad, lr(CONV2_W), lr(CONV2_B), Some(&mut da1));
        for (g, a) in da1.iter_mut().zip(&f.a1) {
            if *a <= 0.0 {
                *g = 0.0;
            }
        }
        conv_backward(&da1, &f.x, t, c, self.t(CONV1_W), c1, cfg.kernel1, false, grad, lr(CONV1_W), lr(CONV1_B), None);
        loss
    }

    pub fn to_container(&self) -> Container {
        let mut tensors = vec![
            TensorRecord::from_f64("feat.mean", &[self.config.d], &self.feat_mean),
            TensorRecord::from_f64("feat.std", &[self.config.d], &self.feat_std),
        ];
        tensors.extend(
            self.layout
                .iter()
                .map(|(name, shape, range)| TensorRecord::from_f64(name, shape, &self.params[range])),
        );
        Container {
            magic: *RANKER_MAGIC,
            format_version: RANKER_FORMAT_VERSION,
            config: serde_json::to_value(&self.config).expect("config serializes"),
            tensors,
        }
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.format_version != RANKER_FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported ranker format version {}", c.format_version)));
        }
        let config: RankerConfig = serde_json::from_value(c.config.clone())?;
        config.validate()?;
        let layout = config.layout();
        let mut params = vec![0.0; layout.total()];
        let fetch = |name: &str, shape: &[usize]| -> Result<Vec<f64>> {
            let t = c.tensor(name)?;
            if t.shape != shape {
                return Err(Error::Format(format!("tensor {name:?} has shape {:?}, expected {shape:?}", t.shape)));
            }
            Ok(t.to_f64())
        };
        for (name, shape, range) in layout.iter() {
            params[range].copy_from_slice(&fetch(name, shape)?);
        }
        let feat_mean = fetch("feat.mean", &[config.d])?;
        let feat_std = fetch("feat.std", &[config.d])?;
        if feat_std.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Format("feature scale must be positive".into()));
        }
        Ok(Ranker {
            config,
            layout,
            params,
            feat_mean,
            feat_std,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ranker::from_container(&Container::load(path, RANKER_MAGIC)?)
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    dout: &[f64],
    input: &[f64],
    t: usize,
    cin: usize,
    w: &[f64],
    cout: usize,
    k: usize,
    relu_in: bool,
    grad: &mut [f64],
    w_range: std::ops::Range<usize>,
    b_range: std::ops::Range<usize>,
    mut dinput: Option<&mut Vec<f64>>,
) {
    let pad = k / 2;
    let gb_start = b_range.start;
    let gw_start = w_range.start;
    for s in 0..t {
        for o in 0..cout {
            let g = dout[s * cout + o];
            if g == 0.0 {
                continue;
            }
            grad[gb_start + o] += g;
            for kk in 0..k {
                let src = s + kk;
                if src < pad || src - pad >= t {
                    continue;
                }
                let r = src - pad;
                for i in 0..cin {
                    let wi = o * cin * k + i * k + kk;
                    let v = input[r * cin + i];
                    let v = if relu_in { v.max(0.0) } else { v };
                    grad[gw_start + wi] += g * v;
                    if let Some(d) = dinput.as_deref_mut() {
                        d[r * cin + i] += g * w[wi];
                    }
                }
            }
        }
    }
}

/// Tokens up to and including the first end-of-ink.
fn masked(seq: &TokenSequence) -> &[crate::ink::InkToken] {
    let end = seq
        .tokens
        .iter()
        .position(|t| t.end_of_ink)
        .map_or(seq.tokens.len(), |i| i + 1);
    &seq.tokens[..end]
}

/// Scores a batch; order is preserved and empty sequences score 0.
pub fn r1_score(ranker: &Ranker, batch: &[TokenSequence]) -> Vec<f64> {
    batch.iter().map(|s| ranker.score(s)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RankerHyper {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Share of examples held out for the validation AUC.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for RankerHyper {
    fn default() -> Self {
        RankerHyper {
            learning_rate: 2e-3,
            epochs: 15,
            batch_size: 32,
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankerTrainReport {
    pub epoch_losses: Vec<f64>,
    pub train_accuracy: f64,
    /// Area under the ROC curve on the held-out split; `None` when it lacks
    /// a class.
    pub validation_auc: Option<f64>,
    pub n_train: usize,
    pub n_validation: usize,
}

/// Mann-Whitney estimate of the ROC AUC; ties count one half.
pub fn roc_auc(scores: &[f64], targets: &[bool]) -> Option<f64> {
    let pos: Vec<f64> = scores.iter().zip(targets).filter(|(_, &t)| t).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().zip(targets).filter(|(_, &t)| !t).map(|(s, _)| *s).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut wins = 0.0;
    for p in &pos {
        for n in &neg {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    Some(wins / (pos.len() * neg.len()) as f64)
}

/// Trains a ranker on `(sequence, target)` pairs with binary cross-entropy
/// and Adam. Both classes must be present.
pub fn train_ranker(data: &[(TokenSequence, bool)], hyper: &RankerHyper) -> Result<(Ranker, RankerTrainReport)> {
    if hyper.epochs == 0 || hyper.batch_size == 0 || !(hyper.learning_rate > 0.0) || !(0.0..1.0).contains(&hyper.validation_fraction) {
        return Err(invalid_argument("invalid ranker hyperparameters"));
    }
    let Some(first) = data.first() else {
        return Err(invalid_input("empty ranker training set"));
    };
    let repr = first.0.repr;
    if data.iter().any(|(s, _)| s.repr != repr) {
        return Err(invalid_input("ranker training set mixes representations"));
    }
    let positives = data.iter().filter(|(_, y)| *y).count();
    if positives == 0 || positives == data.len() {
        return Err(invalid_input("ranker training set needs both classes"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(hyper.seed ^ 0x72_616e_6b));
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut rng);
    let n_val = ((data.len() as f64) * hyper.validation_fraction).floor() as usize;
    let (val_idx, train_idx) = idx.split_at(n_val);
    let mut train_idx = train_idx.to_vec();

    let mut ranker = Ranker::init(RankerConfig::new(repr.dim()), hyper.seed)?;
    let train_seqs: Vec<&TokenSequence> = train_idx.iter().map(|&i| &data[i].0).collect();
    ranker.fit_feature_stats(&train_seqs);
    let mut adam = Adam::new(ranker.params.len(), hyper.learning_rate);
    let mut epoch_losses = Vec::with_capacity(hyper.epochs);
    for _ in 0..hyper.epochs {
        train_idx.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in train_idx.chunks(hyper.batch_size) {
            let scale = 1.0 / chunk.len() as f64;
            let mut grad = vec![0.0; ranker.params.len()];
            for &i in chunk {
                total += ranker.bce_and_grad(&data[i].0, data[i].1, scale, &mut grad);
            }
            adam.step(&mut ranker.params, &grad);
        }
        epoch_losses.push(total / train_idx.len() as f64);
    }
    round_to_f32(&mut ranker.params);
    let correct = train_idx
        .iter()
        .filter(|&&i| (ranker.score(&data[i].0) >= 0.5) == data[i].1)
        .count();
    let val_scores: Vec<f64> = val_idx.iter().map(|&i| ranker.score(&data[i].0)).collect();
    let val_targets: Vec<bool> = val_idx.iter().map(|&i| data[i].1).collect();
    let report = RankerTrainReport {
        epoch_losses,
        train_accuracy: correct as f64 / train_idx.len() as f64,
        validation_auc: roc_auc(&val_scores, &val_targets),
        n_train: train_idx.len(),
        n_validation: val_idx.len(),
    };
    Ok((ranker, report))
}

/// Real-versus-synthetic baseline ranker (real = 1). The larger side is
/// subsampled so both classes have the same size.
pub fn train_rbase(real: &[TokenSequence], synthetic: &[TokenSequence], hyper: &RankerHyper) -> Result<(Ranker, RankerTrainReport)> {
    let n = real.len().min(synthetic.len());
    if n == 0 {
        return Err(invalid_input("baseline ranker needs real and synthetic examples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(hyper.seed ^ 0x62_6173_65));
    let pick = |len: usize, rng: &mut ChaCha8Rng| {
        let mut idx: Vec<usize> = (0..len).collect();
        idx.shuffle(rng);
        idx.truncate(n);
        idx.sort_unstable();
        idx
    };
    let real_idx = pick(real.len(), &mut rng);
    let syn_idx = pick(synthetic.len(), &mut rng);
    let data: Vec<(TokenSequence, bool)> = real_idx
        .iter()
        .map(|&i| (real[i].clone(), true))
        .chain(syn_idx.iter().map(|&i| (synthetic[i].clone(), false)))
        .collect();
    train_ranker(&data, hyper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ink::{InkToken, Repr};

    fn seq(rng: &mut ChaCha8Rng, d: usize, len: usize) -> TokenSequence {
        let toks = (0..len)
            .map(|i| {
                InkToken::new(
                    (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    i + 1 == len || rng.random_bool(0.2),
                    i + 1 == len,
                )
            })
            .collect();
        TokenSequence::new(Repr::from_dim(d).unwrap(), toks).unwrap()
    }

    #[test]
    fn zero_weights_score_half() {
        let r = Ranker::zeros(RankerConfig::new(2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for len in [1, 3, 17] {
            assert_eq!(r.score(&seq(&mut rng, 2, len)), 0.5);
        }
        assert_eq!(r.score(&TokenSequence::empty(Repr::Raw)), 0.0);
    }

    #[test]
    fn padding_after_end_is_ignored() {
        let r = Ranker::init(RankerConfig::new(6), 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = seq(&mut rng, 6, 9);
        let mut padded = s.clone();
        for _ in 0..5 {
            padded.tokens.push(InkToken::new(vec![0.0; 6], false, false));
        }
        assert_eq!(r.score(&s), r.score(&padded));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in [2, 6] {
            let mut cfg = RankerConfig::new(d);
            cfg.channels1 = 4;
            cfg.channels2 = 5;
            let mut r = Ranker::init(cfg, 7).unwrap();
            let s = seq(&mut rng, d, 7);
            for target in [false, true] {
                let mut grad = vec![0.0; r.params.len()];
                r.bce_and_grad(&s, target, 1.0, &mut grad);
                let h = 1e-5;
                for i in 0..r.params.len() {
                    let orig = r.params[i];
                    let mut g0 = vec![0.0; grad.len()];
                    r.params[i] = orig + h;
                    let up = r.bce_and_grad(&s, target, 1.0, &mut g0);
                    r.params[i] = orig - h;
                    let down = r.bce_and_grad(&s, target, 1.0, &mut g0);
                    r.params[i] = orig;
                    let fd = (up - down) / (2.0 * h);
                    let denom = fd.abs().max(grad[i].abs());
                    if denom > 1e-7 {
                        assert!((fd - grad[i]).abs() / denom < 1e-3, "param {i}: fd {fd} vs {}", grad[i]);
                    }
                }
            }
        }
    }

    #[test]
    fn separable_toy_is_learned() {
        // positives are short, negatives long and never ending
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut data = Vec::new();
        for i in 0..120 {
            if i % 2 == 0 {
                let len = rng.random_range(4..10);
                data.push((seq(&mut rng, 2, len), true));
            } else {
                let mut s = seq(&mut rng, 2, 40);
                s.tokens.last_mut().unwrap().end_of_ink = false;
                data.push((s, false));
            }
        }
        let hyper = RankerHyper {
            epochs: 30,
            ..RankerHyper::default()
        };
        let (r1, report) = train_ranker(&data, &hyper).unwrap();
        assert!(report.train_accuracy >= 0.95, "{report:?}");
        let (r2, _) = train_ranker(&data, &hyper).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn single_class_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let data: Vec<_> = (0..5).map(|_| (seq(&mut rng, 2, 5), true)).collect();
        assert!(matches!(train_ranker(&data, &RankerHyper::default()), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn auc_simple_cases() {
        assert_eq!(roc_auc(&[0.9, 0.1], &[true, false]), Some(1.0));
        assert_eq!(roc_auc(&[0.5, 0.5], &[true, false]), Some(0.5));
        assert_eq!(roc_auc(&[0.5], &[true]), None);
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut r = Ranker::init(RankerConfig::new(2), 9).unwrap();
        r.feat_mean = vec![0.25, -0.5];
        r.feat_std = vec![2.0, 0.5];
        let c = Container::from_bytes(&r.to_container().to_bytes(), RANKER_MAGIC).unwrap();
        assert_eq!(Ranker::from_container(&c).unwrap(), r);
    }
}
