//! Label-conditioned autoregressive ink generator.
//!
//! One gated recurrent layer reads the previous token and the previous
//! attention window. A Gaussian window over the label characters is then
//! moved forward (its centres only ever advance, by a softplus increment)
//! and the output head maps the hidden state and the new window to the
//! mixture parameters of the next token.
//!
//! ```text
//! x_t   = [prev token (d + 2); w_{t-1} (V)]
//! h_t   = GRU(x_t, h_{t-1})
//! (a, b, k) = W_win h_t + b_win        alpha = exp(a), beta = exp(b)
//! kappa_t = kappa_{t-1} + softplus(k)
//! phi(u) = sum_j alpha_j exp(-beta_j (kappa_j - u)^2)
//! w_t   = sum_u phi(u) onehot(label_u)
//! head  = W_out [h_t; w_t] + b_out     -> MixtureParams
//! ```

mod train;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Container, TensorRecord};
use crate::error::{invalid_argument, invalid_input, Error, Result};
use crate::ink::{InkToken, LabeledInk, Repr, TokenSequence};
use crate::mixture::{head_width, sample_token, softplus, MixtureParams, SamplingConfig};
use crate::nn::{dot, substream_rng, ParamLayout};

pub use train::{nll_loss, nll_loss_and_grad, train, StepLog, TrainLog, TrainingHyper};

pub const GENERATOR_MAGIC: &[u8; 7] = b"INKGEN1";
pub const GENERATOR_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    /// Ordered character set the model can write.
    pub alphabet: String,
    /// Token geometry width: 2 (raw) or 6 (curve).
    pub d: usize,
    #[serde(default = "default_components")]
    pub components: usize,
    #[serde(default = "default_state_size")]
    pub state_size: usize,
    #[serde(default = "default_window_mixtures")]
    pub window_mixtures: usize,
    #[serde(default = "default_max_frames")]
    pub max_frames_per_char: usize,
}

fn default_components() -> usize {
    10
}
fn default_state_size() -> usize {
    64
}
fn default_window_mixtures() -> usize {
    3
}
fn default_max_frames() -> usize {
    20
}

impl GeneratorConfig {
    pub fn new(alphabet: impl Into<String>, repr: Repr) -> Self {
        GeneratorConfig {
            alphabet: alphabet.into(),
            d: repr.dim(),
            components: default_components(),
            state_size: default_state_size(),
            window_mixtures: default_window_mixtures(),
            max_frames_per_char: default_max_frames(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.alphabet.chars().count();
        if v == 0 || self.components == 0 || self.state_size == 0 || self.window_mixtures == 0 || self.max_frames_per_char == 0 {
            return Err(invalid_argument("generator config counts must all be at least 1"));
        }
        let mut chars: Vec<char> = self.alphabet.chars().collect();
        chars.sort_unstable();
        chars.dedup();
        if chars.len() != v {
            return Err(invalid_argument("generator alphabet has repeated characters"));
        }
        if Repr::from_dim(self.d).is_none() {
            return Err(invalid_argument(format!("geometry width {} not in {{2, 6}}", self.d)));
        }
        Ok(())
    }

    pub fn repr(&self) -> Repr {
        Repr::from_dim(self.d).expect("validated config")
    }

    pub fn vocab(&self) -> usize {
        self.alphabet.chars().count()
    }

    fn dims(&self) -> Dims {
        let v = self.vocab();
        Dims {
            d: self.d,
            k: self.components,
            v,
            h: self.state_size,
            m: self.window_mixtures,
            input: self.d + 2 + v,
            head_in: self.state_size + v,
            head_out: head_width(self.components, self.d),
        }
    }

    fn layout(&self) -> ParamLayout {
        let n = self.dims();
        ParamLayout::new(&[
            ("input.w", vec![3 * n.h, n.input]),
            ("input.b", vec![3 * n.h]),
            ("cell.w", vec![3 * n.h, n.h]),
            ("cell.b", vec![3 * n.h]),
            ("window.w", vec![3 * n.m, n.h]),
            ("window.b", vec![3 * n.m]),
            ("head.w", vec![n.head_out, n.head_in]),
            ("head.b", vec![n.head_out]),
        ])
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Dims {
    pub d: usize,
    pub k: usize,
    pub v: usize,
    pub h: usize,
    pub m: usize,
    pub input: usize,
    pub head_in: usize,
    pub head_out: usize,
}

pub(crate) const INPUT_W: usize = 0;
pub(crate) const INPUT_B: usize = 1;
pub(crate) const CELL_W: usize = 2;
pub(crate) const CELL_B: usize = 3;
pub(crate) const WINDOW_W: usize = 4;
pub(crate) const WINDOW_B: usize = 5;
pub(crate) const HEAD_W: usize = 6;
pub(crate) const HEAD_B: usize = 7;

/// Initial bias of the window-advance pre-activation; softplus(-2) is about
/// 0.13 characters per frame.
const WINDOW_ADVANCE_BIAS: f64 = -2.0;

/// Trained generator weights with their configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    config: GeneratorConfig,
    layout: ParamLayout,
    params: Vec<f64>,
}

/// Recurrent state carried between decoding steps.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub hidden: Vec<f64>,
    /// Window centres, one per window mixture, in label positions.
    pub kappa: Vec<f64>,
    /// Window vector over the alphabet from the previous step.
    pub window: Vec<f64>,
}

impl DecoderState {
    /// All-zero hidden state, window centres at the first character.
    pub fn zeros(config: &GeneratorConfig) -> Self {
        DecoderState {
            hidden: vec![0.0; config.state_size],
            kappa: vec![0.0; config.window_mixtures],
            window: vec![0.0; config.vocab()],
        }
    }
}

/// Per-candidate decoding outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeDiag {
    pub frames_used: usize,
    /// Decoding stopped at the frame cap without emitting end-of-ink.
    pub hit_cap: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub sequence: TokenSequence,
    pub diag: DecodeDiag,
}

pub(crate) fn sigm(x: f64) -> f64 {
    crate::mixture::sigmoid(x)
}

/// Intermediate values of one step, kept for backpropagation.
#[derive(Debug, Clone, Default)]
pub(crate) struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub r: Vec<f64>,
    pub z: Vec<f64>,
    pub n: Vec<f64>,
    pub gh_n: Vec<f64>,
    pub h: Vec<f64>,
    pub win_pre: Vec<f64>,
    pub kappa: Vec<f64>,
    pub window: Vec<f64>,
    pub head: Vec<f64>,
}

impl Generator {
    /// Random initialization: uniform weights in `+-1/sqrt(fan_in)`, zero
    /// biases except the window advance.
    pub fn init(config: GeneratorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layout = config.layout();
        let mut params = vec![0.0; layout.total()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (name, shape, range) in layout.iter() {
            if shape.len() == 2 {
                let bound = 1.0 / (shape[1] as f64).sqrt();
                for p in &mut params[range] {
                    *p = rng.random_range(-bound..bound);
                }
            } else if name == "window.b" {
                let m = config.window_mixtures;
                for p in &mut params[range][2 * m..] {
                    *p = WINDOW_ADVANCE_BIAS;
                }
            }
        }
        crate::nn::round_to_f32(&mut params);
        Ok(Generator { config, layout, params })
    }

    /// Every weight and bias zero.
    pub fn zeros(config: GeneratorConfig) -> Result<Self> {
        config.validate()?;
        let layout = config.layout();
        let params = vec![0.0; layout.total()];
        Ok(Generator { config, layout, params })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Slice of a named tensor, e.g. `"head.b"`.
    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        self.layout.index_of(name).map(|i| &self.params[self.layout.range(i)])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let i = self.layout.index_of(name)?;
        let r = self.layout.range(i);
        Some(&mut self.params[r])
    }

    pub(crate) fn t(&self, idx: usize) -> &[f64] {
        &self.params[self.layout.range(idx)]
    }

    pub(crate) fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub(crate) fn dims(&self) -> Dims {
        self.config.dims()
    }

    pub fn encode_label(&self, label: &str) -> Result<Vec<usize>> {
        label
            .chars()
            .map(|c| {
                self.config
                    .alphabet
                    .chars()
                    .position(|a| a == c)
                    .ok_or_else(|| invalid_input(format!("character {c:?} is not in the generator alphabet")))
            })
            .collect()
    }

    pub fn frame_cap(&self, label_len: usize) -> usize {
        self.config.max_frames_per_char * label_len
    }

    fn token_input(&self, prev: &InkToken, window: &[f64], x: &mut Vec<f64>) {
        x.clear();
        x.extend_from_slice(&prev.geom);
        x.push(prev.pen_up as u8 as f64);
        x.push(prev.end_of_ink as u8 as f64);
        x.extend_from_slice(window);
    }

    /// Runs the step for every candidate at once. Weight rows are the outer
    /// loop so each row is read once per step for the whole batch; the
    /// arithmetic per candidate is identical to a batch of one.
    pub(crate) fn step_batch(&self, label: &[usize], xs: &[Vec<f64>], states: &[DecoderState], caches: &mut [StepCache]) {
        let n = self.dims();
        let b = xs.len();
        let (iw, ib, cw, cb) = (self.t(INPUT_W), self.t(INPUT_B), self.t(CELL_W), self.t(CELL_B));
        let mut gi = vec![vec![0.0; 3 * n.h]; b];
        let mut gh = vec![vec![0.0; 3 * n.h]; b];
        for r in 0..3 * n.h {
            let wi = &iw[r * n.input..(r + 1) * n.input];
            let wh = &cw[r * n.h..(r + 1) * n.h];
            for c in 0..b {
                gi[c][r] = ib[r] + dot(wi, &xs[c]);
                gh[c][r] = cb[r] + dot(wh, &states[c].hidden);
            }
        }
        let mut hs = Vec::with_capacity(b);
        for c in 0..b {
            let cache = &mut caches[c];
            cache.x.clone_from(&xs[c]);
            cache.h_prev.clone_from(&states[c].hidden);
            cache.r.resize(n.h, 0.0);
            cache.z.resize(n.h, 0.0);
            cache.n.resize(n.h, 0.0);
            cache.gh_n.resize(n.h, 0.0);
            cache.h.resize(n.h, 0.0);
            for j in 0..n.h {
                let r = sigm(gi[c][j] + gh[c][j]);
                let z = sigm(gi[c][n.h + j] + gh[c][n.h + j]);
                let ghn = gh[c][2 * n.h + j];
                let nn = (gi[c][2 * n.h + j] + r * ghn).tanh();
                cache.r[j] = r;
                cache.z[j] = z;
                cache.n[j] = nn;
                cache.gh_n[j] = ghn;
                cache.h[j] = (1.0 - z) * nn + z * states[c].hidden[j];
            }
            hs.push(cache.h.clone());
        }
        let (ww, wb) = (self.t(WINDOW_W), self.t(WINDOW_B));
        let mut win = vec![vec![0.0; 3 * n.m]; b];
        for r in 0..3 * n.m {
            let row = &ww[r * n.h..(r + 1) * n.h];
            for c in 0..b {
                win[c][r] = wb[r] + dot(row, &hs[c]);
            }
        }
        for c in 0..b {
            let cache = &mut caches[c];
            cache.kappa.resize(n.m, 0.0);
            cache.window.clear();
            cache.window.resize(n.v, 0.0);
            for j in 0..n.m {
                cache.kappa[j] = states[c].kappa[j] + softplus(win[c][2 * n.m + j]);
            }
            for (u, &sym) in label.iter().enumerate() {
                let mut phi = 0.0;
                for j in 0..n.m {
                    let alpha = win[c][j].exp();
                    let beta = win[c][n.m + j].exp();
                    let dk = cache.kappa[j] - u as f64;
                    phi += alpha * (-beta * dk * dk).exp();
                }
                cache.window[sym] += phi;
            }
            cache.win_pre = std::mem::take(&mut win[c]);
        }
        let (hw, hb) = (self.t(HEAD_W), self.t(HEAD_B));
        let inputs: Vec<Vec<f64>> = caches.iter().map(|c| [c.h.as_slice(), c.window.as_slice()].concat()).collect();
        for cache in caches.iter_mut() {
            cache.head.clear();
            cache.head.extend_from_slice(hb);
        }
        for r in 0..n.head_out {
            let row = &hw[r * n.head_in..(r + 1) * n.head_in];
            for c in 0..b {
                caches[c].head[r] += dot(row, &inputs[c]);
            }
        }
    }

    fn step_one(&self, label: &[usize], state: &DecoderState, prev: &InkToken) -> (Vec<f64>, DecoderState) {
        let mut x = Vec::with_capacity(self.dims().input);
        self.token_input(prev, &state.window, &mut x);
        let mut caches = [StepCache::default()];
        self.step_batch(label, std::slice::from_ref(&x), std::slice::from_ref(state), &mut caches);
        let [c] = caches;
        let next = DecoderState {
            hidden: c.h,
            kappa: c.kappa,
            window: c.window,
        };
        (c.head, next)
    }

    /// One decoding step from `state` after emitting `prev`.
    pub fn forward_step(&self, state: &DecoderState, prev: &InkToken, label: &str) -> Result<(MixtureParams, DecoderState)> {
        let encoded = self.encode_label(label)?;
        if prev.geom.len() != self.config.d {
            return Err(invalid_input("previous token geometry width does not match the generator"));
        }
        let (head, next) = self.step_one(&encoded, state, prev);
        Ok((MixtureParams::from_head(&head, self.config.components, self.config.d), next))
    }

    /// Decodes `batch` candidates for `label`. Candidate `i` draws from RNG
    /// substream `i` of `seed`, so candidate `i` does not depend on the
    /// batch size. Decoding stops at end-of-ink or at
    /// `max_frames_per_char * |label|` tokens.
    pub fn decode_batch(&self, label: &str, cfg: &SamplingConfig, batch: usize, seed: u64) -> Result<Vec<Candidate>> {
        if label.is_empty() {
            return Err(invalid_argument("empty label"));
        }
        if batch == 0 {
            return Err(invalid_argument("batch size must be at least 1"));
        }
        cfg.validate()?;
        let encoded = self.encode_label(label)?;
        let n = self.dims();
        let cap = self.frame_cap(encoded.len());
        let repr = self.config.repr();
        let mut rngs: Vec<ChaCha8Rng> = (0..batch).map(|i| substream_rng(seed, i as u64)).collect();
        let mut states = vec![DecoderState::zeros(&self.config); batch];
        let mut prevs = vec![InkToken::start(n.d); batch];
        let mut tokens: Vec<Vec<InkToken>> = vec![Vec::new(); batch];
        let mut active: Vec<usize> = (0..batch).collect();
        let mut caches = vec![StepCache::default(); batch];
        let mut xs: Vec<Vec<f64>> = vec![Vec::with_capacity(n.input); batch];
        while !active.is_empty() {
            let a = active.len();
            for (slot, &c) in active.iter().enumerate() {
                self.token_input(&prevs[c], &states[c].window, &mut xs[slot]);
            }
            let act_states: Vec<DecoderState> = active.iter().map(|&c| states[c].clone()).collect();
            self.step_batch(&encoded, &xs[..a], &act_states, &mut caches[..a]);
            let mut still = Vec::with_capacity(a);
            for (slot, &c) in active.iter().enumerate() {
                let cache = &mut caches[slot];
                let params = MixtureParams::from_head(&cache.head, n.k, n.d);
                let tok = sample_token(&params, cfg, &mut rngs[c])
                    .map_err(|e| Error::InvalidInput(format!("decoding produced invalid parameters: {e}")))?;
                states[c] = DecoderState {
                    hidden: cache.h.clone(),
                    kappa: cache.kappa.clone(),
                    window: cache.window.clone(),
                };
                let done = tok.end_of_ink;
                prevs[c] = tok.clone();
                tokens[c].push(tok);
                if !done && tokens[c].len() < cap {
                    still.push(c);
                }
            }
            active = still;
        }
        Ok(tokens
            .into_iter()
            .map(|toks| {
                let complete = toks.last().is_some_and(|t| t.end_of_ink);
                let diag = DecodeDiag {
                    frames_used: toks.len(),
                    hit_cap: !complete,
                };
                Candidate {
                    sequence: TokenSequence { repr, tokens: toks },
                    diag,
                }
            })
            .collect())
    }

    /// Wall time in milliseconds of one batched decoding step, averaged over
    /// `steps` steps during which end-of-ink is ignored.
    pub fn step_time_ms(&self, label: &str, cfg: &SamplingConfig, batch: usize, steps: usize, seed: u64) -> Result<f64> {
        if batch == 0 || steps == 0 {
            return Err(invalid_argument("batch and steps must be positive"));
        }
        cfg.validate()?;
        let encoded = self.encode_label(label)?;
        let n = self.dims();
        let mut rngs: Vec<ChaCha8Rng> = (0..batch).map(|i| substream_rng(seed, i as u64)).collect();
        let mut states = vec![DecoderState::zeros(&self.config); batch];
        let mut prevs = vec![InkToken::start(n.d); batch];
        let mut caches = vec![StepCache::default(); batch];
        let mut xs: Vec<Vec<f64>> = vec![Vec::with_capacity(n.input); batch];
        let start = std::time::Instant::now();
        for _ in 0..steps {
            for c in 0..batch {
                self.token_input(&prevs[c], &states[c].window, &mut xs[c]);
            }
            self.step_batch(&encoded, &xs, &states, &mut caches);
            for c in 0..batch {
                let cache = &caches[c];
                let params = MixtureParams::from_head(&cache.head, n.k, n.d);
                let mut tok = sample_token(&params, cfg, &mut rngs[c])?;
                tok.end_of_ink = false;
                states[c] = DecoderState {
                    hidden: cache.h.clone(),
                    kappa: cache.kappa.clone(),
                    window: cache.window.clone(),
                };
                prevs[c] = tok;
            }
        }
        Ok(start.elapsed().as_secs_f64() * 1e3 / steps as f64)
    }

    pub fn to_container(&self) -> Container {
        let tensors = self
            .layout
            .iter()
            .map(|(name, shape, range)| TensorRecord::from_f64(name, shape, &self.params[range]))
            .collect();
        Container {
            magic: *GENERATOR_MAGIC,
            format_version: GENERATOR_FORMAT_VERSION,
            config: serde_json::to_value(&self.config).expect("config serializes"),
            tensors,
        }
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.format_version != GENERATOR_FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported generator format version {}", c.format_version)));
        }
        let config: GeneratorConfig = serde_json::from_value(c.config.clone())?;
        config.validate()?;
        let layout = config.layout();
        let mut params = vec![0.0; layout.total()];
        for (name, shape, range) in layout.iter() {
            let t = c.tensor(name)?;
            if t.shape != shape {
                return Err(Error::Format(format!("tensor {name:?} has shape {:?}, expected {shape:?}", t.shape)));
            }
            params[range].copy_from_slice(&t.to_f64());
        }
        Ok(Generator { config, layout, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Generator::from_container(&Container::load(path, GENERATOR_MAGIC)?)
    }

    /// Checks a training sample against this generator.
    pub(crate) fn check_sample(&self, sample: &LabeledInk) -> Result<Vec<usize>> {
        if sample.sequence.repr.dim() != self.config.d {
            return Err(invalid_input(format!(
                "sample repr {} does not match generator width {}",
                sample.sequence.repr.as_str(),
                self.config.d
            )));
        }
        self.encode_label(&sample.label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::softmax;

    fn tiny(repr: Repr) -> GeneratorConfig {
        GeneratorConfig {
            alphabet: "abc".into(),
            d: repr.dim(),
            components: 2,
            state_size: 8,
            window_mixtures: 2,
            max_frames_per_char: 5,
        }
    }

    #[test]
    fn zero_weights_give_uniform_mixture() {
        let g = Generator::zeros(GeneratorConfig::new("abc", Repr::Raw)).unwrap();
        let (p, _) = g
            .forward_step(&DecoderState::zeros(g.config()), &InkToken::start(2), "ab")
            .unwrap();
        let w = softmax(&p.weight_logits);
        assert_eq!(w.len(), 10);
        assert!(w.iter().all(|&x| (x - 0.1).abs() < 1e-15));
    }

    #[test]
    fn forward_step_is_deterministic() {
        let g = Generator::init(tiny(Repr::Raw), 5).unwrap();
        let s = DecoderState::zeros(g.config());
        let prev = InkToken::new(vec![0.1, -0.2], false, false);
        assert_eq!(g.forward_step(&s, &prev, "cab").unwrap(), g.forward_step(&s, &prev, "cab").unwrap());
    }

    #[test]
    fn unknown_character_rejected() {
        let g = Generator::init(tiny(Repr::Raw), 5).unwrap();
        let s = DecoderState::zeros(g.config());
        assert!(matches!(
            g.forward_step(&s, &InkToken::start(2), "abz"),
            Err(Error::InvalidInput(_))
        ));
        assert!(g.decode_batch("", &SamplingConfig::ancestral(), 1, 0).is_err());
    }

    #[test]
    fn window_position_never_moves_back() {
        for seed in 0..5 {
            let g = Generator::init(tiny(Repr::Curve), seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = DecoderState::zeros(g.config());
            let mut prev = InkToken::start(6);
            for _ in 0..100 {
                let (p, next) = g.forward_step(&s, &prev, "abcab").unwrap();
                for (a, b) in s.kappa.iter().zip(&next.kappa) {
                    assert!(b >= a);
                }
                prev = sample_token(&p, &SamplingConfig::ancestral(), &mut rng).unwrap();
                prev.end_of_ink = false;
                s = next;
            }
        }
    }

    #[test]
    fn decode_respects_cap() {
        let mut cfg = tiny(Repr::Raw);
        cfg.max_frames_per_char = 5;
        let mut g = Generator::init(cfg, 1).unwrap();
        // never end
        let end = g.tensor("head.b").unwrap().len() - 1;
        g.tensor_mut("head.b").unwrap()[end] = -50.0;
        let cands = g.decode_batch("abca", &SamplingConfig::ancestral(), 6, 3).unwrap();
        assert_eq!(cands.len(), 6);
        for c in &cands {
            assert!(c.sequence.len() <= 20);
            assert_eq!(c.diag.frames_used, c.sequence.len());
            assert!(c.diag.hit_cap);
            assert!(!c.sequence.is_complete());
        }
    }

    #[test]
    fn greedy_candidates_share_geometry() {
        let g = Generator::init(tiny(Repr::Raw), 2).unwrap();
        let cands = g.decode_batch("abc", &SamplingConfig::greedy(), 4, 9).unwrap();
        let geoms = |c: &Candidate| c.sequence.tokens.iter().map(|t| t.geom.clone()).collect::<Vec<_>>();
        // flags are still sampled, so compare the common prefix
        let n = cands.iter().map(|c| c.sequence.len()).min().unwrap();
        for c in &cands[1..] {
            assert_eq!(geoms(c)[..n], geoms(&cands[0])[..n]);
        }
    }

    #[test]
    fn candidate_independent_of_batch_size() {
        let g = Generator::init(tiny(Repr::Raw), 4).unwrap();
        let one = g.decode_batch("bca", &SamplingConfig::ancestral(), 1, 77).unwrap();
        let five = g.decode_batch("bca", &SamplingConfig::ancestral(), 5, 77).unwrap();
        assert_eq!(one[0], five[0]);
    }

    #[test]
    fn checkpoint_round_trip() {
        let g = Generator::init(tiny(Repr::Curve), 8).unwrap();
        let bytes = g.to_container().to_bytes();
        assert_eq!(&bytes[..7], b"INKGEN1");
        let back = Generator::from_container(&Container::from_bytes(&bytes, GENERATOR_MAGIC).unwrap()).unwrap();
        assert_eq!(back, g);
    }
}
