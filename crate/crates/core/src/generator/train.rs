//! Teacher-forced likelihood, its gradient by backpropagation through
//! time, and the Adam training loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    sigm, DecoderState, Generator, GeneratorConfig, StepCache, CELL_B, CELL_W, HEAD_B, HEAD_W, INPUT_B, INPUT_W,
    WINDOW_B, WINDOW_W,
};
use crate::error::{invalid_argument, invalid_input, Result};
use crate::ink::{InkToken, LabeledInk};
use crate::mixture::head_nll_and_grad;
use crate::nn::{clip_global_norm, matvec_t_add, outer_add, round_to_f32, Adam};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingHyper {
    pub learning_rate: f64,
    /// Maximum global L2 norm of the minibatch gradient.
    pub clipnorm: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
}

impl Default for TrainingHyper {
    fn default() -> Self {
        TrainingHyper {
            learning_rate: 1e-3,
            clipnorm: 0.1,
            batch_size: 16,
            steps: 1000,
            seed: 0,
        }
    }
}

impl TrainingHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !(self.clipnorm > 0.0) || self.batch_size == 0 || self.steps == 0 {
            return Err(invalid_argument("training hyperparameters must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub loss: f64,
    pub grad_norm: f64,
    /// Gradient norm after clipping, the one applied by Adam.
    pub clipped_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub steps: Vec<StepLog>,
}

impl TrainLog {
    /// Mean loss over the first and last `window` steps.
    pub fn smoothed_ends(&self, window: usize) -> (f64, f64) {
        let n = self.steps.len();
        let w = window.clamp(1, n.max(1));
        let mean = |s: &[StepLog]| s.iter().map(|l| l.loss).sum::<f64>() / s.len().max(1) as f64;
        (mean(&self.steps[..w.min(n)]), mean(&self.steps[n.saturating_sub(w)..]))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,loss,grad_norm,clipped_norm\n");
        for s in &self.steps {
            out.push_str(&format!("{},{},{},{}\n", s.step, s.loss, s.grad_norm, s.clipped_norm));
        }
        out
    }
}

fn forward_teacher(gen: &Generator, label: &[usize], tokens: &[InkToken]) -> Vec<StepCache> {
    let n = gen.dims();
    let mut state = DecoderState::zeros(gen.config());
    let mut prev = InkToken::start(n.d);
    let mut caches = Vec::with_capacity(tokens.len());
    let mut x = Vec::with_capacity(n.input);
    for tok in tokens {
        gen.token_input(&prev, &state.window, &mut x);
        let mut c = [StepCache::default()];
        gen.step_batch(label, std::slice::from_ref(&x), std::slice::from_ref(&state), &mut c);
        let [c] = c;
        state = DecoderState {
            hidden: c.h.clone(),
            kappa: c.kappa.clone(),
            window: c.window.clone(),
        };
        caches.push(c);
        prev = tok.clone();
    }
    caches
}

fn checked(gen: &Generator, sample: &LabeledInk) -> Result<Vec<usize>> {
    let label = gen.check_sample(sample)?;
    if sample.sequence.is_empty() {
        return Err(invalid_input("sample has no tokens"));
    }
    Ok(label)
}

/// Mean per-token negative log-likelihood under teacher forcing.
pub fn nll_loss(gen: &Generator, sample: &LabeledInk) -> Result<f64> {
    let label = checked(gen, sample)?;
    let n = gen.dims();
    let tokens = &sample.sequence.tokens;
    let caches = forward_teacher(gen, &label, tokens);
    let mut scratch = vec![0.0; n.head_out];
    let total: f64 = caches
        .iter()
        .zip(tokens)
        .map(|(c, t)| head_nll_and_grad(&c.head, n.k, n.d, t, 0.0, &mut scratch))
        .sum();
    Ok(total / tokens.len() as f64)
}

/// [`nll_loss`] and its gradient with respect to every parameter, in the
/// generator's flat parameter order.
pub fn nll_loss_and_grad(gen: &Generator, sample: &LabeledInk) -> Result<(f64, Vec<f64>)> {
    let label = checked(gen, sample)?;
    let n = gen.dims();
    let tokens = &sample.sequence.tokens;
    let caches = forward_teacher(gen, &label, tokens);
    let layout = gen.layout();
    let mut grad = vec![0.0; layout.total()];
    let r = |i: usize| layout.range(i);
    let (iw, cw, ww, hw) = (gen.t(INPUT_W), gen.t(CELL_W), gen.t(WINDOW_W), gen.t(HEAD_W));
    let inv_t = 1.0 / tokens.len() as f64;

    let mut loss = 0.0;
    let mut dh_next = vec![0.0; n.h];
    let mut dkappa_next = vec![0.0; n.m];
    let mut dwindow_next = vec![0.0; n.v];
    let mut dhead = vec![0.0; n.head_out];
    for t in (0..tokens.len()).rev() {
        let c = &caches[t];
        dhead.iter_mut().for_each(|v| *v = 0.0);
        loss += inv_t * head_nll_and_grad(&c.head, n.k, n.d, &tokens[t], inv_t, &mut dhead);

        let head_in = [c.h.as_slice(), c.window.as_slice()].concat();
        outer_add(&mut grad[r(HEAD_W)], n.head_out, n.head_in, &dhead, &head_in);
        grad[r(HEAD_B)].iter_mut().zip(&dhead).for_each(|(g, d)| *g += d);
        let mut dhead_in = vec![0.0; n.head_in];
        matvec_t_add(hw, n.head_out, n.head_in, &dhead, &mut dhead_in);

        let mut dh: Vec<f64> = dh_next.iter().zip(&dhead_in[..n.h]).map(|(a, b)| a + b).collect();
        let dw: Vec<f64> = dwindow_next.iter().zip(&dhead_in[n.h..]).map(|(a, b)| a + b).collect();

        // attention window
        let m = n.m;
        let mut dalpha = vec![0.0; m];
        let mut dbeta = vec![0.0; m];
        let mut dkappa = dkappa_next.clone();
        for (u, &sym) in label.iter().enumerate() {
            let dphi = dw[sym];
            if dphi == 0.0 {
                continue;
            }
            for j in 0..m {
                let alpha = c.win_pre[j].exp();
                let beta = c.win_pre[m + j].exp();
                let diff = c.kappa[j] - u as f64;
                let e = (-beta * diff * diff).exp();
                dalpha[j] += dphi * e;
                dbeta[j] -= dphi * alpha * e * diff * diff;
                dkappa[j] -= dphi * 2.0 * alpha * beta * e * diff;
            }
        }
        let mut dwin_pre = vec![0.0; 3 * m];
        for j in 0..m {
            dwin_pre[j] = dalpha[j] * c.win_pre[j].exp();
            dwin_pre[m + j] = dbeta[j] * c.win_pre[m + j].exp();
            dwin_pre[2 * m + j] = dkappa[j] * sigm(c.win_pre[2 * m + j]);
        }
        outer_add(&mut grad[r(WINDOW_W)], 3 * m, n.h, &dwin_pre, &c.h);
        grad[r(WINDOW_B)].iter_mut().zip(&dwin_pre).for_each(|(g, d)| *g += d);
        matvec_t_add(ww, 3 * m, n.h, &dwin_pre, &mut dh);
        dkappa_next = dkappa;

        // gated recurrent cell
        let h = n.h;
        let mut dgi = vec![0.0; 3 * h];
        let mut dgh = vec![0.0; 3 * h];
        let mut dh_prev = vec![0.0; h];
        for j in 0..h {
            let (rr, z, nn) = (c.r[j], c.z[j], c.n[j]);
            let dn = dh[j] * (1.0 - z);
            let dz = dh[j] * (c.h_prev[j] - nn);
            dh_prev[j] = dh[j] * z;
            let dn_pre = dn * (1.0 - nn * nn);
            let dr_pre = dn_pre * c.gh_n[j] * rr * (1.0 - rr);
            let dz_pre = dz * z * (1.0 - z);
            dgi[j] = dr_pre;
            dgi[h + j] = dz_pre;
            dgi[2 * h + j] = dn_pre;
            dgh[j] = dr_pre;
            dgh[h + j] = dz_pre;
            dgh[2 * h + j] = dn_pre * rr;
        }
        outer_add(&mut grad[r(INPUT_W)], 3 * h, n.input, &dgi, &c.x);
        grad[r(INPUT_B)].iter_mut().zip(&dgi).for_each(|(g, d)| *g += d);
        let mut dx = vec![0.0; n.input];
        matvec_t_add(iw, 3 * h, n.input, &dgi, &mut dx);
        dwindow_next.copy_from_slice(&dx[n.d + 2..]);
        outer_add(&mut grad[r(CELL_W)], 3 * h, h, &dgh, &c.h_prev);
        grad[r(CELL_B)].iter_mut().zip(&dgh).for_each(|(g, d)| *g += d);
        matvec_t_add(cw, 3 * h, h, &dgh, &mut dh_prev);
        dh_next = dh_prev;
    }
    Ok((loss, grad))
}

/// Trains a freshly initialized generator with Adam on minibatches of
/// per-sample mean NLL, clipping the minibatch gradient to `clipnorm`.
/// Parameters are rounded to `f32` at the end so the returned model equals
/// its saved checkpoint.
pub fn train(dataset: &[LabeledInk], config: GeneratorConfig, hyper: &TrainingHyper) -> Result<(Generator, TrainLog)> {
    hyper.validate()?;
    if dataset.is_empty() {
        return Err(invalid_argument("empty training set"));
    }
    let repr = dataset[0].sequence.repr;
    if dataset.iter().any(|s| s.sequence.repr != repr) {
        return Err(invalid_input("training set mixes raw and curve samples"));
    }
    let mut gen = Generator::init(config, hyper.seed)?;
    for s in dataset {
        checked(&gen, s)?;
    }
    let mut adam = Adam::new(gen.param_count(), hyper.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(crate::nn::mix64(hyper.seed ^ 0x7472_6169_6e));
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;
    let mut log = TrainLog::default();
    for step in 0..hyper.steps {
        let mut batch = Vec::with_capacity(hyper.batch_size);
        while batch.len() < hyper.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            batch.push(order[cursor]);
            cursor += 1;
        }
        let results: Vec<(f64, Vec<f64>)> = batch
            .par_iter()
            .map(|&i| nll_loss_and_grad(&gen, &dataset[i]))
            .collect::<Result<_>>()?;
        let scale = 1.0 / batch.len() as f64;
        let mut grad = vec![0.0; gen.param_count()];
        let mut loss = 0.0;
        for (l, g) in &results {
            loss += l * scale;
            grad.iter_mut().zip(g).for_each(|(a, b)| *a += b * scale);
        }
        let (grad_norm, clipped_norm) = clip_global_norm(&mut grad, hyper.clipnorm);
        adam.step(gen.params_mut(), &grad);
        log.steps.push(StepLog {
            step,
            loss,
            grad_norm,
            clipped_norm,
        });
    }
    round_to_f32(gen.params_mut());
    Ok((gen, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ink::{synth_glyph_dataset, GlyphAlphabet, Repr, TokenSequence};

    fn tiny(repr: Repr, alphabet: &str) -> GeneratorConfig {
        GeneratorConfig {
            alphabet: alphabet.into(),
            d: repr.dim(),
            components: 2,
            state_size: 8,
            window_mixtures: 2,
            max_frames_per_char: 30,
        }
    }

    #[test]
    fn loss_is_finite() {
        let a = GlyphAlphabet::default();
        let data = synth_glyph_dataset(&a, 5, (1, 3), 1).unwrap();
        let g = Generator::init(tiny(Repr::Raw, &a.symbols()), 3).unwrap();
        for s in &data {
            assert!(nll_loss(&g, s).unwrap().is_finite());
        }
    }

    #[test]
    fn repr_mismatch_rejected() {
        let a = GlyphAlphabet::default();
        let data = synth_glyph_dataset(&a, 1, (1, 2), 1).unwrap();
        let g = Generator::init(tiny(Repr::Curve, &a.symbols()), 3).unwrap();
        assert!(matches!(nll_loss(&g, &data[0]), Err(crate::Error::InvalidInput(_))));
    }

    #[test]
    fn duplicated_tokens_double_total_with_context_free_model() {
        // Zero weights make every step's output equal to the head bias, so
        // the per-token likelihood no longer depends on context.
        let mut g = Generator::zeros(tiny(Repr::Raw, "ab")).unwrap();
        for (i, b) in g.tensor_mut("head.b").unwrap().iter_mut().enumerate() {
            *b = 0.1 * i as f64 - 0.3;
        }
        let toks = vec![
            InkToken::new(vec![0.2, -0.1], false, false),
            InkToken::new(vec![-0.3, 0.4], true, true),
        ];
        let one = LabeledInk::new("ab", TokenSequence::new(Repr::Raw, toks.clone()).unwrap()).unwrap();
        let mut doubled = toks.clone();
        doubled[1].end_of_ink = false;
        doubled.extend(toks);
        let two = LabeledInk::new("ab", TokenSequence::new(Repr::Raw, doubled).unwrap()).unwrap();
        let (m1, m2) = (nll_loss(&g, &one).unwrap(), nll_loss(&g, &two).unwrap());
        // recompute per-token terms directly
        let p = crate::mixture::MixtureParams::from_head(g.tensor("head.b").unwrap(), 2, 2);
        let direct: f64 = one
            .sequence
            .tokens
            .iter()
            .map(|t| -crate::mixture::token_log_likelihood(&p, t).unwrap())
            .sum();
        assert!((2.0 * m1 - direct).abs() < 1e-12);
        // the second copy's first token lost its end bit, so compare totals
        // with that token's flag term accounted for
        let mut t0 = one.sequence.tokens[1].clone();
        t0.end_of_ink = false;
        let tweak = -crate::mixture::token_log_likelihood(&p, &t0).unwrap()
            + crate::mixture::token_log_likelihood(&p, &one.sequence.tokens[1]).unwrap();
        assert!((4.0 * m2 - (2.0 * direct + tweak)).abs() < 1e-12);
    }

    #[test]
    fn clipped_norm_never_exceeds_clipnorm() {
        let a = GlyphAlphabet::default();
        let data = synth_glyph_dataset(&a, 8, (1, 2), 4).unwrap();
        let hyper = TrainingHyper {
            steps: 5,
            batch_size: 4,
            ..TrainingHyper::default()
        };
        let (_, log) = train(&data, tiny(Repr::Raw, &a.symbols()), &hyper).unwrap();
        assert_eq!(log.steps.len(), 5);
        for s in &log.steps {
            assert!(s.clipped_norm <= 0.1 + 1e-9);
        }
    }

    fn gradient_matches_finite_differences(repr: Repr) {
        let a = GlyphAlphabet::default();
        let mut data = synth_glyph_dataset(&a, 1, (2, 2), 11).unwrap();
        if repr == Repr::Curve {
            data[0] = data[0].to_curve(0.05).unwrap();
        }
        let mut sample = data.remove(0);
        sample.sequence.tokens.truncate(12);
        let last = sample.sequence.tokens.len() - 1;
        sample.sequence.tokens[last].end_of_ink = true;
        let mut g = Generator::init(tiny(repr, &a.symbols()), 21).unwrap();
        let (_, grad) = nll_loss_and_grad(&g, &sample).unwrap();
        let h = 1e-4;
        let n = g.param_count();
        let mut worst = 0.0f64;
        for i in (0..n).step_by((n / 150).max(1)).chain([n - 1]) {
            let orig = g.params()[i];
            g.params_mut()[i] = orig + h;
            let up = nll_loss(&g, &sample).unwrap();
            g.params_mut()[i] = orig - h;
            let down = nll_loss(&g, &sample).unwrap();
            g.params_mut()[i] = orig;
            let fd = (up - down) / (2.0 * h);
            let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-6);
            worst = worst.max(rel);
        }
        assert!(worst < 1e-3, "worst relative error {worst}");
    }

    #[test]
    fn raw_gradient_matches_finite_differences() {
        gradient_matches_finite_differences(Repr::Raw);
    }

    #[test]
    fn curve_gradient_matches_finite_differences() {
        gradient_matches_finite_differences(Repr::Curve);
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let a = GlyphAlphabet::default();
        let data = synth_glyph_dataset(&a, 50, (1, 2), 5).unwrap();
        let hyper = TrainingHyper {
            steps: 200,
            batch_size: 8,
            learning_rate: 1e-2,
            seed: 3,
            ..TrainingHyper::default()
        };
        let cfg = tiny(Repr::Raw, &a.symbols());
        let (g1, log) = train(&data, cfg.clone(), &hyper).unwrap();
        let (first, last) = log.smoothed_ends(20);
        assert!(last < first, "loss {first} -> {last}");
        let (g2, _) = train(&data, cfg, &hyper).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn mixed_repr_rejected() {
        let a = GlyphAlphabet::default();
        let mut data = synth_glyph_dataset(&a, 2, (1, 2), 4).unwrap();
        data[1] = data[1].to_curve(0.02).unwrap();
        let err = train(&data, tiny(Repr::Raw, &a.symbols()), &TrainingHyper::default()).unwrap_err();
        assert!(matches!(err, crate::Error::InvalidInput(_)));
        assert!(train(&[], tiny(Repr::Raw, "ab"), &TrainingHyper::default()).is_err());
    }
}
