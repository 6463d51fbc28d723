//! Per-step output distribution of the generator and its distortions.
//!
//! A decoding step emits a Gaussian mixture over the token geometry plus two
//! Bernoulli logits for the pen-up and end-of-ink bits. Sampling can distort
//! the mixture in two ways: the component weights are truncated (Top-K,
//! Top-P or Typical) and renormalized, and a bias `b` is subtracted from
//! the scale pre-activations before the softplus, shrinking the variance
//! (`b = inf` collapses every component onto its mean).

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_argument, invalid_input, Result};
pub use crate::ink::InkToken;

const RHO_LIMIT: f64 = 1.0 - 1e-6;
const SIMPLEX_TOL: f64 = 1e-9;

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln sigmoid(x)`, stable for large |x|.
fn log_sigmoid(x: f64) -> f64 {
    -softplus(-x)
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMethod {
    TopK,
    TopP,
    Typical,
}

impl fmt::Display for SamplingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplingMethod::TopK => "top_k",
            SamplingMethod::TopP => "top_p",
            SamplingMethod::Typical => "typical",
        })
    }
}

impl std::str::FromStr for SamplingMethod {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "top_k" => Ok(SamplingMethod::TopK),
            "top_p" => Ok(SamplingMethod::TopP),
            "typical" => Ok(SamplingMethod::Typical),
            _ => Err(invalid_argument(format!("unknown sampling method {s:?}"))),
        }
    }
}

/// Serializes an extended non-negative real: finite values as numbers,
/// infinity as the string `"inf"`.
pub mod ext_real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("expected number or \"inf\", got {s:?}"))),
        }
    }
}

pub fn format_ext_real(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

/// Sampling parameters `(s, m, b)`: truncation method, its parameter, and
/// the covariance bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub method: SamplingMethod,
    pub m: f64,
    #[serde(with = "ext_real")]
    pub bias: f64,
}

impl SamplingConfig {
    pub fn new(method: SamplingMethod, m: f64, bias: f64) -> Result<Self> {
        let cfg = SamplingConfig { method, m, bias };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sampling from the unmodified distribution.
    pub fn ancestral() -> Self {
        SamplingConfig {
            method: SamplingMethod::TopP,
            m: 1.0,
            bias: 0.0,
        }
    }

    /// Most likely component, zero variance.
    pub fn greedy() -> Self {
        SamplingConfig {
            method: SamplingMethod::TopK,
            m: 1.0,
            bias: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_m(self.method, self.m)?;
        if self.bias.is_nan() || self.bias < 0.0 {
            return Err(invalid_argument(format!("bias must be in [0, inf], got {}", self.bias)));
        }
        Ok(())
    }
}

impl fmt::Display for SamplingConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.method, self.m, format_ext_real(self.bias))
    }
}

fn validate_m(method: SamplingMethod, m: f64) -> Result<()> {
    let ok = match method {
        SamplingMethod::TopK => m >= 1.0 && m.fract() == 0.0 && m.is_finite(),
        SamplingMethod::TopP | SamplingMethod::Typical => (0.0..=1.0).contains(&m),
    };
    if ok {
        Ok(())
    } else {
        Err(invalid_argument(format!("m = {m} out of domain for {method}")))
    }
}

/// Truncates a categorical distribution and renormalizes the kept mass.
///
/// * Top-K keeps the `m` largest weights.
/// * Top-P keeps the shortest prefix of the descending order whose mass
///   reaches `m`.
/// * Typical orders components by `|-ln w - H(w)|` ascending and keeps the
///   shortest prefix whose mass reaches `m`.
///
/// Orderings break ties by the lower index, and at least one component is
/// always kept, so `m = 0` selects the argmax (Top-P) or the most typical
/// component. Dropped components are exactly zero.
pub fn distort_weights(weights: &[f64], method: SamplingMethod, m: f64) -> Result<Vec<f64>> {
    validate_m(method, m)?;
    if weights.is_empty() {
        return Err(invalid_input("empty weight vector"));
    }
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(invalid_input(format!("weights are not on the simplex (sum {sum})")));
    }
    let k = weights.len();
    let mut order: Vec<usize> = (0..k).collect();
    let keep = match method {
        SamplingMethod::TopK => {
            order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
            (m as usize).min(k)
        }
        SamplingMethod::TopP | SamplingMethod::Typical => {
            if method == SamplingMethod::TopP {
                order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
            } else {
                let entropy: f64 = weights.iter().filter(|&&w| w > 0.0).map(|&w| -w * w.ln()).sum();
                let dist = |i: usize| {
                    if weights[i] > 0.0 {
                        (-weights[i].ln() - entropy).abs()
                    } else {
                        f64::INFINITY
                    }
                };
                order.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b)));
            }
            let mut cum = 0.0;
            let mut n = 0;
            for &i in &order {
                cum += weights[i];
                n += 1;
                if cum >= m - SIMPLEX_TOL {
                    break;
                }
            }
            n.max(1)
        }
    };
    if keep == k {
        return Ok(weights.to_vec());
    }
    let mut out = vec![0.0; k];
    let kept: f64 = order[..keep].iter().map(|&i| weights[i]).sum();
    if kept <= 0.0 {
        // Only zero-weight components survived the cut; fall back to the
        // largest weight.
        let best = (0..k).fold(0, |b, i| if weights[i] > weights[b] { i } else { b });
        out[best] = 1.0;
        return Ok(out);
    }
    for &i in &order[..keep] {
        out[i] = weights[i] / kept;
    }
    Ok(out)
}

/// `softplus(pre - b)` elementwise; `b = inf` gives exactly zero.
pub fn apply_bias(scale_preacts: &[f64], bias: f64) -> Vec<f64> {
    if bias == f64::INFINITY {
        return vec![0.0; scale_preacts.len()];
    }
    scale_preacts.iter().map(|&s| softplus(s - bias)).collect()
}

/// One step's mixture output. Component-major flat storage: `means` and
/// `scale_preacts` hold `k * d` values, component `i` at `[i * d..(i + 1) * d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams {
    pub d: usize,
    pub weight_logits: Vec<f64>,
    pub means: Vec<f64>,
    /// Pre-softplus standard deviations.
    pub scale_preacts: Vec<f64>,
    /// Pre-tanh correlations, one per component when `d == 2`, else empty.
    pub corr_preacts: Vec<f64>,
    pub pen_logit: f64,
    pub end_logit: f64,
}

/// Width of the flat head output that encodes a [`MixtureParams`].
pub fn head_width(k: usize, d: usize) -> usize {
    k * (1 + 2 * d) + if d == 2 { k } else { 0 } + 2
}

impl MixtureParams {
    pub fn k(&self) -> usize {
        self.weight_logits.len()
    }

    /// Decodes a flat head output laid out as
    /// `[logits K | means K*d | scales K*d | corr K (d = 2) | pen | end]`.
    pub fn from_head(head: &[f64], k: usize, d: usize) -> Self {
        debug_assert_eq!(head.len(), head_width(k, d));
        let mut o = 0;
        let mut take = |n: usize| {
            let s = head[o..o + n].to_vec();
            o += n;
            s
        };
        let weight_logits = take(k);
        let means = take(k * d);
        let scale_preacts = take(k * d);
        let corr_preacts = if d == 2 { take(k) } else { Vec::new() };
        let flags = take(2);
        MixtureParams {
            d,
            weight_logits,
            means,
            scale_preacts,
            corr_preacts,
            pen_logit: flags[0],
            end_logit: flags[1],
        }
    }

    pub fn to_head(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(head_width(self.k(), self.d));
        out.extend_from_slice(&self.weight_logits);
        out.extend_from_slice(&self.means);
        out.extend_from_slice(&self.scale_preacts);
        out.extend_from_slice(&self.corr_preacts);
        out.push(self.pen_logit);
        out.push(self.end_logit);
        out
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k == 0 {
            return Err(invalid_input("mixture has no components"));
        }
        if self.d != 2 && self.d != 6 {
            return Err(invalid_input(format!("geometry width {} not in {{2, 6}}", self.d)));
        }
        let corr_len = if self.d == 2 { k } else { 0 };
        if self.means.len() != k * self.d || self.scale_preacts.len() != k * self.d || self.corr_preacts.len() != corr_len {
            return Err(invalid_input("mixture parameter shapes disagree"));
        }
        let finite = self
            .weight_logits
            .iter()
            .chain(&self.means)
            .chain(&self.scale_preacts)
            .chain(&self.corr_preacts)
            .chain([&self.pen_logit, &self.end_logit])
            .all(|v| v.is_finite());
        if !finite {
            return Err(invalid_input("non-finite mixture parameters"));
        }
        Ok(())
    }

    pub fn weights(&self) -> Vec<f64> {
        softmax(&self.weight_logits)
    }

    fn rho(&self, i: usize) -> f64 {
        self.corr_preacts[i].tanh().clamp(-RHO_LIMIT, RHO_LIMIT)
    }
}

fn pick_component(weights: &[f64], u: f64) -> usize {
    let mut cum = 0.0;
    let mut last_nonzero = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            cum += w;
            last_nonzero = i;
            if u < cum {
                return i;
            }
        }
    }
    last_nonzero
}

/// Draws one token. Random numbers are consumed in a fixed order (component,
/// `d` normals, pen bit, end bit) so a seeded generator reproduces the same
/// token bit for bit.
pub fn sample_token(p: &MixtureParams, cfg: &SamplingConfig, rng: &mut impl Rng) -> Result<InkToken> {
    p.validate()?;
    cfg.validate()?;
    let d = p.d;
    let weights = distort_weights(&p.weights(), cfg.method, cfg.m)?;
    let u: f64 = rng.random();
    let k = pick_component(&weights, u);
    let sigma = apply_bias(&p.scale_preacts[k * d..(k + 1) * d], cfg.bias);
    let mu = &p.means[k * d..(k + 1) * d];
    let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let geom = if d == 2 {
        let rho = p.rho(k);
        vec![
            mu[0] + sigma[0] * z[0],
            mu[1] + sigma[1] * (rho * z[0] + (1.0 - rho * rho).sqrt() * z[1]),
        ]
    } else {
        (0..d).map(|j| mu[j] + sigma[j] * z[j]).collect()
    };
    let pen_up = rng.random::<f64>() < sigmoid(p.pen_logit);
    let end_of_ink = rng.random::<f64>() < sigmoid(p.end_logit);
    Ok(InkToken::new(geom, pen_up, end_of_ink))
}

/// Log density of one component at `x` and the gradient of that log density
/// with respect to (means, scale pre-activations, correlation pre-activation).
struct ComponentTerms {
    log_density: f64,
    d_mean: [f64; 6],
    d_scale_pre: [f64; 6],
    d_corr_pre: f64,
}

fn component_terms(p: &MixtureParams, i: usize, x: &[f64]) -> ComponentTerms {
    let d = p.d;
    let mut t = ComponentTerms {
        log_density: 0.0,
        d_mean: [0.0; 6],
        d_scale_pre: [0.0; 6],
        d_corr_pre: 0.0,
    };
    let pre = &p.scale_preacts[i * d..(i + 1) * d];
    let mu = &p.means[i * d..(i + 1) * d];
    if d == 2 {
        let (s1, s2) = (softplus(pre[0]), softplus(pre[1]));
        let rho = p.rho(i);
        let q = 1.0 - rho * rho;
        let z1 = (x[0] - mu[0]) / s1;
        let z2 = (x[1] - mu[1]) / s2;
        let zt = z1 * z1 + z2 * z2 - 2.0 * rho * z1 * z2;
        t.log_density = -(2.0 * PI).ln() - s1.ln() - s2.ln() - 0.5 * q.ln() - zt / (2.0 * q);
        t.d_mean[0] = (z1 - rho * z2) / (q * s1);
        t.d_mean[1] = (z2 - rho * z1) / (q * s2);
        t.d_scale_pre[0] = (-1.0 / s1 + z1 * (z1 - rho * z2) / (q * s1)) * sigmoid(pre[0]);
        t.d_scale_pre[1] = (-1.0 / s2 + z2 * (z2 - rho * z1) / (q * s2)) * sigmoid(pre[1]);
        let d_rho = rho / q + z1 * z2 / q - rho * zt / (q * q);
        t.d_corr_pre = d_rho * (1.0 - rho * rho);
    } else {
        for j in 0..d {
            let s = softplus(pre[j]);
            let z = (x[j] - mu[j]) / s;
            t.log_density += -0.5 * (2.0 * PI).ln() - s.ln() - 0.5 * z * z;
            t.d_mean[j] = z / s;
            t.d_scale_pre[j] = (-1.0 / s + z * z / s) * sigmoid(pre[j]);
        }
    }
    t
}

fn check_scales(p: &MixtureParams) -> Result<()> {
    if p.scale_preacts.iter().any(|&s| softplus(s) <= 0.0) {
        return Err(invalid_input("zero standard deviation in likelihood"));
    }
    Ok(())
}

/// Exact log-likelihood of a token under the undistorted distribution.
pub fn token_log_likelihood(p: &MixtureParams, tok: &InkToken) -> Result<f64> {
    p.validate()?;
    check_scales(p)?;
    if tok.geom.len() != p.d {
        return Err(invalid_input("token geometry width does not match mixture"));
    }
    let log_w = log_softmax(&p.weight_logits);
    let terms: Vec<f64> = (0..p.k())
        .map(|i| log_w[i] + component_terms(p, i, &tok.geom).log_density)
        .collect();
    Ok(log_sum_exp(&terms) + bernoulli_ll(p.pen_logit, tok.pen_up) + bernoulli_ll(p.end_logit, tok.end_of_ink))
}

fn bernoulli_ll(logit: f64, bit: bool) -> f64 {
    if bit {
        log_sigmoid(logit)
    } else {
        log_sigmoid(-logit)
    }
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|l| l - lse).collect()
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Negative log-likelihood of `tok` under the flat head output `head`, with
/// `scale * d(nll)/d(head)` accumulated into `grad`.
pub(crate) fn head_nll_and_grad(head: &[f64], k: usize, d: usize, tok: &InkToken, scale: f64, grad: &mut [f64]) -> f64 {
    let p = MixtureParams::from_head(head, k, d);
    let log_w = log_softmax(&p.weight_logits);
    let terms: Vec<ComponentTerms> = (0..k).map(|i| component_terms(&p, i, &tok.geom)).collect();
    let joint: Vec<f64> = (0..k).map(|i| log_w[i] + terms[i].log_density).collect();
    let lse = log_sum_exp(&joint);
    let nll = -lse - bernoulli_ll(p.pen_logit, tok.pen_up) - bernoulli_ll(p.end_logit, tok.end_of_ink);

    let means_at = k;
    let scales_at = k + k * d;
    let corr_at = k + 2 * k * d;
    let flags_at = head.len() - 2;
    for i in 0..k {
        let resp = (joint[i] - lse).exp();
        let w = log_w[i].exp();
        grad[i] += scale * (w - resp);
        for j in 0..d {
            grad[means_at + i * d + j] -= scale * resp * terms[i].d_mean[j];
            grad[scales_at + i * d + j] -= scale * resp * terms[i].d_scale_pre[j];
        }
        if d == 2 {
            grad[corr_at + i] -= scale * resp * terms[i].d_corr_pre;
        }
    }
    grad[flags_at] += scale * (sigmoid(p.pen_logit) - tok.pen_up as u8 as f64);
    grad[flags_at + 1] += scale * (sigmoid(p.end_logit) - tok.end_of_ink as u8 as f64);
    nll
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    const W: [f64; 3] = [0.5, 0.3, 0.2];

    #[test]
    fn top_p_identity_at_one() {
        let out = distort_weights(&W, SamplingMethod::TopP, 1.0).unwrap();
        assert!(close(&out, &W, 1e-15));
    }

    #[test]
    fn top_k_one_is_argmax() {
        assert_eq!(distort_weights(&W, SamplingMethod::TopK, 1.0).unwrap(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn top_p_prefix() {
        // prefix {0.5, 0.3} reaches 0.8 >= 0.6; renormalize by 0.8
        let out = distort_weights(&W, SamplingMethod::TopP, 0.6).unwrap();
        assert!(close(&out, &[0.5 / 0.8, 0.3 / 0.8, 0.0], 1e-15));
        assert!(close(&out, &[0.625, 0.375, 0.0], 1e-12));
    }

    #[test]
    fn typical_keeps_closest_to_entropy() {
        // independent entropy: H = -sum w ln w
        let h = -(0.5f64 * 0.5f64.ln() + 0.3 * 0.3f64.ln() + 0.2 * 0.2f64.ln());
        assert!((h - 1.0297).abs() < 1e-4);
        let dists: Vec<f64> = W.iter().map(|w| (-w.ln() - h).abs()).collect();
        assert!(close(&dists, &[0.337, 0.174, 0.580], 1e-3));
        let out = distort_weights(&W, SamplingMethod::Typical, 0.5).unwrap();
        assert!(close(&out, &[0.625, 0.375, 0.0], 1e-12));
    }

    #[test]
    fn m_zero_keeps_one_component() {
        assert_eq!(distort_weights(&W, SamplingMethod::TopP, 0.0).unwrap(), vec![1.0, 0.0, 0.0]);
        let t = distort_weights(&W, SamplingMethod::Typical, 0.0).unwrap();
        assert_eq!(t, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn ties_prefer_lower_index() {
        let w = [0.25, 0.25, 0.25, 0.25];
        assert_eq!(distort_weights(&w, SamplingMethod::TopK, 2.0).unwrap(), vec![0.5, 0.5, 0.0, 0.0]);
        assert_eq!(distort_weights(&w, SamplingMethod::Typical, 0.2).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn m_domain_errors() {
        assert!(distort_weights(&W, SamplingMethod::TopK, 0.0).is_err());
        assert!(distort_weights(&W, SamplingMethod::TopK, 1.5).is_err());
        assert!(distort_weights(&W, SamplingMethod::TopP, 1.1).is_err());
        assert!(distort_weights(&W, SamplingMethod::Typical, -0.1).is_err());
        assert!(distort_weights(&[0.5, 0.6], SamplingMethod::TopP, 0.5).is_err());
    }

    #[test]
    fn bias_values() {
        assert!((apply_bias(&[0.0], 0.0)[0] - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(apply_bias(&[3.0, -1e3, 1e3, 0.0], f64::INFINITY), vec![0.0; 4]);
        let lo = apply_bias(&[3.0], 1.0)[0];
        let hi = apply_bias(&[3.0], 5.0)[0];
        assert!((lo - (1.0 + 2f64.exp()).ln()).abs() < 1e-12);
        assert!((hi - (1.0 + (-2f64).exp()).ln()).abs() < 1e-12);
        assert!(lo > hi);
    }

    fn single(mu: [f64; 2], pre: f64, corr: f64) -> MixtureParams {
        MixtureParams {
            d: 2,
            weight_logits: vec![0.0],
            means: mu.to_vec(),
            scale_preacts: vec![pre, pre],
            corr_preacts: vec![corr],
            pen_logit: 0.0,
            end_logit: 0.0,
        }
    }

    /// softplus^{-1}(1)
    fn unit_pre() -> f64 {
        (1f64.exp() - 1.0).ln()
    }

    #[test]
    fn greedy_returns_mean() {
        let p = MixtureParams {
            d: 2,
            weight_logits: vec![0.1, 2.0, -1.0],
            means: vec![1.0, 1.0, -3.0, 0.5, 7.0, 7.0],
            scale_preacts: vec![0.3; 6],
            corr_preacts: vec![0.2, -0.4, 0.9],
            pen_logit: 0.0,
            end_logit: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let t = sample_token(&p, &SamplingConfig::greedy(), &mut rng).unwrap();
            assert_eq!(t.geom, vec![-3.0, 0.5]);
        }
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let p = single([0.3, -0.2], 0.1, 0.5);
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            (0..50)
                .map(|_| sample_token(&p, &SamplingConfig::ancestral(), &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn non_finite_params_rejected() {
        let mut p = single([0.0, 0.0], 0.0, 0.0);
        p.means[0] = f64::NAN;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            sample_token(&p, &SamplingConfig::ancestral(), &mut rng),
            Err(crate::Error::InvalidInput(_))
        ));
    }

    #[test]
    fn likelihood_at_mean() {
        let p = single([0.0, 0.0], unit_pre(), 0.0);
        let tok = InkToken::new(vec![0.0, 0.0], false, false);
        let ll = token_log_likelihood(&p, &tok).unwrap();
        let expect = (1.0 / (2.0 * PI)).ln() + 2.0 * 0.5f64.ln();
        assert!((ll - expect).abs() < 1e-12);
        assert!((ll - (-3.2242)).abs() < 1e-4);
    }

    #[test]
    fn duplicated_component_matches_single() {
        let p = single([0.4, -0.1], 0.2, 0.7);
        let mut dup = p.clone();
        dup.weight_logits = vec![0.0, 0.0];
        dup.means = [p.means.clone(), p.means.clone()].concat();
        dup.scale_preacts = [p.scale_preacts.clone(), p.scale_preacts.clone()].concat();
        dup.corr_preacts = vec![0.7, 0.7];
        let tok = InkToken::new(vec![1.0, 0.5], true, false);
        let a = token_log_likelihood(&p, &tok).unwrap();
        let b = token_log_likelihood(&dup, &tok).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn zero_scale_rejected() {
        let p = single([0.0, 0.0], -1e4, 0.0);
        let tok = InkToken::new(vec![0.0, 0.0], false, false);
        assert!(token_log_likelihood(&p, &tok).is_err());
    }

    #[test]
    fn head_gradient_matches_finite_differences() {
        for d in [2usize, 6] {
            let k = 3;
            let w = head_width(k, d);
            let head: Vec<f64> = (0..w).map(|i| ((i * 37 % 17) as f64 / 17.0 - 0.5) * 1.2).collect();
            let tok = InkToken::new((0..d).map(|j| 0.3 * j as f64 - 0.4).collect(), true, false);
            let mut grad = vec![0.0; w];
            head_nll_and_grad(&head, k, d, &tok, 1.0, &mut grad);
            let nll = |h: &[f64]| -token_log_likelihood(&MixtureParams::from_head(h, k, d), &tok).unwrap();
            for i in 0..w {
                let mut hp = head.clone();
                let mut hm = head.clone();
                hp[i] += 1e-5;
                hm[i] -= 1e-5;
                let fd = (nll(&hp) - nll(&hm)) / 2e-5;
                assert!((fd - grad[i]).abs() <= 1e-6 * (1.0 + fd.abs()), "d={d} i={i}: {fd} vs {}", grad[i]);
            }
        }
    }
}
