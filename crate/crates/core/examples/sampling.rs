//! Mixture-weight truncation, the sampling bias, and seeded token draws.
//!
//! cargo run --example sampling

use inkgen::mixture::{apply_bias, distort_weights, sample_token, softmax, MixtureParams, SamplingConfig, SamplingMethod};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> inkgen::Result<()> {
    let weights = softmax(&[2.0, 1.0, 0.5, 0.0, -1.0]);
    println!("weights        {}", fmt(&weights));
    for (method, m) in [
        (SamplingMethod::TopK, 2.0),
        (SamplingMethod::TopP, 0.5),
        (SamplingMethod::TopP, 0.9),
        (SamplingMethod::Typical, 0.5),
    ] {
        println!("{:<8} m={:<4} {}", method.to_string(), m, fmt(&distort_weights(&weights, method, m)?));
    }

    let pre = [0.5, -0.5];
    for b in [0.0, 1.0, 5.0, f64::INFINITY] {
        println!("bias {b:>4}: sigma {}", fmt(&apply_bias(&pre, b)));
    }

    // a two-component bivariate mixture
    let p = MixtureParams {
        d: 2,
        weight_logits: vec![1.0, 0.0],
        means: vec![0.1, 0.0, -0.2, 0.3],
        scale_preacts: vec![-2.0, -2.0, -1.0, -1.0],
        corr_preacts: vec![0.3, -0.2],
        pen_logit: -1.0,
        end_logit: -4.0,
    };
    for cfg in [
        SamplingConfig::ancestral(),
        SamplingConfig::greedy(),
        SamplingConfig::new(SamplingMethod::TopP, 0.5, 1.0)?,
    ] {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws: Vec<String> = (0..3)
            .map(|_| sample_token(&p, &cfg, &mut rng).map(|t| format!("({:+.3}, {:+.3})", t.geom[0], t.geom[1])))
            .collect::<inkgen::Result<_>>()?;
        println!("{cfg}: {}", draws.join(" "));
    }
    Ok(())
}

fn fmt(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ")
}
