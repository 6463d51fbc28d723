//! Best-of-B generation: sample B candidates, shortlist R by R1, and let R2
//! pick the winner.
//!
//! cargo run --release --example generate_best -- [model_dir]

mod common;

use inkgen::ink::render_svg;
use inkgen::mixture::{SamplingConfig, SamplingMethod};
use inkgen::pipeline::{generate_best, PipelineConfig};
use inkgen::ranking::Recognizer;

fn main() -> inkgen::Result<()> {
    let dir = std::env::args().nth(1).map(std::path::PathBuf::from);
    let m = common::models(dir.as_deref())?;
    let sampling = SamplingConfig::new(SamplingMethod::TopP, 0.7, 1.0)?;

    for (batch, rerank) in [(1, 1), (5, 1), (5, 2), (5, 5)] {
        let cfg = PipelineConfig {
            seed: 7,
            ..PipelineConfig::new(sampling, batch, rerank)
        };
        let res = generate_best(&m.gen, &m.ranker, &m.rec, "lens", &cfg)?;
        println!(
            "B={batch} R={rerank}: winner #{} recognized {:?}, {} R2 calls, {:.2} ms/char",
            res.winner,
            m.rec.recognize(res.winner_sequence()),
            res.r2_evaluated.len(),
            res.timing.per_char_ms
        );
        if (batch, rerank) == (5, 5) {
            let path = std::env::temp_dir().join("inkgen_lens.svg");
            std::fs::write(&path, render_svg(res.winner_sequence())).map_err(|e| inkgen::Error::Io { path: path.clone(), source: e })?;
            println!("winner drawn to {}", path.display());
        }
    }

    let early = PipelineConfig {
        early_stop: true,
        seed: 7,
        ..PipelineConfig::new(sampling, 8, 8)
    };
    let res = generate_best(&m.gen, &m.ranker, &m.rec, "lens", &early)?;
    println!("early stop at B=8 R=8: R2 evaluated {} of 8 candidates", res.r2_evaluated.len());
    Ok(())
}
