//! The two rankers: the DTW recognizer used by R2 and a trained R1
//! classifier, applied to a batch of generated candidates.
//!
//! cargo run --release --example ranking -- [model_dir]

mod common;

use inkgen::ink::{to_raw_tokens, GlyphAlphabet};
use inkgen::mixture::SamplingConfig;
use inkgen::ranking::{r1_score, r2_rank, Recognizer};

fn main() -> inkgen::Result<()> {
    let dir = std::env::args().nth(1).map(std::path::PathBuf::from);
    let m = common::models(dir.as_deref())?;

    let clean = to_raw_tokens(&GlyphAlphabet::default().render_clean("snow")?)?;
    println!("clean \"snow\" is recognized as {:?}", m.rec.recognize(&clean));

    let label = "zone";
    let cands: Vec<_> = m
        .gen
        .decode_batch(label, &SamplingConfig::ancestral(), 8, 3)?
        .into_iter()
        .map(|c| c.sequence)
        .collect();
    let scores = r1_score(&m.ranker, &cands);
    let (order, entries) = r2_rank(&m.rec, &cands, label, Some(&scores))?;
    println!("label {label:?}, candidates in R2 order:");
    for i in order {
        let e = &entries[i];
        println!("  #{i}: recognized {:?} CER {:.2} R1 {:.3}", e.recognized, e.cer, scores[i]);
    }
    Ok(())
}
