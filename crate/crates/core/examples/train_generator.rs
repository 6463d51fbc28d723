//! Trains a small generator on synthetic glyphs, saves it, reloads it, and
//! decodes a few candidates.
//!
//! cargo run --release --example train_generator -- [steps] [checkpoint]

use std::path::PathBuf;

use inkgen::eval::cer;
use inkgen::generator::{train, Generator, GeneratorConfig, TrainingHyper};
use inkgen::ink::{synth_glyph_dataset, GlyphAlphabet, Repr};
use inkgen::mixture::SamplingConfig;
use inkgen::ranking::{DtwRecognizer, Recognizer};

fn main() -> inkgen::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2000);
    let path = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("inkgen_generator.bin"));

    let alphabet = GlyphAlphabet::default();
    let data = synth_glyph_dataset(&alphabet, 1000, (1, 3), 0)?;
    let config = GeneratorConfig {
        state_size: 32,
        ..GeneratorConfig::new(alphabet.symbols(), Repr::Raw)
    };
    let hyper = TrainingHyper {
        learning_rate: 3e-3,
        steps,
        ..TrainingHyper::default()
    };
    let (gen, log) = train(&data, config, &hyper)?;
    let (first, last) = log.smoothed_ends(50);
    println!("{steps} steps: smoothed loss {first:.3} -> {last:.3}");
    gen.save(&path)?;
    let gen = Generator::load(&path)?;
    println!("saved and reloaded {} ({} parameters)", path.display(), gen.param_count());

    let rec = DtwRecognizer::new(&alphabet)?;
    for label in ["sun", "owl", "zone"] {
        for c in gen.decode_batch(label, &SamplingConfig::ancestral(), 3, 11)? {
            let text = rec.recognize(&c.sequence);
            println!(
                "{label:>4}: {} tokens, hit cap {:<5} recognized {text:?} CER {:.2}",
                c.sequence.len(),
                c.diag.hit_cap,
                cer(&text, label)?
            );
        }
    }
    Ok(())
}
