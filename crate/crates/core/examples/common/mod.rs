//! Models shared by the examples: loaded from an `inkgen` output directory
//! when one is given, otherwise trained quickly from scratch.

use std::path::Path;

use inkgen::generator::{train, Generator, GeneratorConfig, TrainingHyper};
use inkgen::ink::{synth_glyph_dataset, GlyphAlphabet, Repr, TokenSequence};
use inkgen::mixture::SamplingConfig;
use inkgen::ranking::{build_r1_dataset, train_ranker, DtwRecognizer, Ranker, RankerHyper, RankerTrainMode};

pub struct Models {
    pub gen: Generator,
    pub ranker: Ranker,
    pub rec: DtwRecognizer,
}

pub fn labels(n: usize, seed: u64) -> Vec<String> {
    use rand::SeedableRng;
    let alphabet = GlyphAlphabet::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| inkgen::ink::random_label(&alphabet, (2, 3), &mut rng)).collect()
}

/// `dir` holds `generator.bin` and `ranker.bin` as written by `inkgen
/// train-gen` and `inkgen train-r1`.
pub fn models(dir: Option<&Path>) -> inkgen::Result<Models> {
    let alphabet = GlyphAlphabet::default();
    let rec = DtwRecognizer::new(&alphabet)?;
    if let Some(dir) = dir {
        return Ok(Models {
            gen: Generator::load(&dir.join("generator.bin"))?,
            ranker: Ranker::load(&dir.join("ranker.bin"))?,
            rec,
        });
    }
    println!("no model directory given; training small models (about a minute in release mode)");
    let data = synth_glyph_dataset(&alphabet, 1500, (1, 3), 0)?;
    let config = GeneratorConfig {
        state_size: 32,
        ..GeneratorConfig::new(alphabet.symbols(), Repr::Raw)
    };
    let hyper = TrainingHyper {
        learning_rate: 3e-3,
        steps: 6000,
        ..TrainingHyper::default()
    };
    let (gen, _) = train(&data, config, &hyper)?;
    let pool = [
        SamplingConfig::ancestral(),
        SamplingConfig::greedy(),
        SamplingConfig::new(inkgen::mixture::SamplingMethod::TopP, 0.5, 1.0)?,
    ];
    let examples = build_r1_dataset(&gen, &labels(800, 1), &RankerTrainMode::RandomSampling, &pool, &rec, 800, 0)?;
    let pairs: Vec<(TokenSequence, bool)> = examples.into_iter().map(|e| (e.sequence, e.recognizable)).collect();
    let (ranker, _) = train_ranker(&pairs, &RankerHyper::default())?;
    Ok(Models { gen, ranker, rec })
}
