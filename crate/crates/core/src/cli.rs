//! The `inkgen` command line: one subcommand per experiment stage, all
//! driven by a JSON run configuration.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::eval::{
    budget_sweep, emit_report, error_study, errors_csv, grid_csv, tune_sampling, EvalReport, GridRow, SampleFigure,
    SamplingPool,
};
use crate::generator::{train, Generator, GeneratorConfig, TrainingHyper};
use crate::ink::jsonl::{read_jsonl, sample_from_json, sample_to_json, templates_to_samples, write_jsonl};
use crate::ink::{random_label, render_svg, synth_glyph_dataset, GlyphAlphabet, LabeledInk, Repr, TokenSequence};
use crate::mixture::SamplingConfig;
use crate::nn::mix64;
use crate::pipeline::{generate_best, PipelineConfig};
use crate::ranking::{build_r1_dataset, train_ranker, train_rbase, DtwRecognizer, Ranker, RankerHyper, RankerTrainMode};

/// Text printed by `--version`.
pub const VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    " (generator checkpoint format 1, ranker checkpoint format 1)"
);

#[derive(Debug, Parser)]
#[command(name = "inkgen", version = VERSION, about = "Digital ink generation with sampling and ranking under a compute budget")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Run configuration (JSON); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed, overrides the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, overrides the configuration.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel evaluation.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the synthetic glyph dataset and its templates.
    SynthData(Common),
    /// Train the generator.
    TrainGen(Common),
    /// Decode and label generator samples for ranker training.
    BuildR1Data(Common),
    /// Train the recognizability ranker.
    TrainR1(Common),
    /// Train the real-versus-synthetic baseline ranker.
    TrainRbase(Common),
    /// Grid search over sampling configurations.
    Tune(Common),
    /// Generate the best candidate for one or more labels.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Text to write; repeatable.
        #[arg(long = "label", required = true)]
        labels: Vec<String>,
    },
    /// Budget sweep over (B, R) with the Pareto frontier and report files.
    Sweep(Common),
    /// Error counts per Top-P mass, with and without ranking.
    Errors(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::SynthData(c)
            | Command::TrainGen(c)
            | Command::BuildR1Data(c)
            | Command::TrainR1(c)
            | Command::TrainRbase(c)
            | Command::Tune(c)
            | Command::Sweep(c)
            | Command::Errors(c) => c,
            Command::Generate { common, .. } => common,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSettings {
    pub size: usize,
    /// Inclusive label length range.
    pub label_len: (usize, usize),
    pub repr: Repr,
    /// Bezier fitting tolerance for the curve representation.
    pub curve_eps: f64,
}

impl Default for DataSettings {
    fn default() -> Self {
        DataSettings {
            size: 3000,
            label_len: (1, 4),
            repr: Repr::Raw,
            curve_eps: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSettings {
    pub components: usize,
    pub state_size: usize,
    pub window_mixtures: usize,
    pub max_frames_per_char: usize,
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings {
            components: 10,
            state_size: 64,
            window_mixtures: 3,
            max_frames_per_char: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RankerDataSettings {
    pub mode: RankerTrainMode,
    pub size: usize,
    pub label_len: (usize, usize),
}

impl Default for RankerDataSettings {
    fn default() -> Self {
        RankerDataSettings {
            mode: RankerTrainMode::RandomSampling,
            size: 3000,
            label_len: (2, 4),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuneSettings {
    pub labels: usize,
    pub samples_per_label: usize,
    pub label_len: (usize, usize),
}

impl Default for TuneSettings {
    fn default() -> Self {
        TuneSettings {
            labels: 60,
            samples_per_label: 2,
            label_len: (2, 4),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSettings {
    /// Fixed sampling; when absent the tuned optimum is used if present,
    /// otherwise ancestral sampling.
    pub sampling: Option<SamplingConfig>,
    pub batch: usize,
    pub rerank: usize,
    pub early_stop: bool,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings {
            sampling: None,
            batch: 5,
            rerank: 1,
            early_stop: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSettings {
    pub batches: Vec<usize>,
    pub labels: usize,
    pub label_len: (usize, usize),
    /// Labels used for the timing measurements.
    pub timing_labels: usize,
    /// Labels drawn as ranked sample figures.
    pub figures: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            batches: vec![1, 2, 4, 8, 16],
            labels: 200,
            label_len: (2, 4),
            timing_labels: 20,
            figures: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErrorSettings {
    pub ps: Vec<f64>,
    pub generations: usize,
    pub batch: usize,
    pub label_len: (usize, usize),
}

impl Default for ErrorSettings {
    fn default() -> Self {
        ErrorSettings {
            ps: (1..=10).map(|i| i as f64 / 10.0).collect(),
            generations: 500,
            batch: 5,
            label_len: (2, 4),
        }
    }
}

/// Input locations; each defaults to the file of the same role under `out`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathSettings {
    pub train_data: Option<PathBuf>,
    pub generator: Option<PathBuf>,
    pub r1_data: Option<PathBuf>,
    pub ranker: Option<PathBuf>,
}

/// Everything a run needs. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub jobs: Option<usize>,
    pub data: DataSettings,
    pub model: ModelSettings,
    pub training: TrainingHyper,
    pub ranker_data: RankerDataSettings,
    pub ranker: RankerHyper,
    /// Sampling grid; the default 192-entry grid when absent.
    pub pool: Option<SamplingPool>,
    pub tune: TuneSettings,
    pub pipeline: PipelineSettings,
    pub sweep: SweepSettings,
    pub errors: ErrorSettings,
    pub paths: PathSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out: PathBuf::from("out"),
            jobs: None,
            data: DataSettings::default(),
            model: ModelSettings::default(),
            training: TrainingHyper {
                learning_rate: 3e-3,
                steps: 15_000,
                ..TrainingHyper::default()
            },
            ranker_data: RankerDataSettings::default(),
            ranker: RankerHyper::default(),
            pool: None,
            tune: TuneSettings::default(),
            pipeline: PipelineSettings::default(),
            sweep: SweepSettings::default(),
            errors: ErrorSettings::default(),
            paths: PathSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        for (name, r) in [
            ("data", self.data.label_len),
            ("ranker_data", self.ranker_data.label_len),
            ("tune", self.tune.label_len),
            ("sweep", self.sweep.label_len),
            ("errors", self.errors.label_len),
        ] {
            if r.0 == 0 || r.0 > r.1 {
                return bad(&format!("{name}.label_len must satisfy 1 <= min <= max"));
            }
        }
        if self.data.size == 0 || self.ranker_data.size == 0 || self.tune.labels == 0 || self.sweep.labels == 0 {
            return bad("dataset and label counts must be positive");
        }
        if self.sweep.batches.is_empty() || self.sweep.batches.contains(&0) {
            return bad("sweep.batches must be non-empty and positive");
        }
        if self.errors.ps.is_empty() || self.errors.generations == 0 {
            return bad("errors.ps and errors.generations must be non-empty");
        }
        if self.jobs == Some(0) {
            return bad("jobs must be at least 1");
        }
        self.training.validate()?;
        self.generator_config().validate()?;
        if let Some(p) = &self.pool {
            p.validate()?;
        }
        if let Some(s) = &self.pipeline.sampling {
            s.validate()?;
        }
        PipelineConfig::new(SamplingConfig::ancestral(), self.pipeline.batch, self.pipeline.rerank).validate()
    }

    pub fn generator_config(&self) -> GeneratorConfig {
        GeneratorConfig {
            components: self.model.components,
            state_size: self.model.state_size,
            window_mixtures: self.model.window_mixtures,
            max_frames_per_char: self.model.max_frames_per_char,
            ..GeneratorConfig::new(GlyphAlphabet::default().symbols(), self.data.repr)
        }
    }

    pub fn pool(&self) -> SamplingPool {
        self.pool.clone().unwrap_or_default()
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn input(&self, configured: &Option<PathBuf>, name: &str) -> PathBuf {
        configured.clone().unwrap_or_else(|| self.path(name))
    }
}

/// A failure with the exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Exit code 2.
    #[error("configuration error: {0}")]
    Config(String),
    /// Exit code 1.
    #[error(transparent)]
    Run(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

/// Reads the configuration and applies flag overrides.
pub fn load_config(common: &Common) -> std::result::Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<RunConfig>(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    if let Some(j) = common.jobs {
        cfg.jobs = Some(j);
    }
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

/// Parses nothing; runs an already parsed command.
pub fn run(cli: Cli) -> std::result::Result<(), CliError> {
    let cfg = load_config(cli.command.common())?;
    if let Some(j) = cfg.jobs {
        // a second initialization in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    match &cli.command {
        Command::SynthData(_) => synth_data(&cfg)?,
        Command::TrainGen(_) => train_gen(&cfg)?,
        Command::BuildR1Data(_) => build_r1_data(&cfg)?,
        Command::TrainR1(_) => train_r1(&cfg)?,
        Command::TrainRbase(_) => train_rbase_cmd(&cfg)?,
        Command::Tune(_) => tune(&cfg)?,
        Command::Generate { labels, .. } => generate(&cfg, labels)?,
        Command::Sweep(_) => sweep(&cfg)?,
        Command::Errors(_) => errors(&cfg)?,
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn labels(cfg: &RunConfig, n: usize, len: (usize, usize), stream: u64) -> Vec<String> {
    let alphabet = GlyphAlphabet::default();
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(cfg.seed ^ mix64(stream)));
    (0..n).map(|_| random_label(&alphabet, len, &mut rng)).collect()
}

fn dataset(cfg: &RunConfig) -> Result<Vec<LabeledInk>> {
    let raw = synth_glyph_dataset(&GlyphAlphabet::default(), cfg.data.size, cfg.data.label_len, cfg.seed)?;
    match cfg.data.repr {
        Repr::Raw => Ok(raw),
        Repr::Curve => raw.iter().map(|s| s.to_curve(cfg.data.curve_eps)).collect(),
    }
}

fn synth_data(cfg: &RunConfig) -> Result<()> {
    let data = dataset(cfg)?;
    write_jsonl(&cfg.path("train.jsonl"), &data)?;
    write_jsonl(&cfg.path("templates.jsonl"), &templates_to_samples(&GlyphAlphabet::default())?)?;
    println!("wrote {} samples to {}", data.len(), cfg.path("train.jsonl").display());
    Ok(())
}

fn train_gen(cfg: &RunConfig) -> Result<()> {
    let data = read_jsonl(&cfg.input(&cfg.paths.train_data, "train.jsonl"))?;
    let hyper = TrainingHyper {
        seed: cfg.seed,
        ..cfg.training.clone()
    };
    let (gen, log) = train(&data, cfg.generator_config(), &hyper)?;
    gen.save(&cfg.path("generator.bin"))?;
    write_text(&cfg.path("loss.csv"), &log.to_csv())?;
    let (first, last) = log.smoothed_ends(50);
    println!("trained {} steps, smoothed loss {first:.4} -> {last:.4}", log.steps.len());
    Ok(())
}

fn load_generator(cfg: &RunConfig) -> Result<Generator> {
    Generator::load(&cfg.input(&cfg.paths.generator, "generator.bin"))
}

fn recognizer() -> Result<DtwRecognizer> {
    DtwRecognizer::new(&GlyphAlphabet::default())
}

fn build_r1_data(cfg: &RunConfig) -> Result<()> {
    let gen = load_generator(cfg)?;
    let rec = recognizer()?;
    let labels = labels(cfg, cfg.ranker_data.size, cfg.ranker_data.label_len, 1);
    let pool = cfg.pool();
    let data = build_r1_dataset(&gen, &labels, &cfg.ranker_data.mode, &pool.configs, &rec, cfg.ranker_data.size, cfg.seed)?;
    let mut text = String::new();
    for ex in &data {
        let mut v = sample_to_json(&LabeledInk::new(ex.label.clone(), ex.sequence.clone())?);
        v["recognizable"] = json!(ex.recognizable);
        v["sampling"] = serde_json::to_value(ex.sampling)?;
        text.push_str(&v.to_string());
        text.push('\n');
    }
    write_text(&cfg.path("r1_data.jsonl"), &text)?;
    let pos = data.iter().filter(|e| e.recognizable).count();
    println!("wrote {} ranker examples ({pos} recognizable)", data.len());
    Ok(())
}

fn read_r1_data(path: &Path) -> Result<Vec<(TokenSequence, bool)>> {
    read_text(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let v: Value = serde_json::from_str(l)?;
            let s = sample_from_json(&v, i + 1)?;
            let y = v
                .get("recognizable")
                .and_then(Value::as_bool)
                .ok_or_else(|| Error::Format(format!("line {}: missing bool `recognizable`", i + 1)))?;
            Ok((s.sequence, y))
        })
        .collect()
}

fn train_r1(cfg: &RunConfig) -> Result<()> {
    let data = read_r1_data(&cfg.input(&cfg.paths.r1_data, "r1_data.jsonl"))?;
    let hyper = RankerHyper {
        seed: cfg.seed,
        ..cfg.ranker.clone()
    };
    let (ranker, report) = train_ranker(&data, &hyper)?;
    ranker.save(&cfg.path("ranker.bin"))?;
    write_text(&cfg.path("r1_report.json"), &serde_json::to_string_pretty(&report)?)?;
    println!(
        "ranker trained: accuracy {:.3}, validation AUC {}",
        report.train_accuracy,
        report.validation_auc.map_or("n/a".into(), |a| format!("{a:.3}"))
    );
    Ok(())
}

fn train_rbase_cmd(cfg: &RunConfig) -> Result<()> {
    let gen = load_generator(cfg)?;
    let real: Vec<TokenSequence> = read_jsonl(&cfg.input(&cfg.paths.train_data, "train.jsonl"))?.into_iter().map(|s| s.sequence).collect();
    let labels = labels(cfg, cfg.ranker_data.size, cfg.ranker_data.label_len, 2);
    let synthetic = synthesize(&gen, &labels, &SamplingConfig::ancestral(), cfg.seed)?;
    let hyper = RankerHyper {
        seed: cfg.seed,
        ..cfg.ranker.clone()
    };
    let (ranker, report) = train_rbase(&real, &synthetic, &hyper)?;
    ranker.save(&cfg.path("rbase.bin"))?;
    write_text(&cfg.path("rbase_report.json"), &serde_json::to_string_pretty(&report)?)?;
    println!(
        "baseline ranker trained: validation AUC {}",
        report.validation_auc.map_or("n/a".into(), |a| format!("{a:.3}"))
    );
    Ok(())
}

/// One candidate per label, label `i` on RNG substream `i`.
pub fn synthesize(gen: &Generator, labels: &[String], sampling: &SamplingConfig, seed: u64) -> Result<Vec<TokenSequence>> {
    use rayon::prelude::*;
    labels
        .par_iter()
        .enumerate()
        .map(|(i, l)| Ok(gen.decode_batch(l, sampling, 1, crate::nn::substream_seed(seed, i as u64))?.remove(0).sequence))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TuneFile {
    best: GridRow,
    baseline: GridRow,
    rows: Vec<GridRow>,
}

fn tune(cfg: &RunConfig) -> Result<()> {
    let gen = load_generator(cfg)?;
    let rec = recognizer()?;
    let labels = labels(cfg, cfg.tune.labels, cfg.tune.label_len, 3);
    let res = tune_sampling(&gen, &rec, &cfg.pool(), &labels, cfg.tune.samples_per_label, cfg.seed)?;
    write_text(&cfg.path("grid.csv"), &grid_csv(&res.rows))?;
    let file = TuneFile {
        best: res.best,
        baseline: res.baseline,
        rows: res.rows,
    };
    write_text(&cfg.path("tune.json"), &serde_json::to_string_pretty(&file)?)?;
    println!("S_opt  = {} (mean CER {:.4})", res.best.sampling, res.best.mean_cer);
    println!("S_base = {} (mean CER {:.4})", res.baseline.sampling, res.baseline.mean_cer);
    Ok(())
}

fn read_tune(cfg: &RunConfig) -> Result<Option<TuneFile>> {
    let path = cfg.path("tune.json");
    if !path.exists() {
        return Ok(None);
    }
    Ok(Some(serde_json::from_str(&read_text(&path)?)?))
}

fn pipeline_sampling(cfg: &RunConfig) -> Result<SamplingConfig> {
    if let Some(s) = cfg.pipeline.sampling {
        return Ok(s);
    }
    Ok(read_tune(cfg)?.map_or(SamplingConfig::ancestral(), |t| t.best.sampling))
}

fn file_stem(i: usize, label: &str) -> String {
    let safe: String = label.chars().map(|c| if c.is_alphanumeric() { c } else { '_' }).collect();
    format!("{i:02}_{safe}")
}

fn generate(cfg: &RunConfig, labels: &[String]) -> Result<()> {
    let gen = load_generator(cfg)?;
    let ranker = Ranker::load(&cfg.input(&cfg.paths.ranker, "ranker.bin"))?;
    let rec = recognizer()?;
    let sampling = pipeline_sampling(cfg)?;
    let dir = cfg.path("generate");
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut winners = Vec::new();
    let mut timings = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        let pc = PipelineConfig {
            sampling,
            batch: cfg.pipeline.batch,
            rerank: cfg.pipeline.rerank,
            early_stop: cfg.pipeline.early_stop,
            seed: crate::nn::substream_seed(cfg.seed, i as u64),
        };
        let res = generate_best(&gen, &ranker, &rec, label, &pc)?;
        write_text(&dir.join(format!("{}.svg", file_stem(i, label))), &render_svg(res.winner_sequence()))?;
        winners.push(LabeledInk::new(label.clone(), res.winner_sequence().clone())?);
        timings.push(json!({
            "label": label,
            "winner": res.winner,
            "recognized": crate::ranking::Recognizer::recognize(&rec, res.winner_sequence()),
            "diag": res.winner_candidate().diag,
            "timing": res.timing,
        }));
        println!("{label}: winner {} of {} ({:.2} ms/char)", res.winner, pc.batch, res.timing.per_char_ms);
    }
    write_jsonl(&dir.join("winners.jsonl"), &winners)?;
    write_text(
        &dir.join("timing.json"),
        &serde_json::to_string_pretty(&json!({ "sampling": sampling, "results": timings }))?,
    )?;
    Ok(())
}

fn sample_figures(
    gen: &Generator,
    ranker: &Ranker,
    rec: &DtwRecognizer,
    labels: &[String],
    sampling: &SamplingConfig,
    seed: u64,
) -> Result<Vec<SampleFigure>> {
    labels
        .iter()
        .enumerate()
        .map(|(i, label)| {
            let pc = PipelineConfig {
                sampling: *sampling,
                batch: 5,
                rerank: 5,
                early_stop: false,
                seed: crate::nn::substream_seed(seed, i as u64),
            };
            let res = generate_best(gen, ranker, rec, label, &pc)?;
            let scores = crate::ranking::r1_score(ranker, &res.candidates.iter().map(|c| c.sequence.clone()).collect::<Vec<_>>());
            let order = crate::ranking::order_entries(&res.r2_evaluated, label, Some(&scores));
            let rows = order
                .iter()
                .map(|&k| {
                    let e = res.r2_evaluated.iter().find(|e| e.index == k).expect("all evaluated");
                    (
                        res.candidates[k].sequence.clone(),
                        format!("#{k} \"{}\" CER {:.2} R1 {:.2}", e.recognized, e.cer, scores[k]),
                    )
                })
                .collect();
            Ok(SampleFigure {
                name: file_stem(i, label),
                label: label.clone(),
                rows,
            })
        })
        .collect()
}

fn sweep(cfg: &RunConfig) -> Result<()> {
    let gen = load_generator(cfg)?;
    let ranker = Ranker::load(&cfg.input(&cfg.paths.ranker, "ranker.bin"))?;
    let rec = recognizer()?;
    let sampling = pipeline_sampling(cfg)?;
    let labels = labels(cfg, cfg.sweep.labels, cfg.sweep.label_len, 4);
    let rep = budget_sweep(&gen, &ranker, &rec, &labels, &sampling, &cfg.sweep.batches, cfg.seed, cfg.sweep.timing_labels)?;
    let figures = sample_figures(&gen, &ranker, &rec, &labels[..cfg.sweep.figures.min(labels.len())], &sampling, cfg.seed)?;
    let report = EvalReport {
        grid: read_tune(cfg)?.map(|t| t.rows).unwrap_or_default(),
        sweep: rep.rows.clone(),
        batch_table: rep.batch_table.clone(),
        errors: Vec::new(),
        samples: figures,
    };
    emit_report(&report, &cfg.path("report"))?;
    for r in &rep.rows {
        println!(
            "B={:>2} R={:>2} mean CER {:.4} worst {:.3} ms/char{}",
            r.batch,
            r.rerank,
            r.mean_cer,
            r.worst_per_char_ms,
            if r.frontier { "  *frontier" } else { "" }
        );
    }
    Ok(())
}

fn errors(cfg: &RunConfig) -> Result<()> {
    let gen = load_generator(cfg)?;
    let ranker = Ranker::load(&cfg.input(&cfg.paths.ranker, "ranker.bin"))?;
    let rec = recognizer()?;
    let e = &cfg.errors;
    let labels = labels(cfg, e.generations, e.label_len, 5);
    let study = error_study(&gen, Some(&ranker), &rec, &labels, &e.ps, e.generations, e.batch, cfg.seed)?;
    write_text(&cfg.path("errors.csv"), &errors_csv(&study.rows))?;
    for r in &study.rows {
        println!(
            "P={:.1} {:<8} ok {:>4} overconfidence {:>4} incoherence {:>4}",
            r.p,
            if r.ranked { "ranked" } else { "unranked" },
            r.counts.ok,
            r.counts.overconfidence,
            r.counts.incoherence
        );
    }
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.3}"));
    println!(
        "spearman(P, overconfidence) = {}, spearman(P, incoherence) = {}",
        fmt(study.rho_overconfidence()),
        fmt(study.rho_incoherence())
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::GENERATOR_FORMAT_VERSION;
    use crate::ranking::RANKER_FORMAT_VERSION;

    #[test]
    fn version_mentions_formats() {
        assert!(VERSION.contains(&format!("generator checkpoint format {GENERATOR_FORMAT_VERSION}")));
        assert!(VERSION.contains(&format!("ranker checkpoint format {RANKER_FORMAT_VERSION}")));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"seed": 1, "bogus": 2}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"training": {"steps": 5, "lr": 1}}"#).is_err());
        let cfg: RunConfig = serde_json::from_str(r#"{"seed": 7, "training": {"steps": 5}}"#).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.training.steps, 5);
        assert_eq!(cfg.training.clipnorm, 0.1);
    }

    #[test]
    fn default_config_round_trips() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
    }
}
