//! Sweeps the candidate budget B and shortlist size R, marks the
//! latency/CER Pareto frontier, and writes CSV and SVG reports.
//!
//! cargo run --release --example budget_sweep -- [model_dir] [report_dir]

mod common;

use std::path::PathBuf;

use inkgen::eval::{budget_sweep, emit_report, EvalReport};
use inkgen::mixture::{SamplingConfig, SamplingMethod};

fn main() -> inkgen::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().filter(|s| s != "-").map(PathBuf::from);
    let report_dir = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("inkgen_sweep_report"));
    let m = common::models(dir.as_deref())?;

    let sampling = SamplingConfig::new(SamplingMethod::TopP, 0.7, 1.0)?;
    let rep = budget_sweep(&m.gen, &m.ranker, &m.rec, &common::labels(60, 9), &sampling, &[1, 2, 4, 8], 0, 10)?;
    println!("batch  step ms  bound/char  R1/char  R2/cand/char");
    for t in &rep.batch_table {
        println!(
            "{:>5}  {:>7.4}  {:>10.3}  {:>7.3}  {:>12.3}",
            t.batch, t.gen_step_ms, t.gen_bound_per_char_ms, t.r1_per_char_ms, t.r2_per_candidate_per_char_ms
        );
    }
    for r in &rep.rows {
        println!(
            "B={:>2} R={:>2}  CER {:.3}  worst {:.3} ms/char{}",
            r.batch,
            r.rerank,
            r.mean_cer,
            r.worst_per_char_ms,
            if r.frontier { "  <- frontier" } else { "" }
        );
    }
    emit_report(
        &EvalReport {
            sweep: rep.rows,
            batch_table: rep.batch_table,
            ..EvalReport::default()
        },
        &report_dir,
    )?;
    println!("report written to {}", report_dir.display());
    Ok(())
}
