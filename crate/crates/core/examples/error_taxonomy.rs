//! Splits unrecognizable generations into overconfidence (hit the frame
//! cap) and incoherence (ended early) across Top-P masses, with and without
//! R1 ranking.
//!
//! cargo run --release --example error_taxonomy -- [model_dir]

mod common;

use inkgen::eval::error_study;

fn main() -> inkgen::Result<()> {
    let dir = std::env::args().nth(1).map(std::path::PathBuf::from);
    let m = common::models(dir.as_deref())?;
    let ps: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    let study = error_study(&m.gen, Some(&m.ranker), &m.rec, &common::labels(100, 5), &ps, 100, 5, 0)?;
    println!("   P  ranked    ok  overconf  incoherent");
    for r in &study.rows {
        println!(
            "{:>4.1}  {:<6}  {:>4}  {:>8}  {:>10}",
            r.p, r.ranked, r.counts.ok, r.counts.overconfidence, r.counts.incoherence
        );
    }
    let show = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x:+.3}"));
    println!("Spearman(P, overconfidence) {}", show(study.rho_overconfidence()));
    println!("Spearman(P, incoherence)    {}", show(study.rho_incoherence()));
    Ok(())
}
