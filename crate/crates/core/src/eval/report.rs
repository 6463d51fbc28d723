use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{pareto_frontier, BatchTiming, ErrorRow, GridRow, SweepRow};
use crate::error::{Error, Result};
use crate::ink::{layout_strokes, TokenSequence};
use crate::mixture::format_ext_real;

/// Ranked candidates for one label, drawn one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFigure {
    /// File stem, e.g. `"00_wove"`.
    pub name: String,
    pub label: String,
    /// Candidates in rank order, each with its caption.
    pub rows: Vec<(TokenSequence, String)>,
}

/// Everything `emit_report` writes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub grid: Vec<GridRow>,
    pub sweep: Vec<SweepRow>,
    pub batch_table: Vec<BatchTiming>,
    pub errors: Vec<ErrorRow>,
    pub samples: Vec<SampleFigure>,
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn num(v: f64) -> String {
    if v.is_infinite() {
        format_ext_real(v)
    } else {
        format!("{v}")
    }
}

/// `grid.csv` contents: one row per sampling configuration.
pub fn grid_csv(rows: &[GridRow]) -> String {
    let mut grid = String::from("method,m,bias,mean_cer,n\n");
    for r in rows {
        let s = &r.sampling;
        writeln!(grid, "{},{},{},{},{}", s.method, num(s.m), num(s.bias), num(r.mean_cer), r.n).unwrap();
    }
    grid
}

/// `errors.csv` contents: one row per (P, ranked).
pub fn errors_csv(rows: &[ErrorRow]) -> String {
    let mut errors = String::from("p,ranked,ok,overconfidence,incoherence,total\n");
    for r in rows {
        let c = &r.counts;
        writeln!(
            errors,
            "{},{},{},{},{},{}",
            num(r.p),
            u8::from(r.ranked),
            c.ok,
            c.overconfidence,
            c.incoherence,
            c.total()
        )
        .unwrap();
    }
    errors
}

/// Writes `grid.csv`, `sweep.csv`, `batch.csv`, `errors.csv`,
/// `frontier.svg` and `samples/*.svg` under `dir`.
pub fn emit_report(report: &EvalReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    write(&dir.join("grid.csv"), &grid_csv(&report.grid))?;

    let mut sweep = String::from(
        "batch,rerank,method,m,bias,mean_cer,worst_per_char_ms,ok,overconfidence,incoherence,n_labels,seed,frontier\n",
    );
    let points: Vec<(f64, f64)> = report.sweep.iter().map(|r| (r.worst_per_char_ms, r.mean_cer)).collect();
    let flags = pareto_frontier(&points);
    for (r, flag) in report.sweep.iter().zip(&flags) {
        let s = &r.sampling;
        let c = &r.error_counts;
        writeln!(
            sweep,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.batch,
            r.rerank,
            s.method,
            num(s.m),
            num(s.bias),
            num(r.mean_cer),
            num(r.worst_per_char_ms),
            c.ok,
            c.overconfidence,
            c.incoherence,
            r.n_labels,
            r.seed,
            u8::from(*flag)
        )
        .unwrap();
    }
    write(&dir.join("sweep.csv"), &sweep)?;

    let mut batch = String::from(
        "batch,gen_step_ms,gen_bound_per_char_ms,gen_observed_per_char_ms,r1_per_char_ms,r2_per_candidate_per_char_ms\n",
    );
    for t in &report.batch_table {
        writeln!(
            batch,
            "{},{},{},{},{},{}",
            t.batch,
            num(t.gen_step_ms),
            num(t.gen_bound_per_char_ms),
            num(t.gen_observed_per_char_ms),
            num(t.r1_per_char_ms),
            num(t.r2_per_candidate_per_char_ms)
        )
        .unwrap();
    }
    write(&dir.join("batch.csv"), &batch)?;

    write(&dir.join("errors.csv"), &errors_csv(&report.errors))?;

    write(&dir.join("frontier.svg"), &frontier_svg(&points, &flags))?;

    let samples = dir.join("samples");
    fs::create_dir_all(&samples).map_err(|e| Error::io(&samples, e))?;
    for fig in &report.samples {
        write(&samples.join(format!("{}.svg", fig.name)), &sample_svg(fig))?;
    }
    Ok(())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Log-log scatter of (time, CER) with the frontier drawn as a polyline.
/// Non-positive values are clamped to a small floor before taking logs.
pub fn frontier_svg(points: &[(f64, f64)], flags: &[bool]) -> String {
    const W: f64 = 480.0;
    const H: f64 = 360.0;
    const M: f64 = 48.0;
    let mut out = String::new();
    writeln!(out, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>").unwrap();
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    )
    .unwrap();
    if !points.is_empty() {
        let lx: Vec<f64> = points.iter().map(|p| p.0.max(1e-6).log10()).collect();
        let ly: Vec<f64> = points.iter().map(|p| p.1.max(1e-4).log10()).collect();
        let span = |v: &[f64]| {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo < 1e-9 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        let (x0, x1) = span(&lx);
        let (y0, y1) = span(&ly);
        let px = |v: f64| M + (v - x0) / (x1 - x0) * (W - 2.0 * M);
        let py = |v: f64| H - M - (v - y0) / (y1 - y0) * (H - 2.0 * M);
        writeln!(
            out,
            "<line x1=\"{M}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
            H - M,
            W - M,
            H - M
        )
        .unwrap();
        writeln!(out, "<line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{}\" stroke=\"black\"/>", H - M).unwrap();
        writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">worst time per char (ms, log)</text>",
            W / 2.0,
            H - 12.0
        )
        .unwrap();
        writeln!(
            out,
            "<text x=\"14\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">CER (log)</text>",
            H / 2.0,
            H / 2.0
        )
        .unwrap();
        let mut front: Vec<usize> = (0..points.len()).filter(|&i| flags[i]).collect();
        front.sort_by(|&a, &b| lx[a].total_cmp(&lx[b]));
        if front.len() > 1 {
            let pts: Vec<String> = front.iter().map(|&i| format!("{:.2},{:.2}", px(lx[i]), py(ly[i]))).collect();
            writeln!(out, "<polyline points=\"{}\" fill=\"none\" stroke=\"red\"/>", pts.join(" ")).unwrap();
        }
        for i in 0..points.len() {
            let fill = if flags[i] { "red" } else { "gray" };
            writeln!(out, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{fill}\"/>", px(lx[i]), py(ly[i])).unwrap();
        }
    }
    out.push_str("</svg>\n");
    out
}

/// One row per candidate: the ink scaled to a fixed height, then its caption.
fn sample_svg(fig: &SampleFigure) -> String {
    const ROW: f64 = 60.0;
    const INK_H: f64 = 44.0;
    const TEXT_W: f64 = 220.0;
    let mut body = String::new();
    let mut width: f64 = 200.0;
    for (i, (seq, caption)) in fig.rows.iter().enumerate() {
        let strokes = layout_strokes(&seq.stroke_polylines(8), 0.3);
        let top = i as f64 * ROW + 8.0;
        let all: Vec<[f64; 2]> = strokes.iter().flatten().copied().collect();
        if let Some(b) = crate::ink::bbox(all.iter().copied()) {
            let h = (b[3] - b[1]).max(1e-6);
            let s = INK_H / h;
            for st in &strokes {
                if st.is_empty() {
                    continue;
                }
                let pts: Vec<String> = st
                    .iter()
                    .map(|p| format!("{:.2},{:.2}", 8.0 + (p[0] - b[0]) * s, top + INK_H - (p[1] - b[1]) * s))
                    .collect();
                writeln!(
                    body,
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>",
                    pts.join(" ")
                )
                .unwrap();
            }
            width = width.max(16.0 + (b[2] - b[0]) * s);
        }
        writeln!(
            body,
            "<text x=\"@X@\" y=\"{:.2}\" font-size=\"14\">{}</text>",
            top + INK_H / 2.0,
            escape(caption)
        )
        .unwrap();
    }
    let width = width.min(2000.0);
    let body = body.replace("@X@", &format!("{:.2}", width + 8.0));
    let total_w = width + TEXT_W;
    let total_h = (fig.rows.len() as f64 * ROW).max(ROW) + 24.0;
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{total_w:.0}\" height=\"{total_h:.0}\" viewBox=\"0 0 {total_w:.2} {total_h:.2}\">\n<text x=\"8\" y=\"{:.2}\" font-size=\"14\">label: {}</text>\n{body}</svg>\n",
        total_h - 8.0,
        escape(&fig.label)
    )
}
