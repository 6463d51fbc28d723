//! Renders a label from the glyph alphabet, converts it to raw and curve
//! tokens, and writes JSONL plus SVG files.
//!
//! cargo run --example ink_tokens -- [out_dir]

use std::path::PathBuf;

use inkgen::ink::jsonl::{to_jsonl_string, write_jsonl};
use inkgen::ink::{render_svg, synth_glyph_dataset, to_raw_tokens, GlyphAlphabet, LabeledInk};

fn main() -> inkgen::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("inkgen_ink_tokens"));
    std::fs::create_dir_all(&out).map_err(|e| inkgen::Error::Io { path: out.clone(), source: e })?;

    let alphabet = GlyphAlphabet::default();
    println!("alphabet: {}", alphabet.symbols());

    let clean = alphabet.render_clean("wove")?;
    let raw = LabeledInk::new("wove", to_raw_tokens(&clean)?)?;
    let curve = raw.to_curve(0.02)?;
    println!(
        "\"wove\": {} strokes, {} raw tokens, {} curve tokens",
        raw.sequence.stroke_count(),
        raw.sequence.len(),
        curve.sequence.len()
    );
    let first = &curve.sequence.tokens[0];
    println!("first curve token: geom {:?} pen_up {} end {}", first.geom, first.pen_up, first.end_of_ink);

    for (name, sample) in [("raw", &raw), ("curve", &curve)] {
        let path = out.join(format!("wove_{name}.svg"));
        std::fs::write(&path, render_svg(&sample.sequence)).map_err(|e| inkgen::Error::Io { path: path.clone(), source: e })?;
        println!("wrote {}", path.display());
    }

    let data = synth_glyph_dataset(&alphabet, 8, (1, 3), 7)?;
    write_jsonl(&out.join("sample.jsonl"), &data)?;
    let line = to_jsonl_string(&data[..1]);
    println!("one JSONL line: {}...", &line[..line.len().min(120)]);
    Ok(())
}
