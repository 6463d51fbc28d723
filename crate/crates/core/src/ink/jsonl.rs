//! Ink JSONL: one `{"label", "repr", "tokens"}` object per line, each token
//! an array `[geom..., pen_up, end_of_ink]` with the two bits as 0/1.
//!
//! Reals are written in shortest round-trip decimal form, so a file read
//! back and written again is byte-identical.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde_json::{json, Value};

use crate::error::{Error, Result};

use super::glyphs::{GlyphAlphabet, GlyphTemplate, JitterRanges};
use super::{integrate_raw, to_raw_tokens, Ink, InkToken, LabeledInk, Repr, TokenSequence};

pub fn sample_to_json(sample: &LabeledInk) -> Value {
    let tokens: Vec<Value> = sample
        .sequence
        .tokens
        .iter()
        .map(|t| {
            let mut row: Vec<Value> = t.geom.iter().map(|&g| json!(g)).collect();
            row.push(json!(t.pen_up as u8));
            row.push(json!(t.end_of_ink as u8));
            Value::Array(row)
        })
        .collect();
    json!({
        "label": sample.label,
        "repr": sample.sequence.repr.as_str(),
        "tokens": tokens,
    })
}

fn bit(v: &Value, line: usize) -> Result<bool> {
    match v.as_f64() {
        Some(x) if x == 0.0 => Ok(false),
        Some(x) if x == 1.0 => Ok(true),
        _ => Err(Error::Format(format!("line {line}: flag must be 0 or 1, got {v}"))),
    }
}

pub fn sample_from_json(v: &Value, line: usize) -> Result<LabeledInk> {
    let label = v
        .get("label")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Format(format!("line {line}: missing string field `label`")))?;
    let repr = match v.get("repr").and_then(Value::as_str) {
        Some("raw") => Repr::Raw,
        Some("curve") => Repr::Curve,
        other => return Err(Error::Format(format!("line {line}: bad repr {other:?}"))),
    };
    let rows = v
        .get("tokens")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Format(format!("line {line}: missing array field `tokens`")))?;
    let d = repr.dim();
    let mut tokens = Vec::with_capacity(rows.len());
    for row in rows {
        let row = row
            .as_array()
            .filter(|r| r.len() == d + 2)
            .ok_or_else(|| Error::Format(format!("line {line}: token must have {} entries", d + 2)))?;
        let geom = row[..d]
            .iter()
            .map(|g| g.as_f64().ok_or_else(|| Error::Format(format!("line {line}: non-numeric geometry"))))
            .collect::<Result<Vec<f64>>>()?;
        tokens.push(InkToken::new(geom, bit(&row[d], line)?, bit(&row[d + 1], line)?));
    }
    LabeledInk::new(label, TokenSequence::new(repr, tokens)?)
}

pub fn to_jsonl_string(samples: &[LabeledInk]) -> String {
    let mut out = String::new();
    for s in samples {
        out.push_str(&sample_to_json(s).to_string());
        out.push('\n');
    }
    out
}

pub fn parse_jsonl(text: &str) -> Result<Vec<LabeledInk>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| sample_from_json(&serde_json::from_str(l)?, i + 1))
        .collect()
}

pub fn write_jsonl(path: &Path, samples: &[LabeledInk]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(to_jsonl_string(samples).as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn read_jsonl(path: &Path) -> Result<Vec<LabeledInk>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(sample_from_json(&serde_json::from_str(&line)?, i + 1)?);
    }
    Ok(out)
}

/// Clean template strokes as one raw sample per symbol.
pub fn templates_to_samples(alphabet: &GlyphAlphabet) -> Result<Vec<LabeledInk>> {
    alphabet
        .templates
        .iter()
        .map(|t| {
            let ink = Ink::from_xy(&[alphabet.clean_stroke(t.symbol).unwrap_or_default()])?;
            LabeledInk::new(t.symbol.to_string(), to_raw_tokens(&ink)?)
        })
        .collect()
}

/// Rebuilds an alphabet from template samples: each single-character sample
/// becomes a polyline template. Jitter ranges take their defaults.
pub fn templates_from_samples(samples: &[LabeledInk]) -> Result<GlyphAlphabet> {
    let mut templates = Vec::new();
    for s in samples {
        let mut chars = s.label.chars();
        let (Some(symbol), None) = (chars.next(), chars.next()) else {
            return Err(Error::Format(format!("template label {:?} must be one character", s.label)));
        };
        let strokes = match s.sequence.repr {
            Repr::Raw => integrate_raw(&s.sequence),
            Repr::Curve => s.sequence.stroke_polylines(8),
        };
        let [control] = <[Vec<[f64; 2]>; 1]>::try_from(strokes)
            .map_err(|_| Error::Format(format!("template {symbol:?} must have exactly one stroke")))?;
        templates.push(GlyphTemplate {
            symbol,
            control,
            smooth: false,
        });
    }
    let alphabet = GlyphAlphabet {
        templates,
        jitter: JitterRanges::default(),
    };
    alphabet.validate()?;
    Ok(alphabet)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ink::synth_glyph_dataset;

    #[test]
    fn round_trip_is_byte_identical() {
        let a = GlyphAlphabet::default();
        let data = synth_glyph_dataset(&a, 5, (1, 3), 2).unwrap();
        let text = to_jsonl_string(&data);
        let back = parse_jsonl(&text).unwrap();
        assert_eq!(back, data);
        assert_eq!(to_jsonl_string(&back), text);
    }

    #[test]
    fn line_shape() {
        let s = LabeledInk::new(
            "l",
            TokenSequence::new(Repr::Raw, vec![InkToken::new(vec![0.5, -1.0], true, true)]).unwrap(),
        )
        .unwrap();
        assert_eq!(
            to_jsonl_string(&[s]),
            "{\"label\":\"l\",\"repr\":\"raw\",\"tokens\":[[0.5,-1.0,1,1]]}\n"
        );
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(parse_jsonl("{\"label\":\"a\",\"repr\":\"raw\",\"tokens\":[[1,2,1]]}").is_err());
        assert!(parse_jsonl("{\"label\":\"a\",\"repr\":\"svg\",\"tokens\":[]}").is_err());
        assert!(parse_jsonl("{\"label\":\"a\",\"repr\":\"raw\",\"tokens\":[[1,2,2,1]]}").is_err());
        assert!(parse_jsonl("{\"label\":\"\",\"repr\":\"raw\",\"tokens\":[]}").is_err());
    }

    #[test]
    fn templates_round_trip() {
        let a = GlyphAlphabet::default();
        let samples = templates_to_samples(&a).unwrap();
        let b = templates_from_samples(&samples).unwrap();
        assert_eq!(a.symbols(), b.symbols());
    }
}
