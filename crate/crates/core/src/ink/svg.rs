//! SVG 1.1 rendering of token sequences.

use std::fmt::Write;

use super::{bbox, layout_strokes, CubicSegment, Repr, TokenSequence};

const STROKE_GAP: f64 = 0.3;

/// Stroke start points after left-to-right layout, matching
/// [`layout_strokes`] applied to the flattened strokes.
fn stroke_origins(seq: &TokenSequence) -> Vec<[f64; 2]> {
    let flat = seq.stroke_polylines(16);
    let placed = layout_strokes(&flat, STROKE_GAP);
    placed.iter().map(|s| s.first().copied().unwrap_or([0.0, 0.0])).collect()
}

fn fmt_num(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_string() } else { s.to_string() }
}

/// Renders one `<path>` per stroke. Raw strokes become polylines, curve
/// strokes cubic `C` commands with absolute coordinates. The y axis is
/// flipped so ink y points up; the view box covers the ink with a 5% margin.
pub fn render_svg(seq: &TokenSequence) -> String {
    let ranges = seq.stroke_ranges();
    let origins = stroke_origins(seq);
    let mut paths = Vec::with_capacity(ranges.len());
    let mut all_points = Vec::new();
    for (range, origin) in ranges.into_iter().zip(origins) {
        let mut d = String::new();
        let mut cur = origin;
        write!(d, "M {} {}", fmt_num(cur[0]), fmt_num(-cur[1])).unwrap();
        all_points.push(cur);
        for tok in &seq.tokens[range] {
            match seq.repr {
                Repr::Raw => {
                    cur = [cur[0] + tok.geom[0], cur[1] + tok.geom[1]];
                    write!(d, " L {} {}", fmt_num(cur[0]), fmt_num(-cur[1])).unwrap();
                    all_points.push(cur);
                }
                Repr::Curve => {
                    let seg = CubicSegment::from_offsets(cur, &tok.geom);
                    write!(
                        d,
                        " C {} {} {} {} {} {}",
                        fmt_num(seg.p1[0]),
                        fmt_num(-seg.p1[1]),
                        fmt_num(seg.p2[0]),
                        fmt_num(-seg.p2[1]),
                        fmt_num(seg.p3[0]),
                        fmt_num(-seg.p3[1])
                    )
                    .unwrap();
                    all_points.extend(super::flatten_segment(&seg, 16));
                    cur = seg.p3;
                }
            }
        }
        paths.push(d);
    }
    let b = bbox(all_points.iter().map(|p| [p[0], -p[1]])).unwrap_or([0.0, 0.0, 1.0, 1.0]);
    let w = (b[2] - b[0]).max(1e-6);
    let h = (b[3] - b[1]).max(1e-6);
    let (mx, my) = (0.05 * w, 0.05 * h);
    let mut out = String::new();
    writeln!(out, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>").unwrap();
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" viewBox=\"{} {} {} {}\">",
        fmt_num(b[0] - mx),
        fmt_num(b[1] - my),
        fmt_num(w + 2.0 * mx),
        fmt_num(h + 2.0 * my)
    )
    .unwrap();
    let stroke_width = fmt_num(0.01 * w.max(h));
    for d in paths {
        writeln!(
            out,
            "  <path d=\"{d}\" fill=\"none\" stroke=\"black\" stroke-width=\"{stroke_width}\" stroke-linecap=\"round\"/>"
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}
