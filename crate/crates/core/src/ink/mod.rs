//! Ink geometry and its token representations.
//!
//! An [`Ink`] is a list of strokes. It is turned into a [`TokenSequence`] in
//! one of two representations:
//!
//! * **raw**: one token per pair of adjacent points, holding the `(dx, dy)`
//!   offset between them;
//! * **curve**: one token per fitted cubic Bezier segment, holding the
//!   segment end point and both control points as offsets from the segment
//!   start.
//!
//! Both carry a pen-up bit on the last token of every stroke and an
//! end-of-ink bit on the final token. The displacement between strokes is
//! not encoded: every stroke restarts at its own origin, and
//! [`layout_strokes`] places strokes left to right for display.

pub mod bezier;
pub mod glyphs;
pub mod jsonl;
pub mod svg;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, Result};

pub use bezier::{fit_stroke, flatten_segment, to_curve_tokens, CubicSegment};
pub use glyphs::{random_label, synth_glyph_dataset, GlyphAlphabet, GlyphTemplate};
pub use svg::render_svg;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    /// Seconds since the start of the ink, monotone within a stroke.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y, t: None }
    }

    pub fn timed(x: f64, y: f64, t: f64) -> Self {
        Point { x, y, t: Some(t) }
    }

    pub fn xy(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// A validated multi-stroke ink. Every stroke has at least two points.
#[derive(Debug, Clone, PartialEq)]
pub struct Ink {
    strokes: Vec<Vec<Point>>,
}

impl Ink {
    pub fn new(strokes: Vec<Vec<Point>>) -> Result<Self> {
        for (i, s) in strokes.iter().enumerate() {
            if s.len() < 2 {
                return Err(invalid_input(format!(
                    "stroke {i} has {} points, need at least 2",
                    s.len()
                )));
            }
            if s.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
                return Err(invalid_input(format!("stroke {i} has non-finite coordinates")));
            }
        }
        Ok(Ink { strokes })
    }

    pub fn from_xy(strokes: &[Vec<[f64; 2]>]) -> Result<Self> {
        Ink::new(
            strokes
                .iter()
                .map(|s| s.iter().map(|p| Point::new(p[0], p[1])).collect())
                .collect(),
        )
    }

    pub fn strokes(&self) -> &[Vec<Point>] {
        &self.strokes
    }

    pub fn point_count(&self) -> usize {
        self.strokes.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Repr {
    Raw,
    Curve,
}

impl Repr {
    /// Number of real-valued geometry channels per token.
    pub fn dim(self) -> usize {
        match self {
            Repr::Raw => 2,
            Repr::Curve => 6,
        }
    }

    pub fn from_dim(d: usize) -> Option<Repr> {
        match d {
            2 => Some(Repr::Raw),
            6 => Some(Repr::Curve),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Repr::Raw => "raw",
            Repr::Curve => "curve",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InkToken {
    pub geom: Vec<f64>,
    pub pen_up: bool,
    pub end_of_ink: bool,
}

impl InkToken {
    pub fn new(geom: Vec<f64>, pen_up: bool, end_of_ink: bool) -> Self {
        InkToken {
            geom,
            pen_up,
            end_of_ink,
        }
    }

    /// The decoder's start token: zero geometry with the pen lifted.
    pub fn start(d: usize) -> Self {
        InkToken::new(vec![0.0; d], true, false)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence {
    pub repr: Repr,
    pub tokens: Vec<InkToken>,
}

impl TokenSequence {
    pub fn new(repr: Repr, tokens: Vec<InkToken>) -> Result<Self> {
        let seq = TokenSequence { repr, tokens };
        seq.validate()?;
        Ok(seq)
    }

    pub fn empty(repr: Repr) -> Self {
        TokenSequence {
            repr,
            tokens: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Geometry width matches the representation, entries are finite, and
    /// no token before the last one carries the end-of-ink bit.
    pub fn validate(&self) -> Result<()> {
        let d = self.repr.dim();
        let n = self.tokens.len();
        for (i, tok) in self.tokens.iter().enumerate() {
            if tok.geom.len() != d {
                return Err(invalid_input(format!(
                    "token {i} has {} geometry values, {} representation needs {d}",
                    tok.geom.len(),
                    self.repr.as_str()
                )));
            }
            if tok.geom.iter().any(|v| !v.is_finite()) {
                return Err(invalid_input(format!("token {i} has non-finite geometry")));
            }
            if tok.end_of_ink && i + 1 != n {
                return Err(invalid_input(format!("end-of-ink set on token {i} of {n}")));
            }
        }
        Ok(())
    }

    /// True when the final token carries end-of-ink. Decodes that ran into
    /// the frame cap are incomplete.
    pub fn is_complete(&self) -> bool {
        self.tokens.last().is_some_and(|t| t.end_of_ink)
    }

    /// Token index ranges of the strokes. A stroke ends at a pen-up, at
    /// end-of-ink, or at the end of the sequence.
    pub fn stroke_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for (i, tok) in self.tokens.iter().enumerate() {
            if tok.pen_up || tok.end_of_ink || i + 1 == self.tokens.len() {
                out.push(start..i + 1);
                start = i + 1;
            }
        }
        out
    }

    pub fn stroke_count(&self) -> usize {
        self.stroke_ranges().len()
    }

    pub fn pen_up_count(&self) -> usize {
        self.tokens.iter().filter(|t| t.pen_up).count()
    }

    /// Reconstructs each stroke as a polyline starting at the origin. Curve
    /// segments are flattened with `samples_per_segment` points each (the
    /// segment start excluded).
    pub fn stroke_polylines(&self, samples_per_segment: usize) -> Vec<Vec<[f64; 2]>> {
        self.stroke_ranges()
            .into_iter()
            .map(|range| {
                let mut pts = vec![[0.0, 0.0]];
                let mut cur = [0.0, 0.0];
                for tok in &self.tokens[range] {
                    match self.repr {
                        Repr::Raw => {
                            cur = [cur[0] + tok.geom[0], cur[1] + tok.geom[1]];
                            pts.push(cur);
                        }
                        Repr::Curve => {
                            let seg = CubicSegment::from_offsets(cur, &tok.geom);
                            pts.extend(flatten_segment(&seg, samples_per_segment).into_iter().skip(1));
                            cur = seg.p3;
                        }
                    }
                }
                pts
            })
            .collect()
    }
}

/// A token sequence paired with the text it spells.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledInk {
    pub label: String,
    pub sequence: TokenSequence,
}

impl LabeledInk {
    pub fn new(label: impl Into<String>, sequence: TokenSequence) -> Result<Self> {
        let label = label.into();
        if label.is_empty() {
            return Err(invalid_input("empty label"));
        }
        sequence.validate()?;
        Ok(LabeledInk { label, sequence })
    }

    /// Re-encodes a raw sample as curve tokens. Stroke placement is not part
    /// of the raw encoding, so strokes are rebuilt at their own origins.
    pub fn to_curve(&self, eps: f64) -> Result<LabeledInk> {
        match self.sequence.repr {
            Repr::Curve => Ok(self.clone()),
            Repr::Raw => {
                let ink = Ink::from_xy(&integrate_raw(&self.sequence))?;
                LabeledInk::new(self.label.clone(), to_curve_tokens(&ink, eps)?)
            }
        }
    }
}

/// Offset tokens for an ink: a stroke of `n` points yields `n - 1` tokens,
/// the last of which has the pen-up bit set.
pub fn to_raw_tokens(ink: &Ink) -> Result<TokenSequence> {
    if ink.strokes.is_empty() {
        return Ok(TokenSequence::empty(Repr::Raw));
    }
    let mut tokens = Vec::with_capacity(ink.point_count());
    for stroke in &ink.strokes {
        if stroke.len() < 2 {
            return Err(invalid_input("stroke with fewer than 2 points"));
        }
        for (i, w) in stroke.windows(2).enumerate() {
            tokens.push(InkToken::new(
                vec![w[1].x - w[0].x, w[1].y - w[0].y],
                i + 2 == stroke.len(),
                false,
            ));
        }
    }
    if let Some(last) = tokens.last_mut() {
        last.end_of_ink = true;
    }
    Ok(TokenSequence {
        repr: Repr::Raw,
        tokens,
    })
}

/// Cumulative-sum reconstruction of a raw sequence; each stroke starts at
/// the origin.
pub fn integrate_raw(seq: &TokenSequence) -> Vec<Vec<[f64; 2]>> {
    debug_assert_eq!(seq.repr, Repr::Raw);
    seq.stroke_polylines(1)
}

pub(crate) fn bbox(points: impl IntoIterator<Item = [f64; 2]>) -> Option<[f64; 4]> {
    let mut it = points.into_iter();
    let first = it.next()?;
    let mut b = [first[0], first[1], first[0], first[1]];
    for p in it {
        b[0] = b[0].min(p[0]);
        b[1] = b[1].min(p[1]);
        b[2] = b[2].max(p[0]);
        b[3] = b[3].max(p[1]);
    }
    Some(b)
}

/// Places origin-relative strokes left to right: each stroke is shifted so
/// that its bounding box starts `gap` to the right of the previous stroke
/// and its lowest point sits on `y = 0`.
pub fn layout_strokes(strokes: &[Vec<[f64; 2]>], gap: f64) -> Vec<Vec<[f64; 2]>> {
    let mut cursor = 0.0;
    let mut out = Vec::with_capacity(strokes.len());
    for s in strokes {
        let Some(b) = bbox(s.iter().copied()) else {
            out.push(Vec::new());
            continue;
        };
        let dx = cursor - b[0];
        let dy = -b[1];
        out.push(s.iter().map(|p| [p[0] + dx, p[1] + dy]).collect());
        cursor += (b[2] - b[0]) + gap;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(seq: &TokenSequence) -> Vec<(bool, bool)> {
        seq.tokens.iter().map(|t| (t.pen_up, t.end_of_ink)).collect()
    }

    #[test]
    fn single_stroke_offsets() {
        let ink = Ink::from_xy(&[vec![[0.0, 0.0], [1.0, 0.0], [1.0, 2.0]]]).unwrap();
        let seq = to_raw_tokens(&ink).unwrap();
        assert_eq!(seq.tokens.len(), 2);
        assert_eq!(seq.tokens[0].geom, vec![1.0, 0.0]);
        assert_eq!(seq.tokens[1].geom, vec![0.0, 2.0]);
        assert_eq!(flags(&seq), vec![(false, false), (true, true)]);
    }

    #[test]
    fn two_strokes_flags() {
        let ink = Ink::from_xy(&[vec![[0.0, 0.0], [1.0, 1.0]], vec![[2.0, 2.0], [3.0, 3.0]]]).unwrap();
        let seq = to_raw_tokens(&ink).unwrap();
        assert_eq!(flags(&seq), vec![(true, false), (true, true)]);
        assert_eq!(seq.stroke_count(), 2);
    }

    #[test]
    fn short_stroke_rejected() {
        let err = Ink::from_xy(&[vec![[0.0, 0.0]]]).unwrap_err();
        assert!(matches!(err, crate::Error::InvalidInput(_)));
    }

    #[test]
    fn end_of_ink_only_last() {
        let bad = TokenSequence::new(
            Repr::Raw,
            vec![InkToken::new(vec![0.0, 0.0], true, true), InkToken::new(vec![1.0, 0.0], true, true)],
        );
        assert!(bad.is_err());
        let wrong_dim = TokenSequence::new(Repr::Curve, vec![InkToken::new(vec![0.0, 0.0], true, true)]);
        assert!(wrong_dim.is_err());
    }

    #[test]
    fn integrate_restarts_each_stroke() {
        let ink = Ink::from_xy(&[
            vec![[5.0, 5.0], [6.0, 5.0], [6.0, 7.0]],
            vec![[10.0, 0.0], [10.5, -1.0]],
        ])
        .unwrap();
        let strokes = integrate_raw(&to_raw_tokens(&ink).unwrap());
        assert_eq!(strokes.len(), 2);
        assert_eq!(strokes[0], vec![[0.0, 0.0], [1.0, 0.0], [1.0, 2.0]]);
        assert_eq!(strokes[1], vec![[0.0, 0.0], [0.5, -1.0]]);
    }

    #[test]
    fn trailing_tokens_without_pen_up_form_a_stroke() {
        let seq = TokenSequence::new(
            Repr::Raw,
            vec![
                InkToken::new(vec![1.0, 0.0], true, false),
                InkToken::new(vec![1.0, 0.0], false, false),
                InkToken::new(vec![1.0, 0.0], false, false),
            ],
        )
        .unwrap();
        assert!(!seq.is_complete());
        assert_eq!(seq.stroke_ranges(), vec![0..1, 1..3]);
    }

    #[test]
    fn layout_is_left_to_right() {
        let s = vec![vec![[0.0, 0.0], [1.0, -1.0]], vec![[0.0, 0.0], [0.5, 1.0]]];
        let placed = layout_strokes(&s, 0.25);
        assert_eq!(placed[0], vec![[0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(placed[1], vec![[1.25, 0.0], [1.75, 1.0]]);
    }
}
