//! A small single-stroke glyph alphabet and a jittered handwriting corpus
//! built from it.
//!
//! Every symbol is written with exactly one pen-down, so a recognizer can
//! segment an ink into characters at pen-ups.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid_argument, Result};

use super::{to_raw_tokens, Ink, LabeledInk, Point};

/// One symbol: control points of a single stroke in a unit-height box,
/// y pointing up.
#[derive(Debug, Clone, PartialEq)]
pub struct GlyphTemplate {
    pub symbol: char,
    pub control: Vec<[f64; 2]>,
    /// Interpolate the control points with a Catmull-Rom spline instead of
    /// straight lines.
    pub smooth: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JitterRanges {
    pub scale: (f64, f64),
    pub slant: (f64, f64),
    /// Standard deviation of the Gaussian jitter applied to control points.
    pub control_jitter: f64,
    /// Horizontal gap between consecutive characters.
    pub advance: (f64, f64),
    /// Pen travel between sampled points, in glyph heights.
    pub step: (f64, f64),
}

impl Default for JitterRanges {
    fn default() -> Self {
        JitterRanges {
            scale: (0.85, 1.15),
            slant: (-0.2, 0.2),
            control_jitter: 0.03,
            advance: (0.2, 0.5),
            step: (0.16, 0.24),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlyphAlphabet {
    pub templates: Vec<GlyphTemplate>,
    pub jitter: JitterRanges,
}

const DENSE_PER_SPAN: usize = 16;

fn arc(cx: f64, cy: f64, r: f64, from_deg: f64, to_deg: f64, n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|i| {
            let a = (from_deg + (to_deg - from_deg) * i as f64 / (n - 1) as f64).to_radians();
            [cx + r * a.cos(), cy + r * a.sin()]
        })
        .collect()
}

impl Default for GlyphAlphabet {
    fn default() -> Self {
        let t = |symbol, control: Vec<[f64; 2]>, smooth| GlyphTemplate {
            symbol,
            control,
            smooth,
        };
        GlyphAlphabet {
            templates: vec![
                t('c', arc(0.45, 0.5, 0.45, 40.0, 320.0, 8), true),
                t('e', vec![
                    [0.08, 0.5], [0.8, 0.5], [0.72, 0.85], [0.42, 1.0],
                    [0.1, 0.8], [0.05, 0.35], [0.3, 0.02], [0.75, 0.12],
                ], true),
                t('l', vec![[0.1, 1.0], [0.1, 0.5], [0.1, 0.0]], false),
                t('n', vec![
                    [0.0, 0.0], [0.0, 0.65], [0.15, 0.95], [0.45, 1.0],
                    [0.7, 0.85], [0.75, 0.5], [0.75, 0.0],
                ], true),
                t('o', arc(0.45, 0.5, 0.45, 90.0, 450.0, 9), true),
                t('s', vec![
                    [0.8, 0.85], [0.45, 1.0], [0.1, 0.8], [0.3, 0.55],
                    [0.6, 0.45], [0.75, 0.2], [0.45, 0.0], [0.05, 0.12],
                ], true),
                t('u', vec![
                    [0.0, 1.0], [0.0, 0.35], [0.15, 0.05], [0.45, 0.0],
                    [0.7, 0.15], [0.75, 0.5], [0.75, 1.0],
                ], true),
                t('v', vec![[0.0, 1.0], [0.35, 0.0], [0.7, 1.0]], false),
                t('w', vec![[0.0, 1.0], [0.22, 0.0], [0.45, 0.75], [0.68, 0.0], [0.9, 1.0]], false),
                t('z', vec![[0.0, 1.0], [0.75, 1.0], [0.0, 0.0], [0.75, 0.0]], false),
            ],
            jitter: JitterRanges::default(),
        }
    }
}

fn catmull_rom(p0: [f64; 2], p1: [f64; 2], p2: [f64; 2], p3: [f64; 2], t: f64) -> [f64; 2] {
    let t2 = t * t;
    let t3 = t2 * t;
    let f = |i: usize| {
        0.5 * (2.0 * p1[i]
            + (-p0[i] + p2[i]) * t
            + (2.0 * p0[i] - 5.0 * p1[i] + 4.0 * p2[i] - p3[i]) * t2
            + (-p0[i] + 3.0 * p1[i] - 3.0 * p2[i] + p3[i]) * t3)
    };
    [f(0), f(1)]
}

/// Dense polyline through a template's control points.
pub(crate) fn dense_path(control: &[[f64; 2]], smooth: bool) -> Vec<[f64; 2]> {
    let n = control.len();
    let mut out = Vec::with_capacity((n - 1) * DENSE_PER_SPAN + 1);
    for i in 0..n - 1 {
        for k in 0..DENSE_PER_SPAN {
            let t = k as f64 / DENSE_PER_SPAN as f64;
            let p = if smooth {
                let p0 = control[i.saturating_sub(1)];
                let p3 = control[(i + 2).min(n - 1)];
                catmull_rom(p0, control[i], control[i + 1], p3, t)
            } else {
                let (a, b) = (control[i], control[i + 1]);
                [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t]
            };
            out.push(p);
        }
    }
    out.push(control[n - 1]);
    out
}

/// Resamples a polyline at roughly equal arc-length spacing `step`; end
/// points are kept.
pub(crate) fn resample_by_step(path: &[[f64; 2]], step: f64) -> Vec<[f64; 2]> {
    let total: f64 = path.windows(2).map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1])).sum();
    let n = ((total / step).round() as usize).max(1);
    resample_count(path, n + 1)
}

/// Resamples a polyline to exactly `count` points equally spaced by arc length.
pub(crate) fn resample_count(path: &[[f64; 2]], count: usize) -> Vec<[f64; 2]> {
    if path.is_empty() || count == 0 {
        return Vec::new();
    }
    if path.len() == 1 || count == 1 {
        return vec![path[0]; count];
    }
    let mut cum = vec![0.0; path.len()];
    for i in 1..path.len() {
        cum[i] = cum[i - 1] + (path[i][0] - path[i - 1][0]).hypot(path[i][1] - path[i - 1][1]);
    }
    let total = cum[path.len() - 1];
    if total <= 0.0 {
        return vec![path[0]; count];
    }
    let mut out = Vec::with_capacity(count);
    let mut seg = 0;
    for k in 0..count {
        let target = total * k as f64 / (count - 1) as f64;
        while seg + 2 < path.len() && cum[seg + 1] < target {
            seg += 1;
        }
        let span = cum[seg + 1] - cum[seg];
        let t = if span > 0.0 { ((target - cum[seg]) / span).clamp(0.0, 1.0) } else { 0.0 };
        let (a, b) = (path[seg], path[seg + 1]);
        out.push([a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t]);
    }
    out
}

fn uniform(rng: &mut impl Rng, range: (f64, f64)) -> f64 {
    if range.1 > range.0 {
        rng.random_range(range.0..range.1)
    } else {
        range.0
    }
}

impl GlyphAlphabet {
    pub fn symbols(&self) -> String {
        self.templates.iter().map(|t| t.symbol).collect()
    }

    pub fn template(&self, c: char) -> Option<&GlyphTemplate> {
        self.templates.iter().find(|t| t.symbol == c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.templates.is_empty() {
            return Err(invalid_argument("glyph alphabet is empty"));
        }
        for t in &self.templates {
            if t.control.len() < 2 {
                return Err(invalid_argument(format!("template {:?} needs at least 2 control points", t.symbol)));
            }
        }
        Ok(())
    }

    /// The clean template stroke for `c`, sampled at the mid-range step.
    pub fn clean_stroke(&self, c: char) -> Option<Vec<[f64; 2]>> {
        let t = self.template(c)?;
        let step = 0.5 * (self.jitter.step.0 + self.jitter.step.1);
        Some(resample_by_step(&dense_path(&t.control, t.smooth), step))
    }

    /// Clean, evenly placed ink spelling `label`.
    pub fn render_clean(&self, label: &str) -> Result<Ink> {
        let mut strokes = Vec::new();
        let mut cursor = 0.0;
        for c in label.chars() {
            let s = self
                .clean_stroke(c)
                .ok_or_else(|| crate::error::invalid_input(format!("character {c:?} not in alphabet")))?;
            let width = s.iter().map(|p| p[0]).fold(0.0, f64::max);
            strokes.push(s.iter().map(|p| [p[0] + cursor, p[1]]).collect());
            cursor += width + 0.35;
        }
        Ink::from_xy(&strokes)
    }

    /// One jittered rendering of the template for `c`, translated to
    /// `x_offset`; returns the stroke and its right edge.
    fn jittered_stroke(&self, t: &GlyphTemplate, x_offset: f64, time0: f64, rng: &mut ChaCha8Rng) -> (Vec<Point>, f64) {
        let j = &self.jitter;
        let noise = Normal::new(0.0, j.control_jitter.max(0.0)).expect("finite jitter");
        let scale = uniform(rng, j.scale);
        let aspect = uniform(rng, (0.9, 1.1));
        let slant = uniform(rng, j.slant);
        let step = uniform(rng, j.step);
        let control: Vec<[f64; 2]> = t
            .control
            .iter()
            .map(|p| {
                let x = p[0] + noise.sample(rng);
                let y = p[1] + noise.sample(rng);
                [scale * aspect * (x + slant * y), scale * y]
            })
            .collect();
        let pts = resample_by_step(&dense_path(&control, t.smooth), step * scale);
        let min_x = pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let max_x = pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        let stroke = pts
            .iter()
            .enumerate()
            .map(|(i, p)| Point::timed(p[0] - min_x + x_offset, p[1], time0 + 0.01 * i as f64))
            .collect();
        (stroke, x_offset + (max_x - min_x))
    }

    /// A jittered handwritten rendering of `label`.
    pub fn render_jittered(&self, label: &str, rng: &mut ChaCha8Rng) -> Result<Ink> {
        let mut strokes: Vec<Vec<Point>> = Vec::new();
        let mut cursor = 0.0;
        let mut time = 0.0;
        for c in label.chars() {
            let t = self
                .template(c)
                .ok_or_else(|| crate::error::invalid_input(format!("character {c:?} not in alphabet")))?;
            let (stroke, right) = self.jittered_stroke(t, cursor, time, rng);
            time = stroke.last().and_then(|p| p.t).unwrap_or(time) + 0.15;
            strokes.push(stroke);
            cursor = right + uniform(rng, self.jitter.advance);
        }
        Ink::new(strokes)
    }
}

/// A uniformly random label with length in `len_range` (inclusive).
pub fn random_label(alphabet: &GlyphAlphabet, len_range: (usize, usize), rng: &mut impl Rng) -> String {
    let symbols: Vec<char> = alphabet.templates.iter().map(|t| t.symbol).collect();
    let len = rng.random_range(len_range.0..=len_range.1);
    (0..len).map(|_| symbols[rng.random_range(0..symbols.len())]).collect()
}

/// `n` labeled raw-token samples, deterministic in `seed`.
pub fn synth_glyph_dataset(
    alphabet: &GlyphAlphabet,
    n: usize,
    len_range: (usize, usize),
    seed: u64,
) -> Result<Vec<LabeledInk>> {
    alphabet.validate()?;
    if n == 0 {
        return Err(invalid_argument("dataset size must be positive"));
    }
    if len_range.0 < 1 || len_range.0 > len_range.1 {
        return Err(invalid_argument(format!("bad label length range {len_range:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let label = random_label(alphabet, len_range, &mut rng);
            let ink = alphabet.render_jittered(&label, &mut rng)?;
            LabeledInk::new(label, to_raw_tokens(&ink)?)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_alphabet_is_valid() {
        let a = GlyphAlphabet::default();
        a.validate().unwrap();
        assert!(a.templates.len() >= 8);
        let mut syms: Vec<char> = a.symbols().chars().collect();
        syms.dedup();
        assert_eq!(syms.len(), a.templates.len());
    }

    #[test]
    fn deterministic_in_seed() {
        let a = GlyphAlphabet::default();
        let x = synth_glyph_dataset(&a, 3, (1, 4), 7).unwrap();
        let y = synth_glyph_dataset(&a, 3, (1, 4), 7).unwrap();
        assert_eq!(x, y);
        let z = synth_glyph_dataset(&a, 3, (1, 4), 8).unwrap();
        assert_ne!(x, z);
    }

    #[test]
    fn single_char_labels_have_one_stroke() {
        let a = GlyphAlphabet::default();
        for s in synth_glyph_dataset(&a, 20, (1, 1), 1).unwrap() {
            assert_eq!(s.label.chars().count(), 1);
            assert_eq!(s.sequence.stroke_count(), 1);
        }
    }

    #[test]
    fn stroke_and_pen_up_count_match_label_length() {
        let a = GlyphAlphabet::default();
        for s in synth_glyph_dataset(&a, 50, (1, 6), 11).unwrap() {
            let l = s.label.chars().count();
            assert_eq!(s.sequence.stroke_count(), l);
            assert_eq!(s.sequence.pen_up_count(), l);
            assert!(s.sequence.is_complete());
        }
    }

    #[test]
    fn bad_arguments() {
        let a = GlyphAlphabet::default();
        assert!(synth_glyph_dataset(&a, 0, (1, 2), 0).is_err());
        assert!(synth_glyph_dataset(&a, 1, (0, 2), 0).is_err());
        assert!(synth_glyph_dataset(&a, 1, (3, 2), 0).is_err());
        let empty = GlyphAlphabet {
            templates: vec![],
            jitter: JitterRanges::default(),
        };
        assert!(matches!(
            synth_glyph_dataset(&empty, 1, (1, 2), 0),
            Err(crate::Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn resample_count_keeps_ends() {
        let path = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]];
        let r = resample_count(&path, 5);
        assert_eq!(r.len(), 5);
        assert_eq!(r[0], [0.0, 0.0]);
        assert_eq!(r[4], [1.0, 1.0]);
        assert!((r[2][0] - 1.0).abs() < 1e-12 && r[2][1].abs() < 1e-12);
    }
}
