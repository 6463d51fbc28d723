//! Template-matching recognizer: every stroke is one character, classified
//! by dynamic time warping against size-normalized clean templates.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::Result;
use crate::ink::{GlyphAlphabet, TokenSequence};

/// Turns an ink into text.
pub trait Recognizer: Send + Sync {
    fn recognize(&self, seq: &TokenSequence) -> String;
}

/// Wraps a recognizer and counts calls.
pub struct CountingRecognizer<R> {
    inner: R,
    calls: AtomicUsize,
}

impl<R: Recognizer> CountingRecognizer<R> {
    pub fn new(inner: R) -> Self {
        CountingRecognizer {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::SeqCst);
    }

    pub fn inner(&self) -> &R {
        &self.inner
    }
}

impl<R: Recognizer> Recognizer for CountingRecognizer<R> {
    fn recognize(&self, seq: &TokenSequence) -> String {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.recognize(seq)
    }
}

impl<R: Recognizer + ?Sized> Recognizer for &R {
    fn recognize(&self, seq: &TokenSequence) -> String {
        (**self).recognize(seq)
    }
}

/// Points per normalized stroke.
pub const DEFAULT_RESOLUTION: usize = 96;

/// Points per flattened curve segment before resampling.
const CURVE_SAMPLES: usize = 16;

#[derive(Debug, Clone)]
pub struct DtwRecognizer {
    symbols: Vec<char>,
    templates: Vec<Vec<[f64; 2]>>,
    resolution: usize,
}

impl DtwRecognizer {
    pub fn new(alphabet: &GlyphAlphabet) -> Result<Self> {
        Self::with_resolution(alphabet, DEFAULT_RESOLUTION)
    }

    pub fn with_resolution(alphabet: &GlyphAlphabet, resolution: usize) -> Result<Self> {
        alphabet.validate()?;
        if resolution < 2 {
            return Err(crate::error::invalid_argument("resolution must be at least 2"));
        }
        let mut symbols = Vec::new();
        let mut templates = Vec::new();
        for t in &alphabet.templates {
            let stroke = alphabet.clean_stroke(t.symbol).expect("template exists");
            symbols.push(t.symbol);
            templates.push(normalize_stroke(&stroke, resolution));
        }
        Ok(DtwRecognizer {
            symbols,
            templates,
            resolution,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Nearest template symbol for one stroke polyline.
    pub fn classify_stroke(&self, stroke: &[[f64; 2]]) -> char {
        let s = normalize_stroke(stroke, self.resolution);
        let mut best = (f64::INFINITY, self.symbols[0]);
        for (sym, t) in self.symbols.iter().zip(&self.templates) {
            let d = dtw_distance(&s, t);
            if d < best.0 {
                best = (d, *sym);
            }
        }
        best.1
    }
}

impl Recognizer for DtwRecognizer {
    fn recognize(&self, seq: &TokenSequence) -> String {
        seq.stroke_polylines(CURVE_SAMPLES)
            .iter()
            .map(|s| self.classify_stroke(s))
            .collect()
    }
}

/// Centres a stroke on its bounding box, scales its larger side to 1 and
/// resamples it to `n` points evenly spaced by arc length.
pub fn normalize_stroke(stroke: &[[f64; 2]], n: usize) -> Vec<[f64; 2]> {
    let Some([x0, y0, x1, y1]) = crate::ink::bbox(stroke.iter().copied()) else {
        return vec![[0.0, 0.0]; n];
    };
    let size = (x1 - x0).max(y1 - y0);
    let scale = if size > 1e-12 { 1.0 / size } else { 0.0 };
    let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
    let pts: Vec<[f64; 2]> = stroke.iter().map(|p| [(p[0] - cx) * scale, (p[1] - cy) * scale]).collect();
    if pts.len() == 1 {
        return vec![pts[0]; n];
    }
    crate::ink::glyphs::resample_count(&pts, n)
}

/// Symmetric dynamic time warping with Euclidean point cost, normalized by
/// the combined length.
pub fn dtw_distance(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return if n == m { 0.0 } else { f64::INFINITY };
    }
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            let dx = a[i - 1][0] - b[j - 1][0];
            let dy = a[i - 1][1] - b[j - 1][1];
            let cost = (dx * dx + dy * dy).sqrt();
            let best = prev[j - 1].min(prev[j]).min(cur[j - 1]);
            cur[j] = cost + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m] / (n + m) as f64
}
