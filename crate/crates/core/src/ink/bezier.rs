//! Error-bounded cubic Bezier fitting of strokes.
//!
//! A stroke is fitted greedily: one cubic with fixed end points and
//! least-squares control points is fitted to the whole point range; while
//! the fit deviates from the points by more than `eps`, the range is split
//! at its worst-fitting interior point and both halves are refitted.
//!
//! Deviation is two-sided: every source point is measured against the
//! densely sampled curve, and every curve sample is measured against the
//! source polyline. A two-point range is fitted by the straight line between
//! them, which has zero deviation, so splitting always terminates.

use crate::error::{invalid_argument, Result};

use super::{Ink, InkToken, Repr, TokenSequence};

/// Curve samples per segment used when measuring fit deviation.
pub const DEVIATION_SAMPLES: usize = 100;
const NEWTON_ROUNDS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicSegment {
    pub p0: [f64; 2],
    pub p1: [f64; 2],
    pub p2: [f64; 2],
    pub p3: [f64; 2],
}

impl CubicSegment {
    pub fn line(a: [f64; 2], b: [f64; 2]) -> Self {
        CubicSegment {
            p0: a,
            p1: lerp(a, b, 1.0 / 3.0),
            p2: lerp(a, b, 2.0 / 3.0),
            p3: b,
        }
    }

    /// Builds a segment from a curve token's geometry: end point, first and
    /// second control point, all relative to `start`.
    pub fn from_offsets(start: [f64; 2], g: &[f64]) -> Self {
        CubicSegment {
            p0: start,
            p1: [start[0] + g[2], start[1] + g[3]],
            p2: [start[0] + g[4], start[1] + g[5]],
            p3: [start[0] + g[0], start[1] + g[1]],
        }
    }

    pub fn to_offsets(&self) -> Vec<f64> {
        let o = self.p0;
        vec![
            self.p3[0] - o[0],
            self.p3[1] - o[1],
            self.p1[0] - o[0],
            self.p1[1] - o[1],
            self.p2[0] - o[0],
            self.p2[1] - o[1],
        ]
    }

    pub fn eval(&self, t: f64) -> [f64; 2] {
        let s = 1.0 - t;
        let (b0, b1, b2, b3) = (s * s * s, 3.0 * s * s * t, 3.0 * s * t * t, t * t * t);
        [
            b0 * self.p0[0] + b1 * self.p1[0] + b2 * self.p2[0] + b3 * self.p3[0],
            b0 * self.p0[1] + b1 * self.p1[1] + b2 * self.p2[1] + b3 * self.p3[1],
        ]
    }

    fn d1(&self, t: f64) -> [f64; 2] {
        let s = 1.0 - t;
        let f = |i: usize| {
            3.0 * s * s * (self.p1[i] - self.p0[i])
                + 6.0 * s * t * (self.p2[i] - self.p1[i])
                + 3.0 * t * t * (self.p3[i] - self.p2[i])
        };
        [f(0), f(1)]
    }

    fn d2(&self, t: f64) -> [f64; 2] {
        let s = 1.0 - t;
        let f = |i: usize| {
            6.0 * s * (self.p2[i] - 2.0 * self.p1[i] + self.p0[i])
                + 6.0 * t * (self.p3[i] - 2.0 * self.p2[i] + self.p1[i])
        };
        [f(0), f(1)]
    }
}

/// `n + 1` points at `t = k / n`, segment start included.
pub fn flatten_segment(seg: &CubicSegment, n: usize) -> Vec<[f64; 2]> {
    let n = n.max(1);
    (0..=n).map(|k| seg.eval(k as f64 / n as f64)).collect()
}

fn lerp(a: [f64; 2], b: [f64; 2], t: f64) -> [f64; 2] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t]
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub(crate) fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + ab[0] * t, a[1] + ab[1] * t])
}

pub(crate) fn point_polyline_distance(p: [f64; 2], poly: &[[f64; 2]]) -> f64 {
    match poly {
        [] => f64::INFINITY,
        [only] => dist(p, *only),
        _ => poly
            .windows(2)
            .map(|w| point_segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Two-sided deviation between a fitted segment and the points it replaces.
fn deviation(seg: &CubicSegment, pts: &[[f64; 2]]) -> f64 {
    let samples = flatten_segment(seg, DEVIATION_SAMPLES);
    let forward = pts
        .iter()
        .map(|&p| point_polyline_distance(p, &samples))
        .fold(0.0, f64::max);
    let backward = samples
        .iter()
        .map(|&s| point_polyline_distance(s, pts))
        .fold(0.0, f64::max);
    forward.max(backward)
}

fn chord_params(pts: &[[f64; 2]]) -> Option<Vec<f64>> {
    let mut acc = vec![0.0; pts.len()];
    for i in 1..pts.len() {
        acc[i] = acc[i - 1] + dist(pts[i], pts[i - 1]);
    }
    let total = *acc.last()?;
    if total <= 0.0 {
        return None;
    }
    Some(acc.into_iter().map(|a| a / total).collect())
}

/// Least-squares control points for fixed end points and parameters.
fn least_squares(pts: &[[f64; 2]], ts: &[f64]) -> Option<CubicSegment> {
    let p0 = pts[0];
    let p3 = *pts.last()?;
    let (mut a11, mut a12, mut a22) = (0.0, 0.0, 0.0);
    let mut r1 = [0.0, 0.0];
    let mut r2 = [0.0, 0.0];
    for (&p, &t) in pts.iter().zip(ts) {
        let s = 1.0 - t;
        let (b0, b1, b2, b3) = (s * s * s, 3.0 * s * s * t, 3.0 * s * t * t, t * t * t);
        a11 += b1 * b1;
        a12 += b1 * b2;
        a22 += b2 * b2;
        for i in 0..2 {
            let rest = p[i] - b0 * p0[i] - b3 * p3[i];
            r1[i] += b1 * rest;
            r2[i] += b2 * rest;
        }
    }
    let det = a11 * a22 - a12 * a12;
    if det.abs() <= 1e-12 * (a11 * a22).max(1e-300) {
        return None;
    }
    let mut p1 = [0.0; 2];
    let mut p2 = [0.0; 2];
    for i in 0..2 {
        p1[i] = (a22 * r1[i] - a12 * r2[i]) / det;
        p2[i] = (a11 * r2[i] - a12 * r1[i]) / det;
    }
    Some(CubicSegment { p0, p1, p2, p3 })
}

fn newton_reparameterize(seg: &CubicSegment, pts: &[[f64; 2]], ts: &mut [f64]) {
    let last = ts.len() - 1;
    for (k, t) in ts.iter_mut().enumerate() {
        if k == 0 || k == last {
            continue;
        }
        let diff = sub(seg.eval(*t), pts[k]);
        let d1 = seg.d1(*t);
        let d2 = seg.d2(*t);
        let den = dot(d1, d1) + dot(diff, d2);
        if den.abs() > 1e-12 {
            *t = (*t - dot(diff, d1) / den).clamp(0.0, 1.0);
        }
    }
}

/// Best single-segment fit for a point range, with its deviation and the
/// interior index with the largest parametric error.
fn fit_single(pts: &[[f64; 2]], eps: f64) -> (CubicSegment, f64, usize) {
    let n = pts.len();
    let line = CubicSegment::line(pts[0], pts[n - 1]);
    if n == 2 {
        return (line, 0.0, 1);
    }
    let mut best = (line, deviation(&line, pts));
    if let Some(mut ts) = chord_params(pts) {
        for round in 0..=NEWTON_ROUNDS {
            if let Some(seg) = least_squares(pts, &ts) {
                let dev = deviation(&seg, pts);
                if dev < best.1 {
                    best = (seg, dev);
                }
                if best.1 <= eps || round == NEWTON_ROUNDS {
                    break;
                }
                newton_reparameterize(&seg, pts, &mut ts);
            } else {
                break;
            }
        }
    }
    let split = (1..n - 1)
        .map(|k| (k, point_polyline_distance(pts[k], &flatten_segment(&best.0, DEVIATION_SAMPLES))))
        .fold((n / 2, -1.0), |acc, (k, e)| if e > acc.1 { (k, e) } else { acc })
        .0;
    (best.0, best.1, split)
}

/// Fits a stroke with cubic segments whose deviation from the polyline is
/// at most `eps`.
pub fn fit_stroke(points: &[[f64; 2]], eps: f64) -> Result<Vec<CubicSegment>> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(invalid_argument(format!("curve tolerance must be positive, got {eps}")));
    }
    if points.len() < 2 {
        return Err(crate::error::invalid_input("stroke with fewer than 2 points"));
    }
    let mut out = Vec::new();
    // Ranges are processed left to right; a split pushes the right half
    // first so the left half is popped next.
    let mut stack = vec![(0usize, points.len() - 1)];
    while let Some((i, j)) = stack.pop() {
        let (seg, dev, split) = fit_single(&points[i..=j], eps);
        if dev <= eps {
            out.push(seg);
        } else {
            let k = i + split;
            stack.push((k, j));
            stack.push((i, k));
        }
    }
    Ok(out)
}

pub fn to_curve_tokens(ink: &Ink, eps: f64) -> Result<TokenSequence> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(invalid_argument(format!("curve tolerance must be positive, got {eps}")));
    }
    let mut tokens = Vec::new();
    for stroke in ink.strokes() {
        let pts: Vec<[f64; 2]> = stroke.iter().map(|p| p.xy()).collect();
        let segs = fit_stroke(&pts, eps)?;
        let n = segs.len();
        for (k, seg) in segs.iter().enumerate() {
            tokens.push(InkToken::new(seg.to_offsets(), k + 1 == n, false));
        }
    }
    if let Some(last) = tokens.last_mut() {
        last.end_of_ink = true;
    }
    Ok(TokenSequence {
        repr: Repr::Curve,
        tokens,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_points_give_one_exact_segment() {
        let pts: Vec<[f64; 2]> = (0..10).map(|i| [i as f64 * 0.3, i as f64 * 0.1]).collect();
        let segs = fit_stroke(&pts, 1e-6).unwrap();
        assert_eq!(segs.len(), 1);
        assert!(deviation(&segs[0], &pts) < 1e-12);
    }

    #[test]
    fn offsets_round_trip() {
        let seg = CubicSegment {
            p0: [1.0, 2.0],
            p1: [1.5, 3.0],
            p2: [2.5, 1.0],
            p3: [4.0, 2.0],
        };
        let back = CubicSegment::from_offsets(seg.p0, &seg.to_offsets());
        assert_eq!(back, seg);
    }

    #[test]
    fn rejects_non_positive_eps() {
        let pts = [[0.0, 0.0], [1.0, 0.0]];
        assert!(matches!(fit_stroke(&pts, 0.0), Err(crate::Error::InvalidArgument(_))));
        assert!(matches!(fit_stroke(&pts, -1.0), Err(crate::Error::InvalidArgument(_))));
        let ink = Ink::from_xy(&[pts.to_vec()]).unwrap();
        assert!(to_curve_tokens(&ink, 0.0).is_err());
    }

    #[test]
    fn duplicate_points_are_handled() {
        let pts = [[1.0, 1.0]; 5];
        let segs = fit_stroke(&pts, 0.01).unwrap();
        assert_eq!(segs.len(), 1);
    }

    #[test]
    fn curve_token_flags() {
        let arc: Vec<[f64; 2]> = (0..40)
            .map(|i| {
                let a = i as f64 / 39.0 * std::f64::consts::PI * 1.5;
                [a.cos(), a.sin()]
            })
            .collect();
        let ink = Ink::from_xy(&[arc.clone(), arc]).unwrap();
        let seq = to_curve_tokens(&ink, 0.01).unwrap();
        assert_eq!(seq.pen_up_count(), 2);
        assert!(seq.is_complete());
        assert!(seq.validate().is_ok());
    }
}
