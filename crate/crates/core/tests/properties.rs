use inkgen::eval::{cer, edit_distance, pareto_frontier};
use inkgen::ink::jsonl::{parse_jsonl, to_jsonl_string};
use inkgen::ink::{fit_stroke, flatten_segment, to_raw_tokens, Ink, InkToken, LabeledInk, Repr};
use inkgen::mixture::{apply_bias, distort_weights, softmax, softplus, token_log_likelihood, MixtureParams, SamplingConfig, SamplingMethod};
use proptest::prelude::*;

fn method() -> impl Strategy<Value = SamplingMethod> {
    prop_oneof![Just(SamplingMethod::TopK), Just(SamplingMethod::TopP), Just(SamplingMethod::Typical)]
}

fn weights() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-6.0f64..6.0, 1..12).prop_map(|l| softmax(&l))
}

fn first_argmax(w: &[f64]) -> usize {
    (0..w.len()).fold(0, |b, i| if w[i] > w[b] { i } else { b })
}

/// Full Wagner-Fischer table.
fn oracle_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in t.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        t[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let c = if a[i - 1] == b[j - 1] { 0 } else { 1 };
            t[i][j] = (t[i - 1][j] + 1).min(t[i][j - 1] + 1).min(t[i - 1][j - 1] + c);
        }
    }
    t[a.len()][b.len()]
}

fn seg_dist(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let l2 = dx * dx + dy * dy;
    let t = if l2 == 0.0 { 0.0 } else { (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / l2).clamp(0.0, 1.0) };
    (p[0] - a[0] - t * dx).hypot(p[1] - a[1] - t * dy)
}

fn poly_dist(p: [f64; 2], poly: &[[f64; 2]]) -> f64 {
    if poly.len() == 1 {
        return (p[0] - poly[0][0]).hypot(p[1] - poly[0][1]);
    }
    poly.windows(2).map(|w| seg_dist(p, w[0], w[1])).fold(f64::INFINITY, f64::min)
}

/// Largest distance from any source point to the sampled curve and from any
/// curve sample to the source polyline.
fn two_sided_deviation(points: &[[f64; 2]], curve: &[[f64; 2]]) -> f64 {
    let a = points.iter().map(|&p| poly_dist(p, curve)).fold(0.0, f64::max);
    let b = curve.iter().map(|&p| poly_dist(p, points)).fold(0.0, f64::max);
    a.max(b)
}

fn stroke() -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2..40).prop_map(|steps| {
        let mut p = [0.0, 0.0];
        steps
            .into_iter()
            .map(|(dx, dy)| {
                p = [p[0] + dx, p[1] + dy];
                p
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn distorted_weights_stay_on_simplex(w in weights(), method in method(), m in 0.0f64..1.0, k in 1usize..12) {
        let m = if method == SamplingMethod::TopK { k as f64 } else { m };
        let out = distort_weights(&w, method, m).unwrap();
        prop_assert_eq!(out.len(), w.len());
        prop_assert!(out.iter().all(|&x| x >= 0.0));
        prop_assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(out.iter().any(|&x| x > 0.0));
        // kept components keep their relative sizes
        let kept: Vec<usize> = (0..w.len()).filter(|&i| out[i] > 0.0).collect();
        let mass: f64 = kept.iter().map(|&i| w[i]).sum();
        for &i in &kept {
            prop_assert!((out[i] - w[i] / mass).abs() < 1e-12);
        }
        if method != SamplingMethod::Typical {
            // truncation keeps a top set
            let min_kept = kept.iter().map(|&i| w[i]).fold(f64::INFINITY, f64::min);
            prop_assert!((0..w.len()).filter(|i| !kept.contains(i)).all(|i| w[i] <= min_kept));
        }
        if method != SamplingMethod::TopK {
            prop_assert!(mass >= m - 1e-9);
        }
    }

    #[test]
    fn distortion_identities_are_exact(w in weights()) {
        prop_assert_eq!(&distort_weights(&w, SamplingMethod::TopP, 1.0).unwrap(), &w);
        prop_assert_eq!(&distort_weights(&w, SamplingMethod::Typical, 1.0).unwrap(), &w);
        prop_assert_eq!(&distort_weights(&w, SamplingMethod::TopK, w.len() as f64).unwrap(), &w);
        let mut onehot = vec![0.0; w.len()];
        onehot[first_argmax(&w)] = 1.0;
        prop_assert_eq!(&distort_weights(&w, SamplingMethod::TopK, 1.0).unwrap(), &onehot);
        prop_assert_eq!(&distort_weights(&w, SamplingMethod::TopP, 0.0).unwrap(), &onehot);
    }

    #[test]
    fn bias_shrinks_scales(pre in prop::collection::vec(-5.0f64..5.0, 1..8), b1 in 0.0f64..50.0, b2 in 0.0f64..50.0) {
        let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
        let a = apply_bias(&pre, lo);
        let c = apply_bias(&pre, hi);
        for i in 0..pre.len() {
            prop_assert!(c[i] <= a[i]);
            prop_assert!(a[i] <= softplus(pre[i]));
        }
        prop_assert_eq!(apply_bias(&pre, 0.0), pre.iter().map(|&p| softplus(p)).collect::<Vec<_>>());
        prop_assert!(apply_bias(&pre, f64::INFINITY).iter().all(|&s| s == 0.0));
    }

    #[test]
    fn cer_matches_table_oracle(a in "[a-e\u{e9}]{0,12}", b in "[a-e\u{e9}]{1,12}") {
        prop_assert_eq!(edit_distance(&a, &b), oracle_distance(&a, &b));
        prop_assert_eq!(edit_distance(&a, &b), edit_distance(&b, &a));
        prop_assert_eq!(cer(&a, &b).unwrap(), oracle_distance(&a, &b) as f64 / b.chars().count() as f64);
    }

    #[test]
    fn frontier_matches_brute_force(pts in prop::collection::vec((0u8..6, 0u8..6), 0..30)) {
        let pts: Vec<(f64, f64)> = pts.into_iter().map(|(t, c)| (t as f64, c as f64)).collect();
        let flags = pareto_frontier(&pts);
        for (i, p) in pts.iter().enumerate() {
            let dominated = pts.iter().any(|q| q.0 <= p.0 && q.1 <= p.1 && (q.0 < p.0 || q.1 < p.1));
            prop_assert_eq!(flags[i], !dominated);
        }
    }

    #[test]
    fn bezier_fit_is_within_eps(points in stroke(), eps in 0.01f64..0.5) {
        let segs = fit_stroke(&points, eps).unwrap();
        prop_assert!(!segs.is_empty());
        prop_assert_eq!(segs[0].p0, points[0]);
        prop_assert_eq!(segs.last().unwrap().p3, *points.last().unwrap());
        let mut curve = Vec::new();
        for s in &segs {
            curve.extend(flatten_segment(s, 100));
        }
        prop_assert!(two_sided_deviation(&points, &curve) <= eps + 1e-9);
    }

    #[test]
    fn jsonl_round_trip(strokes in prop::collection::vec(stroke(), 1..4), label in "[a-z]{1,6}") {
        let ink = Ink::from_xy(&strokes).unwrap();
        let sample = LabeledInk::new(label, to_raw_tokens(&ink).unwrap()).unwrap();
        let curve = sample.to_curve(0.05).unwrap();
        let text = to_jsonl_string(&[sample.clone(), curve.clone()]);
        let back = parse_jsonl(&text).unwrap();
        prop_assert_eq!(&back, &vec![sample, curve]);
        prop_assert_eq!(to_jsonl_string(&back), text);
    }

    #[test]
    fn bivariate_density_integrates_to_one(
        comps in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0, -1.0f64..1.0, -1.0f64..1.0, -1.5f64..1.5), 1..4),
        logits in prop::collection::vec(-2.0f64..2.0, 4),
    ) {
        let k = comps.len();
        let p = MixtureParams {
            d: 2,
            weight_logits: logits[..k].to_vec(),
            means: comps.iter().flat_map(|c| [c.0, c.1]).collect(),
            scale_preacts: comps.iter().flat_map(|c| [c.2, c.3]).collect(),
            corr_preacts: comps.iter().map(|c| c.4).collect(),
            pen_logit: 0.0,
            end_logit: 0.0,
        };
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for i in 0..k {
            for j in 0..2 {
                let s = softplus(p.scale_preacts[2 * i + j]);
                lo[j] = lo[j].min(p.means[2 * i + j] - 8.0 * s);
                hi[j] = hi[j].max(p.means[2 * i + j] + 8.0 * s);
            }
        }
        let n = 500;
        let (hx, hy) = ((hi[0] - lo[0]) / n as f64, (hi[1] - lo[1]) / n as f64);
        let flags = 2.0 * 0.5f64.ln();
        let mut total = 0.0;
        for a in 0..n {
            for b in 0..n {
                let x = lo[0] + (a as f64 + 0.5) * hx;
                let y = lo[1] + (b as f64 + 0.5) * hy;
                let ll = token_log_likelihood(&p, &InkToken::new(vec![x, y], false, false)).unwrap();
                total += (ll - flags).exp();
            }
        }
        prop_assert!((total * hx * hy - 1.0).abs() < 1e-3, "integral {}", total * hx * hy);
    }
}

#[test]
fn cer_agrees_with_oracle_on_ten_thousand_pairs() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    let alphabet: Vec<char> = "abcdxyz\u{e9}\u{3bb}".chars().collect();
    let word = |rng: &mut rand_chacha::ChaCha8Rng, min: usize| -> String {
        let n = rng.random_range(min..10);
        (0..n).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect()
    };
    for _ in 0..10_000 {
        let h = word(&mut rng, 0);
        let r = word(&mut rng, 1);
        assert_eq!(cer(&h, &r).unwrap(), oracle_distance(&h, &r) as f64 / r.chars().count() as f64, "{h:?} {r:?}");
    }
}

#[test]
fn circle_arc_fit_within_tolerance() {
    let radius = 2.0;
    let eps = 0.01 * radius;
    let points: Vec<[f64; 2]> = (0..=90)
        .map(|i| {
            let a = i as f64 / 90.0 * 1.5 * std::f64::consts::PI;
            [radius * a.cos(), radius * a.sin()]
        })
        .collect();
    let segs = fit_stroke(&points, eps).unwrap();
    assert!(!segs.is_empty());
    let curve: Vec<[f64; 2]> = segs.iter().flat_map(|s| flatten_segment(s, 100)).collect();
    assert!(two_sided_deviation(&points, &curve) <= eps);
}

#[test]
fn curve_tokens_flatten_back_within_eps() {
    let points: Vec<[f64; 2]> = (0..60).map(|i| [i as f64 * 0.1, (i as f64 * 0.2).sin()]).collect();
    let ink = Ink::from_xy(&[points.clone()]).unwrap();
    let eps = 0.02;
    let sample = LabeledInk::new("s", to_raw_tokens(&ink).unwrap()).unwrap();
    let curve = sample.to_curve(eps).unwrap();
    assert_eq!(curve.sequence.repr, Repr::Curve);
    let flat = curve.sequence.stroke_polylines(50);
    assert_eq!(flat.len(), 1);
    // polylines are relative to the stroke start
    let shifted: Vec<[f64; 2]> = flat[0].iter().map(|p| [p[0] + points[0][0], p[1] + points[0][1]]).collect();
    assert!(two_sided_deviation(&points, &shifted) <= eps + 1e-9);
}

#[test]
fn ancestral_config_is_identity_truncation() {
    let w = softmax(&[0.3, -1.0, 2.0]);
    let cfg = SamplingConfig::ancestral();
    assert_eq!(distort_weights(&w, cfg.method, cfg.m).unwrap(), w);
}
