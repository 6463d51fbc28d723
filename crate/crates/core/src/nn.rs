//! Small numeric building blocks shared by the generator and the rankers:
//! dense kernels, Adam, gradient clipping and seeded RNG substreams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of substream `i` of `seed`: `mix64(seed ^ mix64(i))`.
pub fn substream_seed(seed: u64, i: u64) -> u64 {
    mix64(seed ^ mix64(i))
}

pub fn substream_rng(seed: u64, i: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(seed, i))
}

/// `out += W x` for a row-major `rows x cols` matrix.
pub fn matvec_add(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    for (r, o) in out.iter_mut().enumerate().take(rows) {
        let row = &w[r * cols..(r + 1) * cols];
        *o += dot(row, x);
    }
}

/// `dx += W^T dy`.
pub fn matvec_t_add(w: &[f64], rows: usize, cols: usize, dy: &[f64], dx: &mut [f64]) {
    for r in 0..rows {
        let g = dy[r];
        if g == 0.0 {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for (d, &wv) in dx.iter_mut().zip(row) {
            *d += g * wv;
        }
    }
}

/// `G += dy x^T`.
pub fn outer_add(g: &mut [f64], rows: usize, cols: usize, dy: &[f64], x: &[f64]) {
    for r in 0..rows {
        let s = dy[r];
        if s == 0.0 {
            continue;
        }
        let row = &mut g[r * cols..(r + 1) * cols];
        for (gv, &xv) in row.iter_mut().zip(x) {
            *gv += s * xv;
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn global_norm(g: &[f64]) -> f64 {
    g.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Rescales `g` so its L2 norm is at most `max_norm`. Returns the norms
/// before and after clipping.
pub fn clip_global_norm(g: &mut [f64], max_norm: f64) -> (f64, f64) {
    let norm = global_norm(g);
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        g.iter_mut().for_each(|v| *v *= s);
        (norm, global_norm(g))
    } else {
        (norm, norm)
    }
}

/// Rounds every value to the nearest `f32`, so that parameters survive a
/// save/load cycle unchanged.
pub fn round_to_f32(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = *x as f32 as f64);
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// Named tensor offsets into one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    entries: Vec<(String, Vec<usize>, usize)>,
    total: usize,
}

impl ParamLayout {
    pub fn new(specs: &[(&str, Vec<usize>)]) -> Self {
        let mut entries = Vec::with_capacity(specs.len());
        let mut total = 0;
        for (name, shape) in specs {
            entries.push((name.to_string(), shape.clone(), total));
            total += shape.iter().product::<usize>();
        }
        ParamLayout { entries, total }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn range(&self, idx: usize) -> std::ops::Range<usize> {
        let (_, shape, off) = &self.entries[idx];
        *off..*off + shape.iter().product::<usize>()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[usize], std::ops::Range<usize>)> {
        self.entries
            .iter()
            .enumerate()
            .map(move |(i, (n, s, _))| (n.as_str(), s.as_slice(), self.range(i)))
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|(n, _, _)| n == name)
    }
}
