#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sot_core::DiscreteMeasure;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn axpy(x: &[f64], alpha: f64, v: &[f64]) -> Vec<f64> {
    x.iter().zip(v).map(|(a, b)| a + alpha * b).collect()
}

/// Central difference of `f` along `v`.
pub fn directional_fd(f: impl Fn(&[f64]) -> f64, x: &[f64], v: &[f64], eps: f64) -> f64 {
    (f(&axpy(x, eps, v)) - f(&axpy(x, -eps, v))) / (2.0 * eps)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Sorted distinct positions in `[lo, hi)`.
pub fn positions(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    loop {
        let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
        x.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if x.windows(2).all(|w| w[0] < w[1]) {
            return x;
        }
    }
}

/// Random measure whose weights are positive multiples of `1 / q` summing to
/// one.
pub fn quantized_measure(rng: &mut ChaCha8Rng, max_atoms: usize, q: usize) -> DiscreteMeasure {
    let n = rng.gen_range(1..=max_atoms.min(q));
    // split q units into n positive parts
    let mut cuts: Vec<usize> = Vec::new();
    while cuts.len() < n - 1 {
        let c = rng.gen_range(1..q);
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.sort_unstable();
    let mut bounds = vec![0];
    bounds.extend(cuts);
    bounds.push(q);
    let w: Vec<f64> = bounds.windows(2).map(|b| (b[1] - b[0]) as f64 / q as f64).collect();
    let x = positions(rng, n, 0.0, 1.0);
    DiscreteMeasure::new(&x, &w).unwrap()
}

/// Random measure with continuous weights scaled to `mass`.
pub fn random_measure(rng: &mut ChaCha8Rng, n: usize, mass: f64, lo: f64, hi: f64) -> DiscreteMeasure {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    let w: Vec<f64> = raw.iter().map(|v| v * mass / s).collect();
    DiscreteMeasure::new(&positions(rng, n, lo, hi), &w).unwrap()
}
