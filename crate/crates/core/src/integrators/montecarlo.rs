//! Seeded Monte Carlo with streaming mean/variance.
//!
//! Sample `k` always draws from stream `split(seed, k)`, and accumulators are
//! merged in a fixed chunk order, so estimates do not depend on the number
//! of threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::CounterRng;

const CHUNK: u64 = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub seed: u64,
}

impl McEstimate {
    pub fn exact(value: f64, seed: u64) -> Self {
        Self { mean: value, std_error: 0.0, n_samples: 0, seed }
    }

    /// `|self - other| <= k * sqrt(se_1^2 + se_2^2)`.
    pub fn agrees_with(&self, other: &McEstimate, k: f64) -> bool {
        (self.mean - other.mean).abs() <= k * self.std_error.hypot(other.std_error)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { mean: c * self.mean, std_error: c.abs() * self.std_error, ..*self }
    }
}

/// Welford running moments with Chan's merge.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Accumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn estimate(&self, seed: u64) -> McEstimate {
        let se = if self.n < 2 { 0.0 } else { (self.variance() / self.n as f64).sqrt() };
        McEstimate { mean: self.mean, std_error: se, n_samples: self.n, seed }
    }
}

fn run_range<F>(f: &F, seed: u64, lo: u64, hi: u64) -> Accumulator
where
    F: Fn(&mut CounterRng) -> f64 + Sync,
{
    let mut acc = Accumulator::default();
    for k in lo..hi {
        acc.push(f(&mut CounterRng::child(seed, k)));
    }
    acc
}

/// Estimates `E[f]` where `f` draws its randomness from the supplied stream.
pub fn monte_carlo<F>(f: F, n: u64, seed: u64) -> McEstimate
where
    F: Fn(&mut CounterRng) -> f64 + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Accumulator> =
        (0..chunks).into_par_iter().map(|c| run_range(&f, seed, c * CHUNK, ((c + 1) * CHUNK).min(n))).collect();
    let mut acc = Accumulator::default();
    for p in &parts {
        acc.merge(p);
    }
    acc.estimate(seed)
}

/// Same estimator split into `shards` contiguous ranges merged in order.
pub fn monte_carlo_sharded<F>(f: F, n: u64, seed: u64, shards: usize) -> McEstimate
where
    F: Fn(&mut CounterRng) -> f64 + Sync,
{
    let shards = shards.max(1) as u64;
    let bounds: Vec<(u64, u64)> = (0..shards).map(|s| (s * n / shards, (s + 1) * n / shards)).collect();
    let parts: Vec<Accumulator> = bounds.par_iter().map(|&(lo, hi)| run_range(&f, seed, lo, hi)).collect();
    let mut acc = Accumulator::default();
    for p in &parts {
        acc.merge(p);
    }
    acc.estimate(seed)
}

/// `Σ sign_k · est_k` with standard errors added in quadrature.
pub fn combine_signed(terms: &[(f64, McEstimate)], seed: u64) -> McEstimate {
    let mean = terms.iter().map(|(s, e)| s * e.mean).sum();
    let var: f64 = terms.iter().map(|(s, e)| (s * e.std_error).powi(2)).sum();
    let n_samples = terms.iter().map(|(_, e)| e.n_samples).sum();
    McEstimate { mean, std_error: var.sqrt(), n_samples, seed }
}
