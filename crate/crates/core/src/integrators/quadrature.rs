//! Gauss–Hermite and Gauss–Legendre rules by Newton iteration on the
//! three-term recurrences.

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const MAX_DIMS: usize = 6;
pub const MAX_NODES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Rule for `E[f(Z)]`, `Z ~ N(0, 1)`; weights sum to one.
pub fn gauss_hermite_rule(n: usize) -> QuadRule {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let pim4 = PI.powf(-0.25);
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = (j + 1) as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    // Physicists' nodes for weight e^{-x^2}; rescale to the standard normal.
    let nodes = x.iter().rev().map(|v| v * std::f64::consts::SQRT_2).collect();
    let weights = w.iter().rev().map(|v| v / PI.sqrt()).collect();
    QuadRule { nodes, weights }
}

/// Rule for `∫_a^b f(x) dx`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> QuadRule {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let (xm, xl) = (0.5 * (b + a), 0.5 * (b - a));
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        nodes[i] = xm - xl * z;
        nodes[n - 1 - i] = xm + xl * z;
        weights[i] = 2.0 * xl / ((1.0 - z * z) * pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    QuadRule { nodes, weights }
}

/// Tensor-product approximation of `E[f(Z)]` with independent
/// `Z_k ~ N(0, variances[k])`.
pub fn gauss_hermite<F>(f: F, variances: &[f64], nodes_per_dim: usize) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let dims = variances.len();
    if dims == 0 || dims > MAX_DIMS {
        return Err(Error::Guard(format!("Gauss–Hermite supports 1..={MAX_DIMS} dimensions, got {dims}")));
    }
    if nodes_per_dim == 0 || nodes_per_dim > MAX_NODES {
        return Err(Error::Guard(format!("Gauss–Hermite supports 1..={MAX_NODES} nodes, got {nodes_per_dim}")));
    }
    if variances.iter().any(|&v| v.is_nan() || v < 0.0) {
        return Err(Error::InvalidParameter("variances must be non-negative".into()));
    }
    let rule = gauss_hermite_rule(nodes_per_dim);
    let sd: Vec<f64> = variances.iter().map(|v| v.sqrt()).collect();
    let mut idx = vec![0usize; dims];
    let mut z = vec![0.0; dims];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for k in 0..dims {
            z[k] = sd[k] * rule.nodes[idx[k]];
            w *= rule.weights[idx[k]];
        }
        total += w * f(&z);
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < nodes_per_dim {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == dims {
                return Ok(total);
            }
        }
    }
}
