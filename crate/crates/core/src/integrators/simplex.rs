//! Singular integrals over ordered simplices and the Gamma-function bounds
//! built from them.
//!
//! The integral of `∏ (gap)^{-1/2}` over the `n + 1` gaps of an ordered
//! chain `lower < x_n < ... < x_1 < upper` equals
//! `Γ(1/2)^{n+1} (upper - lower)^{(n-1)/2} / Γ((n+1)/2)`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::montecarlo::{monte_carlo, McEstimate};
use super::quadrature::gauss_legendre;
use crate::error::{Error, Result};
use crate::kernels::C0;
use crate::special::ln_gamma;

/// Closed form of the singular simplex integral.
pub fn simplex_singular_integral(n: usize, lower: f64, upper: f64) -> Result<f64> {
    if n == 0 || lower >= upper {
        return Err(Error::InvalidParameter(format!("need n >= 1 and lower < upper, got n={n}, [{lower}, {upper}]")));
    }
    let nf = n as f64;
    let ln = (nf + 1.0) * ln_gamma(0.5) + 0.5 * (nf - 1.0) * (upper - lower).ln() - ln_gamma(0.5 * (nf + 1.0));
    Ok(ln.exp())
}

/// Stick-breaking with `v_j = sin²θ_j` turns the integral into
/// `L^{(n-1)/2} ∏_j ∫_0^{π/2} 2 cos^{n-j}θ dθ`; this draws `θ` uniformly.
pub fn simplex_integral_mc(n: usize, lower: f64, upper: f64, samples: u64, seed: u64) -> Result<McEstimate> {
    if n == 0 || lower >= upper {
        return Err(Error::InvalidParameter("need n >= 1 and lower < upper".into()));
    }
    let scale = (upper - lower).powf(0.5 * (n as f64 - 1.0)) * FRAC_PI_2.powi(n as i32);
    Ok(monte_carlo(
        |rng| {
            let mut w = scale;
            for j in 1..=n {
                let theta = FRAC_PI_2 * rng.uniform();
                w *= 2.0 * theta.cos().powi((n - j) as i32);
            }
            w
        },
        samples,
        seed,
    ))
}

/// Same factorization with each one-dimensional factor by Gauss–Legendre.
pub fn simplex_integral_quadrature(n: usize, lower: f64, upper: f64, nodes: usize) -> Result<f64> {
    if n == 0 || lower >= upper {
        return Err(Error::InvalidParameter("need n >= 1 and lower < upper".into()));
    }
    let rule = gauss_legendre(nodes, 0.0, FRAC_PI_2);
    let mut total = (upper - lower).powf(0.5 * (n as f64 - 1.0));
    for j in 1..=n {
        let f: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * 2.0 * x.cos().powi((n - j) as i32)).sum();
        total *= f;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    MD,
    MD2,
    MD3,
}

impl std::str::FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "md" => Ok(Self::MD),
            "md2" => Ok(Self::MD2),
            "md3" => Ok(Self::MD3),
            other => Err(Error::InvalidParameter(format!("unknown bound kind {other:?}"))),
        }
    }
}

/// Bounds `r̄ ≤ r ≤ s` and `ū ≤ u ≤ t` of the integration window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub r_bar: f64,
    pub r: f64,
    pub s: f64,
    pub u_bar: f64,
    pub u: f64,
    pub t: f64,
}

impl TimeWindow {
    /// Window `[r, s] x [u, t]` with `r̄ = ū = 0`.
    pub fn rect(r: f64, s: f64, u: f64, t: f64) -> Self {
        Self { r_bar: 0.0, r, s, u_bar: 0.0, u, t }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 <= self.r_bar
            && self.r_bar <= self.r
            && self.r <= self.s
            && 0.0 <= self.u_bar
            && self.u_bar <= self.u
            && self.u <= self.t;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("unordered time window {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaBound {
    pub kind: BoundKind,
    pub n: usize,
    pub k: usize,
    pub value: f64,
}

/// Default `C1 = C0 · Γ(1/2)²`.
pub fn default_c1() -> f64 {
    C0 * PI
}

fn pow_half(base: f64, m: usize) -> f64 {
    base.powf(0.5 * m as f64)
}

/// Right-hand sides of the integrated Davie-type bounds.
pub fn corollary_rhs(kind: BoundKind, n: usize, k: usize, norm_b: f64, c1: f64, w: &TimeWindow) -> Result<GammaBound> {
    w.validate()?;
    if norm_b < 0.0 || c1 <= 0.0 {
        return Err(Error::InvalidParameter("need norm_b >= 0 and C1 > 0".into()));
    }
    let lg = |m: usize| ln_gamma(0.5 * (m as f64 + 1.0));
    let value = match kind {
        BoundKind::MD => {
            (c1 * norm_b).powi(n as i32) * pow_half(w.s - w.r, n) * pow_half(w.t - w.u, n) / (2.0 * lg(n)).exp()
        }
        BoundKind::MD2 => {
            (c1 * norm_b).powi((k + n) as i32)
                * pow_half(w.r - w.r_bar, n)
                * pow_half(w.s - w.r, k)
                * pow_half(w.t - w.u_bar, k + n)
                / (lg(n) + lg(k) + lg(k + n)).exp()
        }
        BoundKind::MD3 => {
            (c1 * norm_b).powi((k + n) as i32)
                * pow_half(w.s - w.r_bar, k + n)
                * pow_half(w.u - w.u_bar, n)
                * pow_half(w.t - w.u, k)
                / (lg(n) + lg(k) + lg(k + n)).exp()
        }
    };
    Ok(GammaBound { kind, n, k, value })
}
