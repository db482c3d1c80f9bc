//! Numerical checks of the integration-by-parts expansion and its bounds.
//!
//! The target is `E[∏_i b_i'(W(s_i, t_{σ(i)}))]` for a one-dimensional sheet,
//! with each sheet value written as the sum of the independent cell
//! increments over its span. [`direct_expectation`] integrates the product of
//! derivatives; [`ibp_expectation`] integrates each expansion term, in which
//! every derivative has been moved onto a Gaussian kernel and shows up as the
//! weight `-y/v`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ibp::{self, BKind, IbpTerm, PermutationSpec};
use crate::integrators::montecarlo::{combine_signed, monte_carlo, McEstimate};
use crate::integrators::quadrature::gauss_hermite;
use crate::integrators::simplex::{corollary_rhs, default_c1, BoundKind, TimeWindow};
use crate::kernels::{KernelCell, C0};
use crate::rng::{split, CounterRng};

/// Largest number of evaluation points for Monte Carlo.
pub const MAX_MC_POINTS: usize = 8;
/// Largest number of evaluation points for tensor quadrature (`n²` dimensions).
pub const MAX_QUAD_POINTS: usize = 2;

/// `x ↦ a · exp(1 + 1/(u² - 1))` on `|u| < 1`, `u = (x - c)/L`; `‖b‖_∞ = |a|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpFactor {
    pub amplitude: f64,
    pub center: f64,
    pub half_width: f64,
}

impl BumpFactor {
    pub fn new(amplitude: f64, center: f64, half_width: f64) -> Self {
        assert!(half_width > 0.0, "bump half-width must be positive");
        Self { amplitude, center, half_width }
    }

    pub fn standard() -> Self {
        Self::new(1.0, 0.0, 1.0)
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        let u = (x - self.center) / self.half_width;
        if u.abs() >= 1.0 || self.amplitude == 0.0 {
            return 0.0;
        }
        self.amplitude * (1.0 + 1.0 / (u * u - 1.0)).exp()
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        let u = (x - self.center) / self.half_width;
        if u.abs() >= 1.0 || self.amplitude == 0.0 {
            return 0.0;
        }
        let d = u * u - 1.0;
        self.amplitude * (1.0 + 1.0 / d).exp() * (-2.0 * u / (d * d)) / self.half_width
    }

    pub fn sup_norm(&self) -> f64 {
        self.amplitude.abs()
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self { amplitude: lambda * self.amplitude, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum Method {
    Quadrature { nodes: usize },
    MonteCarlo { samples: u64 },
}

/// Cell variances `Δs_i Δt_j`, row-major over the `n x n` cells.
fn cell_variances(spec: &PermutationSpec) -> Vec<f64> {
    let g = spec.grid();
    let n = spec.n();
    (1..=n).flat_map(|i| (1..=n).map(move |j| (i, j))).map(|(i, j)| g.area(i, j)).collect()
}

/// Span sums `S_i = Σ_{Λ_i} z` for row-major `z`.
fn span_sums(spec: &PermutationSpec, z: &[f64], out: &mut [f64]) {
    let n = spec.n();
    // Column prefix sums of the running row total give each span in O(n²).
    let mut col = vec![0.0; n];
    for i in 1..=n {
        for j in 0..n {
            col[j] += z[(i - 1) * n + j];
        }
        out[i - 1] = col[..spec.sigma(i)].iter().sum();
    }
}

fn check_inputs(spec: &PermutationSpec, factors: &[BumpFactor], method: &Method) -> Result<()> {
    let n = spec.n();
    if factors.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: factors.len() });
    }
    match *method {
        Method::Quadrature { .. } if n > MAX_QUAD_POINTS => {
            Err(Error::Guard(format!("quadrature supports n <= {MAX_QUAD_POINTS}, got {n}")))
        }
        Method::MonteCarlo { .. } if n > MAX_MC_POINTS => {
            Err(Error::Guard(format!("Monte Carlo supports n <= {MAX_MC_POINTS}, got {n}")))
        }
        Method::MonteCarlo { samples } if samples < 2 => Err(Error::InvalidParameter("need at least 2 samples".into())),
        _ => Ok(()),
    }
}

fn integrate<F>(spec: &PermutationSpec, method: &Method, seed: u64, f: F) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let var = cell_variances(spec);
    match *method {
        Method::Quadrature { nodes } => Ok(McEstimate::exact(gauss_hermite(&f, &var, nodes)?, seed)),
        Method::MonteCarlo { samples } => {
            let sd: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();
            Ok(monte_carlo(
                |rng: &mut CounterRng| {
                    let z: Vec<f64> = sd.iter().map(|s| s * rng.normal()).collect();
                    f(&z)
                },
                samples,
                seed,
            ))
        }
    }
}

/// `E[∏ b_i'(S_i)]` over the independent cell increments.
pub fn direct_expectation(
    spec: &PermutationSpec,
    factors: &[BumpFactor],
    method: Method,
    seed: u64,
) -> Result<McEstimate> {
    check_inputs(spec, factors, &method)?;
    let n = spec.n();
    integrate(spec, &method, seed, |z| {
        let mut s = [0.0; MAX_MC_POINTS];
        span_sums(spec, z, &mut s[..n]);
        factors.iter().zip(&s[..n]).map(|(b, &x)| b.derivative(x)).product()
    })
}

/// Value of one expansion term at the cell increments `z`, without its sign.
pub fn term_integrand(term: &IbpTerm, variances: &[f64], factors: &[BumpFactor], z: &[f64]) -> f64 {
    let n = factors.len();
    let y = ibp::substitute(term, n, z);
    let at = |c: crate::geometry::Cell| (c.row - 1) * n + c.col - 1;
    let mut out = 1.0;
    for (row, b) in term.rows.iter().zip(factors) {
        let arg: f64 = term.b_arg_sets[row.row - 1].iter().map(|&c| y[at(c)]).sum();
        let value = b.value(arg);
        if value == 0.0 {
            return 0.0;
        }
        let cell = row.b_cell();
        let kernel_arg = match row.b_kind {
            BKind::Gamma => y[at(row.gamma)],
            BKind::Tau => y[at(cell)] - y[at(row.gamma)],
        };
        out *= value * KernelCell::new(variances[at(cell)], 1).hermite_weight(&[kernel_arg], 1);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermEstimate {
    pub k: Vec<usize>,
    pub sign: i8,
    pub estimate: McEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IbpEstimate {
    pub total: McEstimate,
    pub terms: Vec<TermEstimate>,
}

/// Signed sum of the expansion terms; term `j` uses stream `split(seed, j)`.
pub fn ibp_expectation(
    spec: &PermutationSpec,
    factors: &[BumpFactor],
    method: Method,
    seed: u64,
) -> Result<IbpEstimate> {
    check_inputs(spec, factors, &method)?;
    let var = cell_variances(spec);
    let terms = ibp::expand(spec)?;
    let mut out = Vec::with_capacity(terms.len());
    for (j, term) in terms.iter().enumerate() {
        let est = integrate(spec, &method, split(seed, j as u64), |z| term_integrand(term, &var, factors, z))?;
        out.push(TermEstimate { k: term.k.clone(), sign: term.sign, estimate: est });
    }
    let signed: Vec<(f64, McEstimate)> = out.iter().map(|t| (t.sign as f64, t.estimate)).collect();
    Ok(IbpEstimate { total: combine_signed(&signed, seed), terms: out })
}

/// `C0^n ‖b‖^n ∏ (s_i - s_{i-1})^{-1/2} (t_i - t_{i-1})^{-1/2}`.
pub fn davie_bound_with(spec: &PermutationSpec, sup_norm: f64, c0: f64) -> f64 {
    let gaps = |x: &[f64]| -> f64 {
        let mut prev = 0.0;
        x.iter()
            .map(|&v| {
                let d = v - prev;
                prev = v;
                d.powf(-0.5)
            })
            .product()
    };
    (c0 * sup_norm).powi(spec.n() as i32) * gaps(spec.s_times()) * gaps(spec.t_times())
}

pub fn davie_bound(spec: &PermutationSpec, sup_norm: f64) -> f64 {
    davie_bound_with(spec, sup_norm, C0)
}

/// Lower-triangular `L` with `L Lᵀ = cov`; tiny negative pivots clamp to zero.
fn cholesky(cov: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = cov.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][j] = (cov[i][i] - s).max(0.0).sqrt();
            } else if l[j][j] > 0.0 {
                l[i][j] = (cov[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

/// `E[∏ b'(W(p_i))]` at arbitrary points by Gauss–Hermite after a Cholesky
/// factorization of `Cov(W_p, W_q) = min(s) min(t)`.
pub fn point_expectation(points: &[(f64, f64)], factor: &BumpFactor, nodes: usize) -> Result<f64> {
    let n = points.len();
    if n == 0 || n > MAX_QUAD_POINTS {
        return Err(Error::Guard(format!("point expectation supports 1..={MAX_QUAD_POINTS} points")));
    }
    let cov: Vec<Vec<f64>> =
        points.iter().map(|p| points.iter().map(|q| p.0.min(q.0) * p.1.min(q.1)).collect()).collect();
    let l = cholesky(&cov);
    gauss_hermite(
        |z| {
            (0..n)
                .map(|i| {
                    let w: f64 = (0..=i).map(|k| l[i][k] * z[k]).sum();
                    factor.derivative(w)
                })
                .product()
        },
        &vec![1.0; n],
        nodes,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorollaryReport {
    pub n: usize,
    pub window: TimeWindow,
    pub lhs: McEstimate,
    pub rhs: f64,
    pub c1: f64,
    pub ratio: f64,
}

impl CorollaryReport {
    pub fn holds(&self) -> bool {
        self.lhs.mean <= self.rhs
    }
}

const INNER_NODES: usize = 48;

fn fact(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `∫ |E[∏ b'(W(s_i, t_i))]|` over `r < s_n < ... < s_1 < s`,
/// `u < t_n < ... < t_1 < t`: outer Monte Carlo over ordered chains, inner
/// quadrature.
pub fn corollary_lhs(
    n: usize,
    window: &TimeWindow,
    factor: &BumpFactor,
    samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    window.validate()?;
    if n == 0 || n > MAX_QUAD_POINTS {
        return Err(Error::Guard(format!("corollary check supports 1..={MAX_QUAD_POINTS} points, got {n}")));
    }
    let w = *window;
    let vol = ((w.s - w.r) * (w.t - w.u)).powi(n as i32) / (fact(n) * fact(n));
    let est = monte_carlo(
        |rng| {
            let mut s: Vec<f64> = (0..n).map(|_| rng.uniform_in(w.r, w.s)).collect();
            let mut t: Vec<f64> = (0..n).map(|_| rng.uniform_in(w.u, w.t)).collect();
            s.sort_by(|a, b| b.total_cmp(a));
            t.sort_by(|a, b| b.total_cmp(a));
            let pts: Vec<(f64, f64)> = s.into_iter().zip(t).collect();
            vol * point_expectation(&pts, factor, INNER_NODES).unwrap_or(f64::NAN).abs()
        },
        samples,
        seed,
    );
    if est.mean.is_nan() {
        return Err(Error::InvalidParameter("inner quadrature failed".into()));
    }
    Ok(est)
}

pub fn corollary_check(
    n: usize,
    window: &TimeWindow,
    factor: &BumpFactor,
    c1: Option<f64>,
    samples: u64,
    seed: u64,
) -> Result<CorollaryReport> {
    let c1 = c1.unwrap_or_else(default_c1);
    let lhs = corollary_lhs(n, window, factor, samples, seed)?;
    let rhs = corollary_rhs(BoundKind::MD, n, 0, factor.sup_norm(), c1, window)?.value;
    let ratio = if rhs > 0.0 { lhs.mean / rhs } else { f64::NAN };
    Ok(CorollaryReport { n, window: *window, lhs, rhs, c1, ratio })
}

/// Least-squares slope of `ln LHS` against `ln((s-r)(t-u))` for square
/// windows `[r, r+h] x [u, u+h]`, all sizes sharing one seed.
pub fn scaling_slope(
    n: usize,
    anchor: (f64, f64),
    sizes: &[f64],
    factor: &BumpFactor,
    samples: u64,
    seed: u64,
) -> Result<(f64, Vec<(f64, f64)>)> {
    if sizes.len() < 2 {
        return Err(Error::InvalidParameter("need at least two window sizes".into()));
    }
    let mut pts = Vec::with_capacity(sizes.len());
    for &h in sizes {
        let w = TimeWindow::rect(anchor.0, anchor.0 + h, anchor.1, anchor.1 + h);
        let lhs = corollary_lhs(n, &w, factor, samples, seed)?;
        pts.push(((h * h).ln(), lhs.mean.ln()));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok((sxy / sxx, pts))
}

/// Draws a uniformly random configuration: `n` sorted times per axis in
/// `(0, t_max)` and a uniform permutation.
pub fn random_spec(n: usize, t_max: f64, rng: &mut CounterRng) -> Result<PermutationSpec> {
    let mut draw = || {
        let mut v: Vec<f64> = (0..n).map(|_| rng.uniform_in(0.0, t_max)).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let s = draw();
    let t = draw();
    let mut sigma: Vec<usize> = (1..=n).collect();
    for i in (1..n).rev() {
        let j = (rng.uniform() * (i + 1) as f64) as usize;
        sigma.swap(i, j.min(i));
    }
    PermutationSpec::new(sigma, s, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_norm_and_derivative() {
        let b = BumpFactor::new(-1.7, 0.3, 0.8);
        assert_eq!(b.sup_norm(), 1.7);
        assert!((b.value(0.3) + 1.7).abs() < 1e-15);
        for k in 0..200 {
            let x = -0.6 + 1.8 * k as f64 / 200.0;
            assert!(b.value(x).abs() <= 1.7 + 1e-15);
            let h = 1e-6;
            let fd = (b.value(x + h) - b.value(x - h)) / (2.0 * h);
            assert!((fd - b.derivative(x)).abs() <= 1e-6, "x={x}");
        }
        assert_eq!(b.value(1.2), 0.0);
    }

    #[test]
    fn davie_examples() {
        let s = PermutationSpec::unit(vec![1]).unwrap();
        assert!((davie_bound(&s, 1.0) - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        let near = PermutationSpec::new(vec![2, 1], vec![1.0, 1.1], vec![1.0, 2.0]).unwrap();
        let far = PermutationSpec::new(vec![2, 1], vec![1.0, 1.5], vec![1.0, 2.0]).unwrap();
        assert!(davie_bound(&near, 1.0) > davie_bound(&far, 1.0));
    }

    #[test]
    fn even_bump_single_point_vanishes() {
        let s = PermutationSpec::unit(vec![1]).unwrap();
        let b = [BumpFactor::new(1.0, 0.0, 1.5)];
        let e = direct_expectation(&s, &b, Method::MonteCarlo { samples: 20_000 }, 3).unwrap();
        assert!(e.mean.abs() <= 4.0 * e.std_error);
        let q = direct_expectation(&s, &b, Method::Quadrature { nodes: 20 }, 0).unwrap();
        assert!(q.mean.abs() < 1e-15);
    }

    #[test]
    fn zero_factor_is_exactly_zero() {
        let s = PermutationSpec::unit(vec![2, 1, 3]).unwrap();
        let b = [BumpFactor::new(0.0, 0.0, 1.0); 3];
        let e = ibp_expectation(&s, &b, Method::MonteCarlo { samples: 1000 }, 1).unwrap();
        assert_eq!(e.total.mean, 0.0);
        assert_eq!(e.total.std_error, 0.0);
    }

    #[test]
    fn guards() {
        let s = PermutationSpec::unit(vec![1, 2, 3]).unwrap();
        let b = [BumpFactor::standard(); 3];
        assert!(direct_expectation(&s, &b, Method::Quadrature { nodes: 10 }, 0).is_err());
        assert!(direct_expectation(&s, &b[..2], Method::MonteCarlo { samples: 10 }, 0).is_err());
    }

    #[test]
    fn two_point_quadrature_identity() {
        let b = [BumpFactor::new(1.0, 0.4, 12.0); 2];
        for sigma in [vec![1, 2], vec![2, 1]] {
            let s = PermutationSpec::new(sigma, vec![1.0, 2.0], vec![1.0, 2.0]).unwrap();
            let d = direct_expectation(&s, &b, Method::Quadrature { nodes: 30 }, 0).unwrap().mean;
            let i = ibp_expectation(&s, &b, Method::Quadrature { nodes: 30 }, 0).unwrap().total.mean;
            assert!((d - i).abs() <= 1e-6 * d.abs(), "{d} vs {i}");
        }
    }

    #[test]
    fn cholesky_reconstructs() {
        let cov = vec![vec![1.0, 0.5], vec![0.5, 2.0]];
        let l = cholesky(&cov);
        for i in 0..2 {
            for j in 0..2 {
                let v: f64 = (0..2).map(|k| l[i][k] * l[j][k]).sum();
                assert!((v - cov[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn corollary_zero_drift() {
        let w = TimeWindow::rect(0.5, 1.0, 0.5, 1.0);
        let r = corollary_check(1, &w, &BumpFactor::new(0.0, 0.5, 2.0), None, 100, 1).unwrap();
        assert_eq!(r.lhs.mean, 0.0);
    }
}
