#![allow(dead_code)]

use rand_distr::{Distribution, Gamma};
use sheet_core::rng::CounterRng;

/// Adaptive Simpson with Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 50)
}

/// `{i : σ(i) < σ(k) for some k > i}` by scanning all pairs.
pub fn crossing_rows(sigma: &[usize]) -> Vec<usize> {
    (0..sigma.len()).filter(|&i| (i + 1..sigma.len()).any(|k| sigma[i] < sigma[k])).map(|i| i + 1).collect()
}

pub fn factorial(n: u32) -> u128 {
    (1..=n as u128).product()
}

/// `∫ ∏_{i=0}^{n} g_i^{-1/2}` over gaps `g_i > 0` with `Σ g_i = len`, by
/// importance sampling from `Dirichlet(α, ..., α)` with `α = 0.55`, given
/// `Γ(α)` and `Γ((n+1)α)`.
///
/// Returns `(mean, standard error)`.
pub fn dirichlet_simplex_oracle(
    n: usize,
    len: f64,
    samples: u64,
    seed: u64,
    gamma_alpha: f64,
    gamma_sum: f64,
) -> (f64, f64) {
    const ALPHA: f64 = 0.55;
    let parts = n + 1;
    let gamma = Gamma::new(ALPHA, 1.0).unwrap();
    // B(α) = Γ(α)^{n+1} / Γ((n+1)α)
    let norm = gamma_alpha.powi(parts as i32) / gamma_sum;
    let scale = len.powf(n as f64 - 0.5 * parts as f64);
    let (mut sum, mut sq) = (0.0, 0.0);
    let mut rng = CounterRng::new(seed);
    let mut x = vec![0.0; parts];
    for _ in 0..samples {
        for v in x.iter_mut() {
            *v = gamma.sample(&mut rng);
        }
        let total: f64 = x.iter().sum();
        let w: f64 = norm * x.iter().map(|v| (v / total).powf(0.5 - ALPHA)).product::<f64>();
        sum += w;
        sq += w * w;
    }
    let n_f = samples as f64;
    let mean = sum / n_f;
    let var = (sq / n_f - mean * mean) * n_f / (n_f - 1.0);
    (scale * mean, scale * (var / n_f).sqrt())
}

pub fn report(index: usize, title: &str, pass: bool, detail: &str) {
    println!("criterion {index:>2} {:<4} {title}: {detail}", if pass { "PASS" } else { "FAIL" });
}
