//! Gaussian heat kernels `E` of a grid cell and their derivatives `B`.

use std::f64::consts::PI;

/// Per-factor constant of the L¹ bound `∫|B| ≤ C0 v^{-1/2}`.
pub const C0: f64 = 2.0 * std::f64::consts::SQRT_2;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Heat kernel with variance `v = Δs·Δt` in each of `dim` components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelCell {
    pub variance: f64,
    pub dim: usize,
}

impl KernelCell {
    pub fn new(variance: f64, dim: usize) -> Self {
        assert!(variance > 0.0, "kernel variance must be positive");
        Self { variance, dim }
    }

    pub fn log_density(&self, z: &[f64]) -> f64 {
        debug_assert_eq!(z.len(), self.dim);
        let sq: f64 = z.iter().map(|x| x * x).sum();
        -0.5 * self.dim as f64 * (LN_2PI + self.variance.ln()) - sq / (2.0 * self.variance)
    }

    pub fn density(&self, z: &[f64]) -> f64 {
        self.log_density(z).exp()
    }

    /// `∂E/∂z_l`, 1-based `l`.
    pub fn gradient_component(&self, z: &[f64], l: usize) -> f64 {
        let zl = z[l - 1];
        if zl == 0.0 {
            return 0.0;
        }
        let sign = if zl > 0.0 { -1.0 } else { 1.0 };
        sign * (self.log_density(z) + (zl.abs() / self.variance).ln()).exp()
    }

    /// Exact `∫|∂E/∂z_l| dz = sqrt(2/π) v^{-1/2}`.
    pub fn abs_gradient_l1(&self, _l: usize) -> f64 {
        (2.0 / (PI * self.variance)).sqrt()
    }

    /// `B/E = -z_l / v`.
    #[inline]
    pub fn hermite_weight(&self, z: &[f64], l: usize) -> f64 {
        -z[l - 1] / self.variance
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn density_at_origin() {
        let k = KernelCell::new(1.0, 1);
        assert!((k.density(&[0.0]) - 0.398_942_280_401_432_7).abs() < 1e-15);
    }

    #[test]
    fn gradient_values() {
        let k = KernelCell::new(1.0, 1);
        assert_eq!(k.gradient_component(&[0.0], 1), 0.0);
        let expected = -(-0.5f64).exp() / (2.0 * PI).sqrt();
        assert!((k.gradient_component(&[1.0], 1) - expected).abs() < 1e-15);
        assert_eq!(k.hermite_weight(&[2.0], 1), -2.0);
        assert_eq!(k.hermite_weight(&[0.0], 1), 0.0);
    }

    #[test]
    fn l1_values() {
        assert!((KernelCell::new(1.0, 1).abs_gradient_l1(1) - 0.797_884_560_802_865_4).abs() < 1e-15);
        let v4 = KernelCell::new(4.0, 1).abs_gradient_l1(1);
        assert!((v4 - 0.797_884_560_802_865_4 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn l1_times_sqrt_v_is_constant() {
        let base = KernelCell::new(1.0, 1).abs_gradient_l1(1);
        for e in -4..=4 {
            let v = 10f64.powi(e);
            let k = KernelCell::new(v, 2);
            assert!((k.abs_gradient_l1(2) * v.sqrt() - base).abs() < 1e-14);
            assert!(k.abs_gradient_l1(1) <= C0 / v.sqrt());
        }
    }

    #[test]
    fn tiny_variance_does_not_overflow() {
        let k = KernelCell::new(1e-300, 1);
        assert_eq!(k.density(&[1.0]), 0.0);
        assert!(k.gradient_component(&[1e-160], 1).is_finite());
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_difference(
            v in 0.1..10.0f64,
            z in prop::collection::vec(-3.0..3.0f64, 1..4),
        ) {
            let k = KernelCell::new(v, z.len());
            for l in 1..=z.len() {
                let h = 1e-5;
                let mut up = z.clone();
                let mut dn = z.clone();
                up[l - 1] += h;
                dn[l - 1] -= h;
                let fd = (k.density(&up) - k.density(&dn)) / (2.0 * h);
                prop_assert!((fd - k.gradient_component(&z, l)).abs() <= 1e-6);
            }
        }

        #[test]
        fn gradient_is_weight_times_density(
            v in 1e-3..1e3f64,
            z in prop::collection::vec(-5.0..5.0f64, 1..4),
        ) {
            let k = KernelCell::new(v, z.len());
            for l in 1..=z.len() {
                let g = k.gradient_component(&z, l);
                let p = k.hermite_weight(&z, l) * k.density(&z);
                prop_assert!((g - p).abs() <= 1e-14 * g.abs().max(1e-300));
            }
        }

        #[test]
        fn scaling_identity(v in 1e-2..1e2f64, z in -4.0..4.0f64) {
            let a = KernelCell::new(v, 1).density(&[z]);
            let b = KernelCell::new(1.0, 1).density(&[z / v.sqrt()]) / v.sqrt();
            prop_assert!((a - b).abs() <= 1e-13 * b.max(1e-300));
        }
    }
}
