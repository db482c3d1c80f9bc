//! Numerical backends: Gaussian quadrature, seeded Monte Carlo and the
//! singular simplex integrals with their Gamma-function closed forms.

pub mod montecarlo;
pub mod quadrature;
pub mod simplex;

pub use montecarlo::{combine_signed, monte_carlo, monte_carlo_sharded, Accumulator, McEstimate};
pub use quadrature::{gauss_hermite, gauss_hermite_rule, gauss_legendre, QuadRule};
pub use simplex::{corollary_rhs, simplex_singular_integral, BoundKind, GammaBound, TimeWindow};
