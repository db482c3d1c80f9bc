//! Numerics for stochastic differential equations on the plane driven by a
//! Brownian sheet.
//!
//! The crate samples sheets on rectangular grids, solves the plane SDE with
//! its Malliavin and flow derivatives, reweights by the discrete
//! Doléans-Dade exponential, and implements the rectangle-selection
//! integration-by-parts expansion together with the shuffle and simplex
//! integrals used to bound it.

pub mod error;
pub mod estimate;
pub mod geometry;
pub mod ibp;
pub mod integrators;
pub mod kernels;
pub mod perm;
pub mod rng;
pub mod sde;
pub mod sheet;
pub mod shuffle;
pub mod special;

pub use error::{Error, Result};
pub use geometry::{precedes, Cell, GridPartition, PlanePoint};
pub use sheet::SheetSample;
