//! Free molecular flow in the slab `(-1, 1)` and the unit disk under the
//! Maxwell-type boundary condition: explicit steady states, the boundary-flux
//! renewal equation, characteristic reconstruction of the distribution,
//! damped flow, Monte Carlo particle simulation and decay-rate analysis.
//!
//! Geometry and kernel evaluation are generic over the scalar type through
//! [`Real`]; the solvers work in `f64`.

// Index loops mirror the discretisation formulas; NaN must fail range checks.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod flux_solver;
pub mod geometry;
pub mod kernels;
pub mod montecarlo;
pub mod num;
pub mod quadrature;
pub mod rng;
pub mod stats;
pub mod steady_state;
pub mod transport;

pub use error::{Error, Result};
pub use geometry::{BoundaryPoint, Dim, DomainGeometry, PhasePoint, SpecularOrbit, Wall};
pub use num::Real;

/// Phase point in double precision.
pub type PhasePoint64 = PhasePoint<f64>;
/// Phase point in single precision.
pub type PhasePoint32 = PhasePoint<f32>;
/// Specular orbit in double precision.
pub type SpecularOrbit64 = SpecularOrbit<f64>;
/// Specular orbit in single precision.
pub type SpecularOrbit32 = SpecularOrbit<f32>;
/// Boundary point in double precision.
pub type BoundaryPoint64 = BoundaryPoint<f64>;
