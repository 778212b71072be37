//! Gradient-flow quantization of probability densities on the unit interval.
//!
//! The crate covers the N-particle flow of the quadratic quantization energy,
//! its Lagrangian and Eulerian continuum limits, exact one-dimensional
//! transport distances, and the numerical checks built on top of them.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod convexity;
pub mod density;
pub mod energy;
pub mod field_flow;
pub mod error;
pub mod interp;
pub mod particle_flow;
pub mod quadrature;
pub mod transport;

pub use density::{Density, DensityNorms, DensitySpec, ExtensionMode};
pub use energy::{BoundaryConvention, EnergyReport, LagrangianField, ParticleState};
pub use error::{QuantError, Result};
