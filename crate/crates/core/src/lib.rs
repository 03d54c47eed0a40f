//! Numerical Lax-Oleinik semigroups for `H(x, Du) + λ(x) u = c` on the circle
//! with a discount `λ` that changes sign.
//!
//! * [`domain`]: periodic grids and grid functions
//! * [`model`]: Hamiltonian data, tabulated Lagrangian, subsolution residuals
//! * [`semigroup`]: backward/forward semi-Lagrangian steps and long-time iteration
//! * [`stationary`]: maximal/minimal solutions, critical value, Aubry set
//! * [`contactflow`]: contact Hamiltonian flow, fixed points, shooting oracle
//! * [`report`]: deterministic JSON/CSV/SVG output

pub mod contactflow;
pub mod domain;
pub mod error;
pub mod model;
pub mod report;
pub mod semigroup;
pub mod stationary;

pub use domain::{sup_diff, GridFunction, PeriodicGrid};
pub use error::{Error, Result};
pub use model::{legendre_transform, Builtin, DifferentiableModel, LagrangianTable, Model, ModelSpec};
pub use semigroup::{
    backward_step, evolve, evolve_with, forward_step, Direction, EvolveReport, EvolveStatus, SemigroupParams,
};
