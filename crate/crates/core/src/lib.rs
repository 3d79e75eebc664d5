//! Deterministic 2D simulator for marble sulphation with surface rugosity.
//!
//! The bulk carries the SO2 concentration `s` and the calcite density `c`; the
//! exposed part of the boundary carries the rugosity `r`, which raises the
//! boundary permeability and therefore the SO2 intake. All numerics are
//! generic over [`Real`]; the `f64` aliases below are what the driver uses.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bulk;
pub mod config;
pub mod diagnostics;
pub mod driver;
pub mod error;
pub mod grid;
pub mod model;
pub mod output;
pub mod scalar;
pub mod surface;

pub use error::{Result, SimError};
pub use scalar::Real;

pub type PhysParams = model::PhysParams<f64>;
pub type Grid2D = grid::Grid2D<f64>;
pub type FieldState = bulk::FieldState<f64>;
pub type LinearSystem = bulk::LinearSystem<f64>;
