//! Bulk unknowns: calcite kinetics and the implicit SO2 solve.

mod assembly;
mod cg;
mod kinetics;
mod step;

pub use assembly::{assemble_s_system, Assembly, BalanceTerms, Hooks, LinearSystem, RobinData};
pub use cg::{cg_solve, CgOutcome, DEFAULT_REL_TOL};
pub use kinetics::c_update_exact;
pub use step::{step, StepOutcome, StepSettings};

use crate::scalar::Real;

/// Solution at one time level.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState<T> {
    pub t: T,
    /// SO2 concentration at every node.
    pub s: Vec<T>,
    /// Calcite density at every node.
    pub c: Vec<T>,
    /// Rugosity on the exposed trace.
    pub r: Vec<T>,
    /// Constraint multiplier on the exposed trace.
    pub xi: Vec<T>,
}

impl<T: Real> FieldState<T> {
    /// Uniform bulk fields with the given boundary rugosity.
    pub fn uniform(n_nodes: usize, s: T, c: T, r: Vec<T>) -> Self {
        let n_trace = r.len();
        Self {
            t: T::zero(),
            s: vec![s; n_nodes],
            c: vec![c; n_nodes],
            r,
            xi: vec![T::zero(); n_trace],
        }
    }
}
