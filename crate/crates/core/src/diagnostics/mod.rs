//! Invariant auditing, energy functionals and manufactured-solution studies.

mod audit;
mod energy;
mod mms;

pub use audit::{audit_step, AuditEntry, AuditOptions, InvariantReport, Violation, ViolationKind};
pub use energy::{energy_e1, energy_e2};
pub use mms::{
    mms_convergence, run_mms_level, ConstantSolution, ConvergenceRow, ConvergenceTable, Manufactured,
    MmsLevel, MmsOptions, Study, TrigSolution,
};
