use std::fmt;

use crate::bulk::{BalanceTerms, FieldState};
use crate::model::{ConstraintMode, PhysParams};
use crate::scalar::Real;

/// Slack on the SO2 bounds.
pub const S_TOL: f64 = 1e-10;
/// Slack on calcite and rugosity bounds.
pub const BOUND_TOL: f64 = 1e-12;
/// Largest accepted relative balance residual.
pub const BALANCE_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    NegativeS,
    CeilingS,
    CalciteRange,
    CalciteIncrease,
    RugosityRange,
    Balance,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::NegativeS => "s<0",
            ViolationKind::CeilingS => "s>S0",
            ViolationKind::CalciteRange => "c outside [0,C0]",
            ViolationKind::CalciteIncrease => "c increased",
            ViolationKind::RugosityRange => "r outside [0,R0]",
            ViolationKind::Balance => "balance residual",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub step: usize,
    pub kind: ViolationKind,
    /// Node (bulk checks) or trace index (rugosity); `None` for global checks.
    pub node: Option<usize>,
    /// Distance beyond the admissible bound.
    pub magnitude: f64,
}

/// Extremes of one audited step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuditEntry {
    pub step: usize,
    pub t: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub balance_residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuditOptions {
    /// Check `s <= S0` (meaningful when `B <= 1/S0` holds).
    pub ceiling: bool,
}

/// Append-only record of a run's invariant checks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InvariantReport {
    pub entries: Vec<AuditEntry>,
    pub violations: Vec<Violation>,
}

impl InvariantReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    pub fn worst_balance(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.balance_residual)
            .fold(0.0, f64::max)
    }

    /// Short human-readable summary, one line per aspect.
    pub fn summary(&self) -> Vec<String> {
        let fold = |f: fn(&AuditEntry) -> f64, init: f64, op: fn(f64, f64) -> f64| {
            self.entries.iter().map(f).fold(init, op)
        };
        vec![
            format!("steps_audited = {}", self.entries.len()),
            format!("violations = {}", self.violations.len()),
            format!("s_min = {:e}", fold(|e| e.s_min, f64::INFINITY, f64::min)),
            format!("s_max = {:e}", fold(|e| e.s_max, f64::NEG_INFINITY, f64::max)),
            format!("c_min = {:e}", fold(|e| e.c_min, f64::INFINITY, f64::min)),
            format!("r_max = {:e}", fold(|e| e.r_max, f64::NEG_INFINITY, f64::max)),
            format!("worst_balance = {:e}", self.worst_balance()),
        ]
    }
}

fn extremes<T: Real>(v: &[T]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
        let x = x.to_f64_lossy();
        (lo.min(x), hi.max(x))
    })
}

/// Checks one accepted step and appends the outcome to `report`.
///
/// `previous` enables the calcite monotonicity check; `balance` the balance
/// residual check. Returns the number of new violations. The state is only
/// read.
pub fn audit_step<T: Real>(
    report: &mut InvariantReport,
    step: usize,
    state: &FieldState<T>,
    previous: Option<&FieldState<T>>,
    p: &PhysParams<T>,
    balance: Option<&BalanceTerms<T>>,
    opts: AuditOptions,
) -> usize {
    let before = report.violations.len();
    let mut flag = |kind, node, magnitude: f64| {
        report.violations.push(Violation {
            step,
            kind,
            node,
            magnitude,
        })
    };
    let s0 = p.so2_ceiling.to_f64_lossy();
    let c0 = p.calcite_max.to_f64_lossy();
    let r0 = p.rugosity_cap.to_f64_lossy();
    for (k, s) in state.s.iter().enumerate() {
        let s = s.to_f64_lossy();
        if !(s >= -S_TOL) {
            flag(ViolationKind::NegativeS, Some(k), -s);
        }
        if opts.ceiling && !(s <= s0 + S_TOL) {
            flag(ViolationKind::CeilingS, Some(k), s - s0);
        }
    }
    for (k, c) in state.c.iter().enumerate() {
        let c = c.to_f64_lossy();
        if !(c >= -BOUND_TOL) {
            flag(ViolationKind::CalciteRange, Some(k), -c);
        } else if !(c <= c0 + BOUND_TOL) {
            flag(ViolationKind::CalciteRange, Some(k), c - c0);
        }
    }
    if let Some(prev) = previous {
        for (k, (c, cp)) in state.c.iter().zip(&prev.c).enumerate() {
            if c > cp {
                flag(ViolationKind::CalciteIncrease, Some(k), (*c - *cp).to_f64_lossy());
            }
        }
    }
    let boxed = p.constraint == ConstraintMode::Box;
    for (k, r) in state.r.iter().enumerate() {
        let r = r.to_f64_lossy();
        if !(r >= -BOUND_TOL) {
            flag(ViolationKind::RugosityRange, Some(k), -r);
        } else if boxed && !(r <= r0 + BOUND_TOL) {
            flag(ViolationKind::RugosityRange, Some(k), r - r0);
        }
    }
    let balance_residual = balance.map_or(0.0, |b| b.relative().to_f64_lossy());
    if !(balance_residual <= BALANCE_TOL) {
        flag(ViolationKind::Balance, None, balance_residual);
    }

    let (s_min, s_max) = extremes(&state.s);
    let (c_min, c_max) = extremes(&state.c);
    let (r_min, r_max) = extremes(&state.r);
    report.entries.push(AuditEntry {
        step,
        t: state.t.to_f64_lossy(),
        s_min,
        s_max,
        c_min,
        c_max,
        r_min,
        r_max,
        balance_residual,
    });
    report.violations.len() - before
}

#[cfg(test)]
mod tests {
    use super::*;

    const OPTS: AuditOptions = AuditOptions { ceiling: true };

    #[test]
    fn rest_state_passes() {
        let st = FieldState::<f64>::uniform(16, 0.0, 0.0, vec![0.0; 4]);
        let mut rep = InvariantReport::default();
        let bal = BalanceTerms::default();
        let n = audit_step(&mut rep, 1, &st, Some(&st), &PhysParams::default(), Some(&bal), OPTS);
        assert_eq!(n, 0);
        assert!(rep.passed());
        assert_eq!(rep.entries[0].balance_residual, 0.0);
    }

    #[test]
    fn ceiling_flag_reports_magnitude() {
        let p = PhysParams::<f64>::default();
        let mut st = FieldState::uniform(9, 0.2, 0.5, vec![0.1; 3]);
        st.s[4] = p.so2_ceiling + 0.1;
        let mut rep = InvariantReport::default();
        audit_step(&mut rep, 3, &st, None, &p, None, OPTS);
        assert_eq!(rep.violations.len(), 1);
        let v = &rep.violations[0];
        assert_eq!(v.kind, ViolationKind::CeilingS);
        assert_eq!(v.node, Some(4));
        assert_eq!(v.step, 3);
        assert!((v.magnitude - 0.1).abs() < 1e-12);

        // not checked when the ceiling is not guaranteed
        let mut rep = InvariantReport::default();
        audit_step(&mut rep, 3, &st, None, &p, None, AuditOptions { ceiling: false });
        assert!(rep.passed());
    }

    #[test]
    fn detects_every_kind() {
        let p = PhysParams::<f64> {
            constraint: ConstraintMode::Box,
            rugosity_cap: 1.0,
            ..Default::default()
        };
        let prev = FieldState::uniform(4, 0.0, 0.5, vec![0.5; 2]);
        let mut st = prev.clone();
        st.s[0] = -1e-9;
        st.c[1] = 0.6;
        st.c[2] = 1.5;
        st.r[0] = 1.1;
        let bal = BalanceTerms {
            storage_new: 1.0,
            ..Default::default()
        };
        let mut rep = InvariantReport::default();
        audit_step(&mut rep, 0, &st, Some(&prev), &p, Some(&bal), OPTS);
        for kind in [
            ViolationKind::NegativeS,
            ViolationKind::CalciteIncrease,
            ViolationKind::CalciteRange,
            ViolationKind::RugosityRange,
            ViolationKind::Balance,
        ] {
            assert!(rep.count(kind) >= 1, "{kind}");
        }
    }

    #[test]
    fn audit_does_not_mutate() {
        let st = FieldState::<f64>::uniform(9, 0.3, 0.5, vec![0.1; 3]);
        let copy = st.clone();
        let mut rep = InvariantReport::default();
        audit_step(&mut rep, 0, &st, None, &PhysParams::default(), None, OPTS);
        assert_eq!(st, copy);
    }
}
