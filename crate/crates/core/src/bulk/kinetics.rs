use crate::model::PhysParams;
use crate::scalar::Real;

/// Advances the calcite density over `dt` with the SO2 concentration frozen.
///
/// Exact solution of `dc/dt = -lambda (A + B c) c s`:
/// `A c / ((A + B c) e^x - B c)` with `x = lambda A s dt`, evaluated as
/// `c / (1 + expm1(x) (A + B c) / A)`. The denominator is at least one in
/// floating point, so the result never exceeds `c_n`.
#[inline]
pub fn c_update_exact<T: Real>(c_n: T, s_frozen: T, dt: T, p: &PhysParams<T>) -> T {
    let a = p.porosity_offset;
    let x = p.reaction_rate * a * s_frozen * dt;
    let growth = x.exp_m1() * (p.phi(c_n) / a);
    c_n / (T::one() + growth)
}
