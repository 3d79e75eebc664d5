//! Energy functionals, evaluated as diagnostics.

use crate::bulk::FieldState;
use crate::grid::{BoundaryTrace, Grid2D};
use crate::model::{ghat, ConstraintMode, PhysParams};
use crate::scalar::{fsum, Real};

/// Difference quotient along one axis: centered inside, one-sided at the ends.
fn partial<T: Real>(f: impl Fn(usize) -> T, k: usize, n: usize, h: T) -> T {
    if k == 0 {
        (f(1) - f(0)) / h
    } else if k + 1 == n {
        (f(n - 1) - f(n - 2)) / h
    } else {
        (f(k + 1) - f(k - 1)) / (T::two() * h)
    }
}

/// Bulk-plus-boundary energy
/// `int phi/2 |grad s|^2 + lambda c phi s^2/2 - lambda B phi c s^3/3 + int_G nu/2 (s - sbar)^2`.
pub fn energy_e1<T: Real>(state: &FieldState<T>, grid: &Grid2D<T>, p: &PhysParams<T>) -> T {
    let (nx, ny) = (grid.nx(), grid.ny());
    let lambda = p.reaction_rate;
    let third = T::one() / T::lit(3.0);
    let s = &state.s;
    let density = (0..grid.n_nodes()).map(|k| {
        let (i, j) = grid.ij(k);
        let dx = partial(|ii| s[grid.index(ii, j)], i, nx, grid.hx());
        let dy = partial(|jj| s[grid.index(i, jj)], j, ny, grid.hy());
        let (c, sv) = (state.c[k], s[k]);
        let phi = p.phi(c);
        let e = T::half() * phi * (dx * dx + dy * dy) + lambda * c * phi * sv * sv * T::half()
            - lambda * p.porosity_slope * phi * c * sv * sv * sv * third;
        grid.node_weight(k) * e
    });
    let bulk = fsum(density);
    let trace = grid.exposed_trace();
    bulk + boundary_e1(state, &trace, p)
}

fn boundary_e1<T: Real>(state: &FieldState<T>, trace: &BoundaryTrace<T>, p: &PhysParams<T>) -> T {
    let vals: Vec<T> = trace
        .points()
        .iter()
        .zip(&state.r)
        .map(|(pt, r)| {
            let d = state.s[pt.node] - p.ambient_so2;
            T::half() * p.nu(*r) * d * d
        })
        .collect();
    trace.integrate(&vals)
}

/// Surface energy `int_G (W(r) + Psi(r) + Ghat(r, c, s) - F r)`.
///
/// `W` is the indicator of `[0, R0]` in box mode, so an infeasible rugosity
/// yields `+inf`.
pub fn energy_e2<T: Real>(state: &FieldState<T>, grid: &Grid2D<T>, p: &PhysParams<T>) -> T {
    let trace = grid.exposed_trace();
    let vals: Vec<T> = trace
        .points()
        .iter()
        .zip(&state.r)
        .map(|(pt, &r)| {
            let w = match p.constraint {
                ConstraintMode::Box if r < T::zero() || r > p.rugosity_cap => T::infinity(),
                _ => T::zero(),
            };
            let (c, s) = (state.c[pt.node], state.s[pt.node]);
            w + p.potential.value(r) + ghat(r, c, s, p) - p.forcing * r
        })
        .collect();
    trace.integrate(&vals)
}
