//! Jacobi-preconditioned conjugate gradients.

use crate::bulk::LinearSystem;
use crate::error::{Result, SimError};
use crate::scalar::Real;

pub const DEFAULT_REL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct CgOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    /// True relative residual `|b - A x| / |b|` of the returned iterate.
    pub residual: T,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

/// Solves `A x = b` for symmetric positive-definite `A`, starting from `x0`.
///
/// Stops once `|b - A x|_2 <= rel_tol |b|_2`. `max_iter = None` means `10 n`.
/// A zero right-hand side returns the zero vector.
pub fn cg_solve<T: Real>(
    sys: &LinearSystem<T>,
    x0: &[T],
    rel_tol: T,
    max_iter: Option<usize>,
) -> Result<CgOutcome<T>> {
    let n = sys.dim();
    if x0.len() != n {
        return Err(SimError::Dimension {
            what: "cg initial guess",
            expected: n,
            got: x0.len(),
        });
    }
    let max_iter = max_iter.unwrap_or(10 * n.max(1));
    let b_norm = dot(&sys.rhs, &sys.rhs).sqrt();
    if !b_norm.is_finite() {
        return Err(SimError::NonFinite("cg right-hand side"));
    }
    if b_norm.is_zero() {
        return Ok(CgOutcome {
            x: vec![T::zero(); n],
            iterations: 0,
            residual: T::zero(),
        });
    }
    let inv_diag: Vec<T> = sys
        .diagonal()
        .into_iter()
        .map(|d| if d > T::zero() { d.recip() } else { T::one() })
        .collect();

    let mut x = x0.to_vec();
    let mut ax = vec![T::zero(); n];
    sys.apply(&x, &mut ax);
    let mut r: Vec<T> = sys.rhs.iter().zip(&ax).map(|(b, a)| *b - *a).collect();
    let target = rel_tol * b_norm;
    let mut history = Vec::new();
    let mut r_norm = dot(&r, &r).sqrt();
    let mut iterations = 0;
    if r_norm > target {
        let mut z: Vec<T> = r.iter().zip(&inv_diag).map(|(r, d)| *r * *d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![T::zero(); n];
        loop {
            if iterations == max_iter {
                return Err(SimError::NoConvergence {
                    iterations,
                    history,
                });
            }
            sys.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > T::zero()) {
                // not positive definite, or breakdown
                return Err(SimError::NoConvergence {
                    iterations,
                    history,
                });
            }
            let alpha = rz / pap;
            for k in 0..n {
                x[k] = x[k] + alpha * p[k];
                r[k] = r[k] - alpha * ap[k];
            }
            iterations += 1;
            r_norm = dot(&r, &r).sqrt();
            history.push((r_norm / b_norm).to_f64_lossy());
            if r_norm <= target {
                break;
            }
            for k in 0..n {
                z[k] = r[k] * inv_diag[k];
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
        }
    }
    sys.apply(&x, &mut ax);
    let true_res = sys
        .rhs
        .iter()
        .zip(&ax)
        .map(|(b, a)| (*b - *a) * (*b - *a))
        .sum::<T>()
        .sqrt();
    Ok(CgOutcome {
        x,
        iterations,
        residual: true_res / b_norm,
    })
}
