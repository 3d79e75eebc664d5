//! Rugosity on the exposed boundary: initial profiles and time stepping.

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use crate::error::{Result, SimError};
use crate::grid::BoundaryTrace;
use crate::model::{g_reaction, project_box, ConstraintMode, PhysParams};
use crate::scalar::Real;

/// Deterministic stream of the run: xoshiro256** seeded through SplitMix64.
///
/// Uniform variates are `((x >> 11) + 0.5) / 2^53`, which lies strictly
/// inside `(0, 1)`.
#[derive(Clone, Debug)]
pub struct RunRng(Xoshiro256StarStar);

impl RunRng {
    pub fn new(seed: u64) -> Self {
        Self(Xoshiro256StarStar::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}

/// How the rugosity is initialized along the exposed trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RugosityInit<T> {
    Constant(T),
    /// `lo * r0` below `split` (in the arc coordinate), `hi * r0` from it on.
    Piecewise { lo: T, hi: T, split: T },
    /// Independent Weibull draws with scale `r0` and shape `m`.
    WeibullRandom,
}

impl<T: Real> RugosityInit<T> {
    pub fn piecewise_default() -> Self {
        RugosityInit::Piecewise {
            lo: T::half(),
            hi: T::two(),
            split: T::half(),
        }
    }
}

/// Inverse-CDF Weibull sample `r0 (ln(1/(1-u)))^(1/m)`.
pub fn weibull_sample<T: Real>(u: T, r0: T, m: T) -> Result<T> {
    if !(u > T::zero() && u < T::one()) {
        return Err(SimError::Domain {
            what: "uniform variate",
            value: u.to_f64_lossy(),
            lo: 0.0,
            hi: 1.0,
        });
    }
    let tail = -(-u).ln_1p();
    Ok(r0 * tail.powf(m.recip()))
}

/// Initial rugosity at every trace point. `r0` and `m` come from the
/// Weibull parameters of `p`; random draws are consumed in trace order.
pub fn init_rugosity<T: Real>(
    trace: &BoundaryTrace<T>,
    init: RugosityInit<T>,
    p: &PhysParams<T>,
    rng: &mut RunRng,
) -> Result<Vec<T>> {
    let r0 = p.weibull_scale;
    let mut out = Vec::with_capacity(trace.len());
    for pt in trace.points() {
        let v = match init {
            RugosityInit::Constant(v) => v,
            RugosityInit::Piecewise { lo, hi, split } => {
                if pt.coord < split {
                    lo * r0
                } else {
                    hi * r0
                }
            }
            RugosityInit::WeibullRandom => {
                let u = T::lit(rng.next_open01());
                weibull_sample(u, r0, p.weibull_shape)?
            }
        };
        let v = match p.constraint {
            ConstraintMode::Box => v.max(T::zero()).min(p.rugosity_cap),
            ConstraintMode::Free => v,
        };
        out.push(v);
    }
    Ok(out)
}

/// One explicit step of `dr/dt + xi + Psi'(r) + G(r, c, s) = F`, followed by
/// projection onto `[0, R0]` in box mode. Returns `(r, xi)`.
pub fn step_r<T: Real>(
    r_n: &[T],
    c_trace: &[T],
    s_trace: &[T],
    dt: T,
    p: &PhysParams<T>,
) -> (Vec<T>, Vec<T>) {
    let mut r = Vec::with_capacity(r_n.len());
    let mut xi = Vec::with_capacity(r_n.len());
    for ((&rn, &c), &s) in r_n.iter().zip(c_trace).zip(s_trace) {
        let rate = p.potential.derivative(rn) + g_reaction(rn, c, s, p) - p.forcing;
        let trial = rn - dt * rate;
        let (next, mult) = match p.constraint {
            ConstraintMode::Box => project_box(trial, p, dt),
            ConstraintMode::Free => (trial, T::zero()),
        };
        r.push(next);
        xi.push(mult);
    }
    (r, xi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, EdgeTags};

    fn unit() -> PhysParams<f64> {
        PhysParams {
            porosity_offset: 1.0,
            porosity_slope: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn weibull_quantiles() {
        assert!(weibull_sample(1e-300, 1.0, 10.0).unwrap() < 1e-12);
        let u = 1.0 - (-1.0f64).exp();
        assert!((weibull_sample(u, 0.37, 10.0).unwrap() - 0.37).abs() < 1e-12);
        // (ln 2)^0.1
        let v: f64 = weibull_sample(0.5, 1.0, 10.0).unwrap();
        assert!((v - 0.964_012_235_467_789_7).abs() < 1e-12, "{v}");
        assert!(weibull_sample(0.0, 1.0, 10.0).is_err());
        assert!(weibull_sample(1.0, 1.0, 10.0).is_err());
    }

    #[test]
    fn weibull_inverts_cdf() {
        for u in [0.01, 0.2, 0.5, 0.77, 0.999] {
            let x = weibull_sample(u, 0.2, 3.5).unwrap();
            let cdf = 1.0 - (-(x / 0.2f64).powf(3.5)).exp();
            assert!((cdf - u).abs() < 1e-13);
        }
    }

    #[test]
    fn open_interval_variates() {
        let mut rng = RunRng::new(7);
        for _ in 0..10_000 {
            let u = rng.next_open01();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn piecewise_profile() {
        let grid = build_grid::<f64>(5, 5, EdgeTags::left_exposed()).unwrap();
        let p = PhysParams::<f64>::default();
        let r = init_rugosity(
            &grid.exposed_trace(),
            RugosityInit::piecewise_default(),
            &p,
            &mut RunRng::new(0),
        )
        .unwrap();
        let expected: [f64; 5] = [0.1, 0.1, 0.4, 0.4, 0.4];
        for (a, b) in r.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_zero_profile() {
        let grid = build_grid::<f64>(4, 9, EdgeTags::left_exposed()).unwrap();
        let r = init_rugosity(
            &grid.exposed_trace(),
            RugosityInit::Constant(0.0),
            &PhysParams::default(),
            &mut RunRng::new(0),
        )
        .unwrap();
        assert_eq!(r, vec![0.0; 9]);
    }

    #[test]
    fn seeded_profiles_reproduce() {
        let grid = build_grid::<f64>(3, 33, EdgeTags::left_exposed()).unwrap();
        let tr = grid.exposed_trace();
        let p = PhysParams::<f64>::default();
        let draw = |seed| init_rugosity(&tr, RugosityInit::WeibullRandom, &p, &mut RunRng::new(seed)).unwrap();
        assert_eq!(draw(11), draw(11));
        assert_ne!(draw(11), draw(12));
    }

    #[test]
    fn no_growth_without_reaction() {
        let p = unit();
        let r0 = vec![0.1, 0.5, 2.0];
        let (r, xi) = step_r(&r0, &[0.0, 0.0, 0.0], &[1.0, 0.5, 0.2], 1e-3, &p);
        assert_eq!(r, r0);
        assert_eq!(xi, vec![0.0; 3]);
        let (r, _) = step_r(&r0, &[1.0, 0.5, 0.2], &[0.0, 0.0, 0.0], 1e-3, &p);
        assert_eq!(r, r0);
    }

    #[test]
    fn one_euler_step() {
        let p = unit();
        let (r, xi) = step_r(&[0.0], &[1.0], &[1.0], 1e-3, &p);
        assert!((r[0] - 0.03).abs() < 1e-15);
        assert_eq!(xi[0], 0.0);

        let boxed = PhysParams {
            constraint: ConstraintMode::Box,
            rugosity_cap: 0.02,
            ..unit()
        };
        let (r, xi) = step_r(&[0.0], &[1.0], &[1.0], 1e-3, &boxed);
        assert_eq!(r[0], 0.02);
        assert!((xi[0] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn free_mode_residual_vanishes() {
        let p = PhysParams::<f64>::default();
        let r0 = [0.0, 0.3, 1.7];
        let c = [0.2, 0.9, 0.5];
        let s = [0.4, 0.1, 1.0];
        let dt = 2e-4;
        let (r, _) = step_r(&r0, &c, &s, dt, &p);
        for k in 0..3 {
            let res = (r[k] - r0[k]) / dt + g_reaction(r0[k], c[k], s[k], &p);
            assert!(res.abs() < 1e-10, "{res}");
            assert!(r[k] >= r0[k]);
        }
    }

    #[test]
    fn potential_and_forcing_enter_the_rate() {
        let p = PhysParams::<f64> {
            potential: crate::model::Potential {
                coeffs: [0.0, 1.0, 0.0, 0.0],
            },
            forcing: 3.0,
            ..unit()
        };
        let (r, _) = step_r(&[1.0], &[0.0], &[0.0], 0.1, &p);
        assert!((r[0] - 1.2).abs() < 1e-14);
    }
}
