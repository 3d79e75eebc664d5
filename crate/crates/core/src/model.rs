//! Physical parameters and constitutive laws.
//!
//! Porosity is affine in the calcite density, `phi(c) = A + B c`. The boundary
//! permeability `nu(r)` grows with rugosity following either a linear or a
//! parabolic law anchored at `nu(0) = nu0` and `nu(rl) = nul`.

use crate::error::{Result, SimError};
use crate::scalar::Real;

/// Shape of the permeability law `nu(r)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NuLaw {
    #[default]
    Linear,
    Parabolic,
}

/// Internal constraint on the rugosity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ConstraintMode {
    /// No constraint, `W = 0`.
    #[default]
    Free,
    /// Indicator of `[0, R0]`, realized by projection.
    Box,
}

/// Cubic potential `Psi(r) = k0 + k1 r + k2 r^2 + k3 r^3`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Potential<T> {
    pub coeffs: [T; 4],
}

impl<T: Real> Potential<T> {
    pub fn zero() -> Self {
        Self {
            coeffs: [T::zero(); 4],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|k| k.is_zero())
    }

    pub fn value(&self, r: T) -> T {
        let [k0, k1, k2, k3] = self.coeffs;
        k0 + r * (k1 + r * (k2 + r * k3))
    }

    pub fn derivative(&self, r: T) -> T {
        let [_, k1, k2, k3] = self.coeffs;
        k1 + r * (T::two() * k2 + r * T::lit(3.0) * k3)
    }
}

/// Physical and constitutive constants.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysParams<T> {
    /// `A`: porosity at zero calcite.
    pub porosity_offset: T,
    /// `B`: porosity slope with respect to calcite density.
    pub porosity_slope: T,
    /// `lambda`: reaction rate.
    pub reaction_rate: T,
    /// `C0`: upper bound of the calcite density.
    pub calcite_max: T,
    /// `S0`: SO2 ceiling used by the global bound.
    pub so2_ceiling: T,
    /// `sbar`: ambient SO2 concentration on exposed edges.
    pub ambient_so2: T,
    /// `g`: rugosity growth coefficient.
    pub rugosity_rate: T,
    /// `R0`: rugosity cap for the box constraint.
    pub rugosity_cap: T,
    pub nu_law: NuLaw,
    /// Permeability of a flat surface.
    pub nu_flat: T,
    /// Permeability reached at `r = r_ref`.
    pub nu_ref: T,
    /// Rugosity scale of the permeability law.
    pub r_ref: T,
    pub weibull_shape: T,
    pub weibull_scale: T,
    pub constraint: ConstraintMode,
    pub potential: Potential<T>,
    /// Constant external rugosity forcing `F`.
    pub forcing: T,
}

impl<T: Real> Default for PhysParams<T> {
    fn default() -> Self {
        Self {
            porosity_offset: T::lit(0.1),
            porosity_slope: T::lit(-0.05),
            reaction_rate: T::lit(100.0),
            calcite_max: T::one(),
            so2_ceiling: T::one(),
            ambient_so2: T::one(),
            rugosity_rate: T::lit(30.0),
            rugosity_cap: T::lit(4.0),
            nu_law: NuLaw::Linear,
            nu_flat: T::lit(0.1),
            nu_ref: T::one(),
            r_ref: T::one(),
            weibull_shape: T::lit(10.0),
            weibull_scale: T::lit(0.2),
            constraint: ConstraintMode::Free,
            potential: Potential::zero(),
            forcing: T::zero(),
        }
    }
}

/// Bounds derived from a parameter set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstitutiveReport<T> {
    pub phi_min: T,
    pub phi_max: T,
    pub nu_at_zero: T,
    pub nu_at_rl: T,
}

impl<T: Real> PhysParams<T> {
    /// Unchecked porosity, for hot loops whose inputs are already known to
    /// lie in `[0, C0]`.
    #[inline]
    pub fn phi(&self, c: T) -> T {
        self.porosity_offset + self.porosity_slope * c
    }

    #[inline]
    pub fn nu(&self, r: T) -> T {
        nu_eval(r, self)
    }

    pub fn report(&self) -> ConstitutiveReport<T> {
        let at_zero = self.porosity_offset;
        let at_max = self.phi(self.calcite_max);
        ConstitutiveReport {
            phi_min: at_zero.min(at_max),
            phi_max: at_zero.max(at_max),
            nu_at_zero: self.nu(T::zero()),
            nu_at_rl: self.nu(self.r_ref),
        }
    }

    /// Checks every standing assumption; with `global_bound` also the
    /// condition `B <= 1/S0` needed for the upper bound on `s`.
    ///
    /// All violations are collected, each labelled with its assumption tag.
    pub fn validate(&self, global_bound: bool) -> Result<()> {
        let mut bad = Vec::new();
        let z = T::zero();
        let mut need = |ok: bool, msg: &str| {
            if !ok {
                bad.push(msg.to_string());
            }
        };
        let finite = [
            self.porosity_offset,
            self.porosity_slope,
            self.reaction_rate,
            self.calcite_max,
            self.so2_ceiling,
            self.ambient_so2,
            self.rugosity_rate,
            self.rugosity_cap,
            self.nu_flat,
            self.nu_ref,
            self.r_ref,
            self.weibull_shape,
            self.weibull_scale,
            self.forcing,
        ]
        .iter()
        .chain(self.potential.coeffs.iter())
        .all(|v| v.is_finite());
        need(finite, "all parameters must be finite");
        need(self.porosity_offset > z, "(A1): A>0");
        need(self.phi(self.calcite_max) > z, "(A1): A+B*C0>0");
        need(self.nu_flat >= z, "(A2): nu0>=0");
        need(self.nu_ref >= z, "(A2): nul>=0");
        need(self.r_ref > z, "rl>0");
        need(self.rugosity_rate >= z, "g>=0");
        need(self.reaction_rate > z, "lambda>0");
        need(self.calcite_max > z, "(A4): C0>0");
        need(self.so2_ceiling > z, "(A9): S0>0");
        need(self.ambient_so2 >= z, "(A3): sbar>=0");
        need(self.ambient_so2 <= self.so2_ceiling, "(A9): sbar<=S0");
        if global_bound {
            need(
                self.porosity_slope <= self.so2_ceiling.recip(),
                "(A9): B<=1/S0",
            );
        }
        need(self.weibull_shape > z, "weibull_m>0");
        need(self.weibull_scale >= z, "weibull_r0>=0");
        need(self.rugosity_cap > z, "(A7): R0>0");
        if bad.is_empty() {
            Ok(())
        } else {
            Err(SimError::Assumptions(bad))
        }
    }
}

const BOUND_SLACK: f64 = 1e-12;

/// Porosity `phi(c) = A + B c`, rejecting densities outside `[0, C0]`.
pub fn porosity<T: Real>(c: T, p: &PhysParams<T>) -> Result<T> {
    let slack = T::lit(BOUND_SLACK);
    if !(c >= -slack && c <= p.calcite_max + slack) {
        return Err(SimError::Domain {
            what: "calcite density",
            value: c.to_f64_lossy(),
            lo: 0.0,
            hi: p.calcite_max.to_f64_lossy(),
        });
    }
    Ok(p.phi(c))
}

/// Boundary permeability. Values beyond `rl` are extrapolated, not clamped.
#[inline]
pub fn nu_eval<T: Real>(r: T, p: &PhysParams<T>) -> T {
    let x = r / p.r_ref;
    let shape = match p.nu_law {
        NuLaw::Linear => x,
        NuLaw::Parabolic => x * x,
    };
    p.nu_flat + (p.nu_ref - p.nu_flat) * shape
}

/// Rugosity production `G(r, c, s) = -phi(c) c s (1 + r/(1+r)) g`.
#[inline]
pub fn g_reaction<T: Real>(r: T, c: T, s: T, p: &PhysParams<T>) -> T {
    let bracket = T::one() + r / (T::one() + r);
    -p.phi(c) * c * s * bracket * p.rugosity_rate
}

/// Antiderivative of [`g_reaction`] in `r`, vanishing at `r = 0`.
#[inline]
pub fn ghat<T: Real>(r: T, c: T, s: T, p: &PhysParams<T>) -> T {
    let prim = T::two() * r - r.ln_1p();
    -p.phi(c) * c * s * p.rugosity_rate * prim
}

/// Projects a trial rugosity onto `[0, R0]`; the second component is the
/// multiplier `(r_trial - r) / dt`.
#[inline]
pub fn project_box<T: Real>(r_trial: T, p: &PhysParams<T>, dt: T) -> (T, T) {
    let r = r_trial.max(T::zero()).min(p.rugosity_cap);
    if r == r_trial {
        (r, T::zero())
    } else {
        (r, (r_trial - r) / dt)
    }
}
