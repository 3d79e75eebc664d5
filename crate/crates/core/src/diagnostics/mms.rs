//! Manufactured-solution verification of the implicit SO2 solve.
//!
//! Calcite and rugosity are prescribed analytically; the SO2 equation gets
//! the matching volumetric source and exchange data through the assembly
//! hooks, so the discrete error against the manufactured `s` exposes the
//! convergence order of the scheme.

use std::fmt::Write as _;

use crate::bulk::{assemble_s_system, cg_solve, FieldState, Hooks, RobinData};
use crate::error::{Result, SimError};
use crate::grid::{build_grid, Edge, EdgeTags, Grid2D};
use crate::model::PhysParams;
use crate::scalar::Real;

/// Analytic fields driving a verification run.
pub trait Manufactured<T: Real>: Sync {
    fn s(&self, x1: T, x2: T, t: T) -> T;
    fn s_t(&self, x1: T, x2: T, t: T) -> T;
    fn grad_s(&self, x1: T, x2: T, t: T) -> (T, T);
    fn lap_s(&self, x1: T, x2: T, t: T) -> T;
    fn c(&self, x1: T, x2: T, t: T) -> T;
    fn c_t(&self, x1: T, x2: T, t: T) -> T;
    fn grad_c(&self, x1: T, x2: T, t: T) -> (T, T);
    /// Rugosity at arc coordinate `coord` of the exposed trace.
    fn r(&self, coord: T, t: T) -> T;
}

/// `s = e^-t cos(pi x1) cos(pi x2)`, `c = C0 (1/2 + cos(pi x1) e^-t / 4)`,
/// `r = rl (1/2 + sin(pi x2) / 4) (1 - e^-t)`.
#[derive(Clone, Copy, Debug)]
pub struct TrigSolution<T> {
    pub calcite_max: T,
    pub r_ref: T,
}

impl<T: Real> TrigSolution<T> {
    pub fn new(p: &PhysParams<T>) -> Self {
        Self {
            calcite_max: p.calcite_max,
            r_ref: p.r_ref,
        }
    }
}

impl<T: Real> Manufactured<T> for TrigSolution<T> {
    fn s(&self, x1: T, x2: T, t: T) -> T {
        let pi = T::PI();
        (-t).exp() * (pi * x1).cos() * (pi * x2).cos()
    }

    fn s_t(&self, x1: T, x2: T, t: T) -> T {
        -self.s(x1, x2, t)
    }

    fn grad_s(&self, x1: T, x2: T, t: T) -> (T, T) {
        let pi = T::PI();
        let e = (-t).exp();
        (
            -pi * e * (pi * x1).sin() * (pi * x2).cos(),
            -pi * e * (pi * x1).cos() * (pi * x2).sin(),
        )
    }

    fn lap_s(&self, x1: T, x2: T, t: T) -> T {
        let pi = T::PI();
        -T::two() * pi * pi * self.s(x1, x2, t)
    }

    fn c(&self, x1: T, _x2: T, t: T) -> T {
        let q = T::lit(0.25);
        self.calcite_max * (T::half() + q * (T::PI() * x1).cos() * (-t).exp())
    }

    fn c_t(&self, x1: T, _x2: T, t: T) -> T {
        -T::lit(0.25) * self.calcite_max * (T::PI() * x1).cos() * (-t).exp()
    }

    fn grad_c(&self, x1: T, _x2: T, t: T) -> (T, T) {
        let pi = T::PI();
        (
            -T::lit(0.25) * self.calcite_max * pi * (pi * x1).sin() * (-t).exp(),
            T::zero(),
        )
    }

    fn r(&self, coord: T, t: T) -> T {
        self.r_ref * (T::half() + T::lit(0.25) * (T::PI() * coord).sin()) * (-(-t).exp_m1())
    }
}

/// Spatially and temporally constant `s` with a steady, nonuniform calcite
/// field; the scheme reproduces it exactly.
#[derive(Clone, Copy, Debug)]
pub struct ConstantSolution<T> {
    pub value: T,
    pub calcite_max: T,
    pub rugosity: T,
}

impl<T: Real> Manufactured<T> for ConstantSolution<T> {
    fn s(&self, _: T, _: T, _: T) -> T {
        self.value
    }
    fn s_t(&self, _: T, _: T, _: T) -> T {
        T::zero()
    }
    fn grad_s(&self, _: T, _: T, _: T) -> (T, T) {
        (T::zero(), T::zero())
    }
    fn lap_s(&self, _: T, _: T, _: T) -> T {
        T::zero()
    }
    fn c(&self, x1: T, _: T, _: T) -> T {
        self.calcite_max * (T::half() + T::lit(0.25) * (T::PI() * x1).cos())
    }
    fn c_t(&self, _: T, _: T, _: T) -> T {
        T::zero()
    }
    fn grad_c(&self, x1: T, _: T, _: T) -> (T, T) {
        let pi = T::PI();
        (-T::lit(0.25) * self.calcite_max * pi * (pi * x1).sin(), T::zero())
    }
    fn r(&self, _: T, _: T) -> T {
        self.rugosity
    }
}

/// Volumetric source `d(phi s)/dt - div(phi grad s) + lambda phi c s`.
fn source<T: Real, M: Manufactured<T>>(m: &M, p: &PhysParams<T>, x1: T, x2: T, t: T) -> T {
    let s = m.s(x1, x2, t);
    let c = m.c(x1, x2, t);
    let phi = p.phi(c);
    let b = p.porosity_slope;
    let (sx, sy) = m.grad_s(x1, x2, t);
    let (cx, cy) = m.grad_c(x1, x2, t);
    let storage = b * m.c_t(x1, x2, t) * s + phi * m.s_t(x1, x2, t);
    let diffusion = phi * m.lap_s(x1, x2, t) + b * (cx * sx + cy * sy);
    storage - diffusion + p.reaction_rate * phi * c * s
}

fn outward_normal<T: Real>(e: Edge) -> (T, T) {
    match e {
        Edge::Left => (-T::one(), T::zero()),
        Edge::Right => (T::one(), T::zero()),
        Edge::Bottom => (T::zero(), -T::one()),
        Edge::Top => (T::zero(), T::one()),
    }
}

/// Exchange data making the manufactured field satisfy
/// `phi ds/dn = -nu (s - sbar)` exactly.
fn robin_data<T: Real, M: Manufactured<T>>(
    m: &M,
    grid: &Grid2D<T>,
    p: &PhysParams<T>,
    t: T,
) -> RobinData<T> {
    let trace = grid.exposed_trace();
    let mut nu = Vec::with_capacity(trace.len());
    let mut sbar = Vec::with_capacity(trace.len());
    for pt in trace.points() {
        let (x1, x2) = grid.coords(pt.node);
        let k = p.nu(m.r(pt.coord, t));
        let (nx, ny) = outward_normal::<T>(pt.edge);
        let (sx, sy) = m.grad_s(x1, x2, t);
        let flux = p.phi(m.c(x1, x2, t)) * (sx * nx + sy * ny);
        let s = m.s(x1, x2, t);
        nu.push(k);
        sbar.push(if k > T::zero() { s + flux / k } else { s });
    }
    RobinData { nu, sbar }
}

/// Errors of one verification run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MmsLevel {
    pub nodes_per_axis: usize,
    pub dt: f64,
    pub steps: usize,
    pub err_l2: f64,
    pub err_max: f64,
    pub cg_iterations: usize,
}

/// Integrates the manufactured problem on an `n` by `n` grid up to `t_final`.
pub fn run_mms_level<T: Real, M: Manufactured<T>>(
    m: &M,
    p: &PhysParams<T>,
    n: usize,
    dt: T,
    t_final: T,
    rel_tol: T,
) -> Result<MmsLevel> {
    let grid = build_grid::<T>(n, n, EdgeTags::left_exposed())?;
    let steps = (t_final / dt).round().to_usize().unwrap_or(0).max(1);
    let nodes = grid.n_nodes();
    let xy: Vec<(T, T)> = (0..nodes).map(|k| grid.coords(k)).collect();
    let field = |f: &dyn Fn(T, T) -> T| -> Vec<T> { xy.iter().map(|&(x, y)| f(x, y)).collect() };
    let zero = T::zero();
    let trace = grid.exposed_trace();
    let mut state = FieldState {
        t: zero,
        s: field(&|x, y| m.s(x, y, zero)),
        c: field(&|x, y| m.c(x, y, zero)),
        r: trace.points().iter().map(|pt| m.r(pt.coord, zero)).collect(),
        xi: vec![zero; trace.len()],
    };
    let mut cg_iterations = 0;
    for k in 1..=steps {
        let t = if k == steps {
            t_final
        } else {
            T::from_usize_lossy(k) * dt
        };
        let step_dt = t - state.t;
        let c_new = field(&|x, y| m.c(x, y, t));
        let r_new: Vec<T> = trace.points().iter().map(|pt| m.r(pt.coord, t)).collect();
        let f = field(&|x, y| source(m, p, x, y, t));
        let robin = robin_data(m, &grid, p, t);
        let hooks = Hooks {
            source: Some(&f),
            robin: Some(&robin),
        };
        let asm = assemble_s_system(&grid, &state, &c_new, &r_new, step_dt, p, hooks)?;
        let sol = cg_solve(&asm.system, &state.s, rel_tol, None).map_err(|e| e.at_step(k))?;
        cg_iterations += sol.iterations;
        state = FieldState {
            t,
            s: sol.x,
            c: c_new,
            r: r_new,
            xi: state.xi,
        };
    }
    let err: Vec<T> = state
        .s
        .iter()
        .zip(&xy)
        .map(|(s, &(x, y))| *s - m.s(x, y, t_final))
        .collect();
    let sq: Vec<T> = err.iter().map(|e| *e * *e).collect();
    let err_l2 = grid.integrate(&sq).sqrt().to_f64_lossy();
    let err_max = err.iter().fold(zero, |m, e| m.max(e.abs()));
    Ok(MmsLevel {
        nodes_per_axis: n,
        dt: dt.to_f64_lossy(),
        steps,
        err_l2,
        err_max: err_max.to_f64_lossy(),
        cg_iterations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Study {
    /// Grid refinement at a small fixed time step.
    Spatial,
    /// Time-step halving on a fixed fine grid.
    Temporal,
}

#[derive(Clone, Debug)]
pub struct MmsOptions {
    pub params: PhysParams<f64>,
    pub t_final: f64,
    pub spatial_dt: f64,
    /// Coarsest grid of the spatial study; each level doubles the cells.
    pub spatial_base: usize,
    pub temporal_grid: usize,
    pub temporal_dt0: f64,
    pub rel_tol: f64,
    /// Run the levels on separate threads.
    pub parallel: bool,
}

impl Default for MmsOptions {
    fn default() -> Self {
        Self {
            params: PhysParams::default(),
            t_final: 0.1,
            spatial_dt: 1e-5,
            spatial_base: 17,
            temporal_grid: 129,
            temporal_dt0: 0.1,
            rel_tol: 1e-12,
            parallel: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h_or_dt: f64,
    pub err_l2: f64,
    pub err_max: f64,
    pub order_l2: Option<f64>,
    pub order_max: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    pub study: Study,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Builds rows from `(h_or_dt, err_l2, err_max)`, computing observed
    /// orders between consecutive levels.
    pub fn from_errors(study: Study, data: &[(f64, f64, f64)]) -> Self {
        let order = |ec: f64, ef: f64, hc: f64, hf: f64| (ec / ef).ln() / (hc / hf).ln();
        let rows = data
            .iter()
            .enumerate()
            .map(|(k, &(h, l2, mx))| {
                let prev = k.checked_sub(1).map(|q| data[q]);
                ConvergenceRow {
                    level: k,
                    h_or_dt: h,
                    err_l2: l2,
                    err_max: mx,
                    order_l2: prev.map(|(hc, ec, _)| order(ec, l2, hc, h)),
                    order_max: prev.map(|(hc, _, mc)| order(mc, mx, hc, h)),
                }
            })
            .collect();
        Self { study, rows }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,h_or_dt,err_L2,err_max,order_L2,order_max\n");
        let opt = |o: Option<f64>| o.map_or(String::new(), |v| format!("{v:.16e}"));
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{},{}",
                r.level,
                r.h_or_dt,
                r.err_l2,
                r.err_max,
                opt(r.order_l2),
                opt(r.order_max)
            );
        }
        out
    }
}

/// Runs a convergence study with `levels` refinements (at least 3).
pub fn mms_convergence(study: Study, levels: usize, opts: &MmsOptions) -> Result<ConvergenceTable> {
    if levels < 3 {
        return Err(SimError::Config(format!(
            "a convergence study needs at least 3 levels, got {levels}"
        )));
    }
    let p = &opts.params;
    let m = TrigSolution::new(p);
    let plan: Vec<(usize, f64)> = (0..levels)
        .map(|k| match study {
            Study::Spatial => ((opts.spatial_base - 1) * (1 << k) + 1, opts.spatial_dt),
            Study::Temporal => (opts.temporal_grid, opts.temporal_dt0 / (1u64 << k) as f64),
        })
        .collect();
    let run = |&(n, dt): &(usize, f64)| run_mms_level(&m, p, n, dt, opts.t_final, opts.rel_tol);
    let results: Vec<Result<MmsLevel>> = if opts.parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = plan.iter().map(|lv| scope.spawn(move || run(lv))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("mms level panicked"))
                .collect()
        })
    } else {
        plan.iter().map(run).collect()
    };
    let mut data = Vec::with_capacity(levels);
    for r in results {
        let lv = r?;
        let h = match study {
            Study::Spatial => 1.0 / (lv.nodes_per_axis - 1) as f64,
            Study::Temporal => lv.dt,
        };
        data.push((h, lv.err_l2, lv.err_max));
    }
    Ok(ConvergenceTable::from_errors(study, &data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bulk::LinearSystem;

    #[test]
    fn constants_reproduced_exactly() {
        let p = PhysParams::<f64>::default();
        let m = ConstantSolution {
            value: 0.6,
            calcite_max: p.calcite_max,
            rugosity: 0.3,
        };
        for n in [5, 9, 17] {
            let lv = run_mms_level(&m, &p, n, 0.01, 0.05, 1e-13).unwrap();
            assert!(lv.err_max <= 1e-11, "n={n}: {}", lv.err_max);
        }
    }

    #[test]
    fn zero_source_hook_is_transparent() {
        let p = PhysParams::<f64>::default();
        let g = build_grid::<f64>(7, 7, EdgeTags::left_exposed()).unwrap();
        let mut st = FieldState::uniform(g.n_nodes(), 0.0, 0.8, vec![0.2; 7]);
        for (k, s) in st.s.iter_mut().enumerate() {
            *s = (k as f64 * 0.3).sin().abs();
        }
        let c_new: Vec<f64> = st.c.iter().map(|c| c * 0.99).collect();
        let zeros = vec![0.0; g.n_nodes()];
        let plain: LinearSystem<f64> =
            assemble_s_system(&g, &st, &c_new, &st.r, 1e-3, &p, Hooks::default()).unwrap().system;
        let hooked = assemble_s_system(
            &g,
            &st,
            &c_new,
            &st.r,
            1e-3,
            &p,
            Hooks {
                source: Some(&zeros),
                robin: None,
            },
        )
        .unwrap()
        .system;
        assert_eq!(plain, hooked);
        // exchange data equal to the model's own reproduces it as well
        let rd = RobinData {
            nu: st.r.iter().map(|r| p.nu(*r)).collect(),
            sbar: vec![p.ambient_so2; 7],
        };
        let robin = assemble_s_system(
            &g,
            &st,
            &c_new,
            &st.r,
            1e-3,
            &p,
            Hooks {
                source: None,
                robin: Some(&rd),
            },
        )
        .unwrap()
        .system;
        assert_eq!(plain, robin);
    }

    #[test]
    fn source_matches_finite_difference_residual() {
        // check the analytic derivatives of the trig solution
        let p = PhysParams::<f64>::default();
        let m = TrigSolution::new(&p);
        let (x, y, t, h) = (0.3, 0.7, 0.05, 1e-5);
        let st = (m.s(x, y, t + h) - m.s(x, y, t - h)) / (2.0 * h);
        assert!((st - m.s_t(x, y, t)).abs() < 1e-8);
        let sx = (m.s(x + h, y, t) - m.s(x - h, y, t)) / (2.0 * h);
        let sy = (m.s(x, y + h, t) - m.s(x, y - h, t)) / (2.0 * h);
        let (gx, gy) = m.grad_s(x, y, t);
        assert!((sx - gx).abs() < 1e-8 && (sy - gy).abs() < 1e-8);
        let h2 = 1e-4;
        let lap = (m.s(x + h2, y, t) + m.s(x - h2, y, t) + m.s(x, y + h2, t) + m.s(x, y - h2, t)
            - 4.0 * m.s(x, y, t))
            / (h2 * h2);
        assert!((lap - m.lap_s(x, y, t)).abs() < 1e-5);
        let ct = (m.c(x, y, t + h) - m.c(x, y, t - h)) / (2.0 * h);
        assert!((ct - m.c_t(x, y, t)).abs() < 1e-8);
        let cx = (m.c(x + h, y, t) - m.c(x - h, y, t)) / (2.0 * h);
        assert!((cx - m.grad_c(x, y, t).0).abs() < 1e-8);
    }

    #[test]
    fn table_orders() {
        let t = ConvergenceTable::from_errors(
            Study::Spatial,
            &[(0.1, 4e-2, 8e-2), (0.05, 1e-2, 2e-2), (0.025, 2.5e-3, 5e-3)],
        );
        assert!(t.rows[0].order_l2.is_none());
        assert!((t.rows[1].order_l2.unwrap() - 2.0).abs() < 1e-12);
        assert!((t.rows[2].order_max.unwrap() - 2.0).abs() < 1e-12);
        let csv = t.to_csv();
        assert!(csv.starts_with("level,h_or_dt,err_L2,err_max,order_L2,order_max\n"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn rejects_too_few_levels() {
        assert!(mms_convergence(Study::Spatial, 2, &MmsOptions::default()).is_err());
    }

    #[test]
    fn small_spatial_study_is_second_order() {
        let opts = MmsOptions {
            spatial_base: 9,
            spatial_dt: 1e-4,
            t_final: 0.02,
            ..Default::default()
        };
        let t = mms_convergence(Study::Spatial, 3, &opts).unwrap();
        let o = t.rows[2].order_l2.unwrap();
        assert!((o - 2.0).abs() < 0.3, "{}", t.to_csv());
    }
}
