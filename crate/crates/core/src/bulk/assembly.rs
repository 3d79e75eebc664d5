//! Backward-Euler system for the SO2 concentration.
//!
//! Vertex-centered finite volumes: each node owns the trapezoidal cell
//! `[x - h/2, x + h/2]` clipped to the square, so boundary nodes own half (or,
//! at corners, quarter) cells. Rows are the cell balances
//!
//! ```text
//! w (phi' s' - phi s) / dt + w lambda phi' c' s' - sum_faces F + sum_robin nu l (s' - sbar) = w f
//! ```
//!
//! with face fluxes `F = phi_face (s'_nb - s') l_face / h` and `phi_face` the
//! arithmetic mean of the two nodal porosities. This is the ghost-reflection
//! stencil written in conservative form; multiplying through by the cell area
//! makes the matrix symmetric with a nonpositive off-diagonal.

use crate::bulk::FieldState;
use crate::error::{Result, SimError};
use crate::grid::{BoundaryTrace, Grid2D};
use crate::model::PhysParams;
use crate::scalar::Real;

/// Sparse symmetric system in compressed-row layout.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem<T> {
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<T>,
    pub rhs: Vec<T>,
}

impl<T: Real> LinearSystem<T> {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    /// Builds a system from dense rows, dropping exact zeros.
    pub fn from_dense(rows: &[Vec<T>], rhs: Vec<T>) -> Self {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for row in rows {
            for (j, v) in row.iter().enumerate() {
                if !v.is_zero() {
                    cols.push(j);
                    vals.push(*v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            row_ptr,
            cols,
            vals,
            rhs,
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.row(i)
            .find(|(c, _)| *c == j)
            .map_or(T::zero(), |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`
    pub fn apply(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let n = self.dim();
        let mut out = vec![vec![T::zero(); n]; n];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = row[j] + v;
            }
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim()).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    /// Smallest `a_ii - sum_{j != i} |a_ij|` over all rows.
    pub fn dominance_margin(&self) -> T {
        (0..self.dim())
            .map(|i| {
                self.row(i).fold(T::zero(), |acc, (j, v)| {
                    if j == i {
                        acc + v
                    } else {
                        acc - v.abs()
                    }
                })
            })
            .fold(T::infinity(), T::min)
    }
}

/// Replacement exchange data on the trace, used by manufactured-solution
/// runs: per trace point a permeability and an exterior concentration.
#[derive(Clone, Debug, PartialEq)]
pub struct RobinData<T> {
    pub nu: Vec<T>,
    pub sbar: Vec<T>,
}

/// Optional verification inputs.
#[derive(Clone, Copy, Debug)]
pub struct Hooks<'a, T> {
    /// Volumetric forcing per node (added to the right-hand side).
    pub source: Option<&'a [T]>,
    pub robin: Option<&'a RobinData<T>>,
}

impl<T> Default for Hooks<'_, T> {
    fn default() -> Self {
        Self {
            source: None,
            robin: None,
        }
    }
}

/// Assembled system plus the pieces needed to audit the discrete balance.
#[derive(Clone, Debug)]
pub struct Assembly<T> {
    pub system: LinearSystem<T>,
    /// `a_ii - sum |a_ij|`, minimum over rows; negative means the system lost
    /// diagonal dominance.
    pub dominance_margin: T,
    storage_coef: Vec<T>,
    storage_old: Vec<T>,
    reaction_coef: Vec<T>,
    source: Vec<T>,
    robin: Vec<(usize, T, T)>,
}

impl<T: Real> Assembly<T> {
    pub fn diagonally_dominant(&self) -> bool {
        self.dominance_margin >= T::zero()
    }

    /// Integral balance of the step for a computed `s_new`.
    pub fn balance(&self, s_new: &[T]) -> BalanceTerms<T> {
        let dot = |a: &[T]| a.iter().zip(s_new).map(|(x, y)| *x * *y).sum::<T>();
        let inflow = self
            .robin
            .iter()
            .map(|(node, nl, sbar)| *nl * (*sbar - s_new[*node]))
            .sum();
        BalanceTerms {
            storage_new: dot(&self.storage_coef),
            storage_old: self.storage_old.iter().copied().sum(),
            reaction: dot(&self.reaction_coef),
            boundary_inflow: inflow,
            source: self.source.iter().copied().sum(),
        }
    }
}

/// Domain integrals making up the discrete balance of one step.
///
/// `(storage_new - storage_old) + reaction - boundary_inflow - source = 0`
/// holds up to the linear-solver residual.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct BalanceTerms<T> {
    /// `sum w phi' s' / dt`
    pub storage_new: T,
    /// `sum w phi s / dt`
    pub storage_old: T,
    pub reaction: T,
    /// `sum l nu (sbar - s')`
    pub boundary_inflow: T,
    pub source: T,
}

impl<T: Real> BalanceTerms<T> {
    pub fn residual(&self) -> T {
        self.storage_new - self.storage_old + self.reaction - self.boundary_inflow - self.source
    }

    pub fn scale(&self) -> T {
        [
            self.storage_new,
            self.storage_old,
            self.reaction,
            self.boundary_inflow,
            self.source,
        ]
        .iter()
        .fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Residual relative to the largest term; zero for an all-zero balance.
    pub fn relative(&self) -> T {
        let scale = self.scale();
        if scale.is_zero() {
            self.residual().abs()
        } else {
            self.residual().abs() / scale
        }
    }
}

fn check_len<T>(what: &'static str, v: &[T], n: usize) -> Result<()> {
    if v.len() == n {
        Ok(())
    } else {
        Err(SimError::Dimension {
            what,
            expected: n,
            got: v.len(),
        })
    }
}

fn check_finite<T: Real>(what: &'static str, v: &[T]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(SimError::NonFinite(what))
    }
}

/// Assembles the implicit system for `s` at the new time level.
///
/// Coefficients use `c_new` and `r_new`; the storage term uses `c` and `s` of
/// `state_old`. The exposed trace is taken from `grid`.
pub fn assemble_s_system<T: Real>(
    grid: &Grid2D<T>,
    state_old: &FieldState<T>,
    c_new: &[T],
    r_new: &[T],
    dt: T,
    p: &PhysParams<T>,
    hooks: Hooks<'_, T>,
) -> Result<Assembly<T>> {
    let trace = grid.exposed_trace();
    assemble_with_trace(grid, &trace, state_old, c_new, r_new, dt, p, hooks)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn assemble_with_trace<T: Real>(
    grid: &Grid2D<T>,
    trace: &BoundaryTrace<T>,
    state_old: &FieldState<T>,
    c_new: &[T],
    r_new: &[T],
    dt: T,
    p: &PhysParams<T>,
    hooks: Hooks<'_, T>,
) -> Result<Assembly<T>> {
    let n = grid.n_nodes();
    check_len("s_old", &state_old.s, n)?;
    check_len("c_old", &state_old.c, n)?;
    check_len("c_new", c_new, n)?;
    check_len("r_new", r_new, trace.len())?;
    check_finite("s_old", &state_old.s)?;
    check_finite("c_old", &state_old.c)?;
    check_finite("c_new", c_new)?;
    check_finite("r_new", r_new)?;
    if !(dt > T::zero() && dt.is_finite()) {
        return Err(SimError::NonFinite("time step"));
    }
    if let Some(f) = hooks.source {
        check_len("source", f, n)?;
        check_finite("source", f)?;
    }
    if let Some(rd) = hooks.robin {
        check_len("robin nu", &rd.nu, trace.len())?;
        check_len("robin sbar", &rd.sbar, trace.len())?;
        check_finite("robin nu", &rd.nu)?;
        check_finite("robin sbar", &rd.sbar)?;
    }

    let (nx, ny) = (grid.nx(), grid.ny());
    let (hx, hy) = (grid.hx(), grid.hy());
    let phi_new: Vec<T> = c_new.iter().map(|c| p.phi(*c)).collect();

    let mut storage_coef = Vec::with_capacity(n);
    let mut storage_old = Vec::with_capacity(n);
    let mut reaction_coef = Vec::with_capacity(n);
    let mut source = Vec::with_capacity(n);
    for k in 0..n {
        let w = grid.node_weight(k);
        storage_coef.push(w * phi_new[k] / dt);
        storage_old.push(w * p.phi(state_old.c[k]) * state_old.s[k] / dt);
        reaction_coef.push(w * p.reaction_rate * phi_new[k] * c_new[k]);
        source.push(hooks.source.map_or(T::zero(), |f| w * f[k]));
    }

    let robin: Vec<(usize, T, T)> = trace
        .points()
        .iter()
        .enumerate()
        .map(|(k, pt)| {
            let (nu, sbar) = match hooks.robin {
                Some(rd) => (rd.nu[k], rd.sbar[k]),
                None => (p.nu(r_new[k]), p.ambient_so2),
            };
            (pt.node, nu * pt.weight, sbar)
        })
        .collect();
    let mut robin_diag = vec![T::zero(); n];
    let mut robin_rhs = vec![T::zero(); n];
    for (node, nl, sbar) in &robin {
        robin_diag[*node] = robin_diag[*node] + *nl;
        robin_rhs[*node] = robin_rhs[*node] + *nl * *sbar;
    }

    let face = |a: usize, b: usize, len: T, h: T| T::half() * (phi_new[a] + phi_new[b]) * len / h;
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(5 * n);
    let mut vals = Vec::with_capacity(5 * n);
    let mut rhs = Vec::with_capacity(n);
    row_ptr.push(0);
    for j in 0..ny {
        let fy = Grid2D::<T>::axis_factor(j, ny);
        for i in 0..nx {
            let fx = Grid2D::<T>::axis_factor(i, nx);
            let k = grid.index(i, j);
            // horizontal faces have length fx*hx, vertical faces fy*hy
            let south = (j > 0).then(|| (k - nx, face(k, k - nx, fx * hx, hy)));
            let west = (i > 0).then(|| (k - 1, face(k, k - 1, fy * hy, hx)));
            let east = (i + 1 < nx).then(|| (k + 1, face(k, k + 1, fy * hy, hx)));
            let north = (j + 1 < ny).then(|| (k + nx, face(k, k + nx, fx * hx, hy)));

            let mut diag = storage_coef[k] + reaction_coef[k] + robin_diag[k];
            for (col, coef) in [south, west].into_iter().flatten() {
                diag = diag + coef;
                cols.push(col);
                vals.push(-coef);
            }
            let diag_pos = cols.len();
            cols.push(k);
            vals.push(T::zero());
            for (col, coef) in [east, north].into_iter().flatten() {
                diag = diag + coef;
                cols.push(col);
                vals.push(-coef);
            }
            vals[diag_pos] = diag;
            row_ptr.push(cols.len());
            rhs.push(storage_old[k] + source[k] + robin_rhs[k]);
        }
    }

    let system = LinearSystem {
        row_ptr,
        cols,
        vals,
        rhs,
    };
    let dominance_margin = system.dominance_margin();
    Ok(Assembly {
        system,
        dominance_margin,
        storage_coef,
        storage_old,
        reaction_coef,
        source,
        robin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, EdgeTags};

    fn unit_params(lambda: f64) -> PhysParams<f64> {
        PhysParams {
            porosity_offset: 1.0,
            porosity_slope: 0.0,
            reaction_rate: lambda,
            ..Default::default()
        }
    }

    fn state(grid: &Grid2D<f64>, s: f64, c: f64) -> FieldState<f64> {
        FieldState::uniform(grid.n_nodes(), s, c, vec![0.0; grid.exposed_trace().len()])
    }

    /// Dense assembler written directly from the nodal stencil: interior
    /// second differences with ghost reflection at isolated sides and the
    /// exposed-side flux condition, then multiplied by the cell area.
    fn brute_force(
        grid: &Grid2D<f64>,
        old: &FieldState<f64>,
        c_new: &[f64],
        r_new: &[f64],
        dt: f64,
        p: &PhysParams<f64>,
    ) -> (Vec<Vec<f64>>, Vec<f64>) {
        let (nx, ny) = (grid.nx(), grid.ny());
        let (hx, hy) = (grid.hx(), grid.hy());
        let n = nx * ny;
        let phi = |c: f64| p.porosity_offset + p.porosity_slope * c;
        let mut a = vec![vec![0.0; n]; n];
        let mut b = vec![0.0; n];
        let trace = grid.exposed_trace();
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                let cell_x = if i == 0 || i == nx - 1 { hx / 2.0 } else { hx };
                let cell_y = if j == 0 || j == ny - 1 { hy / 2.0 } else { hy };
                let area = cell_x * cell_y;
                a[k][k] += area * (phi(c_new[k]) / dt + p.reaction_rate * phi(c_new[k]) * c_new[k]);
                b[k] += area * phi(old.c[k]) * old.s[k] / dt;
                let neighbours: [(isize, isize, f64, f64); 4] = [
                    (-1, 0, cell_y, hx),
                    (1, 0, cell_y, hx),
                    (0, -1, cell_x, hy),
                    (0, 1, cell_x, hy),
                ];
                for (di, dj, len, h) in neighbours {
                    let (ii, jj) = (i as isize + di, j as isize + dj);
                    if ii < 0 || jj < 0 || ii >= nx as isize || jj >= ny as isize {
                        continue;
                    }
                    let m = jj as usize * nx + ii as usize;
                    let pf = 0.5 * (phi(c_new[k]) + phi(c_new[m]));
                    a[k][k] += pf * len / h;
                    a[k][m] -= pf * len / h;
                }
            }
        }
        for (q, pt) in trace.points().iter().enumerate() {
            let nu = p.nu(r_new[q]);
            a[pt.node][pt.node] += nu * pt.weight;
            b[pt.node] += nu * pt.weight * p.ambient_so2;
        }
        (a, b)
    }

    #[test]
    fn matches_brute_force_on_3x3() {
        let grid = build_grid::<f64>(3, 3, EdgeTags::left_exposed()).unwrap();
        let p = unit_params(1.0);
        let old = state(&grid, 0.3, 1.0);
        let c_new = vec![1.0; 9];
        let r_new = vec![0.1, 0.2, 0.3];
        let asm = assemble_s_system(&grid, &old, &c_new, &r_new, 1.0, &p, Hooks::default()).unwrap();
        let (a, b) = brute_force(&grid, &old, &c_new, &r_new, 1.0, &p);
        let dense = asm.system.to_dense();
        for i in 0..9 {
            assert!((asm.system.rhs[i] - b[i]).abs() < 1e-15);
            for j in 0..9 {
                assert!((dense[i][j] - a[i][j]).abs() < 1e-14, "({i},{j})");
            }
        }
    }

    #[test]
    fn matches_brute_force_with_variable_porosity() {
        let grid = build_grid::<f64>(5, 4, EdgeTags::left_exposed()).unwrap();
        let p = PhysParams::<f64> {
            nu_law: crate::model::NuLaw::Parabolic,
            ..Default::default()
        };
        let n = grid.n_nodes();
        let mut old = state(&grid, 0.0, 0.0);
        for k in 0..n {
            old.s[k] = (k as f64 * 0.37).sin().abs();
            old.c[k] = 0.5 + 0.4 * (k as f64 * 0.11).cos();
        }
        let c_new: Vec<f64> = old.c.iter().map(|c| 0.9 * c).collect();
        let r_new = vec![0.0, 0.1, 0.5, 1.5];
        let dt = 2e-3;
        let asm = assemble_s_system(&grid, &old, &c_new, &r_new, dt, &p, Hooks::default()).unwrap();
        let (a, b) = brute_force(&grid, &old, &c_new, &r_new, dt, &p);
        let dense = asm.system.to_dense();
        for i in 0..n {
            assert!((asm.system.rhs[i] - b[i]).abs() <= 1e-12 * b[i].abs().max(1.0));
            for j in 0..n {
                assert!((dense[i][j] - a[i][j]).abs() <= 1e-12 * a[i][i].abs(), "({i},{j})");
            }
        }
        assert!(asm.system.is_symmetric());
        assert!(asm.diagonally_dominant());
    }

    #[test]
    fn laplacian_annihilates_constants() {
        let grid = build_grid::<f64>(6, 5, EdgeTags::all_isolated()).unwrap();
        let p = unit_params(0.0);
        let old = state(&grid, 0.0, 0.5);
        let dt = 0.25;
        let asm = assemble_s_system(&grid, &old, &old.c, &[], dt, &p, Hooks::default()).unwrap();
        let ones = vec![3.0; grid.n_nodes()];
        let mut y = vec![0.0; grid.n_nodes()];
        asm.system.apply(&ones, &mut y);
        for (k, yk) in y.iter().enumerate() {
            let mass = grid.node_weight(k) * 3.0 / dt;
            assert!((yk - mass).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_permeability_equals_neumann() {
        let p = PhysParams::<f64> {
            nu_flat: 0.0,
            nu_ref: 0.0,
            ..Default::default()
        };
        let exposed = build_grid::<f64>(5, 5, EdgeTags::left_exposed()).unwrap();
        let closed = build_grid::<f64>(5, 5, EdgeTags::all_isolated()).unwrap();
        let old_e = state(&exposed, 0.2, 0.8);
        let old_c = state(&closed, 0.2, 0.8);
        let a = assemble_s_system(&exposed, &old_e, &old_e.c, &old_e.r, 0.01, &p, Hooks::default()).unwrap();
        let b = assemble_s_system(&closed, &old_c, &old_c.c, &old_c.r, 0.01, &p, Hooks::default()).unwrap();
        assert_eq!(a.system, b.system);
    }

    #[test]
    fn rejects_non_finite_input() {
        let grid = build_grid::<f64>(3, 3, EdgeTags::left_exposed()).unwrap();
        let p = PhysParams::<f64>::default();
        let mut old = state(&grid, 0.0, 1.0);
        old.s[4] = f64::NAN;
        let err = assemble_s_system(&grid, &old, &old.c, &old.r, 0.1, &p, Hooks::default());
        assert!(matches!(err, Err(SimError::NonFinite(_))));
    }

    #[test]
    fn reports_lost_dominance() {
        let grid = build_grid::<f64>(3, 3, EdgeTags::left_exposed()).unwrap();
        let p = PhysParams::<f64>::default();
        let old = state(&grid, 0.0, 1.0);
        let rd = RobinData {
            nu: vec![-1e6; 3],
            sbar: vec![0.0; 3],
        };
        let hooks = Hooks {
            source: None,
            robin: Some(&rd),
        };
        let asm = assemble_s_system(&grid, &old, &old.c, &old.r, 0.1, &p, hooks).unwrap();
        assert!(!asm.diagonally_dominant());
    }
}
