//! Text artifacts: profile CSV, legacy VTK snapshots and the audit log.
//!
//! Every number is printed with 17 significant digits so that files
//! round-trip `f64` exactly and identical runs give identical bytes.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::bulk::FieldState;
use crate::diagnostics::InvariantReport;
use crate::error::{Result, SimError};
use crate::grid::{BoundaryTrace, Grid2D, ProfileLine};

pub const PROFILE_HEADER: &str = "t,x1,x2,field,value";

/// Formats with 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProfileRow {
    pub t: f64,
    pub x1: f64,
    pub x2: f64,
    pub field: &'static str,
    pub value: f64,
}

fn row_order(a: &ProfileRow, b: &ProfileRow) -> Ordering {
    a.t.total_cmp(&b.t)
        .then_with(|| a.field.cmp(b.field))
        .then_with(|| a.x2.total_cmp(&b.x2))
        .then_with(|| a.x1.total_cmp(&b.x1))
}

/// Profile rows collected over a run, written sorted by
/// `(t, field, x2, x1)`.
#[derive(Clone, Debug, Default)]
pub struct ProfileTable {
    rows: Vec<ProfileRow>,
}

impl ProfileTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rows(&self) -> &[ProfileRow] {
        &self.rows
    }

    pub fn push_nodes(&mut self, t: f64, grid: &Grid2D<f64>, nodes: &[usize], field: &'static str, values: &[f64]) {
        for &k in nodes {
            let (x1, x2) = grid.coords(k);
            self.rows.push(ProfileRow {
                t,
                x1,
                x2,
                field,
                value: values[k],
            });
        }
    }

    /// Samples `s` and `c` on `line`.
    pub fn push_line(&mut self, state: &FieldState<f64>, grid: &Grid2D<f64>, line: ProfileLine<f64>) -> Result<()> {
        let nodes = grid.line_nodes(line)?;
        self.push_nodes(state.t, grid, &nodes, "s", &state.s);
        self.push_nodes(state.t, grid, &nodes, "c", &state.c);
        Ok(())
    }

    /// Samples the rugosity along the exposed trace.
    pub fn push_rugosity(&mut self, state: &FieldState<f64>, grid: &Grid2D<f64>, trace: &BoundaryTrace<f64>) {
        for (pt, &r) in trace.points().iter().zip(&state.r) {
            let (x1, x2) = grid.coords(pt.node);
            self.rows.push(ProfileRow {
                t: state.t,
                x1,
                x2,
                field: "r",
                value: r,
            });
        }
    }

    pub fn to_csv(&self) -> String {
        let mut rows: Vec<&ProfileRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| row_order(a, b));
        let mut out = String::with_capacity(64 * rows.len() + 32);
        out.push_str(PROFILE_HEADER);
        out.push('\n');
        for r in rows {
            let _ = writeln!(out, "{},{},{},{},{}", num(r.t), num(r.x1), num(r.x2), r.field, num(r.value));
        }
        out
    }
}

/// `(t, x1, x2, field, value)` as read back from a profile CSV.
pub type ProfileRecord = (f64, f64, f64, String, f64);

pub fn read_profile_csv(text: &str) -> Result<Vec<ProfileRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some(PROFILE_HEADER) {
        return Err(SimError::Config("profile csv: unexpected header".into()));
    }
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            let n = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| SimError::Config(format!("profile csv: bad number {s:?}")))
            };
            if f.len() != 5 {
                return Err(SimError::Config(format!("profile csv: bad row {line:?}")));
            }
            Ok((n(f[0])?, n(f[1])?, n(f[2])?, f[3].to_string(), n(f[4])?))
        })
        .collect()
}

/// Legacy ASCII VTK structured-points file with point scalars `s` and `c`.
pub fn vtk_snapshot(state: &FieldState<f64>, grid: &Grid2D<f64>, step: usize) -> String {
    let n = grid.n_nodes();
    let mut out = String::with_capacity(50 * n + 256);
    out.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(out, "sulphsim step {step} t {}", num(state.t));
    out.push_str("ASCII\nDATASET STRUCTURED_POINTS\n");
    let _ = writeln!(out, "DIMENSIONS {} {} 1", grid.nx(), grid.ny());
    out.push_str("ORIGIN 0 0 0\n");
    let _ = writeln!(out, "SPACING {} {} 1", num(grid.hx()), num(grid.hy()));
    let _ = writeln!(out, "POINT_DATA {n}");
    for (name, field) in [("s", &state.s), ("c", &state.c)] {
        let _ = writeln!(out, "SCALARS {name} double 1");
        out.push_str("LOOKUP_TABLE default\n");
        for v in field.iter() {
            out.push_str(&num(*v));
            out.push('\n');
        }
    }
    out
}

/// Reads the named scalar block back from a snapshot written by
/// [`vtk_snapshot`].
pub fn read_vtk_scalars(text: &str, name: &str) -> Result<Vec<f64>> {
    let mut lines = text.lines();
    let n = lines
        .by_ref()
        .find_map(|l| l.strip_prefix("POINT_DATA "))
        .and_then(|v| v.trim().parse::<usize>().ok())
        .ok_or_else(|| SimError::Config("vtk: missing POINT_DATA".into()))?;
    let head = format!("SCALARS {name} ");
    lines
        .by_ref()
        .find(|l| l.starts_with(&head))
        .ok_or_else(|| SimError::Config(format!("vtk: no scalars named {name}")))?;
    lines.next();
    lines
        .take(n)
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .map_err(|_| SimError::Config(format!("vtk: bad value {l:?}")))
        })
        .collect()
}

pub fn audit_csv(report: &InvariantReport) -> String {
    let mut out = String::from("step,t,s_min,s_max,c_min,c_max,r_min,r_max,balance_residual\n");
    for e in &report.entries {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            e.step,
            num(e.t),
            num(e.s_min),
            num(e.s_max),
            num(e.c_min),
            num(e.c_max),
            num(e.r_min),
            num(e.r_max),
            num(e.balance_residual)
        );
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| SimError::io(path, e))
}
