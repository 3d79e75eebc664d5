//! Run orchestration: simulation loop, artifacts and parameter sweeps.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::bulk::{step, FieldState, StepOutcome, StepSettings};
use crate::config::{apply, parse_pairs, parse_sections, Mode, RunConfig};
use crate::diagnostics::{audit_step, mms_convergence, AuditOptions, ConvergenceTable, InvariantReport, MmsOptions, Study};
use crate::error::{Result, SimError};
use crate::grid::{build_grid, BoundaryTrace, Grid2D, ProfileLine};
use crate::output::{audit_csv, num, vtk_snapshot, write_file, ProfileTable};
use crate::surface::{init_rugosity, RunRng};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A configured run advanced one step at a time.
pub struct Simulation {
    cfg: RunConfig,
    grid: Grid2D<f64>,
    trace: BoundaryTrace<f64>,
    settings: StepSettings<f64>,
    state: FieldState<f64>,
    step: usize,
    report: InvariantReport,
    last: Option<StepOutcome<f64>>,
}

impl Simulation {
    /// Validates `cfg` and sets up the initial state: `s = 0`, `c = c_init`,
    /// rugosity per `r_init`.
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = build_grid::<f64>(cfg.nx, cfg.ny, cfg.edges)?;
        let trace = grid.exposed_trace();
        let mut rng = RunRng::new(cfg.seed);
        let r = init_rugosity(&trace, cfg.r_init, &cfg.params, &mut rng)?;
        let state = FieldState::uniform(grid.n_nodes(), 0.0, cfg.initial_calcite(), r);
        let mut settings = StepSettings::new(cfg.dt).with_picard(cfg.picard_iters);
        settings.rel_tol = cfg.rel_tol;
        let mut sim = Self {
            cfg: cfg.clone(),
            grid,
            trace,
            settings,
            state,
            step: 0,
            report: InvariantReport::default(),
            last: None,
        };
        let opts = sim.audit_options();
        audit_step(&mut sim.report, 0, &sim.state, None, &sim.cfg.params, None, opts);
        Ok(sim)
    }

    fn audit_options(&self) -> AuditOptions {
        AuditOptions {
            ceiling: self.cfg.validate_global_bound,
        }
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &Grid2D<f64> {
        &self.grid
    }

    pub fn trace(&self) -> &BoundaryTrace<f64> {
        &self.trace
    }

    pub fn state(&self) -> &FieldState<f64> {
        &self.state
    }

    /// Number of steps taken so far.
    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn report(&self) -> &InvariantReport {
        &self.report
    }

    /// Outcome of the most recent step.
    pub fn last_outcome(&self) -> Option<&StepOutcome<f64>> {
        self.last.as_ref()
    }

    /// Takes one step and audits it. In strict mode any violation is an
    /// error.
    pub fn advance(&mut self) -> Result<&StepOutcome<f64>> {
        let k = self.step + 1;
        let mut out = step(&self.state, &self.grid, &self.trace, &self.cfg.params, &self.settings)
            .map_err(|e| e.at_step(k))?;
        // accumulate time by multiplication so long runs do not drift
        out.state.t = k as f64 * self.cfg.dt;
        let opts = self.audit_options();
        let fresh = audit_step(
            &mut self.report,
            k,
            &out.state,
            Some(&self.state),
            &self.cfg.params,
            Some(&out.balance),
            opts,
        );
        self.step = k;
        self.state = out.state.clone();
        self.last = Some(out);
        if self.cfg.strict && fresh > 0 {
            let v = &self.report.violations[self.report.violations.len() - fresh];
            return Err(SimError::Invariant {
                step: k,
                detail: format!("{:?} at node {:?}, magnitude {:e}", v.kind, v.node, v.magnitude),
            });
        }
        Ok(self.last.as_ref().expect("just set"))
    }

    /// Smallest calcite density on the exposed trace.
    pub fn edge_c_min(&self) -> f64 {
        self.trace.gather(&self.state.c).into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Largest `|dc/ds|` between neighbouring points of the same exposed
    /// edge.
    pub fn edge_c_gradient(&self) -> f64 {
        let pts = self.trace.points();
        pts.windows(2)
            .filter(|w| w[0].edge == w[1].edge)
            .map(|w| (self.state.c[w[1].node] - self.state.c[w[0].node]).abs() / (w[1].coord - w[0].coord).abs())
            .fold(0.0, f64::max)
    }
}

/// What a finished run reports.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub steps: usize,
    pub report: InvariantReport,
    /// First step (and its time) at which the exposed-edge minimum of `c`
    /// drops below half the initial density.
    pub threshold: Option<(usize, f64)>,
    /// Largest edge `|dc/dx2|` at the first snapshot after the start.
    pub edge_gradient: Option<f64>,
    pub convergence: Option<ConvergenceTable>,
    pub files: Vec<PathBuf>,
}

fn manifest(cfg: &RunConfig, status: &str, report: Option<&InvariantReport>) -> String {
    let mut out = format!("# sulphsim {VERSION}\n# status = {status}\n");
    if let Some(r) = report {
        for line in r.summary() {
            out.push_str("# ");
            out.push_str(&line);
            out.push('\n');
        }
    }
    out.push_str(&cfg.to_ini());
    out
}

/// Executes a validated configuration and writes its artifacts under
/// `cfg.output.out_dir`.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let dir = cfg.output.out_dir.clone();
    match cfg.mode {
        Mode::MmsSpatial | Mode::MmsTemporal => run_mms(cfg, &dir),
        Mode::Simulate | Mode::AuditOnly => run_simulation(cfg, &dir),
    }
}

fn run_mms(cfg: &RunConfig, dir: &Path) -> Result<RunSummary> {
    let (study, name) = match cfg.mode {
        Mode::MmsSpatial => (Study::Spatial, "convergence_spatial.csv"),
        _ => (Study::Temporal, "convergence_temporal.csv"),
    };
    let opts = MmsOptions {
        params: cfg.params.clone(),
        ..MmsOptions::default()
    };
    let table = mms_convergence(study, cfg.mms_levels, &opts)?;
    let csv_path = dir.join(name);
    write_file(&csv_path, &table.to_csv())?;
    let man = dir.join("manifest.ini");
    write_file(&man, &manifest(cfg, "ok", None))?;
    Ok(RunSummary {
        out_dir: dir.to_path_buf(),
        steps: 0,
        report: InvariantReport::default(),
        threshold: None,
        edge_gradient: None,
        convergence: Some(table),
        files: vec![csv_path, man],
    })
}

struct Collector {
    vertical: ProfileTable,
    horizontal: ProfileTable,
    files: Vec<PathBuf>,
}

impl Collector {
    fn snapshot(&mut self, sim: &Simulation, dir: &Path) -> Result<()> {
        let cfg = sim.config();
        if cfg.mode == Mode::AuditOnly {
            return Ok(());
        }
        let (st, g) = (sim.state(), sim.grid());
        if cfg.output.csv {
            for &a in &cfg.output.profile_x1 {
                self.vertical.push_line(st, g, ProfileLine::Vertical(a))?;
            }
            self.vertical.push_rugosity(st, g, sim.trace());
            for &b in &cfg.output.profile_x2 {
                self.horizontal.push_line(st, g, ProfileLine::Horizontal(b))?;
            }
        }
        if cfg.output.vtk {
            let path = dir.join(format!("snapshot_{:06}.vtk", sim.step_index()));
            write_file(&path, &vtk_snapshot(st, g, sim.step_index()))?;
            self.files.push(path);
        }
        Ok(())
    }

    fn finish(&mut self, cfg: &RunConfig, dir: &Path) -> Result<()> {
        if cfg.mode == Mode::Simulate && cfg.output.csv {
            for (name, tab) in [
                ("profiles_vertical.csv", &self.vertical),
                ("profiles_horizontal.csv", &self.horizontal),
            ] {
                let path = dir.join(name);
                write_file(&path, &tab.to_csv())?;
                self.files.push(path);
            }
        }
        Ok(())
    }
}

fn run_simulation(cfg: &RunConfig, dir: &Path) -> Result<RunSummary> {
    let mut sim = Simulation::new(cfg)?;
    let mut col = Collector {
        vertical: ProfileTable::new(),
        horizontal: ProfileTable::new(),
        files: Vec::new(),
    };
    let snaps = &cfg.output.snapshot_steps;
    let half = 0.5 * cfg.initial_calcite();
    let mut threshold = None;
    let mut edge_gradient = None;
    if snaps.contains(&0) {
        col.snapshot(&sim, dir)?;
    }
    let mut failure = None;
    for k in 1..=cfg.n_steps {
        if let Err(e) = sim.advance() {
            failure = Some(e);
            break;
        }
        if threshold.is_none() && sim.edge_c_min() < half {
            threshold = Some((k, sim.state().t));
        }
        if snaps.contains(&k) {
            if edge_gradient.is_none() {
                edge_gradient = Some(sim.edge_c_gradient());
            }
            col.snapshot(&sim, dir)?;
        }
    }
    col.finish(cfg, dir)?;
    let audit_path = dir.join("audit.csv");
    write_file(&audit_path, &audit_csv(sim.report()))?;
    col.files.push(audit_path);
    let status = match &failure {
        None => "ok".to_string(),
        Some(e) => format!("failed: {e}"),
    };
    let man = dir.join("manifest.ini");
    write_file(&man, &manifest(cfg, &status, Some(sim.report())))?;
    col.files.push(man);
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(RunSummary {
        out_dir: dir.to_path_buf(),
        steps: sim.step_index(),
        report: sim.report().clone(),
        threshold,
        edge_gradient,
        convergence: None,
        files: col.files,
    })
}

/// Reads a run configuration file and applies `overrides` on top.
pub fn load_config(path: &Path, overrides: &[(String, String)]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    crate::config::parse_config(&text, overrides)
}

/// Worker cap from `SULPHSIM_THREADS`; 1 when unset or unreadable.
pub fn threads_from_env() -> usize {
    std::env::var("SULPHSIM_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

/// One run of a sweep. A configuration that failed to load is kept so
/// that it is reported rather than aborting the sweep.
#[derive(Clone, Debug)]
pub struct SweepEntry {
    pub name: String,
    pub config: std::result::Result<RunConfig, String>,
}

#[derive(Clone, Debug)]
pub struct SweepPlan {
    pub entries: Vec<SweepEntry>,
    pub summary: PathBuf,
}

/// Parses a sweep manifest. Keys before the first section may set
/// `summary` (the output CSV path); each `[name]` section is one run with an
/// optional `config` path and any number of overrides. Paths are relative
/// to the manifest. Runs without an explicit `out_dir` write to
/// `<manifest dir>/<name>`.
pub fn parse_sweep(text: &str, base: &Path) -> Result<SweepPlan> {
    let (general, sections) = parse_sections(text)?;
    let mut summary = base.join("sweep_summary.csv");
    for (k, v) in &general {
        match crate::config::normalize_key(k).as_str() {
            "summary" => summary = base.join(v.trim()),
            other => return Err(SimError::Config(format!("sweep manifest: unknown key {other:?}"))),
        }
    }
    let mut entries = Vec::new();
    for (name, pairs) in sections {
        let load = || -> Result<RunConfig> {
            let mut cfg = RunConfig::default();
            let mut rest = Vec::new();
            for (k, v) in &pairs {
                if crate::config::normalize_key(k) == "config" {
                    let path = base.join(v.trim());
                    let text = std::fs::read_to_string(&path).map_err(|e| SimError::io(&path, e))?;
                    apply(&mut cfg, &parse_pairs(&text)?)?;
                } else {
                    rest.push((k.clone(), v.clone()));
                }
            }
            let before = cfg.output.out_dir.clone();
            apply(&mut cfg, &rest)?;
            let named = rest.iter().any(|(k, _)| crate::config::normalize_key(k) == "out_dir");
            if !named && cfg.output.out_dir == before && before == RunConfig::default().output.out_dir {
                cfg.output.out_dir = base.join(&name);
            } else if cfg.output.out_dir.is_relative() {
                cfg.output.out_dir = base.join(&cfg.output.out_dir);
            }
            cfg.validate()?;
            Ok(cfg)
        };
        entries.push(SweepEntry {
            name: name.clone(),
            config: load().map_err(|e| e.to_string()),
        });
    }
    let mut seen = std::collections::HashSet::new();
    for e in &entries {
        if let Ok(c) = &e.config {
            if !seen.insert(c.output.out_dir.clone()) {
                return Err(SimError::Config(format!(
                    "sweep manifest: out_dir {} used by more than one run",
                    c.output.out_dir.display()
                )));
            }
        }
    }
    Ok(SweepPlan { entries, summary })
}

pub fn load_sweep(path: &Path) -> Result<SweepPlan> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_sweep(&text, base)
}

#[derive(Clone, Debug)]
pub struct SweepStatus {
    pub name: String,
    pub result: std::result::Result<RunSummary, String>,
}

/// Runs every entry on up to `workers` threads. Results keep manifest
/// order.
pub fn sweep(entries: &[SweepEntry], workers: usize) -> Vec<SweepStatus> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<SweepStatus>>> = Mutex::new(vec![None; entries.len()]);
    let job = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(entry) = entries.get(i) else { break };
        let result = match &entry.config {
            Ok(cfg) => run(cfg).map_err(|e| e.to_string()),
            Err(msg) => Err(msg.clone()),
        };
        slots.lock().expect("sweep slots")[i] = Some(SweepStatus {
            name: entry.name.clone(),
            result,
        });
    };
    std::thread::scope(|s| {
        for _ in 0..workers.max(1).min(entries.len().max(1)) {
            s.spawn(job);
        }
    });
    slots
        .into_inner()
        .expect("sweep slots")
        .into_iter()
        .map(|s| s.expect("every entry ran"))
        .collect()
}

pub fn sweep_summary_csv(statuses: &[SweepStatus]) -> String {
    let mut out = String::from("name,status,out_dir,threshold_step,threshold_t,max_edge_dc_dx2,message\n");
    let quote = |s: &str| format!("\"{}\"", s.replace('"', "\"\""));
    for st in statuses {
        let line = match &st.result {
            Ok(sum) => {
                let (step, t) = sum
                    .threshold
                    .map_or((String::new(), String::new()), |(k, t)| (k.to_string(), num(t)));
                let grad = sum.edge_gradient.map_or(String::new(), num);
                format!(
                    "{},ok,{},{step},{t},{grad},",
                    quote(&st.name),
                    quote(&sum.out_dir.display().to_string())
                )
            }
            Err(msg) => format!("{},failed,,,,,{}", quote(&st.name), quote(msg)),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}
