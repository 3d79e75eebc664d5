//! Run configuration: INI-style `key = value` documents, overrides and the
//! resolved manifest.

use std::fmt::Write as _;
use std::path::PathBuf;

use ini::{Ini, ParseOption};

use crate::error::{Result, SimError};
use crate::grid::{build_grid, extract_profile, Edge, EdgeTag, EdgeTags, ProfileLine};
use crate::model::{ConstraintMode, NuLaw, PhysParams, Potential};
use crate::surface::RugosityInit;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Simulate,
    MmsSpatial,
    MmsTemporal,
    /// Steps and audits without writing profiles or fields.
    AuditOnly,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::MmsSpatial => "mms_spatial",
            Mode::MmsTemporal => "mms_temporal",
            Mode::AuditOnly => "audit_only",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    /// Vertical profile lines `x1 = a`.
    pub profile_x1: Vec<f64>,
    /// Horizontal profile lines `x2 = b`.
    pub profile_x2: Vec<f64>,
    pub snapshot_steps: Vec<usize>,
    pub csv: bool,
    pub vtk: bool,
    pub out_dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            profile_x1: vec![0.0],
            profile_x2: vec![0.25, 0.75],
            snapshot_steps: vec![5, 15, 50, 100],
            csv: true,
            vtk: true,
            out_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub params: PhysParams<f64>,
    pub validate_global_bound: bool,
    pub nx: usize,
    pub ny: usize,
    pub edges: EdgeTags,
    pub dt: f64,
    pub n_steps: usize,
    pub picard_iters: usize,
    pub rel_tol: f64,
    pub seed: u64,
    pub r_init: RugosityInit<f64>,
    /// Initial calcite density; `None` starts from `C0`.
    pub c_init: Option<f64>,
    pub output: OutputConfig,
    pub mode: Mode,
    pub strict: bool,
    pub mms_levels: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: PhysParams::default(),
            validate_global_bound: true,
            nx: 65,
            ny: 65,
            edges: EdgeTags::left_exposed(),
            dt: 1.0 / 5000.0,
            n_steps: 100,
            picard_iters: 2,
            rel_tol: crate::bulk::DEFAULT_REL_TOL,
            seed: 0,
            r_init: RugosityInit::piecewise_default(),
            c_init: None,
            output: OutputConfig::default(),
            mode: Mode::Simulate,
            strict: false,
            mms_levels: 4,
        }
    }
}

/// Every recognized key, in manifest order.
pub const KEYS: &[&str] = &[
    "a",
    "b",
    "lambda",
    "c0",
    "s0",
    "sbar",
    "g",
    "r0",
    "nu_law",
    "nu0",
    "nul",
    "rl",
    "weibull_m",
    "weibull_r0",
    "constraint_mode",
    "psi",
    "f_ext",
    "validate_global_bound",
    "nx",
    "ny",
    "exposed_edges",
    "dt",
    "n_steps",
    "picard_iters",
    "rel_tol",
    "seed",
    "r_init",
    "r_init_value",
    "r_init_lo",
    "r_init_hi",
    "r_init_split",
    "c_init",
    "profile_x1",
    "profile_x2",
    "snapshot_steps",
    "formats",
    "out_dir",
    "mode",
    "strict",
    "mms_levels",
];

/// Canonical form of a key: trimmed, lower case, `-` read as `_`.
pub fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

fn bad(key: &str, value: &str, want: &str) -> SimError {
    SimError::Config(format!("{key}: cannot read {value:?} as {want}"))
}

fn float(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>().map_err(|_| bad(key, v, "a number"))
}

fn count(key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>().map_err(|_| bad(key, v, "a nonnegative integer"))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(bad(key, v, "a boolean")),
    }
}

fn list<T>(key: &str, v: &str, item: impl Fn(&str, &str) -> Result<T>) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| item(key, s))
        .collect()
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Sets one key from its textual value. Unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = normalize_key(key);
        let v = value.trim();
        let k = key.as_str();
        let p = &mut self.params;
        match k {
            "a" => p.porosity_offset = float(k, v)?,
            "b" => p.porosity_slope = float(k, v)?,
            "lambda" => p.reaction_rate = float(k, v)?,
            "c0" => p.calcite_max = float(k, v)?,
            "s0" => p.so2_ceiling = float(k, v)?,
            "sbar" => p.ambient_so2 = float(k, v)?,
            "g" => p.rugosity_rate = float(k, v)?,
            "r0" => p.rugosity_cap = float(k, v)?,
            "nu_law" => {
                p.nu_law = match v.to_ascii_lowercase().as_str() {
                    "linear" => NuLaw::Linear,
                    "parabolic" => NuLaw::Parabolic,
                    _ => return Err(bad(k, v, "linear or parabolic")),
                }
            }
            "nu0" => p.nu_flat = float(k, v)?,
            "nul" => p.nu_ref = float(k, v)?,
            "rl" => p.r_ref = float(k, v)?,
            "weibull_m" => p.weibull_shape = float(k, v)?,
            "weibull_r0" => p.weibull_scale = float(k, v)?,
            "constraint_mode" => {
                p.constraint = match v.to_ascii_lowercase().as_str() {
                    "free" => ConstraintMode::Free,
                    "box" => ConstraintMode::Box,
                    _ => return Err(bad(k, v, "free or box")),
                }
            }
            "psi" => {
                let c = list(k, v, float)?;
                if c.len() > 4 {
                    return Err(bad(k, v, "at most 4 polynomial coefficients"));
                }
                let mut coeffs = [0.0; 4];
                coeffs[..c.len()].copy_from_slice(&c);
                p.potential = Potential { coeffs };
            }
            "f_ext" => p.forcing = float(k, v)?,
            "validate_global_bound" => self.validate_global_bound = flag(k, v)?,
            "nx" => self.nx = count(k, v)?,
            "ny" => self.ny = count(k, v)?,
            "exposed_edges" => {
                let mut tags = EdgeTags::all_isolated();
                for name in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    if name.eq_ignore_ascii_case("none") {
                        continue;
                    }
                    let e = Edge::parse(name).ok_or_else(|| bad(k, name, "left, bottom, right or top"))?;
                    tags.set(e, EdgeTag::Exposed);
                }
                self.edges = tags;
            }
            "dt" => self.dt = float(k, v)?,
            "n_steps" => self.n_steps = count(k, v)?,
            "picard_iters" => self.picard_iters = count(k, v)?,
            "rel_tol" => self.rel_tol = float(k, v)?,
            "seed" => self.seed = v.parse().map_err(|_| bad(k, v, "a 64-bit unsigned integer"))?,
            "r_init" => {
                self.r_init = match v.to_ascii_lowercase().as_str() {
                    "constant" => RugosityInit::Constant(0.0),
                    "piecewise" => RugosityInit::piecewise_default(),
                    "weibull" => RugosityInit::WeibullRandom,
                    _ => return Err(bad(k, v, "constant, piecewise or weibull")),
                }
            }
            "r_init_value" => {
                let x = float(k, v)?;
                match &mut self.r_init {
                    RugosityInit::Constant(c) => *c = x,
                    _ => return Err(SimError::Config("r_init_value needs r_init = constant".into())),
                }
            }
            "r_init_lo" | "r_init_hi" | "r_init_split" => {
                let x = float(k, v)?;
                match &mut self.r_init {
                    RugosityInit::Piecewise { lo, hi, split } => match k {
                        "r_init_lo" => *lo = x,
                        "r_init_hi" => *hi = x,
                        _ => *split = x,
                    },
                    _ => return Err(SimError::Config(format!("{k} needs r_init = piecewise"))),
                }
            }
            "c_init" => self.c_init = Some(float(k, v)?),
            "profile_x1" => self.output.profile_x1 = list(k, v, float)?,
            "profile_x2" => self.output.profile_x2 = list(k, v, float)?,
            "snapshot_steps" => {
                let mut s = list(k, v, count)?;
                s.sort_unstable();
                s.dedup();
                self.output.snapshot_steps = s;
            }
            "formats" => {
                self.output.csv = false;
                self.output.vtk = false;
                for f in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    match f.to_ascii_lowercase().as_str() {
                        "csv" => self.output.csv = true,
                        "vtk" => self.output.vtk = true,
                        "none" => {}
                        _ => return Err(bad(k, f, "csv or vtk")),
                    }
                }
            }
            "out_dir" => self.output.out_dir = PathBuf::from(v),
            "mode" => {
                self.mode = match v.to_ascii_lowercase().replace('-', "_").as_str() {
                    "simulate" => Mode::Simulate,
                    "mms_spatial" => Mode::MmsSpatial,
                    "mms_temporal" => Mode::MmsTemporal,
                    "audit_only" => Mode::AuditOnly,
                    _ => return Err(bad(k, v, "simulate, mms_spatial, mms_temporal or audit_only")),
                }
            }
            "strict" => self.strict = flag(k, v)?,
            "mms_levels" => self.mms_levels = count(k, v)?,
            _ => return Err(SimError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Textual value of a key as written to the manifest; `None` when the
    /// key does not apply to the current settings.
    pub fn get(&self, key: &str) -> Option<String> {
        let p = &self.params;
        let o = &self.output;
        Some(match normalize_key(key).as_str() {
            "a" => p.porosity_offset.to_string(),
            "b" => p.porosity_slope.to_string(),
            "lambda" => p.reaction_rate.to_string(),
            "c0" => p.calcite_max.to_string(),
            "s0" => p.so2_ceiling.to_string(),
            "sbar" => p.ambient_so2.to_string(),
            "g" => p.rugosity_rate.to_string(),
            "r0" => p.rugosity_cap.to_string(),
            "nu_law" => match p.nu_law {
                NuLaw::Linear => "linear".into(),
                NuLaw::Parabolic => "parabolic".into(),
            },
            "nu0" => p.nu_flat.to_string(),
            "nul" => p.nu_ref.to_string(),
            "rl" => p.r_ref.to_string(),
            "weibull_m" => p.weibull_shape.to_string(),
            "weibull_r0" => p.weibull_scale.to_string(),
            "constraint_mode" => match p.constraint {
                ConstraintMode::Free => "free".into(),
                ConstraintMode::Box => "box".into(),
            },
            "psi" => join(&p.potential.coeffs),
            "f_ext" => p.forcing.to_string(),
            "validate_global_bound" => self.validate_global_bound.to_string(),
            "nx" => self.nx.to_string(),
            "ny" => self.ny.to_string(),
            "exposed_edges" => {
                let names: Vec<&str> = self.edges.exposed().map(Edge::name).collect();
                if names.is_empty() {
                    "none".into()
                } else {
                    names.join(",")
                }
            }
            "dt" => self.dt.to_string(),
            "n_steps" => self.n_steps.to_string(),
            "picard_iters" => self.picard_iters.to_string(),
            "rel_tol" => self.rel_tol.to_string(),
            "seed" => self.seed.to_string(),
            "r_init" => match self.r_init {
                RugosityInit::Constant(_) => "constant".into(),
                RugosityInit::Piecewise { .. } => "piecewise".into(),
                RugosityInit::WeibullRandom => "weibull".into(),
            },
            "r_init_value" => match self.r_init {
                RugosityInit::Constant(v) => v.to_string(),
                _ => return None,
            },
            "r_init_lo" | "r_init_hi" | "r_init_split" => match self.r_init {
                RugosityInit::Piecewise { lo, hi, split } => match normalize_key(key).as_str() {
                    "r_init_lo" => lo.to_string(),
                    "r_init_hi" => hi.to_string(),
                    _ => split.to_string(),
                },
                _ => return None,
            },
            "c_init" => self.c_init?.to_string(),
            "profile_x1" => join(&o.profile_x1),
            "profile_x2" => join(&o.profile_x2),
            "snapshot_steps" => join(&o.snapshot_steps),
            "formats" => {
                let mut f = Vec::new();
                if o.csv {
                    f.push("csv");
                }
                if o.vtk {
                    f.push("vtk");
                }
                if f.is_empty() {
                    "none".into()
                } else {
                    f.join(",")
                }
            }
            "out_dir" => o.out_dir.display().to_string(),
            "mode" => self.mode.name().into(),
            "strict" => self.strict.to_string(),
            "mms_levels" => self.mms_levels.to_string(),
            _ => return None,
        })
    }

    /// Initial calcite density actually used.
    pub fn initial_calcite(&self) -> f64 {
        self.c_init.unwrap_or(self.params.calcite_max)
    }

    /// Checks every parameter and run invariant, listing all violations.
    pub fn validate(&self) -> Result<()> {
        let mut msgs = match self.params.validate(self.validate_global_bound) {
            Ok(()) => Vec::new(),
            Err(SimError::Assumptions(m)) => m,
            Err(e) => return Err(e),
        };
        let mut need = |ok: bool, msg: String| {
            if !ok {
                msgs.push(msg);
            }
        };
        need(self.dt > 0.0 && self.dt.is_finite(), "dt>0".into());
        need(self.n_steps >= 1, "n_steps>=1".into());
        need(self.picard_iters >= 1, "picard_iters>=1".into());
        need(self.rel_tol > 0.0 && self.rel_tol < 1.0, "0<rel_tol<1".into());
        need(self.nx >= 3 && self.ny >= 3, "nx>=3 and ny>=3".into());
        need(self.edges.exposed().next().is_some(), "at least one exposed edge".into());
        let c0 = self.initial_calcite();
        need(
            (0.0..=self.params.calcite_max).contains(&c0),
            "(A4): 0<=c_init<=C0".into(),
        );
        match self.r_init {
            RugosityInit::Constant(v) => need(v >= 0.0, "r_init_value>=0".into()),
            RugosityInit::Piecewise { lo, hi, split } => {
                need(lo >= 0.0 && hi >= 0.0, "r_init_lo>=0 and r_init_hi>=0".into());
                need(split > 0.0 && split < 1.0, "0<r_init_split<1".into());
            }
            RugosityInit::WeibullRandom => {}
        }
        for &s in &self.output.snapshot_steps {
            need(s <= self.n_steps, format!("snapshot step {s} beyond n_steps={}", self.n_steps));
        }
        need(self.mms_levels >= 3, "mms_levels>=3".into());
        if self.nx >= 3 && self.ny >= 3 {
            if let Ok(grid) = build_grid::<f64>(self.nx, self.ny, self.edges) {
                let probe = vec![0.0; grid.n_nodes()];
                let lines = self
                    .output
                    .profile_x1
                    .iter()
                    .map(|&a| ProfileLine::Vertical(a))
                    .chain(self.output.profile_x2.iter().map(|&b| ProfileLine::Horizontal(b)));
                for line in lines {
                    if extract_profile(&probe, &grid, line).is_err() {
                        msgs.push(format!("profile line {line} not aligned with the grid"));
                    }
                }
            }
        }
        if msgs.is_empty() {
            Ok(())
        } else {
            Err(SimError::Assumptions(msgs))
        }
    }

    /// Resolved configuration in the same dialect `parse_config` reads.
    pub fn to_ini(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            if let Some(v) = self.get(key) {
                let _ = writeln!(out, "{key} = {v}");
            }
        }
        out
    }
}

fn ini_options() -> ParseOption {
    ParseOption {
        enabled_quote: false,
        enabled_escape: false,
        ..ParseOption::default()
    }
}

/// Reads a document into `(key, value)` pairs in file order. Sections are
/// rejected; use [`parse_sections`] for documents that have them.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let doc = Ini::load_from_str_opt(text, ini_options())
        .map_err(|e| SimError::Config(format!("parse error: {e}")))?;
    let mut out = Vec::new();
    for (section, props) in doc.iter() {
        if let Some(name) = section {
            return Err(SimError::Config(format!("unexpected section [{name}]")));
        }
        out.extend(props.iter().map(|(k, v)| (k.to_string(), v.to_string())));
    }
    Ok(out)
}

/// Keys before the first section, then each named section in order.
pub type Sections = (Vec<(String, String)>, Vec<(String, Vec<(String, String)>)>);

pub fn parse_sections(text: &str) -> Result<Sections> {
    let doc = Ini::load_from_str_opt(text, ini_options())
        .map_err(|e| SimError::Config(format!("parse error: {e}")))?;
    let mut general = Vec::new();
    let mut named = Vec::new();
    for (section, props) in doc.iter() {
        let pairs: Vec<(String, String)> = props.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        match section {
            None => general.extend(pairs),
            Some(name) => named.push((name.to_string(), pairs)),
        }
    }
    Ok((general, named))
}

/// Defaults, overlaid by the document, overlaid by `overrides`, then
/// validated.
pub fn parse_config(text: &str, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    apply(&mut cfg, &parse_pairs(text)?)?;
    apply(&mut cfg, overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Applies pairs in order. `r_init` is applied before its shape keys so
/// that a document may list them in any order.
pub fn apply(cfg: &mut RunConfig, pairs: &[(String, String)]) -> Result<()> {
    let is_mode = |k: &str| normalize_key(k) == "r_init";
    for (k, v) in pairs.iter().filter(|(k, _)| is_mode(k)) {
        cfg.set(k, v)?;
    }
    for (k, v) in pairs.iter().filter(|(k, _)| !is_mode(k)) {
        cfg.set(k, v)?;
    }
    Ok(())
}

/// Splits `key=value`.
pub fn parse_override(arg: &str) -> Result<(String, String)> {
    let arg = arg.trim_start_matches("--");
    let (k, v) = arg
        .split_once('=')
        .ok_or_else(|| SimError::Config(format!("expected key=value, got {arg:?}")))?;
    Ok((normalize_key(k), v.trim().to_string()))
}
