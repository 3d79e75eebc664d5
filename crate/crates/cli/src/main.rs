use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use sulphsim::config::{parse_config, parse_override, RunConfig};
use sulphsim::diagnostics::{mms_convergence, MmsOptions, Study};
use sulphsim::driver::{load_sweep, run, sweep, sweep_summary_csv, threads_from_env};
use sulphsim::output::write_file;

#[derive(Parser)]
#[command(name = "sulphsim", version, about = "Marble sulphation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StudyArg {
    Spatial,
    Temporal,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a key, e.g. `--set nu_law=parabolic`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Abort on the first invariant violation.
        #[arg(long)]
        strict: bool,
        /// Further overrides written as `--key=value`.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, hide = true)]
        extra: Vec<String>,
    },
    /// Manufactured-solution convergence study.
    Mms {
        #[arg(long, value_enum)]
        study: StudyArg,
        #[arg(long, default_value_t = 4)]
        levels: usize,
        /// Also write the table to this CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every configuration listed in a sweep manifest.
    Sweep {
        #[arg(long)]
        manifest: PathBuf,
    },
}

fn cmd_run(
    config: Option<PathBuf>,
    set: Vec<String>,
    out: Option<PathBuf>,
    strict: bool,
    extra: Vec<String>,
) -> Result<ExitCode> {
    let mut overrides = Vec::new();
    for arg in set.iter().chain(&extra) {
        overrides.push(parse_override(arg)?);
    }
    if let Some(dir) = out {
        overrides.push(("out_dir".into(), dir.display().to_string()));
    }
    if strict {
        overrides.push(("strict".into(), "true".into()));
    }
    let text = match &config {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => String::new(),
    };
    let cfg: RunConfig = parse_config(&text, &overrides)?;
    let summary = run(&cfg)?;
    if let Some(table) = &summary.convergence {
        print!("{}", table.to_csv());
    } else {
        for line in summary.report.summary() {
            eprintln!("{line}");
        }
        if let Some((k, t)) = summary.threshold {
            eprintln!("edge threshold reached at step {k} (t = {t})");
        }
    }
    eprintln!("artifacts in {}", summary.out_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_mms(study: StudyArg, levels: usize, out: Option<PathBuf>) -> Result<ExitCode> {
    let study = match study {
        StudyArg::Spatial => Study::Spatial,
        StudyArg::Temporal => Study::Temporal,
    };
    let table = mms_convergence(study, levels, &MmsOptions::default())?;
    let csv = table.to_csv();
    print!("{csv}");
    if let Some(path) = out {
        write_file(&path, &csv)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(manifest: PathBuf) -> Result<ExitCode> {
    let plan = load_sweep(&manifest)?;
    let statuses = sweep(&plan.entries, threads_from_env());
    write_file(&plan.summary, &sweep_summary_csv(&statuses))?;
    let failed: Vec<_> = statuses.iter().filter(|s| s.result.is_err()).collect();
    eprintln!(
        "{} runs, {} failed; summary in {}",
        statuses.len(),
        failed.len(),
        plan.summary.display()
    );
    for s in &failed {
        if let Err(msg) = &s.result {
            eprintln!("  {}: {msg}", s.name);
        }
    }
    Ok(if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            set,
            out,
            strict,
            extra,
        } => {
            if let Some(bad) = extra.iter().find(|a| !a.starts_with("--") || !a.contains('=')) {
                Err(anyhow::anyhow!("unexpected argument {bad:?}; overrides take the form --key=value"))
            } else {
                cmd_run(config, set, out, strict, extra)
            }
        }
        Command::Mms { study, levels, out } => {
            if levels < 3 {
                Err(anyhow::anyhow!("--levels must be at least 3"))
            } else {
                cmd_mms(study, levels, out)
            }
        }
        Command::Sweep { manifest } => cmd_sweep(manifest),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
