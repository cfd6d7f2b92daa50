//! Command-line driver: config parsing, commands and the output manifest.

pub mod commands;
pub mod config;
pub mod output;

use clap::{Parser, Subcommand};
use commands::{CompareArgs, Outcome};
use commands::Init;
use config::{parse_config, validate, ConfigError, RunConfig};
use output::OutputDir;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Config used when neither `--config` nor a config next to the field is given.
pub const DEFAULT_CONFIG: &str = "group.dihedral = 3\ngrid.R = 8\n";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] equivar::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("output: {0}")]
    Output(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for bad input, 1 for failures while computing.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "equivar", version, about = "Equivariant vector Allen-Cahn minimizers under finite reflection groups")]
pub struct Cli {
    /// Run configuration file (`key = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the `out` key.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Random seed; overrides the `seed` key.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Suppress progress messages on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the group, the orbit of a1 and the fundamental region D.
    Group,
    /// Relax a starting field by projected gradient flow.
    Solve {
        /// Domain radius; overrides grid.R.
        #[arg(long = "R")]
        radius: Option<f64>,
        /// Mesh width; overrides grid.h.
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        /// Residual tolerance; overrides flow.tol.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long = "max-steps")]
        max_steps: Option<usize>,
        /// Starting field: `affine` or a field CSV.
        #[arg(long, default_value = "affine")]
        init: String,
    },
    /// Run the diagnostics on a stored field.
    Verify {
        /// Field CSV; defaults to field.csv in the output directory.
        #[arg(long)]
        field: Option<PathBuf>,
        /// Where to write the diagnostics report; defaults to verify_report.json in the output directory.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Energy against domain radius.
    Sweep,
    /// Build the radial comparison barrier and check its constants.
    Compare {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long = "qbar")]
        q_bar: Option<f64>,
        #[arg(long = "Qmax")]
        q_max: Option<f64>,
        #[arg(long = "l0-hint")]
        l0_hint: Option<f64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Group => "group",
            Command::Solve { .. } => "solve",
            Command::Verify { .. } => "verify",
            Command::Sweep => "sweep",
            Command::Compare { .. } => "compare",
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let text = match (&cli.config, &cli.command) {
        (Some(p), _) => read(p)?,
        (None, Command::Verify { field: Some(f), .. }) => {
            let beside = f.parent().unwrap_or(Path::new(".")).join("config.txt");
            if beside.is_file() {
                read(&beside)?
            } else {
                DEFAULT_CONFIG.to_string()
            }
        }
        (None, Command::Verify { field: None, .. }) => {
            let beside = cli.out.as_deref().unwrap_or(Path::new("out")).join("config.txt");
            if beside.is_file() {
                read(&beside)?
            } else {
                DEFAULT_CONFIG.to_string()
            }
        }
        (None, _) => DEFAULT_CONFIG.to_string(),
    };
    let mut cfg = parse_config(&text)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Command::Solve {
        radius,
        h,
        dt,
        tol,
        max_steps,
        ..
    } = &cli.command
    {
        if let Some(r) = radius {
            cfg.radius = *r;
        }
        if let Some(h) = h {
            cfg.h = *h;
        }
        if dt.is_some() {
            cfg.flow.dt = *dt;
        }
        if let Some(t) = tol {
            cfg.flow.tol = *t;
        }
        if let Some(m) = max_steps {
            cfg.flow.max_steps = *m;
        }
        validate(&cfg)?;
    }
    Ok(cfg)
}

/// Runs one command end to end, including config echo and manifest.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = load_config(cli)?;
    let mut out = OutputDir::create(&cfg.out, cli.quiet).map_err(|e| CliError::Io {
        path: cfg.out.clone(),
        source: e,
    })?;
    // read the field before anything in the output directory is rewritten
    let field = match &cli.command {
        Command::Verify { field, .. } => Some(field.clone().unwrap_or_else(|| cfg.out.join("field.csv"))),
        _ => None,
    };
    let text = commands::write_config(&out, &cfg)?;
    let mut outcome = match &cli.command {
        Command::Group => commands::cmd_group(&cfg, &mut out)?,
        Command::Solve { init, .. } => {
            let init = if init == "affine" {
                Init::Affine
            } else {
                Init::File(PathBuf::from(init))
            };
            commands::cmd_solve(&cfg, &init, &mut out)?
        }
        Command::Verify { report, .. } => {
            commands::cmd_verify(&cfg, field.as_deref().unwrap_or(Path::new("")), report.as_deref(), &mut out)?
        }
        Command::Sweep => commands::cmd_sweep(&cfg, &mut out)?,
        Command::Compare {
            n,
            c,
            q_bar,
            q_max,
            l0_hint,
        } => commands::cmd_compare(
            &cfg,
            &CompareArgs {
                n: *n,
                c: *c,
                q_bar: *q_bar,
                q_max: *q_max,
                l0_hint: *l0_hint,
            },
            &mut out,
        )?,
    };
    out.finish(cli.command.name(), cfg.seed, &text)?;
    outcome.out_dir = cfg.out.clone();
    Ok(outcome)
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(o) => {
            if !o.failed.is_empty() {
                eprintln!("failed checks: {}", o.failed.join(", "));
            }
            o.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
