use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use collapse_core::io::{self, LoadOptions};
use collapse_core::pipeline::{self, Command, RunParams};
use collapse_core::Tolerances;

#[derive(Parser)]
#[command(
    name = "collapse-lab",
    version,
    about = "Collapse diagnostics for belief-based value tables"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Load and validate a scenario.
    Validate(Args),
    /// Envelopes and supports over the lattice.
    Envelope(Args),
    /// Full diagnostics report.
    Diagnose(Args),
    /// Global collapse verdict with hits and certificate.
    Collapse(Args),
    /// Optimal date-0 splitting and execution dates.
    Terminal(Args),
    /// Polytope and cone certificates.
    Certify(Args),
    /// Points above the support envelope.
    HitScan(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    /// Also report verdicts across the default eps ladder.
    #[arg(long)]
    eps_sweep: bool,
    /// Verdict tolerance on the revenue scale.
    #[arg(long, env = "COLLAPSE_LAB_TOL")]
    tol: Option<f64>,
    /// Lattice resolution (two types) or denominator.
    #[arg(long)]
    grid: Option<u32>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for CSV tables.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Sets the scenario parameter `delta`.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    quiet: bool,
}

impl Cmd {
    fn split(self) -> (Command, Args) {
        match self {
            Cmd::Validate(a) => (Command::Validate, a),
            Cmd::Envelope(a) => (Command::Envelope, a),
            Cmd::Diagnose(a) => (Command::Diagnose, a),
            Cmd::Collapse(a) => (Command::Collapse, a),
            Cmd::Terminal(a) => (Command::Terminal, a),
            Cmd::Certify(a) => (Command::Certify, a),
            Cmd::HitScan(a) => (Command::HitScan, a),
        }
    }
}

fn execute(cmd: Command, args: Args) -> Result<i32> {
    let mut tolerances = Tolerances::default();
    if let Some(t) = args.tol {
        anyhow::ensure!(t > 0.0 && t.is_finite(), "--tol must be positive");
        tolerances = tolerances.with_val(t);
    }
    anyhow::ensure!(args.eps >= 0.0, "--eps must be nonnegative");
    let mut params = BTreeMap::new();
    if let Some(d) = args.delta {
        params.insert("delta".to_string(), d);
    }
    let opts = LoadOptions {
        grid: args.grid,
        params,
        tolerances,
    };
    let loaded = io::load(&args.scenario, &opts)
        .with_context(|| format!("loading {}", args.scenario.display()))?;
    if !args.quiet {
        for w in &loaded.warnings {
            eprintln!(
                "warning: date {} table {:?} breaks monotonicity by {:e} at {:?}",
                w.t,
                w.label,
                w.gap,
                w.belief.weights()
            );
        }
    }
    let run = pipeline::run(
        cmd,
        &loaded.scenario,
        &RunParams {
            eps: args.eps,
            eps_sweep: args.eps_sweep,
            tolerances,
            ..Default::default()
        },
    );
    let text = io::to_canonical_json(&run.report)?;
    match &args.out {
        Some(path) => {
            fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?
        }
        None if !args.quiet => print!("{text}"),
        None => {}
    }
    if let Some(dir) = &args.csv {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for t in &run.tables {
            let path = dir.join(&t.name);
            let file =
                fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            io::write_csv(file, &t.header, &t.rows)
                .with_context(|| format!("writing {}", path.display()))?;
        }
    }
    if !args.quiet {
        for (name, s) in &run.report.sections {
            if let pipeline::Section::Error { error } = s {
                eprintln!("error in {name}: {error}");
            }
        }
    }
    Ok(run.report.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (cmd, args) = cli.command.split();
    match execute(cmd, args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
