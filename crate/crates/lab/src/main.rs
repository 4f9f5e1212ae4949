use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ising_kac_lab::ode::{ode_comparison_check, randomized_comparison};
use ising_kac_lab::records::{fmt_real, CsvSink};
use ising_kac_lab::{run_experiment, ExperimentConfig, LabResult, Mode};

#[derive(Parser)]
#[command(name = "ising-kac", version, about = "Ising-Kac Glauber dynamics and Φ⁴₂ experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Glauber chain trajectories and summaries.
    Glauber(RunArgs),
    /// Dynamical Φ⁴₂ trajectories and summaries.
    Phi42(RunArgs),
    /// Exact enumeration on a small torus.
    Oracle(RunArgs),
    /// Glauber versus Φ⁴₂ distribution comparison.
    Compare(RunArgs),
    /// Kernel constants and dumps over a γ sweep.
    KernelScan(RunArgs),
    /// Besov inequality ratios on a field corpus.
    BesovCorpus(RunArgs),
    /// Comparison test for f' = −2c₁f^λ + c₂.
    OdeCheck(OdeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct OdeArgs {
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    #[arg(long, default_value_t = 0.0)]
    c2: f64,
    #[arg(long, default_value_t = 2.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    f0: f64,
    #[arg(long = "t-end", default_value_t = 1.0)]
    t_end: f64,
    /// Check this many random parameter draws instead.
    #[arg(long)]
    random: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Writes the trace as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(mode: Mode, args: RunArgs) -> LabResult<()> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.mode = mode;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(r) = args.replicas {
        cfg.replicas = r;
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    if let Some(o) = args.out {
        cfg.out = Some(o);
    }
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from(format!("out/{}", mode.id())));
    let summary = run_experiment(&cfg, &out)?;
    for r in &summary.rows {
        println!(
            "γ = {}  N = {}  {}: {} ± {}",
            r.lattice.gamma, r.lattice.n, r.observable, r.mean, r.stderr
        );
    }
    println!("outputs in {}", out.display());
    Ok(())
}

fn ode(args: OdeArgs) -> LabResult<bool> {
    if let Some(count) = args.random {
        let r = randomized_comparison(args.seed, count)?;
        println!("{count} draws, {} violations, max excess {:e}", r.violations, r.max_excess);
        return Ok(r.violations == 0);
    }
    let out = ode_comparison_check(args.c1, args.c2, args.lambda, args.f0, args.t_end)?;
    println!("{} mesh points, max excess {:e}, bound holds: {}", out.t.len(), out.max_excess, out.holds);
    if let Some(path) = args.out {
        let mut sink = CsvSink::create(&path, &["t", "f", "bound"])?;
        for ((t, f), b) in out.t.iter().zip(&out.f).zip(&out.bound) {
            sink.write_row([fmt_real(*t), fmt_real(*f), fmt_real(*b)])?;
        }
    }
    Ok(out.holds)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Glauber(a) => run(Mode::Glauber, a).map(|_| true),
        Command::Phi42(a) => run(Mode::Phi42, a).map(|_| true),
        Command::Oracle(a) => run(Mode::Oracle, a).map(|_| true),
        Command::Compare(a) => run(Mode::Compare, a).map(|_| true),
        Command::KernelScan(a) => run(Mode::KernelScan, a).map(|_| true),
        Command::BesovCorpus(a) => run(Mode::BesovCorpus, a).map(|_| true),
        Command::OdeCheck(a) => ode(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
