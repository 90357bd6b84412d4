use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use modsel::harness::{self, ExperimentConfig, ExperimentKind, HarnessError};

/// Model-selection experiments: tail-bound verification, hold-out
/// adaptivity, penalty calibration, Akaike diagnostics and change-point
/// segmentation.
#[derive(Parser)]
#[command(name = "modsel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo check of the ERM tail and expectation bounds.
    VerifyTail(RunArgs),
    /// Hold-out selection over a histogram roster, swept over sample sizes.
    HoldoutAdapt(RunArgs),
    /// Dimension jump and doubled penalty on the Mallows problem.
    Calibrate(RunArgs),
    /// Akaike diagnostics v_hat, b_hat and L(g_hat_m, g_m).
    AkaikeCheck(RunArgs),
    /// Slope-calibrated change-point segmentation.
    Segment(RunArgs),
    /// Merge run records of one kind into a comparison table.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment description; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Output directory for record.json and the CSV sidecars.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of processors.
    #[arg(long)]
    workers: Option<usize>,
    /// Exit with status 3 when any acceptance check fails.
    #[arg(long)]
    assert: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Record files or the directories holding them.
    #[arg(required = true)]
    records: Vec<PathBuf>,
    /// Also write the table as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

const DEFAULT_SEED: u64 = 20060101;
const DEFAULT_REPLICATES: usize = 1000;

enum Failure {
    Validation(String),
    Runtime(String),
    Assert,
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Validation(_) | HarnessError::Json(_) => {
                Failure::Validation(e.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load_config(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentConfig, HarnessError> {
    let mut config = match &args.config {
        Some(path) => {
            let c = ExperimentConfig::load(path)?;
            if c.kind() != kind {
                return Err(HarnessError::Validation(vec![format!(
                    "config describes a {} experiment, subcommand is {kind}",
                    c.kind()
                )]));
            }
            c
        }
        None => ExperimentConfig::new(kind, DEFAULT_SEED, DEFAULT_REPLICATES),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(r) = args.replicates {
        config.replicates = r;
    }
    if let Some(out) = &args.out {
        config.out_dir = Some(out.clone());
    }
    let mut problems = Vec::new();
    if args.workers == Some(0) {
        problems.push("workers must be at least 1".to_string());
    }
    match config.validate() {
        Ok(()) if problems.is_empty() => Ok(config),
        Ok(()) => Err(HarnessError::Validation(problems)),
        Err(HarnessError::Validation(mut v)) => {
            v.append(&mut problems);
            Err(HarnessError::Validation(v))
        }
        Err(e) => Err(e),
    }
}

fn run_experiment(kind: ExperimentKind, args: RunArgs) -> Result<(), Failure> {
    let config = load_config(kind, &args)?;
    if let Some(w) = args.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Failure::Runtime(format!("worker pool: {e}")))?;
    }
    let record = harness::run(&config)?;
    let dir = config
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("runs/{kind}-{}", config.seed)));
    let files = record.write(&dir)?;

    println!(
        "{kind}: {} replicates in {:.2}s",
        config.replicates, record.elapsed_seconds
    );
    for (k, v) in &record.aggregates {
        println!("  {k:<32} {v}");
    }
    for c in &record.checks {
        println!(
            "  [{}] {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    for f in files {
        println!("  wrote {}", f.display());
    }
    if args.assert && !record.passed() {
        return Err(Failure::Assert);
    }
    Ok(())
}

fn run_report(args: ReportArgs) -> Result<(), Failure> {
    let table = harness::report(&args.records)?;
    print!("{table}");
    if let Some(out) = &args.out {
        table.write_csv(out)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::VerifyTail(a) => run_experiment(ExperimentKind::VerifyTail, a),
        Command::HoldoutAdapt(a) => run_experiment(ExperimentKind::HoldoutAdapt, a),
        Command::Calibrate(a) => run_experiment(ExperimentKind::Calibrate, a),
        Command::AkaikeCheck(a) => run_experiment(ExperimentKind::AkaikeCheck, a),
        Command::Segment(a) => run_experiment(ExperimentKind::Segment, a),
        Command::Report(a) => run_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Assert) => {
            eprintln!("error: acceptance checks failed");
            ExitCode::from(3)
        }
    }
}
