use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mflab_cli::acceptance::{run_suite, SuiteOptions};
use mflab_cli::artifacts::RunStatus;
use mflab_cli::config::{ExperimentName, Overrides};
use mflab_cli::{resolve, run, CliError};

#[derive(Parser)]
#[command(name = "mflab", version, about = "Mean-field jump process experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean-field equation
    SolveMf(RunOpts),
    /// Averaged N-particle mean-field equation
    SolveAveraged(RunOpts),
    /// Exact N-particle master equation
    Master(RunOpts),
    /// Stochastic particle simulation
    Simulate(RunOpts),
    /// Relative-entropy chaos bound across N
    ChaosExperiment(RunOpts),
    /// Exponential-moment concentration test
    ConcentrationTest(RunOpts),
    /// Kernel conditions and approximation rate
    VerifyConditions(RunOpts),
    /// Entropy inequalities on random instances
    InequalitySuite(RunOpts),
    /// Run the acceptance criteria and write summary.json
    Suite {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        cap_states: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Criterion ids to run; all when empty
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

#[derive(Args)]
struct RunOpts {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    cap_states: Option<usize>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    /// Parse and resolve the config, then exit
    #[arg(long)]
    validate: bool,
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let (experiment, opts) = match Cli::parse().command {
        Command::SolveMf(o) => (ExperimentName::SolveMf, o),
        Command::SolveAveraged(o) => (ExperimentName::SolveAveraged, o),
        Command::Master(o) => (ExperimentName::Master, o),
        Command::Simulate(o) => (ExperimentName::Simulate, o),
        Command::ChaosExperiment(o) => (ExperimentName::ChaosExperiment, o),
        Command::ConcentrationTest(o) => (ExperimentName::ConcentrationTest, o),
        Command::VerifyConditions(o) => (ExperimentName::VerifyConditions, o),
        Command::InequalitySuite(o) => (ExperimentName::InequalitySuite, o),
        Command::Suite { seed, cap_states, out, only } => return suite(seed, cap_states, &out, &only),
    };
    run_one(experiment, opts)
}

fn run_one(experiment: ExperimentName, opts: RunOpts) -> ExitCode {
    let over = Overrides {
        seed: opts.seed,
        dt: opts.dt,
        t_end: opts.t_end,
        cap_states: opts.cap_states,
        replicas: opts.replicas,
        samples: opts.samples,
    };
    if opts.validate {
        return match resolve(experiment, &opts.config, &over) {
            Ok(_) => {
                println!("config ok");
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        };
    }
    match run(experiment, &opts.config, &over, &opts.out) {
        Ok((dir, m)) => match m.status {
            RunStatus::Pass => {
                println!("pass: {}", dir.display());
                ExitCode::SUCCESS
            }
            RunStatus::SkippedCap => {
                println!("skipped: cap: {}", dir.display());
                ExitCode::SUCCESS
            }
            RunStatus::Fail => {
                for a in m.assertions.iter().filter(|a| !a.pass) {
                    eprintln!("assertion failed: {} ({})", a.name, a.detail);
                }
                eprintln!("report: {}", dir.join("report.json").display());
                ExitCode::from(1)
            }
        },
        Err(e) => fail(e),
    }
}

fn suite(seed: Option<u64>, cap_states: Option<usize>, out: &Path, only: &[u8]) -> ExitCode {
    let mut opts = SuiteOptions::default();
    if let Some(s) = seed {
        opts.seed = s;
    }
    if let Some(c) = cap_states {
        opts.cap_states = c;
    }
    let reports = run_suite(&opts, only);
    for r in &reports {
        println!("{} criterion {}: {} ({:.2}s)", r.status.label(), r.id, r.title, r.seconds);
    }
    let text = match serde_json::to_string_pretty(&reports) {
        Ok(t) => t + "\n",
        Err(e) => return fail(CliError::Io(e.to_string())),
    };
    if let Err(e) = std::fs::create_dir_all(out).and_then(|_| std::fs::write(out.join("summary.json"), text)) {
        return fail(CliError::Io(e.to_string()));
    }
    if reports.iter().all(|r| r.status.is_ok()) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
