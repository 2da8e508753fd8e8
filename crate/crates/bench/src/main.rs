use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use riemann_arc_bench::plan::{BenchmarkPlan, Solver};
use riemann_arc_bench::runner::{self, RunOptions};
use riemann_arc_bench::{summary, verify, BenchError};

/// Runs and checks the joint-diagonalization benchmark.
#[derive(Parser)]
#[command(name = "arc-bench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark plan and write traces plus a summary.
    Run(RunArgs),
    /// Check every stored trace and the summary against the solver laws.
    Verify {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Rebuild the summary from stored runs and print its digest.
    Summarize {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print the effective plan as TOML.
    Plan(PlanArgs),
}

#[derive(Args)]
struct PlanArgs {
    /// Plan file; the built-in plan is used when omitted.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated solver names.
    #[arg(long, value_delimiter = ',')]
    solvers: Option<Vec<Solver>>,
    #[arg(long)]
    reps: Option<usize>,
    /// Solver option override, e.g. `--set sigma0=0.01`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    plan: PlanArgs,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Zero all timings so output files are reproducible byte for byte.
    #[arg(long)]
    no_timing: bool,
}

impl PlanArgs {
    fn build(&self) -> Result<BenchmarkPlan, BenchError> {
        let mut plan = match &self.plan {
            Some(p) => BenchmarkPlan::load(p)?,
            None => BenchmarkPlan::default(),
        };
        if let Some(s) = self.seed {
            plan.master_seed = s;
        }
        if let Some(s) = &self.solvers {
            plan.solvers = s.clone();
        }
        if let Some(r) = self.reps {
            plan.repetitions = r;
        }
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| BenchError::Plan(format!("override `{kv}` is not KEY=VALUE")))?;
            plan.set_override(k.trim(), v.trim())?;
        }
        plan.validate()?;
        Ok(plan)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, BenchError> {
    match command {
        Command::Plan(args) => {
            print!("{}", args.build()?.to_toml()?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Run(args) => {
            let plan = args.plan.build()?;
            let opts = RunOptions {
                jobs: args.jobs,
                timing: !args.no_timing,
            };
            let report = runner::run_plan(&plan, &args.out, &opts)?;
            for row in &report.summary {
                println!(
                    "{:<18} {:<7} runs {:>2}  stop {:>5.1}%  iters {:>7.1}  oracle calls {:>10.0}",
                    row.case,
                    row.solver.name(),
                    row.runs,
                    100.0 * row.success_rate,
                    row.median_iterations,
                    row.median_oracle_calls
                );
            }
            for (run, err) in &report.failures {
                eprintln!("run {run} failed: {err}");
            }
            println!("digest {}", summary::digest(&report.summary));
            Ok(if report.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Verify { out } => {
            let report = verify::verify_dir(&out)?;
            for f in &report.findings {
                println!("{f}");
            }
            println!(
                "{} runs checked, {} violations",
                report.runs_checked,
                report.findings.len()
            );
            Ok(if report.ok() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Summarize { out } => {
            let rows = summary::summarize(&out)?;
            summary::write_summary(&out.join(runner::SUMMARY_FILE), &rows)?;
            println!("{}", summary::digest(&rows));
            Ok(ExitCode::SUCCESS)
        }
    }
}
