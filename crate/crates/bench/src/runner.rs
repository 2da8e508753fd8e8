use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use riemann_arc::arc::{self, SolverConfig};
use riemann_arc::jd::JdInstance;
use riemann_arc::manifold::Manifold;
use riemann_arc::oracle::SeparableObjective;
use riemann_arc::trace::{Outcome, RunTrace, SolverKind};
use riemann_arc::trust_region;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::plan::{BenchmarkPlan, Case, RunSeeds, Solver};
use crate::summary::{self, SummaryRow};

pub const TRACE_DIR: &str = "traces";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const META_SUFFIX: &str = ".meta.json";

/// Everything about a run that the trace CSV does not hold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub solver: Solver,
    pub case: Case,
    pub repetition: usize,
    pub seeds: RunSeeds,
    pub noise: f64,
    pub kind: SolverKind,
    /// Components evaluated per gradient call.
    pub grad_sample_size: usize,
    /// Components evaluated per Hessian-vector product.
    pub hess_sample_size: usize,
    pub outcome: Outcome,
    pub iterations: usize,
    pub n_succ: usize,
    pub n_fail: usize,
    pub grad_evals: u64,
    pub hess_evals: u64,
    pub final_f: f64,
    pub final_grad_norm: f64,
    pub millis: f64,
    pub config: SolverConfig,
}

impl RunMeta {
    pub fn reached_stop(&self) -> bool {
        self.outcome == Outcome::OptimalityReached
    }

    pub fn oracle_calls(&self) -> u64 {
        self.grad_evals + self.hess_evals
    }

    pub fn stem(&self) -> String {
        run_stem(&self.case, self.solver, self.repetition)
    }
}

pub fn run_stem(case: &Case, solver: Solver, repetition: usize) -> String {
    format!("{}_{}_rep{}", case.id(), solver, repetition)
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
    /// Record wall time. When off, all timing fields are zero and the output
    /// is byte-for-byte reproducible.
    pub timing: bool,
}

#[derive(Debug)]
pub struct RunReport {
    pub runs: Vec<RunMeta>,
    /// `(run, error)` for runs that could not be completed.
    pub failures: Vec<(String, String)>,
    pub summary: Vec<SummaryRow>,
}

/// Builds the instance and start point for `(case, repetition)` and runs one
/// solver.
pub fn execute(plan: &BenchmarkPlan, case: &Case, solver: Solver, repetition: usize) -> Result<(RunTrace, RunMeta)> {
    let seeds = plan.seeds(case, repetition);
    let inst = JdInstance::generate(case.n, case.d, case.r, seeds.instance, plan.noise)?;
    let x0 = inst.manifold().random_point(seeds.start);
    let cfg = plan.solver_config(case, solver, repetition)?;
    let trace = match solver.variant() {
        Some(_) => arc::run(&inst, x0, &cfg)?,
        None => trust_region::run(&inst, x0, &cfg)?,
    };
    let bundle = cfg.bundle(inst.num_components())?;
    let meta = RunMeta {
        solver,
        case: *case,
        repetition,
        seeds,
        noise: plan.noise,
        kind: trace.kind,
        grad_sample_size: bundle.grad_sample_size(),
        hess_sample_size: bundle.hess_sample_size(),
        outcome: trace.outcome,
        iterations: trace.iterations(),
        n_succ: trace.n_succ,
        n_fail: trace.n_fail,
        grad_evals: trace.grad_evals,
        hess_evals: trace.hess_evals,
        final_f: trace.final_f,
        final_grad_norm: trace.final_grad_norm,
        millis: trace.millis,
        config: cfg,
    };
    Ok((trace, meta))
}

fn write_run(dir: &Path, mut trace: RunTrace, mut meta: RunMeta, timing: bool) -> Result<RunMeta> {
    if !timing {
        meta.millis = 0.0;
        trace.records.iter_mut().for_each(|r| r.millis = 0.0);
    }
    let stem = meta.stem();
    let csv_path = dir.join(format!("{stem}.csv"));
    let file = fs::File::create(&csv_path).map_err(|e| BenchError::io(&csv_path, e))?;
    trace.write_csv(BufWriter::new(file))?;
    let meta_path = dir.join(format!("{stem}{META_SUFFIX}"));
    let text = serde_json::to_string_pretty(&meta).map_err(|e| BenchError::corrupt(&meta_path, e))?;
    fs::write(&meta_path, text + "\n").map_err(|e| BenchError::io(&meta_path, e))?;
    Ok(meta)
}

/// Runs every `(case, solver, repetition)` of the plan, writing one trace and
/// one metadata file per run under `out/traces`, then the summary.
pub fn run_plan(plan: &BenchmarkPlan, out: &Path, opts: &RunOptions) -> Result<RunReport> {
    plan.validate()?;
    let dir = out.join(TRACE_DIR);
    fs::create_dir_all(&dir).map_err(|e| BenchError::io(&dir, e))?;

    let mut jobs = Vec::new();
    for case in &plan.cases {
        for rep in 0..plan.repetitions {
            for &solver in &plan.solvers {
                jobs.push((*case, solver, rep));
            }
        }
    }
    let work = || -> Vec<(String, Result<RunMeta>)> {
        jobs.par_iter()
            .map(|(case, solver, rep)| {
                let stem = run_stem(case, *solver, *rep);
                let res = execute(plan, case, *solver, *rep).and_then(|(t, m)| write_run(&dir, t, m, opts.timing));
                (stem, res)
            })
            .collect()
    };
    let results = match opts.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| BenchError::Plan(e.to_string()))?
            .install(work),
        None => work(),
    };

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (stem, res) in results {
        match res {
            Ok(m) => runs.push(m),
            Err(e) => failures.push((stem, e.to_string())),
        }
    }
    let summary = summary::summarize(out)?;
    summary::write_summary(&out.join(SUMMARY_FILE), &summary)?;
    Ok(RunReport {
        runs,
        failures,
        summary,
    })
}

/// Metadata files under `out/traces`, sorted by name.
pub fn list_runs(out: &Path) -> Result<Vec<PathBuf>> {
    let dir = out.join(TRACE_DIR);
    let entries = fs::read_dir(&dir).map_err(|e| BenchError::io(&dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| BenchError::io(&dir, e))?.path();
        if path.to_string_lossy().ends_with(META_SUFFIX) {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

pub fn read_meta(path: &Path) -> Result<RunMeta> {
    let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| BenchError::corrupt(path, e))
}

/// Trace CSV belonging to a metadata file.
pub fn trace_path(meta_path: &Path) -> PathBuf {
    let name = meta_path.file_name().unwrap_or_default().to_string_lossy();
    meta_path.with_file_name(format!("{}.csv", name.trim_end_matches(META_SUFFIX)))
}
