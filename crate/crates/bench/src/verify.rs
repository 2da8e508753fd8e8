use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use riemann_arc::trace::{self, Outcome, TraceLaws};

use crate::error::{BenchError, Result};
use crate::runner::{self, RunMeta};
use crate::summary;

/// A problem found in a stored run or in the summary.
#[derive(Clone, Debug, PartialEq)]
pub struct Finding {
    pub file: PathBuf,
    pub row: Option<usize>,
    pub law: String,
    pub detail: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.file.display())?;
        if let Some(row) = self.row {
            write!(f, " row {row}")?;
        }
        write!(f, ": {}: {}", self.law, self.detail)
    }
}

#[derive(Debug, Default)]
pub struct VerifyReport {
    pub runs_checked: usize,
    pub findings: Vec<Finding>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Checks one stored run: the trace schema, the per-iteration laws, and that
/// the totals in the metadata agree with the trace.
pub fn verify_run(meta_path: &Path) -> Vec<Finding> {
    let mut out = Vec::new();
    let finding = |file: &Path, row, law: &str, detail: String| Finding {
        file: file.to_path_buf(),
        row,
        law: law.to_string(),
        detail,
    };
    let meta = match runner::read_meta(meta_path) {
        Ok(m) => m,
        Err(e) => return vec![finding(meta_path, None, "metadata", e.to_string())],
    };
    let csv_path = runner::trace_path(meta_path);
    let parsed = fs::File::open(&csv_path)
        .map_err(|e| BenchError::io(&csv_path, e))
        .and_then(|f| trace::read_csv(f).map_err(BenchError::from));
    let (kind, records) = match parsed {
        Ok(p) => p,
        Err(e) => return vec![finding(&csv_path, None, "schema", e.to_string())],
    };
    if kind != meta.kind {
        out.push(finding(
            &csv_path,
            None,
            "schema",
            format!("trace is {kind:?}, metadata says {:?}", meta.kind),
        ));
        return out;
    }

    let laws = TraceLaws {
        kind,
        gamma: meta.config.gamma,
        rho_th: meta.config.rho_th,
        delta_max: Some(meta.config.delta_max()),
        grad_sample_size: Some(meta.grad_sample_size as u64),
        hess_sample_size: Some(meta.hess_sample_size as u64),
    };
    for v in trace::check_laws(&records, &laws) {
        out.push(finding(&csv_path, v.row, v.law, v.detail));
    }
    if let Some(first) = records.first() {
        let start = match kind {
            trace::SolverKind::Cubic => meta.config.sigma0,
            trace::SolverKind::TrustRegion => meta.config.delta0,
        };
        if first.param != start {
            out.push(finding(
                &csv_path,
                Some(0),
                "parameter recurrence",
                format!("starts at {}, configured {start}", first.param),
            ));
        }
    }
    out.extend(
        check_totals(&meta, &records)
            .into_iter()
            .map(|(law, d)| finding(meta_path, None, law, d)),
    );
    out
}

fn check_totals(meta: &RunMeta, records: &[trace::IterationRecord]) -> Vec<(&'static str, String)> {
    let mut out = Vec::new();
    if meta.iterations != records.len() {
        out.push((
            "counts",
            format!(
                "metadata has {} iterations, trace has {}",
                meta.iterations,
                records.len()
            ),
        ));
    }
    let (succ, fail) = trace::count_outcomes(records);
    if (succ, fail) != (meta.n_succ, meta.n_fail) {
        out.push((
            "counts",
            format!(
                "metadata has {}/{} successes/failures, trace has {succ}/{fail}",
                meta.n_succ, meta.n_fail
            ),
        ));
    }
    let last_grad = records.last().map_or(0, |r| r.grad_evals);
    let last_hess = records.last().map_or(0, |r| r.hess_evals);
    // Every exit other than the iteration cap evaluates one more gradient at
    // the final point.
    let expected_grad = if meta.outcome == Outcome::MaxIters {
        last_grad
    } else {
        last_grad + meta.grad_sample_size as u64
    };
    if meta.grad_evals != expected_grad {
        out.push((
            "gradient accounting",
            format!("total {} but trace implies {expected_grad}", meta.grad_evals),
        ));
    }
    let size = meta.hess_sample_size as u64;
    if meta.hess_evals < last_hess || !(meta.hess_evals - last_hess).is_multiple_of(size) {
        out.push((
            "hessian accounting",
            format!("total {} after {last_hess} in the trace", meta.hess_evals),
        ));
    }
    out
}

/// Verifies every run under `out/traces` and, if present, the summary.
pub fn verify_dir(out: &Path) -> Result<VerifyReport> {
    let paths = runner::list_runs(out)?;
    let mut report = VerifyReport {
        runs_checked: paths.len(),
        findings: Vec::new(),
    };
    let mut metas = Vec::new();
    for p in &paths {
        report.findings.extend(verify_run(p));
        if let Ok(m) = runner::read_meta(p) {
            metas.push(m);
        }
    }
    let summary_path = out.join(runner::SUMMARY_FILE);
    if summary_path.exists() {
        let expected = summary::aggregate(&metas);
        match summary::read_summary(&summary_path) {
            Ok(stored) if stored == expected => {}
            Ok(_) => report.findings.push(Finding {
                file: summary_path,
                row: None,
                law: "summary".into(),
                detail: "does not match the stored runs".into(),
            }),
            Err(e) => report.findings.push(Finding {
                file: summary_path,
                row: None,
                law: "schema".into(),
                detail: e.to_string(),
            }),
        }
    }
    Ok(report)
}
