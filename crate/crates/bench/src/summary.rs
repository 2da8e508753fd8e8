use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BenchError, Result};
use crate::plan::Solver;
use crate::runner::{self, RunMeta};

/// One row of `summary.csv`: aggregate over the repetitions of a
/// `(case, solver)` pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub case: String,
    pub solver: Solver,
    pub runs: usize,
    pub mean_iterations: f64,
    pub median_iterations: f64,
    pub mean_seconds: f64,
    /// Fraction of runs that met the stopping rule.
    pub success_rate: f64,
    pub total_grad_evals: u64,
    pub total_hess_evals: u64,
    pub median_oracle_calls: f64,
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Aggregates run metadata, grouped by case then solver.
pub fn aggregate(runs: &[RunMeta]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, Solver), Vec<&RunMeta>> = BTreeMap::new();
    for m in runs {
        groups.entry((m.case.id(), m.solver)).or_default().push(m);
    }
    groups
        .into_iter()
        .map(|((case, solver), ms)| {
            let k = ms.len() as f64;
            let mut iters: Vec<f64> = ms.iter().map(|m| m.iterations as f64).collect();
            let mut calls: Vec<f64> = ms.iter().map(|m| m.oracle_calls() as f64).collect();
            SummaryRow {
                case,
                solver,
                runs: ms.len(),
                mean_iterations: iters.iter().sum::<f64>() / k,
                median_iterations: median(&mut iters),
                mean_seconds: ms.iter().map(|m| m.millis).sum::<f64>() / k / 1000.0,
                success_rate: ms.iter().filter(|m| m.reached_stop()).count() as f64 / k,
                total_grad_evals: ms.iter().map(|m| m.grad_evals).sum(),
                total_hess_evals: ms.iter().map(|m| m.hess_evals).sum(),
                median_oracle_calls: median(&mut calls),
            }
        })
        .collect()
}

/// Reads every run under `out/traces` and aggregates it.
pub fn summarize(out: &Path) -> Result<Vec<SummaryRow>> {
    let runs = runner::list_runs(out)?
        .iter()
        .map(|p| runner::read_meta(p))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(&runs))
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| BenchError::corrupt(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| BenchError::corrupt(path, e))?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| BenchError::corrupt(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<SummaryRow>, _>>()
        .map_err(|e| BenchError::corrupt(path, e))
}

/// SHA-256 over the summary with the timing column blanked, so runs that
/// differ only in wall time hash the same.
pub fn digest(rows: &[SummaryRow]) -> String {
    let mut h = Sha256::new();
    for row in rows {
        let mut row = row.clone();
        row.mean_seconds = 0.0;
        let line = serde_json::to_string(&row).unwrap_or_default();
        h.update(line.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// Digest of the summary stored under `out`.
pub fn digest_dir(out: &Path) -> Result<String> {
    let path = out.join(runner::SUMMARY_FILE);
    if !path.exists() {
        return Err(BenchError::io(
            &path,
            std::io::Error::from(std::io::ErrorKind::NotFound),
        ));
    }
    Ok(digest(&read_summary(&path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&mut []).is_nan());
    }

    #[test]
    fn digest_ignores_timing() {
        let row = SummaryRow {
            case: "n10_d3_r2".into(),
            solver: Solver::Racr,
            runs: 2,
            mean_iterations: 4.0,
            median_iterations: 4.0,
            mean_seconds: 0.5,
            success_rate: 1.0,
            total_grad_evals: 80,
            total_hess_evals: 400,
            median_oracle_calls: 240.0,
        };
        let mut slower = row.clone();
        slower.mean_seconds = 9.0;
        assert_eq!(digest(std::slice::from_ref(&row)), digest(&[slower]));
        let mut other = row.clone();
        other.total_hess_evals += 1;
        assert_ne!(digest(&[row]), digest(&[other]));
    }
}
