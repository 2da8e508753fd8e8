//! Per-iteration records, CSV export, and the invariants a stored trace must
//! satisfy.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::ManifoldPoint;

/// Lower clamp applied to the cubic regularization weight.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// Which update the radius-like column follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Cubic regularization; the column holds `σ_k`.
    Cubic,
    /// Trust region; the column holds `Δ_k`.
    TrustRegion,
}

impl SolverKind {
    pub fn parameter_column(self) -> &'static str {
        match self {
            SolverKind::Cubic => "sigma",
            SolverKind::TrustRegion => "delta",
        }
    }

    pub fn columns(self) -> [&'static str; 11] {
        [
            "k",
            "f",
            "grad_norm",
            self.parameter_column(),
            "model_val",
            "rho",
            "success",
            "lambda_min",
            "grad_evals",
            "hess_evals",
            "millis",
        ]
    }
}

/// Columns that depend on wall-clock time and are excluded from
/// reproducibility comparisons.
pub const TIMING_COLUMNS: [&str; 1] = ["millis"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: u64,
    /// `f(x_k)` with all components.
    pub f: f64,
    pub grad_norm: f64,
    /// `σ_k` or `Δ_k`.
    pub param: f64,
    pub model_val: f64,
    pub rho: f64,
    pub success: bool,
    pub lambda_min: Option<f64>,
    /// Cumulative component-gradient evaluations after this iteration.
    pub grad_evals: u64,
    /// Cumulative component-Hessian-vector evaluations after this iteration.
    pub hess_evals: u64,
    /// Wall time since the start of the run.
    pub millis: f64,
    #[serde(skip)]
    pub step_norm: f64,
    /// `2|f∘R(η) − f − ⟨grad f, η⟩ − ½⟨Hess f[η], η⟩| / ‖η‖³` with exact
    /// derivatives, when tracked.
    #[serde(skip)]
    pub curvature_ratio: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    OptimalityReached,
    MaxIters,
    SubsolverFailure,
    NumericalFailure,
}

#[derive(Clone, Debug)]
pub struct RunTrace {
    pub kind: SolverKind,
    pub records: Vec<IterationRecord>,
    pub outcome: Outcome,
    pub n_succ: usize,
    pub n_fail: usize,
    pub final_point: ManifoldPoint,
    pub final_f: f64,
    /// Gradient norm seen by the last termination test.
    pub final_grad_norm: f64,
    pub final_lambda: Option<f64>,
    pub grad_evals: u64,
    pub hess_evals: u64,
    /// Iterations whose update hit the `σ` floor.
    pub sigma_clamps: usize,
    pub millis: f64,
}

impl RunTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// Largest tracked curvature ratio, the empirical `L_H`.
    pub fn lipschitz_estimate(&self) -> Option<f64> {
        self.records
            .iter()
            .filter_map(|r| r.curvature_ratio)
            .fold(None, |m, v| Some(m.map_or(v, |m: f64| m.max(v))))
    }

    pub fn max_param(&self) -> f64 {
        self.records.iter().map(|r| r.param).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_csv(self.kind, &self.records, w)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Serialization(e.to_string())
}

/// Writes records with a header row. Floats use the shortest representation
/// that parses back to the same value.
pub fn write_csv<W: Write>(kind: SolverKind, records: &[IterationRecord], w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(kind.columns()).map_err(csv_err)?;
    for r in records {
        out.serialize(r).map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::Serialization(e.to_string()))
}

/// Reads a trace written by [`write_csv`], checking the header.
pub fn read_csv<R: Read>(r: R) -> Result<(SolverKind, Vec<IterationRecord>)> {
    let mut input = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header: Vec<String> = input.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    let kind = [SolverKind::Cubic, SolverKind::TrustRegion]
        .into_iter()
        .find(|k| header.iter().map(String::as_str).eq(k.columns()))
        .ok_or_else(|| Error::Schema(format!("unexpected columns {header:?}")))?;
    // positional: the parameter column name differs between solver kinds
    let records = input
        .records()
        .map(|row| {
            row.and_then(|row| row.deserialize::<IterationRecord>(None))
                .map_err(|e| Error::Schema(e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((kind, records))
}

/// `(f(x_k) − f∘R(η)) / (−m_k(η))`
pub fn rho(f: f64, f_trial: f64, model_val: f64) -> f64 {
    (f - f_trial) / -model_val
}

/// Next `σ` and whether the floor was applied.
pub fn next_sigma(sigma: f64, success: bool, gamma: f64) -> (f64, bool) {
    let next = if success { sigma / gamma } else { sigma * gamma };
    if next < SIGMA_FLOOR {
        (SIGMA_FLOOR, true)
    } else {
        (next, false)
    }
}

/// Next trust radius: expand by `γ` up to `delta_max` on success, shrink by
/// `γ` otherwise.
pub fn next_delta(delta: f64, success: bool, gamma: f64, delta_max: f64) -> f64 {
    if success {
        (delta * gamma).min(delta_max)
    } else {
        delta / gamma
    }
}

/// Parameters a trace is checked against.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceLaws {
    pub kind: SolverKind,
    pub gamma: f64,
    pub rho_th: f64,
    /// `Δ_max` for trust-region traces.
    pub delta_max: Option<f64>,
    /// Components per gradient call, when known.
    pub grad_sample_size: Option<u64>,
    /// Components per Hessian-vector product, when known.
    pub hess_sample_size: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    /// Index of the offending record, if the violation is local.
    pub row: Option<usize>,
    pub law: &'static str,
    pub detail: String,
}

/// Checks the update recurrence, the acceptance rule, monotone `f`, iteration
/// numbering and counter accounting. Comparisons are exact: the stored values
/// are the ones the solver computed.
pub fn check_laws(records: &[IterationRecord], laws: &TraceLaws) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |row: usize, law: &'static str, detail: String| {
        out.push(Violation {
            row: Some(row),
            law,
            detail,
        })
    };
    for (i, r) in records.iter().enumerate() {
        if r.k != i as u64 {
            push(i, "numbering", format!("expected k = {i}, found {}", r.k));
        }
        if r.success != (r.rho >= laws.rho_th) {
            push(i, "acceptance", format!("rho = {} but success = {}", r.rho, r.success));
        }
        if !(r.model_val < 0.0) {
            push(
                i,
                "model decrease",
                format!("model value {} is not negative", r.model_val),
            );
        }
        if let Some(size) = laws.grad_sample_size {
            let prev = if i == 0 { 0 } else { records[i - 1].grad_evals };
            if r.grad_evals != prev + size {
                push(
                    i,
                    "gradient accounting",
                    format!("{} -> {}, expected +{size}", prev, r.grad_evals),
                );
            }
        }
        if let Some(size) = laws.hess_sample_size {
            let prev = if i == 0 { 0 } else { records[i - 1].hess_evals };
            if r.hess_evals < prev || (r.hess_evals - prev) % size != 0 {
                push(
                    i,
                    "hessian accounting",
                    format!("{} -> {}, not a multiple of {size}", prev, r.hess_evals),
                );
            }
        }
        let Some(next) = records.get(i + 1) else { continue };
        let expected = match laws.kind {
            SolverKind::Cubic => next_sigma(r.param, r.success, laws.gamma).0,
            SolverKind::TrustRegion => {
                next_delta(r.param, r.success, laws.gamma, laws.delta_max.unwrap_or(f64::INFINITY))
            }
        };
        if next.param != expected {
            push(
                i + 1,
                "parameter recurrence",
                format!("{} = {}, expected {expected}", laws.kind.parameter_column(), next.param),
            );
        }
        if r.success && !(next.f < r.f) {
            push(
                i + 1,
                "monotone f",
                format!("successful step but f {} -> {}", r.f, next.f),
            );
        }
        if !r.success && next.f != r.f {
            push(
                i + 1,
                "monotone f",
                format!("rejected step but f {} -> {}", r.f, next.f),
            );
        }
    }
    out
}

/// `(N_succ, N_fail)` from record flags.
pub fn count_outcomes(records: &[IterationRecord]) -> (usize, usize) {
    let succ = records.iter().filter(|r| r.success).count();
    (succ, records.len() - succ)
}

/// Slack in `N_fail ≤ N_succ + log_γ(max(σ_0, 2γL) / σ_0)`; nonnegative when
/// the bound holds. When `2γL ≥ σ_0` this is the usual `log_γ(2γL/σ_0)`
/// form.
pub fn fail_count_slack(n_succ: usize, n_fail: usize, gamma: f64, sigma0: f64, lipschitz: f64) -> f64 {
    let cap = sigma0.max(2.0 * gamma * lipschitz);
    n_succ as f64 + (cap / sigma0).ln() / gamma.ln() - n_fail as f64
}
