//! Adaptive cubic regularization with inexact derivatives.
//!
//! Each iteration fixes the gradient and Hessian samples, minimizes the cubic
//! model approximately, and accepts the step when the ratio of actual to
//! predicted decrease reaches `rho_th`. The weight `σ` shrinks by `γ` after a
//! success and grows by `γ` after a failure.

use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{Manifold, ManifoldPoint, TangentVector};
use crate::oracle::{OracleBundle, OracleMode, SeparableObjective};
use crate::rng::{self, Purpose};
use crate::subsolver::{probe_curvature, solve_subproblem, CubicModel, EigenEstimate, SubsolverConfig};
use crate::trace::{self, IterationRecord, Outcome, RunTrace, SolverKind};

/// When the smallest Hessian eigenvalue is estimated for the stopping test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigencheckPolicy {
    EveryIteration,
    /// Only when `‖G_k‖ ≤ ε_g`, the only case where the test can pass.
    OnSmallGradient,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoppingRule {
    /// `‖G_k‖ ≤ ε_g` and `λ_min(H_k) ≥ −ε_H`.
    SecondOrder,
    /// `‖G_k‖² ≤ τ`.
    GradSquaredThreshold(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub eps_g: f64,
    pub eps_h: f64,
    pub rho_th: f64,
    pub gamma: f64,
    pub sigma0: f64,
    /// Initial trust radius for the trust-region solver.
    pub delta0: f64,
    /// Trust radius cap; `None` means `10 · delta0`.
    pub delta_max: Option<f64>,
    /// `None` means `50 · max(ε_g⁻², ε_H⁻³)`, capped at one million.
    pub max_iters: Option<usize>,
    pub mode: OracleMode,
    pub grad_sample_size: usize,
    pub hess_sample_size: usize,
    pub eigencheck: EigencheckPolicy,
    pub stopping: StoppingRule,
    pub seed: u64,
    pub subsolver: SubsolverConfig,
    /// Record the empirical curvature constant of every step. Costs one exact
    /// gradient and Hessian-vector product per iteration in sub-sampled modes;
    /// these are not counted.
    pub track_curvature: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps_g: 1e-3,
            eps_h: 1e-2,
            rho_th: 0.9,
            gamma: 2.0,
            sigma0: 1e-3,
            delta0: 1.0,
            delta_max: None,
            max_iters: None,
            mode: OracleMode::Exact,
            grad_sample_size: 1,
            hess_sample_size: 1,
            eigencheck: EigencheckPolicy::OnSmallGradient,
            stopping: StoppingRule::SecondOrder,
            seed: 0,
            subsolver: SubsolverConfig::default(),
            track_curvature: false,
        }
    }
}

const MAX_ITERS_CAP: usize = 1_000_000;

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &'static str, value: f64| {
            if value > 0.0 && value < 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter { name, value })
            }
        };
        unit("eps_g", self.eps_g)?;
        unit("eps_h", self.eps_h)?;
        unit("rho_th", self.rho_th)?;
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                value: self.gamma,
            });
        }
        for (name, value) in [("sigma0", self.sigma0), ("delta0", self.delta0)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        if self.delta_max() < self.delta0 {
            return Err(Error::InvalidParameter {
                name: "delta_max",
                value: self.delta_max(),
            });
        }
        if let StoppingRule::GradSquaredThreshold(tau) = self.stopping {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "tau",
                    value: tau,
                });
            }
        }
        self.subsolver.validate()
    }

    pub fn max_iters(&self) -> usize {
        self.max_iters.unwrap_or_else(|| {
            let budget = 50.0 * self.eps_g.powi(-2).max(self.eps_h.powi(-3));
            (budget.ceil() as usize).min(MAX_ITERS_CAP)
        })
    }

    pub fn delta_max(&self) -> f64 {
        self.delta_max.unwrap_or(10.0 * self.delta0)
    }

    pub fn bundle(&self, n: usize) -> Result<OracleBundle> {
        OracleBundle::new(self.mode, n, self.grad_sample_size, self.hess_sample_size, self.seed)
    }

    /// Whether the stopping test needs `λ_min` at this gradient norm.
    pub fn needs_eigenvalue(&self, grad_norm: f64) -> bool {
        match (self.stopping, self.eigencheck) {
            (_, EigencheckPolicy::EveryIteration) => true,
            (StoppingRule::SecondOrder, EigencheckPolicy::OnSmallGradient) => grad_norm <= self.eps_g,
            (StoppingRule::GradSquaredThreshold(_), EigencheckPolicy::OnSmallGradient) => false,
        }
    }
}

/// Stopping test. `lambda` may be absent only when the policy did not ask
/// for it.
pub fn should_terminate(grad_norm: f64, lambda: Option<f64>, cfg: &SolverConfig) -> Result<bool> {
    match cfg.stopping {
        StoppingRule::GradSquaredThreshold(tau) => Ok(grad_norm * grad_norm <= tau),
        StoppingRule::SecondOrder => {
            if cfg.needs_eigenvalue(grad_norm) && lambda.is_none() {
                return Err(Error::MissingEigenEstimate);
            }
            Ok(grad_norm <= cfg.eps_g && lambda.is_some_and(|l| l >= -cfg.eps_h))
        }
    }
}

/// The three oracle configurations of the method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Variant {
    /// Exact gradient and Hessian.
    Racr,
    /// Exact gradient, sub-sampled Hessian.
    Sracr,
    /// Sub-sampled gradient and Hessian.
    Ssracr,
}

impl Variant {
    pub fn mode(self) -> OracleMode {
        match self {
            Variant::Racr => OracleMode::Exact,
            Variant::Sracr => OracleMode::SubsampledHessianOnly,
            Variant::Ssracr => OracleMode::SubsampledBoth,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Racr => "RACR",
            Variant::Sracr => "SRACR",
            Variant::Ssracr => "SSRACR",
        }
    }

    /// `cfg` with this variant's oracle mode.
    pub fn configure(self, cfg: &SolverConfig) -> SolverConfig {
        SolverConfig {
            mode: self.mode(),
            ..cfg.clone()
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "RACR" => Ok(Variant::Racr),
            "SRACR" => Ok(Variant::Sracr),
            "SSRACR" => Ok(Variant::Ssracr),
            _ => Err(Error::UnknownVariant(s.to_owned())),
        }
    }
}

/// Seed of the curvature probe at iteration `k`.
pub(crate) fn probe_seed(seed: u64, k: u64) -> u64 {
    rng::derive(seed, &[Purpose::Lanczos as u64, k])
}

/// `2|f∘R(η) − f − ⟨grad f,η⟩ − ½⟨Hess f[η],η⟩| / ‖η‖³` with exact,
/// uncounted derivatives.
pub(crate) fn exact_curvature_ratio<O: SeparableObjective>(
    obj: &O,
    x: &ManifoldPoint,
    eta: &TangentVector,
    f: f64,
    f_trial: f64,
) -> Result<f64> {
    let g = obj.rgrad(x, None)?;
    let hv = obj.rhess_vec(x, eta, None)?;
    let norm = eta.norm();
    Ok(2.0 * (f_trial - f - g.inner(eta)? - 0.5 * hv.inner(eta)?).abs() / norm.powi(3))
}

/// Result of one call to [`ArcSolver::step`].
#[derive(Clone, Debug)]
pub enum Step {
    Iterated(IterationRecord),
    Terminated,
    Failed(Outcome),
}

/// State of one run: iterate, cached objective value, `σ`, oracles.
pub struct ArcSolver<'a, O: SeparableObjective> {
    obj: &'a O,
    cfg: SolverConfig,
    bundle: OracleBundle,
    x: ManifoldPoint,
    f: f64,
    sigma: f64,
    k: u64,
    last_grad_norm: f64,
    last_lambda: Option<f64>,
    sigma_clamps: usize,
    start: Instant,
}

impl<'a, O: SeparableObjective> ArcSolver<'a, O> {
    pub fn new(obj: &'a O, x0: ManifoldPoint, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let x0 = obj.manifold().point(x0.data().clone())?;
        let f = obj.value(&x0);
        if !f.is_finite() {
            return Err(Error::InvalidParameter {
                name: "f(x0)",
                value: f,
            });
        }
        Ok(Self {
            obj,
            bundle: cfg.bundle(obj.num_components())?,
            cfg: cfg.clone(),
            x: x0,
            f,
            sigma: cfg.sigma0,
            k: 0,
            last_grad_norm: f64::NAN,
            last_lambda: None,
            sigma_clamps: 0,
            start: Instant::now(),
        })
    }

    pub fn point(&self) -> &ManifoldPoint {
        &self.x
    }

    pub fn value(&self) -> f64 {
        self.f
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn oracles(&self) -> &OracleBundle {
        &self.bundle
    }

    /// One outer iteration: termination test, sub-problem, acceptance, `σ`
    /// update.
    pub fn step(&mut self) -> Result<Step> {
        let k = self.k;
        self.bundle.begin_iteration(k);
        let space = self.obj.manifold();
        let g = self.bundle.inexact_gradient(self.obj, &self.x)?;
        let grad_norm = g.norm();
        let h = self.bundle.hessian(self.obj, &self.x)?;
        let sub_cfg = SubsolverConfig {
            seed: probe_seed(self.cfg.seed, k),
            ..self.cfg.subsolver.clone()
        };
        let model = CubicModel::new(space, g, &h, self.sigma)?;

        let est: Option<EigenEstimate> = if self.cfg.needs_eigenvalue(grad_norm) {
            Some(probe_curvature(&model, &sub_cfg)?)
        } else {
            None
        };
        self.last_grad_norm = grad_norm;
        self.last_lambda = est.as_ref().map(|e| e.value);
        if should_terminate(grad_norm, self.last_lambda, &self.cfg)? {
            return Ok(Step::Terminated);
        }

        let res = match solve_subproblem(&model, &sub_cfg, est) {
            Ok(r) => r,
            Err(Error::ZeroGradient) => return Ok(Step::Failed(Outcome::SubsolverFailure)),
            Err(e) => return Err(e),
        };
        self.last_lambda = res.lambda_min_est;
        if !(-res.m_val >= 1e-16 * self.f.abs().max(1.0)) {
            return Ok(Step::Failed(Outcome::SubsolverFailure));
        }
        let x_trial = match space.retract(&self.x, &res.eta) {
            Ok(x) => x,
            Err(Error::SingularRetraction(_)) => return Ok(Step::Failed(Outcome::NumericalFailure)),
            Err(e) => return Err(e),
        };
        let f_trial = self.obj.value(&x_trial);
        if !f_trial.is_finite() {
            return Ok(Step::Failed(Outcome::NumericalFailure));
        }
        let rho = trace::rho(self.f, f_trial, res.m_val);
        let success = rho >= self.cfg.rho_th;
        let curvature_ratio = self.curvature_ratio(&model, &res.eta, res.m_val, f_trial)?;

        let record = IterationRecord {
            k,
            f: self.f,
            grad_norm,
            param: self.sigma,
            model_val: res.m_val,
            rho,
            success,
            lambda_min: res.lambda_min_est,
            grad_evals: self.bundle.grad_evals(),
            hess_evals: self.bundle.hess_evals(),
            millis: self.start.elapsed().as_secs_f64() * 1e3,
            step_norm: res.eta.norm(),
            curvature_ratio,
        };
        drop(model);
        drop(h);
        if success {
            self.x = x_trial;
            self.f = f_trial;
        }
        let (sigma, clamped) = trace::next_sigma(self.sigma, success, self.cfg.gamma);
        self.sigma = sigma;
        self.sigma_clamps += usize::from(clamped);
        self.k += 1;
        Ok(Step::Iterated(record))
    }

    fn curvature_ratio(
        &self,
        model: &CubicModel<'_>,
        eta: &TangentVector,
        m_val: f64,
        f_trial: f64,
    ) -> Result<Option<f64>> {
        if !self.cfg.track_curvature {
            return Ok(None);
        }
        if self.bundle.mode() == OracleMode::Exact {
            // the model already holds the exact gradient and Hessian
            let norm = eta.norm();
            let cubic = model.sigma() / 3.0 * norm.powi(3);
            return Ok(Some(2.0 * (f_trial - self.f - (m_val - cubic)).abs() / norm.powi(3)));
        }
        exact_curvature_ratio(self.obj, &self.x, eta, self.f, f_trial).map(Some)
    }

    /// Iterates until termination, failure, or the iteration budget.
    pub fn run(mut self) -> Result<RunTrace> {
        let mut records = Vec::new();
        let budget = self.cfg.max_iters();
        let outcome = loop {
            if records.len() >= budget {
                break Outcome::MaxIters;
            }
            match self.step()? {
                Step::Iterated(r) => records.push(r),
                Step::Terminated => break Outcome::OptimalityReached,
                Step::Failed(o) => break o,
            }
        };
        let (n_succ, n_fail) = trace::count_outcomes(&records);
        Ok(RunTrace {
            kind: SolverKind::Cubic,
            records,
            outcome,
            n_succ,
            n_fail,
            final_f: self.f,
            final_grad_norm: self.last_grad_norm,
            final_lambda: self.last_lambda,
            grad_evals: self.bundle.grad_evals(),
            hess_evals: self.bundle.hess_evals(),
            sigma_clamps: self.sigma_clamps,
            millis: self.start.elapsed().as_secs_f64() * 1e3,
            final_point: self.x,
        })
    }
}

/// Runs the cubic-regularization method from `x0`.
pub fn run<O: SeparableObjective>(obj: &O, x0: ManifoldPoint, cfg: &SolverConfig) -> Result<RunTrace> {
    ArcSolver::new(obj, x0, cfg)?.run()
}
