//! Approximate minimization of the cubic model.
//!
//! The returned step is never worse than the Cauchy step and, when negative
//! curvature is detected, never worse than the eigen step.

mod lanczos;
mod model;

pub use lanczos::{min_eig_estimate, EigenEstimate};
pub use model::{CauchyStep, CubicModel, EigenStep, ModelStep};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::TangentVector;

/// Hard cap on refinement steps.
pub const MAX_REFINE_STEPS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubsolverConfig {
    pub lanczos_tol: f64,
    /// `None` means five times the tangent-space dimension.
    pub lanczos_max_iters: Option<usize>,
    /// Normalized gradient steps on the model after the Cauchy/eigen choice.
    pub refine_steps: usize,
    /// Seed for the Lanczos start vector.
    pub seed: u64,
}

impl Default for SubsolverConfig {
    fn default() -> Self {
        Self {
            lanczos_tol: 1e-6,
            lanczos_max_iters: None,
            refine_steps: 0,
            seed: 0,
        }
    }
}

impl SubsolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lanczos_tol > 0.0 && self.lanczos_tol.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "lanczos_tol",
                value: self.lanczos_tol,
            });
        }
        if self.refine_steps > MAX_REFINE_STEPS {
            return Err(Error::InvalidParameter {
                name: "refine_steps",
                value: self.refine_steps as f64,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SubsolverResult {
    pub eta: TangentVector,
    pub m_val: f64,
    pub cauchy_m: f64,
    pub eigen_m: Option<f64>,
    pub lambda_min_est: Option<f64>,
    /// Rayleigh quotient of the eigen direction over the smallest Ritz value.
    /// Both overestimate `λ_min`, so this is a proxy for `ν`, not `ν` itself.
    pub nu_achieved: Option<f64>,
    pub eigen_converged: Option<bool>,
}

/// Curvature below `−1e−10·max(1, ‖H‖_est)` counts as negative.
pub fn is_negative_curvature(est: &EigenEstimate) -> bool {
    est.value < -1e-10 * est.norm_estimate.max(1.0)
}

/// Runs the curvature probe for `model` with the limits in `cfg`.
pub fn probe_curvature(model: &CubicModel<'_>, cfg: &SubsolverConfig) -> Result<EigenEstimate> {
    let dim = model.space().dimension();
    let max_iters = cfg.lanczos_max_iters.unwrap_or(5 * dim).max(1);
    min_eig_estimate(
        model.space(),
        model.base(),
        model.hessian(),
        cfg.lanczos_tol,
        max_iters,
        cfg.seed,
    )
}

/// Best of the Cauchy and eigen steps, optionally refined.
///
/// `precomputed` reuses a curvature estimate already made for the same model;
/// otherwise one is computed here.
pub fn solve_subproblem(
    model: &CubicModel<'_>,
    cfg: &SubsolverConfig,
    precomputed: Option<EigenEstimate>,
) -> Result<SubsolverResult> {
    cfg.validate()?;
    let est = match precomputed {
        Some(e) => e,
        None => probe_curvature(model, cfg)?,
    };
    let negative = is_negative_curvature(&est);
    let has_gradient = !model.gradient().is_zero();
    if !has_gradient && !negative {
        return Err(Error::ZeroGradient);
    }

    let cauchy = if has_gradient {
        let c = model.cauchy_point()?;
        (c.step.eta, c.step.model_value)
    } else {
        (TangentVector::zero(model.base()), 0.0)
    };
    let eigen = if negative {
        // the estimate's value is the Rayleigh quotient of its unit vector
        Some(model.eigen_step_unit(est.vector.clone(), est.value)?)
    } else {
        None
    };

    let cauchy_m = cauchy.1;
    let eigen_m = eigen.as_ref().map(|e| e.step.model_value);
    let nu_achieved = eigen
        .as_ref()
        .filter(|_| est.ritz_value < 0.0)
        .map(|e| e.rayleigh / est.ritz_value);
    let (mut eta, mut m_val) = match eigen {
        Some(e) if e.step.model_value < cauchy_m => (e.step.eta, e.step.model_value),
        _ => cauchy,
    };

    if cfg.refine_steps > 0 {
        let bound = eigen_m.map_or(cauchy_m, |e| e.min(cauchy_m));
        if let Some((refined, value)) = refine(model, &eta, cfg.refine_steps)? {
            if value <= bound && value < m_val {
                eta = refined;
                m_val = value;
            }
        }
    }

    Ok(SubsolverResult {
        eta,
        m_val,
        cauchy_m,
        eigen_m,
        lambda_min_est: Some(est.value),
        nu_achieved,
        eigen_converged: Some(est.converged),
    })
}

/// Normalized gradient steps with a bracketing line search along each
/// direction. Returns the final point and its model value recomputed from
/// scratch, or `None` when no step made progress.
fn refine(model: &CubicModel<'_>, start: &TangentVector, steps: usize) -> Result<Option<(TangentVector, f64)>> {
    let sigma = model.sigma();
    let g = model.gradient();
    let mut eta = start.clone();
    let mut h_eta = model.hvp(&eta)?;
    let mut moved = false;
    for _ in 0..steps {
        let norm = eta.norm();
        // ∇m(η) = G + H[η] + σ‖η‖η
        let mut grad = TangentVector::lin_comb(1.0, g, 1.0, &h_eta)?;
        grad.add_scaled(sigma * norm, &eta)?;
        let gnorm = grad.norm();
        if gnorm <= 1e-14 * g.norm().max(1.0) {
            break;
        }
        let d = grad.scaled(-1.0 / gnorm);
        let h_d = model.hvp(&d)?;
        let b = g.inner(&d)? + h_eta.inner(&d)?;
        let c = h_d.inner(&d)?;
        let q = eta.inner(&d)?;
        let p = norm * norm;
        let t = line_search(b, c, p, q, sigma);
        if !(t > 0.0) {
            break;
        }
        eta.add_scaled(t, &d)?;
        h_eta.add_scaled(t, &h_d)?;
        moved = true;
    }
    if !moved {
        return Ok(None);
    }
    let value = model.eval(&eta)?;
    Ok(Some((eta, value)))
}

/// First stationary point over `t > 0` of
/// `φ(t) = b t + ½ c t² + (σ/3)(p + 2qt + t²)^{3/2}` given `φ'(0) < 0`.
fn line_search(b: f64, c: f64, p: f64, q: f64, sigma: f64) -> f64 {
    let dphi = |t: f64| {
        let r = (p + 2.0 * q * t + t * t).max(0.0).sqrt();
        b + c * t + sigma * r * (q + t)
    };
    if !(dphi(0.0) < 0.0) {
        return 0.0;
    }
    let mut hi = (b.abs() / (c.abs() + sigma * p.sqrt() + 1e-300)).max(1e-12);
    let mut grow = 0;
    while dphi(hi) < 0.0 {
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return 0.0;
        }
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if dphi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    lo
}
