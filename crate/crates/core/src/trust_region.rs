//! Sub-sampled Riemannian trust-region baseline with a truncated conjugate
//! gradient inner solver.

use std::time::Instant;

use crate::arc::{probe_seed, should_terminate, SolverConfig};
use crate::error::{Error, Result};
use crate::manifold::{Manifold, ManifoldPoint, TangentVector};
use crate::operator::LinearOperator;
use crate::oracle::{OracleBundle, SeparableObjective};
use crate::subsolver::{min_eig_estimate, SubsolverConfig};
use crate::trace::{self, IterationRecord, Outcome, RunTrace, SolverKind};

/// Why the inner solver stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TcgStop {
    /// The gradient was zero.
    ZeroGradient,
    NegativeCurvature,
    /// The next iterate would leave the region.
    Boundary,
    ResidualSmall,
    MaxIters,
}

#[derive(Clone, Debug)]
pub struct TcgResult {
    pub eta: TangentVector,
    /// `⟨G,η⟩ + ½⟨H[η],η⟩`
    pub model_val: f64,
    pub stop: TcgStop,
    pub iterations: usize,
}

/// Step length `τ ≥ 0` with `‖η + τd‖ = Δ`.
fn to_boundary(eta: &TangentVector, d: &TangentVector, delta: f64) -> Result<f64> {
    let dd = d.inner(d)?;
    let ed = eta.inner(d)?;
    let ee = eta.inner(eta)?;
    let disc = (ed * ed + dd * (delta * delta - ee)).max(0.0).sqrt();
    Ok((-ed + disc) / dd)
}

/// Steihaug–Toint truncated CG on `⟨G,η⟩ + ½⟨H[η],η⟩` over `‖η‖ ≤ Δ`.
///
/// Stops on negative curvature or a boundary crossing (both move to the
/// boundary), when the residual falls below `min(0.1, √‖G‖)·‖G‖`, or after
/// `max_iters` steps.
pub fn tr_subproblem(
    gradient: &TangentVector,
    hessian: &dyn LinearOperator,
    delta: f64,
    max_iters: usize,
) -> Result<TcgResult> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter {
            name: "delta",
            value: delta,
        });
    }
    let base = gradient.base();
    let gnorm = gradient.norm();
    let mut eta = TangentVector::zero(base);
    let mut h_eta = TangentVector::zero(base);
    let finish = |eta: TangentVector, h_eta: &TangentVector, stop, iterations| -> Result<TcgResult> {
        let model_val = gradient.inner(&eta)? + 0.5 * h_eta.inner(&eta)?;
        Ok(TcgResult {
            eta,
            model_val,
            stop,
            iterations,
        })
    };
    if gnorm == 0.0 {
        return finish(eta, &h_eta, TcgStop::ZeroGradient, 0);
    }
    let target = gnorm * gnorm.sqrt().min(0.1);
    let mut r = gradient.clone();
    let mut rr = gnorm * gnorm;
    let mut d = r.scaled(-1.0);
    for j in 0..max_iters.max(1) {
        let h_d = hessian.apply(&d)?;
        let kappa = d.inner(&h_d)?;
        if kappa <= 0.0 {
            let tau = to_boundary(&eta, &d, delta)?;
            eta.add_scaled(tau, &d)?;
            h_eta.add_scaled(tau, &h_d)?;
            return finish(eta, &h_eta, TcgStop::NegativeCurvature, j + 1);
        }
        let alpha = rr / kappa;
        let next = TangentVector::lin_comb(1.0, &eta, alpha, &d)?;
        if next.norm() >= delta {
            let tau = to_boundary(&eta, &d, delta)?;
            eta.add_scaled(tau, &d)?;
            h_eta.add_scaled(tau, &h_d)?;
            return finish(eta, &h_eta, TcgStop::Boundary, j + 1);
        }
        eta = next;
        h_eta.add_scaled(alpha, &h_d)?;
        r.add_scaled(alpha, &h_d)?;
        let rr_next = r.inner(&r)?;
        if rr_next.sqrt() <= target {
            return finish(eta, &h_eta, TcgStop::ResidualSmall, j + 1);
        }
        let beta = rr_next / rr;
        rr = rr_next;
        d = TangentVector::lin_comb(-1.0, &r, beta, &d)?;
    }
    finish(eta, &h_eta, TcgStop::MaxIters, max_iters.max(1))
}

/// Runs the trust-region method from `x0`. Shares `rho_th`, `gamma`, the
/// oracle configuration and the stopping rule with the cubic solver.
pub fn run<O: SeparableObjective>(obj: &O, x0: ManifoldPoint, cfg: &SolverConfig) -> Result<RunTrace> {
    cfg.validate()?;
    let start = Instant::now();
    let space = obj.manifold();
    let mut x = space.point(x0.data().clone())?;
    let mut f = obj.value(&x);
    if !f.is_finite() {
        return Err(Error::InvalidParameter {
            name: "f(x0)",
            value: f,
        });
    }
    let mut bundle: OracleBundle = cfg.bundle(obj.num_components())?;
    let delta_max = cfg.delta_max();
    let mut delta = cfg.delta0;
    let dim = space.dimension();
    let mut records = Vec::new();
    let mut last_grad_norm = f64::NAN;
    let mut last_lambda = None;
    let budget = cfg.max_iters();

    let outcome = loop {
        if records.len() >= budget {
            break Outcome::MaxIters;
        }
        let k = records.len() as u64;
        bundle.begin_iteration(k);
        let g = bundle.inexact_gradient(obj, &x)?;
        let grad_norm = g.norm();
        let h = bundle.hessian(obj, &x)?;
        let lambda = if cfg.needs_eigenvalue(grad_norm) {
            let sub: &SubsolverConfig = &cfg.subsolver;
            let iters = sub.lanczos_max_iters.unwrap_or(5 * dim);
            Some(min_eig_estimate(space, &x, &h, sub.lanczos_tol, iters, probe_seed(cfg.seed, k))?.value)
        } else {
            None
        };
        last_grad_norm = grad_norm;
        last_lambda = lambda;
        if should_terminate(grad_norm, lambda, cfg)? {
            break Outcome::OptimalityReached;
        }

        let tcg = tr_subproblem(&g, &h, delta, dim)?;
        if !(-tcg.model_val >= 1e-16 * f.abs().max(1.0)) {
            break Outcome::SubsolverFailure;
        }
        let x_trial = match space.retract(&x, &tcg.eta) {
            Ok(p) => p,
            Err(Error::SingularRetraction(_)) => break Outcome::NumericalFailure,
            Err(e) => return Err(e),
        };
        let f_trial = obj.value(&x_trial);
        if !f_trial.is_finite() {
            break Outcome::NumericalFailure;
        }
        let rho = trace::rho(f, f_trial, tcg.model_val);
        let success = rho >= cfg.rho_th;
        records.push(IterationRecord {
            k,
            f,
            grad_norm,
            param: delta,
            model_val: tcg.model_val,
            rho,
            success,
            lambda_min: lambda,
            grad_evals: bundle.grad_evals(),
            hess_evals: bundle.hess_evals(),
            millis: start.elapsed().as_secs_f64() * 1e3,
            step_norm: tcg.eta.norm(),
            curvature_ratio: None,
        });
        drop(h);
        if success {
            x = x_trial;
            f = f_trial;
        }
        delta = trace::next_delta(delta, success, cfg.gamma, delta_max);
    };

    let (n_succ, n_fail) = trace::count_outcomes(&records);
    Ok(RunTrace {
        kind: SolverKind::TrustRegion,
        records,
        outcome,
        n_succ,
        n_fail,
        final_point: x,
        final_f: f,
        final_grad_norm: last_grad_norm,
        final_lambda: last_lambda,
        grad_evals: bundle.grad_evals(),
        hess_evals: bundle.hess_evals(),
        sigma_clamps: 0,
        millis: start.elapsed().as_secs_f64() * 1e3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arc::StoppingRule;
    use crate::manifold::{Euclidean, Mat};
    use crate::operator::DenseOperator;
    use crate::oracle::OracleMode;
    use crate::problems::{Quadratic, RobustRegression};
    use crate::trace::{check_laws, TraceLaws};

    fn setup(g: &[f64], h: &[f64]) -> (TangentVector, DenseOperator) {
        let d = g.len();
        let x = Euclidean::new(d).random_point(0);
        let grad = TangentVector::new_unchecked(&x, Mat::from_column_slice(d, 1, g));
        (grad, DenseOperator::new(&x, Mat::from_row_slice(d, d, h)).unwrap())
    }

    #[test]
    fn zero_gradient_gives_zero_step() {
        let (g, h) = setup(&[0.0, 0.0], &[1.0, 0.0, 0.0, 2.0]);
        let r = tr_subproblem(&g, &h, 1.0, 2).unwrap();
        assert!(r.eta.is_zero());
        assert_eq!(r.stop, TcgStop::ZeroGradient);
    }

    #[test]
    fn interior_newton_step() {
        let (g, h) = setup(&[1.0, 0.0], &[1.0, 0.0, 0.0, 1.0]);
        let r = tr_subproblem(&g, &h, 10.0, 2).unwrap();
        assert!((r.eta.data() - Mat::from_column_slice(2, 1, &[-1.0, 0.0])).norm() < 1e-14);
        assert!((r.model_val + 0.5).abs() < 1e-14);
    }

    #[test]
    fn boundary_step() {
        let (g, h) = setup(&[1.0, 0.0], &[1.0, 0.0, 0.0, 1.0]);
        let r = tr_subproblem(&g, &h, 0.5, 2).unwrap();
        assert_eq!(r.stop, TcgStop::Boundary);
        assert!((r.eta.norm() - 0.5).abs() < 1e-14);
        // the 1-D model t − t²/2 along −G is increasing in t on [0, 1]
        assert!((r.model_val - (-0.5 + 0.125)).abs() < 1e-14);
    }

    #[test]
    fn negative_curvature_goes_to_boundary() {
        let (g, h) = setup(&[1.0, 0.0], &[-1.0, 0.0, 0.0, 1.0]);
        let r = tr_subproblem(&g, &h, 2.0, 2).unwrap();
        assert_eq!(r.stop, TcgStop::NegativeCurvature);
        assert!((r.eta.norm() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn steps_respect_radius_and_cauchy_decrease() {
        for seed in 0..100u64 {
            let space = Euclidean::new(6);
            let x = space.random_point(seed);
            let g = space
                .random_tangent(&x, seed + 1)
                .unwrap()
                .scaled(1.0 + seed as f64 / 10.0);
            let mut rng = crate::rng::seeded(seed);
            let a = crate::manifold::gaussian_matrix(6, 6, &mut rng);
            let hm = crate::manifold::sym(&a).unwrap();
            let h = DenseOperator::new(&x, hm).unwrap();
            let delta = 0.1 + (seed % 7) as f64 * 0.3;
            let r = tr_subproblem(&g, &h, delta, 6).unwrap();
            assert!(r.eta.norm() <= delta * (1.0 + 1e-12));
            // Cauchy point of the quadratic model in the ball
            let gn = g.norm();
            let kappa = h.apply(&g).unwrap().inner(&g).unwrap();
            let tmax = delta / gn;
            let t = if kappa > 0.0 { (gn * gn / kappa).min(tmax) } else { tmax };
            let mc = -t * gn * gn + 0.5 * t * t * kappa;
            assert!(r.model_val <= mc + 1e-12);
        }
    }

    #[test]
    fn convex_quadratic_run() {
        let q = Quadratic::random(5, 6, 3);
        let cfg = SolverConfig {
            eps_g: 1e-8,
            eps_h: 1e-3,
            stopping: StoppingRule::GradSquaredThreshold(1e-16),
            ..Default::default()
        };
        let trace = run(&q, q.manifold().random_point(4), &cfg).unwrap();
        assert_eq!(trace.outcome, Outcome::OptimalityReached);
        let laws = TraceLaws {
            kind: SolverKind::TrustRegion,
            gamma: cfg.gamma,
            rho_th: cfg.rho_th,
            delta_max: Some(cfg.delta_max()),
            grad_sample_size: Some(6),
            hess_sample_size: Some(6),
        };
        assert!(check_laws(&trace.records, &laws).is_empty());
        assert!(trace.records.iter().all(|r| r.param <= cfg.delta_max()));
        // late iterations are interior and the radius no longer shrinks
        let tail = &trace.records[trace.records.len().saturating_sub(2)..];
        assert!(tail.iter().all(|r| r.success && r.step_norm < r.param));
    }

    #[test]
    fn subsampled_run_obeys_laws() {
        let obj = RobustRegression::random(5, 80, 2);
        let cfg = SolverConfig {
            mode: OracleMode::SubsampledBoth,
            grad_sample_size: 20,
            hess_sample_size: 4,
            stopping: StoppingRule::GradSquaredThreshold(1e-6),
            max_iters: Some(300),
            seed: 5,
            ..Default::default()
        };
        let trace = run(&obj, obj.manifold().random_point(1), &cfg).unwrap();
        let laws = TraceLaws {
            kind: SolverKind::TrustRegion,
            gamma: cfg.gamma,
            rho_th: cfg.rho_th,
            delta_max: Some(cfg.delta_max()),
            grad_sample_size: Some(20),
            hess_sample_size: Some(4),
        };
        assert!(check_laws(&trace.records, &laws).is_empty());
        assert!(trace.records.iter().all(|r| r.step_norm <= r.param * (1.0 + 1e-12)));
    }
}
