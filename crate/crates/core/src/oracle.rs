//! Exact and sub-sampled derivative oracles for separable objectives
//! `f = (1/n) Σ f_i`.

use std::cell::Cell;

use rand::Rng;

use crate::error::{Error, Result};
use crate::manifold::{Manifold, ManifoldPoint, Mat, TangentVector};
use crate::operator::LinearOperator;
use crate::rng::{self, Purpose};

/// An objective that is the mean of `n` smooth components.
///
/// Implementors supply Euclidean (ambient) derivatives per component; the
/// Riemannian versions are obtained through the manifold.
pub trait SeparableObjective: Send + Sync {
    type Space: Manifold;

    fn manifold(&self) -> &Self::Space;

    fn num_components(&self) -> usize;

    fn component_value(&self, x: &ManifoldPoint, i: usize) -> f64;

    fn component_egrad(&self, x: &ManifoldPoint, i: usize) -> Mat;

    /// Euclidean Hessian of `f_i` at `x` applied to the ambient matrix `xi`.
    fn component_ehess_vec(&self, x: &ManifoldPoint, xi: &Mat, i: usize) -> Mat;

    /// Full objective, summed in component order.
    fn value(&self, x: &ManifoldPoint) -> f64 {
        let n = self.num_components();
        (0..n).map(|i| self.component_value(x, i)).sum::<f64>() / n as f64
    }

    /// Mean Euclidean gradient over `indices` (all components if `None`).
    fn egrad_mean(&self, x: &ManifoldPoint, indices: Option<&[usize]>) -> Mat {
        mean_over(self.num_components(), indices, x.shape(), |i| {
            self.component_egrad(x, i)
        })
    }

    fn ehess_vec_mean(&self, x: &ManifoldPoint, xi: &Mat, indices: Option<&[usize]>) -> Mat {
        mean_over(self.num_components(), indices, x.shape(), |i| {
            self.component_ehess_vec(x, xi, i)
        })
    }

    /// Riemannian gradient of the mean over `indices`.
    fn rgrad(&self, x: &ManifoldPoint, indices: Option<&[usize]>) -> Result<TangentVector> {
        self.manifold().egrad_to_rgrad(x, &self.egrad_mean(x, indices))
    }

    /// Riemannian Hessian of the mean over `indices`, applied to `xi`.
    fn rhess_vec(&self, x: &ManifoldPoint, xi: &TangentVector, indices: Option<&[usize]>) -> Result<TangentVector> {
        let egrad = self.egrad_mean(x, indices);
        let ehess = self.ehess_vec_mean(x, xi.data(), indices);
        self.manifold().ehess_to_rhess(x, &egrad, &ehess, xi)
    }
}

fn mean_over<F>(n: usize, indices: Option<&[usize]>, shape: (usize, usize), mut term: F) -> Mat
where
    F: FnMut(usize) -> Mat,
{
    let mut acc = Mat::zeros(shape.0, shape.1);
    let count = match indices {
        Some(idx) => {
            for &i in idx {
                acc += term(i);
            }
            idx.len()
        }
        None => {
            for i in 0..n {
                acc += term(i);
            }
            n
        }
    };
    acc / count as f64
}

/// Which derivatives are sub-sampled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum OracleMode {
    Exact,
    SubsampledHessianOnly,
    SubsampledBoth,
}

impl OracleMode {
    fn samples_gradient(self) -> bool {
        self == OracleMode::SubsampledBoth
    }

    fn samples_hessian(self) -> bool {
        self != OracleMode::Exact
    }
}

/// Index sets drawn for one outer iteration. `None` means all components.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IterationSample {
    pub iteration: u64,
    pub gradient: Option<Vec<usize>>,
    pub hessian: Option<Vec<usize>>,
}

/// Draws `size` indices uniformly with replacement from `0..n`.
pub fn draw_indices(n: usize, size: usize, seed: u64, iteration: u64, purpose: Purpose) -> Vec<usize> {
    let mut g = rng::keyed(seed, iteration, purpose);
    (0..size).map(|_| g.random_range(0..n)).collect()
}

/// Gradient and Hessian providers plus evaluation counters.
///
/// Counters count component evaluations: one gradient call adds `|S_g|`
/// (or `n` when exact), one Hessian-vector product adds `|S_H|` (or `n`).
#[derive(Debug)]
pub struct OracleBundle {
    mode: OracleMode,
    n: usize,
    grad_sample_size: usize,
    hess_sample_size: usize,
    seed: u64,
    grad_evals: Cell<u64>,
    hess_evals: Cell<u64>,
    current: Option<IterationSample>,
}

impl OracleBundle {
    pub fn new(
        mode: OracleMode,
        n: usize,
        grad_sample_size: usize,
        hess_sample_size: usize,
        seed: u64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimensions("objective has no components".into()));
        }
        let check = |name: &'static str, size: usize, used: bool| -> Result<usize> {
            if !used {
                return Ok(n);
            }
            if size == 0 || size > n {
                return Err(Error::InvalidParameter {
                    name,
                    value: size as f64,
                });
            }
            Ok(size)
        };
        Ok(Self {
            mode,
            n,
            grad_sample_size: check("grad_sample_size", grad_sample_size, mode.samples_gradient())?,
            hess_sample_size: check("hess_sample_size", hess_sample_size, mode.samples_hessian())?,
            seed,
            grad_evals: Cell::new(0),
            hess_evals: Cell::new(0),
            current: None,
        })
    }

    pub fn exact(n: usize) -> Result<Self> {
        Self::new(OracleMode::Exact, n, n, n, 0)
    }

    pub fn mode(&self) -> OracleMode {
        self.mode
    }

    pub fn num_components(&self) -> usize {
        self.n
    }

    /// Components evaluated per gradient call.
    pub fn grad_sample_size(&self) -> usize {
        self.grad_sample_size
    }

    /// Components evaluated per Hessian-vector product.
    pub fn hess_sample_size(&self) -> usize {
        self.hess_sample_size
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn grad_evals(&self) -> u64 {
        self.grad_evals.get()
    }

    pub fn hess_evals(&self) -> u64 {
        self.hess_evals.get()
    }

    pub fn current_sample(&self) -> Option<&IterationSample> {
        self.current.as_ref()
    }

    /// Fixes `S_g` and `S_H` for outer iteration `iteration`.
    ///
    /// Each index set comes from its own keyed stream, so the Hessian sample
    /// at iteration `k` does not depend on whether gradients are sampled.
    pub fn begin_iteration(&mut self, iteration: u64) {
        let gradient = self.mode.samples_gradient().then(|| {
            draw_indices(
                self.n,
                self.grad_sample_size,
                self.seed,
                iteration,
                Purpose::GradientSample,
            )
        });
        let hessian = self.mode.samples_hessian().then(|| {
            draw_indices(
                self.n,
                self.hess_sample_size,
                self.seed,
                iteration,
                Purpose::HessianSample,
            )
        });
        self.current = Some(IterationSample {
            iteration,
            gradient,
            hessian,
        });
    }

    fn sample_for(&self, sampled: bool, pick: fn(&IterationSample) -> Option<&Vec<usize>>) -> Result<Option<&[usize]>> {
        if !sampled {
            return Ok(None);
        }
        let sample = self.current.as_ref().ok_or(Error::StaleSample)?;
        Ok(pick(sample).map(|v| v.as_slice()))
    }

    /// `G = (1/|S_g|) Σ_{i∈S_g} grad f_i(x)`, or `grad f(x)` in exact modes.
    pub fn inexact_gradient<O: SeparableObjective>(&self, obj: &O, x: &ManifoldPoint) -> Result<TangentVector> {
        let idx = self.sample_for(self.mode.samples_gradient(), |s| s.gradient.as_ref())?;
        let g = obj.rgrad(x, idx)?;
        self.grad_evals
            .set(self.grad_evals.get() + self.grad_sample_size as u64);
        Ok(g)
    }

    /// The operator `H[·] = (1/|S_H|) Σ_{i∈S_H} Hess f_i(x)[·]` for the current sample.
    pub fn hessian<'a, O: SeparableObjective>(
        &'a self,
        obj: &'a O,
        x: &ManifoldPoint,
    ) -> Result<HessianOperator<'a, O>> {
        let idx = self.sample_for(self.mode.samples_hessian(), |s| s.hessian.as_ref())?;
        let egrad = obj.egrad_mean(x, idx);
        Ok(HessianOperator {
            obj,
            x: x.clone(),
            indices: idx,
            egrad,
            evals: &self.hess_evals,
            per_call: self.hess_sample_size as u64,
        })
    }

    pub fn inexact_hvp<O: SeparableObjective>(
        &self,
        obj: &O,
        x: &ManifoldPoint,
        eta: &TangentVector,
    ) -> Result<TangentVector> {
        self.hessian(obj, x)?.apply(eta)
    }
}

/// Sub-sampled Riemannian Hessian at a fixed point and sample.
pub struct HessianOperator<'a, O: SeparableObjective> {
    obj: &'a O,
    x: ManifoldPoint,
    indices: Option<&'a [usize]>,
    egrad: Mat,
    evals: &'a Cell<u64>,
    per_call: u64,
}

impl<O: SeparableObjective> HessianOperator<'_, O> {
    pub fn point(&self) -> &ManifoldPoint {
        &self.x
    }
}

impl<O: SeparableObjective> LinearOperator for HessianOperator<'_, O> {
    fn apply(&self, v: &TangentVector) -> Result<TangentVector> {
        if !v.base().same_as(&self.x) {
            return Err(Error::BaseMismatch);
        }
        let ehess = self.obj.ehess_vec_mean(&self.x, v.data(), self.indices);
        self.evals.set(self.evals.get() + self.per_call);
        self.obj.manifold().ehess_to_rhess(&self.x, &self.egrad, &ehess, v)
    }
}

/// Inputs to the sample-size bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleSizeParams {
    /// Failure probability.
    pub delta: f64,
    pub delta_g: f64,
    pub delta_h: f64,
    /// Uniform bound on component gradient norms.
    pub k_g_max: f64,
    /// Uniform bound on component Hessian norms.
    pub k_h_max: f64,
}

impl SampleSizeParams {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("delta", self.delta),
            ("delta_g", self.delta_g),
            ("delta_h", self.delta_h),
        ] {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        for (name, value) in [("k_g_max", self.k_g_max), ("k_h_max", self.k_h_max)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        Ok(())
    }

    /// Real-valued lower bounds on `(|S_g|, |S_H|)` before rounding up.
    pub fn bounds(&self) -> Result<(f64, f64)> {
        self.validate()?;
        let log_term = (1.0 / self.delta).ln();
        let bound = |k: f64, acc: f64| (32.0 * k * k * log_term + 0.25) / (acc * acc);
        Ok((bound(self.k_g_max, self.delta_g), bound(self.k_h_max, self.delta_h)))
    }
}

/// Sample sizes that make the sub-sampled gradient and Hessian accurate to
/// `delta_g` / `delta_h` with probability at least `1 − delta`.
pub fn required_sample_sizes(p: &SampleSizeParams) -> Result<(usize, usize)> {
    let (g, h) = p.bounds()?;
    Ok((g.ceil() as usize, h.ceil() as usize))
}

/// Fraction of `trials` sampled gradients within `delta_g` of the exact one.
///
/// Trial `t` uses the bundle's stream for iteration `t`.
pub fn concentration_trial<O: SeparableObjective>(
    obj: &O,
    x: &ManifoldPoint,
    bundle: &mut OracleBundle,
    delta_g: f64,
    trials: usize,
) -> Result<f64> {
    if trials == 0 {
        return Ok(0.0);
    }
    let exact = obj.rgrad(x, None)?;
    let mut hits = 0usize;
    for t in 0..trials {
        bundle.begin_iteration(t as u64);
        let g = bundle.inexact_gradient(obj, x)?;
        let err = TangentVector::lin_comb(1.0, &g, -1.0, &exact)?.norm();
        if err <= delta_g {
            hits += 1;
        }
    }
    Ok(hits as f64 / trials as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{LinearComponents, Quadratic};

    fn params() -> SampleSizeParams {
        SampleSizeParams {
            delta: 0.01,
            delta_g: 0.1,
            delta_h: 0.1,
            k_g_max: 1.0,
            k_h_max: 1.0,
        }
    }

    #[test]
    fn sample_size_formula() {
        let (g, h) = required_sample_sizes(&params()).unwrap();
        assert_eq!(g, 14762);
        assert_eq!(h, 14762);

        let (b1, _) = params().bounds().unwrap();
        let (b2, _) = SampleSizeParams {
            delta_g: 0.05,
            ..params()
        }
        .bounds()
        .unwrap();
        assert_eq!(b2, 4.0 * b1);
    }

    #[test]
    fn sample_size_rejects_out_of_range() {
        let p = SampleSizeParams {
            delta_h: 1.0,
            ..params()
        };
        assert!(matches!(
            required_sample_sizes(&p),
            Err(Error::InvalidParameter { name: "delta_h", .. })
        ));
        let p = SampleSizeParams {
            k_g_max: 0.0,
            ..params()
        };
        assert!(required_sample_sizes(&p).is_err());
    }

    #[test]
    fn bundle_validates_sizes() {
        assert!(OracleBundle::new(OracleMode::SubsampledBoth, 10, 0, 5, 1).is_err());
        assert!(OracleBundle::new(OracleMode::SubsampledBoth, 10, 5, 11, 1).is_err());
        // exact mode ignores sizes
        let b = OracleBundle::new(OracleMode::Exact, 10, 0, 99, 1).unwrap();
        assert_eq!(b.grad_sample_size(), 10);
    }

    #[test]
    fn exact_gradient_and_hvp_on_quadratic() {
        let q = Quadratic::random(4, 3, 17);
        let x = q.manifold().random_point(2);
        let b = OracleBundle::exact(q.num_components()).unwrap();
        let g = b.inexact_gradient(&q, &x).unwrap();
        let expected = q.total_matrix() * x.data() - q.total_linear();
        assert!((g.data() - &expected).norm() < 1e-12);
        assert_eq!(b.grad_evals(), 3);

        let eta = q.manifold().random_tangent(&x, 3).unwrap();
        let hv = b.inexact_hvp(&q, &x, &eta).unwrap();
        assert!((hv.data() - q.total_matrix() * eta.data()).norm() < 1e-12);
        assert_eq!(b.hess_evals(), 3);

        let zero = b.inexact_hvp(&q, &x, &TangentVector::zero(&x)).unwrap();
        assert_eq!(zero.norm(), 0.0);
    }

    #[test]
    fn single_draw_picks_one_component() {
        let obj = LinearComponents::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let x = obj.manifold().random_point(0);
        // find a seed whose first draw is component 0
        let seed = (0..100)
            .find(|&s| draw_indices(2, 1, s, 0, Purpose::GradientSample) == vec![0])
            .unwrap();
        let mut b = OracleBundle::new(OracleMode::SubsampledBoth, 2, 1, 1, seed).unwrap();
        b.begin_iteration(0);
        let g = b.inexact_gradient(&obj, &x).unwrap();
        assert_eq!(g.data().as_slice(), &[1.0, 0.0]);
        assert_eq!(b.grad_evals(), 1);
    }

    #[test]
    fn identical_components_give_exact_gradient() {
        let obj = LinearComponents::new(vec![vec![0.5, -2.0, 4.0]; 8]);
        let x = obj.manifold().random_point(0);
        let mut b = OracleBundle::new(OracleMode::SubsampledBoth, 8, 8, 2, 5).unwrap();
        b.begin_iteration(3);
        let g = b.inexact_gradient(&obj, &x).unwrap();
        assert_eq!(g.data().as_slice(), &[0.5, -2.0, 4.0]);
        let rate = concentration_trial(&obj, &x, &mut b, 1e-12, 20).unwrap();
        assert_eq!(rate, 1.0);
    }

    #[test]
    fn sampled_hvp_needs_a_sample() {
        let q = Quadratic::random(3, 5, 1);
        let x = q.manifold().random_point(0);
        let mut b = OracleBundle::new(OracleMode::SubsampledHessianOnly, 5, 5, 2, 9).unwrap();
        let eta = q.manifold().random_tangent(&x, 1).unwrap();
        assert!(matches!(b.inexact_hvp(&q, &x, &eta), Err(Error::StaleSample)));
        // gradient is exact in this mode and needs no sample
        assert!(b.inexact_gradient(&q, &x).is_ok());
        b.begin_iteration(0);
        assert!(b.inexact_hvp(&q, &x, &eta).is_ok());
        assert_eq!(b.hess_evals(), 2);
    }

    #[test]
    fn samples_replay_and_are_keyed_by_purpose() {
        let mut a = OracleBundle::new(OracleMode::SubsampledBoth, 50, 10, 5, 77).unwrap();
        let mut b = OracleBundle::new(OracleMode::SubsampledHessianOnly, 50, 50, 5, 77).unwrap();
        for k in 0..5 {
            a.begin_iteration(k);
            b.begin_iteration(k);
            let sa = a.current_sample().unwrap().clone();
            assert_eq!(sa.hessian, b.current_sample().unwrap().hessian);
            assert!(b.current_sample().unwrap().gradient.is_none());
            a.begin_iteration(k);
            assert_eq!(&sa, a.current_sample().unwrap());
        }
    }

    #[test]
    fn sampled_hessian_is_symmetric() {
        let q = Quadratic::random(5, 20, 4);
        let x = q.manifold().random_point(1);
        let mut b = OracleBundle::new(OracleMode::SubsampledBoth, 20, 5, 3, 8).unwrap();
        for t in 0..100 {
            b.begin_iteration(t);
            let h = b.hessian(&q, &x).unwrap();
            let xi = q.manifold().random_tangent(&x, 2 * t).unwrap();
            let eta = q.manifold().random_tangent(&x, 2 * t + 1).unwrap();
            let a = h.apply(&xi).unwrap().inner(&eta).unwrap();
            let c = h.apply(&eta).unwrap().inner(&xi).unwrap();
            assert!((a - c).abs() <= 1e-8 * a.abs().max(c.abs()).max(1e-300));
        }
    }

    #[test]
    fn unbiased_gradient_mean() {
        let obj = LinearComponents::random(3, 40, 21);
        let x = obj.manifold().random_point(0);
        let exact = obj.rgrad(&x, None).unwrap();
        let mut b = OracleBundle::new(OracleMode::SubsampledBoth, 40, 4, 1, 3).unwrap();
        let draws = 10_000;
        let mut sum = Mat::zeros(3, 1);
        let mut sum_sq = Mat::zeros(3, 1);
        for t in 0..draws {
            b.begin_iteration(t);
            let g = b.inexact_gradient(&obj, &x).unwrap().into_data();
            sum_sq += g.component_mul(&g);
            sum += g;
        }
        let n = draws as f64;
        let mean = &sum / n;
        for j in 0..3 {
            let var = sum_sq[j] / n - mean[j] * mean[j];
            let tol = 3.0 * var.max(0.0).sqrt() / n.sqrt();
            assert!((mean[j] - exact.data()[j]).abs() <= tol, "component {j}");
        }
        assert_eq!(b.grad_evals(), 4 * draws);
    }
}
