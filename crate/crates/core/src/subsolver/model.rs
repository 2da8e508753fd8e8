use crate::error::{Error, Result};
use crate::manifold::{Manifold, ManifoldPoint, TangentVector};
use crate::operator::LinearOperator;

/// Cubic model `m(η) = ⟨G,η⟩ + ½⟨H[η],η⟩ + (σ/3)‖η‖³` on the tangent space
/// at `G`'s base point.
pub struct CubicModel<'a> {
    space: &'a dyn Manifold,
    gradient: TangentVector,
    hessian: &'a dyn LinearOperator,
    sigma: f64,
}

/// A step together with its model value.
#[derive(Clone, Debug)]
pub struct ModelStep {
    pub eta: TangentVector,
    pub model_value: f64,
}

/// Cauchy step `−α* G` and the quantities that determine it.
#[derive(Clone, Debug)]
pub struct CauchyStep {
    pub step: ModelStep,
    pub alpha: f64,
    /// `⟨G, H[G]⟩`
    pub curvature: f64,
}

/// Step `β s v` along a negative-curvature direction.
#[derive(Clone, Debug)]
pub struct EigenStep {
    pub step: ModelStep,
    pub beta: f64,
    /// `⟨v, H[v]⟩` for the unit direction used.
    pub rayleigh: f64,
}

impl<'a> CubicModel<'a> {
    pub fn new(
        space: &'a dyn Manifold,
        gradient: TangentVector,
        hessian: &'a dyn LinearOperator,
        sigma: f64,
    ) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                value: sigma,
            });
        }
        Ok(Self {
            space,
            gradient,
            hessian,
            sigma,
        })
    }

    pub fn space(&self) -> &'a dyn Manifold {
        self.space
    }

    pub fn base(&self) -> &ManifoldPoint {
        self.gradient.base()
    }

    pub fn gradient(&self) -> &TangentVector {
        &self.gradient
    }

    pub fn hessian(&self) -> &'a dyn LinearOperator {
        self.hessian
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn hvp(&self, v: &TangentVector) -> Result<TangentVector> {
        self.hessian.apply(v)
    }

    pub fn eval(&self, eta: &TangentVector) -> Result<f64> {
        if eta.is_zero() {
            // still reject foreign vectors
            self.gradient.inner(eta)?;
            return Ok(0.0);
        }
        let h_eta = self.hvp(eta)?;
        self.eval_with(eta, &h_eta)
    }

    /// Model value when `H[η]` is already known.
    pub fn eval_with(&self, eta: &TangentVector, h_eta: &TangentVector) -> Result<f64> {
        let norm = eta.norm();
        Ok(self.gradient.inner(eta)? + 0.5 * h_eta.inner(eta)? + self.sigma / 3.0 * norm * norm * norm)
    }

    /// Exact minimizer of the model along `−G`.
    ///
    /// `α*` is the positive root of `σ‖G‖³α² + ⟨G,H[G]⟩α − ‖G‖² = 0`.
    pub fn cauchy_point(&self) -> Result<CauchyStep> {
        let g = &self.gradient;
        let gnorm = g.norm();
        if gnorm == 0.0 {
            return Err(Error::ZeroGradient);
        }
        let curvature = self.hvp(g)?.inner(g)?;
        let a = self.sigma * gnorm.powi(3);
        let c = gnorm * gnorm;
        let alpha = positive_root(a, curvature, c);
        let model_value = -alpha * c + 0.5 * alpha * alpha * curvature + a * alpha.powi(3) / 3.0;
        Ok(CauchyStep {
            step: ModelStep {
                eta: g.scaled(-alpha),
                model_value,
            },
            alpha,
            curvature,
        })
    }

    /// Minimizer of the model along `s v`, `s = −sign⟨G,v⟩` (`+1` on ties),
    /// over nonnegative step lengths.
    pub fn eigen_point(&self, v: &TangentVector, lambda_est: f64) -> Result<EigenStep> {
        if !(lambda_est < 0.0) {
            return Err(Error::NonNegativeCurvature(lambda_est));
        }
        let v = v.scaled(1.0 / v.norm());
        let rayleigh = self.hvp(&v)?.inner(&v)?;
        self.eigen_step_unit(v, rayleigh)
    }

    /// [`eigen_point`](Self::eigen_point) for a unit `v` whose Rayleigh
    /// quotient is already known.
    pub(crate) fn eigen_step_unit(&self, v: TangentVector, rayleigh: f64) -> Result<EigenStep> {
        let gv = self.gradient.inner(&v)?;
        let sign = if gv > 0.0 { -1.0 } else { 1.0 };
        let slope = gv.abs();
        // φ(β) = −|⟨G,v⟩|β + ½⟨v,Hv⟩β² + (σ/3)β³, stationary at σβ² + ⟨v,Hv⟩β − |⟨G,v⟩| = 0
        let beta = positive_root(self.sigma, rayleigh, slope);
        let model_value = -slope * beta + 0.5 * rayleigh * beta * beta + self.sigma * beta.powi(3) / 3.0;
        Ok(EigenStep {
            step: ModelStep {
                eta: v.scaled(sign * beta),
                model_value,
            },
            beta,
            rayleigh,
        })
    }
}

/// Largest root of `a t² + b t − c = 0` for `a > 0`, `c >= 0`, computed
/// without cancellation.
pub(crate) fn positive_root(a: f64, b: f64, c: f64) -> f64 {
    let disc = (b * b + 4.0 * a * c).sqrt();
    if b >= 0.0 {
        if c == 0.0 {
            0.0
        } else {
            2.0 * c / (b + disc)
        }
    } else {
        (-b + disc) / (2.0 * a)
    }
}
