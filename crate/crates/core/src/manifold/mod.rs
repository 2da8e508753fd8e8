//! Manifold abstraction used by the solvers.
//!
//! Points and tangent vectors are stored as dense `d x r` matrices (column
//! vectors for the Euclidean case). A [`TangentVector`] remembers the point it
//! is attached to, and every operation that combines two tangent vectors
//! checks that they share a base.

mod euclidean;
mod stiefel;

use std::sync::Arc;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng;

pub use euclidean::Euclidean;
pub use stiefel::{qf, Stiefel};

pub type Mat = DMatrix<f64>;

/// A point on a manifold. Cloning is cheap; the matrix is shared.
#[derive(Clone, Debug)]
pub struct ManifoldPoint {
    data: Arc<Mat>,
}

impl ManifoldPoint {
    /// Wraps raw data without a feasibility check; see [`Manifold::point`].
    pub fn new_unchecked(data: Mat) -> Self {
        Self { data: Arc::new(data) }
    }

    pub fn data(&self) -> &Mat {
        &self.data
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.shape()
    }

    /// Same point: either the same allocation or bitwise-equal entries.
    pub fn same_as(&self, other: &ManifoldPoint) -> bool {
        Arc::ptr_eq(&self.data, &other.data) || *self.data == *other.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// An element of the tangent space at `base`.
#[derive(Clone, Debug)]
pub struct TangentVector {
    data: Mat,
    base: ManifoldPoint,
}

impl TangentVector {
    /// Attaches `data` to `base` without checking tangency.
    pub fn new_unchecked(base: &ManifoldPoint, data: Mat) -> Self {
        Self {
            data,
            base: base.clone(),
        }
    }

    pub fn zero(base: &ManifoldPoint) -> Self {
        let (d, r) = base.shape();
        Self::new_unchecked(base, Mat::zeros(d, r))
    }

    pub fn data(&self) -> &Mat {
        &self.data
    }

    pub fn into_data(self) -> Mat {
        self.data
    }

    pub fn base(&self) -> &ManifoldPoint {
        &self.base
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    fn check_compatible(&self, other: &TangentVector) -> Result<()> {
        if self.data.shape() != other.data.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.data.shape(),
                got: other.data.shape(),
            });
        }
        if !self.base.same_as(&other.base) {
            return Err(Error::BaseMismatch);
        }
        Ok(())
    }

    /// Frobenius inner product `trace(selfᵀ other)`.
    pub fn inner(&self, other: &TangentVector) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self.data.dot(&other.data))
    }

    pub fn norm(&self) -> f64 {
        self.data.norm()
    }

    pub fn scaled(&self, a: f64) -> TangentVector {
        TangentVector {
            data: &self.data * a,
            base: self.base.clone(),
        }
    }

    /// `self += a * other`
    pub fn add_scaled(&mut self, a: f64, other: &TangentVector) -> Result<()> {
        self.check_compatible(other)?;
        self.data.zip_apply(&other.data, |s, o| *s += a * o);
        Ok(())
    }

    /// `a * x + b * y`
    pub fn lin_comb(a: f64, x: &TangentVector, b: f64, y: &TangentVector) -> Result<TangentVector> {
        x.check_compatible(y)?;
        let mut data = &x.data * a;
        data.zip_apply(&y.data, |s, o| *s += b * o);
        Ok(TangentVector {
            data,
            base: x.base.clone(),
        })
    }
}

/// `(Aᵀ + A) / 2` for a square matrix.
pub fn sym(a: &Mat) -> Result<Mat> {
    let (rows, cols) = a.shape();
    if rows != cols {
        return Err(Error::NotSquare(rows, cols));
    }
    Ok((a + a.transpose()) * 0.5)
}

pub(crate) fn check_shape(expected: (usize, usize), got: (usize, usize)) -> Result<()> {
    if expected != got {
        return Err(Error::ShapeMismatch { expected, got });
    }
    Ok(())
}

/// Riemannian submanifold of `R^{d x r}` with the Frobenius metric.
pub trait Manifold: Send + Sync {
    /// Ambient matrix shape `(d, r)`.
    fn shape(&self) -> (usize, usize);

    /// Intrinsic dimension (dimension of every tangent space).
    fn dimension(&self) -> usize;

    /// `‖XᵀX − I‖_F` for Stiefel, zero for flat spaces.
    fn feasibility_residual(&self, x: &Mat) -> f64;

    /// Residual of the tangent-space defining equation at `x`.
    fn tangency_residual(&self, x: &Mat, xi: &Mat) -> f64;

    /// Orthogonal projection of an ambient matrix onto `T_x M`.
    fn project(&self, x: &ManifoldPoint, w: &Mat) -> Result<TangentVector>;

    fn retract(&self, x: &ManifoldPoint, xi: &TangentVector) -> Result<ManifoldPoint>;

    fn random_point(&self, seed: u64) -> ManifoldPoint;

    /// Converts a Euclidean Hessian-vector product into the Riemannian one.
    ///
    /// `egrad` is the Euclidean gradient at `x` and `ehess_xi` the Euclidean
    /// Hessian applied to `xi`.
    fn ehess_to_rhess(
        &self,
        x: &ManifoldPoint,
        egrad: &Mat,
        ehess_xi: &Mat,
        xi: &TangentVector,
    ) -> Result<TangentVector>;

    fn egrad_to_rgrad(&self, x: &ManifoldPoint, egrad: &Mat) -> Result<TangentVector> {
        self.project(x, egrad)
    }

    /// Builds a point after checking shape, finiteness and feasibility (1e-10).
    fn point(&self, data: Mat) -> Result<ManifoldPoint> {
        check_shape(self.shape(), data.shape())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Infeasible(f64::NAN));
        }
        let res = self.feasibility_residual(&data);
        if res > 1e-10 {
            return Err(Error::Infeasible(res));
        }
        Ok(ManifoldPoint::new_unchecked(data))
    }

    /// Builds a tangent vector at `x` after checking tangency (1e-10).
    fn tangent(&self, x: &ManifoldPoint, data: Mat) -> Result<TangentVector> {
        check_shape(self.shape(), data.shape())?;
        let res = self.tangency_residual(x.data(), &data);
        if res > 1e-10 {
            return Err(Error::NotTangent(res));
        }
        Ok(TangentVector::new_unchecked(x, data))
    }

    fn inner(&self, x: &ManifoldPoint, eta: &TangentVector, xi: &TangentVector) -> Result<f64> {
        check_shape(self.shape(), eta.data().shape())?;
        if !eta.base().same_as(x) {
            return Err(Error::BaseMismatch);
        }
        eta.inner(xi)
    }

    /// Unit-norm tangent vector from a projected Gaussian draw.
    fn random_tangent(&self, x: &ManifoldPoint, seed: u64) -> Result<TangentVector> {
        let (d, r) = self.shape();
        let mut rng = rng::seeded(seed);
        loop {
            let w = Mat::from_fn(d, r, |_, _| StandardNormal.sample(&mut rng));
            let xi = self.project(x, &w)?;
            let norm = xi.norm();
            if norm > 1e-8 {
                return Ok(xi.scaled(1.0 / norm));
            }
        }
    }
}

/// Dense Gaussian matrix drawn from `rng`.
pub(crate) fn gaussian_matrix<R: rand::Rng>(rows: usize, cols: usize, rng: &mut R) -> Mat {
    Mat::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}
