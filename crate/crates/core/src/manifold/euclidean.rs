use super::{check_shape, gaussian_matrix, Manifold, ManifoldPoint, Mat, TangentVector};
use crate::error::Result;
use crate::rng;

/// Flat space `R^d`, stored as `d x 1` column matrices.
#[derive(Clone, Debug)]
pub struct Euclidean {
    dim: usize,
}

impl Euclidean {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "Euclidean space needs dimension >= 1");
        Self { dim }
    }
}

impl Manifold for Euclidean {
    fn shape(&self) -> (usize, usize) {
        (self.dim, 1)
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn feasibility_residual(&self, _x: &Mat) -> f64 {
        0.0
    }

    fn tangency_residual(&self, _x: &Mat, _xi: &Mat) -> f64 {
        0.0
    }

    fn project(&self, x: &ManifoldPoint, w: &Mat) -> Result<TangentVector> {
        check_shape(self.shape(), w.shape())?;
        Ok(TangentVector::new_unchecked(x, w.clone()))
    }

    fn retract(&self, x: &ManifoldPoint, xi: &TangentVector) -> Result<ManifoldPoint> {
        check_shape(self.shape(), xi.data().shape())?;
        if !xi.base().same_as(x) {
            return Err(crate::Error::BaseMismatch);
        }
        if xi.is_zero() {
            return Ok(x.clone());
        }
        Ok(ManifoldPoint::new_unchecked(x.data() + xi.data()))
    }

    fn random_point(&self, seed: u64) -> ManifoldPoint {
        let mut rng = rng::seeded(seed);
        ManifoldPoint::new_unchecked(gaussian_matrix(self.dim, 1, &mut rng))
    }

    fn ehess_to_rhess(
        &self,
        x: &ManifoldPoint,
        _egrad: &Mat,
        ehess_xi: &Mat,
        _xi: &TangentVector,
    ) -> Result<TangentVector> {
        self.project(x, ehess_xi)
    }
}
