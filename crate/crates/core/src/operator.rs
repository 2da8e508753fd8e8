use crate::error::{Error, Result};
use crate::manifold::{ManifoldPoint, Mat, TangentVector};

/// A self-adjoint linear map on one tangent space.
pub trait LinearOperator {
    fn apply(&self, v: &TangentVector) -> Result<TangentVector>;
}

impl<F> LinearOperator for F
where
    F: Fn(&TangentVector) -> Result<TangentVector>,
{
    fn apply(&self, v: &TangentVector) -> Result<TangentVector> {
        self(v)
    }
}

/// Dense symmetric matrix acting on column vectors of a Euclidean space.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    base: ManifoldPoint,
    matrix: Mat,
}

impl DenseOperator {
    pub fn new(base: &ManifoldPoint, matrix: Mat) -> Result<Self> {
        let (d, r) = base.shape();
        if r != 1 || matrix.shape() != (d, d) {
            return Err(Error::ShapeMismatch {
                expected: (d, d),
                got: matrix.shape(),
            });
        }
        Ok(Self {
            base: base.clone(),
            matrix,
        })
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }
}

impl LinearOperator for DenseOperator {
    fn apply(&self, v: &TangentVector) -> Result<TangentVector> {
        if !v.base().same_as(&self.base) {
            return Err(Error::BaseMismatch);
        }
        Ok(TangentVector::new_unchecked(&self.base, &self.matrix * v.data()))
    }
}
