//! Joint diagonalization on the Stiefel manifold.
//!
//! `f(U) = −(1/n) Σ ‖diag(Uᵀ C_i U)‖²_F` over `U ∈ St(r, d)`, where `diag`
//! zeroes the off-diagonal entries.

use std::io::{Read, Write};

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{gaussian_matrix, qf, ManifoldPoint, Mat, Stiefel};
use crate::oracle::SeparableObjective;
use crate::rng::{self, Purpose};

/// Off-diagonal noise used by the benchmark unless overridden.
pub const DEFAULT_NOISE: f64 = 0.1;

/// Largest tolerated `‖C − Cᵀ‖_F / max(1, ‖C‖_F)` when loading.
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct JdInstance {
    space: Stiefel,
    matrices: Vec<Mat>,
    seed: u64,
    noise: f64,
}

/// On-disk form: dimensions, generator metadata and row-major matrices.
#[derive(Serialize, Deserialize)]
struct Stored {
    n: usize,
    d: usize,
    r: usize,
    seed: u64,
    noise: f64,
    matrices: Vec<Vec<f64>>,
}

/// Zeroes the off-diagonal part of a square matrix.
fn diag_part(a: &Mat) -> Mat {
    Mat::from_diagonal(&a.diagonal())
}

impl JdInstance {
    /// `C_i = Q D_i Qᵀ + noise · sym(E_i)` with one shared orthogonal `Q`,
    /// positive diagonal `D_i` and Gaussian `E_i`.
    pub fn generate(n: usize, d: usize, r: usize, seed: u64, noise: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimensions("n must be at least 1".into()));
        }
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "noise",
                value: noise,
            });
        }
        let space = Stiefel::new(d, r)?;
        let mut g = rng::keyed(seed, 0, Purpose::Instance);
        let q = qf(&gaussian_matrix(d, d, &mut g))?;
        let matrices = (0..n)
            .map(|_| {
                let diag = DVector::from_fn(d, |_, _| g.random_range(0.1..1.0));
                let core = &q * Mat::from_diagonal(&diag) * q.transpose();
                let e = gaussian_matrix(d, d, &mut g);
                let c = core + (&e + e.transpose()) * (0.5 * noise);
                (&c + c.transpose()) * 0.5
            })
            .collect();
        Ok(Self {
            space,
            matrices,
            seed,
            noise,
        })
    }

    /// Builds an instance from given matrices after symmetrizing them.
    /// Matrices further than [`SYMMETRY_TOLERANCE`] from symmetric are rejected.
    pub fn from_matrices(r: usize, matrices: Vec<Mat>, seed: u64, noise: f64) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::InvalidDimensions("n must be at least 1".into()))?;
        let d = first.nrows();
        let space = Stiefel::new(d, r)?;
        let matrices = matrices
            .into_iter()
            .enumerate()
            .map(|(index, c)| {
                if c.shape() != (d, d) {
                    return Err(Error::ShapeMismatch {
                        expected: (d, d),
                        got: c.shape(),
                    });
                }
                let residual = (&c - c.transpose()).norm() / c.norm().max(1.0);
                if !(residual <= SYMMETRY_TOLERANCE) {
                    return Err(Error::Asymmetric { index, residual });
                }
                Ok((&c + c.transpose()) * 0.5)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            space,
            matrices,
            seed,
            noise,
        })
    }

    pub fn matrices(&self) -> &[Mat] {
        &self.matrices
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    /// `(n, d, r)`
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.matrices.len(), self.space.rows(), self.space.cols())
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        let (n, d, r) = self.dims();
        let stored = Stored {
            n,
            d,
            r,
            seed: self.seed,
            noise: self.noise,
            matrices: self
                .matrices
                .iter()
                .map(|c| c.transpose().iter().copied().collect())
                .collect(),
        };
        serde_json::to_writer(w, &stored).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        let s: Stored = serde_json::from_reader(r).map_err(|e| Error::Serialization(e.to_string()))?;
        if s.matrices.len() != s.n {
            return Err(Error::Serialization(format!(
                "expected {} matrices, found {}",
                s.n,
                s.matrices.len()
            )));
        }
        let matrices = s
            .matrices
            .into_iter()
            .map(|m| {
                if m.len() != s.d * s.d {
                    return Err(Error::Serialization(format!(
                        "matrix has {} entries, expected {}",
                        m.len(),
                        s.d * s.d
                    )));
                }
                Ok(Mat::from_row_slice(s.d, s.d, &m))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_matrices(s.r, matrices, s.seed, s.noise)
    }
}

impl SeparableObjective for JdInstance {
    type Space = Stiefel;

    fn manifold(&self) -> &Stiefel {
        &self.space
    }

    fn num_components(&self) -> usize {
        self.matrices.len()
    }

    fn component_value(&self, x: &ManifoldPoint, i: usize) -> f64 {
        let u = x.data();
        let m = u.transpose() * &self.matrices[i] * u;
        -m.diagonal().norm_squared()
    }

    /// `−4 C_i U diag(Uᵀ C_i U)`
    fn component_egrad(&self, x: &ManifoldPoint, i: usize) -> Mat {
        let u = x.data();
        let cu = &self.matrices[i] * u;
        let dg = diag_part(&(u.transpose() * &cu));
        cu * dg * -4.0
    }

    /// `−4 C_i (ξ diag(UᵀC_iU) + U diag(ξᵀC_iU) + U diag(UᵀC_iξ))`
    fn component_ehess_vec(&self, x: &ManifoldPoint, xi: &Mat, i: usize) -> Mat {
        let u = x.data();
        let c = &self.matrices[i];
        let cu = c * u;
        let ut_cu = diag_part(&(u.transpose() * &cu));
        let cross = diag_part(&(xi.transpose() * &cu)) * 2.0;
        c * (xi * ut_cu + u * cross) * -4.0
    }
}
