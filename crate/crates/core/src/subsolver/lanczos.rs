//! Smallest-eigenvalue estimation for a Hessian operator restricted to a
//! tangent space.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::Result;
use crate::manifold::{Manifold, ManifoldPoint, TangentVector};
use crate::operator::LinearOperator;

#[derive(Clone, Debug)]
pub struct EigenEstimate {
    /// Rayleigh quotient `⟨v, H[v]⟩` of the returned vector, so never below
    /// the true smallest eigenvalue.
    pub value: f64,
    /// Unit-norm direction.
    pub vector: TangentVector,
    /// Smallest Ritz value of the final Krylov space.
    pub ritz_value: f64,
    /// Largest Ritz value magnitude, an estimate of `‖H‖`.
    pub norm_estimate: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Symmetric Lanczos with full reorthogonalization, started from a seeded
/// random tangent vector.
///
/// Stops once the Ritz residual `β_j |s_j|` is below
/// `tol · max(1, ‖H‖_est)`, the Krylov space becomes invariant, or it spans the
/// whole tangent space. Hitting `max_iters` first returns the best estimate
/// with `converged = false`.
pub fn min_eig_estimate(
    space: &dyn Manifold,
    base: &ManifoldPoint,
    op: &dyn LinearOperator,
    tol: f64,
    max_iters: usize,
    seed: u64,
) -> Result<EigenEstimate> {
    let dim = space.dimension();
    let max_iters = max_iters.max(1);
    let q0 = space.random_tangent(base, seed)?;

    let mut basis: Vec<TangentVector> = vec![q0];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut ritz = (0.0, vec![1.0], 0.0);

    for j in 0..max_iters {
        let qj = &basis[j];
        let mut w = op.apply(qj)?;
        let alpha = qj.inner(&w)?;
        alphas.push(alpha);
        // two passes of Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for q in &basis {
                let c = q.inner(&w)?;
                w.add_scaled(-c, q)?;
            }
        }
        let beta = w.norm();
        let size = j + 1;
        let exhausted =
            size >= dim || beta <= 1e-14 * alpha.abs().max(betas.last().copied().unwrap_or(0.0)).max(1e-300);
        let check = exhausted || j + 1 == max_iters || size < 50 || size % 5 == 0;
        if check {
            ritz = smallest_ritz(&alphas, &betas);
            let residual = beta * ritz.1[size - 1].abs();
            if exhausted || residual <= tol * ritz.2.max(1.0) {
                converged = true;
                break;
            }
        }
        if j + 1 == max_iters {
            break;
        }
        betas.push(beta);
        basis.push(w.scaled(1.0 / beta));
    }

    let (ritz_value, coeffs, norm_estimate) = ritz;
    let mut v = TangentVector::zero(base);
    for (c, q) in coeffs.iter().zip(&basis) {
        v.add_scaled(*c, q)?;
    }
    let v = v.scaled(1.0 / v.norm());
    let value = op.apply(&v)?.inner(&v)?;
    Ok(EigenEstimate {
        value,
        vector: v,
        ritz_value,
        norm_estimate,
        converged,
        iterations: alphas.len(),
    })
}

/// Smallest eigenpair of the tridiagonal matrix and the spectral radius.
fn smallest_ritz(alphas: &[f64], betas: &[f64]) -> (f64, Vec<f64>, f64) {
    let n = alphas.len();
    let t = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            alphas[i]
        } else if i + 1 == j {
            betas[i]
        } else if j + 1 == i {
            betas[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let (imin, &lmin) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty tridiagonal");
    let radius = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (lmin, eig.eigenvectors.column(imin).iter().copied().collect(), radius)
}
