use super::{check_shape, gaussian_matrix, sym, Manifold, ManifoldPoint, Mat, TangentVector};
use crate::error::{Error, Result};
use crate::rng;

/// Re-orthonormalize after a retraction once `‖XᵀX − I‖_F` exceeds this.
const DRIFT_TOLERANCE: f64 = 1e-8;

/// Stiefel manifold of `d x r` matrices with orthonormal columns, `r <= d`,
/// with the embedded metric `trace(ηᵀξ)` and the QR retraction.
#[derive(Clone, Debug)]
pub struct Stiefel {
    d: usize,
    r: usize,
}

impl Stiefel {
    pub fn new(d: usize, r: usize) -> Result<Self> {
        if r == 0 || r > d {
            return Err(Error::InvalidDimensions(format!(
                "Stiefel needs 1 <= r <= d, got d={d}, r={r}"
            )));
        }
        Ok(Self { d, r })
    }

    pub fn rows(&self) -> usize {
        self.d
    }

    pub fn cols(&self) -> usize {
        self.r
    }
}

/// Orthogonal factor of the thin QR decomposition of `a` (`d >= r`), with
/// signs fixed so that the triangular factor has a nonnegative diagonal.
pub fn qf(a: &Mat) -> Result<Mat> {
    let (d, r) = a.shape();
    if r > d {
        return Err(Error::InvalidDimensions(format!("qf needs rows >= cols, got {d}x{r}")));
    }
    let scale = a.norm().max(f64::MIN_POSITIVE);
    let qr = a.clone().qr();
    let mut q = qr.q();
    let rfac = qr.r();
    for j in 0..r {
        let rjj = rfac[(j, j)];
        if !(rjj.abs() > 1e-12 * scale) {
            return Err(Error::SingularRetraction(rjj.abs()));
        }
        if rjj < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

impl Manifold for Stiefel {
    fn shape(&self) -> (usize, usize) {
        (self.d, self.r)
    }

    fn dimension(&self) -> usize {
        self.d * self.r - self.r * (self.r + 1) / 2
    }

    fn feasibility_residual(&self, x: &Mat) -> f64 {
        (x.transpose() * x - Mat::identity(self.r, self.r)).norm()
    }

    fn tangency_residual(&self, x: &Mat, xi: &Mat) -> f64 {
        let utxi = x.transpose() * xi;
        (&utxi + utxi.transpose()).norm()
    }

    /// `P_U(W) = W − U sym(UᵀW)`
    fn project(&self, x: &ManifoldPoint, w: &Mat) -> Result<TangentVector> {
        check_shape(self.shape(), w.shape())?;
        let u = x.data();
        let s = sym(&(u.transpose() * w))?;
        Ok(TangentVector::new_unchecked(x, w - u * s))
    }

    /// `R_U(ξ) = qf(U + ξ)`
    fn retract(&self, x: &ManifoldPoint, xi: &TangentVector) -> Result<ManifoldPoint> {
        check_shape(self.shape(), xi.data().shape())?;
        if !xi.base().same_as(x) {
            return Err(Error::BaseMismatch);
        }
        if xi.is_zero() {
            return Ok(x.clone());
        }
        let mut q = qf(&(x.data() + xi.data()))?;
        if self.feasibility_residual(&q) > DRIFT_TOLERANCE {
            q = qf(&q)?;
        }
        Ok(ManifoldPoint::new_unchecked(q))
    }

    fn random_point(&self, seed: u64) -> ManifoldPoint {
        let mut rng = rng::seeded(seed);
        loop {
            let a = gaussian_matrix(self.d, self.r, &mut rng);
            if let Ok(q) = qf(&a) {
                return ManifoldPoint::new_unchecked(q);
            }
        }
    }

    /// `P_U(D − ξ sym(Uᵀ egrad) − U sym(ξᵀ egrad) − U sym(Uᵀ D))`, `D` the
    /// Euclidean Hessian applied to `ξ`.
    fn ehess_to_rhess(
        &self,
        x: &ManifoldPoint,
        egrad: &Mat,
        ehess_xi: &Mat,
        xi: &TangentVector,
    ) -> Result<TangentVector> {
        check_shape(self.shape(), egrad.shape())?;
        check_shape(self.shape(), ehess_xi.shape())?;
        if !xi.base().same_as(x) {
            return Err(Error::BaseMismatch);
        }
        let u = x.data();
        let v = xi.data();
        let w = ehess_xi
            - v * sym(&(u.transpose() * egrad))?
            - u * sym(&(v.transpose() * egrad))?
            - u * sym(&(u.transpose() * ehess_xi))?;
        self.project(x, &w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e1() -> Mat {
        Mat::from_column_slice(2, 1, &[1.0, 0.0])
    }

    #[test]
    fn project_examples() {
        let st = Stiefel::new(2, 1).unwrap();
        let u = st.point(e1()).unwrap();
        let w = Mat::from_column_slice(2, 1, &[3.5, -1.25]);
        let p = st.project(&u, &w).unwrap();
        assert_eq!(p.data(), &Mat::from_column_slice(2, 1, &[0.0, -1.25]));

        // normal directions U S vanish
        let st = Stiefel::new(5, 3).unwrap();
        let u = st.random_point(3);
        let s = sym(&Mat::from_fn(3, 3, |i, j| (i * 3 + j) as f64 - 2.0)).unwrap();
        let p = st.project(&u, &(u.data() * s)).unwrap();
        assert!(p.norm() < 1e-12);

        // tangent input is fixed
        let xi = st.random_tangent(&u, 4).unwrap();
        let p = st.project(&u, xi.data()).unwrap();
        assert!((p.data() - xi.data()).norm() < 1e-12);
    }

    #[test]
    fn project_is_idempotent_linear_and_self_adjoint() {
        let st = Stiefel::new(6, 3).unwrap();
        let mut g = rng::seeded(11);
        for seed in 0..20 {
            let u = st.random_point(seed);
            let w1 = gaussian_matrix(6, 3, &mut g);
            let w2 = gaussian_matrix(6, 3, &mut g);
            let p1 = st.project(&u, &w1).unwrap();
            let p2 = st.project(&u, &w2).unwrap();
            assert!(st.tangency_residual(u.data(), p1.data()) < 1e-10);
            let pp = st.project(&u, p1.data()).unwrap();
            assert!((pp.data() - p1.data()).norm() < 1e-12);

            let (a, b) = (0.7, -2.3);
            let lin = st.project(&u, &(&w1 * a + &w2 * b)).unwrap();
            let comb = TangentVector::lin_comb(a, &p1, b, &p2).unwrap();
            assert!((lin.data() - comb.data()).norm() < 1e-12);

            let xi = st.random_tangent(&u, seed + 100).unwrap();
            let lhs = st.inner(&u, &p1, &xi).unwrap();
            let rhs = w1.dot(xi.data());
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn retract_examples() {
        let st = Stiefel::new(2, 1).unwrap();
        let u = st.point(e1()).unwrap();
        let zero = TangentVector::zero(&u);
        assert_eq!(st.retract(&u, &zero).unwrap().data(), u.data());

        let xi = st.tangent(&u, Mat::from_column_slice(2, 1, &[0.0, 1.0])).unwrap();
        let y = st.retract(&u, &xi).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!((y.data() - Mat::from_column_slice(2, 1, &[h, h])).norm() < 1e-15);
    }

    #[test]
    fn retract_zero_is_exact_on_random_points() {
        let st = Stiefel::new(7, 4).unwrap();
        let u = st.random_point(9);
        let y = st.retract(&u, &TangentVector::zero(&u)).unwrap();
        assert_eq!(y.data(), u.data());
    }

    #[test]
    fn retract_rejects_rank_deficient_target() {
        let st = Stiefel::new(3, 2).unwrap();
        let u = st.random_point(1);
        let bad = TangentVector::new_unchecked(&u, -u.data().clone());
        assert!(matches!(st.retract(&u, &bad), Err(Error::SingularRetraction(_))));
    }

    #[test]
    fn retract_stays_feasible() {
        let st = Stiefel::new(8, 5).unwrap();
        for seed in 0..100 {
            let u = st.random_point(seed);
            let xi = st
                .random_tangent(&u, seed + 1000)
                .unwrap()
                .scaled(1.0 + seed as f64 / 10.0);
            let y = st.retract(&u, &xi).unwrap();
            assert!(st.feasibility_residual(y.data()) <= 1e-10);
        }
    }

    #[test]
    fn qf_has_nonnegative_r_diagonal() {
        let mut g = rng::seeded(5);
        let a = gaussian_matrix(6, 4, &mut g);
        let q = qf(&a).unwrap();
        let r = q.transpose() * &a;
        for j in 0..4 {
            assert!(r[(j, j)] > 0.0);
        }
        assert!((&q * r - a).norm() < 1e-12);
    }

    #[test]
    fn random_draws_are_deterministic_and_valid() {
        let st = Stiefel::new(5, 2).unwrap();
        let a = st.random_point(42);
        let b = st.random_point(42);
        assert_eq!(a.data(), b.data());
        assert!(st.feasibility_residual(a.data()) < 1e-10);
        let xi = st.random_tangent(&a, 7).unwrap();
        let eta = st.random_tangent(&a, 7).unwrap();
        assert_eq!(xi.data(), eta.data());
        assert!((xi.norm() - 1.0).abs() < 1e-12);
        assert!(st.tangency_residual(a.data(), xi.data()) < 1e-10);
    }

    #[test]
    fn first_order_retraction_ratio() {
        let st = Stiefel::new(6, 3).unwrap();
        for seed in 0..10 {
            let u = st.random_point(seed);
            let xi = st.random_tangent(&u, seed + 50).unwrap();
            let ratio = |t: f64| {
                let y = st.retract(&u, &xi.scaled(t)).unwrap();
                (y.data() - (u.data() + xi.data() * t)).norm() / t
            };
            let ts = [1e-2, 1e-3, 1e-4];
            let rs: Vec<f64> = ts.iter().map(|&t| ratio(t)).collect();
            for w in 0..3 {
                assert!(rs[w] <= 10.0 * ts[w], "ratio {} at t={}", rs[w], ts[w]);
            }
            assert!(rs[1] <= rs[0] / 5.0 && rs[2] <= rs[1] / 5.0);
        }
    }

    #[test]
    fn dimension_formula() {
        assert_eq!(Stiefel::new(5, 5).unwrap().dimension(), 10);
        assert_eq!(Stiefel::new(5, 1).unwrap().dimension(), 4);
        assert!(Stiefel::new(2, 3).is_err());
    }
}
