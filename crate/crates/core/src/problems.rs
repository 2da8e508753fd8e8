//! Small separable test objectives on Euclidean space.
//!
//! These have closed-form derivatives and are used to exercise the solvers
//! where exact answers exist.

use crate::manifold::{gaussian_matrix, Euclidean, ManifoldPoint, Mat};
use crate::oracle::SeparableObjective;
use crate::rng;
use rand::Rng;

/// `f_i(x) = ½ xᵀ A_i x − b_iᵀ x` with symmetric positive definite `A_i`.
#[derive(Clone, Debug)]
pub struct Quadratic {
    space: Euclidean,
    a: Vec<Mat>,
    b: Vec<Mat>,
}

impl Quadratic {
    pub fn new(a: Vec<Mat>, b: Vec<Mat>) -> Self {
        assert_eq!(a.len(), b.len());
        assert!(!a.is_empty());
        let dim = b[0].nrows();
        Self {
            space: Euclidean::new(dim),
            a,
            b,
        }
    }

    pub fn random(dim: usize, n: usize, seed: u64) -> Self {
        let mut g = rng::seeded(seed);
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for _ in 0..n {
            let m = gaussian_matrix(dim, dim, &mut g);
            a.push(m.transpose() * &m / dim as f64 + Mat::identity(dim, dim) * 0.1);
            b.push(gaussian_matrix(dim, 1, &mut g));
        }
        Self::new(a, b)
    }

    /// Mean of the `A_i`.
    pub fn total_matrix(&self) -> Mat {
        self.a
            .iter()
            .fold(Mat::zeros(self.space_dim(), self.space_dim()), |acc, m| acc + m)
            / self.a.len() as f64
    }

    /// Mean of the `b_i`.
    pub fn total_linear(&self) -> Mat {
        self.b.iter().fold(Mat::zeros(self.space_dim(), 1), |acc, m| acc + m) / self.b.len() as f64
    }

    fn space_dim(&self) -> usize {
        self.b[0].nrows()
    }
}

impl SeparableObjective for Quadratic {
    type Space = Euclidean;

    fn manifold(&self) -> &Euclidean {
        &self.space
    }

    fn num_components(&self) -> usize {
        self.a.len()
    }

    fn component_value(&self, x: &ManifoldPoint, i: usize) -> f64 {
        let x = x.data();
        0.5 * x.dot(&(&self.a[i] * x)) - self.b[i].dot(x)
    }

    fn component_egrad(&self, x: &ManifoldPoint, i: usize) -> Mat {
        &self.a[i] * x.data() - &self.b[i]
    }

    fn component_ehess_vec(&self, _x: &ManifoldPoint, xi: &Mat, i: usize) -> Mat {
        &self.a[i] * xi
    }
}

/// `f_i(x) = a_iᵀ x`; gradients are the constant vectors `a_i`.
#[derive(Clone, Debug)]
pub struct LinearComponents {
    space: Euclidean,
    a: Vec<Mat>,
}

impl LinearComponents {
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        assert!(!rows.is_empty());
        let dim = rows[0].len();
        let a = rows.into_iter().map(|r| Mat::from_vec(dim, 1, r)).collect();
        Self {
            space: Euclidean::new(dim),
            a,
        }
    }

    /// Random directions with norms uniform in `[0, 1]`.
    pub fn random(dim: usize, n: usize, seed: u64) -> Self {
        let mut g = rng::seeded(seed);
        let a = (0..n)
            .map(|_| {
                let v = gaussian_matrix(dim, 1, &mut g);
                let len: f64 = g.random_range(0.0..1.0);
                &v * (len / v.norm())
            })
            .collect();
        Self {
            space: Euclidean::new(dim),
            a,
        }
    }

    /// Largest component gradient norm.
    pub fn max_gradient_norm(&self) -> f64 {
        self.a.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

impl SeparableObjective for LinearComponents {
    type Space = Euclidean;

    fn manifold(&self) -> &Euclidean {
        &self.space
    }

    fn num_components(&self) -> usize {
        self.a.len()
    }

    fn component_value(&self, x: &ManifoldPoint, i: usize) -> f64 {
        self.a[i].dot(x.data())
    }

    fn component_egrad(&self, _x: &ManifoldPoint, i: usize) -> Mat {
        self.a[i].clone()
    }

    fn component_ehess_vec(&self, _x: &ManifoldPoint, xi: &Mat, _i: usize) -> Mat {
        Mat::zeros(xi.nrows(), xi.ncols())
    }
}

/// Robust regression with the nonconvex loss `ρ(t) = ln(1 + t²/2)`:
/// `f_i(x) = ρ(a_iᵀ x − b_i)`.
#[derive(Clone, Debug)]
pub struct RobustRegression {
    space: Euclidean,
    a: Vec<Mat>,
    b: Vec<f64>,
}

impl RobustRegression {
    pub fn random(dim: usize, n: usize, seed: u64) -> Self {
        let mut g = rng::seeded(seed);
        let truth = gaussian_matrix(dim, 1, &mut g);
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for i in 0..n {
            let row = gaussian_matrix(dim, 1, &mut g);
            let noise: f64 = g.random_range(-0.1..0.1);
            // every fifth observation is a gross outlier
            let outlier = if i % 5 == 0 { g.random_range(-5.0..5.0) } else { 0.0 };
            b.push(row.dot(&truth) + noise + outlier);
            a.push(row);
        }
        Self {
            space: Euclidean::new(dim),
            a,
            b,
        }
    }

    fn residual(&self, x: &ManifoldPoint, i: usize) -> f64 {
        self.a[i].dot(x.data()) - self.b[i]
    }
}

impl SeparableObjective for RobustRegression {
    type Space = Euclidean;

    fn manifold(&self) -> &Euclidean {
        &self.space
    }

    fn num_components(&self) -> usize {
        self.a.len()
    }

    fn component_value(&self, x: &ManifoldPoint, i: usize) -> f64 {
        let t = self.residual(x, i);
        (1.0 + 0.5 * t * t).ln()
    }

    fn component_egrad(&self, x: &ManifoldPoint, i: usize) -> Mat {
        let t = self.residual(x, i);
        &self.a[i] * (t / (1.0 + 0.5 * t * t))
    }

    fn component_ehess_vec(&self, x: &ManifoldPoint, xi: &Mat, i: usize) -> Mat {
        let t = self.residual(x, i);
        let s = 1.0 + 0.5 * t * t;
        let curv = (1.0 - 0.5 * t * t) / (s * s);
        &self.a[i] * (curv * self.a[i].dot(xi))
    }
}

/// `f_i(x) = ¼ (x_i² − 1)²`, one component per coordinate. The origin is a
/// strict saddle with zero gradient and Hessian `−I/d`.
#[derive(Clone, Debug)]
pub struct DoubleWell {
    space: Euclidean,
}

impl DoubleWell {
    pub fn new(dim: usize) -> Self {
        Self {
            space: Euclidean::new(dim),
        }
    }
}

impl SeparableObjective for DoubleWell {
    type Space = Euclidean;

    fn manifold(&self) -> &Euclidean {
        &self.space
    }

    fn num_components(&self) -> usize {
        self.space_dim()
    }

    fn component_value(&self, x: &ManifoldPoint, i: usize) -> f64 {
        let v = x.data()[i];
        0.25 * (v * v - 1.0).powi(2)
    }

    fn component_egrad(&self, x: &ManifoldPoint, i: usize) -> Mat {
        let v = x.data()[i];
        let mut g = Mat::zeros(self.space_dim(), 1);
        g[i] = v * (v * v - 1.0);
        g
    }

    fn component_ehess_vec(&self, x: &ManifoldPoint, xi: &Mat, i: usize) -> Mat {
        let v = x.data()[i];
        let mut h = Mat::zeros(self.space_dim(), 1);
        h[i] = (3.0 * v * v - 1.0) * xi[i];
        h
    }
}

impl DoubleWell {
    fn space_dim(&self) -> usize {
        use crate::manifold::Manifold;
        self.space.dimension()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::Manifold;

    fn fd_check<O: SeparableObjective<Space = Euclidean>>(obj: &O, seed: u64) {
        let x = obj.manifold().random_point(seed);
        let xi = obj.manifold().random_tangent(&x, seed + 1).unwrap();
        let h = 1e-6;
        let shift = |t: f64| ManifoldPoint::new_unchecked(x.data() + xi.data() * t);
        let fd = (obj.value(&shift(h)) - obj.value(&shift(-h))) / (2.0 * h);
        let an = obj.rgrad(&x, None).unwrap().inner(&xi).unwrap();
        assert!((fd - an).abs() < 1e-7 * (1.0 + an.abs()), "{fd} vs {an}");

        let gp = obj.egrad_mean(&shift(h), None);
        let gm = obj.egrad_mean(&shift(-h), None);
        let fdh = (gp - gm) / (2.0 * h);
        let hv = obj.rhess_vec(&x, &xi, None).unwrap();
        assert!((fdh - hv.data()).norm() < 1e-6 * (1.0 + hv.norm()));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        fd_check(&Quadratic::random(4, 6, 1), 3);
        fd_check(&RobustRegression::random(5, 30, 2), 4);
        fd_check(&DoubleWell::new(3), 5);
        fd_check(&LinearComponents::random(3, 5, 6), 6);
    }

    #[test]
    fn value_is_mean_of_components() {
        let obj = RobustRegression::random(4, 25, 9);
        let x = obj.manifold().random_point(1);
        let direct: f64 = (0..25).map(|i| obj.component_value(&x, i)).sum::<f64>() / 25.0;
        assert!((obj.value(&x) - direct).abs() <= 1e-12 * direct.abs());
    }
}
