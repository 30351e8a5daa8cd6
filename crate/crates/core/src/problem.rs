//! Material law and exact solutions.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mapping::{Mat2, Vec2};
use crate::mesh::Point2;

pub const DEFAULT_LAMBDA: f64 = 123.0;
pub const DEFAULT_MU: f64 = 79.3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LameParams {
    pub mu: f64,
    pub lambda: f64,
}

impl LameParams {
    pub fn new(mu: f64, lambda: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) || !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("need mu > 0 and lambda >= 0, got mu = {mu}, lambda = {lambda}")));
        }
        Ok(Self { mu, lambda })
    }

    /// `λ = Eν/((1+ν)(1−2ν))`, `μ = E/(2(1+ν))`.
    pub fn from_young_poisson(e: f64, nu: f64) -> Result<Self> {
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::InvalidParameter(format!("Young's modulus must be positive, got {e}")));
        }
        if !(0.0..0.5).contains(&nu) {
            return Err(Error::InvalidParameter(format!("Poisson ratio must lie in [0, 1/2), got {nu}")));
        }
        Self::new(e / (2.0 * (1.0 + nu)), e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)))
    }
}

impl Default for LameParams {
    fn default() -> Self {
        Self { mu: DEFAULT_MU, lambda: DEFAULT_LAMBDA }
    }
}

/// Isotropic compliance on symmetric matrices, `skew_factor · I` on skew ones.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Compliance {
    pub params: LameParams,
    pub skew_factor: f64,
}

impl Compliance {
    pub fn new(params: LameParams) -> Self {
        Self { params, skew_factor: 1.0 / (2.0 * params.mu) }
    }

    pub fn with_skew_factor(params: LameParams, skew_factor: f64) -> Result<Self> {
        if !(skew_factor > 0.0 && skew_factor.is_finite()) {
            return Err(Error::InvalidParameter(format!("skew factor must be positive, got {skew_factor}")));
        }
        Ok(Self { params, skew_factor })
    }

    pub fn apply(&self, tau: &Mat2) -> Mat2 {
        let LameParams { mu, lambda } = self.params;
        let t = tau.0;
        let s = (t[0][1] + t[1][0]) / 2.0;
        let w = (t[0][1] - t[1][0]) / 2.0;
        let c = lambda / (2.0 * mu + 2.0 * lambda) * tau.trace();
        let k = 1.0 / (2.0 * mu);
        Mat2([
            [k * (t[0][0] - c), k * s + self.skew_factor * w],
            [k * s - self.skew_factor * w, k * (t[1][1] - c)],
        ])
    }

    /// Matrix of `apply` on row-major flattened 2×2 matrices.
    pub fn matrix4(&self) -> [[f64; 4]; 4] {
        let mut m = [[0.0; 4]; 4];
        for j in 0..4 {
            let mut e = Mat2::ZERO;
            e.0[j / 2][j % 2] = 1.0;
            let a = self.apply(&e);
            for i in 0..4 {
                m[i][j] = a.0[i / 2][i % 2];
            }
        }
        m
    }
}

/// Body force and Dirichlet displacement data.
pub trait LoadData {
    fn body_force(&self, x: Point2) -> Vec2;
    fn boundary_displacement(&self, x: Point2) -> Vec2;
}

/// Exact displacement/stress/rotation triple; `f = div σ`, `g = u`.
pub trait ExactSolution {
    fn u(&self, x: Point2) -> Vec2;
    fn grad_u(&self, x: Point2) -> Mat2;
    fn sigma(&self, x: Point2) -> Mat2;
    fn div_sigma(&self, x: Point2) -> Vec2;

    fn p(&self, x: Point2) -> f64 {
        let g = self.grad_u(x).0;
        (g[0][1] - g[1][0]) / 2.0
    }
}

impl<S: ExactSolution + ?Sized> LoadData for S {
    fn body_force(&self, x: Point2) -> Vec2 {
        self.div_sigma(x)
    }

    fn boundary_displacement(&self, x: Point2) -> Vec2 {
        self.u(x)
    }
}

/// `s` times another load.
pub struct ScaledLoad<'a> {
    pub inner: &'a dyn LoadData,
    pub scale: f64,
}

impl LoadData for ScaledLoad<'_> {
    fn body_force(&self, x: Point2) -> Vec2 {
        let f = self.inner.body_force(x);
        [self.scale * f[0], self.scale * f[1]]
    }

    fn boundary_displacement(&self, x: Point2) -> Vec2 {
        let g = self.inner.boundary_displacement(x);
        [self.scale * g[0], self.scale * g[1]]
    }
}

fn stress_from_gradient(params: LameParams, g: Mat2) -> Mat2 {
    let LameParams { mu, lambda } = params;
    let g = g.0;
    let div = g[0][0] + g[1][1];
    let off = mu * (g[0][1] + g[1][0]);
    Mat2([[2.0 * mu * g[0][0] + lambda * div, off], [off, 2.0 * mu * g[1][1] + lambda * div]])
}

/// `u₁ = cos πx sin 2πy`, `u₂ = sin πx cos πy`.
#[derive(Clone, Copy, Debug)]
pub struct TrigSolution {
    pub params: LameParams,
}

impl TrigSolution {
    pub fn new(params: LameParams) -> Self {
        Self { params }
    }
}

impl ExactSolution for TrigSolution {
    fn u(&self, x: Point2) -> Vec2 {
        let (px, py) = (PI * x.x, PI * x.y);
        [px.cos() * (2.0 * py).sin(), px.sin() * py.cos()]
    }

    fn grad_u(&self, x: Point2) -> Mat2 {
        let (px, py) = (PI * x.x, PI * x.y);
        let (sx, cx) = px.sin_cos();
        let (sy, cy) = py.sin_cos();
        let (s2y, c2y) = (2.0 * py).sin_cos();
        Mat2([[-PI * sx * s2y, 2.0 * PI * cx * c2y], [PI * cx * cy, -PI * sx * sy]])
    }

    fn sigma(&self, x: Point2) -> Mat2 {
        stress_from_gradient(self.params, self.grad_u(x))
    }

    fn div_sigma(&self, x: Point2) -> Vec2 {
        let LameParams { mu, lambda } = self.params;
        let (px, py) = (PI * x.x, PI * x.y);
        let (sx, cx) = px.sin_cos();
        let (sy, cy) = py.sin_cos();
        let (s2y, c2y) = (2.0 * py).sin_cos();
        let pi2 = PI * PI;
        let u1_xx = -pi2 * cx * s2y;
        let u1_xy = -2.0 * pi2 * sx * c2y;
        let u1_yy = -4.0 * pi2 * cx * s2y;
        let u2_xx = -pi2 * sx * cy;
        let u2_xy = -pi2 * cx * sy;
        let u2_yy = -pi2 * sx * cy;
        [
            2.0 * mu * u1_xx + lambda * (u1_xx + u2_xy) + mu * (u1_yy + u2_xy),
            mu * (u1_xy + u2_xx) + 2.0 * mu * u2_yy + lambda * (u1_xy + u2_yy),
        ]
    }
}

/// `u = c + G x` with constant gradient `G`: constant stress, zero load.
#[derive(Clone, Copy, Debug)]
pub struct LinearSolution {
    pub params: LameParams,
    pub offset: Vec2,
    pub gradient: Mat2,
}

impl LinearSolution {
    /// `u = (0.3x + 0.1y, 0.2x − 0.4y)`.
    pub fn patch_test(params: LameParams) -> Self {
        Self { params, offset: [0.0, 0.0], gradient: Mat2([[0.3, 0.1], [0.2, -0.4]]) }
    }
}

impl ExactSolution for LinearSolution {
    fn u(&self, x: Point2) -> Vec2 {
        let g = self.gradient.mul_vec([x.x, x.y]);
        [self.offset[0] + g[0], self.offset[1] + g[1]]
    }

    fn grad_u(&self, _x: Point2) -> Mat2 {
        self.gradient
    }

    fn sigma(&self, _x: Point2) -> Mat2 {
        stress_from_gradient(self.params, self.gradient)
    }

    fn div_sigma(&self, _x: Point2) -> Vec2 {
        [0.0, 0.0]
    }
}

/// Curl of `sin πx sin πy`: `u = π(sin πx cos πy, −cos πx sin πy)`.
/// Divergence free, so `σ = 2μ ε(u)` and `f = −2π²μ u` do not depend on `λ`.
#[derive(Clone, Copy, Debug)]
pub struct SolenoidalSolution {
    pub params: LameParams,
}

impl ExactSolution for SolenoidalSolution {
    fn u(&self, x: Point2) -> Vec2 {
        let (sx, cx, sy, cy) = ((PI * x.x).sin(), (PI * x.x).cos(), (PI * x.y).sin(), (PI * x.y).cos());
        [PI * sx * cy, -PI * cx * sy]
    }

    fn grad_u(&self, x: Point2) -> Mat2 {
        let (sx, cx, sy, cy) = ((PI * x.x).sin(), (PI * x.x).cos(), (PI * x.y).sin(), (PI * x.y).cos());
        let a = PI * PI * cx * cy;
        let b = PI * PI * sx * sy;
        Mat2([[a, -b], [b, -a]])
    }

    fn sigma(&self, x: Point2) -> Mat2 {
        stress_from_gradient(self.params, self.grad_u(x))
    }

    fn div_sigma(&self, x: Point2) -> Vec2 {
        let u = self.u(x);
        let c = -2.0 * PI * PI * self.params.mu;
        [c * u[0], c * u[1]]
    }
}

/// The manufactured solutions available to the experiment drivers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SolutionKind {
    #[default]
    Trig,
    Solenoidal,
}

impl SolutionKind {
    pub fn build(self, params: LameParams) -> Manufactured {
        match self {
            SolutionKind::Trig => Manufactured::Trig(TrigSolution::new(params)),
            SolutionKind::Solenoidal => Manufactured::Solenoidal(SolenoidalSolution { params }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SolutionKind::Trig => "trig",
            SolutionKind::Solenoidal => "solenoidal",
        }
    }
}

impl std::str::FromStr for SolutionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "trig" => Ok(SolutionKind::Trig),
            "solenoidal" => Ok(SolutionKind::Solenoidal),
            _ => Err(Error::InvalidParameter(format!("unknown solution {s:?} (expected trig or solenoidal)"))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Manufactured {
    Trig(TrigSolution),
    Solenoidal(SolenoidalSolution),
}

impl Manufactured {
    fn inner(&self) -> &dyn ExactSolution {
        match self {
            Manufactured::Trig(s) => s,
            Manufactured::Solenoidal(s) => s,
        }
    }
}

impl ExactSolution for Manufactured {
    fn u(&self, x: Point2) -> Vec2 {
        self.inner().u(x)
    }

    fn grad_u(&self, x: Point2) -> Mat2 {
        self.inner().grad_u(x)
    }

    fn sigma(&self, x: Point2) -> Mat2 {
        self.inner().sigma(x)
    }

    fn div_sigma(&self, x: Point2) -> Vec2 {
        self.inner().div_sigma(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat(rng: &mut ChaCha8Rng) -> Mat2 {
        Mat2([[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)], [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]])
    }

    fn close(a: &Mat2, b: &Mat2, tol: f64) -> bool {
        a.sub(b).norm_sq().sqrt() <= tol
    }

    #[test]
    fn compliance_examples() {
        let a = Compliance::new(LameParams::new(0.5, 0.0).unwrap());
        assert!(close(&a.apply(&Mat2::IDENTITY), &Mat2::IDENTITY, 1e-15));

        let p = LameParams::default();
        let a = Compliance::new(p);
        // independent evaluation of (1/2μ)(I − λ/(2μ+2λ)·2·I)
        let want = (1.0 - 246.0 / 404.6) / 158.6;
        let got = a.apply(&Mat2::IDENTITY);
        assert!((got.0[0][0] - want).abs() < 1e-16 && (got.0[1][1] - want).abs() < 1e-16);
        assert_eq!((got.0[0][1], got.0[1][0]), (0.0, 0.0));
        assert!((want - 0.0024716).abs() < 1e-7);

        let skew = Mat2::skew(1.0);
        assert!(close(&a.apply(&skew), &skew.scale(1.0 / (2.0 * p.mu)), 1e-16));
    }

    #[test]
    fn compliance_symmetric_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for params in [LameParams::default(), LameParams::from_young_poisson(1000.0, 0.4999).unwrap(), LameParams::new(1.0, 0.0).unwrap()] {
            let a = Compliance::new(params);
            for _ in 0..100 {
                let (t, e) = (random_mat(&mut rng), random_mat(&mut rng));
                let l = a.apply(&t).dot(&e);
                let r = t.dot(&a.apply(&e));
                assert!((l - r).abs() <= 1e-14 * (1.0 + l.abs()));
            }
            let m = a.matrix4();
            let fm = faer::Mat::<f64>::from_fn(4, 4, |i, j| m[i][j]);
            let ev = fm.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
            assert!(ev.iter().all(|&l| l > 0.0), "{ev:?}");
        }
    }

    #[test]
    fn young_poisson() {
        let p = LameParams::from_young_poisson(1000.0, 0.4999).unwrap();
        assert!((p.lambda - 1000.0 * 0.4999 / (1.4999 * 0.0002)).abs() < 1e-6 * p.lambda);
        assert!((p.lambda - 1.6664e6).abs() < 1e2);
        assert_eq!(LameParams::from_young_poisson(1000.0, 0.0).unwrap().lambda, 0.0);
        assert!(LameParams::from_young_poisson(1000.0, 0.5).is_err());
        assert!(LameParams::from_young_poisson(1000.0, -0.1).is_err());
        assert!(LameParams::new(0.0, 1.0).is_err());
        assert!(LameParams::new(1.0, -1.0).is_err());
    }

    #[test]
    fn trig_solution_values() {
        let s = TrigSolution::new(LameParams::default());
        assert!((s.p(Point2::new(0.0, 0.0)) - PI / 2.0).abs() < 1e-14);
        let g = s.grad_u(Point2::new(0.5, 0.5));
        assert!((g.trace() + PI).abs() < 1e-14);
    }

    #[test]
    fn constitutive_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for params in [LameParams::default(), LameParams::from_young_poisson(1000.0, 0.49).unwrap()] {
            let a = Compliance::new(params);
            let s = TrigSolution::new(params);
            for _ in 0..1000 {
                let x = Point2::new(rng.random(), rng.random());
                let sigma = s.sigma(x);
                assert_eq!(sigma.asym(), 0.0);
                let r = a.apply(&sigma).add(&Mat2::skew(s.p(x))).sub(&s.grad_u(x));
                assert!(r.norm_sq().sqrt() <= 1e-12, "{r:?}");
            }
        }
    }

    fn check_fd_body_force(s: &dyn ExactSolution) {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let points: Vec<Point2> = (0..100).map(|_| Point2::new(rng.random_range(0.05..0.95), rng.random_range(0.05..0.95))).collect();
        let fd_err = |h: f64| {
            points
                .iter()
                .map(|&x| {
                    let sx = s.sigma(Point2::new(x.x + h, x.y)).sub(&s.sigma(Point2::new(x.x - h, x.y))).scale(0.5 / h);
                    let sy = s.sigma(Point2::new(x.x, x.y + h)).sub(&s.sigma(Point2::new(x.x, x.y - h))).scale(0.5 / h);
                    let fd = [sx.0[0][0] + sy.0[0][1], sx.0[1][0] + sy.0[1][1]];
                    let f = s.div_sigma(x);
                    ((fd[0] - f[0]).powi(2) + (fd[1] - f[1]).powi(2)).sqrt()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (fd_err(1e-2), fd_err(5e-3));
        let rate = (e1 / e2).log2();
        assert!((rate - 2.0).abs() < 0.05, "rate {rate}");
        assert!(e2 < 1e-1 * s.div_sigma(points[0])[0].abs().max(1.0));
    }

    #[test]
    fn body_force_matches_finite_differences() {
        check_fd_body_force(&TrigSolution::new(LameParams::default()));
        check_fd_body_force(&SolenoidalSolution { params: LameParams::default() });
    }

    #[test]
    fn solenoidal_solution_ignores_lambda() {
        let a = SolenoidalSolution { params: LameParams::new(79.3, 0.0).unwrap() };
        let b = SolenoidalSolution { params: LameParams::new(79.3, 1e6).unwrap() };
        let x = Point2::new(0.27, 0.61);
        let g = a.grad_u(x).0;
        assert!((g[0][0] + g[1][1]).abs() < 1e-15);
        assert_eq!(a.sigma(x), b.sigma(x));
        assert_eq!(a.div_sigma(x), b.div_sigma(x));
    }

    #[test]
    fn linear_solution_is_consistent() {
        let params = LameParams::default();
        let s = LinearSolution::patch_test(params);
        let a = Compliance::new(params);
        let x = Point2::new(0.3, 0.8);
        let r = a.apply(&s.sigma(x)).add(&Mat2::skew(s.p(x))).sub(&s.grad_u(x));
        assert!(r.norm_sq().sqrt() < 1e-15);
        assert!((s.p(x) - (-0.05)).abs() < 1e-16);
    }
}
