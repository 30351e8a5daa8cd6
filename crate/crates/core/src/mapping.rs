//! Bilinear reference-to-physical maps, Gauss quadrature on the unit square,
//! and the three transforms between reference and physical fields:
//!
//! * `P0` composes with the inverse map,
//! * `P1` is the contravariant Piola transform `(1/J) ∇F v̂`, applied per row
//!   to matrix fields,
//! * `P2` divides by the Jacobian determinant.
//!
//! Physical quantities are always evaluated at `F(x̂)` for a reference point
//! `x̂`, so the map is never inverted.

use crate::error::{Error, Result};
use crate::mesh::{Point2, QuadCorners};

pub type Vec2 = [f64; 2];

/// Row-major 2×2 matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);
    pub const ZERO: Mat2 = Mat2([[0.0, 0.0], [0.0, 0.0]]);

    pub fn from_rows(r0: Vec2, r1: Vec2) -> Self {
        Mat2([r0, r1])
    }

    pub fn row(&self, i: usize) -> Vec2 {
        self.0[i]
    }

    pub fn det(&self) -> f64 {
        let [[a, b], [c, d]] = self.0;
        a * d - b * c
    }

    /// Adjugate (transposed cofactor matrix): `A · adj(A) = det(A) I`.
    pub fn adjugate(&self) -> Mat2 {
        let [[a, b], [c, d]] = self.0;
        Mat2([[d, -b], [-c, a]])
    }

    pub fn transpose(&self) -> Mat2 {
        let [[a, b], [c, d]] = self.0;
        Mat2([[a, c], [b, d]])
    }

    pub fn mul_vec(&self, v: Vec2) -> Vec2 {
        let [[a, b], [c, d]] = self.0;
        [a * v[0] + b * v[1], c * v[0] + d * v[1]]
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2(std::array::from_fn(|i| {
            std::array::from_fn(|j| self.0[i][0] * o.0[0][j] + self.0[i][1] * o.0[1][j])
        }))
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2(self.0.map(|r| r.map(|x| x * s)))
    }

    pub fn add(&self, o: &Mat2) -> Mat2 {
        Mat2(std::array::from_fn(|i| std::array::from_fn(|j| self.0[i][j] + o.0[i][j])))
    }

    pub fn sub(&self, o: &Mat2) -> Mat2 {
        self.add(&o.scale(-1.0))
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    /// Frobenius inner product.
    pub fn dot(&self, o: &Mat2) -> f64 {
        self.0[0][0] * o.0[0][0]
            + self.0[0][1] * o.0[0][1]
            + self.0[1][0] * o.0[1][0]
            + self.0[1][1] * o.0[1][1]
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    /// Asymmetry `τ12 − τ21`.
    pub fn asym(&self) -> f64 {
        self.0[0][1] - self.0[1][0]
    }

    /// The skew matrix `[[0, p], [-p, 0]]`.
    pub fn skew(p: f64) -> Mat2 {
        Mat2([[0.0, p], [-p, 0.0]])
    }
}

pub fn dot2(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Bilinear map of the unit square onto a convex quad; the corners are the
/// images of (0,0), (1,0), (1,1), (0,1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BilinearMap {
    corners: QuadCorners,
}

impl BilinearMap {
    /// Accepts corners whose corner Jacobians are all positive.
    pub fn new(corners: QuadCorners) -> Result<Self> {
        if crate::mesh::corner_jacobians(&corners).iter().all(|&j| j > 0.0) {
            Ok(Self { corners })
        } else {
            Err(Error::InvalidMesh(format!("corners {corners:?} do not form a convex counterclockwise quad")))
        }
    }

    /// For corners already validated by [`crate::mesh::QuadMesh`].
    pub(crate) fn from_valid(corners: QuadCorners) -> Self {
        Self { corners }
    }

    pub fn corners(&self) -> &QuadCorners {
        &self.corners
    }

    pub fn eval(&self, xh: Point2) -> Point2 {
        let [a, b, c, d] = self.corners;
        let (s, t) = (xh.x, xh.y);
        let w = [(1.0 - s) * (1.0 - t), s * (1.0 - t), s * t, (1.0 - s) * t];
        Point2::new(
            w[0] * a.x + w[1] * b.x + w[2] * c.x + w[3] * d.x,
            w[0] * a.y + w[1] * b.y + w[2] * c.y + w[3] * d.y,
        )
    }

    /// `∇F(x̂)` with entries `∂F_i/∂x̂_j`.
    pub fn jacobian(&self, xh: Point2) -> Mat2 {
        let [a, b, c, d] = self.corners;
        let (s, t) = (xh.x, xh.y);
        // ∂F/∂s = (1−t)(b−a) + t(c−d),  ∂F/∂t = (1−s)(d−a) + s(c−b)
        let ds = Point2::new(
            (1.0 - t) * (b.x - a.x) + t * (c.x - d.x),
            (1.0 - t) * (b.y - a.y) + t * (c.y - d.y),
        );
        let dt = Point2::new(
            (1.0 - s) * (d.x - a.x) + s * (c.x - b.x),
            (1.0 - s) * (d.y - a.y) + s * (c.y - b.y),
        );
        Mat2([[ds.x, dt.x], [ds.y, dt.y]])
    }

    /// `(∇F, J)` at a reference point.
    pub fn jacobian_det(&self, xh: Point2) -> (Mat2, f64) {
        let g = self.jacobian(xh);
        (g, g.det())
    }

    /// True when the Jacobian is constant (the quad is a parallelogram).
    pub fn is_affine(&self) -> bool {
        let [a, b, c, d] = self.corners;
        let res = (a.x - b.x + c.x - d.x).abs() + (a.y - b.y + c.y - d.y).abs();
        res <= 1e-14 * (1.0 + self.corners.iter().map(|p| p.x.abs() + p.y.abs()).fold(0.0, f64::max))
    }

    /// Physical gradient of `q̂ ∘ F⁻¹` from the reference gradient.
    pub fn physical_gradient(&self, xh: Point2, grad_hat: Vec2) -> Vec2 {
        let (g, j) = self.jacobian_det(xh);
        // ∇F^{-T} = adj(∇F)^T / J
        let v = g.adjugate().transpose().mul_vec(grad_hat);
        [v[0] / j, v[1] / j]
    }

    /// `P0`: composition; the value is unchanged.
    pub fn push_p0<T>(&self, _xh: Point2, value: T) -> T {
        value
    }

    /// `P1` (Piola) of a reference vector value at `x̂`.
    pub fn push_p1(&self, xh: Point2, v: Vec2) -> Vec2 {
        let (g, j) = self.jacobian_det(xh);
        let w = g.mul_vec(v);
        [w[0] / j, w[1] / j]
    }

    /// Row-wise `P1` of a reference matrix value.
    pub fn push_p1_matrix(&self, xh: Point2, m: Mat2) -> Mat2 {
        Mat2::from_rows(self.push_p1(xh, m.row(0)), self.push_p1(xh, m.row(1)))
    }

    /// Inverse of row-wise `P1`: `row ↦ J ∇F⁻¹ row = adj(∇F) row`.
    pub fn pull_p1_matrix(&self, xh: Point2, m: Mat2) -> Mat2 {
        let adj = self.jacobian(xh).adjugate();
        Mat2::from_rows(adj.mul_vec(m.row(0)), adj.mul_vec(m.row(1)))
    }

    /// `P2`: divide by the Jacobian determinant.
    pub fn push_p2(&self, xh: Point2, q: f64) -> f64 {
        q / self.jacobian(xh).det()
    }

    pub fn area(&self) -> f64 {
        let r = gauss_rule(2).expect("k = 2 is valid");
        r.iter().map(|(p, w)| w * self.jacobian(p).det()).sum()
    }
}

/// Wraps a reference vector field as its `P1` pushforward, parametrised by
/// the reference point.
pub fn pushforward_p1<'a>(
    map: &'a BilinearMap,
    field: impl Fn(Point2) -> Vec2 + 'a,
) -> impl Fn(Point2) -> Vec2 + 'a {
    move |xh| map.push_p1(xh, field(xh))
}

pub fn pushforward_p2<'a>(
    map: &'a BilinearMap,
    field: impl Fn(Point2) -> f64 + 'a,
) -> impl Fn(Point2) -> f64 + 'a {
    move |xh| map.push_p2(xh, field(xh))
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<Point2>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Point2, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn integrate(&self, f: impl Fn(Point2) -> f64) -> f64 {
        self.iter().map(|(p, w)| w * f(p)).sum()
    }
}

/// `k`-point Gauss–Legendre nodes and weights on `[0, 1]`, exact through
/// degree `2k − 1`.
pub fn gauss_1d(k: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if k == 0 {
        return Err(Error::InvalidParameter("quadrature order must be >= 1".into()));
    }
    let mut nodes = vec![0.0; k];
    let mut weights = vec![0.0; k];
    for i in 0..k.div_ceil(2) {
        // Newton on P_k from the Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(k, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(k, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[k - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[k - 1 - i] = 0.5 * w;
    }
    Ok((nodes, weights))
}

fn legendre_with_derivative(k: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for n in 2..=k {
        let p2 = ((2 * n - 1) as f64 * x * p1 - (n - 1) as f64 * p0) / n as f64;
        p0 = p1;
        p1 = p2;
    }
    if k == 0 {
        return (1.0, 0.0);
    }
    let d = k as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `k × k` tensor Gauss rule on the unit square; weights sum to 1.
pub fn gauss_rule(k: usize) -> Result<QuadratureRule> {
    let (x, w) = gauss_1d(k)?;
    let mut points = Vec::with_capacity(k * k);
    let mut weights = Vec::with_capacity(k * k);
    for j in 0..k {
        for i in 0..k {
            points.push(Point2::new(x[i], x[j]));
            weights.push(w[i] * w[j]);
        }
    }
    Ok(QuadratureRule { points, weights })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> BilinearMap {
        BilinearMap::new([
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ])
        .unwrap()
    }

    fn trapezoid() -> BilinearMap {
        BilinearMap::new([
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.5),
            Point2::new(0.0, 0.5),
        ])
        .unwrap()
    }

    #[test]
    fn identity_map() {
        let f = unit();
        for p in [Point2::new(0.3, 0.7), Point2::new(1.0, 0.0)] {
            assert_eq!(f.eval(p), p);
            let (g, j) = f.jacobian_det(p);
            assert_eq!(g, Mat2::IDENTITY);
            assert_eq!(j, 1.0);
            assert_eq!(f.push_p1(p, [2.0, -1.0]), [2.0, -1.0]);
            assert_eq!(f.push_p2(p, 3.0), 3.0);
        }
        assert!(f.is_affine());
    }

    #[test]
    fn parallelogram_jacobian_constant() {
        let f = BilinearMap::new([
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(3.0, 1.0),
            Point2::new(1.0, 1.0),
        ])
        .unwrap();
        for p in [Point2::new(0.0, 0.0), Point2::new(0.2, 0.9), Point2::new(1.0, 1.0)] {
            let (g, j) = f.jacobian_det(p);
            assert_eq!(g, Mat2([[2.0, 1.0], [0.0, 1.0]]));
            assert_eq!(j, 2.0);
        }
        assert!(f.is_affine());
    }

    #[test]
    fn trapezoid_jacobian_is_affine_in_s() {
        let f = trapezoid();
        for p in [Point2::new(0.0, 0.2), Point2::new(0.4, 0.9), Point2::new(1.0, 1.0)] {
            assert!((f.jacobian(p).det() - (0.5 + p.x)).abs() < 1e-15);
        }
        assert!((f.jacobian(Point2::new(0.5, 0.5)).det() - 1.0).abs() < 1e-15);
        assert!(!f.is_affine());
        assert!((f.area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scaled_map_transforms() {
        let f = BilinearMap::new([
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(2.0, 2.0),
            Point2::new(0.0, 2.0),
        ])
        .unwrap();
        let p = Point2::new(0.25, 0.6);
        assert_eq!(f.push_p1(p, [1.0, 3.0]), [0.5, 1.5]);
        assert_eq!(f.push_p2(p, 2.0), 0.5);
        assert_eq!(f.push_p0(p, 2.0), 2.0);
    }

    #[test]
    fn gauss_exactness() {
        let r1 = gauss_rule(1).unwrap();
        assert_eq!(r1.points, vec![Point2::new(0.5, 0.5)]);
        assert_eq!(r1.weights, vec![1.0]);
        let r2 = gauss_rule(2).unwrap();
        assert!((r2.integrate(|p| p.x * p.x) - 1.0 / 3.0).abs() < 1e-15);
        let r3 = gauss_rule(3).unwrap();
        assert!((r3.integrate(|p| p.x.powi(4) * p.y.powi(4)) - 1.0 / 25.0).abs() < 1e-15);
        assert!(gauss_rule(0).is_err());
    }

    #[test]
    fn gauss_1d_is_exact_to_degree_2k_minus_1() {
        for k in 1..=12 {
            let (x, w) = gauss_1d(k).unwrap();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for deg in 0..2 * k {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert!((q - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "k={k} deg={deg}");
            }
        }
    }

    #[test]
    fn pull_inverts_push() {
        let f = trapezoid();
        let p = Point2::new(0.3, 0.8);
        let m = Mat2([[1.0, -2.0], [0.5, 3.0]]);
        let back = f.pull_p1_matrix(p, f.push_p1_matrix(p, m));
        for i in 0..2 {
            for j in 0..2 {
                assert!((back.0[i][j] - m.0[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn adjugate_identity() {
        let a = Mat2([[1.5, -0.3], [0.7, 2.0]]);
        let p = a.mul(&a.adjugate());
        assert!((p.0[0][0] - a.det()).abs() < 1e-15 && p.0[0][1].abs() < 1e-15);
        assert!(Mat2::skew(2.0).asym() == 4.0);
    }
}
