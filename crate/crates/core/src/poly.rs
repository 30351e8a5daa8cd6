//! Bivariate polynomials in monomial form.

use crate::mapping::Vec2;
use crate::mesh::Point2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Term {
    pub px: u32,
    pub py: u32,
    pub coef: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly {
    terms: Vec<Term>,
}

impl Poly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(px: u32, py: u32) -> Self {
        Self { terms: vec![Term { px, py, coef: 1.0 }] }
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (u32, u32, f64)>) -> Self {
        let mut p = Self::zero();
        for (px, py, coef) in terms {
            p.add_term(px, py, coef);
        }
        p
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    fn add_term(&mut self, px: u32, py: u32, coef: f64) {
        if coef == 0.0 {
            return;
        }
        match self.terms.iter_mut().find(|t| t.px == px && t.py == py) {
            Some(t) => t.coef += coef,
            None => self.terms.push(Term { px, py, coef }),
        }
    }

    pub fn add_scaled(&mut self, other: &Poly, s: f64) {
        for t in &other.terms {
            self.add_term(t.px, t.py, s * t.coef);
        }
    }

    pub fn scaled(&self, s: f64) -> Poly {
        let mut p = Poly::zero();
        p.add_scaled(self, s);
        p
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut p = Poly::zero();
        for a in &self.terms {
            for b in &other.terms {
                p.add_term(a.px + b.px, a.py + b.py, a.coef * b.coef);
            }
        }
        p
    }

    /// Shifted Legendre polynomial of degree `k` in `x` (`in_y = false`) or `y`.
    pub fn legendre(k: usize, in_y: bool) -> Poly {
        // P̃_k(t) = Σ_i (−1)^{k+i} C(k,i) C(k+i,i) tⁱ
        let binom = |n: usize, r: usize| (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
        Poly::from_terms((0..=k).map(|i| {
            let c = if (k + i).is_multiple_of(2) { 1.0 } else { -1.0 } * binom(k, i) * binom(k + i, i);
            if in_y {
                (0, i as u32, c)
            } else {
                (i as u32, 0, c)
            }
        }))
    }

    /// `L_a(x) L_b(y)`.
    pub fn legendre_product(a: usize, b: usize) -> Poly {
        Poly::legendre(a, false).mul(&Poly::legendre(b, true))
    }

    pub fn eval(&self, p: Point2) -> f64 {
        self.terms.iter().map(|t| t.coef * p.x.powi(t.px as i32) * p.y.powi(t.py as i32)).sum()
    }

    pub fn dx(&self) -> Poly {
        Poly::from_terms(
            self.terms.iter().filter(|t| t.px > 0).map(|t| (t.px - 1, t.py, t.coef * t.px as f64)),
        )
    }

    pub fn dy(&self) -> Poly {
        Poly::from_terms(
            self.terms.iter().filter(|t| t.py > 0).map(|t| (t.px, t.py - 1, t.coef * t.py as f64)),
        )
    }

    pub fn grad(&self, p: Point2) -> Vec2 {
        [self.dx().eval(p), self.dy().eval(p)]
    }

    /// Terms with `|coef| > tol`.
    pub fn pruned(&self, tol: f64) -> Poly {
        Poly { terms: self.terms.iter().copied().filter(|t| t.coef.abs() > tol).collect() }
    }

    /// `(max degree in x, max degree in y)`; `None` for the zero polynomial.
    pub fn degrees(&self) -> Option<(u32, u32)> {
        let nz: Vec<_> = self.terms.iter().filter(|t| t.coef != 0.0).collect();
        if nz.is_empty() {
            return None;
        }
        Some((
            nz.iter().map(|t| t.px).max().unwrap(),
            nz.iter().map(|t| t.py).max().unwrap(),
        ))
    }

    pub fn total_degree(&self) -> Option<u32> {
        self.terms.iter().filter(|t| t.coef != 0.0).map(|t| t.px + t.py).max()
    }
}

/// Scalar (one component) or vector (two components) polynomial field.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyField {
    pub comps: Vec<Poly>,
}

impl PolyField {
    pub fn scalar(p: Poly) -> Self {
        Self { comps: vec![p] }
    }

    pub fn vector(p0: Poly, p1: Poly) -> Self {
        Self { comps: vec![p0, p1] }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    /// Value; the second slot is zero for scalar fields.
    pub fn eval(&self, p: Point2) -> Vec2 {
        match self.comps.as_slice() {
            [a] => [a.eval(p), 0.0],
            [a, b] => [a.eval(p), b.eval(p)],
            _ => unreachable!("fields have one or two components"),
        }
    }

    /// Divergence of a vector field.
    pub fn div(&self) -> Poly {
        assert_eq!(self.dim(), 2, "divergence of a scalar field");
        let mut d = self.comps[0].dx();
        d.add_scaled(&self.comps[1].dy(), 1.0);
        d
    }

    /// `curl q = (∂₂q, −∂₁q)`.
    pub fn curl(q: &Poly) -> Self {
        Self::vector(q.dy(), q.dx().scaled(-1.0))
    }

    pub fn combination(fields: &[PolyField], coefs: impl Iterator<Item = f64>) -> PolyField {
        let dim = fields[0].dim();
        let mut comps = vec![Poly::zero(); dim];
        for (f, c) in fields.iter().zip(coefs) {
            for (acc, fc) in comps.iter_mut().zip(&f.comps) {
                acc.add_scaled(fc, c);
            }
        }
        PolyField { comps }
    }
}

/// Shifted Legendre polynomial `P_k(2t − 1)` on `[0, 1]`.
pub fn shifted_legendre(k: usize, t: f64) -> f64 {
    let x = 2.0 * t - 1.0;
    let (mut p0, mut p1) = (1.0, x);
    if k == 0 {
        return 1.0;
    }
    for n in 2..=k {
        let p2 = ((2 * n - 1) as f64 * x * p1 - (n - 1) as f64 * p0) / n as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives() {
        let p = Poly::from_terms([(2, 1, 3.0), (0, 2, -1.0), (0, 0, 5.0)]);
        let q = Point2::new(0.3, -0.4);
        assert!((p.eval(q) - (3.0 * 0.09 * -0.4 - 0.16 + 5.0)).abs() < 1e-15);
        let g = p.grad(q);
        assert!((g[0] - 6.0 * 0.3 * -0.4).abs() < 1e-15);
        assert!((g[1] - (3.0 * 0.09 + 0.8)).abs() < 1e-15);
        assert_eq!(p.degrees(), Some((2, 2)));
        assert_eq!(p.total_degree(), Some(3));
    }

    #[test]
    fn div_of_curl_vanishes() {
        let q = Poly::from_terms([(2, 1, 1.0), (1, 2, -2.0), (3, 0, 0.5)]);
        assert_eq!(PolyField::curl(&q).div().pruned(0.0).degrees(), None);
    }

    #[test]
    fn shifted_legendre_orthogonal() {
        let (x, w) = crate::mapping::gauss_1d(6).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let g: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(&t, w)| w * shifted_legendre(i, t) * shifted_legendre(j, t))
                    .sum();
                let want = if i == j { 1.0 / (2 * i + 1) as f64 } else { 0.0 };
                assert!((g - want).abs() < 1e-14);
            }
        }
        assert!((shifted_legendre(1, 0.8) + shifted_legendre(1, 0.2)).abs() < 1e-15);
        for k in 0..6 {
            let p = Poly::legendre(k, true);
            for t in [0.0, 0.13, 0.5, 0.91, 1.0] {
                assert!((p.eval(Point2::new(0.7, t)) - shifted_legendre(k, t)).abs() < 1e-12);
            }
        }
    }
}
