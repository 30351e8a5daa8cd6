//! Checks shared by the property and acceptance targets.

use quadelas::mapping::{gauss_1d, gauss_rule};
use quadelas::mesh::QuadCorners;
use quadelas::poly::{Poly, PolyField};
use quadelas::{BilinearMap, Mat2, Point2, Vec2};
use rand::Rng;

pub const CORNERS: [Point2; 4] = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(1.0, 1.0), Point2::new(0.0, 1.0)];

/// Random convex quad: a scaled, shifted unit square with jittered corners.
pub fn random_map(rng: &mut impl Rng) -> BilinearMap {
    loop {
        let (sx, sy) = (rng.random_range(0.2..3.0), rng.random_range(0.2..3.0));
        let (ox, oy) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let c: QuadCorners = CORNERS.map(|p| {
            Point2::new(ox + sx * (p.x + rng.random_range(-0.3..0.3)), oy + sy * (p.y + rng.random_range(-0.3..0.3)))
        });
        if let Ok(m) = BilinearMap::new(c) {
            return m;
        }
    }
}

pub fn random_poly(rng: &mut impl Rng, deg: u32) -> Poly {
    let mut terms = Vec::new();
    for i in 0..=deg {
        for j in 0..=deg - i {
            terms.push((i, j, rng.random_range(-1.0..1.0)));
        }
    }
    Poly::from_terms(terms)
}

fn inverse_transpose(g: Mat2) -> Mat2 {
    let d = g.0[0][0] * g.0[1][1] - g.0[0][1] * g.0[1][0];
    Mat2([[g.0[1][1] / d, -g.0[1][0] / d], [-g.0[0][1] / d, g.0[0][0] / d]])
}

fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Worst relative defect over the transform identities for one element and
/// one random reference field pair:
///
/// - `∫_K div(P¹v̂) q dx = ∫_K̂ div̂ v̂ q̂ dx̂` via integration by parts on the physical element,
/// - `∫_e (P¹v̂)·n q ds = ∫_ê v̂·n̂ q̂ dŝ` edge by edge,
/// - `∫_K P²(ŵ) q dx = ∫_K̂ ŵ q̂ dx̂`,
/// - `∫_K P¹v̂ · ∇q dx = ∫_K̂ v̂ · ∇̂q̂ dx̂`,
/// - row-wise `P¹` of a matrix pulls back to itself.
pub fn transform_defect(map: &BilinearMap, rng: &mut impl Rng) -> f64 {
    let v = PolyField::vector(random_poly(rng, 3), random_poly(rng, 3));
    let q = random_poly(rng, 3);
    let w = random_poly(rng, 3);
    let rule = gauss_rule(8).unwrap();
    let (t, tw) = gauss_1d(8).unwrap();
    let mut worst = 0.0f64;
    let mut rel = |a: f64, b: f64, scale: f64| worst = worst.max((a - b).abs() / scale.max(1e-300));

    // physical side: quadrature over K̂ with weight J; ∇q = ∇F⁻ᵀ ∇̂q̂
    let (mut grad_phys, mut grad_ref, mut mass_phys, mut mass_ref, mut div_ref, mut scale) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0f64);
    for (xh, wt) in rule.iter() {
        let g = map.jacobian(xh);
        let j = g.det();
        let pv = map.push_p1(xh, v.eval(xh));
        let gq = inverse_transpose(g).mul_vec(q.grad(xh));
        grad_phys += wt * j * dot(pv, gq);
        grad_ref += wt * dot(v.eval(xh), q.grad(xh));
        mass_phys += wt * j * map.push_p2(xh, w.eval(xh)) * q.eval(xh);
        mass_ref += wt * w.eval(xh) * q.eval(xh);
        div_ref += wt * v.div().eval(xh) * q.eval(xh);
        scale += wt * (v.eval(xh)[0].abs() + v.eval(xh)[1].abs()) * (q.eval(xh).abs() + q.grad(xh)[0].abs() + q.grad(xh)[1].abs());
    }
    rel(grad_phys, grad_ref, scale);
    rel(mass_phys, mass_ref, scale.max(mass_ref.abs()));

    // physical edges are straight: x(t) = c_i + t (c_{i+1} − c_i), n ds = (Δy, −Δx) dt
    let c = map.corners();
    let mut boundary = 0.0;
    for e in 0..4 {
        let (a, b) = (c[e], c[(e + 1) % 4]);
        let (ah, bh) = (CORNERS[e], CORNERS[(e + 1) % 4]);
        let nds = [b.y - a.y, -(b.x - a.x)];
        let nh = [bh.y - ah.y, -(bh.x - ah.x)];
        let (mut phys, mut refr, mut s) = (0.0, 0.0, 0.0);
        for (&ti, &wi) in t.iter().zip(&tw) {
            let xh = Point2::new(ah.x + ti * (bh.x - ah.x), ah.y + ti * (bh.y - ah.y));
            phys += wi * dot(map.push_p1(xh, v.eval(xh)), nds) * q.eval(xh);
            refr += wi * dot(v.eval(xh), nh) * q.eval(xh);
            s += wi * (v.eval(xh)[0].abs() + v.eval(xh)[1].abs()) * q.eval(xh).abs();
        }
        rel(phys, refr, s);
        boundary += phys;
    }
    rel(boundary - grad_phys, div_ref, scale);

    let m = Mat2([[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)], [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]]);
    let xh = Point2::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
    let back = map.pull_p1_matrix(xh, map.push_p1_matrix(xh, m));
    rel(back.sub(&m).norm_sq().sqrt(), 0.0, m.norm_sq().sqrt());
    worst
}
