//! Global finite element spaces on a [`QuadMesh`].
//!
//! * stress: two rows, each an H(div)-conforming Piola-mapped space,
//! * displacement: two components of a `P0`-mapped discontinuous space,
//! * rotation: discontinuous polynomials in physical coordinates.
//!
//! Global numbering is component-major: dof `g` of component `c` is
//! `c * n_per_component + g`. For Piola spaces the edge moments of global
//! edge `e` come first (`e * m + k`), then per-element interior moments.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mapping::{BilinearMap, Mat2, QuadratureRule, Vec2};
use crate::mesh::{Point2, QuadMesh};
use crate::reference_elements::{
    bdm1_element, p_element, q_element, rt_element, DofQuadrature, ReferenceElement, Tabulation,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MappingKind {
    /// `P0`, composition with the inverse map.
    Compose,
    /// `P1`, contravariant Piola (row-wise for matrices).
    Piola,
    /// Polynomials in physical coordinates.
    Unmapped,
}

/// Element family for the stress; the displacement and rotation degrees
/// follow from it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StressFamily {
    Rt(usize),
    Bdm1,
}

impl StressFamily {
    /// Convergence order `r`: displacement uses `Q_{r−1}`, rotation `P_{r−1}`.
    pub fn order(self) -> usize {
        match self {
            StressFamily::Rt(r) => r,
            StressFamily::Bdm1 => 1,
        }
    }

    pub fn reference_element(self) -> Result<ReferenceElement> {
        match self {
            StressFamily::Rt(r) if r >= 2 => rt_element(r),
            StressFamily::Rt(r) => Err(Error::InvalidParameter(format!(
                "RT_{r} rows do not contain linear fields; the elasticity family needs r >= 2"
            ))),
            StressFamily::Bdm1 => Ok(bdm1_element()),
        }
    }

    pub fn name(self) -> String {
        match self {
            StressFamily::Rt(r) => format!("rt{r}"),
            StressFamily::Bdm1 => "bdm1".into(),
        }
    }
}

impl std::str::FromStr for StressFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        if lower == "bdm1" {
            return Ok(StressFamily::Bdm1);
        }
        match lower.strip_prefix("rt").map(str::parse::<usize>) {
            Some(Ok(r)) if r >= 2 => Ok(StressFamily::Rt(r)),
            _ => Err(Error::InvalidParameter(format!("unknown element family `{s}` (expected rt<r> with r >= 2, or bdm1)"))),
        }
    }
}

/// Local basis per scalar dof at one point: physical values and, for Piola
/// spaces, physical divergences.
#[derive(Clone, Debug, Default)]
pub struct PointBasis {
    pub values: Vec<Vec2>,
    pub divs: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct FESpace {
    mesh: Arc<QuadMesh>,
    element: ReferenceElement,
    mapping: MappingKind,
    components: usize,
    maps: Vec<BilinearMap>,
    dof_map: Vec<Vec<(usize, f64)>>,
    n_per_component: usize,
    /// `(degree, per-element (centroid, diameter))` for unmapped spaces
    frames: Option<(usize, Vec<(Point2, f64)>)>,
}

/// Sign relating an element's local edge moment of degree `k` (outward
/// normal, counterclockwise parameter) to the global one (normal to the
/// right of lo → hi, lo → hi parameter).
pub fn edge_moment_sign(traversal: i8, k: usize) -> f64 {
    if traversal > 0 {
        1.0
    } else if k.is_multiple_of(2) {
        -1.0
    } else {
        1.0
    }
}

fn element_maps(mesh: &QuadMesh) -> Vec<BilinearMap> {
    (0..mesh.n_quads()).map(|k| BilinearMap::from_valid(mesh.corners(k))).collect()
}

fn discontinuous_dof_map(n_quads: usize, n_loc: usize) -> Vec<Vec<(usize, f64)>> {
    (0..n_quads).map(|k| (0..n_loc).map(|j| (k * n_loc + j, 1.0)).collect()).collect()
}

/// Two-row H(div) stress space built from `family`.
pub fn build_stress_space(mesh: Arc<QuadMesh>, family: StressFamily) -> Result<FESpace> {
    let element = family.reference_element()?;
    let m = element.edge_moments();
    let n_int = element.n_interior();
    let n_edge_dofs = mesh.n_edges() * m;
    let dof_map = (0..mesh.n_quads())
        .map(|k| {
            let mut local = Vec::with_capacity(element.dim());
            for (e, qe) in mesh.quad_edges(k).iter().enumerate() {
                for deg in 0..m {
                    debug_assert_eq!(local.len(), element.edge_dof(e, deg));
                    local.push((qe.edge * m + deg, edge_moment_sign(qe.sign, deg)));
                }
            }
            local.extend((0..n_int).map(|i| (n_edge_dofs + k * n_int + i, 1.0)));
            local
        })
        .collect();
    Ok(FESpace {
        maps: element_maps(&mesh),
        n_per_component: n_edge_dofs + mesh.n_quads() * n_int,
        mesh,
        element,
        mapping: MappingKind::Piola,
        components: 2,
        dof_map,
        frames: None,
    })
}

/// Two-component `Q_{r−1}` displacement space, mapped by composition.
pub fn build_displacement_space(mesh: Arc<QuadMesh>, r: usize) -> Result<FESpace> {
    if r == 0 {
        return Err(Error::InvalidParameter("displacement order r must be >= 1".into()));
    }
    let element = q_element(r - 1);
    let n_loc = element.dim();
    Ok(FESpace {
        maps: element_maps(&mesh),
        dof_map: discontinuous_dof_map(mesh.n_quads(), n_loc),
        n_per_component: mesh.n_quads() * n_loc,
        mesh,
        element,
        mapping: MappingKind::Compose,
        components: 2,
        frames: None,
    })
}

/// Scalar `P_{r−1}` rotation space in scaled physical coordinates
/// `((x − x_K)/h_K)^a ((y − y_K)/h_K)^b`, `x_K` the vertex centroid.
pub fn build_rotation_space(mesh: Arc<QuadMesh>, r: usize) -> Result<FESpace> {
    if r == 0 {
        return Err(Error::InvalidParameter("rotation order r must be >= 1".into()));
    }
    let degree = r - 1;
    let element = p_element(degree);
    let n_loc = element.dim();
    let frames = (0..mesh.n_quads())
        .map(|k| {
            let c = mesh.corners(k);
            let centroid = Point2::new(c.iter().map(|p| p.x).sum::<f64>() / 4.0, c.iter().map(|p| p.y).sum::<f64>() / 4.0);
            let mut diam: f64 = 0.0;
            for i in 0..4 {
                for j in i + 1..4 {
                    diam = diam.max(c[i].dist(c[j]));
                }
            }
            (centroid, diam)
        })
        .collect();
    Ok(FESpace {
        maps: element_maps(&mesh),
        dof_map: discontinuous_dof_map(mesh.n_quads(), n_loc),
        n_per_component: mesh.n_quads() * n_loc,
        mesh,
        element,
        mapping: MappingKind::Unmapped,
        components: 1,
        frames: Some((degree, frames)),
    })
}

/// The stress/displacement/rotation triple of one family on one mesh.
#[derive(Clone, Debug)]
pub struct MixedSpaces {
    pub family: StressFamily,
    pub stress: FESpace,
    pub displacement: FESpace,
    pub rotation: FESpace,
}

impl MixedSpaces {
    pub fn new(mesh: Arc<QuadMesh>, family: StressFamily) -> Result<Self> {
        let r = family.order();
        Ok(Self {
            family,
            stress: build_stress_space(mesh.clone(), family)?,
            displacement: build_displacement_space(mesh.clone(), r)?,
            rotation: build_rotation_space(mesh, r)?,
        })
    }

    pub fn mesh(&self) -> &Arc<QuadMesh> {
        self.stress.mesh()
    }

    pub fn total_dofs(&self) -> usize {
        self.stress.n_dofs() + self.displacement.n_dofs() + self.rotation.n_dofs()
    }
}

impl FESpace {
    pub fn mesh(&self) -> &Arc<QuadMesh> {
        &self.mesh
    }

    pub fn element(&self) -> &ReferenceElement {
        &self.element
    }

    pub fn mapping(&self) -> MappingKind {
        self.mapping
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn n_per_component(&self) -> usize {
        self.n_per_component
    }

    pub fn n_dofs(&self) -> usize {
        self.components * self.n_per_component
    }

    pub fn n_elements(&self) -> usize {
        self.maps.len()
    }

    /// Scalar local basis size per component.
    pub fn n_local(&self) -> usize {
        self.element.dim()
    }

    pub fn map(&self, k: usize) -> &BilinearMap {
        &self.maps[k]
    }

    /// `(global index within a component, sign)` per local scalar dof.
    pub fn element_dofs(&self, k: usize) -> &[(usize, f64)] {
        &self.dof_map[k]
    }

    pub fn global_index(&self, component: usize, g: usize) -> usize {
        component * self.n_per_component + g
    }

    /// Flips the sign of one local dof. Breaks conformity; used to check that
    /// the diagnostics notice.
    pub fn flip_dof_sign(&mut self, k: usize, local: usize) {
        self.dof_map[k][local].1 *= -1.0;
    }

    /// Reference tabulation at a rule (not used by unmapped spaces).
    pub fn tabulate(&self, rule: &QuadratureRule) -> Tabulation {
        self.element.tabulate(rule)
    }

    /// Local basis at reference point `xh` of element `k`. `tab` optionally
    /// supplies the reference values/divergences at `xh`.
    pub fn point_basis(&self, k: usize, xh: Point2, tab: Option<(&[Vec2], &[f64])>) -> PointBasis {
        let owned;
        let (vals, divs): (&[Vec2], &[f64]) = match tab {
            Some(t) => t,
            None if self.mapping != MappingKind::Unmapped => {
                owned = (self.element.eval_basis(xh), self.element.eval_basis_div(xh));
                (&owned.0, &owned.1)
            }
            None => (&[], &[]),
        };
        match self.mapping {
            MappingKind::Compose => PointBasis { values: vals.to_vec(), divs: Vec::new() },
            MappingKind::Piola => {
                let (g, j) = self.maps[k].jacobian_det(xh);
                PointBasis {
                    values: vals
                        .iter()
                        .map(|&v| {
                            let w = g.mul_vec(v);
                            [w[0] / j, w[1] / j]
                        })
                        .collect(),
                    divs: divs.iter().map(|d| d / j).collect(),
                }
            }
            MappingKind::Unmapped => {
                let x = self.maps[k].eval(xh);
                PointBasis { values: self.unmapped_values(k, x).into_iter().map(|v| [v, 0.0]).collect(), divs: Vec::new() }
            }
        }
    }

    /// Scaled physical monomials of an unmapped element at physical `x`.
    fn unmapped_values(&self, k: usize, x: Point2) -> Vec<f64> {
        let (degree, frames) = self.frames.as_ref().expect("unmapped space has frames");
        let (c, h) = frames[k];
        let (sx, sy) = ((x.x - c.x) / h, (x.y - c.y) / h);
        let mut out = Vec::with_capacity(self.n_local());
        for d in 0..=*degree {
            for b in 0..=d {
                out.push(sx.powi((d - b) as i32) * sy.powi(b as i32));
            }
        }
        out
    }

    /// Local coefficients (sign applied), component-major.
    pub fn local_coefficients(&self, k: usize, coefficients: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.components * self.n_local());
        for c in 0..self.components {
            for &(g, s) in &self.dof_map[k] {
                out.push(s * coefficients[self.global_index(c, g)]);
            }
        }
        out
    }

    /// Canonical interpolant into a Piola space: DOFs of the row-wise pullback
    /// `adj(∇F) σ` on each element. Shared edge DOFs take the value from the
    /// last element visited, which is exact when the normal trace of `σ` is
    /// single-valued.
    pub fn interpolate(&self, field: &dyn MatrixField, q: &DofQuadrature) -> Result<FEFunction<'_>> {
        if self.mapping != MappingKind::Piola {
            return Err(Error::Incompatible("matrix interpolation needs a Piola space".into()));
        }
        let mut coefficients = vec![0.0; self.n_dofs()];
        for k in 0..self.n_elements() {
            let local = self.local_interpolant(k, field, q);
            for (c, row) in local.iter().enumerate() {
                for (&(g, s), v) in self.dof_map[k].iter().zip(row) {
                    coefficients[self.global_index(c, g)] = s * v;
                }
            }
        }
        Ok(FEFunction::new(self, coefficients))
    }

    pub fn interpolate_matrix(&self, field: &dyn Fn(Point2) -> Mat2, q: &DofQuadrature) -> Result<FEFunction<'_>> {
        self.interpolate(&PhysicalField::values_only(field), q)
    }

    /// Unsigned local DOF values per row of the pulled-back field on element `k`.
    pub fn local_interpolant(&self, k: usize, field: &dyn MatrixField, q: &DofQuadrature) -> [Vec<f64>; 2] {
        let map = &self.maps[k];
        let pulled = |xh: Point2| map.pull_p1_matrix(xh, field.value(k, map, xh));
        [
            self.element.interpolate(&|xh| pulled(xh).row(0), q),
            self.element.interpolate(&|xh| pulled(xh).row(1), q),
        ]
    }
}

/// A matrix field evaluated per element at reference points.
pub trait MatrixField {
    fn value(&self, k: usize, map: &BilinearMap, xh: Point2) -> Mat2;
    /// Row-wise divergence.
    fn div(&self, k: usize, map: &BilinearMap, xh: Point2) -> Vec2;
}

/// A field given by closures in physical coordinates.
pub struct PhysicalField<'a> {
    pub value: &'a dyn Fn(Point2) -> Mat2,
    pub div: Option<&'a dyn Fn(Point2) -> Vec2>,
}

impl<'a> PhysicalField<'a> {
    pub fn new(value: &'a dyn Fn(Point2) -> Mat2, div: &'a dyn Fn(Point2) -> Vec2) -> Self {
        Self { value, div: Some(div) }
    }

    pub fn values_only(value: &'a dyn Fn(Point2) -> Mat2) -> Self {
        Self { value, div: None }
    }
}

impl MatrixField for PhysicalField<'_> {
    fn value(&self, _k: usize, map: &BilinearMap, xh: Point2) -> Mat2 {
        (self.value)(map.eval(xh))
    }

    fn div(&self, _k: usize, map: &BilinearMap, xh: Point2) -> Vec2 {
        (self.div.expect("field has no divergence"))(map.eval(xh))
    }
}

impl MatrixField for FEFunction<'_> {
    fn value(&self, k: usize, _map: &BilinearMap, xh: Point2) -> Mat2 {
        self.eval_matrix(k, xh).expect("stress function")
    }

    fn div(&self, k: usize, _map: &BilinearMap, xh: Point2) -> Vec2 {
        self.eval_div(k, xh).expect("stress function")
    }
}

/// Coefficient vector over a space.
#[derive(Clone, Debug)]
pub struct FEFunction<'a> {
    space: &'a FESpace,
    coefficients: Vec<f64>,
}

impl<'a> FEFunction<'a> {
    pub fn new(space: &'a FESpace, coefficients: Vec<f64>) -> Self {
        assert_eq!(coefficients.len(), space.n_dofs(), "coefficient vector does not match the space");
        Self { space, coefficients }
    }

    pub fn zero(space: &'a FESpace) -> Self {
        Self::new(space, vec![0.0; space.n_dofs()])
    }

    pub fn space(&self) -> &'a FESpace {
        self.space
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    fn check_element(&self, k: usize) -> Result<()> {
        if k >= self.space.n_elements() {
            return Err(Error::InvalidParameter(format!(
                "element {k} out of range (mesh has {})",
                self.space.n_elements()
            )));
        }
        Ok(())
    }

    /// Per component, the combination of local basis values at `xh`.
    fn combine(&self, k: usize, basis: &PointBasis) -> Vec<(Vec2, f64)> {
        let local = self.space.local_coefficients(k, &self.coefficients);
        let n = self.space.n_local();
        (0..self.space.components)
            .map(|c| {
                let coefs = &local[c * n..(c + 1) * n];
                let mut v = [0.0, 0.0];
                let mut d = 0.0;
                for (j, a) in coefs.iter().enumerate() {
                    v[0] += a * basis.values[j][0];
                    v[1] += a * basis.values[j][1];
                    if let Some(dj) = basis.divs.get(j) {
                        d += a * dj;
                    }
                }
                (v, d)
            })
            .collect()
    }

    /// Stress value (rows are Piola-mapped) at reference point `xh` of element `k`.
    pub fn eval_matrix(&self, k: usize, xh: Point2) -> Result<Mat2> {
        self.check_element(k)?;
        if self.space.mapping != MappingKind::Piola {
            return Err(Error::Incompatible("matrix evaluation needs a Piola space".into()));
        }
        let r = self.combine(k, &self.space.point_basis(k, xh, None));
        Ok(Mat2::from_rows(r[0].0, r[1].0))
    }

    /// Row-wise divergence of a stress function.
    pub fn eval_div(&self, k: usize, xh: Point2) -> Result<Vec2> {
        self.check_element(k)?;
        if self.space.mapping != MappingKind::Piola {
            return Err(Error::Incompatible("divergence needs a Piola space".into()));
        }
        let r = self.combine(k, &self.space.point_basis(k, xh, None));
        Ok([r[0].1, r[1].1])
    }

    /// Vector value of a two-component scalar space.
    pub fn eval_vector(&self, k: usize, xh: Point2) -> Result<Vec2> {
        self.check_element(k)?;
        if self.space.mapping == MappingKind::Piola || self.space.components != 2 {
            return Err(Error::Incompatible("vector evaluation needs a two-component scalar space".into()));
        }
        let r = self.combine(k, &self.space.point_basis(k, xh, None));
        Ok([r[0].0[0], r[1].0[0]])
    }

    pub fn eval_scalar(&self, k: usize, xh: Point2) -> Result<f64> {
        self.check_element(k)?;
        if self.space.components != 1 {
            return Err(Error::Incompatible("scalar evaluation needs a one-component space".into()));
        }
        Ok(self.combine(k, &self.space.point_basis(k, xh, None))[0].0[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_square_mesh, generate_trapezoidal_mesh};

    fn square(n: usize) -> Arc<QuadMesh> {
        Arc::new(generate_square_mesh(n).unwrap())
    }

    #[test]
    fn dof_counts() {
        let m = square(2);
        let bdm = build_stress_space(m.clone(), StressFamily::Bdm1).unwrap();
        assert_eq!((bdm.n_per_component(), bdm.n_dofs()), (24, 48));
        let rt2 = build_stress_space(m.clone(), StressFamily::Rt(2)).unwrap();
        assert_eq!((rt2.n_per_component(), rt2.n_dofs()), (40, 80));
        let one = build_stress_space(square(1), StressFamily::Rt(2)).unwrap();
        assert_eq!(one.n_per_component(), 12);
        assert_eq!(build_displacement_space(m.clone(), 2).unwrap().n_dofs(), 32);
        assert_eq!(build_rotation_space(m.clone(), 2).unwrap().n_dofs(), 12);
        assert_eq!(build_displacement_space(m.clone(), 1).unwrap().n_dofs(), 8);
        assert_eq!(build_rotation_space(m.clone(), 1).unwrap().n_dofs(), 4);
        let rt3 = build_stress_space(m, StressFamily::Rt(3)).unwrap();
        assert_eq!(rt3.n_per_component(), 3 * 12 + 12 * 4);
    }

    #[test]
    fn family_parsing() {
        assert_eq!("rt2".parse::<StressFamily>().unwrap(), StressFamily::Rt(2));
        assert_eq!("RT3".parse::<StressFamily>().unwrap(), StressFamily::Rt(3));
        assert_eq!("bdm1".parse::<StressFamily>().unwrap(), StressFamily::Bdm1);
        assert!("rt1".parse::<StressFamily>().is_err());
        assert!("bdm2".parse::<StressFamily>().is_err());
        assert!(build_stress_space(square(1), StressFamily::Rt(1)).is_err());
    }

    #[test]
    fn shared_edge_dofs_appear_twice() {
        let m = Arc::new(generate_trapezoidal_mesh(4, 1.0 / 6.0).unwrap());
        let s = build_stress_space(m.clone(), StressFamily::Rt(2)).unwrap();
        let mut count = vec![0; s.n_per_component()];
        for k in 0..s.n_elements() {
            for &(g, _) in s.element_dofs(k) {
                count[g] += 1;
            }
        }
        for e in 0..m.n_edges() {
            let want = if m.is_boundary_edge(e) { 1 } else { 2 };
            assert_eq!(count[2 * e], want);
            assert_eq!(count[2 * e + 1], want);
        }
        assert!(count[2 * m.n_edges()..].iter().all(|&c| c == 1));
    }

    #[test]
    fn zero_function_is_zero() {
        let s = build_stress_space(square(2), StressFamily::Bdm1).unwrap();
        let f = FEFunction::zero(&s);
        assert_eq!(f.eval_matrix(3, Point2::new(0.2, 0.7)).unwrap(), Mat2::ZERO);
        assert!(f.eval_matrix(4, Point2::new(0.2, 0.7)).is_err());
        assert!(f.eval_vector(0, Point2::new(0.2, 0.7)).is_err());
    }

    #[test]
    fn identity_map_matches_reference_basis() {
        let s = build_stress_space(square(1), StressFamily::Rt(2)).unwrap();
        let p = Point2::new(0.3, 0.6);
        for j in 0..s.n_local() {
            let mut c = vec![0.0; s.n_dofs()];
            let (g, sign) = s.element_dofs(0)[j];
            c[g] = sign;
            let f = FEFunction::new(&s, c);
            let want = s.element().nodal_basis()[j].eval(p);
            let got = f.eval_matrix(0, p).unwrap().row(0);
            assert!((got[0] - want[0]).abs() < 1e-14 && (got[1] - want[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn rotation_basis_spans_physical_polynomials() {
        let m = Arc::new(generate_trapezoidal_mesh(4, 0.2).unwrap());
        let q = build_rotation_space(m, 3).unwrap();
        let target = |x: Point2| 1.0 - 2.0 * x.x + 0.5 * x.y + 3.0 * x.x * x.y - x.y * x.y + 0.25 * x.x * x.x;
        let rule = crate::mapping::gauss_rule(4).unwrap();
        for k in 0..q.n_elements() {
            let rows: Vec<(Vec<f64>, f64)> = rule
                .points
                .iter()
                .map(|&xh| {
                    let b = q.point_basis(k, xh, None);
                    (b.values.iter().map(|v| v[0]).collect(), target(q.map(k).eval(xh)))
                })
                .collect();
            let a = faer::Mat::<f64>::from_fn(rows.len(), q.n_local(), |i, j| rows[i].0[j]);
            let b = faer::Mat::<f64>::from_fn(rows.len(), 1, |i, _| rows[i].1);
            let x = faer::linalg::solvers::SolveLstsq::solve_lstsq(&a.qr(), &b);
            let r = &a * &x - &b;
            let res = (0..rows.len()).map(|i| r[(i, 0)].abs()).fold(0.0, f64::max);
            assert!(res < 1e-12, "element {k}: {res:e}");
        }
    }
}
