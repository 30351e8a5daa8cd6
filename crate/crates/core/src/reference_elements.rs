//! Reference elements on the unit square.
//!
//! Each element pairs a polynomial shape space with degree-of-freedom
//! functionals and stores the nodal (dual) basis `φ_j` with `ℓ_i(φ_j) = δ_ij`.
//!
//! Local edges run counterclockwise: edge `e` goes from reference vertex `e`
//! to vertex `e + 1 (mod 4)`, vertices being (0,0), (1,0), (1,1), (0,1). Edge
//! moments pair the outward normal component with shifted Legendre
//! polynomials in that counterclockwise edge parameter.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::mapping::{dot2, gauss_1d, gauss_rule, QuadratureRule, Vec2};
use crate::mesh::Point2;
use crate::poly::{shifted_legendre, Poly, PolyField};

pub const REFERENCE_VERTICES: [Point2; 4] =
    [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(1.0, 1.0), Point2::new(0.0, 1.0)];

pub const REFERENCE_NORMALS: [Vec2; 4] = [[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]];

/// Point at parameter `t ∈ [0, 1]` along reference edge `e`.
pub fn edge_point(e: usize, t: f64) -> Point2 {
    let a = REFERENCE_VERTICES[e];
    let b = REFERENCE_VERTICES[(e + 1) % 4];
    Point2::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementKind {
    /// Raviart–Thomas `P_{r,r−1} × P_{r−1,r}`.
    Rt(usize),
    /// The 8-dimensional quadrilateral BDM space.
    Bdm1,
    /// Tensor polynomials `Q_r`.
    Q(usize),
    /// Total-degree polynomials `P_r`.
    P(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum DofFunctional {
    /// `∫_e (v·n̂) L_k(t) dt` over reference edge `e`.
    EdgeMoment { edge: usize, degree: usize },
    /// `∫_K̂ v·w dx̂`.
    InteriorMoment { weight: PolyField },
}

/// Quadrature used to evaluate DOF functionals.
#[derive(Clone, Debug)]
pub struct DofQuadrature {
    edge_nodes: Vec<f64>,
    edge_weights: Vec<f64>,
    cell: QuadratureRule,
}

impl DofQuadrature {
    pub fn new(order: usize) -> Result<Self> {
        let (edge_nodes, edge_weights) = gauss_1d(order)?;
        Ok(Self { edge_nodes, edge_weights, cell: gauss_rule(order)? })
    }
}

impl DofFunctional {
    pub fn apply(&self, f: &dyn Fn(Point2) -> Vec2, q: &DofQuadrature) -> f64 {
        match self {
            Self::EdgeMoment { edge, degree } => {
                let n = REFERENCE_NORMALS[*edge];
                q.edge_nodes
                    .iter()
                    .zip(&q.edge_weights)
                    .map(|(&t, w)| w * dot2(f(edge_point(*edge, t)), n) * shifted_legendre(*degree, t))
                    .sum()
            }
            Self::InteriorMoment { weight } => {
                q.cell.iter().map(|(p, w)| w * dot2(f(p), weight.eval(p))).sum()
            }
        }
    }
}

/// Reference basis values (and divergences, for vector elements) at the
/// points of a quadrature rule: `values[q][j]`.
#[derive(Clone, Debug)]
pub struct Tabulation {
    pub values: Vec<Vec<Vec2>>,
    pub divs: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct ReferenceElement {
    kind: ElementKind,
    value_dim: usize,
    shape: Vec<PolyField>,
    dofs: Vec<DofFunctional>,
    nodal: Vec<PolyField>,
    nodal_div: Vec<Poly>,
    edge_moments: usize,
}

const DOF_QUADRATURE_ORDER: usize = 10;

/// Tensor Legendre basis of `P_{max_x, max_y}`.
fn tensor_basis(max_x: usize, max_y: usize) -> impl Iterator<Item = Poly> {
    (0..=max_y).flat_map(move |b| (0..=max_x).map(move |a| Poly::legendre_product(a, b)))
}

/// Legendre-product basis of total degree `<= r`.
fn total_basis(r: usize) -> impl Iterator<Item = Poly> {
    (0..=r).flat_map(move |d| (0..=d).map(move |b| Poly::legendre_product(d - b, b)))
}

fn x_field(p: Poly) -> PolyField {
    PolyField::vector(p, Poly::zero())
}

fn y_field(p: Poly) -> PolyField {
    PolyField::vector(Poly::zero(), p)
}

fn edge_dofs(moments: usize) -> Vec<DofFunctional> {
    (0..4)
        .flat_map(|edge| (0..moments).map(move |degree| DofFunctional::EdgeMoment { edge, degree }))
        .collect()
}

impl ReferenceElement {
    fn build(kind: ElementKind, shape: Vec<PolyField>, dofs: Vec<DofFunctional>, edge_moments: usize) -> Result<Self> {
        let n = shape.len();
        if dofs.len() != n {
            return Err(Error::NotUnisolvent(format!(
                "{kind:?}: {} functionals for a {n}-dimensional space",
                dofs.len()
            )));
        }
        let value_dim = shape[0].dim();
        let q = DofQuadrature::new(DOF_QUADRATURE_ORDER)?;
        let dof_matrix = DenseMatrix::from_fn(n, n, |i, j| dofs[i].apply(&|p| shape[j].eval(p), &q));
        let sv = dof_matrix.to_faer().singular_values().map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
        let (smax, smin) = (sv[0], sv[n - 1]);
        if !(smin > 1e-10 * smax) {
            return Err(Error::NotUnisolvent(format!("{kind:?}: DOF matrix singular values {smax:e} .. {smin:e}")));
        }
        let coef = dof_matrix.lu()?.inverse();
        let nodal: Vec<PolyField> = (0..n)
            .map(|j| PolyField::combination(&shape, (0..n).map(|k| coef[(k, j)])))
            .collect();
        let nodal_div = if value_dim == 2 { nodal.iter().map(PolyField::div).collect() } else { Vec::new() };
        Ok(Self { kind, value_dim, shape, dofs, nodal, nodal_div, edge_moments })
    }

    pub fn kind(&self) -> ElementKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    /// 1 for scalar elements, 2 for vector elements.
    pub fn value_dim(&self) -> usize {
        self.value_dim
    }

    /// Spanning set (tensor Legendre products) of the shape space.
    pub fn shape_basis(&self) -> &[PolyField] {
        &self.shape
    }

    pub fn dofs(&self) -> &[DofFunctional] {
        &self.dofs
    }

    pub fn nodal_basis(&self) -> &[PolyField] {
        &self.nodal
    }

    /// Number of normal moments per edge (0 for discontinuous elements).
    pub fn edge_moments(&self) -> usize {
        self.edge_moments
    }

    /// Number of functionals not attached to an edge.
    pub fn n_interior(&self) -> usize {
        self.dim() - 4 * self.edge_moments
    }

    /// Local index of the edge moment of degree `k` on edge `e`.
    pub fn edge_dof(&self, e: usize, k: usize) -> usize {
        e * self.edge_moments + k
    }

    pub fn eval_basis(&self, p: Point2) -> Vec<Vec2> {
        self.nodal.iter().map(|f| f.eval(p)).collect()
    }

    pub fn eval_basis_div(&self, p: Point2) -> Vec<f64> {
        self.nodal_div.iter().map(|d| d.eval(p)).collect()
    }

    pub fn tabulate(&self, rule: &QuadratureRule) -> Tabulation {
        Tabulation {
            values: rule.points.iter().map(|&p| self.eval_basis(p)).collect(),
            divs: rule.points.iter().map(|&p| self.eval_basis_div(p)).collect(),
        }
    }

    /// DOF values of `f`; these are its coefficients in the nodal basis.
    pub fn interpolate(&self, f: &dyn Fn(Point2) -> Vec2, q: &DofQuadrature) -> Vec<f64> {
        self.dofs.iter().map(|d| d.apply(f, q)).collect()
    }

    /// `max_ij |ℓ_i(φ_j) − δ_ij|`.
    pub fn unisolvence_residual(&self) -> f64 {
        let q = DofQuadrature::new(DOF_QUADRATURE_ORDER).expect("valid order");
        let mut worst: f64 = 0.0;
        for (i, dof) in self.dofs.iter().enumerate() {
            for (j, phi) in self.nodal.iter().enumerate() {
                let v = dof.apply(&|p| phi.eval(p), &q);
                worst = worst.max((v - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        worst
    }

    /// 2-norm condition number of the DOF matrix on the spanning set.
    pub fn dof_condition_number(&self) -> f64 {
        let n = self.dim();
        let q = DofQuadrature::new(DOF_QUADRATURE_ORDER).expect("valid order");
        let m = faer::Mat::<f64>::from_fn(n, n, |i, j| self.dofs[i].apply(&|p| self.shape[j].eval(p), &q));
        let sv = m.singular_values().expect("svd of a small matrix");
        sv[0] / sv[n - 1]
    }
}

/// `RT_r = P_{r,r−1} × P_{r−1,r}` with `r` normal moments per edge and
/// interior moments against `P_{r−2,r−1} × P_{r−1,r−2}`.
pub fn rt_element(r: usize) -> Result<ReferenceElement> {
    if r == 0 {
        return Err(Error::InvalidParameter("RT degree must be >= 1".into()));
    }
    let mut shape: Vec<PolyField> = tensor_basis(r, r - 1).map(x_field).collect();
    shape.extend(tensor_basis(r - 1, r).map(y_field));

    let mut dofs = edge_dofs(r);
    if r >= 2 {
        let weights = tensor_basis(r - 2, r - 1).map(x_field).chain(tensor_basis(r - 1, r - 2).map(y_field));
        dofs.extend(weights.map(|weight| DofFunctional::InteriorMoment { weight }));
    }
    ReferenceElement::build(ElementKind::Rt(r), shape, dofs, r)
}

/// Linear vector fields plus `curl x̂₁²x̂₂` and `curl x̂₁x̂₂²`, with two normal
/// moments per edge.
pub fn bdm1_element() -> ReferenceElement {
    let mut shape: Vec<PolyField> = total_basis(1).map(x_field).collect();
    shape.extend(total_basis(1).map(y_field));
    shape.push(PolyField::curl(&Poly::monomial(2, 1)));
    shape.push(PolyField::curl(&Poly::monomial(1, 2)));
    ReferenceElement::build(ElementKind::Bdm1, shape, edge_dofs(2), 2).expect("BDM1 is unisolvent")
}

/// Scalar `Q_r` with interior moments against its Legendre basis.
pub fn q_element(r: usize) -> ReferenceElement {
    let shape: Vec<PolyField> = tensor_basis(r, r).map(PolyField::scalar).collect();
    let dofs = shape.iter().cloned().map(|weight| DofFunctional::InteriorMoment { weight }).collect();
    ReferenceElement::build(ElementKind::Q(r), shape, dofs, 0).expect("Q_r is unisolvent")
}

/// Scalar `P_r` with interior moments against its Legendre basis.
pub fn p_element(r: usize) -> ReferenceElement {
    let shape: Vec<PolyField> = total_basis(r).map(PolyField::scalar).collect();
    let dofs = shape.iter().cloned().map(|weight| DofFunctional::InteriorMoment { weight }).collect();
    ReferenceElement::build(ElementKind::P(r), shape, dofs, 0).expect("P_r is unisolvent")
}
