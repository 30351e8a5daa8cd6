//! Assembly of the saddle-point system
//!
//! ```text
//! [ M   Bdᵀ  Baᵀ ] [σ]   [g-term]
//! [ Bd  0    0   ] [u] = [(f, v)]
//! [ Ba  0    0   ] [p]   [0     ]
//! ```
//!
//! with `M = (Aσ, τ)`, `Bd = (div σ, v)`, `Ba = (as σ, q)`. Unknowns are
//! ordered stress, displacement, rotation.

use std::io::Write;
use std::sync::Arc;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::fe_space::{FESpace, MappingKind, MixedSpaces};
use crate::mapping::{gauss_1d, gauss_rule, Mat2};
use crate::problem::{Compliance, LoadData};
use crate::reference_elements::{edge_point, ElementKind, REFERENCE_NORMALS};
use crate::sparse::CsrMatrix;

#[derive(Clone, Debug)]
pub struct BlockSystem {
    pub n_sigma: usize,
    pub n_v: usize,
    pub n_q: usize,
    pub m: CsrMatrix,
    pub bd: CsrMatrix,
    pub ba: CsrMatrix,
    pub rhs: Vec<f64>,
    pub quad_order: usize,
    /// Order used for the load and boundary-data integrals.
    pub load_order: usize,
    pub warnings: Vec<String>,
}

impl BlockSystem {
    pub fn order(&self) -> usize {
        self.n_sigma + self.n_v + self.n_q
    }

    /// The full symmetric matrix.
    pub fn matrix(&self) -> CsrMatrix {
        CsrMatrix::from_triplets(self.order(), self.order(), self.full_triplets())
    }

    fn full_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t: Vec<_> = self.m.triplets().collect();
        for (blk, off) in [(&self.bd, self.n_sigma), (&self.ba, self.n_sigma + self.n_v)] {
            for (i, j, v) in blk.triplets() {
                t.push((off + i, j, v));
                t.push((j, off + i, v));
            }
        }
        t
    }

    /// `K x` without forming `K`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let (ns, nv) = (self.n_sigma, self.n_v);
        let (xs, xv, xq) = (&x[..ns], &x[ns..ns + nv], &x[ns + nv..]);
        let mut y = self.m.mul_vec(xs);
        for (yi, (a, b)) in y.iter_mut().zip(self.bd.transpose_mul_vec(xv).into_iter().zip(self.ba.transpose_mul_vec(xq))) {
            *yi += a + b;
        }
        y.extend(self.bd.mul_vec(xs));
        y.extend(self.ba.mul_vec(xs));
        y
    }

    pub fn to_dense(&self) -> DenseMatrix {
        self.matrix().to_dense()
    }

    /// Coordinate dump, one `i j value` line per stored entry (0-based).
    pub fn write_triplets(&self, mut w: impl Write) -> std::io::Result<()> {
        for (i, j, v) in self.matrix().triplets() {
            writeln!(w, "{i} {j} {v:.17e}")?;
        }
        Ok(())
    }
}

fn check_spaces(stress: &FESpace, disp: &FESpace, rot: &FESpace) -> Result<()> {
    if !Arc::ptr_eq(stress.mesh(), disp.mesh()) || !Arc::ptr_eq(stress.mesh(), rot.mesh()) {
        return Err(Error::Incompatible("spaces are built on different meshes".into()));
    }
    if stress.mapping() != MappingKind::Piola || stress.components() != 2 {
        return Err(Error::Incompatible("stress space must be a two-row Piola space".into()));
    }
    if disp.mapping() != MappingKind::Compose || disp.components() != 2 {
        return Err(Error::Incompatible("displacement space must be a two-component composed space".into()));
    }
    if rot.mapping() != MappingKind::Unmapped || rot.components() != 1 {
        return Err(Error::Incompatible("rotation space must be a scalar unmapped space".into()));
    }
    let r = match stress.element().kind() {
        ElementKind::Rt(r) => r,
        ElementKind::Bdm1 => 1,
        k => return Err(Error::Incompatible(format!("{k:?} is not a stress element"))),
    };
    let want = (ElementKind::Q(r - 1), ElementKind::P(r - 1));
    if (disp.element().kind(), rot.element().kind()) != want {
        return Err(Error::Incompatible(format!(
            "stress {:?} pairs with {want:?}, got ({:?}, {:?})",
            stress.element().kind(),
            disp.element().kind(),
            rot.element().kind()
        )));
    }
    Ok(())
}

/// Extra Gauss order for integrals of (non-polynomial) data.
pub const LOAD_EXTRA_ORDER: usize = 5;

/// Order `r` of the stress family (displacement degree + 1).
pub fn family_order(stress: &FESpace) -> usize {
    match stress.element().kind() {
        ElementKind::Rt(r) => r,
        _ => 1,
    }
}

/// `r + 3` on parallelogram meshes; `r + 6` when some element is not affine,
/// where the `1/J` factor makes the mass integrand rational.
pub fn default_assembly_order(stress: &FESpace) -> usize {
    let affine = (0..stress.n_elements()).all(|k| stress.map(k).is_affine());
    family_order(stress) + if affine { 3 } else { 6 }
}

/// Matrix basis function `(row c, scalar basis value v)`.
fn row_matrix(c: usize, v: [f64; 2]) -> Mat2 {
    if c == 0 {
        Mat2([v, [0.0, 0.0]])
    } else {
        Mat2([[0.0, 0.0], v])
    }
}

pub fn assemble(
    stress: &FESpace,
    disp: &FESpace,
    rot: &FESpace,
    compliance: &Compliance,
    load: &dyn LoadData,
    quad_order: usize,
) -> Result<BlockSystem> {
    check_spaces(stress, disp, rot)?;
    let mut warnings = Vec::new();
    let floor = family_order(stress) + 1;
    if quad_order < floor {
        warnings.push(format!("quadrature order {quad_order} is below the exactness floor {floor} for parallelograms"));
    }
    let rule = gauss_rule(quad_order)?;
    let tab_s = stress.tabulate(&rule);
    let tab_v = disp.tabulate(&rule);
    let (ns, nv, nq) = (stress.n_local(), disp.n_local(), rot.n_local());
    let (n_sigma, n_v, n_q) = (stress.n_dofs(), disp.n_dofs(), rot.n_dofs());

    let mut tm = Vec::new();
    let mut tbd = Vec::new();
    let mut tba = Vec::new();
    let mut rhs = vec![0.0; n_sigma + n_v + n_q];

    let mut m_loc = vec![0.0; 4 * ns * ns];
    let mut bd_loc = vec![0.0; 4 * nv * ns];
    let mut ba_loc = vec![0.0; 2 * nq * ns];
    let mut a_tau = vec![Mat2::ZERO; 2 * ns];
    let mut tau = vec![Mat2::ZERO; 2 * ns];

    for k in 0..stress.n_elements() {
        m_loc.iter_mut().for_each(|v| *v = 0.0);
        bd_loc.iter_mut().for_each(|v| *v = 0.0);
        ba_loc.iter_mut().for_each(|v| *v = 0.0);
        let map = stress.map(k);
        for (qi, (&xh, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let wj = w * map.jacobian_det(xh).1;
            let bs = stress.point_basis(k, xh, Some((&tab_s.values[qi], &tab_s.divs[qi])));
            let bq = rot.point_basis(k, xh, None);
            let phi = &tab_v.values[qi];
            for c in 0..2 {
                for j in 0..ns {
                    tau[c * ns + j] = row_matrix(c, bs.values[j]);
                    a_tau[c * ns + j] = compliance.apply(&tau[c * ns + j]);
                }
            }
            for a in 0..2 * ns {
                for b in a..2 * ns {
                    m_loc[a * 2 * ns + b] += wj * a_tau[b].dot(&tau[a]);
                }
            }
            for c in 0..2 {
                for i in 0..nv {
                    let vi = wj * phi[i][0];
                    for j in 0..ns {
                        bd_loc[(c * nv + i) * 2 * ns + c * ns + j] += vi * bs.divs[j];
                    }
                }
            }
            for i in 0..nq {
                let qv = wj * bq.values[i][0];
                for j in 0..ns {
                    ba_loc[i * 2 * ns + j] += qv * bs.values[j][1];
                    ba_loc[i * 2 * ns + ns + j] -= qv * bs.values[j][0];
                }
            }
        }

        for a in 0..2 * ns {
            for b in 0..a {
                m_loc[a * 2 * ns + b] = m_loc[b * 2 * ns + a];
            }
        }
        let sdofs = stress.element_dofs(k);
        let sglob = |a: usize| {
            let (c, j) = (a / ns, a % ns);
            let (g, s) = sdofs[j];
            (stress.global_index(c, g), s)
        };
        for a in 0..2 * ns {
            let (ga, sa) = sglob(a);
            for b in 0..2 * ns {
                let (gb, sb) = sglob(b);
                tm.push((ga, gb, sa * sb * m_loc[a * 2 * ns + b]));
            }
        }
        let vdofs = disp.element_dofs(k);
        for c in 0..2 {
            for i in 0..nv {
                let gi = disp.global_index(c, vdofs[i].0);
                for b in 0..2 * ns {
                    let (gb, sb) = sglob(b);
                    let v = bd_loc[(c * nv + i) * 2 * ns + b];
                    if v != 0.0 {
                        tbd.push((gi, gb, sb * v));
                    }
                }
            }
        }
        let qdofs = rot.element_dofs(k);
        for i in 0..nq {
            let gi = qdofs[i].0;
            for b in 0..2 * ns {
                let (gb, sb) = sglob(b);
                tba.push((gi, gb, sb * ba_loc[i * 2 * ns + b]));
            }
        }
    }

    let load_order = quad_order + LOAD_EXTRA_ORDER;
    for (r, b) in rhs.iter_mut().zip(boundary_term(stress, load, load_order)?) {
        *r += b;
    }
    for (r, b) in rhs[n_sigma..].iter_mut().zip(load_vector(disp, load, load_order)?) {
        *r += b;
    }

    Ok(BlockSystem {
        n_sigma,
        n_v,
        n_q,
        m: CsrMatrix::from_triplets(n_sigma, n_sigma, tm),
        bd: CsrMatrix::from_triplets(n_v, n_sigma, tbd),
        ba: CsrMatrix::from_triplets(n_q, n_sigma, tba),
        rhs,
        quad_order,
        load_order,
        warnings,
    })
}

/// `(f, v)` for every displacement basis function.
pub fn load_vector(disp: &FESpace, load: &dyn LoadData, k: usize) -> Result<Vec<f64>> {
    let rule = gauss_rule(k)?;
    let tab = disp.tabulate(&rule);
    let nv = disp.n_local();
    let mut out = vec![0.0; disp.n_dofs()];
    for el in 0..disp.n_elements() {
        let map = disp.map(el);
        let dofs = disp.element_dofs(el);
        for (qi, (&xh, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let wj = w * map.jacobian_det(xh).1;
            let f = load.body_force(map.eval(xh));
            for i in 0..nv {
                let (g, s) = dofs[i];
                for c in 0..2 {
                    out[disp.global_index(c, g)] += s * wj * tab.values[qi][i][0] * f[c];
                }
            }
        }
    }
    Ok(out)
}

/// [`assemble`] on a [`MixedSpaces`] triple; `quad_order` defaults to `r + 3`.
pub fn assemble_mixed(spaces: &MixedSpaces, compliance: &Compliance, load: &dyn LoadData, quad_order: Option<usize>) -> Result<BlockSystem> {
    let k = quad_order.unwrap_or_else(|| default_assembly_order(&spaces.stress));
    assemble(&spaces.stress, &spaces.displacement, &spaces.rotation, compliance, load, k)
}

/// `∮_∂Ω g · (τ n) ds` for every stress basis function, by `k`-point Gauss
/// per boundary edge. The Piola map carries `τ n ds` to `τ̂ n̂ dŝ`, so each
/// edge integral runs over the reference edge.
pub fn boundary_term(stress: &FESpace, load: &dyn LoadData, k: usize) -> Result<Vec<f64>> {
    let mesh = stress.mesh();
    let (t, w) = gauss_1d(k)?;
    let mut out = vec![0.0; stress.n_dofs()];
    let el = stress.element();
    for e in 0..mesh.n_edges() {
        if !mesh.is_boundary_edge(e) {
            continue;
        }
        let (quad, le) = mesh.edge_quads(e).iter().flatten().next().copied().expect("boundary edge has a quad");
        let map = stress.map(quad);
        let n = REFERENCE_NORMALS[le];
        let dofs = stress.element_dofs(quad);
        for (&ti, &wi) in t.iter().zip(&w) {
            let xh = edge_point(le, ti);
            let g = load.boundary_displacement(map.eval(xh));
            for (j, v) in el.eval_basis(xh).into_iter().enumerate() {
                let flux = wi * (v[0] * n[0] + v[1] * n[1]);
                if flux == 0.0 {
                    continue;
                }
                let (gj, s) = dofs[j];
                for c in 0..2 {
                    out[stress.global_index(c, gj)] += s * g[c] * flux;
                }
            }
        }
    }
    Ok(out)
}

/// Gram matrices of the Y-norm: `(τ,τ) + (div τ, div τ)` on the stress
/// space and `L²` on the displacement and rotation spaces.
pub fn assemble_grams(spaces: &MixedSpaces, quad_order: usize) -> Result<[CsrMatrix; 3]> {
    let (s, d, q) = (&spaces.stress, &spaces.displacement, &spaces.rotation);
    let rule = gauss_rule(quad_order)?;
    let tab_s = s.tabulate(&rule);
    let tab_v = d.tabulate(&rule);
    let (ns, nv, nq) = (s.n_local(), d.n_local(), q.n_local());
    let (mut ts, mut tv, mut tq) = (Vec::new(), Vec::new(), Vec::new());
    for k in 0..s.n_elements() {
        let map = s.map(k);
        let mut gs = vec![0.0; ns * ns];
        let mut gv = vec![0.0; nv * nv];
        let mut gq = vec![0.0; nq * nq];
        for (qi, (&xh, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let wj = w * map.jacobian_det(xh).1;
            let bs = s.point_basis(k, xh, Some((&tab_s.values[qi], &tab_s.divs[qi])));
            let bq = q.point_basis(k, xh, None);
            for i in 0..ns {
                for j in 0..ns {
                    let (a, b) = (bs.values[i], bs.values[j]);
                    gs[i * ns + j] += wj * (a[0] * b[0] + a[1] * b[1] + bs.divs[i] * bs.divs[j]);
                }
            }
            for i in 0..nv {
                for j in 0..nv {
                    gv[i * nv + j] += wj * tab_v.values[qi][i][0] * tab_v.values[qi][j][0];
                }
            }
            for i in 0..nq {
                for j in 0..nq {
                    gq[i * nq + j] += wj * bq.values[i][0] * bq.values[j][0];
                }
            }
        }
        for (space, local, n, out) in [(s, &gs, ns, &mut ts), (d, &gv, nv, &mut tv), (q, &gq, nq, &mut tq)] {
            let dofs = space.element_dofs(k);
            for c in 0..space.components() {
                for i in 0..n {
                    for j in 0..n {
                        let ((gi, si), (gj, sj)) = (dofs[i], dofs[j]);
                        out.push((space.global_index(c, gi), space.global_index(c, gj), si * sj * local[i * n + j]));
                    }
                }
            }
        }
    }
    Ok([
        CsrMatrix::from_triplets(s.n_dofs(), s.n_dofs(), ts),
        CsrMatrix::from_triplets(d.n_dofs(), d.n_dofs(), tv),
        CsrMatrix::from_triplets(q.n_dofs(), q.n_dofs(), tq),
    ])
}
