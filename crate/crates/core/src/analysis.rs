//! Error norms, convergence orders and stability diagnostics.

use crate::assembly::{assemble_grams, BlockSystem};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::fe_space::{FEFunction, FESpace, MatrixField, MixedSpaces};
use crate::mapping::{gauss_1d, gauss_rule, Mat2, Vec2};
use crate::mesh::{generate_square_mesh, Point2};
use crate::problem::{ExactSolution, LoadData};
use crate::reference_elements::{edge_point, DofQuadrature};
use crate::solver::SolveReport;

pub const EXACT_NORM_ORDER: usize = 12;
pub const INFSUP_LIMIT: usize = 3000;

/// Default error-norm quadrature order `r + 5`.
pub fn default_error_order(spaces: &MixedSpaces) -> usize {
    spaces.family.order() + 5
}

/// Stress, displacement and rotation coefficient vectors of a solve.
pub struct DiscreteSolution<'a> {
    pub spaces: &'a MixedSpaces,
    pub sigma: FEFunction<'a>,
    pub u: FEFunction<'a>,
    pub p: FEFunction<'a>,
}

impl<'a> DiscreteSolution<'a> {
    pub fn from_report(spaces: &'a MixedSpaces, system: &BlockSystem, report: &SolveReport) -> Self {
        Self::from_vector(spaces, system, &report.solution)
    }

    pub fn from_vector(spaces: &'a MixedSpaces, system: &BlockSystem, x: &[f64]) -> Self {
        let (ns, nv) = (system.n_sigma, system.n_v);
        Self {
            spaces,
            sigma: FEFunction::new(&spaces.stress, x[..ns].to_vec()),
            u: FEFunction::new(&spaces.displacement, x[ns..ns + nv].to_vec()),
            p: FEFunction::new(&spaces.rotation, x[ns + nv..].to_vec()),
        }
    }

    pub fn zero(spaces: &'a MixedSpaces) -> Self {
        Self {
            spaces,
            sigma: FEFunction::zero(&spaces.stress),
            u: FEFunction::zero(&spaces.displacement),
            p: FEFunction::zero(&spaces.rotation),
        }
    }
}

/// Per element: stress value, stress divergence, displacement, rotation at
/// each point of `rule` (physical point `x`, weight `w·J`).
struct PointValues {
    x: Point2,
    wj: f64,
    sigma: Mat2,
    div: Vec2,
    u: Vec2,
    p: f64,
}

fn for_each_point(sol: &DiscreteSolution<'_>, k_order: usize, mut f: impl FnMut(usize, &PointValues)) -> Result<()> {
    let rule = gauss_rule(k_order)?;
    let (s, d, q) = (&sol.spaces.stress, &sol.spaces.displacement, &sol.spaces.rotation);
    let tab_s = s.tabulate(&rule);
    let tab_v = d.tabulate(&rule);
    let (ns, nv, nq) = (s.n_local(), d.n_local(), q.n_local());
    for k in 0..s.n_elements() {
        let cs = s.local_coefficients(k, sol.sigma.coefficients());
        let cv = d.local_coefficients(k, sol.u.coefficients());
        let cq = q.local_coefficients(k, sol.p.coefficients());
        let map = s.map(k);
        for (qi, (&xh, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let bs = s.point_basis(k, xh, Some((&tab_s.values[qi], &tab_s.divs[qi])));
            let bq = q.point_basis(k, xh, None);
            let mut rows = [[0.0; 2]; 2];
            let mut div = [0.0; 2];
            for c in 0..2 {
                for j in 0..ns {
                    let a = cs[c * ns + j];
                    rows[c][0] += a * bs.values[j][0];
                    rows[c][1] += a * bs.values[j][1];
                    div[c] += a * bs.divs[j];
                }
            }
            let mut u = [0.0; 2];
            for (c, uc) in u.iter_mut().enumerate() {
                *uc = (0..nv).map(|j| cv[c * nv + j] * tab_v.values[qi][j][0]).sum();
            }
            let p = (0..nq).map(|j| cq[j] * bq.values[j][0]).sum();
            f(k, &PointValues { x: map.eval(xh), wj: w * map.jacobian_det(xh).1, sigma: Mat2(rows), div, u, p });
        }
    }
    Ok(())
}

/// `L²` norms of the exact σ, div σ, u, p over the unit square.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactNorms {
    pub sigma: f64,
    pub div: f64,
    pub u: f64,
    pub p: f64,
}

/// Composite `EXACT_NORM_ORDER`-point Gauss on an 8×8 grid.
pub fn exact_norms(exact: &dyn ExactSolution) -> ExactNorms {
    let mesh = generate_square_mesh(8).expect("valid grid");
    let rule = gauss_rule(EXACT_NORM_ORDER).expect("valid order");
    let mut acc = [0.0; 4];
    for k in 0..mesh.n_quads() {
        let c = mesh.corners(k);
        let (x0, y0) = (c[0].x, c[0].y);
        let area = (c[1].x - c[0].x) * (c[3].y - c[0].y);
        for (xh, w) in rule.iter() {
            let x = Point2::new(x0 + xh.x / 8.0, y0 + xh.y / 8.0);
            let wa = w * area;
            let f = exact.div_sigma(x);
            let u = exact.u(x);
            acc[0] += wa * exact.sigma(x).norm_sq();
            acc[1] += wa * (f[0] * f[0] + f[1] * f[1]);
            acc[2] += wa * (u[0] * u[0] + u[1] * u[1]);
            acc[3] += wa * exact.p(x).powi(2);
        }
    }
    ExactNorms { sigma: acc[0].sqrt(), div: acc[1].sqrt(), u: acc[2].sqrt(), p: acc[3].sqrt() }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorReport {
    pub h: f64,
    pub e_sigma: f64,
    pub e_div: f64,
    pub e_u: f64,
    pub e_p: f64,
    pub pct_sigma: f64,
    pub pct_div: f64,
    pub pct_u: f64,
    pub pct_p: f64,
}

impl ErrorReport {
    pub fn errors(&self) -> [f64; 4] {
        [self.e_sigma, self.e_div, self.e_u, self.e_p]
    }

    pub fn percents(&self) -> [f64; 4] {
        [self.pct_sigma, self.pct_div, self.pct_u, self.pct_p]
    }
}

fn pct(e: f64, norm: f64) -> f64 {
    if norm > 0.0 {
        100.0 * e / norm
    } else {
        f64::NAN
    }
}

/// `L²` errors of σ, div σ, u, p; `h` is the mesh's largest diameter.
pub fn compute_errors(sol: &DiscreteSolution<'_>, exact: &dyn ExactSolution, norms: &ExactNorms, k: usize) -> Result<ErrorReport> {
    let mut acc = [0.0; 4];
    for_each_point(sol, k, |_, v| {
        let ds = exact.sigma(v.x).sub(&v.sigma);
        let f = exact.div_sigma(v.x);
        let u = exact.u(v.x);
        acc[0] += v.wj * ds.norm_sq();
        acc[1] += v.wj * ((f[0] - v.div[0]).powi(2) + (f[1] - v.div[1]).powi(2));
        acc[2] += v.wj * ((u[0] - v.u[0]).powi(2) + (u[1] - v.u[1]).powi(2));
        acc[3] += v.wj * (exact.p(v.x) - v.p).powi(2);
    })?;
    let [s, d, u, p] = acc.map(f64::sqrt);
    Ok(ErrorReport {
        h: sol.spaces.mesh().h(),
        e_sigma: s,
        e_div: d,
        e_u: u,
        e_p: p,
        pct_sigma: pct(s, norms.sigma),
        pct_div: pct(d, norms.div),
        pct_u: pct(u, norms.u),
        pct_p: pct(p, norms.p),
    })
}

/// Rows ordered by decreasing `h`; `orders[i]` compares rows `i` and `i + 1`
/// for (σ, div σ, u, p).
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ErrorReport>,
    pub orders: Vec<[f64; 4]>,
}

impl ConvergenceTable {
    pub fn new(rows: Vec<ErrorReport>) -> Result<Self> {
        let orders = convergence_orders(&rows)?;
        Ok(Self { rows, orders })
    }

    /// Orders between the last two rows.
    pub fn final_orders(&self) -> Option<[f64; 4]> {
        self.orders.last().copied()
    }
}

/// `log₂(e(2h)/e(h))` for successive dyadic rows.
pub fn convergence_orders(rows: &[ErrorReport]) -> Result<Vec<[f64; 4]>> {
    if rows.len() < 2 {
        return Err(Error::InvalidParameter("orders need at least two levels".into()));
    }
    rows.windows(2)
        .map(|w| {
            let ratio = w[0].h / w[1].h;
            if (ratio - 2.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!("mesh sizes {} and {} are not dyadic", w[0].h, w[1].h)));
            }
            let (a, b) = (w[0].errors(), w[1].errors());
            Ok([0, 1, 2, 3].map(|i| (a[i] / b[i]).log2()))
        })
        .collect()
}

/// `‖as σ_h‖_{L²}`.
pub fn asymmetry_norm(sigma: &FEFunction<'_>, k: usize) -> Result<f64> {
    let space = sigma.space();
    let rule = gauss_rule(k)?;
    let tab = space.tabulate(&rule);
    let n = space.n_local();
    let mut acc = 0.0;
    for e in 0..space.n_elements() {
        let c = space.local_coefficients(e, sigma.coefficients());
        let map = space.map(e);
        for (qi, (&xh, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let b = space.point_basis(e, xh, Some((&tab.values[qi], &tab.divs[qi])));
            let t01: f64 = (0..n).map(|j| c[j] * b.values[j][1]).sum();
            let t10: f64 = (0..n).map(|j| c[n + j] * b.values[j][0]).sum();
            acc += w * map.jacobian_det(xh).1 * (t01 - t10).powi(2);
        }
    }
    Ok(acc.sqrt())
}

/// Element-local `L²` Gram matrices of a scalar space (first component).
fn local_grams(space: &FESpace, k_order: usize) -> Result<Vec<DenseMatrix>> {
    let rule = gauss_rule(k_order)?;
    let n = space.n_local();
    (0..space.n_elements())
        .map(|k| {
            let map = space.map(k);
            let mut g = DenseMatrix::zeros(n, n);
            for (xh, w) in rule.iter() {
                let wj = w * map.jacobian_det(xh).1;
                let b = space.point_basis(k, xh, None);
                for i in 0..n {
                    for j in 0..n {
                        g[(i, j)] += wj * b.values[i][0] * b.values[j][0];
                    }
                }
            }
            Ok(g)
        })
        .collect()
}

/// `Σ_K bᵀ G_K⁻¹ b` over elements and components: the squared norm of the
/// `L²` projection whose moments against the local basis are `moments`.
fn projected_norm_sq(grams: &[DenseMatrix], moments: &[Vec<f64>]) -> Result<f64> {
    let mut acc = 0.0;
    for (g, b) in grams.iter().zip(moments) {
        let n = g.n_rows();
        let lu = g.lu()?;
        for chunk in b.chunks(n) {
            let x = lu.solve(chunk);
            acc += x.iter().zip(chunk).map(|(a, c)| a * c).sum::<f64>();
        }
    }
    Ok(acc.max(0.0))
}

/// Moments `∫_K v·φ_i` of a vector field against each displacement basis
/// function, per element, component-major.
fn displacement_moments(disp: &FESpace, k_order: usize, field: impl Fn(usize, Point2) -> Vec2) -> Result<Vec<Vec<f64>>> {
    let rule = gauss_rule(k_order)?;
    let tab = disp.tabulate(&rule);
    let n = disp.n_local();
    Ok((0..disp.n_elements())
        .map(|k| {
            let map = disp.map(k);
            let mut b = vec![0.0; 2 * n];
            for (qi, (&xh, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                let wj = w * map.jacobian_det(xh).1;
                let v = field(k, xh);
                for j in 0..n {
                    let phi = tab.values[qi][j][0];
                    b[j] += wj * v[0] * phi;
                    b[n + j] += wj * v[1] * phi;
                }
            }
            b
        })
        .collect())
}

/// Absolute and relative value of a residual norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residual {
    pub absolute: f64,
    pub relative: f64,
}

impl Residual {
    fn new(absolute: f64, reference: f64) -> Self {
        Self { absolute, relative: if reference > 0.0 { absolute / reference } else { absolute } }
    }
}

/// `‖P_V div Π_h σ − P_V div σ‖`, relative to `‖P_V div σ‖`. `Π_h` is the
/// canonical DOF interpolant built elementwise from `field`.
pub fn check_commuting_projection(spaces: &MixedSpaces, field: &dyn MatrixField, k_order: usize) -> Result<Residual> {
    let (s, d) = (&spaces.stress, &spaces.displacement);
    let dq = DofQuadrature::new(k_order)?;
    let grams = local_grams(d, k_order)?;
    let locals: Vec<[Vec<f64>; 2]> = (0..s.n_elements()).map(|k| s.local_interpolant(k, field, &dq)).collect();
    let el = s.element();
    let diff = displacement_moments(d, k_order, |k, xh| {
        let j = s.map(k).jacobian_det(xh).1;
        let divs = el.eval_basis_div(xh);
        let dpi = [0, 1].map(|c| locals[k][c].iter().zip(&divs).map(|(a, b)| a * b).sum::<f64>() / j);
        let dsig = field.div(k, s.map(k), xh);
        [dpi[0] - dsig[0], dpi[1] - dsig[1]]
    })?;
    let exact = displacement_moments(d, k_order, |k, xh| field.div(k, s.map(k), xh))?;
    Ok(Residual::new(projected_norm_sq(&grams, &diff)?.sqrt(), projected_norm_sq(&grams, &exact)?.sqrt()))
}

/// `‖P_V(div σ_h − f)‖`, relative to `‖P_V f‖`.
pub fn equilibrium_residual(sol: &DiscreteSolution<'_>, load: &dyn LoadData, k_order: usize) -> Result<Residual> {
    let (s, d) = (&sol.spaces.stress, &sol.spaces.displacement);
    let grams = local_grams(d, k_order)?;
    let el = s.element();
    let n = s.n_local();
    let coefs: Vec<Vec<f64>> = (0..s.n_elements()).map(|k| s.local_coefficients(k, sol.sigma.coefficients())).collect();
    let diff = displacement_moments(d, k_order, |k, xh| {
        let map = s.map(k);
        let j = map.jacobian_det(xh).1;
        let divs = el.eval_basis_div(xh);
        let f = load.body_force(map.eval(xh));
        [0, 1].map(|c| (0..n).map(|i| coefs[k][c * n + i] * divs[i]).sum::<f64>() / j - f[c])
    })?;
    let fm = displacement_moments(d, k_order, |k, xh| load.body_force(s.map(k).eval(xh)))?;
    Ok(Residual::new(projected_norm_sq(&grams, &diff)?.sqrt(), projected_norm_sq(&grams, &fm)?.sqrt()))
}

/// `max_i |(as σ_h, q_i)| / ‖q_i‖` over rotation basis functions.
pub fn rotation_orthogonality(sol: &DiscreteSolution<'_>, k_order: usize) -> Result<f64> {
    let q = &sol.spaces.rotation;
    let nq = q.n_local();
    let mut moments = vec![vec![0.0; nq]; q.n_elements()];
    let mut norms = vec![vec![0.0; nq]; q.n_elements()];
    let rule = gauss_rule(k_order)?;
    let s = &sol.spaces.stress;
    let tab = s.tabulate(&rule);
    let ns = s.n_local();
    for k in 0..s.n_elements() {
        let c = s.local_coefficients(k, sol.sigma.coefficients());
        let map = s.map(k);
        for (qi, (&xh, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let wj = w * map.jacobian_det(xh).1;
            let bs = s.point_basis(k, xh, Some((&tab.values[qi], &tab.divs[qi])));
            let t01: f64 = (0..ns).map(|j| c[j] * bs.values[j][1]).sum();
            let t10: f64 = (0..ns).map(|j| c[ns + j] * bs.values[j][0]).sum();
            let bq = q.point_basis(k, xh, None);
            for i in 0..nq {
                moments[k][i] += wj * (t01 - t10) * bq.values[i][0];
                norms[k][i] += wj * bq.values[i][0].powi(2);
            }
        }
    }
    Ok(moments
        .iter()
        .flatten()
        .zip(norms.iter().flatten())
        .map(|(m, n)| m.abs() / n.sqrt())
        .fold(0.0, f64::max))
}

/// Interior-edge normal jumps of a stress function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpReport {
    /// `Σ_e ∫_e |[σ n]|² ds`
    pub jump_sq: f64,
    /// `sqrt(jump_sq / Σ_e ∫_e |σ n|² ds)`, one-sided traces
    pub relative: f64,
}

pub fn normal_jumps(sigma: &FEFunction<'_>, k_order: usize) -> Result<JumpReport> {
    let space = sigma.space();
    let mesh = space.mesh();
    let (t, w) = gauss_1d(k_order)?;
    let (mut jump, mut total) = (0.0, 0.0);
    for (e, edge) in mesh.edges().iter().enumerate() {
        let [Some((ka, la)), Some((kb, lb))] = *mesh.edge_quads(e) else { continue };
        let (a, b) = (mesh.vertices()[edge.lo], mesh.vertices()[edge.hi]);
        let len = a.dist(b);
        let n = [(b.y - a.y) / len, -(b.x - a.x) / len];
        for (&ti, &wi) in t.iter().zip(&w) {
            // the two elements traverse the edge in opposite directions
            let sa = sigma.eval_matrix(ka, edge_point(la, ti))?.mul_vec(n);
            let sb = sigma.eval_matrix(kb, edge_point(lb, 1.0 - ti))?.mul_vec(n);
            jump += wi * len * ((sa[0] - sb[0]).powi(2) + (sa[1] - sb[1]).powi(2));
            total += wi * len * (sa[0] * sa[0] + sa[1] * sa[1] + sb[0] * sb[0] + sb[1] * sb[1]) / 2.0;
        }
    }
    Ok(JumpReport { jump_sq: jump, relative: if total > 0.0 { (jump / total).sqrt() } else { jump.sqrt() } })
}

/// `‖Π_h I − I‖_{L²}`: zero exactly when the constant identity field lies in
/// the stress space (the interpolant reproduces its own space).
pub fn identity_residual(stress: &FESpace, k_order: usize) -> Result<f64> {
    let dq = DofQuadrature::new(k_order)?;
    let pi = stress.interpolate_matrix(&|_| Mat2::IDENTITY, &dq)?;
    let rule = gauss_rule(k_order)?;
    let mut acc = 0.0;
    for k in 0..stress.n_elements() {
        let map = stress.map(k);
        for (xh, w) in rule.iter() {
            acc += w * map.jacobian_det(xh).1 * pi.eval_matrix(k, xh)?.sub(&Mat2::IDENTITY).norm_sq();
        }
    }
    Ok(acc.sqrt())
}

/// Largest `‖div τ‖²` over an orthonormal (Euclidean) basis of the null space
/// of the divergence block, with the null-space dimension.
pub fn divergence_kernel_check(spaces: &MixedSpaces, system: &BlockSystem, k_order: usize) -> Result<(usize, f64)> {
    let bd = system.bd.to_dense().to_faer();
    let ns = system.n_sigma;
    let svd = bd.svd().map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
    let sv = svd.S().column_vector();
    let smax = (0..sv.nrows()).map(|i| sv[i]).fold(0.0, f64::max);
    let rank = (0..sv.nrows()).filter(|&i| sv[i] > 1e-12 * smax).count();
    let v = svd.V();
    let mut worst: f64 = 0.0;
    for col in rank..ns {
        let tau = FEFunction::new(&spaces.stress, (0..ns).map(|i| v[(i, col)]).collect());
        let sol = DiscreteSolution { spaces, sigma: tau, u: FEFunction::zero(&spaces.displacement), p: FEFunction::zero(&spaces.rotation) };
        let mut acc = 0.0;
        for_each_point(&sol, k_order, |_, pv| acc += pv.wj * (pv.div[0].powi(2) + pv.div[1].powi(2)))?;
        worst = worst.max(acc);
    }
    Ok((ns - rank, worst))
}

/// Smallest `|λ|` of `N^{-1/2} K N^{-1/2}` with `N` the block-diagonal
/// Y-norm Gram matrix.
pub fn infsup_estimate(spaces: &MixedSpaces, system: &BlockSystem, k_order: usize) -> Result<f64> {
    let n = system.order();
    if n > INFSUP_LIMIT {
        return Err(Error::DimensionCap { n, limit: INFSUP_LIMIT });
    }
    let [gs, gv, gq] = assemble_grams(spaces, k_order)?;
    let mut gram = faer::Mat::<f64>::zeros(n, n);
    let offsets = [0, system.n_sigma, system.n_sigma + system.n_v];
    for (g, off) in [&gs, &gv, &gq].into_iter().zip(offsets) {
        for (i, j, v) in g.triplets() {
            gram[(off + i, off + j)] = v;
        }
    }
    let evd = gram.self_adjoint_eigen(faer::Side::Lower).map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
    let u = evd.U();
    let s = evd.S().column_vector();
    let scale = faer::Mat::<f64>::from_fn(n, n, |i, j| u[(i, j)] / s[j].sqrt());
    let inv_sqrt = &scale * u.transpose();
    let k = system.to_dense().to_faer();
    let c = &inv_sqrt * &k * &inv_sqrt;
    let sym = faer::Mat::<f64>::from_fn(n, n, |i, j| (c[(i, j)] + c[(j, i)]) / 2.0);
    let ev = sym.self_adjoint_eigenvalues(faer::Side::Lower).map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
    Ok(ev.iter().fold(f64::INFINITY, |m, l| m.min(l.abs())))
}
