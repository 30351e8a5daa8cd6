//! Direct solution of the block system with residual verification.

use faer::linalg::solvers::Solve;

use crate::assembly::BlockSystem;
use crate::dense::DenseLu;
use crate::error::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
/// Pivots at or below this multiple of the largest diagonal magnitude are singular.
pub const PIVOT_RATIO: f64 = 1e-13;
pub const DENSE_LIMIT: usize = 5000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Factorization {
    Sparse,
    Dense,
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub factorization: Factorization,
    /// Retry with the dense path (below [`DENSE_LIMIT`]) when the sparse one fails.
    pub dense_fallback: bool,
    pub tolerance: f64,
    pub refinement_steps: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { factorization: Factorization::Sparse, dense_fallback: true, tolerance: DEFAULT_TOLERANCE, refinement_steps: 2 }
    }
}

impl SolveOptions {
    pub fn dense() -> Self {
        Self { factorization: Factorization::Dense, ..Self::default() }
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    pub relative_residual: f64,
    pub factorization: Factorization,
}

impl SolveReport {
    pub fn sigma<'a>(&'a self, system: &BlockSystem) -> &'a [f64] {
        &self.solution[..system.n_sigma]
    }

    pub fn displacement<'a>(&'a self, system: &BlockSystem) -> &'a [f64] {
        &self.solution[system.n_sigma..system.n_sigma + system.n_v]
    }

    pub fn rotation<'a>(&'a self, system: &BlockSystem) -> &'a [f64] {
        &self.solution[system.n_sigma + system.n_v..]
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn residual(system: &BlockSystem, x: &[f64]) -> Vec<f64> {
    system.mul_vec(x).iter().zip(&system.rhs).map(|(kx, b)| b - kx).collect()
}

fn pivot_threshold(system: &BlockSystem) -> f64 {
    let dmax = (0..system.n_sigma).map(|i| system.m.get(i, i).abs()).fold(0.0, f64::max);
    PIVOT_RATIO * dmax
}

trait Factor {
    fn apply(&self, b: &[f64]) -> Vec<f64>;
}

struct SparseFactor(faer::sparse::linalg::solvers::Lu<usize, f64>);

impl Factor for SparseFactor {
    fn apply(&self, b: &[f64]) -> Vec<f64> {
        let rhs = faer::Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
        let x = self.0.solve(&rhs);
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }
}

impl Factor for DenseLu {
    fn apply(&self, b: &[f64]) -> Vec<f64> {
        self.solve(b)
    }
}

fn factor(system: &BlockSystem, kind: Factorization) -> Result<Box<dyn Factor>> {
    let n = system.order();
    let threshold = pivot_threshold(system);
    match kind {
        Factorization::Dense => {
            if n >= DENSE_LIMIT {
                return Err(Error::DimensionCap { n, limit: DENSE_LIMIT });
            }
            Ok(Box::new(DenseLu::new(system.to_dense(), threshold)?))
        }
        Factorization::Sparse => {
            let lu = system.matrix().to_faer().sp_lu().map_err(|e| match e {
                faer::sparse::linalg::LuError::SymbolicSingular { index } => {
                    Error::SingularSystem { row: index, pivot: 0.0, threshold }
                }
                other => Error::LinearAlgebra(format!("{other:?}")),
            })?;
            Ok(Box::new(SparseFactor(lu)))
        }
    }
}

fn solve_with(system: &BlockSystem, opts: &SolveOptions, kind: Factorization) -> Result<SolveReport> {
    let n = system.order();
    let bnorm = norm(&system.rhs);
    if bnorm == 0.0 {
        return Ok(SolveReport { solution: vec![0.0; n], relative_residual: 0.0, factorization: kind });
    }
    let f = factor(system, kind)?;
    let mut x = f.apply(&system.rhs);
    if let Some(row) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::SingularSystem { row, pivot: 0.0, threshold: pivot_threshold(system) });
    }
    let mut r = residual(system, &x);
    let mut rel = norm(&r) / bnorm;
    for _ in 0..opts.refinement_steps {
        if rel <= 1e-3 * opts.tolerance {
            break;
        }
        let dx = f.apply(&r);
        let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
        let rt = residual(system, &trial);
        let relt = norm(&rt) / bnorm;
        if !(relt < rel) {
            break;
        }
        (x, r, rel) = (trial, rt, relt);
    }
    if !(rel <= opts.tolerance) {
        return Err(Error::ResidualTooLarge { residual: rel, tolerance: opts.tolerance });
    }
    Ok(SolveReport { solution: x, relative_residual: rel, factorization: kind })
}

pub fn solve(system: &BlockSystem, opts: &SolveOptions) -> Result<SolveReport> {
    match solve_with(system, opts, opts.factorization) {
        Err(e @ (Error::SingularSystem { .. } | Error::ResidualTooLarge { .. } | Error::LinearAlgebra(_)))
            if opts.factorization == Factorization::Sparse && opts.dense_fallback && system.order() < DENSE_LIMIT =>
        {
            solve_with(system, opts, Factorization::Dense).map_err(|_| e)
        }
        r => r,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_mixed;
    use crate::fe_space::{MixedSpaces, StressFamily};
    use crate::mesh::{generate_square_mesh, generate_trapezoidal_mesh};
    use crate::problem::{Compliance, LameParams, LinearSolution, LoadData, ScaledLoad, TrigSolution};
    use crate::sparse::CsrMatrix;
    use std::sync::Arc;

    fn system(n: usize, d: f64, fam: StressFamily, load: &dyn LoadData) -> BlockSystem {
        let mesh = if d == 0.0 { generate_square_mesh(n) } else { generate_trapezoidal_mesh(n, d) }.unwrap();
        let sp = MixedSpaces::new(Arc::new(mesh), fam).unwrap();
        assemble_mixed(&sp, &Compliance::new(LameParams::default()), load, None).unwrap()
    }

    #[test]
    fn sparse_and_dense_agree_on_one_element() {
        let s = TrigSolution::new(LameParams::default());
        let sys = system(1, 0.0, StressFamily::Bdm1, &s);
        assert_eq!(sys.order(), 19);
        let a = solve(&sys, &SolveOptions::default()).unwrap();
        let b = solve(&sys, &SolveOptions::dense()).unwrap();
        assert_eq!((a.factorization, b.factorization), (Factorization::Sparse, Factorization::Dense));
        let scale = b.solution.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in a.solution.iter().zip(&b.solution) {
            assert!((x - y).abs() <= 1e-10 * scale.max(y.abs()), "{x} vs {y}");
        }
        assert!(a.relative_residual <= 1e-10 && b.relative_residual <= 1e-10);
    }

    #[test]
    fn zero_data_gives_zero() {
        let zero = ScaledLoad { inner: &TrigSolution::new(LameParams::default()), scale: 0.0 };
        let sys = system(2, 1.0 / 6.0, StressFamily::Rt(2), &zero);
        let r = solve(&sys, &SolveOptions::default()).unwrap();
        assert!(r.solution.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic_and_scaling_equivariant() {
        let s = TrigSolution::new(LameParams::default());
        let sys = system(4, 1.0 / 6.0, StressFamily::Rt(2), &s);
        let a = solve(&sys, &SolveOptions::default()).unwrap();
        let b = solve(&sys, &SolveOptions::default()).unwrap();
        assert_eq!(a.solution, b.solution);
        let scaled = ScaledLoad { inner: &s, scale: -3.5 };
        let sys2 = system(4, 1.0 / 6.0, StressFamily::Rt(2), &scaled);
        let c = solve(&sys2, &SolveOptions::default()).unwrap();
        let num = a.solution.iter().zip(&c.solution).map(|(x, y)| (-3.5 * x - y).powi(2)).sum::<f64>().sqrt();
        let den = c.solution.iter().map(|y| y * y).sum::<f64>().sqrt();
        assert!(num <= 1e-12 * den, "{:e}", num / den);
    }

    #[test]
    fn energy_identity() {
        let s = TrigSolution::new(LameParams::default());
        let sys = system(4, 1.0 / 6.0, StressFamily::Bdm1, &s);
        let r = solve(&sys, &SolveOptions::default()).unwrap();
        let x = &r.solution;
        let bxx: f64 = sys.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum();
        let fx: f64 = sys.rhs.iter().zip(x).map(|(a, b)| a * b).sum();
        assert!((bxx - fx).abs() <= 1e-9 * fx.abs(), "{bxx} vs {fx}");
    }

    #[test]
    fn patch_test_solution_has_exact_stress() {
        let p = LameParams::default();
        let lin = LinearSolution::patch_test(p);
        let sys = system(4, 1.0 / 6.0, StressFamily::Rt(2), &lin);
        let r = solve(&sys, &SolveOptions::default()).unwrap();
        assert!(r.relative_residual <= 1e-10);
    }

    #[test]
    fn singular_systems_are_reported() {
        let s = TrigSolution::new(LameParams::default());
        let mut sys = system(1, 0.0, StressFamily::Bdm1, &s);
        // drop the rotation coupling: the last unknown becomes free
        sys.ba = CsrMatrix::from_triplets(sys.n_q, sys.n_sigma, Vec::new());
        assert!(matches!(solve(&sys, &SolveOptions::dense()), Err(Error::SingularSystem { .. })));
        assert!(solve(&sys, &SolveOptions::default()).is_err());
    }
}
