//! Convergence, locking and diagnostics runs with CSV/markdown output.

use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{
    check_commuting_projection, compute_errors, default_error_order, divergence_kernel_check, equilibrium_residual,
    exact_norms, identity_residual, infsup_estimate, normal_jumps, rotation_orthogonality, ConvergenceTable,
    DiscreteSolution, ErrorReport, ExactNorms, Residual, INFSUP_LIMIT,
};
use crate::assembly::{assemble_mixed, BlockSystem};
use crate::error::{Error, Result};
use crate::fe_space::{FEFunction, MixedSpaces, PhysicalField, StressFamily};
use crate::mesh::{generate_square_mesh, generate_trapezoidal_mesh, Point2, QuadMesh, DEFAULT_DISTORTION};
use crate::problem::{Compliance, ExactSolution, LameParams, LinearSolution, Manufactured, SolutionKind};
use crate::solver::{solve, SolveOptions, SolveReport};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MeshFamily {
    Square,
    /// Zigzag trapezoids with vertical distortion `d·h`.
    Trapezoid(f64),
}

impl MeshFamily {
    pub fn build(self, n: usize) -> Result<QuadMesh> {
        match self {
            MeshFamily::Square => generate_square_mesh(n),
            MeshFamily::Trapezoid(d) => generate_trapezoidal_mesh(n, d),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MeshFamily::Square => "square",
            MeshFamily::Trapezoid(_) => "trapezoid",
        }
    }
}

impl Default for MeshFamily {
    fn default() -> Self {
        MeshFamily::Trapezoid(DEFAULT_DISTORTION)
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub family: StressFamily,
    pub mesh: MeshFamily,
    pub levels: Vec<usize>,
    pub params: LameParams,
    pub solution: SolutionKind,
    pub skew_factor: Option<f64>,
    /// Assembly quadrature; `None` picks the default for the element and mesh.
    pub quad_order: Option<usize>,
    pub error_order: Option<usize>,
    pub solver: SolveOptions,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            family: StressFamily::Rt(2),
            mesh: MeshFamily::Square,
            levels: vec![2, 4, 8, 16, 32, 64],
            params: LameParams::default(),
            solution: SolutionKind::Trig,
            skew_factor: None,
            quad_order: None,
            error_order: None,
            solver: SolveOptions::default(),
            seed: 2024,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::InvalidParameter("no mesh levels given".into()));
        }
        if self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(format!("levels must be strictly increasing: {:?}", self.levels)));
        }
        if self.levels.windows(2).any(|w| w[1] != 2 * w[0]) {
            return Err(Error::InvalidParameter(format!("levels must double from one to the next: {:?}", self.levels)));
        }
        let min = if matches!(self.mesh, MeshFamily::Trapezoid(_)) { 2 } else { 1 };
        if self.levels[0] < min {
            return Err(Error::InvalidParameter(format!("{} meshes need n >= {min}", self.mesh.name())));
        }
        if let MeshFamily::Trapezoid(d) = self.mesh {
            if !(0.0..0.5).contains(&d) {
                return Err(Error::InvalidParameter(format!("distortion must lie in [0, 1/2), got {d}")));
            }
        }
        if matches!(self.quad_order, Some(0)) || matches!(self.error_order, Some(0)) {
            return Err(Error::InvalidParameter("quadrature order must be >= 1".into()));
        }
        self.family.reference_element()?;
        self.compliance()?;
        Ok(())
    }

    pub fn compliance(&self) -> Result<Compliance> {
        match self.skew_factor {
            Some(s) => Compliance::with_skew_factor(self.params, s),
            None => Ok(Compliance::new(self.params)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LevelResult {
    pub n: usize,
    pub total_dofs: usize,
    pub report: ErrorReport,
    pub equilibrium: Residual,
    pub residual: f64,
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub struct ConvergenceRun {
    pub config: RunConfig,
    pub norms: ExactNorms,
    pub levels: Vec<LevelResult>,
    /// `None` for a single level.
    pub table: Option<ConvergenceTable>,
}

impl ConvergenceRun {
    pub fn rows(&self) -> Vec<ErrorReport> {
        self.levels.iter().map(|l| l.report).collect()
    }
}

struct Solved {
    spaces: MixedSpaces,
    system: BlockSystem,
    report: SolveReport,
}

fn solve_level(config: &RunConfig, n: usize, exact: &Manufactured) -> Result<Solved> {
    let mesh = Arc::new(config.mesh.build(n)?);
    let spaces = MixedSpaces::new(mesh, config.family)?;
    let system = assemble_mixed(&spaces, &config.compliance()?, exact, config.quad_order)?;
    let report = solve(&system, &config.solver)?;
    Ok(Solved { spaces, system, report })
}

fn at_level<T>(n: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::AtLevel { n, source: Box::new(e) })
}

/// One solve per level of the smooth manufactured problem. The table's `h`
/// is `1/n`.
pub fn run_convergence(config: &RunConfig) -> Result<ConvergenceRun> {
    config.validate()?;
    let exact = config.solution.build(config.params);
    let norms = exact_norms(&exact);
    let mut levels = Vec::with_capacity(config.levels.len());
    for &n in &config.levels {
        let start = Instant::now();
        let level = at_level(n, (|| {
            let s = solve_level(config, n, &exact)?;
            let sol = DiscreteSolution::from_report(&s.spaces, &s.system, &s.report);
            let k = config.error_order.unwrap_or_else(|| default_error_order(&s.spaces));
            let mut report = compute_errors(&sol, &exact, &norms, k)?;
            report.h = 1.0 / n as f64;
            let equilibrium = equilibrium_residual(&sol, &exact, s.system.load_order)?;
            Ok(LevelResult {
                n,
                total_dofs: s.system.order(),
                report,
                equilibrium,
                residual: s.report.relative_residual,
                elapsed: Duration::ZERO,
            })
        })())?;
        levels.push(LevelResult { elapsed: start.elapsed(), ..level });
    }
    let rows: Vec<ErrorReport> = levels.iter().map(|l| l.report).collect();
    let table = if rows.len() >= 2 { Some(ConvergenceTable::new(rows)?) } else { None };
    Ok(ConvergenceRun { config: config.clone(), norms, levels, table })
}

pub const YOUNG_MODULUS: f64 = 1000.0;
pub const DEFAULT_POISSON_SWEEP: [f64; 4] = [0.3, 0.49, 0.499, 0.4999];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LockingRow {
    pub nu: f64,
    pub n: usize,
    pub total_dofs: usize,
    pub e_sigma: f64,
    pub e_u: f64,
    /// Relative errors (fractions of the exact norms).
    pub rel_sigma: f64,
    pub rel_u: f64,
    /// Relative discrete equilibrium residual of the level.
    pub equilibrium: f64,
}

/// Convergence runs for each Poisson ratio at Young's modulus `e`; the
/// material in `config` is replaced.
pub fn run_locking(config: &RunConfig, e: f64, nus: &[f64]) -> Result<Vec<LockingRow>> {
    if nus.is_empty() {
        return Err(Error::InvalidParameter("no Poisson ratios given".into()));
    }
    let mut rows = Vec::new();
    for &nu in nus {
        let params = LameParams::from_young_poisson(e, nu)?;
        let run = run_convergence(&RunConfig { params, ..config.clone() })?;
        for l in &run.levels {
            rows.push(LockingRow {
                nu,
                n: l.n,
                total_dofs: l.total_dofs,
                e_sigma: l.report.e_sigma,
                e_u: l.report.e_u,
                rel_sigma: l.report.e_sigma / run.norms.sigma,
                rel_u: l.report.e_u / run.norms.u,
                equilibrium: l.equilibrium.relative,
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value <= threshold }
    }

    fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value >= threshold }
    }
}

#[derive(Clone, Debug, Default)]
pub struct DiagnosticsReport {
    pub checks: Vec<Check>,
}

impl DiagnosticsReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn write_text(&self, mut w: impl Write) -> std::io::Result<()> {
        for c in &self.checks {
            let verdict = if c.passed { "pass" } else { "FAIL" };
            writeln!(w, "{verdict}  {:<40} {:>12.3e}  (threshold {:.1e})", c.name, c.value, c.threshold)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct DiagnosticsOptions {
    /// Flip the sign of one interior-edge dof before the jump check.
    pub corrupt_sign: bool,
}

/// Property checks per level; failures are recorded, not returned as errors.
/// Inf-sup and kernel checks run only below the dense limit.
pub fn run_diagnostics(config: &RunConfig, options: DiagnosticsOptions) -> Result<DiagnosticsReport> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut checks = Vec::new();
    let exact = config.solution.build(config.params);
    let compliance = config.compliance()?;
    let el = config.family.reference_element()?;
    checks.push(Check::at_most(format!("unisolvence {}", config.family.name()), el.unisolvence_residual(), 1e-12));
    let mut infsup = Vec::new();
    for &n in &config.levels {
        let tag = |what: &str| format!("{what} n={n}");
        let mesh = Arc::new(config.mesh.build(n)?);
        let mut spaces = MixedSpaces::new(mesh.clone(), config.family)?;
        if options.corrupt_sign && mesh.n_quads() > 1 {
            let m = spaces.stress.element().edge_moments();
            spaces.stress.flip_dof_sign(0, spaces.stress.element().edge_dof(1, m - 1));
        }
        let r = config.family.order();
        let k = r + 6;

        let tau = FEFunction::new(&spaces.stress, (0..spaces.stress.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect());
        checks.push(Check::at_most(tag("normal jump (relative)"), normal_jumps(&tau, k)?.relative, 1e-10));
        checks.push(Check::at_most(tag("identity representability"), identity_residual(&spaces.stress, k)?, 1e-10));

        let value = |x: Point2| exact.sigma(x);
        let div = |x: Point2| exact.div_sigma(x);
        let s5 = check_commuting_projection(&spaces, &PhysicalField::new(&value, &div), 12)?;
        checks.push(Check::at_most(tag("commuting projection (relative)"), s5.relative, 1e-10));

        let lin = LinearSolution::patch_test(config.params);
        let sys = assemble_mixed(&spaces, &compliance, &lin, config.quad_order)?;
        match solve(&sys, &config.solver) {
            Ok(rep) => {
                let sol = DiscreteSolution::from_report(&spaces, &sys, &rep);
                let e = compute_errors(&sol, &lin, &exact_norms(&lin), k)?;
                // P0 displacements cannot hold the linear u
                let graded = if matches!(config.family, StressFamily::Bdm1) { vec![e.e_sigma, e.e_div, e.e_p] } else { e.errors().to_vec() };
                checks.push(Check::at_most(tag("patch test max error"), graded.into_iter().fold(0.0, f64::max), 1e-9));
            }
            Err(_) => checks.push(Check::at_most(tag("patch test max error"), f64::INFINITY, 1e-9)),
        }

        let sys = assemble_mixed(&spaces, &compliance, &exact, config.quad_order)?;
        match solve(&sys, &config.solver) {
            Ok(rep) => {
                let sol = DiscreteSolution::from_report(&spaces, &sys, &rep);
                checks.push(Check::at_most(tag("equilibrium (relative)"), equilibrium_residual(&sol, &exact, sys.load_order)?.relative, 1e-9));
                checks.push(Check::at_most(tag("rotation orthogonality"), rotation_orthogonality(&sol, k)?, 1e-9));
            }
            Err(_) => checks.push(Check::at_most(tag("solve"), f64::INFINITY, 0.0)),
        }
        if sys.order() <= INFSUP_LIMIT {
            let (_, worst) = divergence_kernel_check(&spaces, &sys, k)?;
            checks.push(Check::at_most(tag("divergence kernel ‖div τ‖²"), worst, 1e-18));
            let c = infsup_estimate(&spaces, &sys, k)?;
            checks.push(Check::at_least(tag("inf-sup estimate"), c, 1e-8));
            infsup.push(c);
        }
    }
    if infsup.len() >= 2 {
        let (lo, hi) = infsup.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &c| (a.min(c), b.max(c)));
        checks.push(Check::at_most("inf-sup variation across levels", (hi - lo) / hi, 0.2));
    }
    Ok(DiagnosticsReport { checks })
}

pub const CSV_HEADER: &str = "h,e_sigma,pct_sigma,ord_sigma,e_div,pct_div,ord_div,e_u,pct_u,ord_u,e_p,pct_p,ord_p";

pub fn write_csv(rows: &[ErrorReport], orders: Option<&[[f64; 4]]>, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for (i, r) in rows.iter().enumerate() {
        let ord = if i == 0 { None } else { orders.and_then(|o| o.get(i - 1)) };
        write!(w, "{}", r.h)?;
        for q in 0..4 {
            let o = ord.map(|o| format!("{:.4}", o[q])).unwrap_or_default();
            write!(w, ",{:.6e},{:.4},{o}", r.errors()[q], r.percents()[q])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn format_h(h: f64) -> String {
    let inv = 1.0 / h;
    if (inv - inv.round()).abs() < 1e-9 {
        format!("1/{}", inv.round())
    } else {
        format!("{h:.4}")
    }
}

/// Columns error, %, order for σ, div σ, u, p.
pub fn write_markdown(rows: &[ErrorReport], orders: Option<&[[f64; 4]]>, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "| h | ‖σ−σ_h‖ | % | order | ‖div(σ−σ_h)‖ | % | order | ‖u−u_h‖ | % | order | ‖p−p_h‖ | % | order |")?;
    writeln!(w, "|---|---|---|---|---|---|---|---|---|---|---|---|---|")?;
    for (i, r) in rows.iter().enumerate() {
        let ord = if i == 0 { None } else { orders.and_then(|o| o.get(i - 1)) };
        write!(w, "| {} ", format_h(r.h))?;
        for q in 0..4 {
            let o = ord.map(|o| format!("{:.1}", o[q])).unwrap_or_default();
            write!(w, "| {:.2e} | {:.2} | {o} ", r.errors()[q], r.percents()[q])?;
        }
        writeln!(w, "|")?;
    }
    Ok(())
}

pub const LOCKING_CSV_HEADER: &str = "nu,n,total_dofs,e_sigma,e_u";

pub fn write_locking_csv(rows: &[LockingRow], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{LOCKING_CSV_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{},{:.6e},{:.6e}", r.nu, r.n, r.total_dofs, r.e_sigma, r.e_u)?;
    }
    Ok(())
}

pub fn write_locking_markdown(rows: &[LockingRow], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "| ν | n | dofs | ‖σ−σ_h‖ | rel. | ‖u−u_h‖ | rel. |")?;
    writeln!(w, "|---|---|---|---|---|---|---|")?;
    for r in rows {
        writeln!(
            w,
            "| {} | {} | {} | {:.3e} | {:.3e} | {:.3e} | {:.3e} |",
            r.nu, r.n, r.total_dofs, r.e_sigma, r.rel_sigma, r.e_u, r.rel_u
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(family: StressFamily, mesh: MeshFamily) -> RunConfig {
        RunConfig { family, mesh, levels: vec![2, 4], ..RunConfig::default() }
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::default().validate().is_ok());
        for levels in [vec![], vec![4, 2], vec![2, 6], vec![2, 2]] {
            assert!(RunConfig { levels, ..RunConfig::default() }.validate().is_err());
        }
        let trap1 = RunConfig { mesh: MeshFamily::Trapezoid(0.1), levels: vec![1, 2], ..RunConfig::default() };
        assert!(trap1.validate().is_err());
        let bad_d = RunConfig { mesh: MeshFamily::Trapezoid(0.5), ..RunConfig::default() };
        assert!(bad_d.validate().is_err());
        let sq1 = RunConfig { levels: vec![1, 2], ..RunConfig::default() };
        assert!(sq1.validate().is_ok());
    }

    #[test]
    fn csv_layout() {
        let run = run_convergence(&small(StressFamily::Bdm1, MeshFamily::Square)).unwrap();
        let table = run.table.as_ref().unwrap();
        let mut buf = Vec::new();
        write_csv(&table.rows, Some(&table.orders), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 3);
        let first: Vec<&str> = lines[1].split(',').collect();
        let second: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(first.len(), 13);
        assert_eq!(first[0], "0.5");
        assert!([3, 6, 9, 12].iter().all(|&i| first[i].is_empty()));
        assert!([3, 6, 9, 12].iter().all(|&i| second[i].parse::<f64>().is_ok()));

        let mut again = Vec::new();
        let run2 = run_convergence(&small(StressFamily::Bdm1, MeshFamily::Square)).unwrap();
        let t2 = run2.table.as_ref().unwrap();
        write_csv(&t2.rows, Some(&t2.orders), &mut again).unwrap();
        assert_eq!(text.as_bytes(), &again[..]);

        let mut md = Vec::new();
        write_markdown(&table.rows, Some(&table.orders), &mut md).unwrap();
        let md = String::from_utf8(md).unwrap();
        assert!(md.lines().nth(2).unwrap().starts_with("| 1/2 |"));
        assert_eq!(md.lines().nth(3).unwrap().matches('|').count(), 14);
    }

    #[test]
    fn locking_rows() {
        let cfg = RunConfig { family: StressFamily::Bdm1, mesh: MeshFamily::Trapezoid(DEFAULT_DISTORTION), levels: vec![2], ..RunConfig::default() };
        let rows = run_locking(&cfg, YOUNG_MODULUS, &[0.0, 0.3]).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.e_u.is_finite() && r.rel_u > 0.0));
        assert!(run_locking(&cfg, YOUNG_MODULUS, &[0.5]).is_err());
        let mut buf = Vec::new();
        write_locking_csv(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("nu,n,total_dofs,e_sigma,e_u\n0,2,"));
    }

    #[test]
    fn diagnostics_pass_and_detect_corruption() {
        let rep = run_diagnostics(&RunConfig { levels: vec![2], ..small(StressFamily::Rt(2), MeshFamily::Square) }, DiagnosticsOptions::default()).unwrap();
        assert!(rep.all_passed(), "{:?}", rep.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>());
        let bad = run_diagnostics(
            &RunConfig { levels: vec![2], ..small(StressFamily::Rt(2), MeshFamily::Square) },
            DiagnosticsOptions { corrupt_sign: true },
        )
        .unwrap();
        let jump = bad.checks.iter().find(|c| c.name.starts_with("normal jump")).unwrap();
        assert!(!jump.passed);
    }
}
