use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use quadelas::experiments::{
    run_convergence, run_diagnostics, run_locking, write_csv, write_locking_csv, write_locking_markdown, write_markdown,
    DiagnosticsOptions, DEFAULT_POISSON_SWEEP, YOUNG_MODULUS,
};
use quadelas::mesh::{mesh_quality, DEFAULT_DISTORTION};
use quadelas::solver::SolveOptions;
use quadelas::{LameParams, MeshFamily, RunConfig, SolutionKind, StressFamily};

#[derive(Parser)]
#[command(name = "quadelas", version, about = "Mixed elasticity elements with weak symmetry on quadrilateral meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Error table with observed orders over a sequence of meshes.
    Convergence {
        #[command(flatten)]
        disc: Discretization,
        #[command(flatten)]
        material: Material,
        #[command(flatten)]
        output: Output,
    },
    /// Errors against total unknowns for several Poisson ratios at fixed E.
    Locking {
        #[command(flatten)]
        disc: Discretization,
        #[arg(long = "E", default_value_t = YOUNG_MODULUS)]
        young: f64,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_POISSON_SWEEP)]
        nu: Vec<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Stability and conformity checks with measured residuals.
    Diagnostics {
        #[command(flatten)]
        disc: Discretization,
        #[command(flatten)]
        material: Material,
        /// Seed for the random coefficient vectors.
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Flip one edge dof sign on element 0 before the jump check.
        #[arg(long, hide = true)]
        corrupt_sign: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a generated mesh in the plain-text mesh format.
    Mesh {
        #[arg(long, value_enum, default_value_t = MeshKind::Square)]
        mesh: MeshKind,
        #[arg(long, default_value_t = DEFAULT_DISTORTION)]
        distortion: f64,
        #[arg(short, long, default_value_t = 4)]
        n: usize,
        /// Print h and the shape-regularity constant to stderr.
        #[arg(long)]
        quality: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MeshKind {
    Square,
    Trapezoid,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Md,
}

#[derive(Args)]
struct Discretization {
    /// rt2, rt3, ... or bdm1
    #[arg(long)]
    element: Option<StressFamily>,
    #[arg(long, value_enum)]
    mesh: Option<MeshKind>,
    /// Trapezoid distortion d in [0, 1/2).
    #[arg(long, default_value_t = DEFAULT_DISTORTION)]
    distortion: f64,
    /// Comma-separated n values, each double the previous.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    /// Assembly quadrature order (points per direction).
    #[arg(long)]
    quad: Option<usize>,
    /// Error quadrature order.
    #[arg(long)]
    error_quad: Option<usize>,
    /// Manufactured solution: trig or solenoidal.
    #[arg(long, default_value = "trig")]
    solution: SolutionKind,
    /// Use the dense LU instead of the sparse one.
    #[arg(long)]
    dense: bool,
}

#[derive(Args)]
struct Material {
    #[arg(long, requires = "mu", conflicts_with_all = ["young", "nu"])]
    lambda: Option<f64>,
    #[arg(long, requires = "lambda")]
    mu: Option<f64>,
    #[arg(long = "E", id = "young", requires = "nu")]
    young: Option<f64>,
    #[arg(long, requires = "young")]
    nu: Option<f64>,
}

#[derive(Args)]
struct Output {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Defaults {
    element: StressFamily,
    mesh: MeshKind,
    levels: &'static [usize],
}

enum Failure {
    Solver(String),
    Config(String),
}

impl From<quadelas::Error> for Failure {
    fn from(e: quadelas::Error) -> Self {
        if e.is_solver_failure() {
            Failure::Solver(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

impl Material {
    fn params(&self) -> Result<LameParams, Failure> {
        Ok(match (self.lambda, self.mu, self.young, self.nu) {
            (Some(lambda), Some(mu), _, _) => LameParams::new(mu, lambda)?,
            (_, _, Some(e), Some(nu)) => LameParams::from_young_poisson(e, nu)?,
            _ => LameParams::default(),
        })
    }
}

impl Discretization {
    fn config(&self, d: Defaults, params: LameParams) -> RunConfig {
        let mesh = match self.mesh.unwrap_or(d.mesh) {
            MeshKind::Square => MeshFamily::Square,
            MeshKind::Trapezoid => MeshFamily::Trapezoid(self.distortion),
        };
        RunConfig {
            family: self.element.unwrap_or(d.element),
            mesh,
            levels: self.levels.clone().unwrap_or_else(|| d.levels.to_vec()),
            params,
            solution: self.solution,
            quad_order: self.quad,
            error_order: self.error_quad,
            solver: if self.dense { SolveOptions::dense() } else { SolveOptions::default() },
            ..RunConfig::default()
        }
    }
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?)),
        None => Box::new(io::stdout().lock()),
    })
}

const FULL: &[usize] = &[2, 4, 8, 16, 32, 64];

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Convergence { disc, material, output } => {
            let d = Defaults { element: StressFamily::Rt(2), mesh: MeshKind::Square, levels: FULL };
            let config = disc.config(d, material.params()?);
            let run = run_convergence(&config)?;
            for l in &run.levels {
                eprintln!(
                    "n={:<3} unknowns={:<7} residual={:.1e} equilibrium={:.1e} time={:.2}s",
                    l.n,
                    l.total_dofs,
                    l.residual,
                    l.equilibrium.relative,
                    l.elapsed.as_secs_f64()
                );
            }
            let rows: Vec<_> = run.levels.iter().map(|l| l.report).collect();
            let orders = run.table.as_ref().map(|t| t.orders.as_slice());
            let mut w = sink(&output.out)?;
            match output.format {
                Format::Csv => write_csv(&rows, orders, &mut w)?,
                Format::Md => write_markdown(&rows, orders, &mut w)?,
            }
            w.flush()?;
        }
        Command::Locking { disc, young, nu, output } => {
            let d = Defaults { element: StressFamily::Bdm1, mesh: MeshKind::Trapezoid, levels: FULL };
            let config = disc.config(d, LameParams::default());
            let rows = run_locking(&config, young, &nu)?;
            let mut w = sink(&output.out)?;
            match output.format {
                Format::Csv => write_locking_csv(&rows, &mut w)?,
                Format::Md => write_locking_markdown(&rows, &mut w)?,
            }
            w.flush()?;
        }
        Command::Diagnostics { disc, material, seed, corrupt_sign, out } => {
            let d = Defaults { element: StressFamily::Rt(2), mesh: MeshKind::Square, levels: &[2, 4] };
            let config = RunConfig { seed, ..disc.config(d, material.params()?) };
            let report = run_diagnostics(&config, DiagnosticsOptions { corrupt_sign })?;
            let mut w = sink(&out)?;
            report.write_text(&mut w)?;
            let failed = report.checks.iter().filter(|c| !c.passed).count();
            writeln!(w, "{} checks, {failed} failed", report.checks.len())?;
            w.flush()?;
        }
        Command::Mesh { mesh, distortion, n, quality, out } => {
            let family = match mesh {
                MeshKind::Square => MeshFamily::Square,
                MeshKind::Trapezoid => MeshFamily::Trapezoid(distortion),
            };
            if let MeshFamily::Trapezoid(d) = family {
                if !(0.0..0.5).contains(&d) {
                    return Err(Failure::Config(format!("distortion must lie in [0, 1/2), got {d}")));
                }
            }
            let m = family.build(n)?;
            if quality {
                let q = mesh_quality(&m);
                eprintln!("quads={} edges={} h={:.6} shape_regularity={:.6}", m.n_quads(), m.n_edges(), q.h_max, q.shape_regularity);
            }
            let mut w = sink(&out)?;
            m.write_to(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Solver(msg)) => {
            eprintln!("error: solver failure: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
