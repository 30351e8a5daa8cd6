//! Mixed finite elements for planar linear elasticity with weakly imposed
//! stress symmetry on convex quadrilateral meshes.

pub mod analysis;
pub mod assembly;
pub mod dense;
pub mod error;
pub mod experiments;
pub mod fe_space;
pub mod mapping;
pub mod mesh;
pub mod poly;
pub mod problem;
pub mod reference_elements;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
pub use mapping::{BilinearMap, Mat2, QuadratureRule, Vec2};
pub use mesh::{MeshQuality, Point2, QuadMesh};

pub use analysis::{ConvergenceTable, DiscreteSolution, ErrorReport};
pub use assembly::BlockSystem;
pub use experiments::{MeshFamily, RunConfig};
pub use fe_space::{FEFunction, FESpace, MixedSpaces, StressFamily};
pub use problem::{Compliance, ExactSolution, LameParams, LoadData, SolenoidalSolution, SolutionKind, TrigSolution};
pub use solver::{SolveOptions, SolveReport};
