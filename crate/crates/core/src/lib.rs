//! Localized orthogonal decomposition (LOD) for the heterogeneous Helmholtz
//! equation `-div(A grad u) - k^2 u = f` on the unit square with the Robin
//! condition `A grad u . n - i k u = 0`.
//!
//! The pipeline is: structured meshes ([`mesh`]), a piecewise constant
//! coefficient ([`coefficient`]), fine-scale P1 operators ([`assembly`]),
//! the quasi-interpolation ([`interpolation`]), patch correctors
//! ([`correctors`]), the coarse Petrov-Galerkin system ([`lod`]) and error
//! studies ([`analysis`]). [`experiments`] wires these into the batch
//! commands behind the `lodhelm` binary.

pub mod analysis;
pub mod assembly;
pub mod cache;
pub mod coefficient;
pub mod config;
pub mod correctors;
pub mod error;
pub mod experiments;
pub mod interpolation;
pub mod linalg;
pub mod lod;
pub mod mesh;
pub mod problem;
pub mod sparse;

pub use analysis::{convergence_study, norm, relative_error, ErrorReport, Method, NormKind};
pub use coefficient::{build_coefficient, Coefficient, GeometryKind, GeometrySpec};
pub use correctors::{compute_corrector, CorrectorOptions, GlobalCorrector, SaddleStrategy};
pub use error::{LodError, Result};
pub use interpolation::{InterpolantKind, InterpolationNodes};
pub use lod::{assemble_lod, solve_lod, LodSolution, LodSystem};
pub use mesh::StructuredTriMesh;
pub use problem::{CoarseSpace, FineProblem};
pub use sparse::{CsrMatrix, C64};
