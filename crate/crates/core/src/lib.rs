//! Solvers for semilinear time-fractional diffusion-wave equations
//! `D_t^alpha u = nu^2 Laplace(u) + f(u, x, t)`, `1 < alpha < 2`, on rectangles.
//!
//! The equation is reduced to a pair of order-`alpha/2` equations for the
//! shifted unknown `u - t u_t(0)` and its half-order derivative, which are
//! discretised with the nonuniform L1 or Alikhanov formulas, a five-point
//! Laplacian, and a linearised implicit reaction term.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod error;
pub mod history;
pub mod kernels;
pub mod mesh;
pub mod problems;
pub mod quadrature;
pub mod scalar;
pub mod soe;
pub mod spatial;
pub mod stepper;
pub mod verify;

pub use adaptive::{AdaptiveConfig, AdaptiveRecord, KeepPolicy};
pub use error::{Error, Result};
pub use history::{CaputoHistory, DirectHistory};
pub use kernels::{KernelRow, KernelTable, SchemeKind};
pub use mesh::{Tail, TemporalMesh};
pub use problems::ProblemSpec;
pub use scalar::Scalar;
pub use soe::{build_soe, FastHistory, SoeApproximation};
pub use spatial::{Grid2D, GridField, HelmholtzSolver, Norms};
pub use stepper::{run, KernelMode, SforSolver, SolverConfig, Trajectory};

/// Double-precision mesh.
pub type Mesh = TemporalMesh<f64>;

/// Double-precision sum-of-exponentials approximation.
pub type Soe = SoeApproximation<f64>;

/// Double-precision grid.
pub type Grid = Grid2D<f64>;

/// Double-precision grid field.
pub type Field = GridField<f64>;

/// Double-precision problem definition.
pub type Problem = ProblemSpec<f64>;

/// Double-precision solver.
pub type Solver = SforSolver<f64>;
