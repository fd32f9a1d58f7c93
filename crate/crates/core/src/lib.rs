//! Minimal symmetric-stress mixed finite elements for linear elasticity on
//! uniform n-rectangular grids of the unit box.
//!
//! The stress space uses face values for the normal components and a
//! redundant four-member frame of nonconforming linear functions per cell
//! for each shear pair; displacements are piecewise constant. The crate
//! assembles the Hellinger–Reissner saddle system, solves it with
//! preconditioned MINRES, and provides the error norms, convergence sweeps
//! and dense stability certificates used to validate the element.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix `f64`.

pub mod assembly;
pub mod convergence;
pub mod dense;
pub mod error;
pub mod grid;
pub mod physics;
pub mod reference;
pub mod scalar;
pub mod solver;
pub mod spaces;
pub mod sparse;
pub mod verify;
pub mod vtk;

pub use error::{Error, Result};
pub use grid::{EntityKind, TensorGrid};
pub use physics::Problem;
pub use scalar::Real;

pub type SaddleSystem = assembly::SaddleSystem<f64>;
pub type StressField = spaces::StressField<f64>;
pub type DisplacementField = spaces::DisplacementField<f64>;
pub type IsotropicMaterial = physics::IsotropicMaterial<f64>;
pub type ManufacturedSolution = physics::ManufacturedSolution<f64>;
pub type SymTensor = physics::SymTensor<f64>;
pub type Solution = solver::Solution<f64>;
