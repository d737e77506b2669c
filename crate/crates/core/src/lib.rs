//! Radial simulator for the semilinear Klein-Gordon equation on a de Sitter
//! background,
//!
//! ```text
//! φ_tt + 3H φ_t - e^{-2Ht} Δφ + f(φ) = 0,   f = F',
//! ```
//!
//! together with the virial functionals and potential audits used to check
//! local energy decay numerically.
//!
//! The numerical core is generic over [`Real`] (`f32`/`f64`); the aliases at
//! the crate root fix the usual `f64` instantiation.

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod potentials;
pub mod scalar;
pub mod virials;

pub use error::{Error, Result};
pub use potentials::{Family, PotentialSpec, TheoremClass};
pub use scalar::Real;

pub type Grid = grid::RadialGrid<f64>;
pub type Weights = grid::WeightTables<f64>;
pub type State = dynamics::FieldState<f64>;
pub type Fields = dynamics::Profiles<f64>;
pub type Solver = dynamics::SolverConfig<f64>;
pub type Integrator = dynamics::Rk4<f64>;
pub type Cone = virials::ConeWeight<f64>;
pub type Sample = virials::VirialSample<f64>;
