//! Numerical laboratory for the energy-critical wave equation around the
//! ground state soliton `W`.

pub mod angular;
pub mod currents;
pub mod error;
pub mod evolution;
pub mod foliation;
pub mod grid;
pub mod linalg;
pub mod modelops;
pub mod scattering;
pub mod soliton;
pub mod spectral;
pub mod taylor;

pub use error::{Error, Result};
pub use grid::{integrate, GridKind, ModeField, RadialGrid};
pub use soliton::{eval_soliton, SolitonKind, SupercriticalProfile};
