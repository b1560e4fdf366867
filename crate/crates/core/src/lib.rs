//! Compatible finite element solver for the rotating shallow water equations.
//!
//! The discretisation uses the (CG3, BDM2, DG1) de Rham complex on periodic
//! planar and icosahedral spherical meshes. The equations are written in
//! almost-Poisson bracket form; four energy-conserving variants (with and
//! without upwinding of depth and velocity) and one non-conserving reference
//! variant are provided, together with an energy-conserving Poisson time
//! integrator driven by a Picard iteration.

pub mod assembly;
pub mod diagnostics;
pub mod error;
pub mod fem;
pub mod mesh;
pub mod oracle;
pub mod output;
pub mod scenarios;
pub mod swe;
pub mod time;
pub mod verify;

pub use error::{Error, Result};
