//! Energy-conserving Poisson time integrator, the midpoint alternative, and
//! the Picard iteration that solves both.

pub mod averages;
pub mod integrator;
pub mod picard;
pub mod residual;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use averages::{time_averaged_variations, TimeAverages};
pub use integrator::{midpoint_step, poisson_step, Integrator, StepReport};
pub use picard::{picard_iteration, LinearisedJacobian};
pub use residual::{residual, residual_explicit, residual_implicit, Residual};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Discrete-gradient (time-averaged) variations; conserves energy.
    Poisson,
    /// Variations at the midpoint state.
    Midpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PicardMode {
    Explicit,
    Implicit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub mode: PicardMode,
    /// Maximum number of Picard updates per step.
    pub picard_iterations: usize,
    /// Stop early once the relative residual drops below this value.
    pub picard_tol: Option<f64>,
    /// Reference depth of the linearised Jacobian.
    pub reference_height: f64,
}

impl StepConfig {
    pub fn new(dt: f64, reference_height: f64) -> Self {
        StepConfig {
            dt,
            scheme: Scheme::Poisson,
            mode: PicardMode::Explicit,
            picard_iterations: 4,
            picard_tol: None,
            reference_height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.picard_iterations == 0 {
            return Err(Error::Config("at least one Picard iteration is required".into()));
        }
        if !(self.reference_height > 0.0) {
            return Err(Error::Config(format!("reference height must be positive, got {}", self.reference_height)));
        }
        if let Some(t) = self.picard_tol {
            if !(t >= 0.0) {
                return Err(Error::Config(format!("Picard tolerance must be non-negative, got {t}")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Poisson => "poisson",
            Scheme::Midpoint => "midpoint",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "poisson" => Ok(Scheme::Poisson),
            "midpoint" => Ok(Scheme::Midpoint),
            _ => Err(Error::Config(format!("unknown scheme '{s}'"))),
        }
    }
}

impl fmt::Display for PicardMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PicardMode::Explicit => "explicit",
            PicardMode::Implicit => "implicit",
        })
    }
}

impl FromStr for PicardMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "explicit" => Ok(PicardMode::Explicit),
            "implicit" => Ok(PicardMode::Implicit),
            _ => Err(Error::Config(format!("unknown Picard mode '{s}'"))),
        }
    }
}
