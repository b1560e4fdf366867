//! Rotating shallow water operators in almost-Poisson bracket form.

pub mod bracket;
pub mod hamiltonian;
pub mod operators;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::assembly::{Discretisation, Field, SpaceId};
use crate::error::{Error, Result};
use crate::mesh::Point;

pub use bracket::{bracket, bracket_rhs, tendency, BracketInputs, RhsVectors};
pub use hamiltonian::{energy, mass, potential_vorticity, recover_velocity, variations, WeightedMass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BracketVariant {
    /// Centred bracket with potential vorticity flux.
    Original,
    /// Upwinded depth, centred vorticity flux.
    DUpwind,
    /// Upwinded depth and velocity.
    FullUpwind,
    /// Upwinded velocity, centred depth.
    UUpwindOnly,
    /// Upwinded but not energy conserving.
    NonEc,
}

impl BracketVariant {
    pub const ALL: [BracketVariant; 5] = [
        BracketVariant::Original,
        BracketVariant::DUpwind,
        BracketVariant::FullUpwind,
        BracketVariant::UUpwindOnly,
        BracketVariant::NonEc,
    ];

    pub fn is_energy_conserving(self) -> bool {
        self != BracketVariant::NonEc
    }

    /// True when the vorticity flux uses the diagnosed potential vorticity.
    pub fn uses_pv(self) -> bool {
        matches!(self, BracketVariant::Original | BracketVariant::DUpwind)
    }

    pub fn name(self) -> &'static str {
        match self {
            BracketVariant::Original => "original",
            BracketVariant::DUpwind => "d_upwind",
            BracketVariant::FullUpwind => "full_upwind",
            BracketVariant::UUpwindOnly => "u_upwind_only",
            BracketVariant::NonEc => "non_ec",
        }
    }
}

impl fmt::Display for BracketVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BracketVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        BracketVariant::ALL
            .into_iter()
            .find(|v| v.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown bracket variant '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coriolis {
    Constant(f64),
    /// `f = 2 Omega z / a`.
    Rotating { omega: f64, radius: f64 },
}

impl Coriolis {
    pub fn at(&self, x: &Point) -> f64 {
        match *self {
            Coriolis::Constant(f) => f,
            Coriolis::Rotating { omega, radius } => 2.0 * omega * x.z / radius,
        }
    }
}

/// Discretisation plus the physical parameters of a problem.
pub struct Model {
    pub disc: Arc<Discretisation>,
    pub gravity: f64,
    pub coriolis: Coriolis,
    pub topography: Field,
    /// Coriolis parameter at the volume quadrature points.
    pub f_qp: Vec<f64>,
    /// Topography at the volume quadrature points.
    pub b_qp: Vec<f64>,
}

impl fmt::Debug for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Model").field("disc", &self.disc).field("gravity", &self.gravity).field("coriolis", &self.coriolis).finish()
    }
}

impl Model {
    pub fn new(disc: Arc<Discretisation>, gravity: f64, coriolis: Coriolis, topography: Option<Field>) -> Result<Self> {
        if !(gravity > 0.0) {
            return Err(Error::Config(format!("gravity must be positive, got {gravity}")));
        }
        let topography = match topography {
            Some(b) => {
                if !Arc::ptr_eq(&b.space, &disc.w2) {
                    return Err(Error::Dimension("topography must live in W2".into()));
                }
                b
            }
            None => Field::zeros(&disc.w2),
        };
        let f_qp = disc.points.iter().map(|x| coriolis.at(x)).collect();
        let b_qp = disc.eval_scalar(SpaceId::W2, &topography).val;
        Ok(Model { disc, gravity, coriolis, topography, f_qp, b_qp })
    }
}

/// Prognostic variables `(u, D)` in `W1 x W2`.
#[derive(Debug, Clone)]
pub struct State {
    pub u: Field,
    pub d: Field,
}

impl State {
    pub fn new(disc: &Discretisation, u: Field, d: Field) -> Result<Self> {
        if !Arc::ptr_eq(&u.space, &disc.w1) || !Arc::ptr_eq(&d.space, &disc.w2) {
            return Err(Error::Dimension("state must be (W1, W2)".into()));
        }
        Ok(State { u, d })
    }

    /// `a * self + b * other`.
    pub fn lincomb(&self, a: f64, other: &State, b: f64) -> State {
        State { u: self.u.lincomb(a, &other.u, b), d: self.d.lincomb(a, &other.d, b) }
    }
}

#[cfg(test)]
mod tests;
