//! Single steps and the stepping loop.

use log::warn;

use crate::error::Result;
use crate::swe::{BracketVariant, Model, State};

use super::picard::{picard_iteration, LinearisedJacobian};
use super::residual::residual;
use super::{Scheme, StepConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Number of Picard updates applied.
    pub iterations: usize,
    /// Relative residual before each update, followed by the final residual
    /// when a tolerance is set.
    pub residuals: Vec<f64>,
    /// `None` when running a fixed number of iterations.
    pub converged: Option<bool>,
}

impl StepReport {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::NAN)
    }
}

fn step(model: &Model, variant: BracketVariant, cfg: &StepConfig, jac: &LinearisedJacobian, zn: &State) -> Result<(State, StepReport)> {
    cfg.validate()?;
    let mut z = zn.clone();
    let mut report = StepReport { iterations: 0, residuals: Vec::new(), converged: None };
    for _ in 0..cfg.picard_iterations {
        let r = residual(model, variant, cfg, zn, &z)?;
        report.residuals.push(r.norm);
        if cfg.picard_tol.is_some_and(|t| r.norm <= t) {
            report.converged = Some(true);
            break;
        }
        z = picard_iteration(model, jac, &r, &z)?;
        report.iterations += 1;
    }
    if let Some(tol) = cfg.picard_tol {
        if report.converged.is_none() {
            let r = residual(model, variant, cfg, zn, &z)?;
            report.residuals.push(r.norm);
            let ok = r.norm <= tol;
            if !ok {
                warn!("Picard iteration stopped after {} updates with residual {:.3e} > {:.1e}", report.iterations, r.norm, tol);
            }
            report.converged = Some(ok);
        }
    }
    model.disc.check_positive(&z.d)?;
    Ok((z, report))
}

/// One step of the energy-conserving Poisson integrator.
pub fn poisson_step(model: &Model, variant: BracketVariant, cfg: &StepConfig, jac: &LinearisedJacobian, zn: &State) -> Result<(State, StepReport)> {
    step(model, variant, &StepConfig { scheme: Scheme::Poisson, ..*cfg }, jac, zn)
}

/// One step of the midpoint integrator.
pub fn midpoint_step(model: &Model, variant: BracketVariant, cfg: &StepConfig, jac: &LinearisedJacobian, zn: &State) -> Result<(State, StepReport)> {
    step(model, variant, &StepConfig { scheme: Scheme::Midpoint, ..*cfg }, jac, zn)
}

/// Owns the state of a run and the Jacobian factorised for its time step.
pub struct Integrator<'a> {
    pub model: &'a Model,
    pub variant: BracketVariant,
    pub config: StepConfig,
    jacobian: LinearisedJacobian,
    pub state: State,
    pub step_index: usize,
    pub time: f64,
}

impl<'a> Integrator<'a> {
    pub fn new(model: &'a Model, variant: BracketVariant, config: StepConfig, initial: State) -> Result<Self> {
        config.validate()?;
        let jacobian = LinearisedJacobian::new(model, config.dt, config.reference_height)?;
        Ok(Integrator { model, variant, config, jacobian, state: initial, step_index: 0, time: 0.0 })
    }

    pub fn jacobian(&self) -> &LinearisedJacobian {
        &self.jacobian
    }

    pub fn step(&mut self) -> Result<StepReport> {
        let (z, report) = step(self.model, self.variant, &self.config, &self.jacobian, &self.state)?;
        self.state = z;
        self.step_index += 1;
        self.time += self.config.dt;
        Ok(report)
    }
}
