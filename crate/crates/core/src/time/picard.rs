//! Linearised Jacobian about the rest state `(u, D) = (0, h)` and the Picard update.

use crate::assembly::{LuSolver, SparseOperator, SpaceId};
use crate::error::Result;
use crate::swe::{Model, State};

use super::residual::Residual;

/// Block system
/// `[M1 + dt/2 C, -dt/2 g B^T; dt/2 h B, M2]`, solved through its Schur
/// complement on the velocity block, which is factorised once.
pub struct LinearisedJacobian {
    schur: LuSolver,
    div: SparseOperator,
    dt: f64,
    gravity: f64,
    height: f64,
}

impl std::fmt::Debug for LinearisedJacobian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearisedJacobian").field("dt", &self.dt).field("height", &self.height).finish()
    }
}

impl LinearisedJacobian {
    pub fn new(model: &Model, dt: f64, height: f64) -> Result<Self> {
        let disc = &model.disc;
        let coriolis = disc.coriolis_operator(&model.f_qp);
        let s = disc
            .mass_w1()
            .add_scaled(0.5 * dt, &coriolis)
            .add_scaled(0.25 * dt * dt * model.gravity * height, &disc.divergence_schur());
        Ok(LinearisedJacobian {
            schur: LuSolver::new(s)?,
            div: disc.divergence_operator(),
            dt,
            gravity: model.gravity,
            height,
        })
    }

    /// Solves `J dz = -(ru, rd)`.
    pub fn solve(&self, model: &Model, ru: &[f64], rd: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let disc = &model.disc;
        let (dt, g, h) = (self.dt, self.gravity, self.height);
        let m2rd = disc.solve_mass(SpaceId::W2, rd)?;
        let bt = self.div.matvec_transpose(&m2rd);
        let rhs: Vec<f64> = ru.iter().zip(&bt).map(|(r, b)| -r - 0.5 * dt * g * b).collect();
        let du = self.schur.solve(&rhs)?;
        let bdu = self.div.matvec(&du);
        let rhs_d: Vec<f64> = rd.iter().zip(&bdu).map(|(r, b)| -r - 0.5 * dt * h * b).collect();
        let dd = disc.solve_mass(SpaceId::W2, &rhs_d)?;
        Ok((du, dd))
    }

    /// Applies the block operator to `(du, dd)`.
    pub fn apply(&self, model: &Model, du: &[f64], dd: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let disc = &model.disc;
        let (dt, g, h) = (self.dt, self.gravity, self.height);
        let c = disc.coriolis_operator(&model.f_qp).matvec(du);
        let btd = self.div.matvec_transpose(dd);
        let mu = disc.apply_mass(SpaceId::W1, du)?;
        let ju = (0..du.len()).map(|i| mu[i] + 0.5 * dt * c[i] - 0.5 * dt * g * btd[i]).collect();
        let bu = self.div.matvec(du);
        let md = disc.apply_mass(SpaceId::W2, dd)?;
        let jd = (0..dd.len()).map(|i| md[i] + 0.5 * dt * h * bu[i]).collect();
        Ok((ju, jd))
    }
}

/// One Picard update `z <- z + dz` with `J dz = -R(z)`.
pub fn picard_iteration(model: &Model, jac: &LinearisedJacobian, r: &Residual, z: &State) -> Result<State> {
    let (du, dd) = jac.solve(model, &r.ru, &r.rd)?;
    let mut next = z.clone();
    next.u.values.iter_mut().zip(&du).for_each(|(x, d)| *x += d);
    next.d.values.iter_mut().zip(&dd).for_each(|(x, d)| *x += d);
    Ok(next)
}
