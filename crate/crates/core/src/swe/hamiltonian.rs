//! Energy, its variational derivatives, velocity recovery and potential vorticity.

use nalgebra::Vector3;

use crate::assembly::{Discretisation, Field, SpaceId, SpdSolver};
use crate::error::{Error, Result};

use super::{Model, State};

/// `H = 1/2 int (D |u|^2 + g (D + b)^2)`.
pub fn energy(model: &Model, z: &State) -> f64 {
    let disc = &model.disc;
    let u = disc.eval_w1(&z.u);
    let d = disc.eval_scalar(SpaceId::W2, &z.d);
    let dens: Vec<f64> = (0..d.val.len())
        .map(|i| 0.5 * (d.val[i] * u.val[i].norm_squared() + model.gravity * (d.val[i] + model.b_qp[i]).powi(2)))
        .collect();
    disc.integrate(&dens)
}

/// `int D`.
pub fn mass(disc: &Discretisation, d: &Field) -> f64 {
    disc.integrate(&disc.eval_scalar(SpaceId::W2, d).val)
}

/// `(dH/du, dH/dD) = (P_W1(D u), P_W2(|u|^2 / 2 + g (D + b)))`.
pub fn variations(model: &Model, z: &State) -> Result<(Field, Field)> {
    let disc = &model.disc;
    let nq = disc.nq();
    let u = disc.eval_w1(&z.u);
    let d = disc.eval_scalar(SpaceId::W2, &z.d);
    let rhs = disc.assemble_w1(|c, q| (u.val[c * nq + q] * d.val[c * nq + q], [Vector3::zeros(); 2], 0.0));
    let flux = Field::from_values(&disc.w1, disc.solve_mass(SpaceId::W1, &rhs)?)?;
    let samples: Vec<f64> = (0..d.val.len())
        .map(|i| 0.5 * u.val[i].norm_squared() + model.gravity * (d.val[i] + model.b_qp[i]))
        .collect();
    let gamma = disc.project_samples(SpaceId::W2, &samples)?;
    Ok((flux, gamma))
}

/// Factorised D-weighted W1 mass matrix `<D v, w>`.
pub struct WeightedMass {
    solver: SpdSolver,
}

impl WeightedMass {
    pub fn new(disc: &Discretisation, d: &Field) -> Result<Self> {
        disc.check_positive(d)?;
        let dq = disc.eval_scalar(SpaceId::W2, d).val;
        Ok(WeightedMass { solver: disc.weighted_mass_solver(SpaceId::W1, &dq)? })
    }

    /// Refactorises for a new depth, reusing the symbolic analysis.
    pub fn update(&mut self, disc: &Discretisation, d: &Field) -> Result<()> {
        disc.check_positive(d)?;
        let dq = disc.eval_scalar(SpaceId::W2, d).val;
        self.solver.refactor(disc.weighted_mass_w1(Some(&dq)))
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.solver.solve(rhs)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.solver.operator().matvec(x)
    }
}

/// `U(D, F)`: the W1 field with `<D v, U> = <v, F>` for all `v` in W1.
pub fn recover_velocity(disc: &Discretisation, d: &Field, flux: &Field) -> Result<Field> {
    let wm = WeightedMass::new(disc, d)?;
    let rhs = disc.apply_mass(SpaceId::W1, &flux.values)?;
    Field::from_values(&disc.w1, wm.solve(&rhs)?)
}

/// Potential vorticity `q` in W0: `<eta, q D> = -<grad^perp eta, u> + <eta, f>`.
pub fn potential_vorticity(model: &Model, u: &Field, d: &Field) -> Result<Field> {
    let disc = &model.disc;
    let nq = disc.nq();
    let dq = disc.eval_scalar(SpaceId::W2, d).val;
    if let Some((i, v)) = dq.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::Positivity { cell: i / nq, value: *v });
    }
    let uq = disc.eval_w1(u);
    // -(k x grad eta) . u = grad eta . (k x u)
    let rhs = disc.assemble_scalar(SpaceId::W0, |c, q| {
        let i = c * nq + q;
        (model.f_qp[i], disc.geom[c].normal.cross(&uq.val[i]))
    });
    let solver = disc.weighted_mass_solver(SpaceId::W0, &dq)?;
    Field::from_values(&disc.w0, solver.solve(&rhs)?)
}
