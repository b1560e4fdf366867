//! The five bracket variants, written as linear functionals of the test
//! pair `(w, phi)` for a given Hamiltonian slot `(c, gamma)`.
//!
//! Every variant splits as
//! `B((w, phi), (c, gamma)) = G_d(w) + G_r(U(D, w)) + G_D(phi)`,
//! where `G_r` collects the terms in which the test velocity enters through
//! `U(D, w)`. The same split drives the Poisson integrator, which never
//! forms `U(D, w)` for individual basis functions.

use crate::assembly::{Field, SpaceId};
use crate::error::{Error, Result};

use super::hamiltonian::{potential_vorticity, WeightedMass};
use super::operators::{
    coriolis, depth_advection, flux_divergence, pressure_divergence, pressure_upwind, velocity_advection, vorticity_flux,
    ScalarData, Upwind, VectorData,
};
use super::{BracketVariant, Model, State};

/// Fields entering the bracket. In the semi-discrete bracket `u`, `upwind` and
/// `d`, `d_adv` are the state; the time integrator passes time averages.
#[derive(Debug, Clone, Copy)]
pub struct BracketInputs<'a> {
    /// Velocity advected by `L` and used for the potential vorticity.
    pub u: &'a Field,
    /// Depth weighting `U` and the recovered test functions.
    pub d: &'a Field,
    /// Depth advected by `L^D`.
    pub d_adv: &'a Field,
    /// Velocity deciding the upwind side of every facet point.
    pub upwind: &'a Field,
    /// Hamiltonian slot `c = dH/du`.
    pub flux: &'a Field,
    /// `U(d, c)`; needed by every variant except `Original`.
    pub recovered: Option<&'a Field>,
    /// Hamiltonian slot `gamma = dH/dD`.
    pub dhdd: &'a Field,
}

/// Coefficient vectors of the split functionals; `adv_*` hold the advective
/// (vorticity) terms, `force_*` the pressure and Coriolis terms.
#[derive(Debug, Clone)]
pub struct RhsVectors {
    pub adv_direct: Vec<f64>,
    pub adv_recovered: Vec<f64>,
    pub force_direct: Vec<f64>,
    pub force_recovered: Vec<f64>,
    pub depth: Vec<f64>,
}

fn zeros(n: usize) -> Vec<f64> {
    vec![0.0; n]
}

fn add(mut a: Vec<f64>, b: &[f64]) -> Vec<f64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

fn recovered<'a>(inp: &BracketInputs<'a>) -> Result<&'a Field> {
    inp.recovered.ok_or_else(|| Error::Config("bracket variant needs the recovered velocity U(D, dH/du)".into()))
}

fn pv_samples(model: &Model, inp: &BracketInputs) -> Result<Vec<f64>> {
    let q = potential_vorticity(model, inp.u, inp.d)?;
    Ok(model.disc.eval_scalar(SpaceId::W0, &q).val)
}

/// Advective part of the velocity equation: `(G_d, G_r)`.
pub fn velocity_advection_rhs(model: &Model, variant: BracketVariant, inp: &BracketInputs) -> Result<(Vec<f64>, Vec<f64>)> {
    let disc = &model.disc;
    let n = disc.w1.dim;
    Ok(match variant {
        BracketVariant::Original | BracketVariant::DUpwind => {
            let q = pv_samples(model, inp)?;
            (vorticity_flux(disc, &q, &disc.eval_w1(inp.flux)), zeros(n))
        }
        BracketVariant::FullUpwind | BracketVariant::UUpwindOnly | BracketVariant::NonEc => {
            let adv = VectorData::new(disc, recovered(inp)?);
            let u = VectorData::new(disc, inp.u);
            let up = Upwind::new(disc, &disc.facet_w1(inp.upwind));
            if variant == BracketVariant::NonEc {
                (velocity_advection(disc, None, &adv, &u, &up), zeros(n))
            } else {
                let d = ScalarData::new(disc, inp.d);
                (zeros(n), velocity_advection(disc, Some(&d), &adv, &u, &up))
            }
        }
    })
}

/// Pressure and Coriolis part of the velocity equation: `(G_d, G_r)`.
pub fn velocity_forcing_rhs(model: &Model, variant: BracketVariant, inp: &BracketInputs) -> Result<(Vec<f64>, Vec<f64>)> {
    let disc = &model.disc;
    let n = disc.w1.dim;
    let gamma_qp = || disc.eval_scalar(SpaceId::W2, inp.dhdd);
    Ok(match variant {
        BracketVariant::Original => (pressure_divergence(disc, &gamma_qp()), zeros(n)),
        BracketVariant::DUpwind | BracketVariant::FullUpwind => {
            let d = ScalarData::new(disc, inp.d);
            let gamma = ScalarData::new(disc, inp.dhdd);
            let up = Upwind::new(disc, &disc.facet_w1(inp.upwind));
            let mut r = pressure_upwind(disc, &d, &gamma, &up);
            if variant == BracketVariant::FullUpwind {
                let rec = disc.eval_w1(recovered(inp)?);
                r = add(r, &coriolis(disc, &model.f_qp, Some(&d), &rec));
            }
            (zeros(n), r)
        }
        BracketVariant::UUpwindOnly => {
            let d = ScalarData::new(disc, inp.d);
            let rec = disc.eval_w1(recovered(inp)?);
            (pressure_divergence(disc, &gamma_qp()), coriolis(disc, &model.f_qp, Some(&d), &rec))
        }
        BracketVariant::NonEc => {
            let rec = disc.eval_w1(recovered(inp)?);
            (add(coriolis(disc, &model.f_qp, None, &rec), &pressure_divergence(disc, &gamma_qp())), zeros(n))
        }
    })
}

/// Depth equation `G_D`.
pub fn depth_rhs(model: &Model, variant: BracketVariant, inp: &BracketInputs) -> Result<Vec<f64>> {
    let disc = &model.disc;
    Ok(match variant {
        BracketVariant::Original | BracketVariant::UUpwindOnly => flux_divergence(disc, &disc.eval_w1(inp.flux)),
        BracketVariant::DUpwind | BracketVariant::FullUpwind | BracketVariant::NonEc => {
            let adv = VectorData::new(disc, recovered(inp)?);
            let d = ScalarData::new(disc, inp.d_adv);
            let up = Upwind::new(disc, &disc.facet_w1(inp.upwind));
            depth_advection(disc, &adv, &d, &up)
        }
    })
}

pub fn assemble_rhs(model: &Model, variant: BracketVariant, inp: &BracketInputs) -> Result<RhsVectors> {
    let (adv_direct, adv_recovered) = velocity_advection_rhs(model, variant, inp)?;
    let (force_direct, force_recovered) = velocity_forcing_rhs(model, variant, inp)?;
    let depth = depth_rhs(model, variant, inp)?;
    Ok(RhsVectors { adv_direct, adv_recovered, force_direct, force_recovered, depth })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `U(D, w)` coefficients for a W1 field `w`, using a factorised `<D v, w>`.
fn recover_with(model: &Model, wm: &WeightedMass, w: &Field) -> Result<Vec<f64>> {
    wm.solve(&model.disc.apply_mass(SpaceId::W1, &w.values)?)
}

fn semi_discrete_vectors(
    model: &Model,
    variant: BracketVariant,
    z: &State,
    wm: &WeightedMass,
    hvar: (&Field, &Field),
) -> Result<RhsVectors> {
    let rec = if variant == BracketVariant::Original {
        None
    } else {
        Some(Field::from_values(&model.disc.w1, recover_with(model, wm, hvar.0)?)?)
    };
    let inp = BracketInputs {
        u: &z.u,
        d: &z.d,
        d_adv: &z.d,
        upwind: &z.u,
        flux: hvar.0,
        recovered: rec.as_ref(),
        dhdd: hvar.1,
    };
    assemble_rhs(model, variant, &inp)
}

/// Velocity and depth parts of `B(test, hvar)` at state `z`.
pub fn bracket_rhs(
    model: &Model,
    variant: BracketVariant,
    z: &State,
    hvar: (&Field, &Field),
    test: (&Field, &Field),
) -> Result<(f64, f64)> {
    let wm = WeightedMass::new(&model.disc, &z.d)?;
    let v = semi_discrete_vectors(model, variant, z, &wm, hvar)?;
    let mut du = dot(&test.0.values, &v.adv_direct) + dot(&test.0.values, &v.force_direct);
    if v.adv_recovered.iter().chain(&v.force_recovered).any(|x| *x != 0.0) {
        let ua = recover_with(model, &wm, test.0)?;
        du += dot(&ua, &v.adv_recovered) + dot(&ua, &v.force_recovered);
    }
    Ok((du, dot(&test.1.values, &v.depth)))
}

/// Semi-discrete tendency `(du/dt, dD/dt)` of the variant at state `z`.
pub fn tendency(model: &Model, variant: BracketVariant, z: &State) -> Result<State> {
    let disc = &model.disc;
    let (flux, dhdd) = super::variations(model, z)?;
    let wm = WeightedMass::new(disc, &z.d)?;
    let v = semi_discrete_vectors(model, variant, z, &wm, (&flux, &dhdd))?;
    let mut du = disc.solve_mass(SpaceId::W1, &add(v.adv_direct, &v.force_direct))?;
    let rec: Vec<f64> = v.adv_recovered.iter().zip(&v.force_recovered).map(|(a, b)| a + b).collect();
    if rec.iter().any(|x| *x != 0.0) {
        for (a, b) in du.iter_mut().zip(wm.solve(&rec)?) {
            *a += b;
        }
    }
    let dd = disc.solve_mass(SpaceId::W2, &v.depth)?;
    Ok(State { u: Field::from_values(&disc.w1, du)?, d: Field::from_values(&disc.w2, dd)? })
}

/// `B(x, y)` with `x = (a, alpha)` in the functional slot and `y = (c, gamma)`
/// in the Hamiltonian slot.
pub fn bracket(model: &Model, variant: BracketVariant, z: &State, x: (&Field, &Field), y: (&Field, &Field)) -> Result<f64> {
    let (du, dd) = bracket_rhs(model, variant, z, y, x)?;
    Ok(du + dd)
}
