//! Picard residuals of the discrete step.
//!
//! The velocity update splits into an advective part `u^a` and a forcing part
//! `u^f`. Functionals that act on the test velocity through `U(D_bar, w)` are
//! inverted with the `D_bar`-weighted mass matrix, so `U(D_bar, w)` is never
//! formed for individual test functions.

use crate::assembly::{Field, SpaceId};
use crate::error::Result;
use crate::swe::bracket::{depth_rhs, velocity_advection_rhs, velocity_forcing_rhs, BracketInputs};
use crate::swe::{BracketVariant, Model, State};

use super::averages::{averaged_dhdd, time_averaged_variations, TimeAverages};
use super::{PicardMode, StepConfig};

const INNER_ITERATIONS: usize = 20;
const INNER_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Residual {
    /// `M1 (u^k - u^a - u^f)`.
    pub ru: Vec<f64>,
    /// `M2 (D^k - D^a)`.
    pub rd: Vec<f64>,
    pub ua: Field,
    pub uf: Field,
    pub da: Field,
    /// Relative size of `ru` and `rd`, the larger of the two.
    pub norm: f64,
}

fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn rel(a: f64, scale: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a / scale.max(f64::MIN_POSITIVE)
    }
}

/// `dt (M1^{-1} direct + W^{-1} recovered)` with `W = <D_bar v, w>`.
fn velocity_increment(model: &Model, avg: &TimeAverages, dt: f64, direct: &[f64], recovered: &[f64]) -> Result<Vec<f64>> {
    let a = model.disc.solve_mass(SpaceId::W1, direct)?;
    let mut out: Vec<f64> = a.iter().map(|x| dt * x).collect();
    if recovered.iter().any(|x| *x != 0.0) {
        let b = avg.weighted_mass.solve(recovered)?;
        out.iter_mut().zip(&b).for_each(|(o, x)| *o += dt * x);
    }
    Ok(out)
}

fn add_to(base: &Field, inc: &[f64]) -> Field {
    let mut f = base.clone();
    f.values.iter_mut().zip(inc).for_each(|(x, d)| *x += d);
    f
}

fn finish(model: &Model, zn: &State, zk: &State, ua: Field, uf: Field, da: Field) -> Result<Residual> {
    let disc = &model.disc;
    let du: Vec<f64> = (0..zk.u.dim()).map(|i| zk.u.values[i] - ua.values[i] - uf.values[i]).collect();
    let dd: Vec<f64> = (0..zk.d.dim()).map(|i| zk.d.values[i] - da.values[i]).collect();
    let ru = disc.apply_mass(SpaceId::W1, &du)?;
    let rd = disc.apply_mass(SpaceId::W2, &dd)?;
    let su = l2(&disc.apply_mass(SpaceId::W1, &zn.u.values)?).max(l2(&disc.apply_mass(SpaceId::W1, &zk.u.values)?));
    let sd = l2(&disc.apply_mass(SpaceId::W2, &zn.d.values)?);
    let norm = rel(l2(&ru), su).max(rel(l2(&rd), sd));
    Ok(Residual { ru, rd, ua, uf, da, norm })
}

/// Residual with the advected averages `u_bar`, `D_bar` taken from the guess.
pub fn residual_explicit(model: &Model, variant: BracketVariant, cfg: &StepConfig, zn: &State, zk: &State) -> Result<Residual> {
    let avg = time_averaged_variations(model, cfg.scheme, zn, zk)?;
    let inp = BracketInputs {
        u: &avg.u_bar,
        d: &avg.d_bar,
        d_adv: &avg.d_bar,
        upwind: &avg.u_bar,
        flux: &avg.flux,
        recovered: Some(&avg.recovered),
        dhdd: &avg.dhdd,
    };
    let (ad, ar) = velocity_advection_rhs(model, variant, &inp)?;
    let (fd, fr) = velocity_forcing_rhs(model, variant, &inp)?;
    let depth = depth_rhs(model, variant, &inp)?;
    let ua = add_to(&zn.u, &velocity_increment(model, &avg, cfg.dt, &ad, &ar)?);
    let uf = Field::from_values(&model.disc.w1, velocity_increment(model, &avg, cfg.dt, &fd, &fr)?)?;
    let dinc: Vec<f64> = model.disc.solve_mass(SpaceId::W2, &depth)?.iter().map(|x| cfg.dt * x).collect();
    let da = add_to(&zn.d, &dinc);
    finish(model, zn, zk, ua, uf, da)
}

fn converged(new: &Field, old: &Field) -> bool {
    let scale = new.values.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    new.max_abs_diff(old) <= INNER_TOL * scale.max(f64::MIN_POSITIVE)
}

/// Residual with the advected averages replaced by `(D^n + D^a) / 2` and
/// `(u^n + u^a + u^f) / 2`, found by fixed-point sweeps.
pub fn residual_implicit(model: &Model, variant: BracketVariant, cfg: &StepConfig, zn: &State, zk: &State) -> Result<Residual> {
    let disc = &model.disc;
    let avg = time_averaged_variations(model, cfg.scheme, zn, zk)?;
    let mut inp = BracketInputs {
        u: &avg.u_bar,
        d: &avg.d_bar,
        d_adv: &avg.d_bar,
        upwind: &avg.u_bar,
        flux: &avg.flux,
        recovered: Some(&avg.recovered),
        dhdd: &avg.dhdd,
    };

    let mut da = zk.d.clone();
    for _ in 0..INNER_ITERATIONS {
        let d_hat = zn.d.lincomb(0.5, &da, 0.5);
        let depth = depth_rhs(model, variant, &BracketInputs { d_adv: &d_hat, ..inp })?;
        let dinc: Vec<f64> = disc.solve_mass(SpaceId::W2, &depth)?.iter().map(|x| cfg.dt * x).collect();
        let next = add_to(&zn.d, &dinc);
        let done = converged(&next, &da);
        da = next;
        if done {
            break;
        }
    }

    let dhdd = averaged_dhdd(model, cfg.scheme, zn, zk, &da)?;
    inp.dhdd = &dhdd;
    let (fd, fr) = velocity_forcing_rhs(model, variant, &inp)?;
    let uf = Field::from_values(&disc.w1, velocity_increment(model, &avg, cfg.dt, &fd, &fr)?)?;

    let mut ua = zk.u.lincomb(1.0, &uf, -1.0);
    for _ in 0..INNER_ITERATIONS {
        let mut u_hat = zn.u.lincomb(0.5, &ua, 0.5);
        u_hat.axpy(0.5, &uf);
        let (ad, ar) = velocity_advection_rhs(model, variant, &BracketInputs { u: &u_hat, upwind: &u_hat, ..inp })?;
        let next = add_to(&zn.u, &velocity_increment(model, &avg, cfg.dt, &ad, &ar)?);
        let done = converged(&next, &ua);
        ua = next;
        if done {
            break;
        }
    }
    finish(model, zn, zk, ua, uf, da)
}

pub fn residual(model: &Model, variant: BracketVariant, cfg: &StepConfig, zn: &State, zk: &State) -> Result<Residual> {
    match cfg.mode {
        PicardMode::Explicit => residual_explicit(model, variant, cfg, zn, zk),
        PicardMode::Implicit => residual_implicit(model, variant, cfg, zn, zk),
    }
}
