//! Seeded property checks on small random instances: bracket antisymmetry,
//! velocity recovery, mass conservation and agreement with the dense oracle.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{Discretisation, Field, SpaceId};
use crate::error::Result;
use crate::mesh::Mesh;
use crate::oracle::Oracle;
use crate::swe::bracket::{depth_rhs, BracketInputs};
use crate::swe::operators::{
    coriolis, depth_advection, pressure_upwind, velocity_advection, ScalarData, Upwind, VectorData,
};
use crate::swe::{bracket, bracket_rhs, potential_vorticity, recover_velocity, variations, BracketVariant, Coriolis, Model, State};
use crate::time::{residual_explicit, LinearisedJacobian, Scheme, StepConfig};

pub const ANTISYMMETRY_TOL: f64 = 1e-11;
pub const NON_EC_MIN_VIOLATION: f64 = 1e-6;
pub const RECOVERY_TOL: f64 = 1e-10;
pub const MASS_TOL: f64 = 1e-12;
pub const ORACLE_TOL: f64 = 1e-10;

/// 8-cell periodic unit square with constant rotation and random topography.
pub fn torus_model(seed: u64) -> Result<Model> {
    let disc = Arc::new(Discretisation::new(Mesh::periodic_square(2, 1.0)?)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let b = random_field(&disc.w2, &mut rng, 0.1);
    Model::new(disc, 2.0, Coriolis::Constant(1.3), Some(b))
}

/// 20-cell unit icosahedron with `f = 2 z`.
pub fn sphere_model() -> Result<Model> {
    let disc = Arc::new(Discretisation::new(Mesh::icosahedral_sphere(0, 1.0)?)?);
    Model::new(disc, 2.0, Coriolis::Rotating { omega: 1.0, radius: 1.0 }, None)
}

pub fn random_field(space: &Arc<crate::assembly::FunctionSpace>, rng: &mut ChaCha8Rng, amp: f64) -> Field {
    Field { space: space.clone(), values: (0..space.dim).map(|_| rng.random_range(-amp..amp)).collect() }
}

/// Random velocity and a depth in `[0.8, 1.2]` at the dofs.
pub fn random_state(model: &Model, rng: &mut ChaCha8Rng) -> State {
    let disc = &model.disc;
    let u = random_field(&disc.w1, rng, 1.0);
    let mut d = random_field(&disc.w2, rng, 0.2);
    d.values.iter_mut().for_each(|x| *x += 1.0);
    State { u, d }
}

fn random_pair(model: &Model, rng: &mut ChaCha8Rng) -> (Field, Field) {
    (random_field(&model.disc.w1, rng, 1.0), random_field(&model.disc.w2, rng, 1.0))
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `|B(x, y) + B(y, x)| / (|B(x, y)| + |B(y, x)|)` for a random instance.
pub fn antisymmetry_defect(model: &Model, variant: BracketVariant, seed: u64) -> Result<f64> {
    let mut r = rng(seed);
    let z = random_state(model, &mut r);
    let x = random_pair(model, &mut r);
    let y = random_pair(model, &mut r);
    let bxy = bracket(model, variant, &z, (&x.0, &x.1), (&y.0, &y.1))?;
    let byx = bracket(model, variant, &z, (&y.0, &y.1), (&x.0, &x.1))?;
    Ok((bxy + byx).abs() / (bxy.abs() + byx.abs()).max(f64::MIN_POSITIVE))
}

/// `|U(D, P(D u)) - u| / |u|` in the L2 norm.
pub fn recovery_error(model: &Model, seed: u64) -> Result<f64> {
    let mut r = rng(seed);
    let z = random_state(model, &mut r);
    let (flux, _) = variations(model, &z)?;
    let rec = recover_velocity(&model.disc, &z.d, &flux)?;
    let diff = rec.lincomb(1.0, &z.u, -1.0);
    let norm = |f: &Field| -> Result<f64> {
        Ok(model.disc.apply_mass(SpaceId::W1, &f.values)?.iter().zip(&f.values).map(|(a, b)| a * b).sum::<f64>().sqrt())
    };
    Ok(norm(&diff)? / norm(&z.u)?)
}

/// Depth tendency tested against `phi = 1`, relative to the sum of its
/// absolute contributions.
pub fn mass_defect(model: &Model, variant: BracketVariant, seed: u64) -> Result<f64> {
    let mut r = rng(seed);
    let z = random_state(model, &mut r);
    let (c, gamma) = random_pair(model, &mut r);
    let rec = recover_velocity(&model.disc, &z.d, &c)?;
    let inp = BracketInputs { u: &z.u, d: &z.d, d_adv: &z.d, upwind: &z.u, flux: &c, recovered: Some(&rec), dhdd: &gamma };
    let b = depth_rhs(model, variant, &inp)?;
    let one = model.disc.project_scalar(SpaceId::W2, |_, _| 1.0)?;
    let total: f64 = b.iter().zip(&one.values).map(|(x, y)| x * y).sum();
    let scale: f64 = b.iter().zip(&one.values).map(|(x, y)| (x * y).abs()).sum();
    Ok(total.abs() / scale.max(f64::MIN_POSITIVE))
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / b.abs().max(scale).max(f64::MIN_POSITIVE)
}

fn rel_vec(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale.max(f64::MIN_POSITIVE)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A uniform flow oblique to every edge of the periodic square mesh plus a
/// small perturbation, so the upwind side is the same along each edge and
/// every facet integrand stays polynomial.
fn oblique_velocity(model: &Model, rng: &mut ChaCha8Rng) -> Result<Field> {
    let base = model.disc.interpolate_w1(|_| nalgebra::Vector3::new(1.0, 0.37, 0.0))?;
    Ok(base.lincomb(1.0, &random_field(&model.disc.w1, rng, 0.02), 1.0))
}

/// Relative differences between the assembled operators and the oracle on
/// one random instance of the torus, by operator name.
pub fn oracle_defects(model: &Model, oracle: &Oracle, seed: u64) -> Result<Vec<(String, f64)>> {
    let disc = &model.disc;
    let mut r = rng(seed);
    let mut z = random_state(model, &mut r);
    z.u = oblique_velocity(model, &mut r)?;
    let (c, gamma) = random_pair(model, &mut r);
    let (v, phi) = random_pair(model, &mut r);
    let sel = oblique_velocity(model, &mut r)?;
    let mut out = Vec::new();

    let (adv, ud, dd, gd, seld) = (
        VectorData::new(disc, &c),
        VectorData::new(disc, &z.u),
        ScalarData::new(disc, &z.d),
        ScalarData::new(disc, &gamma),
        Upwind::new(disc, &disc.facet_w1(&sel)),
    );
    let (cp, up, dp, gp, selp, vp, php) =
        (oracle.poly(&c), oracle.poly(&z.u), oracle.poly(&z.d), oracle.poly(&gamma), oracle.poly(&sel), oracle.poly(&v), oracle.poly(&phi));

    let l = dot(&velocity_advection(disc, Some(&dd), &adv, &ud, &seld), &v.values);
    out.push(("L".to_string(), rel(l, oracle.advection_form(Some(&dp), &cp, &up, &selp, &vp), 0.0)));
    let l1 = dot(&velocity_advection(disc, None, &adv, &ud, &seld), &v.values);
    out.push(("L (unweighted)".to_string(), rel(l1, oracle.advection_form(None, &cp, &up, &selp, &vp), 0.0)));
    let ld = dot(&depth_advection(disc, &adv, &dd, &seld), &phi.values);
    out.push(("L^D".to_string(), rel(ld, oracle.depth_advection_form(&cp, &dp, &selp, &php), 0.0)));
    let f = dot(&pressure_upwind(disc, &dd, &gd, &seld), &v.values)
        + dot(&coriolis(disc, &model.f_qp, Some(&dd), &adv.qp), &v.values);
    out.push(("F".to_string(), rel(f, oracle.forcing_form(model, &dp, &cp, &gp, &selp, &vp), 0.0)));

    let (flux, dhdd) = variations(model, &z)?;
    let (oflux, odhdd) = oracle.variations(model, &z)?;
    out.push(("variations".to_string(), rel_vec(&flux.values, &oflux.values).max(rel_vec(&dhdd.values, &odhdd.values))));
    let rec = recover_velocity(disc, &z.d, &c)?;
    out.push(("recovery".to_string(), rel_vec(&rec.values, &oracle.recover_velocity(&z.d, &c)?.values)));
    let q = potential_vorticity(model, &z.u, &z.d)?;
    out.push(("potential vorticity".to_string(), rel_vec(&q.values, &oracle.potential_vorticity(model, &z.u, &z.d)?.values)));
    let wmass = disc.weighted_mass_w1(Some(&disc.eval_scalar(SpaceId::W2, &z.d).val)).to_dense();
    let dp = oracle.poly(&z.d);
    out.push(("weighted mass".to_string(), rel_vec(wmass.as_slice(), oracle.mass_matrix(SpaceId::W1, Some(&dp)).as_slice())));

    for variant in BracketVariant::ALL {
        let (a, b) = bracket_rhs(model, variant, &z, (&c, &gamma), (&v, &phi))?;
        let (oa, ob) = oracle.bracket_rhs(model, variant, &z, (&c, &gamma), (&v, &phi))?;
        let scale = oa.abs() + ob.abs();
        out.push((format!("bracket_rhs {variant}"), rel(a, oa, scale).max(rel(b, ob, scale))));
    }

    let zk = State { u: z.u.lincomb(1.0, &random_field(&disc.w1, &mut r, 0.02), 1.0), d: z.d.lincomb(1.0, &random_field(&disc.w2, &mut r, 0.05), 1.0) };
    let cfg = StepConfig { dt: 0.1, ..StepConfig::new(0.1, 1.0) };
    for scheme in [Scheme::Poisson, Scheme::Midpoint] {
        for variant in BracketVariant::ALL {
            let cfg = StepConfig { scheme, ..cfg };
            let res = residual_explicit(model, variant, &cfg, &z, &zk)?;
            let (oru, ord) = oracle.residual_explicit(model, variant, &cfg, &z, &zk)?;
            out.push((format!("residual {scheme} {variant}"), rel_vec(&res.ru, &oru).max(rel_vec(&res.rd, &ord))));
        }
    }

    let jac = LinearisedJacobian::new(model, 0.1, 1.0)?;
    let ru = random_field(&disc.w1, &mut r, 1.0).values;
    let rd = random_field(&disc.w2, &mut r, 1.0).values;
    let (du, ddz) = jac.solve(model, &ru, &rd)?;
    let (odu, odd) = oracle.jacobian_solve(model, 0.1, 1.0, &ru, &rd)?;
    out.push(("jacobian".to_string(), rel_vec(&du, &odu).max(rel_vec(&ddz, &odd))));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for PropertyOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

fn outcome(name: impl Into<String>, passed: bool, detail: String) -> PropertyOutcome {
    PropertyOutcome { name: name.into(), passed, detail }
}

/// Antisymmetry of every variant on the torus and the sphere; the
/// non-conserving variant must show a violation.
pub fn antisymmetry_suite(seed: u64, instances: usize) -> Result<Vec<PropertyOutcome>> {
    let mut out = Vec::new();
    for (mesh, model) in [("torus", torus_model(seed)?), ("sphere", sphere_model()?)] {
        for variant in BracketVariant::ALL {
            let defects = (0..instances).map(|i| antisymmetry_defect(&model, variant, seed + i as u64)).collect::<Result<Vec<_>>>()?;
            let worst = defects.iter().copied().fold(0.0, f64::max);
            let least = defects.iter().copied().fold(f64::INFINITY, f64::min);
            let o = if variant.is_energy_conserving() {
                outcome(format!("antisymmetry {variant} ({mesh})"), worst <= ANTISYMMETRY_TOL, format!("max defect {worst:.3e}"))
            } else {
                let hits = defects.iter().filter(|d| **d >= NON_EC_MIN_VIOLATION).count();
                let need = (instances * 9).div_ceil(10);
                outcome(
                    format!("antisymmetry violated by {variant} ({mesh})"),
                    hits >= need,
                    format!("{hits}/{instances} instances >= {NON_EC_MIN_VIOLATION:.0e}, min defect {least:.3e}"),
                )
            };
            out.push(o);
        }
    }
    Ok(out)
}

pub fn recovery_suite(seed: u64, instances: usize) -> Result<Vec<PropertyOutcome>> {
    let mut out = Vec::new();
    for (mesh, model) in [("torus", torus_model(seed)?), ("sphere", sphere_model()?)] {
        let worst = (0..instances).map(|i| recovery_error(&model, seed + i as u64)).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
        out.push(outcome(format!("velocity recovery ({mesh})"), worst <= RECOVERY_TOL, format!("max error {worst:.3e}")));
    }
    Ok(out)
}

pub fn mass_suite(seed: u64, instances: usize) -> Result<Vec<PropertyOutcome>> {
    let mut out = Vec::new();
    for (mesh, model) in [("torus", torus_model(seed)?), ("sphere", sphere_model()?)] {
        let mut worst: f64 = 0.0;
        for variant in BracketVariant::ALL {
            for i in 0..instances {
                worst = worst.max(mass_defect(&model, variant, seed + i as u64)?);
            }
        }
        out.push(outcome(format!("depth tendency integrates to zero ({mesh})"), worst <= MASS_TOL, format!("max defect {worst:.3e}")));
    }
    Ok(out)
}

pub fn oracle_suite(seed: u64, instances: usize) -> Result<Vec<PropertyOutcome>> {
    let model = torus_model(seed)?;
    let oracle = Oracle::new(&model.disc)?;
    let mut worst: Vec<(String, f64)> = Vec::new();
    for i in 0..instances {
        for (name, e) in oracle_defects(&model, &oracle, seed + i as u64)? {
            match worst.iter_mut().find(|(n, _)| *n == name) {
                Some(w) => w.1 = w.1.max(e),
                None => worst.push((name, e)),
            }
        }
    }
    Ok(worst
        .into_iter()
        .map(|(name, e)| outcome(format!("oracle {name}"), e <= ORACLE_TOL, format!("max relative difference {e:.3e}")))
        .collect())
}

/// Every suite, as run by the `verify` command.
pub fn run_all(seed: u64, instances: usize) -> Result<Vec<PropertyOutcome>> {
    let mut out = antisymmetry_suite(seed, instances)?;
    out.extend(recovery_suite(seed, instances)?);
    out.extend(mass_suite(seed, instances)?);
    out.extend(oracle_suite(seed, instances.min(20))?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_pass(v: &[PropertyOutcome]) {
        for o in v {
            assert!(o.passed, "{o}");
        }
    }

    #[test]
    fn antisymmetry_holds_for_conserving_variants() {
        all_pass(&antisymmetry_suite(11, 6).unwrap());
    }

    #[test]
    fn recovery_and_mass() {
        all_pass(&recovery_suite(12, 6).unwrap());
        all_pass(&mass_suite(13, 3).unwrap());
    }

    #[test]
    fn operators_agree_with_oracle() {
        let v = oracle_suite(14, 3).unwrap();
        assert_eq!(v.len(), 24);
        all_pass(&v);
    }

    #[test]
    fn non_conserving_defect_is_large() {
        let m = torus_model(1).unwrap();
        assert!(antisymmetry_defect(&m, BracketVariant::NonEc, 5).unwrap() > 1e-3);
    }

    #[test]
    fn outcome_display() {
        let o = outcome("x", false, "y".into());
        assert_eq!(o.to_string(), "FAIL x: y");
    }
}
