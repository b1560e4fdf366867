use std::sync::Arc;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::operators::{coriolis, depth_advection, pressure_upwind, velocity_advection, ScalarData, Upwind, VectorData};
use super::*;
use crate::assembly::{Discretisation, Field, FunctionSpace, SpaceId};
use crate::mesh::Mesh;
use crate::scenarios::{Scenario, ScenarioKind, ScenarioSpec};

fn torus(n: usize) -> Arc<Discretisation> {
    Arc::new(Discretisation::new(Mesh::periodic_square(n, 1.0).unwrap()).unwrap())
}

fn plane_model(disc: &Arc<Discretisation>, g: f64, f: f64, b: Option<Field>) -> Model {
    Model::new(disc.clone(), g, Coriolis::Constant(f), b).unwrap()
}

fn random(space: &Arc<FunctionSpace>, seed: u64, offset: f64, amp: f64) -> Field {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    Field::from_values(space, (0..space.dim).map(|_| offset + r.random_range(-amp..amp)).collect()).unwrap()
}

fn constant_flow(disc: &Discretisation, a: f64, b: f64) -> Field {
    disc.interpolate_w1(|_| Vector3::new(a, b, 0.0)).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn l2(disc: &Discretisation, id: SpaceId, f: &Field) -> f64 {
    dot(&disc.apply_mass(id, &f.values).unwrap(), &f.values).sqrt()
}

#[test]
fn energy_of_rest_state() {
    let disc = torus(3);
    let m = plane_model(&disc, 1.5, 0.7, None);
    let d = disc.project_scalar(SpaceId::W2, |_, _| 2.0).unwrap();
    let z = State::new(&disc, Field::zeros(&disc.w1), d).unwrap();
    assert!((energy(&m, &z) - 1.5 * 4.0 / 2.0).abs() < 1e-12);
}

#[test]
fn kinetic_energy_is_quadratic_in_u() {
    let disc = torus(2);
    let m = plane_model(&disc, 2.0, 1.0, Some(random(&disc.w2, 1, 0.0, 0.1)));
    let z = State { u: random(&disc.w1, 2, 0.0, 1.0), d: random(&disc.w2, 3, 1.0, 0.2) };
    let rest = energy(&m, &State { u: Field::zeros(&disc.w1), d: z.d.clone() });
    let twice = energy(&m, &State { u: z.u.scaled(2.0), d: z.d.clone() });
    let ke = energy(&m, &z) - rest;
    assert!(ke > 0.0);
    assert!((twice - rest - 4.0 * ke).abs() < 1e-12 * ke);
}

#[test]
fn williamson2_energy_matches_high_degree_quadrature() {
    let sc = Scenario::new(ScenarioSpec::new(ScenarioKind::Williamson2).with_resolution(3)).unwrap();
    let fine = Arc::new(Discretisation::with_degrees(sc.disc().mesh.clone(), 14, 14).unwrap());
    let m = Model::new(fine.clone(), sc.model.gravity, sc.model.coriolis, None).unwrap();
    let z = State {
        u: Field::from_values(&fine.w1, sc.initial.u.values.clone()).unwrap(),
        d: Field::from_values(&fine.w2, sc.initial.d.values.clone()).unwrap(),
    };
    let (a, b) = (energy(&sc.model, &sc.initial), energy(&m, &z));
    assert!((a - b).abs() < 1e-12 * b, "{a} {b}");
}

#[test]
fn variations_in_trivial_cases() {
    let disc = torus(2);
    let b = random(&disc.w2, 4, 0.0, 0.3);
    let m = plane_model(&disc, 3.0, 1.0, Some(b.clone()));
    let u = random(&disc.w1, 5, 0.0, 1.0);
    let one = disc.project_scalar(SpaceId::W2, |_, _| 1.0).unwrap();
    let (flux, _) = variations(&m, &State { u: u.clone(), d: one }).unwrap();
    assert!(flux.max_abs_diff(&u) < 1e-12);
    let d = random(&disc.w2, 6, 1.0, 0.2);
    let (flux, gamma) = variations(&m, &State { u: Field::zeros(&disc.w1), d: d.clone() }).unwrap();
    assert!(max_abs(&flux.values) < 1e-14);
    assert!(gamma.max_abs_diff(&d.lincomb(3.0, &b, 3.0)) < 1e-12);
}

#[test]
fn recovery_in_trivial_cases() {
    let disc = torus(2);
    let f = random(&disc.w1, 7, 0.0, 1.0);
    let one = disc.project_scalar(SpaceId::W2, |_, _| 1.0).unwrap();
    assert!(recover_velocity(&disc, &one, &f).unwrap().max_abs_diff(&f) < 1e-12);
    let c = disc.project_scalar(SpaceId::W2, |_, _| 2.5).unwrap();
    assert!(recover_velocity(&disc, &c, &f.scaled(2.5)).unwrap().max_abs_diff(&f) < 1e-12);
}

#[test]
fn recovery_rejects_non_positive_depth() {
    let disc = torus(2);
    let d = random(&disc.w2, 8, 0.0, 1.0);
    assert!(recover_velocity(&disc, &d, &random(&disc.w1, 9, 0.0, 1.0)).is_err());
}

#[test]
fn resting_potential_vorticity() {
    let disc = torus(2);
    let m = plane_model(&disc, 1.0, 3.0, None);
    let d = disc.project_scalar(SpaceId::W2, |_, _| 1.5).unwrap();
    let q = potential_vorticity(&m, &Field::zeros(&disc.w1), &d).unwrap();
    let qq = disc.eval_scalar(SpaceId::W0, &q).val;
    assert!(qq.iter().all(|x| (x - 2.0).abs() < 1e-12));
}

#[test]
fn potential_vorticity_converges_on_plane() {
    use std::f64::consts::PI;
    let errors: Vec<f64> = [8, 16]
        .iter()
        .map(|&n| {
            let disc = torus(n);
            let m = plane_model(&disc, 1.0, 1.0, None);
            let u = disc.interpolate_w1(|x| Vector3::new((2.0 * PI * x.y).sin(), 0.0, 0.0)).unwrap();
            let d = disc.project_scalar(SpaceId::W2, |_, x| 2.0 + (2.0 * PI * x.x).sin()).unwrap();
            let q = potential_vorticity(&m, &u, &d).unwrap();
            let exact = |x: &Vector3<f64>| (1.0 - 2.0 * PI * (2.0 * PI * x.y).cos()) / (2.0 + (2.0 * PI * x.x).sin());
            crate::diagnostics::l2_error_scalar(&disc, SpaceId::W0, &q, exact)
        })
        .collect();
    assert!(errors[1] < errors[0] / 3.5, "{errors:?}");
}

// Flat cells see the solid-body vorticity as 2 omega . k per cell, so the
// continuous PV only converges at first order against the smooth profile.
#[test]
fn williamson2_potential_vorticity_converges() {
    let errors: Vec<f64> = [2, 3]
        .iter()
        .map(|&r| {
            let sc = Scenario::new(ScenarioSpec::new(ScenarioKind::Williamson2).with_resolution(r)).unwrap();
            let s = &sc.spec;
            let q = potential_vorticity(&sc.model, &sc.initial.u, &sc.initial.d).unwrap();
            let exact = |x: &Vector3<f64>| (2.0 * s.omega + 2.0 * s.u0 / s.radius) * x.z / s.radius / sc.depth(x);
            let scale = 2.0 * s.omega / s.h * sc.disc().mesh.total_area().sqrt();
            crate::diagnostics::l2_error_scalar(sc.disc(), SpaceId::W0, &q, exact) / scale
        })
        .collect();
    assert!(errors[0] < 2e-2 && errors[1] < errors[0] / 1.8, "{errors:?}");
}

#[test]
fn advection_of_uniform_flow_vanishes() {
    let disc = torus(2);
    let u = constant_flow(&disc, 1.0, 0.3);
    let adv = random(&disc.w1, 10, 0.0, 1.0);
    let (ud, ad) = (VectorData::new(&disc, &u), VectorData::new(&disc, &adv));
    let up = Upwind::new(&disc, &disc.facet_w1(&adv));
    let d = ScalarData::new(&disc, &random(&disc.w2, 11, 1.0, 0.2));
    for w in [None, Some(&d)] {
        let b = velocity_advection(&disc, w, &ad, &ud, &up);
        assert!(max_abs(&b) < 1e-12, "{}", max_abs(&b));
    }
}

#[test]
fn advection_vanishes_on_its_own_transport_field() {
    let disc = torus(2);
    let adv = random(&disc.w1, 12, 0.0, 1.0);
    let u = random(&disc.w1, 13, 0.0, 1.0);
    let up = Upwind::new(&disc, &disc.facet_w1(&u));
    let b = velocity_advection(&disc, None, &VectorData::new(&disc, &adv), &VectorData::new(&disc, &u), &up);
    assert!(dot(&b, &adv.values).abs() < 1e-12 * max_abs(&b));
}

#[test]
fn depth_advection_conserves_and_preserves_constants() {
    let disc = torus(2);
    let adv = random(&disc.w1, 14, 0.0, 1.0);
    let d = random(&disc.w2, 15, 1.0, 0.3);
    let up = Upwind::new(&disc, &disc.facet_w1(&random(&disc.w1, 16, 0.0, 1.0)));
    let b = depth_advection(&disc, &VectorData::new(&disc, &adv), &ScalarData::new(&disc, &d), &up);
    let one = disc.project_scalar(SpaceId::W2, |_, _| 1.0).unwrap();
    assert!(dot(&b, &one.values).abs() < 1e-13 * max_abs(&b));
    let u = constant_flow(&disc, 0.4, -1.1);
    let c = disc.project_scalar(SpaceId::W2, |_, _| 2.0).unwrap();
    let b = depth_advection(&disc, &VectorData::new(&disc, &u), &ScalarData::new(&disc, &c), &up);
    assert!(max_abs(&b) < 1e-12);
}

#[test]
fn zero_transport_takes_minus_side_and_drops_facet_terms() {
    let disc = torus(2);
    let zero = Field::zeros(&disc.w1);
    let up = Upwind::new(&disc, &disc.facet_w1(&zero));
    assert!(up.plus.iter().all(|p| !p));
    let d = random(&disc.w2, 17, 1.0, 0.3);
    let b = depth_advection(&disc, &VectorData::new(&disc, &zero), &ScalarData::new(&disc, &d), &up);
    assert!(max_abs(&b) == 0.0);
}

#[test]
fn cell_flux_balance() {
    let mesh = Mesh::periodic_square(2, 1.0).unwrap();
    let disc = Discretisation::new(mesh).unwrap();
    let (d0, d1) = (1.0, 2.5);
    let d = disc.project_scalar(SpaceId::W2, |c, _| if c == 0 { d0 } else { d1 }).unwrap();
    let phi = disc.project_scalar(SpaceId::W2, |c, _| if c == 0 { 1.0 } else { 0.0 }).unwrap();
    let vel = Vector3::new(1.0, 0.37, 0.0);
    let u = disc.interpolate_w1(|_| vel).unwrap();
    let up = Upwind::new(&disc, &disc.facet_w1(&u));
    let b = depth_advection(&disc, &VectorData::new(&disc, &u), &ScalarData::new(&disc, &d), &up);
    let mut expect = 0.0;
    for e in 0..3 {
        let (p, q) = disc.mesh.local_edge_points(0, e);
        let flux = vel.dot(&disc.mesh.outward_normal(0, e)) * (q - p).norm();
        expect -= flux * if flux > 0.0 { d0 } else { d1 };
    }
    assert!((dot(&b, &phi.values) - expect).abs() < 1e-13, "{} {expect}", dot(&b, &phi.values));
}

#[test]
fn pressure_of_constant_potential_vanishes() {
    let disc = torus(2);
    let d = ScalarData::new(&disc, &random(&disc.w2, 18, 1.0, 0.3));
    let gamma = ScalarData::new(&disc, &disc.project_scalar(SpaceId::W2, |_, _| 4.0).unwrap());
    let up = Upwind::new(&disc, &disc.facet_w1(&random(&disc.w1, 19, 0.0, 1.0)));
    let b = pressure_upwind(&disc, &d, &gamma, &up);
    assert!(max_abs(&b) < 1e-12);
}

#[test]
fn coriolis_does_no_work() {
    let disc = torus(2);
    let m = plane_model(&disc, 1.0, 2.0, None);
    let v = random(&disc.w1, 20, 0.0, 1.0);
    let d = ScalarData::new(&disc, &random(&disc.w2, 21, 1.0, 0.3));
    let b = coriolis(&disc, &m.f_qp, Some(&d), &disc.eval_w1(&v));
    assert!(dot(&b, &v.values).abs() < 1e-13 * max_abs(&b));
}

#[test]
fn hamiltonian_is_a_casimir_of_itself() {
    let disc = torus(2);
    let m = plane_model(&disc, 2.0, 1.3, Some(random(&disc.w2, 22, 0.0, 0.1)));
    let z = State { u: random(&disc.w1, 23, 0.0, 1.0), d: random(&disc.w2, 24, 1.0, 0.2) };
    let (c, g) = variations(&m, &z).unwrap();
    for variant in BracketVariant::ALL.into_iter().filter(|v| v.is_energy_conserving()) {
        let (a, b) = bracket_rhs(&m, variant, &z, (&c, &g), (&c, &g)).unwrap();
        assert!((a + b).abs() < 1e-12 * (a.abs() + b.abs()), "{variant}: {a} {b}");
    }
}

fn balance_residual(kind: ScenarioKind, r: usize) -> f64 {
    let sc = Scenario::new(ScenarioSpec::new(kind).with_resolution(r)).unwrap();
    let disc = sc.disc();
    let d = disc.project_scalar(SpaceId::W2, |_, x| sc.balanced_depth(x)).unwrap();
    let z = State { u: sc.initial.u.clone(), d };
    let t = tendency(&sc.model, BracketVariant::Original, &z).unwrap();
    l2(disc, SpaceId::W1, &t.u) / l2(disc, SpaceId::W1, &z.u)
}

#[test]
fn williamson2_balance_improves_with_refinement() {
    let (a, b) = (balance_residual(ScenarioKind::Williamson2, 2), balance_residual(ScenarioKind::Williamson2, 3));
    assert!(b < a, "{a} {b}");
}

#[test]
fn galewsky_balance_improves_with_refinement() {
    let (a, b) = (balance_residual(ScenarioKind::Galewsky, 2), balance_residual(ScenarioKind::Galewsky, 3));
    assert!(b < a, "{a} {b}");
}

#[test]
fn upwinded_tendency_approaches_centred_one() {
    use std::f64::consts::PI;
    let diffs: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&n| {
            let disc = torus(n);
            let m = plane_model(&disc, 1.0, 1.0, None);
            let u = disc.interpolate_w1(|x| Vector3::new((2.0 * PI * x.y).sin(), 0.5 * (2.0 * PI * x.x).cos(), 0.0)).unwrap();
            let d = disc.project_scalar(SpaceId::W2, |_, x| 1.0 + 0.1 * (2.0 * PI * x.x).sin() * (2.0 * PI * x.y).sin()).unwrap();
            let z = State { u, d };
            let a = tendency(&m, BracketVariant::FullUpwind, &z).unwrap();
            let b = tendency(&m, BracketVariant::Original, &z).unwrap();
            let e = a.lincomb(1.0, &b, -1.0);
            l2(&disc, SpaceId::W1, &e.u).max(l2(&disc, SpaceId::W2, &e.d))
        })
        .collect();
    assert!(diffs[1] < 0.6 * diffs[0] && diffs[2] < 0.6 * diffs[1], "{diffs:?}");
}
