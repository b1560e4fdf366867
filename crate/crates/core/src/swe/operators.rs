//! Discrete operators of the brackets, assembled against every basis
//! function of the test space.
//!
//! Each routine returns the vector `b_i = G(t_i)` of a linear functional `G`
//! evaluated on the basis `t_i` of W1 or W2, so `G(t) = b . coeffs(t)`.
//! Facet integrals use the outward normal of each side, `n_s`, and the
//! in-plane tangent `n_s^perp = k_s x n_s`; traces marked with a tilde are
//! taken from the upwind side.

use nalgebra::Vector3;

use crate::assembly::{Discretisation, FacetTrace, Field, ScalarQp, SpaceId, VectorQp};

/// A W1 field at volume and facet quadrature points.
#[derive(Debug, Clone)]
pub struct VectorData {
    pub qp: VectorQp,
    pub facet: FacetTrace<Vector3<f64>>,
}

impl VectorData {
    pub fn new(disc: &Discretisation, u: &Field) -> Self {
        VectorData { qp: disc.eval_w1(u), facet: disc.facet_w1(u) }
    }
}

/// A W2 field at volume and facet quadrature points.
#[derive(Debug, Clone)]
pub struct ScalarData {
    pub qp: ScalarQp,
    pub facet: FacetTrace<f64>,
}

impl ScalarData {
    pub fn new(disc: &Discretisation, d: &Field) -> Self {
        ScalarData { qp: disc.eval_scalar(SpaceId::W2, d), facet: disc.facet_w2(d) }
    }
}

/// Upwind side at every facet quadrature point.
#[derive(Debug, Clone)]
pub struct Upwind {
    /// True when the flow leaves the `+` cell, so `+` is upwind.
    pub plus: Vec<bool>,
}

impl Upwind {
    pub fn new(disc: &Discretisation, velocity: &FacetTrace<Vector3<f64>>) -> Self {
        let ne = disc.n_edge_points();
        let plus = velocity
            .plus
            .iter()
            .enumerate()
            .map(|(i, v)| v.dot(&disc.frames[i / ne].normal_plus) > 0.0)
            .collect();
        Upwind { plus }
    }

    #[inline]
    pub fn pick<T: Copy>(&self, i: usize, trace: &FacetTrace<T>) -> T {
        if self.plus[i] {
            trace.plus[i]
        } else {
            trace.minus[i]
        }
    }
}

/// `L_c(u; rho v) = <grad^perp(rho v . c^perp), u> - int [[rho v . c^perp]] n^perp . u~`
/// over W1 test functions `v`, with `rho = 1` when no weight is given.
pub fn velocity_advection(
    disc: &Discretisation,
    weight: Option<&ScalarData>,
    adv: &VectorData,
    u: &VectorData,
    upwind: &Upwind,
) -> Vec<f64> {
    let nq = disc.nq();
    let mut b = disc.assemble_w1(|c, q| {
        let i = c * nq + q;
        let g = &disc.geom[c];
        let k = g.normal;
        let (rho, grad_rho) = weight.map_or((1.0, Vector3::zeros()), |w| (w.qp.val[i], w.qp.grad[i]));
        let cperp = k.cross(&adv.qp.val[i]);
        // grad^perp psi . u = -grad psi . p with p = k x u.
        let p = k.cross(&u.qp.val[i]);
        let ph = g.reference_components(&p);
        let dc = &adv.qp.dref[i];
        let a = cperp * p.dot(&grad_rho) + (k.cross(&dc[0]) * ph[0] + k.cross(&dc[1]) * ph[1]) * rho;
        (-a, [-cperp * (rho * ph[0]), -cperp * (rho * ph[1])], 0.0)
    });
    let ne = disc.n_edge_points();
    for (f, facet) in disc.mesh.facets.iter().enumerate() {
        let fr = &disc.frames[f];
        for k in 0..ne {
            let i = f * ne + k;
            let ut = upwind.pick(i, &u.facet);
            let w = fr.weights[k];
            for (side, n, cs, rho) in [
                (&facet.plus, fr.normal_plus, adv.facet.plus[i], weight.map_or(1.0, |d| d.facet.plus[i])),
                (&facet.minus, fr.normal_minus, adv.facet.minus[i], weight.map_or(1.0, |d| d.facet.minus[i])),
            ] {
                let ks = disc.geom[side.cell].normal;
                let a = ks.cross(&cs) * (-w * rho * ks.cross(&n).dot(&ut));
                disc.add_facet_w1(side, k, &a, &mut b);
            }
        }
    }
    b
}

/// `-<v, q k x F>` with `q` sampled at the volume quadrature points.
pub fn vorticity_flux(disc: &Discretisation, q_qp: &[f64], flux: &VectorQp) -> Vec<f64> {
    let nq = disc.nq();
    disc.assemble_w1(|c, q| {
        let i = c * nq + q;
        (-disc.geom[c].normal.cross(&flux.val[i]) * q_qp[i], [Vector3::zeros(); 2], 0.0)
    })
}

/// `-<rho v, f k x c>`.
pub fn coriolis(disc: &Discretisation, f_qp: &[f64], weight: Option<&ScalarData>, adv: &VectorQp) -> Vec<f64> {
    let nq = disc.nq();
    disc.assemble_w1(|c, q| {
        let i = c * nq + q;
        let rho = weight.map_or(1.0, |w| w.qp.val[i]);
        (-disc.geom[c].normal.cross(&adv.val[i]) * (rho * f_qp[i]), [Vector3::zeros(); 2], 0.0)
    })
}

/// `-<D v, grad gamma> + int [[gamma v]] D~` (broken gradient).
pub fn pressure_upwind(disc: &Discretisation, d: &ScalarData, gamma: &ScalarData, upwind: &Upwind) -> Vec<f64> {
    let nq = disc.nq();
    let mut b = disc.assemble_w1(|c, q| {
        let i = c * nq + q;
        (-gamma.qp.grad[i] * d.qp.val[i], [Vector3::zeros(); 2], 0.0)
    });
    let ne = disc.n_edge_points();
    for (f, facet) in disc.mesh.facets.iter().enumerate() {
        let fr = &disc.frames[f];
        for k in 0..ne {
            let i = f * ne + k;
            let dt = upwind.pick(i, &d.facet);
            let w = fr.weights[k];
            disc.add_facet_w1(&facet.plus, k, &(fr.normal_plus * (w * gamma.facet.plus[i] * dt)), &mut b);
            disc.add_facet_w1(&facet.minus, k, &(fr.normal_minus * (w * gamma.facet.minus[i] * dt)), &mut b);
        }
    }
    b
}

/// `<div v, gamma>`.
pub fn pressure_divergence(disc: &Discretisation, gamma: &ScalarQp) -> Vec<f64> {
    let nq = disc.nq();
    disc.assemble_w1(|c, q| (Vector3::zeros(), [Vector3::zeros(); 2], gamma.val[c * nq + q]))
}

/// `L^D_v(D; phi) = <D v, grad phi> - int [[phi v]] D~` over W2 test functions.
pub fn depth_advection(disc: &Discretisation, adv: &VectorData, d: &ScalarData, upwind: &Upwind) -> Vec<f64> {
    let nq = disc.nq();
    let mut b = disc.assemble_scalar(SpaceId::W2, |c, q| {
        let i = c * nq + q;
        (0.0, adv.qp.val[i] * d.qp.val[i])
    });
    let ne = disc.n_edge_points();
    for (f, facet) in disc.mesh.facets.iter().enumerate() {
        let fr = &disc.frames[f];
        for k in 0..ne {
            let i = f * ne + k;
            let dt = upwind.pick(i, &d.facet);
            let w = fr.weights[k];
            disc.add_facet_w2(&facet.plus, k, -w * adv.facet.plus[i].dot(&fr.normal_plus) * dt, &mut b);
            disc.add_facet_w2(&facet.minus, k, -w * adv.facet.minus[i].dot(&fr.normal_minus) * dt, &mut b);
        }
    }
    b
}

/// `-<div F, phi>`.
pub fn flux_divergence(disc: &Discretisation, flux: &VectorQp) -> Vec<f64> {
    let nq = disc.nq();
    disc.assemble_scalar(SpaceId::W2, |c, q| (-flux.div[c * nq + q], Vector3::zeros()))
}

/// `sum_facets int (D+ - D-)^2 dS`, square-rooted.
pub fn jump_seminorm(disc: &Discretisation, d: &Field) -> f64 {
    let tr = disc.facet_w2(d);
    let ne = disc.n_edge_points();
    let mut s = 0.0;
    for (i, (a, b)) in tr.plus.iter().zip(&tr.minus).enumerate() {
        s += disc.frames[i / ne].weights[i % ne] * (a - b).powi(2);
    }
    s.sqrt()
}
