//! Time-averaged Hamiltonian variations over a step `z^n -> z^{n+1}`.

use nalgebra::Vector3;

use crate::assembly::{Field, SpaceId};
use crate::error::Result;
use crate::swe::{Model, State, WeightedMass};

use super::Scheme;

/// Averaged quantities entering one evaluation of the discrete step.
pub struct TimeAverages {
    /// `dH/du` averaged over the step.
    pub flux: Field,
    /// `dH/dD` averaged over the step.
    pub dhdd: Field,
    pub d_bar: Field,
    pub u_bar: Field,
    /// `U(D_bar, flux)`; equal to `u_bar` for the midpoint scheme.
    pub recovered: Field,
    /// Factorised `<D_bar v, w>`, reused for test-side recovery.
    pub weighted_mass: WeightedMass,
}

impl std::fmt::Debug for TimeAverages {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TimeAverages").field("dim_u", &self.flux.dim()).field("dim_d", &self.dhdd.dim()).finish()
    }
}

/// Averaged variations between `zn` and the guess `zk`.
///
/// For the Poisson scheme these are the exact integrals over
/// `z(s) = zn + s (zk - zn)`, `s` in `[0, 1]`, of the pointwise variations.
pub fn time_averaged_variations(model: &Model, scheme: Scheme, zn: &State, zk: &State) -> Result<TimeAverages> {
    let disc = &model.disc;
    let nq = disc.nq();
    let g = model.gravity;
    let d_bar = zn.d.lincomb(0.5, &zk.d, 0.5);
    let u_bar = zn.u.lincomb(0.5, &zk.u, 0.5);
    let weighted_mass = WeightedMass::new(disc, &d_bar)?;
    let (un, uk) = (disc.eval_w1(&zn.u).val, disc.eval_w1(&zk.u).val);
    let (dn, dk) = (disc.eval_scalar(SpaceId::W2, &zn.d).val, disc.eval_scalar(SpaceId::W2, &zk.d).val);
    match scheme {
        Scheme::Poisson => {
            let rhs = disc.assemble_w1(|c, q| {
                let i = c * nq + q;
                let v = (un[i] * dn[i] + un[i] * (0.5 * dk[i]) + uk[i] * (0.5 * dn[i]) + uk[i] * dk[i]) / 3.0;
                (v, [Vector3::zeros(); 2], 0.0)
            });
            let flux = Field::from_values(&disc.w1, disc.solve_mass(SpaceId::W1, &rhs)?)?;
            let recovered = Field::from_values(&disc.w1, weighted_mass.solve(&rhs)?)?;
            let samples: Vec<f64> = (0..dn.len())
                .map(|i| {
                    let ke = (un[i].norm_squared() + un[i].dot(&uk[i]) + uk[i].norm_squared()) / 6.0;
                    ke + g * (0.5 * (dn[i] + dk[i]) + model.b_qp[i])
                })
                .collect();
            let dhdd = disc.project_samples(SpaceId::W2, &samples)?;
            Ok(TimeAverages { flux, dhdd, d_bar, u_bar, recovered, weighted_mass })
        }
        Scheme::Midpoint => {
            let rhs = disc.assemble_w1(|c, q| {
                let i = c * nq + q;
                ((un[i] + uk[i]) * (0.25 * (dn[i] + dk[i])), [Vector3::zeros(); 2], 0.0)
            });
            let flux = Field::from_values(&disc.w1, disc.solve_mass(SpaceId::W1, &rhs)?)?;
            let samples: Vec<f64> = (0..dn.len())
                .map(|i| 0.125 * (un[i] + uk[i]).norm_squared() + g * (0.5 * (dn[i] + dk[i]) + model.b_qp[i]))
                .collect();
            let dhdd = disc.project_samples(SpaceId::W2, &samples)?;
            let recovered = u_bar.clone();
            Ok(TimeAverages { flux, dhdd, d_bar, u_bar, recovered, weighted_mass })
        }
    }
}

/// `dH/dD` with the depth average replaced by `(D^n + d_other) / 2`.
pub(crate) fn averaged_dhdd(model: &Model, scheme: Scheme, zn: &State, zk: &State, d_other: &Field) -> Result<Field> {
    let disc = &model.disc;
    let g = model.gravity;
    let (un, uk) = (disc.eval_w1(&zn.u).val, disc.eval_w1(&zk.u).val);
    let (dn, da) = (disc.eval_scalar(SpaceId::W2, &zn.d).val, disc.eval_scalar(SpaceId::W2, d_other).val);
    let samples: Vec<f64> = (0..dn.len())
        .map(|i| {
            let ke = match scheme {
                Scheme::Poisson => (un[i].norm_squared() + un[i].dot(&uk[i]) + uk[i].norm_squared()) / 6.0,
                Scheme::Midpoint => 0.125 * (un[i] + uk[i]).norm_squared(),
            };
            ke + g * (0.5 * (dn[i] + da[i]) + model.b_qp[i])
        })
        .collect();
    disc.project_samples(SpaceId::W2, &samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::Discretisation;
    use crate::mesh::Mesh;
    use crate::swe::{variations, Coriolis};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn model() -> Model {
        let disc = Arc::new(Discretisation::new(Mesh::periodic_square(2, 1.0).unwrap()).unwrap());
        Model::new(disc, 2.0, Coriolis::Constant(1.0), None).unwrap()
    }

    fn random_state(model: &Model, rng: &mut ChaCha8Rng) -> State {
        let disc = &model.disc;
        let u = Field::from_values(&disc.w1, (0..disc.w1.dim).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let mut d: Vec<f64> = (0..disc.w2.dim).map(|_| rng.random_range(-0.1..0.1)).collect();
        d.iter_mut().for_each(|x| *x += 1.0);
        State::new(disc, u, Field::from_values(&disc.w2, d).unwrap()).unwrap()
    }

    #[test]
    fn equal_endpoints_give_plain_variations() {
        let m = model();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = random_state(&m, &mut rng);
        let avg = time_averaged_variations(&m, Scheme::Poisson, &z, &z).unwrap();
        let (f, g) = variations(&m, &z).unwrap();
        assert!(avg.flux.max_abs_diff(&f) < 1e-12);
        assert!(avg.dhdd.max_abs_diff(&g) < 1e-12);
    }

    #[test]
    fn closed_form_matches_quadrature_in_s() {
        let m = model();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let zn = random_state(&m, &mut rng);
        let zk = random_state(&m, &mut rng);
        let avg = time_averaged_variations(&m, Scheme::Poisson, &zn, &zk).unwrap();
        let (s, w) = crate::fem::quadrature::gauss_legendre(5);
        let mut f = Field::zeros(&m.disc.w1);
        let mut g = Field::zeros(&m.disc.w2);
        for (si, wi) in s.iter().zip(&w) {
            let z = zn.lincomb(1.0 - si, &zk, *si);
            let (fs, gs) = variations(&m, &z).unwrap();
            f.axpy(*wi, &fs);
            g.axpy(*wi, &gs);
        }
        assert!(avg.flux.max_abs_diff(&f) < 1e-12, "{}", avg.flux.max_abs_diff(&f));
        assert!(avg.dhdd.max_abs_diff(&g) < 1e-12, "{}", avg.dhdd.max_abs_diff(&g));
    }

    #[test]
    fn zero_velocity_gives_zero_flux() {
        let m = model();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut zn = random_state(&m, &mut rng);
        let mut zk = random_state(&m, &mut rng);
        zn.u = Field::zeros(&m.disc.w1);
        zk.u = Field::zeros(&m.disc.w1);
        let avg = time_averaged_variations(&m, Scheme::Poisson, &zn, &zk).unwrap();
        assert!(avg.flux.values.iter().all(|x| x.abs() < 1e-14));
        let expect = m.disc.project_samples(SpaceId::W2, &m.disc.eval_scalar(SpaceId::W2, &avg.d_bar).val.iter().map(|d| 2.0 * d).collect::<Vec<_>>()).unwrap();
        assert!(avg.dhdd.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn recovered_flux_satisfies_weighted_identity() {
        let m = model();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let zn = random_state(&m, &mut rng);
        let zk = random_state(&m, &mut rng);
        let avg = time_averaged_variations(&m, Scheme::Poisson, &zn, &zk).unwrap();
        let lhs = avg.weighted_mass.apply(&avg.recovered.values);
        let rhs = m.disc.apply_mass(SpaceId::W1, &avg.flux.values).unwrap();
        let err = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }
}
