//! Per-step scalar diagnostics: energy, mass, potential enstrophy and L2 errors.

use nalgebra::Vector3;

use crate::assembly::{Discretisation, Field, SpaceId};
use crate::error::Result;
use crate::mesh::Point;
use crate::swe::{energy, mass, potential_vorticity, Model, State};

/// Potential enstrophy `Z = 1/2 int D q^2`.
pub fn enstrophy(model: &Model, z: &State) -> Result<f64> {
    let disc = &model.disc;
    let q = potential_vorticity(model, &z.u, &z.d)?;
    let qq = disc.eval_scalar(SpaceId::W0, &q).val;
    let dq = disc.eval_scalar(SpaceId::W2, &z.d).val;
    Ok(disc.integrate(&qq.iter().zip(&dq).map(|(q, d)| 0.5 * d * q * q).collect::<Vec<_>>()))
}

/// `sqrt(int (s - exact)^2)` for a scalar field.
pub fn l2_error_scalar(disc: &Discretisation, id: SpaceId, s: &Field, exact: impl Fn(&Point) -> f64) -> f64 {
    let v = disc.eval_scalar(id, s).val;
    let e: Vec<f64> = v.iter().zip(&disc.points).map(|(a, x)| (a - exact(x)).powi(2)).collect();
    disc.integrate(&e).sqrt()
}

/// `sqrt(int |u - exact|^2)` for a W1 field, with `exact` reduced to its
/// component tangent to each cell.
pub fn l2_error_vector(disc: &Discretisation, u: &Field, exact: impl Fn(&Point) -> Vector3<f64>) -> f64 {
    let v = disc.eval_w1(u).val;
    let nq = disc.nq();
    let e: Vec<f64> = v
        .iter()
        .zip(&disc.points)
        .enumerate()
        .map(|(i, (a, x))| {
            let k = disc.geom[i / nq].normal;
            let ue = exact(x);
            (a - (ue - k * ue.dot(&k))).norm_squared()
        })
        .collect();
    disc.integrate(&e).sqrt()
}

/// `(x_n - x_0) / x_0` for every entry of a series.
pub fn relative_error(series: &[f64]) -> Vec<f64> {
    match series.first() {
        Some(&x0) => series.iter().map(|x| (x - x0) / x0).collect(),
        None => Vec::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub time: f64,
    pub energy: f64,
    pub rel_energy_err: f64,
    pub mass: f64,
    pub enstrophy: f64,
    pub rel_enstrophy_err: f64,
    pub l2_err_u: Option<f64>,
    pub l2_err_d: Option<f64>,
}

pub const CSV_HEADER: &str = "step,time,energy,rel_energy_err,mass,enstrophy,rel_enstrophy_err";
pub const CSV_HEADER_ERRORS: &str = "step,time,energy,rel_energy_err,mass,enstrophy,rel_enstrophy_err,l2_err_u,l2_err_D";

impl DiagnosticsRecord {
    pub fn csv_row(&self) -> String {
        let mut s = format!(
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            self.step, self.time, self.energy, self.rel_energy_err, self.mass, self.enstrophy, self.rel_enstrophy_err
        );
        if let (Some(u), Some(d)) = (self.l2_err_u, self.l2_err_d) {
            s.push_str(&format!(",{u:.17e},{d:.17e}"));
        }
        s
    }

    pub fn is_finite(&self) -> bool {
        [self.time, self.energy, self.rel_energy_err, self.mass, self.enstrophy, self.rel_enstrophy_err]
            .iter()
            .chain(self.l2_err_u.iter())
            .chain(self.l2_err_d.iter())
            .all(|x| x.is_finite())
    }
}

type VectorExact<'a> = Box<dyn Fn(&Point) -> Vector3<f64> + 'a>;
type ScalarExact<'a> = Box<dyn Fn(&Point) -> f64 + 'a>;

/// Accumulates records relative to the first recorded state.
pub struct Diagnostics<'a> {
    exact: Option<(VectorExact<'a>, ScalarExact<'a>)>,
    initial: Option<(f64, f64)>,
    pub records: Vec<DiagnosticsRecord>,
}

impl<'a> Diagnostics<'a> {
    pub fn new() -> Self {
        Diagnostics { exact: None, initial: None, records: Vec::new() }
    }

    /// Also records L2 errors against an exact solution.
    pub fn with_exact(u: impl Fn(&Point) -> Vector3<f64> + 'a, d: impl Fn(&Point) -> f64 + 'a) -> Self {
        Diagnostics { exact: Some((Box::new(u), Box::new(d))), initial: None, records: Vec::new() }
    }

    pub fn has_errors(&self) -> bool {
        self.exact.is_some()
    }

    pub fn csv_header(&self) -> &'static str {
        if self.has_errors() {
            CSV_HEADER_ERRORS
        } else {
            CSV_HEADER
        }
    }

    pub fn record(&mut self, model: &Model, step: usize, time: f64, z: &State) -> Result<DiagnosticsRecord> {
        let h = energy(model, z);
        let zeta = enstrophy(model, z)?;
        let (h0, z0) = *self.initial.get_or_insert((h, zeta));
        let (l2_err_u, l2_err_d) = match &self.exact {
            Some((u, d)) => (
                Some(l2_error_vector(&model.disc, &z.u, u)),
                Some(l2_error_scalar(&model.disc, SpaceId::W2, &z.d, d)),
            ),
            None => (None, None),
        };
        let r = DiagnosticsRecord {
            step,
            time,
            energy: h,
            rel_energy_err: (h - h0) / h0,
            mass: mass(&model.disc, &z.d),
            enstrophy: zeta,
            rel_enstrophy_err: if z0 == 0.0 { 0.0 } else { (zeta - z0) / z0 },
            l2_err_u,
            l2_err_d,
        };
        self.records.push(r);
        Ok(r)
    }
}

impl Default for Diagnostics<'_> {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;
    use crate::swe::Coriolis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn model(disc: Discretisation, f: f64) -> Model {
        Model::new(Arc::new(disc), 1.5, Coriolis::Constant(f), None).unwrap()
    }

    #[test]
    fn resting_enstrophy() {
        let m = model(Discretisation::new(Mesh::periodic_square(3, 2.0).unwrap()).unwrap(), 3.0);
        let d = m.disc.project_scalar(SpaceId::W2, |_, _| 2.5).unwrap();
        let z = State::new(&m.disc, Field::zeros(&m.disc.w1), d).unwrap();
        let expect = 0.5 * 9.0 / 2.5 * 4.0;
        assert!((enstrophy(&m, &z).unwrap() - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn enstrophy_matches_high_degree_quadrature() {
        let mesh = Mesh::periodic_square(2, 1.0).unwrap();
        let a = model(Discretisation::new(mesh.clone()).unwrap(), 1.0);
        let b = model(Discretisation::with_degrees(mesh, 14, 14).unwrap(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let uv: Vec<f64> = (0..a.disc.w1.dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dv: Vec<f64> = (0..a.disc.w2.dim).map(|_| 1.0 + rng.random_range(-0.2..0.2)).collect();
        let za = State::new(&a.disc, Field::from_values(&a.disc.w1, uv.clone()).unwrap(), Field::from_values(&a.disc.w2, dv.clone()).unwrap()).unwrap();
        let zb = State::new(&b.disc, Field::from_values(&b.disc.w1, uv).unwrap(), Field::from_values(&b.disc.w2, dv).unwrap()).unwrap();
        let (ea, eb) = (enstrophy(&a, &za).unwrap(), enstrophy(&b, &zb).unwrap());
        assert!((ea - eb).abs() < 1e-12 * eb.abs(), "{ea} {eb}");
    }

    #[test]
    fn l2_errors() {
        let disc = Discretisation::new(Mesh::periodic_square(4, 1.0).unwrap()).unwrap();
        let d = disc.project_scalar(SpaceId::W2, |_, x| 1.0 + x.x).unwrap();
        assert!(l2_error_scalar(&disc, SpaceId::W2, &d, |x| 1.0 + x.x) < 1e-12);
        let c = disc.project_scalar(SpaceId::W2, |_, _| 2.0).unwrap();
        assert!((l2_error_scalar(&disc, SpaceId::W2, &c, |_| 1.75) - 0.25).abs() < 1e-12);
        let u = disc.project_w1(|_, _| Vector3::new(1.0, 2.0, 0.0)).unwrap();
        assert!(l2_error_vector(&disc, &u, |_| Vector3::new(1.0, 2.0, 0.0)) < 1e-12);
    }

    #[test]
    fn relative_series() {
        assert_eq!(relative_error(&[2.0, 2.0, 2.0]), vec![0.0; 3]);
        assert_eq!(relative_error(&[2.0, 3.0]), vec![0.0, 0.5]);
        assert!(relative_error(&[]).is_empty());
    }

    #[test]
    fn csv_rows_match_header() {
        let r = DiagnosticsRecord {
            step: 3,
            time: 0.5,
            energy: 1.0,
            rel_energy_err: 0.0,
            mass: 2.0,
            enstrophy: 4.0,
            rel_enstrophy_err: -1e-3,
            l2_err_u: None,
            l2_err_d: None,
        };
        assert_eq!(r.csv_row().split(',').count(), CSV_HEADER.split(',').count());
        let e = DiagnosticsRecord { l2_err_u: Some(1.0), l2_err_d: Some(2.0), ..r };
        assert_eq!(e.csv_row().split(',').count(), CSV_HEADER_ERRORS.split(',').count());
        assert!(e.is_finite());
    }
}
