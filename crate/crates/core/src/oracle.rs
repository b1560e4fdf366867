//! Dense reference evaluations for small meshes.
//!
//! Fields are held cell by cell as polynomials in reference coordinates,
//! fitted to point values on a principal lattice, so derivatives come from the
//! fitted coefficients instead of element derivative tables. Forms are
//! integrated with a collapsed Gauss rule of high degree, facet geometry is
//! rebuilt from the vertex coordinates, and every linear system is solved
//! densely. Each form is evaluated on one test field at a time; nothing is
//! assembled against a basis.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector3};

use crate::assembly::{Discretisation, Field, SpaceId};
use crate::error::{Error, Result};
use crate::fem::quadrature::{gauss_legendre, triangle_rule, QuadratureRule};
use crate::mesh::{Point, LOCAL_EDGE_VERTICES};
use crate::swe::{BracketVariant, Model, State};
use crate::time::{Scheme, StepConfig};

const VOLUME_DEGREE: usize = 14;
const EDGE_POINTS: usize = 6;

#[derive(Debug, Clone)]
struct Affine {
    x0: Point,
    j: [Vector3<f64>; 2],
    ginv: Matrix2<f64>,
    k: Vector3<f64>,
    det: f64,
}

impl Affine {
    fn new(x: &[Point; 3]) -> Self {
        let j = [x[1] - x[0], x[2] - x[0]];
        let g = Matrix2::new(j[0].dot(&j[0]), j[0].dot(&j[1]), j[1].dot(&j[0]), j[1].dot(&j[1]));
        let cross = j[0].cross(&j[1]);
        Affine { x0: x[0], j, ginv: g.try_inverse().expect("degenerate cell"), k: cross.normalize(), det: cross.norm() }
    }

    fn point(&self, xi: [f64; 2]) -> Point {
        self.x0 + self.j[0] * xi[0] + self.j[1] * xi[1]
    }

    fn reference(&self, x: &Point) -> [f64; 2] {
        let d = x - self.x0;
        let r = self.ginv * nalgebra::Vector2::new(self.j[0].dot(&d), self.j[1].dot(&d));
        [r[0], r[1]]
    }

    fn gradient(&self, g: [f64; 2]) -> Vector3<f64> {
        let r = self.ginv * nalgebra::Vector2::new(g[0], g[1]);
        self.j[0] * r[0] + self.j[1] * r[1]
    }
}

fn monomials(deg: usize) -> Vec<(i32, i32)> {
    let mut m = Vec::new();
    for total in 0..=deg as i32 {
        for a in (0..=total).rev() {
            m.push((a, total - a));
        }
    }
    m
}

fn lattice(deg: usize) -> Vec<[f64; 2]> {
    let p = deg as f64;
    let mut pts = Vec::new();
    for i in 0..=deg {
        for j in 0..=deg - i {
            pts.push([i as f64 / p, j as f64 / p]);
        }
    }
    pts
}

fn powi(x: f64, n: i32) -> f64 {
    if n <= 0 {
        1.0
    } else {
        x.powi(n)
    }
}

/// A piecewise polynomial field with three components per cell (scalars use
/// the first).
#[derive(Debug, Clone)]
pub struct PolyField {
    mono: Vec<(i32, i32)>,
    cells: Vec<Vec<[f64; 3]>>,
}

impl PolyField {
    fn zeros(deg: usize, ncells: usize) -> Self {
        let mono = monomials(deg);
        PolyField { cells: vec![vec![[0.0; 3]; mono.len()]; ncells], mono }
    }

    fn axpy(&mut self, a: f64, other: &PolyField) {
        for (cs, co) in self.cells.iter_mut().zip(&other.cells) {
            for (x, y) in cs.iter_mut().zip(co) {
                for k in 0..3 {
                    x[k] += a * y[k];
                }
            }
        }
    }

    fn value(&self, c: usize, xi: [f64; 2]) -> Vector3<f64> {
        let mut v = Vector3::zeros();
        for (m, (a, b)) in self.cells[c].iter().zip(&self.mono) {
            let s = powi(xi[0], *a) * powi(xi[1], *b);
            v += Vector3::new(m[0], m[1], m[2]) * s;
        }
        v
    }

    fn scalar(&self, c: usize, xi: [f64; 2]) -> f64 {
        self.value(c, xi)[0]
    }

    /// Physical gradient of each component: column `j` of the result is
    /// the derivative along physical axis `j`.
    fn jacobian(&self, aff: &Affine, c: usize, xi: [f64; 2]) -> Matrix3<f64> {
        let mut d = [[0.0; 2]; 3];
        for (m, (a, b)) in self.cells[c].iter().zip(&self.mono) {
            let dx = if *a > 0 { *a as f64 * powi(xi[0], a - 1) * powi(xi[1], *b) } else { 0.0 };
            let dy = if *b > 0 { *b as f64 * powi(xi[0], *a) * powi(xi[1], b - 1) } else { 0.0 };
            for k in 0..3 {
                d[k][0] += m[k] * dx;
                d[k][1] += m[k] * dy;
            }
        }
        let mut out = Matrix3::zeros();
        for k in 0..3 {
            let g = aff.gradient(d[k]);
            for j in 0..3 {
                out[(k, j)] = g[j];
            }
        }
        out
    }

    fn grad(&self, aff: &Affine, c: usize, xi: [f64; 2]) -> Vector3<f64> {
        self.jacobian(aff, c, xi).row(0).transpose()
    }

    fn div(&self, aff: &Affine, c: usize, xi: [f64; 2]) -> f64 {
        self.jacobian(aff, c, xi).trace()
    }
}

/// One side of a facet at one point.
struct SidePoint {
    cell: usize,
    xi: [f64; 2],
    normal: Vector3<f64>,
}

struct FacetPoint {
    weight: f64,
    sides: [SidePoint; 2],
}

pub struct Oracle<'a> {
    pub disc: &'a Discretisation,
    aff: Vec<Affine>,
    vol: QuadratureRule,
    facet_points: Vec<FacetPoint>,
    basis: [Vec<PolyField>; 3],
}

impl std::fmt::Debug for Oracle<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Oracle").field("cells", &self.aff.len()).finish()
    }
}

fn index(id: SpaceId) -> usize {
    match id {
        SpaceId::W0 => 0,
        SpaceId::W1 => 1,
        SpaceId::W2 => 2,
    }
}

fn degree(id: SpaceId) -> usize {
    match id {
        SpaceId::W0 => 3,
        SpaceId::W1 => 2,
        SpaceId::W2 => 1,
    }
}

fn outward(p: &Point, q: &Point, opposite: &Point) -> Vector3<f64> {
    let t = (q - p).normalize();
    let m = 0.5 * (p + q) - opposite;
    (m - t * m.dot(&t)).normalize()
}

impl<'a> Oracle<'a> {
    pub fn new(disc: &'a Discretisation) -> Result<Self> {
        let mesh = &disc.mesh;
        let aff: Vec<Affine> = mesh.cell_coords.iter().map(Affine::new).collect();
        let vol = triangle_rule(VOLUME_DEGREE)?;
        let (es, ew) = gauss_legendre(EDGE_POINTS);
        let mut facet_points = Vec::new();
        for f in &mesh.facets {
            let mut per_side = Vec::new();
            let mut length = 0.0;
            for side in [&f.plus, &f.minus] {
                let x = &mesh.cell_coords[side.cell];
                let [a, b] = LOCAL_EDGE_VERTICES[side.local_edge];
                let (p, q) = if side.aligned { (x[a], x[b]) } else { (x[b], x[a]) };
                let normal = outward(&p, &q, &x[side.local_edge]);
                if per_side.is_empty() {
                    length = (q - p).norm();
                }
                per_side.push(es.iter().map(|s| (aff[side.cell].reference(&(p + (q - p) * *s)), normal)).collect::<Vec<_>>());
            }
            for k in 0..EDGE_POINTS {
                facet_points.push(FacetPoint {
                    weight: ew[k] * length,
                    sides: [
                        SidePoint { cell: f.plus.cell, xi: per_side[0][k].0, normal: per_side[0][k].1 },
                        SidePoint { cell: f.minus.cell, xi: per_side[1][k].0, normal: per_side[1][k].1 },
                    ],
                });
            }
        }
        let mut oracle = Oracle { disc, aff, vol, facet_points, basis: [Vec::new(), Vec::new(), Vec::new()] };
        for id in [SpaceId::W0, SpaceId::W1, SpaceId::W2] {
            oracle.basis[index(id)] = oracle.fit_basis(id)?;
        }
        Ok(oracle)
    }

    fn fit_basis(&self, id: SpaceId) -> Result<Vec<PolyField>> {
        let disc = self.disc;
        let space = disc.space(id);
        let deg = degree(id);
        let pts = lattice(deg);
        let mono = monomials(deg);
        let v = DMatrix::from_fn(pts.len(), mono.len(), |r, m| powi(pts[r][0], mono[m].0) * powi(pts[r][1], mono[m].1));
        let vinv = v.try_inverse().ok_or_else(|| Error::Element("singular lattice Vandermonde".into()))?;
        let nc = disc.mesh.n_cells();
        let mut out = vec![PolyField::zeros(deg, nc); space.dim];
        for c in 0..nc {
            let mut dofs: Vec<usize> = space.dofs(c).to_vec();
            dofs.sort_unstable();
            dofs.dedup();
            for g in dofs {
                let mut e = Field::zeros(space);
                e.values[g] = 1.0;
                let vals: Vec<Vector3<f64>> = pts.iter().map(|xi| disc.eval_at(&e, c, *xi)).collect();
                for m in 0..mono.len() {
                    let mut coef = [0.0; 3];
                    for (r, val) in vals.iter().enumerate() {
                        for k in 0..3 {
                            coef[k] += vinv[(m, r)] * val[k];
                        }
                    }
                    out[g].cells[c][m] = coef;
                }
            }
        }
        Ok(out)
    }

    /// Polynomial representation of a field.
    pub fn poly(&self, f: &Field) -> PolyField {
        let id = match f.space.kind {
            crate::fem::ElementKind::Cg3 => SpaceId::W0,
            crate::fem::ElementKind::Bdm2 => SpaceId::W1,
            crate::fem::ElementKind::Dg1 => SpaceId::W2,
        };
        self.poly_of(id, &f.values)
    }

    fn poly_of(&self, id: SpaceId, coeffs: &[f64]) -> PolyField {
        let mut p = PolyField::zeros(degree(id), self.aff.len());
        for (a, b) in coeffs.iter().zip(&self.basis[index(id)]) {
            if *a != 0.0 {
                p.axpy(*a, b);
            }
        }
        p
    }

    fn field(&self, id: SpaceId, values: Vec<f64>) -> Result<Field> {
        Field::from_values(self.disc.space(id), values)
    }

    /// `sum_cells int kernel(c, xi, x)`.
    fn integrate(&self, mut kernel: impl FnMut(usize, [f64; 2], &Point) -> f64) -> f64 {
        let mut s = 0.0;
        for (c, aff) in self.aff.iter().enumerate() {
            let mut cs = 0.0;
            for (xi, w) in self.vol.points.iter().zip(&self.vol.weights) {
                cs += w * kernel(c, *xi, &aff.point(*xi));
            }
            s += cs * aff.det;
        }
        s
    }

    /// Index of the upwind side: the side the selector flows out of.
    fn upwind(&self, fp: &FacetPoint, sel: &PolyField) -> usize {
        let p = &fp.sides[0];
        if sel.value(p.cell, p.xi).dot(&p.normal) > 0.0 {
            0
        } else {
            1
        }
    }

    fn trace(&self, fp: &FacetPoint, s: usize, f: &PolyField) -> Vector3<f64> {
        f.value(fp.sides[s].cell, fp.sides[s].xi)
    }

    // ------------------------------------------------------------------ forms

    /// `<grad^perp(rho v . c^perp), u> - int [[rho v . c^perp]] n^perp . u~`.
    pub fn advection_form(
        &self,
        weight: Option<&PolyField>,
        adv: &PolyField,
        u: &PolyField,
        sel: &PolyField,
        v: &PolyField,
    ) -> f64 {
        let vol = self.integrate(|c, xi, _| {
            let aff = &self.aff[c];
            let k = aff.k;
            let (rho, grho) = weight.map_or((1.0, Vector3::zeros()), |w| (w.scalar(c, xi), w.grad(aff, c, xi)));
            let (cv, vv) = (adv.value(c, xi), v.value(c, xi));
            let (jc, jv) = (adv.jacobian(aff, c, xi), v.jacobian(aff, c, xi));
            let w = k.cross(&cv);
            let mut grad_vw = Vector3::zeros();
            for d in 0..3 {
                grad_vw[d] = jv.column(d).dot(&w) + vv.dot(&k.cross(&jc.column(d).into_owned()));
            }
            let grad_psi = grho * vv.dot(&w) + grad_vw * rho;
            k.cross(&grad_psi).dot(&u.value(c, xi))
        });
        let mut fac = 0.0;
        for fp in &self.facet_points {
            let ut = self.trace(fp, self.upwind(fp, sel), u);
            for s in 0..2 {
                let sp = &fp.sides[s];
                let k = self.aff[sp.cell].k;
                let rho = weight.map_or(1.0, |w| w.scalar(sp.cell, sp.xi));
                let psi = rho * v.value(sp.cell, sp.xi).dot(&k.cross(&adv.value(sp.cell, sp.xi)));
                fac += fp.weight * psi * k.cross(&sp.normal).dot(&ut);
            }
        }
        vol - fac
    }

    /// `<grad phi, adv d> - int [[phi adv]] d~`.
    pub fn depth_advection_form(&self, adv: &PolyField, d: &PolyField, sel: &PolyField, phi: &PolyField) -> f64 {
        let vol = self.integrate(|c, xi, _| phi.grad(&self.aff[c], c, xi).dot(&adv.value(c, xi)) * d.scalar(c, xi));
        let mut fac = 0.0;
        for fp in &self.facet_points {
            let dt = self.trace(fp, self.upwind(fp, sel), d)[0];
            for sp in &fp.sides {
                fac += fp.weight * phi.scalar(sp.cell, sp.xi) * adv.value(sp.cell, sp.xi).dot(&sp.normal) * dt;
            }
        }
        vol - fac
    }

    /// `-<d v, grad gamma> + int [[gamma v]] d~`.
    pub fn pressure_upwind_form(&self, d: &PolyField, gamma: &PolyField, sel: &PolyField, v: &PolyField) -> f64 {
        let vol = self.integrate(|c, xi, _| -d.scalar(c, xi) * v.value(c, xi).dot(&gamma.grad(&self.aff[c], c, xi)));
        let mut fac = 0.0;
        for fp in &self.facet_points {
            let dt = self.trace(fp, self.upwind(fp, sel), d)[0];
            for sp in &fp.sides {
                fac += fp.weight * gamma.scalar(sp.cell, sp.xi) * v.value(sp.cell, sp.xi).dot(&sp.normal) * dt;
            }
        }
        vol + fac
    }

    /// `<div v, gamma>`.
    pub fn pressure_divergence_form(&self, gamma: &PolyField, v: &PolyField) -> f64 {
        self.integrate(|c, xi, _| v.div(&self.aff[c], c, xi) * gamma.scalar(c, xi))
    }

    /// `-<rho v, f k x adv>`.
    pub fn coriolis_form(&self, model: &Model, weight: Option<&PolyField>, adv: &PolyField, v: &PolyField) -> f64 {
        self.integrate(|c, xi, x| {
            let rho = weight.map_or(1.0, |w| w.scalar(c, xi));
            -rho * model.coriolis.at(x) * v.value(c, xi).dot(&self.aff[c].k.cross(&adv.value(c, xi)))
        })
    }

    /// Pressure, upwind facet and Coriolis terms acting on `v`.
    pub fn forcing_form(&self, model: &Model, d: &PolyField, adv: &PolyField, gamma: &PolyField, sel: &PolyField, v: &PolyField) -> f64 {
        self.pressure_upwind_form(d, gamma, sel, v) + self.coriolis_form(model, Some(d), adv, v)
    }

    /// `-<v, q k x flux>`.
    pub fn vorticity_form(&self, q: &PolyField, flux: &PolyField, v: &PolyField) -> f64 {
        self.integrate(|c, xi, _| -q.scalar(c, xi) * v.value(c, xi).dot(&self.aff[c].k.cross(&flux.value(c, xi))))
    }

    /// `-<div flux, phi>`.
    pub fn flux_divergence_form(&self, flux: &PolyField, phi: &PolyField) -> f64 {
        self.integrate(|c, xi, _| -flux.div(&self.aff[c], c, xi) * phi.scalar(c, xi))
    }

    // ---------------------------------------------------------- dense algebra

    fn support(&self, id: SpaceId, c: usize) -> Vec<usize> {
        let mut d = self.disc.space(id).dofs(c).to_vec();
        d.sort_unstable();
        d.dedup();
        d
    }

    /// Dense `<rho a_j, a_i>` over a space.
    pub fn mass_matrix(&self, id: SpaceId, weight: Option<&PolyField>) -> DMatrix<f64> {
        let b = &self.basis[index(id)];
        let n = b.len();
        let mut m = DMatrix::zeros(n, n);
        for (c, aff) in self.aff.iter().enumerate() {
            let dofs = self.support(id, c);
            for (xi, w) in self.vol.points.iter().zip(&self.vol.weights) {
                let rho = weight.map_or(1.0, |p| p.scalar(c, *xi));
                let vals: Vec<Vector3<f64>> = dofs.iter().map(|g| b[*g].value(c, *xi)).collect();
                for (a, i) in dofs.iter().enumerate() {
                    for (bb, j) in dofs.iter().enumerate() {
                        m[(*i, *j)] += w * aff.det * rho * vals[a].dot(&vals[bb]);
                    }
                }
            }
        }
        m
    }

    /// Dense `<f k x w_j, w_i>`.
    pub fn coriolis_matrix(&self, model: &Model) -> DMatrix<f64> {
        let b = &self.basis[1];
        let n = b.len();
        let mut m = DMatrix::zeros(n, n);
        for (c, aff) in self.aff.iter().enumerate() {
            let dofs = self.support(SpaceId::W1, c);
            for (xi, w) in self.vol.points.iter().zip(&self.vol.weights) {
                let f = model.coriolis.at(&aff.point(*xi));
                let vals: Vec<Vector3<f64>> = dofs.iter().map(|g| b[*g].value(c, *xi)).collect();
                for (a, i) in dofs.iter().enumerate() {
                    for (bb, j) in dofs.iter().enumerate() {
                        m[(*i, *j)] += w * aff.det * f * aff.k.cross(&vals[bb]).dot(&vals[a]);
                    }
                }
            }
        }
        m
    }

    /// Dense `B[k, j] = <div w_j, phi_k>`.
    pub fn divergence_matrix(&self) -> DMatrix<f64> {
        let (b1, b2) = (&self.basis[1], &self.basis[2]);
        let mut m = DMatrix::zeros(b2.len(), b1.len());
        for (c, aff) in self.aff.iter().enumerate() {
            let (d1, d2) = (self.support(SpaceId::W1, c), self.support(SpaceId::W2, c));
            for (xi, w) in self.vol.points.iter().zip(&self.vol.weights) {
                for k in &d2 {
                    let phi = b2[*k].scalar(c, *xi);
                    for j in &d1 {
                        m[(*k, *j)] += w * aff.det * phi * b1[*j].div(aff, c, *xi);
                    }
                }
            }
        }
        m
    }

    fn dense_solve(m: DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
        let lu = m.lu();
        lu.solve(&DVector::from_column_slice(b))
            .map(|x| x.as_slice().to_vec())
            .ok_or_else(|| Error::Solver { reason: "singular dense system".into(), residual: f64::NAN })
    }

    /// L2 projection of a pointwise integrand: `b_i = int a_i . f`.
    fn project(&self, id: SpaceId, f: impl Fn(usize, [f64; 2], &Point) -> Vector3<f64>) -> Result<Field> {
        let basis = &self.basis[index(id)];
        let mut rhs = vec![0.0; basis.len()];
        for (c, aff) in self.aff.iter().enumerate() {
            let dofs = self.support(id, c);
            for (xi, w) in self.vol.points.iter().zip(&self.vol.weights) {
                let val = f(c, *xi, &aff.point(*xi));
                for g in &dofs {
                    rhs[*g] += w * aff.det * basis[*g].value(c, *xi).dot(&val);
                }
            }
        }
        self.field(id, Self::dense_solve(self.mass_matrix(id, None), &rhs)?)
    }

    /// `U(d, flux)` with a dense weighted mass solve.
    pub fn recover_velocity(&self, d: &Field, flux: &Field) -> Result<Field> {
        let m = self.mass_matrix(SpaceId::W1, None);
        let rhs = &m * DVector::from_column_slice(&flux.values);
        let wm = self.mass_matrix(SpaceId::W1, Some(&self.poly(d)));
        self.field(SpaceId::W1, Self::dense_solve(wm, rhs.as_slice())?)
    }

    /// `(P(D u), P(|u|^2 / 2 + g (D + b)))`.
    pub fn variations(&self, model: &Model, z: &State) -> Result<(Field, Field)> {
        let (u, d, b) = (self.poly(&z.u), self.poly(&z.d), self.poly(&model.topography));
        let flux = self.project(SpaceId::W1, |c, xi, _| u.value(c, xi) * d.scalar(c, xi))?;
        let g = model.gravity;
        let gamma = self.project(SpaceId::W2, |c, xi, _| {
            Vector3::new(0.5 * u.value(c, xi).norm_squared() + g * (d.scalar(c, xi) + b.scalar(c, xi)), 0.0, 0.0)
        })?;
        Ok((flux, gamma))
    }

    /// Potential vorticity from `<eta, q D> = -<grad^perp eta, u> + <eta, f>`.
    pub fn potential_vorticity(&self, model: &Model, u: &Field, d: &Field) -> Result<Field> {
        let (up, dp) = (self.poly(u), self.poly(d));
        let basis = &self.basis[0];
        let mut rhs = vec![0.0; basis.len()];
        for (c, aff) in self.aff.iter().enumerate() {
            for (xi, w) in self.vol.points.iter().zip(&self.vol.weights) {
                let x = aff.point(*xi);
                let uv = up.value(c, *xi);
                for g in self.support(SpaceId::W0, c) {
                    let eta = basis[g].scalar(c, *xi);
                    let grad_perp = aff.k.cross(&basis[g].grad(aff, c, *xi));
                    rhs[g] += w * aff.det * (eta * model.coriolis.at(&x) - grad_perp.dot(&uv));
                }
            }
        }
        self.field(SpaceId::W0, Self::dense_solve(self.mass_matrix(SpaceId::W0, Some(&dp)), &rhs)?)
    }

    // --------------------------------------------------------------- brackets

    /// Velocity and depth parts of the bracket for test fields `(v, phi)`,
    /// with `v_rec = U(d, v)` supplied explicitly.
    fn bracket_parts(&self, model: &Model, variant: BracketVariant, inp: &PolyInputs, v: &PolyField, v_rec: &PolyField, phi: &PolyField) -> (f64, f64) {
        let du = match variant {
            BracketVariant::Original => {
                self.vorticity_form(inp.q.as_ref().unwrap(), &inp.flux, v) + self.pressure_divergence_form(&inp.gamma, v)
            }
            BracketVariant::DUpwind => {
                self.vorticity_form(inp.q.as_ref().unwrap(), &inp.flux, v)
                    + self.pressure_upwind_form(&inp.d, &inp.gamma, &inp.sel, v_rec)
            }
            BracketVariant::FullUpwind => {
                self.advection_form(Some(&inp.d), &inp.rec, &inp.u, &inp.sel, v_rec)
                    + self.forcing_form(model, &inp.d, &inp.rec, &inp.gamma, &inp.sel, v_rec)
            }
            BracketVariant::UUpwindOnly => {
                self.advection_form(Some(&inp.d), &inp.rec, &inp.u, &inp.sel, v_rec)
                    + self.pressure_divergence_form(&inp.gamma, v)
                    + self.coriolis_form(model, Some(&inp.d), &inp.rec, v_rec)
            }
            BracketVariant::NonEc => {
                self.advection_form(None, &inp.rec, &inp.u, &inp.sel, v)
                    + self.coriolis_form(model, None, &inp.rec, v)
                    + self.pressure_divergence_form(&inp.gamma, v)
            }
        };
        let dd = match variant {
            BracketVariant::Original | BracketVariant::UUpwindOnly => self.flux_divergence_form(&inp.flux, phi),
            _ => self.depth_advection_form(&inp.rec, &inp.d_adv, &inp.sel, phi),
        };
        (du, dd)
    }

    fn inputs(&self, model: &Model, variant: BracketVariant, f: FieldInputs) -> Result<PolyInputs> {
        let q = if variant.uses_pv() { Some(self.poly(&self.potential_vorticity(model, f.u, f.d)?)) } else { None };
        Ok(PolyInputs {
            u: self.poly(f.u),
            d: self.poly(f.d),
            d_adv: self.poly(f.d_adv),
            sel: self.poly(f.sel),
            flux: self.poly(f.flux),
            rec: self.poly(f.rec),
            gamma: self.poly(f.gamma),
            q,
        })
    }

    /// Velocity and depth parts of `B((w, phi), (c, gamma))` at state `z`.
    pub fn bracket_rhs(
        &self,
        model: &Model,
        variant: BracketVariant,
        z: &State,
        hvar: (&Field, &Field),
        test: (&Field, &Field),
    ) -> Result<(f64, f64)> {
        let rec = self.recover_velocity(&z.d, hvar.0)?;
        let inp = self.inputs(
            model,
            variant,
            FieldInputs { u: &z.u, d: &z.d, d_adv: &z.d, sel: &z.u, flux: hvar.0, rec: &rec, gamma: hvar.1 },
        )?;
        let w_rec = self.recover_velocity(&z.d, test.0)?;
        Ok(self.bracket_parts(model, variant, &inp, &self.poly(test.0), &self.poly(&w_rec), &self.poly(test.1)))
    }

    /// Time-averaged variations `(flux, gamma, recovered)` between two states.
    pub fn time_averages(&self, model: &Model, scheme: Scheme, zn: &State, zk: &State) -> Result<(Field, Field, Field)> {
        let (un, uk, dn, dk) = (self.poly(&zn.u), self.poly(&zk.u), self.poly(&zn.d), self.poly(&zk.d));
        let b = self.poly(&model.topography);
        let g = model.gravity;
        let d_bar = zn.d.lincomb(0.5, &zk.d, 0.5);
        let u_bar = zn.u.lincomb(0.5, &zk.u, 0.5);
        let integrand = |c: usize, xi: [f64; 2]| {
            let (a, bb, p, q) = (un.value(c, xi), uk.value(c, xi), dn.scalar(c, xi), dk.scalar(c, xi));
            match scheme {
                Scheme::Poisson => (a * p + a * (0.5 * q) + bb * (0.5 * p) + bb * q) / 3.0,
                Scheme::Midpoint => (a + bb) * (0.25 * (p + q)),
            }
        };
        let flux = self.project(SpaceId::W1, |c, xi, _| integrand(c, xi))?;
        let gamma = self.project(SpaceId::W2, |c, xi, _| {
            let (a, bb) = (un.value(c, xi), uk.value(c, xi));
            let ke = match scheme {
                Scheme::Poisson => (a.norm_squared() + a.dot(&bb) + bb.norm_squared()) / 6.0,
                Scheme::Midpoint => 0.125 * (a + bb).norm_squared(),
            };
            Vector3::new(ke + g * (0.5 * (dn.scalar(c, xi) + dk.scalar(c, xi)) + b.scalar(c, xi)), 0.0, 0.0)
        })?;
        let rec = match scheme {
            Scheme::Poisson => self.recover_velocity(&d_bar, &flux)?,
            Scheme::Midpoint => u_bar,
        };
        Ok((flux, gamma, rec))
    }

    /// `(R_u, R_D)` of the explicit Picard residual, built from `U(D_bar, w_i)`
    /// computed for every basis function.
    pub fn residual_explicit(
        &self,
        model: &Model,
        variant: BracketVariant,
        cfg: &StepConfig,
        zn: &State,
        zk: &State,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let (flux, gamma, rec) = self.time_averages(model, cfg.scheme, zn, zk)?;
        let d_bar = zn.d.lincomb(0.5, &zk.d, 0.5);
        let u_bar = zn.u.lincomb(0.5, &zk.u, 0.5);
        let inp = self.inputs(
            model,
            variant,
            FieldInputs { u: &u_bar, d: &d_bar, d_adv: &d_bar, sel: &u_bar, flux: &flux, rec: &rec, gamma: &gamma },
        )?;
        let m1 = self.mass_matrix(SpaceId::W1, None);
        let w = self.mass_matrix(SpaceId::W1, Some(&inp.d));
        let w_lu = w.lu();
        let zero2 = self.poly(&Field::zeros(&self.disc.w2));
        let zero1 = self.poly(&Field::zeros(&self.disc.w1));
        let du = DVector::from_iterator(zk.u.dim(), zk.u.values.iter().zip(&zn.u.values).map(|(a, b)| a - b));
        let mdu = &m1 * du;
        let mut ru = vec![0.0; zk.u.dim()];
        for (i, r) in ru.iter_mut().enumerate() {
            let rec_i = w_lu
                .solve(&m1.column(i).into_owned())
                .ok_or_else(|| Error::Solver { reason: "singular weighted mass".into(), residual: f64::NAN })?;
            let (g, _) = self.bracket_parts(model, variant, &inp, &self.basis[1][i], &self.poly_of(SpaceId::W1, rec_i.as_slice()), &zero2);
            *r = mdu[i] - cfg.dt * g;
        }
        let m2 = self.mass_matrix(SpaceId::W2, None);
        let dd = DVector::from_iterator(zk.d.dim(), zk.d.values.iter().zip(&zn.d.values).map(|(a, b)| a - b));
        let mdd = &m2 * dd;
        let mut rd = vec![0.0; zk.d.dim()];
        for (k, r) in rd.iter_mut().enumerate() {
            let (_, g) = self.bracket_parts(model, variant, &inp, &zero1, &zero1, &self.basis[2][k]);
            *r = mdd[k] - cfg.dt * g;
        }
        Ok((ru, rd))
    }

    /// Solves the linearised block system `J dz = -(ru, rd)` densely.
    pub fn jacobian_solve(&self, model: &Model, dt: f64, height: f64, ru: &[f64], rd: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (n1, n2) = (ru.len(), rd.len());
        let m1 = self.mass_matrix(SpaceId::W1, None);
        let c = self.coriolis_matrix(model);
        let b = self.divergence_matrix();
        let m2 = self.mass_matrix(SpaceId::W2, None);
        let g = model.gravity;
        let mut j = DMatrix::zeros(n1 + n2, n1 + n2);
        j.view_mut((0, 0), (n1, n1)).copy_from(&(&m1 + &c * (0.5 * dt)));
        j.view_mut((0, n1), (n1, n2)).copy_from(&(b.transpose() * (-0.5 * dt * g)));
        j.view_mut((n1, 0), (n2, n1)).copy_from(&(&b * (0.5 * dt * height)));
        j.view_mut((n1, n1), (n2, n2)).copy_from(&m2);
        let rhs: Vec<f64> = ru.iter().chain(rd).map(|x| -x).collect();
        let x = Self::dense_solve(j, &rhs)?;
        Ok((x[..n1].to_vec(), x[n1..].to_vec()))
    }
}

struct FieldInputs<'f> {
    u: &'f Field,
    d: &'f Field,
    d_adv: &'f Field,
    sel: &'f Field,
    flux: &'f Field,
    rec: &'f Field,
    gamma: &'f Field,
}

struct PolyInputs {
    u: PolyField,
    d: PolyField,
    d_adv: PolyField,
    sel: PolyField,
    flux: PolyField,
    rec: PolyField,
    gamma: PolyField,
    q: Option<PolyField>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(disc: &Discretisation, id: SpaceId, seed: u64) -> Field {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let s = disc.space(id);
        Field::from_values(s, (0..s.dim).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn polynomial_fit_reproduces_point_values() {
        let disc = Discretisation::new(Mesh::periodic_square(2, 1.0).unwrap()).unwrap();
        let o = Oracle::new(&disc).unwrap();
        for (k, id) in [SpaceId::W0, SpaceId::W1, SpaceId::W2].into_iter().enumerate() {
            let f = random(&disc, id, k as u64);
            let p = o.poly(&f);
            for c in 0..disc.mesh.n_cells() {
                for xi in [[0.13, 0.71], [0.4, 0.2], [0.05, 0.05]] {
                    assert!((p.value(c, xi) - disc.eval_at(&f, c, xi)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn area_and_divergence_theorem() {
        let disc = Discretisation::new(Mesh::periodic_square(2, 3.0).unwrap()).unwrap();
        let o = Oracle::new(&disc).unwrap();
        let one = disc.project_scalar(SpaceId::W2, |_, _| 1.0).unwrap();
        let p1 = o.poly(&one);
        assert!((o.integrate(|c, xi, _| p1.scalar(c, xi)) - 9.0).abs() < 1e-12);
        let v = o.poly(&random(&disc, SpaceId::W1, 4));
        assert!(o.pressure_divergence_form(&p1, &v).abs() < 1e-12);
        let m = o.mass_matrix(SpaceId::W2, None);
        let x = DVector::from_column_slice(&one.values);
        assert!(((x.transpose() * &m * &x)[0] - 9.0).abs() < 1e-11);
    }

    #[test]
    fn sphere_facets_are_consistent() {
        let disc = Discretisation::new(Mesh::icosahedral_sphere(0, 1.0).unwrap()).unwrap();
        let o = Oracle::new(&disc).unwrap();
        for fp in &o.facet_points {
            let a = o.aff[fp.sides[0].cell].point(fp.sides[0].xi);
            let b = o.aff[fp.sides[1].cell].point(fp.sides[1].xi);
            assert!((a - b).norm() < 1e-12);
        }
        let total: f64 = o.facet_points.iter().map(|f| f.weight).sum();
        let edge = (disc.mesh.vertices[disc.mesh.cells[0][0]] - disc.mesh.vertices[disc.mesh.cells[0][1]]).norm();
        assert!((total - 30.0 * edge).abs() < 1e-10);
    }
}
