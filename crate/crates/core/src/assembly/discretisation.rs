//! The compatible triple (W0, W1, W2) = (CG3, BDM2, DG1) on a mesh, together
//! with the quadrature, tabulations and mass operators shared by all forms.

use std::sync::{Arc, OnceLock};

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::fem::element::{ElementKind, Tabulation};
use crate::fem::geometry::CellGeometry;
use crate::fem::quadrature::{edge_rule, triangle_rule, QuadratureRule};
use crate::mesh::{FacetFrame, FacetSide, Mesh, Point, LOCAL_EDGE_VERTICES};

use super::space::{CellPattern, Field, FunctionSpace};
use super::sparse::{SparseOperator, SpdSolver};

pub const DEFAULT_VOLUME_DEGREE: usize = 8;
pub const DEFAULT_FACET_DEGREE: usize = 8;

/// Which of the three spaces a form acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceId {
    W0,
    W1,
    W2,
}

/// A W1 field at the volume quadrature points: value, derivatives along the
/// reference directions (as physical vectors) and divergence.
#[derive(Debug, Clone)]
pub struct VectorQp {
    pub val: Vec<Vector3<f64>>,
    pub dref: Vec<[Vector3<f64>; 2]>,
    pub div: Vec<f64>,
}

/// A scalar field at the volume quadrature points: value and surface gradient.
#[derive(Debug, Clone)]
pub struct ScalarQp {
    pub val: Vec<f64>,
    pub grad: Vec<Vector3<f64>>,
}

/// Traces on both sides of every facet, indexed `facet * n_edge_points + k`.
#[derive(Debug, Clone)]
pub struct FacetTrace<T> {
    pub plus: Vec<T>,
    pub minus: Vec<T>,
}

pub struct Discretisation {
    pub mesh: Mesh,
    pub w0: Arc<FunctionSpace>,
    pub w1: Arc<FunctionSpace>,
    pub w2: Arc<FunctionSpace>,
    pub rule: QuadratureRule,
    pub edge_rule: QuadratureRule,
    pub geom: Vec<CellGeometry>,
    /// Physical quadrature points, indexed `cell * nq + q`.
    pub points: Vec<Point>,
    pub tab0: Tabulation,
    pub tab1: Tabulation,
    pub tab2: Tabulation,
    /// Facet tabulations indexed by `[local_edge][aligned]`, points in global edge order.
    facet_tab1: Vec<Tabulation>,
    facet_tab2: Vec<Tabulation>,
    pub frames: Vec<FacetFrame>,
    pattern1: CellPattern,
    pattern0: CellPattern,
    mass1: SpdSolver,
    /// Inverse of the reference DG1 mass matrix.
    mass2_ref_inv: Matrix3<f64>,
    mass2_ref: Matrix3<f64>,
    mass0: OnceLock<std::result::Result<SpdSolver, String>>,
}

impl std::fmt::Debug for Discretisation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Discretisation")
            .field("cells", &self.mesh.n_cells())
            .field("dim_w0", &self.w0.dim)
            .field("dim_w1", &self.w1.dim)
            .field("dim_w2", &self.w2.dim)
            .finish()
    }
}

impl Discretisation {
    pub fn new(mesh: Mesh) -> Result<Self> {
        Self::with_degrees(mesh, DEFAULT_VOLUME_DEGREE, DEFAULT_FACET_DEGREE)
    }

    pub fn with_degrees(mesh: Mesh, volume_degree: usize, facet_degree: usize) -> Result<Self> {
        let w0 = Arc::new(FunctionSpace::new(&mesh, ElementKind::Cg3)?);
        let w1 = Arc::new(FunctionSpace::new(&mesh, ElementKind::Bdm2)?);
        let w2 = Arc::new(FunctionSpace::new(&mesh, ElementKind::Dg1)?);
        let rule = triangle_rule(volume_degree)?;
        let erule = edge_rule(facet_degree)?;
        let geom = (0..mesh.n_cells())
            .map(|c| CellGeometry::new(c, &mesh.cell_coords[c]))
            .collect::<Result<Vec<_>>>()?;
        let points = geom.iter().flat_map(|g| rule.points.iter().map(move |x| g.point(*x))).collect();
        let tab0 = w0.element.tabulate(&rule.points);
        let tab1 = w1.element.tabulate(&rule.points);
        let tab2 = w2.element.tabulate(&rule.points);
        let mut facet_tab1 = Vec::with_capacity(6);
        let mut facet_tab2 = Vec::with_capacity(6);
        for e in 0..3 {
            for aligned in [false, true] {
                let pts: Vec<[f64; 2]> = erule
                    .points
                    .iter()
                    .map(|p| {
                        let s = if aligned { p[0] } else { 1.0 - p[0] };
                        crate::fem::element::reference_edge_point(e, s)
                    })
                    .collect();
                facet_tab1.push(w1.element.tabulate(&pts));
                facet_tab2.push(w2.element.tabulate(&pts));
            }
        }
        let frames = (0..mesh.facets.len()).map(|f| mesh.facet_frame(f, &erule)).collect();
        let pattern1 = CellPattern::new(&w1, &w1);
        let pattern0 = CellPattern::new(&w0, &w0);

        let mut mass2_ref = Matrix3::zeros();
        for (q, w) in rule.weights.iter().enumerate() {
            for i in 0..3 {
                for j in 0..3 {
                    mass2_ref[(i, j)] += w * tab2.value(q, i, 0) * tab2.value(q, j, 0);
                }
            }
        }
        let mass2_ref_inv = mass2_ref.try_inverse().ok_or_else(|| Error::Element("singular DG1 mass".into()))?;

        let mass1 = SpdSolver::new(w1_mass(&pattern1, &w1, &geom, &rule, &tab1, None))?;
        Ok(Discretisation {
            mesh,
            w0,
            w1,
            w2,
            rule,
            edge_rule: erule,
            geom,
            points,
            tab0,
            tab1,
            tab2,
            facet_tab1,
            facet_tab2,
            frames,
            mass1,
            pattern1,
            pattern0,
            mass2_ref_inv,
            mass2_ref,
            mass0: OnceLock::new(),
        })
    }

    pub fn nq(&self) -> usize {
        self.rule.len()
    }

    pub fn n_edge_points(&self) -> usize {
        self.edge_rule.len()
    }

    pub fn space(&self, id: SpaceId) -> &Arc<FunctionSpace> {
        match id {
            SpaceId::W0 => &self.w0,
            SpaceId::W1 => &self.w1,
            SpaceId::W2 => &self.w2,
        }
    }

    fn volume_tab(&self, id: SpaceId) -> &Tabulation {
        match id {
            SpaceId::W0 => &self.tab0,
            SpaceId::W1 => &self.tab1,
            SpaceId::W2 => &self.tab2,
        }
    }

    pub fn facet_tab1(&self, side: &FacetSide) -> &Tabulation {
        &self.facet_tab1[2 * side.local_edge + side.aligned as usize]
    }

    pub fn facet_tab2(&self, side: &FacetSide) -> &Tabulation {
        &self.facet_tab2[2 * side.local_edge + side.aligned as usize]
    }

    // ---------------------------------------------------------------- evaluation

    pub fn eval_w1(&self, u: &Field) -> VectorQp {
        let (nq, nc) = (self.nq(), self.mesh.n_cells());
        let mut out = VectorQp {
            val: Vec::with_capacity(nq * nc),
            dref: Vec::with_capacity(nq * nc),
            div: Vec::with_capacity(nq * nc),
        };
        let mut loc = [0.0; 12];
        let t = &self.tab1;
        for c in 0..nc {
            self.w1.gather(c, &u.values, &mut loc);
            let g = &self.geom[c];
            for q in 0..nq {
                let (mut v, mut d0, mut d1, mut dv) = ([0.0; 2], [0.0; 2], [0.0; 2], 0.0);
                for (i, a) in loc.iter().enumerate() {
                    for comp in 0..2 {
                        v[comp] += a * t.value(q, i, comp);
                        d0[comp] += a * t.deriv(q, i, comp, 0);
                        d1[comp] += a * t.deriv(q, i, comp, 1);
                    }
                    dv += a * t.div(q, i);
                }
                out.val.push(g.piola(v));
                out.dref.push([g.piola(d0), g.piola(d1)]);
                out.div.push(dv / g.det);
            }
        }
        out
    }

    pub fn eval_scalar(&self, id: SpaceId, s: &Field) -> ScalarQp {
        let space = self.space(id);
        let t = self.volume_tab(id);
        let (nq, nc) = (self.nq(), self.mesh.n_cells());
        let mut out = ScalarQp { val: Vec::with_capacity(nq * nc), grad: Vec::with_capacity(nq * nc) };
        let mut loc = vec![0.0; space.n_local];
        for c in 0..nc {
            space.gather(c, &s.values, &mut loc);
            let g = &self.geom[c];
            for q in 0..nq {
                let (mut v, mut gr) = (0.0, [0.0; 2]);
                for (i, a) in loc.iter().enumerate() {
                    v += a * t.value(q, i, 0);
                    gr[0] += a * t.deriv(q, i, 0, 0);
                    gr[1] += a * t.deriv(q, i, 0, 1);
                }
                out.val.push(v);
                out.grad.push(g.gradient(gr));
            }
        }
        out
    }

    /// W1 traces on both sides of every facet.
    pub fn facet_w1(&self, u: &Field) -> FacetTrace<Vector3<f64>> {
        let ne = self.n_edge_points();
        let mut tr = FacetTrace { plus: Vec::with_capacity(ne * self.frames.len()), minus: Vec::with_capacity(ne * self.frames.len()) };
        let mut loc = [0.0; 12];
        for f in &self.mesh.facets {
            for (side, out) in [(&f.plus, &mut tr.plus), (&f.minus, &mut tr.minus)] {
                self.w1.gather(side.cell, &u.values, &mut loc);
                let t = self.facet_tab1(side);
                let g = &self.geom[side.cell];
                for k in 0..ne {
                    let mut v = [0.0; 2];
                    for (i, a) in loc.iter().enumerate() {
                        v[0] += a * t.value(k, i, 0);
                        v[1] += a * t.value(k, i, 1);
                    }
                    out.push(g.piola(v));
                }
            }
        }
        tr
    }

    /// W2 traces on both sides of every facet.
    pub fn facet_w2(&self, s: &Field) -> FacetTrace<f64> {
        let ne = self.n_edge_points();
        let mut tr = FacetTrace { plus: Vec::with_capacity(ne * self.frames.len()), minus: Vec::with_capacity(ne * self.frames.len()) };
        let mut loc = [0.0; 3];
        for f in &self.mesh.facets {
            for (side, out) in [(&f.plus, &mut tr.plus), (&f.minus, &mut tr.minus)] {
                self.w2.gather(side.cell, &s.values, &mut loc);
                let t = self.facet_tab2(side);
                for k in 0..ne {
                    out.push((0..3).map(|i| loc[i] * t.value(k, i, 0)).sum());
                }
            }
        }
        tr
    }

    /// Value of a field at reference point `xi` of cell `c` (scalar spaces
    /// return the value in the first component).
    pub fn eval_at(&self, field: &Field, c: usize, xi: [f64; 2]) -> Vector3<f64> {
        let space = &field.space;
        let t = space.element.tabulate(&[xi]);
        let mut loc = vec![0.0; space.n_local];
        space.gather(c, &field.values, &mut loc);
        if space.kind == ElementKind::Bdm2 {
            let mut v = [0.0; 2];
            for (i, a) in loc.iter().enumerate() {
                v[0] += a * t.value(0, i, 0);
                v[1] += a * t.value(0, i, 1);
            }
            self.geom[c].piola(v)
        } else {
            Vector3::new(loc.iter().enumerate().map(|(i, a)| a * t.value(0, i, 0)).sum(), 0.0, 0.0)
        }
    }

    // ------------------------------------------------------------ linear forms

    /// `b_i = sum_K int (A . v_i + sum_j B_j . d_j v_i + c div v_i)` over W1 basis
    /// functions, where `d_j` is the derivative along reference direction `j`.
    /// The kernel receives `(cell, q)` and returns the pointwise `(A, [B_0, B_1], c)`.
    pub fn assemble_w1(&self, mut kernel: impl FnMut(usize, usize) -> (Vector3<f64>, [Vector3<f64>; 2], f64)) -> Vec<f64> {
        let mut b = vec![0.0; self.w1.dim];
        let mut loc = [0.0; 12];
        let t = &self.tab1;
        for c in 0..self.mesh.n_cells() {
            let g = &self.geom[c];
            loc.iter_mut().for_each(|v| *v = 0.0);
            for (q, w) in self.rule.weights.iter().enumerate() {
                let (a, bb, d) = kernel(c, q);
                // The Piola factor 1/det cancels against the measure det.
                let ah = g.jt(&a);
                let b0 = g.jt(&bb[0]);
                let b1 = g.jt(&bb[1]);
                for (i, l) in loc.iter_mut().enumerate() {
                    let mut s = ah[0] * t.value(q, i, 0) + ah[1] * t.value(q, i, 1);
                    for comp in 0..2 {
                        s += b0[comp] * t.deriv(q, i, comp, 0) + b1[comp] * t.deriv(q, i, comp, 1);
                    }
                    s += d * t.div(q, i);
                    *l += w * s;
                }
            }
            self.w1.scatter_add(c, &loc, &mut b);
        }
        b
    }

    /// `b_i = sum_K int (a phi_i + g . grad phi_i)` over a scalar space.
    pub fn assemble_scalar(&self, id: SpaceId, mut kernel: impl FnMut(usize, usize) -> (f64, Vector3<f64>)) -> Vec<f64> {
        let space = self.space(id);
        let t = self.volume_tab(id);
        let mut b = vec![0.0; space.dim];
        let mut loc = vec![0.0; space.n_local];
        for c in 0..self.mesh.n_cells() {
            let g = &self.geom[c];
            loc.iter_mut().for_each(|v| *v = 0.0);
            for (q, w) in self.rule.weights.iter().enumerate() {
                let (a, gv) = kernel(c, q);
                let gh = g.reference_components(&gv);
                for (i, l) in loc.iter_mut().enumerate() {
                    *l += w * g.det * (a * t.value(q, i, 0) + gh[0] * t.deriv(q, i, 0, 0) + gh[1] * t.deriv(q, i, 0, 1));
                }
            }
            space.scatter_add(c, &loc, &mut b);
        }
        b
    }

    /// Adds `weight * A . v_i` at facet point `k` for the W1 basis of one side.
    pub fn add_facet_w1(&self, side: &FacetSide, k: usize, a: &Vector3<f64>, b: &mut [f64]) {
        let g = &self.geom[side.cell];
        let t = self.facet_tab1(side);
        let ah = g.jt(a);
        let dofs = self.w1.dofs(side.cell);
        let signs = self.w1.signs(side.cell);
        for i in 0..12 {
            let v = (ah[0] * t.value(k, i, 0) + ah[1] * t.value(k, i, 1)) / g.det;
            b[dofs[i]] += signs[i] * v;
        }
    }

    /// Adds `a phi_i` at facet point `k` for the W2 basis of one side.
    pub fn add_facet_w2(&self, side: &FacetSide, k: usize, a: f64, b: &mut [f64]) {
        let t = self.facet_tab2(side);
        let dofs = self.w2.dofs(side.cell);
        for i in 0..3 {
            b[dofs[i]] += a * t.value(k, i, 0);
        }
    }

    // --------------------------------------------------------------- operators

    /// W1 mass matrix, optionally weighted by a scalar field at the quadrature points.
    pub fn weighted_mass_w1(&self, weight: Option<&[f64]>) -> SparseOperator {
        w1_mass(&self.pattern1, &self.w1, &self.geom, &self.rule, &self.tab1, weight)
    }

    /// W0 mass matrix, optionally weighted.
    pub fn weighted_mass_w0(&self, weight: Option<&[f64]>) -> SparseOperator {
        let nq = self.nq();
        let t = &self.tab0;
        self.pattern0.assemble(&self.w0, &self.w0, |c, m| {
            let g = &self.geom[c];
            for (q, w) in self.rule.weights.iter().enumerate() {
                let rho = weight.map_or(1.0, |d| d[c * nq + q]);
                let s = w * rho * g.det;
                for i in 0..10 {
                    let a = s * t.value(q, i, 0);
                    for j in 0..10 {
                        m[i * 10 + j] += a * t.value(q, j, 0);
                    }
                }
            }
        })
    }

    /// Block-diagonal W2 mass matrix as a sparse operator.
    pub fn mass_w2(&self) -> SparseOperator {
        let mut t = Vec::with_capacity(9 * self.mesh.n_cells());
        for c in 0..self.mesh.n_cells() {
            let d = self.w2.dofs(c);
            for i in 0..3 {
                for j in 0..3 {
                    t.push((d[i], d[j], self.geom[c].det * self.mass2_ref[(i, j)]));
                }
            }
        }
        SparseOperator::from_triplets(self.w2.dim, self.w2.dim, &t)
    }

    pub fn mass_w1(&self) -> &SparseOperator {
        self.mass1.operator()
    }

    pub fn apply_mass(&self, id: SpaceId, x: &[f64]) -> Result<Vec<f64>> {
        Ok(match id {
            SpaceId::W1 => self.mass1.operator().matvec(x),
            SpaceId::W2 => {
                let mut y = vec![0.0; x.len()];
                for c in 0..self.mesh.n_cells() {
                    let d = self.w2.dofs(c);
                    for i in 0..3 {
                        y[d[i]] = self.geom[c].det * (0..3).map(|j| self.mass2_ref[(i, j)] * x[d[j]]).sum::<f64>();
                    }
                }
                y
            }
            SpaceId::W0 => self.mass0_solver()?.operator().matvec(x),
        })
    }

    /// Solves `M x = b` for the plain mass matrix of a space.
    pub fn solve_mass(&self, id: SpaceId, b: &[f64]) -> Result<Vec<f64>> {
        match id {
            SpaceId::W1 => self.mass1.solve(b),
            SpaceId::W2 => {
                if b.len() != self.w2.dim {
                    return Err(Error::Dimension(format!("W2 rhs of length {}", b.len())));
                }
                let mut x = vec![0.0; b.len()];
                for c in 0..self.mesh.n_cells() {
                    let d = self.w2.dofs(c);
                    for i in 0..3 {
                        x[d[i]] = (0..3).map(|j| self.mass2_ref_inv[(i, j)] * b[d[j]]).sum::<f64>() / self.geom[c].det;
                    }
                }
                Ok(x)
            }
            SpaceId::W0 => self.mass0_solver()?.solve(b),
        }
    }

    /// Factorised weighted mass matrix of W0 or W1, reusing the symbolic
    /// analysis of the plain mass matrix.
    pub fn weighted_mass_solver(&self, id: SpaceId, weight: &[f64]) -> Result<SpdSolver> {
        match id {
            SpaceId::W1 => self.mass1.sibling(self.weighted_mass_w1(Some(weight))),
            SpaceId::W0 => self.mass0_solver()?.sibling(self.weighted_mass_w0(Some(weight))),
            SpaceId::W2 => Err(Error::Dimension("W2 mass is block diagonal; use solve_mass".into())),
        }
    }

    fn mass0_solver(&self) -> Result<&SpdSolver> {
        self.mass0
            .get_or_init(|| SpdSolver::new(self.weighted_mass_w0(None)).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|e| Error::Solver { reason: e.clone(), residual: f64::NAN })
    }

    /// `B[k, j] = <div w_j, phi_k>` (W2 rows, W1 columns).
    pub fn divergence_operator(&self) -> SparseOperator {
        let t1 = &self.tab1;
        let t2 = &self.tab2;
        let mut trip = Vec::with_capacity(36 * self.mesh.n_cells());
        for c in 0..self.mesh.n_cells() {
            let (d1, s1, d2) = (self.w1.dofs(c), self.w1.signs(c), self.w2.dofs(c));
            for k in 0..3 {
                for j in 0..12 {
                    // div w = div_ref / det and dx = det dxi.
                    let v: f64 = self.rule.weights.iter().enumerate().map(|(q, w)| w * t1.div(q, j) * t2.value(q, k, 0)).sum();
                    trip.push((d2[k], d1[j], s1[j] * v));
                }
            }
        }
        SparseOperator::from_triplets(self.w2.dim, self.w1.dim, &trip)
    }

    /// `B^T M2^{-1} B`, assembled cell by cell since W2 is discontinuous.
    pub fn divergence_schur(&self) -> SparseOperator {
        let t1 = &self.tab1;
        let t2 = &self.tab2;
        let minv = self.mass2_ref_inv;
        self.pattern1.assemble(&self.w1, &self.w1, |c, m| {
            let mut b = [[0.0; 12]; 3];
            for (k, row) in b.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = self.rule.weights.iter().enumerate().map(|(q, w)| w * t1.div(q, j) * t2.value(q, k, 0)).sum();
                }
            }
            let s = 1.0 / self.geom[c].det;
            for i in 0..12 {
                for j in 0..12 {
                    let mut acc = 0.0;
                    for k in 0..3 {
                        for l in 0..3 {
                            acc += b[k][i] * minv[(k, l)] * b[l][j];
                        }
                    }
                    m[i * 12 + j] = s * acc;
                }
            }
        })
    }

    /// `C[i, j] = <f k x w_j, w_i>` for a Coriolis parameter given at the quadrature points.
    pub fn coriolis_operator(&self, f: &[f64]) -> SparseOperator {
        let nq = self.nq();
        let t = &self.tab1;
        self.pattern1.assemble(&self.w1, &self.w1, |c, m| {
            let g = &self.geom[c];
            for (q, w) in self.rule.weights.iter().enumerate() {
                let s = w * f[c * nq + q] / g.det;
                let vals: Vec<Vector3<f64>> = (0..12).map(|i| g.push([t.value(q, i, 0), t.value(q, i, 1)])).collect();
                for i in 0..12 {
                    for j in 0..12 {
                        m[i * 12 + j] += s * g.normal.cross(&vals[j]).dot(&vals[i]);
                    }
                }
            }
        })
    }

    // ---------------------------------------------------------- projections

    /// L2 projection of a pointwise-defined vector field into W1.
    pub fn project_w1(&self, mut f: impl FnMut(usize, &Point) -> Vector3<f64>) -> Result<Field> {
        let nq = self.nq();
        let b = self.assemble_w1(|c, q| (f(c, &self.points[c * nq + q]), [Vector3::zeros(); 2], 0.0));
        Field::from_values(&self.w1, self.mass1.solve(&b)?)
    }

    /// L2 projection into W1 of values given at the volume quadrature points.
    pub fn project_w1_samples(&self, samples: &[Vector3<f64>]) -> Result<Field> {
        let nq = self.nq();
        let b = self.assemble_w1(|c, q| (samples[c * nq + q], [Vector3::zeros(); 2], 0.0));
        Field::from_values(&self.w1, self.mass1.solve(&b)?)
    }

    /// L2 projection of a pointwise-defined scalar into W0 or W2.
    pub fn project_scalar(&self, id: SpaceId, mut f: impl FnMut(usize, &Point) -> f64) -> Result<Field> {
        let nq = self.nq();
        let b = self.assemble_scalar(id, |c, q| (f(c, &self.points[c * nq + q]), Vector3::zeros()));
        Field::from_values(self.space(id), self.solve_mass(id, &b)?)
    }

    /// Projection of values already sampled at the quadrature points.
    pub fn project_samples(&self, id: SpaceId, samples: &[f64]) -> Result<Field> {
        let b = self.assemble_scalar(id, |c, q| (samples[c * self.nq() + q], Vector3::zeros()));
        Field::from_values(self.space(id), self.solve_mass(id, &b)?)
    }

    /// Canonical BDM2 interpolant: normal components at the edge Gauss points
    /// and the interior moments of the pulled-back field.
    pub fn interpolate_w1(&self, f: impl Fn(&Point) -> Vector3<f64>) -> Result<Field> {
        let mut vals = vec![0.0; self.w1.dim];
        let (gs, _) = crate::fem::quadrature::gauss_legendre(3);
        for fc in &self.mesh.facets {
            let side = fc.plus;
            let (c, e) = (side.cell, side.local_edge);
            let [p, q] = LOCAL_EDGE_VERTICES[e];
            let x = &self.mesh.cell_coords[c];
            let tvec = x[q] - x[p];
            let k = (self.geom[fc.plus.cell].normal + self.geom[fc.minus.cell].normal).normalize();
            let n = tvec.cross(&k);
            for (kk, s) in gs.iter().enumerate() {
                let pt = x[p] + tvec * *s;
                let ld = 3 * e + kk;
                vals[self.w1.dofs(c)[ld]] = self.w1.signs(c)[ld] * f(&pt).dot(&n);
            }
        }
        let mr = triangle_rule(10)?;
        for c in 0..self.mesh.n_cells() {
            let g = &self.geom[c];
            for j in 0..3 {
                let m: f64 = mr
                    .points
                    .iter()
                    .zip(&mr.weights)
                    .map(|(xi, w)| {
                        let v = g.pullback(&f(&g.point(*xi)));
                        let psi = crate::fem::element::nedelec_field(j, *xi);
                        w * (v[0] * psi[0] + v[1] * psi[1])
                    })
                    .sum();
                vals[self.w1.dofs(c)[9 + j]] = m;
            }
        }
        Field::from_values(&self.w1, vals)
    }

    // ---------------------------------------------------------- integrals

    /// `int f dx` of values sampled at the volume quadrature points.
    pub fn integrate(&self, samples: &[f64]) -> f64 {
        let nq = self.nq();
        let mut s = 0.0;
        for c in 0..self.mesh.n_cells() {
            let cs: f64 = self.rule.weights.iter().enumerate().map(|(q, w)| w * samples[c * nq + q]).sum();
            s += cs * self.geom[c].det;
        }
        s
    }

    /// Smallest value of a W2 field over volume and facet quadrature points.
    pub fn check_positive(&self, d: &Field) -> Result<()> {
        let nq = self.nq();
        let v = self.eval_scalar(SpaceId::W2, d);
        for (i, x) in v.val.iter().enumerate() {
            if !(*x > 0.0) {
                return Err(Error::Positivity { cell: i / nq, value: *x });
            }
        }
        let tr = self.facet_w2(d);
        let ne = self.n_edge_points();
        for (i, (a, b)) in tr.plus.iter().zip(&tr.minus).enumerate() {
            let f = &self.mesh.facets[i / ne];
            if !(*a > 0.0) {
                return Err(Error::Positivity { cell: f.plus.cell, value: *a });
            }
            if !(*b > 0.0) {
                return Err(Error::Positivity { cell: f.minus.cell, value: *b });
            }
        }
        Ok(())
    }
}

fn w1_mass(
    pattern: &CellPattern,
    w1: &FunctionSpace,
    geom: &[CellGeometry],
    rule: &QuadratureRule,
    t: &Tabulation,
    weight: Option<&[f64]>,
) -> SparseOperator {
    let nq = rule.len();
    pattern.assemble(w1, w1, |c, m| {
        let g = &geom[c];
        let gm = [g.jac[0].dot(&g.jac[0]), g.jac[0].dot(&g.jac[1]), g.jac[1].dot(&g.jac[1])];
        for (q, w) in rule.weights.iter().enumerate() {
            let rho = weight.map_or(1.0, |d| d[c * nq + q]);
            let s = w * rho / g.det;
            for i in 0..12 {
                let (a0, a1) = (t.value(q, i, 0), t.value(q, i, 1));
                let ga = [gm[0] * a0 + gm[1] * a1, gm[1] * a0 + gm[2] * a1];
                for j in 0..12 {
                    m[i * 12 + j] += s * (ga[0] * t.value(q, j, 0) + ga[1] * t.value(q, j, 1));
                }
            }
        }
    })
}
