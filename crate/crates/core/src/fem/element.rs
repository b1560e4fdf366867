//! Reference elements of the (CG3, BDM2, DG1) complex.
//!
//! Each basis is built as the dual basis of its degrees of freedom: the
//! functionals are applied to a monomial basis and the resulting generalised
//! Vandermonde matrix is inverted.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fem::quadrature::{gauss_legendre, triangle_rule};
use crate::mesh::LOCAL_EDGE_VERTICES;

/// Monomial exponents up to total degree 3, ordered by degree.
const MONOMIALS: [(i32, i32); 10] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)];

const REF_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    Cg3,
    Bdm2,
    Dg1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofEntity {
    Vertex(usize),
    Edge(usize),
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DofFunctional {
    PointValue([f64; 2]),
    /// `v(point) . normal` with `normal = rot(t)`, `t` the local edge vector.
    NormalComponent { point: [f64; 2], normal: [f64; 2] },
    /// Moment against a lowest-order Nedelec (first kind) basis field.
    InteriorMoment(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DofDescriptor {
    pub entity: DofEntity,
    pub functional: DofFunctional,
}

#[derive(Debug, Clone)]
pub struct ReferenceElement {
    pub kind: ElementKind,
    /// 1 for scalar elements, 2 for vector-valued ones.
    pub value_dim: usize,
    pub dofs: Vec<DofDescriptor>,
    n_monomials: usize,
    /// Row `i` holds the coefficients of basis function `i` in the primal
    /// basis (`value_dim * n_monomials` entries, component-major).
    coeffs: Vec<f64>,
}

/// Basis values and reference derivatives at a set of points.
///
/// Layout: `values[(p * nbasis + i) * vdim + c]`,
/// `derivs[((p * nbasis + i) * vdim + c) * 2 + j]` for `d/dx_j` of component `c`.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub npoints: usize,
    pub nbasis: usize,
    pub vdim: usize,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
}

impl Tabulation {
    #[inline]
    pub fn value(&self, p: usize, i: usize, c: usize) -> f64 {
        self.values[(p * self.nbasis + i) * self.vdim + c]
    }

    #[inline]
    pub fn deriv(&self, p: usize, i: usize, c: usize, j: usize) -> f64 {
        self.derivs[((p * self.nbasis + i) * self.vdim + c) * 2 + j]
    }

    /// Reference divergence of a vector-valued basis function.
    #[inline]
    pub fn div(&self, p: usize, i: usize) -> f64 {
        self.deriv(p, i, 0, 0) + self.deriv(p, i, 1, 1)
    }
}

fn monomial(m: usize, x: [f64; 2]) -> (f64, [f64; 2]) {
    let (a, b) = MONOMIALS[m];
    let pw = |v: f64, k: i32| if k < 0 { 0.0 } else { v.powi(k) };
    let val = pw(x[0], a) * pw(x[1], b);
    let dx = if a > 0 { a as f64 * pw(x[0], a - 1) * pw(x[1], b) } else { 0.0 };
    let dy = if b > 0 { b as f64 * pw(x[0], a) * pw(x[1], b - 1) } else { 0.0 };
    (val, [dx, dy])
}

/// Lowest-order Nedelec first-kind fields used for the BDM2 interior moments.
pub fn nedelec_field(j: usize, x: [f64; 2]) -> [f64; 2] {
    match j {
        0 => [1.0, 0.0],
        1 => [0.0, 1.0],
        _ => [-x[1], x[0]],
    }
}

/// Reference normal of local edge `e`: `rot(q - p) = (t_y, -t_x)`, not normalised.
pub fn reference_edge_normal(e: usize) -> [f64; 2] {
    let [p, q] = LOCAL_EDGE_VERTICES[e];
    let t = [REF_VERTICES[q][0] - REF_VERTICES[p][0], REF_VERTICES[q][1] - REF_VERTICES[p][1]];
    [t[1], -t[0]]
}

/// Point at parameter `s` along local edge `e` (from its lower to its higher vertex).
pub fn reference_edge_point(e: usize, s: f64) -> [f64; 2] {
    let [p, q] = LOCAL_EDGE_VERTICES[e];
    let (a, b) = (REF_VERTICES[p], REF_VERTICES[q]);
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
}

impl ReferenceElement {
    pub fn new(kind: ElementKind) -> Result<Self> {
        let (value_dim, n_monomials, dofs) = match kind {
            ElementKind::Cg3 => (1, 10, cg3_dofs()),
            ElementKind::Dg1 => (1, 3, dg1_dofs()),
            ElementKind::Bdm2 => (2, 6, bdm2_dofs()),
        };
        let n = dofs.len();
        if n != value_dim * n_monomials {
            return Err(Error::Element(format!("{kind:?}: {n} dofs for a {}-dimensional space", value_dim * n_monomials)));
        }
        let moment_rule = triangle_rule(6)?;
        // V[d][k] = l_d(P_k), P_k the k-th primal basis function.
        let mut v = DMatrix::<f64>::zeros(n, n);
        for (d, dof) in dofs.iter().enumerate() {
            for k in 0..n {
                let (c, m) = (k / n_monomials, k % n_monomials);
                let eval = |x: [f64; 2]| -> [f64; 2] {
                    let mut out = [0.0; 2];
                    out[c] = monomial(m, x).0;
                    out
                };
                v[(d, k)] = match dof.functional {
                    DofFunctional::PointValue(x) => eval(x)[0],
                    DofFunctional::NormalComponent { point, normal } => {
                        let p = eval(point);
                        p[0] * normal[0] + p[1] * normal[1]
                    }
                    DofFunctional::InteriorMoment(j) => moment_rule
                        .points
                        .iter()
                        .zip(&moment_rule.weights)
                        .map(|(x, w)| {
                            let p = eval(*x);
                            let psi = nedelec_field(j, *x);
                            w * (p[0] * psi[0] + p[1] * psi[1])
                        })
                        .sum(),
                };
            }
        }
        let inv = v.try_inverse().ok_or_else(|| Error::Element(format!("{kind:?}: singular dof matrix")))?;
        // Basis i = sum_k inv[k][i] P_k.
        let mut coeffs = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                coeffs[i * n + k] = inv[(k, i)];
            }
        }
        Ok(ReferenceElement { kind, value_dim, dofs, n_monomials, coeffs })
    }

    pub fn n_dofs(&self) -> usize {
        self.dofs.len()
    }

    pub fn tabulate(&self, points: &[[f64; 2]]) -> Tabulation {
        let nb = self.n_dofs();
        let vd = self.value_dim;
        let nm = self.n_monomials;
        let mut values = vec![0.0; points.len() * nb * vd];
        let mut derivs = vec![0.0; points.len() * nb * vd * 2];
        let mut mono = vec![(0.0, [0.0; 2]); nm];
        for (p, x) in points.iter().enumerate() {
            for (m, slot) in mono.iter_mut().enumerate() {
                *slot = monomial(m, *x);
            }
            for i in 0..nb {
                let row = &self.coeffs[i * nb..(i + 1) * nb];
                for c in 0..vd {
                    let (mut val, mut dx, mut dy) = (0.0, 0.0, 0.0);
                    for m in 0..nm {
                        let a = row[c * nm + m];
                        val += a * mono[m].0;
                        dx += a * mono[m].1[0];
                        dy += a * mono[m].1[1];
                    }
                    let base = (p * nb + i) * vd + c;
                    values[base] = val;
                    derivs[base * 2] = dx;
                    derivs[base * 2 + 1] = dy;
                }
            }
        }
        Tabulation { npoints: points.len(), nbasis: nb, vdim: vd, values, derivs }
    }
}

fn cg3_dofs() -> Vec<DofDescriptor> {
    let mut dofs = Vec::with_capacity(10);
    for (v, x) in REF_VERTICES.iter().enumerate() {
        dofs.push(DofDescriptor { entity: DofEntity::Vertex(v), functional: DofFunctional::PointValue(*x) });
    }
    for e in 0..3 {
        for s in [1.0 / 3.0, 2.0 / 3.0] {
            dofs.push(DofDescriptor {
                entity: DofEntity::Edge(e),
                functional: DofFunctional::PointValue(reference_edge_point(e, s)),
            });
        }
    }
    dofs.push(DofDescriptor { entity: DofEntity::Interior, functional: DofFunctional::PointValue([1.0 / 3.0, 1.0 / 3.0]) });
    dofs
}

fn dg1_dofs() -> Vec<DofDescriptor> {
    REF_VERTICES
        .iter()
        .map(|x| DofDescriptor { entity: DofEntity::Interior, functional: DofFunctional::PointValue(*x) })
        .collect()
}

fn bdm2_dofs() -> Vec<DofDescriptor> {
    let (s, _) = gauss_legendre(3);
    let mut dofs = Vec::with_capacity(12);
    for e in 0..3 {
        for sk in &s {
            dofs.push(DofDescriptor {
                entity: DofEntity::Edge(e),
                functional: DofFunctional::NormalComponent {
                    point: reference_edge_point(e, *sk),
                    normal: reference_edge_normal(e),
                },
            });
        }
    }
    for j in 0..3 {
        dofs.push(DofDescriptor { entity: DofEntity::Interior, functional: DofFunctional::InteriorMoment(j) });
    }
    dofs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply(el: &ReferenceElement, d: usize, f: &dyn Fn([f64; 2]) -> [f64; 2]) -> f64 {
        match el.dofs[d].functional {
            DofFunctional::PointValue(x) => f(x)[0],
            DofFunctional::NormalComponent { point, normal } => {
                let v = f(point);
                v[0] * normal[0] + v[1] * normal[1]
            }
            DofFunctional::InteriorMoment(j) => {
                let r = triangle_rule(8).unwrap();
                r.points
                    .iter()
                    .zip(&r.weights)
                    .map(|(x, w)| {
                        let v = f(*x);
                        let psi = nedelec_field(j, *x);
                        w * (v[0] * psi[0] + v[1] * psi[1])
                    })
                    .sum()
            }
        }
    }

    #[test]
    fn dimensions() {
        for (kind, n) in [(ElementKind::Cg3, 10), (ElementKind::Bdm2, 12), (ElementKind::Dg1, 3)] {
            assert_eq!(ReferenceElement::new(kind).unwrap().n_dofs(), n);
        }
    }

    #[test]
    fn basis_is_dual_to_dofs() {
        for kind in [ElementKind::Cg3, ElementKind::Bdm2, ElementKind::Dg1] {
            let el = ReferenceElement::new(kind).unwrap();
            let n = el.n_dofs();
            for i in 0..n {
                let f = |x: [f64; 2]| {
                    let t = el.tabulate(&[x]);
                    if el.value_dim == 1 {
                        [t.value(0, i, 0), 0.0]
                    } else {
                        [t.value(0, i, 0), t.value(0, i, 1)]
                    }
                };
                for d in 0..n {
                    let expect = if d == i { 1.0 } else { 0.0 };
                    let got = apply(&el, d, &f);
                    assert!((got - expect).abs() < 1e-11, "{kind:?}: l_{d}(phi_{i}) = {got}");
                }
            }
        }
    }

    #[test]
    fn bdm2_normal_trace_vanishes_on_other_edges() {
        let el = ReferenceElement::new(ElementKind::Bdm2).unwrap();
        for i in 0..9 {
            let own = i / 3;
            for e in (0..3).filter(|&e| e != own) {
                let n = reference_edge_normal(e);
                for s in [0.1, 0.37, 0.8] {
                    let t = el.tabulate(&[reference_edge_point(e, s)]);
                    let vn = t.value(0, i, 0) * n[0] + t.value(0, i, 1) * n[1];
                    assert!(vn.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let el = ReferenceElement::new(ElementKind::Cg3).unwrap();
        let x = [0.21, 0.33];
        let h = 1e-6;
        let t = el.tabulate(&[x, [x[0] + h, x[1]], [x[0] - h, x[1]], [x[0], x[1] + h], [x[0], x[1] - h]]);
        for i in 0..10 {
            let dx = (t.value(1, i, 0) - t.value(2, i, 0)) / (2.0 * h);
            let dy = (t.value(3, i, 0) - t.value(4, i, 0)) / (2.0 * h);
            assert!((dx - t.deriv(0, i, 0, 0)).abs() < 1e-7);
            assert!((dy - t.deriv(0, i, 0, 1)).abs() < 1e-7);
        }
    }

    #[test]
    fn cg3_partition_of_unity() {
        let el = ReferenceElement::new(ElementKind::Cg3).unwrap();
        let t = el.tabulate(&[[0.1, 0.2], [0.6, 0.3]]);
        for p in 0..2 {
            let s: f64 = (0..10).map(|i| t.value(p, i, 0)).sum();
            assert!((s - 1.0).abs() < 1e-13);
        }
    }
}
