//! Global degree-of-freedom maps and discrete fields.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::element::{ElementKind, ReferenceElement};
use crate::mesh::{Mesh, LOCAL_EDGE_VERTICES};

use super::sparse::SparseOperator;

/// A finite element space on a mesh: local-to-global dof maps and the signs
/// that make normal components single-valued across shared edges.
#[derive(Debug)]
pub struct FunctionSpace {
    pub kind: ElementKind,
    pub element: ReferenceElement,
    pub dim: usize,
    pub n_local: usize,
    cell_dofs: Vec<usize>,
    cell_signs: Vec<f64>,
}

impl FunctionSpace {
    pub fn new(mesh: &Mesh, kind: ElementKind) -> Result<Self> {
        let element = ReferenceElement::new(kind)?;
        let nl = element.n_dofs();
        let (nv, ne, nc) = (mesh.n_vertices(), mesh.n_edges(), mesh.n_cells());
        let mut cell_dofs = Vec::with_capacity(nc * nl);
        let mut cell_signs = Vec::with_capacity(nc * nl);
        let dim = match kind {
            ElementKind::Cg3 => nv + 2 * ne + nc,
            ElementKind::Bdm2 => 3 * ne + 3 * nc,
            ElementKind::Dg1 => 3 * nc,
        };
        for c in 0..nc {
            let aligned = |e: usize| mesh.cells[c][LOCAL_EDGE_VERTICES[e][0]] == mesh.edges[mesh.cell_edges[c][e]][0];
            match kind {
                ElementKind::Cg3 => {
                    for v in 0..3 {
                        cell_dofs.push(mesh.cells[c][v]);
                    }
                    for e in 0..3 {
                        let g = mesh.cell_edges[c][e];
                        for k in 0..2 {
                            let kk = if aligned(e) { k } else { 1 - k };
                            cell_dofs.push(nv + 2 * g + kk);
                        }
                    }
                    cell_dofs.push(nv + 2 * ne + c);
                    cell_signs.extend([1.0; 10]);
                }
                ElementKind::Bdm2 => {
                    for e in 0..3 {
                        let g = mesh.cell_edges[c][e];
                        let (al, s) = if aligned(e) { (true, 1.0) } else { (false, -1.0) };
                        for k in 0..3 {
                            cell_dofs.push(3 * g + if al { k } else { 2 - k });
                            cell_signs.push(s);
                        }
                    }
                    for j in 0..3 {
                        cell_dofs.push(3 * ne + 3 * c + j);
                        cell_signs.push(1.0);
                    }
                }
                ElementKind::Dg1 => {
                    for i in 0..3 {
                        cell_dofs.push(3 * c + i);
                        cell_signs.push(1.0);
                    }
                }
            }
        }
        Ok(FunctionSpace { kind, element, dim, n_local: nl, cell_dofs, cell_signs })
    }

    pub fn n_cells(&self) -> usize {
        self.cell_dofs.len() / self.n_local
    }

    #[inline]
    pub fn dofs(&self, c: usize) -> &[usize] {
        &self.cell_dofs[c * self.n_local..(c + 1) * self.n_local]
    }

    #[inline]
    pub fn signs(&self, c: usize) -> &[f64] {
        &self.cell_signs[c * self.n_local..(c + 1) * self.n_local]
    }

    /// Signed local coefficients of a global vector on cell `c`.
    #[inline]
    pub fn gather(&self, c: usize, global: &[f64], out: &mut [f64]) {
        for ((o, &d), &s) in out.iter_mut().zip(self.dofs(c)).zip(self.signs(c)) {
            *o = s * global[d];
        }
    }

    /// Adds signed local contributions into a global vector.
    #[inline]
    pub fn scatter_add(&self, c: usize, local: &[f64], global: &mut [f64]) {
        for ((l, &d), &s) in local.iter().zip(self.dofs(c)).zip(self.signs(c)) {
            global[d] += s * l;
        }
    }
}

/// Coefficient vector in a [`FunctionSpace`].
#[derive(Debug, Clone)]
pub struct Field {
    pub space: Arc<FunctionSpace>,
    pub values: Vec<f64>,
}

impl Field {
    pub fn zeros(space: &Arc<FunctionSpace>) -> Field {
        Field { space: space.clone(), values: vec![0.0; space.dim] }
    }

    pub fn from_values(space: &Arc<FunctionSpace>, values: Vec<f64>) -> Result<Field> {
        if values.len() != space.dim {
            return Err(Error::Dimension(format!("{} coefficients for a space of dimension {}", values.len(), space.dim)));
        }
        Ok(Field { space: space.clone(), values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    fn check(&self, other: &Field) {
        assert!(Arc::ptr_eq(&self.space, &other.space), "fields live in different spaces");
    }

    /// `a * self + b * other`.
    pub fn lincomb(&self, a: f64, other: &Field, b: f64) -> Field {
        self.check(other);
        Field {
            space: self.space.clone(),
            values: self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect(),
        }
    }

    pub fn axpy(&mut self, a: f64, other: &Field) {
        self.check(other);
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
    }

    pub fn scaled(&self, a: f64) -> Field {
        Field { space: self.space.clone(), values: self.values.iter().map(|x| a * x).collect() }
    }

    pub fn dot(&self, coeffs: &[f64]) -> f64 {
        self.values.iter().zip(coeffs).map(|(x, y)| x * y).sum()
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values.iter().zip(&other.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }
}

/// CSR sparsity of a cell-local bilinear form between two spaces, with the
/// position of every local entry inside the value array.
#[derive(Debug, Clone)]
pub struct CellPattern {
    pub template: SparseOperator,
    n_test: usize,
    n_trial: usize,
    positions: Vec<usize>,
}

impl CellPattern {
    pub fn new(test: &FunctionSpace, trial: &FunctionSpace) -> Self {
        let (nt, nr) = (test.n_local, trial.n_local);
        let mut t = Vec::with_capacity(test.n_cells() * nt * nr);
        for c in 0..test.n_cells() {
            for &i in test.dofs(c) {
                for &j in trial.dofs(c) {
                    t.push((i, j, 0.0));
                }
            }
        }
        let template = SparseOperator::from_triplets(test.dim, trial.dim, &t);
        let mut positions = Vec::with_capacity(t.len());
        for c in 0..test.n_cells() {
            for &i in test.dofs(c) {
                let row = &template.cols[template.row_ptr[i]..template.row_ptr[i + 1]];
                for &j in trial.dofs(c) {
                    positions.push(template.row_ptr[i] + row.binary_search(&j).unwrap());
                }
            }
        }
        CellPattern { template, n_test: nt, n_trial: nr, positions }
    }

    /// Assembles a global operator from unsigned local matrices
    /// `local(c)[i * n_trial + j]`; dof signs are applied here.
    pub fn assemble(
        &self,
        test: &FunctionSpace,
        trial: &FunctionSpace,
        mut local: impl FnMut(usize, &mut [f64]),
    ) -> SparseOperator {
        let mut op = self.template.clone();
        op.vals.iter_mut().for_each(|v| *v = 0.0);
        let mut buf = vec![0.0; self.n_test * self.n_trial];
        for c in 0..test.n_cells() {
            buf.iter_mut().for_each(|v| *v = 0.0);
            local(c, &mut buf);
            let (st, sr) = (test.signs(c), trial.signs(c));
            let pos = &self.positions[c * self.n_test * self.n_trial..(c + 1) * self.n_test * self.n_trial];
            for i in 0..self.n_test {
                for j in 0..self.n_trial {
                    let k = i * self.n_trial + j;
                    op.vals[pos[k]] += st[i] * sr[j] * buf[k];
                }
            }
        }
        op
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions_follow_entity_counts() {
        let m = Mesh::icosahedral_sphere(1, 1.0).unwrap();
        let (nv, ne, nc) = (m.n_vertices(), m.n_edges(), m.n_cells());
        assert_eq!(FunctionSpace::new(&m, ElementKind::Cg3).unwrap().dim, nv + 2 * ne + nc);
        assert_eq!(FunctionSpace::new(&m, ElementKind::Bdm2).unwrap().dim, 3 * ne + 3 * nc);
        assert_eq!(FunctionSpace::new(&m, ElementKind::Dg1).unwrap().dim, 3 * nc);
    }

    #[test]
    fn every_dof_is_referenced() {
        let m = Mesh::periodic_square(2, 1.0).unwrap();
        for kind in [ElementKind::Cg3, ElementKind::Bdm2, ElementKind::Dg1] {
            let s = FunctionSpace::new(&m, kind).unwrap();
            let mut seen = vec![false; s.dim];
            for c in 0..m.n_cells() {
                for &d in s.dofs(c) {
                    seen[d] = true;
                }
            }
            assert!(seen.iter().all(|&b| b), "{kind:?}");
        }
    }

    #[test]
    fn edge_dofs_shared_with_opposite_signs_or_same() {
        let m = Mesh::periodic_square(3, 1.0).unwrap();
        let s = FunctionSpace::new(&m, ElementKind::Bdm2).unwrap();
        for f in &m.facets {
            let dp: Vec<usize> = s.dofs(f.plus.cell)[3 * f.plus.local_edge..3 * f.plus.local_edge + 3].to_vec();
            let mut dm: Vec<usize> = s.dofs(f.minus.cell)[3 * f.minus.local_edge..3 * f.minus.local_edge + 3].to_vec();
            let mut dp2 = dp.clone();
            dp2.sort();
            dm.sort();
            assert_eq!(dp2, dm);
        }
    }
}
