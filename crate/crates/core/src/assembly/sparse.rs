//! Compressed sparse row operators and direct solvers.
//!
//! Factorisations are delegated to `faer` (supernodal Cholesky for symmetric
//! positive definite operators, sparse LU otherwise). Every solve is checked
//! by computing the residual and applying a few steps of iterative refinement.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Relative residual accepted from a direct solve.
const SOLVE_RTOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SparseOperator {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseOperator {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut t: Vec<(usize, usize, f64)> = triplets.to_vec();
        t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut vals: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseOperator { nrows, ncols, row_ptr, cols, vals }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[range.clone()].binary_search(&c) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(|k| self.vals[k] * x[self.cols[k]]).sum())
            .collect()
    }

    pub fn matvec_transpose(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.nrows);
        let mut x = vec![0.0; self.ncols];
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                x[self.cols[k]] += self.vals[k] * y[r];
            }
        }
        x
    }

    pub fn transpose(&self) -> SparseOperator {
        let t: Vec<(usize, usize, f64)> = (0..self.nrows)
            .flat_map(|r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, k)))
            .map(|(r, k)| (self.cols[k], r, self.vals[k]))
            .collect();
        SparseOperator::from_triplets(self.ncols, self.nrows, &t)
    }

    /// Entry-wise `self + alpha * other` for operators of equal shape.
    pub fn add_scaled(&self, alpha: f64, other: &SparseOperator) -> SparseOperator {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t = self.triplets();
        t.extend(other.triplets().into_iter().map(|(r, c, v)| (r, c, alpha * v)));
        SparseOperator::from_triplets(self.nrows, self.ncols, &t)
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.nrows)
            .flat_map(|r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, k)))
            .map(|(r, k)| (r, self.cols[k], self.vals[k]))
            .collect()
    }

    /// Symbolic structure of the transpose viewed column-major, which equals
    /// the CSC structure of `self`'s transpose and of `self` when symmetric.
    fn csc_of_transpose(&self) -> SymbolicSparseColMat<usize> {
        SymbolicSparseColMat::new_checked(self.ncols, self.nrows, self.row_ptr.clone(), None, self.cols.clone())
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }
}

fn relative_residual(op: &SparseOperator, x: &[f64], b: &[f64]) -> (Vec<f64>, f64) {
    let ax = op.matvec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    (r, if bn > 0.0 { rn / bn } else { rn })
}

fn to_mat(b: &[f64]) -> Mat<f64> {
    Mat::from_fn(b.len(), 1, |i, _| b[i])
}

fn from_mat(m: &Mat<f64>) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, 0)]).collect()
}

fn checked_solve(op: &SparseOperator, b: &[f64], solve: impl Fn(&[f64]) -> Vec<f64>) -> Result<Vec<f64>> {
    if b.len() != op.nrows {
        return Err(Error::Dimension(format!("rhs length {} for a {}-row operator", b.len(), op.nrows)));
    }
    let mut x = solve(b);
    let (mut r, mut rel) = relative_residual(op, &x, b);
    for _ in 0..3 {
        if rel <= 1e-14 || !rel.is_finite() {
            break;
        }
        let dx = solve(&r);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        (r, rel) = relative_residual(op, &x, b);
    }
    if !(rel <= SOLVE_RTOL) {
        return Err(Error::Solver { reason: "residual check failed".into(), residual: rel });
    }
    Ok(x)
}

/// Cholesky factorisation of a symmetric positive definite operator. The
/// symbolic analysis is kept so operators with the same pattern can be
/// refactorised cheaply.
pub struct SpdSolver {
    op: SparseOperator,
    structure: SymbolicSparseColMat<usize>,
    symbolic: SymbolicLlt<usize>,
    llt: Llt<usize, f64>,
}

impl SpdSolver {
    pub fn new(op: SparseOperator) -> Result<Self> {
        let structure = op.csc_of_transpose();
        let symbolic = SymbolicLlt::try_new(structure.as_ref(), Side::Lower)
            .map_err(|e| Error::Solver { reason: format!("symbolic cholesky: {e:?}"), residual: f64::NAN })?;
        let llt = Self::numeric(&symbolic, &structure, &op)?;
        Ok(SpdSolver { op, structure, symbolic, llt })
    }

    fn numeric(symbolic: &SymbolicLlt<usize>, structure: &SymbolicSparseColMat<usize>, op: &SparseOperator) -> Result<Llt<usize, f64>> {
        let a = SparseColMatRef::new(structure.as_ref(), &op.vals);
        Llt::try_new_with_symbolic(symbolic.clone(), a, Side::Lower)
            .map_err(|e| Error::Solver { reason: format!("cholesky: {e:?}"), residual: f64::NAN })
    }

    /// Refactorises with new values on the same sparsity pattern.
    pub fn refactor(&mut self, op: SparseOperator) -> Result<()> {
        if op.row_ptr != self.op.row_ptr || op.cols != self.op.cols {
            *self = SpdSolver::new(op)?;
            return Ok(());
        }
        self.llt = Self::numeric(&self.symbolic, &self.structure, &op)?;
        self.op = op;
        Ok(())
    }

    /// Factorises another operator with the same pattern, reusing this
    /// solver's symbolic analysis.
    pub fn sibling(&self, op: SparseOperator) -> Result<Self> {
        if op.row_ptr != self.op.row_ptr || op.cols != self.op.cols {
            return SpdSolver::new(op);
        }
        let llt = Self::numeric(&self.symbolic, &self.structure, &op)?;
        Ok(SpdSolver { op, structure: self.structure.clone(), symbolic: self.symbolic.clone(), llt })
    }

    pub fn operator(&self) -> &SparseOperator {
        &self.op
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        checked_solve(&self.op, b, |rhs| from_mat(&self.llt.solve(to_mat(rhs))))
    }
}

/// Sparse LU factorisation of a general square operator.
pub struct LuSolver {
    op: SparseOperator,
    lu: Lu<usize, f64>,
}

impl LuSolver {
    pub fn new(op: SparseOperator) -> Result<Self> {
        if op.nrows != op.ncols {
            return Err(Error::Dimension(format!("LU of a {}x{} operator", op.nrows, op.ncols)));
        }
        // The CSR arrays of the transpose are the CSC arrays of `op`.
        let t = op.transpose();
        let structure = t.csc_of_transpose();
        let symbolic = SymbolicLu::try_new(structure.as_ref())
            .map_err(|e| Error::Solver { reason: format!("symbolic lu: {e:?}"), residual: f64::NAN })?;
        let a = SparseColMatRef::new(structure.as_ref(), &t.vals);
        let lu = Lu::try_new_with_symbolic(symbolic, a)
            .map_err(|e| Error::Solver { reason: format!("lu: {e:?}"), residual: f64::NAN })?;
        Ok(LuSolver { op, lu })
    }

    pub fn operator(&self) -> &SparseOperator {
        &self.op
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        checked_solve(&self.op, b, |rhs| from_mat(&self.lu.solve(to_mat(rhs))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize, shift: f64) -> SparseOperator {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + shift));
            t.push((i, (i + 1) % n, -1.0));
            t.push(((i + 1) % n, i, -1.0));
        }
        SparseOperator::from_triplets(n, n, &t)
    }

    #[test]
    fn duplicates_are_summed() {
        let a = SparseOperator::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, 4.0)]);
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(1, 0), 4.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.matvec_transpose(&[1.0, 1.0]), vec![7.0, 0.0]);
    }

    #[test]
    fn cholesky_and_refactor() {
        let a = laplacian_1d(50, 0.1);
        let x: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let b = a.matvec(&x);
        let mut s = SpdSolver::new(a).unwrap();
        let y = s.solve(&b).unwrap();
        assert!(x.iter().zip(&y).all(|(u, v)| (u - v).abs() < 1e-12));
        let a2 = laplacian_1d(50, 1.0);
        let b2 = a2.matvec(&x);
        s.refactor(a2).unwrap();
        let y2 = s.solve(&b2).unwrap();
        assert!(x.iter().zip(&y2).all(|(u, v)| (u - v).abs() < 1e-12));
    }

    #[test]
    fn lu_nonsymmetric() {
        let n = 30;
        let mut t = laplacian_1d(n, 0.5).triplets();
        for i in 0..n {
            t.push((i, (i + 2) % n, 0.3));
        }
        let a = SparseOperator::from_triplets(n, n, &t);
        let x: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let b = a.matvec(&x);
        let y = LuSolver::new(a).unwrap().solve(&b).unwrap();
        assert!(x.iter().zip(&y).all(|(u, v)| (u - v).abs() < 1e-10));
    }

    #[test]
    fn singular_operator_is_reported() {
        // The periodic Laplacian without shift annihilates constants.
        let a = laplacian_1d(20, 0.0);
        let b: Vec<f64> = (0..20).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
        let r = SpdSolver::new(a).and_then(|s| s.solve(&b));
        assert!(matches!(r, Err(Error::Solver { .. })));
    }
}
