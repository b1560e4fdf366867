//! Affine maps from the reference triangle onto flat cells embedded in 3D.

use nalgebra::{Matrix2, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::mesh::Point;

/// `x = x0 + J xi` with `J = [x1 - x0, x2 - x0]` (3x2).
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub origin: Point,
    pub jac: [Vector3<f64>; 2],
    /// `sqrt(det(J^T J))`, twice the cell area.
    pub det: f64,
    pub normal: Vector3<f64>,
    /// `(J^T J)^{-1}`.
    pub ginv: Matrix2<f64>,
}

impl CellGeometry {
    pub fn new(cell: usize, x: &[Point; 3]) -> Result<Self> {
        let jac = [x[1] - x[0], x[2] - x[0]];
        let cross = jac[0].cross(&jac[1]);
        let det = cross.norm();
        let scale = jac[0].norm_squared().max(jac[1].norm_squared());
        if !(det > 1e-12 * scale) {
            return Err(Error::DegenerateCell { cell, area_factor: det });
        }
        let g = Matrix2::new(jac[0].dot(&jac[0]), jac[0].dot(&jac[1]), jac[1].dot(&jac[0]), jac[1].dot(&jac[1]));
        let ginv = g.try_inverse().ok_or(Error::DegenerateCell { cell, area_factor: det })?;
        Ok(CellGeometry { origin: x[0], jac, det, normal: cross / det, ginv })
    }

    #[inline]
    pub fn point(&self, xi: [f64; 2]) -> Point {
        self.origin + self.jac[0] * xi[0] + self.jac[1] * xi[1]
    }

    /// `J a` for a reference vector `a`.
    #[inline]
    pub fn push(&self, a: [f64; 2]) -> Vector3<f64> {
        self.jac[0] * a[0] + self.jac[1] * a[1]
    }

    /// Contravariant Piola map `J v / det`.
    #[inline]
    pub fn piola(&self, v: [f64; 2]) -> Vector3<f64> {
        self.push(v) / self.det
    }

    /// `J^T w`, the pullback of a covector.
    #[inline]
    pub fn jt(&self, w: &Vector3<f64>) -> [f64; 2] {
        [self.jac[0].dot(w), self.jac[1].dot(w)]
    }

    /// `(J^T J)^{-1} J^T w`: reference components of the tangential part of `w`.
    #[inline]
    pub fn reference_components(&self, w: &Vector3<f64>) -> [f64; 2] {
        let v = self.ginv * Vector2::from(self.jt(w));
        [v[0], v[1]]
    }

    /// Inverse Piola map of a tangent field: `det (J^T J)^{-1} J^T u`.
    #[inline]
    pub fn pullback(&self, u: &Vector3<f64>) -> [f64; 2] {
        let r = self.reference_components(u);
        [self.det * r[0], self.det * r[1]]
    }

    /// Surface gradient from the reference gradient: `J (J^T J)^{-1} g`.
    #[inline]
    pub fn gradient(&self, g: [f64; 2]) -> Vector3<f64> {
        let v = self.ginv * Vector2::new(g[0], g[1]);
        self.push([v[0], v[1]])
    }

    /// `k x v` with `k` the cell normal.
    #[inline]
    pub fn perp(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.normal.cross(v)
    }
}
