//! Oriented triangular meshes of closed surfaces.
//!
//! Two families are supported: a doubly periodic square split into right
//! triangles, and an icosahedral sphere refined by edge bisection. Every cell
//! keeps its own (unwrapped) vertex coordinates so that cells on the periodic
//! plane never straddle the identification seam.

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::fem::quadrature::QuadratureRule;

pub type Point = Vector3<f64>;

/// Endpoints (in local vertex numbering) of local edge `e`, which is the edge
/// opposite local vertex `e`. The first endpoint is always the lower one.
pub const LOCAL_EDGE_VERTICES: [[usize; 2]; 3] = [[1, 2], [0, 2], [0, 1]];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    PlanePeriodic { lx: f64, ly: f64 },
    Sphere { radius: f64 },
}

/// One side of an interior facet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FacetSide {
    pub cell: usize,
    pub local_edge: usize,
    /// True when the local edge direction (lower to higher local vertex)
    /// agrees with the global edge direction (lower to higher global vertex).
    pub aligned: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Facet {
    pub edge: usize,
    pub plus: FacetSide,
    pub minus: FacetSide,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub geometry: Geometry,
    /// Grid size `n` for the periodic plane, refinement level for the sphere.
    pub resolution: usize,
    pub vertices: Vec<Point>,
    pub cells: Vec<[usize; 3]>,
    pub cell_coords: Vec<[Point; 3]>,
    /// Global edges as (lower, higher) vertex indices.
    pub edges: Vec<[usize; 2]>,
    pub cell_edges: Vec<[usize; 3]>,
    /// One facet per edge, indexed like `edges`.
    pub facets: Vec<Facet>,
}

/// Geometric data of a facet seen from both adjacent cells.
#[derive(Debug, Clone)]
pub struct FacetFrame {
    /// Unit tangent along the global edge direction.
    pub tangent: Point,
    pub normal_plus: Point,
    pub normal_minus: Point,
    pub length: f64,
    /// Quadrature points in global edge order.
    pub points: Vec<Point>,
    /// Quadrature weights scaled by the edge length.
    pub weights: Vec<f64>,
}

struct Builder {
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    cell_coords: Vec<[Point; 3]>,
}

impl Mesh {
    /// Doubly periodic square `[0,length]^2` with `n x n` squares, each split
    /// along its south-west to north-east diagonal into two counter-clockwise
    /// triangles.
    pub fn periodic_square(n: usize, length: f64) -> Result<Mesh> {
        if n < 2 {
            return Err(Error::InvalidMesh(format!("periodic grid needs n >= 2, got {n}")));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidMesh(format!("domain length must be positive, got {length}")));
        }
        let h = length / n as f64;
        let tol = 1e-9 * length;
        let wrap = |x: f64| -> i64 {
            let mut w = x.rem_euclid(length);
            if length - w < tol {
                w = 0.0;
            }
            (w / tol).round() as i64
        };

        let mut vertex_ids: HashMap<(i64, i64), usize> = HashMap::new();
        let mut b = Builder { vertices: Vec::new(), cells: Vec::new(), cell_coords: Vec::new() };
        let mut vertex = |p: Point, b: &mut Builder| -> usize {
            let key = (wrap(p.x), wrap(p.y));
            *vertex_ids.entry(key).or_insert_with(|| {
                b.vertices.push(Point::new(p.x.rem_euclid(length), p.y.rem_euclid(length), 0.0));
                b.vertices.len() - 1
            })
        };
        for j in 0..n {
            for i in 0..n {
                let p = |di: usize, dj: usize| Point::new((i + di) as f64 * h, (j + dj) as f64 * h, 0.0);
                for tri in [[p(0, 0), p(1, 0), p(1, 1)], [p(0, 0), p(1, 1), p(0, 1)]] {
                    let ids = [vertex(tri[0], &mut b), vertex(tri[1], &mut b), vertex(tri[2], &mut b)];
                    b.cells.push(ids);
                    b.cell_coords.push(tri);
                }
            }
        }

        // Small tori have distinct edges joining the same vertex pair, so edges
        // are identified by their wrapped midpoints instead.
        let coords = b.cell_coords.clone();
        let edge_key = move |c: usize, e: usize| -> (i64, i64) {
            let [p, q] = LOCAL_EDGE_VERTICES[e];
            let m = 0.5 * (coords[c][p] + coords[c][q]);
            (wrap(m.x), wrap(m.y))
        };
        Self::finish(Geometry::PlanePeriodic { lx: length, ly: length }, n, b, edge_key)
    }

    /// Icosahedral sphere of the given radius after `level` bisection steps;
    /// vertices are projected radially onto the sphere, cells are flat.
    pub fn icosahedral_sphere(level: usize, radius: f64) -> Result<Mesh> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidMesh(format!("sphere radius must be positive, got {radius}")));
        }
        if level > 8 {
            return Err(Error::InvalidMesh(format!("refinement level {level} is too large")));
        }
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut verts: Vec<Point> = [
            (-1.0, t, 0.0),
            (1.0, t, 0.0),
            (-1.0, -t, 0.0),
            (1.0, -t, 0.0),
            (0.0, -1.0, t),
            (0.0, 1.0, t),
            (0.0, -1.0, -t),
            (0.0, 1.0, -t),
            (t, 0.0, -1.0),
            (t, 0.0, 1.0),
            (-t, 0.0, -1.0),
            (-t, 0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y, z)| Point::new(x, y, z).normalize())
        .collect();
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..level {
            let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
            let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Point>| -> usize {
                let key = (a.min(b), a.max(b));
                *mid.entry(key).or_insert_with(|| {
                    verts.push((0.5 * (verts[a] + verts[b])).normalize());
                    verts.len() - 1
                })
            };
            let mut next = Vec::with_capacity(4 * faces.len());
            for &[a, b, c] in &faces {
                let ab = midpoint(a, b, &mut verts);
                let bc = midpoint(b, c, &mut verts);
                let ca = midpoint(c, a, &mut verts);
                next.push([a, ab, ca]);
                next.push([b, bc, ab]);
                next.push([c, ca, bc]);
                next.push([ab, bc, ca]);
            }
            faces = next;
        }
        let vertices: Vec<Point> = verts.iter().map(|v| v * radius).collect();
        let mut cell_coords = Vec::with_capacity(faces.len());
        for f in faces.iter_mut() {
            let (a, b, c) = (vertices[f[0]], vertices[f[1]], vertices[f[2]]);
            if (b - a).cross(&(c - a)).dot(&(a + b + c)) < 0.0 {
                f.swap(1, 2);
            }
            cell_coords.push([vertices[f[0]], vertices[f[1]], vertices[f[2]]]);
        }
        let key = {
            let cells = faces.clone();
            move |cell: usize, e: usize| -> (i64, i64) {
                let [p, q] = LOCAL_EDGE_VERTICES[e];
                let (a, b) = (cells[cell][p], cells[cell][q]);
                (a.min(b) as i64, a.max(b) as i64)
            }
        };
        let b = Builder { vertices, cells: faces, cell_coords };
        Self::finish(Geometry::Sphere { radius }, level, b, key)
    }

    fn finish(
        geometry: Geometry,
        resolution: usize,
        b: Builder,
        key: impl Fn(usize, usize) -> (i64, i64),
    ) -> Result<Mesh> {
        let mut edge_ids: HashMap<(i64, i64), usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut cell_edges = Vec::with_capacity(b.cells.len());
        let mut sides: Vec<Vec<(usize, usize)>> = Vec::new();
        for (c, cell) in b.cells.iter().enumerate() {
            let mut ce = [0usize; 3];
            for (e, slot) in ce.iter_mut().enumerate() {
                let id = *edge_ids.entry(key(c, e)).or_insert_with(|| {
                    let [p, q] = LOCAL_EDGE_VERTICES[e];
                    let (a, bb) = (cell[p], cell[q]);
                    edges.push([a.min(bb), a.max(bb)]);
                    sides.push(Vec::new());
                    edges.len() - 1
                });
                sides[id].push((c, e));
                *slot = id;
            }
            cell_edges.push(ce);
        }
        let mut facets = Vec::with_capacity(edges.len());
        for (id, s) in sides.iter().enumerate() {
            if s.len() != 2 {
                return Err(Error::InvalidMesh(format!("edge {id} has {} adjacent cells", s.len())));
            }
            let mut s = [s[0], s[1]];
            s.sort();
            let side = |(cell, local_edge): (usize, usize)| FacetSide {
                cell,
                local_edge,
                aligned: b.cells[cell][LOCAL_EDGE_VERTICES[local_edge][0]] == edges[id][0],
            };
            facets.push(Facet { edge: id, plus: side(s[0]), minus: side(s[1]) });
        }
        let mesh = Mesh {
            geometry,
            resolution,
            vertices: b.vertices,
            cells: b.cells,
            cell_coords: b.cell_coords,
            edges,
            cell_edges,
            facets,
        };
        for c in 0..mesh.n_cells() {
            let a = mesh.cell_area(c);
            if !(a > 0.0) {
                return Err(Error::DegenerateCell { cell: c, area_factor: 2.0 * a });
            }
        }
        Ok(mesh)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self.geometry, Geometry::Sphere { .. })
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        let [a, b, cc] = self.cell_coords[c];
        0.5 * (b - a).cross(&(cc - a)).norm()
    }

    /// Unit normal of the (flat) cell, outward on the sphere and `+z` on the plane.
    pub fn cell_normal(&self, c: usize) -> Point {
        let [a, b, cc] = self.cell_coords[c];
        (b - a).cross(&(cc - a)).normalize()
    }

    pub fn cell_centroid(&self, c: usize) -> Point {
        let [a, b, cc] = self.cell_coords[c];
        (a + b + cc) / 3.0
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.cell_area(c)).sum()
    }

    pub fn max_edge_length(&self) -> f64 {
        let mut h: f64 = 0.0;
        for c in &self.cell_coords {
            for [p, q] in LOCAL_EDGE_VERTICES {
                h = h.max((c[q] - c[p]).norm());
            }
        }
        h
    }

    /// Endpoints of local edge `e` of cell `c` in local (lower to higher) order.
    pub fn local_edge_points(&self, c: usize, e: usize) -> (Point, Point) {
        let [p, q] = LOCAL_EDGE_VERTICES[e];
        (self.cell_coords[c][p], self.cell_coords[c][q])
    }

    /// Outward unit normal of local edge `e` of cell `c`, lying in the plane of the cell.
    pub fn outward_normal(&self, c: usize, e: usize) -> Point {
        let (a, b) = self.local_edge_points(c, e);
        let opposite = self.cell_coords[c][e];
        let n = (b - a).cross(&self.cell_normal(c)).normalize();
        if n.dot(&(0.5 * (a + b) - opposite)) < 0.0 {
            -n
        } else {
            n
        }
    }

    /// Euler characteristic V - E + F (0 on the torus, 2 on the sphere).
    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices() as i64 - self.n_edges() as i64 + self.n_cells() as i64
    }

    /// Normals, tangent and physical quadrature points of a facet. The points are
    /// taken on the `+` cell and ordered along the global edge direction.
    pub fn facet_frame(&self, facet: usize, rule: &QuadratureRule) -> FacetFrame {
        let f = &self.facets[facet];
        let (a, b) = self.local_edge_points(f.plus.cell, f.plus.local_edge);
        let (start, end) = if f.plus.aligned { (a, b) } else { (b, a) };
        let length = (end - start).norm();
        let tangent = (end - start) / length;
        let points = rule.points.iter().map(|p| start + p[0] * (end - start)).collect();
        let weights = rule.weights.iter().map(|w| w * length).collect();
        FacetFrame {
            tangent,
            normal_plus: self.outward_normal(f.plus.cell, f.plus.local_edge),
            normal_minus: self.outward_normal(f.minus.cell, f.minus.local_edge),
            length,
            points,
            weights,
        }
    }

    /// Plain-text dump: a header line, then `vertex`, `cell` and `facet` records.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let kind = match self.geometry {
            Geometry::PlanePeriodic { lx, ly } => format!("plane_periodic {lx} {ly}"),
            Geometry::Sphere { radius } => format!("sphere {radius}"),
        };
        let _ = writeln!(
            s,
            "mesh {kind} resolution {} vertices {} cells {} edges {}",
            self.resolution,
            self.n_vertices(),
            self.n_cells(),
            self.n_edges()
        );
        for (i, v) in self.vertices.iter().enumerate() {
            let _ = writeln!(s, "vertex {i} {:.17e} {:.17e} {:.17e}", v.x, v.y, v.z);
        }
        for (c, cell) in self.cells.iter().enumerate() {
            let x = &self.cell_coords[c];
            let _ = write!(s, "cell {c} {} {} {}", cell[0], cell[1], cell[2]);
            for p in x {
                let _ = write!(s, " {:.17e} {:.17e} {:.17e}", p.x, p.y, p.z);
            }
            s.push('\n');
        }
        for (i, f) in self.facets.iter().enumerate() {
            let _ = writeln!(
                s,
                "facet {i} {} {} {} {} {} {}",
                f.plus.cell, f.plus.local_edge, f.minus.cell, f.minus.local_edge, self.edges[f.edge][0], self.edges[f.edge][1]
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::quadrature::edge_rule;

    #[test]
    fn periodic_counts_and_orientation() {
        for n in [2, 3, 8] {
            let m = Mesh::periodic_square(n, 1.0).unwrap();
            assert_eq!(m.n_cells(), 2 * n * n);
            assert_eq!(m.n_vertices(), n * n);
            assert_eq!(m.n_edges(), 3 * n * n);
            assert_eq!(m.euler_characteristic(), 0);
            for c in 0..m.n_cells() {
                assert!((m.cell_normal(c) - Point::z()).norm() < 1e-14);
            }
            assert!((m.total_area() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn sphere_counts() {
        for level in 0..4 {
            let m = Mesh::icosahedral_sphere(level, 1.0).unwrap();
            let nc = 20 * 4usize.pow(level as u32);
            assert_eq!(m.n_cells(), nc);
            assert_eq!(m.n_edges(), 3 * nc / 2);
            assert_eq!(m.n_vertices(), nc / 2 + 2);
            assert_eq!(m.euler_characteristic(), 2);
            for c in 0..m.n_cells() {
                assert!(m.cell_normal(c).dot(&m.cell_centroid(c)) > 0.0);
            }
        }
    }

    #[test]
    fn refinement_halves_edge_length() {
        // The step from level 1 to 2 gives 0.5257 (radial projection of the
        // first bisection); from level 2 on the ratio is within 5% of 1/2.
        let mut prev = Mesh::icosahedral_sphere(2, 1.0).unwrap().max_edge_length();
        for level in 3..7 {
            let h = Mesh::icosahedral_sphere(level, 1.0).unwrap().max_edge_length();
            let r = h / prev;
            assert!(r > 0.5 / 1.05 && r < 0.5 * 1.05, "level {level}: ratio {r}");
            prev = h;
        }
        let a = Mesh::periodic_square(8, 1.0).unwrap().max_edge_length();
        let b = Mesh::periodic_square(16, 1.0).unwrap().max_edge_length();
        assert!((b / a - 0.5).abs() < 1e-14);
    }

    #[test]
    fn facet_normals_are_opposite_on_plane() {
        let m = Mesh::periodic_square(4, 2.0).unwrap();
        let rule = edge_rule(4).unwrap();
        for i in 0..m.facets.len() {
            let fr = m.facet_frame(i, &rule);
            assert!((fr.normal_plus + fr.normal_minus).norm() < 1e-14);
            assert!(fr.normal_plus.dot(&fr.tangent).abs() < 1e-14);
        }
    }

    #[test]
    fn sphere_facet_normals_share_tangent() {
        let m = Mesh::icosahedral_sphere(2, 1.0).unwrap();
        let rule = edge_rule(4).unwrap();
        for i in 0..m.facets.len() {
            let f = m.facets[i];
            let fr = m.facet_frame(i, &rule);
            let tp = m.cell_normal(f.plus.cell).cross(&fr.normal_plus);
            let tm = m.cell_normal(f.minus.cell).cross(&fr.normal_minus);
            assert!((tp + tm).norm() < 1e-13);
            assert!((fr.normal_plus.dot(&fr.normal_minus) + 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn facet_sides_share_edge() {
        let m = Mesh::periodic_square(2, 1.0).unwrap();
        for f in &m.facets {
            assert!(f.plus.cell < f.minus.cell);
            assert_eq!(m.cell_edges[f.plus.cell][f.plus.local_edge], f.edge);
            assert_eq!(m.cell_edges[f.minus.cell][f.minus.local_edge], f.edge);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Mesh::periodic_square(1, 1.0).is_err());
        assert!(Mesh::periodic_square(4, -1.0).is_err());
        assert!(Mesh::icosahedral_sphere(2, 0.0).is_err());
    }
}
