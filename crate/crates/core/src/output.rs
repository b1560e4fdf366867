//! Legacy ASCII VTK snapshots.
//!
//! Each mesh cell is split into the nine linear sub-triangles of its CG3
//! node lattice. PV is written as point data at the CG3 nodes; depth (cell
//! average), velocity (at the centroid) and the parent cell index are cell
//! data, repeated on the sub-triangles of a cell.

use std::fmt::Write;

use crate::assembly::Field;
use crate::error::Result;
use crate::swe::{potential_vorticity, Model, State};

/// Lattice indices `(i, j)` of the CG3 nodes, at reference point `(i/3, j/3)`.
pub const LATTICE: [(usize, usize); 10] = [(0, 0), (1, 0), (2, 0), (3, 0), (0, 1), (1, 1), (2, 1), (0, 2), (1, 2), (0, 3)];

pub const SUBCELLS_PER_CELL: usize = 9;

fn node(i: usize, j: usize) -> usize {
    LATTICE.iter().position(|&p| p == (i, j)).unwrap()
}

/// Sub-triangles as local node triples, counter-clockwise in reference space.
pub fn subtriangles() -> Vec<[usize; 3]> {
    let mut t = Vec::with_capacity(SUBCELLS_PER_CELL);
    for j in 0..3 {
        for i in 0..3 - j {
            t.push([node(i, j), node(i + 1, j), node(i, j + 1)]);
            if i + j < 2 {
                t.push([node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)]);
            }
        }
    }
    t
}

/// Cell averages of a DG1 field (the value at the centroid).
pub fn cell_averages(model: &Model, d: &Field) -> Vec<f64> {
    (0..model.disc.mesh.n_cells()).map(|c| model.disc.eval_at(d, c, [1.0 / 3.0; 2]).x).collect()
}

/// Snapshot of a state as a legacy ASCII unstructured grid.
pub fn vtk_snapshot(model: &Model, z: &State, title: &str) -> Result<String> {
    let disc = &model.disc;
    let nc = disc.mesh.n_cells();
    let q = potential_vorticity(model, &z.u, &z.d)?;
    let sub = subtriangles();
    let np = nc * LATTICE.len();
    let ns = nc * sub.len();
    let mut s = String::new();
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {np} double");
    let mut pv = Vec::with_capacity(np);
    for c in 0..nc {
        for &(i, j) in &LATTICE {
            let xi = [i as f64 / 3.0, j as f64 / 3.0];
            let x = disc.geom[c].point(xi);
            let _ = writeln!(s, "{:.12e} {:.12e} {:.12e}", x.x, x.y, x.z);
            pv.push(disc.eval_at(&q, c, xi).x);
        }
    }
    let _ = writeln!(s, "CELLS {ns} {}", 4 * ns);
    for c in 0..nc {
        let o = c * LATTICE.len();
        for t in &sub {
            let _ = writeln!(s, "3 {} {} {}", o + t[0], o + t[1], o + t[2]);
        }
    }
    let _ = writeln!(s, "CELL_TYPES {ns}");
    for _ in 0..ns {
        s.push_str("5\n");
    }
    let depth = cell_averages(model, &z.d);
    let _ = writeln!(s, "CELL_DATA {ns}\nSCALARS depth double 1\nLOOKUP_TABLE default");
    for d in &depth {
        for _ in 0..sub.len() {
            let _ = writeln!(s, "{d:.12e}");
        }
    }
    let _ = writeln!(s, "SCALARS cell int 1\nLOOKUP_TABLE default");
    for c in 0..nc {
        for _ in 0..sub.len() {
            let _ = writeln!(s, "{c}");
        }
    }
    let _ = writeln!(s, "VECTORS velocity double");
    for c in 0..nc {
        let u = disc.eval_at(&z.u, c, [1.0 / 3.0; 2]);
        for _ in 0..sub.len() {
            let _ = writeln!(s, "{:.12e} {:.12e} {:.12e}", u.x, u.y, u.z);
        }
    }
    let _ = writeln!(s, "POINT_DATA {np}\nSCALARS potential_vorticity double 1\nLOOKUP_TABLE default");
    for v in &pv {
        let _ = writeln!(s, "{v:.12e}");
    }
    Ok(s)
}
