//! Quadrature on the reference triangle and the unit interval.

use crate::error::{Error, Result};

/// Highest polynomial degree for which rules are generated.
pub const MAX_DEGREE: usize = 30;

/// Points are reference coordinates: `(x, y)` on the triangle with vertices
/// (0,0), (1,0), (0,1), or `(s, 0)` on the interval `[0, 1]`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub degree: usize,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Barycentric coordinates of triangle point `q`.
    pub fn barycentric(&self, q: usize) -> [f64; 3] {
        let [x, y] = self.points[q];
        [1.0 - x - y, x, y]
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, z);
        // Roots come out in descending z, i.e. ascending s = (1 - z) / 2.
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

/// Rule on `[0, 1]` exact for polynomials of the given degree.
pub fn edge_rule(degree: usize) -> Result<QuadratureRule> {
    if degree == 0 || degree > MAX_DEGREE {
        return Err(Error::UnsupportedQuadrature(degree));
    }
    let (x, w) = gauss_legendre(degree / 2 + 1);
    Ok(QuadratureRule { degree, points: x.iter().map(|&s| [s, 0.0]).collect(), weights: w })
}

/// Rule on the reference triangle (area 1/2) exact for polynomials of the given degree.
pub fn triangle_rule(degree: usize) -> Result<QuadratureRule> {
    if degree == 0 || degree > MAX_DEGREE {
        return Err(Error::UnsupportedQuadrature(degree));
    }
    let (points, weights) = match degree {
        1 => (vec![[1.0 / 3.0, 1.0 / 3.0]], vec![0.5]),
        2 => (
            vec![[1.0 / 6.0, 1.0 / 6.0], [2.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0]],
            vec![1.0 / 6.0; 3],
        ),
        7 | 8 => dunavant8(),
        _ => collapsed(degree),
    };
    Ok(QuadratureRule { degree, points, weights })
}

/// Symmetric 16-point rule of degree 8 (Dunavant).
fn dunavant8() -> (Vec<[f64; 2]>, Vec<f64>) {
    let orbits: [(f64, f64, f64); 5] = [
        (1.0 / 3.0, 1.0 / 3.0, 0.144315607677787),
        (0.459292588292723, 0.459292588292723, 0.095091634267285),
        (0.170569307751760, 0.170569307751760, 0.103217370534718),
        (0.050547228317031, 0.050547228317031, 0.032458497623198),
        (0.263112829634638, 0.728492392955404, 0.027230314174435),
    ];
    let mut pts = Vec::new();
    let mut wts = Vec::new();
    for (a, b, w) in orbits {
        let c = 1.0 - a - b;
        let mut orbit: Vec<[f64; 3]> = vec![[a, b, c], [b, c, a], [c, a, b], [b, a, c], [a, c, b], [c, b, a]];
        orbit.sort_by(|p, q| p.partial_cmp(q).unwrap());
        orbit.dedup_by(|p, q| p.iter().zip(q.iter()).all(|(x, y)| (x - y).abs() < 1e-14));
        for l in orbit {
            pts.push([l[1], l[2]]);
            wts.push(0.5 * w);
        }
    }
    (pts, wts)
}

/// Conical product of Gauss-Legendre rules through the collapsed map
/// `(u, v) -> (u, v (1 - u))`.
fn collapsed(degree: usize) -> (Vec<[f64; 2]>, Vec<f64>) {
    let (xu, wu) = gauss_legendre(degree / 2 + 1 + 1);
    let (xv, wv) = gauss_legendre(degree / 2 + 1);
    let mut pts = Vec::with_capacity(xu.len() * xv.len());
    let mut wts = Vec::with_capacity(xu.len() * xv.len());
    for (u, a) in xu.iter().zip(&wu) {
        for (v, b) in xv.iter().zip(&wv) {
            pts.push([*u, v * (1.0 - u)]);
            wts.push(a * b * (1.0 - u));
        }
    }
    (pts, wts)
}
