//! Small geometric helpers and simplex quadrature.
//!
//! All coordinates are stored as 3-vectors; two-dimensional meshes live in the
//! `z = 0` plane so that the reconstruction code is written once.

use nalgebra::{Matrix3, Vector3};

pub type Point = Vector3<f64>;
pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Area-weighted normal of a (possibly non-planar) polygon, Newell's method.
/// The magnitude is the area for planar polygons.
pub fn newell_normal(pts: &[Point]) -> Vec3 {
    let mut n = Vec3::zeros();
    for i in 0..pts.len() {
        let a = &pts[i];
        let b = &pts[(i + 1) % pts.len()];
        n.x += (a.y - b.y) * (a.z + b.z);
        n.y += (a.z - b.z) * (a.x + b.x);
        n.z += (a.x - b.x) * (a.y + b.y);
    }
    n * 0.5
}

/// Vector area of triangle (a, b, c): half the cross product, oriented by the
/// vertex order.
pub fn triangle_vector_area(a: &Point, b: &Point, c: &Point) -> Vec3 {
    (b - a).cross(&(c - a)) * 0.5
}

pub fn tet_signed_volume(a: &Point, b: &Point, c: &Point, d: &Point) -> f64 {
    (b - a).dot(&(c - a).cross(&(d - a))) / 6.0
}

pub fn triangle_signed_area_2d(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x))
}

pub fn diameter(pts: &[Point]) -> f64 {
    let mut h: f64 = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            h = h.max((pts[i] - pts[j]).norm());
        }
    }
    h
}

pub fn mean_point(pts: &[Point]) -> Point {
    let mut c = Point::zeros();
    for p in pts {
        c += p;
    }
    c / pts.len() as f64
}

/// Gauss-Legendre nodes and weights mapped to [0, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Chebyshev initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

/// Quadrature rule on a simplex in barycentric form; weights sum to one so that
/// `∫_S f ≈ |S| Σ w_i f(x_i)`.
#[derive(Debug, Clone)]
pub struct SimplexRule {
    pub points: Vec<([f64; 4], f64)>,
}

impl SimplexRule {
    /// Degree-2 symmetric rule: 2 points on a segment, 3 on a triangle, 4 on a
    /// tetrahedron.
    pub fn degree2(dim: usize) -> Self {
        match dim {
            1 => Self::conical(1, 2),
            2 => {
                let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
                Self {
                    points: vec![
                        ([a, b, b, 0.0], 1.0 / 3.0),
                        ([b, a, b, 0.0], 1.0 / 3.0),
                        ([b, b, a, 0.0], 1.0 / 3.0),
                    ],
                }
            }
            3 => {
                let (a, b) = (0.585_410_196_624_968_5, 0.138_196_601_125_010_5);
                Self {
                    points: vec![
                        ([a, b, b, b], 0.25),
                        ([b, a, b, b], 0.25),
                        ([b, b, a, b], 0.25),
                        ([b, b, b, a], 0.25),
                    ],
                }
            }
            _ => panic!("simplex dimension must be 1, 2 or 3"),
        }
    }

    /// Collapsed-coordinate Gauss product rule with `n` points per direction.
    pub fn conical(dim: usize, n: usize) -> Self {
        let gl = gauss_legendre(n);
        let mut points = Vec::new();
        match dim {
            1 => {
                for &(u, w) in &gl {
                    points.push(([1.0 - u, u, 0.0, 0.0], w));
                }
            }
            2 => {
                // x = u, y = v (1 - u); reference area 1/2.
                for &(u, wu) in &gl {
                    for &(v, wv) in &gl {
                        let x = u;
                        let y = v * (1.0 - u);
                        let w = wu * wv * (1.0 - u) * 2.0;
                        points.push(([1.0 - x - y, x, y, 0.0], w));
                    }
                }
            }
            3 => {
                // x = u, y = v (1 - u), z = w (1 - u)(1 - v); reference volume 1/6.
                for &(u, wu) in &gl {
                    for &(v, wv) in &gl {
                        for &(t, wt) in &gl {
                            let x = u;
                            let y = v * (1.0 - u);
                            let z = t * (1.0 - u) * (1.0 - v);
                            let w = wu * wv * wt * (1.0 - u) * (1.0 - u) * (1.0 - v) * 6.0;
                            points.push(([1.0 - x - y - z, x, y, z], w));
                        }
                    }
                }
            }
            _ => panic!("simplex dimension must be 1, 2 or 3"),
        }
        Self { points }
    }

    /// Physical points and weights (already multiplied by the simplex measure).
    pub fn map(&self, vertices: &[Point], measure: f64) -> impl Iterator<Item = (Point, f64)> + '_ {
        let verts: Vec<Point> = vertices.to_vec();
        self.points.iter().map(move |(bary, w)| {
            let mut x = Point::zeros();
            for (k, v) in verts.iter().enumerate() {
                x += v * bary[k];
            }
            (x, w * measure)
        })
    }
}

/// Measure of a simplex given by 2, 3 or 4 vertices (unsigned).
pub fn simplex_measure(v: &[Point]) -> f64 {
    match v.len() {
        2 => (v[1] - v[0]).norm(),
        3 => triangle_vector_area(&v[0], &v[1], &v[2]).norm(),
        4 => tet_signed_volume(&v[0], &v[1], &v[2], &v[3]).abs(),
        _ => panic!("not a simplex"),
    }
}

/// Symmetric part of a tensor.
pub fn sym(m: &Mat3) -> Mat3 {
    (m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..7 {
            let rule = gauss_legendre(n);
            let wsum: f64 = rule.iter().map(|p| p.1).sum();
            assert!((wsum - 1.0).abs() < 1e-14);
            for p in 0..(2 * n) {
                let q: f64 = rule.iter().map(|(x, w)| w * x.powi(p as i32)).sum();
                assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-13, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn simplex_rules_integrate_monomials() {
        // ∫_T x^a y^b over the reference triangle = a! b! / (a+b+2)!
        let fact = |k: u32| (1..=k).map(|i| i as f64).product::<f64>();
        let tri = [Point::zeros(), Point::new(1.0, 0.0, 0.0), Point::new(0.0, 1.0, 0.0)];
        for rule in [SimplexRule::degree2(2), SimplexRule::conical(2, 3)] {
            for (a, b) in [(0, 0), (1, 0), (1, 1), (0, 2)] {
                let q: f64 = rule
                    .map(&tri, 0.5)
                    .map(|(x, w)| w * x.x.powi(a) * x.y.powi(b))
                    .sum();
                let exact = fact(a as u32) * fact(b as u32) / fact((a + b + 2) as u32);
                assert!((q - exact).abs() < 1e-14);
            }
        }
        let tet = [
            Point::zeros(),
            Point::new(1.0, 0.0, 0.0),
            Point::new(0.0, 1.0, 0.0),
            Point::new(0.0, 0.0, 1.0),
        ];
        for rule in [SimplexRule::degree2(3), SimplexRule::conical(3, 3)] {
            for (a, b, c) in [(0, 0, 0), (1, 0, 0), (0, 1, 1), (0, 0, 2)] {
                let q: f64 = rule
                    .map(&tet, 1.0 / 6.0)
                    .map(|(x, w)| w * x.x.powi(a) * x.y.powi(b) * x.z.powi(c))
                    .sum();
                let exact = fact(a as u32) * fact(b as u32) * fact(c as u32)
                    / fact((a + b + c + 3) as u32);
                assert!((q - exact).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn newell_gives_area_of_planar_polygon() {
        let sq = [
            Point::new(0.0, 0.0, 0.0),
            Point::new(2.0, 0.0, 0.0),
            Point::new(2.0, 1.0, 0.0),
            Point::new(0.0, 1.0, 0.0),
        ];
        let n = newell_normal(&sq);
        assert!((n - Vec3::new(0.0, 0.0, 2.0)).norm() < 1e-15);
    }
}
