//! Built-in mesh families: Cartesian, Kuhn tetrahedra, randomly perturbed
//! hexahedra and a graded quadtree around an inclined 2D fracture.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FracturePlane, PolytopalMesh};
use crate::error::{Error, Result};
use crate::geometry::{self, Point, Vec3};

const BOX_TAGS: [[&str; 2]; 3] = [["xmin", "xmax"], ["ymin", "ymax"], ["zmin", "zmax"]];

/// Tags boundary faces lying on the planes of an axis-aligned box.
pub fn tag_box(mesh: &mut PolytopalMesh, lo: Point, hi: Point) {
    let dim = mesh.dim;
    let tol = 1e-9 * (hi - lo).norm();
    mesh.tag_boundary_with(|c, _| {
        for axis in 0..dim {
            if (c[axis] - lo[axis]).abs() < tol {
                return Some(BOX_TAGS[axis][0].to_string());
            }
            if (c[axis] - hi[axis]).abs() < tol {
                return Some(BOX_TAGS[axis][1].to_string());
            }
        }
        None
    });
}

fn grid_index(n: [usize; 3], i: usize, j: usize, k: usize) -> usize {
    i + (n[0] + 1) * (j + (n[1] + 1) * k)
}

fn grid_points(n: [usize; 3], lo: Point, hi: Point) -> Vec<Point> {
    let mut v = Vec::with_capacity((n[0] + 1) * (n[1] + 1) * (n[2] + 1));
    for k in 0..=n[2] {
        for j in 0..=n[1] {
            for i in 0..=n[0] {
                v.push(Point::new(
                    lo.x + (hi.x - lo.x) * i as f64 / n[0] as f64,
                    lo.y + (hi.y - lo.y) * j as f64 / n[1] as f64,
                    lo.z + (hi.z - lo.z) * k as f64 / n[2] as f64,
                ));
            }
        }
    }
    v
}

/// Corner ids of hexahedron (i, j, k), indexed by `a + 2b + 4c` for offsets (a, b, c).
fn hex_corners(n: [usize; 3], i: usize, j: usize, k: usize) -> [usize; 8] {
    let mut c = [0; 8];
    for (m, slot) in c.iter_mut().enumerate() {
        *slot = grid_index(n, i + (m & 1), j + ((m >> 1) & 1), k + ((m >> 2) & 1));
    }
    c
}

/// The six quadrilaterals of a hexahedron given its corners, outward oriented.
fn hex_faces(c: &[usize; 8]) -> [[usize; 4]; 6] {
    [
        [c[0], c[4], c[6], c[2]],
        [c[1], c[3], c[7], c[5]],
        [c[0], c[1], c[5], c[4]],
        [c[2], c[6], c[7], c[3]],
        [c[0], c[2], c[3], c[1]],
        [c[4], c[5], c[7], c[6]],
    ]
}

/// Hexahedral grid with `n` cells per axis on the box `[lo, hi]`.
pub fn cartesian_3d(n: [usize; 3], lo: Point, hi: Point) -> PolytopalMesh {
    let vertices = grid_points(n, lo, hi);
    let mut cells = Vec::with_capacity(n[0] * n[1] * n[2]);
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                let c = hex_corners(n, i, j, k);
                cells.push(hex_faces(&c).iter().map(|f| f.to_vec()).collect());
            }
        }
    }
    let mut m = PolytopalMesh::build(3, vertices, &cells).expect("cartesian grid is valid");
    tag_box(&mut m, lo, hi);
    m
}

/// Quadrilateral grid in the `z = 0` plane.
pub fn rectangle_2d(n: [usize; 2], lo: Point, hi: Point) -> PolytopalMesh {
    let mut vertices = Vec::with_capacity((n[0] + 1) * (n[1] + 1));
    for j in 0..=n[1] {
        for i in 0..=n[0] {
            vertices.push(Point::new(
                lo.x + (hi.x - lo.x) * i as f64 / n[0] as f64,
                lo.y + (hi.y - lo.y) * j as f64 / n[1] as f64,
                0.0,
            ));
        }
    }
    let id = |i: usize, j: usize| i + (n[0] + 1) * j;
    let mut cells = Vec::with_capacity(n[0] * n[1]);
    for j in 0..n[1] {
        for i in 0..n[0] {
            let q = [id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)];
            cells.push((0..4).map(|a| vec![q[a], q[(a + 1) % 4]]).collect());
        }
    }
    let mut m = PolytopalMesh::build(2, vertices, &cells).expect("rectangle grid is valid");
    tag_box(&mut m, lo, hi);
    m
}

/// Cartesian grid with each hexahedron split into six tetrahedra sharing the
/// main diagonal (Kuhn split), conforming across cells.
pub fn tetrahedral_3d(n: [usize; 3], lo: Point, hi: Point) -> PolytopalMesh {
    let vertices = grid_points(n, lo, hi);
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut cells = Vec::with_capacity(6 * n[0] * n[1] * n[2]);
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                let c = hex_corners(n, i, j, k);
                for p in &perms {
                    let mut path = [0usize; 4];
                    let mut m = 0;
                    for (step, &axis) in p.iter().enumerate() {
                        m |= 1 << axis;
                        path[step + 1] = m;
                    }
                    let t = path.map(|m| c[m]);
                    cells.push(vec![
                        vec![t[0], t[1], t[2]],
                        vec![t[0], t[1], t[3]],
                        vec![t[0], t[2], t[3]],
                        vec![t[1], t[2], t[3]],
                    ]);
                }
            }
        }
    }
    let mut m = PolytopalMesh::build(3, vertices, &cells).expect("kuhn split is valid");
    tag_box(&mut m, lo, hi);
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Repair {
    /// Split non-planar quadrilaterals into two triangles.
    Cut,
    /// Keep non-planar faces and use the barycentric fan gradient.
    Bary,
}

/// Hexahedral grid with interior nodes moved randomly by up to
/// `amplitude * h` per axis. Nodes on the box boundary and on the axis-aligned
/// planes in `locked` (pairs of axis and coordinate) keep their coordinate
/// normal to that plane.
pub fn perturbed_hexa(
    n: [usize; 3],
    lo: Point,
    hi: Point,
    amplitude: f64,
    repair: Repair,
    seed: u64,
    locked: &[(usize, f64)],
) -> Result<PolytopalMesh> {
    if !(0.0..0.5).contains(&amplitude) {
        return Err(Error::InvalidInput(format!(
            "perturbation amplitude {amplitude} must be in [0, 0.5)"
        )));
    }
    let mut vertices = grid_points(n, lo, hi);
    let h = Vec3::new(
        (hi.x - lo.x) / n[0] as f64,
        (hi.y - lo.y) / n[1] as f64,
        (hi.z - lo.z) / n[2] as f64,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in vertices.iter_mut() {
        let orig = *p;
        for axis in 0..3 {
            let r: f64 = rng.random_range(-1.0..1.0);
            let tol = 1e-9 * h[axis];
            let pinned = (orig[axis] - lo[axis]).abs() < tol
                || (orig[axis] - hi[axis]).abs() < tol
                || locked
                    .iter()
                    .any(|&(a, c)| a == axis && (orig[axis] - c).abs() < tol);
            if !pinned {
                p[axis] += amplitude * h[axis] * r;
            }
        }
    }
    let hmin = h.min();
    let mut cells = Vec::with_capacity(n[0] * n[1] * n[2]);
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                let c = hex_corners(n, i, j, k);
                let mut faces = Vec::with_capacity(12);
                for q in hex_faces(&c) {
                    let pts = q.map(|s| vertices[s]);
                    let twist = geometry::tet_signed_volume(&pts[0], &pts[1], &pts[2], &pts[3]).abs();
                    if repair == Repair::Cut && twist > 1e-12 * hmin.powi(3) {
                        let r = (0..4).min_by_key(|&a| q[a]).unwrap();
                        let o = [q[r], q[(r + 1) % 4], q[(r + 2) % 4], q[(r + 3) % 4]];
                        faces.push(vec![o[0], o[1], o[2]]);
                        faces.push(vec![o[0], o[2], o[3]]);
                    } else {
                        faces.push(q.to_vec());
                    }
                }
                cells.push(faces);
            }
        }
    }
    let mut m = PolytopalMesh::build(3, vertices, &cells)?;
    m.check_star_shaped()?;
    tag_box(&mut m, lo, hi);
    Ok(m)
}

/// Parameters of the graded quadtree mesh around a single straight fracture
/// through the center of a square domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractureQuadtree {
    /// Half length of the fracture.
    pub half_length: f64,
    /// Number of faces along the fracture before uniform refinement (even).
    pub faces: usize,
    /// Uniform refinements applied after grading.
    pub refinements: usize,
    /// Minimal side length of the square domain; rounded up so that the
    /// fracture tips are grid nodes.
    pub min_domain: f64,
    /// A cell is split while its distance to the fracture is below
    /// `grading` times its size.
    pub grading: f64,
    /// Angle between the fracture and the x axis.
    pub angle: f64,
    /// Fan each polygon into triangles from its centroid.
    pub triangulate: bool,
}

impl Default for FractureQuadtree {
    fn default() -> Self {
        Self {
            half_length: 1.0,
            faces: 100,
            refinements: 0,
            min_domain: 320.0,
            grading: 3.0,
            angle: std::f64::consts::PI / 9.0,
            triangulate: false,
        }
    }
}

/// Result of [`fracture_quadtree`]: the mesh plus the frame it was built in.
#[derive(Debug, Clone)]
pub struct QuadtreeMesh {
    pub mesh: PolytopalMesh,
    /// Side of the square domain.
    pub side: f64,
    /// Unit vector along the fracture.
    pub tangent: Vec3,
    /// Unit normal of the fracture (`n⁺`).
    pub normal: Vec3,
}

impl QuadtreeMesh {
    /// Maps fracture-frame coordinates to global ones.
    pub fn to_global(&self, a: f64, b: f64) -> Point {
        self.tangent * a + self.normal * b
    }

    pub fn nearest_vertex(&self, p: &Point) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, v) in self.mesh.vertices.iter().enumerate() {
            let d = (v - p).norm();
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }
}

#[derive(Debug, Clone, Copy)]
struct QNode {
    x: i64,
    y: i64,
    s: i64,
    first_child: Option<usize>,
}

struct Quadtree {
    nodes: Vec<QNode>,
}

impl Quadtree {
    fn split(&mut self, i: usize) {
        let QNode { x, y, s, .. } = self.nodes[i];
        let h = s / 2;
        let first = self.nodes.len();
        for (dx, dy) in [(0, 0), (h, 0), (0, h), (h, h)] {
            self.nodes.push(QNode {
                x: x + dx,
                y: y + dy,
                s: h,
                first_child: None,
            });
        }
        self.nodes[i].first_child = Some(first);
    }

    /// Leaf containing the point given in doubled coordinates.
    fn find(&self, px2: i64, py2: i64) -> Option<usize> {
        let r = self.nodes[0];
        if px2 < 2 * r.x || py2 < 2 * r.y || px2 > 2 * (r.x + r.s) || py2 > 2 * (r.y + r.s) {
            return None;
        }
        let mut i = 0;
        while let Some(c) = self.nodes[i].first_child {
            let n = self.nodes[c];
            let right = px2 >= 2 * (n.x + n.s);
            let up = py2 >= 2 * (n.y + n.s);
            i = c + right as usize + 2 * up as usize;
        }
        Some(i)
    }

    fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].first_child.is_none())
            .collect()
    }
}

/// Graded quadtree mesh (hanging nodes become polygon vertices) with 2:1
/// balance, conforming to the fracture `[-ℓ, ℓ] × {0}` in its own frame and
/// rotated by `angle`.
pub fn fracture_quadtree(p: &FractureQuadtree) -> Result<QuadtreeMesh> {
    if p.faces == 0 || p.faces % 2 != 0 {
        return Err(Error::InvalidInput("fracture face count must be even".into()));
    }
    let scale = 1i64 << p.refinements;
    let h0 = 2.0 * p.half_length / p.faces as f64;
    let mut side_units = 2i64;
    while (side_units as f64) * h0 < p.min_domain || side_units < p.faces as i64 * 2 {
        side_units *= 2;
    }
    let root = side_units * scale;
    let half = root / 2;
    let tip = p.faces as i64 / 2 * scale;
    let unit = h0 / scale as f64;

    let mut tree = Quadtree {
        nodes: vec![QNode {
            x: -half,
            y: -half,
            s: root,
            first_child: None,
        }],
    };
    let dist = |n: &QNode| {
        let dx = (n.x - tip).max(-tip - (n.x + n.s)).max(0) as f64;
        let dy = n.y.max(-(n.y + n.s)).max(0) as f64;
        dx.hypot(dy)
    };
    let mut stack = vec![0usize];
    while let Some(i) = stack.pop() {
        let n = tree.nodes[i];
        if n.s > scale && dist(&n) < p.grading * n.s as f64 {
            tree.split(i);
            let c = tree.nodes[i].first_child.unwrap();
            stack.extend(c..c + 4);
        }
    }
    // 2:1 balance across edges.
    loop {
        let mut changed = false;
        for i in tree.leaves() {
            let n = tree.nodes[i];
            let (x2, y2, s) = (2 * n.x, 2 * n.y, n.s);
            let probes = [
                (x2 - 1, y2 + s),
                (x2 + 2 * s + 1, y2 + s),
                (x2 + s, y2 - 1),
                (x2 + s, y2 + 2 * s + 1),
            ];
            for (px, py) in probes {
                if let Some(j) = tree.find(px, py) {
                    if tree.nodes[j].s > 2 * s {
                        tree.split(j);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    for _ in 0..p.refinements {
        for i in tree.leaves() {
            tree.split(i);
        }
    }

    let leaves = tree.leaves();
    let mut ids: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    for &i in &leaves {
        let n = tree.nodes[i];
        for c in [(n.x, n.y), (n.x + n.s, n.y), (n.x + n.s, n.y + n.s), (n.x, n.y + n.s)] {
            ids.insert(c, 0);
        }
    }
    for (k, v) in ids.values_mut().enumerate() {
        *v = k;
    }
    let (sn, cs) = p.angle.sin_cos();
    let tangent = Vec3::new(cs, sn, 0.0);
    let normal = Vec3::new(-sn, cs, 0.0);
    let to_global = |a: f64, b: f64| tangent * a + normal * b;
    let mut vertices: Vec<Point> = ids
        .keys()
        .map(|&(x, y)| to_global(x as f64 * unit, y as f64 * unit))
        .collect();

    let mut cells: Vec<Vec<Vec<usize>>> = Vec::with_capacity(leaves.len());
    for &i in &leaves {
        let n = tree.nodes[i];
        let corners = [(n.x, n.y), (n.x + n.s, n.y), (n.x + n.s, n.y + n.s), (n.x, n.y + n.s)];
        let mut poly = Vec::with_capacity(8);
        for a in 0..4 {
            let (c0, c1) = (corners[a], corners[(a + 1) % 4]);
            poly.push(ids[&c0]);
            if n.s % 2 == 0 {
                let mid = ((c0.0 + c1.0) / 2, (c0.1 + c1.1) / 2);
                if let Some(&m) = ids.get(&mid) {
                    poly.push(m);
                }
            }
        }
        let m = poly.len();
        if p.triangulate {
            let center = vertices.len();
            let cx = (n.x as f64 + n.s as f64 / 2.0) * unit;
            let cy = (n.y as f64 + n.s as f64 / 2.0) * unit;
            vertices.push(to_global(cx, cy));
            for a in 0..m {
                let (s0, s1) = (poly[a], poly[(a + 1) % m]);
                cells.push(vec![vec![center, s0], vec![s0, s1], vec![s1, center]]);
            }
        } else {
            cells.push((0..m).map(|a| vec![poly[a], poly[(a + 1) % m]]).collect());
        }
    }

    let mut mesh = PolytopalMesh::build(2, vertices, &cells)?;
    let l = root as f64 * unit / 2.0;
    let tol = 1e-9 * l;
    mesh.tag_boundary_with(|c, _| {
        let (a, b) = (c.dot(&tangent), c.dot(&normal));
        if (a + l).abs() < tol {
            Some("left".into())
        } else if (a - l).abs() < tol {
            Some("right".into())
        } else if (b + l).abs() < tol {
            Some("bottom".into())
        } else if (b - l).abs() < tol {
            Some("top".into())
        } else {
            None
        }
    });
    let plane = FracturePlane::segment(
        to_global(-p.half_length, 0.0),
        to_global(p.half_length, 0.0),
        Some(normal),
    );
    let mesh = mesh.tag_fracture(&[plane])?;
    Ok(QuadtreeMesh {
        mesh,
        side: 2.0 * l,
        tangent,
        normal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube() -> (Point, Point) {
        (Point::new(-1.0, -1.0, -1.0), Point::new(1.0, 1.0, 1.0))
    }

    fn fracture_x0() -> FracturePlane {
        FracturePlane::polygon(
            &[
                Point::new(0.0, -1.0, -1.0),
                Point::new(0.0, 1.0, -1.0),
                Point::new(0.0, 1.0, 1.0),
                Point::new(0.0, -1.0, 1.0),
            ],
            Some(Vec3::new(1.0, 0.0, 0.0)),
        )
    }

    #[test]
    fn cartesian_counts_and_closure() {
        let (lo, hi) = cube();
        let m = cartesian_3d([8, 8, 8], lo, hi);
        assert_eq!(m.cells.len(), 512);
        let vol: f64 = m.cells.iter().map(|c| c.volume).sum();
        assert!((vol - 8.0).abs() < 1e-12);
        for k in 0..m.cells.len() {
            assert!(m.closure_defect(k).norm() < 1e-12);
        }
        assert!(m.faces.iter().filter(|f| f.is_boundary()).all(|f| f.boundary_tag.is_some()));
    }

    #[test]
    fn four_cubed_fracture_has_sixteen_faces() {
        let (lo, hi) = cube();
        let m = cartesian_3d([4, 4, 4], lo, hi).tag_fracture(&[fracture_x0()]).unwrap();
        assert_eq!(m.fracture_faces.len(), 16);
        assert_eq!(m.fracture_components.len(), 1);
    }

    #[test]
    fn kuhn_split_is_conforming() {
        let (lo, hi) = cube();
        let m = tetrahedral_3d([2, 2, 2], lo, hi);
        assert_eq!(m.cells.len(), 48);
        let vol: f64 = m.cells.iter().map(|c| c.volume).sum();
        assert!((vol - 8.0).abs() < 1e-12);
        // Each boundary square is split into two triangles: 6 sides * 4 squares * 2.
        assert_eq!(m.faces.iter().filter(|f| f.is_boundary()).count(), 48);
        assert!(m.cells.iter().all(|c| c.faces.len() == 4));
        let m = m.tag_fracture(&[fracture_x0()]).unwrap();
        assert_eq!(m.fracture_faces.len(), 8);
    }

    #[test]
    fn perturbed_cut_keeps_fracture_planar() {
        let (lo, hi) = cube();
        let m = perturbed_hexa([4, 4, 4], lo, hi, 0.2, Repair::Cut, 7, &[(0, 0.0)]).unwrap();
        assert!(m.faces.iter().all(|f| f.planar));
        assert!(m.faces.iter().any(|f| f.vertices.len() == 3));
        let m = m.tag_fracture(&[fracture_x0()]).unwrap();
        assert_eq!(m.fracture_faces.len(), 16);
        assert!(m
            .fracture_faces
            .iter()
            .all(|ff| m.faces[ff.face].vertices.len() == 4 && m.faces[ff.face].normal.x.abs() > 1.0 - 1e-14));
        let vol: f64 = m.cells.iter().map(|c| c.volume).sum();
        assert!((vol - 8.0).abs() < 1e-12);
    }

    #[test]
    fn perturbed_bary_detects_non_planar_faces() {
        let (lo, hi) = cube();
        let m = perturbed_hexa([4, 4, 4], lo, hi, 0.2, Repair::Bary, 7, &[(0, 0.0)]).unwrap();
        assert!(m.faces.iter().any(|f| !f.planar));
        assert!(m.faces.iter().all(|f| f.vertices.len() == 4));
        let vol: f64 = m.cells.iter().map(|c| c.volume).sum();
        assert!((vol - 8.0).abs() < 1e-12);
        let m = m.tag_fracture(&[fracture_x0()]).unwrap();
        assert!(m.fracture_faces.iter().all(|ff| m.faces[ff.face].planar));
    }

    #[test]
    fn zero_amplitude_matches_cartesian() {
        let (lo, hi) = cube();
        let a = perturbed_hexa([3, 3, 3], lo, hi, 0.0, Repair::Cut, 1, &[]).unwrap();
        let b = cartesian_3d([3, 3, 3], lo, hi);
        assert_eq!(a.vertices, b.vertices);
        assert_eq!(a.faces.len(), b.faces.len());
    }

    #[test]
    fn perturbation_is_seeded() {
        let (lo, hi) = cube();
        let a = perturbed_hexa([3, 3, 3], lo, hi, 0.2, Repair::Cut, 5, &[]).unwrap();
        let b = perturbed_hexa([3, 3, 3], lo, hi, 0.2, Repair::Cut, 5, &[]).unwrap();
        let c = perturbed_hexa([3, 3, 3], lo, hi, 0.2, Repair::Cut, 6, &[]).unwrap();
        assert_eq!(a.vertices, b.vertices);
        assert_ne!(a.vertices, c.vertices);
    }

    #[test]
    fn quadtree_resolves_fracture() {
        let p = FractureQuadtree {
            faces: 20,
            min_domain: 40.0,
            ..Default::default()
        };
        let q = fracture_quadtree(&p).unwrap();
        let m = &q.mesh;
        assert_eq!(m.fracture_faces.len(), 20);
        let area: f64 = m.cells.iter().map(|c| c.volume).sum();
        assert!((area - q.side * q.side).abs() < 1e-9 * area);
        for k in 0..m.cells.len() {
            assert!(m.closure_defect(k).norm() < 1e-12 * q.side);
        }
        let tagged = m.faces.iter().filter(|f| f.boundary_tag.is_some()).count();
        assert_eq!(tagged, m.faces.iter().filter(|f| f.is_boundary()).count());
        let r = fracture_quadtree(&FractureQuadtree { refinements: 1, ..p }).unwrap();
        assert_eq!(r.mesh.fracture_faces.len(), 40);
        assert_eq!(r.mesh.cells.len(), 4 * m.cells.len());
        assert!((r.side - q.side).abs() < 1e-12);
        let t = fracture_quadtree(&FractureQuadtree { triangulate: true, ..p }).unwrap();
        assert_eq!(t.mesh.fracture_faces.len(), 20);
        assert!(t.mesh.cells.iter().all(|c| c.faces.len() == 3));
    }
}
