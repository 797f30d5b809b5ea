//! Displacement unknowns (side-dependent nodal blocks plus one-sided face
//! bubbles) and face-wise multipliers.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::mesh::{PolytopalMesh, SideLabel};

/// A scalar slot of a nodal block: an index into the free unknowns or into the
/// prescribed values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dof {
    Free(usize),
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodalBlock {
    pub vertex: usize,
    /// Cell used to evaluate one-sided values.
    pub representative: usize,
    pub cells: Vec<usize>,
    pub label: SideLabel,
    /// Only the first `dim` entries are meaningful.
    pub slots: [Dof; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointConstraint {
    pub vertex: usize,
    pub component: usize,
}

/// Which nodal slots are prescribed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DirichletSpec {
    /// Boundary tags whose vertices are fully prescribed.
    pub tags: Vec<String>,
    /// Prescribe every boundary vertex regardless of tags.
    pub all_boundary: bool,
    pub point_constraints: Vec<PointConstraint>,
}

impl DirichletSpec {
    pub fn whole_boundary() -> Self {
        Self {
            all_boundary: true,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct DofMap {
    pub dim: usize,
    pub blocks: Vec<NodalBlock>,
    /// For each fracture face, the free indices of its bubble.
    pub bubbles: Vec<[usize; 3]>,
    pub n_free: usize,
    pub n_fixed: usize,
    /// (block, component) of each prescribed slot.
    pub fixed_slots: Vec<(usize, usize)>,
    cell_blocks: Vec<Vec<usize>>,
    cell_bubbles: Vec<Vec<usize>>,
}

impl DofMap {
    pub fn build(mesh: &PolytopalMesh, dirichlet: &DirichletSpec) -> Result<Self> {
        let dim = mesh.dim;
        let mut fixed_vertex = vec![false; mesh.vertices.len()];
        for f in mesh.faces.iter().filter(|f| f.is_boundary()) {
            let hit = dirichlet.all_boundary
                || f.boundary_tag.as_ref().is_some_and(|t| dirichlet.tags.contains(t));
            if hit {
                for &s in &f.vertices {
                    fixed_vertex[s] = true;
                }
            }
        }
        let mut point: BTreeSet<(usize, usize)> = BTreeSet::new();
        for pc in &dirichlet.point_constraints {
            if pc.vertex >= mesh.vertices.len() || pc.component >= dim {
                return Err(Error::InvalidInput(format!("bad point constraint {pc:?}")));
            }
            point.insert((pc.vertex, pc.component));
        }

        let mut blocks = Vec::new();
        let mut cell_blocks: Vec<Vec<usize>> =
            mesh.cells.iter().map(|c| vec![usize::MAX; c.vertices.len()]).collect();
        let mut n_free = 0;
        let mut fixed_slots = Vec::new();
        for s in 0..mesh.vertices.len() {
            let classes = mesh.vertex_side_classes(s);
            if classes.len() > 1 && point.iter().any(|&(v, _)| v == s) {
                return Err(Error::InvalidInput(format!(
                    "point constraint on vertex {s} which carries several side values"
                )));
            }
            for class in classes {
                let b = blocks.len();
                let mut slots = [Dof::Free(usize::MAX); 3];
                for (c, slot) in slots.iter_mut().enumerate().take(dim) {
                    if fixed_vertex[s] || point.contains(&(s, c)) {
                        *slot = Dof::Fixed(fixed_slots.len());
                        fixed_slots.push((b, c));
                    } else {
                        *slot = Dof::Free(n_free);
                        n_free += 1;
                    }
                }
                for &k in &class.cells {
                    let a = mesh.cells[k].local_vertex(s).expect("vertex of its cells");
                    cell_blocks[k][a] = b;
                }
                blocks.push(NodalBlock {
                    vertex: s,
                    representative: class.representative,
                    cells: class.cells,
                    label: class.label,
                    slots,
                });
            }
        }
        let mut bubbles = Vec::with_capacity(mesh.fracture_faces.len());
        let mut cell_bubbles = vec![Vec::new(); mesh.cells.len()];
        for (j, ff) in mesh.fracture_faces.iter().enumerate() {
            let mut idx = [usize::MAX; 3];
            for slot in idx.iter_mut().take(dim) {
                *slot = n_free;
                n_free += 1;
            }
            bubbles.push(idx);
            cell_bubbles[ff.plus].push(j);
        }
        let n_fixed = fixed_slots.len();
        Ok(Self {
            dim,
            blocks,
            bubbles,
            n_free,
            n_fixed,
            fixed_slots,
            cell_blocks,
            cell_bubbles,
        })
    }

    /// Nodal block of local vertex `a` (position in `cell.vertices`) of cell `k`.
    pub fn block(&self, k: usize, a: usize) -> usize {
        self.cell_blocks[k][a]
    }

    pub fn cell_blocks(&self, k: usize) -> &[usize] {
        &self.cell_blocks[k]
    }

    /// Fracture faces whose bubble belongs to cell `k` (faces of `F⁺_{Γ,K}`).
    pub fn cell_bubbles(&self, k: usize) -> &[usize] {
        &self.cell_bubbles[k]
    }

    /// Number of free nodal unknowns (the bubbles follow them).
    pub fn n_free_nodal(&self) -> usize {
        self.n_free - self.dim * self.bubbles.len()
    }

    pub fn zeros(&self) -> DisplacementVector {
        DisplacementVector {
            free: vec![0.0; self.n_free],
            fixed: vec![0.0; self.n_fixed],
        }
    }

    /// Vector whose nodal blocks (free and prescribed) are given by `f` and
    /// whose bubbles are zero.
    pub fn from_nodal<F: FnMut(&NodalBlock) -> Vec3>(&self, mut f: F) -> DisplacementVector {
        let mut v = self.zeros();
        for b in &self.blocks {
            let val = f(b);
            for c in 0..self.dim {
                v.set(b.slots[c], val[c]);
            }
        }
        v
    }

    /// Replaces the prescribed values with those produced by `f`.
    pub fn prescribe<F: FnMut(&NodalBlock) -> Vec3>(&self, v: &mut DisplacementVector, mut f: F) {
        for (i, &(b, c)) in self.fixed_slots.iter().enumerate() {
            v.fixed[i] = f(&self.blocks[b])[c];
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementVector {
    pub free: Vec<f64>,
    pub fixed: Vec<f64>,
}

impl DisplacementVector {
    pub fn get(&self, d: Dof) -> f64 {
        match d {
            Dof::Free(i) => self.free[i],
            Dof::Fixed(i) => self.fixed[i],
        }
    }

    pub fn set(&mut self, d: Dof, value: f64) {
        match d {
            Dof::Free(i) => self.free[i] = value,
            Dof::Fixed(i) => self.fixed[i] = value,
        }
    }

    pub fn nodal(&self, map: &DofMap, block: usize) -> Vec3 {
        let mut v = Vec3::zeros();
        for c in 0..map.dim {
            v[c] = self.get(map.blocks[block].slots[c]);
        }
        v
    }

    pub fn bubble(&self, map: &DofMap, j: usize) -> Vec3 {
        let mut v = Vec3::zeros();
        for c in 0..map.dim {
            v[c] = self.free[map.bubbles[j][c]];
        }
        v
    }

    pub fn set_bubble(&mut self, map: &DofMap, j: usize, b: Vec3) {
        for c in 0..map.dim {
            self.free[map.bubbles[j][c]] = b[c];
        }
    }

    pub fn is_finite(&self) -> bool {
        self.free.iter().chain(&self.fixed).all(|x| x.is_finite())
    }
}

/// One vector per fracture face together with the reference normal `n⁺` of
/// its component.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierVector {
    pub values: Vec<Vec3>,
    pub normals: Vec<Vec3>,
}

impl MultiplierVector {
    pub fn zeros(mesh: &PolytopalMesh) -> Self {
        let normals = (0..mesh.fracture_faces.len()).map(|j| mesh.fracture_normal(j)).collect();
        Self {
            values: vec![Vec3::zeros(); mesh.fracture_faces.len()],
            normals,
        }
    }

    pub fn normal_part(&self, j: usize) -> f64 {
        self.values[j].dot(&self.normals[j])
    }

    pub fn tangential_part(&self, j: usize) -> Vec3 {
        self.values[j] - self.normals[j] * self.normal_part(j)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn flat(&self, dim: usize) -> Vec<f64> {
        self.values.iter().flat_map(|v| v.iter().take(dim).copied().collect::<Vec<_>>()).collect()
    }
}

/// Projection of a single vector onto `{ξ·n ≥ 0, |ξ_τ| ≤ g}`.
pub fn project_cone_vec(xi: Vec3, n: Vec3, g: f64) -> Vec3 {
    let xn = xi.dot(&n);
    let xt = xi - n * xn;
    let pn = xn.max(0.0);
    let nt = xt.norm();
    let pt = if nt > g { xt * (g / nt) } else { xt };
    n * pn + pt
}

/// Face-wise projection onto the discrete dual cone.
pub fn project_cone(lambda: &MultiplierVector, g: &[f64]) -> MultiplierVector {
    let values = lambda
        .values
        .iter()
        .zip(&lambda.normals)
        .zip(g)
        .map(|((&l, &n), &gj)| project_cone_vec(l, n, gj))
        .collect();
    MultiplierVector {
        values,
        normals: lambda.normals.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::mesh::generate::cartesian_3d;
    use crate::mesh::FracturePlane;
    use proptest::prelude::*;

    fn plane_x(x: f64, lo: f64, hi: f64) -> FracturePlane {
        FracturePlane::polygon(
            &[
                Point::new(x, lo, lo),
                Point::new(x, hi, lo),
                Point::new(x, hi, hi),
                Point::new(x, lo, hi),
            ],
            Some(Vec3::x()),
        )
    }

    #[test]
    fn clamped_cube_has_no_unknowns() {
        let m = cartesian_3d([1, 1, 1], Point::zeros(), Point::new(1.0, 1.0, 1.0));
        let map = DofMap::build(&m, &DirichletSpec::whole_boundary()).unwrap();
        assert_eq!(map.n_free, 0);
        assert_eq!(map.n_fixed, 24);
    }

    #[test]
    fn two_cell_fracture_count() {
        let m = cartesian_3d([2, 1, 1], Point::zeros(), Point::new(2.0, 1.0, 1.0))
            .tag_fracture(&[plane_x(1.0, 0.0, 1.0)])
            .unwrap();
        let map = DofMap::build(&m, &DirichletSpec::default()).unwrap();
        assert_eq!(map.n_free, 51);
        assert_eq!(map.blocks.len(), 16);
        // The bubble sits on the plus cell only.
        let ff = m.fracture_faces[0];
        assert_eq!(map.cell_bubbles(ff.plus), &[0]);
        assert!(map.cell_bubbles(ff.minus).is_empty());
    }

    /// Flood fill over cells around each vertex, crossing only non-fracture faces.
    fn brute_force_classes(m: &PolytopalMesh, s: usize) -> usize {
        let cells: Vec<usize> = (0..m.cells.len())
            .filter(|&k| m.cells[k].vertices.contains(&s))
            .collect();
        let mut seen = vec![false; cells.len()];
        let mut count = 0;
        for start in 0..cells.len() {
            if seen[start] {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(a) = stack.pop() {
                for b in 0..cells.len() {
                    if seen[b] {
                        continue;
                    }
                    let shared = m.cells[cells[a]].faces.iter().find(|f| m.cells[cells[b]].faces.contains(f));
                    if let Some(&f) = shared {
                        if m.faces[f].vertices.contains(&s) && m.fracture_index(f).is_none() {
                            seen[b] = true;
                            stack.push(b);
                        }
                    }
                }
            }
        }
        count
    }

    #[test]
    fn duplicated_vertices_match_flood_fill() {
        let lo = Point::new(-1.0, -1.0, -1.0);
        let hi = Point::new(1.0, 1.0, 1.0);
        let m = cartesian_3d([4, 4, 4], lo, hi).tag_fracture(&[plane_x(0.0, -1.0, 1.0)]).unwrap();
        let map = DofMap::build(&m, &DirichletSpec::whole_boundary()).unwrap();
        let mut expected_free_blocks = 0;
        let mut duplicated = 0;
        let boundary = m.boundary_vertices();
        for s in 0..m.vertices.len() {
            let n = brute_force_classes(&m, s);
            assert_eq!(m.vertex_side_classes(s).len(), n);
            if n > 1 {
                duplicated += 1;
            }
            if !boundary[s] {
                expected_free_blocks += n;
            }
        }
        // All 25 vertices of the closed fracture square are duplicated.
        assert_eq!(duplicated, 25);
        assert_eq!(map.n_free, 3 * expected_free_blocks + 3 * 16);
        assert_eq!(expected_free_blocks, 27 + 9);
    }

    #[test]
    fn same_block_for_cells_off_fracture() {
        let m = cartesian_3d([2, 2, 2], Point::zeros(), Point::new(2.0, 2.0, 2.0));
        let map = DofMap::build(&m, &DirichletSpec::default()).unwrap();
        let center = m.vertices.iter().position(|p| (p - Point::new(1.0, 1.0, 1.0)).norm() < 1e-12).unwrap();
        let blocks: BTreeSet<usize> = (0..m.cells.len())
            .map(|k| map.block(k, m.cells[k].local_vertex(center).unwrap()))
            .collect();
        assert_eq!(blocks.len(), 1);
    }

    #[test]
    fn side_classes_ignore_orientation() {
        let lo = Point::new(-1.0, -1.0, -1.0);
        let hi = Point::new(1.0, 1.0, 1.0);
        let mut flipped = plane_x(0.0, -1.0, 1.0);
        flipped.normal = Some([-1.0, 0.0, 0.0]);
        let a = cartesian_3d([2, 2, 2], lo, hi).tag_fracture(&[plane_x(0.0, -1.0, 1.0)]).unwrap();
        let b = cartesian_3d([2, 2, 2], lo, hi).tag_fracture(&[flipped]).unwrap();
        for s in 0..a.vertices.len() {
            let ca: Vec<_> = a.vertex_side_classes(s).into_iter().map(|c| c.cells).collect();
            let cb: Vec<_> = b.vertex_side_classes(s).into_iter().map(|c| c.cells).collect();
            assert_eq!(ca, cb);
        }
        assert_eq!(a.fracture_faces[0].plus, b.fracture_faces[0].minus);
    }

    #[test]
    fn cone_projection_examples() {
        let n = Vec3::x();
        let p = project_cone_vec(Vec3::new(-3.0, 0.0, 0.0), n, 1.0);
        assert_eq!(p, Vec3::zeros());
        let v = Vec3::new(2.0, 3.0, 4.0);
        assert!((project_cone_vec(v, n, 5.0) - v).norm() < 1e-15);
        let p = project_cone_vec(Vec3::new(2.0, 6.0, 8.0), n, 5.0);
        assert!((p - Vec3::new(2.0, 3.0, 4.0)).norm() < 1e-15);
    }

    proptest! {
        #[test]
        fn cone_projection_is_idempotent_and_nonexpansive(
            a in prop::array::uniform3(-10.0f64..10.0),
            b in prop::array::uniform3(-10.0f64..10.0),
            g in 0.0f64..5.0,
            theta in 0.0f64..6.28,
        ) {
            let n = Vec3::new(theta.cos(), theta.sin(), 0.0);
            let (a, b) = (Vec3::from(a), Vec3::from(b));
            let pa = project_cone_vec(a, n, g);
            prop_assert!((project_cone_vec(pa, n, g) - pa).norm() <= 1e-12 * (1.0 + pa.norm()));
            let pb = project_cone_vec(b, n, g);
            prop_assert!((pa - pb).norm() <= (a - b).norm() * (1.0 + 1e-12) + 1e-12);
        }
    }
}
