//! Polytopal meshes conforming to a planar fracture network.
//!
//! Cells are given as lists of faces, each face a cyclically ordered list of
//! vertex ids. In two dimensions faces are segments (two vertices) and the
//! mesh lives in the `z = 0` plane.

pub mod generate;
pub mod io;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Point, Vec3};

/// Relative tolerance used to decide face planarity.
pub const PLANARITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct FanTriangle {
    /// Local indices (into the face vertex list) of the edge.
    pub edge: [usize; 2],
    pub area: f64,
    /// Unit normal oriented like the face.
    pub normal: Vec3,
    pub centroid: Point,
}

#[derive(Debug, Clone)]
pub struct Face {
    pub vertices: Vec<usize>,
    pub area: f64,
    pub centroid: Point,
    /// Unit normal given by the vertex ordering (area-weighted average for
    /// non-planar faces).
    pub normal: Vec3,
    /// `Σ_T |T| n_T` over the fan; equals `area * normal` for planar faces.
    pub vector_area: Vec3,
    pub diameter: f64,
    pub planar: bool,
    /// Isobarycenter of the vertices, used as the fan apex.
    pub center: Point,
    /// Edge `i` joins local vertices `i` and `i+1`; empty in 2D.
    pub edge_lengths: Vec<f64>,
    /// In-plane outward unit normals `n_σe`; empty in 2D.
    pub edge_normals: Vec<Vec3>,
    /// Fan triangulation from `center`; empty in 2D.
    pub fan: Vec<FanTriangle>,
    /// Unit tangent from vertex 0 to vertex 1 (2D only).
    pub tangent: Vec3,
    pub cells: Vec<usize>,
    pub boundary_tag: Option<String>,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.cells.len() == 1
    }
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub faces: Vec<usize>,
    /// +1 when the face normal points out of the cell, -1 otherwise.
    pub orientation: Vec<f64>,
    /// Sorted vertex ids.
    pub vertices: Vec<usize>,
    pub volume: f64,
    pub centroid: Point,
    pub diameter: f64,
    /// Distance from the centroid to the closest face plane.
    pub inradius: f64,
}

impl Cell {
    pub fn local_vertex(&self, s: usize) -> Option<usize> {
        self.vertices.binary_search(&s).ok()
    }

    pub fn outward_normal(&self, local_face: usize, face: &Face) -> Vec3 {
        face.normal * self.orientation[local_face]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FracturePlane {
    /// Polygon vertices (two end points in 2D).
    pub vertices: Vec<[f64; 3]>,
    /// Reference orientation `n⁺`; computed from the vertex order when absent.
    #[serde(default)]
    pub normal: Option<[f64; 3]>,
}

impl FracturePlane {
    pub fn segment(a: Point, b: Point, normal: Option<Vec3>) -> Self {
        Self {
            vertices: vec![a.into(), b.into()],
            normal: normal.map(Into::into),
        }
    }

    pub fn polygon(pts: &[Point], normal: Option<Vec3>) -> Self {
        Self {
            vertices: pts.iter().map(|p| (*p).into()).collect(),
            normal: normal.map(Into::into),
        }
    }

    fn points(&self) -> Vec<Point> {
        self.vertices.iter().map(|v| Point::from(*v)).collect()
    }

    fn reference_normal(&self, dim: usize) -> Vec3 {
        if let Some(n) = self.normal {
            return Vec3::from(n).normalize();
        }
        let p = self.points();
        if dim == 2 {
            let t = (p[1] - p[0]).normalize();
            Vec3::new(t.y, -t.x, 0.0)
        } else {
            geometry::newell_normal(&p).normalize()
        }
    }

    fn measure(&self, dim: usize) -> f64 {
        let p = self.points();
        if dim == 2 {
            (p[1] - p[0]).norm()
        } else {
            geometry::newell_normal(&p).norm()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractureFace {
    pub face: usize,
    /// Cell whose outward normal on the face is `n⁺`.
    pub plus: usize,
    pub minus: usize,
    pub component: usize,
}

#[derive(Debug, Clone)]
pub struct FractureComponent {
    pub normal: Vec3,
    /// Indices into `PolytopalMesh::fracture_faces`.
    pub faces: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SideLabel {
    Plus,
    Minus,
    /// The class touches both sides (fracture tip).
    Mixed,
    Off,
}

/// One value of the nodal unknown at a vertex: the cells of `M_s` lying on the
/// same side of the fracture network.
#[derive(Debug, Clone, PartialEq)]
pub struct SideClass {
    pub vertex: usize,
    pub representative: usize,
    pub cells: Vec<usize>,
    pub label: SideLabel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityMetrics {
    /// max over cells of h_K / r_K.
    pub max_cell_ratio: f64,
    /// max over cells and faces of h_K / h_σ.
    pub max_face_ratio: f64,
    pub h_max: f64,
    pub h_min: f64,
}

#[derive(Debug, Clone)]
pub struct PolytopalMesh {
    pub dim: usize,
    pub vertices: Vec<Point>,
    /// Unique vertex pairs (3D); in 2D edges coincide with faces and this is empty.
    pub edges: Vec<[usize; 2]>,
    pub faces: Vec<Face>,
    pub cells: Vec<Cell>,
    pub fracture_faces: Vec<FractureFace>,
    pub fracture_components: Vec<FractureComponent>,
    pub fracture_planes: Vec<FracturePlane>,
    face_fracture: Vec<Option<usize>>,
    vertex_cells: Vec<Vec<usize>>,
}

fn face_key(vertices: &[usize]) -> Vec<usize> {
    let mut k = vertices.to_vec();
    k.sort_unstable();
    k
}

impl PolytopalMesh {
    /// Builds incidence maps and all geometric quantities.
    ///
    /// `raw_cells[k]` lists the faces of cell `k`, each as a cyclic vertex list.
    /// Orientation of the input faces is irrelevant.
    pub fn build(dim: usize, vertices: Vec<Point>, raw_cells: &[Vec<Vec<usize>>]) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidInput(format!("dimension {dim}")));
        }
        let mut face_index: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut face_vertices: Vec<Vec<usize>> = Vec::new();
        let mut face_cells: Vec<Vec<usize>> = Vec::new();
        let mut cell_faces = Vec::with_capacity(raw_cells.len());
        for (k, raw) in raw_cells.iter().enumerate() {
            let mut faces = Vec::with_capacity(raw.len());
            for fv in raw {
                if (dim == 2 && fv.len() != 2) || (dim == 3 && fv.len() < 3) {
                    return Err(Error::InvalidInput(format!("cell {k} has face {fv:?}")));
                }
                if let Some(&v) = fv.iter().find(|&&v| v >= vertices.len()) {
                    return Err(Error::InvalidInput(format!("cell {k} references vertex {v}")));
                }
                let key = face_key(fv);
                let id = *face_index.entry(key).or_insert_with(|| {
                    face_vertices.push(fv.clone());
                    face_cells.push(Vec::new());
                    face_vertices.len() - 1
                });
                face_cells[id].push(k);
                if face_cells[id].len() > 2 {
                    return Err(Error::NonManifoldFace {
                        face: face_vertices[id].clone(),
                        count: face_cells[id].len(),
                    });
                }
                faces.push(id);
            }
            cell_faces.push(faces);
        }

        let mut faces: Vec<Face> = face_vertices
            .into_iter()
            .zip(face_cells)
            .map(|(fv, fc)| face_geometry(dim, &vertices, fv, fc))
            .collect();
        for (i, f) in faces.iter().enumerate() {
            if f.area <= 0.0 || !f.area.is_finite() {
                return Err(Error::DegenerateGeometry {
                    what: "face",
                    index: i,
                    detail: format!("area {}", f.area),
                });
            }
        }

        let mut cells = Vec::with_capacity(cell_faces.len());
        for (k, cf) in cell_faces.into_iter().enumerate() {
            cells.push(cell_geometry(dim, k, &vertices, &faces, cf)?);
        }

        let mut vertex_cells = vec![Vec::new(); vertices.len()];
        for (k, c) in cells.iter().enumerate() {
            for &s in &c.vertices {
                vertex_cells[s].push(k);
            }
        }

        let mut edges = Vec::new();
        if dim == 3 {
            let mut seen = std::collections::BTreeSet::new();
            for f in &faces {
                let n = f.vertices.len();
                for i in 0..n {
                    let (a, b) = (f.vertices[i], f.vertices[(i + 1) % n]);
                    seen.insert([a.min(b), a.max(b)]);
                }
            }
            edges = seen.into_iter().collect();
        }

        // Faces are shared by at most two cells; keep the cell order deterministic.
        for f in &mut faces {
            f.cells.sort_unstable();
        }
        let nf = faces.len();
        Ok(Self {
            dim,
            vertices,
            edges,
            faces,
            cells,
            fracture_faces: Vec::new(),
            fracture_components: Vec::new(),
            fracture_planes: Vec::new(),
            face_fracture: vec![None; nf],
            vertex_cells,
        })
    }

    /// Assigns boundary tags from a predicate on the face centroid and normal.
    pub fn tag_boundary_with<F>(&mut self, mut tag: F)
    where
        F: FnMut(&Point, &Vec3) -> Option<String>,
    {
        for f in &mut self.faces {
            if f.is_boundary() {
                f.boundary_tag = tag(&f.centroid, &f.normal);
            }
        }
    }

    /// Assigns boundary tags by matching face vertex sets.
    pub fn tag_boundary_faces(&mut self, tagged: &[(Vec<usize>, String)]) -> Result<()> {
        let index: HashMap<Vec<usize>, usize> = self
            .faces
            .iter()
            .enumerate()
            .map(|(i, f)| (face_key(&f.vertices), i))
            .collect();
        for (fv, tag) in tagged {
            let i = *index
                .get(&face_key(fv))
                .ok_or_else(|| Error::InvalidInput(format!("tagged face {fv:?} not in mesh")))?;
            if !self.faces[i].is_boundary() {
                return Err(Error::InvalidInput(format!("tagged face {fv:?} is interior")));
            }
            self.faces[i].boundary_tag = Some(tag.clone());
        }
        Ok(())
    }

    /// Marks the faces lying on the given planar polygons as fracture faces and
    /// splits them into components.
    pub fn tag_fracture(mut self, planes: &[FracturePlane]) -> Result<Self> {
        let dim = self.dim;
        let mut face_plane: Vec<Option<usize>> = vec![None; self.faces.len()];
        for (p, plane) in planes.iter().enumerate() {
            let pts = plane.points();
            if (dim == 2 && pts.len() != 2) || (dim == 3 && pts.len() < 3) {
                return Err(Error::NonConformingFracture {
                    plane: p,
                    detail: "wrong number of polygon vertices".into(),
                });
            }
            let n = plane.reference_normal(dim);
            let target = plane.measure(dim);
            let mut covered = 0.0;
            for (i, f) in self.faces.iter().enumerate() {
                let tol = 1e-9 * f.diameter;
                if f.vertices.iter().any(|&s| (self.vertices[s] - pts[0]).dot(&n).abs() > tol) {
                    continue;
                }
                if !point_in_plane_polygon(dim, &pts, &f.centroid, -1e-9 * f.diameter) {
                    continue;
                }
                if !f
                    .vertices
                    .iter()
                    .all(|&s| point_in_plane_polygon(dim, &pts, &self.vertices[s], 1e-9 * f.diameter))
                {
                    return Err(Error::NonConformingFracture {
                        plane: p,
                        detail: format!("face {i} straddles the polygon boundary"),
                    });
                }
                if f.is_boundary() {
                    return Err(Error::NonConformingFracture {
                        plane: p,
                        detail: format!("face {i} lies on the domain boundary"),
                    });
                }
                if face_plane[i].is_none() {
                    face_plane[i] = Some(p);
                    covered += f.area;
                }
            }
            if (covered - target).abs() > 1e-8 * target {
                return Err(Error::NonConformingFracture {
                    plane: p,
                    detail: format!("faces cover {covered} of {target}"),
                });
            }
        }

        let tagged: Vec<usize> = (0..self.faces.len()).filter(|&i| face_plane[i].is_some()).collect();
        // Coplanar adjacent fracture faces form one component.
        let mut uf = UnionFind::new(tagged.len());
        let mut by_vertex: HashMap<usize, Vec<usize>> = HashMap::new();
        for (t, &i) in tagged.iter().enumerate() {
            for &s in &self.faces[i].vertices {
                by_vertex.entry(s).or_default().push(t);
            }
        }
        let normals: Vec<Vec3> = tagged
            .iter()
            .map(|&i| planes[face_plane[i].unwrap()].reference_normal(dim))
            .collect();
        for list in by_vertex.values() {
            for a in 0..list.len() {
                for b in a + 1..list.len() {
                    let (ta, tb) = (list[a], list[b]);
                    let (fa, fb) = (&self.faces[tagged[ta]], &self.faces[tagged[tb]]);
                    let shared = fa.vertices.iter().filter(|s| fb.vertices.contains(s)).count();
                    let adjacent = if dim == 2 { shared >= 1 } else { shared >= 2 };
                    let na = normals[ta];
                    let coplanar = na.dot(&normals[tb]).abs() > 1.0 - 1e-10
                        && fa.vertices.iter().chain(&fb.vertices).all(|&s| {
                            (self.vertices[s] - fa.centroid).dot(&na).abs() <= 1e-9 * fa.diameter
                        });
                    if adjacent && coplanar {
                        uf.union(ta, tb);
                    }
                }
            }
        }
        let mut comp_of_root: BTreeMap<usize, usize> = BTreeMap::new();
        let mut components: Vec<FractureComponent> = Vec::new();
        let mut fracture_faces = Vec::with_capacity(tagged.len());
        for (t, &i) in tagged.iter().enumerate() {
            let root = uf.find(t);
            let c = *comp_of_root.entry(root).or_insert_with(|| {
                components.push(FractureComponent {
                    normal: normals[t],
                    faces: Vec::new(),
                });
                components.len() - 1
            });
            let nplus = components[c].normal;
            let f = &self.faces[i];
            let (c0, c1) = (f.cells[0], f.cells[1]);
            let lf = self.cells[c0].faces.iter().position(|&x| x == i).unwrap();
            let out0 = self.cells[c0].outward_normal(lf, f);
            let (plus, minus) = if out0.dot(&nplus) > 0.0 { (c0, c1) } else { (c1, c0) };
            components[c].faces.push(fracture_faces.len());
            fracture_faces.push(FractureFace {
                face: i,
                plus,
                minus,
                component: c,
            });
        }
        self.face_fracture = vec![None; self.faces.len()];
        for (j, ff) in fracture_faces.iter().enumerate() {
            self.face_fracture[ff.face] = Some(j);
        }
        self.fracture_faces = fracture_faces;
        self.fracture_components = components;
        self.fracture_planes = planes.to_vec();
        Ok(self)
    }

    pub fn fracture_index(&self, face: usize) -> Option<usize> {
        self.face_fracture[face]
    }

    pub fn fracture_normal(&self, j: usize) -> Vec3 {
        self.fracture_components[self.fracture_faces[j].component].normal
    }

    pub fn vertex_cells(&self, s: usize) -> &[usize] {
        &self.vertex_cells[s]
    }

    /// Partition of `M_s` into the connected pieces obtained by crossing only
    /// non-fracture faces that contain `s`.
    pub fn vertex_side_classes(&self, s: usize) -> Vec<SideClass> {
        let cells = &self.vertex_cells[s];
        let pos = |k: usize| cells.binary_search(&k).ok();
        let mut uf = UnionFind::new(cells.len());
        let mut plus_cells = Vec::new();
        let mut minus_cells = Vec::new();
        for (a, &k) in cells.iter().enumerate() {
            for &fi in &self.cells[k].faces {
                let f = &self.faces[fi];
                if !f.vertices.contains(&s) {
                    continue;
                }
                if let Some(j) = self.face_fracture[fi] {
                    plus_cells.push(self.fracture_faces[j].plus);
                    minus_cells.push(self.fracture_faces[j].minus);
                    continue;
                }
                if f.cells.len() == 2 {
                    let other = if f.cells[0] == k { f.cells[1] } else { f.cells[0] };
                    if let Some(b) = pos(other) {
                        uf.union(a, b);
                    }
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (a, &k) in cells.iter().enumerate() {
            groups.entry(uf.find(a)).or_default().push(k);
        }
        let mut classes: Vec<SideClass> = groups
            .into_values()
            .map(|members| {
                let has_plus = members.iter().any(|k| plus_cells.contains(k));
                let has_minus = members.iter().any(|k| minus_cells.contains(k));
                let label = match (has_plus, has_minus) {
                    (true, true) => SideLabel::Mixed,
                    (true, false) => SideLabel::Plus,
                    (false, true) => SideLabel::Minus,
                    (false, false) => SideLabel::Off,
                };
                SideClass {
                    vertex: s,
                    representative: members[0],
                    cells: members,
                    label,
                }
            })
            .collect();
        classes.sort_by_key(|c| c.representative);
        classes
    }

    pub fn h_max(&self) -> f64 {
        self.cells.iter().map(|c| c.diameter).fold(0.0, f64::max)
    }

    /// Largest fracture face diameter.
    pub fn h_fracture(&self) -> f64 {
        self.fracture_faces
            .iter()
            .map(|ff| self.faces[ff.face].diameter)
            .fold(0.0, f64::max)
    }

    pub fn regularity(&self) -> RegularityMetrics {
        let mut m = RegularityMetrics {
            max_cell_ratio: 0.0,
            max_face_ratio: 0.0,
            h_max: 0.0,
            h_min: f64::INFINITY,
        };
        for c in &self.cells {
            m.max_cell_ratio = m.max_cell_ratio.max(c.diameter / c.inradius);
            m.h_max = m.h_max.max(c.diameter);
            m.h_min = m.h_min.min(c.diameter);
            for &f in &c.faces {
                m.max_face_ratio = m.max_face_ratio.max(c.diameter / self.faces[f].diameter);
            }
        }
        m
    }

    /// `Σ_σ |σ| n_Kσ` for cell `k`; vanishes for closed cells.
    pub fn closure_defect(&self, k: usize) -> Vec3 {
        let c = &self.cells[k];
        c.faces
            .iter()
            .zip(&c.orientation)
            .map(|(&f, &o)| self.faces[f].vector_area * o)
            .sum()
    }

    /// Fails with `InvertedCell` if some simplex of a cell's fan decomposition
    /// from its centroid is not positively oriented.
    pub fn check_star_shaped(&self) -> Result<()> {
        for (k, c) in self.cells.iter().enumerate() {
            let tol = 1e-12 * c.diameter.powi(self.dim as i32);
            for (&fi, &o) in c.faces.iter().zip(&c.orientation) {
                let f = &self.faces[fi];
                if self.dim == 2 {
                    let a = self.vertices[f.vertices[0]];
                    if o * (a - c.centroid).dot(&f.normal) <= tol {
                        return Err(Error::InvertedCell(k));
                    }
                } else {
                    for t in &f.fan {
                        let a = self.vertices[f.vertices[t.edge[0]]];
                        let b = self.vertices[f.vertices[t.edge[1]]];
                        if o * geometry::tet_signed_volume(&c.centroid, &f.center, &a, &b) <= tol {
                            return Err(Error::InvertedCell(k));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Simplices (as vertex coordinates) of the fan decomposition of cell `k`
    /// from its centroid, with their measures.
    pub fn cell_simplices(&self, k: usize) -> Vec<(Vec<Point>, f64)> {
        let c = &self.cells[k];
        let xk = c.centroid;
        let mut out = Vec::new();
        for &fi in &c.faces {
            let f = &self.faces[fi];
            if self.dim == 2 {
                let v = vec![xk, self.vertices[f.vertices[0]], self.vertices[f.vertices[1]]];
                let m = geometry::simplex_measure(&v);
                out.push((v, m));
            } else {
                for t in &f.fan {
                    let v = vec![
                        xk,
                        f.center,
                        self.vertices[f.vertices[t.edge[0]]],
                        self.vertices[f.vertices[t.edge[1]]],
                    ];
                    let m = geometry::simplex_measure(&v);
                    out.push((v, m));
                }
            }
        }
        out
    }

    /// Simplices of the fan triangulation of face `f` (a segment in 2D).
    pub fn face_simplices(&self, fi: usize) -> Vec<(Vec<Point>, f64)> {
        let f = &self.faces[fi];
        if self.dim == 2 {
            let v = vec![self.vertices[f.vertices[0]], self.vertices[f.vertices[1]]];
            return vec![(v, f.area)];
        }
        f.fan
            .iter()
            .map(|t| {
                (
                    vec![
                        f.center,
                        self.vertices[f.vertices[t.edge[0]]],
                        self.vertices[f.vertices[t.edge[1]]],
                    ],
                    t.area,
                )
            })
            .collect()
    }

    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut b = vec![false; self.vertices.len()];
        for f in &self.faces {
            if f.is_boundary() {
                for &s in &f.vertices {
                    b[s] = true;
                }
            }
        }
        b
    }

    /// Local face index of face `fi` in cell `k`.
    pub fn local_face(&self, k: usize, fi: usize) -> Option<usize> {
        self.cells[k].faces.iter().position(|&x| x == fi)
    }
}

fn face_geometry(dim: usize, coords: &[Point], vertices: Vec<usize>, cells: Vec<usize>) -> Face {
    let pts: Vec<Point> = vertices.iter().map(|&s| coords[s]).collect();
    let center = geometry::mean_point(&pts);
    let diameter = geometry::diameter(&pts);
    if dim == 2 {
        let d = pts[1] - pts[0];
        let area = d.norm();
        let t = d / area;
        let normal = Vec3::new(t.y, -t.x, 0.0);
        return Face {
            vertices,
            area,
            centroid: center,
            normal,
            vector_area: normal * area,
            diameter,
            planar: true,
            center,
            edge_lengths: Vec::new(),
            edge_normals: Vec::new(),
            fan: Vec::new(),
            tangent: t,
            cells,
            boundary_tag: None,
        };
    }
    let n = pts.len();
    let mut fan = Vec::with_capacity(n);
    let mut vector_area = Vec3::zeros();
    let mut area = 0.0;
    let mut centroid = Point::zeros();
    for i in 0..n {
        let j = (i + 1) % n;
        let va = geometry::triangle_vector_area(&center, &pts[i], &pts[j]);
        let a = va.norm();
        let c = (center + pts[i] + pts[j]) / 3.0;
        vector_area += va;
        area += a;
        centroid += c * a;
        fan.push(FanTriangle {
            edge: [i, j],
            area: a,
            normal: if a > 0.0 { va / a } else { Vec3::zeros() },
            centroid: c,
        });
    }
    centroid /= area;
    let normal = vector_area.normalize();
    let planar = pts
        .iter()
        .all(|p| (p - centroid).dot(&normal).abs() <= PLANARITY_TOL * diameter);
    let mut edge_lengths = Vec::with_capacity(n);
    let mut edge_normals = Vec::with_capacity(n);
    for i in 0..n {
        let e = pts[(i + 1) % n] - pts[i];
        edge_lengths.push(e.norm());
        edge_normals.push(e.cross(&normal).normalize());
    }
    if planar {
        // Exact planar area; the fan sum differs only for non-star faces.
        area = vector_area.norm();
    }
    Face {
        vertices,
        area,
        centroid,
        normal,
        vector_area,
        diameter,
        planar,
        center,
        edge_lengths,
        edge_normals,
        fan,
        tangent: Vec3::zeros(),
        cells,
        boundary_tag: None,
    }
}

fn cell_geometry(dim: usize, k: usize, coords: &[Point], faces: &[Face], cf: Vec<usize>) -> Result<Cell> {
    let mut vertices: Vec<usize> = cf.iter().flat_map(|&f| faces[f].vertices.iter().copied()).collect();
    vertices.sort_unstable();
    vertices.dedup();
    let pts: Vec<Point> = vertices.iter().map(|&s| coords[s]).collect();
    let c = geometry::mean_point(&pts);
    let diameter = geometry::diameter(&pts);
    let mut orientation = Vec::with_capacity(cf.len());
    let mut volume = 0.0;
    let mut moment = Point::zeros();
    for &fi in &cf {
        let f = &faces[fi];
        let s = (f.centroid - c).dot(&f.vector_area);
        if s.abs() <= 1e-14 * diameter.powi(dim as i32) {
            return Err(Error::DegenerateGeometry {
                what: "cell",
                index: k,
                detail: format!("face {fi} passes through the cell center"),
            });
        }
        let o = s.signum();
        orientation.push(o);
        if dim == 2 {
            let (a, b) = (coords[f.vertices[0]], coords[f.vertices[1]]);
            let v = 0.5 * o * (a - c).dot(&f.normal) * f.area;
            volume += v;
            moment += (c + a + b) / 3.0 * v;
        } else {
            for t in &f.fan {
                let (a, b) = (coords[f.vertices[t.edge[0]]], coords[f.vertices[t.edge[1]]]);
                let v = o * geometry::tet_signed_volume(&c, &f.center, &a, &b);
                volume += v;
                moment += (c + f.center + a + b) / 4.0 * v;
            }
        }
    }
    if volume <= 0.0 || !volume.is_finite() {
        return Err(Error::DegenerateGeometry {
            what: "cell",
            index: k,
            detail: format!("volume {volume}"),
        });
    }
    let centroid = moment / volume;
    let inradius = cf
        .iter()
        .zip(&orientation)
        .map(|(&fi, &o)| ((faces[fi].centroid - centroid).dot(&faces[fi].normal) * o).abs())
        .fold(f64::INFINITY, f64::min);
    Ok(Cell {
        faces: cf,
        orientation,
        vertices,
        volume,
        centroid,
        diameter,
        inradius,
    })
}

/// Whether `x` (already known to lie in the polygon plane) is inside the polygon,
/// allowing a signed margin (`margin < 0` demands strict interiority).
fn point_in_plane_polygon(dim: usize, poly: &[Point], x: &Point, margin: f64) -> bool {
    if dim == 2 {
        let d = poly[1] - poly[0];
        let len = d.norm();
        let s = (x - poly[0]).dot(&d) / len;
        return s >= -margin && s <= len + margin;
    }
    // Signed distance to each edge for convex polygons, winding number otherwise.
    let n = &geometry::newell_normal(poly).normalize();
    let m = poly.len();
    let centroid = geometry::mean_point(poly);
    let convex = (0..m).all(|i| {
        let e = poly[(i + 1) % m] - poly[i];
        let out = e.cross(n);
        (centroid - poly[i]).dot(&out) < 0.0
    });
    if convex {
        (0..m).all(|i| {
            let e = poly[(i + 1) % m] - poly[i];
            let out = e.cross(n).normalize();
            (x - poly[i]).dot(&out) <= margin
        })
    } else {
        // Winding number in the plane; margin ignored.
        let mut angle = 0.0;
        for i in 0..m {
            let a = poly[i] - x;
            let b = poly[(i + 1) % m] - x;
            angle += a.cross(&b).dot(n).atan2(a.dot(&b));
        }
        angle.abs() > std::f64::consts::PI
    }
}

#[derive(Debug, Clone)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller index stays root.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::generate::{cartesian_3d, rectangle_2d};
    use super::*;

    fn unit_cube() -> PolytopalMesh {
        cartesian_3d([1, 1, 1], Point::zeros(), Point::new(1.0, 1.0, 1.0))
    }

    #[test]
    fn unit_cube_geometry() {
        let m = unit_cube();
        assert_eq!(m.cells.len(), 1);
        let c = &m.cells[0];
        assert!((c.volume - 1.0).abs() < 1e-14);
        assert!((c.diameter - 3f64.sqrt()).abs() < 1e-14);
        assert!(m.closure_defect(0).norm() < 1e-12);
        assert!((c.centroid - Point::new(0.5, 0.5, 0.5)).norm() < 1e-14);
        for f in &m.faces {
            assert!(f.planar);
            let s: Vec3 = f
                .edge_lengths
                .iter()
                .zip(&f.edge_normals)
                .map(|(l, n)| n * *l)
                .sum();
            assert!(s.norm() < 1e-12);
        }
    }

    #[test]
    fn unit_square_2d() {
        let m = rectangle_2d([1, 1], Point::zeros(), Point::new(1.0, 1.0, 0.0));
        assert!((m.cells[0].volume - 1.0).abs() < 1e-14);
        assert_eq!(m.faces.len(), 4);
        assert!(m.faces.iter().all(|f| (f.area - 1.0).abs() < 1e-14));
        assert!(m.closure_defect(0).norm() < 1e-14);
    }

    #[test]
    fn two_cell_grid_has_one_interior_face() {
        let m = cartesian_3d([2, 1, 1], Point::zeros(), Point::new(2.0, 1.0, 1.0));
        assert_eq!(m.faces.iter().filter(|f| !f.is_boundary()).count(), 1);
        assert!(m.cells.iter().all(|c| (c.volume - 1.0).abs() < 1e-14));
    }

    #[test]
    fn non_manifold_face_is_rejected() {
        let v = vec![
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 0.0, 0.0),
            Point::new(0.0, 1.0, 0.0),
            Point::new(-1.0, 0.0, 0.0),
            Point::new(0.5, -1.0, 0.0),
        ];
        let cells = vec![
            vec![vec![0, 1], vec![1, 2], vec![2, 0]],
            vec![vec![0, 2], vec![2, 3], vec![3, 0]],
            vec![vec![0, 2], vec![2, 4], vec![4, 0]],
        ];
        assert!(matches!(
            PolytopalMesh::build(2, v, &cells),
            Err(Error::NonManifoldFace { count: 3, .. })
        ));
    }

    #[test]
    fn degenerate_cell_is_rejected() {
        let v = vec![
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 0.0, 0.0),
            Point::new(2.0, 0.0, 0.0),
        ];
        let cells = vec![vec![vec![0, 1], vec![1, 2], vec![2, 0]]];
        assert!(PolytopalMesh::build(2, v, &cells).is_err());
    }

    #[test]
    fn fracture_tagging_on_two_cell_grid() {
        let m = cartesian_3d([2, 1, 1], Point::zeros(), Point::new(2.0, 1.0, 1.0));
        let plane = FracturePlane::polygon(
            &[
                Point::new(1.0, 0.0, 0.0),
                Point::new(1.0, 1.0, 0.0),
                Point::new(1.0, 1.0, 1.0),
                Point::new(1.0, 0.0, 1.0),
            ],
            Some(Vec3::new(1.0, 0.0, 0.0)),
        );
        let m = m.tag_fracture(&[plane]).unwrap();
        assert_eq!(m.fracture_faces.len(), 1);
        let ff = m.fracture_faces[0];
        // Cell 0 spans x in (0,1): its outward normal on x=1 is +x.
        assert_eq!(ff.plus, 0);
        assert_eq!(ff.minus, 1);
        let f = &m.faces[ff.face];
        let lf = m.local_face(ff.plus, ff.face).unwrap();
        let n = m.cells[ff.plus].outward_normal(lf, f);
        assert!((n.dot(&m.fracture_normal(0)) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn non_conforming_fracture_is_rejected() {
        let m = cartesian_3d([2, 1, 1], Point::zeros(), Point::new(2.0, 1.0, 1.0));
        let plane = FracturePlane::polygon(
            &[
                Point::new(0.5, 0.0, 0.0),
                Point::new(0.5, 1.0, 0.0),
                Point::new(0.5, 1.0, 1.0),
                Point::new(0.5, 0.0, 1.0),
            ],
            None,
        );
        assert!(matches!(
            m.tag_fracture(&[plane]),
            Err(Error::NonConformingFracture { .. })
        ));
    }

    #[test]
    fn cross_network_has_two_components() {
        let m = rectangle_2d([4, 4], Point::new(-2.0, -2.0, 0.0), Point::new(2.0, 2.0, 0.0));
        let planes = [
            FracturePlane::segment(Point::new(-1.0, 0.0, 0.0), Point::new(1.0, 0.0, 0.0), None),
            FracturePlane::segment(Point::new(0.0, -1.0, 0.0), Point::new(0.0, 1.0, 0.0), None),
        ];
        let m = m.tag_fracture(&planes).unwrap();
        assert_eq!(m.fracture_faces.len(), 4);
        assert_eq!(m.fracture_components.len(), 2);
        // The crossing vertex is surrounded by four fracture faces.
        let center = m
            .vertices
            .iter()
            .position(|p| p.norm() < 1e-12)
            .unwrap();
        assert_eq!(m.vertex_side_classes(center).len(), 4);
    }

    #[test]
    fn immersed_tip_has_single_class() {
        let m = rectangle_2d([4, 4], Point::new(-2.0, -2.0, 0.0), Point::new(2.0, 2.0, 0.0));
        let m = m
            .tag_fracture(&[FracturePlane::segment(
                Point::new(-1.0, 0.0, 0.0),
                Point::new(1.0, 0.0, 0.0),
                None,
            )])
            .unwrap();
        let find = |x: f64, y: f64| {
            m.vertices
                .iter()
                .position(|p| (p - Point::new(x, y, 0.0)).norm() < 1e-12)
                .unwrap()
        };
        let tip = m.vertex_side_classes(find(1.0, 0.0));
        assert_eq!(tip.len(), 1);
        assert_eq!(tip[0].label, SideLabel::Mixed);
        let mid = m.vertex_side_classes(find(0.0, 0.0));
        assert_eq!(mid.len(), 2);
        let labels: Vec<_> = mid.iter().map(|c| c.label).collect();
        assert!(labels.contains(&SideLabel::Plus) && labels.contains(&SideLabel::Minus));
        let off = m.vertex_side_classes(find(-2.0, 1.0));
        assert_eq!(off.len(), 1);
        assert_eq!(off[0].cells, m.vertex_cells(find(-2.0, 1.0)));
        assert_eq!(off[0].label, SideLabel::Off);
    }
}
