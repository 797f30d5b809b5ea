//! JSON mesh files and ASCII VTU export.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FracturePlane, PolytopalMesh};
use crate::error::{Error, Result};
use crate::geometry::Point;

pub const MESH_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedFace {
    pub tag: String,
    pub face: Vec<usize>,
}

/// On-disk mesh description. `cells[k]` lists the faces of cell `k` as vertex
/// id lists; 2D vertices may have two or three coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshFile {
    pub version: u32,
    pub dim: usize,
    pub vertices: Vec<Vec<f64>>,
    pub cells: Vec<Vec<Vec<usize>>>,
    #[serde(default)]
    pub fracture_planes: Vec<FracturePlane>,
    #[serde(default)]
    pub boundary_tags: Vec<TaggedFace>,
}

impl MeshFile {
    pub fn from_mesh(mesh: &PolytopalMesh) -> Self {
        let vertices = mesh
            .vertices
            .iter()
            .map(|p| p.iter().take(mesh.dim).copied().collect())
            .collect();
        let cells = mesh
            .cells
            .iter()
            .map(|c| c.faces.iter().map(|&f| mesh.faces[f].vertices.clone()).collect())
            .collect();
        let boundary_tags = mesh
            .faces
            .iter()
            .filter_map(|f| {
                f.boundary_tag.as_ref().map(|t| TaggedFace {
                    tag: t.clone(),
                    face: f.vertices.clone(),
                })
            })
            .collect();
        Self {
            version: MESH_FILE_VERSION,
            dim: mesh.dim,
            vertices,
            cells,
            fracture_planes: mesh.fracture_planes.clone(),
            boundary_tags,
        }
    }

    pub fn into_mesh(self) -> Result<PolytopalMesh> {
        if self.version != MESH_FILE_VERSION {
            return Err(Error::UnsupportedVersion(self.version));
        }
        let mut vertices = Vec::with_capacity(self.vertices.len());
        for (i, v) in self.vertices.iter().enumerate() {
            if v.len() < self.dim || v.len() > 3 {
                return Err(Error::InvalidInput(format!("vertex {i} has {} coordinates", v.len())));
            }
            let mut p = Point::zeros();
            for (a, x) in v.iter().enumerate() {
                p[a] = *x;
            }
            vertices.push(p);
        }
        let mut mesh = PolytopalMesh::build(self.dim, vertices, &self.cells)?;
        let tags: Vec<(Vec<usize>, String)> = self
            .boundary_tags
            .into_iter()
            .map(|t| (t.face, t.tag))
            .collect();
        mesh.tag_boundary_faces(&tags)?;
        if self.fracture_planes.is_empty() {
            Ok(mesh)
        } else {
            mesh.tag_fracture(&self.fracture_planes)
        }
    }
}

pub fn read_mesh(path: &Path) -> Result<PolytopalMesh> {
    let text = std::fs::read_to_string(path)?;
    let file: MeshFile = serde_json::from_str(&text)?;
    file.into_mesh()
}

pub fn write_mesh(mesh: &PolytopalMesh, path: &Path) -> Result<()> {
    let text = serde_json::to_string(&MeshFile::from_mesh(mesh))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// A named data array; `values.len()` is `components` times the number of
/// points or cells it is attached to.
#[derive(Debug, Clone)]
pub struct VtuField {
    pub name: String,
    pub components: usize,
    pub values: Vec<f64>,
}

impl VtuField {
    pub fn new(name: &str, components: usize, values: Vec<f64>) -> Self {
        Self {
            name: name.to_string(),
            components,
            values,
        }
    }
}

/// Vertex ids of cell `k` in the order used for its duplicated VTU points:
/// cyclic around the polygon in 2D, sorted in 3D.
pub fn cell_point_order(mesh: &PolytopalMesh, k: usize) -> Vec<usize> {
    let c = &mesh.cells[k];
    if mesh.dim == 3 {
        return c.vertices.clone();
    }
    // Chain the edges, following the cell's outward orientation.
    let edges: Vec<[usize; 2]> = c
        .faces
        .iter()
        .zip(&c.orientation)
        .map(|(&f, &o)| {
            let v = &mesh.faces[f].vertices;
            if o > 0.0 {
                [v[0], v[1]]
            } else {
                [v[1], v[0]]
            }
        })
        .collect();
    let mut order = vec![edges[0][0]];
    let mut cur = edges[0][1];
    while order.len() < edges.len() {
        order.push(cur);
        cur = edges.iter().find(|e| e[0] == cur).map(|e| e[1]).unwrap_or(cur);
    }
    order
}

fn data_array(out: &mut String, name: &str, components: usize, values: &[f64]) {
    let _ = writeln!(
        out,
        "<DataArray type=\"Float64\" Name=\"{name}\" NumberOfComponents=\"{components}\" format=\"ascii\">"
    );
    for chunk in values.chunks(components.max(1) * 8) {
        let line: Vec<String> = chunk.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    let _ = writeln!(out, "</DataArray>");
}

fn int_array(out: &mut String, name: &str, values: &[usize]) {
    let _ = writeln!(out, "<DataArray type=\"Int64\" Name=\"{name}\" format=\"ascii\">");
    for chunk in values.chunks(16) {
        let line: Vec<String> = chunk.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    let _ = writeln!(out, "</DataArray>");
}

fn points_xml(out: &mut String, pts: &[Point]) {
    let flat: Vec<f64> = pts.iter().flat_map(|p| [p.x, p.y, p.z]).collect();
    out.push_str("<Points>\n");
    data_array(out, "Points", 3, &flat);
    out.push_str("</Points>\n");
}

fn check_field(f: &VtuField, count: usize) -> Result<()> {
    if f.values.len() != f.components * count {
        return Err(Error::InvalidInput(format!(
            "field {} has {} values, expected {}",
            f.name,
            f.values.len(),
            f.components * count
        )));
    }
    Ok(())
}

/// Writes the cells with per-cell duplicated points so that discontinuous
/// fields can be shown. `point_fields` follow [`cell_point_order`] cell by cell.
pub fn write_cells_vtu<W: Write>(
    mesh: &PolytopalMesh,
    mut w: W,
    point_fields: &[VtuField],
    cell_fields: &[VtuField],
) -> Result<()> {
    let orders: Vec<Vec<usize>> = (0..mesh.cells.len()).map(|k| cell_point_order(mesh, k)).collect();
    let npts: usize = orders.iter().map(Vec::len).sum();
    for f in point_fields {
        check_field(f, npts)?;
    }
    for f in cell_fields {
        check_field(f, mesh.cells.len())?;
    }
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\"?>\n<VTKFile type=\"UnstructuredGrid\" version=\"1.0\" byte_order=\"LittleEndian\">\n<UnstructuredGrid>\n");
    let _ = writeln!(out, "<Piece NumberOfPoints=\"{npts}\" NumberOfCells=\"{}\">", mesh.cells.len());
    let pts: Vec<Point> = orders.iter().flatten().map(|&s| mesh.vertices[s]).collect();
    points_xml(&mut out, &pts);

    let mut connectivity = Vec::with_capacity(npts);
    let mut offsets = Vec::with_capacity(mesh.cells.len());
    let mut types = Vec::with_capacity(mesh.cells.len());
    let mut faces = Vec::new();
    let mut face_offsets = Vec::new();
    let mut base = 0;
    for (k, order) in orders.iter().enumerate() {
        connectivity.extend(base..base + order.len());
        offsets.push(connectivity.len());
        if mesh.dim == 2 {
            types.push(7);
        } else {
            types.push(42);
            let c = &mesh.cells[k];
            faces.push(c.faces.len());
            for &f in &c.faces {
                let fv = &mesh.faces[f].vertices;
                faces.push(fv.len());
                for s in fv {
                    faces.push(base + order.binary_search(s).expect("face vertex in cell"));
                }
            }
            face_offsets.push(faces.len());
        }
        base += order.len();
    }
    out.push_str("<Cells>\n");
    int_array(&mut out, "connectivity", &connectivity);
    int_array(&mut out, "offsets", &offsets);
    let _ = writeln!(out, "<DataArray type=\"UInt8\" Name=\"types\" format=\"ascii\">");
    let line: Vec<String> = types.iter().map(|t| t.to_string()).collect();
    let _ = writeln!(out, "{}", line.join(" "));
    out.push_str("</DataArray>\n");
    if mesh.dim == 3 {
        int_array(&mut out, "faces", &faces);
        int_array(&mut out, "faceoffsets", &face_offsets);
    }
    out.push_str("</Cells>\n");
    if !point_fields.is_empty() {
        out.push_str("<PointData>\n");
        for f in point_fields {
            data_array(&mut out, &f.name, f.components, &f.values);
        }
        out.push_str("</PointData>\n");
    }
    if !cell_fields.is_empty() {
        out.push_str("<CellData>\n");
        for f in cell_fields {
            data_array(&mut out, &f.name, f.components, &f.values);
        }
        out.push_str("</CellData>\n");
    }
    out.push_str("</Piece>\n</UnstructuredGrid>\n</VTKFile>\n");
    w.write_all(out.as_bytes())?;
    Ok(())
}

/// Writes the fracture faces as a separate grid (segments in 2D, polygons in
/// 3D) with one value per fracture face in each field.
pub fn write_fracture_vtu<W: Write>(mesh: &PolytopalMesh, mut w: W, face_fields: &[VtuField]) -> Result<()> {
    let nf = mesh.fracture_faces.len();
    for f in face_fields {
        check_field(f, nf)?;
    }
    let mut local = std::collections::BTreeMap::new();
    for ff in &mesh.fracture_faces {
        for &s in &mesh.faces[ff.face].vertices {
            let n = local.len();
            local.entry(s).or_insert(n);
        }
    }
    let mut pts = vec![Point::zeros(); local.len()];
    for (&s, &i) in &local {
        pts[i] = mesh.vertices[s];
    }
    let mut connectivity = Vec::new();
    let mut offsets = Vec::with_capacity(nf);
    for ff in &mesh.fracture_faces {
        connectivity.extend(mesh.faces[ff.face].vertices.iter().map(|s| local[s]));
        offsets.push(connectivity.len());
    }
    let ty = if mesh.dim == 2 { 3 } else { 7 };
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\"?>\n<VTKFile type=\"UnstructuredGrid\" version=\"1.0\" byte_order=\"LittleEndian\">\n<UnstructuredGrid>\n");
    let _ = writeln!(out, "<Piece NumberOfPoints=\"{}\" NumberOfCells=\"{nf}\">", pts.len());
    points_xml(&mut out, &pts);
    out.push_str("<Cells>\n");
    int_array(&mut out, "connectivity", &connectivity);
    int_array(&mut out, "offsets", &offsets);
    let _ = writeln!(out, "<DataArray type=\"UInt8\" Name=\"types\" format=\"ascii\">");
    let line: Vec<String> = (0..nf).map(|_| ty.to_string()).collect();
    let _ = writeln!(out, "{}", line.join(" "));
    out.push_str("</DataArray>\n</Cells>\n");
    if !face_fields.is_empty() {
        out.push_str("<CellData>\n");
        for f in face_fields {
            data_array(&mut out, &f.name, f.components, &f.values);
        }
        out.push_str("</CellData>\n");
    }
    out.push_str("</Piece>\n</UnstructuredGrid>\n</VTKFile>\n");
    w.write_all(out.as_bytes())?;
    Ok(())
}
