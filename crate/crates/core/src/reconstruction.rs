//! Face and cell reconstruction operators, stabilisation and discrete norms.
//!
//! Every cell operator is linear in the local unknowns, so it is stored as one
//! "shape" quantity per local slot: nodal slots first (in the order of the
//! cell's sorted vertex list) followed by the bubbles owned by the cell.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dofs::{DirichletSpec, DisplacementVector, Dof, DofMap};
use crate::error::{Error, Result};
use crate::geometry::{Mat3, Point, Vec3};
use crate::mesh::PolytopalMesh;

/// How the barycentric weights of face and cell centroids are chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightRule {
    /// Nonnegative weights of minimal Euclidean norm.
    #[default]
    LeastNorm,
}

/// Nonnegative weights `ω` with `Σω = 1`, `Σ ω_i p_i = target` and minimal
/// `Σω²`. Returns `None` if the target is outside the convex hull.
pub fn barycentric_weights(points: &[Point], target: &Point) -> Option<Vec<f64>> {
    let n = points.len();
    let h = crate::geometry::diameter(points).max(f64::MIN_POSITIVE);
    // Work in the principal axes of the point cloud so that the constraint
    // matrix has full row rank.
    let mean = crate::geometry::mean_point(points);
    let mut cov = nalgebra::Matrix3::zeros();
    for p in points {
        let d = (p - mean) / h;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let lmax = eig.eigenvalues.max();
    let axes: Vec<Vec3> = (0..3)
        .filter(|&i| eig.eigenvalues[i] > 1e-12 * lmax && lmax > 0.0)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    let m = axes.len() + 1;
    let mut a = DMatrix::zeros(m, n);
    let mut b = DVector::zeros(m);
    b[0] = 1.0;
    for (i, p) in points.iter().enumerate() {
        a[(0, i)] = 1.0;
        for (r, ax) in axes.iter().enumerate() {
            a[(r + 1, i)] = ((p - target) / h).dot(ax);
        }
    }
    // Off-plane offset of the target is not representable.
    let off = (target - mean) / h - axes.iter().map(|ax| ax * ((target - mean) / h).dot(ax)).sum::<Vec3>();
    if off.norm() > 1e-8 {
        return None;
    }

    // Semismooth Newton on the dual: ω = max(Aᵀy, 0), A ω = b.
    let dual = |y: &DVector<f64>| -> f64 {
        let w = (a.transpose() * y).map(|v| v.max(0.0));
        0.5 * w.norm_squared() - b.dot(y)
    };
    let aat = &a * a.transpose();
    let mut y = aat.clone().cholesky()?.solve(&b);
    for _ in 0..200 {
        let s = a.transpose() * &y;
        let w = s.map(|v| v.max(0.0));
        let r = &a * &w - &b;
        if r.norm() <= 1e-15 {
            break;
        }
        let mut jac = DMatrix::zeros(m, m);
        for i in 0..n {
            if s[i] > 0.0 {
                let col = a.column(i);
                jac += col * col.transpose();
            }
        }
        let reg = 1e-14 * aat.trace();
        for i in 0..m {
            jac[(i, i)] += reg;
        }
        let dy = jac.lu().solve(&(-&r))?;
        let f0 = dual(&y);
        let slope = -r.dot(&dy).abs();
        let mut t = 1.0;
        loop {
            let trial = &y + &dy * t;
            if dual(&trial) <= f0 + 1e-4 * t * slope || t < 1e-12 {
                y = trial;
                break;
            }
            t *= 0.5;
        }
    }
    let s = a.transpose() * &y;
    let mut w: Vec<f64> = s.iter().map(|v| v.max(0.0)).collect();
    // Polish on the final support with an exact minimum-norm solve.
    let support: Vec<usize> = (0..n).filter(|&i| w[i] > 0.0).collect();
    let asub = DMatrix::from_fn(m, support.len(), |r, c| a[(r, support[c])]);
    if let Some(ch) = (&asub * asub.transpose()).cholesky() {
        let ws = asub.transpose() * ch.solve(&b);
        if ws.iter().all(|&v| v >= 0.0) {
            w = vec![0.0; n];
            for (c, &i) in support.iter().enumerate() {
                w[i] = ws[c];
            }
        }
    }
    let res = &a * DVector::from_vec(w.clone()) - &b;
    if res.norm() > 1e-11 || w.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(w)
}

/// Per-face data: barycentric weights and tangential gradient vectors so that
/// `∇^{Kσ} v = Σ_s v_{Ks} ⊗ grad[s]` and `v̄_{Kσ} = Σ_s weights[s] v_{Ks}`.
#[derive(Debug, Clone)]
pub struct FaceOperators {
    pub weights: Vec<f64>,
    pub grad: Vec<Vec3>,
}

/// Per-cell shape data.
#[derive(Debug, Clone)]
pub struct CellOperators {
    /// Fracture faces whose bubble lives in this cell.
    pub bubbles: Vec<usize>,
    /// `G_a` with `∇^K v = Σ_a v_a ⊗ G_a`.
    pub grad: Vec<Vec3>,
    /// Cell weights `ω^K_s` for the nodal slots (zero for bubbles).
    pub mean: Vec<f64>,
    /// `h_K^{d-2}`.
    pub stab_scale: f64,
    /// Local scalar stabilisation matrix (already scaled by `stab_scale`).
    pub stab: DMatrix<f64>,
}

impl CellOperators {
    pub fn n_local(&self) -> usize {
        self.grad.len()
    }
}

/// Precomputed operators for every face and cell.
#[derive(Debug, Clone)]
pub struct CellOperatorCache {
    pub rule: WeightRule,
    pub faces: Vec<FaceOperators>,
    pub cells: Vec<CellOperators>,
}

fn face_operators(mesh: &PolytopalMesh, fi: usize) -> Result<FaceOperators> {
    let f = &mesh.faces[fi];
    let pts: Vec<Point> = f.vertices.iter().map(|&s| mesh.vertices[s]).collect();
    let weights = if mesh.dim == 2 {
        vec![0.5, 0.5]
    } else {
        barycentric_weights(&pts, &f.centroid).ok_or(Error::WeightSolve {
            what: "face",
            index: fi,
        })?
    };
    let grad = if mesh.dim == 2 {
        vec![-f.tangent / f.area, f.tangent / f.area]
    } else {
        let n = f.vertices.len();
        let mut g = vec![Vec3::zeros(); n];
        for e in 0..n {
            let c = f.edge_normals[e] * (0.5 * f.edge_lengths[e] / f.area);
            g[e] += c;
            g[(e + 1) % n] += c;
        }
        g
    };
    Ok(FaceOperators { weights, grad })
}

fn cell_operators(mesh: &PolytopalMesh, dofs: &DofMap, faces: &[FaceOperators], k: usize) -> Result<CellOperators> {
    let c = &mesh.cells[k];
    let nv = c.vertices.len();
    let bubbles = dofs.cell_bubbles(k).to_vec();
    let nloc = nv + bubbles.len();
    let mut grad = vec![Vec3::zeros(); nloc];
    for (lf, &fi) in c.faces.iter().enumerate() {
        let f = &mesh.faces[fi];
        let o = c.orientation[lf];
        let local: Vec<usize> = f.vertices.iter().map(|&s| c.local_vertex(s).unwrap()).collect();
        if f.planar {
            let nk = f.normal * (o * f.area);
            for (i, &a) in local.iter().enumerate() {
                grad[a] += nk * faces[fi].weights[i];
            }
        } else {
            // Fan around the isobarycenter, whose value is the vertex average.
            let m = f.vertices.len() as f64;
            for t in &f.fan {
                let c3 = t.normal * (o * t.area / 3.0);
                grad[local[t.edge[0]]] += c3;
                grad[local[t.edge[1]]] += c3;
                for &a in &local {
                    grad[a] += c3 / m;
                }
            }
        }
    }
    for (b, &j) in bubbles.iter().enumerate() {
        let ff = mesh.fracture_faces[j];
        let f = &mesh.faces[ff.face];
        let lf = mesh.local_face(k, ff.face).unwrap();
        grad[nv + b] = c.outward_normal(lf, f) * f.area;
    }
    for g in &mut grad {
        *g /= c.volume;
    }
    let pts: Vec<Point> = c.vertices.iter().map(|&s| mesh.vertices[s]).collect();
    let w = barycentric_weights(&pts, &c.centroid).ok_or(Error::WeightSolve {
        what: "cell",
        index: k,
    })?;
    let mut mean = vec![0.0; nloc];
    mean[..nv].copy_from_slice(&w);

    // Nodal residuals v_s - Π^K v(x_s).
    let mut r = DMatrix::zeros(nv, nloc);
    for s in 0..nv {
        let dx = pts[s] - c.centroid;
        for a in 0..nloc {
            r[(s, a)] = if a == s { 1.0 } else { 0.0 } - grad[a].dot(&dx) - mean[a];
        }
    }
    let stab_scale = c.diameter.powi(mesh.dim as i32 - 2);
    let mut stab = r.transpose() * r;
    for b in nv..nloc {
        stab[(b, b)] += 1.0;
    }
    stab *= stab_scale;
    Ok(CellOperators {
        bubbles,
        grad,
        mean,
        stab_scale,
        stab,
    })
}

impl CellOperatorCache {
    pub fn build(mesh: &PolytopalMesh, dofs: &DofMap, rule: WeightRule) -> Result<Self> {
        let faces = (0..mesh.faces.len())
            .into_par_iter()
            .map(|fi| face_operators(mesh, fi))
            .collect::<Result<Vec<_>>>()?;
        let cells = (0..mesh.cells.len())
            .into_par_iter()
            .map(|k| cell_operators(mesh, dofs, &faces, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rule, faces, cells })
    }
}

/// Coefficients of the generic cellwise bilinear form
/// `|K| (c_grad ∇u:∇v + c_trans ∇u:∇vᵀ + c_div div u div v) + c_stab S_K(u, v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormCoefficients {
    pub grad: f64,
    pub trans: f64,
    pub div: f64,
    pub stab: f64,
}

impl FormCoefficients {
    /// Elastic energy with scaled stabilisation.
    pub fn stiffness(mu: f64, lambda: f64) -> Self {
        Self {
            grad: mu,
            trans: mu,
            div: lambda,
            stab: 2.0 * mu + lambda,
        }
    }

    /// Gram matrix of `‖·‖_{1,D}`.
    pub fn h1() -> Self {
        Self {
            grad: 1.0,
            trans: 0.0,
            div: 0.0,
            stab: 1.0,
        }
    }

    /// `ε_D` Gram plus unscaled stabilisation.
    pub fn korn() -> Self {
        Self {
            grad: 0.5,
            trans: 0.5,
            div: 0.0,
            stab: 1.0,
        }
    }
}

/// Mesh, unknowns and operators bundled together.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: PolytopalMesh,
    pub dofs: DofMap,
    pub ops: CellOperatorCache,
}

impl Discretization {
    pub fn new(mesh: PolytopalMesh, dirichlet: &DirichletSpec) -> Result<Self> {
        Self::with_rule(mesh, dirichlet, WeightRule::default())
    }

    pub fn with_rule(mesh: PolytopalMesh, dirichlet: &DirichletSpec, rule: WeightRule) -> Result<Self> {
        let dofs = DofMap::build(&mesh, dirichlet)?;
        let ops = CellOperatorCache::build(&mesh, &dofs, rule)?;
        Ok(Self { mesh, dofs, ops })
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim
    }

    /// Global slot of local scalar shape `a`, component `c`, in cell `k`.
    pub fn local_dof(&self, k: usize, a: usize, c: usize) -> Dof {
        let nv = self.mesh.cells[k].vertices.len();
        if a < nv {
            self.dofs.blocks[self.dofs.block(k, a)].slots[c]
        } else {
            Dof::Free(self.dofs.bubbles[self.ops.cells[k].bubbles[a - nv]][c])
        }
    }

    pub fn local_values(&self, k: usize, v: &DisplacementVector) -> Vec<Vec3> {
        let nloc = self.ops.cells[k].n_local();
        (0..nloc)
            .map(|a| {
                let mut x = Vec3::zeros();
                for c in 0..self.dim() {
                    x[c] = v.get(self.local_dof(k, a, c));
                }
                x
            })
            .collect()
    }

    pub fn cell_gradient(&self, k: usize, v: &DisplacementVector) -> Mat3 {
        self.local_values(k, v)
            .iter()
            .zip(&self.ops.cells[k].grad)
            .map(|(va, ga)| va * ga.transpose())
            .sum()
    }

    pub fn cell_mean(&self, k: usize, v: &DisplacementVector) -> Vec3 {
        self.local_values(k, v)
            .iter()
            .zip(&self.ops.cells[k].mean)
            .map(|(va, w)| va * *w)
            .sum()
    }

    /// `Π^K v(x)`
    pub fn cell_reconstruction(&self, k: usize, v: &DisplacementVector, x: &Point) -> Vec3 {
        self.cell_gradient(k, v) * (x - self.mesh.cells[k].centroid) + self.cell_mean(k, v)
    }

    pub fn stabilisation(&self, k: usize, u: &DisplacementVector, v: &DisplacementVector) -> f64 {
        let (lu, lv) = (self.local_values(k, u), self.local_values(k, v));
        let s = &self.ops.cells[k].stab;
        let mut acc = 0.0;
        for a in 0..lu.len() {
            for b in 0..lv.len() {
                acc += s[(a, b)] * lu[a].dot(&lv[b]);
            }
        }
        acc
    }

    fn face_nodal_values(&self, k: usize, fi: usize, v: &DisplacementVector) -> Vec<Vec3> {
        let c = &self.mesh.cells[k];
        self.mesh.faces[fi]
            .vertices
            .iter()
            .map(|&s| v.nodal(&self.dofs, self.dofs.block(k, c.local_vertex(s).unwrap())))
            .collect()
    }

    /// `∇^{Kσ} v`
    pub fn face_gradient(&self, k: usize, fi: usize, v: &DisplacementVector) -> Mat3 {
        self.face_nodal_values(k, fi, v)
            .iter()
            .zip(&self.ops.faces[fi].grad)
            .map(|(vs, g)| vs * g.transpose())
            .sum()
    }

    /// `v̄_{Kσ}`
    pub fn face_mean(&self, k: usize, fi: usize, v: &DisplacementVector) -> Vec3 {
        self.face_nodal_values(k, fi, v)
            .iter()
            .zip(&self.ops.faces[fi].weights)
            .map(|(vs, w)| vs * *w)
            .sum()
    }

    /// `Π^{Kσ} v(x)`
    pub fn face_trace(&self, k: usize, fi: usize, v: &DisplacementVector, x: &Point) -> Vec3 {
        self.face_gradient(k, fi, v) * (x - self.mesh.faces[fi].centroid) + self.face_mean(k, fi, v)
    }

    /// `[[v]]_σ` on fracture face `j`.
    pub fn jump(&self, j: usize, v: &DisplacementVector) -> Vec3 {
        let ff = self.mesh.fracture_faces[j];
        self.face_mean(ff.plus, ff.face, v) - self.face_mean(ff.minus, ff.face, v) + v.bubble(&self.dofs, j)
    }

    /// Jump of `v` for every fracture face.
    pub fn jumps(&self, v: &DisplacementVector) -> Vec<Vec3> {
        (0..self.mesh.fracture_faces.len()).map(|j| self.jump(j, v)).collect()
    }

    /// Checked variant addressed by mesh face id.
    pub fn face_jump(&self, face: usize, v: &DisplacementVector) -> Result<Vec3> {
        let j = self.mesh.fracture_index(face).ok_or(Error::NotAFractureFace(face))?;
        Ok(self.jump(j, v))
    }

    /// `‖v‖_{1,D}`
    pub fn norm_1d(&self, v: &DisplacementVector) -> f64 {
        (0..self.mesh.cells.len())
            .into_par_iter()
            .map(|k| {
                let g = self.cell_gradient(k, v);
                self.mesh.cells[k].volume * g.norm_squared() + self.stabilisation(k, v, v)
            })
            .sum::<f64>()
            .sqrt()
    }

    /// `‖μ‖_{½,D}` for a face-wise constant field.
    pub fn half_norm(&self, mu: &[Vec3]) -> f64 {
        self.weighted_face_norm(mu, -1.0)
    }

    /// `‖μ‖_{-½,D}` for a face-wise constant field.
    pub fn minus_half_norm(&self, mu: &[Vec3]) -> f64 {
        self.weighted_face_norm(mu, 1.0)
    }

    fn weighted_face_norm(&self, mu: &[Vec3], power: f64) -> f64 {
        self.mesh
            .fracture_faces
            .iter()
            .zip(mu)
            .map(|(ff, m)| {
                let f = &self.mesh.faces[ff.face];
                f.diameter.powf(power) * f.area * m.norm_squared()
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Local dense matrix of a cellwise form over `(slot, component)` pairs,
    /// ordered `a * dim + c`.
    pub fn local_matrix(&self, k: usize, coef: FormCoefficients) -> DMatrix<f64> {
        let d = self.dim();
        let op = &self.ops.cells[k];
        let vol = self.mesh.cells[k].volume;
        let n = op.n_local();
        let mut m = DMatrix::zeros(n * d, n * d);
        for a in 0..n {
            let ga = op.grad[a];
            for b in 0..n {
                let gb = op.grad[b];
                let gg = ga.dot(&gb);
                for i in 0..d {
                    for j in 0..d {
                        let mut v = vol * (coef.trans * ga[j] * gb[i] + coef.div * ga[i] * gb[j]);
                        if i == j {
                            v += vol * coef.grad * gg + coef.stab * op.stab[(a, b)];
                        }
                        m[(a * d + i, b * d + j)] = v;
                    }
                }
            }
        }
        m
    }
}
