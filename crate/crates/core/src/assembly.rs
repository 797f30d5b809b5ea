//! Global saddle-point system: stiffness, jump coupling, loads and Dirichlet
//! elimination.

use rayon::prelude::*;

use crate::dofs::{DisplacementVector, Dof};
use crate::geometry::{Point, SimplexRule, Vec3};
use crate::mesh::PolytopalMesh;
use crate::reconstruction::{Discretization, FormCoefficients};
use crate::sparse::Csr;

/// Cellwise Lamé coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl Material {
    pub fn uniform(mesh: &PolytopalMesh, mu: f64, lambda: f64) -> Self {
        Self {
            mu: vec![mu; mesh.cells.len()],
            lambda: vec![lambda; mesh.cells.len()],
        }
    }
}

pub type BodyForce<'a> = &'a (dyn Fn(&Point) -> Vec3 + Sync);
/// Traction as a function of the position and the outward unit normal.
pub type Traction<'a> = &'a (dyn Fn(&Point, &Vec3) -> Vec3 + Sync);

/// Right-hand side data.
#[derive(Clone, Copy, Default)]
pub struct Loading<'a> {
    pub body: Option<BodyForce<'a>>,
    pub tractions: &'a [(&'a str, Traction<'a>)],
}

/// A matrix over all slots split into its free and prescribed columns.
#[derive(Debug, Clone)]
pub struct SplitMatrix {
    pub free: Csr,
    pub fixed: Csr,
}

#[derive(Default)]
struct SplitTriplets {
    free: Vec<(usize, usize, f64)>,
    fixed: Vec<(usize, usize, f64)>,
}

impl SplitTriplets {
    fn push(&mut self, row: usize, col: Dof, v: f64) {
        match col {
            Dof::Free(j) => self.free.push((row, j, v)),
            Dof::Fixed(j) => self.fixed.push((row, j, v)),
        }
    }

    fn merge(parts: Vec<SplitTriplets>) -> Self {
        let mut out = SplitTriplets::default();
        for p in parts {
            out.free.extend(p.free);
            out.fixed.extend(p.fixed);
        }
        out
    }

    fn finish(self, nrows: usize, n_free: usize, n_fixed: usize) -> SplitMatrix {
        SplitMatrix {
            free: Csr::from_triplets(nrows, n_free, self.free),
            fixed: Csr::from_triplets(nrows, n_fixed, self.fixed),
        }
    }
}

/// Assembles `Σ_K` of a cellwise form over the free rows. The coefficients are
/// given per cell.
pub fn assemble_form<F>(disc: &Discretization, coef: F) -> SplitMatrix
where
    F: Fn(usize) -> FormCoefficients + Sync,
{
    let d = disc.dim();
    let parts: Vec<SplitTriplets> = (0..disc.mesh.cells.len())
        .into_par_iter()
        .map(|k| {
            let loc = disc.local_matrix(k, coef(k));
            let n = disc.ops.cells[k].n_local();
            let slots: Vec<Dof> = (0..n)
                .flat_map(|a| (0..d).map(move |c| (a, c)))
                .map(|(a, c)| disc.local_dof(k, a, c))
                .collect();
            let mut t = SplitTriplets::default();
            for (i, si) in slots.iter().enumerate() {
                let Dof::Free(row) = *si else { continue };
                for (j, &sj) in slots.iter().enumerate() {
                    let v = loc[(i, j)];
                    if v != 0.0 {
                        t.push(row, sj, v);
                    }
                }
            }
            t
        })
        .collect();
    SplitTriplets::merge(parts).finish(disc.dofs.n_free, disc.dofs.n_free, disc.dofs.n_fixed)
}

/// Elastic stiffness with `(2μ_K + λ_K)`-scaled stabilisation.
pub fn assemble_stiffness(disc: &Discretization, mat: &Material) -> SplitMatrix {
    assemble_form(disc, |k| FormCoefficients::stiffness(mat.mu[k], mat.lambda[k]))
}

/// Row `j·d + c` of the result applied to `v` is `|σ_j| [[v]]_{σ_j, c}`.
pub fn assemble_coupling(disc: &Discretization) -> SplitMatrix {
    let d = disc.dim();
    let mesh = &disc.mesh;
    let parts: Vec<SplitTriplets> = mesh
        .fracture_faces
        .par_iter()
        .enumerate()
        .map(|(j, ff)| {
            let f = &mesh.faces[ff.face];
            let w = &disc.ops.faces[ff.face].weights;
            let mut t = SplitTriplets::default();
            for (k, sign) in [(ff.plus, 1.0), (ff.minus, -1.0)] {
                let cell = &mesh.cells[k];
                for (i, &s) in f.vertices.iter().enumerate() {
                    let blk = &disc.dofs.blocks[disc.dofs.block(k, cell.local_vertex(s).unwrap())];
                    for c in 0..d {
                        t.push(j * d + c, blk.slots[c], sign * f.area * w[i]);
                    }
                }
            }
            for c in 0..d {
                t.push(j * d + c, Dof::Free(disc.dofs.bubbles[j][c]), f.area);
            }
            t
        })
        .collect();
    SplitTriplets::merge(parts).finish(d * mesh.fracture_faces.len(), disc.dofs.n_free, disc.dofs.n_fixed)
}

/// `∫_K f` by the degree-2 rule on the centroid fan.
pub fn integrate_cell<F: Fn(&Point) -> Vec3>(mesh: &PolytopalMesh, k: usize, rule: &SimplexRule, f: F) -> Vec3 {
    let mut acc = Vec3::zeros();
    for (verts, m) in mesh.cell_simplices(k) {
        for (x, w) in rule.map(&verts, m) {
            acc += f(&x) * w;
        }
    }
    acc
}

/// Load vector over all slots (free and prescribed rows).
pub fn assemble_load(disc: &Discretization, load: &Loading) -> DisplacementVector {
    let d = disc.dim();
    let mesh = &disc.mesh;
    let mut out = disc.dofs.zeros();
    if let Some(body) = load.body {
        let rule = SimplexRule::degree2(d);
        let ints: Vec<Vec3> = (0..mesh.cells.len())
            .into_par_iter()
            .map(|k| integrate_cell(mesh, k, &rule, body))
            .collect();
        for (k, fk) in ints.iter().enumerate() {
            let op = &disc.ops.cells[k];
            for a in 0..mesh.cells[k].vertices.len() {
                for c in 0..d {
                    let slot = disc.local_dof(k, a, c);
                    out.set(slot, out.get(slot) + op.mean[a] * fk[c]);
                }
            }
        }
    }
    if !load.tractions.is_empty() {
        let rule = SimplexRule::degree2(d - 1);
        for (fi, f) in mesh.faces.iter().enumerate() {
            let Some(tag) = f.boundary_tag.as_deref() else { continue };
            let Some((_, t)) = load.tractions.iter().find(|(name, _)| *name == tag) else {
                continue;
            };
            let k = f.cells[0];
            let lf = mesh.local_face(k, fi).unwrap();
            let n = mesh.cells[k].outward_normal(lf, f);
            let fo = &disc.ops.faces[fi];
            let mut coef = vec![Vec3::zeros(); f.vertices.len()];
            for (verts, m) in mesh.face_simplices(fi) {
                for (x, w) in rule.map(&verts, m) {
                    let tx = t(&x, &n) * w;
                    for (i, ci) in coef.iter_mut().enumerate() {
                        *ci += tx * (fo.weights[i] + fo.grad[i].dot(&(x - f.centroid)));
                    }
                }
            }
            let cell = &mesh.cells[k];
            for (i, &s) in f.vertices.iter().enumerate() {
                let blk = &disc.dofs.blocks[disc.dofs.block(k, cell.local_vertex(s).unwrap())];
                for c in 0..d {
                    out.set(blk.slots[c], out.get(blk.slots[c]) + coef[i][c]);
                }
            }
        }
    }
    out
}

/// Linear part of the discrete contact problem with prescribed values
/// eliminated.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub dim: usize,
    pub a: SplitMatrix,
    pub b: SplitMatrix,
    /// Load over all slots.
    pub load: DisplacementVector,
    /// Prescribed displacement values.
    pub fixed_values: Vec<f64>,
    pub areas: Vec<f64>,
    pub normals: Vec<Vec3>,
    pub g: Vec<f64>,
    pub beta_n: Vec<f64>,
    pub beta_t: Vec<f64>,
    /// Free indices of each fracture face's bubble.
    pub bubbles: Vec<[usize; 3]>,
}

impl SaddleSystem {
    /// Assembles everything; `g` is the friction threshold per fracture face and
    /// `fixed_values` the prescribed slot values.
    pub fn assemble(
        disc: &Discretization,
        mat: &Material,
        load: &Loading,
        fixed_values: Vec<f64>,
        g: Vec<f64>,
    ) -> Self {
        let mesh = &disc.mesh;
        assert_eq!(fixed_values.len(), disc.dofs.n_fixed);
        assert_eq!(g.len(), mesh.fracture_faces.len());
        let beta: Vec<f64> = mesh
            .fracture_faces
            .iter()
            .map(|ff| (2.0 * mat.mu[ff.plus] + mat.lambda[ff.plus]) / mesh.faces[ff.face].diameter)
            .collect();
        Self {
            dim: disc.dim(),
            a: assemble_stiffness(disc, mat),
            b: assemble_coupling(disc),
            load: assemble_load(disc, load),
            fixed_values,
            areas: mesh.fracture_faces.iter().map(|ff| mesh.faces[ff.face].area).collect(),
            normals: (0..mesh.fracture_faces.len()).map(|j| mesh.fracture_normal(j)).collect(),
            g,
            beta_n: beta.clone(),
            beta_t: beta,
            bubbles: disc.dofs.bubbles.clone(),
        }
    }

    pub fn n_free(&self) -> usize {
        self.a.free.nrows
    }

    pub fn n_faces(&self) -> usize {
        self.areas.len()
    }

    pub fn n_multipliers(&self) -> usize {
        self.dim * self.n_faces()
    }

    /// Same β for every face in both directions.
    pub fn set_beta(&mut self, beta: f64) {
        self.beta_n.iter_mut().for_each(|b| *b = beta);
        self.beta_t.iter_mut().for_each(|b| *b = beta);
    }

    /// `f - A_{free,fixed} u_fixed` restricted to free rows.
    pub fn rhs(&self) -> Vec<f64> {
        let mut r = self.load.free.clone();
        self.a.fixed.matvec_add(&self.fixed_values, -1.0, &mut r);
        r
    }

    /// Face jumps of the full displacement with free part `u`.
    pub fn jumps(&self, u: &[f64]) -> Vec<Vec3> {
        let mut bu = self.b.free.matvec(u);
        self.b.fixed.matvec_add(&self.fixed_values, 1.0, &mut bu);
        (0..self.n_faces())
            .map(|j| {
                let mut v = Vec3::zeros();
                for c in 0..self.dim {
                    v[c] = bu[j * self.dim + c] / self.areas[j];
                }
                v
            })
            .collect()
    }

    pub fn displacement(&self, u: Vec<f64>) -> DisplacementVector {
        DisplacementVector {
            free: u,
            fixed: self.fixed_values.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dofs::DirichletSpec;
    use crate::geometry::{sym, Mat3};
    use crate::mesh::generate::cartesian_3d;
    use crate::mesh::FracturePlane;
    use nalgebra::{DVector, SymmetricEigen};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_cells(dirichlet: &DirichletSpec) -> Discretization {
        let m = cartesian_3d([2, 1, 1], Point::zeros(), Point::new(2.0, 1.0, 1.0))
            .tag_fracture(&[FracturePlane::polygon(
                &[
                    Point::new(1.0, 0.0, 0.0),
                    Point::new(1.0, 1.0, 0.0),
                    Point::new(1.0, 1.0, 1.0),
                    Point::new(1.0, 0.0, 1.0),
                ],
                None,
            )])
            .unwrap();
        Discretization::new(m, dirichlet).unwrap()
    }

    #[test]
    fn stiffness_is_symmetric_and_kills_translations() {
        let d = two_cells(&DirichletSpec::default());
        let a = assemble_stiffness(&d, &Material::uniform(&d.mesh, 2.0, 3.0));
        assert!(a.free.symmetry_defect() <= 1e-12 * a.free.max_abs());
        let v = d.dofs.from_nodal(|_| Vec3::new(1.0, -2.0, 0.5));
        let av = a.free.matvec(&v.free);
        assert!(av.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn patch_energy_on_unit_cube() {
        let m = cartesian_3d([1, 1, 1], Point::zeros(), Point::new(1.0, 1.0, 1.0));
        let d = Discretization::new(m, &DirichletSpec::default()).unwrap();
        let a = assemble_stiffness(&d, &Material::uniform(&d.mesh, 1.0, 1.0));
        let g = Mat3::new(1.0, 0.2, -0.3, 0.2, -0.5, 0.7, -0.3, 0.7, 2.0);
        let v = d.dofs.from_nodal(|b| g * d.mesh.vertices[b.vertex]);
        let energy: f64 = crate::sparse::dot(&v.free, &a.free.matvec(&v.free));
        let expect = 2.0 * g.norm_squared() + g.trace().powi(2);
        assert!((energy - expect).abs() < 1e-12 * expect);
        assert!((sym(&g) - g).norm() == 0.0);
    }

    #[test]
    fn stiffness_positive_with_one_clamped_face() {
        // The fracture cuts the bar in two, so the clamped side must touch both cells.
        let d = two_cells(&DirichletSpec {
            tags: vec!["ymin".into()],
            ..Default::default()
        });
        let a = assemble_stiffness(&d, &Material::uniform(&d.mesh, 1.0, 1.0));
        let eig = SymmetricEigen::new(a.free.to_dense());
        assert!(eig.eigenvalues.min() > 1e-6, "{}", eig.eigenvalues.min());
    }

    #[test]
    fn coupling_rows_are_scaled_jumps() {
        let d = two_cells(&DirichletSpec::default());
        let b = assemble_coupling(&d);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut v = d.dofs.zeros();
        v.free.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
        let bv = b.free.matvec(&v.free);
        let jump = d.jump(0, &v);
        let area = d.mesh.faces[d.mesh.fracture_faces[0].face].area;
        for c in 0..3 {
            assert!((bv[c] - area * jump[c]).abs() < 1e-14);
        }
        // Bubble columns carry |σ| times the identity.
        for c in 0..3 {
            let col = d.dofs.bubbles[0][c];
            for r in 0..3 {
                let expect = if r == c { area } else { 0.0 };
                assert_eq!(b.free.get(r, col), expect);
            }
        }
        let cont = d.dofs.from_nodal(|blk| {
            let p = d.mesh.vertices[blk.vertex];
            Vec3::new(p.x * p.y, p.z, 1.0)
        });
        assert!(b.free.matvec(&cont.free).iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn constant_body_force_and_balanced_tractions() {
        let m = cartesian_3d([2, 2, 2], Point::zeros(), Point::new(1.0, 1.0, 1.0));
        let d = Discretization::new(m, &DirichletSpec::default()).unwrap();
        let c = Vec3::new(1.0, 2.0, -3.0);
        let body = |_: &Point| c;
        let f = assemble_load(
            &d,
            &Loading {
                body: Some(&body),
                tractions: &[],
            },
        );
        // Pairing with a random field equals Σ |K| c·v̄_K.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut v = d.dofs.zeros();
        v.free.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
        let lhs = crate::sparse::dot(&f.free, &v.free);
        let rhs: f64 = (0..d.mesh.cells.len())
            .map(|k| d.mesh.cells[k].volume * c.dot(&d.cell_mean(k, &v)))
            .sum();
        assert!((lhs - rhs).abs() < 1e-13);

        let press = |_: &Point, n: &Vec3| -n * 5.0;
        let tractions: [(&str, Traction); 2] = [("xmin", &press), ("xmax", &press)];
        let f = assemble_load(
            &d,
            &Loading {
                body: None,
                tractions: &tractions,
            },
        );
        let mut total = Vec3::zeros();
        for blk in &d.dofs.blocks {
            for c in 0..3 {
                total[c] += f.get(blk.slots[c]);
            }
        }
        assert!(total.norm() < 1e-13);
        // One face pushes with total force 5 in +x.
        let rows_at_xmin: f64 = d
            .dofs
            .blocks
            .iter()
            .filter(|b| d.mesh.vertices[b.vertex].x == 0.0)
            .map(|b| f.get(b.slots[0]))
            .sum();
        assert!((rows_at_xmin - 5.0).abs() < 1e-13);
    }

    #[test]
    fn traction_pairs_with_face_reconstruction() {
        let m = cartesian_3d([2, 2, 2], Point::zeros(), Point::new(1.0, 1.0, 1.0));
        let d = Discretization::new(m, &DirichletSpec::default()).unwrap();
        let t = |x: &Point, _: &Vec3| Vec3::new(x.y, 1.0 + x.z, x.y * x.z);
        let tractions: [(&str, Traction); 1] = [("xmax", &t)];
        let f = assemble_load(
            &d,
            &Loading {
                body: None,
                tractions: &tractions,
            },
        );
        let q = |x: &Point| Vec3::new(x.y - 0.5, 2.0 * x.z, x.x + x.y);
        let v = d.dofs.from_nodal(|b| q(&d.mesh.vertices[b.vertex]));
        let lhs = crate::sparse::dot(&f.free, &v.free);
        // Linear fields are reproduced by Π^{Kσ}: compare with a fine rule.
        let rule = SimplexRule::conical(2, 6);
        let mut rhs = 0.0;
        for (fi, face) in d.mesh.faces.iter().enumerate() {
            if face.boundary_tag.as_deref() != Some("xmax") {
                continue;
            }
            for (verts, m) in d.mesh.face_simplices(fi) {
                for (x, w) in rule.map(&verts, m) {
                    rhs += w * t(&x, &Vec3::x()).dot(&q(&x));
                }
            }
        }
        assert!((lhs - rhs).abs() < 1e-12, "{lhs} {rhs}");
    }

    #[test]
    fn manufactured_load_matches_refined_quadrature() {
        let m = cartesian_3d([8, 8, 8], Point::new(-1.0, -1.0, -1.0), Point::new(1.0, 1.0, 1.0));
        let f = |x: &Point| Vec3::new((x.x * 3.0).sin() * x.y.exp(), x.z.powi(3) - x.x, (x.y * x.z).cos());
        let fine = SimplexRule::conical(3, 5);
        let coarse = SimplexRule::degree2(3);
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..m.cells.len() {
            let a = integrate_cell(&m, k, &coarse, f);
            let b = integrate_cell(&m, k, &fine, f);
            num += (a - b).norm_squared();
            den += b.norm_squared();
        }
        assert!((num / den).sqrt() < 1e-3);
    }

    #[test]
    fn saddle_rhs_eliminates_prescribed_values() {
        let d = two_cells(&DirichletSpec {
            tags: vec!["xmin".into()],
            ..Default::default()
        });
        let mat = Material::uniform(&d.mesh, 1.0, 2.0);
        let q = |x: &Point| Vec3::new(0.1 * x.x + 0.2 * x.y, -0.3 * x.z, 0.05 * x.x);
        let mut full = d.dofs.from_nodal(|b| q(&d.mesh.vertices[b.vertex]));
        let fixed = full.fixed.clone();
        let sys = SaddleSystem::assemble(&d, &mat, &Loading::default(), fixed, vec![0.0]);
        let mut expect = vec![0.0; sys.n_free()];
        sys.a.fixed.matvec_add(&full.fixed, -1.0, &mut expect);
        let r = sys.rhs();
        assert!(r.iter().zip(&expect).all(|(a, b)| (a - b).abs() < 1e-14));
        assert!(DVector::from_vec(r).norm() > 0.0);
        assert!(sys.jumps(&full.free)[0].norm() < 1e-14);
        full.set_bubble(&d.dofs, 0, Vec3::new(1.0, 0.0, 0.0));
        assert!((sys.jumps(&full.free)[0] - Vec3::x()).norm() < 1e-14);
        assert!(sys.beta_n[0] > 0.0);
    }
}
