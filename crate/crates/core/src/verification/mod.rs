//! Exact solutions, interpolators, error norms and stability estimators.

mod solutions;
mod stability;

pub use solutions::{AnalyticalSolution, CompressionCrack, LinearField, ManufacturedTresca, SlipProfile};
pub use stability::{
    adjoint_consistency, adjoint_consistency_exact, consistency_error, dense_generalized_min, h1_gram,
    infsup_constant, korn_constant, korn_constant_dense, lanczos_max, BubbleCoupling, DENSE_LIMIT,
};

use serde::{Deserialize, Serialize};

use crate::dofs::{DisplacementVector, MultiplierVector};
use crate::geometry::{Mat3, Point, SimplexRule, Vec3};
use crate::reconstruction::Discretization;

/// `I_D u`: one-sided nodal values and bubbles correcting the face means on
/// the plus side.
pub fn interpolate_displacement(disc: &Discretization, sol: &dyn AnalyticalSolution) -> DisplacementVector {
    let mesh = &disc.mesh;
    let mut v = disc.dofs.from_nodal(|b| sol.displacement(&mesh.vertices[b.vertex], &mesh.cells[b.representative].centroid));
    let rule = SimplexRule::degree2(mesh.dim - 1);
    for (j, ff) in mesh.fracture_faces.iter().enumerate() {
        let k = ff.plus;
        let side = mesh.cells[k].centroid;
        let f = &mesh.faces[ff.face];
        let mut acc = Vec3::zeros();
        for (verts, m) in mesh.face_simplices(ff.face) {
            for (x, w) in rule.map(&verts, m) {
                acc += (sol.displacement(&x, &side) - disc.face_trace(k, ff.face, &v, &x)) * w;
            }
        }
        v.set_bubble(&disc.dofs, j, acc / f.area);
    }
    v
}

/// Face means of a field on the fracture, evaluated from the plus side.
pub fn face_averages<F>(disc: &Discretization, mut f: F) -> Vec<Vec3>
where
    F: FnMut(&Point, usize) -> Vec3,
{
    let mesh = &disc.mesh;
    let rule = SimplexRule::conical(mesh.dim - 1, 4);
    mesh.fracture_faces
        .iter()
        .enumerate()
        .map(|(j, ff)| {
            let mut acc = Vec3::zeros();
            for (verts, m) in mesh.face_simplices(ff.face) {
                for (x, w) in rule.map(&verts, m) {
                    acc += f(&x, j) * w;
                }
            }
            acc / mesh.faces[ff.face].area
        })
        .collect()
}

/// `I_M λ` for `λ = −σ(u⁺) n⁺`.
pub fn interpolate_multiplier(disc: &Discretization, sol: &dyn AnalyticalSolution) -> MultiplierVector {
    let mesh = &disc.mesh;
    let values = face_averages(disc, |x, j| {
        let ff = mesh.fracture_faces[j];
        sol.multiplier(x, &mesh.cells[ff.plus].centroid, &mesh.fracture_normal(j))
    });
    MultiplierVector {
        normals: (0..values.len()).map(|j| mesh.fracture_normal(j)).collect(),
        values,
    }
}

/// Exact jump `u⁺ − u⁻` at a point of fracture face `j`.
pub fn exact_jump(disc: &Discretization, sol: &dyn AnalyticalSolution, j: usize, x: &Point) -> Vec3 {
    let ff = disc.mesh.fracture_faces[j];
    sol.displacement(x, &disc.mesh.cells[ff.plus].centroid) - sol.displacement(x, &disc.mesh.cells[ff.minus].centroid)
}

/// Absolute and relative error; `relative` is `None` when the exact norm
/// vanishes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorValue {
    pub absolute: f64,
    pub relative: Option<f64>,
}

impl ErrorValue {
    fn new(err2: f64, ref2: f64) -> Self {
        let absolute = err2.max(0.0).sqrt();
        let r = ref2.max(0.0).sqrt();
        Self {
            absolute,
            relative: (r > 0.0).then(|| absolute / r),
        }
    }

    /// Relative value when defined, absolute otherwise.
    pub fn value(&self) -> f64 {
        self.relative.unwrap_or(self.absolute)
    }
}

/// Error table row for the three-dimensional manufactured solution.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub n_cells: usize,
    pub n_fracture_faces: usize,
    /// `N_cells^{-1/3}` (or `^{-1/2}` in 2D).
    pub h: f64,
    pub h_max: f64,
    /// `‖u − Π^D u_D‖_{L²}`
    pub displacement: ErrorValue,
    /// `‖π⁰∇u − ∇^D u_D‖_{L²}`
    pub gradient: ErrorValue,
    /// `‖∇u − ∇^D u_D‖_{L²}`
    pub gradient_continuous: ErrorValue,
    /// `‖π⁰[[u]] − [[u_D]]_D‖_{L²(Γ)}`
    pub jump: ErrorValue,
    /// `‖π⁰λ_n − λ_{D,n}‖_{L²(Γ)}`
    pub lambda_n: ErrorValue,
    /// `‖π⁰λ − λ_D‖_{−½,D}`
    pub lambda_minus_half: ErrorValue,
    /// `max_σ |[[u_D]]_σ · n⁺|`
    pub max_normal_jump: f64,
}

/// Errors of a discrete solution against an exact one.
pub fn error_norms(
    disc: &Discretization,
    u: &DisplacementVector,
    lambda: &MultiplierVector,
    sol: &dyn AnalyticalSolution,
) -> ErrorRow {
    let mesh = &disc.mesh;
    let dim = mesh.dim;
    let rule = SimplexRule::conical(dim, 3);
    let (mut eu, mut ru, mut eg, mut rg, mut egc, mut rgc) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 0..mesh.cells.len() {
        let side = mesh.cells[k].centroid;
        let g_d = disc.cell_gradient(k, u);
        let mut g_mean = Mat3::zeros();
        let vol = mesh.cells[k].volume;
        for (verts, m) in mesh.cell_simplices(k) {
            for (x, w) in rule.map(&verts, m) {
                let ux = sol.displacement(&x, &side);
                let gx = sol.gradient(&x, &side);
                eu += w * (ux - disc.cell_reconstruction(k, u, &x)).norm_squared();
                ru += w * ux.norm_squared();
                egc += w * (gx - g_d).norm_squared();
                rgc += w * gx.norm_squared();
                g_mean += gx * w;
            }
        }
        g_mean /= vol;
        eg += vol * (g_mean - g_d).norm_squared();
        rg += vol * g_mean.norm_squared();
    }
    let jumps = disc.jumps(u);
    let exact_j = face_averages(disc, |x, j| exact_jump(disc, sol, j, x));
    let exact_l = interpolate_multiplier(disc, sol);
    let (mut ej, mut rj, mut el, mut rl, mut em, mut rm) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let mut max_normal_jump: f64 = 0.0;
    for (j, ff) in mesh.fracture_faces.iter().enumerate() {
        let f = &mesh.faces[ff.face];
        let n = mesh.fracture_normal(j);
        ej += f.area * (exact_j[j] - jumps[j]).norm_squared();
        rj += f.area * exact_j[j].norm_squared();
        let ln = exact_l.values[j].dot(&n);
        el += f.area * (ln - lambda.values[j].dot(&n)).powi(2);
        rl += f.area * ln * ln;
        em += f.diameter * f.area * (exact_l.values[j] - lambda.values[j]).norm_squared();
        rm += f.diameter * f.area * exact_l.values[j].norm_squared();
        max_normal_jump = max_normal_jump.max(jumps[j].dot(&n).abs());
    }
    ErrorRow {
        n_cells: mesh.cells.len(),
        n_fracture_faces: mesh.fracture_faces.len(),
        h: (mesh.cells.len() as f64).powf(-1.0 / dim as f64),
        h_max: mesh.h_max(),
        displacement: ErrorValue::new(eu, ru),
        gradient: ErrorValue::new(eg, rg),
        gradient_continuous: ErrorValue::new(egc, rgc),
        jump: ErrorValue::new(ej, rj),
        lambda_n: ErrorValue::new(el, rl),
        lambda_minus_half: ErrorValue::new(em, rm),
        max_normal_jump,
    }
}

/// Experimental orders of convergence between consecutive levels.
pub fn eoc(h: &[f64], e: &[f64]) -> Vec<f64> {
    h.windows(2)
        .zip(e.windows(2))
        .map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect()
}

/// Least-squares slope of `log e` against `log h`.
pub fn fitted_slope(h: &[f64], e: &[f64]) -> f64 {
    let n = h.len() as f64;
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::dofs::DirichletSpec;
    use crate::mesh::generate::{cartesian_3d, perturbed_hexa, Repair};
    use crate::mesh::FracturePlane;

    pub(crate) fn fracture_plane() -> FracturePlane {
        FracturePlane::polygon(
            &[
                Point::new(0.0, -1.0, -1.0),
                Point::new(0.0, 1.0, -1.0),
                Point::new(0.0, 1.0, 1.0),
                Point::new(0.0, -1.0, 1.0),
            ],
            Some(Vec3::x()),
        )
    }

    fn cube(n: usize) -> Discretization {
        let m = cartesian_3d([n; 3], Point::new(-1.0, -1.0, -1.0), Point::new(1.0, 1.0, 1.0))
            .tag_fracture(&[fracture_plane()])
            .unwrap();
        Discretization::new(m, &DirichletSpec::whole_boundary()).unwrap()
    }

    #[test]
    fn linear_interpolant_has_no_bubbles_and_no_error() {
        let a = Mat3::new(0.1, 0.2, 0.3, -0.4, 0.5, 0.6, 0.7, -0.8, 0.9);
        let sol = LinearField::new(3, a, Vec3::new(1.0, 2.0, 3.0), 1.0, 1.0);
        for disc in [
            cube(2),
            Discretization::new(
                perturbed_hexa([2, 2, 2], Point::new(-1.0, -1.0, -1.0), Point::new(1.0, 1.0, 1.0), 0.2, Repair::Bary, 1, &[(0, 0.0)])
                    .unwrap()
                    .tag_fracture(&[fracture_plane()])
                    .unwrap(),
                &DirichletSpec::whole_boundary(),
            )
            .unwrap(),
        ] {
            let v = interpolate_displacement(&disc, &sol);
            for j in 0..disc.mesh.fracture_faces.len() {
                assert!(v.bubble(&disc.dofs, j).norm() < 1e-13);
            }
            let lam = interpolate_multiplier(&disc, &sol);
            let row = error_norms(&disc, &v, &lam, &sol);
            assert!(row.gradient.absolute < 1e-12);
            assert!(row.gradient_continuous.absolute < 1e-12);
            assert!(row.displacement.absolute < 1e-12);
            assert!(row.jump.absolute < 1e-13);
        }
    }

    #[test]
    fn constant_field_interpolant() {
        let sol = LinearField::new(3, Mat3::zeros(), Vec3::new(1.0, -1.0, 2.0), 1.0, 1.0);
        let disc = cube(2);
        let v = interpolate_displacement(&disc, &sol);
        for b in 0..disc.dofs.blocks.len() {
            assert_eq!(v.nodal(&disc.dofs, b), Vec3::new(1.0, -1.0, 2.0));
        }
        assert!(v.free[disc.dofs.n_free_nodal()..].iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn manufactured_duplicated_nodal_values() {
        let disc = cube(2);
        let sol = ManufacturedTresca::default();
        let v = interpolate_displacement(&disc, &sol);
        let s = disc
            .mesh
            .vertices
            .iter()
            .position(|p| (p - Point::new(0.0, 0.0, -1.0)).norm() < 1e-12)
            .unwrap();
        let mut ys: Vec<f64> = (0..disc.dofs.blocks.len())
            .filter(|&b| disc.dofs.blocks[b].vertex == s)
            .map(|b| v.nodal(&disc.dofs, b).y)
            .collect();
        ys.sort_by(f64::total_cmp);
        assert_eq!(ys.len(), 2);
        assert!((ys[0] - 0.25).abs() < 1e-15 && (ys[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn interpolated_manufactured_jump_is_tangential() {
        let disc = cube(4);
        let sol = ManufacturedTresca::default();
        let v = interpolate_displacement(&disc, &sol);
        for (j, jump) in disc.jumps(&v).iter().enumerate() {
            assert!(jump.dot(&disc.mesh.fracture_normal(j)).abs() < 1e-14);
        }
    }

    #[test]
    fn multiplier_interpolation_contracts() {
        let disc = cube(4);
        let sol = ManufacturedTresca::default();
        let lam = interpolate_multiplier(&disc, &sol);
        let rule = SimplexRule::conical(2, 5);
        for (j, ff) in disc.mesh.fracture_faces.iter().enumerate() {
            let side = disc.mesh.cells[ff.plus].centroid;
            let n = disc.mesh.fracture_normal(j);
            let mut l2 = 0.0;
            for (verts, m) in disc.mesh.face_simplices(ff.face) {
                for (x, w) in rule.map(&verts, m) {
                    l2 += w * sol.multiplier(&x, &side, &n).norm_squared();
                }
            }
            assert!(disc.mesh.faces[ff.face].area * lam.values[j].norm_squared() <= l2 * (1.0 + 1e-12));
        }
        // Constants are reproduced.
        let c = LinearField::new(3, Mat3::zeros(), Vec3::zeros(), 1.0, 1.0);
        assert!(interpolate_multiplier(&disc, &c).values.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn eoc_examples() {
        assert!((eoc(&[1.0, 0.5], &[1.0, 0.5])[0] - 1.0).abs() < 1e-15);
        assert!((eoc(&[1.0, 0.5], &[1.0, 0.25])[0] - 2.0).abs() < 1e-15);
        assert!((fitted_slope(&[1.0, 0.5, 0.25], &[1.0, 0.25, 0.0625]) - 2.0).abs() < 1e-12);
    }
}
