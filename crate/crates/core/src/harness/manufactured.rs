use std::time::Instant;

use super::report::{ConvergenceReport, ConvergenceTable, LevelDiagnostics, LevelRow};
use super::{level_diagnostics, write_level_vtu, Family, StudyConfig};
use crate::assembly::{Loading, Material, SaddleSystem};
use crate::contact::{semismooth_newton, ContactSolution, NewtonOptions};
use crate::dofs::{DirichletSpec, DisplacementVector};
use crate::geometry::{Point, Vec3};
use crate::mesh::generate::{cartesian_3d, perturbed_hexa, tetrahedral_3d, Repair};
use crate::mesh::{FracturePlane, PolytopalMesh};
use crate::reconstruction::Discretization;
use crate::verification::{error_norms, AnalyticalSolution, ErrorRow, ManufacturedTresca};
use crate::{Error, Result};

/// Columns of the manufactured study table (relative errors).
pub const MANUFACTURED_COLUMNS: [&str; 6] = ["u", "grad_u", "jump", "lambda_n", "grad_u_continuous", "lambda_minus_half"];

/// `(−1,1)³` with `n` cells per axis and the fracture `{0} × (−1,1)²`, plus
/// side `x < 0`.
pub fn manufactured_mesh(family: Family, n: usize, amplitude: f64, seed: u64) -> Result<PolytopalMesh> {
    let (lo, hi) = (Point::new(-1.0, -1.0, -1.0), Point::new(1.0, 1.0, 1.0));
    let m = match family {
        Family::Cartesian => cartesian_3d([n; 3], lo, hi),
        Family::Tet => tetrahedral_3d([n; 3], lo, hi),
        Family::HexaCut => perturbed_hexa([n; 3], lo, hi, amplitude, Repair::Cut, seed, &[(0, 0.0)])?,
        Family::HexaBary => perturbed_hexa([n; 3], lo, hi, amplitude, Repair::Bary, seed, &[(0, 0.0)])?,
        _ => return Err(Error::InvalidInput(format!("family `{}` is two-dimensional", family.name()))),
    };
    let plane = FracturePlane::polygon(
        &[
            Point::new(0.0, -1.0, -1.0),
            Point::new(0.0, 1.0, -1.0),
            Point::new(0.0, 1.0, 1.0),
            Point::new(0.0, -1.0, 1.0),
        ],
        Some(Vec3::x()),
    );
    m.tag_fracture(&[plane])
}

/// One solved level of the manufactured study.
#[derive(Debug, Clone)]
pub struct ManufacturedLevel {
    pub disc: Discretization,
    pub u: DisplacementVector,
    pub solution: ContactSolution,
    pub errors: ErrorRow,
    pub diagnostics: LevelDiagnostics,
}

/// Solves the manufactured problem on a given mesh.
pub fn solve_manufactured(mesh: PolytopalMesh, opts: &NewtonOptions) -> Result<ManufacturedLevel> {
    solve_exact(mesh, &ManufacturedTresca::default(), opts)
}

/// Solves with the body force, friction and Dirichlet data of `sol`, the
/// whole boundary being prescribed. Branches of `sol` are selected by the
/// evaluation point itself.
pub fn solve_exact(mesh: PolytopalMesh, sol: &dyn AnalyticalSolution, opts: &NewtonOptions) -> Result<ManufacturedLevel> {
    let start = Instant::now();
    let disc = Discretization::new(mesh, &DirichletSpec::whole_boundary())?;
    let mesh = &disc.mesh;
    let mut boundary = disc.dofs.zeros();
    disc.dofs.prescribe(&mut boundary, |b| {
        sol.displacement(&mesh.vertices[b.vertex], &mesh.cells[b.representative].centroid)
    });
    let (mu, lambda) = sol.lame();
    let body = |x: &Point| sol.body_force(x, x);
    let load = Loading {
        body: Some(&body),
        tractions: &[],
    };
    let g = mesh
        .fracture_faces
        .iter()
        .map(|ff| sol.friction(&mesh.faces[ff.face].centroid))
        .collect();
    let sys = SaddleSystem::assemble(&disc, &Material::uniform(mesh, mu, lambda), &load, boundary.fixed, g);
    let solution = semismooth_newton(&sys, opts, None)?;
    let u = sys.displacement(solution.u.clone());
    let errors = error_norms(&disc, &u, &solution.lambda, sol);
    let mut diagnostics = level_diagnostics(&disc, &sys, &u, &solution);
    diagnostics.seconds = start.elapsed().as_secs_f64();
    Ok(ManufacturedLevel {
        disc,
        u,
        solution,
        errors,
        diagnostics,
    })
}

pub fn run_manufactured3d(config: &StudyConfig) -> Result<ConvergenceReport> {
    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    for &n in &config.levels {
        let mesh = manufactured_mesh(config.family, n, config.amplitude, config.seed)?;
        let lvl = solve_manufactured(mesh, &config.solver)?;
        log::info!(
            "manufactured3d {} n={n}: {} Newton iterations, {:.1}s",
            config.family.name(),
            lvl.diagnostics.solve.iterations,
            lvl.diagnostics.seconds
        );
        let e = &lvl.errors;
        rows.push(LevelRow {
            level: n,
            h: e.h,
            n_cells: e.n_cells,
            values: vec![
                e.displacement.value(),
                e.gradient.value(),
                e.jump.value(),
                e.lambda_n.value(),
                e.gradient_continuous.value(),
                e.lambda_minus_half.value(),
            ],
        });
        let mut d = lvl.diagnostics.clone();
        d.level = n;
        if let Some(dir) = &config.out {
            let stem = format!("manufactured3d_{}_{n}", config.family.name());
            write_level_vtu(dir, &stem, &lvl.disc, &lvl.u, &lvl.solution)?;
        }
        diagnostics.push(d);
    }
    Ok(ConvergenceReport {
        study: config.study,
        family: config.family,
        table: ConvergenceTable {
            columns: MANUFACTURED_COLUMNS.iter().map(|s| s.to_string()).collect(),
            rows,
        },
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::ContactStatus;

    #[test]
    fn coarse_manufactured_solve() {
        let mesh = manufactured_mesh(Family::Cartesian, 8, 0.2, 0).unwrap();
        let lvl = solve_manufactured(mesh, &NewtonOptions::default()).unwrap();
        assert!(lvl.solution.report.converged);
        assert!(lvl.diagnostics.kkt.max() < 1e-9);
        // The exact normal stress vanishes at z = 0, so only faces a cell
        // away from that line are asserted closed.
        let mesh = &lvl.disc.mesh;
        let jumps = lvl.disc.jumps(&lvl.u);
        for (j, ff) in mesh.fracture_faces.iter().enumerate() {
            let z = mesh.faces[ff.face].centroid.z;
            let st = lvl.solution.status[j];
            if z.abs() < 0.25 {
                continue;
            }
            assert_ne!(st, ContactStatus::Open, "face at z={z}");
            assert!(jumps[j].dot(&mesh.fracture_normal(j)).abs() < 1e-10);
            if z < 0.0 {
                assert_eq!(st, ContactStatus::Slip, "face at z={z}");
            }
        }
    }

    #[test]
    fn perturbed_fracture_stays_planar() {
        for f in [Family::HexaCut, Family::HexaBary] {
            let m = manufactured_mesh(f, 4, 0.2, 3).unwrap();
            assert_eq!(m.fracture_faces.len(), 16);
            for ff in &m.fracture_faces {
                assert!(m.faces[ff.face].planar);
            }
        }
        assert!(manufactured_mesh(Family::Triangular2d, 4, 0.2, 0).is_err());
    }
}
