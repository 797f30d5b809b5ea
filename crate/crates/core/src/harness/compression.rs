use std::time::Instant;

use super::report::{ConvergenceReport, ConvergenceTable, LevelDiagnostics, LevelRow};
use super::{level_diagnostics, write_level_vtu, Family, StudyConfig};
use crate::assembly::{Loading, Material, SaddleSystem, Traction};
use crate::contact::{semismooth_newton, ContactSolution, NewtonOptions};
use crate::dofs::{DirichletSpec, DisplacementVector, PointConstraint};
use crate::geometry::{gauss_legendre, Point, Vec3};
use crate::mesh::generate::{fracture_quadtree, FractureQuadtree, QuadtreeMesh};
use crate::reconstruction::Discretization;
use crate::verification::CompressionCrack;
use crate::{Error, Result};

/// Fraction of the fracture length cut off at each tip for the multiplier
/// error.
pub const COMPRESSION_TIP_EXCLUSION: f64 = 0.05;

/// Fraction of the fracture length, centred, on which `λ_n` is compared
/// face by face.
const MIDDLE_FRACTION: f64 = 0.6;

/// Columns of the compression study table.
pub const COMPRESSION_COLUMNS: [&str; 3] = ["slip", "lambda_n", "lambda_n_middle_max"];

/// Crack data in MPa and metres.
pub fn compression_crack(config: &StudyConfig) -> CompressionCrack {
    CompressionCrack {
        sigma: 100.0,
        young: 25.0e3,
        profile: config.slip_profile,
        plane_strain_compliance: config.plane_strain_compliance,
        ..CompressionCrack::default()
    }
}

/// Graded mesh of the 320 m square around the crack; `faces` fracture faces
/// after refinement of a `base`-face mesh.
pub fn compression_mesh(family: Family, base: usize, faces: usize, crack: &CompressionCrack) -> Result<QuadtreeMesh> {
    let triangulate = match family {
        Family::Triangular2d => true,
        Family::Quadtree2d => false,
        _ => return Err(Error::InvalidInput(format!("family `{}` is three-dimensional", family.name()))),
    };
    if faces % base != 0 || !(faces / base).is_power_of_two() {
        return Err(Error::InvalidInput(format!("{faces} faces is not a refinement of {base}")));
    }
    fracture_quadtree(&FractureQuadtree {
        half_length: crack.half_length,
        faces: base,
        refinements: (faces / base).trailing_zeros() as usize,
        angle: crack.psi,
        triangulate,
        ..FractureQuadtree::default()
    })
}

/// One solved level of the compression study.
#[derive(Debug, Clone)]
pub struct CompressionLevel {
    pub disc: Discretization,
    pub tangent: Vec3,
    pub normal: Vec3,
    pub u: DisplacementVector,
    pub solution: ContactSolution,
    /// Curvilinear abscissa of each fracture face centroid, in `[0, 2ℓ]`.
    pub abscissa: Vec<f64>,
    pub lambda_n: Vec<f64>,
    pub slip: Vec<f64>,
    /// Face means of the exact slip.
    pub exact_slip: Vec<f64>,
    pub slip_error: f64,
    pub lambda_error: f64,
    pub lambda_middle_max: f64,
    pub diagnostics: LevelDiagnostics,
}

pub fn solve_compression(q: QuadtreeMesh, crack: &CompressionCrack, opts: &NewtonOptions) -> Result<CompressionLevel> {
    let start = Instant::now();
    let half = q.side / 2.0;
    let a = q.nearest_vertex(&q.to_global(-half, 0.0));
    let b = q.nearest_vertex(&q.to_global(half, 0.0));
    let dirichlet = DirichletSpec {
        point_constraints: vec![
            PointConstraint { vertex: a, component: 0 },
            PointConstraint { vertex: a, component: 1 },
            PointConstraint { vertex: b, component: 1 },
        ],
        ..Default::default()
    };
    let (tangent, normal) = (q.tangent, q.normal);
    let disc = Discretization::new(q.mesh, &dirichlet)?;
    let mesh = &disc.mesh;
    let remote = crack.remote_stress(&Vec3::x());
    let traction = move |_: &Point, n: &Vec3| remote * n;
    let t: Traction = &traction;
    let tractions = [("left", t), ("right", t), ("bottom", t), ("top", t)];
    let load = Loading {
        body: None,
        tractions: &tractions,
    };
    let (mu, lambda) = crack.lame();
    let g = vec![crack.threshold(); mesh.fracture_faces.len()];
    let fixed = vec![0.0; disc.dofs.n_fixed];
    let sys = SaddleSystem::assemble(&disc, &Material::uniform(mesh, mu, lambda), &load, fixed, g);
    let solution = semismooth_newton(&sys, opts, None)?;
    let u = sys.displacement(solution.u.clone());

    let l = crack.half_length;
    let jumps = disc.jumps(&u);
    let gauss = gauss_legendre(6);
    let (mut abscissa, mut lambda_n, mut slip, mut exact_slip) = (vec![], vec![], vec![], vec![]);
    let (mut es, mut rs, mut el, mut rl) = (0.0, 0.0, 0.0, 0.0);
    let mut lambda_middle_max: f64 = 0.0;
    let target = crack.lambda_n();
    for (j, ff) in mesh.fracture_faces.iter().enumerate() {
        let f = &mesh.faces[ff.face];
        let n = mesh.fracture_normal(j);
        let tau = f.centroid.dot(&tangent) + l;
        let ends: Vec<f64> = f.vertices.iter().map(|&s| mesh.vertices[s].dot(&tangent) + l).collect();
        let exact = gauss
            .iter()
            .map(|&(x, w)| w * crack.slip(ends[0] + x * (ends[1] - ends[0])))
            .sum::<f64>();
        let jump = jumps[j];
        let s = (jump - n * jump.dot(&n)).norm();
        let ln = solution.lambda.values[j].dot(&n);
        es += f.area * (s - exact).powi(2);
        rs += f.area * exact * exact;
        let cut = COMPRESSION_TIP_EXCLUSION * 2.0 * l;
        if tau >= cut && tau <= 2.0 * l - cut {
            el += f.area * (ln - target).powi(2);
            rl += f.area * target * target;
        }
        if (tau - l).abs() <= MIDDLE_FRACTION * l {
            lambda_middle_max = lambda_middle_max.max((ln - target).abs() / target);
        }
        abscissa.push(tau);
        lambda_n.push(ln);
        slip.push(s);
        exact_slip.push(exact);
    }
    let mut diagnostics = level_diagnostics(&disc, &sys, &u, &solution);
    diagnostics.seconds = start.elapsed().as_secs_f64();
    Ok(CompressionLevel {
        tangent,
        normal,
        u,
        solution,
        abscissa,
        lambda_n,
        slip,
        exact_slip,
        slip_error: (es / rs).sqrt(),
        lambda_error: (el / rl).sqrt(),
        lambda_middle_max,
        diagnostics,
        disc,
    })
}

pub fn run_compression2d(config: &StudyConfig) -> Result<ConvergenceReport> {
    let crack = compression_crack(config);
    let base = config.levels[0];
    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    for &faces in &config.levels {
        let q = compression_mesh(config.family, base, faces, &crack)?;
        let lvl = solve_compression(q, &crack, &config.solver)?;
        log::info!(
            "compression2d {} faces={faces}: {} Newton iterations, {:.1}s",
            config.family.name(),
            lvl.diagnostics.solve.iterations,
            lvl.diagnostics.seconds
        );
        rows.push(LevelRow {
            level: faces,
            h: lvl.disc.mesh.h_fracture(),
            n_cells: lvl.disc.mesh.cells.len(),
            values: vec![lvl.slip_error, lvl.lambda_error, lvl.lambda_middle_max],
        });
        let mut d = lvl.diagnostics.clone();
        d.level = faces;
        if let Some(dir) = &config.out {
            let stem = format!("compression2d_{}_{faces}", config.family.name());
            write_level_vtu(dir, &stem, &lvl.disc, &lvl.u, &lvl.solution)?;
        }
        diagnostics.push(d);
    }
    Ok(ConvergenceReport {
        study: config.study,
        family: config.family,
        table: ConvergenceTable {
            columns: COMPRESSION_COLUMNS.iter().map(|s| s.to_string()).collect(),
            rows,
        },
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::ContactStatus;
    use crate::harness::Study;
    use crate::verification::SlipProfile;

    #[test]
    fn coarse_compression_slips_everywhere() {
        let mut config = StudyConfig::new(Study::Compression2d, Family::Triangular2d, vec![20]);
        config.slip_profile = SlipProfile::Elliptic;
        let crack = compression_crack(&config);
        let q = compression_mesh(Family::Triangular2d, 20, 20, &crack).unwrap();
        let lvl = solve_compression(q, &crack, &NewtonOptions::default()).unwrap();
        assert!(lvl.solution.report.converged);
        assert!(lvl.solution.status.iter().all(|s| *s == ContactStatus::Slip));
        assert!(lvl.lambda_middle_max < 0.1, "{}", lvl.lambda_middle_max);
    }
}
