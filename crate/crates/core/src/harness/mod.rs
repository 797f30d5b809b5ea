//! The two convergence studies, their reports and file output.

pub mod checks;
mod compression;
mod manufactured;
mod report;
mod verify;

pub use compression::{
    compression_crack, compression_mesh, run_compression2d, solve_compression, CompressionLevel, COMPRESSION_COLUMNS,
    COMPRESSION_TIP_EXCLUSION,
};
pub use manufactured::{
    manufactured_mesh, run_manufactured3d, solve_exact, solve_manufactured, ManufacturedLevel, MANUFACTURED_COLUMNS,
};
pub use checks::{study_checks, Check};
pub use report::{ConvergenceReport, ConvergenceTable, LevelDiagnostics, LevelRow};
pub use verify::{verify_checks, verify_row, VerifyKind, VerifyRow};

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assembly::SaddleSystem;
use crate::contact::{check_kkt, ContactSolution, ContactStatus, NewtonOptions};
use crate::dofs::DisplacementVector;
use crate::mesh::io::{cell_point_order, write_cells_vtu, write_fracture_vtu, VtuField};
use crate::reconstruction::Discretization;
use crate::verification::SlipProfile;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Compression2d,
    Manufactured3d,
}

impl Study {
    pub fn name(&self) -> &'static str {
        match self {
            Study::Compression2d => "compression2d",
            Study::Manufactured3d => "manufactured3d",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Study::Compression2d => 2,
            Study::Manufactured3d => 3,
        }
    }
}

impl FromStr for Study {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "compression2d" => Ok(Study::Compression2d),
            "manufactured3d" => Ok(Study::Manufactured3d),
            _ => Err(Error::InvalidInput(format!("unknown study `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Cartesian,
    Tet,
    HexaCut,
    HexaBary,
    /// Graded quadtree cells fanned into triangles.
    Triangular2d,
    /// Graded quadtree cells kept as polygons with hanging nodes.
    Quadtree2d,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Cartesian => "cartesian",
            Family::Tet => "tet",
            Family::HexaCut => "hexa_cut",
            Family::HexaBary => "hexa_bary",
            Family::Triangular2d => "triangular2d",
            Family::Quadtree2d => "quadtree2d",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Family::Triangular2d | Family::Quadtree2d => 2,
            _ => 3,
        }
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cartesian" => Ok(Family::Cartesian),
            "tet" => Ok(Family::Tet),
            "hexa_cut" => Ok(Family::HexaCut),
            "hexa_bary" => Ok(Family::HexaBary),
            "triangular2d" => Ok(Family::Triangular2d),
            "quadtree2d" => Ok(Family::Quadtree2d),
            _ => Err(Error::InvalidInput(format!("unknown mesh family `{s}`"))),
        }
    }
}

/// Everything needed to run one study.
///
/// Levels are cells per axis for the three-dimensional study and fracture
/// face counts for the two-dimensional one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyConfig {
    pub study: Study,
    pub family: Family,
    pub levels: Vec<usize>,
    pub solver: NewtonOptions,
    pub seed: u64,
    /// Node perturbation of the hexahedral families, relative to `h`.
    pub amplitude: f64,
    pub slip_profile: SlipProfile,
    pub plane_strain_compliance: bool,
    pub out: Option<PathBuf>,
}

impl StudyConfig {
    pub fn new(study: Study, family: Family, levels: Vec<usize>) -> Self {
        Self {
            study,
            family,
            levels,
            solver: NewtonOptions::default(),
            seed: 0,
            amplitude: 0.2,
            slip_profile: SlipProfile::AsPrinted,
            plane_strain_compliance: false,
            out: None,
        }
    }

    /// Default levels of the desk suite.
    pub fn default_levels(study: Study, family: Family) -> Vec<usize> {
        match (study, family) {
            (Study::Compression2d, _) => vec![100, 200],
            (Study::Manufactured3d, Family::Cartesian) => vec![8, 16, 32],
            (Study::Manufactured3d, _) => vec![8, 16],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::InvalidInput("no levels".into()));
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("levels must be strictly increasing".into()));
        }
        if self.family.dim() != self.study.dim() {
            return Err(Error::InvalidInput(format!(
                "family `{}` does not fit study `{}`",
                self.family.name(),
                self.study.name()
            )));
        }
        match self.study {
            Study::Manufactured3d => {
                if self.levels.iter().any(|&n| n == 0 || n % 2 != 0) {
                    return Err(Error::InvalidInput("3D levels must be even cell counts per axis".into()));
                }
            }
            Study::Compression2d => {
                let base = self.levels[0];
                if base % 2 != 0 || self.levels.iter().any(|&l| l % base != 0 || !(l / base).is_power_of_two()) {
                    return Err(Error::InvalidInput(
                        "2D levels must be an even face count followed by power-of-two multiples".into(),
                    ));
                }
            }
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iter == 0 {
            return Err(Error::InvalidInput("solver tolerance and iteration cap must be positive".into()));
        }
        Ok(())
    }
}

/// Runs the configured study and writes its files when an output directory
/// is set.
pub fn run_study(config: &StudyConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    let report = match config.study {
        Study::Manufactured3d => run_manufactured3d(config)?,
        Study::Compression2d => run_compression2d(config)?,
    };
    if let Some(dir) = &config.out {
        std::fs::create_dir_all(dir)?;
        let stem = format!("{}_{}", config.study.name(), config.family.name());
        report.write_csv(std::fs::File::create(dir.join(format!("{stem}.csv")))?)?;
        report.write_json(std::fs::File::create(dir.join(format!("{stem}.json")))?)?;
    }
    Ok(report)
}

/// KKT, status and jump data of a converged solve.
pub fn level_diagnostics(
    disc: &Discretization,
    sys: &SaddleSystem,
    u: &DisplacementVector,
    sol: &ContactSolution,
) -> LevelDiagnostics {
    let jumps = disc.jumps(u);
    let kkt = check_kkt(&jumps, &sol.lambda, &sys.g);
    let lambda_scale = sol
        .lambda
        .values
        .iter()
        .map(|v| v.norm())
        .chain(sys.g.iter().copied())
        .fold(0.0, f64::max);
    let jump_scale = jumps.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let ls = if lambda_scale > 0.0 { lambda_scale } else { 1.0 };
    let js = if jump_scale > 0.0 { jump_scale } else { 1.0 };
    let kkt_relative = [
        kkt.negative_pressure / ls,
        kkt.interpenetration / js,
        kkt.normal_complementarity / (ls * js),
        kkt.friction_excess / ls,
        kkt.slip_alignment / (ls * js),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let count = |s: ContactStatus| sol.status.iter().filter(|&&x| x == s).count();
    let max_normal_jump = jumps
        .iter()
        .zip(&sol.lambda.normals)
        .map(|(j, n)| j.dot(n).abs())
        .fold(0.0, f64::max);
    LevelDiagnostics {
        level: 0,
        n_unknowns: sys.n_free() + sys.n_multipliers(),
        n_fracture_faces: sys.n_faces(),
        solve: sol.report.clone(),
        kkt,
        kkt_relative,
        open: count(ContactStatus::Open),
        stick: count(ContactStatus::Stick),
        slip: count(ContactStatus::Slip),
        max_normal_jump,
        seconds: 0.0,
    }
}

/// Writes `<stem>_cells.vtu` with `Π^D u` sampled at the cell vertices and
/// `<stem>_fracture.vtu` with jumps, multipliers and contact states.
pub fn write_level_vtu(
    dir: &Path,
    stem: &str,
    disc: &Discretization,
    u: &DisplacementVector,
    sol: &ContactSolution,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mesh = &disc.mesh;
    let mut pts = Vec::new();
    let mut grad = Vec::new();
    for k in 0..mesh.cells.len() {
        for s in cell_point_order(mesh, k) {
            pts.extend(disc.cell_reconstruction(k, u, &mesh.vertices[s]).iter());
        }
        grad.extend(disc.cell_gradient(k, u).transpose().iter());
    }
    let cells = std::fs::File::create(dir.join(format!("{stem}_cells.vtu")))?;
    write_cells_vtu(
        mesh,
        std::io::BufWriter::new(cells),
        &[VtuField::new("displacement", 3, pts)],
        &[VtuField::new("gradient", 9, grad)],
    )?;
    let jumps: Vec<f64> = disc.jumps(u).iter().flat_map(|v| v.iter().copied().collect::<Vec<_>>()).collect();
    let lambda: Vec<f64> = sol.lambda.values.iter().flat_map(|v| v.iter().copied().collect::<Vec<_>>()).collect();
    let status: Vec<f64> = sol
        .status
        .iter()
        .map(|s| match s {
            ContactStatus::Open => 0.0,
            ContactStatus::Stick => 1.0,
            ContactStatus::Slip => 2.0,
        })
        .collect();
    let frac = std::fs::File::create(dir.join(format!("{stem}_fracture.vtu")))?;
    write_fracture_vtu(
        mesh,
        std::io::BufWriter::new(frac),
        &[
            VtuField::new("jump", 3, jumps),
            VtuField::new("multiplier", 3, lambda),
            VtuField::new("status", 1, status),
        ],
    )
}
