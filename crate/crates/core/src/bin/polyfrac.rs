use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use polyfrac::dofs::DirichletSpec;
use polyfrac::harness::{
    compression_crack, compression_mesh, manufactured_mesh, run_study, study_checks, verify_checks, verify_row, Check,
    Family, Study, StudyConfig, VerifyKind,
};
use polyfrac::mesh::io::{read_mesh, write_cells_vtu, write_mesh};
use polyfrac::mesh::PolytopalMesh;
use polyfrac::reconstruction::Discretization;
use polyfrac::verification::SlipProfile;

#[derive(Parser)]
#[command(name = "polyfrac", version, about = "Polytopal contact mechanics on fractured domains")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study and check its rates.
    Run(RunArgs),
    /// Mesh generation and inspection.
    #[command(subcommand)]
    Mesh(MeshCommand),
    /// Stability or consistency check on one mesh or a sequence.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct RunArgs {
    /// `compression2d` or `manufactured3d`.
    study: String,
    /// Mesh family; defaults to `cartesian` (3D) or `triangular2d` (2D).
    #[arg(long)]
    family: Option<String>,
    /// Comma separated levels: cells per axis (3D) or fracture faces (2D).
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    /// Directory for CSV, JSON and VTU output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Constant augmentation parameter instead of the face-wise default.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long)]
    linesearch: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Node perturbation of the hexahedral families, relative to h.
    #[arg(long, default_value_t = 0.2)]
    amplitude: f64,
    /// Compare against the elliptic slip profile.
    #[arg(long)]
    elliptic: bool,
    /// Use the plane-strain compliance 4(1-ν²)/E for the exact slip.
    #[arg(long)]
    plane_strain_compliance: bool,
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Generate a study mesh and write it as JSON (and optionally VTU).
    Gen(GenArgs),
    /// Print sizes and regularity of a mesh file.
    Info {
        mesh: PathBuf,
    },
}

#[derive(Args)]
struct GenArgs {
    family: String,
    /// Cells per axis (3D) or fracture faces (2D).
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.2)]
    amplitude: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    vtu: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// `infsup`, `korn` or `consistency`.
    kind: String,
    /// Mesh files, coarse to fine; the whole boundary is clamped.
    #[arg(long)]
    mesh: Vec<PathBuf>,
    /// Generate the sequence instead of reading files.
    #[arg(long)]
    family: Option<String>,
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Mesh(MeshCommand::Gen(a)) => gen(a).map(|_| true),
        Command::Mesh(MeshCommand::Info { mesh }) => info(&mesh).map(|_| true),
        Command::Verify(a) => verify(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn report_checks(checks: &[Check]) -> bool {
    for c in checks {
        println!("{}", c.line());
    }
    checks.iter().all(|c| c.passed)
}

fn run(a: RunArgs) -> polyfrac::Result<bool> {
    let study: Study = a.study.parse()?;
    let family: Family = match &a.family {
        Some(f) => f.parse()?,
        None if study == Study::Compression2d => Family::Triangular2d,
        None => Family::Cartesian,
    };
    let levels = a.levels.unwrap_or_else(|| StudyConfig::default_levels(study, family));
    let mut config = StudyConfig::new(study, family, levels);
    config.solver.tol = a.tol;
    config.solver.max_iter = a.max_iter;
    config.solver.linesearch = a.linesearch;
    config.solver.beta = a.beta;
    config.seed = a.seed;
    config.amplitude = a.amplitude;
    if a.elliptic {
        config.slip_profile = SlipProfile::Elliptic;
    }
    config.plane_strain_compliance = a.plane_strain_compliance;
    config.out = a.out;
    let report = run_study(&config)?;
    print!("{}", report.summary());
    Ok(report_checks(&study_checks(&report, config.solver.tol)))
}

fn generate(family: Family, n: usize, amplitude: f64, seed: u64) -> polyfrac::Result<PolytopalMesh> {
    if family.dim() == 3 {
        manufactured_mesh(family, n, amplitude, seed)
    } else {
        let crack = compression_crack(&StudyConfig::new(Study::Compression2d, family, vec![n]));
        Ok(compression_mesh(family, n, n, &crack)?.mesh)
    }
}

fn gen(a: GenArgs) -> polyfrac::Result<()> {
    let mesh = generate(a.family.parse()?, a.n, a.amplitude, a.seed)?;
    write_mesh(&mesh, &a.out)?;
    if let Some(path) = a.vtu {
        write_cells_vtu(&mesh, std::io::BufWriter::new(std::fs::File::create(path)?), &[], &[])?;
    }
    println!(
        "{} cells, {} faces, {} fracture faces -> {}",
        mesh.cells.len(),
        mesh.faces.len(),
        mesh.fracture_faces.len(),
        a.out.display()
    );
    Ok(())
}

fn info(path: &PathBuf) -> polyfrac::Result<()> {
    let mesh = read_mesh(path)?;
    let r = mesh.regularity();
    println!("dim {}", mesh.dim);
    println!("vertices {}", mesh.vertices.len());
    println!("faces {}", mesh.faces.len());
    println!("cells {}", mesh.cells.len());
    println!("fracture faces {}", mesh.fracture_faces.len());
    println!("fracture components {}", mesh.fracture_components.len());
    println!("h range [{:.4e}, {:.4e}]", r.h_min, r.h_max);
    println!("max h_K/r_K {:.3}", r.max_cell_ratio);
    println!("max h_K/h_σ {:.3}", r.max_face_ratio);
    Ok(())
}

fn verify(a: VerifyArgs) -> polyfrac::Result<bool> {
    let kind: VerifyKind = a.kind.parse()?;
    let meshes: Vec<PolytopalMesh> = match (&a.family, a.mesh.is_empty()) {
        (Some(f), true) => {
            let family: Family = f.parse()?;
            let levels = a.levels.clone().unwrap_or_else(|| vec![4, 8, 16]);
            levels
                .iter()
                .map(|&n| generate(family, n, 0.2, a.seed))
                .collect::<polyfrac::Result<_>>()?
        }
        (None, false) => a.mesh.iter().map(|p| read_mesh(p)).collect::<polyfrac::Result<_>>()?,
        _ => {
            return Err(polyfrac::Error::InvalidInput(
                "give either --mesh files or --family with --levels".into(),
            ))
        }
    };
    let mut rows = Vec::new();
    println!("{:>8} {:>11} {:>12} {:>12} {:>12} {:>12} {:>12}", "cells", "h", "infsup", "ablated", "korn", "C_D", "W_D");
    let show = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4e}"));
    for mesh in meshes {
        let disc = Discretization::new(mesh, &DirichletSpec::whole_boundary())?;
        let r = verify_row(&disc, kind)?;
        println!(
            "{:>8} {:>11.4e} {:>12} {:>12} {:>12} {:>12} {:>12}",
            r.n_cells,
            r.h,
            show(r.infsup),
            show(r.infsup_ablated),
            show(r.korn),
            show(r.consistency),
            show(r.adjoint)
        );
        rows.push(r);
    }
    Ok(report_checks(&verify_checks(&rows, kind)))
}
