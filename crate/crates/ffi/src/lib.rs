//! C interface to the polyfrac solver.
//!
//! Meshes and reports are opaque handles, created by `pf_mesh_generate`,
//! `pf_mesh_read` or `pf_study_run` and released by the matching `pf_*_free`.
//! Every fallible call returns a [`PfStatus`]; the message of the last error
//! on the calling thread is available from [`pf_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use polyfrac::contact::NewtonOptions;
use polyfrac::dofs::DirichletSpec;
use polyfrac::harness::{
    manufactured_mesh, run_study, solve_manufactured, study_checks, verify_row, ConvergenceReport, Family, Study,
    StudyConfig, VerifyKind,
};
use polyfrac::mesh::io::{read_mesh, write_mesh};
use polyfrac::mesh::PolytopalMesh;
use polyfrac::reconstruction::Discretization;
use polyfrac::verification::SlipProfile;
use polyfrac::Error;

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Io = 3,
    /// Mesh construction or geometry failure.
    Mesh = 4,
    /// Factorisation, linear solve or Newton failure.
    Solver = 5,
    OutOfRange = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> PfStatus {
    match e {
        Error::NonManifoldFace { .. }
        | Error::DegenerateGeometry { .. }
        | Error::NonConformingFracture { .. }
        | Error::NotAFractureFace(_)
        | Error::InvertedCell(_)
        | Error::WeightSolve { .. }
        | Error::NoFracture => PfStatus::Mesh,
        Error::Factorisation(_) | Error::LinearResidual { .. } | Error::Singular(_) | Error::TooLarge { .. } => {
            PfStatus::Solver
        }
        Error::InvalidInput(_) | Error::UnsupportedVersion(_) | Error::Json(_) => PfStatus::InvalidInput,
        Error::Io(_) => PfStatus::Io,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), PfStatusError>) -> PfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PfStatus::Ok,
        Ok(Err(PfStatusError(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            PfStatus::Panic
        }
    }
}

struct PfStatusError(PfStatus, String);

impl From<Error> for PfStatusError {
    fn from(e: Error) -> Self {
        PfStatusError(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> PfStatusError {
    PfStatusError(PfStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> PfStatusError {
    PfStatusError(PfStatus::InvalidInput, msg.into())
}

unsafe fn string_arg(p: *const c_char, what: &str) -> Result<String, PfStatusError> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_string)
        .map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, PfStatusError> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Copies the last error message of this thread into `buf` (NUL terminated,
/// truncated to `len` bytes) and returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn pf_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// A polytopal mesh, possibly with a fracture.
pub struct PfMesh(PolytopalMesh);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PfMeshCounts {
    pub dim: usize,
    pub vertices: usize,
    pub faces: usize,
    pub cells: usize,
    pub fracture_faces: usize,
}

/// Generates the cube mesh of the manufactured study: `n` cells per axis of
/// the family `family` (`cartesian`, `tet`, `hexa_cut`, `hexa_bary`) with the
/// fracture on `x = 0`.
///
/// # Safety
/// `family` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pf_mesh_generate(
    family: *const c_char,
    n: usize,
    amplitude: f64,
    seed: u64,
    out: *mut *mut PfMesh,
) -> PfStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let family: Family = string_arg(family, "family")?.parse()?;
        if family.dim() != 3 {
            return Err(invalid("only three-dimensional families can be generated here"));
        }
        if n == 0 || n % 2 != 0 {
            return Err(invalid("n must be a positive even number"));
        }
        let mesh = manufactured_mesh(family, n, amplitude, seed)?;
        *out = Box::into_raw(Box::new(PfMesh(mesh)));
        Ok(())
    })
}

/// Reads a JSON mesh file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pf_mesh_read(path: *const c_char, out: *mut *mut PfMesh) -> PfStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let path = PathBuf::from(string_arg(path, "path")?);
        *out = Box::into_raw(Box::new(PfMesh(read_mesh(&path)?)));
        Ok(())
    })
}

/// Writes a JSON mesh file.
///
/// # Safety
/// `mesh` must come from this library and `path` be NUL terminated.
#[no_mangle]
pub unsafe extern "C" fn pf_mesh_write(mesh: *const PfMesh, path: *const c_char) -> PfStatus {
    guard(|| {
        let mesh = mesh.as_ref().ok_or_else(|| null("mesh"))?;
        write_mesh(&mesh.0, &PathBuf::from(string_arg(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// `mesh` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pf_mesh_counts(mesh: *const PfMesh, out: *mut PfMeshCounts) -> PfStatus {
    guard(|| {
        let mesh = &mesh.as_ref().ok_or_else(|| null("mesh"))?.0;
        *out_ptr(out, "out")? = PfMeshCounts {
            dim: mesh.dim,
            vertices: mesh.vertices.len(),
            faces: mesh.faces.len(),
            cells: mesh.cells.len(),
            fracture_faces: mesh.fracture_faces.len(),
        };
        Ok(())
    })
}

/// Releases a mesh; null is ignored.
///
/// # Safety
/// `mesh` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pf_mesh_free(mesh: *mut PfMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Stability and consistency values of one mesh, whole boundary clamped.
/// Entries that were not requested are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PfVerifyValues {
    pub h: f64,
    pub infsup: f64,
    pub infsup_ablated: f64,
    pub korn: f64,
    pub consistency: f64,
    pub adjoint: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfVerifyKind {
    Infsup = 0,
    Korn = 1,
    Consistency = 2,
}

/// # Safety
/// `mesh` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pf_verify(mesh: *const PfMesh, kind: PfVerifyKind, out: *mut PfVerifyValues) -> PfStatus {
    guard(|| {
        let mesh = &mesh.as_ref().ok_or_else(|| null("mesh"))?.0;
        let out = out_ptr(out, "out")?;
        let kind = match kind {
            PfVerifyKind::Infsup => VerifyKind::Infsup,
            PfVerifyKind::Korn => VerifyKind::Korn,
            PfVerifyKind::Consistency => VerifyKind::Consistency,
        };
        let disc = Discretization::new(mesh.clone(), &DirichletSpec::whole_boundary())?;
        let r = verify_row(&disc, kind)?;
        *out = PfVerifyValues {
            h: r.h,
            infsup: r.infsup.unwrap_or(f64::NAN),
            infsup_ablated: r.infsup_ablated.unwrap_or(f64::NAN),
            korn: r.korn.unwrap_or(f64::NAN),
            consistency: r.consistency.unwrap_or(f64::NAN),
            adjoint: r.adjoint.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// Newton options; `beta <= 0` selects the face-wise default.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PfSolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub linesearch: bool,
    pub beta: f64,
}

/// Default solver options.
#[no_mangle]
pub extern "C" fn pf_solver_options_default() -> PfSolverOptions {
    let d = NewtonOptions::default();
    PfSolverOptions {
        tol: d.tol,
        max_iter: d.max_iter,
        linesearch: d.linesearch,
        beta: 0.0,
    }
}

fn newton_options(o: &PfSolverOptions) -> Result<NewtonOptions, PfStatusError> {
    if !(o.tol > 0.0) || o.max_iter == 0 {
        return Err(invalid("tolerance and iteration cap must be positive"));
    }
    Ok(NewtonOptions {
        tol: o.tol,
        max_iter: o.max_iter,
        linesearch: o.linesearch,
        beta: (o.beta > 0.0).then_some(o.beta),
    })
}

/// Outcome of a manufactured solve; errors are relative.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PfSolveSummary {
    pub converged: bool,
    pub iterations: usize,
    pub kkt: f64,
    pub max_normal_jump: f64,
    pub open: usize,
    pub stick: usize,
    pub slip: usize,
    pub h: f64,
    pub error_u: f64,
    pub error_grad: f64,
    pub error_jump: f64,
    pub error_lambda_n: f64,
}

/// Solves the manufactured Tresca problem on `mesh`, which must cover
/// `(−1,1)³` with the fracture on `x = 0`.
///
/// # Safety
/// `mesh` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pf_solve_manufactured(
    mesh: *const PfMesh,
    options: PfSolverOptions,
    out: *mut PfSolveSummary,
) -> PfStatus {
    guard(|| {
        let mesh = &mesh.as_ref().ok_or_else(|| null("mesh"))?.0;
        let out = out_ptr(out, "out")?;
        let lvl = solve_manufactured(mesh.clone(), &newton_options(&options)?)?;
        let d = &lvl.diagnostics;
        let e = &lvl.errors;
        *out = PfSolveSummary {
            converged: d.solve.converged,
            iterations: d.solve.iterations,
            kkt: d.kkt_relative,
            max_normal_jump: d.max_normal_jump,
            open: d.open,
            stick: d.stick,
            slip: d.slip,
            h: e.h,
            error_u: e.displacement.value(),
            error_grad: e.gradient.value(),
            error_jump: e.jump.value(),
            error_lambda_n: e.lambda_n.value(),
        };
        Ok(())
    })
}

/// Convergence table and diagnostics of a study run.
pub struct PfReport {
    report: ConvergenceReport,
    tol: f64,
}

/// Runs `study` (`compression2d` or `manufactured3d`) on `family` over
/// `n_levels` levels. The compression study uses the elliptic slip profile
/// and plane-strain compliance when `reference_slip` is true.
///
/// # Safety
/// Strings must be NUL terminated, `levels` must point to `n_levels` values
/// and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pf_study_run(
    study: *const c_char,
    family: *const c_char,
    levels: *const usize,
    n_levels: usize,
    options: PfSolverOptions,
    reference_slip: bool,
    out: *mut *mut PfReport,
) -> PfStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let study: Study = string_arg(study, "study")?.parse()?;
        let family: Family = string_arg(family, "family")?.parse()?;
        if levels.is_null() {
            return Err(null("levels"));
        }
        let levels = std::slice::from_raw_parts(levels, n_levels).to_vec();
        let mut config = StudyConfig::new(study, family, levels);
        config.solver = newton_options(&options)?;
        if reference_slip {
            config.slip_profile = SlipProfile::Elliptic;
            config.plane_strain_compliance = true;
        }
        let report = run_study(&config)?;
        *out = Box::into_raw(Box::new(PfReport {
            report,
            tol: config.solver.tol,
        }));
        Ok(())
    })
}

/// # Safety
/// `report` must come from this library; `rows` and `columns` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pf_report_shape(report: *const PfReport, rows: *mut usize, columns: *mut usize) -> PfStatus {
    guard(|| {
        let t = &report.as_ref().ok_or_else(|| null("report"))?.report.table;
        *out_ptr(rows, "rows")? = t.rows.len();
        *out_ptr(columns, "columns")? = t.columns.len();
        Ok(())
    })
}

/// Copies the name of error column `column` like [`pf_last_error_message`]
/// and returns its length, or 0 when out of range.
///
/// # Safety
/// `report` must come from this library; `buf` null or `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn pf_report_column_name(
    report: *const PfReport,
    column: usize,
    buf: *mut c_char,
    len: usize,
) -> usize {
    let Some(r) = report.as_ref() else { return 0 };
    let Some(name) = r.report.table.columns.get(column) else {
        return 0;
    };
    if !buf.is_null() && len > 0 {
        let n = name.len().min(len - 1);
        std::ptr::copy_nonoverlapping(name.as_ptr(), buf.cast::<u8>(), n);
        *buf.add(n) = 0;
    }
    name.len()
}

/// Mesh size and error of `column` on level `row`.
///
/// # Safety
/// `report` must come from this library; `h` and `value` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pf_report_value(
    report: *const PfReport,
    row: usize,
    column: usize,
    h: *mut f64,
    value: *mut f64,
) -> PfStatus {
    guard(|| {
        let t = &report.as_ref().ok_or_else(|| null("report"))?.report.table;
        let r = t
            .rows
            .get(row)
            .ok_or_else(|| PfStatusError(PfStatus::OutOfRange, format!("row {row}")))?;
        let v = r
            .values
            .get(column)
            .ok_or_else(|| PfStatusError(PfStatus::OutOfRange, format!("column {column}")))?;
        *out_ptr(h, "h")? = r.h;
        *out_ptr(value, "value")? = *v;
        Ok(())
    })
}

/// Number of failed checks of the study, written to `failed`.
///
/// # Safety
/// `report` must come from this library and `failed` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pf_report_failed_checks(report: *const PfReport, failed: *mut usize) -> PfStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        let checks = study_checks(&r.report, r.tol);
        *out_ptr(failed, "failed")? = checks.iter().filter(|c| !c.passed).count();
        Ok(())
    })
}

/// # Safety
/// `report` must come from this library and `path` be NUL terminated.
#[no_mangle]
pub unsafe extern "C" fn pf_report_write_csv(report: *const PfReport, path: *const c_char) -> PfStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        let f = std::fs::File::create(string_arg(path, "path")?).map_err(Error::from)?;
        r.report.write_csv(f)?;
        Ok(())
    })
}

/// Releases a report; null is ignored.
///
/// # Safety
/// `report` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pf_report_free(report: *mut PfReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
