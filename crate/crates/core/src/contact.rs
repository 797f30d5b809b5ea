//! Semismooth Newton solver for the projection form of the Tresca contact
//! conditions.

use serde::{Deserialize, Serialize};

use crate::assembly::SaddleSystem;
use crate::dofs::{project_cone_vec, MultiplierVector};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::sparse::{dot, norm, Cholesky, Csr, SparseLu};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContactStatus {
    Open,
    Stick,
    Slip,
}

/// Status from the projection argument `ξ = λ + β[[u]]`.
pub fn face_status(xi_n: f64, xi_t: f64, g: f64) -> ContactStatus {
    if xi_n <= 0.0 {
        ContactStatus::Open
    } else if xi_t > g {
        ContactStatus::Slip
    } else {
        ContactStatus::Stick
    }
}

/// Relative residual below which no polishing step is taken.
const POLISH_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub linesearch: bool,
    /// Overrides the face-wise β when set.
    pub beta: Option<f64>,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100,
            linesearch: false,
            beta: None,
        }
    }
}

/// Momentum and (area-scaled) contact residuals.
#[derive(Debug, Clone)]
pub struct Residual {
    pub momentum: Vec<f64>,
    pub contact: Vec<Vec3>,
}

impl Residual {
    pub fn contact_norm(&self) -> f64 {
        self.contact.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt()
    }
}

fn split(x: Vec3, n: Vec3) -> (f64, Vec3) {
    let xn = x.dot(&n);
    (xn, x - n * xn)
}

fn projection_argument(sys: &SaddleSystem, j: usize, lambda: Vec3, jump: Vec3) -> Vec3 {
    let n = sys.normals[j];
    let (jn, jt) = split(jump, n);
    lambda + n * (sys.beta_n[j] * jn) + jt * sys.beta_t[j]
}

fn flat(dim: usize, v: &[Vec3]) -> Vec<f64> {
    v.iter().flat_map(|x| x.iter().take(dim).copied().collect::<Vec<_>>()).collect()
}

/// `r_u = A u + Bᵀλ − f` and `r_λ = |σ|(λ − P_C(λ + β[[u]]))`.
pub fn residual(sys: &SaddleSystem, u: &[f64], lambda: &[Vec3]) -> Residual {
    let mut momentum = sys.a.free.matvec(u);
    let bt = sys.b.free.tmatvec(&flat(sys.dim, lambda));
    let rhs = sys.rhs();
    for i in 0..momentum.len() {
        momentum[i] += bt[i] - rhs[i];
    }
    let jumps = sys.jumps(u);
    let contact = (0..sys.n_faces())
        .map(|j| {
            let xi = projection_argument(sys, j, lambda[j], jumps[j]);
            (lambda[j] - project_cone_vec(xi, sys.normals[j], sys.g[j])) * sys.areas[j]
        })
        .collect();
    Residual { momentum, contact }
}

pub fn statuses(sys: &SaddleSystem, u: &[f64], lambda: &[Vec3]) -> Vec<ContactStatus> {
    let jumps = sys.jumps(u);
    (0..sys.n_faces())
        .map(|j| {
            let xi = projection_argument(sys, j, lambda[j], jumps[j]);
            let (xn, xt) = split(xi, sys.normals[j]);
            face_status(xn, xt.norm(), sys.g[j])
        })
        .collect()
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IterationRecord {
    pub momentum: f64,
    pub contact: f64,
    pub open: usize,
    pub stick: usize,
    pub slip: usize,
    pub step: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LinearStats {
    pub solves: usize,
    pub reduced_dim: usize,
    pub max_relative_residual: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    /// `‖r_u‖ / ‖f‖`
    pub momentum_residual: f64,
    /// `‖r_λ‖ / ‖f‖`
    pub contact_residual: f64,
    pub history: Vec<IterationRecord>,
    pub linear: LinearStats,
}

#[derive(Debug, Clone)]
pub struct ContactSolution {
    /// Free displacement unknowns.
    pub u: Vec<f64>,
    pub lambda: MultiplierVector,
    pub status: Vec<ContactStatus>,
    pub report: SolveReport,
}

/// Per-face generalized derivative of the projection in an orthonormal frame
/// `q` (normal first). `delta[k]` is the derivative along `q[k]`, `beta[k]`
/// the matching β and `f[k]` the unscaled residual component.
struct FaceLinearisation {
    q: [Vec3; 3],
    delta: [f64; 3],
    beta: [f64; 3],
    f: [f64; 3],
}

/// Directions with `1 − δ` below this are treated as exact constraints.
const CONSTRAINT_GAP: f64 = 1e-9;

fn tangent_frame(n: Vec3, hint: Vec3, dim: usize) -> (Vec3, Vec3) {
    if dim == 2 {
        return (Vec3::new(-n.y, n.x, 0.0), Vec3::zeros());
    }
    let t1 = if hint.norm() > 0.0 {
        hint.normalize()
    } else {
        let a = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        (a - n * a.dot(&n)).normalize()
    };
    (t1, n.cross(&t1))
}

fn linearise(sys: &SaddleSystem, j: usize, lambda: Vec3, jump: Vec3) -> FaceLinearisation {
    let n = sys.normals[j];
    let g = sys.g[j];
    let xi = projection_argument(sys, j, lambda, jump);
    let (xn, xt) = split(xi, n);
    let r = lambda - project_cone_vec(xi, n, g);
    let xt_norm = xt.norm();
    let slip = xt_norm > g;
    let (t1, t2) = tangent_frame(n, if slip { xt } else { Vec3::zeros() }, sys.dim);
    let q = [n, t1, t2];
    let dn = if xn > 0.0 { 1.0 } else { 0.0 };
    let (d1, d2) = if g == 0.0 {
        (0.0, 0.0)
    } else if slip {
        (0.0, g / xt_norm)
    } else {
        (1.0, 1.0)
    };
    FaceLinearisation {
        q,
        delta: [dn, d1, d2],
        beta: [sys.beta_n[j], sys.beta_t[j], sys.beta_t[j]],
        f: [r.dot(&q[0]), r.dot(&q[1]), r.dot(&q[2])],
    }
}

/// Rows of `B` for one face, split into the face bubble and the rest.
struct FaceRows {
    /// `rows[c]` = sparse row `j·d + c` without bubble columns.
    rows: Vec<Vec<(usize, f64)>>,
}

fn face_rows(sys: &SaddleSystem, j: usize) -> FaceRows {
    let d = sys.dim;
    let bub = &sys.bubbles[j][..d];
    FaceRows {
        rows: (0..d)
            .map(|c| sys.b.free.row(j * d + c).filter(|(col, _)| !bub.contains(col)).collect())
            .collect(),
    }
}

/// Sparse row `q·B_j` over all free columns (bubble included).
fn directional_row(sys: &SaddleSystem, j: usize, fr: &FaceRows, q: &Vec3) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::new();
    for c in 0..sys.dim {
        for &(col, v) in &fr.rows[c] {
            out.push((col, q[c] * v));
        }
        out.push((sys.bubbles[j][c], q[c] * sys.areas[j]));
    }
    out
}

struct Step {
    du: Vec<f64>,
    dlambda: Vec<Vec3>,
    reduced_dim: usize,
    relative_residual: f64,
}

/// Newton increment through the reduced SPD system.
fn reduced_step(sys: &SaddleSystem, res: &Residual, lin: &[FaceLinearisation]) -> Result<Step> {
    let d = sys.dim;
    let n = sys.n_free();
    let nf = sys.n_faces();
    let frs: Vec<FaceRows> = (0..nf).map(|j| face_rows(sys, j)).collect();

    // Right-hand side and penalty terms.
    let mut rhs: Vec<f64> = res.momentum.iter().map(|x| -x).collect();
    let mut penalty = Vec::new();
    for j in 0..nf {
        let fl = &lin[j];
        for k in 0..d {
            let delta = fl.delta[k];
            if 1.0 - delta <= CONSTRAINT_GAP {
                continue;
            }
            let row = directional_row(sys, j, &frs[j], &fl.q[k]);
            let fk = fl.f[k] / (1.0 - delta);
            for &(col, v) in &row {
                rhs[col] += v * fk;
            }
            if delta > 0.0 {
                let c = fl.beta[k] * delta / (1.0 - delta) / sys.areas[j];
                for &(r, vr) in &row {
                    for &(cc, vc) in &row {
                        penalty.push((r, cc, c * vr * vc));
                    }
                }
            }
        }
    }
    let k_mat = if penalty.is_empty() {
        sys.a.free.clone()
    } else {
        sys.a.free.add(1.0, &Csr::from_triplets(n, n, penalty), 1.0)
    };

    // du = T z + t0, eliminating constrained bubble directions.
    let mut is_bubble = vec![false; n];
    for j in 0..nf {
        for c in 0..d {
            is_bubble[sys.bubbles[j][c]] = true;
        }
    }
    let mut zcol = vec![usize::MAX; n];
    let mut nz = 0;
    for i in 0..n {
        if !is_bubble[i] {
            zcol[i] = nz;
            nz += 1;
        }
    }
    let mut t_trips = Vec::new();
    for i in 0..n {
        if !is_bubble[i] {
            t_trips.push((i, zcol[i], 1.0));
        }
    }
    let mut t0 = vec![0.0; n];
    for j in 0..nf {
        let fl = &lin[j];
        for k in 0..d {
            let q = fl.q[k];
            if 1.0 - fl.delta[k] <= CONSTRAINT_GAP {
                // Bubble component along q fixed by the nodal jump.
                let area = sys.areas[j];
                for c in 0..d {
                    let brow = sys.bubbles[j][c];
                    t0[brow] += q[c] * fl.f[k] / fl.beta[k];
                    for cp in 0..d {
                        for &(col, v) in &frs[j].rows[cp] {
                            t_trips.push((brow, zcol[col], -q[c] * q[cp] * v / area));
                        }
                    }
                }
            } else {
                for c in 0..d {
                    t_trips.push((sys.bubbles[j][c], nz, q[c]));
                }
                nz += 1;
            }
        }
    }
    let clock = std::time::Instant::now();
    let t = Csr::from_triplets(n, nz, t_trips);
    let tt = t.transpose();
    let m = tt.matmul(&k_mat.matmul(&t));
    let mut r0 = rhs.clone();
    k_mat.matvec_add(&t0, -1.0, &mut r0);
    let rz = tt.matvec(&r0);
    let z = match Cholesky::new(&m).and_then(|ch| ch.solve_checked(&rz, 1e-10)) {
        Ok(z) => z,
        Err(_) => {
            log::warn!("reduced Newton matrix not SPD, falling back to LU");
            SparseLu::new(&m)?.solve_checked(&rz, 1e-10)?
        }
    };
    log::debug!("reduced system of {} unknowns solved in {:.2}s", m.nrows, clock.elapsed().as_secs_f64());
    let mut mz = m.matvec(&z);
    mz.iter_mut().zip(&rz).for_each(|(a, b)| *a -= b);
    let relative_residual = norm(&mz) / norm(&rz).max(f64::MIN_POSITIVE);
    let mut du = t.matvec(&z);
    du.iter_mut().zip(&t0).for_each(|(a, b)| *a += b);

    // Multiplier increments.
    let mut rem = rhs;
    k_mat.matvec_add(&du, -1.0, &mut rem);
    let mut bdu = sys.b.free.matvec(&du);
    for j in 0..nf {
        for c in 0..d {
            bdu[j * d + c] /= sys.areas[j];
        }
    }
    let dlambda = (0..nf)
        .map(|j| {
            let fl = &lin[j];
            let mut dj = Vec3::zeros();
            let mut rb = Vec3::zeros();
            for c in 0..d {
                dj[c] = bdu[j * d + c];
                rb[c] = rem[sys.bubbles[j][c]];
            }
            let mut out = Vec3::zeros();
            for k in 0..d {
                let q = fl.q[k];
                let delta = fl.delta[k];
                let val = if 1.0 - delta <= CONSTRAINT_GAP {
                    q.dot(&rb) / sys.areas[j]
                } else {
                    (fl.beta[k] * delta * q.dot(&dj) - fl.f[k]) / (1.0 - delta)
                };
                out += q * val;
            }
            out
        })
        .collect();
    Ok(Step {
        du,
        dlambda,
        reduced_dim: m.nrows,
        relative_residual,
    })
}

/// Full generalized Jacobian `[[A, Bᵀ], [J_u, J_λ]]` and the Newton right-hand
/// side, with contact rows scaled by `|σ|`.
pub fn newton_jacobian(sys: &SaddleSystem, u: &[f64], lambda: &[Vec3]) -> (Csr, Vec<f64>) {
    let d = sys.dim;
    let n = sys.n_free();
    let nf = sys.n_faces();
    let res = residual(sys, u, lambda);
    let jumps = sys.jumps(u);
    let mut trips: Vec<(usize, usize, f64)> = sys.a.free.triplets().collect();
    for (r, c, v) in sys.b.free.triplets() {
        trips.push((c, n + r, v));
    }
    let mut rhs: Vec<f64> = res.momentum.iter().map(|x| -x).collect();
    rhs.resize(n + d * nf, 0.0);
    for j in 0..nf {
        let fl = linearise(sys, j, lambda[j], jumps[j]);
        let area = sys.areas[j];
        // Row block: area * [(I - D) dλ - D β d[[u]]] = -area * F.
        let mut jl = nalgebra::Matrix3::zeros();
        let mut ju = nalgebra::Matrix3::zeros();
        for k in 0..d {
            let q = fl.q[k];
            jl += q * q.transpose() * (1.0 - fl.delta[k]);
            ju += q * q.transpose() * (-fl.delta[k] * fl.beta[k]);
        }
        for a in 0..d {
            for b in 0..d {
                trips.push((n + j * d + a, n + j * d + b, area * jl[(a, b)]));
                // d[[u]]_b = (B du)_b / area
                for (col, v) in sys.b.free.row(j * d + b) {
                    trips.push((n + j * d + a, col, ju[(a, b)] * v));
                }
            }
            rhs[n + j * d + a] = -res.contact[j][a];
        }
    }
    (Csr::from_triplets(n + d * nf, n + d * nf, trips), rhs)
}

/// Direct sparse solve with a relative residual check.
pub fn linear_solve(m: &Csr, rhs: &[f64]) -> Result<Vec<f64>> {
    SparseLu::new(m)?.solve_checked(rhs, 1e-10)
}

pub fn semismooth_newton(
    sys: &SaddleSystem,
    opts: &NewtonOptions,
    initial: Option<(Vec<f64>, Vec<Vec3>)>,
) -> Result<ContactSolution> {
    let mut sys_local;
    let sys = if let Some(beta) = opts.beta {
        sys_local = sys.clone();
        sys_local.set_beta(beta);
        &sys_local
    } else {
        sys
    };
    let nf = sys.n_faces();
    let (mut u, mut lambda) = initial.unwrap_or_else(|| (vec![0.0; sys.n_free()], vec![Vec3::zeros(); nf]));
    let scale = {
        let r = norm(&sys.rhs());
        if r > 0.0 {
            r
        } else {
            1.0
        }
    };
    let measure = |res: &Residual| (norm(&res.momentum) / scale, res.contact_norm() / scale);
    let merit = |r: &Residual| {
        let (a, b) = measure(r);
        a * a + b * b
    };
    let mut report = SolveReport::default();
    let mut res = residual(sys, &u, &lambda);
    let mut polished = false;
    for it in 0..=opts.max_iter {
        let (rm, rc) = measure(&res);
        let st = statuses(sys, &u, &lambda);
        let mut rec = IterationRecord {
            momentum: rm,
            contact: rc,
            ..Default::default()
        };
        for s in &st {
            match s {
                ContactStatus::Open => rec.open += 1,
                ContactStatus::Stick => rec.stick += 1,
                ContactStatus::Slip => rec.slip += 1,
            }
        }
        report.momentum_residual = rm;
        report.contact_residual = rc;
        report.iterations = it;
        log::debug!(
            "newton {it}: momentum {rm:.3e} contact {rc:.3e} open {} stick {} slip {}",
            rec.open,
            rec.stick,
            rec.slip
        );
        if rm.max(rc) <= opts.tol {
            // One extra step settles faces whose state flipped on the last
            // iteration; kept only if it lowers the residual.
            if !polished && rm.max(rc) > POLISH_FLOOR && it < opts.max_iter {
                polished = true;
                let jumps = sys.jumps(&u);
                let lin: Vec<FaceLinearisation> = (0..nf).map(|j| linearise(sys, j, lambda[j], jumps[j])).collect();
                if let Ok(step) = reduced_step(sys, &res, &lin) {
                    report.linear.solves += 1;
                    let un: Vec<f64> = u.iter().zip(&step.du).map(|(a, b)| a + b).collect();
                    let ln: Vec<Vec3> = lambda.iter().zip(&step.dlambda).map(|(a, b)| a + b).collect();
                    let rn = residual(sys, &un, &ln);
                    if merit(&rn) < merit(&res) {
                        u = un;
                        lambda = ln;
                        res = rn;
                    }
                }
                report.history.push(rec);
                continue;
            }
            report.history.push(rec);
            report.converged = true;
            break;
        }
        if it == opts.max_iter {
            report.history.push(rec);
            break;
        }
        let jumps = sys.jumps(&u);
        let lin: Vec<FaceLinearisation> = (0..nf).map(|j| linearise(sys, j, lambda[j], jumps[j])).collect();
        let step = reduced_step(sys, &res, &lin)?;
        report.linear.solves += 1;
        report.linear.reduced_dim = step.reduced_dim;
        report.linear.max_relative_residual = report.linear.max_relative_residual.max(step.relative_residual);
        let m0 = merit(&res);
        let mut t = 1.0;
        loop {
            let un: Vec<f64> = u.iter().zip(&step.du).map(|(a, b)| a + t * b).collect();
            let ln: Vec<Vec3> = lambda.iter().zip(&step.dlambda).map(|(a, b)| a + b * t).collect();
            let rn = residual(sys, &un, &ln);
            if !opts.linesearch || merit(&rn) < (1.0 - 1e-4 * t) * m0 || t < 1e-4 {
                u = un;
                lambda = ln;
                res = rn;
                break;
            }
            t *= 0.5;
        }
        rec.step = t;
        report.history.push(rec);
    }
    if !u.iter().all(|x| x.is_finite()) {
        return Err(Error::Singular("non-finite Newton iterate".into()));
    }
    let status = statuses(sys, &u, &lambda);
    Ok(ContactSolution {
        u,
        lambda: MultiplierVector {
            values: lambda,
            normals: sys.normals.clone(),
        },
        status,
        report,
    })
}

/// Largest face-wise violations of the Tresca conditions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub negative_pressure: f64,
    pub interpenetration: f64,
    pub normal_complementarity: f64,
    pub friction_excess: f64,
    pub slip_alignment: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        [
            self.negative_pressure,
            self.interpenetration,
            self.normal_complementarity,
            self.friction_excess,
            self.slip_alignment,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn check_kkt(jumps: &[Vec3], lambda: &MultiplierVector, g: &[f64]) -> KktReport {
    let mut r = KktReport::default();
    for j in 0..jumps.len() {
        let n = lambda.normals[j];
        let (ln, lt) = split(lambda.values[j], n);
        let (un, ut) = split(jumps[j], n);
        r.negative_pressure = r.negative_pressure.max((-ln).max(0.0));
        r.interpenetration = r.interpenetration.max(un.max(0.0));
        r.normal_complementarity = r.normal_complementarity.max((ln * un).abs());
        r.friction_excess = r.friction_excess.max((lt.norm() - g[j]).max(0.0));
        r.slip_alignment = r.slip_alignment.max((lt.dot(&ut) - g[j] * ut.norm()).abs());
    }
    r
}

/// Energy-type check used in tests: `uᵀ A u`.
pub fn energy(sys: &SaddleSystem, u: &[f64]) -> f64 {
    dot(u, &sys.a.free.matvec(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{Loading, Material};
    use crate::dofs::DirichletSpec;
    use crate::geometry::Point;
    use crate::mesh::generate::cartesian_3d;
    use crate::mesh::FracturePlane;
    use crate::reconstruction::Discretization;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fractured_block(n: usize) -> Discretization {
        let lo = Point::new(-1.0, -1.0, -1.0);
        let hi = Point::new(1.0, 1.0, 1.0);
        let plane = FracturePlane::polygon(
            &[
                Point::new(0.0, -1.0, -1.0),
                Point::new(0.0, 1.0, -1.0),
                Point::new(0.0, 1.0, 1.0),
                Point::new(0.0, -1.0, 1.0),
            ],
            Some(Vec3::x()),
        );
        let m = cartesian_3d([n, n, n], lo, hi).tag_fracture(&[plane]).unwrap();
        Discretization::new(
            m,
            &DirichletSpec {
                tags: vec!["xmin".into(), "xmax".into()],
                ..Default::default()
            },
        )
        .unwrap()
    }

    /// Clamped at x = -1, displacement `right` imposed at x = +1.
    fn block_system(disc: &Discretization, right: Vec3, g: f64) -> SaddleSystem {
        let mut v = disc.dofs.zeros();
        disc.dofs.prescribe(&mut v, |b| {
            if disc.mesh.vertices[b.vertex].x > 0.0 {
                right
            } else {
                Vec3::zeros()
            }
        });
        let mat = Material::uniform(&disc.mesh, 1.0, 1.0);
        let nf = disc.mesh.fracture_faces.len();
        SaddleSystem::assemble(disc, &mat, &Loading::default(), v.fixed, vec![g; nf])
    }

    #[test]
    fn pulling_opens_everything() {
        let disc = fractured_block(2);
        // n⁺ = +x points out of the plus cell, so the plus side is x < 0.
        let sys = block_system(&disc, Vec3::new(0.1, 0.0, 0.0), 0.0);
        let sol = semismooth_newton(&sys, &NewtonOptions::default(), None).unwrap();
        assert!(sol.report.converged);
        assert!(sol.status.iter().all(|s| *s == ContactStatus::Open));
        assert!(sol.lambda.values.iter().all(|l| l.norm() < 1e-12));
        let jumps = sys.jumps(&sol.u);
        assert!(jumps.iter().all(|j| j.dot(&Vec3::x()) < 0.0));
    }

    #[test]
    fn compression_closes_and_shear_slips() {
        let disc = fractured_block(2);
        let sys = block_system(&disc, Vec3::new(-0.1, 0.05, 0.0), 0.01);
        let sol = semismooth_newton(&sys, &NewtonOptions::default(), None).unwrap();
        assert!(sol.report.converged, "{:?}", sol.report);
        assert!(sol.status.iter().all(|s| *s == ContactStatus::Slip), "{:?}", sol.status);
        let jumps = sys.jumps(&sol.u);
        let kkt = check_kkt(&jumps, &sol.lambda, &sys.g);
        assert!(kkt.max() < 1e-9, "{kkt:?}");
        for l in &sol.lambda.values {
            assert!(l.x > 0.0);
            assert!((l.yz().norm() - 0.01).abs() < 1e-9);
        }
        // Small shear sticks.
        let sys = block_system(&disc, Vec3::new(-0.1, 0.001, 0.0), 1.0);
        let sol = semismooth_newton(&sys, &NewtonOptions::default(), None).unwrap();
        assert!(sol.report.converged);
        assert!(sol.status.iter().all(|s| *s == ContactStatus::Stick));
        assert!(sys.jumps(&sol.u).iter().all(|j| j.norm() < 1e-10));
    }

    #[test]
    fn residual_examples() {
        let disc = fractured_block(2);
        let sys = block_system(&disc, Vec3::zeros(), 1.0);
        let u = vec![0.0; sys.n_free()];
        // Feasible λ and zero jump give a zero contact residual.
        let lam: Vec<Vec3> = (0..sys.n_faces()).map(|_| Vec3::new(2.0, 0.3, -0.4)).collect();
        let r = residual(&sys, &u, &lam);
        assert!(r.contact_norm() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u: Vec<f64> = (0..sys.n_free()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lam: Vec<Vec3> = (0..sys.n_faces())
            .map(|_| Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
            .collect();
        let r = residual(&sys, &u, &lam);
        let jumps = sys.jumps(&u);
        for j in 0..sys.n_faces() {
            // Brute force in coordinates, with n = e_x.
            let xi = lam[j] + jumps[j] * sys.beta_n[j];
            let pn = xi.x.max(0.0);
            let t = Vec3::new(0.0, xi.y, xi.z);
            let pt = if t.norm() > 1.0 { t / t.norm() } else { t };
            let expect = (lam[j] - Vec3::new(pn, pt.y, pt.z)) * sys.areas[j];
            assert!((r.contact[j] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn reduced_step_matches_full_jacobian() {
        let disc = fractured_block(2);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for g in [0.0, 0.05, 10.0] {
            let sys = block_system(&disc, Vec3::new(-0.05, 0.02, 0.01), g);
            let u: Vec<f64> = (0..sys.n_free()).map(|_| rng.random_range(-0.05..0.05)).collect();
            let lam: Vec<Vec3> = (0..sys.n_faces())
                .map(|_| Vec3::new(rng.random_range(-0.2..1.0), rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2)))
                .collect();
            let res = residual(&sys, &u, &lam);
            let jumps = sys.jumps(&u);
            let lin: Vec<FaceLinearisation> = (0..sys.n_faces()).map(|j| linearise(&sys, j, lam[j], jumps[j])).collect();
            let step = reduced_step(&sys, &res, &lin).unwrap();
            let (jac, rhs) = newton_jacobian(&sys, &u, &lam);
            let full = linear_solve(&jac, &rhs).unwrap();
            let n = sys.n_free();
            let scale = norm(&full);
            for i in 0..n {
                assert!((full[i] - step.du[i]).abs() < 1e-8 * scale, "g={g} du[{i}]");
            }
            for j in 0..sys.n_faces() {
                for c in 0..3 {
                    assert!((full[n + 3 * j + c] - step.dlambda[j][c]).abs() < 1e-8 * scale, "g={g} dλ");
                }
            }
        }
    }

    #[test]
    fn beta_does_not_change_the_solution() {
        let disc = fractured_block(2);
        let sys = block_system(&disc, Vec3::new(-0.1, 0.05, 0.02), 0.02);
        let tol = 1e-11;
        let a = semismooth_newton(
            &sys,
            &NewtonOptions {
                tol,
                beta: Some(1.0),
                ..Default::default()
            },
            None,
        )
        .unwrap();
        let b = semismooth_newton(&sys, &NewtonOptions { tol, ..Default::default() }, None).unwrap();
        assert!(a.report.converged && b.report.converged);
        for (x, y) in a.u.iter().zip(&b.u) {
            assert!((x - y).abs() < 1e-8);
        }
        for (x, y) in a.lambda.values.iter().zip(&b.lambda.values) {
            assert!((x - y).norm() < 1e-8);
        }
    }

    #[test]
    fn kkt_examples() {
        let normals = vec![Vec3::x()];
        let open = MultiplierVector {
            values: vec![Vec3::zeros()],
            normals: normals.clone(),
        };
        let r = check_kkt(&[Vec3::new(-0.3, 0.0, 0.0)], &open, &[1.0]);
        assert_eq!(r.normal_complementarity, 0.0);
        assert_eq!(r.max(), 0.0);
        let bad = MultiplierVector {
            values: vec![Vec3::new(-1.0, 0.0, 0.0)],
            normals,
        };
        let r = check_kkt(&[Vec3::zeros()], &bad, &[1.0]);
        assert_eq!(r.negative_pressure, 1.0);
    }

    #[test]
    fn linear_solve_examples() {
        let id = Csr::identity(3);
        assert_eq!(linear_solve(&id, &[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        let m = Csr::from_triplets(2, 2, vec![(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0)]);
        let x = linear_solve(&m, &[1.0, 1.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn status_partition() {
        assert_eq!(face_status(-1.0, 5.0, 1.0), ContactStatus::Open);
        assert_eq!(face_status(0.0, 0.0, 1.0), ContactStatus::Open);
        assert_eq!(face_status(1.0, 2.0, 1.0), ContactStatus::Slip);
        assert_eq!(face_status(1.0, 1.0, 1.0), ContactStatus::Stick);
    }
}
