use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::AnalyticalSolution;
use crate::assembly::{assemble_coupling, assemble_form};
use crate::dofs::DisplacementVector;
use crate::geometry::{Mat3, Point, SimplexRule, Vec3};
use crate::reconstruction::{Discretization, FormCoefficients};
use crate::sparse::{dot, Cholesky, Csr};
use crate::{Error, Result};

/// Largest free-DOF count accepted by the dense estimators.
pub const DENSE_LIMIT: usize = 20_000;

/// Korn estimates switch from dense to Lanczos above this size.
const KORN_DENSE: usize = 3_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BubbleCoupling {
    Included,
    /// Bubble columns of `B` removed.
    Ablated,
}

/// Gram matrix of `‖·‖_{1,D}` on the free slots.
pub fn h1_gram(disc: &Discretization) -> Csr {
    assemble_form(disc, |_| FormCoefficients::h1()).free
}

fn factor_gram(n: &Csr) -> Result<Cholesky> {
    Cholesky::new(n).map_err(|_| Error::Singular("‖·‖_{1,D} Gram matrix; missing Dirichlet data?".into()))
}

/// Smallest `θ` with `A x = θ B x`, `B` symmetric positive definite.
pub fn dense_generalized_min(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let l = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("dense generalized eigenproblem".into()))?
        .unpack();
    let li = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("dense generalized eigenproblem".into()))?;
    let c = &li * a * li.transpose();
    let c = (&c + c.transpose()) * 0.5;
    Ok(SymmetricEigen::new(c).eigenvalues.min())
}

/// Discrete inf-sup constant between `‖·‖_{1,D}` and `‖·‖_{−½,D}`.
pub fn infsup_constant(disc: &Discretization, coupling: BubbleCoupling) -> Result<f64> {
    let mesh = &disc.mesh;
    if mesh.fracture_faces.is_empty() {
        return Err(Error::NoFracture);
    }
    let n_free = disc.dofs.n_free;
    if n_free > DENSE_LIMIT {
        return Err(Error::TooLarge {
            dofs: n_free,
            limit: DENSE_LIMIT,
        });
    }
    let d = disc.dim();
    let chol = factor_gram(&h1_gram(disc))?;
    let mut bt = assemble_coupling(disc).free.transpose().to_dense();
    if coupling == BubbleCoupling::Ablated {
        for bub in &disc.dofs.bubbles {
            for &i in &bub[..d] {
                bt.row_mut(i).fill(0.0);
            }
        }
    }
    let x = chol.solve_many(&bt);
    let s = bt.transpose() * x;
    let m = mesh.fracture_faces.len() * d;
    let scale: Vec<f64> = (0..m)
        .map(|r| {
            let f = &mesh.faces[mesh.fracture_faces[r / d].face];
            1.0 / (f.diameter * f.area).sqrt()
        })
        .collect();
    let c = DMatrix::from_fn(m, m, |i, j| s[(i, j)] * scale[i] * scale[j]);
    let c = (&c + c.transpose()) * 0.5;
    let theta = SymmetricEigen::new(c).eigenvalues.min();
    Ok(theta.max(0.0).sqrt())
}

/// Largest eigenvalue of `W x = μ N x` by Lanczos in the `N` inner product.
pub fn lanczos_max<W, S>(n: usize, apply_w: W, apply_n: impl Fn(&[f64]) -> Vec<f64>, solve_n: S, seed: u64) -> f64
where
    W: Fn(&[f64]) -> Vec<f64>,
    S: Fn(&[f64]) -> Vec<f64>,
{
    let max_iter = n.min(400);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nq = apply_n(&q);
    let s = dot(&q, &nq).sqrt();
    q.iter_mut().for_each(|v| *v /= s);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut nbasis: Vec<Vec<f64>> = Vec::new();
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut last = f64::NAN;
    for it in 0..max_iter {
        let wq = apply_w(&q);
        let a = dot(&wq, &q);
        let mut r = solve_n(&wq);
        alpha.push(a);
        basis.push(q.clone());
        nbasis.push(apply_n(&q));
        for _ in 0..2 {
            for (b, nb) in basis.iter().zip(&nbasis) {
                let c = dot(&r, nb);
                r.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let nr = apply_n(&r);
        let b = dot(&r, &nr).max(0.0).sqrt();
        let k = alpha.len();
        let t = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j || j + 1 == i {
                beta[i.min(j)]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let (imax, &top) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        let resid = b * eig.eigenvectors[(k - 1, imax)].abs();
        if b < 1e-14 || (it > 5 && resid < 1e-9 * top.abs().max(1e-300) && (top - last).abs() < 1e-12) {
            return top;
        }
        last = top;
        beta.push(b);
        q = r.iter().map(|v| v / b).collect();
    }
    last
}

/// Discrete Korn constant: smallest `θ` with `(E + S) x = θ N x`.
pub fn korn_constant(disc: &Discretization) -> Result<f64> {
    let n = h1_gram(disc);
    let k = assemble_form(disc, |_| FormCoefficients::korn()).free;
    let size = n.nrows;
    if size == 0 {
        return Err(Error::InvalidInput("no free unknowns".into()));
    }
    if size <= KORN_DENSE {
        return dense_generalized_min(&k.to_dense(), &n.to_dense());
    }
    // θ_min = 1 − μ_max with W = N − (E + S) the skew-gradient Gram.
    let w = n.add(1.0, &k, -1.0);
    let chol = factor_gram(&n)?;
    let mu = lanczos_max(size, |x| w.matvec(x), |x| n.matvec(x), |x| chol.solve(x), 11);
    Ok(1.0 - mu)
}

/// Dense reference for [`korn_constant`] regardless of size.
pub fn korn_constant_dense(disc: &Discretization) -> Result<f64> {
    let n = h1_gram(disc);
    if n.nrows > DENSE_LIMIT {
        return Err(Error::TooLarge {
            dofs: n.nrows,
            limit: DENSE_LIMIT,
        });
    }
    let k = assemble_form(disc, |_| FormCoefficients::korn()).free;
    dense_generalized_min(&k.to_dense(), &n.to_dense())
}

/// `C_D(u, v) = (‖∇u − ∇_D v‖² + S_D(v, v))^{1/2}`.
pub fn consistency_error(disc: &Discretization, sol: &dyn AnalyticalSolution, v: &DisplacementVector) -> f64 {
    let mesh = &disc.mesh;
    let rule = SimplexRule::conical(mesh.dim, 3);
    (0..mesh.cells.len())
        .into_par_iter()
        .map(|k| {
            let side = mesh.cells[k].centroid;
            let g = disc.cell_gradient(k, v);
            let mut acc = disc.stabilisation(k, v, v);
            for (verts, m) in mesh.cell_simplices(k) {
                for (x, w) in rule.map(&verts, m) {
                    acc += w * (sol.gradient(&x, &side) - g).norm_squared();
                }
            }
            acc
        })
        .sum::<f64>()
        .sqrt()
}

/// Dual norm of the discrete integration-by-parts defect of a stress field.
/// `stress(k, x)` and `div_stress(k, x)` are evaluated inside cell `k`; the
/// fracture traction uses the plus-side cell.
pub fn adjoint_consistency<S, D>(disc: &Discretization, stress: S, div_stress: D) -> Result<f64>
where
    S: Fn(usize, &Point) -> Mat3 + Sync,
    D: Fn(usize, &Point) -> Vec3 + Sync,
{
    let mesh = &disc.mesh;
    let d = disc.dim();
    let rule = SimplexRule::conical(d, 3);
    let mut r = vec![0.0; disc.dofs.n_free];
    let cells: Vec<(Mat3, Vec3)> = (0..mesh.cells.len())
        .into_par_iter()
        .map(|k| {
            let (mut s, mut f) = (Mat3::zeros(), Vec3::zeros());
            for (verts, m) in mesh.cell_simplices(k) {
                for (x, w) in rule.map(&verts, m) {
                    s += stress(k, &x) * w;
                    f += div_stress(k, &x) * w;
                }
            }
            (s, f)
        })
        .collect();
    for (k, (s, f)) in cells.iter().enumerate() {
        let op = &disc.ops.cells[k];
        for a in 0..op.n_local() {
            // ∫σ:∇v + ∫div σ·v̄_K for the shape (a, c).
            let val = s * op.grad[a] + f * op.mean[a];
            for c in 0..d {
                if let crate::dofs::Dof::Free(i) = disc.local_dof(k, a, c) {
                    r[i] += val[c];
                }
            }
        }
    }
    if !mesh.fracture_faces.is_empty() {
        let frule = SimplexRule::conical(d - 1, 4);
        let traction: Vec<Vec3> = mesh
            .fracture_faces
            .iter()
            .enumerate()
            .map(|(j, ff)| {
                let n = mesh.fracture_normal(j);
                let mut acc = Vec3::zeros();
                for (verts, m) in mesh.face_simplices(ff.face) {
                    for (x, w) in frule.map(&verts, m) {
                        acc += stress(ff.plus, &x) * n * w;
                    }
                }
                acc / mesh.faces[ff.face].area
            })
            .collect();
        let mut t = vec![0.0; d * traction.len()];
        for (j, tj) in traction.iter().enumerate() {
            for c in 0..d {
                t[j * d + c] = tj[c];
            }
        }
        let bt = assemble_coupling(disc).free.tmatvec(&t);
        r.iter_mut().zip(&bt).for_each(|(x, y)| *x -= y);
    }
    let chol = factor_gram(&h1_gram(disc))?;
    let z = chol.solve(&r);
    Ok(dot(&r, &z).max(0.0).sqrt())
}

/// [`adjoint_consistency`] of `σ(u)` for an exact solution.
pub fn adjoint_consistency_exact(disc: &Discretization, sol: &dyn AnalyticalSolution) -> Result<f64> {
    let mesh = &disc.mesh;
    adjoint_consistency(
        disc,
        |k, x| sol.stress(x, &mesh.cells[k].centroid),
        |k, x| -sol.body_force(x, &mesh.cells[k].centroid),
    )
}
