//! Compressed sparse row matrices and a thin bridge to faer's sparse direct
//! solvers.

use std::io::Write;

use faer::linalg::solvers::Solve;
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::perm::PermRef;
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, LltRef, SymbolicCholesky, SymmetricOrdering};
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat, Side};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Sums duplicate entries; the result does not depend on triplet order
    /// up to floating-point summation order within a row, which is fixed by a
    /// stable sort.
    pub fn from_triplets(nrows: usize, ncols: usize, mut trips: Vec<(usize, usize, f64)>) -> Self {
        trips.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0; nrows + 1];
        let mut indices = Vec::with_capacity(trips.len());
        let mut values: Vec<f64> = Vec::with_capacity(trips.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in trips {
            debug_assert!(i < nrows && j < ncols);
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn diagonal(d: &[f64]) -> Self {
        Self::from_triplets(d.len(), d.len(), d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect())
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(p) => self.values[r.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_add(x, 1.0, &mut y);
        y
    }

    /// `y += alpha * A x`
    pub fn matvec_add(&self, x: &[f64], alpha: f64, y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        for (i, yi) in y.iter_mut().enumerate().take(self.nrows) {
            let s: f64 = self.row(i).map(|(j, v)| v * x[j]).sum();
            *yi += alpha * s;
        }
    }

    /// `Aᵀ x`
    pub fn tmatvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                y[j] += v * x[i];
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.ncols, self.nrows, self.triplets().map(|(i, j, v)| (j, i, v)).collect())
    }

    /// `self * other`
    pub fn matmul(&self, other: &Csr) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut trips = Vec::new();
        let mut acc = vec![0.0; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut cols = Vec::new();
        for i in 0..self.nrows {
            cols.clear();
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        cols.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            for &j in &cols {
                trips.push((i, j, acc[j]));
            }
        }
        Self::from_triplets(self.nrows, other.ncols, trips)
    }

    /// `alpha * self + beta * other`
    pub fn add(&self, alpha: f64, other: &Csr, beta: f64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let trips = self
            .triplets()
            .map(|(i, j, v)| (i, j, alpha * v))
            .chain(other.triplets().map(|(i, j, v)| (i, j, beta * v)))
            .collect();
        Self::from_triplets(self.nrows, self.ncols, trips)
    }

    pub fn scale_rows(&self, d: &[f64]) -> Self {
        let mut m = self.clone();
        for i in 0..m.nrows {
            for p in m.indptr[i]..m.indptr[i + 1] {
                m.values[p] *= d[i];
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A - Aᵀ|`
    pub fn symmetry_defect(&self) -> f64 {
        self.add(1.0, &self.transpose(), -1.0).max_abs()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }

    /// Rows and columns restricted to the given index lists.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (new, &old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let mut trips = Vec::new();
        for (new_i, &i) in rows.iter().enumerate() {
            for (j, v) in self.row(i) {
                if col_map[j] != usize::MAX {
                    trips.push((new_i, col_map[j], v));
                }
            }
        }
        Self::from_triplets(rows.len(), cols.len(), trips)
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let trips: Vec<Triplet<usize, usize, f64>> = self.triplets().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trips)
            .map_err(|e| Error::Factorisation(format!("{e:?}")))
    }

    /// Coordinate text dump: one `row col value` line per stored entry.
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (i, j, v) in self.triplets() {
            writeln!(w, "{i} {j} {v:.17e}")?;
        }
        Ok(())
    }
}

/// METIS nested dissection of the adjacency graph of `a`, as forward and
/// inverse permutations. `None` if METIS fails.
fn nested_dissection(a: &Csr) -> Option<(Vec<usize>, Vec<usize>)> {
    let n = a.nrows;
    let mut xadj: Vec<metis_sys::idx_t> = Vec::with_capacity(n + 1);
    let mut adjncy: Vec<metis_sys::idx_t> = Vec::with_capacity(a.nnz());
    xadj.push(0);
    for i in 0..n {
        adjncy.extend(a.row(i).filter(|&(j, _)| j != i).map(|(j, _)| j as metis_sys::idx_t));
        xadj.push(adjncy.len().try_into().ok()?);
    }
    let mut nv: metis_sys::idx_t = n.try_into().ok()?;
    let mut options = [0 as metis_sys::idx_t; metis_sys::METIS_NOPTIONS as usize];
    let mut perm = vec![0 as metis_sys::idx_t; n];
    let mut iperm = vec![0 as metis_sys::idx_t; n];
    // SAFETY: all buffers are sized as METIS requires and outlive the calls.
    let status = unsafe {
        metis_sys::METIS_SetDefaultOptions(options.as_mut_ptr());
        metis_sys::METIS_NodeND(
            &mut nv,
            xadj.as_mut_ptr(),
            adjncy.as_mut_ptr(),
            std::ptr::null_mut(),
            options.as_mut_ptr(),
            perm.as_mut_ptr(),
            iperm.as_mut_ptr(),
        )
    };
    if status != metis_sys::rstatus_et_METIS_OK {
        log::warn!("METIS nested dissection failed ({status}), using AMD");
        return None;
    }
    Some((
        perm.into_iter().map(|p| p as usize).collect(),
        iperm.into_iter().map(|p| p as usize).collect(),
    ))
}

fn column(b: &[f64]) -> Mat<f64> {
    Mat::from_fn(b.len(), 1, |i, _| b[i])
}

fn columns(b: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(b.nrows(), b.ncols(), |i, j| b[(i, j)])
}

fn relative_residual(a: &Csr, x: &[f64], b: &[f64]) -> f64 {
    let mut r = a.matvec(x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri -= bi;
    }
    let nb = norm(b);
    if nb == 0.0 {
        norm(&r)
    } else {
        norm(&r) / nb
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Sparse Cholesky factorisation of a symmetric positive definite matrix,
/// ordered by nested dissection above [`ND_MIN_DIM`] unknowns.
pub struct Cholesky {
    a: Csr,
    symbolic: SymbolicCholesky<usize>,
    values: Vec<f64>,
}

/// Below this size the approximate minimum degree ordering is used.
pub const ND_MIN_DIM: usize = 2_000;

impl Cholesky {
    pub fn new(a: &Csr) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::Factorisation("matrix is not square".into()));
        }
        let fa = a.to_faer()?;
        let nd = if a.nrows >= ND_MIN_DIM { nested_dissection(a) } else { None };
        let ord = match &nd {
            Some((fwd, inv)) => SymmetricOrdering::Custom(PermRef::new_checked(fwd, inv, a.nrows)),
            None => SymmetricOrdering::Amd,
        };
        let symbolic = factorize_symbolic_cholesky(fa.symbolic(), Side::Lower, ord, Default::default())
            .map_err(|e| Error::Factorisation(format!("cholesky: {e:?}")))?;
        let mut values = vec![0.0; symbolic.len_val()];
        let par = faer::get_global_parallelism();
        let mut mem = MemBuffer::new(symbolic.factorize_numeric_llt_scratch::<f64>(par, Default::default()));
        symbolic
            .factorize_numeric_llt(
                &mut values,
                fa.as_ref(),
                Side::Lower,
                Default::default(),
                par,
                MemStack::new(&mut mem),
                Default::default(),
            )
            .map_err(|e| Error::Factorisation(format!("cholesky: {e:?}")))?;
        Ok(Self {
            a: a.clone(),
            symbolic,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows
    }

    /// Number of stored entries of the factor.
    pub fn factor_nnz(&self) -> usize {
        self.values.len()
    }

    fn solve_in_place(&self, mut rhs: Mat<f64>) -> Mat<f64> {
        let par = faer::get_global_parallelism();
        let mut mem = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(rhs.ncols(), par));
        LltRef::new(&self.symbolic, &self.values).solve_in_place_with_conj(
            Conj::No,
            rhs.as_mut(),
            par,
            MemStack::new(&mut mem),
        );
        rhs
    }

    /// Solves with a few steps of iterative refinement.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let x = self.solve_in_place(column(b));
        let mut x: Vec<f64> = (0..b.len()).map(|i| x[(i, 0)]).collect();
        for _ in 0..2 {
            let mut r = b.to_vec();
            self.a.matvec_add(&x, -1.0, &mut r);
            let d = self.solve_in_place(column(&r));
            for (i, xi) in x.iter_mut().enumerate() {
                *xi += d[(i, 0)];
            }
        }
        x
    }

    /// Solves for every column of `b` (no refinement).
    pub fn solve_many(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let x = self.solve_in_place(columns(b));
        DMatrix::from_fn(b.nrows(), b.ncols(), |i, j| x[(i, j)])
    }

    /// Solves and checks `‖Ax − b‖ ≤ tol ‖b‖`.
    pub fn solve_checked(&self, b: &[f64], tol: f64) -> Result<Vec<f64>> {
        let x = self.solve(b);
        let res = relative_residual(&self.a, &x, b);
        if !(res <= tol) {
            return Err(Error::LinearResidual { residual: res, tol });
        }
        Ok(x)
    }
}

/// Sparse LU factorisation for general square matrices.
pub struct SparseLu {
    a: Csr,
    lu: Lu<usize, f64>,
}

impl SparseLu {
    pub fn new(a: &Csr) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::Factorisation("matrix is not square".into()));
        }
        let lu = a
            .to_faer()?
            .sp_lu()
            .map_err(|e| Error::Factorisation(format!("lu: {e:?}")))?;
        Ok(Self { a: a.clone(), lu })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let x = self.lu.solve(&column(b));
        let mut x: Vec<f64> = (0..b.len()).map(|i| x[(i, 0)]).collect();
        for _ in 0..2 {
            let mut r = b.to_vec();
            self.a.matvec_add(&x, -1.0, &mut r);
            let d = self.lu.solve(&column(&r));
            for (i, xi) in x.iter_mut().enumerate() {
                *xi += d[(i, 0)];
            }
        }
        x
    }

    pub fn solve_checked(&self, b: &[f64], tol: f64) -> Result<Vec<f64>> {
        let x = self.solve(b);
        let res = relative_residual(&self.a, &x, b);
        if !(res <= tol) {
            return Err(Error::LinearResidual { residual: res, tol });
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sparse(n: usize, m: usize, density: f64, rng: &mut ChaCha8Rng) -> Csr {
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..m {
                if rng.random::<f64>() < density {
                    t.push((i, j, rng.random_range(-1.0..1.0)));
                }
            }
        }
        Csr::from_triplets(n, m, t)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = Csr::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 1, 2.0), (0, 0, 3.0)]);
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn products_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_sparse(7, 5, 0.4, &mut rng);
        let b = random_sparse(5, 6, 0.4, &mut rng);
        let c = a.matmul(&b).to_dense();
        assert!((c - a.to_dense() * b.to_dense()).abs().max() < 1e-14);
        assert_eq!(a.transpose().to_dense(), a.to_dense().transpose());
        let x: Vec<f64> = (0..5).map(|i| i as f64).collect();
        let y = a.matvec(&x);
        let yd = a.to_dense() * nalgebra::DVector::from_vec(x);
        assert!(y.iter().zip(yd.iter()).all(|(p, q)| (p - q).abs() < 1e-14));
        let z: Vec<f64> = (0..7).map(|i| 1.0 - i as f64).collect();
        let t = a.tmatvec(&z);
        let td = a.to_dense().transpose() * nalgebra::DVector::from_vec(z);
        assert!(t.iter().zip(td.iter()).all(|(p, q)| (p - q).abs() < 1e-14));
    }

    #[test]
    fn identity_system_returns_rhs() {
        let i = Csr::identity(5);
        let b = vec![1.0, -2.0, 3.0, 0.5, 7.0];
        assert_eq!(Cholesky::new(&i).unwrap().solve(&b), b);
        assert_eq!(SparseLu::new(&i).unwrap().solve(&b), b);
    }

    #[test]
    fn saddle_two_by_two() {
        let a = Csr::from_triplets(2, 2, vec![(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0)]);
        let x = SparseLu::new(&a).unwrap().solve_checked(&[1.0, 1.0], 1e-10).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn spd_and_bordered_systems_match_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 40;
        let r = random_sparse(n, n, 0.1, &mut rng);
        let spd = r.transpose().matmul(&r).add(1.0, &Csr::identity(n), 1.0);
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = Cholesky::new(&spd).unwrap().solve_checked(&b, 1e-10).unwrap();
        let xd = spd.to_dense().lu().solve(&nalgebra::DVector::from_vec(b.clone())).unwrap();
        assert!(x.iter().zip(xd.iter()).all(|(p, q)| (p - q).abs() < 1e-10));

        // [[S, Cᵀ], [C, 0]] with a full-rank border.
        let m = 8;
        let c = random_sparse(m, n, 0.3, &mut rng).add(1.0, &Csr::from_triplets(m, n, (0..m).map(|i| (i, i, 2.0)).collect()), 1.0);
        let mut t: Vec<_> = spd.triplets().collect();
        for (i, j, v) in c.triplets() {
            t.push((n + i, j, v));
            t.push((j, n + i, v));
        }
        let k = Csr::from_triplets(n + m, n + m, t);
        let b: Vec<f64> = (0..n + m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = SparseLu::new(&k).unwrap().solve_checked(&b, 1e-10).unwrap();
        let xd = k.to_dense().lu().solve(&nalgebra::DVector::from_vec(b)).unwrap();
        assert!(x.iter().zip(xd.iter()).all(|(p, q)| (p - q).abs() < 1e-9));
    }

    #[test]
    fn coordinate_dump() {
        let a = Csr::from_triplets(2, 3, vec![(0, 2, 1.5), (1, 0, -1.0)]);
        let mut buf = Vec::new();
        a.write_coordinate(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "2 3 2");
        assert!(lines[1].starts_with("0 2 1.5"));
    }
}
