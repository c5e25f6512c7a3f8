//! Symmetric positive definite solvers: banded Cholesky and Jacobi-preconditioned CG.

use crate::error::{PlateError, Result};
use crate::sparse::CsrMatrix;

/// Banded Cholesky factor `A = L L^T`. Row `i` of `L` is stored for columns
/// `i - bw ..= i`.
#[derive(Clone, Debug)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(PlateError::DimensionMismatch("Cholesky needs a square matrix".into()));
        }
        let bw = a.bandwidth();
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    l[i * w + (j + bw - i)] = v;
                }
            }
        }
        for i in 0..n {
            let i0 = i.saturating_sub(bw);
            for j in i0..=i {
                let k0 = i0.max(j.saturating_sub(bw));
                let mut s = l[i * w + (j + bw - i)];
                for k in k0..j {
                    s -= l[i * w + (k + bw - i)] * l[j * w + (k + bw - j)];
                }
                if j == i {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(PlateError::SolverFailure(format!(
                            "matrix not positive definite at pivot {i} ({s:e})"
                        )));
                    }
                    l[i * w + bw] = s.sqrt();
                } else {
                    l[i * w + (j + bw - i)] = s / l[j * w + bw];
                }
            }
        }
        Ok(BandedCholesky { n, bw, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let (bw, w) = (self.bw, self.bw + 1);
        for i in 0..self.n {
            let mut s = x[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[i * w + (k + bw - i)] * x[k];
            }
            x[i] = s / self.l[i * w + bw];
        }
        for i in (0..self.n).rev() {
            let mut s = x[i];
            for k in i + 1..(i + bw + 1).min(self.n) {
                s -= self.l[k * w + (i + bw - k)] * x[k];
            }
            x[i] = s / self.l[i * w + bw];
        }
    }
}

/// Jacobi-preconditioned conjugate gradients on an SPD matrix.
#[derive(Clone, Debug)]
pub struct Pcg {
    a: CsrMatrix,
    inv_diag: Vec<f64>,
    tol: f64,
    max_iter: usize,
}

impl Pcg {
    pub fn new(a: CsrMatrix, tol: f64, max_iter: usize) -> Result<Self> {
        let d = a.diagonal_entries();
        if d.iter().any(|&v| !(v > 0.0)) {
            return Err(PlateError::SolverFailure("non-positive diagonal".into()));
        }
        let inv_diag = d.iter().map(|v| 1.0 / v).collect();
        Ok(Pcg { a, inv_diag, tol, max_iter })
    }

    pub fn solve(&self, b: &[f64], x0: Option<&[f64]>) -> Result<Vec<f64>> {
        let n = b.len();
        let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
        let bnorm = dot(b, b).sqrt();
        if bnorm == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let ax = self.a.matvec(&x);
        let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let mut z: Vec<f64> = r.iter().zip(&self.inv_diag).map(|(a, b)| a * b).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        for it in 0..self.max_iter {
            let rnorm = dot(&r, &r).sqrt();
            if rnorm <= self.tol * bnorm {
                return Ok(x);
            }
            let ap = self.a.matvec(&p);
            let alpha = rz / dot(&p, &ap);
            if !alpha.is_finite() {
                return Err(PlateError::SolverFailure(format!("CG breakdown at iteration {it}")));
            }
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            for i in 0..n {
                z[i] = r[i] * self.inv_diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        let res = dot(&r, &r).sqrt() / bnorm;
        if res <= self.tol {
            Ok(x)
        } else {
            Err(PlateError::NoConvergence { iterations: self.max_iter, residual: res })
        }
    }
}

/// Solver handle for an SPD system, chosen by size.
#[derive(Clone, Debug)]
pub enum SpdSolver {
    Direct(BandedCholesky),
    Iterative(Pcg),
}

impl SpdSolver {
    pub fn new(a: CsrMatrix, direct_max_dofs: usize, tol: f64) -> Result<Self> {
        if a.nrows() <= direct_max_dofs {
            Ok(SpdSolver::Direct(BandedCholesky::factor(&a)?))
        } else {
            let max_iter = 20 * a.nrows() + 100;
            Ok(SpdSolver::Iterative(Pcg::new(a, tol, max_iter)?))
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            SpdSolver::Direct(c) => {
                let mut x = b.to_vec();
                c.solve_in_place(&mut x);
                Ok(x)
            }
            SpdSolver::Iterative(p) => p.solve(b, None),
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.5));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
            if i + 3 < n {
                t.push((i, i + 3, 0.1));
                t.push((i + 3, i, 0.1));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn cholesky_and_cg_agree() {
        let a = laplacian(40);
        let b: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).cos()).collect();
        let x1 = SpdSolver::new(a.clone(), 100, 1e-12).unwrap().solve(&b).unwrap();
        let x2 = SpdSolver::new(a.clone(), 10, 1e-13).unwrap().solve(&b).unwrap();
        let r = a.matvec(&x1);
        for i in 0..40 {
            assert!((r[i] - b[i]).abs() < 1e-12);
            assert!((x1[i] - x2[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn indefinite_is_rejected() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(BandedCholesky::factor(&a).is_err());
    }
}
