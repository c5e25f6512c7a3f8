//! Compressed sparse row matrices with deterministic assembly.

use std::io::Write;

use crate::error::{PlateError, Result};
use crate::par::{self, Exec};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed
    /// in input order; explicit zeros are kept so sparsity follows the stencil.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for &(i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i},{j}) out of bounds");
            rows[i].push((j, v));
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for mut row in rows {
            // stable sort keeps duplicate summation order fixed
            row.sort_by_key(|e| e.0);
            let mut it = row.into_iter().peekable();
            while let Some((j, mut v)) = it.next() {
                while let Some(&(j2, v2)) = it.peek() {
                    if j2 != j {
                        break;
                    }
                    v += v2;
                    it.next();
                }
                indices.push(j);
                data.push(v);
            }
            indptr.push(indices.len());
        }
        CsrMatrix { nrows, ncols, indptr, indices, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        CsrMatrix {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: d.to_vec(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.data[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            out.extend(cols.iter().zip(vals).map(|(&j, &v)| (i, j, v)));
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            m[i][j] += v;
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    pub fn scale(&self, a: f64) -> Self {
        let mut m = self.clone();
        m.data.iter_mut().for_each(|v| *v *= a);
        m
    }

    /// Left multiplication by a diagonal matrix.
    pub fn scale_rows(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.nrows);
        let mut m = self.clone();
        for i in 0..m.nrows {
            for k in m.indptr[i]..m.indptr[i + 1] {
                m.data[k] *= d[i];
            }
        }
        m
    }

    /// `sum_k c_k A_k` over matrices of equal shape.
    pub fn linear_combination(terms: &[(f64, &CsrMatrix)]) -> Result<Self> {
        let (nr, nc) = match terms.first() {
            Some((_, m)) => (m.nrows, m.ncols),
            None => return Err(PlateError::DimensionMismatch("empty combination".into())),
        };
        let mut trip = Vec::new();
        for (c, m) in terms {
            if m.nrows != nr || m.ncols != nc {
                return Err(PlateError::DimensionMismatch(format!(
                    "{}x{} vs {}x{}",
                    m.nrows, m.ncols, nr, nc
                )));
            }
            trip.extend(m.triplets().into_iter().map(|(i, j, v)| (i, j, c * v)));
        }
        Ok(Self::from_triplets(nr, nc, &trip))
    }

    /// Kronecker product `self (x) other`.
    pub fn kron(&self, other: &CsrMatrix) -> Self {
        let nr = self.nrows * other.nrows;
        let nc = self.ncols * other.ncols;
        let mut trip = Vec::with_capacity(self.nnz() * other.nnz());
        for (i, j, a) in self.triplets() {
            for (k, l, b) in other.triplets() {
                trip.push((i * other.nrows + k, j * other.ncols + l, a * b));
            }
        }
        Self::from_triplets(nr, nc, &trip)
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &CsrMatrix) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(PlateError::DimensionMismatch(format!(
                "{}x{} * {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut trip = Vec::new();
        let mut acc = vec![0.0; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut touched = Vec::new();
        for i in 0..self.nrows {
            touched.clear();
            let (ac, av) = self.row(i);
            for (&k, &a) in ac.iter().zip(av) {
                let (bc, bv) = other.row(k);
                for (&j, &b) in bc.iter().zip(bv) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            trip.extend(touched.iter().map(|&j| (i, j, acc[j])));
        }
        Ok(Self::from_triplets(self.nrows, other.ncols, &trip))
    }

    /// `y = A x`.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64], exec: Exec) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        let chunk = par::dof_chunk(self.nrows, exec);
        par::chunks_mut(y, chunk, exec, |c, out| {
            let start = c * chunk;
            for (r, yi) in out.iter_mut().enumerate() {
                let (cols, vals) = self.row(start + r);
                let mut s = 0.0;
                for (&j, &v) in cols.iter().zip(vals) {
                    s += v * x[j];
                }
                *yi = s;
            }
        });
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y, Exec::Sequential);
        y
    }

    /// `y = A^T x`.
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += v * x[i];
            }
        }
        y
    }

    pub fn diagonal_entries(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        let mut b = 0;
        for i in 0..self.nrows {
            for &j in self.row(i).0 {
                b = b.max(i.abs_diff(j));
            }
        }
        b
    }

    /// Max-norm of `A - A^T`.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        let mut d = 0.0f64;
        for (i, j, v) in self.triplets() {
            d = d.max((v - t.get(i, j)).abs());
        }
        for (i, j, v) in t.triplets() {
            d = d.max((v - self.get(i, j)).abs());
        }
        d
    }

    /// Max row sum of absolute values.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Plain-text dump, one `row col value` line per stored entry.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# {} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (i, j, v) in self.triplets() {
            writeln!(w, "{i} {j} {v:.17e}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, 2.5), (1, 0, -1.0)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), 3.5);
        assert_eq!(m.get(1, 1), 0.0);
    }

    #[test]
    fn kron_matches_dense() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 1, 3.0)]);
        let b = CsrMatrix::from_triplets(2, 2, &[(0, 0, 4.0), (1, 0, 5.0)]);
        let k = a.kron(&b).to_dense();
        assert_eq!(k[0], vec![4.0, 0.0, 8.0, 0.0]);
        assert_eq!(k[1], vec![5.0, 0.0, 10.0, 0.0]);
        assert_eq!(k[2], vec![0.0, 0.0, 12.0, 0.0]);
        assert_eq!(k[3], vec![0.0, 0.0, 15.0, 0.0]);
    }

    #[test]
    fn matmul_and_transpose() {
        let a = CsrMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, -1.0)]);
        let ata = a.transpose().matmul(&a).unwrap();
        assert_eq!(ata.get(0, 2), 2.0);
        assert_eq!(ata.get(2, 2), 4.0);
        assert_eq!(ata.asymmetry(), 0.0);
        assert_eq!(a.matvec(&[1.0, 1.0, 1.0]), vec![3.0, -1.0]);
        assert_eq!(a.matvec_transpose(&[1.0, 1.0]), vec![1.0, -1.0, 2.0]);
    }

    #[test]
    fn parallel_matvec_is_bitwise_sequential() {
        let n = 500;
        let mut t = Vec::new();
        for i in 0..n {
            for d in [0usize, 1, 7, 40] {
                if i + d < n {
                    t.push((i, i + d, 1.0 / (1.0 + (i * 31 + d) as f64)));
                    t.push((i + d, i, 0.3 / (2.0 + d as f64)));
                }
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t);
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut y1 = vec![0.0; n];
        let mut y2 = vec![0.0; n];
        a.matvec_into(&x, &mut y1, Exec::Sequential);
        a.matvec_into(&x, &mut y2, Exec::Parallel);
        assert_eq!(y1, y2);
    }
}
