//! Second-order summation-by-parts operators and their 2D Kronecker liftings.

use crate::error::{PlateError, Result};
use crate::grid::Grid;
use crate::sparse::CsrMatrix;

#[derive(Clone, Debug)]
pub struct Sbp1D {
    pub d1x: CsrMatrix,
    pub d2x: CsrMatrix,
    pub hx: Vec<f64>,
    pub d1y: CsrMatrix,
    pub d2y: CsrMatrix,
    pub hy: Vec<f64>,
    pub nx: usize,
    pub ny: usize,
}

/// Centered first difference with one-sided first and last rows.
fn first_derivative(n: usize, h: f64) -> CsrMatrix {
    let mut t = vec![(0, 0, -1.0 / h), (0, 1, 1.0 / h)];
    for i in 1..n - 1 {
        t.push((i, i - 1, -0.5 / h));
        t.push((i, i + 1, 0.5 / h));
    }
    t.push((n - 1, n - 2, -1.0 / h));
    t.push((n - 1, n - 1, 1.0 / h));
    CsrMatrix::from_triplets(n, n, &t)
}

pub fn build_sbp_1d(grid: &Grid) -> Result<Sbp1D> {
    let (nx, ny) = (grid.nx(), grid.ny());
    if nx < 2 {
        return Err(PlateError::InvalidConfig("need at least two interior x-nodes".into()));
    }
    if ny < 4 {
        return Err(PlateError::InvalidConfig(format!(
            "{ny} y-nodes; the one-sided second-derivative closure needs at least 4"
        )));
    }
    let (dx, dy) = (grid.dx, grid.dy);

    let mut t = Vec::new();
    let c = 1.0 / (dx * dx);
    for i in 0..nx {
        if i > 0 {
            t.push((i, i - 1, c));
        }
        t.push((i, i, -2.0 * c));
        if i + 1 < nx {
            t.push((i, i + 1, c));
        }
    }
    let d2x = CsrMatrix::from_triplets(nx, nx, &t);

    let c = 1.0 / (dy * dy);
    let mut t = Vec::new();
    for (j, v) in [2.0, -5.0, 4.0, -1.0].into_iter().enumerate() {
        t.push((0, j, v * c));
    }
    for i in 1..ny - 1 {
        t.push((i, i - 1, c));
        t.push((i, i, -2.0 * c));
        t.push((i, i + 1, c));
    }
    for (j, v) in [-1.0, 4.0, -5.0, 2.0].into_iter().enumerate() {
        t.push((ny - 1, ny - 4 + j, v * c));
    }
    let d2y = CsrMatrix::from_triplets(ny, ny, &t);

    let mut hy = vec![dy; ny];
    hy[0] = 0.5 * dy;
    hy[ny - 1] = 0.5 * dy;

    Ok(Sbp1D {
        d1x: first_derivative(nx, dx),
        d2x,
        hx: vec![dx; nx],
        d1y: first_derivative(ny, dy),
        d2y,
        hy,
        nx,
        ny,
    })
}

impl Sbp1D {
    /// Boundary selector `e_0 e_0^T`.
    pub fn e0(&self) -> CsrMatrix {
        CsrMatrix::from_triplets(self.ny, self.ny, &[(0, 0, 1.0)])
    }

    /// Boundary selector `e_K e_K^T`.
    pub fn ek(&self) -> CsrMatrix {
        CsrMatrix::from_triplets(self.ny, self.ny, &[(self.ny - 1, self.ny - 1, 1.0)])
    }

    /// Max-norm of `Hy D1y + (Hy D1y)^T - (E_K - E_0)`.
    pub fn sbp_defect(&self) -> f64 {
        let q = self.d1y.scale_rows(&self.hy);
        let qt = q.transpose();
        let (e0, ek) = (self.e0(), self.ek());
        let mut m = 0.0f64;
        for i in 0..self.ny {
            for j in 0..self.ny {
                let v = q.get(i, j) + qt.get(i, j) - (ek.get(i, j) - e0.get(i, j));
                m = m.max(v.abs());
            }
        }
        m
    }
}

#[derive(Clone, Debug)]
pub struct Sbp2D {
    pub dxx: CsrMatrix,
    pub dyy: CsrMatrix,
    pub dy: CsrMatrix,
    pub dxy: CsrMatrix,
    /// Diagonal of `H = Hy (x) Hx`.
    pub h: Vec<f64>,
}

pub fn build_sbp_2d(ops: &Sbp1D, grid: &Grid) -> Result<Sbp2D> {
    if ops.nx != grid.nx() || ops.ny != grid.ny() {
        return Err(PlateError::DimensionMismatch(format!(
            "1D operators are {}x{}, grid is {}x{}",
            ops.nx,
            ops.ny,
            grid.nx(),
            grid.ny()
        )));
    }
    let ix = CsrMatrix::identity(ops.nx);
    let iy = CsrMatrix::identity(ops.ny);
    let mut h = Vec::with_capacity(ops.nx * ops.ny);
    for &wy in &ops.hy {
        h.extend(ops.hx.iter().map(|wx| wy * wx));
    }
    Ok(Sbp2D {
        dxx: iy.kron(&ops.d2x),
        dyy: ops.d2y.kron(&ix),
        dy: ops.d1y.kron(&ix),
        dxy: ops.d1y.kron(&ops.d1x),
        h,
    })
}

impl Sbp2D {
    pub fn dim(&self) -> usize {
        self.h.len()
    }

    /// `D^T H D` for one of the lifted operators.
    pub fn gram(&self, d: &CsrMatrix) -> CsrMatrix {
        d.transpose().matmul(&d.scale_rows(&self.h)).expect("square operators")
    }

    pub fn dxxxx(&self) -> CsrMatrix {
        self.gram(&self.dxx)
    }

    pub fn dyyyy(&self) -> CsrMatrix {
        self.gram(&self.dyy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridConfig, YLayout};
    use std::f64::consts::PI;

    fn table_grid() -> Grid {
        build_grid(GridConfig::new(60, 20, PI / 50.0, 0.1)).unwrap()
    }

    #[test]
    fn sbp_identity_holds() {
        let g = table_grid();
        let ops = build_sbp_1d(&g).unwrap();
        assert!(ops.sbp_defect() <= 1e-14, "{}", ops.sbp_defect());
    }

    #[test]
    fn exactness_on_polynomials() {
        let g = table_grid();
        let ops = build_sbp_1d(&g).unwrap();
        let y = &g.y_nodes;
        let dy1 = ops.d1y.matvec(y);
        assert!(dy1.iter().all(|v| (v - 1.0).abs() <= 1e-12));
        let y2: Vec<f64> = y.iter().map(|v| v * v).collect();
        let d2 = ops.d2y.matvec(&y2);
        assert!(d2.iter().all(|v| (v - 2.0).abs() <= 1e-10), "{d2:?}");
        let ones = vec![1.0; y.len()];
        assert!(ops.d2y.matvec(&ones).iter().all(|v| v.abs() <= 1e-9));
    }

    #[test]
    fn norm_diagonal_and_sparsity() {
        let g = table_grid();
        let ops = build_sbp_1d(&g).unwrap();
        let o = build_sbp_2d(&ops, &g).unwrap();
        let nx = g.nx();
        assert!((o.h[0] - g.dx * g.dy / 2.0).abs() < 1e-18);
        assert!((o.h[nx * 3] - g.dx * g.dy).abs() < 1e-18);
        assert_eq!(o.dxx.nnz(), ops.d2x.nnz() * g.ny());
        assert_eq!(o.dyy.nnz(), ops.d2y.nnz() * nx);
        assert_eq!(o.dxy.nnz(), ops.d1y.nnz() * ops.d1x.nnz());
    }

    #[test]
    fn cell_centered_layout_builds() {
        let g = build_grid(GridConfig::new(10, 6, 0.3, 0.2).with_layout(YLayout::CellCentered))
            .unwrap();
        let ops = build_sbp_1d(&g).unwrap();
        assert_eq!(ops.ny, 6);
        assert!(ops.sbp_defect() <= 1e-14);
    }

    #[test]
    fn too_few_y_nodes() {
        let g = build_grid(GridConfig::new(3, 2, 1.0, 0.1)).unwrap();
        assert!(build_sbp_1d(&g).is_err());
    }
}
