//! Plate stiffness from the free-edge bilinear form and the static solve.

use serde::{Deserialize, Serialize};

use crate::error::{PlateError, Result};
use crate::grid::{build_grid, Grid, GridConfig};
use crate::linalg::SpdSolver;
use crate::par::Exec;
use crate::sbp::{build_sbp_1d, build_sbp_2d, Sbp2D};
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Systems up to this size are factored directly, larger ones use PCG.
    pub direct_max_dofs: usize,
    pub tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { direct_max_dofs: 50_000, tol: 1e-10 }
    }
}

#[derive(Clone, Debug)]
pub struct PlateSystem {
    pub grid: Grid,
    pub ops: Sbp2D,
    pub sigma: f64,
    pub lambda_coef: f64,
    /// `G = H K`, symmetric positive definite.
    pub gram: CsrMatrix,
    /// Same form with unit weights in place of `H`.
    pub gram_unweighted: CsrMatrix,
    /// `K = H^{-1} G`.
    pub k: CsrMatrix,
    pub solver: SolverConfig,
    k_norm_inf: f64,
    /// Transposes of `Dxx`, `Dyy`, `Dxy`.
    factors_t: [CsrMatrix; 3],
}

fn gram_form(ops: &Sbp2D, w: &[f64], sigma: f64) -> Result<CsrMatrix> {
    let g = |a: &CsrMatrix, b: &CsrMatrix| a.transpose().matmul(&b.scale_rows(w));
    let xx = g(&ops.dxx, &ops.dxx)?;
    let yy = g(&ops.dyy, &ops.dyy)?;
    let xy = g(&ops.dxx, &ops.dyy)?;
    let yx = g(&ops.dyy, &ops.dxx)?;
    let mixed = g(&ops.dxy, &ops.dxy)?;
    CsrMatrix::linear_combination(&[
        (1.0, &xx),
        (1.0, &yy),
        (sigma, &xy),
        (sigma, &yx),
        (2.0 * (1.0 - sigma), &mixed),
    ])
}

pub fn assemble_plate(grid: &Grid, ops: Sbp2D, sigma: f64, lambda_coef: f64) -> Result<PlateSystem> {
    if !(sigma > 0.0 && sigma < 0.5) {
        return Err(PlateError::InvalidConfig(format!("sigma = {sigma} not in (0, 1/2)")));
    }
    if !(lambda_coef > 0.0 && lambda_coef.is_finite()) {
        return Err(PlateError::InvalidConfig(format!("lambda = {lambda_coef} must be positive")));
    }
    if ops.dim() != grid.dof_count() {
        return Err(PlateError::DimensionMismatch("operators and grid disagree".into()));
    }
    let gram = gram_form(&ops, &ops.h, sigma)?;
    let gram_unweighted = gram_form(&ops, &vec![1.0; ops.dim()], sigma)?;
    let inv_h: Vec<f64> = ops.h.iter().map(|v| 1.0 / v).collect();
    let k = gram.scale_rows(&inv_h);
    let k_norm_inf = k.norm_inf();
    let factors_t = [ops.dxx.transpose(), ops.dyy.transpose(), ops.dxy.transpose()];
    Ok(PlateSystem {
        grid: grid.clone(),
        ops,
        sigma,
        lambda_coef,
        gram,
        gram_unweighted,
        k,
        solver: SolverConfig::default(),
        k_norm_inf,
        factors_t,
    })
}

impl PlateSystem {
    /// Grid, operators and stiffness in one go.
    pub fn build(cfg: GridConfig, lambda_coef: f64) -> Result<Self> {
        let grid = build_grid(cfg)?;
        let ops1 = build_sbp_1d(&grid)?;
        let ops = build_sbp_2d(&ops1, &grid)?;
        assemble_plate(&grid, ops, cfg.sigma, lambda_coef)
    }

    pub fn dim(&self) -> usize {
        self.ops.dim()
    }

    pub fn h(&self) -> &[f64] {
        &self.ops.h
    }

    pub fn cell_area(&self) -> f64 {
        self.grid.dx * self.grid.dy
    }

    /// `y = K x` through the first-order factors. For smooth `x` this avoids
    /// the cancellation of the assembled fourth-order stencil.
    pub fn apply_k_into(&self, x: &[f64], y: &mut [f64], exec: Exec) {
        let n = self.dim();
        let (s, h) = (self.sigma, &self.ops.h);
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut c = vec![0.0; n];
        self.ops.dxx.matvec_into(x, &mut a, exec);
        self.ops.dyy.matvec_into(x, &mut b, exec);
        self.ops.dxy.matvec_into(x, &mut c, exec);
        for i in 0..n {
            let (ai, bi) = (a[i], b[i]);
            a[i] = h[i] * (ai + s * bi);
            b[i] = h[i] * (bi + s * ai);
            c[i] *= 2.0 * (1.0 - s) * h[i];
        }
        let [xt, yt, mt] = &self.factors_t;
        let mut t = vec![0.0; n];
        xt.matvec_into(&a, y, exec);
        yt.matvec_into(&b, &mut t, exec);
        y.iter_mut().zip(&t).for_each(|(v, w)| *v += w);
        mt.matvec_into(&c, &mut t, exec);
        for i in 0..n {
            y[i] = (y[i] + t[i]) / h[i];
        }
    }

    pub fn apply_k(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply_k_into(x, &mut y, Exec::Sequential);
        y
    }

    fn factored_terms(&self, v: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        (self.ops.dxx.matvec(v), self.ops.dyy.matvec(v), self.ops.dxy.matvec(v))
    }

    fn factored_quadratic(&self, v: &[f64], w: Option<&[f64]>) -> f64 {
        let (a, b, c) = self.factored_terms(v);
        let s = self.sigma;
        let mut q = 0.0;
        for i in 0..v.len() {
            let wi = w.map_or(1.0, |w| w[i]);
            q += wi * (a[i] * a[i] + b[i] * b[i] + 2.0 * s * a[i] * b[i] + 2.0 * (1.0 - s) * c[i] * c[i]);
        }
        q
    }

    /// `v^T G v` evaluated from the first-order factors, which keeps full
    /// relative accuracy for smooth `v` where the assembled product cancels.
    pub fn gram_quadratic(&self, v: &[f64]) -> f64 {
        self.factored_quadratic(v, Some(&self.ops.h))
    }

    /// The same form with plain Euclidean inner products.
    pub fn gram_quadratic_unweighted(&self, v: &[f64]) -> f64 {
        self.factored_quadratic(v, None)
    }

    /// `G v` applied through the factors.
    pub fn apply_gram_factored(&self, v: &[f64]) -> Vec<f64> {
        let mut y = self.apply_k(v);
        y.iter_mut().zip(&self.ops.h).for_each(|(a, w)| *a *= w);
        y
    }

    /// `||HK - (HK)^T||_max / ||HK||_max`.
    pub fn symmetry_defect(&self) -> f64 {
        self.gram.asymmetry() / self.gram.max_abs()
    }

    /// Factorization of `c0 H + c1 G`, the H-scaled form of `c0 I + c1 K`.
    pub fn factor_shifted(&self, c0: f64, c1: f64) -> Result<SpdSolver> {
        let hm = CsrMatrix::diagonal(&self.ops.h);
        let a = CsrMatrix::linear_combination(&[(c0, &hm), (c1, &self.gram)])?;
        SpdSolver::new(a, self.solver.direct_max_dofs, self.solver.tol)
    }

    pub fn weighted_norm(&self, v: &[f64]) -> f64 {
        v.iter().zip(&self.ops.h).map(|(x, w)| w * x * x).sum::<f64>().sqrt()
    }
}

/// Solves `K u = f`, i.e. `G u = H f`.
///
/// The result is accepted when the H-weighted residual is below
/// `tol * (||K||_inf ||u||_H + ||f||_H)`.
pub fn solve_static(sys: &PlateSystem, f: &[f64]) -> Result<Vec<f64>> {
    if f.len() != sys.dim() {
        return Err(PlateError::DimensionMismatch(format!("load has {} entries", f.len())));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(PlateError::InvalidConfig("non-finite load".into()));
    }
    let solver = SpdSolver::new(sys.gram.clone(), sys.solver.direct_max_dofs, sys.solver.tol)?;
    let hf: Vec<f64> = f.iter().zip(sys.h()).map(|(a, b)| a * b).collect();
    let mut u = solver.solve(&hf)?;
    // refinement against the factored form, which is evaluated more accurately
    for _ in 0..2 {
        let gu = sys.apply_gram_factored(&u);
        let r: Vec<f64> = hf.iter().zip(&gu).map(|(a, b)| a - b).collect();
        let du = solver.solve(&r)?;
        u.iter_mut().zip(&du).for_each(|(a, b)| *a += b);
    }
    let gu = sys.apply_gram_factored(&u);
    let r: Vec<f64> = (0..u.len()).map(|i| gu[i] / sys.h()[i] - f[i]).collect();
    let res = sys.weighted_norm(&r);
    let scale = sys.k_norm_inf * sys.weighted_norm(&u) + sys.weighted_norm(f);
    if res > sys.solver.tol * scale {
        return Err(PlateError::SolverFailure(format!(
            "static residual {res:e} exceeds {:e}",
            sys.solver.tol * scale
        )));
    }
    Ok(u)
}

/// `x,y,u` rows for a nodal field.
pub fn write_field_csv<W: std::io::Write>(grid: &Grid, u: &[f64], mut w: W) -> std::io::Result<()> {
    writeln!(w, "x,y,u")?;
    for (i, v) in u.iter().enumerate() {
        let (x, y) = grid.coords(i);
        writeln!(w, "{x:.16e},{y:.16e},{v:.16e}")?;
    }
    Ok(())
}
