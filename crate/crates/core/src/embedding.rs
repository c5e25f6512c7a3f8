//! Discrete embedding constant from the smallest eigenpair of `G phi = lambda W phi`.

use crate::error::{PlateError, Result};
use crate::grid::GridConfig;
use crate::linalg::SpdSolver;
use crate::par::{self, Exec};
use crate::plate::PlateSystem;
use crate::sparse::CsrMatrix;

/// A symmetric positive definite stiffness in Gram form.
pub trait Stiffness {
    fn matrix(&self) -> &CsrMatrix;

    /// `v^T A v`; implementors may use a better conditioned formula.
    fn quadratic(&self, v: &[f64]) -> f64 {
        let av = self.matrix().matvec(v);
        v.iter().zip(&av).map(|(a, b)| a * b).sum()
    }
}

impl Stiffness for CsrMatrix {
    fn matrix(&self) -> &CsrMatrix {
        self
    }
}

impl Stiffness for PlateSystem {
    fn matrix(&self) -> &CsrMatrix {
        &self.gram
    }

    fn quadratic(&self, v: &[f64]) -> f64 {
        self.gram_quadratic(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { max_iter: 10_000, tol: 1e-10 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    pub lambda1: f64,
    /// Normalized so that `phi^T W phi = 1`.
    pub phi1: Vec<f64>,
    pub iterations: usize,
    /// `||phi - mu A^{-1} W phi||_W` at exit, `mu` the inverse Rayleigh quotient.
    pub residual: f64,
}

fn w_norm(v: &[f64], w: &[f64]) -> f64 {
    v.iter().zip(w).map(|(x, wi)| wi * x * x).sum::<f64>().sqrt()
}

/// Inverse iteration from the W-normalized all-ones vector.
///
/// The returned eigenvalue is the Rayleigh quotient from `Stiffness::quadratic`.
/// Convergence is judged on the inverse-iteration residual with the scalar
/// `1 / (phi^T W A^{-1} W phi)`, so it measures the direction alone and stays
/// meaningful when `||A|| / lambda1` is far beyond `1 / eps`.
pub fn smallest_eigenpair<S: Stiffness + ?Sized>(a: &S, w: &[f64], opts: EigenOptions) -> Result<EigenPair> {
    let n = w.len();
    if a.matrix().nrows() != n || a.matrix().ncols() != n {
        return Err(PlateError::DimensionMismatch("stiffness and weights disagree".into()));
    }
    if w.iter().any(|&x| !(x > 0.0)) {
        return Err(PlateError::InvalidConfig("weights must be positive".into()));
    }
    let solver = SpdSolver::new(a.matrix().clone(), usize::MAX, 1e-14)?;
    let mut x = vec![1.0; n];
    let s = w_norm(&x, w);
    x.iter_mut().for_each(|v| *v /= s);
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let wx: Vec<f64> = x.iter().zip(w).map(|(a, b)| a * b).collect();
        let y = solver.solve(&wx)?;
        let mu = 1.0 / wx.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
        let r: Vec<f64> = x.iter().zip(&y).map(|(xi, yi)| xi - mu * yi).collect();
        residual = w_norm(&r, w);
        let nrm = w_norm(&y, w);
        let next: Vec<f64> = y.iter().map(|v| v / nrm).collect();
        if residual <= opts.tol {
            let lambda1 = a.quadratic(&x);
            return Ok(EigenPair { lambda1, phi1: x, iterations: it, residual });
        }
        x = next;
    }
    Err(PlateError::NoConvergence { iterations: opts.max_iter, residual })
}

/// Smallest eigenpair of the elastic form `lambda_coef G` against `H`.
pub fn elastic_eigenpair(sys: &PlateSystem, opts: EigenOptions) -> Result<EigenPair> {
    let mut pair = smallest_eigenpair(sys, sys.h(), opts)?;
    pair.lambda1 *= sys.lambda_coef;
    Ok(pair)
}

/// The `count` smallest eigenvalues by deflated inverse iteration.
pub fn smallest_eigenvalues<S: Stiffness + ?Sized>(a: &S, w: &[f64], count: usize, opts: EigenOptions) -> Result<Vec<f64>> {
    let n = w.len();
    let solver = SpdSolver::new(a.matrix().clone(), usize::MAX, 1e-14)?;
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut values = Vec::new();
    let project = |v: &mut Vec<f64>, basis: &[Vec<f64>]| {
        for b in basis {
            let c: f64 = v.iter().zip(b).zip(w).map(|((x, y), wi)| wi * x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    };
    for k in 0..count.min(n) {
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * (k + 3) * 2654435761) % 1000) as f64 / 1000.0).collect();
        project(&mut x, &basis);
        let s = w_norm(&x, w);
        x.iter_mut().for_each(|v| *v /= s);
        let mut lambda = f64::NAN;
        let mut done = false;
        for _ in 0..opts.max_iter {
            let wx: Vec<f64> = x.iter().zip(w).map(|(a, b)| a * b).collect();
            let mut y = solver.solve(&wx)?;
            project(&mut y, &basis);
            project(&mut y, &basis);
            lambda = a.quadratic(&x);
            let mu = 1.0 / wx.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
            let r: Vec<f64> = x.iter().zip(&y).map(|(xi, yi)| xi - mu * yi).collect();
            if w_norm(&r, w) <= opts.tol {
                done = true;
                break;
            }
            let s = w_norm(&y, w);
            x = y.iter().map(|v| v / s).collect();
        }
        if !done {
            return Err(PlateError::NoConvergence { iterations: opts.max_iter, residual: f64::NAN });
        }
        values.push(lambda);
        basis.push(x);
    }
    Ok(values)
}

/// `sum_i w_i |phi_i|^p / lambda1^{p/2}`.
pub fn estimate_ce(pair: &EigenPair, w: &[f64], p: f64) -> f64 {
    let num: f64 = pair.phi1.iter().zip(w).map(|(v, wi)| wi * v.abs().powf(p)).sum();
    num / pair.lambda1.powf(0.5 * p)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DScalingRow {
    pub d: f64,
    pub ce: f64,
    /// `ce * d^{r/2 - 1}`.
    pub compensated: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DScalingReport {
    pub r: f64,
    pub rows: Vec<DScalingRow>,
    /// Max over min of the compensated column.
    pub ratio: f64,
}

/// Estimates `Ce(r)` on grids that differ only in the half-width `d`.
pub fn d_scaling_probe(base: GridConfig, ds: &[f64], r: f64, exec: Exec) -> Result<DScalingReport> {
    if ds.is_empty() {
        return Err(PlateError::InvalidConfig("no d values".into()));
    }
    let rows: Vec<Result<DScalingRow>> = par::map_collect(ds.len(), exec, |i| {
        let d = ds[i];
        let sys = PlateSystem::build(GridConfig { d, ..base }, 1.0)?;
        let pair = elastic_eigenpair(&sys, EigenOptions::default())?;
        let ce = estimate_ce(&pair, sys.h(), r);
        Ok(DScalingRow { d, ce, compensated: ce * d.powf(0.5 * r - 1.0) })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let max = rows.iter().map(|r| r.compensated).fold(f64::MIN, f64::max);
    let min = rows.iter().map(|r| r.compensated).fold(f64::MAX, f64::min);
    Ok(DScalingReport { r, rows, ratio: max / min })
}
