//! Viscoelastic memory through the relative history `mu(t, s) = u(t) - u(t - s)`.
//!
//! `mu` is transported in `s` by a first-order upwind scheme on a truncated
//! grid `s_m = m ds`, with zero inflow at `s = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{PlateError, Result};
use crate::par::{self, Exec};
use crate::plate::PlateSystem;

/// Memory kernel `g(s) = amplitude * exp(-rate * s)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Kernel {
    pub amplitude: f64,
    pub rate: f64,
}

impl Kernel {
    pub fn eval(&self, s: f64) -> f64 {
        self.amplitude * (-self.rate * s).exp()
    }

    /// `int_0^S g(s) ds`.
    pub fn integral(&self, s_max: f64) -> f64 {
        if self.rate == 0.0 {
            self.amplitude * s_max
        } else {
            self.amplitude * (1.0 - (-self.rate * s_max).exp()) / self.rate
        }
    }
}

/// Past displacement `u(x, y, -s)` for `s > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum History {
    /// `u(-s) = u0`: the plate rested in its initial shape.
    Static,
    /// `u(-s) = exp(-rate s) u0`.
    Separable { rate: f64 },
    /// `u(-s) = exp(rate s)` at every node.
    Uniform { rate: f64 },
}

impl History {
    fn value(&self, s: f64, u0: f64) -> f64 {
        match *self {
            History::Static => u0,
            History::Separable { rate } => (-rate * s).exp() * u0,
            History::Uniform { rate } => (rate * s).exp(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryConfig {
    #[serde(rename = "S")]
    pub s_max: f64,
    /// Number of s-intervals; `2S` when absent.
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub kernel: Kernel,
    pub history: History,
    /// Optional bounds `-c0 g <= g' <= -c1 g` to check on the sampled kernel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
}

impl MemoryConfig {
    pub fn intervals(&self) -> usize {
        self.m.unwrap_or_else(|| (2.0 * self.s_max).round().max(1.0) as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s_max > 0.0 && self.s_max.is_finite()) {
            return Err(PlateError::InvalidConfig(format!("S = {} must be positive", self.s_max)));
        }
        if self.intervals() == 0 {
            return Err(PlateError::InvalidConfig("M must be at least 1".into()));
        }
        if !(self.kernel.amplitude >= 0.0 && self.kernel.rate >= 0.0) {
            return Err(PlateError::InvalidConfig("kernel amplitude and rate must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct MemoryParams {
    pub config: MemoryConfig,
    pub ds: f64,
    pub s_nodes: Vec<f64>,
    pub g: Vec<f64>,
}

impl MemoryParams {
    pub fn new(config: MemoryConfig) -> Result<Self> {
        config.validate()?;
        let m = config.intervals();
        let ds = config.s_max / m as f64;
        let s_nodes: Vec<f64> = (0..=m).map(|i| i as f64 * ds).collect();
        let g = s_nodes.iter().map(|&s| config.kernel.eval(s)).collect();
        Ok(MemoryParams { config, ds, s_nodes, g })
    }

    pub fn node_count(&self) -> usize {
        self.s_nodes.len()
    }

    /// `sum_m g(s_m) ds`.
    pub fn g_sum(&self) -> f64 {
        self.g.iter().sum::<f64>() * self.ds
    }

    /// Coefficient of `K` on the Newmark left-hand side.
    pub fn lhs_coeff(&self, dt: f64) -> f64 {
        0.25 * dt * self.g_sum()
    }

    pub fn check_cfl(&self, dt: f64) -> Result<()> {
        if dt > self.ds {
            return Err(PlateError::CflViolation { dt, ds: self.ds });
        }
        Ok(())
    }

    /// Nodes where the forward-difference slope leaves `[-c0 g, -c1 g]`.
    pub fn decay_bound_violations(&self) -> Vec<usize> {
        let (c0, c1) = match (self.config.c0, self.config.c1) {
            (Some(a), Some(b)) => (a, b),
            _ => return Vec::new(),
        };
        (0..self.g.len() - 1)
            .filter(|&m| {
                let d = (self.g[m + 1] - self.g[m]) / self.ds;
                d < -c0 * self.g[m] || d > -c1 * self.g[m]
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MemoryState {
    /// Node-major storage, `mu[m * n + i]`.
    pub mu: Vec<f64>,
    pub n: usize,
    next: Vec<f64>,
}

pub fn init_memory(p: &MemoryParams, u0: &[f64]) -> MemoryState {
    let n = u0.len();
    let mut mu = Vec::with_capacity(p.node_count() * n);
    for &s in &p.s_nodes {
        mu.extend(u0.iter().map(|&u| u - p.config.history.value(s, u)));
    }
    let next = vec![0.0; mu.len()];
    MemoryState { mu, n, next }
}

impl MemoryState {
    pub fn node(&self, m: usize) -> &[f64] {
        &self.mu[m * self.n..(m + 1) * self.n]
    }

    /// Upwind update `mu_m <- (1 - r) mu_m + r mu_{m-1} + dt v_half`, `r = dt/ds`.
    pub fn step(&mut self, v_half: &[f64], dt: f64, p: &MemoryParams, exec: Exec) -> Result<()> {
        p.check_cfl(dt)?;
        assert_eq!(v_half.len(), self.n);
        let (n, r) = (self.n, dt / p.ds);
        let old = &self.mu;
        par::chunks_mut(&mut self.next, n, exec, |m, row| {
            let cur = &old[m * n..(m + 1) * n];
            if m == 0 {
                for i in 0..n {
                    row[i] = (1.0 - r) * cur[i] + dt * v_half[i];
                }
            } else {
                let prev = &old[(m - 1) * n..m * n];
                for i in 0..n {
                    row[i] = (1.0 - r) * cur[i] + r * prev[i] + dt * v_half[i];
                }
            }
        });
        std::mem::swap(&mut self.mu, &mut self.next);
        Ok(())
    }

    /// `sum_m g_m mu_m ds` and `sum_m g_m mu_{m-1} dt` (zero inflow).
    pub fn weighted_sums_into(&self, p: &MemoryParams, dt: f64, cur: &mut [f64], shifted: &mut [f64], exec: Exec) {
        let n = self.n;
        let chunk = par::dof_chunk(n, exec);
        let mu = &self.mu;
        let fill = |c: usize, out: &mut [f64], shift: bool| {
            let i0 = c * chunk;
            let len = out.len();
            out.iter_mut().for_each(|v| *v = 0.0);
            for m in 0..p.node_count() {
                let (src, w) = if shift {
                    if m == 0 {
                        continue;
                    }
                    (m - 1, p.g[m] * dt)
                } else {
                    (m, p.g[m] * p.ds)
                };
                let row = &mu[src * n + i0..src * n + i0 + len];
                for (o, v) in out.iter_mut().zip(row) {
                    *o += w * v;
                }
            }
        };
        par::chunks_mut(cur, chunk, exec, |c, out| fill(c, out, false));
        par::chunks_mut(shifted, chunk, exec, |c, out| fill(c, out, true));
    }

    /// `sum_m g_m K mu_m ds`.
    pub fn force(&self, sys: &PlateSystem, p: &MemoryParams) -> Vec<f64> {
        let mut cur = vec![0.0; self.n];
        let mut sh = vec![0.0; self.n];
        self.weighted_sums_into(p, 0.0, &mut cur, &mut sh, Exec::Sequential);
        sys.apply_k(&cur)
    }

    /// Explicit part `(1 - dt/ds) sum g K mu ds + sum g K mu_{m-1} dt
    /// + (dt/4) (sum g ds) K a + (sum g ds) K v` and the left-hand-side coefficient.
    pub fn c2_contribution(&self, v: &[f64], a: &[f64], dt: f64, p: &MemoryParams, sys: &PlateSystem) -> (Vec<f64>, f64) {
        let n = self.n;
        let mut cur = vec![0.0; n];
        let mut sh = vec![0.0; n];
        self.weighted_sums_into(p, dt, &mut cur, &mut sh, Exec::Sequential);
        let gs = p.g_sum();
        let r = dt / p.ds;
        let w: Vec<f64> = (0..n)
            .map(|i| (1.0 - r) * cur[i] + sh[i] + 0.25 * dt * gs * a[i] + gs * v[i])
            .collect();
        (sys.apply_k(&w), p.lhs_coeff(dt))
    }

    /// `q_m` for every history node: the plate form of `mu_m`, with `H`
    /// weights when `weighted`, plain inner products otherwise.
    pub fn quadratics(&self, sys: &PlateSystem, weighted: bool, exec: Exec) -> Vec<f64> {
        let mat = if weighted { &sys.gram } else { &sys.gram_unweighted };
        let n = self.n;
        par::map_collect(self.mu.len() / n.max(1), exec, |m| {
            let row = &self.mu[m * n..(m + 1) * n];
            let mut q = 0.0;
            for i in 0..n {
                let (cols, vals) = mat.row(i);
                let mut s = 0.0;
                for (&j, &v) in cols.iter().zip(vals) {
                    s += v * row[j];
                }
                q += row[i] * s;
            }
            q
        })
    }

    /// CSV rows `m,s,norm_h` for diagnostics.
    pub fn write_slices<W: std::io::Write>(&self, p: &MemoryParams, h: &[f64], mut w: W) -> std::io::Result<()> {
        writeln!(w, "m,s,norm_h")?;
        for m in 0..p.node_count() {
            let nrm: f64 = self.node(m).iter().zip(h).map(|(v, wt)| wt * v * v).sum::<f64>().sqrt();
            writeln!(w, "{m},{:.16e},{:.16e}", p.s_nodes[m], nrm)?;
        }
        Ok(())
    }
}
