//! Tempered fractional damping through its diffusive representation.
//!
//! Each quadrature node `theta_l` carries an auxiliary field `phi_l` obeying
//! `phi_t + (theta^2 + beta) phi = xi(theta) u_t`, advanced by Crank-Nicolson.
//! The damping output is `(2 sin(alpha pi) / pi) sum_l xi_l phi_l dtheta`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{PlateError, Result};
use crate::par::{self, Exec};

const OVERFLOW_GUARD: f64 = 1e300;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FractionalConfig {
    pub alpha: f64,
    /// Tempering rate of the kernel.
    pub beta: f64,
    pub a1: f64,
    #[serde(rename = "R")]
    pub r_max: f64,
    #[serde(rename = "L")]
    pub l: usize,
}

impl FractionalConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PlateError::InvalidConfig(m));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha = {} not in (0, 1)", self.alpha));
        }
        if !(self.beta > 0.0) {
            return bad(format!("beta = {} must be positive", self.beta));
        }
        if !(self.a1 >= 0.0 && self.a1.is_finite()) {
            return bad(format!("a1 = {} must be non-negative", self.a1));
        }
        if !(self.r_max > 0.0 && self.r_max.is_finite()) {
            return bad(format!("R = {} must be positive", self.r_max));
        }
        if self.l == 0 {
            return bad("L must be at least 1".into());
        }
        Ok(())
    }
}

/// Step-size dependent coefficients over the retained nodes.
#[derive(Clone, Debug)]
pub struct FractionalParams {
    pub config: FractionalConfig,
    pub dt: f64,
    /// Node spacing `R / L`.
    pub dtheta: f64,
    /// Weight used in every theta-sum.
    pub weight: f64,
    /// Index of the first retained node (1 when `xi(0)` is singular).
    pub first_node: usize,
    pub theta: Vec<f64>,
    pub xi: Vec<f64>,
    /// `(2 - dt c) / (2 + dt c)` with `c = theta^2 + beta`.
    pub decay: Vec<f64>,
    /// Input gain multiplying `xi_l` times the midpoint velocity.
    pub gain: Vec<f64>,
    pub kappa_l: Vec<f64>,
    pub k_l: Vec<f64>,
}

impl FractionalParams {
    /// `literal_dtheta` weights the sums with `2R/L`; `half_gain` uses the
    /// input gain `dt / (2 + dt c)` instead of the Crank-Nicolson `2 dt / (2 + dt c)`.
    pub fn new(config: FractionalConfig, dt: f64, literal_dtheta: bool, half_gain: bool) -> Result<Self> {
        config.validate()?;
        if !(dt > 0.0) {
            return Err(PlateError::InvalidConfig(format!("dt = {dt} must be positive")));
        }
        let dtheta = config.r_max / config.l as f64;
        let weight = if literal_dtheta { 2.0 * dtheta } else { dtheta };
        let expo = (2.0 * config.alpha - 1.0) / 2.0;
        let first_node = usize::from(expo < 0.0);
        let s = (config.alpha * PI).sin();
        let (mut theta, mut xi, mut decay, mut gain, mut kappa_l, mut k_l) =
            (vec![], vec![], vec![], vec![], vec![], vec![]);
        for l in first_node..=config.l {
            let th = l as f64 * dtheta;
            let x = if expo == 0.0 { 1.0 } else { th.powf(expo) };
            let c = th * th + config.beta;
            let a = (2.0 - dt * c) / (2.0 + dt * c);
            let g = if half_gain { dt / (2.0 + dt * c) } else { 2.0 * dt / (2.0 + dt * c) };
            theta.push(th);
            xi.push(x);
            decay.push(a);
            gain.push(g);
            kappa_l.push(2.0 * config.a1 * s * x * a / PI);
            k_l.push(config.a1 * s * x * x * g / PI);
        }
        Ok(FractionalParams { config, dt, dtheta, weight, first_node, theta, xi, decay, gain, kappa_l, k_l })
    }

    pub fn node_count(&self) -> usize {
        self.theta.len()
    }

    /// `a1 sin(alpha pi) / pi`.
    pub fn kappa(&self) -> f64 {
        self.config.a1 * (self.config.alpha * PI).sin() / PI
    }

    /// `sum_l k_l dtheta`.
    pub fn k_sum(&self) -> f64 {
        self.k_l.iter().sum::<f64>() * self.weight
    }

    /// Scalar multiplying the identity on the Newmark left-hand side.
    pub fn lhs_scalar(&self) -> f64 {
        0.5 * self.dt * self.k_sum()
    }

    pub fn max_abs_decay(&self) -> f64 {
        self.decay.iter().fold(0.0, |m, a| m.max(a.abs()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FractionalState {
    /// Node-major storage, `phi[l * n + i]`.
    pub phi: Vec<f64>,
    pub n: usize,
}

pub fn init_fractional(p: &FractionalParams, n: usize) -> FractionalState {
    FractionalState { phi: vec![0.0; p.node_count() * n], n }
}

impl FractionalState {
    pub fn node(&self, l: usize) -> &[f64] {
        &self.phi[l * self.n..(l + 1) * self.n]
    }

    /// `phi_l <- decay_l phi_l + gain_l xi_l v_half` on every node.
    pub fn step(&mut self, v_half: &[f64], p: &FractionalParams, exec: Exec) -> Result<()> {
        assert_eq!(v_half.len(), self.n);
        let n = self.n;
        par::chunks_mut(&mut self.phi, n, exec, |l, row| {
            let a = p.decay[l];
            let b = p.gain[l] * p.xi[l];
            for (f, v) in row.iter_mut().zip(v_half) {
                *f = a * *f + b * v;
            }
        });
        let m = self.phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(m <= OVERFLOW_GUARD) {
            return Err(PlateError::Instability(format!("max |phi| = {m:e}")));
        }
        Ok(())
    }

    /// `(2 sin(alpha pi) / pi) sum_l phi_l xi_l dtheta`, without the gain `a1`.
    pub fn force(&self, p: &FractionalParams) -> Vec<f64> {
        let c = 2.0 * (p.config.alpha * PI).sin() / PI * p.weight;
        let mut out = vec![0.0; self.n];
        for l in 0..p.node_count() {
            let w = c * p.xi[l];
            for (o, f) in out.iter_mut().zip(self.node(l)) {
                *o += w * f;
            }
        }
        out
    }

    /// Explicit part `sum kappa_l phi_l dtheta + 2 S v + (dt/2) S a` with
    /// `S = sum k_l dtheta`, written into `out`, and the implicit scalar.
    pub fn c1_contribution_into(
        &self,
        v: &[f64],
        a: &[f64],
        p: &FractionalParams,
        out: &mut [f64],
        exec: Exec,
    ) -> f64 {
        let s = p.k_sum();
        let chunk = par::dof_chunk(self.n, exec);
        par::chunks_mut(out, chunk, exec, |c, o| {
            let i0 = c * chunk;
            let len = o.len();
            for (r, oi) in o.iter_mut().enumerate() {
                *oi = 2.0 * s * v[i0 + r] + 0.5 * p.dt * s * a[i0 + r];
            }
            let mut acc = vec![0.0; len];
            for l in 0..p.node_count() {
                let w = p.kappa_l[l];
                let row = &self.phi[l * self.n + i0..l * self.n + i0 + len];
                for (ac, f) in acc.iter_mut().zip(row) {
                    *ac += w * f;
                }
            }
            for (oi, ac) in o.iter_mut().zip(&acc) {
                *oi += ac * p.weight;
            }
        });
        p.lhs_scalar()
    }

    pub fn c1_contribution(&self, v: &[f64], a: &[f64], p: &FractionalParams) -> (Vec<f64>, f64) {
        let mut out = vec![0.0; self.n];
        let s = self.c1_contribution_into(v, a, p, &mut out, Exec::Sequential);
        (out, s)
    }

    /// `||phi_l||^2` per node.
    pub fn node_energies(&self, p: &FractionalParams) -> Vec<f64> {
        (0..p.node_count()).map(|l| self.node(l).iter().map(|v| v * v).sum()).collect()
    }

    /// `sum_l phi_l^T phi_l`.
    pub fn sum_squares(&self) -> f64 {
        self.phi.iter().map(|v| v * v).sum()
    }

    /// CSV rows `l,theta,norm2` for diagnostics.
    pub fn write_node_energies<W: std::io::Write>(&self, p: &FractionalParams, mut w: W) -> std::io::Result<()> {
        writeln!(w, "l,theta,norm2")?;
        for (i, e) in self.node_energies(p).iter().enumerate() {
            writeln!(w, "{},{:.16e},{:.16e}", i + p.first_node, p.theta[i], e)?;
        }
        Ok(())
    }
}
