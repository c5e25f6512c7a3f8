//! Discrete energy, the global-existence threshold and decay-rate fitting.

use serde::{Deserialize, Serialize};

use crate::error::{PlateError, Result};
use crate::fractional::{FractionalParams, FractionalState};
use crate::memory::{MemoryParams, MemoryState};
use crate::newmark::SimState;
use crate::par::Exec;
use crate::plate::PlateSystem;
use crate::source::SourceParams;

/// Discretization of the potential `(1/p) ||u||_p^p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SourceEnergy {
    /// `(U^T U)^{p/2} dx dy`.
    #[default]
    L2Power,
    /// `sum |U_i|^p dx dy`.
    CellLp,
    /// `sum h_i |U_i|^p` with the SBP weights.
    QuadratureLp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct EnergyConventions {
    pub source: SourceEnergy,
    /// Use `H` weights in the memory term instead of plain inner products.
    pub weighted_memory: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyRecord {
    pub t: f64,
    pub e: f64,
    pub e_kin: f64,
    pub e_elastic: f64,
    pub e_frac: f64,
    pub e_source: f64,
    pub e_mem: f64,
    pub max_abs_u: f64,
    pub fp_iters: usize,
}

impl EnergyRecord {
    pub const CSV_HEADER: &'static str = "t,E,E_kin,E_elastic,E_frac,E_source,E_mem,max_abs_u,fp_iters";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            self.t, self.e, self.e_kin, self.e_elastic, self.e_frac, self.e_source, self.e_mem, self.max_abs_u, self.fp_iters
        )
    }

    /// Discrete `I = lambda ||u||^2 - ||u||_p^p + kappa int ||phi||^2 + int g ||mu||^2`
    /// with the same conventions as the energy.
    pub fn invariant_i(&self, p: f64) -> f64 {
        2.0 * (self.e_elastic + self.e_frac + self.e_mem) + p * self.e_source
    }
}

pub fn write_energy_csv<W: std::io::Write>(records: &[EnergyRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{}", EnergyRecord::CSV_HEADER)?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Inputs to one energy evaluation.
pub struct EnergyInputs<'a> {
    pub sys: &'a PlateSystem,
    pub state: &'a SimState,
    pub frac: &'a FractionalState,
    pub frac_params: &'a FractionalParams,
    pub mem: &'a MemoryState,
    pub mem_params: &'a MemoryParams,
    pub source: Option<&'a SourceParams>,
    pub conventions: EnergyConventions,
    pub fp_iters: usize,
}

pub fn energy(inp: &EnergyInputs<'_>, exec: Exec) -> EnergyRecord {
    let sys = inp.sys;
    let (u, v) = (&inp.state.u, &inp.state.v);
    let area = sys.cell_area();
    let h = sys.h();

    let e_kin = 0.5 * v.iter().map(|x| x * x).sum::<f64>() * area;
    let ku = sys.apply_k(u);
    let uku: f64 = u.iter().zip(&ku).map(|(a, b)| a * b).sum();
    let e_elastic = 0.5 * sys.lambda_coef * uku * area;
    let e_frac = 0.5 * inp.frac_params.kappa() * inp.frac.sum_squares() * inp.frac_params.weight * area;
    let e_source = match inp.source {
        None => 0.0,
        Some(sp) => {
            let p = sp.p;
            let s = match inp.conventions.source {
                SourceEnergy::L2Power => u.iter().map(|x| x * x).sum::<f64>().powf(0.5 * p) * area,
                SourceEnergy::CellLp => u.iter().map(|x| x.abs().powf(p)).sum::<f64>() * area,
                SourceEnergy::QuadratureLp => u.iter().zip(h).map(|(x, w)| w * x.abs().powf(p)).sum(),
            };
            -s / p
        }
    };
    let mp = inp.mem_params;
    let e_mem = if mp.config.kernel.amplitude == 0.0 {
        0.0
    } else {
        let q = inp.mem.quadratics(sys, inp.conventions.weighted_memory, exec);
        0.5 * q.iter().zip(&mp.g).map(|(q, g)| g * q).sum::<f64>() * mp.ds
    };
    let max_abs_u = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    EnergyRecord {
        t: inp.state.t,
        e: e_kin + e_elastic + e_frac + e_source + e_mem,
        e_kin,
        e_elastic,
        e_frac,
        e_source,
        e_mem,
        max_abs_u,
        fp_iters: inp.fp_iters,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdReport {
    pub e0: f64,
    pub ce: f64,
    pub p: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub i0: f64,
    pub satisfied: bool,
}

/// Evaluates `Ce ((2p/(p-2)) E0)^{(p-2)/2} < lambda^{p/2}` together with `I0 > 0`.
pub fn threshold_check(e0: f64, ce: f64, p: f64, lambda: f64, i0: f64) -> Result<ThresholdReport> {
    if e0 < 0.0 {
        return Err(PlateError::NotApplicable(e0));
    }
    if !(p > 2.0) {
        return Err(PlateError::InvalidConfig(format!("p = {p} must exceed 2")));
    }
    let lhs = ce * (2.0 * p / (p - 2.0) * e0).powf(0.5 * (p - 2.0));
    let rhs = lambda.powf(0.5 * p);
    Ok(ThresholdReport { e0, ce, p, lhs, rhs, i0, satisfied: lhs < rhs && i0 > 0.0 })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    /// `exp(intercept) / E(t_0)`.
    pub theta: f64,
    pub zeta: f64,
    pub r_squared: f64,
    pub window_start: usize,
}

/// Least-squares fit of `log E = c - zeta t` over the last `tail_fraction`
/// of the samples.
pub fn fit_decay_rate(t: &[f64], e: &[f64], tail_fraction: f64) -> Result<DecayFit> {
    if t.len() != e.len() || t.len() < 2 {
        return Err(PlateError::InvalidConfig("decay fit needs at least two samples".into()));
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(PlateError::InvalidConfig(format!("tail fraction {tail_fraction} not in (0, 1]")));
    }
    let n = t.len();
    let len = ((n as f64 * tail_fraction).ceil() as usize).clamp(2, n);
    let start = n - len;
    for i in start..n {
        if !(e[i] > 0.0) {
            return Err(PlateError::NonpositiveEnergy { t: t[i], value: e[i] });
        }
    }
    let ts = &t[start..];
    let ys: Vec<f64> = e[start..].iter().map(|v| v.ln()).collect();
    let m = len as f64;
    let tm = ts.iter().sum::<f64>() / m;
    let ym = ys.iter().sum::<f64>() / m;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in ts.iter().zip(&ys) {
        stt += (x - tm) * (x - tm);
        sty += (x - tm) * (y - ym);
        syy += (y - ym) * (y - ym);
    }
    if stt == 0.0 {
        return Err(PlateError::InvalidConfig("decay fit window has a single time".into()));
    }
    let slope = sty / stt;
    let intercept = ym - slope * tm;
    let r_squared = if syy == 0.0 { 1.0 } else { (sty * sty) / (stt * syy) };
    Ok(DecayFit { theta: intercept.exp() / e[0], zeta: -slope, r_squared, window_start: start })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rows() {
        let r = threshold_check(0.0, 1.0, 4.0, 0.5, 1.0).unwrap();
        assert_eq!(r.rhs, 0.25);
        assert!(threshold_check(-0.1, 1.0, 3.0, 0.5, 1.0).is_err());
        // lhs is monotone in E0 and the verdict needs I0 > 0
        let a = threshold_check(0.01, 5.0, 3.0, 0.5, 1.0).unwrap();
        let b = threshold_check(0.02, 5.0, 3.0, 0.5, 1.0).unwrap();
        assert!(b.lhs > a.lhs);
        assert!(!threshold_check(1e-8, 1.0, 3.0, 0.5, -1.0).unwrap().satisfied);
    }

    #[test]
    fn synthetic_fits() {
        let t: Vec<f64> = (0..200).map(|i| i as f64 * 0.1).collect();
        let e: Vec<f64> = t.iter().map(|t| 3.0 * (-0.2 * t).exp()).collect();
        let f = fit_decay_rate(&t, &e, 0.6).unwrap();
        assert!((f.zeta - 0.2).abs() < 1e-10);
        assert!((f.theta - 1.0).abs() < 1e-9);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let c = fit_decay_rate(&t, &vec![2.0; 200], 0.6).unwrap();
        assert!(c.zeta.abs() < 1e-12);
        let mut bad = e.clone();
        bad[150] = -1.0;
        assert!(fit_decay_rate(&t, &bad, 0.6).is_err());
    }
}
