//! Discrete gradient of the potential `|u|^p / p`.

use serde::{Deserialize, Serialize};

use crate::error::{PlateError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    pub p: f64,
    /// Relative band on `|a^2 - b^2|` below which the midpoint form is used.
    #[serde(default = "default_eq_tol")]
    pub eq_tol: f64,
}

fn default_eq_tol() -> f64 {
    1e-9
}

impl SourceParams {
    pub fn new(p: f64) -> Self {
        SourceParams { p, eq_tol: default_eq_tol() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 2.0 && self.p.is_finite()) {
            return Err(PlateError::InvalidConfig(format!("p = {} must exceed 2", self.p)));
        }
        if !(self.eq_tol > 0.0) {
            return Err(PlateError::InvalidConfig("eq_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Two-point gradient `J(a, b)` with `J(a, b) (a - b) = (|a|^p - |b|^p) / p`.
pub fn discrete_gradient(a: f64, b: f64, p: f64, eq_tol: f64) -> f64 {
    let (a2, b2) = (a * a, b * b);
    let diff = a2 - b2;
    if diff.abs() <= eq_tol * a2.max(b2).max(1.0) {
        let m = 0.5 * (a + b);
        return m.abs().powf(p - 2.0) * m;
    }
    pow_diff(a.abs(), b.abs(), p) / (p * (a - b))
}

/// `x^p - y^p` for `x, y >= 0` without cancellation when `x` is close to `y`.
fn pow_diff(x: f64, y: f64, p: f64) -> f64 {
    let r = x / y;
    if y > 0.0 && (0.5..=2.0).contains(&r) {
        y.powf(p) * (p * ((x - y) / y).ln_1p()).exp_m1()
    } else {
        x.powf(p) - y.powf(p)
    }
}

/// Elementwise `J(u_new, u_old)`.
pub fn source_field_into(u_new: &[f64], u_old: &[f64], sp: &SourceParams, out: &mut [f64]) {
    assert_eq!(u_new.len(), u_old.len());
    for ((o, &a), &b) in out.iter_mut().zip(u_new).zip(u_old) {
        *o = discrete_gradient(a, b, sp.p, sp.eq_tol);
    }
}

pub fn source_field(u_new: &[f64], u_old: &[f64], sp: &SourceParams) -> Vec<f64> {
    let mut out = vec![0.0; u_new.len()];
    source_field_into(u_new, u_old, sp, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        assert_eq!(discrete_gradient(1.0, 1.0, 4.0, 1e-9), 1.0);
        assert!((discrete_gradient(2.0, 0.0, 4.0, 1e-9) - 2.0).abs() < 1e-15);
        let j = discrete_gradient(1.3, 0.7, 3.0, 1e-9);
        assert_eq!(discrete_gradient(-1.3, -0.7, 3.0, 1e-9), -j);
        assert_eq!(discrete_gradient(0.8, -0.8, 3.0, 1e-9), 0.0);
    }

    #[test]
    fn near_equal_arguments_keep_precision() {
        let (a, b, p): (f64, f64, f64) = (1.7, 1.7 * (1.0 + 3e-8), 2.1);
        let exact = {
            // (b^p - a^p) / (p (b - a)) expanded around a
            let h = b - a;
            let d1 = a.powf(p - 1.0);
            let d2 = (p - 1.0) * a.powf(p - 2.0);
            d1 + 0.5 * d2 * h
        };
        assert!((discrete_gradient(b, a, p, 1e-9) - exact).abs() <= 1e-14 * exact);
    }

    #[test]
    fn continuity_across_band() {
        for a in [0.5, 1.0, 2.0] {
            for p in [2.1, 3.0, 4.0] {
                let j = discrete_gradient(a, a + 1e-8, p, 1e-9);
                assert!((j - a.powf(p - 2.0) * a).abs() <= 1e-5);
            }
        }
    }

    #[test]
    fn diagonal_field() {
        let u = [0.0, -0.5, 2.0];
        let s = source_field(&u, &u, &SourceParams::new(3.0));
        assert_eq!(s, vec![0.0, -0.25, 4.0]);
    }
}
