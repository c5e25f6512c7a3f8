//! Tensor-product mesh of `(0, pi) x (-d, d)`.
//!
//! Boundary x-nodes carry the Dirichlet condition and are eliminated; unknowns
//! are numbered layer by layer in y.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{PlateError, Result};

/// Placement of the y-nodes on `[-d, d]` with spacing `dy = 2d/K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum YLayout {
    /// `K + 1` nodes `y_k = -d + k dy`, both edges included.
    #[default]
    Edge,
    /// `K` nodes `y_k = -d + (k + 1/2) dy`, one per cell.
    CellCentered,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "J")]
    pub j: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub d: f64,
    pub sigma: f64,
    #[serde(default)]
    pub y_layout: YLayout,
}

impl GridConfig {
    pub fn new(j: usize, k: usize, d: f64, sigma: f64) -> Self {
        GridConfig { j, k, d, sigma, y_layout: YLayout::Edge }
    }

    pub fn with_layout(mut self, layout: YLayout) -> Self {
        self.y_layout = layout;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.j < 3 {
            return Err(PlateError::InvalidConfig(format!("J = {} < 3", self.j)));
        }
        if self.k < 2 {
            return Err(PlateError::InvalidConfig(format!("K = {} < 2", self.k)));
        }
        if !(self.sigma > 0.0 && self.sigma < 0.5) {
            return Err(PlateError::InvalidConfig(format!(
                "sigma = {} not in (0, 1/2)",
                self.sigma
            )));
        }
        if !(self.d > 0.0 && self.d.is_finite()) {
            return Err(PlateError::InvalidConfig(format!("d = {} must be positive", self.d)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub config: GridConfig,
    pub dx: f64,
    pub dy: f64,
    pub x_nodes: Vec<f64>,
    pub y_nodes: Vec<f64>,
}

pub fn build_grid(cfg: GridConfig) -> Result<Grid> {
    cfg.validate()?;
    let dx = PI / cfg.j as f64;
    let dy = 2.0 * cfg.d / cfg.k as f64;
    let x_nodes = (1..cfg.j).map(|j| j as f64 * dx).collect();
    let y_nodes = match cfg.y_layout {
        YLayout::Edge => (0..=cfg.k).map(|k| -cfg.d + k as f64 * dy).collect(),
        YLayout::CellCentered => (0..cfg.k).map(|k| -cfg.d + (k as f64 + 0.5) * dy).collect(),
    };
    Ok(Grid { config: cfg, dx, dy, x_nodes, y_nodes })
}

impl Grid {
    /// Interior x-nodes, `J - 1`.
    pub fn nx(&self) -> usize {
        self.x_nodes.len()
    }

    pub fn ny(&self) -> usize {
        self.y_nodes.len()
    }

    pub fn dof_count(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn sigma(&self) -> f64 {
        self.config.sigma
    }

    /// Index of node `(j, k)` with `j` in `1..J` and `k` in `0..ny`.
    pub fn flatten(&self, j: usize, k: usize) -> usize {
        debug_assert!(j >= 1 && j <= self.nx() && k < self.ny());
        k * self.nx() + (j - 1)
    }

    pub fn unflatten(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx() + 1, idx / self.nx())
    }

    pub fn coords(&self, idx: usize) -> (f64, f64) {
        let (j, k) = self.unflatten(idx);
        (self.x_nodes[j - 1], self.y_nodes[k])
    }

    /// Samples `f(x, y)` at every unknown in flattened order.
    pub fn sample<F: Fn(f64, f64) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.dof_count())
            .map(|i| {
                let (x, y) = self.coords(i);
                f(x, y)
            })
            .collect()
    }

    /// Reverses the y-layers of a nodal field.
    pub fn reflect_y(&self, u: &[f64]) -> Vec<f64> {
        let (nx, ny) = (self.nx(), self.ny());
        let mut out = vec![0.0; u.len()];
        for k in 0..ny {
            out[k * nx..(k + 1) * nx].copy_from_slice(&u[(ny - 1 - k) * nx..(ny - k) * nx]);
        }
        out
    }
}
