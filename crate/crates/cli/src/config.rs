//! Run configuration: TOML schema, presets and override merging.

use std::f64::consts::PI;
use std::path::PathBuf;

use plate_core::energy::SourceEnergy;
use plate_core::{
    FractionalConfig, GridConfig, History, Kernel, MemoryConfig, SolverConfig, StepperConfig, YLayout,
};
use serde::{Deserialize, Serialize};

use crate::error::AppError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Decay,
    Blowup,
    ThresholdTable,
    StaticSolve,
    SbpVerify,
    DScaling,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateConfig {
    /// Elastic coefficient of the plate operator.
    pub lambda: f64,
    /// Amplitude `a` of the static load `a sin(x)` defining `u0`.
    pub load_amplitude: f64,
    /// Uniform initial velocity.
    #[serde(default)]
    pub initial_velocity: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub p: f64,
    #[serde(default = "default_eq_tol")]
    pub eq_tol: f64,
    #[serde(default = "yes")]
    pub enabled: bool,
}

fn default_eq_tol() -> f64 {
    1e-9
}
fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Flags {
    /// Weight the theta-sums with `2R/L` instead of `R/L`.
    pub paper_literal_dtheta: bool,
    /// Use the half input gain `dt / (2 + dt c)` in the phi update.
    pub paper_literal_phi_gain: bool,
    pub lambda_in_stiffness: bool,
    pub source_energy: SourceEnergy,
    pub weighted_memory_energy: bool,
    pub c2_sign_variant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sweep {
    /// Exponents for decay sweeps and the threshold table.
    pub p: Vec<f64>,
    /// Half-widths for the d-scaling probe.
    pub d: Vec<f64>,
    pub r: f64,
    /// Fraction of the energy series used by the decay fit.
    pub tail_fraction: f64,
}

impl Default for Sweep {
    fn default() -> Self {
        Sweep { p: Vec::new(), d: Vec::new(), r: 2.0, tail_fraction: 0.6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Write `x,y,u` snapshots of the initial and final displacement.
    pub field_snapshots: bool,
    /// Write per-node phi energies and history slices at the end of a run.
    pub diagnostics: bool,
    /// Write operator triplet files.
    pub dump_operators: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub record_every: usize,
    pub output_dir: PathBuf,
    pub grid: GridConfig,
    pub plate: PlateConfig,
    pub fractional: FractionalConfig,
    pub memory: MemoryConfig,
    pub source: SourceConfig,
    pub stepper: StepperConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub flags: Flags,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Default for RunConfig {
    /// Desk-scale decay run with every flag off.
    fn default() -> Self {
        RunConfig {
            experiment: Experiment::Decay,
            t_final: 50.0,
            record_every: 100,
            output_dir: PathBuf::from("out"),
            grid: GridConfig::new(30, 10, PI / 50.0, 0.1),
            plate: PlateConfig { lambda: 0.5, load_amplitude: 0.1, initial_velocity: 0.0 },
            fractional: FractionalConfig { alpha: 0.95, beta: 2.5, a1: 1.0, r_max: 10.0 * PI, l: 100 },
            memory: MemoryConfig {
                s_max: 80.0,
                m: None,
                kernel: Kernel { amplitude: 1e-4, rate: 2.0 },
                history: History::Uniform { rate: 2.0 },
                c0: None,
                c1: None,
            },
            source: SourceConfig { p: 4.0, eq_tol: default_eq_tol(), enabled: true },
            stepper: StepperConfig::new(1e-3),
            solver: SolverConfig::default(),
            flags: Flags::default(),
            sweep: Sweep::default(),
            output: OutputConfig::default(),
        }
    }
}

pub const PRESETS: &[&str] = &[
    "decay-paper-p2.5",
    "decay-paper-p3",
    "decay-paper-p4",
    "decay-paper-p5",
    "decay-desk",
    "decay-desk-p2.5",
    "decay-desk-p3",
    "decay-desk-p4",
    "decay-desk-p5",
    "decay-sweep-desk",
    "blowup-paper",
    "blowup-desk",
    "threshold-table",
    "sbp-verify",
    "static-solve",
    "d-scaling",
];

/// Conventions under which the reference experiments were produced.
fn reference_conventions(c: &mut RunConfig) {
    c.grid.y_layout = YLayout::CellCentered;
    c.flags.source_energy = SourceEnergy::CellLp;
    c.flags.c2_sign_variant = true;
}

fn decay_paper(p: f64) -> RunConfig {
    let mut c = RunConfig {
        t_final: 1000.0,
        grid: GridConfig::new(60, 20, PI / 50.0, 0.1),
        ..RunConfig::default()
    };
    c.memory.history = History::Separable { rate: 2.0 };
    c.source.p = p;
    reference_conventions(&mut c);
    c
}

fn blowup_paper() -> RunConfig {
    let mut c = decay_paper(2.1);
    c.experiment = Experiment::Blowup;
    c.t_final = 1800.0;
    c.plate = PlateConfig { lambda: 0.8, load_amplitude: 5.0, initial_velocity: 0.0 };
    c.fractional.alpha = 0.5;
    c.fractional.beta = 3.5;
    c.memory.kernel = Kernel { amplitude: 1e-3, rate: 5.0 };
    c.memory.history = History::Separable { rate: 5.0 };
    c
}

fn desk(mut c: RunConfig, t: f64) -> RunConfig {
    c.grid.j = 30;
    c.grid.k = 10;
    c.t_final = t;
    c
}

pub fn preset(name: &str) -> Result<RunConfig, AppError> {
    let p_of = |s: &str| -> Option<f64> { s.parse::<f64>().ok().filter(|p| [2.5, 3.0, 4.0, 5.0].contains(p)) };
    if let Some(p) = name.strip_prefix("decay-paper-p").and_then(p_of) {
        return Ok(decay_paper(p));
    }
    if let Some(p) = name.strip_prefix("decay-desk-p").and_then(p_of) {
        return Ok(desk(decay_paper(p), 50.0));
    }
    let c = match name {
        "decay-desk" => desk(decay_paper(4.0), 50.0),
        "decay-sweep-desk" => {
            let mut c = desk(decay_paper(4.0), 50.0);
            c.sweep.p = vec![2.5, 3.0, 4.0, 5.0];
            c
        }
        "blowup-paper" => blowup_paper(),
        "blowup-desk" => {
            let mut c = desk(blowup_paper(), 100.0);
            c.record_every = 1;
            c
        }
        "threshold-table" => {
            let mut c = decay_paper(4.0);
            c.experiment = Experiment::ThresholdTable;
            c.sweep.p = vec![2.5, 3.0, 4.0, 5.0];
            c
        }
        "sbp-verify" => RunConfig { experiment: Experiment::SbpVerify, ..decay_paper(4.0) },
        "static-solve" => {
            let mut c = RunConfig { experiment: Experiment::StaticSolve, ..decay_paper(4.0) };
            c.output.field_snapshots = true;
            c
        }
        "d-scaling" => {
            let mut c = RunConfig { experiment: Experiment::DScaling, ..decay_paper(4.0) };
            c.sweep.d = vec![PI / 25.0, PI / 50.0, PI / 100.0];
            c.sweep.r = 2.0;
            c
        }
        _ => {
            return Err(AppError::Config(format!(
                "unknown preset '{name}'; known presets: {}",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(c)
}

fn to_table(cfg: &RunConfig) -> toml::Table {
    toml::Table::try_from(cfg).expect("run configs serialize")
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

const TOP_LEVEL: &[&str] = &["experiment", "T", "record_every", "output_dir"];

/// Sets `path = value`. Bare keys address the `flags` section, except the
/// top-level scalars.
fn set_path(t: &mut toml::Table, key: &str, raw: &str) -> Result<(), AppError> {
    let path: Vec<&str> = if key.contains('.') || TOP_LEVEL.contains(&key) {
        key.split('.').collect()
    } else {
        vec!["flags", key]
    };
    let value = parse_scalar(raw);
    let mut cur = t;
    for seg in &path[..path.len() - 1] {
        let entry = cur.entry(seg.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| AppError::Config(format!("'{seg}' in '{key}' is not a section")))?;
    }
    cur.insert(path[path.len() - 1].to_string(), value);
    Ok(())
}

fn parse_scalar(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Command-line overrides applied after the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub record_every: Option<usize>,
    pub flags: Vec<(String, String)>,
}

/// Parses a config document. A top-level `preset` key selects the base
/// configuration; everything else overrides it.
pub fn parse_config(text: &str) -> Result<RunConfig, AppError> {
    resolve(text, &Overrides::default())
}

pub fn resolve(text: &str, ov: &Overrides) -> Result<RunConfig, AppError> {
    let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| AppError::Config(format!("parse error: {e}")))?;
    let file_preset = match doc.remove("preset") {
        Some(toml::Value::String(s)) => Some(s),
        Some(_) => return Err(AppError::Config("'preset' must be a string".into())),
        None => None,
    };
    let base = match ov.preset.as_deref().or(file_preset.as_deref()) {
        Some(name) => preset(name)?,
        None => RunConfig::default(),
    };
    let mut table = to_table(&base);
    merge(&mut table, doc);
    for (k, v) in &ov.flags {
        set_path(&mut table, k, v)?;
    }
    if let Some(n) = ov.record_every {
        table.insert("record_every".into(), toml::Value::Integer(n as i64));
    }
    if let Some(d) = &ov.output_dir {
        table.insert("output_dir".into(), toml::Value::String(d.to_string_lossy().into_owned()));
    }
    let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| AppError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), AppError> {
        let cfgerr = |e: plate_core::PlateError| AppError::Config(e.to_string());
        self.grid.validate().map_err(cfgerr)?;
        self.fractional.validate().map_err(cfgerr)?;
        self.memory.validate().map_err(cfgerr)?;
        self.stepper.validate().map_err(cfgerr)?;
        if self.source.enabled {
            plate_core::SourceParams { p: self.source.p, eq_tol: self.source.eq_tol }
                .validate()
                .map_err(cfgerr)?;
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(AppError::Config(format!("T = {} must be non-negative", self.t_final)));
        }
        if self.record_every == 0 {
            return Err(AppError::Config("record_every must be at least 1".into()));
        }
        if !(self.plate.lambda > 0.0 && self.plate.lambda.is_finite()) {
            return Err(AppError::Config(format!("lambda = {} must be positive", self.plate.lambda)));
        }
        let ds = self.memory.s_max / self.memory.intervals() as f64;
        if self.stepper.dt > ds {
            return Err(AppError::Config(format!("dt = {} exceeds ds = {ds}", self.stepper.dt)));
        }
        if self.sweep.p.iter().any(|p| !(*p > 2.0)) {
            return Err(AppError::Config("sweep exponents must exceed 2".into()));
        }
        if self.sweep.d.iter().any(|d| !(*d > 0.0)) {
            return Err(AppError::Config("sweep half-widths must be positive".into()));
        }
        if !(self.sweep.tail_fraction > 0.0 && self.sweep.tail_fraction <= 1.0) {
            return Err(AppError::Config("tail_fraction must be in (0, 1]".into()));
        }
        Ok(())
    }

    /// Non-fatal inconsistencies worth reporting.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        let int = self.memory.kernel.integral(self.memory.s_max);
        if (int - (1.0 - self.plate.lambda)).abs() > 1e-6 {
            w.push(format!(
                "kernel integral {int:.6e} differs from 1 - lambda = {:.6e}",
                1.0 - self.plate.lambda
            ));
        }
        if let Ok(mp) = plate_core::MemoryParams::new(self.memory) {
            let v = mp.decay_bound_violations();
            if !v.is_empty() {
                w.push(format!("kernel slope bounds violated at {} nodes", v.len()));
            }
        }
        w
    }

    /// Complete TOML echo; parsing it reproduces `self`.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs serialize")
    }

    pub fn source_params(&self) -> Option<plate_core::SourceParams> {
        self.source.enabled.then_some(plate_core::SourceParams { p: self.source.p, eq_tol: self.source.eq_tol })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config("experiment = \"decay\"\n").unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn bad_sigma_is_rejected() {
        let e = parse_config("[grid]\nsigma = 0.7\n").unwrap_err();
        assert!(e.to_string().contains("sigma"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse_config("[grid]\nsigmaa = 0.2\n").is_err());
        assert!(parse_config("bogus = 1\n").is_err());
        assert!(parse_config("[flags]\nlambda_in_stifness = true\n").is_err());
    }

    #[test]
    fn parse_errors_carry_line_info() {
        let e = parse_config("experiment = \"decay\"\n[grid\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
    }

    #[test]
    fn preset_reference_and_overrides() {
        let c = parse_config("preset = \"blowup-paper\"\n[source]\np = 2.2\n").unwrap();
        assert_eq!(c.experiment, Experiment::Blowup);
        assert_eq!(c.plate.lambda, 0.8);
        assert_eq!(c.source.p, 2.2);
        let ov = Overrides {
            flags: vec![("weighted_memory_energy".into(), "true".into()), ("grid.J".into(), "40".into())],
            record_every: Some(7),
            ..Default::default()
        };
        let c = resolve("preset = \"decay-desk\"\n", &ov).unwrap();
        assert!(c.flags.weighted_memory_energy);
        assert_eq!(c.grid.j, 40);
        assert_eq!(c.record_every, 7);
    }

    #[test]
    fn every_preset_resolves_and_round_trips() {
        for name in PRESETS {
            let c = preset(name).unwrap();
            c.validate().unwrap();
            let back = parse_config(&c.to_toml()).unwrap();
            assert_eq!(back, c, "{name}");
        }
        assert!(preset("decay-paper-p7").is_err());
    }
}
