//! Average-acceleration Newmark stepping of the coupled plate system.
//!
//! The nonlinear source is resolved by Picard iteration on the new
//! acceleration. The left-hand side is linear and factored once.

use serde::{Deserialize, Serialize};

use crate::energy::{energy, EnergyConventions, EnergyInputs, EnergyRecord};
use crate::error::{PlateError, Result};
use crate::fractional::{init_fractional, FractionalParams, FractionalState};
use crate::linalg::{max_abs, SpdSolver};
use crate::memory::{init_memory, MemoryParams, MemoryState};
use crate::par::Exec;
use crate::plate::PlateSystem;
use crate::source::{source_field_into, SourceParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperConfig {
    pub dt: f64,
    #[serde(default = "half")]
    pub gamma: f64,
    #[serde(default = "quarter")]
    pub beta: f64,
    #[serde(default = "fp_tol")]
    pub fp_tol: f64,
    #[serde(default = "fp_max_iter")]
    pub fp_max_iter: usize,
    #[serde(default = "blowup_guard")]
    pub blowup_guard: f64,
}

fn half() -> f64 {
    0.5
}
fn quarter() -> f64 {
    0.25
}
fn fp_tol() -> f64 {
    1e-10
}
fn fp_max_iter() -> usize {
    50
}
fn blowup_guard() -> f64 {
    1e6
}

impl StepperConfig {
    pub fn new(dt: f64) -> Self {
        StepperConfig { dt, gamma: half(), beta: quarter(), fp_tol: fp_tol(), fp_max_iter: fp_max_iter(), blowup_guard: blowup_guard() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PlateError::InvalidConfig(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if self.gamma != 0.5 || self.beta != 0.25 {
            return bad(format!("only gamma = 1/2, beta = 1/4 is supported (got {}, {})", self.gamma, self.beta));
        }
        if !(self.fp_tol > 0.0) || self.fp_max_iter == 0 {
            return bad("fp_tol must be positive and fp_max_iter at least 1".into());
        }
        if !(self.blowup_guard > 0.0) {
            return bad("blowup_guard must be positive".into());
        }
        Ok(())
    }
}

/// Switches between the scheme variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SchemeFlags {
    /// Scale the elastic stiffness in the dynamics by `lambda`.
    pub lambda_in_stiffness: bool,
    /// Enter the memory velocity term `(sum g ds) K V` with a minus sign on
    /// the right-hand side, as it arises from moving it across.
    pub c2_sign_variant: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
    pub t: f64,
    pub step: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    pub step: usize,
    pub t: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Last relative change of the acceleration iterate.
    pub residual: f64,
    pub max_abs_u: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RunOutcome {
    Completed,
    BlownUp { t: f64, step: usize, nonfinite: bool },
}

#[derive(Clone, Debug)]
pub struct RunArtifact {
    pub records: Vec<EnergyRecord>,
    pub outcome: RunOutcome,
    pub steps: usize,
    pub max_fp_iters: usize,
    pub unconverged_steps: usize,
}

pub struct Simulation<'a> {
    pub sys: &'a PlateSystem,
    pub frac_params: FractionalParams,
    pub mem_params: MemoryParams,
    pub source: Option<SourceParams>,
    pub config: StepperConfig,
    pub flags: SchemeFlags,
    pub conventions: EnergyConventions,
    pub exec: Exec,
    pub state: SimState,
    pub frac: FractionalState,
    pub mem: MemoryState,
    solver: SpdSolver,
    elastic_scale: f64,
    buf: Buffers,
}

struct Buffers {
    cur: Vec<f64>,
    shifted: Vec<f64>,
    w: Vec<f64>,
    base: Vec<f64>,
    c1: Vec<f64>,
    rhs: Vec<f64>,
    src: Vec<f64>,
    guess: Vec<f64>,
    a_new: Vec<f64>,
    v_new: Vec<f64>,
    v_mid: Vec<f64>,
}

impl Buffers {
    fn new(n: usize) -> Self {
        let z = || vec![0.0; n];
        Buffers { cur: z(), shifted: z(), w: z(), base: z(), c1: z(), rhs: z(), src: z(), guess: z(), a_new: z(), v_new: z(), v_mid: z() }
    }
}

impl<'a> Simulation<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        sys: &'a PlateSystem,
        frac_params: FractionalParams,
        mem_params: MemoryParams,
        source: Option<SourceParams>,
        config: StepperConfig,
        flags: SchemeFlags,
        conventions: EnergyConventions,
        u0: Vec<f64>,
        v0: Vec<f64>,
    ) -> Result<Self> {
        config.validate()?;
        if let Some(sp) = &source {
            sp.validate()?;
        }
        mem_params.check_cfl(config.dt)?;
        if (frac_params.dt - config.dt).abs() > 0.0 {
            return Err(PlateError::InvalidConfig("fractional coefficients built for another dt".into()));
        }
        let n = sys.dim();
        if u0.len() != n || v0.len() != n {
            return Err(PlateError::DimensionMismatch(format!("initial data must have {n} entries")));
        }
        let elastic_scale = if flags.lambda_in_stiffness { sys.lambda_coef } else { 1.0 };
        let dt = config.dt;
        let c0 = 1.0 + frac_params.lhs_scalar();
        let c1 = mem_params.lhs_coeff(dt) + elastic_scale * 0.25 * dt * dt;
        let solver = sys.factor_shifted(c0, c1)?;

        let ku = sys.apply_k(&u0);
        let mut a0 = vec![0.0; n];
        if let Some(sp) = &source {
            source_field_into(&u0, &u0, sp, &mut a0);
        }
        for i in 0..n {
            a0[i] -= elastic_scale * ku[i];
        }
        let frac = init_fractional(&frac_params, n);
        let mem = init_memory(&mem_params, &u0);
        Ok(Simulation {
            sys,
            frac_params,
            mem_params,
            source,
            config,
            flags,
            conventions,
            exec: Exec::default(),
            state: SimState { u: u0, v: v0, a: a0, t: 0.0, step: 0 },
            frac,
            mem,
            solver,
            elastic_scale,
            buf: Buffers::new(n),
        })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn record(&self, fp_iters: usize) -> EnergyRecord {
        energy(
            &EnergyInputs {
                sys: self.sys,
                state: &self.state,
                frac: &self.frac,
                frac_params: &self.frac_params,
                mem: &self.mem,
                mem_params: &self.mem_params,
                source: self.source.as_ref(),
                conventions: self.conventions,
                fp_iters,
            },
            self.exec,
        )
    }

    /// Advances one time step.
    pub fn step(&mut self) -> Result<StepReport> {
        let n = self.sys.dim();
        let dt = self.config.dt;
        let exec = self.exec;
        let s = &mut self.state;
        let b = &mut self.buf;
        let mp = &self.mem_params;

        self.mem.weighted_sums_into(mp, dt, &mut b.cur, &mut b.shifted, exec);
        let gs = mp.g_sum();
        let r = dt / mp.ds;
        let sv = if self.flags.c2_sign_variant { 1.0 } else { -1.0 };
        let es = self.elastic_scale;
        for i in 0..n {
            let pred = s.u[i] + dt * s.v[i] + 0.25 * dt * dt * s.a[i];
            b.guess[i] = pred;
            b.w[i] = es * pred + (1.0 - r) * b.cur[i] + b.shifted[i] + 0.25 * dt * gs * s.a[i] + sv * gs * s.v[i];
        }
        self.sys.apply_k_into(&b.w, &mut b.base, exec);
        self.frac.c1_contribution_into(&s.v, &s.a, &self.frac_params, &mut b.c1, exec);
        for i in 0..n {
            b.base[i] = -b.base[i] - b.c1[i];
        }

        let h = self.sys.h();
        let mut iterations = 0;
        let mut converged = false;
        let mut residual;
        b.a_new.copy_from_slice(&s.a);
        loop {
            iterations += 1;
            match &self.source {
                Some(sp) => source_field_into(&b.guess, &s.u, sp, &mut b.src),
                None => b.src.iter_mut().for_each(|v| *v = 0.0),
            }
            for i in 0..n {
                b.rhs[i] = h[i] * (b.src[i] + b.base[i]);
            }
            let a_next = self.solver.solve(&b.rhs)?;
            let mut diff = 0.0f64;
            let mut mag = 0.0f64;
            for i in 0..n {
                diff = diff.max((a_next[i] - b.a_new[i]).abs());
                mag = mag.max(a_next[i].abs());
            }
            b.a_new.copy_from_slice(&a_next);
            for i in 0..n {
                b.guess[i] = s.u[i] + dt * s.v[i] + 0.25 * dt * dt * (s.a[i] + b.a_new[i]);
            }
            residual = if mag > 0.0 { diff / mag } else { diff };
            if self.source.is_none() || diff <= self.config.fp_tol * mag {
                converged = true;
                break;
            }
            if iterations >= self.config.fp_max_iter {
                break;
            }
        }

        for i in 0..n {
            b.v_new[i] = s.v[i] + 0.5 * dt * (s.a[i] + b.a_new[i]);
            b.v_mid[i] = 0.5 * (s.v[i] + b.v_new[i]);
        }
        self.frac.step(&b.v_mid, &self.frac_params, exec)?;
        self.mem.step(&b.v_mid, dt, mp, exec)?;
        s.u.copy_from_slice(&b.guess);
        s.v.copy_from_slice(&b.v_new);
        s.a.copy_from_slice(&b.a_new);
        s.step += 1;
        s.t = s.step as f64 * dt;

        let max_abs_u = max_abs(&s.u);
        if !max_abs_u.is_finite() || s.v.iter().chain(&s.a).any(|v| !v.is_finite()) {
            return Err(PlateError::NonFinite { step: s.step });
        }
        Ok(StepReport { step: s.step, t: s.t, iterations, converged, residual, max_abs_u })
    }

    /// Steps to `t_final`, recording the energy every `record_every` steps and
    /// halting when `max |U|` passes the blow-up guard.
    pub fn run(&mut self, t_final: f64, record_every: usize) -> Result<RunArtifact> {
        if !(t_final >= 0.0) || record_every == 0 {
            return Err(PlateError::InvalidConfig("need T >= 0 and record_every >= 1".into()));
        }
        let total = (t_final / self.config.dt).round() as usize;
        let mut records = vec![self.record(0)];
        let mut outcome = RunOutcome::Completed;
        let (mut max_it, mut unconverged) = (0, 0);
        for _ in 0..total {
            let rep = match self.step() {
                Ok(r) => r,
                Err(PlateError::NonFinite { step }) => {
                    outcome = RunOutcome::BlownUp { t: step as f64 * self.config.dt, step, nonfinite: true };
                    break;
                }
                Err(e) => return Err(e),
            };
            max_it = max_it.max(rep.iterations);
            if !rep.converged {
                unconverged += 1;
            }
            let blown = rep.max_abs_u > self.config.blowup_guard;
            if blown || rep.step % record_every == 0 || rep.step == total {
                records.push(self.record(rep.iterations));
            }
            if blown {
                outcome = RunOutcome::BlownUp { t: rep.t, step: rep.step, nonfinite: false };
                break;
            }
        }
        Ok(RunArtifact { records, outcome, steps: self.state.step, max_fp_iters: max_it, unconverged_steps: unconverged })
    }
}
