//! Experiment orchestration and artifact emission.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use plate_core::energy::write_energy_csv;
use plate_core::plate::write_field_csv;
use plate_core::{
    build_grid, build_sbp_1d, d_scaling_probe, elastic_eigenpair, estimate_ce, fit_decay_rate, solve_static,
    threshold_check, EigenOptions, EigenPair, EnergyConventions, EnergyRecord, Exec, FractionalParams, MemoryParams,
    PlateError, PlateSystem, RunArtifact, RunOutcome, SchemeFlags, Simulation,
};

use crate::config::{Experiment, RunConfig};
use crate::error::{exit, AppError};

/// Assembled plate and initial data for one configuration.
pub struct Setup {
    pub sys: PlateSystem,
    pub u0: Vec<f64>,
    pub v0: Vec<f64>,
}

pub fn setup(cfg: &RunConfig) -> Result<Setup, AppError> {
    let mut sys = PlateSystem::build(cfg.grid, cfg.plate.lambda)?;
    sys.solver = cfg.solver;
    let a = cfg.plate.load_amplitude;
    let f = sys.grid.sample(|x, _| a * x.sin());
    let u0 = solve_static(&sys, &f)?;
    let v0 = vec![cfg.plate.initial_velocity; u0.len()];
    Ok(Setup { sys, u0, v0 })
}

pub fn simulation<'a>(cfg: &RunConfig, s: &'a Setup, exec: Exec) -> Result<Simulation<'a>, AppError> {
    let dt = cfg.stepper.dt;
    let fp = FractionalParams::new(cfg.fractional, dt, cfg.flags.paper_literal_dtheta, cfg.flags.paper_literal_phi_gain)?;
    let mp = MemoryParams::new(cfg.memory)?;
    let flags = SchemeFlags {
        lambda_in_stiffness: cfg.flags.lambda_in_stiffness,
        c2_sign_variant: cfg.flags.c2_sign_variant,
    };
    let conv = EnergyConventions {
        source: cfg.flags.source_energy,
        weighted_memory: cfg.flags.weighted_memory_energy,
    };
    let sim = Simulation::new(
        &s.sys,
        fp,
        mp,
        cfg.source_params(),
        cfg.stepper,
        flags,
        conv,
        s.u0.clone(),
        s.v0.clone(),
    )?;
    Ok(sim.with_exec(exec))
}

/// Energy of the initial state.
pub fn initial_energy(cfg: &RunConfig) -> Result<EnergyRecord, AppError> {
    let s = setup(cfg)?;
    Ok(simulation(cfg, &s, Exec::default())?.record(0))
}

/// Runs the time loop without writing anything.
pub fn simulate(cfg: &RunConfig, exec: Exec) -> Result<RunArtifact, AppError> {
    let s = setup(cfg)?;
    let mut sim = simulation(cfg, &s, exec)?;
    Ok(sim.run(cfg.t_final, cfg.record_every)?)
}

/// Outcome of an experiment: exit code and the text written to `summary.txt`.
#[derive(Clone, Debug)]
pub struct Report {
    pub exit_code: i32,
    pub summary: String,
}

fn create(path: &Path) -> Result<BufWriter<File>, AppError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn finish(dir: &Path, exit_code: i32, summary: String) -> Result<Report, AppError> {
    fs::write(dir.join("summary.txt"), &summary)?;
    Ok(Report { exit_code, summary })
}

pub fn run_experiment(cfg: &RunConfig) -> Result<Report, AppError> {
    cfg.validate()?;
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.resolved"), cfg.to_toml())?;
    match cfg.experiment {
        Experiment::Decay if !cfg.sweep.p.is_empty() => decay_sweep(cfg),
        Experiment::Decay | Experiment::Blowup => time_run(cfg, dir),
        Experiment::ThresholdTable => threshold_table(cfg, dir),
        Experiment::StaticSolve => static_solve(cfg, dir),
        Experiment::SbpVerify => sbp_verify(cfg, dir),
        Experiment::DScaling => d_scaling(cfg, dir),
    }
}

fn eigenpair(sys: &PlateSystem) -> Result<EigenPair, AppError> {
    Ok(elastic_eigenpair(sys, EigenOptions::default())?)
}

/// Largest increase between consecutive records, relative to `|E0|`.
pub fn max_energy_increase(records: &[EnergyRecord]) -> f64 {
    let scale = records.first().map_or(1.0, |r| r.e.abs().max(f64::MIN_POSITIVE));
    records.windows(2).map(|w| (w[1].e - w[0].e) / scale).fold(f64::NEG_INFINITY, f64::max)
}

fn time_run(cfg: &RunConfig, dir: &Path) -> Result<Report, AppError> {
    let s = setup(cfg)?;
    let mut sim = simulation(cfg, &s, Exec::default())?;
    let art = sim.run(cfg.t_final, cfg.record_every)?;
    write_energy_csv(&art.records, create(&dir.join("energy.csv"))?)?;
    if cfg.output.field_snapshots {
        write_field_csv(&s.sys.grid, &s.u0, create(&dir.join("u0.csv"))?)?;
        write_field_csv(&s.sys.grid, &sim.state.u, create(&dir.join("u_final.csv"))?)?;
    }
    if cfg.output.diagnostics {
        sim.frac.write_node_energies(&sim.frac_params, create(&dir.join("phi_nodes.csv"))?)?;
        sim.mem.write_slices(&sim.mem_params, s.sys.h(), create(&dir.join("mu_slices.csv"))?)?;
    }

    let mut out = String::new();
    let e0 = &art.records[0];
    let last = art.records.last().expect("initial record");
    let _ = writeln!(out, "experiment = {:?}", format!("{:?}", cfg.experiment).to_lowercase());
    let _ = writeln!(out, "p = {}", cfg.source.p);
    let _ = writeln!(out, "steps = {}", art.steps);
    let _ = writeln!(out, "E0 = {:.16e}", e0.e);
    let _ = writeln!(out, "I0 = {:.16e}", e0.invariant_i(cfg.source.p));
    let _ = writeln!(out, "E_final = {:.16e}", last.e);
    let _ = writeln!(out, "t_final = {}", last.t);
    let _ = writeln!(out, "max_energy_increase = {:.6e}", max_energy_increase(&art.records));
    let _ = writeln!(out, "max_fp_iterations = {}", art.max_fp_iters);
    let _ = writeln!(out, "unconverged_steps = {}", art.unconverged_steps);

    let pair = eigenpair(&s.sys)?;
    let ce = estimate_ce(&pair, s.sys.h(), cfg.source.p);
    let _ = writeln!(out, "ce = {ce:.16e}");
    match threshold_check(e0.e, ce, cfg.source.p, cfg.plate.lambda, e0.invariant_i(cfg.source.p)) {
        Ok(t) => {
            let _ = writeln!(out, "threshold_lhs = {:.16e}", t.lhs);
            let _ = writeln!(out, "threshold_rhs = {:.16e}", t.rhs);
            let _ = writeln!(out, "satisfied = {}", t.satisfied);
        }
        Err(PlateError::NotApplicable(_)) => {
            let _ = writeln!(out, "satisfied = \"not applicable (E0 < 0)\"");
        }
        Err(e) => return Err(e.into()),
    }

    let mut code = exit::OK;
    match art.outcome {
        RunOutcome::BlownUp { t, step, nonfinite } => {
            let _ = writeln!(out, "blown_up = true");
            let _ = writeln!(out, "blowup_time = {t}");
            let _ = writeln!(out, "blowup_step = {step}");
            let _ = writeln!(out, "nonfinite = {nonfinite}");
            if cfg.experiment == Experiment::Decay {
                code = exit::DECAY_FAILURE;
            }
        }
        RunOutcome::Completed => {
            let _ = writeln!(out, "blown_up = false");
        }
    }
    if cfg.experiment == Experiment::Decay && code == exit::OK {
        let t: Vec<f64> = art.records.iter().map(|r| r.t).collect();
        let e: Vec<f64> = art.records.iter().map(|r| r.e).collect();
        match fit_decay_rate(&t, &e, cfg.sweep.tail_fraction) {
            Ok(f) => {
                let _ = writeln!(out, "zeta = {:.16e}", f.zeta);
                let _ = writeln!(out, "theta = {:.16e}", f.theta);
                let _ = writeln!(out, "r_squared = {:.16e}", f.r_squared);
                let _ = writeln!(out, "fit_window_start = {}", f.window_start);
            }
            Err(e) => {
                let _ = writeln!(out, "fit_error = {:?}", e.to_string());
                code = exit::DECAY_FAILURE;
            }
        }
    }
    for w in cfg.warnings() {
        let _ = writeln!(out, "# warning: {w}");
    }
    finish(dir, code, out)
}

fn decay_sweep(cfg: &RunConfig) -> Result<Report, AppError> {
    let ps = cfg.sweep.p.clone();
    let results: Vec<Result<Report, AppError>> = plate_core::par::map_collect(ps.len(), Exec::default(), |i| {
        let mut sub = cfg.clone();
        sub.source.p = ps[i];
        sub.sweep.p.clear();
        sub.output_dir = cfg.output_dir.join(format!("p{}", ps[i]));
        run_experiment(&sub)
    });
    let mut out = String::new();
    let mut code = exit::OK;
    for (p, r) in ps.iter().zip(results) {
        let r = r?;
        let _ = writeln!(out, "[p{p}]");
        let _ = writeln!(out, "exit_code = {}", r.exit_code);
        for line in r.summary.lines().filter(|l| !l.starts_with('#')) {
            let _ = writeln!(out, "{line}");
        }
        if code == exit::OK {
            code = r.exit_code;
        }
    }
    finish(&cfg.output_dir, code, out)
}

fn threshold_table(cfg: &RunConfig, dir: &Path) -> Result<Report, AppError> {
    let s = setup(cfg)?;
    let pair = eigenpair(&s.sys)?;
    let ps = if cfg.sweep.p.is_empty() { vec![cfg.source.p] } else { cfg.sweep.p.clone() };
    let mut csv = String::from("p,Ce,lhs,rhs,satisfied,E0,I0\n");
    let mut out = String::new();
    let _ = writeln!(out, "experiment = \"threshold-table\"");
    let _ = writeln!(out, "lambda1 = {:.16e}", pair.lambda1);
    let _ = writeln!(out, "eigen_iterations = {}", pair.iterations);
    for &p in &ps {
        let mut c = cfg.clone();
        c.source.p = p;
        let rec = simulation(&c, &s, Exec::default())?.record(0);
        let ce = estimate_ce(&pair, s.sys.h(), p);
        let i0 = rec.invariant_i(p);
        let (lhs, rhs, sat) = match threshold_check(rec.e, ce, p, cfg.plate.lambda, i0) {
            Ok(t) => (format!("{:.16e}", t.lhs), format!("{:.16e}", t.rhs), t.satisfied.to_string()),
            Err(PlateError::NotApplicable(_)) => ("nan".into(), "nan".into(), "not-applicable".into()),
            Err(e) => return Err(e.into()),
        };
        let _ = writeln!(csv, "{p},{ce:.16e},{lhs},{rhs},{sat},{:.16e},{i0:.16e}", rec.e);
        let _ = writeln!(out, "p{p} = {{ ce = {ce:.16e}, e0 = {:.16e}, lhs = {lhs}, satisfied = \"{sat}\" }}", rec.e);
    }
    fs::write(dir.join("table.csv"), csv)?;
    finish(dir, exit::OK, out)
}

fn static_solve(cfg: &RunConfig, dir: &Path) -> Result<Report, AppError> {
    let s = setup(cfg)?;
    let grid = &s.sys.grid;
    let f = grid.sample(|x, _| cfg.plate.load_amplitude * x.sin());
    let ku = s.sys.apply_k(&s.u0);
    let r: Vec<f64> = ku.iter().zip(&f).map(|(a, b)| a - b).collect();
    let (imax, umax) = s.u0.iter().enumerate().fold((0, 0.0f64), |m, (i, v)| if v.abs() > m.1 { (i, v.abs()) } else { m });
    let (xm, ym) = grid.coords(imax);
    write_field_csv(grid, &s.u0, create(&dir.join("u0.csv"))?)?;
    let mut out = String::new();
    let _ = writeln!(out, "experiment = \"static-solve\"");
    let _ = writeln!(out, "dofs = {}", s.u0.len());
    let _ = writeln!(out, "max_abs_u = {umax:.16e}");
    let _ = writeln!(out, "argmax_x = {xm:.16e}");
    let _ = writeln!(out, "argmax_y = {ym:.16e}");
    let _ = writeln!(out, "residual_h = {:.6e}", s.sys.weighted_norm(&r));
    let _ = writeln!(out, "relative_residual_h = {:.6e}", s.sys.weighted_norm(&r) / s.sys.weighted_norm(&f));
    finish(dir, exit::OK, out)
}

/// Max error of `d` applied to the monomial `x^deg` against `exact`, split
/// into interior and the `closure` rows at each end.
fn poly_errors(d: &plate_core::CsrMatrix, nodes: &[f64], deg: i32, order: u32, closure: usize) -> (f64, f64) {
    let v: Vec<f64> = nodes.iter().map(|x| x.powi(deg)).collect();
    let dv = d.matvec(&v);
    let exact = |x: f64| -> f64 {
        if deg < order as i32 {
            return 0.0;
        }
        let c: f64 = (0..order).map(|k| (deg - k as i32) as f64).product();
        c * x.powi(deg - order as i32)
    };
    let n = nodes.len();
    let (mut inner, mut edge) = (0.0f64, 0.0f64);
    for i in 0..n {
        let e = (dv[i] - exact(nodes[i])).abs();
        if i < closure || i + closure >= n {
            edge = edge.max(e);
        } else {
            inner = inner.max(e);
        }
    }
    (inner, edge)
}

fn sbp_verify(cfg: &RunConfig, dir: &Path) -> Result<Report, AppError> {
    let grid = build_grid(cfg.grid)?;
    let ops = build_sbp_1d(&grid)?;
    let defect = ops.sbp_defect();
    let sys = PlateSystem::build(cfg.grid, cfg.plate.lambda)?;
    let yc: Vec<f64> = grid.y_nodes.iter().map(|y| y / cfg.grid.d).collect();
    let yop = |m: &plate_core::CsrMatrix, o: u32| m.scale((cfg.grid.d).powi(o as i32));
    let mut out = String::new();
    let _ = writeln!(out, "experiment = \"sbp-verify\"");
    let _ = writeln!(out, "sbp_defect = {defect:.6e}");
    let _ = writeln!(out, "gram_symmetry_defect = {:.6e}", sys.symmetry_defect());
    let _ = writeln!(out, "# operator, degree, interior error, boundary error (y scaled to [-1, 1])");
    for deg in 0..=3 {
        let (i1, b1) = poly_errors(&yop(&ops.d1y, 1), &yc, deg, 1, 1);
        let (i2, b2) = poly_errors(&yop(&ops.d2y, 2), &yc, deg, 2, 1);
        let _ = writeln!(out, "# D1y {deg} {i1:.3e} {b1:.3e}");
        let _ = writeln!(out, "# D2y {deg} {i2:.3e} {b2:.3e}");
    }
    if cfg.output.dump_operators {
        let od = dir.join("operators");
        fs::create_dir_all(&od)?;
        for (name, m) in [
            ("D1x", &ops.d1x),
            ("D2x", &ops.d2x),
            ("D1y", &ops.d1y),
            ("D2y", &ops.d2y),
            ("K", &sys.k),
            ("HK", &sys.gram),
        ] {
            m.write_triplets(create(&od.join(format!("{name}.txt")))?)?;
        }
    }
    let ok = defect <= 1e-14;
    let _ = writeln!(out, "passed = {ok}");
    finish(dir, if ok { exit::OK } else { exit::VERIFICATION }, out)
}

fn d_scaling(cfg: &RunConfig, dir: &Path) -> Result<Report, AppError> {
    let ds = if cfg.sweep.d.is_empty() { vec![cfg.grid.d] } else { cfg.sweep.d.clone() };
    let rep = d_scaling_probe(cfg.grid, &ds, cfg.sweep.r, Exec::default())?;
    let mut csv = String::from("d,ce,compensated\n");
    for r in &rep.rows {
        let _ = writeln!(csv, "{:.16e},{:.16e},{:.16e}", r.d, r.ce, r.compensated);
    }
    fs::write(dir.join("dscaling.csv"), csv)?;
    let mut out = String::new();
    let _ = writeln!(out, "experiment = \"d-scaling\"");
    let _ = writeln!(out, "r = {}", rep.r);
    let _ = writeln!(out, "ratio = {:.6e}", rep.ratio);
    finish(dir, exit::OK, out)
}
