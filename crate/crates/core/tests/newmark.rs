#![allow(clippy::needless_range_loop)]

use std::f64::consts::PI;

use plate_core::{
    solve_static, EigenOptions, EnergyConventions, Exec, FractionalConfig, FractionalParams, GridConfig, History,
    Kernel, MemoryConfig, MemoryParams, PlateSystem, SchemeFlags, Simulation, SourceParams, StepperConfig, YLayout,
};

fn small_sys() -> PlateSystem {
    PlateSystem::build(GridConfig::new(5, 4, 1.0, 0.2).with_layout(YLayout::CellCentered), 0.5).unwrap()
}

const FRAC: FractionalConfig = FractionalConfig { alpha: 0.7, beta: 1.0, a1: 1.0, r_max: 10.0, l: 20 };
const MEM: MemoryConfig = MemoryConfig {
    s_max: 4.0,
    m: Some(8),
    kernel: Kernel { amplitude: 0.05, rate: 1.0 },
    history: History::Separable { rate: 1.0 },
    c0: None,
    c1: None,
};

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

fn grad(a: f64, b: f64, p: f64) -> f64 {
    let d = a * a - b * b;
    if d.abs() <= 1e-9 * (a * a).max(b * b).max(1.0) {
        let m = 0.5 * (a + b);
        m.abs().powf(p - 2.0) * m
    } else {
        (a.abs().powf(p) - b.abs().powf(p)) / d * (a + b) / p
    }
}

/// Dense re-derivation of the scheme, used as an oracle for `Simulation`.
fn reference_trajectory(sys: &PlateSystem, u0: &[f64], v0: &[f64], dt: f64, steps: usize, sign: f64, p: f64) -> Vec<Vec<f64>> {
    let n = u0.len();
    let k = sys.k.to_dense();
    let kv = |x: &[f64]| -> Vec<f64> { (0..n).map(|i| (0..n).map(|j| k[i][j] * x[j]).sum()).collect() };

    let s = (FRAC.alpha * PI).sin() / PI;
    let dth = FRAC.r_max / FRAC.l as f64;
    let nodes: Vec<(f64, f64, f64, f64)> = (0..=FRAC.l)
        .map(|l| {
            let th = l as f64 * dth;
            let xi = th.powf(FRAC.alpha - 0.5);
            let c = th * th + FRAC.beta;
            let decay = (2.0 - dt * c) / (2.0 + dt * c);
            (xi, decay, 2.0 * dt / (2.0 + dt * c), 2.0 * s * xi * decay)
        })
        .collect();
    let ksum: f64 = nodes.iter().map(|&(xi, _, gain, _)| s * xi * xi * gain).sum::<f64>() * dth;

    let ds = MEM.s_max / 8.0;
    let g: Vec<f64> = (0..=8).map(|m| 0.05 * (-(m as f64) * ds).exp()).collect();
    let gs: f64 = g.iter().sum::<f64>() * ds;
    let r = dt / ds;

    let mut u = u0.to_vec();
    let mut v = v0.to_vec();
    let ku = kv(&u);
    let mut a: Vec<f64> = (0..n).map(|i| grad(u[i], u[i], p) - ku[i]).collect();
    let mut phi = vec![vec![0.0; n]; nodes.len()];
    let mut mu: Vec<Vec<f64>> = (0..=8).map(|m| u.iter().map(|x| x * (1.0 - (-(m as f64) * ds).exp())).collect()).collect();

    let c1 = 0.25 * dt * gs + 0.25 * dt * dt;
    let lhs: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| c1 * k[i][j] + if i == j { 1.0 + 0.5 * dt * ksum } else { 0.0 }).collect())
        .collect();

    let mut out = vec![u.clone()];
    for _ in 0..steps {
        let w: Vec<f64> = (0..n)
            .map(|i| {
                let cur: f64 = (0..=8).map(|m| g[m] * mu[m][i] * ds).sum();
                let sh: f64 = (1..=8).map(|m| g[m] * mu[m - 1][i] * dt).sum();
                u[i] + dt * v[i] + 0.25 * dt * dt * a[i] + (1.0 - r) * cur + sh + 0.25 * dt * gs * a[i] + sign * gs * v[i]
            })
            .collect();
        let kw = kv(&w);
        let base: Vec<f64> = (0..n)
            .map(|i| {
                let frac: f64 = nodes.iter().zip(&phi).map(|(nd, ph)| nd.3 * ph[i]).sum::<f64>() * dth;
                -kw[i] - frac - 2.0 * ksum * v[i] - 0.5 * dt * ksum * a[i]
            })
            .collect();
        let mut an = a.clone();
        let mut un: Vec<f64> = (0..n).map(|i| u[i] + dt * v[i] + 0.25 * dt * dt * a[i]).collect();
        for _ in 0..50 {
            let rhs: Vec<f64> = (0..n).map(|i| grad(un[i], u[i], p) + base[i]).collect();
            let next = solve_dense(lhs.clone(), rhs);
            let diff = next.iter().zip(&an).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            let mag = next.iter().map(|x| x.abs()).fold(0.0, f64::max);
            an = next;
            un = (0..n).map(|i| u[i] + dt * v[i] + 0.25 * dt * dt * (a[i] + an[i])).collect();
            if diff <= 1e-13 * mag {
                break;
            }
        }
        let vn: Vec<f64> = (0..n).map(|i| v[i] + 0.5 * dt * (a[i] + an[i])).collect();
        let vm: Vec<f64> = (0..n).map(|i| 0.5 * (v[i] + vn[i])).collect();
        for (nd, ph) in nodes.iter().zip(phi.iter_mut()) {
            for i in 0..n {
                ph[i] = nd.1 * ph[i] + nd.2 * nd.0 * vm[i];
            }
        }
        let old = mu.clone();
        for m in 0..=8 {
            for i in 0..n {
                let inflow = if m == 0 { 0.0 } else { old[m - 1][i] };
                mu[m][i] = (1.0 - r) * old[m][i] + r * inflow + dt * vm[i];
            }
        }
        u = un;
        v = vn;
        a = an;
        out.push(u.clone());
    }
    out
}

fn initial(sys: &PlateSystem) -> (Vec<f64>, Vec<f64>) {
    let f = sys.grid.sample(|x, y| 0.4 * x.sin() * (1.0 + y));
    let u0 = solve_static(sys, &f).unwrap();
    let v0 = sys.grid.sample(|x, _| 0.1 * (2.0 * x).sin());
    (u0, v0)
}

fn simulation<'a>(sys: &'a PlateSystem, dt: f64, sign_variant: bool, u0: Vec<f64>, v0: Vec<f64>) -> Simulation<'a> {
    let mut cfg = StepperConfig::new(dt);
    cfg.fp_tol = 1e-13;
    Simulation::new(
        sys,
        FractionalParams::new(FRAC, dt, false, false).unwrap(),
        MemoryParams::new(MEM).unwrap(),
        Some(SourceParams::new(3.0)),
        cfg,
        SchemeFlags { lambda_in_stiffness: false, c2_sign_variant: sign_variant },
        EnergyConventions::default(),
        u0,
        v0,
    )
    .unwrap()
}

#[test]
fn matches_dense_reference() {
    let sys = small_sys();
    let (u0, v0) = initial(&sys);
    assert!(u0.iter().fold(0.0f64, |m, v| m.max(v.abs())) > 0.02);
    for (variant, sign, steps) in [(true, 1.0, 300), (false, -1.0, 100)] {
        let reference = reference_trajectory(&sys, &u0, &v0, 0.01, steps, sign, 3.0);
        let mut sim = simulation(&sys, 0.01, variant, u0.clone(), v0.clone()).with_exec(Exec::Sequential);
        for (n, want) in reference.iter().enumerate().skip(1) {
            sim.step().unwrap_or_else(|e| panic!("variant {variant}, step {n}: {e}"));
            let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let err = sim.state.u.iter().zip(want).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(err <= 1e-8 * scale, "variant {variant}, step {n}: {err:e}");
        }
    }
}

#[test]
fn zero_state_is_a_fixed_point() {
    let sys = small_sys();
    let n = sys.dim();
    let mut sim = simulation(&sys, 0.01, true, vec![0.0; n], vec![0.0; n]);
    for _ in 0..100 {
        sim.step().unwrap();
    }
    let s = &sim.state;
    assert!(s.u.iter().chain(&s.v).chain(&s.a).all(|v| *v == 0.0));
    assert!(sim.frac.phi.iter().chain(&sim.mem.mu).all(|v| *v == 0.0));
    let e = sim.record(0);
    assert_eq!((e.e, e.e_kin, e.e_elastic, e.e_frac, e.e_source, e.e_mem), (0.0, 0.0, 0.0, 0.0, 0.0, 0.0));
}

fn conservative(sys: &PlateSystem, dt: f64) -> Simulation<'_> {
    let u0 = solve_static(sys, &sys.grid.sample(|x, _| 0.1 * x.sin())).unwrap();
    let v0 = sys.grid.sample(|x, y| (3.0 * x).sin() * (1.0 + 5.0 * y));
    Simulation::new(
        sys,
        FractionalParams::new(FractionalConfig { a1: 0.0, ..FRAC }, dt, false, false).unwrap(),
        MemoryParams::new(MemoryConfig { kernel: Kernel { amplitude: 0.0, rate: 1.0 }, ..MEM }).unwrap(),
        None,
        StepperConfig::new(dt),
        SchemeFlags::default(),
        EnergyConventions::default(),
        u0,
        v0,
    )
    .unwrap()
}

fn h_energy(sim: &Simulation<'_>) -> f64 {
    let h = sim.sys.h();
    let kin: f64 = sim.state.v.iter().zip(h).map(|(v, w)| w * v * v).sum();
    0.5 * kin + 0.5 * sim.sys.gram_quadratic(&sim.state.u)
}

#[test]
fn conservative_limit_keeps_the_h_energy() {
    let sys = PlateSystem::build(GridConfig::new(30, 10, PI / 50.0, 0.1).with_layout(YLayout::CellCentered), 0.5).unwrap();
    let mut sim = conservative(&sys, 1e-3);
    let e0 = h_energy(&sim);
    let mut drift = 0.0f64;
    for _ in 0..10_000 {
        let rep = sim.step().unwrap();
        assert_eq!(rep.iterations, 1);
        drift = drift.max((h_energy(&sim) - e0).abs() / e0);
    }
    assert!(drift <= 1e-10, "{drift:e}");
}

#[test]
fn left_hand_side_pencil() {
    let sys = small_sys();
    let dt = 0.01;
    let fp = FractionalParams::new(FRAC, dt, false, false).unwrap();
    let mp = MemoryParams::new(MEM).unwrap();
    let c0 = 1.0 + fp.lhs_scalar();
    let c1 = mp.lhs_coeff(dt) + 0.25 * dt * dt;
    let hm = plate_core::CsrMatrix::diagonal(sys.h());
    let lhs = plate_core::CsrMatrix::linear_combination(&[(c0, &hm), (c1, &sys.gram)]).unwrap();
    assert!(lhs.asymmetry() <= 1e-12 * lhs.max_abs());
    let pair = plate_core::smallest_eigenpair(&lhs, sys.h(), EigenOptions::default()).unwrap();
    assert!(pair.lambda1 >= 1.0);
}

#[test]
fn parallel_run_is_bitwise_sequential() {
    let sys = PlateSystem::build(GridConfig::new(30, 10, PI / 50.0, 0.1).with_layout(YLayout::CellCentered), 0.5).unwrap();
    let (u0, v0) = initial(&sys);
    let mut a = simulation(&sys, 1e-3, true, u0.clone(), v0.clone()).with_exec(Exec::Sequential);
    let mut b = simulation(&sys, 1e-3, true, u0, v0).with_exec(Exec::Parallel);
    let ra = a.run(0.2, 10).unwrap();
    let rb = b.run(0.2, 10).unwrap();
    assert_eq!(ra.records, rb.records);
    assert_eq!(a.state, b.state);
    assert_eq!(a.frac, b.frac);
    assert_eq!(a.mem, b.mem);
}

#[test]
fn zero_horizon_gives_the_initial_record_only() {
    let sys = small_sys();
    let (u0, v0) = initial(&sys);
    let mut sim = simulation(&sys, 0.01, true, u0, v0);
    let art = sim.run(0.0, 1).unwrap();
    assert_eq!(art.records.len(), 1);
    assert_eq!(art.steps, 0);
}

#[test]
fn energy_components_keep_their_signs() {
    let sys = small_sys();
    let (u0, v0) = initial(&sys);
    let mut sim = simulation(&sys, 0.01, true, u0, v0);
    let art = sim.run(3.0, 5).unwrap();
    for r in &art.records {
        assert!(r.e_kin >= 0.0 && r.e_elastic >= 0.0 && r.e_frac >= 0.0 && r.e_mem >= 0.0 && r.e_source <= 0.0);
        let sum = r.e_kin + r.e_elastic + r.e_frac + r.e_source + r.e_mem;
        assert!((r.e - sum).abs() <= 1e-12 * sum.abs().max(r.e_elastic));
    }
}

#[test]
fn pure_displacement_energy_is_elastic() {
    let sys = small_sys();
    let (u0, _) = initial(&sys);
    let n = sys.dim();
    let dt = 0.01;
    let sim = Simulation::new(
        &sys,
        FractionalParams::new(FRAC, dt, false, false).unwrap(),
        MemoryParams::new(MemoryConfig { history: History::Static, ..MEM }).unwrap(),
        None,
        StepperConfig::new(dt),
        SchemeFlags::default(),
        EnergyConventions::default(),
        u0.clone(),
        vec![0.0; n],
    )
    .unwrap();
    let e = sim.record(0);
    let ku = sys.apply_k(&u0);
    let want = 0.5 * 0.5 * u0.iter().zip(&ku).map(|(a, b)| a * b).sum::<f64>() * sys.cell_area();
    assert!(want > 0.0);
    assert!((e.e - want).abs() <= 1e-9 * want, "{} vs {want}", e.e);
}

