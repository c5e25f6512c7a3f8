use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use plate_core::fractional::init_fractional;
use plate_core::memory::init_memory;
use plate_core::{
    solve_static, EnergyConventions, Exec, FractionalConfig, FractionalParams, GridConfig, History, Kernel,
    MemoryConfig, MemoryParams, PlateSystem, SchemeFlags, Simulation, SourceParams, StepperConfig, YLayout,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const DT: f64 = 1e-3;

fn system() -> PlateSystem {
    PlateSystem::build(GridConfig::new(60, 20, PI / 50.0, 0.1).with_layout(YLayout::CellCentered), 0.5).unwrap()
}

fn frac_params() -> FractionalParams {
    let cfg = FractionalConfig { alpha: 0.95, beta: 2.5, a1: 1.0, r_max: 10.0 * PI, l: 100 };
    FractionalParams::new(cfg, DT, false, false).unwrap()
}

fn mem_params() -> MemoryParams {
    MemoryParams::new(MemoryConfig {
        s_max: 8.0,
        m: Some(80),
        kernel: Kernel { amplitude: 0.05, rate: 2.0 },
        history: History::Separable { rate: 2.0 },
        c0: None,
        c1: None,
    })
    .unwrap()
}

fn random(n: usize, rng: &mut StdRng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn kernels(c: &mut Criterion) {
    let sys = system();
    let n = sys.dim();
    let fp = frac_params();
    let mp = mem_params();
    let mut rng = StdRng::seed_from_u64(7);
    let v = random(n, &mut rng);
    let a = random(n, &mut rng);

    let mut group = c.benchmark_group("kernels");
    for (name, exec) in POLICIES {
        group.bench_with_input(BenchmarkId::new("apply_k", name), &exec, |b, &exec| {
            let mut out = vec![0.0; n];
            b.iter(|| sys.apply_k_into(black_box(&v), &mut out, exec));
        });
        group.bench_with_input(BenchmarkId::new("fractional_step", name), &exec, |b, &exec| {
            let mut st = init_fractional(&fp, n);
            b.iter(|| st.step(black_box(&v), &fp, exec).unwrap());
        });
        group.bench_with_input(BenchmarkId::new("fractional_c1", name), &exec, |b, &exec| {
            let st = init_fractional(&fp, n);
            let mut out = vec![0.0; n];
            b.iter(|| st.c1_contribution_into(black_box(&v), &a, &fp, &mut out, exec));
        });
        group.bench_with_input(BenchmarkId::new("memory_step", name), &exec, |b, &exec| {
            let mut st = init_memory(&mp, &a);
            let small: Vec<f64> = v.iter().map(|x| 1e-6 * x).collect();
            b.iter(|| st.step(black_box(&small), DT, &mp, exec).unwrap());
        });
        group.bench_with_input(BenchmarkId::new("memory_sums", name), &exec, |b, &exec| {
            let st = init_memory(&mp, &a);
            let (mut cur, mut sh) = (vec![0.0; n], vec![0.0; n]);
            b.iter(|| st.weighted_sums_into(&mp, DT, &mut cur, &mut sh, exec));
        });
        group.bench_with_input(BenchmarkId::new("memory_quadratics", name), &exec, |b, &exec| {
            let st = init_memory(&mp, &a);
            b.iter(|| black_box(st.quadratics(&sys, true, exec)));
        });
    }
    group.finish();
}

fn full_step(c: &mut Criterion) {
    let sys = system();
    let load = sys.grid.sample(|x, _| 0.1 * x.sin());
    let u0 = solve_static(&sys, &load).unwrap();
    let v0 = vec![0.0; sys.dim()];
    let flags = SchemeFlags { lambda_in_stiffness: false, c2_sign_variant: true };

    let mut group = c.benchmark_group("newmark_step");
    group.sample_size(20);
    for (name, exec) in POLICIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            let mut sim = Simulation::new(
                &sys,
                frac_params(),
                mem_params(),
                Some(SourceParams::new(4.0)),
                StepperConfig::new(DT),
                flags,
                EnergyConventions::default(),
                u0.clone(),
                v0.clone(),
            )
            .unwrap()
            .with_exec(exec);
            b.iter(|| sim.step().unwrap());
        });
    }
    group.finish();
}

criterion_group!(benches, kernels, full_step);
criterion_main!(benches);
