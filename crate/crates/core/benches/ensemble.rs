use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sspsde::experiments::{run, ExperimentConfig, ExperimentKind};
use sspsde::fv2d::{build_em_map, leveque_initial, BuiltMap, EulerSalt, FvProblem, Grid2D, Stencil};
use sspsde::fv2d::{deformational_noise, solid_body_rotation};
use sspsde::increments::IncrementSampler;
use sspsde::integrators::{EmFlowMap, Integrator, Scheme};
use sspsde::parallel::Execution;
use sspsde::sdebench::{mean_square_error, LinearTestSde, McSettings};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn monte_carlo(c: &mut Criterion) {
    let sde = LinearTestSde::default();
    let p = sde.problem();
    let em = Integrator::new(Scheme::EulerMaruyama, &p);
    let mut g = c.benchmark_group("ms_error_4096_paths");
    for (name, exec) in MODES {
        let mut mc = McSettings::new(1.0, 4096, 1);
        mc.exec = exec;
        g.bench_function(name, |b| {
            b.iter(|| mean_square_error(&em, &sde, 1.0 / 64.0, black_box(mc), &IncrementSampler::gaussian()).unwrap())
        });
    }
    g.finish();
}

fn fv_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("fv_em_step");
    for n in [64usize, 128] {
        let grid = Grid2D::new(n, n).unwrap();
        let q = leveque_initial(&grid);
        for (name, exec) in MODES {
            let adv = build_em_map(
                grid,
                FvProblem::Advection {
                    u: solid_body_rotation(&grid),
                    xi: vec![deformational_noise(&grid)],
                },
                Some(Stencil::ThirteenPoint),
                exec,
            );
            let BuiltMap::Single(adv) = adv else { unreachable!() };
            let mut out = vec![0.0; grid.len()];
            g.bench_with_input(BenchmarkId::new(format!("advection13/{name}"), n), &n, |b, _| {
                b.iter(|| adv.step(black_box(&q.data), 1e-3, &[0.01], &mut out))
            });
            let euler = EulerSalt::new(grid, 8, 1e-4, Some(Stencil::FivePoint)).with_exec(exec);
            let ds = [0.01; 8];
            g.bench_with_input(BenchmarkId::new(format!("euler_salt/{name}"), n), &n, |b, _| {
                b.iter(|| euler.step(black_box(&q.data), 1e-3, &ds, &mut out))
            });
        }
    }
    g.finish();
}

fn field_ensemble(c: &mut Criterion) {
    let mut g = c.benchmark_group("advection2d_ensemble");
    g.sample_size(10);
    for (name, exec) in MODES {
        let mut cfg = ExperimentConfig::defaults(ExperimentKind::Advection2d);
        cfg.nx = 32;
        cfg.ny = 32;
        cfg.nt = 64;
        cfg.exec = exec;
        g.bench_function(name, |b| b.iter(|| run(black_box(&cfg)).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, monte_carlo, fv_step, field_ensemble);
criterion_main!(benches);
