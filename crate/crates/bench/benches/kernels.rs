use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use csvortex::solver::{solve, DiscreteProblem, SolveSettings};
use csvortex::{ConformalFactor, GridSpec, Method, ScalarGrid, Vortex, VortexConfiguration};

fn pair_configuration() -> VortexConfiguration {
    VortexConfiguration::new(
        vec![
            Vortex {
                x: 2.0,
                y: 0.0,
                multiplicity: 1,
            },
            Vortex {
                x: -2.0,
                y: 0.0,
                multiplicity: 1,
            },
        ],
        1.0,
    )
    .unwrap()
}

fn bench_laplacian(c: &mut Criterion) {
    let mut group = c.benchmark_group("laplacian0");
    for &n in &[129usize, 257, 513] {
        let spec = GridSpec::new(16.0, n).unwrap();
        let g = ScalarGrid::from_fn(spec, |x, y| (-(x * x + y * y) / 8.0).exp());
        group.bench_with_input(BenchmarkId::from_parameter(n), &g, |b, g| {
            b.iter(|| g.laplacian0())
        });
    }
    group.finish();
}

fn bench_residual(c: &mut Criterion) {
    let mut group = c.benchmark_group("residual");
    let vc = pair_configuration();
    let cf = ConformalFactor::flat();
    for &n in &[129usize, 257] {
        let spec = GridSpec::for_vortices(16.0, n, &vc).unwrap();
        let problem = DiscreteProblem::new(&vc, &cf, spec).unwrap();
        let u = ScalarGrid::zeros(spec);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| problem.residual(&u).unwrap())
        });
    }
    group.finish();
}

fn bench_newton_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("newton_solve");
    group.sample_size(10);
    let vc = pair_configuration();
    let cf = ConformalFactor::flat();
    let settings = SolveSettings {
        method: Method::Newton,
        residual_tol: 1e-8,
        ..Default::default()
    };
    group.bench_function("pair_L12_N129", |b| {
        b.iter(|| solve(&vc, &cf, &settings, 12.0, 129).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_laplacian, bench_residual, bench_newton_solve);
criterion_main!(benches);
