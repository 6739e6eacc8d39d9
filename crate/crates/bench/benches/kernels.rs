use bosonize_bench::{axis, coulomb};
use bosonize_core::correlation::{bos_term, e_corr_ex};
use bosonize_core::lattice::enumerate_fermi_ball;
use bosonize_core::onebody::build_kernel_bundle;
use bosonize_core::plasmon::compute_mode;
use bosonize_core::quad::Quadrature;
use bosonize_core::riemann::power_sum;
use bosonize_core::Lune;
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

fn lattice(c: &mut Criterion) {
    let mut g = c.benchmark_group("lune");
    for kf2 in [100, 2500] {
        g.bench_with_input(BenchmarkId::from_parameter(kf2), &kf2, |b, &kf2| {
            b.iter(|| Lune::new(black_box(kf2), axis(1)).unwrap())
        });
    }
    g.finish();
    c.bench_function("fermi_ball/2500", |b| b.iter(|| enumerate_fermi_ball(black_box(2500)).unwrap()));
    let lune = Lune::new(10000, axis(1)).unwrap();
    c.bench_function("power_sum/10000", |b| b.iter(|| power_sum(&lune, black_box(-1.0))));
}

fn onebody(c: &mut Criterion) {
    let mut g = c.benchmark_group("kernel_bundle");
    g.sample_size(20);
    for kf2 in [25, 100] {
        let sys = coulomb(kf2, true);
        g.bench_with_input(BenchmarkId::from_parameter(kf2), &sys, |b, sys| {
            b.iter(|| build_kernel_bundle(sys, axis(1)).unwrap())
        });
    }
    g.finish();
}

fn correlation(c: &mut Criterion) {
    let sys = coulomb(100, true);
    let quad = Quadrature::default();
    c.bench_function("bos_term/100", |b| b.iter(|| bos_term(&sys, axis(1), &quad).unwrap()));
    let mut g = c.benchmark_group("e_corr_ex");
    g.sample_size(10);
    g.bench_function("25", |b| b.iter(|| e_corr_ex(&coulomb(25, true), 6).unwrap()));
    g.finish();
}

fn plasmon(c: &mut Criterion) {
    let mut g = c.benchmark_group("plasmon_mode");
    g.sample_size(20);
    for kf2 in [400, 1600] {
        let sys = coulomb(kf2, false);
        g.bench_with_input(BenchmarkId::from_parameter(kf2), &sys, |b, sys| {
            b.iter(|| compute_mode(sys, axis(1)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, lattice, onebody, correlation, plasmon);
criterion_main!(benches);
