use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use frfkit_bench::frat_training;
use frfkit_core::hybrid::RationalBasis;
use frfkit_core::interpolate::{assemble_system, fit_kernel};
use frfkit_core::kernels::{
    ComplexKernelPair, KernelKind, KernelPair, KernelParams, LaplacePoint, Pseudo,
};

fn kernel_eval(c: &mut Criterion) {
    let params = KernelParams::new(0.1, 1.0).unwrap();
    let s = LaplacePoint::on_axis(0.3);
    let s0 = LaplacePoint::on_axis(0.7);
    for kind in [KernelKind::Szego, KernelKind::StableSpline] {
        let pair = KernelPair::new(kind, Pseudo::Symmetric, params);
        c.bench_function(&format!("kc/{}", kind.name()), |b| {
            b.iter(|| pair.kc(black_box(s), black_box(s0)))
        });
    }
}

fn assembly(c: &mut Criterion) {
    let pair = KernelPair::szego(Pseudo::Symmetric, KernelParams::new(0.1, 1.0).unwrap());
    let mut group = c.benchmark_group("assemble");
    for n in [10, 20, 50] {
        let vt = frat_training(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &vt, |b, vt| {
            b.iter(|| assemble_system::<_, RationalBasis>(vt, &pair, None).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("fit_and_predict");
    for n in [10, 20, 50] {
        let vt = frat_training(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &vt, |b, vt| {
            b.iter(|| fit_kernel(vt, pair).unwrap().predict_omega(0.55).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, kernel_eval, assembly);
criterion_main!(benches);
