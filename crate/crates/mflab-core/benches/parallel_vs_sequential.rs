use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mflab_core::concentration::{build_phi_from_dynamics, concentration_test, ConcentrationSettings};
use mflab_core::dynamics::{simulate_marginals, Simulator};
use mflab_core::kernel::RateGenerator;
use mflab_core::meanfield::{epsilon_n, verify_a3, KernelRef, SweepMode, TwoThreeBodyKernel};
use mflab_core::par::Exec;
use mflab_core::space::{Density, FiniteSpace};

const STRATEGIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn kernel(space: &FiniteSpace) -> KernelRef {
    let d = space.d();
    let gamma: Vec<f64> = (0..d * d * d).map(|i| 0.2 + ((i * 7) % 5) as f64 * 0.3).collect();
    Arc::new(TwoThreeBodyKernel::new(space, gamma, None, None).unwrap())
}

fn bench(c: &mut Criterion) {
    let space = FiniteSpace::counting(3).unwrap();
    let kern = kernel(&space);
    let rho = [0.2, 0.3, 0.5];

    let mut group = c.benchmark_group("epsilon_n");
    for (name, exec) in STRATEGIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| epsilon_n(kern.as_ref(), &rho, 20, 50_000, 1, exec).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("verify_a3_sampled");
    for (name, exec) in STRATEGIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| verify_a3(kern.as_ref(), 40, SweepMode::Sampled { samples: 20_000, seed: 2 }, exec).unwrap())
        });
    }
    group.finish();

    let g = RateGenerator::from_rows(&space, &[vec![0.0, 0.5, 0.1], vec![0.2, 0.0, 0.4], vec![0.3, 0.3, 0.0]]).unwrap();
    let mut group = c.benchmark_group("simulate_marginals");
    group.sample_size(20);
    for (name, exec) in STRATEGIES {
        let sim = Simulator::new(&g, kern.clone(), 10, exec).unwrap();
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| simulate_marginals(&sim, &rho, 1.0, 2_000, 3, exec).unwrap())
        });
    }
    group.finish();

    let two = FiniteSpace::counting(2).unwrap();
    let kern2 = kernel(&two);
    let rhobar = Density::probability(&two, vec![0.35, 0.65]).unwrap();
    let phi = build_phi_from_dynamics(kern2.as_ref(), &rhobar, 32, 1_000_000, Exec::Sequential).unwrap();
    let settings = ConcentrationSettings { samples: 100_000, seed: 4, exact_cap: 0, ..Default::default() };
    let mut group = c.benchmark_group("concentration_mc");
    group.sample_size(20);
    for (name, exec) in STRATEGIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| concentration_test(&phi, &rhobar, &settings, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
