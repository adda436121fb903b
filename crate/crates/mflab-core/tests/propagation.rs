use std::sync::Arc;

use mflab_core::dynamics::{product_density, solve, solve_master, Drive, EvolutionProblem, MasterEquation};
use mflab_core::kernel::{JumpKernel, RateGenerator};
use mflab_core::meanfield::{ConstantKernel, KernelRef, TwoThreeBodyKernel};
use mflab_core::par::Exec;
use mflab_core::space::{l1_distance, Density, FiniteSpace};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn two_body() -> (FiniteSpace, RateGenerator, KernelRef) {
    let s = FiniteSpace::new(vec![1.0, 2.0]).unwrap();
    let g = RateGenerator::new(&s, DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.3, 0.0])).unwrap();
    let gamma1 = vec![0.0, 1.0, 0.5, 0.0, 0.8, 0.3, 0.2, 0.6];
    (s.clone(), g, Arc::new(TwoThreeBodyKernel::new(&s, gamma1, None, None).unwrap()))
}

fn marginal_gap(n: usize) -> f64 {
    let (s, g, kern) = two_body();
    let rho0 = Density::probability(&s, vec![0.8, 0.1]).unwrap();
    let mf = solve(&EvolutionProblem::new(g.clone(), Drive::MeanField(kern.clone()), rho0.clone(), 1.0, 1e-3)).unwrap();
    let me = MasterEquation::build(&g, kern.as_ref(), n, 100_000, Exec::Sequential).unwrap();
    let f = solve_master(&me, &product_density(&vec![rho0.w().to_vec(); n]), 1.0, 1e-3).unwrap();
    l1_distance(&me.marginal(&f, 0), mf.last(), s.nu())
}

#[test]
fn one_particle_marginal_approaches_mean_field() {
    let gaps: Vec<f64> = (2..=7).map(marginal_gap).collect();
    for w in gaps.windows(2) {
        assert!(w[1] < w[0], "{gaps:?}");
    }
    assert!(gaps[5] < 0.5 * gaps[0]);
}

#[test]
fn constant_kernel_particles_stay_independent() {
    let s = FiniteSpace::new(vec![0.5, 1.0, 1.5]).unwrap();
    let g = RateGenerator::new(&s, DMatrix::from_row_slice(3, 3, &[0.0, 0.2, 0.1, 0.4, 0.0, 0.3, 0.0, 0.6, 0.0])).unwrap();
    let lam = JumpKernel::new(&s, DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.5, 0.2, 0.0, 0.7, 0.9, 0.1, 0.0])).unwrap();
    let kern: KernelRef = Arc::new(ConstantKernel::new(lam.clone()));
    let rho0 = Density::probability(&s, vec![0.8, 0.3, 0.2]).unwrap();
    let lin = solve(&EvolutionProblem::new(g.clone(), Drive::Linear(lam), rho0.clone(), 1.0, 1e-3)).unwrap();
    let me = MasterEquation::build(&g, kern.as_ref(), 3, 1_000, Exec::Sequential).unwrap();
    let f = solve_master(&me, &product_density(&vec![rho0.w().to_vec(); 3]), 1.0, 1e-3).unwrap();
    let want = product_density(&vec![lin.last().to_vec(); 3]);
    assert!(l1_distance(&f, &want, me.nu_n()) < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mean_field_flow_keeps_probability(
        q in proptest::collection::vec(0.0..2.0f64, 9),
        gamma in proptest::collection::vec(0.0..2.0f64, 27),
        w in proptest::collection::vec(0.05..1.0f64, 3),
    ) {
        let s = FiniteSpace::counting(3).unwrap();
        let g = RateGenerator::new(&s, DMatrix::from_row_slice(3, 3, &q)).unwrap();
        let kern: KernelRef = Arc::new(TwoThreeBodyKernel::new(&s, gamma, None, None).unwrap());
        let total: f64 = w.iter().sum();
        let rho0 = Density::probability(&s, w.iter().map(|v| v / total).collect()).unwrap();
        let tr = solve(&EvolutionProblem::new(g, Drive::MeanField(kern), rho0, 1.0, 1e-2)).unwrap();
        for step in &tr.densities {
            prop_assert!(step.iter().all(|v| *v >= 0.0));
            prop_assert!((step.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
