//! Time evolution: mean-field, averaged, prescribed and linear equations, the
//! N-particle master equation and a uniformized particle simulator.

mod checks;
mod master;
mod simulate;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::kernel::{JumpKernel, RateGenerator};
use crate::meanfield::{AveragedKernel, Averaging, KernelRef};
use crate::space::{l1_distance, log_oscillation, Density, FiniteSpace};

pub use checks::{
    averaged_vs_meanfield, comparison_check, stability_check, AveragedGap, ComparisonReport, GapSettings,
    StabilityReport,
};
pub use master::{
    permute_density, product_density, product_nu, solve_master, MasterEquation, MasterPropagator, SparseMatrix,
    DEFAULT_EXPM_MAX, DEFAULT_STATE_CAP,
};
pub use simulate::{simulate_final, simulate_marginals, simulate_particles, MarginalEstimate, ParticleTrajectory, Simulator};

/// Negative values above this magnitude abort a solve.
pub const CLAMP_TOL: f64 = 1e-10;
/// Agreement required between the step-h and step-h/2 solutions.
pub const HALVING_TOL: f64 = 1e-8;

/// A density-valued curve t ↦ σ_t.
pub type DensityCurve = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;
/// A kernel-valued curve t ↦ Λ_t.
pub type KernelCurve = Arc<dyn Fn(f64) -> JumpKernel + Send + Sync>;

/// What drives the jump part of the equation.
#[derive(Clone)]
pub enum Drive {
    /// Λ(ρ_t) with ρ_t the solution itself.
    MeanField(KernelRef),
    /// Λ̄(ρ_t) averaged over N − 1 iid samples.
    Averaged { kern: KernelRef, n: usize, averaging: Averaging },
    /// Λ(σ_t) along a given curve.
    Prescribed { kern: KernelRef, curve: DensityCurve },
    /// A frozen kernel.
    Linear(JumpKernel),
    /// A time-dependent kernel independent of the solution.
    KernelPath(KernelCurve),
}

impl fmt::Debug for Drive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Drive::MeanField(_) => write!(f, "MeanField"),
            Drive::Averaged { n, .. } => write!(f, "Averaged(N = {n})"),
            Drive::Prescribed { .. } => write!(f, "Prescribed"),
            Drive::Linear(_) => write!(f, "Linear"),
            Drive::KernelPath(_) => write!(f, "KernelPath"),
        }
    }
}

impl Drive {
    fn is_linear(&self) -> bool {
        matches!(self, Drive::Linear(_) | Drive::KernelPath(_) | Drive::Prescribed { .. })
    }

    /// Kernel at time `t` for drives that do not depend on the solution.
    pub fn frozen_kernel(&self, t: f64) -> Result<JumpKernel> {
        match self {
            Drive::Linear(k) => Ok(k.clone()),
            Drive::KernelPath(c) => Ok(c(t)),
            Drive::Prescribed { kern, curve } => kern.eval(&probability_masses(&curve(t), kern.space().nu())),
            _ => Err(Error::Invalid("needs a linear or prescribed drive".into())),
        }
    }
}

/// ∂ρ = 𝒦*ρ + 𝒜*(ρ; drive) on [0, t_end] with step `dt`.
#[derive(Debug, Clone)]
pub struct EvolutionProblem {
    pub g: RateGenerator,
    pub drive: Drive,
    pub rho0: Density,
    pub t_end: f64,
    pub dt: f64,
    /// Run the step-halving certification.
    pub certify: bool,
}

impl EvolutionProblem {
    pub fn new(g: RateGenerator, drive: Drive, rho0: Density, t_end: f64, dt: f64) -> Self {
        Self { g, drive, rho0, t_end, dt, certify: true }
    }
}

/// Per-step health of a trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub mass_defect: f64,
    pub min_value: f64,
    pub log_oscillation: f64,
}

/// Densities on a uniform grid with their time derivatives.
#[derive(Debug, Clone)]
pub struct SolutionTrace {
    pub space: FiniteSpace,
    pub times: Vec<f64>,
    pub densities: Vec<Vec<f64>>,
    pub rates: Vec<Vec<f64>>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// L¹ distance at t_end between the step-h and step-h/2 solutions.
    pub halving_defect: Option<f64>,
}

impl SolutionTrace {
    pub fn last(&self) -> &[f64] {
        self.densities.last().expect("trace is never empty")
    }

    /// Cubic Hermite interpolant through the grid values and derivatives.
    pub fn interpolant(&self) -> DensityCurve {
        let times = self.times.clone();
        let w = self.densities.clone();
        let f = self.rates.clone();
        Arc::new(move |t: f64| hermite(&times, &w, &f, t))
    }

    /// Values at `t` by Hermite interpolation.
    pub fn at(&self, t: f64) -> Vec<f64> {
        hermite(&self.times, &self.densities, &self.rates, t)
    }
}

fn hermite(times: &[f64], w: &[Vec<f64>], f: &[Vec<f64>], t: f64) -> Vec<f64> {
    let n = times.len();
    if n == 1 || t <= times[0] {
        return w[0].clone();
    }
    if t >= times[n - 1] {
        return w[n - 1].clone();
    }
    let i = times.partition_point(|&s| s <= t).saturating_sub(1).min(n - 2);
    let h = times[i + 1] - times[i];
    let s = (t - times[i]) / h;
    let (s2, s3) = (s * s, s * s * s);
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    (0..w[i].len())
        .map(|x| h00 * w[i][x] + h10 * h * f[i][x] + h01 * w[i + 1][x] + h11 * h * f[i + 1][x])
        .collect()
}

/// Right-hand side of the evolution.
struct Rhs<'a> {
    problem: &'a EvolutionProblem,
    averaged: Option<AveragedKernel>,
    frozen: Option<DMatrix<f64>>,
}

fn probability_masses(w: &[f64], nu: &[f64]) -> Vec<f64> {
    let m: Vec<f64> = w.iter().zip(nu).map(|(a, n)| a.max(0.0) * n).collect();
    let s: f64 = m.iter().sum();
    m.iter().map(|v| v / s).collect()
}

impl<'a> Rhs<'a> {
    fn new(problem: &'a EvolutionProblem) -> Result<Self> {
        let averaged = match &problem.drive {
            Drive::Averaged { kern, n, averaging } => {
                let probe = vec![1.0 / kern.space().d() as f64; kern.space().d()];
                if kern.averaged_closed_form(&probe).is_some() {
                    None
                } else {
                    Some(AveragedKernel::new(kern.as_ref(), *n, *averaging)?)
                }
            }
            _ => None,
        };
        let frozen = match &problem.drive {
            Drive::Linear(k) => Some(problem.g.kstar() + k.adjoint_generator_matrix()),
            _ => None,
        };
        Ok(Self { problem, averaged, frozen })
    }

    fn kernel_at(&self, t: f64, w: &[f64]) -> Result<JumpKernel> {
        let nu = self.problem.g.space().nu();
        match &self.problem.drive {
            Drive::MeanField(k) => k.eval(&probability_masses(w, nu)),
            Drive::Averaged { kern, .. } => {
                let p = probability_masses(w, nu);
                match &self.averaged {
                    Some(a) => a.eval(kern.as_ref(), &p),
                    None => kern.averaged_closed_form(&p).ok_or_else(|| Error::Invalid("no averaged kernel".into())),
                }
            }
            Drive::Prescribed { kern, curve } => kern.eval(&probability_masses(&curve(t), nu)),
            Drive::Linear(k) => Ok(k.clone()),
            Drive::KernelPath(c) => Ok(c(t)),
        }
    }

    fn eval(&self, t: f64, w: &[f64]) -> Result<Vec<f64>> {
        let v = DVector::from_column_slice(w);
        let out = match &self.frozen {
            Some(m) => m * v,
            None => {
                let lam = self.kernel_at(t, w)?;
                (self.problem.g.kstar() + lam.adjoint_generator_matrix()) * v
            }
        };
        Ok(out.as_slice().to_vec())
    }
}

fn axpy(w: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    w.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

fn integrate(problem: &EvolutionProblem, rhs: &Rhs, steps: usize) -> Result<SolutionTrace> {
    let space = problem.g.space().clone();
    let nu = space.nu().to_vec();
    let mut w = problem.rho0.w().to_vec();
    let m0: f64 = w.iter().zip(&nu).map(|(a, n)| a * n).sum();
    let h = if steps == 0 { 0.0 } else { problem.t_end / steps as f64 };
    let mut trace = SolutionTrace {
        space,
        times: Vec::with_capacity(steps + 1),
        densities: Vec::with_capacity(steps + 1),
        rates: Vec::with_capacity(steps + 1),
        diagnostics: Vec::with_capacity(steps + 1),
        halving_defect: None,
    };
    let mut k1 = rhs.eval(0.0, &w)?;
    trace.times.push(0.0);
    trace.densities.push(w.clone());
    trace.rates.push(k1.clone());
    trace.diagnostics.push(StepDiagnostics {
        mass_defect: 0.0,
        min_value: w.iter().cloned().fold(f64::INFINITY, f64::min),
        log_oscillation: log_oscillation(&w),
    });
    for i in 0..steps {
        let t = i as f64 * h;
        let k2 = rhs.eval(t + 0.5 * h, &axpy(&w, 0.5 * h, &k1))?;
        let k3 = rhs.eval(t + 0.5 * h, &axpy(&w, 0.5 * h, &k2))?;
        let k4 = rhs.eval(t + h, &axpy(&w, h, &k3))?;
        for x in 0..w.len() {
            w[x] += h / 6.0 * (k1[x] + 2.0 * k2[x] + 2.0 * k3[x] + k4[x]);
        }
        let t_next = (i + 1) as f64 * h;
        let min_value = w.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_value < -CLAMP_TOL {
            let atom = w.iter().position(|&v| v == min_value).unwrap_or(0);
            return Err(Error::Instability { value: min_value, atom, t: t_next });
        }
        for v in &mut w {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let m: f64 = w.iter().zip(&nu).map(|(a, n)| a * n).sum();
        if m > 0.0 {
            let r = m0 / m;
            w.iter_mut().for_each(|v| *v *= r);
        }
        k1 = rhs.eval(t_next, &w)?;
        trace.times.push(t_next);
        trace.densities.push(w.clone());
        trace.rates.push(k1.clone());
        trace.diagnostics.push(StepDiagnostics {
            mass_defect: (m - m0).abs(),
            min_value,
            log_oscillation: log_oscillation(&w),
        });
    }
    Ok(trace)
}

/// Number of uniform steps covering [0, t_end] with step at most `dt`.
pub fn step_count(t_end: f64, dt: f64) -> usize {
    if t_end <= 0.0 {
        0
    } else {
        (t_end / dt - 1e-9).ceil().max(1.0) as usize
    }
}

/// Fixed-step fourth-order integration with a step-halving certificate.
pub fn solve(problem: &EvolutionProblem) -> Result<SolutionTrace> {
    check_dim(problem.g.space().d(), problem.rho0.w().len())?;
    if !(problem.dt > 0.0) || !(problem.t_end >= 0.0) {
        return Err(Error::Invalid("need dt > 0 and t_end >= 0".into()));
    }
    if !problem.drive.is_linear() && (problem.rho0.mass() - 1.0).abs() > 1e-10 {
        return Err(Error::Invalid("initial density must be a probability density".into()));
    }
    let rhs = Rhs::new(problem)?;
    let steps = step_count(problem.t_end, problem.dt);
    let mut trace = integrate(problem, &rhs, steps)?;
    if problem.certify && steps > 0 {
        let fine = integrate(problem, &rhs, 2 * steps)?;
        let defect = l1_distance(trace.last(), fine.last(), problem.g.space().nu());
        if defect > HALVING_TOL {
            return Err(Error::NonConvergence { defect, tol: HALVING_TOL });
        }
        trace.halving_defect = Some(defect);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expm::expm;
    use crate::meanfield::{ConstantKernel, MeanFieldKernel, TwoThreeBodyKernel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_setup(rng: &mut ChaCha8Rng, d: usize) -> (FiniteSpace, RateGenerator, Density) {
        let s = FiniteSpace::new((0..d).map(|_| rng.gen_range(0.5..2.0)).collect()).unwrap();
        let g = RateGenerator::new(&s, DMatrix::from_fn(d, d, |_, _| rng.gen_range(0.0..1.0))).unwrap();
        let w: Vec<f64> = (0..d).map(|_| rng.gen_range(0.1..1.0)).collect();
        let m: f64 = w.iter().zip(s.nu()).map(|(a, n)| a * n).sum();
        let rho = Density::probability(&s, w.iter().map(|v| v / m).collect()).unwrap();
        (s, g, rho)
    }

    #[test]
    fn symmetric_fixed_point() {
        let s = FiniteSpace::counting(3).unwrap();
        let lam = JumpKernel::new(&s, DMatrix::from_element(3, 3, 0.8)).unwrap();
        let kern: KernelRef = Arc::new(ConstantKernel::new(lam));
        let p = EvolutionProblem::new(RateGenerator::zero(&s), Drive::MeanField(kern), Density::uniform(&s), 2.0, 0.01);
        let tr = solve(&p).unwrap();
        for w in &tr.densities {
            assert!(w.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-14));
        }
    }

    #[test]
    fn linear_mode_matches_expm() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10 {
            let d = rng.gen_range(2..=6);
            let (s, g, rho) = random_setup(&mut rng, d);
            let lam = JumpKernel::new(&s, DMatrix::from_fn(d, d, |_, _| rng.gen_range(0.0..1.5))).unwrap();
            let a = g.kstar() + lam.adjoint_generator_matrix();
            let want = expm(&a).unwrap() * DVector::from_column_slice(rho.w());
            let tr = solve(&EvolutionProblem::new(g, Drive::Linear(lam), rho, 1.0, 1e-3)).unwrap();
            assert!(l1_distance(tr.last(), want.as_slice(), s.nu()) < 1e-8);
        }
    }

    #[test]
    fn prescribed_reproduces_meanfield() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let (s, g, rho) = random_setup(&mut rng, 3);
        let g1 = (0..27).map(|_| rng.gen_range(0.0..1.0)).collect();
        let g2 = (0..81).map(|_| rng.gen_range(0.0..1.0)).collect();
        let kern: KernelRef = Arc::new(TwoThreeBodyKernel::new(&s, g1, Some(g2), None).unwrap());
        let mf = solve(&EvolutionProblem::new(g.clone(), Drive::MeanField(kern.clone()), rho.clone(), 1.0, 1e-2)).unwrap();
        let curve = mf.interpolant();
        let pr = solve(&EvolutionProblem::new(g, Drive::Prescribed { kern, curve }, rho, 1.0, 1e-2)).unwrap();
        for (a, b) in mf.densities.iter().zip(&pr.densities) {
            assert!(l1_distance(a, b, s.nu()) < 1e-8);
        }
    }

    #[test]
    fn averaged_two_three_body_is_n_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let (s, g, rho) = random_setup(&mut rng, 3);
        let g1 = (0..27).map(|_| rng.gen_range(0.0..1.0)).collect();
        let g2 = (0..81).map(|_| rng.gen_range(0.0..1.0)).collect();
        let kern: KernelRef = Arc::new(TwoThreeBodyKernel::new(&s, g1, Some(g2), None).unwrap());
        let mf = solve(&EvolutionProblem::new(g.clone(), Drive::MeanField(kern.clone()), rho.clone(), 0.5, 1e-2)).unwrap();
        for n in [3, 5, 8] {
            let drive = Drive::Averaged { kern: kern.clone(), n, averaging: Averaging::default() };
            let av = solve(&EvolutionProblem::new(g.clone(), drive, rho.clone(), 0.5, 1e-2)).unwrap();
            for (a, b) in mf.densities.iter().zip(&av.densities) {
                assert!(l1_distance(a, b, s.nu()) < 1e-12);
            }
        }
    }

    #[test]
    fn trace_invariants_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let (s, g, rho) = random_setup(&mut rng, 4);
        let g1 = (0..64).map(|_| rng.gen_range(0.0..1.0)).collect();
        let kern = TwoThreeBodyKernel::new(&s, g1, None, None).unwrap();
        let c = kern.constants();
        let m = g.m_k() + c.m_lambda.unwrap() + c.m_lambda_star.unwrap();
        let kern: KernelRef = Arc::new(kern);
        let drive = Drive::Averaged { kern, n: 4, averaging: Averaging::default() };
        let tr = solve(&EvolutionProblem::new(g, drive, rho, 1.0, 1e-2)).unwrap();
        let d0 = tr.diagnostics[0].log_oscillation;
        for (t, dg) in tr.times.iter().zip(&tr.diagnostics) {
            assert!(dg.mass_defect <= 1e-8);
            assert!(dg.min_value >= -CLAMP_TOL);
            assert!(dg.log_oscillation <= d0 + 2.0 * m * t + 1e-6);
        }
        assert!(tr.halving_defect.unwrap() < HALVING_TOL);
        let _ = s;
    }

    #[test]
    fn rejects_bad_problems() {
        let s = FiniteSpace::counting(2).unwrap();
        let lam = JumpKernel::zero(&s);
        let rho = Density::uniform(&s);
        let mut p = EvolutionProblem::new(RateGenerator::zero(&s), Drive::Linear(lam), rho, 1.0, 0.0);
        assert!(solve(&p).is_err());
        p.dt = 0.1;
        p.t_end = 0.0;
        assert_eq!(solve(&p).unwrap().times, vec![0.0]);
    }

    #[test]
    fn hermite_is_exact_for_cubics() {
        let times: Vec<f64> = (0..5).map(|i| i as f64 * 0.5).collect();
        let w: Vec<Vec<f64>> = times.iter().map(|t| vec![t * t * t - t]).collect();
        let f: Vec<Vec<f64>> = times.iter().map(|t| vec![3.0 * t * t - 1.0]).collect();
        for t in [0.1, 0.77, 1.3, 1.99] {
            assert!((hermite(&times, &w, &f, t)[0] - (t * t * t - t)).abs() < 1e-12);
        }
    }
}
