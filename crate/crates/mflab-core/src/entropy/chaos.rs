use serde::{Deserialize, Serialize};

use super::{marginal, renormalized_entropy};
use crate::dynamics::{product_density, solve, step_count, Drive, EvolutionProblem, MasterEquation, MasterPropagator};
use crate::error::{Error, Result};
use crate::kernel::RateGenerator;
use crate::meanfield::{sweep_intensities, verify_a3, verify_a4, Averaging, KernelRef, KernelTable, SweepMode};
use crate::par::{map_slice, Exec};
use crate::space::{l1_distance, log_oscillation, Density};

/// b = (1/11)·(3/√2 + (5/2)√(3/2))⁻¹.
pub fn b_constant() -> f64 {
    (1.0 / 11.0) / (3.0 / 2f64.sqrt() + 2.5 * 1.5f64.sqrt())
}

/// Which expression to use for the first entry of C_T.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CtForm {
    /// max{2B·M_Λ + M*_Λ, Θ(B + 1)}
    #[default]
    Printed,
    /// max{2(B·M_Λ + M*_Λ), Θ(B + 1)}
    Grouped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaConstants {
    pub m_k: f64,
    pub m_lambda: f64,
    pub m_lambda_star: f64,
    pub theta: f64,
    pub delta0: f64,
    pub t: f64,
    pub m: f64,
    pub b_t: f64,
    pub c_t: f64,
    pub b: f64,
    /// b / C_T, or 0 when C_T = 0.
    pub beta: f64,
    pub ct_form: CtForm,
}

/// (e^{rt} − 1)/r, continuous at r = 0.
fn growth(r: f64, t: f64) -> f64 {
    if r > 0.0 {
        (r * t).exp_m1() / r
    } else {
        t
    }
}

impl BetaConstants {
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        m_k: f64,
        m_lambda: f64,
        m_lambda_star: f64,
        theta: f64,
        delta0: f64,
        t: f64,
        ct_form: CtForm,
    ) -> Result<Self> {
        for (name, v) in [("M_K", m_k), ("M_Lambda", m_lambda), ("M*_Lambda", m_lambda_star), ("Theta", theta), ("delta0", delta0), ("T", t)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Invalid(format!("{name} = {v} must be finite and nonnegative")));
            }
        }
        let m = m_k + m_lambda + m_lambda_star;
        let b_t = (delta0 + 2.0 * m * t).exp();
        let first = match ct_form {
            CtForm::Printed => 2.0 * b_t * m_lambda + m_lambda_star,
            CtForm::Grouped => 2.0 * (b_t * m_lambda + m_lambda_star),
        };
        let c_t = first.max(theta * (b_t + 1.0));
        let b = b_constant();
        let beta = if c_t > 0.0 { b / c_t } else { 0.0 };
        Ok(Self { m_k, m_lambda, m_lambda_star, theta, delta0, t, m, b_t, c_t, b, beta, ct_form })
    }

    /// W₀e^{βt} + (log 2/N)(e^{βT} − 1)/β.
    pub fn bound(&self, w0: f64, t: f64, big_n: usize) -> f64 {
        w0 * (self.beta * t).exp() + 2f64.ln() / big_n as f64 * growth(self.beta, self.t)
    }

    /// The same estimate with Grönwall rate η = C_T/b, the rate at which the
    /// exponential-moment bound applies: W₀e^{t/β} + (log 2/N)(e^{t/β} − 1).
    pub fn bound_proof_rate(&self, w0: f64, t: f64, big_n: usize) -> f64 {
        if self.c_t == 0.0 {
            return w0;
        }
        let eta = self.c_t / self.b;
        let growth = if w0 == 0.0 { 0.0 } else { w0 * (eta * t).exp() };
        growth + 2f64.ln() / big_n as f64 * (eta * t).exp_m1()
    }
}

/// Initial law of the N-particle system.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialLaw {
    /// ρ̄₀^{⊗N}.
    Chaotic,
    /// ρ₀^{⊗N} for a density ρ₀ relative to ν.
    Product(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChaosSettings {
    pub t_end: f64,
    pub dt: f64,
    pub ct_form: CtForm,
    pub sweep: SweepMode,
    pub state_cap: usize,
    pub averaging: Averaging,
    pub exec: Exec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundStatus {
    Pass,
    /// Exceeds the bound by at most 1e-6.
    WithinTolerance,
    Fail,
}

/// k-marginal L¹ gap against √(2k·H_N), maximized over the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginalGap {
    pub k: usize,
    pub max_l1: f64,
    pub bound_at_max: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyTrace {
    pub n: usize,
    pub times: Vec<f64>,
    pub w: Vec<f64>,
    pub bound: Vec<f64>,
    pub bound_proof_rate: Vec<f64>,
    pub constants: BetaConstants,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub declared_constants: Option<BetaConstants>,
    pub sup_w: f64,
    pub sup_nw: f64,
    pub status: BoundStatus,
    pub marginal_gaps: Vec<MarginalGap>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChaosReport {
    pub traces: Vec<EntropyTrace>,
    /// sup_t N·W_N(t) for N ≥ 5 never exceeds 1.2 times its value at the previous N.
    pub nw_non_increasing_beyond_4: bool,
    /// Every sup_t N·W_N(t) is below log 2·(e^{βT} − 1)/β for its own β.
    pub nw_bounded: bool,
}

fn verified_constants(kern: &KernelRef, g: &RateGenerator, big_n: usize, delta0: f64, s: &ChaosSettings) -> Result<BetaConstants> {
    let sups = match s.sweep {
        SweepMode::Exhaustive { cap } => KernelTable::build(kern.as_ref(), (big_n - 1) as u32, cap, s.exec)?.intensity_sups(),
        SweepMode::Sampled { samples, seed } => sweep_intensities(kern.as_ref(), samples, seed)?,
    };
    let a3 = verify_a3(kern.as_ref(), big_n, s.sweep, s.exec)?;
    if !a3.within_declared {
        return Err(Error::Hypothesis(format!(
            "first-order bounded difference {} exceeds declared {:?}",
            a3.theta_hat, a3.declared
        )));
    }
    let mut theta = a3.theta_hat;
    if big_n >= 3 {
        let a4 = verify_a4(kern.as_ref(), big_n, s.sweep, s.exec)?;
        if !a4.within_declared {
            return Err(Error::Hypothesis(format!(
                "second-order bounded difference {} exceeds declared {:?}",
                a4.theta_hat, a4.declared
            )));
        }
        theta = theta.max(a4.theta_hat);
    }
    let declared = kern.constants();
    for (name, hat, dec) in [
        ("M_Lambda", sups.m_lambda_hat, declared.m_lambda),
        ("M*_Lambda", sups.m_lambda_star_hat, declared.m_lambda_star),
    ] {
        if let Some(dv) = dec {
            if hat > dv * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::Hypothesis(format!("{name} sweep {hat} exceeds declared {dv}")));
            }
        }
    }
    BetaConstants::assemble(g.m_k(), sups.m_lambda_hat, sups.m_lambda_star_hat, theta, delta0, s.t_end, s.ct_form)
}

fn run_one(
    g: &RateGenerator,
    kern: &KernelRef,
    rho0bar: &Density,
    init: &InitialLaw,
    big_n: usize,
    s: &ChaosSettings,
) -> Result<EntropyTrace> {
    let nu = g.space().nu();
    let delta0 = log_oscillation(rho0bar.w());
    if !delta0.is_finite() {
        return Err(Error::Hypothesis("log of the mean-field initial density must be bounded".into()));
    }
    let constants = verified_constants(kern, g, big_n, delta0, s)?;
    let dc = kern.constants();
    let declared_constants = match (dc.m_lambda, dc.m_lambda_star, dc.theta) {
        (Some(a), Some(b), Some(th)) => Some(BetaConstants::assemble(g.m_k(), a, b, th, delta0, s.t_end, s.ct_form)?),
        _ => None,
    };
    let me = MasterEquation::build(g, kern.as_ref(), big_n, s.state_cap, s.exec)?;
    let drive = Drive::Averaged { kern: kern.clone(), n: big_n, averaging: s.averaging };
    let mut problem = EvolutionProblem::new(g.clone(), drive, rho0bar.clone(), s.t_end, s.dt);
    problem.certify = false;
    let bar = solve(&problem)?;
    let steps = step_count(s.t_end, s.dt);
    let h = if steps == 0 { 0.0 } else { s.t_end / steps as f64 };
    let f0 = match init {
        InitialLaw::Chaotic => product_density(&vec![rho0bar.w().to_vec(); big_n]),
        InitialLaw::Product(p) => product_density(&vec![p.clone(); big_n]),
    };
    let path = if steps == 0 { vec![f0] } else { MasterPropagator::new(&me, h, s.dt)?.run(&me, &f0, steps)? };
    let nu_n = me.nu_n();
    let mut w = Vec::with_capacity(path.len());
    let mut gaps: Vec<MarginalGap> = (1..=big_n.min(2))
        .map(|k| MarginalGap { k, max_l1: 0.0, bound_at_max: 0.0, holds: true })
        .collect();
    for (f, rb) in path.iter().zip(&bar.densities) {
        let reference = product_density(&vec![rb.clone(); big_n]);
        let wn = renormalized_entropy(f, &reference, nu_n, big_n);
        w.push(wn);
        for gap in &mut gaps {
            let k = gap.k;
            let mk = marginal(f, nu, big_n, k)?;
            let l1 = l1_distance(&mk, &product_density(&vec![rb.clone(); k]), &product_density(&vec![nu.to_vec(); k]));
            let bound = (2.0 * k as f64 * wn.max(0.0)).sqrt();
            gap.holds &= l1 <= bound + 1e-9;
            if l1 >= gap.max_l1 {
                gap.max_l1 = l1;
                gap.bound_at_max = bound;
            }
        }
    }
    let w0 = w[0];
    let bound: Vec<f64> = bar.times.iter().map(|&t| constants.bound(w0, t, big_n)).collect();
    let bound_proof_rate = bar.times.iter().map(|&t| constants.bound_proof_rate(w0, t, big_n)).collect();
    let worst = w.iter().zip(&bound).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
    let status = if worst <= 1e-9 {
        BoundStatus::Pass
    } else if worst <= 1e-6 {
        BoundStatus::WithinTolerance
    } else {
        BoundStatus::Fail
    };
    let sup_w = w.iter().cloned().fold(0.0, f64::max);
    Ok(EntropyTrace {
        n: big_n,
        times: bar.times,
        w,
        bound,
        bound_proof_rate,
        constants,
        declared_constants,
        sup_w,
        sup_nw: big_n as f64 * sup_w,
        status,
        marginal_gaps: gaps,
    })
}

/// Exact W_N(t) = H_N(ρ_t^{(N)} ‖ ρ̄_t^{⊗N}) against the entropy bound for each N.
pub fn chaos_experiment(
    g: &RateGenerator,
    kern: &KernelRef,
    rho0bar: &Density,
    init: &InitialLaw,
    n_list: &[usize],
    s: &ChaosSettings,
) -> Result<ChaosReport> {
    if (rho0bar.mass() - 1.0).abs() > 1e-10 {
        return Err(Error::Invalid("mean-field initial density must be a probability density".into()));
    }
    if let InitialLaw::Product(p) = init {
        let m: f64 = p.iter().zip(g.space().nu()).map(|(a, b)| a * b).sum();
        if p.len() != g.space().d() || (m - 1.0).abs() > 1e-10 || p.iter().any(|v| *v < 0.0) {
            return Err(Error::Invalid("initial particle density must be a probability density".into()));
        }
    }
    let traces = map_slice(s.exec, n_list, |&n| run_one(g, kern, rho0bar, init, n, s))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut nw_non_increasing_beyond_4 = true;
    for pair in traces.windows(2) {
        if pair[1].n > 4 && pair[0].n >= 4 && pair[1].sup_nw > 1.2 * pair[0].sup_nw + 1e-12 {
            nw_non_increasing_beyond_4 = false;
        }
    }
    let nw_bounded = traces
        .iter()
        .all(|t| t.sup_nw <= 2f64.ln() * growth(t.constants.beta, t.constants.t) + t.n as f64 * 1e-6);
    Ok(ChaosReport { traces, nw_non_increasing_beyond_4, nw_bounded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::JumpKernel;
    use crate::meanfield::{ConstantKernel, TwoThreeBodyKernel};
    use crate::space::FiniteSpace;
    use nalgebra::DMatrix;
    use std::sync::Arc;

    #[test]
    fn b_matches_formula() {
        let b = b_constant();
        // 3/√2 + 2.5·√1.5 = 5.18318252…
        assert!((b - 1.0 / (11.0 * 5.183_182_522)).abs() < 1e-10);
        assert!((b - 0.017_539_2).abs() < 1e-7);
    }

    #[test]
    fn assembly() {
        let c = BetaConstants::assemble(0.5, 1.0, 2.0, 0.25, 0.1, 1.0, CtForm::Printed).unwrap();
        let bt = (0.1f64 + 2.0 * 3.5).exp();
        assert!((c.b_t - bt).abs() < 1e-12 * bt);
        assert!((c.c_t - (2.0 * bt + 2.0).max(0.25 * (bt + 1.0))).abs() < 1e-9);
        let gr = BetaConstants::assemble(0.5, 1.0, 2.0, 0.25, 0.1, 1.0, CtForm::Grouped).unwrap();
        assert!((gr.c_t - 2.0 * (bt + 2.0)).abs() < 1e-9);
        assert!(c.beta > 0.0);
        let zero = BetaConstants::assemble(0.0, 0.0, 0.0, 0.0, 0.0, 1.0, CtForm::Printed).unwrap();
        assert_eq!(zero.beta, 0.0);
        assert!((zero.bound(0.0, 1.0, 2) - 2f64.ln() / 2.0).abs() < 1e-15);
        assert!(BetaConstants::assemble(-1.0, 0.0, 0.0, 0.0, 0.0, 1.0, CtForm::Printed).is_err());
    }

    #[test]
    fn larger_constants_weaken_proof_rate_bound_and_strengthen_stated_one() {
        let base = BetaConstants::assemble(0.3, 1.0, 1.0, 0.5, 0.2, 0.5, CtForm::Printed).unwrap();
        let bigger = [
            BetaConstants::assemble(0.3, 2.0, 1.0, 0.5, 0.2, 0.5, CtForm::Printed).unwrap(),
            BetaConstants::assemble(0.3, 1.0, 1.0, 5.0, 0.2, 0.5, CtForm::Printed).unwrap(),
            BetaConstants::assemble(0.3, 1.0, 1.0, 0.5, 1.2, 0.5, CtForm::Printed).unwrap(),
        ];
        for c in bigger {
            assert!(c.bound_proof_rate(0.01, 0.5, 4) >= base.bound_proof_rate(0.01, 0.5, 4));
            assert!(c.bound(0.01, 0.5, 4) <= base.bound(0.01, 0.5, 4));
        }
    }

    #[test]
    fn proof_rate_overflow_is_not_nan() {
        let c = BetaConstants::assemble(0.2, 1.0, 1.0, 1.0, 1.4, 0.5, CtForm::Printed).unwrap();
        let v = c.bound_proof_rate(0.0, 1e3, 4);
        assert!(!v.is_nan() && v > 0.0);
    }

    fn settings() -> ChaosSettings {
        ChaosSettings {
            t_end: 0.5,
            dt: 0.01,
            ct_form: CtForm::Printed,
            sweep: SweepMode::default(),
            state_cap: 20_000,
            averaging: Averaging::default(),
            exec: Exec::Parallel,
        }
    }

    #[test]
    fn independent_particles_stay_independent() {
        let s = FiniteSpace::new(vec![1.0, 2.0]).unwrap();
        let g = RateGenerator::new(&s, DMatrix::from_row_slice(2, 2, &[0.0, 0.7, 0.3, 0.0])).unwrap();
        let kern: KernelRef = Arc::new(ConstantKernel::new(
            JumpKernel::new(&s, DMatrix::from_row_slice(2, 2, &[0.0, 0.4, 0.9, 0.0])).unwrap(),
        ));
        let rho = Density::probability(&s, vec![0.6, 0.2]).unwrap();
        let r = chaos_experiment(&g, &kern, &rho, &InitialLaw::Product(vec![0.2, 0.4]), &[2, 3], &settings()).unwrap();
        for t in &r.traces {
            assert!(t.w[0] > 0.0);
            let r2 = chaos_experiment(&g, &kern, &rho, &InitialLaw::Chaotic, &[t.n], &settings()).unwrap();
            assert!(r2.traces[0].w.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn two_body_chaos() {
        let s = FiniteSpace::counting(2).unwrap();
        let g = RateGenerator::new(&s, DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0])).unwrap();
        // Γ1[x][z][y]: jump towards the partner's state
        let gamma1 = vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        let kern: KernelRef = Arc::new(TwoThreeBodyKernel::new(&s, gamma1, None, None).unwrap());
        let rho = Density::probability(&s, vec![0.8, 0.2]).unwrap();
        let r = chaos_experiment(&g, &kern, &rho, &InitialLaw::Chaotic, &[2, 3, 4], &settings()).unwrap();
        for t in &r.traces {
            assert_eq!(t.w[0], 0.0);
            assert!(t.w.iter().all(|v| *v >= -1e-14));
            assert!(t.marginal_gaps.iter().all(|m| m.holds));
            assert!(t.sup_w > 0.0);
        }
    }
}
