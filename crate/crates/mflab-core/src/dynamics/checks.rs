//! Comparison, stability and averaged-versus-mean-field checks.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{l1_op_norm, RateGenerator};
use crate::meanfield::{epsilon_n, lipschitz_sweep, sweep_intensities, Averaging, KernelRef};
use crate::par::Exec;
use crate::space::{l1_distance, Density};

use super::{solve, Drive, EvolutionProblem};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub times: Vec<f64>,
    /// min_x (ρ_t − σ_t)(x) at each grid time.
    pub min_gap: Vec<f64>,
    pub holds: bool,
}

/// Solves the same linear equation from ρ₀ ≥ σ₀ and checks ρ_t ≥ σ_t − 1e-9.
pub fn comparison_check(
    g: &RateGenerator,
    drive: &Drive,
    rho0: &Density,
    sigma0: &Density,
    t_end: f64,
    dt: f64,
) -> Result<ComparisonReport> {
    drive.frozen_kernel(0.0)?;
    if rho0.w().iter().zip(sigma0.w()).any(|(a, b)| a < b) {
        return Err(Error::Invalid("comparison needs rho0 >= sigma0 pointwise".into()));
    }
    let mut p = EvolutionProblem::new(g.clone(), drive.clone(), rho0.clone(), t_end, dt);
    p.certify = false;
    let a = solve(&p)?;
    p.rho0 = sigma0.clone();
    let b = solve(&p)?;
    let min_gap: Vec<f64> = a
        .densities
        .iter()
        .zip(&b.densities)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x - y).fold(f64::INFINITY, f64::min))
        .collect();
    let holds = min_gap.iter().all(|&m| m >= -1e-9);
    Ok(ComparisonReport { times: a.times, min_gap, holds })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    /// sup_t ‖𝒜*_t‖_{L¹→L¹} over the grid.
    pub m_t: f64,
    /// sup_t ‖𝒜*_t − 𝓑*_t‖_{L¹→L¹} over the grid.
    pub c_t: f64,
    pub holds: bool,
}

/// ‖ρ_t − σ_t‖ ≤ ‖ρ₀ − σ₀‖ + C_T(e^{tM_T} − 1)/M_T for two linear problems sharing 𝒦*.
/// Operator norms are exact on atoms and taken over the time grid.
pub fn stability_check(a: &EvolutionProblem, b: &EvolutionProblem) -> Result<StabilityReport> {
    if a.g != b.g {
        return Err(Error::Invalid("stability check needs a shared generator".into()));
    }
    let (mut pa, mut pb) = (a.clone(), b.clone());
    pa.certify = false;
    pb.certify = false;
    pb.dt = a.dt;
    pb.t_end = a.t_end;
    let ra = solve(&pa)?;
    let rb = solve(&pb)?;
    let nu = a.g.space().nu();
    let (mut m_t, mut c_t) = (0.0f64, 0.0f64);
    for &t in &ra.times {
        let ka = a.drive.frozen_kernel(t)?.adjoint_generator_matrix();
        let kb = b.drive.frozen_kernel(t)?.adjoint_generator_matrix();
        m_t = m_t.max(l1_op_norm(&ka, nu));
        c_t = c_t.max(l1_op_norm(&(ka - kb), nu));
    }
    let d0 = l1_distance(a.rho0.w(), b.rho0.w(), nu);
    let lhs: Vec<f64> = ra.densities.iter().zip(&rb.densities).map(|(x, y)| l1_distance(x, y, nu)).collect();
    let rhs: Vec<f64> = ra
        .times
        .iter()
        .map(|&t| d0 + if m_t > 0.0 { c_t * (t * m_t).exp_m1() / m_t } else { c_t * t })
        .collect();
    let holds = lhs.iter().zip(&rhs).all(|(l, r)| *l <= r + 1e-9);
    Ok(StabilityReport { times: ra.times, lhs, rhs, m_t, c_t, holds })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AveragedGap {
    pub n: usize,
    pub times: Vec<f64>,
    /// ‖ρ_t − ρ̄_t^{(N)}‖_{L¹(ν)}.
    pub gap: Vec<f64>,
    /// 2((e^{Kt} − 1)/K)·sup_{s≤t} ε_N(ρ̄_s), the Grönwall bound valid at every t.
    pub bound: Vec<f64>,
    /// `bound` with each ε_N raised by three standard errors.
    pub bound_allowance: Vec<f64>,
    /// 2t((e^{Kt} − 1)/K)·sup_{s≤t} ε_N(ρ̄_s), which dominates `bound` only for t ≥ 1.
    pub bound_t_form: Vec<f64>,
    pub bound_t_form_allowance: Vec<f64>,
    pub k: f64,
    pub m_lambda: f64,
    pub lipschitz: f64,
    pub eps_sup: f64,
    /// `bound_allowance` holds at every grid time.
    pub holds: bool,
    /// `bound_t_form_allowance` holds at the final time.
    pub holds_t_form_at_end: bool,
}

/// Settings for [`averaged_vs_meanfield`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapSettings {
    pub t_end: f64,
    pub dt: f64,
    /// Monte Carlo samples per ε_N evaluation.
    pub eps_samples: usize,
    /// Evaluate ε_N every this many grid steps.
    pub eps_stride: usize,
    pub seed: u64,
    pub averaging: Averaging,
}

/// Compares the mean-field and averaged solutions against the L¹ chaos bound.
/// Undeclared M_Λ and Lipschitz constants are estimated by sweeps.
pub fn averaged_vs_meanfield(
    kern: &KernelRef,
    g: &RateGenerator,
    rho0: &Density,
    big_n: usize,
    s: GapSettings,
    exec: Exec,
) -> Result<AveragedGap> {
    let declared = kern.constants();
    let m_lambda = match declared.m_lambda {
        Some(m) => m,
        None => sweep_intensities(kern.as_ref(), 1000, s.seed)?.m_lambda_hat,
    };
    let lipschitz = match declared.lipschitz_l1 {
        Some(c) => c,
        None => lipschitz_sweep(kern.as_ref(), 1000, s.seed)?,
    };
    let k = 2.0 * (m_lambda + lipschitz);
    let mf = solve(&EvolutionProblem::new(g.clone(), Drive::MeanField(kern.clone()), rho0.clone(), s.t_end, s.dt))?;
    let drive = Drive::Averaged { kern: kern.clone(), n: big_n, averaging: s.averaging };
    let av = solve(&EvolutionProblem::new(g.clone(), drive, rho0.clone(), s.t_end, s.dt))?;
    let nu = g.space().nu();
    let stride = s.eps_stride.max(1);
    let (mut sup, mut sup_allow) = (0.0f64, 0.0f64);
    let mut gap = Vec::with_capacity(mf.times.len());
    let mut bound = Vec::with_capacity(mf.times.len());
    let mut bound_allowance = Vec::with_capacity(mf.times.len());
    let mut bound_t_form = Vec::with_capacity(mf.times.len());
    let mut bound_t_form_allowance = Vec::with_capacity(mf.times.len());
    let last = mf.times.len() - 1;
    for (i, &t) in mf.times.iter().enumerate() {
        if i % stride == 0 || i == last {
            let masses: Vec<f64> = av.densities[i].iter().zip(nu).map(|(a, b)| a * b).collect();
            let e = epsilon_n(kern.as_ref(), &masses, big_n, s.eps_samples, s.seed.wrapping_add(i as u64), exec)?;
            sup = sup.max(e.estimate);
            sup_allow = sup_allow.max(e.estimate + 3.0 * e.std_error);
        }
        let growth = if k > 0.0 { 2.0 * (k * t).exp_m1() / k } else { 2.0 * t };
        gap.push(l1_distance(&mf.densities[i], &av.densities[i], nu));
        bound.push(growth * sup);
        bound_allowance.push(growth * sup_allow);
        bound_t_form.push(t * growth * sup);
        bound_t_form_allowance.push(t * growth * sup_allow);
    }
    let holds = gap.iter().zip(&bound_allowance).all(|(g, b)| *g <= b + 1e-9);
    let holds_t_form_at_end = gap[last] <= bound_t_form_allowance[last] + 1e-9;
    Ok(AveragedGap {
        n: big_n,
        times: mf.times,
        gap,
        bound,
        bound_allowance,
        bound_t_form,
        bound_t_form_allowance,
        k,
        m_lambda,
        lipschitz,
        eps_sup: sup,
        holds,
        holds_t_form_at_end,
    })
}
