//! Relative entropy, the classical inequalities it satisfies, the integral
//! inequality along two linear flows and the N-particle entropy experiment.

mod chaos;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dynamics::{solve, Drive, EvolutionProblem};
use crate::error::{check_dim, Error, Result};
use crate::kernel::RateGenerator;
use crate::space::{decode_config, encode_config, l1_distance, Density};

pub use chaos::{
    b_constant, chaos_experiment, BetaConstants, BoundStatus, ChaosReport, ChaosSettings, CtForm, EntropyTrace,
    InitialLaw, MarginalGap,
};

/// H(ρ‖σ) = Σ ρ log(ρ/σ) ν with 0 log 0 = 0; +∞ when ρ > 0 where σ = 0.
pub fn relative_entropy(rho: &[f64], sigma: &[f64], nu: &[f64]) -> f64 {
    let mut h = 0.0;
    for ((&r, &s), &n) in rho.iter().zip(sigma).zip(nu) {
        if r > 0.0 {
            if s <= 0.0 {
                return f64::INFINITY;
            }
            h += r * (r / s).ln() * n;
        }
    }
    h
}

/// H(ρ‖σ)/N on Π^N with reference ν^{⊗N}.
pub fn renormalized_entropy(rho_n: &[f64], sigma_n: &[f64], nu_n: &[f64], big_n: usize) -> f64 {
    relative_entropy(rho_n, sigma_n, nu_n) / big_n as f64
}

/// Marginal density on the coordinates `keep`, integrating out the rest against ν.
/// The result is indexed little-endian in the order of `keep`.
pub fn marginal_on(rho_n: &[f64], nu: &[f64], big_n: usize, keep: &[usize]) -> Result<Vec<f64>> {
    let d = nu.len();
    if d.checked_pow(big_n as u32) != Some(rho_n.len()) {
        return Err(Error::Dimension { expected: d.pow(big_n as u32), got: rho_n.len() });
    }
    let mut seen = vec![false; big_n];
    for &k in keep {
        if k >= big_n || seen[k] {
            return Err(Error::Invalid(format!("bad coordinate list {keep:?} for N = {big_n}")));
        }
        seen[k] = true;
    }
    let mut out = vec![0.0; d.pow(keep.len() as u32)];
    let mut cfg = vec![0; big_n];
    let mut sub = vec![0; keep.len()];
    for (i, &f) in rho_n.iter().enumerate() {
        decode_config(i, d, big_n, &mut cfg);
        let mut w = f;
        for (k, &x) in cfg.iter().enumerate() {
            if !seen[k] {
                w *= nu[x];
            }
        }
        for (j, &k) in keep.iter().enumerate() {
            sub[j] = cfg[k];
        }
        out[encode_config(&sub, d)] += w;
    }
    Ok(out)
}

/// Marginal on the first `k` coordinates, 1 ≤ k ≤ N.
pub fn marginal(rho_n: &[f64], nu: &[f64], big_n: usize, k: usize) -> Result<Vec<f64>> {
    if k == 0 || k > big_n {
        return Err(Error::Invalid(format!("marginal order {k} outside 1..={big_n}")));
    }
    marginal_on(rho_n, nu, big_n, &(0..k).collect::<Vec<_>>())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PinskerReport {
    pub l1: f64,
    pub bound: f64,
    pub holds: bool,
}

/// ‖ρ − σ‖_{L¹(ν)} ≤ √(2H(ρ‖σ)).
pub fn pinsker_check(rho: &[f64], sigma: &[f64], nu: &[f64]) -> PinskerReport {
    let l1 = l1_distance(rho, sigma, nu);
    // rounding can leave H(ρ‖ρ) a hair below zero
    let bound = (2.0 * relative_entropy(rho, sigma, nu).max(0.0)).sqrt();
    PinskerReport { l1, bound, holds: l1 <= bound + 1e-12 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GibbsReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

fn log_sum_exp(terms: impl Iterator<Item = (f64, f64)>) -> f64 {
    // terms are (log weight, exponent)
    let v: Vec<f64> = terms.filter(|(lw, _)| lw.is_finite()).map(|(lw, e)| lw + e).collect();
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// log ∫ e^{φ/η} dσ.
fn log_moment(phi: &[f64], sigma: &[f64], nu: &[f64], eta: f64) -> f64 {
    log_sum_exp(phi.iter().zip(sigma).zip(nu).map(|((p, s), n)| ((s * n).ln(), p / eta)))
}

/// ∫φ dρ ≤ η(H(ρ‖σ) + log ∫ e^{φ/η} dσ).
pub fn gibbs_check(phi: &[f64], rho: &[f64], sigma: &[f64], nu: &[f64], eta: f64) -> Result<GibbsReport> {
    check_dim(nu.len(), phi.len())?;
    if !(eta > 0.0) {
        return Err(Error::Invalid("Gibbs check needs eta > 0".into()));
    }
    let lhs: f64 = phi.iter().zip(rho).zip(nu).map(|((p, r), n)| p * r * n).sum();
    let rhs = eta * (relative_entropy(rho, sigma, nu) + log_moment(phi, sigma, nu, eta));
    Ok(GibbsReport { lhs, rhs, holds: lhs <= rhs + 1e-12 * (1.0 + lhs.abs()) })
}

/// The maximizer ρ* ∝ σ e^{φ/η}, which attains equality in [`gibbs_check`].
pub fn gibbs_optimizer(phi: &[f64], sigma: &[f64], nu: &[f64], eta: f64) -> Vec<f64> {
    let lz = log_moment(phi, sigma, nu, eta);
    phi.iter().zip(sigma).map(|(p, s)| if *s > 0.0 { s * (p / eta - lz).exp() } else { 0.0 }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DataProcessingReport {
    pub before: f64,
    pub after: f64,
    /// max_x [Φ(T̃η)(x) − (T̃Φ(η))(x)] for Φ(u) = u log u and η = ρ/σ.
    pub jensen_defect: f64,
    pub holds: bool,
}

/// Checks that `t_op` maps densities to densities: nonnegative entries and
/// Σ_x T[x][y]ν[x] = ν[y].
pub fn validate_density_operator(t_op: &DMatrix<f64>, nu: &[f64]) -> Result<()> {
    let d = nu.len();
    if t_op.nrows() != d || t_op.ncols() != d {
        return Err(Error::Dimension { expected: d, got: t_op.nrows() });
    }
    if t_op.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Invalid("operator has a negative entry".into()));
    }
    for y in 0..d {
        let m: f64 = (0..d).map(|x| t_op[(x, y)] * nu[x]).sum();
        if (m - nu[y]).abs() > 1e-10 * nu[y].max(1.0) {
            return Err(Error::Invalid(format!("operator does not conserve mass in column {y}")));
        }
    }
    Ok(())
}

fn entropy_fn(u: f64) -> f64 {
    if u > 0.0 {
        u * u.ln()
    } else {
        0.0
    }
}

/// H(T*ρ‖T*σ) ≤ H(ρ‖σ) plus the pointwise Jensen inequality for the induced operator.
pub fn data_processing_check(t_op: &DMatrix<f64>, rho: &[f64], sigma: &[f64], nu: &[f64]) -> Result<DataProcessingReport> {
    validate_density_operator(t_op, nu)?;
    let d = nu.len();
    let apply = |v: &[f64]| -> Vec<f64> { (0..d).map(|x| (0..d).map(|y| t_op[(x, y)] * v[y]).sum()).collect() };
    let (tr, ts) = (apply(rho), apply(sigma));
    let before = relative_entropy(rho, sigma, nu);
    let after = relative_entropy(&tr, &ts, nu);
    let ratio: Vec<f64> = rho.iter().zip(sigma).map(|(r, s)| if *s > 0.0 { r / s } else { 0.0 }).collect();
    let sig_phi: Vec<f64> = sigma.iter().zip(&ratio).map(|(s, u)| s * entropy_fn(*u)).collect();
    let t_phi = apply(&sig_phi);
    let mut jensen_defect = f64::NEG_INFINITY;
    for x in 0..d {
        if ts[x] > 0.0 {
            let lhs = entropy_fn(tr[x] / ts[x]);
            let rhs = t_phi[x] / ts[x];
            jensen_defect = jensen_defect.max(lhs - rhs);
        }
    }
    let holds = after <= before + 1e-12 * (1.0 + before) && jensen_defect <= 1e-12;
    Ok(DataProcessingReport { before, after, jensen_defect, holds })
}

/// Both sides of the entropy integral inequality along two linear flows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegralInequalityReport {
    pub eta: f64,
    pub times: Vec<f64>,
    pub entropy: Vec<f64>,
    /// H(ρ₀‖σ₀) + η∫[H(ρ_s‖σ_s) + log∫exp((𝒜*_s − 𝓑*_s)σ_s/(ησ_s)) dσ_s] ds.
    pub rhs: Vec<f64>,
    /// H(ρ₀‖σ₀) + ∫∫ ρ_s (𝒜*_s − 𝓑*_s)σ_s/σ_s dν ds.
    pub rhs_sharp: Vec<f64>,
    pub tolerance: Vec<f64>,
    pub holds: bool,
    pub holds_sharp: bool,
}

/// Integrates ρ under 𝒦* + 𝒜*_t and σ under 𝒦* + 𝓑*_t and evaluates both integral
/// inequalities by the trapezoid rule, with budget 10·dt² per unit time.
pub fn integral_inequality_check(
    g: &RateGenerator,
    drive_a: &Drive,
    drive_b: &Drive,
    rho0: &Density,
    sigma0: &Density,
    eta: f64,
    t_end: f64,
    dt: f64,
) -> Result<IntegralInequalityReport> {
    if !(eta > 0.0) {
        return Err(Error::Invalid("integral inequality needs eta > 0".into()));
    }
    if sigma0.w().iter().any(|v| *v <= 0.0) {
        return Err(Error::Hypothesis("log sigma0 must be bounded".into()));
    }
    let nu = g.space().nu();
    let mut pa = EvolutionProblem::new(g.clone(), drive_a.clone(), rho0.clone(), t_end, dt);
    pa.certify = false;
    let mut pb = EvolutionProblem::new(g.clone(), drive_b.clone(), sigma0.clone(), t_end, dt);
    pb.certify = false;
    let ra = solve(&pa)?;
    let rb = solve(&pb)?;
    let n = ra.times.len();
    let mut entropy = Vec::with_capacity(n);
    let mut loose = Vec::with_capacity(n);
    let mut sharp = Vec::with_capacity(n);
    for i in 0..n {
        let t = ra.times[i];
        let (rho, sigma) = (&ra.densities[i], &rb.densities[i]);
        if sigma.iter().any(|v| *v <= 0.0) {
            return Err(Error::Hypothesis(format!("sigma reached zero at t = {t}")));
        }
        let da = drive_a.frozen_kernel(t)?;
        let db = drive_b.frozen_kernel(t)?;
        let diff = da.adjoint_generator_matrix() - db.adjoint_generator_matrix();
        let q: Vec<f64> = (0..nu.len())
            .map(|x| (0..nu.len()).map(|y| diff[(x, y)] * sigma[y]).sum::<f64>() / sigma[x])
            .collect();
        let h = relative_entropy(rho, sigma, nu);
        entropy.push(h);
        loose.push(eta * (h + log_moment(&q, sigma, nu, eta)));
        sharp.push(q.iter().zip(rho).zip(nu).map(|((a, r), m)| a * r * m).sum::<f64>());
    }
    let cumulative = |f: &[f64]| -> Vec<f64> {
        let mut acc = vec![entropy[0]];
        for i in 1..n {
            let h = ra.times[i] - ra.times[i - 1];
            acc.push(acc[i - 1] + 0.5 * h * (f[i] + f[i - 1]));
        }
        acc
    };
    let rhs = cumulative(&loose);
    let rhs_sharp = cumulative(&sharp);
    let tolerance: Vec<f64> = ra.times.iter().map(|t| 10.0 * dt * dt * t + 1e-12).collect();
    let holds = (0..n).all(|i| entropy[i] <= rhs[i] + tolerance[i]);
    let holds_sharp = (0..n).all(|i| entropy[i] <= rhs_sharp[i] + tolerance[i]);
    Ok(IntegralInequalityReport { eta, times: ra.times, entropy, rhs, rhs_sharp, tolerance, holds, holds_sharp })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::product_density;
    use crate::kernel::JumpKernel;
    use crate::space::FiniteSpace;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_density(rng: &mut ChaCha8Rng, nu: &[f64]) -> Vec<f64> {
        let w: Vec<f64> = nu.iter().map(|_| rng.gen_range(0.01..1.0)).collect();
        let m: f64 = w.iter().zip(nu).map(|(a, b)| a * b).sum();
        w.iter().map(|v| v / m).collect()
    }

    fn random_nu(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        (0..d).map(|_| rng.gen_range(0.3..2.0)).collect()
    }

    #[test]
    fn hand_value() {
        let h = relative_entropy(&[0.8, 0.2], &[0.5, 0.5], &[1.0, 1.0]);
        assert!((h - (0.8 * 1.6f64.ln() + 0.2 * 0.4f64.ln())).abs() < 1e-15);
        assert!((h - 0.19274).abs() < 1e-5);
        assert_eq!(relative_entropy(&[0.5, 0.5], &[1.0, 0.0], &[1.0, 1.0]), f64::INFINITY);
        assert_eq!(relative_entropy(&[1.0, 0.0], &[0.5, 0.5], &[1.0, 1.0]), 2f64.ln());
    }

    #[test]
    fn tensorization_and_renormalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let nu = random_nu(&mut rng, 3);
        let r = random_density(&mut rng, &nu);
        let s = random_density(&mut rng, &nu);
        let h = relative_entropy(&r, &s, &nu);
        for n in 1..=4 {
            let rn = product_density(&vec![r.clone(); n]);
            let sn = product_density(&vec![s.clone(); n]);
            let nun = product_density(&vec![nu.clone(); n]);
            assert!((renormalized_entropy(&rn, &sn, &nun, n) - h).abs() < 1e-12);
            assert!(renormalized_entropy(&sn, &sn, &nun, n).abs() < 1e-15);
        }
    }

    #[test]
    fn marginals() {
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        let nu = random_nu(&mut rng, 2);
        let f: Vec<Vec<f64>> = (0..3).map(|_| random_density(&mut rng, &nu)).collect();
        let joint = product_density(&f);
        let m = marginal(&joint, &nu, 3, 2).unwrap();
        let want = product_density(&f[..2]);
        assert!(m.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-14));
        assert_eq!(marginal(&joint, &nu, 3, 3).unwrap(), joint);
        assert!(marginal(&joint, &nu, 3, 0).is_err() && marginal(&joint, &nu, 3, 4).is_err());
        let m1 = marginal_on(&joint, &nu, 3, &[2]).unwrap();
        assert!(m1.iter().zip(&f[2]).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn symmetric_marginals_do_not_depend_on_coordinates() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let nu = random_nu(&mut rng, 2);
        let base: Vec<f64> = (0..8).map(|_| rng.gen_range(0.1..1.0)).collect();
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut sym = vec![0.0; 8];
        for p in &perms {
            let q = crate::dynamics::permute_density(&base, 2, p);
            sym.iter_mut().zip(&q).for_each(|(a, b)| *a += b / 6.0);
        }
        for keep in [[0usize, 1], [0, 2], [1, 2], [2, 0]] {
            let m = marginal_on(&sym, &nu, 3, &keep).unwrap();
            let m0 = marginal_on(&sym, &nu, 3, &[0, 1]).unwrap();
            assert!(m.iter().zip(&m0).all(|(a, b)| (a - b).abs() < 1e-14));
        }
        for k in [0usize, 1, 2] {
            let m = marginal_on(&sym, &nu, 3, &[k]).unwrap();
            let m0 = marginal_on(&sym, &nu, 3, &[0]).unwrap();
            assert!(m.iter().zip(&m0).all(|(a, b)| (a - b).abs() < 1e-14));
        }
    }

    #[test]
    fn marginal_monotonicity_exhaustive() {
        let mut rng = ChaCha8Rng::seed_from_u64(74);
        let nu = vec![1.0, 0.5];
        let nu3 = product_density(&vec![nu.clone(); 3]);
        for _ in 0..200 {
            let base: Vec<f64> = (0..8).map(|_| rng.gen_range(0.05..1.0)).collect();
            let mut sym = vec![0.0; 8];
            for p in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
                let q = crate::dynamics::permute_density(&base, 2, &p);
                sym.iter_mut().zip(&q).for_each(|(a, b)| *a += b / 6.0);
            }
            let m: f64 = sym.iter().zip(&nu3).map(|(a, b)| a * b).sum();
            sym.iter_mut().for_each(|v| *v /= m);
            let s = random_density(&mut rng, &nu);
            let hn = renormalized_entropy(&sym, &product_density(&vec![s.clone(); 3]), &nu3, 3);
            for k in 1..=2 {
                let mk = marginal(&sym, &nu, 3, k).unwrap();
                let hk = renormalized_entropy(
                    &mk,
                    &product_density(&vec![s.clone(); k]),
                    &product_density(&vec![nu.clone(); k]),
                    k,
                );
                assert!(hk <= hn + 1e-12);
            }
        }
    }

    #[test]
    fn pinsker_random_and_near_singular() {
        let mut rng = ChaCha8Rng::seed_from_u64(75);
        for _ in 0..1000 {
            let d = rng.gen_range(2..=8);
            let nu = random_nu(&mut rng, d);
            let r = random_density(&mut rng, &nu);
            let s = random_density(&mut rng, &nu);
            assert!(pinsker_check(&r, &s, &nu).holds);
        }
        let nu = vec![1.0, 1.0];
        assert_eq!(pinsker_check(&[0.5, 0.5], &[0.5, 0.5], &nu).bound, 0.0);
        let one = [0.6097568139254965];
        assert!(pinsker_check(&[1.639998073268248], &[1.6399980732682482], &one).holds);
        for eps in [1e-2, 1e-4, 1e-8] {
            let r = pinsker_check(&[0.5, 0.5], &[1.0 - eps, eps], &nu);
            assert!(r.holds && r.l1 > 0.9 && r.bound > r.l1);
        }
    }

    #[test]
    fn gibbs_random_and_witness() {
        let mut rng = ChaCha8Rng::seed_from_u64(76);
        for _ in 0..1000 {
            let d = rng.gen_range(2..=8);
            let nu = random_nu(&mut rng, d);
            let r = random_density(&mut rng, &nu);
            let s = random_density(&mut rng, &nu);
            let phi: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let eta = rng.gen_range(0.1..10.0);
            assert!(gibbs_check(&phi, &r, &s, &nu, eta).unwrap().holds);
            let opt = gibbs_optimizer(&phi, &s, &nu, eta);
            let w = gibbs_check(&phi, &opt, &s, &nu, eta).unwrap();
            assert!((w.lhs - w.rhs).abs() < 1e-9);
        }
        let nu = vec![1.0, 2.0];
        let s = vec![0.2, 0.4];
        let z = gibbs_check(&[0.0, 0.0], &[0.6, 0.2], &s, &nu, 1.0).unwrap();
        assert_eq!(z.lhs, 0.0);
        assert!(z.rhs >= 0.0);
        assert!(gibbs_check(&[0.0, 0.0], &s, &s, &nu, 0.0).is_err());
    }

    fn random_stochastic_operator(rng: &mut ChaCha8Rng, nu: &[f64]) -> DMatrix<f64> {
        let d = nu.len();
        let mut p = DMatrix::from_fn(d, d, |_, _| rng.gen_range(0.0..1.0));
        for y in 0..d {
            let s: f64 = p.row(y).sum();
            p.row_mut(y).iter_mut().for_each(|v| *v /= s);
        }
        DMatrix::from_fn(d, d, |x, y| p[(y, x)] * nu[y] / nu[x])
    }

    #[test]
    fn data_processing_random_identity_and_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..1000 {
            let d = rng.gen_range(2..=6);
            let nu = random_nu(&mut rng, d);
            let t = random_stochastic_operator(&mut rng, &nu);
            let r = random_density(&mut rng, &nu);
            let s = random_density(&mut rng, &nu);
            assert!(data_processing_check(&t, &r, &s, &nu).unwrap().holds);
        }
        let nu = vec![1.0, 2.0, 0.5];
        let r = vec![0.5, 0.1, 0.6];
        let s = vec![0.2, 0.3, 0.4];
        let id = data_processing_check(&DMatrix::identity(3, 3), &r, &s, &nu).unwrap();
        assert!((id.before - id.after).abs() < 1e-15);
        // every input is sent to the stationary density s
        let proj = DMatrix::from_fn(3, 3, |x, y| s[x] * nu[y]);
        let pr = data_processing_check(&proj, &r, &s, &nu).unwrap();
        assert!(pr.after.abs() < 1e-15 && pr.holds);
        let bad = DMatrix::from_element(3, 3, 1.0);
        assert!(data_processing_check(&bad, &r, &s, &nu).is_err());
    }

    fn random_linear(rng: &mut ChaCha8Rng, s: &FiniteSpace) -> JumpKernel {
        let d = s.d();
        JumpKernel::new(s, DMatrix::from_fn(d, d, |_, _| rng.gen_range(0.0..1.0))).unwrap()
    }

    #[test]
    fn integral_inequality_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        let s = FiniteSpace::new(random_nu(&mut rng, 3)).unwrap();
        let g = RateGenerator::new(&s, DMatrix::from_fn(3, 3, |_, _| rng.gen_range(0.0..1.0))).unwrap();
        let k = random_linear(&mut rng, &s);
        let rho = Density::probability(&s, random_density(&mut rng, s.nu())).unwrap();
        let sig = Density::probability(&s, random_density(&mut rng, s.nu())).unwrap();
        let same = integral_inequality_check(&g, &Drive::Linear(k.clone()), &Drive::Linear(k.clone()), &rho, &rho, 1.0, 1.0, 1e-2)
            .unwrap();
        assert!(same.entropy.iter().chain(&same.rhs).chain(&same.rhs_sharp).all(|v| v.abs() < 1e-12));
        let dec = integral_inequality_check(&g, &Drive::Linear(k.clone()), &Drive::Linear(k.clone()), &rho, &sig, 1.0, 1.0, 1e-2)
            .unwrap();
        assert!(dec.entropy.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        for eta in [0.1, 1.0, 10.0] {
            let pert = random_linear(&mut rng, &s);
            let kb = JumpKernel::new(&s, k.lam() + pert.lam() * 0.2).unwrap();
            let r = integral_inequality_check(&g, &Drive::Linear(k.clone()), &Drive::Linear(kb), &rho, &sig, eta, 1.0, 1e-2)
                .unwrap();
            assert!(r.holds && r.holds_sharp);
        }
        let zero = Density::new(&s, vec![0.0, 1.0 / s.nu()[1], 0.0]).unwrap();
        assert!(matches!(
            integral_inequality_check(&g, &Drive::Linear(k.clone()), &Drive::Linear(k), &rho, &zero, 1.0, 1.0, 1e-2),
            Err(Error::Hypothesis(_))
        ));
    }

    proptest! {
        #[test]
        fn entropy_nonnegative(seed in any::<u64>(), d in 2usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let nu = random_nu(&mut rng, d);
            let r = random_density(&mut rng, &nu);
            let s = random_density(&mut rng, &nu);
            prop_assert!(relative_entropy(&r, &s, &nu) >= -1e-15);
            prop_assert!(relative_entropy(&r, &r, &nu).abs() < 1e-15);
        }
    }
}
