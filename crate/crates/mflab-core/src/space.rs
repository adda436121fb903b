//! Finite state spaces, densities, measures and empirical-measure combinatorics.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Tolerance for the probability normalization of densities.
pub const MASS_TOL: f64 = 1e-10;

/// Default cap on the number of enumerated compositions.
pub const DEFAULT_ENUM_CAP: u128 = 10_000_000;

/// The state space: `d` atoms with strictly positive reference weights `nu`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSpace {
    nu: Arc<[f64]>,
}

/// JSON form `{"d": .., "nu": [..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteSpaceSpec {
    pub d: usize,
    pub nu: Vec<f64>,
}

impl FiniteSpace {
    pub fn new(nu: Vec<f64>) -> Result<Self> {
        if nu.is_empty() {
            return Err(Error::Invalid("state space needs at least one atom".into()));
        }
        if let Some(x) = nu.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Invalid(format!("nu[{x}] = {} is not positive", nu[x])));
        }
        Ok(Self { nu: nu.into() })
    }

    /// `d` atoms with unit weights.
    pub fn counting(d: usize) -> Result<Self> {
        Self::new(vec![1.0; d])
    }

    pub fn from_spec(spec: &FiniteSpaceSpec) -> Result<Self> {
        check_dim(spec.d, spec.nu.len())?;
        Self::new(spec.nu.clone())
    }

    pub fn to_spec(&self) -> FiniteSpaceSpec {
        FiniteSpaceSpec { d: self.d(), nu: self.nu.to_vec() }
    }

    pub fn d(&self) -> usize {
        self.nu.len()
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    /// ν(Π).
    pub fn total_mass(&self) -> f64 {
        self.nu.iter().sum()
    }
}

/// A nonnegative density with respect to ν.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    space: FiniteSpace,
    w: Vec<f64>,
}

impl Density {
    pub fn new(space: &FiniteSpace, w: Vec<f64>) -> Result<Self> {
        check_dim(space.d(), w.len())?;
        if let Some(x) = w.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Invalid(format!("density value w[{x}] = {} is negative", w[x])));
        }
        Ok(Self { space: space.clone(), w })
    }

    /// A density that must integrate to one against ν.
    pub fn probability(space: &FiniteSpace, w: Vec<f64>) -> Result<Self> {
        let rho = Self::new(space, w)?;
        let m = rho.mass();
        if (m - 1.0).abs() > MASS_TOL {
            return Err(Error::Invalid(format!("density has mass {m}, expected 1")));
        }
        Ok(rho)
    }

    /// Density of the probability measure with the given atom masses.
    pub fn from_masses(space: &FiniteSpace, masses: &[f64]) -> Result<Self> {
        check_dim(space.d(), masses.len())?;
        let w = masses.iter().zip(space.nu()).map(|(m, n)| m / n).collect();
        Self::new(space, w)
    }

    /// The normalized constant density 1/ν(Π).
    pub fn uniform(space: &FiniteSpace) -> Self {
        let c = 1.0 / space.total_mass();
        Self { space: space.clone(), w: vec![c; space.d()] }
    }

    pub fn space(&self) -> &FiniteSpace {
        &self.space
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.w
    }

    /// Masses ρ[x]·ν[x].
    pub fn masses(&self) -> Vec<f64> {
        self.w.iter().zip(self.space.nu()).map(|(w, n)| w * n).collect()
    }

    pub fn mass(&self) -> f64 {
        pair_nu_raw(&self.w, &vec![1.0; self.w.len()], self.space.nu())
    }

    /// Δ(log ρ); infinite when some entry vanishes.
    pub fn log_oscillation(&self) -> f64 {
        log_oscillation(&self.w)
    }
}

/// A signed measure on atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedMeasure {
    pub m: Vec<f64>,
}

impl SignedMeasure {
    pub fn new(m: Vec<f64>) -> Self {
        Self { m }
    }

    pub fn point(d: usize, x: usize) -> Self {
        let mut m = vec![0.0; d];
        m[x] = 1.0;
        Self { m }
    }
}

/// Empirical measure of `n` particles stored as counts per atom.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EmpiricalMeasure {
    counts: Vec<u32>,
    n: u32,
}

impl EmpiricalMeasure {
    pub fn from_counts(counts: Vec<u32>) -> Result<Self> {
        let n: u32 = counts.iter().sum();
        if n == 0 {
            return Err(Error::Invalid("empirical measure of zero particles".into()));
        }
        Ok(Self { counts, n })
    }

    pub(crate) fn from_counts_unchecked(counts: Vec<u32>) -> Self {
        let n = counts.iter().sum();
        Self { counts, n }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn d(&self) -> usize {
        self.counts.len()
    }

    /// Probability masses counts[x]/n.
    pub fn masses(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    /// Adds one particle at `x`.
    pub fn with_added(&self, x: usize) -> Self {
        let mut counts = self.counts.clone();
        counts[x] += 1;
        Self { counts, n: self.n + 1 }
    }

    /// Removes one particle at `x`; `None` if there is none.
    pub fn with_removed(&self, x: usize) -> Option<Self> {
        if self.counts[x] == 0 {
            return None;
        }
        let mut counts = self.counts.clone();
        counts[x] -= 1;
        Some(Self { counts, n: self.n - 1 })
    }
}

/// ⟨μ, φ⟩ = Σ φ[x]·m[x].
pub fn pair(mu: &SignedMeasure, phi: &[f64]) -> Result<f64> {
    check_dim(mu.m.len(), phi.len())?;
    Ok(mu.m.iter().zip(phi).map(|(m, p)| m * p).sum())
}

/// ⟨ψ, φ⟩_ν = Σ ψ[x]·φ[x]·ν[x].
pub fn pair_nu(psi: &[f64], phi: &[f64], space: &FiniteSpace) -> Result<f64> {
    check_dim(space.d(), psi.len())?;
    check_dim(space.d(), phi.len())?;
    Ok(pair_nu_raw(psi, phi, space.nu()))
}

pub(crate) fn pair_nu_raw(psi: &[f64], phi: &[f64], nu: &[f64]) -> f64 {
    psi.iter().zip(phi).zip(nu).map(|((a, b), n)| a * b * n).sum()
}

/// ‖f‖_{L¹(ν)}.
pub fn l1_nu(f: &[f64], nu: &[f64]) -> f64 {
    f.iter().zip(nu).map(|(a, n)| a.abs() * n).sum()
}

/// ‖ρ − σ‖_{L¹(ν)}.
pub fn l1_distance(rho: &[f64], sigma: &[f64], nu: &[f64]) -> f64 {
    rho.iter().zip(sigma).zip(nu).map(|((a, b), n)| (a - b).abs() * n).sum()
}

pub fn tv_norm(mu: &SignedMeasure) -> f64 {
    mu.m.iter().map(|v| v.abs()).sum()
}

/// Δ(f) = max f − min f.
pub fn oscillation(f: &[f64]) -> f64 {
    let (lo, hi) = f
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if f.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Δ(log w), infinite if some entry is zero.
pub fn log_oscillation(w: &[f64]) -> f64 {
    if w.iter().any(|&v| v <= 0.0) {
        return f64::INFINITY;
    }
    let logs: Vec<f64> = w.iter().map(|v| v.ln()).collect();
    oscillation(&logs)
}

pub fn empirical_of(config: &[usize], d: usize) -> Result<EmpiricalMeasure> {
    if config.is_empty() {
        return Err(Error::Invalid("empty configuration".into()));
    }
    let mut counts = vec![0u32; d];
    for &x in config {
        if x >= d {
            return Err(Error::Invalid(format!("atom {x} out of range for d = {d}")));
        }
        counts[x] += 1;
    }
    EmpiricalMeasure::from_counts(counts)
}

/// Drops the k-th entry (1-based).
pub fn truncate(config: &[usize], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > config.len() {
        return Err(Error::Invalid(format!("k = {k} out of range 1..={}", config.len())));
    }
    if config.len() == 1 {
        return Err(Error::Invalid("truncation would leave an empty configuration".into()));
    }
    let mut out = config.to_vec();
    out.remove(k - 1);
    Ok(out)
}

/// C(n + d − 1, d − 1), saturating.
pub fn composition_count(n: u32, d: usize) -> u128 {
    let k = (d - 1) as u128;
    let top = n as u128 + k;
    let mut c: u128 = 1;
    for i in 0..k {
        c = match c.checked_mul(top - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    c
}

/// Compositions of `n` into `d` parts in reverse lexicographic order,
/// starting at (n, 0, .., 0). `n = 0` yields the single zero composition.
#[derive(Debug, Clone)]
pub struct Compositions {
    cur: Option<Vec<u32>>,
}

impl Compositions {
    pub fn new(n: u32, d: usize) -> Self {
        let mut c = vec![0; d];
        c[0] = n;
        Self { cur: Some(c) }
    }
}

impl Iterator for Compositions {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        let out = self.cur.take()?;
        let d = out.len();
        let mut nxt = out.clone();
        if let Some(i) = (0..d.saturating_sub(1)).rev().find(|&i| nxt[i] > 0) {
            let tail: u32 = nxt[i + 1..].iter().sum();
            nxt[i] -= 1;
            nxt[i + 1] = tail + 1;
            for v in &mut nxt[i + 2..] {
                *v = 0;
            }
            self.cur = Some(nxt);
        }
        Some(out)
    }
}

/// ln k! for k = 0..=n.
pub fn ln_factorials(n: u32) -> Vec<f64> {
    let mut t = Vec::with_capacity(n as usize + 1);
    let mut acc = 0.0;
    t.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        t.push(acc);
    }
    t
}

/// ln of the multinomial coefficient n!/Π c!.
pub fn ln_multinomial(counts: &[u32], lnf: &[f64]) -> f64 {
    let n: u32 = counts.iter().sum();
    lnf[n as usize] - counts.iter().map(|&c| lnf[c as usize]).sum::<f64>()
}

/// All empirical measures of `n ≥ 1` particles with multinomial weights n!/Π c!.
pub fn enumerate_empiricals(d: usize, n: u32, cap: u128) -> Result<Vec<(EmpiricalMeasure, f64)>> {
    if n == 0 {
        return Err(Error::Invalid("enumeration needs n >= 1".into()));
    }
    let count = composition_count(n, d);
    if count > cap {
        return Err(Error::CapExceeded { count, cap });
    }
    let lnf = ln_factorials(n);
    Ok(Compositions::new(n, d)
        .map(|c| {
            let w = ln_multinomial(&c, &lnf).exp();
            (EmpiricalMeasure::from_counts_unchecked(c), w)
        })
        .collect())
}

/// Law of the count vector of `n` iid draws from `p`, restricted to its support.
/// `n = 0` gives the zero composition with probability one.
pub fn multinomial_law(p: &[f64], n: u32, cap: u128) -> Result<Vec<(Vec<u32>, f64)>> {
    let count = composition_count(n, p.len());
    if count > cap {
        return Err(Error::CapExceeded { count, cap });
    }
    let lnf = ln_factorials(n);
    let lnp: Vec<f64> = p.iter().map(|v| v.ln()).collect();
    Ok(Compositions::new(n, p.len())
        .filter_map(|c| {
            let mut s = ln_multinomial(&c, &lnf);
            for (x, &k) in c.iter().enumerate() {
                if k > 0 {
                    if p[x] <= 0.0 {
                        return None;
                    }
                    s += k as f64 * lnp[x];
                }
            }
            Some((c, s.exp()))
        })
        .collect())
}

/// Decodes base-d little-endian index into a configuration of length `n`.
pub fn decode_config(mut idx: usize, d: usize, n: usize, out: &mut [usize]) {
    for slot in out.iter_mut().take(n) {
        *slot = idx % d;
        idx /= d;
    }
}

pub fn encode_config(config: &[usize], d: usize) -> usize {
    config.iter().rev().fold(0, |acc, &x| acc * d + x)
}
