//! Second-order concentration for symmetrized functionals of N iid particles.
//!
//! A function Φ(x, μ) of one atom and an empirical measure of N − 1 particles
//! is tabulated once. The compensated superposition
//! F(𝒙) = Σ_k [Φ(x_k, μ(𝒙_{−k})) − Φ̄(x_k)] depends on 𝒙 only through its counts,
//! so F is evaluated in O(d) from the count vector on every path.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::entropy::b_constant;
use crate::error::{check_dim, Error, Result};
use crate::meanfield::{Averaging, KernelTable, MeanFieldKernel, SweepMode};
use crate::par::{map_range, mc_chunks, rng_for, Exec};
use crate::space::{composition_count, decode_config, multinomial_law, Compositions, Density, EmpiricalMeasure, FiniteSpace};

/// Cap on d^N for materialized F tables.
pub const DEFAULT_TABLE_CAP: usize = 20_000;
/// Minimum Monte Carlo sample count accepted by [`concentration_test`].
pub const MIN_SAMPLES: usize = 1_000;
/// Buckets of the median-of-means estimate.
pub const MOM_BUCKETS: usize = 16;

const PROB_TOL: f64 = 1e-9;

/// Φ(x, μ) tabulated at every empirical measure μ of N − 1 particles.
#[derive(Debug, Clone)]
pub struct PhiFunction {
    space: FiniteSpace,
    n: usize,
    counts: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
    values: Vec<Vec<f64>>,
    declared_c: Option<f64>,
}

impl PhiFunction {
    /// Tabulates `f(x, μ)` over all atoms and all μ with N − 1 particles.
    pub fn tabulate<F>(space: &FiniteSpace, big_n: usize, cap: u128, exec: Exec, f: F) -> Result<Self>
    where
        F: Fn(usize, &EmpiricalMeasure) -> Result<f64> + Sync + Send,
    {
        if big_n < 2 {
            return Err(Error::Invalid("Φ needs N >= 2".into()));
        }
        let d = space.d();
        let m = (big_n - 1) as u32;
        let count = composition_count(m, d);
        if count > cap {
            return Err(Error::CapExceeded { count, cap });
        }
        let counts: Vec<Vec<u32>> = Compositions::new(m, d).collect();
        let values = map_range(exec, counts.len(), |i| {
            let mu = EmpiricalMeasure::from_counts(counts[i].clone())?;
            (0..d).map(|x| f(x, &mu)).collect::<Result<Vec<f64>>>()
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        if let Some(v) = values.iter().flatten().find(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("Φ evaluated to {v}")));
        }
        let index = counts.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        Ok(Self { space: space.clone(), n: big_n, counts, index, values, declared_c: None })
    }

    pub fn space(&self) -> &FiniteSpace {
        &self.space
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn declared_c(&self) -> Option<f64> {
        self.declared_c
    }

    pub fn with_declared_c(mut self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::Invalid(format!("declared C = {c}")));
        }
        self.declared_c = Some(c);
        Ok(self)
    }

    /// The tabulated empirical measures, as counts of N − 1 particles.
    pub fn measures(&self) -> &[Vec<u32>] {
        &self.counts
    }

    /// Φ(x, μ) for μ given by counts of N − 1 particles.
    ///
    /// # Panics
    /// If `mu` is not a count vector of N − 1 particles on the space.
    pub fn eval(&self, x: usize, mu: &[u32]) -> f64 {
        let i = self.index.get(mu).unwrap_or_else(|| panic!("Φ is not tabulated at {mu:?}"));
        self.values[*i][x]
    }

    fn row(&self, mu: &[u32]) -> &[f64] {
        &self.values[self.index[mu]]
    }

    /// Φ(x, μ) − Σ_y Φ(y, μ)ρ({y}), so that the result is centered in x.
    pub fn centered(&self, rho: &Density) -> Result<Self> {
        let p = probability_masses(&self.space, rho)?;
        let mut out = self.clone();
        for row in &mut out.values {
            let mean: f64 = row.iter().zip(&p).map(|(v, q)| v * q).sum();
            row.iter_mut().for_each(|v| *v -= mean);
        }
        Ok(out)
    }

    /// α·Φ; a declared constant scales by |α|.
    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().flatten().for_each(|v| *v *= alpha);
        out.declared_c = self.declared_c.map(|c| c * alpha.abs());
        out
    }

    /// max over μ of |Σ_x Φ(x, μ)ρ({x})|.
    pub fn centering_defect(&self, rho: &Density) -> Result<f64> {
        let p = probability_masses(&self.space, rho)?;
        Ok(self
            .values
            .iter()
            .map(|row| row.iter().zip(&p).map(|(v, q)| v * q).sum::<f64>().abs())
            .fold(0.0, f64::max))
    }
}

fn probability_masses(space: &FiniteSpace, rho: &Density) -> Result<Vec<f64>> {
    check_dim(space.d(), rho.w().len())?;
    if rho.space() != space {
        return Err(Error::Invalid("density lives on a different space".into()));
    }
    let m = rho.mass();
    if (m - 1.0).abs() > PROB_TOL {
        return Err(Error::Invalid(format!("sampling density has mass {m}, expected 1")));
    }
    Ok(rho.masses())
}

/// Φ(x, μ) = Σ_y Λ*(x,{y}; μ) ρ̄[y]/ρ̄[x] − Λ(x, Π; μ).
pub fn build_phi_from_dynamics(
    kern: &dyn MeanFieldKernel,
    rhobar: &Density,
    big_n: usize,
    cap: u128,
    exec: Exec,
) -> Result<PhiFunction> {
    let space = kern.space();
    check_dim(space.d(), rhobar.w().len())?;
    if let Some(x) = rhobar.w().iter().position(|&v| v <= 0.0) {
        return Err(Error::Invalid(format!("ρ̄ vanishes at atom {x}")));
    }
    if big_n < 2 {
        return Err(Error::Invalid("Φ needs N >= 2".into()));
    }
    let table = KernelTable::build(kern, (big_n - 1) as u32, cap, exec)?;
    let w = rhobar.w();
    let d = space.d();
    PhiFunction::tabulate(space, big_n, cap, exec, |x, mu| {
        let i = table.lookup(mu.counts()).expect("kernel table covers every measure");
        let adj = table.adjoint(i).lam();
        let gain: f64 = (0..d).map(|y| adj[(x, y)] * w[y]).sum::<f64>() / w[x];
        Ok(gain - table.kernel(i).intensity(x))
    })
}

/// Φ̄(x) = E Φ(x, μ) over N − 1 iid ρ-samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Compensator {
    pub values: Vec<f64>,
    /// Zero when exact.
    pub std_error: Vec<f64>,
    pub exact: bool,
}

/// Exact multinomial expectation within `opts.cap`, Monte Carlo above it if allowed.
pub fn compensator(phi: &PhiFunction, rho: &Density, opts: Averaging, exec: Exec) -> Result<Compensator> {
    let p = probability_masses(&phi.space, rho)?;
    let d = p.len();
    let m = (phi.n - 1) as u32;
    match multinomial_law(&p, m, opts.cap) {
        Ok(law) => {
            let mut values = vec![0.0; d];
            for (c, w) in &law {
                for (v, f) in values.iter_mut().zip(phi.row(c)) {
                    *v += w * f;
                }
            }
            Ok(Compensator { values, std_error: vec![0.0; d], exact: true })
        }
        Err(Error::CapExceeded { count, cap }) => {
            let samples = opts.mc_samples.ok_or(Error::CapExceeded { count, cap })?;
            if samples < 2 {
                return Err(Error::Invalid("Monte Carlo compensator needs at least 2 samples".into()));
            }
            let sampler = Sampler::new(&p);
            let parts = mc_chunks(exec, samples, opts.seed, |rng, len| {
                let mut s = vec![0.0; d];
                let mut s2 = vec![0.0; d];
                let mut counts = vec![0u32; d];
                for _ in 0..len {
                    sampler.counts(rng, m, &mut counts);
                    for (x, f) in phi.row(&counts).iter().enumerate() {
                        s[x] += f;
                        s2[x] += f * f;
                    }
                }
                (s, s2)
            });
            let mut s = vec![0.0; d];
            let mut s2 = vec![0.0; d];
            for (a, b) in parts {
                (0..d).for_each(|x| {
                    s[x] += a[x];
                    s2[x] += b[x];
                });
            }
            let k = samples as f64;
            let values: Vec<f64> = s.iter().map(|v| v / k).collect();
            let std_error = (0..d)
                .map(|x| {
                    let var = ((s2[x] / k - values[x] * values[x]) * k / (k - 1.0)).max(0.0);
                    (var / k).sqrt()
                })
                .collect();
            Ok(Compensator { values, std_error, exact: false })
        }
        Err(e) => Err(e),
    }
}

struct Sampler {
    cdf: Vec<f64>,
}

impl Sampler {
    fn new(p: &[f64]) -> Self {
        let cdf = p
            .iter()
            .scan(0.0, |s, v| {
                *s += v;
                Some(*s)
            })
            .collect();
        Self { cdf }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> usize {
        let d = self.cdf.len();
        let u = rng.gen::<f64>() * self.cdf[d - 1];
        self.cdf.iter().position(|&c| u < c).unwrap_or(d - 1)
    }

    fn counts(&self, rng: &mut ChaCha8Rng, n: u32, out: &mut [u32]) {
        out.iter_mut().for_each(|c| *c = 0);
        for _ in 0..n {
            out[self.draw(rng)] += 1;
        }
    }
}

/// F from the count vector of all N particles. `scratch` has length d.
fn f_from_counts(phi: &PhiFunction, comp: &[f64], counts: &[u32], scratch: &mut Vec<u32>) -> f64 {
    scratch.clear();
    scratch.extend_from_slice(counts);
    let mut f = 0.0;
    for x in 0..counts.len() {
        if counts[x] == 0 {
            continue;
        }
        scratch[x] -= 1;
        f += counts[x] as f64 * (phi.eval(x, scratch) - comp[x]);
        scratch[x] += 1;
    }
    f
}

/// F(𝒙) = Σ_k [Φ(x_k, μ(𝒙_{−k})) − Φ̄(x_k)].
pub fn big_f(phi: &PhiFunction, comp: &Compensator, config: &[usize]) -> Result<f64> {
    let d = phi.space.d();
    check_dim(phi.n, config.len())?;
    check_dim(d, comp.values.len())?;
    let mut counts = vec![0u32; d];
    for &x in config {
        if x >= d {
            return Err(Error::Invalid(format!("atom {x} outside a space of {d} atoms")));
        }
        counts[x] += 1;
    }
    Ok(f_from_counts(phi, &comp.values, &counts, &mut Vec::with_capacity(d)))
}

/// A function on Π^N stored little-endian, particle 0 least significant.
#[derive(Debug, Clone, PartialEq)]
pub struct FTable {
    pub d: usize,
    pub n: usize,
    pub values: Vec<f64>,
}

impl FTable {
    pub fn new(d: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        let dim = table_dim(d, n, usize::MAX)?;
        check_dim(dim, values.len())?;
        Ok(Self { d, n, values })
    }

    /// Tabulates `g` at every configuration, within `cap` entries.
    pub fn from_fn(d: usize, n: usize, cap: usize, mut g: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let dim = table_dim(d, n, cap)?;
        let mut cfg = vec![0; n];
        let values = (0..dim)
            .map(|i| {
                decode_config(i, d, n, &mut cfg);
                g(&cfg)
            })
            .collect();
        Ok(Self { d, n, values })
    }

    fn stride(&self, i: usize) -> usize {
        self.d.pow(i as u32)
    }

    fn digit(&self, idx: usize, i: usize) -> usize {
        idx / self.stride(i) % self.d
    }

    /// Index of the configuration with coordinate `i` replaced by `a`.
    fn replace(&self, idx: usize, i: usize, a: usize) -> usize {
        let s = self.stride(i);
        idx - self.digit(idx, i) * s + a * s
    }

    /// 𝔇_i G(a; 𝒙) = G(𝒙) − G(𝒙 with x_i = a).
    pub fn diff1(&self, idx: usize, i: usize, a: usize) -> f64 {
        self.values[idx] - self.values[self.replace(idx, i, a)]
    }

    /// 𝔇_ij G(a, b; 𝒙) = G(𝒙) − G(x_i = a) − G(x_j = b) + G(x_i = a, x_j = b); zero on the diagonal.
    pub fn diff2(&self, idx: usize, i: usize, j: usize, a: usize, b: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let ia = self.replace(idx, i, a);
        let jb = self.replace(idx, j, b);
        let both = self.replace(ia, j, b);
        self.values[idx] - self.values[ia] - self.values[jb] + self.values[both]
    }

    /// The table 𝒙 ↦ 𝔇_i G(a; 𝒙).
    pub fn diff1_table(&self, i: usize, a: usize) -> Self {
        let values = (0..self.values.len()).map(|idx| self.diff1(idx, i, a)).collect();
        Self { d: self.d, n: self.n, values }
    }
}

fn table_dim(d: usize, n: usize, cap: usize) -> Result<usize> {
    let dim = (d as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if dim > cap as u128 {
        return Err(Error::CapExceeded { count: dim, cap: cap as u128 });
    }
    Ok(dim as usize)
}

/// F materialized over Π^N.
pub fn f_table(phi: &PhiFunction, comp: &Compensator, cap: usize) -> Result<FTable> {
    let d = phi.space.d();
    check_dim(d, comp.values.len())?;
    let mut counts = vec![0u32; d];
    let mut scratch = Vec::with_capacity(d);
    FTable::from_fn(d, phi.n, cap, |cfg| {
        counts.iter_mut().for_each(|c| *c = 0);
        cfg.iter().for_each(|&x| counts[x] += 1);
        f_from_counts(phi, &comp.values, &counts, &mut scratch)
    })
}

/// Maxima of the first-order coefficients and of the Hessian HS norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiffOps {
    /// max over i and 𝒙 of 𝔡_i G(𝒙).
    pub d1_max: f64,
    /// max over 𝒙 of ‖𝔡^{(2)} G(𝒙)‖_HS.
    pub hess_hs_max: f64,
}

/// 𝔡_i G = [½ ∫ (𝔇_i G)² dρ]^{1/2}, 𝔡_ij G = [¼ ∫∫ (𝔇_ij G)² dρ dρ]^{1/2}.
pub fn diff_ops(table: &FTable, rho: &Density, exec: Exec) -> Result<DiffOps> {
    check_dim(table.d, rho.w().len())?;
    let p = probability_masses(rho.space(), rho)?;
    let (d, n) = (table.d, table.n);
    let per = map_range(exec, table.values.len(), |idx| {
        let mut d1 = 0.0f64;
        let mut hs2 = 0.0;
        for i in 0..n {
            let s: f64 = (0..d).map(|a| p[a] * table.diff1(idx, i, a).powi(2)).sum();
            d1 = d1.max((0.5 * s).sqrt());
            for j in (0..n).filter(|&j| j != i) {
                let mut s2 = 0.0;
                for a in 0..d {
                    for b in 0..d {
                        s2 += p[a] * p[b] * table.diff2(idx, i, j, a, b).powi(2);
                    }
                }
                hs2 += 0.25 * s2;
            }
        }
        (d1, hs2.sqrt())
    });
    let (d1_max, hess_hs_max) = per.into_iter().fold((0.0f64, 0.0f64), |(a, b), (x, y)| (a.max(x), b.max(y)));
    Ok(DiffOps { d1_max, hess_hs_max })
}

/// E[G] and max over k, a of |E[G | x_k = a]| under ρ^{⊗N}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectationConditions {
    pub mean: f64,
    pub max_conditional: f64,
}

/// Both expectations by summation over the whole table.
pub fn expectation_conditions(table: &FTable, rho: &Density) -> Result<ExpectationConditions> {
    check_dim(table.d, rho.w().len())?;
    let p = probability_masses(rho.space(), rho)?;
    let (d, n) = (table.d, table.n);
    let mut mean = 0.0;
    let mut cond = vec![vec![0.0; d]; n];
    let mut cfg = vec![0; n];
    for (idx, &g) in table.values.iter().enumerate() {
        decode_config(idx, d, n, &mut cfg);
        mean += g * cfg.iter().map(|&x| p[x]).product::<f64>();
        for k in 0..n {
            let w: f64 = (0..n).filter(|&j| j != k).map(|j| p[cfg[j]]).product();
            cond[k][cfg[k]] += w * g;
        }
    }
    let max_conditional = cond.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(ExpectationConditions { mean, max_conditional })
}

/// Empirical sups of the bounded-difference conditions on Φ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiConditions {
    /// max over μ, x, x' of |Φ(x,μ) − Φ(x',μ)|.
    pub c0: f64,
    /// max over μ of |Σ_x Φ(x,μ)ρ({x})|.
    pub c1_defect: f64,
    /// (N − 1)·max |Φ(z, σ + δ_a) − Φ(z, σ + δ_b)|.
    pub c2: f64,
    /// (N − 1)(N − 2)·max of the second difference in two particles.
    pub c3: f64,
    /// max of c0, c2, c3.
    pub c_hat: f64,
    pub evaluations: usize,
}

pub fn verify_phi_conditions(phi: &PhiFunction, rho: &Density, mode: SweepMode, exec: Exec) -> Result<PhiConditions> {
    let d = phi.space.d();
    let n = phi.n;
    let c1_defect = phi.centering_defect(rho)?;
    let c0 = phi
        .values
        .iter()
        .map(|row| {
            let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
            hi - lo
        })
        .fold(0.0, f64::max);
    let bases = |k: u32| -> Result<Vec<Vec<u32>>> {
        match mode {
            SweepMode::Exhaustive { cap } => {
                let count = composition_count(k, d);
                if count > cap {
                    return Err(Error::CapExceeded { count, cap });
                }
                Ok(Compositions::new(k, d).collect())
            }
            SweepMode::Sampled { samples, seed } => {
                let mut rng = rng_for(seed, k as u64);
                Ok((0..samples)
                    .map(|_| {
                        let mut c = vec![0u32; d];
                        for _ in 0..k {
                            c[rng.gen_range(0..d)] += 1;
                        }
                        c
                    })
                    .collect())
            }
        }
    };

    let b2 = bases((n - 2) as u32)?;
    let mut evaluations = phi.values.len();
    let sup2 = map_range(exec, b2.len(), |i| {
        let mut s = b2[i].clone();
        let mut rows = Vec::with_capacity(d);
        for a in 0..d {
            s[a] += 1;
            rows.push(phi.row(&s).to_vec());
            s[a] -= 1;
        }
        let mut m = 0.0f64;
        for a in 0..d {
            for b in a + 1..d {
                for z in 0..d {
                    m = m.max((rows[a][z] - rows[b][z]).abs());
                }
            }
        }
        m
    })
    .into_iter()
    .fold(0.0, f64::max);
    evaluations += b2.len() * d;
    let c2 = (n - 1) as f64 * sup2;

    let c3 = if n >= 3 {
        let b3 = bases((n - 3) as u32)?;
        let sup3 = map_range(exec, b3.len(), |i| {
            let mut s = b3[i].clone();
            let mut rows = vec![Vec::new(); d * d];
            for a in 0..d {
                for b in a..d {
                    s[a] += 1;
                    s[b] += 1;
                    rows[a * d + b] = phi.row(&s).to_vec();
                    rows[b * d + a] = rows[a * d + b].clone();
                    s[a] -= 1;
                    s[b] -= 1;
                }
            }
            let mut m = 0.0f64;
            for a in 0..d {
                for a2 in 0..d {
                    for b in 0..d {
                        for b2 in 0..d {
                            for z in 0..d {
                                let v = rows[a * d + b][z] - rows[a2 * d + b][z] - rows[a * d + b2][z]
                                    + rows[a2 * d + b2][z];
                                m = m.max(v.abs());
                            }
                        }
                    }
                }
            }
            m
        })
        .into_iter()
        .fold(0.0, f64::max);
        evaluations += b3.len() * d * (d + 1) / 2;
        ((n - 1) * (n - 2)) as f64 * sup3
    } else {
        0.0
    };
    let c_hat = c0.max(c2).max(c3);
    Ok(PhiConditions { c0, c1_defect, c2, c3, c_hat, evaluations })
}

/// Where the constant C of the exponential moment came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantSource {
    Override,
    Declared,
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationSettings {
    pub samples: usize,
    pub seed: u64,
    /// Overrides both the declared and the empirical constant.
    pub c_override: Option<f64>,
    /// Largest composition count of N particles summed exactly.
    pub exact_cap: u128,
    pub compensator: Averaging,
    pub sweep: SweepMode,
}

impl Default for ConcentrationSettings {
    fn default() -> Self {
        Self {
            samples: 100_000,
            seed: 0,
            c_override: None,
            exact_cap: 1_000_000,
            compensator: Averaging { cap: 1_000_000, mc_samples: Some(100_000), seed: 0 },
            sweep: SweepMode::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub n: usize,
    pub conditions: PhiConditions,
    pub c: f64,
    pub c_source: ConstantSource,
    pub b: f64,
    /// Monte Carlo E[exp((b/C)|F|)].
    pub moment_estimate: f64,
    pub std_error: f64,
    pub median_of_means: f64,
    /// Monte Carlo mean of F and its standard error.
    pub f_mean: f64,
    pub f_std_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<f64>,
    pub compensator_exact: bool,
    pub samples: usize,
    pub seed: u64,
    pub pass: bool,
}

/// E[exp((b/C)|F|)] under ρ^{⊗N}: Monte Carlo always, exactly when the
/// compositions of N particles fit in `exact_cap`.
pub fn concentration_test(
    phi: &PhiFunction,
    rho: &Density,
    settings: &ConcentrationSettings,
    exec: Exec,
) -> Result<ConcentrationReport> {
    if settings.samples < MIN_SAMPLES {
        return Err(Error::Invalid(format!(
            "concentration test needs at least {MIN_SAMPLES} samples, got {}",
            settings.samples
        )));
    }
    let p = probability_masses(&phi.space, rho)?;
    let d = p.len();
    let n = phi.n;
    let conditions = verify_phi_conditions(phi, rho, settings.sweep, exec)?;
    let (c, c_source) = match (settings.c_override, phi.declared_c) {
        (Some(c), _) => (c, ConstantSource::Override),
        (None, Some(c)) => (c, ConstantSource::Declared),
        (None, None) => (conditions.c_hat, ConstantSource::Empirical),
    };
    if !(c.is_finite() && c >= 0.0) {
        return Err(Error::Invalid(format!("constant C = {c}")));
    }
    let b = b_constant();
    let base = ConcentrationReport {
        n,
        conditions,
        c,
        c_source,
        b,
        moment_estimate: 1.0,
        std_error: 0.0,
        median_of_means: 1.0,
        f_mean: 0.0,
        f_std_error: 0.0,
        exact: Some(1.0),
        compensator_exact: true,
        samples: settings.samples,
        seed: settings.seed,
        pass: true,
    };
    if c == 0.0 {
        return Ok(base);
    }
    let comp = compensator(phi, rho, settings.compensator, exec)?;
    let scale = b / c;

    let exact = match multinomial_law(&p, n as u32, settings.exact_cap) {
        Ok(law) => {
            let mut scratch = Vec::with_capacity(d);
            Some(law.iter().map(|(cnt, w)| w * (scale * f_from_counts(phi, &comp.values, cnt, &mut scratch).abs()).exp()).sum())
        }
        Err(Error::CapExceeded { .. }) => None,
        Err(e) => return Err(e),
    };

    let sampler = Sampler::new(&p);
    let fs: Vec<f64> = mc_chunks(exec, settings.samples, settings.seed, |rng, len| {
        let mut counts = vec![0u32; d];
        let mut scratch = Vec::with_capacity(d);
        (0..len)
            .map(|_| {
                sampler.counts(rng, n as u32, &mut counts);
                f_from_counts(phi, &comp.values, &counts, &mut scratch)
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    let (f_mean, f_std_error) = mean_se(&fs);
    let e: Vec<f64> = fs.iter().map(|f| (scale * f.abs()).exp()).collect();
    let (moment_estimate, std_error) = mean_se(&e);
    let median_of_means = median_of_means(&e, MOM_BUCKETS);
    let pass = moment_estimate - 3.0 * std_error <= 2.0 && median_of_means <= 2.0 && exact.is_none_or(|v| v <= 2.0);
    Ok(ConcentrationReport {
        moment_estimate,
        std_error,
        median_of_means,
        f_mean,
        f_std_error,
        exact,
        compensator_exact: comp.exact,
        pass,
        ..base
    })
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let k = v.len() as f64;
    let mean = v.iter().sum::<f64>() / k;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Median of the means of `buckets` consecutive blocks.
fn median_of_means(v: &[f64], buckets: usize) -> f64 {
    let size = v.len() / buckets;
    let mut means: Vec<f64> = (0..buckets)
        .map(|b| {
            let end = if b + 1 == buckets { v.len() } else { (b + 1) * size };
            let block = &v[b * size..end];
            block.iter().sum::<f64>() / block.len() as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let h = buckets / 2;
    if buckets % 2 == 0 {
        0.5 * (means[h - 1] + means[h])
    } else {
        means[h]
    }
}
