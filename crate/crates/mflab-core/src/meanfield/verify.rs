use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::MeanFieldKernel;
use crate::error::{Error, Result};
use crate::kernel::{kernel_distance, JumpKernel};
use crate::par::{map_slice, mc_chunks, rng_for, Exec};
use crate::space::{composition_count, Compositions, EmpiricalMeasure};

/// Exhaustive enumeration or random sampling of configurations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepMode {
    Exhaustive { cap: u128 },
    Sampled { samples: usize, seed: u64 },
}

impl Default for SweepMode {
    fn default() -> Self {
        SweepMode::Exhaustive { cap: 10_000_000 }
    }
}

/// Λ and Λ* at every empirical measure of `n` particles.
#[derive(Debug, Clone)]
pub struct KernelTable {
    n: u32,
    counts: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
    kernels: Vec<JumpKernel>,
    adjoints: Vec<JumpKernel>,
}

impl KernelTable {
    pub fn build(kern: &dyn MeanFieldKernel, n: u32, cap: u128, exec: Exec) -> Result<Self> {
        let d = kern.space().d();
        let count = composition_count(n, d);
        if count > cap {
            return Err(Error::CapExceeded { count, cap });
        }
        let counts: Vec<Vec<u32>> = Compositions::new(n, d).collect();
        let evaluated = map_slice(exec, &counts, |c| kern.eval_empirical(&EmpiricalMeasure::from_counts(c.clone())?));
        let kernels = evaluated.into_iter().collect::<Result<Vec<_>>>()?;
        let adjoints = kernels.iter().map(JumpKernel::adjoint).collect();
        let index = counts.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        Ok(Self { n, counts, index, kernels, adjoints })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    pub fn counts(&self) -> &[Vec<u32>] {
        &self.counts
    }

    pub fn lookup(&self, counts: &[u32]) -> Option<usize> {
        self.index.get(counts).copied()
    }

    pub fn kernel(&self, i: usize) -> &JumpKernel {
        &self.kernels[i]
    }

    pub fn adjoint(&self, i: usize) -> &JumpKernel {
        &self.adjoints[i]
    }

    /// Exact sups of ‖Λ(μ)‖_𝒥 and ‖Λ*(μ)‖_𝒥 over the table.
    pub fn intensity_sups(&self) -> IntensitySweep {
        IntensitySweep {
            m_lambda_hat: self.kernels.iter().map(JumpKernel::j_norm).fold(0.0, f64::max),
            m_lambda_star_hat: self.adjoints.iter().map(JumpKernel::j_norm).fold(0.0, f64::max),
            evaluations: self.len(),
        }
    }
}

/// Empirical sups of the kernel and adjoint intensities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntensitySweep {
    pub m_lambda_hat: f64,
    pub m_lambda_star_hat: f64,
    pub evaluations: usize,
}

fn random_measure(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..d).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

/// Max of ‖Λ(μ)‖_𝒥 and ‖Λ*(μ)‖_𝒥 over the vertices and `samples` random measures.
pub fn sweep_intensities(kern: &dyn MeanFieldKernel, samples: usize, seed: u64) -> Result<IntensitySweep> {
    let d = kern.space().d();
    let mut rng = rng_for(seed, 0);
    let mut measures: Vec<Vec<f64>> = (0..d)
        .map(|x| {
            let mut m = vec![0.0; d];
            m[x] = 1.0;
            m
        })
        .collect();
    measures.extend((0..samples).map(|_| random_measure(&mut rng, d)));
    let mut out = IntensitySweep { m_lambda_hat: 0.0, m_lambda_star_hat: 0.0, evaluations: measures.len() };
    for mu in &measures {
        let k = kern.eval(mu)?;
        out.m_lambda_hat = out.m_lambda_hat.max(k.j_norm());
        out.m_lambda_star_hat = out.m_lambda_star_hat.max(k.adjoint_j_norm());
    }
    Ok(out)
}

/// Largest observed ratio ‖Υ(μ) − Υ(μ')‖_𝒥 / ‖μ − μ'‖_TV for Υ ∈ {Λ, Λ*}.
pub fn lipschitz_sweep(kern: &dyn MeanFieldKernel, samples: usize, seed: u64) -> Result<f64> {
    let d = kern.space().d();
    let mut rng = rng_for(seed, 1);
    let mut best: f64 = 0.0;
    for i in 0..samples {
        let a = random_measure(&mut rng, d);
        let b = if i % 2 == 0 {
            random_measure(&mut rng, d)
        } else {
            let c = random_measure(&mut rng, d);
            let t = 1e-3;
            a.iter().zip(&c).map(|(u, v)| (1.0 - t) * u + t * v).collect()
        };
        let tv: f64 = a.iter().zip(&b).map(|(u, v)| (u - v).abs()).sum();
        if tv < 1e-12 {
            continue;
        }
        let (ka, kb) = (kern.eval(&a)?, kern.eval(&b)?);
        best = best.max(kernel_distance(&ka, &kb)? / tv);
        best = best.max(kernel_distance(&ka.adjoint(), &kb.adjoint())? / tv);
    }
    Ok(best)
}

/// Where a bounded-difference sup was attained.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub base: Vec<u32>,
    pub swaps: Vec<(usize, usize)>,
    pub upsilon: &'static str,
    pub value: f64,
}

/// Result of a first- or second-order bounded-difference sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundedDifference {
    pub theta_hat: f64,
    pub theta_lambda: f64,
    pub theta_lambda_star: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    pub evaluations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub declared: Option<f64>,
    pub within_declared: bool,
}

fn finish(parts: Vec<(f64, f64, Option<Witness>, usize)>, declared: Option<f64>) -> BoundedDifference {
    let mut out = BoundedDifference {
        theta_hat: 0.0,
        theta_lambda: 0.0,
        theta_lambda_star: 0.0,
        witness: None,
        evaluations: 0,
        declared,
        within_declared: true,
    };
    for (a, b, w, n) in parts {
        out.theta_lambda = out.theta_lambda.max(a);
        out.theta_lambda_star = out.theta_lambda_star.max(b);
        out.evaluations += n;
        if let Some(w) = w {
            if out.witness.as_ref().is_none_or(|cur| w.value > cur.value) {
                out.witness = Some(w);
            }
        }
    }
    out.theta_hat = out.theta_lambda.max(out.theta_lambda_star);
    if let Some(th) = declared {
        out.within_declared = out.theta_hat <= th * (1.0 + 1e-9) + 1e-12;
    }
    out
}

type Eval<'a> = dyn Fn(&[u32]) -> Result<(JumpKernel, JumpKernel)> + Sync + 'a;

fn evaluator<'a>(kern: &'a dyn MeanFieldKernel, table: Option<&'a KernelTable>) -> Box<Eval<'a>> {
    match table {
        Some(t) => Box::new(move |c: &[u32]| {
            let i = t.lookup(c).ok_or_else(|| Error::Invalid("configuration missing from table".into()))?;
            Ok((t.kernel(i).clone(), t.adjoint(i).clone()))
        }),
        None => Box::new(move |c: &[u32]| {
            let k = kern.eval_empirical(&EmpiricalMeasure::from_counts(c.to_vec())?)?;
            let a = k.adjoint();
            Ok((k, a))
        }),
    }
}

fn add(base: &[u32], atoms: &[usize]) -> Vec<u32> {
    let mut c = base.to_vec();
    for &x in atoms {
        c[x] += 1;
    }
    c
}

fn first_diff(ev: &Eval, base: &[u32], x: usize, xp: usize, scale: f64) -> Result<(f64, f64, Option<Witness>)> {
    let (k0, a0) = ev(&add(base, &[x]))?;
    let (k1, a1) = ev(&add(base, &[xp]))?;
    let dl = scale * kernel_distance(&k0, &k1)?;
    let da = scale * kernel_distance(&a0, &a1)?;
    let (upsilon, value) = if dl >= da { ("lambda", dl) } else { ("lambda_star", da) };
    Ok((dl, da, Some(Witness { base: base.to_vec(), swaps: vec![(x, xp)], upsilon, value })))
}

fn second_diff(
    ev: &Eval,
    base: &[u32],
    (x1, x1p): (usize, usize),
    (x2, x2p): (usize, usize),
    scale: f64,
) -> Result<(f64, f64, Option<Witness>)> {
    let (k00, a00) = ev(&add(base, &[x1, x2]))?;
    let (k10, a10) = ev(&add(base, &[x1p, x2]))?;
    let (k01, a01) = ev(&add(base, &[x1, x2p]))?;
    let (k11, a11) = ev(&add(base, &[x1p, x2p]))?;
    let norm = |a: &JumpKernel, b: &JumpKernel, c: &JumpKernel, e: &JumpKernel| {
        let m = a.lam() - b.lam() - c.lam() + e.lam();
        m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    };
    let dl = scale * norm(&k00, &k10, &k01, &k11);
    let da = scale * norm(&a00, &a10, &a01, &a11);
    let (upsilon, value) = if dl >= da { ("lambda", dl) } else { ("lambda_star", da) };
    Ok((dl, da, Some(Witness { base: base.to_vec(), swaps: vec![(x1, x1p), (x2, x2p)], upsilon, value })))
}

fn random_base(rng: &mut ChaCha8Rng, d: usize, n: u32) -> Vec<u32> {
    let mut c = vec![0u32; d];
    for _ in 0..n {
        c[rng.gen_range(0..d)] += 1;
    }
    c
}

/// Sup over bases of N − 2 particles and swaps x₁ → x₁' of (N−1)‖Υ(μ) − Υ(μ⁽¹⁾)‖_𝒥.
pub fn verify_a3(kern: &dyn MeanFieldKernel, big_n: usize, mode: SweepMode, exec: Exec) -> Result<BoundedDifference> {
    if big_n < 2 {
        return Err(Error::Invalid("first-order condition needs N >= 2".into()));
    }
    let d = kern.space().d();
    let base_n = (big_n - 2) as u32;
    let scale = (big_n - 1) as f64;
    let declared = kern.constants().theta;
    let swaps: Vec<(usize, usize)> = (0..d).flat_map(|a| (a + 1..d).map(move |b| (a, b))).collect();
    let parts = match mode {
        SweepMode::Exhaustive { cap } => {
            let total = composition_count(base_n, d).saturating_mul(swaps.len().max(1) as u128);
            if total > cap {
                return Err(Error::CapExceeded { count: total, cap });
            }
            let table = KernelTable::build(kern, base_n + 1, cap, exec)?;
            let ev = evaluator(kern, Some(&table));
            let bases: Vec<Vec<u32>> = Compositions::new(base_n, d).collect();
            map_slice(exec, &bases, |b| -> Result<_> {
                let (mut l, mut a, mut w) = (0.0f64, 0.0f64, None::<Witness>);
                for &(x, xp) in &swaps {
                    let (dl, da, wi) = first_diff(&*ev, b, x, xp, scale)?;
                    l = l.max(dl);
                    a = a.max(da);
                    if w.as_ref().is_none_or(|c| wi.as_ref().unwrap().value > c.value) {
                        w = wi;
                    }
                }
                Ok((l, a, w, swaps.len()))
            })
        }
        SweepMode::Sampled { samples, seed } => {
            let ev = evaluator(kern, None);
            mc_chunks(exec, samples, seed, |rng, len| -> Result<_> {
                let (mut l, mut a, mut w) = (0.0f64, 0.0f64, None::<Witness>);
                for _ in 0..len {
                    let b = random_base(rng, d, base_n);
                    let x = rng.gen_range(0..d);
                    let xp = rng.gen_range(0..d);
                    let (dl, da, wi) = first_diff(&*ev, &b, x, xp, scale)?;
                    l = l.max(dl);
                    a = a.max(da);
                    if w.as_ref().is_none_or(|c| wi.as_ref().unwrap().value > c.value) {
                        w = wi;
                    }
                }
                Ok((l, a, w, len))
            })
        }
    };
    Ok(finish(parts.into_iter().collect::<Result<Vec<_>>>()?, declared))
}

/// Sup over bases of N − 3 particles and two swaps of (N−1)(N−2)‖second difference‖_𝒥.
pub fn verify_a4(kern: &dyn MeanFieldKernel, big_n: usize, mode: SweepMode, exec: Exec) -> Result<BoundedDifference> {
    if big_n < 3 {
        return Err(Error::Invalid("second-order condition needs N >= 3".into()));
    }
    let d = kern.space().d();
    let base_n = (big_n - 3) as u32;
    let scale = ((big_n - 1) * (big_n - 2)) as f64;
    let declared = kern.constants().theta;
    let swaps: Vec<(usize, usize)> = (0..d).flat_map(|a| (a + 1..d).map(move |b| (a, b))).collect();
    let pairs: Vec<((usize, usize), (usize, usize))> =
        swaps.iter().flat_map(|&s1| swaps.iter().map(move |&s2| (s1, s2))).collect();
    let parts = match mode {
        SweepMode::Exhaustive { cap } => {
            let total = composition_count(base_n, d).saturating_mul(pairs.len().max(1) as u128);
            if total > cap {
                return Err(Error::CapExceeded { count: total, cap });
            }
            let table = KernelTable::build(kern, base_n + 2, cap, exec)?;
            let ev = evaluator(kern, Some(&table));
            let bases: Vec<Vec<u32>> = Compositions::new(base_n, d).collect();
            map_slice(exec, &bases, |b| -> Result<_> {
                let (mut l, mut a, mut w) = (0.0f64, 0.0f64, None::<Witness>);
                for &(s1, s2) in &pairs {
                    let (dl, da, wi) = second_diff(&*ev, b, s1, s2, scale)?;
                    l = l.max(dl);
                    a = a.max(da);
                    if w.as_ref().is_none_or(|c| wi.as_ref().unwrap().value > c.value) {
                        w = wi;
                    }
                }
                Ok((l, a, w, pairs.len()))
            })
        }
        SweepMode::Sampled { samples, seed } => {
            let ev = evaluator(kern, None);
            mc_chunks(exec, samples, seed, |rng, len| -> Result<_> {
                let (mut l, mut a, mut w) = (0.0f64, 0.0f64, None::<Witness>);
                for _ in 0..len {
                    let b = random_base(rng, d, base_n);
                    let s1 = (rng.gen_range(0..d), rng.gen_range(0..d));
                    let s2 = (rng.gen_range(0..d), rng.gen_range(0..d));
                    let (dl, da, wi) = second_diff(&*ev, &b, s1, s2, scale)?;
                    l = l.max(dl);
                    a = a.max(da);
                    if w.as_ref().is_none_or(|c| wi.as_ref().unwrap().value > c.value) {
                        w = wi;
                    }
                }
                Ok((l, a, w, len))
            })
        }
    };
    Ok(finish(parts.into_iter().collect::<Result<Vec<_>>>()?, declared))
}

/// Monte Carlo estimate of ε_N(ρ) = E[Ξ(x₁, μ(𝒙₋₁), ρ)] under ρ^{⊗N}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsilonEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
}

pub fn epsilon_n(
    kern: &dyn MeanFieldKernel,
    rho_masses: &[f64],
    big_n: usize,
    samples: usize,
    seed: u64,
    exec: Exec,
) -> Result<EpsilonEstimate> {
    if samples < 100 {
        return Err(Error::Invalid("epsilon_N needs at least 100 samples".into()));
    }
    if big_n < 2 {
        return Err(Error::Invalid("epsilon_N needs N >= 2".into()));
    }
    let d = kern.space().d();
    if kern.is_constant() {
        return Ok(EpsilonEstimate { estimate: 0.0, std_error: 0.0, samples });
    }
    let cdf: Vec<f64> = rho_masses
        .iter()
        .scan(0.0, |s, v| {
            *s += v;
            Some(*s)
        })
        .collect();
    let total = cdf[d - 1];
    let draw = |rng: &mut ChaCha8Rng| {
        let u = rng.gen::<f64>() * total;
        cdf.iter().position(|&c| u < c).unwrap_or(d - 1)
    };
    let n_other = (big_n - 1) as f64;
    let parts = mc_chunks(exec, samples, seed, |rng, len| -> Result<(f64, f64)> {
        let (mut s, mut s2) = (0.0, 0.0);
        let mut counts = vec![0u32; d];
        for _ in 0..len {
            let x1 = draw(rng);
            counts.iter_mut().for_each(|c| *c = 0);
            for _ in 1..big_n {
                counts[draw(rng)] += 1;
            }
            let mu: Vec<f64> = counts.iter().map(|&c| c as f64 / n_other).collect();
            let v = kern.xi(x1, &mu, rho_masses)?;
            s += v;
            s2 += v * v;
        }
        Ok((s, s2))
    });
    let (mut s, mut s2) = (0.0, 0.0);
    for p in parts {
        let (a, b) = p?;
        s += a;
        s2 += b;
    }
    let m = samples as f64;
    let mean = s / m;
    let var = ((s2 / m - mean * mean) * m / (m - 1.0)).max(0.0);
    Ok(EpsilonEstimate { estimate: mean, std_error: (var / m).sqrt(), samples })
}
