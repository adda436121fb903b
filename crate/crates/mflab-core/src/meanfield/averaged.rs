use nalgebra::DMatrix;
use rand::Rng;

use super::MeanFieldKernel;
use crate::error::{Error, Result};
use crate::kernel::JumpKernel;
use crate::par::rng_for;
use crate::space::{composition_count, ln_factorials, ln_multinomial, Compositions, EmpiricalMeasure, FiniteSpace};

/// How to take the expectation over empirical measures of N − 1 iid samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Averaging {
    /// Largest composition count evaluated exactly.
    pub cap: u128,
    /// Monte Carlo sample count used above the cap; `None` makes exceeding the cap an error.
    pub mc_samples: Option<usize>,
    pub seed: u64,
}

impl Default for Averaging {
    fn default() -> Self {
        Self { cap: 100_000, mc_samples: None, seed: 0 }
    }
}

#[derive(Debug, Clone)]
enum Table {
    Exact { entries: Vec<(Vec<u32>, f64, DMatrix<f64>)> },
    MonteCarlo { samples: usize, seed: u64 },
}

/// Λ̄(ρ) = E[Λ_N(μ)] with μ the empirical measure of N − 1 iid ρ-samples.
/// Kernel values are tabulated once; only the weights depend on ρ.
#[derive(Debug, Clone)]
pub struct AveragedKernel {
    space: FiniteSpace,
    n: u32,
    table: Table,
}

impl AveragedKernel {
    pub fn new(kern: &dyn MeanFieldKernel, big_n: usize, opts: Averaging) -> Result<Self> {
        if big_n < 2 {
            return Err(Error::Invalid("averaged kernel needs N >= 2".into()));
        }
        let space = kern.space().clone();
        let d = space.d();
        let n = (big_n - 1) as u32;
        let count = composition_count(n, d);
        let table = if count <= opts.cap {
            let lnf = ln_factorials(n);
            let mut entries = Vec::with_capacity(count as usize);
            for c in Compositions::new(n, d) {
                let lam = kern.eval_empirical(&EmpiricalMeasure::from_counts(c.clone())?)?;
                entries.push((c.clone(), ln_multinomial(&c, &lnf), lam.lam().clone()));
            }
            Table::Exact { entries }
        } else if let Some(samples) = opts.mc_samples {
            Table::MonteCarlo { samples, seed: opts.seed }
        } else {
            return Err(Error::CapExceeded { count, cap: opts.cap });
        };
        Ok(Self { space, n, table })
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.table, Table::Exact { .. })
    }

    /// Evaluates Λ̄ at the probability measure with atom masses `p`.
    /// Monte Carlo mode reuses the same uniforms on every call.
    pub fn eval(&self, kern: &dyn MeanFieldKernel, p: &[f64]) -> Result<JumpKernel> {
        let d = self.space.d();
        let mut acc = DMatrix::zeros(d, d);
        match &self.table {
            Table::Exact { entries } => {
                let lnp: Vec<f64> = p.iter().map(|v| v.max(0.0).ln()).collect();
                for (c, lnm, lam) in entries {
                    let mut s = *lnm;
                    for (x, &k) in c.iter().enumerate() {
                        if k > 0 {
                            s += k as f64 * lnp[x];
                        }
                    }
                    if s > f64::NEG_INFINITY {
                        acc += lam * s.exp();
                    }
                }
            }
            Table::MonteCarlo { samples, seed } => {
                let mut rng = rng_for(*seed, 0);
                let cdf: Vec<f64> = p
                    .iter()
                    .scan(0.0, |s, v| {
                        *s += v.max(0.0);
                        Some(*s)
                    })
                    .collect();
                let total = *cdf.last().unwrap_or(&1.0);
                let mut counts = vec![0u32; d];
                for _ in 0..*samples {
                    counts.iter_mut().for_each(|c| *c = 0);
                    for _ in 0..self.n {
                        let u = rng.gen::<f64>() * total;
                        let x = cdf.iter().position(|&c| u < c).unwrap_or(d - 1);
                        counts[x] += 1;
                    }
                    acc += kern.eval_empirical(&EmpiricalMeasure::from_counts(counts.clone())?)?.lam();
                }
                acc /= *samples as f64;
            }
        }
        JumpKernel::new(&self.space, acc)
    }
}

/// One-shot Λ̄(ρ) for the measure with masses `p` and N particles.
pub fn averaged_kernel(kern: &dyn MeanFieldKernel, p: &[f64], big_n: usize, opts: Averaging) -> Result<JumpKernel> {
    AveragedKernel::new(kern, big_n, opts)?.eval(kern, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::{ConstantKernel, TwoThreeBodyKernel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_two_three(rng: &mut ChaCha8Rng, d: usize) -> TwoThreeBodyKernel {
        let space = FiniteSpace::new((0..d).map(|_| rng.gen_range(0.5..2.0)).collect()).unwrap();
        let g1 = (0..d * d * d).map(|_| rng.gen_range(0.0..1.0)).collect();
        let g2 = (0..d * d * d * d).map(|_| rng.gen_range(0.0..1.0)).collect();
        TwoThreeBodyKernel::new(&space, g1, Some(g2), None).unwrap()
    }

    #[test]
    fn enumeration_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let k = random_two_three(&mut rng, 3);
        for _ in 0..10 {
            let w: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
            let s: f64 = w.iter().sum();
            let p: Vec<f64> = w.iter().map(|v| v / s).collect();
            let avg = averaged_kernel(&k, &p, 5, Averaging::default()).unwrap();
            let closed = k.averaged_closed_form(&p).unwrap();
            assert!((avg.lam() - closed.lam()).abs().max() < 1e-10);
        }
    }

    #[test]
    fn constant_kernel_average() {
        let s = FiniteSpace::counting(2).unwrap();
        let lam = JumpKernel::from_rows(&s, &[vec![0.0, 1.0], vec![0.5, 0.0]]).unwrap();
        let k = ConstantKernel::new(lam.clone());
        let avg = averaged_kernel(&k, &[0.3, 0.7], 6, Averaging::default()).unwrap();
        assert!((avg.lam() - lam.lam()).abs().max() < 1e-14);
    }

    #[test]
    fn point_mass_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let k = random_two_three(&mut rng, 3);
        let avg = averaged_kernel(&k, &[0.0, 1.0, 0.0], 4, Averaging::default()).unwrap();
        let direct = k.eval_empirical(&EmpiricalMeasure::from_counts(vec![0, 3, 0]).unwrap()).unwrap();
        assert!((avg.lam() - direct.lam()).abs().max() < 1e-14);
    }

    #[test]
    fn cap_and_monte_carlo_fallback() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let k = random_two_three(&mut rng, 3);
        let tight = Averaging { cap: 3, mc_samples: None, seed: 0 };
        assert!(matches!(AveragedKernel::new(&k, 5, tight), Err(Error::CapExceeded { .. })));
        let mc = Averaging { cap: 3, mc_samples: Some(20_000), seed: 4 };
        let p = [0.2, 0.5, 0.3];
        let est = averaged_kernel(&k, &p, 5, mc).unwrap();
        let closed = k.averaged_closed_form(&p).unwrap();
        assert!((est.lam() - closed.lam()).abs().max() < 0.05);
        assert_eq!(est, averaged_kernel(&k, &p, 5, mc).unwrap());
    }

    #[test]
    fn lipschitz_in_rho() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let k = random_two_three(&mut rng, 3);
        let big_n = 4;
        let m_lambda = 3.0 * k.c1();
        let avg = AveragedKernel::new(&k, big_n, Averaging::default()).unwrap();
        for _ in 0..100 {
            let a: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
            let b: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
            let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
            let pa: Vec<f64> = a.iter().map(|v| v / sa).collect();
            let pb: Vec<f64> = b.iter().map(|v| v / sb).collect();
            // ‖ρ − ρ'‖_{L¹(ν)} equals the TV distance of the masses
            let l1: f64 = pa.iter().zip(&pb).map(|(u, v)| (u - v).abs()).sum();
            let ka = avg.eval(&k, &pa).unwrap();
            let kb = avg.eval(&k, &pb).unwrap();
            let dist = crate::kernel::kernel_distance(&ka, &kb).unwrap();
            assert!(dist <= (big_n - 1) as f64 * m_lambda * l1 + 1e-12);
        }
    }
}
