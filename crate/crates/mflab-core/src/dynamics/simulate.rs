//! Uniformized sampling of the N-particle jump process.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::kernel::{JumpKernel, RateGenerator};
use crate::meanfield::{KernelRef, KernelTable};
use crate::par::{map_range, rng_for, Exec};
use crate::space::{EmpiricalMeasure, DEFAULT_ENUM_CAP};

/// Piecewise-constant configurations; `configs[i]` holds on [times[i], times[i+1]).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticleTrajectory {
    pub seed: u64,
    pub times: Vec<f64>,
    pub configs: Vec<Vec<usize>>,
    /// Candidate events including thinned ones.
    pub candidates: usize,
}

/// Single-site marginal estimates over replicas.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalEstimate {
    pub replicas: usize,
    /// Fraction of replicas with particle k at x, indexed [k][x].
    pub per_site: Vec<Vec<f64>>,
    /// Mean over replicas of the fraction of particles at x.
    pub mean: Vec<f64>,
    /// Standard error of `mean` across replicas.
    pub std_error: Vec<f64>,
}

/// Uniformized jump-chain sampler with static majorant N·(max exit rate + M_Λ).
#[derive(Debug, Clone)]
pub struct Simulator {
    g: RateGenerator,
    kern: KernelRef,
    n: usize,
    table: Option<KernelTable>,
    per_particle: f64,
}

fn cumulative_pick(rng: &mut ChaCha8Rng, weights: impl Iterator<Item = f64> + Clone, total: f64) -> usize {
    let u = rng.gen::<f64>() * total;
    let mut s = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            s += w;
            last = i;
            if u < s {
                return i;
            }
        }
    }
    last
}

impl Simulator {
    /// M_Λ comes from the exact table sups when the table fits, otherwise from declared constants.
    pub fn new(g: &RateGenerator, kern: KernelRef, big_n: usize, exec: Exec) -> Result<Self> {
        if big_n < 2 {
            return Err(Error::Invalid("simulator needs N >= 2".into()));
        }
        check_dim(g.space().d(), kern.space().d())?;
        let (table, m_lambda) = match KernelTable::build(kern.as_ref(), (big_n - 1) as u32, DEFAULT_ENUM_CAP, exec) {
            Ok(t) => {
                let m = t.intensity_sups().m_lambda_hat;
                (Some(t), m)
            }
            Err(Error::CapExceeded { .. }) => {
                let m = kern
                    .constants()
                    .m_lambda
                    .ok_or_else(|| Error::Invalid("M_Lambda undeclared and table too large to estimate it".into()))?;
                (None, m)
            }
            Err(e) => return Err(e),
        };
        Ok(Self { g: g.clone(), kern, n: big_n, table, per_particle: g.max_exit_rate() + m_lambda })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total majorant event rate.
    pub fn majorant(&self) -> f64 {
        self.n as f64 * self.per_particle
    }

    fn kernel_for(&self, counts: &[u32]) -> Result<JumpKernel> {
        match &self.table {
            Some(t) => Ok(t.kernel(t.lookup(counts).expect("table covers every composition")).clone()),
            None => self.kern.eval_empirical(&EmpiricalMeasure::from_counts(counts.to_vec())?),
        }
    }

    fn sample_initial(&self, rng: &mut ChaCha8Rng, p0: &[f64]) -> Vec<usize> {
        let total: f64 = p0.iter().sum();
        (0..self.n).map(|_| cumulative_pick(rng, p0.iter().copied(), total)).collect()
    }

    /// Runs one path; `record` is called at time 0 and after every accepted jump.
    fn run<F: FnMut(f64, &[usize])>(&self, rng: &mut ChaCha8Rng, p0: &[f64], t_end: f64, mut record: F) -> Result<usize> {
        let d = self.g.space().d();
        let mut cfg = self.sample_initial(rng, p0);
        let mut counts = vec![0u32; d];
        cfg.iter().for_each(|&x| counts[x] += 1);
        record(0.0, &cfg);
        let rate = self.majorant();
        let mut t = 0.0;
        let mut candidates = 0;
        if rate <= 0.0 {
            return Ok(0);
        }
        let q = self.g.q();
        loop {
            t += -(1.0 - rng.gen::<f64>()).ln() / rate;
            if t > t_end {
                return Ok(candidates);
            }
            candidates += 1;
            let k = rng.gen_range(0..self.n);
            let x = cfg[k];
            let exit = -q[(x, x)];
            let u = rng.gen::<f64>() * self.per_particle;
            let target = if u < exit {
                Some(cumulative_pick(rng, (0..d).map(|y| if y == x { 0.0 } else { q[(x, y)] }), exit))
            } else {
                counts[x] -= 1;
                let lam = self.kernel_for(&counts)?;
                counts[x] += 1;
                let jump = lam.intensity(x);
                if exit + jump > self.per_particle * (1.0 + 1e-12) {
                    return Err(Error::Invalid(format!(
                        "acceptance probability {} exceeds 1",
                        (exit + jump) / self.per_particle
                    )));
                }
                if u < exit + jump {
                    Some(cumulative_pick(rng, (0..d).map(|y| lam.lam()[(x, y)]), jump))
                } else {
                    None
                }
            };
            if let Some(y) = target {
                counts[x] -= 1;
                counts[y] += 1;
                cfg[k] = y;
                record(t, &cfg);
            }
        }
    }

    /// Configuration at `t_end` for the path with the given seed.
    pub fn final_config(&self, p0: &[f64], t_end: f64, seed: u64) -> Result<Vec<usize>> {
        let mut rng = rng_for(seed, 0);
        let mut last = Vec::new();
        self.run(&mut rng, p0, t_end, |_, c| {
            last.clear();
            last.extend_from_slice(c);
        })?;
        Ok(last)
    }
}

fn check_initial(sim: &Simulator, p0: &[f64]) -> Result<()> {
    check_dim(sim.g.space().d(), p0.len())?;
    if p0.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || p0.iter().sum::<f64>() <= 0.0 {
        return Err(Error::Invalid("initial law must be nonnegative with positive mass".into()));
    }
    Ok(())
}

/// One trajectory with iid initial particles drawn from masses `p0`.
pub fn simulate_particles(sim: &Simulator, p0: &[f64], t_end: f64, seed: u64) -> Result<ParticleTrajectory> {
    check_initial(sim, p0)?;
    let mut rng = rng_for(seed, 0);
    let mut times = Vec::new();
    let mut configs = Vec::new();
    let candidates = sim.run(&mut rng, p0, t_end, |t, c| {
        times.push(t);
        configs.push(c.to_vec());
    })?;
    Ok(ParticleTrajectory { seed, times, configs, candidates })
}

/// Final configuration of the path with the given seed.
pub fn simulate_final(sim: &Simulator, p0: &[f64], t_end: f64, seed: u64) -> Result<Vec<usize>> {
    check_initial(sim, p0)?;
    sim.final_config(p0, t_end, seed)
}

/// Marginals at `t_end` over `replicas` paths; replica r uses seed derived from (seed, r).
pub fn simulate_marginals(
    sim: &Simulator,
    p0: &[f64],
    t_end: f64,
    replicas: usize,
    seed: u64,
    exec: Exec,
) -> Result<MarginalEstimate> {
    check_initial(sim, p0)?;
    if replicas < 2 {
        return Err(Error::Invalid("need at least two replicas".into()));
    }
    let d = sim.g.space().d();
    let n = sim.n;
    let finals = map_range(exec, replicas, |r| {
        let mut rng = rng_for(seed, r as u64);
        let mut last = Vec::new();
        sim.run(&mut rng, p0, t_end, |_, c| {
            last.clear();
            last.extend_from_slice(c);
        })
        .map(|_| last)
    });
    let mut per_site = vec![vec![0.0; d]; n];
    let mut s = vec![0.0; d];
    let mut s2 = vec![0.0; d];
    let mut frac = vec![0.0; d];
    for cfg in finals {
        let cfg = cfg?;
        frac.iter_mut().for_each(|v| *v = 0.0);
        for (k, &x) in cfg.iter().enumerate() {
            per_site[k][x] += 1.0;
            frac[x] += 1.0 / n as f64;
        }
        for x in 0..d {
            s[x] += frac[x];
            s2[x] += frac[x] * frac[x];
        }
    }
    let r = replicas as f64;
    per_site.iter_mut().for_each(|row| row.iter_mut().for_each(|v| *v /= r));
    let mean: Vec<f64> = s.iter().map(|v| v / r).collect();
    let std_error = (0..d)
        .map(|x| (((s2[x] / r - mean[x] * mean[x]) * r / (r - 1.0)).max(0.0) / r).sqrt())
        .collect();
    Ok(MarginalEstimate { replicas, per_site, mean, std_error })
}
