//! The exact N-particle master equation on Π^N.
//!
//! Configurations are indexed base-d little-endian: particle 0 is the least
//! significant digit. Densities on Π^N are taken relative to ν^{⊗N}.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::expm::expm;
use crate::kernel::RateGenerator;
use crate::meanfield::{KernelTable, MeanFieldKernel};
use crate::par::{map_range, Exec};
use crate::space::{decode_config, encode_config, l1_distance, FiniteSpace, DEFAULT_ENUM_CAP};

use super::{step_count, HALVING_TOL};

/// Default largest d^N accepted by [`MasterEquation::build`].
pub const DEFAULT_STATE_CAP: usize = 20_000;
/// Largest dimension propagated by a dense matrix exponential.
pub const DEFAULT_EXPM_MAX: usize = 2_000;

/// Compressed sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub dim: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseMatrix {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(|i| self.vals[i] * v[self.cols[i]]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[i])] += self.vals[i];
            }
        }
        m
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }
}

/// 𝓛*_N = Σ_k (𝒦*^{(k)} + 𝒜*^{(k)}) acting on densities on Π^N.
#[derive(Debug, Clone)]
pub struct MasterEquation {
    space: FiniteSpace,
    n: usize,
    generator: SparseMatrix,
    nu_n: Vec<f64>,
}

/// ν^{⊗N} over configuration indices.
pub fn product_nu(space: &FiniteSpace, big_n: usize) -> Vec<f64> {
    product_density(&vec![space.nu().to_vec(); big_n])
}

/// Tensor product of per-particle vectors, indexed base-d little-endian.
pub fn product_density(factors: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![1.0];
    for f in factors {
        let mut next = Vec::with_capacity(out.len() * f.len());
        for &a in f {
            next.extend(out.iter().map(|b| a * b));
        }
        out = next;
    }
    out
}

/// G(𝒙) = F(x_{perm[0]}, …, x_{perm[N−1]}).
pub fn permute_density(f: &[f64], d: usize, perm: &[usize]) -> Vec<f64> {
    let n = perm.len();
    let mut cfg = vec![0; n];
    let mut src = vec![0; n];
    (0..f.len())
        .map(|i| {
            decode_config(i, d, n, &mut cfg);
            for k in 0..n {
                src[k] = cfg[perm[k]];
            }
            f[encode_config(&src, d)]
        })
        .collect()
}

impl MasterEquation {
    pub fn build(g: &RateGenerator, kern: &dyn MeanFieldKernel, big_n: usize, cap: usize, exec: Exec) -> Result<Self> {
        if big_n < 2 {
            return Err(Error::Invalid("master equation needs N >= 2".into()));
        }
        let space = g.space().clone();
        check_dim(space.d(), kern.space().d())?;
        let d = space.d();
        let dim = (d as u128).checked_pow(big_n as u32).unwrap_or(u128::MAX);
        if dim > cap as u128 {
            return Err(Error::CapExceeded { count: dim, cap: cap as u128 });
        }
        let dim = dim as usize;
        let table = KernelTable::build(kern, (big_n - 1) as u32, DEFAULT_ENUM_CAP, exec)?;
        let kstar = g.kstar();
        let rows = map_range(exec, dim, |i| {
            let mut cfg = vec![0; big_n];
            decode_config(i, d, big_n, &mut cfg);
            let mut counts = vec![0u32; d];
            cfg.iter().for_each(|&x| counts[x] += 1);
            let mut diag = 0.0;
            let mut entries = Vec::with_capacity(big_n * (d - 1) + 1);
            let mut stride = 1;
            for k in 0..big_n {
                let xk = cfg[k];
                counts[xk] -= 1;
                let j = table.lookup(&counts).expect("table covers every composition");
                counts[xk] += 1;
                let lam = table.kernel(j);
                let adj = table.adjoint(j);
                diag += kstar[(xk, xk)] - lam.intensity(xk);
                for y in 0..d {
                    if y == xk {
                        continue;
                    }
                    let v = kstar[(xk, y)] + adj.lam()[(xk, y)];
                    if v != 0.0 {
                        entries.push((i + y * stride - xk * stride, v));
                    }
                }
                stride *= d;
            }
            entries.push((i, diag));
            entries.sort_by_key(|e| e.0);
            entries
        });
        let mut generator = SparseMatrix { dim, row_ptr: vec![0], cols: Vec::new(), vals: Vec::new() };
        for r in rows {
            for (c, v) in r {
                generator.cols.push(c);
                generator.vals.push(v);
            }
            generator.row_ptr.push(generator.cols.len());
        }
        Ok(Self { nu_n: product_nu(&space, big_n), space, n: big_n, generator })
    }

    pub fn space(&self) -> &FiniteSpace {
        &self.space
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.generator.dim
    }

    pub fn generator(&self) -> &SparseMatrix {
        &self.generator
    }

    /// ν^{⊗N} by configuration index.
    pub fn nu_n(&self) -> &[f64] {
        &self.nu_n
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), f.len())?;
        Ok(self.generator.apply(f))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.generator.to_dense()
    }

    pub fn mass(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.nu_n).map(|(a, b)| a * b).sum()
    }

    /// Density of the k-th single-site marginal relative to ν.
    pub fn marginal(&self, f: &[f64], k: usize) -> Vec<f64> {
        let d = self.space.d();
        let stride = d.pow(k as u32);
        let mut m = vec![0.0; d];
        for (i, (a, b)) in f.iter().zip(&self.nu_n).enumerate() {
            m[(i / stride) % d] += a * b;
        }
        m.iter().zip(self.space.nu()).map(|(a, b)| a / b).collect()
    }

    fn rk4(&self, f: &[f64], h: f64, steps: usize) -> Vec<f64> {
        let mut w = f.to_vec();
        let add = |w: &[f64], s: f64, k: &[f64]| -> Vec<f64> { w.iter().zip(k).map(|(a, b)| a + s * b).collect() };
        for _ in 0..steps {
            let k1 = self.generator.apply(&w);
            let k2 = self.generator.apply(&add(&w, 0.5 * h, &k1));
            let k3 = self.generator.apply(&add(&w, 0.5 * h, &k2));
            let k4 = self.generator.apply(&add(&w, h, &k3));
            for x in 0..w.len() {
                w[x] += h / 6.0 * (k1[x] + 2.0 * k2[x] + 2.0 * k3[x] + k4[x]);
            }
        }
        w
    }
}

/// e^{t𝓛*}F₀: dense exponential when D ≤ [`DEFAULT_EXPM_MAX`], otherwise
/// fourth-order stepping with step `dt` certified by step halving.
pub fn solve_master(me: &MasterEquation, f0: &[f64], t: f64, dt: f64) -> Result<Vec<f64>> {
    check_dim(me.dim(), f0.len())?;
    if t == 0.0 {
        return Ok(f0.to_vec());
    }
    if me.dim() <= DEFAULT_EXPM_MAX {
        let p = expm(&(me.to_dense() * t))?;
        return Ok(finish(&(p * DVector::from_column_slice(f0)).as_slice().to_vec(), me.mass(f0), me));
    }
    let steps = step_count(t, dt);
    let coarse = me.rk4(f0, t / steps as f64, steps);
    let fine = me.rk4(f0, t / (2 * steps) as f64, 2 * steps);
    let defect = l1_distance(&coarse, &fine, &me.nu_n);
    if defect > HALVING_TOL {
        return Err(Error::NonConvergence { defect, tol: HALVING_TOL });
    }
    Ok(finish(&fine, me.mass(f0), me))
}

fn finish(w: &[f64], m0: f64, me: &MasterEquation) -> Vec<f64> {
    let mut w: Vec<f64> = w.iter().map(|v| v.max(0.0)).collect();
    let m = me.mass(&w);
    if m > 0.0 {
        w.iter_mut().for_each(|v| *v *= m0 / m);
    }
    w
}

/// Advances master-equation densities over a uniform grid.
#[derive(Debug, Clone)]
pub struct MasterPropagator {
    step: Propagation,
}

#[derive(Debug, Clone)]
enum Propagation {
    Dense(DMatrix<f64>),
    Stepping { h: f64, substeps: usize },
}

impl MasterPropagator {
    /// One grid step of length `dt`; stepping uses substeps of at most `inner_dt`.
    pub fn new(me: &MasterEquation, dt: f64, inner_dt: f64) -> Result<Self> {
        let step = if me.dim() <= DEFAULT_EXPM_MAX {
            Propagation::Dense(expm(&(me.to_dense() * dt))?)
        } else {
            let substeps = step_count(dt, inner_dt).max(1);
            Propagation::Stepping { h: dt / substeps as f64, substeps }
        };
        Ok(Self { step })
    }

    /// Densities at 0, dt, …, steps·dt.
    pub fn run(&self, me: &MasterEquation, f0: &[f64], steps: usize) -> Result<Vec<Vec<f64>>> {
        check_dim(me.dim(), f0.len())?;
        let m0 = me.mass(f0);
        let mut out = Vec::with_capacity(steps + 1);
        out.push(f0.to_vec());
        for _ in 0..steps {
            let cur = out.last().expect("nonempty");
            let next = match &self.step {
                Propagation::Dense(p) => (p * DVector::from_column_slice(cur)).as_slice().to_vec(),
                Propagation::Stepping { h, substeps } => me.rk4(cur, *h, *substeps),
            };
            out.push(finish(&next, m0, me));
        }
        Ok(out)
    }
}
