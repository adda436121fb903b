use serde::{Deserialize, Serialize};

use super::{check_probability, DeclaredConstants, MeanFieldKernel};
use crate::error::{check_dim, Error, Result};
use crate::kernel::JumpKernel;
use crate::space::{EmpiricalMeasure, FiniteSpace};
use nalgebra::DMatrix;

/// JSON form: `gamma1[x][z][y]`, optional `gamma2[x][z][z'][y]`, optional `c1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoThreeBodySpec {
    pub gamma1: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma2: Option<Vec<Vec<Vec<Vec<f64>>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
}

/// Λ_N(x,{y};μ) = (1/n) Σ_k Γ1(x,z_k,y) + (1/(n(n−1))) Σ_{k≠ℓ} Γ2(x,z_k,z_ℓ,y), n = N − 1.
#[derive(Debug, Clone)]
pub struct TwoThreeBodyKernel {
    space: FiniteSpace,
    gamma1: Vec<f64>,
    gamma2: Vec<f64>,
    has_three_body: bool,
    c1: f64,
}

impl TwoThreeBodyKernel {
    /// `gamma1` has length d³ indexed `[x][z][y]`, `gamma2` length d⁴ indexed `[x][z][z'][y]`.
    /// Entries with x = y are zeroed. `c1` defaults to the smallest admissible value.
    pub fn new(space: &FiniteSpace, mut gamma1: Vec<f64>, gamma2: Option<Vec<f64>>, c1: Option<f64>) -> Result<Self> {
        let d = space.d();
        check_dim(d * d * d, gamma1.len())?;
        let mut gamma2 = gamma2.unwrap_or_else(|| vec![0.0; d * d * d * d]);
        check_dim(d * d * d * d, gamma2.len())?;
        if gamma1.iter().chain(&gamma2).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Invalid("interaction tensors must be nonnegative".into()));
        }
        for x in 0..d {
            for z in 0..d {
                gamma1[(x * d + z) * d + x] = 0.0;
                for z2 in 0..d {
                    gamma2[((x * d + z) * d + z2) * d + x] = 0.0;
                }
            }
        }
        let has_three_body = gamma2.iter().any(|v| *v > 0.0);
        let mut k = Self { space: space.clone(), gamma1, gamma2, has_three_body, c1: 0.0 };
        let need = k.min_c1();
        k.c1 = match c1 {
            Some(c) if c + 1e-12 * (1.0 + need) < need => {
                return Err(Error::Invalid(format!("declared c1 = {c} is below the tensor bound {need}")))
            }
            Some(c) => c,
            None => need,
        };
        Ok(k)
    }

    pub fn from_spec(space: &FiniteSpace, spec: &TwoThreeBodySpec) -> Result<Self> {
        let d = space.d();
        let flat3 = |t: &Vec<Vec<Vec<f64>>>| -> Result<Vec<f64>> {
            check_dim(d, t.len())?;
            let mut out = Vec::with_capacity(d * d * d);
            for a in t {
                check_dim(d, a.len())?;
                for b in a {
                    check_dim(d, b.len())?;
                    out.extend_from_slice(b);
                }
            }
            Ok(out)
        };
        let g1 = flat3(&spec.gamma1)?;
        let g2 = match &spec.gamma2 {
            Some(t) => {
                check_dim(d, t.len())?;
                let mut out = Vec::new();
                for a in t {
                    out.extend(flat3(a)?);
                }
                Some(out)
            }
            None => None,
        };
        Self::new(space, g1, g2, spec.c1)
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    fn g1(&self, x: usize, z: usize, y: usize) -> f64 {
        let d = self.space.d();
        self.gamma1[(x * d + z) * d + y]
    }

    fn g2(&self, x: usize, z: usize, z2: usize, y: usize) -> f64 {
        let d = self.space.d();
        self.gamma2[((x * d + z) * d + z2) * d + y]
    }

    /// Max of Γ(x,z,Π), Γ*(x,z,Π) and their three-body analogues.
    fn min_c1(&self) -> f64 {
        let d = self.space.d();
        let nu = self.space.nu();
        let mut m: f64 = 0.0;
        for x in 0..d {
            for z in 0..d {
                let fwd: f64 = (0..d).map(|y| self.g1(x, z, y)).sum();
                let adj: f64 = (0..d).map(|y| self.g1(y, z, x) * nu[y] / nu[x]).sum();
                m = m.max(fwd).max(adj);
                for z2 in 0..d {
                    let fwd: f64 = (0..d).map(|y| self.g2(x, z, z2, y)).sum();
                    let adj: f64 = (0..d).map(|y| self.g2(y, z, z2, x) * nu[y] / nu[x]).sum();
                    m = m.max(fwd).max(adj);
                }
            }
        }
        m
    }

    /// ∫Γ1 dp + ∫∫Γ2 dp dp.
    fn closed_form(&self, p: &[f64]) -> JumpKernel {
        let d = self.space.d();
        let lam = DMatrix::from_fn(d, d, |x, y| {
            let mut s = 0.0;
            for z in 0..d {
                s += self.g1(x, z, y) * p[z];
                if self.has_three_body {
                    for z2 in 0..d {
                        s += self.g2(x, z, z2, y) * p[z] * p[z2];
                    }
                }
            }
            s
        });
        JumpKernel::new(&self.space, lam).expect("nonnegative by construction")
    }
}

impl MeanFieldKernel for TwoThreeBodyKernel {
    fn space(&self) -> &FiniteSpace {
        &self.space
    }

    /// The N-free mean-field limit ∫Γ1 dμ + ∫∫Γ2 dμ dμ.
    fn eval(&self, mu: &[f64]) -> Result<JumpKernel> {
        check_probability(mu, self.space.d())?;
        Ok(self.closed_form(mu))
    }

    fn eval_empirical(&self, mu: &EmpiricalMeasure) -> Result<JumpKernel> {
        let d = self.space.d();
        check_dim(d, mu.d())?;
        let n = mu.n() as f64;
        if self.has_three_body && mu.n() < 2 {
            return Err(Error::Invalid("three-body term needs at least two other particles".into()));
        }
        let c: Vec<f64> = mu.counts().iter().map(|&v| v as f64).collect();
        let lam = DMatrix::from_fn(d, d, |x, y| {
            let mut two = 0.0;
            let mut three = 0.0;
            for z in 0..d {
                if c[z] == 0.0 {
                    continue;
                }
                two += c[z] * self.g1(x, z, y);
                if self.has_three_body {
                    for z2 in 0..d {
                        let pairs = c[z] * (c[z2] - if z == z2 { 1.0 } else { 0.0 });
                        three += pairs * self.g2(x, z, z2, y);
                    }
                }
            }
            let mut v = two / n;
            if self.has_three_body {
                v += three / (n * (n - 1.0));
            }
            v
        });
        JumpKernel::new(&self.space, lam)
    }

    fn constants(&self) -> DeclaredConstants {
        let c = self.c1;
        DeclaredConstants {
            m_lambda: Some(3.0 * c),
            m_lambda_star: Some(3.0 * c),
            theta: Some(6.0 * c),
            lipschitz_l1: Some(3.0 * c),
        }
    }

    fn averaged_closed_form(&self, rho_masses: &[f64]) -> Option<JumpKernel> {
        Some(self.closed_form(rho_masses))
    }

    fn is_constant(&self) -> bool {
        let d = self.space.d();
        !self.has_three_body
            && (0..d).all(|x| (0..d).all(|y| (1..d).all(|z| self.g1(x, z, y) == self.g1(x, 0, y))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::empirical_of;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_kernel(rng: &mut ChaCha8Rng, space: &FiniteSpace, three: bool) -> TwoThreeBodyKernel {
        let d = space.d();
        let g1 = (0..d * d * d).map(|_| rng.gen_range(0.0..1.0)).collect();
        let g2 = three.then(|| (0..d * d * d * d).map(|_| rng.gen_range(0.0..1.0)).collect());
        TwoThreeBodyKernel::new(space, g1, g2, None).unwrap()
    }

    /// Direct index sum over an expanded particle list.
    fn brute(k: &TwoThreeBodyKernel, particles: &[usize]) -> DMatrix<f64> {
        let d = k.space.d();
        let n = particles.len() as f64;
        DMatrix::from_fn(d, d, |x, y| {
            if x == y {
                return 0.0;
            }
            let mut two = 0.0;
            let mut three = 0.0;
            for (i, &zi) in particles.iter().enumerate() {
                two += k.g1(x, zi, y);
                for (j, &zj) in particles.iter().enumerate() {
                    if i != j {
                        three += k.g2(x, zi, zj, y);
                    }
                }
            }
            two / n + three / (n * (n - 1.0))
        })
    }

    #[test]
    fn single_interaction_collapse() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = FiniteSpace::counting(3).unwrap();
        let k = random_kernel(&mut rng, &s, false);
        let mu = EmpiricalMeasure::from_counts(vec![0, 4, 0]).unwrap();
        let lam = k.eval_empirical(&mu).unwrap();
        for x in 0..3 {
            for y in 0..3 {
                let want = if x == y { 0.0 } else { k.g1(x, 1, y) };
                assert!((lam.lam()[(x, y)] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn all_at_one_atom_gives_diagonal_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = FiniteSpace::counting(3).unwrap();
        let mut k = random_kernel(&mut rng, &s, true);
        k.gamma1.iter_mut().for_each(|v| *v = 0.0);
        let particles = [2usize, 2, 2, 2];
        let lam = k.eval_empirical(&empirical_of(&particles, 3).unwrap()).unwrap();
        assert!((lam.lam() - brute(&k, &particles)).abs().max() < 1e-14);
        for x in 0..3 {
            for y in 0..3 {
                let want = if x == y { 0.0 } else { k.g2(x, 2, 2, y) };
                assert!((lam.lam()[(x, y)] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn counts_match_expanded_index_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = FiniteSpace::new(vec![1.0, 0.5, 2.0]).unwrap();
        let k = random_kernel(&mut rng, &s, true);
        for _ in 0..100 {
            let n = rng.gen_range(2..7);
            let particles: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let lam = k.eval_empirical(&empirical_of(&particles, 3).unwrap()).unwrap();
            assert!((lam.lam() - brute(&k, &particles)).abs().max() < 1e-13);
        }
    }

    #[test]
    fn intensity_bounded_by_three_c1() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let d = rng.gen_range(2..5);
            let s = FiniteSpace::new((0..d).map(|_| rng.gen_range(0.5..2.0)).collect()).unwrap();
            let k = random_kernel(&mut rng, &s, true);
            let n = rng.gen_range(2..9);
            let particles: Vec<usize> = (0..n).map(|_| rng.gen_range(0..d)).collect();
            let lam = k.eval_empirical(&empirical_of(&particles, d).unwrap()).unwrap();
            assert!(lam.j_norm() <= 3.0 * k.c1() + 1e-12);
            assert!(lam.adjoint_j_norm() <= 3.0 * k.c1() + 1e-12);
        }
    }

    #[test]
    fn three_body_needs_two_particles() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = FiniteSpace::counting(2).unwrap();
        let k = random_kernel(&mut rng, &s, true);
        assert!(k.eval_empirical(&EmpiricalMeasure::from_counts(vec![1, 0]).unwrap()).is_err());
        let k2 = random_kernel(&mut rng, &s, false);
        assert!(k2.eval_empirical(&EmpiricalMeasure::from_counts(vec![1, 0]).unwrap()).is_ok());
    }

    #[test]
    fn declared_c1_below_bound_rejected() {
        let s = FiniteSpace::counting(2).unwrap();
        let g1 = vec![0.0, 2.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0];
        assert!(TwoThreeBodyKernel::new(&s, g1.clone(), None, Some(1.0)).is_err());
        assert_eq!(TwoThreeBodyKernel::new(&s, g1, None, None).unwrap().c1(), 2.0);
    }
}
