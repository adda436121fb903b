//! Markov jump kernels, adjoints with respect to ν, generators and rate matrices.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::par::rng_for;
use crate::space::{l1_nu, log_oscillation, Density, FiniteSpace};

/// A zero-diagonal nonnegative kernel, `lam[(x, y)] = Λ(x, {y})`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpKernel {
    space: FiniteSpace,
    lam: DMatrix<f64>,
}

/// JSON form `{"lam": [[..], ..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpKernelSpec {
    pub lam: Vec<Vec<f64>>,
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], d: usize) -> Result<DMatrix<f64>> {
    check_dim(d, rows.len())?;
    for r in rows {
        check_dim(d, r.len())?;
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl JumpKernel {
    /// Builds a kernel; diagonal entries are set to zero.
    pub fn new(space: &FiniteSpace, mut lam: DMatrix<f64>) -> Result<Self> {
        let d = space.d();
        if lam.nrows() != d || lam.ncols() != d {
            return Err(Error::Dimension { expected: d, got: lam.nrows() });
        }
        for x in 0..d {
            lam[(x, x)] = 0.0;
        }
        if let Some(v) = lam.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Invalid(format!("kernel entry {v} is negative or not finite")));
        }
        Ok(Self { space: space.clone(), lam })
    }

    pub fn from_rows(space: &FiniteSpace, rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(space, matrix_from_rows(rows, space.d())?)
    }

    pub fn from_spec(space: &FiniteSpace, spec: &JumpKernelSpec) -> Result<Self> {
        Self::from_rows(space, &spec.lam)
    }

    pub fn to_spec(&self) -> JumpKernelSpec {
        JumpKernelSpec { lam: matrix_to_rows(&self.lam) }
    }

    pub fn zero(space: &FiniteSpace) -> Self {
        let d = space.d();
        Self { space: space.clone(), lam: DMatrix::zeros(d, d) }
    }

    pub fn space(&self) -> &FiniteSpace {
        &self.space
    }

    pub fn lam(&self) -> &DMatrix<f64> {
        &self.lam
    }

    pub fn d(&self) -> usize {
        self.space.d()
    }

    /// Λ(x, Π).
    pub fn intensity(&self, x: usize) -> f64 {
        self.lam.row(x).sum()
    }

    /// ‖Λ‖_𝒥 = max_x Λ(x, Π).
    pub fn j_norm(&self) -> f64 {
        (0..self.d()).map(|x| self.intensity(x)).fold(0.0, f64::max)
    }

    /// Λ*(y, {x}) = Λ(x, {y}) ν[x] / ν[y].
    pub fn adjoint(&self) -> JumpKernel {
        let nu = self.space.nu();
        let lam = DMatrix::from_fn(self.d(), self.d(), |y, x| self.lam[(x, y)] * nu[x] / nu[y]);
        JumpKernel { space: self.space.clone(), lam }
    }

    /// ‖Λ*‖_𝒥 without forming the adjoint.
    pub fn adjoint_j_norm(&self) -> f64 {
        let nu = self.space.nu();
        (0..self.d())
            .map(|y| (0..self.d()).map(|x| self.lam[(x, y)] * nu[x]).sum::<f64>() / nu[y])
            .fold(0.0, f64::max)
    }

    /// (Λρ)[x] = Σ_y Λ(x,{y}) ρ[y]; for an adjoint kernel this is Λ*ρ.
    pub fn apply(&self, rho: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.d(), rho.len())?;
        Ok((0..self.d()).map(|x| (0..self.d()).map(|y| self.lam[(x, y)] * rho[y]).sum()).collect())
    }

    /// (𝒜φ)[x] = Σ_y Λ(x,{y})(φ[y] − φ[x]).
    pub fn jump_gen_apply(&self, phi: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.d(), phi.len())?;
        Ok((0..self.d())
            .map(|x| (0..self.d()).map(|y| self.lam[(x, y)] * (phi[y] - phi[x])).sum())
            .collect())
    }

    /// Matrix of 𝒜* acting on densities: Λ* off the diagonal, −Λ(x,Π) on it.
    pub fn adjoint_generator_matrix(&self) -> DMatrix<f64> {
        let mut a = self.adjoint().lam;
        for x in 0..self.d() {
            a[(x, x)] = -self.intensity(x);
        }
        a
    }

    /// 𝒜*ρ using the adjoint kernel of `self`.
    pub fn adjoint_gen_apply(&self, rho: &[f64]) -> Result<Vec<f64>> {
        adjoint_gen_apply(self, &self.adjoint(), rho)
    }
}

/// (𝒜*ρ)[x] = Σ_y Λ*(x,{y}) ρ[y] − Λ(x,Π) ρ[x].
pub fn adjoint_gen_apply(k: &JumpKernel, kadj: &JumpKernel, rho: &[f64]) -> Result<Vec<f64>> {
    check_dim(k.d(), kadj.d())?;
    let mut out = kadj.apply(rho)?;
    for (x, o) in out.iter_mut().enumerate() {
        *o -= k.intensity(x) * rho[x];
    }
    Ok(out)
}

/// ‖a − b‖_𝒥.
pub fn kernel_distance(a: &JumpKernel, b: &JumpKernel) -> Result<f64> {
    check_dim(a.d(), b.d())?;
    let d = a.d();
    Ok((0..d)
        .map(|x| (0..d).map(|y| (a.lam[(x, y)] - b.lam[(x, y)]).abs()).sum::<f64>())
        .fold(0.0, f64::max))
}

/// Both sides of the adjoint-generator perturbation bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdjointOpBound {
    /// ‖𝒜*_a ρ − 𝒜*_b ρ‖_{L¹(ν)}.
    pub lhs: f64,
    /// 2 ∫ ‖a(x,·) − b(x,·)‖_TV |ρ(x)| dν(x).
    pub middle: f64,
    /// 2 ‖a − b‖_𝒥 ‖ρ‖_{L¹(ν)}.
    pub rhs: f64,
}

impl AdjointOpBound {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.middle + tol && self.middle <= self.rhs + tol
    }
}

pub fn adjoint_op_bound_check(a: &JumpKernel, b: &JumpKernel, rho: &[f64]) -> Result<AdjointOpBound> {
    check_dim(a.d(), b.d())?;
    let nu = a.space.nu();
    let ra = a.adjoint_gen_apply(rho)?;
    let rb = b.adjoint_gen_apply(rho)?;
    let diff: Vec<f64> = ra.iter().zip(&rb).map(|(u, v)| u - v).collect();
    let d = a.d();
    let middle = 2.0
        * (0..d)
            .map(|x| {
                let tv: f64 = (0..d).map(|y| (a.lam[(x, y)] - b.lam[(x, y)]).abs()).sum();
                tv * rho[x].abs() * nu[x]
            })
            .sum::<f64>();
    Ok(AdjointOpBound {
        lhs: l1_nu(&diff, nu),
        middle,
        rhs: 2.0 * kernel_distance(a, b)? * l1_nu(rho, nu),
    })
}

/// ‖A‖_{L¹(ν)→L¹(ν)} = max_j Σ_i |A_ij| ν_i / ν_j.
pub fn l1_op_norm(a: &DMatrix<f64>, nu: &[f64]) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].abs() * nu[i]).sum::<f64>() / nu[j])
        .fold(0.0, f64::max)
}

/// ‖A‖_{L^∞→L^∞} = max_i Σ_j |A_ij|.
pub fn linf_op_norm(a: &DMatrix<f64>) -> f64 {
    a.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Forward rate matrix `q` and the derived adjoint `kstar = diag(1/ν) qᵀ diag(ν)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateGenerator {
    space: FiniteSpace,
    q: DMatrix<f64>,
    kstar: DMatrix<f64>,
}

/// JSON form `{"q": [[..], ..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateGeneratorSpec {
    pub q: Vec<Vec<f64>>,
}

impl RateGenerator {
    /// Off-diagonal rates must be nonnegative; the diagonal is recomputed from them.
    pub fn new(space: &FiniteSpace, mut q: DMatrix<f64>) -> Result<Self> {
        let d = space.d();
        if q.nrows() != d || q.ncols() != d {
            return Err(Error::Dimension { expected: d, got: q.nrows() });
        }
        for x in 0..d {
            q[(x, x)] = 0.0;
            let mut s = 0.0;
            for y in 0..d {
                let v = q[(x, y)];
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::Invalid(format!("rate q[{x}][{y}] = {v} is negative")));
                }
                s += v;
            }
            q[(x, x)] = -s;
        }
        let nu = space.nu();
        let kstar = DMatrix::from_fn(d, d, |y, x| q[(x, y)] * nu[x] / nu[y]);
        Ok(Self { space: space.clone(), q, kstar })
    }

    pub fn from_rows(space: &FiniteSpace, rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(space, matrix_from_rows(rows, space.d())?)
    }

    pub fn from_spec(space: &FiniteSpace, spec: &RateGeneratorSpec) -> Result<Self> {
        Self::from_rows(space, &spec.q)
    }

    pub fn to_spec(&self) -> RateGeneratorSpec {
        RateGeneratorSpec { q: matrix_to_rows(&self.q) }
    }

    pub fn zero(space: &FiniteSpace) -> Self {
        let d = space.d();
        Self { space: space.clone(), q: DMatrix::zeros(d, d), kstar: DMatrix::zeros(d, d) }
    }

    pub fn space(&self) -> &FiniteSpace {
        &self.space
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn kstar(&self) -> &DMatrix<f64> {
        &self.kstar
    }

    pub fn apply_kstar(&self, rho: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.space.d(), rho.len())?;
        Ok((&self.kstar * DVector::from_column_slice(rho)).as_slice().to_vec())
    }

    /// M_K = ‖𝒦*1‖_∞.
    pub fn m_k(&self) -> f64 {
        self.kstar.row_iter().map(|r| r.sum().abs()).fold(0.0, f64::max)
    }

    /// max_x |q[x][x]|, the largest exit rate.
    pub fn max_exit_rate(&self) -> f64 {
        (0..self.space.d()).map(|x| -self.q[(x, x)]).fold(0.0, f64::max)
    }
}

/// I_λρ = λ(λI − 𝒦*)^{-1}ρ.
pub fn resolvent_smooth(g: &RateGenerator, rho: &Density, lambda: f64) -> Result<Density> {
    let d = g.space.d();
    check_dim(d, rho.w().len())?;
    if !(lambda > 0.0) {
        return Err(Error::Invalid("resolvent needs lambda > 0".into()));
    }
    let m = DMatrix::identity(d, d) * lambda - &g.kstar;
    let rhs = DVector::from_column_slice(rho.w()) * lambda;
    let sol = m.lu().solve(&rhs).ok_or(Error::Singular)?;
    let w: Vec<f64> = sol.iter().map(|v| if *v < 0.0 && *v > -1e-14 { 0.0 } else { *v }).collect();
    Density::new(&g.space, w)
}

/// Whether the resolvent log-oscillation bound Δ(log I_λρ) ≤ Δ(log ρ) + log 3 holds.
pub fn resolvent_log_bound(g: &RateGenerator, rho: &Density, lambda: f64) -> Result<(f64, f64)> {
    let out = resolvent_smooth(g, rho, lambda)?;
    Ok((log_oscillation(out.w()), rho.log_oscillation() + 3f64.ln()))
}

/// A violated condition found by [`validate_adjoint_markov`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovViolation {
    pub condition: &'static str,
    pub input: Vec<f64>,
    pub value: f64,
}

/// Checks mass conservation on a basis and the positive maximum principle on
/// indicator-supported and random signed densities.
pub fn validate_adjoint_markov(space: &FiniteSpace, a: &DMatrix<f64>, seed: u64) -> Vec<MarkovViolation> {
    let d = space.d();
    let nu = space.nu();
    let mut out = Vec::new();
    if a.nrows() != d || a.ncols() != d {
        out.push(MarkovViolation { condition: "shape", input: vec![], value: a.nrows() as f64 });
        return out;
    }
    let scale = 1.0 + a.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let tol = 1e-12 * scale;
    for x in 0..d {
        let mass: f64 = (0..d).map(|y| a[(y, x)] * nu[y]).sum::<f64>() / nu[x];
        if mass.abs() > tol {
            let mut e = vec![0.0; d];
            e[x] = 1.0;
            out.push(MarkovViolation { condition: "mass conservation", input: e, value: mass });
        }
    }
    let pmp = |rho: &[f64]| -> f64 {
        let v = a * DVector::from_column_slice(rho);
        (0..d).filter(|&x| rho[x] > 0.0).map(|x| v[x] * nu[x]).sum()
    };
    let mut inputs: Vec<Vec<f64>> = Vec::new();
    for mask in 1u64..(1u64 << d.min(12)) {
        inputs.push((0..d).map(|x| if x < 64 && mask >> x & 1 == 1 { 1.0 } else { 0.0 }).collect());
    }
    let mut rng = rng_for(seed, 0);
    for _ in 0..256 {
        inputs.push((0..d).map(|_| rng.gen_range(-1.0..1.0)).collect());
    }
    for rho in inputs {
        let v = pmp(&rho);
        if v > tol {
            out.push(MarkovViolation { condition: "positive maximum principle", input: rho, value: v });
        }
    }
    out
}

pub fn is_adjoint_markov(space: &FiniteSpace, a: &DMatrix<f64>) -> bool {
    validate_adjoint_markov(space, a, 0).is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expm::expm;
    use crate::space::pair_nu;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_space(rng: &mut ChaCha8Rng, d: usize) -> FiniteSpace {
        FiniteSpace::new((0..d).map(|_| rng.gen_range(0.2..3.0)).collect()).unwrap()
    }

    fn random_kernel(rng: &mut ChaCha8Rng, s: &FiniteSpace) -> JumpKernel {
        let d = s.d();
        JumpKernel::new(s, DMatrix::from_fn(d, d, |_, _| rng.gen_range(0.0..2.0))).unwrap()
    }

    fn random_vec(rng: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..d).map(|_| rng.gen_range(lo..hi)).collect()
    }

    fn left_pair(k: &JumpKernel, rho: &[f64], phi: &[f64]) -> f64 {
        // ⟨ρΛ, φ⟩ written out entry by entry
        let nu = k.space().nu();
        let mut s = 0.0;
        for x in 0..k.d() {
            for y in 0..k.d() {
                s += rho[x] * nu[x] * k.lam()[(x, y)] * phi[y];
            }
        }
        s
    }

    #[test]
    fn adjoint_examples() {
        let s = FiniteSpace::counting(3).unwrap();
        let k = JumpKernel::from_rows(&s, &[vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 0.5], vec![2.0, 0.5, 0.0]]).unwrap();
        assert_eq!(k.adjoint(), k);

        let s = FiniteSpace::new(vec![1.0, 2.0]).unwrap();
        let k = JumpKernel::from_rows(&s, &[vec![0.0, 2.0], vec![0.0, 0.0]]).unwrap();
        let a = k.adjoint();
        assert_eq!(a.lam()[(1, 0)], 1.0);
        assert_eq!(a.lam()[(0, 1)], 0.0);
    }

    #[test]
    fn diagonal_is_zeroed() {
        let s = FiniteSpace::counting(2).unwrap();
        let k = JumpKernel::from_rows(&s, &[vec![5.0, 1.0], vec![1.0, 5.0]]).unwrap();
        assert_eq!(k.lam()[(0, 0)], 0.0);
        assert!(JumpKernel::from_rows(&s, &[vec![0.0, -1.0], vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn duality_on_random_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = random_space(&mut rng, 4);
        let k = random_kernel(&mut rng, &s);
        let adj = k.adjoint();
        for _ in 0..100 {
            let rho = random_vec(&mut rng, 4, -1.0, 1.0);
            let phi = random_vec(&mut rng, 4, -1.0, 1.0);
            let rhs = pair_nu(&adj.apply(&rho).unwrap(), &phi, &s).unwrap();
            assert!((left_pair(&k, &rho, &phi) - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn jump_generator_examples() {
        let s = FiniteSpace::counting(2).unwrap();
        let k = JumpKernel::from_rows(&s, &[vec![0.0, 3.0], vec![1.5, 0.0]]).unwrap();
        assert_eq!(k.jump_gen_apply(&[2.0, 2.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(k.jump_gen_apply(&[0.0, 1.0]).unwrap(), vec![3.0, -1.5]);
        assert!(k.jump_gen_apply(&[0.0]).is_err());
    }

    #[test]
    fn adjoint_generator_kills_stationary_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_space(&mut rng, 4);
        let k = random_kernel(&mut rng, &s);
        let a = k.adjoint_generator_matrix();
        // null vector by brute force: replace one equation by the mass constraint
        let mut m = a.clone();
        for y in 0..4 {
            m[(3, y)] = s.nu()[y];
        }
        let mut rhs = DVector::zeros(4);
        rhs[3] = 1.0;
        let rho = m.lu().solve(&rhs).unwrap();
        let out = k.adjoint_gen_apply(rho.as_slice()).unwrap();
        assert!(out.iter().all(|v| v.abs() < 1e-12));
        assert!(rho.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn kernel_distance_examples() {
        let s = FiniteSpace::counting(2).unwrap();
        let a = JumpKernel::from_rows(&s, &[vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap();
        let b = JumpKernel::from_rows(&s, &[vec![0.0, 3.0], vec![2.0, 0.0]]).unwrap();
        assert_eq!(kernel_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(kernel_distance(&a, &b).unwrap(), 2.0);
        let a2 = JumpKernel::new(&s, a.lam() * 2.0).unwrap();
        assert_eq!(kernel_distance(&a, &a2).unwrap(), a.j_norm());
    }

    #[test]
    fn adjoint_op_bound_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_space(&mut rng, 3);
        let a = random_kernel(&mut rng, &s);
        let r = adjoint_op_bound_check(&a, &a, &[0.3, 0.2, 0.1]).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        let b = random_kernel(&mut rng, &s);
        let r = adjoint_op_bound_check(&a, &b, &[0.0; 3]).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        for _ in 0..200 {
            let d = rng.gen_range(1..=6);
            let s = random_space(&mut rng, d);
            let a = random_kernel(&mut rng, &s);
            let b = random_kernel(&mut rng, &s);
            let rho = random_vec(&mut rng, d, -1.0, 1.0);
            assert!(adjoint_op_bound_check(&a, &b, &rho).unwrap().holds(1e-12));
        }
    }

    #[test]
    fn rate_generator_basics() {
        let s = FiniteSpace::new(vec![1.0, 2.0, 0.5]).unwrap();
        let g = RateGenerator::from_rows(&s, &[vec![0.0, 1.0, 2.0], vec![0.5, 0.0, 0.0], vec![0.0, 3.0, 0.0]]).unwrap();
        assert_eq!(g.q()[(0, 0)], -3.0);
        let out = g.apply_kstar(&[0.3, 0.1, 0.7]).unwrap();
        assert!(pair_nu(&out, &[1.0; 3], &s).unwrap().abs() < 1e-14);
        assert!(is_adjoint_markov(&s, g.kstar()));
        assert!(!is_adjoint_markov(&s, &DMatrix::identity(3, 3)));
        let neg = -g.kstar().clone();
        let v = validate_adjoint_markov(&s, &neg, 1);
        assert!(v.iter().any(|m| m.condition == "positive maximum principle"));
        assert!(v.iter().all(|m| m.condition != "mass conservation"));
        // ν-uniform generator with symmetric rates has M_K = 0
        let s1 = FiniteSpace::counting(2).unwrap();
        let g1 = RateGenerator::from_rows(&s1, &[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(g1.m_k(), 0.0);
        assert!(g.m_k() > 0.0);
    }

    #[test]
    fn resolvent_examples() {
        let s = FiniteSpace::new(vec![1.0, 2.0]).unwrap();
        let rho = Density::probability(&s, vec![0.4, 0.3]).unwrap();
        let z = RateGenerator::zero(&s);
        let out = resolvent_smooth(&z, &rho, 3.0).unwrap();
        assert!(out.w().iter().zip(rho.w()).all(|(a, b)| (a - b).abs() < 1e-15));

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let d = rng.gen_range(2..=5);
            let s = random_space(&mut rng, d);
            let q = DMatrix::from_fn(d, d, |_, _| rng.gen_range(0.0..2.0));
            let g = RateGenerator::new(&s, q).unwrap();
            let w = random_vec(&mut rng, d, 0.1, 1.0);
            let m: f64 = pair_nu(&w, &vec![1.0; d], &s).unwrap();
            let rho = Density::probability(&s, w.iter().map(|v| v / m).collect()).unwrap();
            let lam = 2.0 * g.m_k().max(1e-3) * rng.gen_range(1.0..4.0);
            let out = resolvent_smooth(&g, &rho, lam).unwrap();
            assert!((out.mass() - 1.0).abs() < 1e-12);
            let (lhs, rhs) = resolvent_log_bound(&g, &rho, lam).unwrap();
            assert!(lhs <= rhs + 1e-12);
            // first-order expansion I + 𝒦*/λ
            let big = 1e6;
            let out = resolvent_smooth(&g, &rho, big).unwrap();
            let first: Vec<f64> = g.apply_kstar(rho.w()).unwrap().iter().zip(rho.w()).map(|(k, r)| r + k / big).collect();
            let err = crate::space::l1_distance(out.w(), &first, s.nu());
            let scale = g.kstar().norm() * g.kstar().norm();
            assert!(err <= 10.0 * scale / (big * big) + 1e-13);
        }
    }

    #[test]
    fn semigroup_is_positive_and_mass_conserving() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..40 {
            let d = rng.gen_range(2..=5);
            let s = random_space(&mut rng, d);
            let g = RateGenerator::new(&s, DMatrix::from_fn(d, d, |_, _| rng.gen_range(0.0..3.0))).unwrap();
            let t = rng.gen_range(0.0..2.0);
            let e = expm(&(g.kstar() * t)).unwrap();
            assert!(e.iter().all(|v| *v >= -1e-14));
            for x in 0..d {
                let mass: f64 = (0..d).map(|y| e[(y, x)] * s.nu()[y]).sum::<f64>() / s.nu()[x];
                assert!((mass - 1.0).abs() < 1e-12);
            }
            // ‖log(e^{t𝒦*}ρ)‖_∞ ≤ ‖log ρ‖_∞ + M_K t
            let rho = random_vec(&mut rng, d, 0.2, 3.0);
            let out = e * DVector::from_column_slice(&rho);
            let sup = |v: &[f64]| v.iter().map(|a| a.ln().abs()).fold(0.0, f64::max);
            assert!(sup(out.as_slice()) <= sup(&rho) + g.m_k() * t + 1e-10);
        }
    }

    proptest! {
        #[test]
        fn adjoint_is_involution(seed in any::<u64>(), d in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_space(&mut rng, d);
            let k = random_kernel(&mut rng, &s);
            let back = k.adjoint().adjoint();
            prop_assert!((back.lam() - k.lam()).abs().max() < 1e-12);
            prop_assert!((k.adjoint().j_norm() - k.adjoint_j_norm()).abs() < 1e-12);
        }

        #[test]
        fn generator_operator_bounds(seed in any::<u64>(), d in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_space(&mut rng, d);
            let k = random_kernel(&mut rng, &s);
            let a = k.adjoint_generator_matrix();
            prop_assert!(l1_op_norm(&a, s.nu()) <= 2.0 * k.j_norm() + 1e-12);
            prop_assert!(linf_op_norm(&a) <= k.j_norm() + k.adjoint_j_norm() + 1e-12);
            for _ in 0..50 {
                let rho = random_vec(&mut rng, d, -1.0, 1.0);
                let out = k.adjoint_gen_apply(&rho).unwrap();
                prop_assert!(pair_nu(&out, &vec![1.0; d], &s).unwrap().abs() < 1e-12);
                prop_assert!(l1_nu(&out, s.nu()) <= 2.0 * k.j_norm() * l1_nu(&rho, s.nu()) + 1e-12);
                let sup = rho.iter().map(|v| v.abs()).fold(0.0, f64::max);
                let osup = out.iter().map(|v| v.abs()).fold(0.0, f64::max);
                prop_assert!(osup <= (k.j_norm() + k.adjoint_j_norm()) * sup + 1e-12);
                let phi = random_vec(&mut rng, d, -1.0, 1.0);
                let lhs = pair_nu(&rho, &k.jump_gen_apply(&phi).unwrap(), &s).unwrap();
                let rhs = pair_nu(&out, &phi, &s).unwrap();
                prop_assert!((lhs - rhs).abs() < 1e-12);
            }
        }

        #[test]
        fn jump_generator_perturbation_bound(seed in any::<u64>(), d in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_space(&mut rng, d);
            let a = random_kernel(&mut rng, &s);
            let b = random_kernel(&mut rng, &s);
            let dist = kernel_distance(&a, &b).unwrap();
            for _ in 0..20 {
                let phi = random_vec(&mut rng, d, -1.0, 1.0);
                let pa = a.jump_gen_apply(&phi).unwrap();
                let pb = b.jump_gen_apply(&phi).unwrap();
                let lhs = pa.iter().zip(&pb).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
                let sup = phi.iter().map(|v| v.abs()).fold(0.0, f64::max);
                prop_assert!(lhs <= 2.0 * dist * sup + 1e-12);
                let single = pa.iter().map(|v| v.abs()).fold(0.0, f64::max);
                prop_assert!(single <= 2.0 * a.j_norm() * sup + 1e-12);
            }
        }
    }
}
