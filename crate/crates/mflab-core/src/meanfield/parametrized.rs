use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{check_probability, DeclaredConstants, MeanFieldKernel};
use crate::error::{check_dim, Error, Result};
use crate::kernel::{matrix_from_rows, JumpKernel};
use crate::space::FiniteSpace;

/// Intensity λ(θ) as a function of s = a + b·θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RateFunction {
    /// clamp(a + b·θ, lo, hi) with 0 ≤ lo ≤ hi.
    AffineClamped { a: f64, b: Vec<f64>, lo: f64, hi: f64 },
    /// scale / (1 + e^{−(a + b·θ)}).
    Logistic { scale: f64, a: f64, b: Vec<f64> },
    /// scale · e^{−|a + b·θ|}.
    ExpNeg { scale: f64, a: f64, b: Vec<f64> },
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl RateFunction {
    pub fn dim(&self) -> usize {
        self.coeffs().len()
    }

    fn coeffs(&self) -> &[f64] {
        match self {
            RateFunction::AffineClamped { b, .. } | RateFunction::Logistic { b, .. } | RateFunction::ExpNeg { b, .. } => b,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            RateFunction::AffineClamped { lo, hi, .. } => *lo >= 0.0 && lo <= hi,
            RateFunction::Logistic { scale, .. } | RateFunction::ExpNeg { scale, .. } => *scale >= 0.0,
        };
        if !ok || self.coeffs().is_empty() {
            return Err(Error::Invalid(format!("invalid rate function {self:?}")));
        }
        Ok(())
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let lin = |a: f64, b: &[f64]| a + b.iter().zip(theta).map(|(u, v)| u * v).sum::<f64>();
        match self {
            RateFunction::AffineClamped { a, b, lo, hi } => lin(*a, b).clamp(*lo, *hi),
            RateFunction::Logistic { scale, a, b } => scale / (1.0 + (-lin(*a, b)).exp()),
            RateFunction::ExpNeg { scale, a, b } => scale * (-lin(*a, b).abs()).exp(),
        }
    }

    /// sup λ.
    pub fn sup(&self) -> f64 {
        match self {
            RateFunction::AffineClamped { hi, .. } => *hi,
            RateFunction::Logistic { scale, .. } | RateFunction::ExpNeg { scale, .. } => *scale,
        }
    }

    /// Lipschitz constant of θ ↦ λ(θ) for the Euclidean norm.
    pub fn lipschitz(&self) -> f64 {
        let b = norm2(self.coeffs());
        match self {
            RateFunction::AffineClamped { .. } => b,
            RateFunction::Logistic { scale, .. } => scale * b / 4.0,
            RateFunction::ExpNeg { scale, .. } => scale * b,
        }
    }

    /// sup |λ''| along lines, when finite.
    pub fn curvature(&self) -> Option<f64> {
        let b = norm2(self.coeffs());
        match self {
            RateFunction::Logistic { scale, .. } => Some(scale * b * b / (6.0 * 3f64.sqrt())),
            _ if b == 0.0 => Some(0.0),
            _ => None,
        }
    }
}

/// JSON form: `kappa[x][y]` is a k-vector, `p[x][y]` the jump profile, `rate` the intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametrizedSpec {
    pub kappa: Vec<Vec<Vec<f64>>>,
    pub p: Vec<Vec<f64>>,
    pub rate: RateFunction,
}

/// Λ(x,{y};μ) = λ(θ(x)) P(x,y) ν[y] with θ(x) = Σ_y κ(x,y) μ({y}).
#[derive(Debug, Clone)]
pub struct ParametrizedKernel {
    space: FiniteSpace,
    k: usize,
    kappa: Vec<f64>,
    p: DMatrix<f64>,
    rate: RateFunction,
}

impl ParametrizedKernel {
    /// `kappa` has length d·d·k indexed `[x][y][i]`.
    pub fn new(space: &FiniteSpace, kappa: Vec<f64>, mut p: DMatrix<f64>, rate: RateFunction) -> Result<Self> {
        let d = space.d();
        rate.validate()?;
        let k = rate.dim();
        check_dim(d * d * k, kappa.len())?;
        if p.nrows() != d || p.ncols() != d || p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Invalid("jump profile must be a nonnegative d x d matrix".into()));
        }
        for x in 0..d {
            p[(x, x)] = 0.0;
        }
        Ok(Self { space: space.clone(), k, kappa, p, rate })
    }

    pub fn from_spec(space: &FiniteSpace, spec: &ParametrizedSpec) -> Result<Self> {
        let d = space.d();
        let k = spec.rate.dim();
        check_dim(d, spec.kappa.len())?;
        let mut kappa = Vec::with_capacity(d * d * k);
        for row in &spec.kappa {
            check_dim(d, row.len())?;
            for v in row {
                check_dim(k, v.len())?;
                kappa.extend_from_slice(v);
            }
        }
        Self::new(space, kappa, matrix_from_rows(&spec.p, d)?, spec.rate.clone())
    }

    /// θ(x) = (κ*μ)(x).
    pub fn theta(&self, x: usize, mu: &[f64]) -> Vec<f64> {
        let d = self.space.d();
        let mut th = vec![0.0; self.k];
        for (y, &m) in mu.iter().enumerate() {
            let base = (x * d + y) * self.k;
            for (i, t) in th.iter_mut().enumerate() {
                *t += self.kappa[base + i] * m;
            }
        }
        th
    }

    /// M1 of the uniform bound on κ and Γ.
    pub fn m1(&self) -> f64 {
        let kmax = self.kappa.chunks(self.k).map(norm2).fold(0.0, f64::max);
        kmax.max(self.rate.sup() * self.p.max())
    }

    /// M2, Lipschitz constant of θ ↦ Γ(x,θ,y).
    pub fn m2(&self) -> f64 {
        self.rate.lipschitz() * self.p.max()
    }

    /// M3, second-order displacement constant, when finite.
    pub fn m3(&self) -> Option<f64> {
        self.rate.curvature().map(|c| c * self.p.max())
    }
}

impl MeanFieldKernel for ParametrizedKernel {
    fn space(&self) -> &FiniteSpace {
        &self.space
    }

    fn eval(&self, mu: &[f64]) -> Result<JumpKernel> {
        let d = self.space.d();
        check_probability(mu, d)?;
        let nu = self.space.nu();
        let rates: Vec<f64> = (0..d).map(|x| self.rate.value(&self.theta(x, mu))).collect();
        let lam = DMatrix::from_fn(d, d, |x, y| rates[x] * self.p[(x, y)] * nu[y]);
        JumpKernel::new(&self.space, lam)
    }

    fn constants(&self) -> DeclaredConstants {
        let total = self.space.total_mass();
        let m1 = self.m1();
        let lip = m1 * self.m2() * total;
        let theta = self.m3().map(|m3| (2.0 * lip).max(8.0 * m1 * m1 * m3 * total));
        DeclaredConstants {
            m_lambda: Some(m1 * total),
            m_lambda_star: Some(m1 * total),
            theta,
            lipschitz_l1: Some(lip),
        }
    }

    /// Ξ(x,μ,ρ) = ν(Π) M2 |κ*μ(x) − κ*ρ(x)|.
    fn xi(&self, x: usize, mu: &[f64], rho: &[f64]) -> Result<f64> {
        let d = self.space.d();
        check_dim(d, mu.len())?;
        check_dim(d, rho.len())?;
        let a = self.theta(x, mu);
        let b = self.theta(x, rho);
        let diff: Vec<f64> = a.iter().zip(&b).map(|(u, v)| u - v).collect();
        Ok(self.space.total_mass() * self.m2() * norm2(&diff))
    }

    fn is_constant(&self) -> bool {
        self.kappa.iter().all(|v| *v == 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_measure(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        let w: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
        let s: f64 = w.iter().sum();
        w.iter().map(|v| v / s).collect()
    }

    fn random_kernel(rng: &mut ChaCha8Rng, d: usize, k: usize) -> ParametrizedKernel {
        let space = FiniteSpace::new((0..d).map(|_| rng.gen_range(0.5..1.5)).collect()).unwrap();
        let kappa = (0..d * d * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let p = DMatrix::from_fn(d, d, |_, _| rng.gen_range(0.0..1.0));
        let b = (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let rate = match rng.gen_range(0..3) {
            0 => RateFunction::AffineClamped { a: 0.5, b, lo: 0.1, hi: 2.0 },
            1 => RateFunction::Logistic { scale: 2.0, a: 0.3, b },
            _ => RateFunction::ExpNeg { scale: 1.5, a: -0.2, b },
        };
        ParametrizedKernel::new(&space, kappa, p, rate).unwrap()
    }

    #[test]
    fn zero_kappa_is_measure_independent() {
        let s = FiniteSpace::counting(3).unwrap();
        let rate = RateFunction::Logistic { scale: 1.0, a: 0.2, b: vec![1.0] };
        let k = ParametrizedKernel::new(&s, vec![0.0; 9], DMatrix::from_element(3, 3, 0.5), rate).unwrap();
        assert!(k.is_constant());
        assert_eq!(k.eval(&[1.0, 0.0, 0.0]).unwrap(), k.eval(&[0.2, 0.3, 0.5]).unwrap());
    }

    #[test]
    fn factorized_intensity_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let k = random_kernel(&mut rng, 3, 2);
        let mu = random_measure(&mut rng, 3);
        let lam = k.eval(&mu).unwrap();
        for x in 0..3 {
            let l = k.rate.value(&k.theta(x, &mu));
            for y in 0..3 {
                let want = if x == y { 0.0 } else { l * k.p[(x, y)] * k.space.nu()[y] };
                assert!((lam.lam()[(x, y)] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn young_bound_and_intensity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let d = rng.gen_range(2..5);
            let kdim = rng.gen_range(1..3);
            let k = random_kernel(&mut rng, d, kdim);
            let mu = random_measure(&mut rng, d);
            let nu2 = random_measure(&mut rng, d);
            let tv: f64 = mu.iter().zip(&nu2).map(|(a, b)| (a - b).abs()).sum();
            for x in 0..d {
                let a = k.theta(x, &mu);
                let b = k.theta(x, &nu2);
                let diff: Vec<f64> = a.iter().zip(&b).map(|(u, v)| u - v).collect();
                assert!(norm2(&diff) <= k.m1() * tv + 1e-12);
            }
            let c = k.constants();
            let (l1, l2) = (k.eval(&mu).unwrap(), k.eval(&nu2).unwrap());
            assert!(l1.j_norm() <= c.m_lambda.unwrap() + 1e-12);
            assert!(l1.adjoint_j_norm() <= c.m_lambda_star.unwrap() + 1e-12);
            let dist = crate::kernel::kernel_distance(&l1, &l2).unwrap();
            assert!(dist <= c.lipschitz_l1.unwrap() * tv + 1e-12);
            for x in 0..d {
                let row: f64 = (0..d).map(|y| (l1.lam()[(x, y)] - l2.lam()[(x, y)]).abs()).sum();
                assert!(row <= k.xi(x, &mu, &nu2).unwrap() + 1e-12);
            }
        }
    }

    #[test]
    fn rate_function_constants() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let fns = [
            RateFunction::AffineClamped { a: 0.5, b: vec![1.5, -0.5], lo: 0.0, hi: 2.0 },
            RateFunction::Logistic { scale: 3.0, a: 0.1, b: vec![2.0, 1.0] },
            RateFunction::ExpNeg { scale: 2.0, a: 0.4, b: vec![-1.0, 0.5] },
        ];
        for f in &fns {
            for _ in 0..500 {
                let t0: Vec<f64> = (0..2).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let t1: Vec<f64> = (0..2).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let dist = norm2(&[t0[0] - t1[0], t0[1] - t1[1]]);
                let (v0, v1) = (f.value(&t0), f.value(&t1));
                assert!(v0 >= 0.0 && v0 <= f.sup() + 1e-12);
                assert!((v0 - v1).abs() <= f.lipschitz() * dist + 1e-12);
                if let Some(m3) = f.curvature() {
                    let t = rng.gen_range(0.0..1.0);
                    let mid: Vec<f64> = (0..2).map(|i| (1.0 - t) * t0[i] + t * t1[i]).collect();
                    let dev = (f.value(&mid) - (1.0 - t) * v0 - t * v1).abs();
                    assert!(dev <= 0.5 * m3 * t * (1.0 - t) * dist * dist + 1e-12);
                }
            }
        }
    }

    #[test]
    fn spec_parsing() {
        let json = r#"{"kappa": [[[1.0], [-1.0]], [[0.0], [0.0]]], "p": [[0, 1], [1, 0]],
            "rate": {"name": "affine-clamped", "a": 1.0, "b": [4.0], "lo": 1.0, "hi": 5.0}}"#;
        let spec: ParametrizedSpec = serde_json::from_str(json).unwrap();
        let k = ParametrizedKernel::from_spec(&FiniteSpace::counting(2).unwrap(), &spec).unwrap();
        let lam = k.eval(&[0.75, 0.25]).unwrap();
        assert!((lam.lam()[(0, 1)] - 3.0).abs() < 1e-15);
        assert!((lam.lam()[(1, 0)] - 1.0).abs() < 1e-15);
        assert_eq!(k.m1(), 5.0);
        assert_eq!(k.m2(), 4.0);
        assert_eq!(k.m3(), None);
    }
}
