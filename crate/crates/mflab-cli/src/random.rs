//! Random test instances: spaces, densities, kernels, generators and Markov operators.

use mflab_core::kernel::{JumpKernel, RateGenerator};
use mflab_core::meanfield::TwoThreeBodyKernel;
use mflab_core::space::{Density, FiniteSpace};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn nu(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(0.2..3.0)).collect()
}

pub fn space(rng: &mut ChaCha8Rng, d: usize) -> FiniteSpace {
    FiniteSpace::new(nu(rng, d)).expect("positive weights")
}

/// A strictly positive probability density relative to ν.
pub fn density(rng: &mut ChaCha8Rng, nu: &[f64]) -> Vec<f64> {
    let raw: Vec<f64> = nu.iter().map(|_| rng.gen_range(0.05..1.0)).collect();
    let mass: f64 = raw.iter().zip(nu).map(|(a, b)| a * b).sum();
    raw.iter().map(|v| v / mass).collect()
}

/// A probability density relative to ν that vanishes on a random subset, never everywhere.
pub fn sparse_density(rng: &mut ChaCha8Rng, nu: &[f64]) -> Vec<f64> {
    let d = nu.len();
    let keep = rng.gen_range(0..d);
    let raw: Vec<f64> =
        (0..d).map(|x| if x == keep || rng.gen_bool(0.6) { rng.gen_range(0.05..1.0) } else { 0.0 }).collect();
    let mass: f64 = raw.iter().zip(nu).map(|(a, b)| a * b).sum();
    raw.iter().map(|v| v / mass).collect()
}

pub fn prob_density(rng: &mut ChaCha8Rng, s: &FiniteSpace) -> Density {
    Density::probability(s, density(rng, s.nu())).expect("normalized")
}

pub fn vector(rng: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(lo..hi)).collect()
}

pub fn kernel(rng: &mut ChaCha8Rng, s: &FiniteSpace, hi: f64) -> JumpKernel {
    let d = s.d();
    JumpKernel::new(s, DMatrix::from_fn(d, d, |_, _| rng.gen_range(0.0..hi))).expect("nonnegative")
}

pub fn generator(rng: &mut ChaCha8Rng, s: &FiniteSpace, hi: f64) -> RateGenerator {
    let d = s.d();
    RateGenerator::new(s, DMatrix::from_fn(d, d, |_, _| rng.gen_range(0.0..hi))).expect("nonnegative")
}

/// Two-body kernel with iid uniform interaction rates, plus three-body rates when asked.
pub fn two_body(rng: &mut ChaCha8Rng, s: &FiniteSpace, hi: f64, three: bool) -> TwoThreeBodyKernel {
    let d = s.d();
    let g1 = vector(rng, d * d * d, 0.0, hi);
    let g2 = three.then(|| vector(rng, d * d * d * d, 0.0, hi));
    TwoThreeBodyKernel::new(s, g1, g2, None).expect("nonnegative")
}

/// T[x][y] = M[y][x]ν[y]/ν[x] for a row-stochastic M; maps densities to densities.
pub fn markov_operator(rng: &mut ChaCha8Rng, nu: &[f64]) -> DMatrix<f64> {
    let d = nu.len();
    let mut m = DMatrix::from_fn(d, d, |_, _| if rng.gen_bool(0.8) { rng.gen_range(0.0..1.0) } else { 0.0 });
    for y in 0..d {
        let s: f64 = m.row(y).sum();
        if s == 0.0 {
            m[(y, y)] = 1.0;
        } else {
            m.row_mut(y).iter_mut().for_each(|v| *v /= s);
        }
    }
    DMatrix::from_fn(d, d, |x, y| m[(y, x)] * nu[y] / nu[x])
}

#[cfg(test)]
mod tests {
    use super::*;
    use mflab_core::entropy::validate_density_operator;
    use rand::SeedableRng;

    #[test]
    fn instances_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in 1..6 {
            let nu = nu(&mut rng, d);
            for w in [density(&mut rng, &nu), sparse_density(&mut rng, &nu)] {
                let m: f64 = w.iter().zip(&nu).map(|(a, b)| a * b).sum();
                assert!((m - 1.0).abs() < 1e-12);
            }
            validate_density_operator(&markov_operator(&mut rng, &nu), &nu).unwrap();
        }
    }
}
