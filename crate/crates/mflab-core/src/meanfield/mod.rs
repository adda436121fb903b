//! Mean-field jump kernels μ ↦ Λ(μ), the two/three-body and parametrized families,
//! averaged kernels and the bounded-difference verifiers.

mod averaged;
mod parametrized;
mod two_three_body;
mod verify;

use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::kernel::{JumpKernel, JumpKernelSpec};
use crate::space::{EmpiricalMeasure, FiniteSpace};

pub use averaged::{averaged_kernel, AveragedKernel, Averaging};
pub use parametrized::{ParametrizedKernel, ParametrizedSpec, RateFunction};
pub use two_three_body::{TwoThreeBodyKernel, TwoThreeBodySpec};
pub use verify::{
    epsilon_n, lipschitz_sweep, sweep_intensities, verify_a3, verify_a4, BoundedDifference, EpsilonEstimate,
    IntensitySweep, KernelTable, SweepMode, Witness,
};

/// Optional regularity constants attached to a kernel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DeclaredConstants {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_lambda_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz_l1: Option<f64>,
}

impl DeclaredConstants {
    /// Fields of `over` replace those of `self`.
    pub fn overridden_by(self, over: DeclaredConstants) -> Self {
        Self {
            m_lambda: over.m_lambda.or(self.m_lambda),
            m_lambda_star: over.m_lambda_star.or(self.m_lambda_star),
            theta: over.theta.or(self.theta),
            lipschitz_l1: over.lipschitz_l1.or(self.lipschitz_l1),
        }
    }
}

/// A map from probability measures on Π to jump kernels.
pub trait MeanFieldKernel: Debug + Send + Sync {
    fn space(&self) -> &FiniteSpace;

    /// Λ(μ) for the probability measure with atom masses `mu`.
    fn eval(&self, mu: &[f64]) -> Result<JumpKernel>;

    /// The N-particle kernel at an empirical measure of `n = N − 1` particles.
    fn eval_empirical(&self, mu: &EmpiricalMeasure) -> Result<JumpKernel> {
        self.eval(&mu.masses())
    }

    fn constants(&self) -> DeclaredConstants;

    /// Ξ(x, μ, ρ); defaults to ‖Λ(x,·;μ) − Λ(x,·;ρ)‖_TV.
    fn xi(&self, x: usize, mu: &[f64], rho: &[f64]) -> Result<f64> {
        let a = self.eval(mu)?;
        let b = self.eval(rho)?;
        Ok((0..a.d()).map(|y| (a.lam()[(x, y)] - b.lam()[(x, y)]).abs()).sum())
    }

    /// Exact averaged kernel when a closed form exists.
    fn averaged_closed_form(&self, _rho_masses: &[f64]) -> Option<JumpKernel> {
        None
    }

    /// True when Λ does not depend on μ.
    fn is_constant(&self) -> bool {
        false
    }
}

pub type KernelRef = Arc<dyn MeanFieldKernel>;

/// A kernel that ignores μ.
#[derive(Debug, Clone)]
pub struct ConstantKernel {
    kernel: JumpKernel,
    declared: DeclaredConstants,
}

impl ConstantKernel {
    pub fn new(kernel: JumpKernel) -> Self {
        let declared = DeclaredConstants {
            m_lambda: Some(kernel.j_norm()),
            m_lambda_star: Some(kernel.adjoint_j_norm()),
            theta: Some(0.0),
            lipschitz_l1: Some(0.0),
        };
        Self { kernel, declared }
    }

    pub fn kernel(&self) -> &JumpKernel {
        &self.kernel
    }
}

impl MeanFieldKernel for ConstantKernel {
    fn space(&self) -> &FiniteSpace {
        self.kernel.space()
    }

    fn eval(&self, mu: &[f64]) -> Result<JumpKernel> {
        check_dim(self.kernel.d(), mu.len())?;
        Ok(self.kernel.clone())
    }

    fn eval_empirical(&self, mu: &EmpiricalMeasure) -> Result<JumpKernel> {
        check_dim(self.kernel.d(), mu.d())?;
        Ok(self.kernel.clone())
    }

    fn constants(&self) -> DeclaredConstants {
        self.declared
    }

    fn xi(&self, _x: usize, _mu: &[f64], _rho: &[f64]) -> Result<f64> {
        Ok(0.0)
    }

    fn averaged_closed_form(&self, _rho_masses: &[f64]) -> Option<JumpKernel> {
        Some(self.kernel.clone())
    }

    fn is_constant(&self) -> bool {
        true
    }
}

/// JSON description of a kernel family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelSpec {
    Constant {
        #[serde(flatten)]
        kernel: JumpKernelSpec,
        #[serde(default)]
        constants: DeclaredConstants,
    },
    TwoThreeBody {
        #[serde(flatten)]
        spec: TwoThreeBodySpec,
        #[serde(default)]
        constants: DeclaredConstants,
    },
    Parametrized {
        #[serde(flatten)]
        spec: ParametrizedSpec,
        #[serde(default)]
        constants: DeclaredConstants,
    },
}

/// Wraps a kernel with user-declared constants overriding the analytic ones.
#[derive(Debug)]
pub struct WithConstants<K> {
    inner: K,
    declared: DeclaredConstants,
}

impl<K: MeanFieldKernel> MeanFieldKernel for WithConstants<K> {
    fn space(&self) -> &FiniteSpace {
        self.inner.space()
    }
    fn eval(&self, mu: &[f64]) -> Result<JumpKernel> {
        self.inner.eval(mu)
    }
    fn eval_empirical(&self, mu: &EmpiricalMeasure) -> Result<JumpKernel> {
        self.inner.eval_empirical(mu)
    }
    fn constants(&self) -> DeclaredConstants {
        self.inner.constants().overridden_by(self.declared)
    }
    fn xi(&self, x: usize, mu: &[f64], rho: &[f64]) -> Result<f64> {
        self.inner.xi(x, mu, rho)
    }
    fn averaged_closed_form(&self, rho_masses: &[f64]) -> Option<JumpKernel> {
        self.inner.averaged_closed_form(rho_masses)
    }
    fn is_constant(&self) -> bool {
        self.inner.is_constant()
    }
}

fn wrap<K: MeanFieldKernel + 'static>(inner: K, declared: DeclaredConstants) -> KernelRef {
    Arc::new(WithConstants { inner, declared })
}

impl KernelSpec {
    pub fn build(&self, space: &FiniteSpace) -> Result<KernelRef> {
        match self {
            KernelSpec::Constant { kernel, constants } => {
                Ok(wrap(ConstantKernel::new(JumpKernel::from_spec(space, kernel)?), *constants))
            }
            KernelSpec::TwoThreeBody { spec, constants } => Ok(wrap(TwoThreeBodyKernel::from_spec(space, spec)?, *constants)),
            KernelSpec::Parametrized { spec, constants } => Ok(wrap(ParametrizedKernel::from_spec(space, spec)?, *constants)),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            KernelSpec::Constant { .. } => "constant",
            KernelSpec::TwoThreeBody { .. } => "two_three_body",
            KernelSpec::Parametrized { .. } => "parametrized",
        }
    }
}

pub(crate) fn check_probability(mu: &[f64], d: usize) -> Result<()> {
    check_dim(d, mu.len())?;
    let s: f64 = mu.iter().sum();
    if mu.iter().any(|v| !(v.is_finite() && *v >= -1e-15)) || (s - 1.0).abs() > 1e-9 {
        return Err(Error::Invalid(format!("measure with total mass {s} is not a probability")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_roundtrip_and_build() {
        let space = FiniteSpace::counting(2).unwrap();
        let json = r#"{"family": "constant", "lam": [[0, 1], [2, 0]], "constants": {"theta": 0.5}}"#;
        let spec: KernelSpec = serde_json::from_str(json).unwrap();
        let k = spec.build(&space).unwrap();
        assert_eq!(k.constants().theta, Some(0.5));
        assert_eq!(k.constants().m_lambda, Some(2.0));
        assert!(k.is_constant());
        let bad = r#"{"family": "nope", "lam": [[0, 1], [2, 0]]}"#;
        assert!(serde_json::from_str::<KernelSpec>(bad).is_err());
    }

    #[test]
    fn constant_kernel_ignores_measure() {
        let space = FiniteSpace::counting(2).unwrap();
        let lam = JumpKernel::from_rows(&space, &[vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap();
        let k = ConstantKernel::new(lam.clone());
        assert_eq!(k.eval(&[0.3, 0.7]).unwrap(), lam);
        assert_eq!(k.eval(&[1.0, 0.0]).unwrap(), lam);
        assert!(k.eval(&[1.0]).is_err());
    }
}
