//! JSON experiment configs and the table of defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use mflab_core::entropy::CtForm;
use mflab_core::kernel::{RateGenerator, RateGeneratorSpec};
use mflab_core::meanfield::{KernelRef, KernelSpec};
use mflab_core::space::{Density, FiniteSpace, FiniteSpaceSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable overriding the master-equation state cap.
pub const CAP_ENV: &str = "MFLAB_CAP_STATES";

/// Every default used when a config leaves a parameter out.
///
/// | parameter        | default   |
/// |------------------|-----------|
/// | `dt`             | 0.01      |
/// | `t_end`          | 1.0       |
/// | `n`              | 4         |
/// | `n_list`         | [2, 3, 4] |
/// | `samples`        | 100 000   |
/// | `replicas`       | 100 000   |
/// | `cap_states`     | 20 000    |
/// | `enum_cap`       | 10^7      |
/// | `averaging_cap`  | 100 000   |
/// | `eps_samples`    | 2 000     |
/// | `eps_stride`     | 20        |
/// | `instances`      | 1 000     |
/// | `eta`            | [0.1, 1, 10] |
/// | `ct_form`        | printed   |
pub struct Defaults;

impl Defaults {
    pub const DT: f64 = 0.01;
    pub const T_END: f64 = 1.0;
    pub const N: usize = 4;
    pub const N_LIST: [usize; 3] = [2, 3, 4];
    pub const SAMPLES: usize = 100_000;
    pub const REPLICAS: usize = 100_000;
    pub const CAP_STATES: usize = 20_000;
    pub const ENUM_CAP: u128 = 10_000_000;
    pub const AVERAGING_CAP: u128 = 100_000;
    pub const EPS_SAMPLES: usize = 2_000;
    pub const EPS_STRIDE: usize = 20;
    pub const INSTANCES: usize = 1_000;
    pub const ETA: [f64; 3] = [0.1, 1.0, 10.0];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentName {
    SolveMf,
    SolveAveraged,
    Master,
    Simulate,
    ChaosExperiment,
    ConcentrationTest,
    VerifyConditions,
    InequalitySuite,
}

impl ExperimentName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::SolveMf => "solve-mf",
            Self::SolveAveraged => "solve-averaged",
            Self::Master => "master",
            Self::Simulate => "simulate",
            Self::ChaosExperiment => "chaos-experiment",
            Self::ConcentrationTest => "concentration-test",
            Self::VerifyConditions => "verify-conditions",
            Self::InequalitySuite => "inequality-suite",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Self::Simulate | Self::ConcentrationTest | Self::VerifyConditions | Self::InequalitySuite)
    }

    pub fn needs_kernel(self) -> bool {
        !matches!(self, Self::InequalitySuite)
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A kernel given inline or as a path to a JSON file, relative to the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KernelSource {
    File { path: PathBuf },
    Inline(KernelSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    /// Particles start iid from the mean-field initial density.
    #[default]
    Chaotic,
    /// Particles start iid from `sigma0`.
    Product,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap_states: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enum_cap: Option<u128>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub averaging_cap: Option<u128>,
    /// Monte Carlo samples for the averaged kernel above `averaging_cap`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub averaging_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instances: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ct_form: Option<CtForm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialKind>,
    /// Time of the mean-field snapshot used to build Φ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_t: Option<f64>,
    /// Constant C of the exponential moment; the empirical sup when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concentration_c: Option<f64>,
}

/// The on-disk experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentName>,
    pub space: FiniteSpaceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<RateGeneratorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSource>,
    /// Mean-field initial density relative to ν; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0: Option<Vec<f64>>,
    /// Second density, used by product initial laws.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<Vec<f64>>,
    #[serde(default)]
    pub params: Params,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub cap_states: Option<usize>,
    pub replicas: Option<usize>,
    pub samples: Option<usize>,
}

/// Parses JSON, reporting the path of the offending field on failure.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Schema { path, message: e.into_inner().to_string() }
    })
}

/// Reads a config file and inlines a kernel given by path.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Schema { path: ".".into(), message: format!("cannot read {}: {e}", path.display()) })?;
    let mut cfg = parse_config(&text)?;
    if let Some(KernelSource::File { path: kp }) = &cfg.kernel {
        let full = path.parent().unwrap_or(Path::new(".")).join(kp);
        let text = std::fs::read_to_string(&full).map_err(|e| CliError::Schema {
            path: "kernel.path".into(),
            message: format!("cannot read {}: {e}", full.display()),
        })?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let spec: KernelSpec = serde_path_to_error::deserialize(de).map_err(|e| CliError::Schema {
            path: format!("kernel.path:{}", e.path()),
            message: e.into_inner().to_string(),
        })?;
        cfg.kernel = Some(KernelSource::Inline(spec));
    }
    Ok(cfg)
}

fn schema(path: &str, message: impl Into<String>) -> CliError {
    CliError::Schema { path: path.into(), message: message.into() }
}

/// A config with overrides applied and every object built and checked.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub experiment: ExperimentName,
    pub config: ExperimentConfig,
    pub space: FiniteSpace,
    pub generator: RateGenerator,
    pub kernel: Option<KernelRef>,
    pub rho0: Density,
    pub sigma0: Option<Density>,
}

impl Resolved {
    pub fn new(experiment: ExperimentName, mut config: ExperimentConfig, over: &Overrides) -> Result<Self, CliError> {
        if let Some(named) = config.experiment {
            if named != experiment {
                return Err(schema("experiment", format!("config names {named}, command is {experiment}")));
            }
        }
        config.experiment = Some(experiment);
        let p = &mut config.params;
        p.seed = over.seed.or(p.seed);
        p.dt = over.dt.or(p.dt);
        p.t_end = over.t_end.or(p.t_end);
        p.cap_states = over.cap_states.or(p.cap_states);
        p.replicas = over.replicas.or(p.replicas);
        p.samples = over.samples.or(p.samples);
        if experiment.is_stochastic() && p.seed.is_none() {
            return Err(schema("params.seed", format!("{experiment} needs a seed")));
        }
        for (name, v) in [("params.dt", p.dt), ("params.t_end", p.t_end), ("params.snapshot_t", p.snapshot_t)] {
            if let Some(v) = v {
                let ok = if name == "params.dt" { v > 0.0 } else { v >= 0.0 };
                if !(v.is_finite() && ok) {
                    return Err(schema(name, format!("value {v} out of range")));
                }
            }
        }
        let space = FiniteSpace::from_spec(&config.space).map_err(|e| schema("space", e.to_string()))?;
        let generator = match &config.generator {
            Some(g) => RateGenerator::from_spec(&space, g).map_err(|e| schema("generator", e.to_string()))?,
            None => RateGenerator::zero(&space),
        };
        let kernel = match &config.kernel {
            Some(KernelSource::Inline(k)) => Some(k.build(&space).map_err(|e| schema("kernel", e.to_string()))?),
            Some(KernelSource::File { .. }) => return Err(schema("kernel.path", "kernel file was not loaded")),
            None if experiment.needs_kernel() => return Err(schema("kernel", format!("{experiment} needs a kernel"))),
            None => None,
        };
        let rho0 = match &config.rho0 {
            Some(w) => Density::probability(&space, w.clone()).map_err(|e| schema("rho0", e.to_string()))?,
            None => Density::uniform(&space),
        };
        let sigma0 = match &config.sigma0 {
            Some(w) => Some(Density::probability(&space, w.clone()).map_err(|e| schema("sigma0", e.to_string()))?),
            None => None,
        };
        if config.params.initial == Some(InitialKind::Product) && sigma0.is_none() {
            return Err(schema("sigma0", "a product initial law needs sigma0"));
        }
        Ok(Self { experiment, config, space, generator, kernel, rho0, sigma0 })
    }

    pub fn params(&self) -> &Params {
        &self.config.params
    }

    pub fn kernel(&self) -> &KernelRef {
        self.kernel.as_ref().expect("kernel checked at resolution")
    }

    pub fn dt(&self) -> f64 {
        self.params().dt.unwrap_or(Defaults::DT)
    }

    pub fn t_end(&self) -> f64 {
        self.params().t_end.unwrap_or(Defaults::T_END)
    }

    pub fn n(&self) -> usize {
        self.params().n.unwrap_or(Defaults::N)
    }

    pub fn n_list(&self) -> Vec<usize> {
        self.params().n_list.clone().unwrap_or_else(|| Defaults::N_LIST.to_vec())
    }

    pub fn seed(&self) -> u64 {
        self.params().seed.unwrap_or(0)
    }

    pub fn samples(&self) -> usize {
        self.params().samples.unwrap_or(Defaults::SAMPLES)
    }

    pub fn replicas(&self) -> usize {
        self.params().replicas.unwrap_or(Defaults::REPLICAS)
    }

    /// The config cap, then the environment, then the default.
    pub fn cap_states(&self) -> usize {
        self.params().cap_states.or_else(env_cap).unwrap_or(Defaults::CAP_STATES)
    }

    pub fn enum_cap(&self) -> u128 {
        self.params().enum_cap.unwrap_or(Defaults::ENUM_CAP)
    }

    pub fn averaging(&self) -> mflab_core::meanfield::Averaging {
        mflab_core::meanfield::Averaging {
            cap: self.params().averaging_cap.unwrap_or(Defaults::AVERAGING_CAP),
            mc_samples: self.params().averaging_samples,
            seed: self.seed(),
        }
    }

    pub fn ct_form(&self) -> CtForm {
        self.params().ct_form.unwrap_or_default()
    }
}

/// The state cap from [`CAP_ENV`], if set to a valid number.
pub fn env_cap() -> Option<usize> {
    std::env::var(CAP_ENV).ok().and_then(|v| v.trim().parse().ok())
}
