//! Run configuration: merged from command-line flags and an optional TOML
//! file, with flags taking precedence. The resolved form round-trips
//! through TOML losslessly.

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerMode {
    Poly,
    Exp,
    CollisionFree,
}

impl SamplerMode {
    pub fn to_core(self) -> gbs_core::MarginalMode {
        match self {
            SamplerMode::Poly => gbs_core::MarginalMode::PolySpace,
            SamplerMode::Exp => gbs_core::MarginalMode::ExpSpace,
            SamplerMode::CollisionFree => gbs_core::MarginalMode::CollisionFree,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            SamplerMode::Poly => "poly",
            SamplerMode::Exp => "exp",
            SamplerMode::CollisionFree => "collision-free",
        }
    }
}

/// Fully resolved sampling run. Exactly one of `r` (two-stage pipeline)
/// and `n_override` (fixed photon number) is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub m: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    pub cutoff: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_override: Option<usize>,
    pub mode: SamplerMode,
    pub samples: usize,
    pub seed: u64,
    /// Path to a stored unitary; absent means Haar-random from `seed`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unitary: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

/// Flag-level (all-optional) view of [`RunConfig`], used both for the TOML
/// file and for merging command-line overrides on top of it.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PartialConfig {
    pub m: Option<usize>,
    pub r: Option<f64>,
    pub cutoff: Option<f64>,
    pub n_override: Option<usize>,
    pub mode: Option<SamplerMode>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub unitary: Option<String>,
    pub output: Option<String>,
    pub threads: Option<usize>,
}

impl PartialConfig {
    pub fn from_file(path: &str) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {path}: {e}")))?;
        toml::from_str(&text).map_err(|e| CliError::usage(format!("bad config {path}: {e}")))
    }

    /// Overlays `self` (higher priority) on `base`.
    pub fn over(self, base: PartialConfig) -> PartialConfig {
        PartialConfig {
            m: self.m.or(base.m),
            r: self.r.or(base.r),
            cutoff: self.cutoff.or(base.cutoff),
            n_override: self.n_override.or(base.n_override),
            mode: self.mode.or(base.mode),
            samples: self.samples.or(base.samples),
            seed: self.seed.or(base.seed),
            unitary: self.unitary.or(base.unitary),
            output: self.output.or(base.output),
            threads: self.threads.or(base.threads),
        }
    }

    pub fn resolve(self) -> Result<RunConfig, CliError> {
        let m = self
            .m
            .ok_or_else(|| CliError::usage("--m (mode count) is required".to_string()))?;
        let config = RunConfig {
            m,
            r: self.r,
            cutoff: self.cutoff.unwrap_or(50.0),
            n_override: self.n_override,
            mode: self.mode.unwrap_or(SamplerMode::Poly),
            samples: self.samples.unwrap_or(100),
            seed: self.seed.unwrap_or(0),
            unitary: self.unitary,
            output: self.output,
            threads: self.threads,
        };
        config.validate()?;
        Ok(config)
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        match (self.r, self.n_override) {
            (Some(_), Some(_)) => Err(CliError::usage(
                "--r and --n are mutually exclusive; pick the two-stage pipeline or a fixed photon number".to_string(),
            )),
            (None, None) => Err(CliError::usage(
                "one of --r (two-stage pipeline) or --n (fixed photon number) is required".to_string(),
            )),
            _ => {
                if let Some(n) = self.n_override {
                    if n % 2 != 0 {
                        return Err(CliError::usage(format!(
                            "photon number must be even, got {n}"
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
