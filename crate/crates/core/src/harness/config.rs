use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::basis::{BasisKind, BasisSystem};
use crate::calibration::{kappa, tau_penalty_constant};
use crate::density::DensityHandle;
use crate::error::{Error, Result};
use crate::estimator::{PenaltyRegime, PenaltySpec};
use crate::processes::ProcessSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessName {
    Iid,
    Regen,
    Andrews,
}

impl std::str::FromStr for ProcessName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iid" => Ok(Self::Iid),
            "regen" | "regeneration" => Ok(Self::Regen),
            "andrews" => Ok(Self::Andrews),
            other => Err(Error::Config(format!("process: unknown process '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessConfig {
    pub kind: ProcessName,
    #[serde(default = "default_density")]
    pub density: String,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub burn_in: Option<u64>,
}

fn default_density() -> String {
    "uniform".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeName {
    Beta,
    Tau,
    Custom,
    Calibrate,
}

impl std::str::FromStr for RegimeName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beta" => Ok(Self::Beta),
            "tau" => Ok(Self::Tau),
            "custom" => Ok(Self::Custom),
            "calibrate" => Ok(Self::Calibrate),
            other => Err(Error::Config(format!("penalty.regime: unknown regime '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyConfig {
    pub regime: RegimeName,
    #[serde(rename = "K", default = "default_k")]
    pub k: f64,
    /// Structural factor for the custom regime.
    #[serde(default)]
    pub slope: Option<f64>,
}

fn default_k() -> f64 {
    4.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("results")
}

fn default_basis() -> String {
    "haar".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub replications: usize,
    pub sample_sizes: Vec<usize>,
    #[serde(default = "default_basis")]
    pub basis: String,
    pub process: ProcessConfig,
    pub penalty: PenaltyConfig,
    /// Worker threads; 0 lets rayon decide.
    #[serde(default)]
    pub threads: usize,
    /// Record per-replication wall time (makes the CSV non-reproducible).
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub outputs: OutputConfig,
}

/// How the penalty is obtained for one sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyPlan {
    Fixed(PenaltySpec),
    /// Slope heuristic on each sample.
    Calibrate,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications: must be at least 1".into()));
        }
        if self.sample_sizes.is_empty() {
            return Err(Error::Config("sample_sizes: must not be empty".into()));
        }
        if self.sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("sample_sizes: must be strictly increasing".into()));
        }
        if self.sample_sizes[0] < 8 {
            return Err(Error::Config("sample_sizes: every n must be at least 8".into()));
        }
        if !(self.penalty.k > 0.0 && self.penalty.k.is_finite()) {
            return Err(Error::Config("penalty.K: must be positive".into()));
        }
        if self.penalty.regime == RegimeName::Custom && !self.penalty.slope.is_some_and(|s| s > 0.0) {
            return Err(Error::Config("penalty.slope: required and positive for the custom regime".into()));
        }
        self.basis_system()?;
        self.process_spec()?;
        Ok(())
    }

    pub fn basis_system(&self) -> Result<BasisSystem> {
        let kind: BasisKind = self
            .basis
            .parse()
            .map_err(|e: Error| Error::Config(format!("basis: {e}")))?;
        BasisSystem::from_kind(kind).map_err(|e| Error::Config(format!("basis: {e}")))
    }

    pub fn process_spec(&self) -> Result<ProcessSpec> {
        let p = &self.process;
        let density: DensityHandle = p
            .density
            .parse()
            .map_err(|e: Error| Error::Config(format!("process.density: {e}")))?;
        let spec = match p.kind {
            ProcessName::Iid => ProcessSpec::iid(density),
            ProcessName::Regen => {
                let delta = p
                    .delta
                    .ok_or_else(|| Error::Config("process.delta: required for regen".into()))?;
                ProcessSpec::regeneration(density, delta)
                    .map_err(|e| Error::Config(format!("process.delta: {e}")))?
            }
            ProcessName::Andrews => {
                if p.density != "uniform" {
                    return Err(Error::Config(
                        "process.density: the andrews chain has a uniform marginal".into(),
                    ));
                }
                ProcessSpec::andrews()
            }
        };
        Ok(match p.burn_in {
            Some(b) => spec.with_burn_in(b),
            None => spec,
        })
    }

    pub fn penalty_plan(&self, n: usize) -> Result<PenaltyPlan> {
        let process = self.process_spec()?;
        let basis = self.basis_system()?;
        let k = self.penalty.k;
        let spec = match self.penalty.regime {
            RegimeName::Beta => {
                let kappa1 = kappa(&process.beta_rate(), 1)?;
                PenaltySpec::beta(k, basis.norm_constants().phi, kappa1, n)?
            }
            RegimeName::Tau => {
                let rate = process.tau_rate().ok_or_else(|| {
                    Error::Config(format!(
                        "penalty.regime: no τ bound is recorded for the {} process",
                        process.name()
                    ))
                })?;
                let structural = tau_penalty_constant(&rate, &basis, process.true_density().l2_norm())?;
                PenaltySpec::tau(k, structural, n)?
            }
            RegimeName::Custom => PenaltySpec::new(
                PenaltyRegime::CustomLinear,
                k,
                self.penalty.slope.unwrap_or(1.0),
                n,
            )?,
            RegimeName::Calibrate => return Ok(PenaltyPlan::Calibrate),
        };
        Ok(PenaltyPlan::Fixed(spec))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 7
replications = 3
sample_sizes = [256, 512]

[process]
kind = "regen"
density = "linear"
delta = 0.5

[penalty]
regime = "beta"
K = 4.1
"#;

    #[test]
    fn parses_and_derives_penalty() {
        let c = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(c.basis, "haar");
        assert_eq!(c.process_spec().unwrap().burn_in(), 1024);
        let PenaltyPlan::Fixed(spec) = c.penalty_plan(256).unwrap() else {
            panic!("expected a fixed penalty")
        };
        // κ₁ = 1/(1 − 1/2) = 2
        assert!((spec.structural - 2.0).abs() < 1e-12);
        let round = ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(round, c);
    }

    #[test]
    fn validation_names_fields() {
        let bad = SAMPLE.replace("[256, 512]", "[512, 256]");
        let err = ExperimentConfig::from_toml_str(&bad).unwrap_err();
        assert!(err.to_string().contains("sample_sizes"), "{err}");
        let bad = SAMPLE.replace("delta = 0.5", "delta = 2.0");
        assert!(ExperimentConfig::from_toml_str(&bad).unwrap_err().to_string().contains("process.delta"));
        let bad = SAMPLE.replace("replications = 3", "replications = 0");
        assert_eq!(ExperimentConfig::from_toml_str(&bad).unwrap_err().exit_code(), 2);
        let bad = SAMPLE.replace("seed = 7", "seed = 7\nbogus = 1");
        assert!(matches!(ExperimentConfig::from_toml_str(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn tau_regime_needs_a_tau_bound() {
        let c = ExperimentConfig::from_toml_str(&SAMPLE.replace("\"beta\"", "\"tau\"")).unwrap();
        assert!(matches!(c.penalty_plan(256), Err(Error::Config(_))));
    }
}
