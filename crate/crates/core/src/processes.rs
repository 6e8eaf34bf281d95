//! Seeded samplers for stationary processes with a known marginal density
//! and analytic mixing bounds.
//!
//! All randomness comes from ChaCha8 seeded with `seed_from_u64`; uniforms
//! are the top 53 bits of `next_u64`, Bernoulli(1/2) innovations are its top bit.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::{MixingFamily, MixingRate};
use crate::density::DensityHandle;
use crate::error::{Error, Result};
use crate::estimator::{Provenance, Sample};

pub const DEFAULT_REGENERATION_BURN_IN: u64 = 1024;

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

/// Seeded uniform and bit stream.
#[derive(Debug, Clone)]
pub struct RandomStream(ChaCha8Rng);

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform on the 2^{-53} grid of `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * TWO_POW_M53
    }

    pub fn bit(&mut self) -> bool {
        self.0.next_u64() >> 63 == 1
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
}

/// X_n = ½(X_{n−1} + ε_n), kept as a 64-bit binary fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AndrewsChain {
    state: u64,
}

impl AndrewsChain {
    /// State `bits / 2^64`.
    pub fn from_bits(bits: u64) -> Self {
        Self { state: bits }
    }

    /// Starts at `x ∈ [0, 1)`, which must be a multiple of 2^{-64}.
    pub fn from_value(x: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&x) {
            return Err(Error::Domain(format!("chain state {x} outside [0, 1)")));
        }
        let scaled = x * 2f64.powi(64);
        if scaled.fract() != 0.0 {
            return Err(Error::Domain(format!("{x} is not a 64-bit binary fraction")));
        }
        Ok(Self {
            state: scaled as u64,
        })
    }

    pub fn bits(&self) -> u64 {
        self.state
    }

    /// Current value rounded down to 53 bits.
    pub fn value(&self) -> f64 {
        (self.state >> 11) as f64 * TWO_POW_M53
    }

    /// Applies one innovation and returns the new value.
    pub fn step(&mut self, epsilon: bool) -> f64 {
        self.state = (self.state >> 1) | ((epsilon as u64) << 63);
        self.value()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessKind {
    Iid,
    /// Redraws from the target density with probability δ each step.
    Regeneration { delta: f64 },
    AndrewsChain,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MixingBound {
    pub beta: Option<f64>,
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessSpec {
    kind: ProcessKind,
    density: DensityHandle,
    burn_in: u64,
}

impl ProcessSpec {
    pub fn iid(density: DensityHandle) -> Self {
        Self {
            kind: ProcessKind::Iid,
            density,
            burn_in: 0,
        }
    }

    pub fn regeneration(density: DensityHandle, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::Config(format!(
                "regeneration probability must be in (0, 1], got {delta}"
            )));
        }
        Ok(Self {
            kind: ProcessKind::Regeneration { delta },
            density,
            burn_in: DEFAULT_REGENERATION_BURN_IN,
        })
    }

    /// The binary-smoothing chain; its stationary law is uniform.
    pub fn andrews() -> Self {
        Self {
            kind: ProcessKind::AndrewsChain,
            density: DensityHandle::uniform(),
            burn_in: 0,
        }
    }

    pub fn with_burn_in(mut self, burn_in: u64) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn kind(&self) -> &ProcessKind {
        &self.kind
    }

    pub fn true_density(&self) -> &DensityHandle {
        &self.density
    }

    pub fn burn_in(&self) -> u64 {
        self.burn_in
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ProcessKind::Iid => "iid",
            ProcessKind::Regeneration { .. } => "regen",
            ProcessKind::AndrewsChain => "andrews",
        }
    }

    /// Bound on β_k.
    pub fn beta_rate(&self) -> MixingRate {
        match self.kind {
            ProcessKind::Iid => MixingRate::explicit(MixingFamily::Beta, vec![1.0]).expect("valid"),
            ProcessKind::Regeneration { delta } if delta >= 1.0 => {
                MixingRate::explicit(MixingFamily::Beta, vec![1.0]).expect("valid")
            }
            ProcessKind::Regeneration { delta } => {
                MixingRate::geometric(MixingFamily::Beta, -(-delta).ln_1p()).expect("valid")
            }
            ProcessKind::AndrewsChain => MixingRate::non_mixing(MixingFamily::Beta),
        }
    }

    /// Bound on τ_k, when one is recorded.
    pub fn tau_rate(&self) -> Option<MixingRate> {
        match self.kind {
            ProcessKind::Iid => Some(MixingRate::explicit(MixingFamily::Tau, vec![1.0]).expect("valid")),
            ProcessKind::Regeneration { .. } => None,
            ProcessKind::AndrewsChain => {
                Some(MixingRate::geometric(MixingFamily::Tau, std::f64::consts::LN_2).expect("valid"))
            }
        }
    }

    /// Analytic bounds at `lag` (lag 0 is 1 by convention).
    pub fn mixing_bound(&self, lag: u64) -> MixingBound {
        let at_zero = |v: f64| if lag == 0 { 1.0 } else { v };
        match self.kind {
            ProcessKind::Iid => MixingBound {
                beta: Some(at_zero(0.0)),
                tau: Some(at_zero(0.0)),
            },
            ProcessKind::Regeneration { delta } => MixingBound {
                beta: Some(powu(1.0 - delta, lag)),
                tau: None,
            },
            ProcessKind::AndrewsChain => MixingBound {
                beta: Some(1.0),
                tau: Some(powu(0.5, lag)),
            },
        }
    }
}

fn powu(base: f64, exp: u64) -> f64 {
    match i32::try_from(exp) {
        Ok(e) => base.powi(e),
        Err(_) => base.powf(exp as f64),
    }
}

/// `n` consecutive observations after the burn-in, determined by `seed`.
pub fn sample(spec: &ProcessSpec, n: usize, seed: u64) -> Sample {
    let mut rng = RandomStream::new(seed);
    let values = match spec.kind {
        ProcessKind::Iid => {
            for _ in 0..spec.burn_in {
                rng.uniform();
            }
            (0..n).map(|_| spec.density.quantile(rng.uniform())).collect()
        }
        ProcessKind::Regeneration { delta } => {
            let mut x = spec.density.quantile(rng.uniform());
            let mut step = |rng: &mut RandomStream| {
                if rng.uniform() < delta {
                    x = spec.density.quantile(rng.uniform());
                }
                x
            };
            for _ in 0..spec.burn_in {
                step(&mut rng);
            }
            (0..n).map(|_| step(&mut rng)).collect()
        }
        ProcessKind::AndrewsChain => {
            let mut chain = AndrewsChain::from_bits(rng.next_u64());
            for _ in 0..spec.burn_in {
                chain.step(rng.bit());
            }
            (0..n).map(|_| chain.step(rng.bit())).collect()
        }
    };
    Sample::new(values)
        .expect("samplers stay in [0, 1]")
        .with_provenance(Provenance {
            process: spec.name().to_string(),
            seed,
        })
}
