//! Besov norms of truncated wavelet expansions and the linear approximation
//! bound they imply.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::basis::BasisSystem;
use crate::density::DensityHandle;
use crate::error::{Error, Result};

/// Ball B_{α,p,∞}(M₁) together with a measured norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesovDescriptor {
    pub alpha: f64,
    pub p: f64,
    pub m1: f64,
    pub norm_value: f64,
}

impl BesovDescriptor {
    pub fn new(alpha: f64, p: f64, m1: f64, norm_value: f64) -> Result<Self> {
        check_admissible(alpha, p)?;
        if !(m1 > 0.0) || !(norm_value >= 0.0) {
            return Err(Error::Domain(format!(
                "ball radius must be positive and norm non-negative (M1={m1}, norm={norm_value})"
            )));
        }
        Ok(Self {
            alpha,
            p,
            m1,
            norm_value,
        })
    }

    pub fn contains(&self) -> bool {
        self.norm_value <= self.m1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesovNorm {
    pub value: f64,
    /// Highest level present in the expansion.
    pub truncation_level: u32,
}

fn check_admissible(alpha: f64, p: f64) -> Result<()> {
    if !(p >= 1.0) || !(alpha + 0.5 - 1.0 / p > 0.0) {
        return Err(Error::Domain(format!(
            "need p >= 1 and α + 1/2 − 1/p > 0, got α={alpha}, p={p}"
        )));
    }
    Ok(())
}

/// sup_j 2^{j(α+1/2−1/p)} ‖t_{j,·}‖_p over the levels present.
pub fn besov_norm(levels: &BTreeMap<u32, Vec<f64>>, alpha: f64, p: f64) -> Result<BesovNorm> {
    check_admissible(alpha, p)?;
    let exponent = alpha + 0.5 - 1.0 / p;
    let mut value = 0.0f64;
    for (&j, coeffs) in levels {
        let lp = if p.is_infinite() {
            coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()))
        } else {
            coeffs.iter().map(|c| c.abs().powf(p)).sum::<f64>().powf(1.0 / p)
        };
        value = value.max((j as f64 * exponent).exp2() * lp);
    }
    Ok(BesovNorm {
        value,
        truncation_level: levels.keys().next_back().copied().unwrap_or(0),
    })
}

/// (2A)^{2α} ‖s‖²_{α,2,∞} / (4(4^α − 1)) · D^{−2α}
pub fn approximation_bound(alpha: f64, besov_norm: f64, a: u32, dimension: usize) -> f64 {
    debug_assert!(alpha > 0.0 && dimension >= 2);
    (2.0 * a as f64).powf(2.0 * alpha) * besov_norm.powi(2) / (4.0 * (4f64.powf(alpha) - 1.0))
        * (dimension as f64).powf(-2.0 * alpha)
}

/// True coefficients of `density` grouped by level, levels `0..=max_level`.
pub fn level_coefficients(
    basis: &BasisSystem,
    density: &DensityHandle,
    max_level: u32,
) -> Result<BTreeMap<u32, Vec<f64>>> {
    (0..=max_level)
        .map(|j| {
            let coeffs = basis
                .level_indices(j)
                .into_iter()
                .map(|idx| basis.true_coefficient(idx, density))
                .collect::<Result<Vec<_>>>()?;
            Ok((j, coeffs))
        })
        .collect()
}
