//! L² risk in coefficient space, oracle search and oracle-ratio diagnostics.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisFunctionIndex, BasisSystem};
use crate::density::DensityHandle;
use crate::error::{Error, Result};
use crate::estimator::{argmin_smallest, projection_chain, PenaltySpec, ProjectionEstimate, Sample, SelectionResult};
use crate::models::{ModelCollection, ModelIndexSet};
use crate::numeric::compensated_sum;

/// Negative out-of-model energy below this is reported as a truncation failure.
pub const ENERGY_TOLERANCE: f64 = 1e-10;

/// Pψ for a fixed set of indices, plus ‖s‖₂².
#[derive(Debug, Clone)]
pub struct TrueCoefficients {
    indices: Vec<BasisFunctionIndex>,
    values: Vec<f64>,
    position: HashMap<BasisFunctionIndex, usize>,
    squared_norm: f64,
}

impl TrueCoefficients {
    pub fn compute(basis: &BasisSystem, indices: &[BasisFunctionIndex], density: &DensityHandle) -> Result<Self> {
        let values = indices
            .par_iter()
            .map(|&idx| basis.true_coefficient(idx, density))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            indices: indices.to_vec(),
            position: indices.iter().enumerate().map(|(p, &i)| (i, p)).collect(),
            values,
            squared_norm: density.squared_l2_norm(),
        })
    }

    /// Coefficients for every index of the largest model.
    pub fn for_collection(collection: &ModelCollection, density: &DensityHandle) -> Result<Self> {
        let largest = collection
            .largest()
            .ok_or_else(|| Error::Precondition("empty model collection".into()))?;
        Self::compute(collection.basis(), &largest.indices, density)
    }

    pub fn get(&self, idx: BasisFunctionIndex) -> Option<f64> {
        self.position.get(&idx).map(|&p| self.values[p])
    }

    pub fn squared_norm(&self) -> f64 {
        self.squared_norm
    }

    /// Pψ over `indices`, in that order.
    pub fn values_for(&self, indices: &[BasisFunctionIndex]) -> Result<Vec<f64>> {
        if self.indices.starts_with(indices) {
            return Ok(self.values[..indices.len()].to_vec());
        }
        indices
            .iter()
            .map(|&i| {
                self.get(i).ok_or_else(|| {
                    Error::Precondition(format!("true coefficient for {i} was not computed"))
                })
            })
            .collect()
    }

    /// ‖s − s_m‖² = ‖s‖² − Σ_{m}(Pψ)².
    pub fn bias_sq(&self, indices: &[BasisFunctionIndex]) -> Result<f64> {
        let captured = compensated_sum(self.values_for(indices)?.into_iter().map(|v| v * v));
        let remainder = self.squared_norm - captured;
        if remainder < -ENERGY_TOLERANCE {
            return Err(Error::Truncation { remainder });
        }
        Ok(remainder.max(0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskValue {
    pub risk: f64,
    pub bias_sq: f64,
}

impl RiskValue {
    pub fn variance_term(&self) -> f64 {
        self.risk - self.bias_sq
    }
}

/// ‖s − Σ c ψ‖² with `coefficients` aligned with `indices`.
pub fn l2_risk_with(truths: &TrueCoefficients, indices: &[BasisFunctionIndex], coefficients: &[f64]) -> Result<RiskValue> {
    if indices.len() != coefficients.len() {
        return Err(Error::Precondition(format!(
            "{} coefficients for a model of dimension {}",
            coefficients.len(),
            indices.len()
        )));
    }
    let exact = truths.values_for(indices)?;
    let bias_sq = truths.bias_sq(indices)?;
    let in_model = compensated_sum(coefficients.iter().zip(&exact).map(|(c, t)| (c - t).powi(2)));
    Ok(RiskValue {
        risk: in_model + bias_sq,
        bias_sq,
    })
}

/// ‖s − Σ_{m} c ψ‖², computed by Parseval.
pub fn l2_risk(
    coefficients: &[f64],
    model: &ModelIndexSet,
    density: &DensityHandle,
    basis: &BasisSystem,
) -> Result<RiskValue> {
    let truths = TrueCoefficients::compute(basis, &model.indices, density)?;
    l2_risk_with(&truths, &model.indices, coefficients)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Position of m_o in the collection.
    pub oracle: usize,
    pub oracle_dim: usize,
    pub oracle_risk: f64,
    pub per_model_risks: Vec<RiskValue>,
}

pub fn oracle_from_chain(chain: &[ProjectionEstimate], truths: &TrueCoefficients) -> Result<OracleResult> {
    if chain.is_empty() {
        return Err(Error::Precondition("oracle search over an empty collection".into()));
    }
    let per_model_risks = chain
        .iter()
        .map(|est| l2_risk_with(truths, &est.indices, &est.coefficients))
        .collect::<Result<Vec<_>>>()?;
    let risks: Vec<f64> = per_model_risks.iter().map(|r| r.risk).collect();
    let oracle = argmin_smallest(&risks).expect("non-empty");
    Ok(OracleResult {
        oracle,
        oracle_dim: chain[oracle].dimension(),
        oracle_risk: risks[oracle],
        per_model_risks,
    })
}

/// m_o ∈ argmin_m ‖s − ŝ_m‖², ties to the smaller model.
pub fn oracle_search(sample: &Sample, collection: &ModelCollection, density: &DensityHandle) -> Result<OracleResult> {
    let truths = TrueCoefficients::for_collection(collection, density)?;
    let chain = projection_chain(sample, collection)?;
    oracle_from_chain(&chain, &truths)
}

/// Risk ratio; `degenerate` flags a zero denominator (value is +∞ then).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleRatio {
    pub value: f64,
    pub degenerate: bool,
}

impl OracleRatio {
    fn of(numerator: f64, denominator: f64) -> Self {
        if denominator > 0.0 {
            Self {
                value: numerator / denominator,
                degenerate: false,
            }
        } else {
            Self {
                value: f64::INFINITY,
                degenerate: true,
            }
        }
    }
}

/// risk(m̂) / (risk(m_o) + floor), the floor defaulting to pen(m_o).
pub fn oracle_ratio(
    selection: &SelectionResult,
    oracle: &OracleResult,
    penalty: &PenaltySpec,
    penalty_floor: Option<f64>,
) -> Result<OracleRatio> {
    let selected = oracle.per_model_risks.get(selection.selected).ok_or_else(|| {
        Error::Precondition("selection and oracle come from different collections".into())
    })?;
    let floor = penalty_floor.unwrap_or_else(|| penalty.for_dimension(oracle.oracle_dim));
    Ok(OracleRatio::of(selected.risk, oracle.oracle_risk + floor))
}

/// inf over models with D_m ≥ `min_dim` of ‖s − s_m‖² + pen(m).
pub fn theorem_denominator(
    truths: &TrueCoefficients,
    collection: &ModelCollection,
    penalty: &PenaltySpec,
    min_dim: usize,
) -> Result<Option<f64>> {
    let mut best: Option<f64> = None;
    for m in collection.models().iter().filter(|m| m.dimension() >= min_dim) {
        let value = truths.bias_sq(&m.indices)? + penalty.penalty(m);
        best = Some(best.map_or(value, |b: f64| b.min(value)));
    }
    Ok(best)
}

/// Unrestricted and D_m ≥ log n theorem-style ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremRatios {
    pub all_models: OracleRatio,
    pub restricted: Option<OracleRatio>,
}

pub fn theorem_ratios(
    selected_risk: f64,
    truths: &TrueCoefficients,
    collection: &ModelCollection,
    penalty: &PenaltySpec,
) -> Result<TheoremRatios> {
    let all = theorem_denominator(truths, collection, penalty, 0)?
        .ok_or_else(|| Error::Precondition("empty model collection".into()))?;
    let min_dim = (collection.n() as f64).ln().ceil() as usize;
    let restricted = theorem_denominator(truths, collection, penalty, min_dim)?;
    Ok(TheoremRatios {
        all_models: OracleRatio::of(selected_risk, all),
        restricted: restricted.map(|d| OracleRatio::of(selected_risk, d)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub model_dim: usize,
    pub bias_sq: f64,
    pub variance_term: f64,
    pub total_risk: f64,
    pub oracle_dim: usize,
    pub oracle_risk: f64,
    pub oracle_ratio: f64,
}

impl RiskReport {
    pub fn new(selection: &SelectionResult, oracle: &OracleResult, penalty: &PenaltySpec) -> Result<Self> {
        let ratio = oracle_ratio(selection, oracle, penalty, None)?;
        let selected = oracle.per_model_risks[selection.selected];
        Ok(Self {
            model_dim: selection.selected_dim(),
            bias_sq: selected.bias_sq,
            variance_term: selected.variance_term(),
            total_risk: selected.risk,
            oracle_dim: oracle.oracle_dim,
            oracle_risk: oracle.oracle_risk,
            oracle_ratio: ratio.value,
        })
    }
}
