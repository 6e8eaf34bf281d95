//! Projection estimators, contrasts, penalties and the penalized selection rule.

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::basis::{dyadic_scale, BasisFunctionIndex, BasisKind, BasisSystem};
use crate::density::DensityHandle;
use crate::error::{Error, Result};
use crate::models::{ModelCollection, ModelIndexSet};
use crate::numeric::{compensated_sum, CompensatedSum};

/// Criteria closer than this are treated as tied; ties go to the smaller model.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Where a sample came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub process: String,
    pub seed: u64,
}

/// Observations X₁..Xₙ in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Sample {
    values: Vec<f64>,
    sorted: OnceLock<Vec<f64>>,
    provenance: Option<Provenance>,
}

impl Sample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("observation {bad} outside [0, 1]")));
        }
        Ok(Self {
            values,
            sorted: OnceLock::new(),
            provenance: None,
        })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    fn sorted(&self) -> &[f64] {
        self.sorted.get_or_init(|| {
            let mut v = self.values.clone();
            v.sort_by(f64::total_cmp);
            v
        })
    }

    /// Number of observations in `[0, x)`; `x ≥ 1` counts everything.
    fn count_below(&self, x: f64) -> usize {
        if x >= 1.0 {
            return self.values.len();
        }
        self.sorted().partition_point(|&v| v < x)
    }
}

/// P_n ψ_{j,k} = (1/n) Σᵢ ψ_{j,k}(Xᵢ).
///
/// For Haar functions this counts observations on each half of the support
/// (exact integer arithmetic); other systems use compensated summation in
/// sample order.
pub fn empirical_coefficient(
    sample: &Sample,
    basis: &BasisSystem,
    idx: BasisFunctionIndex,
) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::Domain("empirical coefficient of an empty sample".into()));
    }
    let n = sample.len() as f64;
    if basis.kind() == BasisKind::HaarWavelet {
        let (a, b) = basis.support(idx)?;
        let lo = sample.count_below(a);
        let hi = sample.count_below(b);
        if idx.j == 0 {
            return Ok(std::f64::consts::SQRT_2 * (hi - lo) as f64 / n);
        }
        let mid = sample.count_below(0.5 * (a + b));
        let signed = (mid - lo) as i64 - (hi - mid) as i64;
        return Ok(dyadic_scale(idx.j) * signed as f64 / n);
    }
    basis.evaluate(idx, 0.5)?;
    let mut acc = CompensatedSum::new();
    for &x in sample.values() {
        acc.add(basis.evaluate_unchecked(idx, x));
    }
    Ok(acc.value() / n)
}

/// ŝ_m and its contrast γ_n(ŝ_m) = −Σ (P_nψ)².
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionEstimate {
    pub model_id: usize,
    pub indices: Vec<BasisFunctionIndex>,
    pub coefficients: Vec<f64>,
    pub contrast: f64,
    pub n: usize,
}

impl ProjectionEstimate {
    fn from_parts(
        model_id: usize,
        indices: Vec<BasisFunctionIndex>,
        coefficients: Vec<f64>,
        n: usize,
    ) -> Self {
        let contrast = -compensated_sum(coefficients.iter().map(|c| c * c));
        Self {
            model_id,
            indices,
            coefficients,
            contrast,
            n,
        }
    }

    pub fn dimension(&self) -> usize {
        self.indices.len()
    }

    pub fn coefficient(&self, idx: BasisFunctionIndex) -> Option<f64> {
        self.indices
            .iter()
            .position(|&i| i == idx)
            .map(|p| self.coefficients[p])
    }

    pub fn iter(&self) -> impl Iterator<Item = (BasisFunctionIndex, f64)> + '_ {
        self.indices.iter().copied().zip(self.coefficients.iter().copied())
    }
}

pub fn empirical_coefficients(
    sample: &Sample,
    model: &ModelIndexSet,
    basis: &BasisSystem,
) -> Result<ProjectionEstimate> {
    let coefficients = model
        .indices
        .iter()
        .map(|&idx| empirical_coefficient(sample, basis, idx))
        .collect::<Result<Vec<_>>>()?;
    Ok(ProjectionEstimate::from_parts(
        model.id,
        model.indices.clone(),
        coefficients,
        sample.len(),
    ))
}

/// Extends `prev` (computed on m) to `next` ⊇ m, computing only the new
/// coefficients.
pub fn incremental_coefficients(
    prev: &ProjectionEstimate,
    sample: &Sample,
    next: &ModelIndexSet,
    basis: &BasisSystem,
) -> Result<ProjectionEstimate> {
    if prev.n != sample.len() {
        return Err(Error::Precondition(
            "previous estimate was computed on a different sample".into(),
        ));
    }
    if next.indices == prev.indices {
        return Ok(prev.clone());
    }
    let coefficients = if next.indices.starts_with(&prev.indices) {
        let mut c = prev.coefficients.clone();
        for &idx in &next.indices[prev.indices.len()..] {
            c.push(empirical_coefficient(sample, basis, idx)?);
        }
        c
    } else {
        let known: HashMap<_, _> = prev.iter().collect();
        if known.len() > next.indices.len()
            || prev.indices.iter().any(|i| !next.indices.contains(i))
        {
            return Err(Error::Precondition(format!(
                "model {} is not nested in model {}",
                prev.model_id, next.id
            )));
        }
        next.indices
            .iter()
            .map(|idx| match known.get(idx) {
                Some(&c) => Ok(c),
                None => empirical_coefficient(sample, basis, *idx),
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok(ProjectionEstimate::from_parts(
        next.id,
        next.indices.clone(),
        coefficients,
        sample.len(),
    ))
}

/// Projection estimates for every model of the collection, along the
/// nesting chain.
pub fn projection_chain(sample: &Sample, collection: &ModelCollection) -> Result<Vec<ProjectionEstimate>> {
    let mut chain: Vec<ProjectionEstimate> = Vec::with_capacity(collection.models().len());
    for model in collection.models() {
        let next = match chain.last() {
            Some(prev) => incremental_coefficients(prev, sample, model, collection.basis())?,
            None => empirical_coefficients(sample, model, collection.basis())?,
        };
        chain.push(next);
    }
    Ok(chain)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyRegime {
    /// K Φ² κ₁ D_m / n with K > 4
    BetaMixing,
    /// K A K∞ K_BV (Σ β̃ₗ) D_m / n with K ≥ 8
    TauMixing,
    /// K · slope · D_m / n
    CustomLinear,
}

impl std::str::FromStr for PenaltyRegime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beta" => Ok(PenaltyRegime::BetaMixing),
            "tau" => Ok(PenaltyRegime::TauMixing),
            "custom" => Ok(PenaltyRegime::CustomLinear),
            other => Err(Error::Config(format!("unknown penalty regime '{other}'"))),
        }
    }
}

/// pen(m) = K · structural · D_m / n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub regime: PenaltyRegime,
    pub k: f64,
    pub structural: f64,
    pub n: usize,
}

impl PenaltySpec {
    pub fn new(regime: PenaltyRegime, k: f64, structural: f64, n: usize) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::Config(format!("penalty constant K must be positive, got {k}")));
        }
        if !(structural > 0.0 && structural.is_finite()) {
            return Err(Error::Config(format!(
                "structural penalty factor must be positive, got {structural}"
            )));
        }
        if n == 0 {
            return Err(Error::Config("penalty needs n >= 1".into()));
        }
        let spec = Self {
            regime,
            k,
            structural,
            n,
        };
        if spec.below_threshold() {
            log::warn!(
                "K = {k} is below the {:?} threshold; oracle guarantees do not apply",
                regime
            );
        }
        Ok(spec)
    }

    /// β-mixing penalty with structural factor Φ²κ₁.
    pub fn beta(k: f64, phi: f64, kappa1: f64, n: usize) -> Result<Self> {
        Self::new(PenaltyRegime::BetaMixing, k, phi * phi * kappa1, n)
    }

    /// τ-mixing penalty with structural factor A·K∞·K_BV·Σβ̃ₗ.
    pub fn tau(k: f64, structural: f64, n: usize) -> Result<Self> {
        Self::new(PenaltyRegime::TauMixing, k, structural, n)
    }

    pub fn custom(k: f64, slope: f64, n: usize) -> Result<Self> {
        Self::new(PenaltyRegime::CustomLinear, k, slope, n)
    }

    /// K ≤ 4 (β) or K < 8 (τ).
    pub fn below_threshold(&self) -> bool {
        match self.regime {
            PenaltyRegime::BetaMixing => self.k <= 4.0,
            PenaltyRegime::TauMixing => self.k < 8.0,
            PenaltyRegime::CustomLinear => false,
        }
    }

    /// Penalty per unit of dimension, K · structural / n.
    pub fn slope(&self) -> f64 {
        self.k * self.structural / self.n as f64
    }

    pub fn for_dimension(&self, dimension: usize) -> f64 {
        self.k * self.structural * dimension as f64 / self.n as f64
    }

    pub fn penalty(&self, model: &ModelIndexSet) -> f64 {
        self.for_dimension(model.dimension())
    }
}

/// Index of the smallest criterion; among values within [`TIE_TOLERANCE`]
/// of each other the earliest (smallest model) wins.
pub fn argmin_smallest(criteria: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &c) in criteria.iter().enumerate() {
        match best {
            None => best = Some(i),
            Some(b) if c < criteria[b] - TIE_TOLERANCE => best = Some(i),
            _ => {}
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionRow {
    pub model_id: usize,
    pub dim: usize,
    pub contrast: f64,
    pub penalty: f64,
    pub criterion: f64,
}

/// m̂ and the PLSE s̃ = ŝ_m̂.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub selected: usize,
    pub per_model: Vec<CriterionRow>,
    pub plse: ProjectionEstimate,
}

impl SelectionResult {
    pub fn selected_dim(&self) -> usize {
        self.plse.dimension()
    }

    pub fn selected_row(&self) -> &CriterionRow {
        &self.per_model[self.selected]
    }

    pub fn report(&self) -> SelectionReport {
        SelectionReport {
            selected_dim: self.selected_dim(),
            table: self
                .per_model
                .iter()
                .map(|r| TableRow {
                    dim: r.dim,
                    contrast: r.contrast,
                    penalty: r.penalty,
                    criterion: r.criterion,
                })
                .collect(),
            coefficients: self
                .plse
                .iter()
                .map(|(idx, value)| CoefficientEntry {
                    j: idx.j,
                    k: idx.k,
                    value,
                })
                .collect(),
        }
    }
}

/// JSON form of a [`SelectionResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub selected_dim: usize,
    pub table: Vec<TableRow>,
    pub coefficients: Vec<CoefficientEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub dim: usize,
    pub contrast: f64,
    pub penalty: f64,
    pub criterion: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEntry {
    pub j: u32,
    pub k: i64,
    pub value: f64,
}

/// Applies the selection rule to precomputed projection estimates.
pub fn select_from_chain(chain: &[ProjectionEstimate], spec: &PenaltySpec) -> Result<SelectionResult> {
    if chain.is_empty() {
        return Err(Error::Precondition("cannot select from an empty collection".into()));
    }
    let per_model: Vec<CriterionRow> = chain
        .iter()
        .map(|est| {
            let penalty = spec.for_dimension(est.dimension());
            CriterionRow {
                model_id: est.model_id,
                dim: est.dimension(),
                contrast: est.contrast,
                penalty,
                criterion: est.contrast + penalty,
            }
        })
        .collect();
    let criteria: Vec<f64> = per_model.iter().map(|r| r.criterion).collect();
    let selected = argmin_smallest(&criteria).expect("non-empty");
    Ok(SelectionResult {
        selected,
        per_model,
        plse: chain[selected].clone(),
    })
}

/// m̂ ∈ argmin_m (γ_n(ŝ_m) + pen(m)).
pub fn select(sample: &Sample, collection: &ModelCollection, spec: &PenaltySpec) -> Result<SelectionResult> {
    if collection.models().is_empty() {
        return Err(Error::Precondition("cannot select from an empty collection".into()));
    }
    let chain = projection_chain(sample, collection)?;
    select_from_chain(&chain, spec)
}

/// s̃(x) = Σ c_{j,k} ψ_{j,k}(x) over the selected model.
pub fn evaluate_plse(result: &SelectionResult, basis: &BasisSystem, x: f64) -> Result<f64> {
    let mut acc = CompensatedSum::new();
    for (idx, c) in result.plse.iter() {
        acc.add(c * basis.evaluate(idx, x)?);
    }
    Ok(acc.value())
}

/// V(m) = 2 Σ_{(j,k)∈m} (P_nψ − Pψ)².
pub fn v_statistic(
    sample: &Sample,
    model: &ModelIndexSet,
    density: &DensityHandle,
    basis: &BasisSystem,
) -> Result<f64> {
    let estimate = empirical_coefficients(sample, model, basis)?;
    let mut acc = CompensatedSum::new();
    for (idx, c) in estimate.iter() {
        let truth = basis.true_coefficient(idx, density)?;
        acc.add((c - truth).powi(2));
    }
    Ok(2.0 * acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn hand_sample() -> Sample {
        Sample::new(vec![0.25, 0.75]).unwrap()
    }

    fn haar_models(n: usize) -> ModelCollection {
        ModelCollection::build(&BasisSystem::haar(), n).unwrap()
    }

    #[test]
    fn hand_coefficients() {
        let h = BasisSystem::haar();
        let s = hand_sample();
        let c00 = empirical_coefficient(&s, &h, BasisFunctionIndex::new(0, 0)).unwrap();
        let c10 = empirical_coefficient(&s, &h, BasisFunctionIndex::new(1, 0)).unwrap();
        assert!((c00 - SQRT_2 / 2.0).abs() < 1e-15);
        assert!((c10 + SQRT_2 / 2.0).abs() < 1e-15);
        let m0 = haar_models(8).models()[0].clone();
        let est = empirical_coefficients(&s, &m0, &h).unwrap();
        assert!((est.contrast + 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_sample_is_rejected() {
        let h = BasisSystem::haar();
        let s = Sample::new(vec![]).unwrap();
        let m0 = haar_models(8).models()[0].clone();
        assert!(matches!(empirical_coefficients(&s, &m0, &h), Err(Error::Domain(_))));
        assert!(Sample::new(vec![0.5, 1.5]).is_err());
    }

    #[test]
    fn counting_path_matches_direct_summation() {
        let h = BasisSystem::haar();
        let values: Vec<f64> = (0..997).map(|i| ((i * 7919) % 1000) as f64 / 1000.0).chain([1.0, 0.0, 0.5]).collect();
        let s = Sample::new(values.clone()).unwrap();
        for j in 0..9 {
            for idx in h.level_indices(j) {
                let direct = compensated_sum(values.iter().map(|&x| h.evaluate(idx, x).unwrap()))
                    / values.len() as f64;
                let fast = empirical_coefficient(&s, &h, idx).unwrap();
                assert!((direct - fast).abs() < 1e-14, "{idx}");
            }
        }
    }

    #[test]
    fn incremental_identity_and_extension() {
        let h = BasisSystem::haar();
        let s = hand_sample();
        let c = haar_models(8);
        let m0 = &c.models()[0];
        let m1 = &c.models()[1];
        let prev = empirical_coefficients(&s, m0, &h).unwrap();
        assert_eq!(incremental_coefficients(&prev, &s, m0, &h).unwrap(), prev);
        let inc = incremental_coefficients(&prev, &s, m1, &h).unwrap();
        let direct = empirical_coefficients(&s, m1, &h).unwrap();
        assert_eq!(inc.coefficients, direct.coefficients);
        assert!(incremental_coefficients(&direct, &s, m0, &h).is_err());
    }

    #[test]
    fn penalty_values() {
        let beta = PenaltySpec::beta(4.1, 1.0, 1.0, 1000).unwrap();
        assert!((beta.for_dimension(8) - 0.0328).abs() < 1e-15);
        let tau = PenaltySpec::tau(8.0, 1.0 * 1.0 * 2.0 * 2.0, 100).unwrap();
        assert!((tau.for_dimension(4) - 1.28).abs() < 1e-15);
        let big = PenaltySpec::beta(4.1, 1.0, 1.0, 1 << 40).unwrap();
        assert!(big.for_dimension(2) < 1e-11);
        assert!(PenaltySpec::beta(0.0, 1.0, 1.0, 10).is_err());
        assert!(PenaltySpec::beta(3.0, 1.0, 1.0, 10).unwrap().below_threshold());
        assert!(PenaltySpec::tau(7.9, 1.0, 10).unwrap().below_threshold());
        assert!(!PenaltySpec::tau(8.0, 1.0, 10).unwrap().below_threshold());
    }

    #[test]
    fn two_model_hand_selection() {
        // K·structural/n = 10 per unit of dimension.
        let s = hand_sample();
        let c = haar_models(8);
        let spec = PenaltySpec::custom(1.0, 20.0, 2).unwrap();
        let r = select(&s, &c, &spec).unwrap();
        // dim 2: −1 + 20; dim 4: coefficients (√2/2, √2/2, −√2/2, −√2/2) → −2 + 40
        assert!((r.per_model[0].criterion - 19.0).abs() < 1e-14);
        assert!((r.per_model[1].contrast + 2.0).abs() < 1e-14);
        assert!((r.per_model[1].criterion - 38.0).abs() < 1e-14);
        assert_eq!(r.selected_dim(), 2);
    }

    #[test]
    fn ties_go_to_the_smaller_model() {
        assert_eq!(argmin_smallest(&[1.0, 1.0, 2.0]), Some(0));
        assert_eq!(argmin_smallest(&[1.0, 1.0 - 1e-13, 2.0]), Some(0));
        assert_eq!(argmin_smallest(&[1.0, 1.0 - 1e-11]), Some(1));
        assert_eq!(argmin_smallest(&[]), None);
        // {0.125, 0.375, 0.625, 0.875}: level-1 coefficients vanish, so with
        // zero penalty both criteria are −1 and the smaller model wins.
        let s = Sample::new(vec![0.125, 0.375, 0.625, 0.875]).unwrap();
        let c = ModelCollection::from_parts(
            BasisSystem::haar(),
            haar_models(8).models().to_vec(),
            8,
        );
        let spec = PenaltySpec::custom(1.0, 1e-300, 4).unwrap();
        let r = select(&s, &c, &spec).unwrap();
        assert_eq!(r.per_model[0].contrast, r.per_model[1].contrast);
        assert_eq!(r.selected_dim(), 2);
    }

    #[test]
    fn plse_evaluation() {
        let h = BasisSystem::haar();
        let s = hand_sample();
        let c = haar_models(8);
        let spec = PenaltySpec::custom(1.0, 1e-9, 2).unwrap();
        let r = select(&s, &c, &spec).unwrap();
        assert_eq!(r.selected_dim(), 4);
        // ŝ(0.1) = (√2/2)·√2 + (−√2/2)·√2 = 0 (hand expansion)
        assert!(evaluate_plse(&r, &h, 0.1).unwrap().abs() < 1e-15);
        // ŝ(0.3) = ŝ(0.8) = 1 + 1 = 2, ŝ(0.6) = 1 − 1 = 0
        assert!((evaluate_plse(&r, &h, 0.3).unwrap() - 2.0).abs() < 1e-15);
        assert!((evaluate_plse(&r, &h, 0.8).unwrap() - 2.0).abs() < 1e-15);
        assert!(evaluate_plse(&r, &h, 0.6).unwrap().abs() < 1e-15);

        let mut single = r.clone();
        single.plse = ProjectionEstimate::from_parts(
            0,
            vec![BasisFunctionIndex::new(0, 0)],
            vec![1.0 / SQRT_2],
            1,
        );
        assert!((evaluate_plse(&single, &h, 0.25).unwrap() - 1.0).abs() < 1e-15);
        single.plse.coefficients = vec![0.0];
        assert_eq!(evaluate_plse(&single, &h, 0.25).unwrap(), 0.0);
    }

    #[test]
    fn v_statistic_vanishes_when_empirical_equals_truth() {
        let h = BasisSystem::haar();
        let m0 = haar_models(8).models()[0].clone();
        let v = v_statistic(&hand_sample(), &m0, &DensityHandle::uniform(), &h).unwrap();
        assert!(v.abs() < 1e-30);
    }

    #[test]
    fn report_shape() {
        let s = hand_sample();
        let c = haar_models(8);
        let r = select(&s, &c, &PenaltySpec::custom(1.0, 20.0, 2).unwrap()).unwrap();
        let json = serde_json::to_value(r.report()).unwrap();
        assert_eq!(json["selected_dim"], 2);
        assert_eq!(json["table"].as_array().unwrap().len(), 2);
        assert_eq!(json["coefficients"][1]["k"], 1);
    }
}
