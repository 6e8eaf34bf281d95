//! Nested model collections: dyadic wavelet spaces, trigonometric spaces and
//! piecewise polynomials on dyadic partitions.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::basis::{BasisFunctionIndex, BasisKind, BasisSystem};
use crate::error::{Error, Result};

/// One model m ⊂ Λ of a nested collection.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelIndexSet {
    /// Position in the chain (0 = smallest).
    pub id: usize,
    /// Indices in increasing (j, k) order.
    pub indices: Vec<BasisFunctionIndex>,
    /// Resolution parameter J_m.
    pub resolution: u32,
}

impl ModelIndexSet {
    pub fn new(id: usize, indices: Vec<BasisFunctionIndex>, resolution: u32) -> Self {
        Self {
            id,
            indices,
            resolution,
        }
    }

    /// D_m
    pub fn dimension(&self) -> usize {
        self.indices.len()
    }

    pub fn is_subset_of(&self, other: &ModelIndexSet) -> bool {
        if other.indices.starts_with(&self.indices) {
            return true;
        }
        let set: HashSet<_> = other.indices.iter().collect();
        self.indices.iter().all(|i| set.contains(i))
    }
}

/// JSON descriptor used in experiment manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionDescriptor {
    pub basis_kind: String,
    pub n: usize,
    pub dims: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ModelCollection {
    basis: BasisSystem,
    models: Vec<ModelIndexSet>,
    n: usize,
    max_resolution: u32,
}

impl ModelCollection {
    /// Builds the nested collection for sample size `n` (requires `n ≥ 8`).
    ///
    /// * Haar: J_n = ⌊log₂(n / 2(A+1))⌋ and models J_m = 0..=J_n with
    ///   D_m = (A−1)(J_m+1) + 2^{J_m+1}.
    /// * Trigonometric: D_m = 2J_m + 1 ≤ n.
    /// * Piecewise polynomial of order r: r·2^{J_m} functions on 2^{J_m}
    ///   dyadic cells, D_m ≥ 2 and D_m ≤ n.
    pub fn build(basis: &BasisSystem, n: usize) -> Result<Self> {
        if n < 8 {
            return Err(Error::Config(format!(
                "sample size {n} too small for any model (need n >= 8)"
            )));
        }
        let (first, last) = match basis.kind() {
            BasisKind::HaarWavelet => {
                let a = basis.support_constants().map_or(1, |s| s.a) as usize;
                let budget = n / (2 * (a + 1));
                (0, budget.ilog2())
            }
            BasisKind::Trigonometric => (1, ((n - 1) / 2) as u32),
            BasisKind::PiecewisePolynomial { order } => {
                let first = if order >= 2 { 0 } else { 1 };
                (first, (n / order).ilog2())
            }
        };
        let mut models = Vec::new();
        let mut indices: Vec<BasisFunctionIndex> = Vec::new();
        for j in 0..first {
            indices.extend(basis.level_indices(j));
        }
        for resolution in first..=last {
            indices.extend(basis.level_indices(resolution));
            models.push(ModelIndexSet::new(models.len(), indices.clone(), resolution));
        }
        Ok(Self {
            basis: basis.clone(),
            models,
            n,
            max_resolution: last,
        })
    }

    /// Assembles a collection without any validation (for diagnostics).
    pub fn from_parts(basis: BasisSystem, models: Vec<ModelIndexSet>, n: usize) -> Self {
        let max_resolution = models.iter().map(|m| m.resolution).max().unwrap_or(0);
        Self {
            basis,
            models,
            n,
            max_resolution,
        }
    }

    pub fn basis(&self) -> &BasisSystem {
        &self.basis
    }

    pub fn models(&self) -> &[ModelIndexSet] {
        &self.models
    }

    pub fn model(&self, id: usize) -> Option<&ModelIndexSet> {
        self.models.get(id)
    }

    pub fn largest(&self) -> Option<&ModelIndexSet> {
        self.models.last()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// J_n
    pub fn max_resolution(&self) -> u32 {
        self.max_resolution
    }

    /// N_n = max D_m
    pub fn max_dimension(&self) -> usize {
        self.models.iter().map(|m| m.dimension()).max().unwrap_or(0)
    }

    pub fn dimensions(&self) -> Vec<usize> {
        self.models.iter().map(|m| m.dimension()).collect()
    }

    /// [M1] (2 ≤ D_m, N_n ≤ n), [M2] (finite Φ) and [M3] (consecutive inclusion).
    pub fn nesting_check(&self) -> bool {
        if self.models.is_empty() {
            return false;
        }
        let m1 = self.models.iter().all(|m| m.dimension() >= 2) && self.max_dimension() <= self.n;
        let valid = self
            .models
            .iter()
            .all(|m| m.indices.iter().all(|&i| self.basis.is_valid(i)));
        let m3 = self.models.windows(2).all(|w| {
            w[0].dimension() < w[1].dimension() && w[0].is_subset_of(&w[1])
        });
        if !(m1 && valid && m3) {
            return false;
        }
        // With nested models, Φ over sums of two models is Φ of the larger one.
        match self.basis.kind() {
            BasisKind::HaarWavelet => self
                .largest()
                .map(|m| self.basis.compute_phi(&m.indices))
                .is_some_and(|phi| phi.is_ok_and(f64::is_finite)),
            _ => self.basis.norm_constants().phi.is_finite(),
        }
    }

    pub fn descriptor(&self) -> CollectionDescriptor {
        CollectionDescriptor {
            basis_kind: self.basis.kind().to_string(),
            n: self.n,
            dims: self.dimensions(),
        }
    }
}
