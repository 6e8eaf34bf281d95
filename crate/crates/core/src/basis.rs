//! Orthonormal systems on `[0, 1]`: Haar wavelets, trigonometric functions and
//! piecewise polynomials (as an Alpert-style multiwavelet hierarchy so that
//! nested models are nested index sets).
//!
//! Every function is evaluated on right-open intervals; `x = 1` is the left
//! limit.

use std::collections::HashSet;
use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::DensityHandle;
use crate::error::{Error, Result};
use crate::numeric::{integrate, integrate_piecewise};

/// Absolute tolerance for quadrature-based coefficients.
pub const COEFFICIENT_TOL: f64 = 1e-10;

/// Largest supported polynomial order for the piecewise-polynomial system.
pub const MAX_POLYNOMIAL_ORDER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisFunctionIndex {
    /// Level; 0 is the scaling level.
    pub j: u32,
    /// Translation (or, for the trigonometric system, 0 = constant, 1 = cos, 2 = sin).
    pub k: i64,
}

impl BasisFunctionIndex {
    pub const fn new(j: u32, k: i64) -> Self {
        Self { j, k }
    }
}

impl fmt::Display for BasisFunctionIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.j, self.k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    HaarWavelet,
    Trigonometric,
    /// Polynomials of degree `< order` on each dyadic cell.
    PiecewisePolynomial { order: usize },
}

impl BasisKind {
    pub fn name(&self) -> &'static str {
        match self {
            BasisKind::HaarWavelet => "haar",
            BasisKind::Trigonometric => "trigonometric",
            BasisKind::PiecewisePolynomial { .. } => "piecewise_polynomial",
        }
    }
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisKind::PiecewisePolynomial { order } => write!(f, "piecewise:{order}"),
            other => f.write_str(other.name()),
        }
    }
}

impl std::str::FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "haar" || s == "wavelet" => Ok(BasisKind::HaarWavelet),
            None if s == "trigonometric" || s == "trig" => Ok(BasisKind::Trigonometric),
            Some(("piecewise", order)) => order
                .parse()
                .map(|order| BasisKind::PiecewisePolynomial { order })
                .map_err(|_| Error::Config(format!("bad polynomial order '{order}'"))),
            _ => Err(Error::Config(format!("unknown basis '{s}'"))),
        }
    }
}

/// Support of the scaling function and mother wavelet, `[A₁, A₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportConstants {
    pub a1: i64,
    pub a2: i64,
    /// A = A₂ − A₁
    pub a: i64,
}

/// Sup-norm, bounded-variation and Lipschitz constants, plus the [M2]
/// constant Φ of the full collection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormConstants {
    pub phi: f64,
    pub k_inf: f64,
    pub k_bv: f64,
    pub k_l: Option<f64>,
}

/// An immutable orthonormal system on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct BasisSystem {
    kind: BasisKind,
    support: Option<SupportConstants>,
    norms: NormConstants,
    multiwavelet: Option<Arc<Multiwavelet>>,
}

impl BasisSystem {
    /// Haar system: φ = 1_{[0,1)}, ψ = 1_{[0,1/2)} − 1_{[1/2,1)}.
    pub fn haar() -> Self {
        Self {
            kind: BasisKind::HaarWavelet,
            support: Some(SupportConstants { a1: 0, a2: 1, a: 1 }),
            norms: NormConstants {
                phi: 1.0,
                k_inf: 1.0,
                k_bv: 2.0,
                k_l: None,
            },
            multiwavelet: None,
        }
    }

    /// 1, √2 cos(2πjx), √2 sin(2πjx).
    pub fn trigonometric() -> Self {
        Self {
            kind: BasisKind::Trigonometric,
            support: None,
            norms: NormConstants {
                phi: 1.0,
                k_inf: SQRT_2,
                k_bv: 2.0 * SQRT_2,
                k_l: Some(2.0 * SQRT_2 * PI),
            },
            multiwavelet: None,
        }
    }

    /// Piecewise polynomials of degree `< order` on dyadic partitions.
    pub fn piecewise_polynomial(order: usize) -> Result<Self> {
        if order == 0 || order > MAX_POLYNOMIAL_ORDER {
            return Err(Error::Config(format!(
                "polynomial order must be in 1..={MAX_POLYNOMIAL_ORDER}, got {order}"
            )));
        }
        let mw = Multiwavelet::new(order)?;
        let (k_inf, k_bv) = mw.norm_bounds();
        Ok(Self {
            kind: BasisKind::PiecewisePolynomial { order },
            support: None,
            norms: NormConstants {
                phi: (order as f64).sqrt(),
                k_inf,
                k_bv,
                k_l: None,
            },
            multiwavelet: Some(Arc::new(mw)),
        })
    }

    pub fn from_kind(kind: BasisKind) -> Result<Self> {
        match kind {
            BasisKind::HaarWavelet => Ok(Self::haar()),
            BasisKind::Trigonometric => Ok(Self::trigonometric()),
            BasisKind::PiecewisePolynomial { order } => Self::piecewise_polynomial(order),
        }
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    /// Wavelet support constants; `None` for non-wavelet systems.
    pub fn support_constants(&self) -> Option<SupportConstants> {
        self.support
    }

    pub fn norm_constants(&self) -> NormConstants {
        self.norms
    }

    /// Number of functions at level `j`.
    pub fn level_size(&self, j: u32) -> usize {
        match self.kind {
            BasisKind::HaarWavelet => {
                if j == 0 {
                    2
                } else {
                    1usize << j
                }
            }
            BasisKind::Trigonometric => {
                if j == 0 {
                    1
                } else {
                    2
                }
            }
            BasisKind::PiecewisePolynomial { order } => {
                if j == 0 {
                    order
                } else {
                    order << (j - 1)
                }
            }
        }
    }

    /// Indices at level `j`, in increasing `k`.
    pub fn level_indices(&self, j: u32) -> Vec<BasisFunctionIndex> {
        match self.kind {
            BasisKind::Trigonometric if j == 0 => vec![BasisFunctionIndex::new(0, 0)],
            BasisKind::Trigonometric => {
                vec![BasisFunctionIndex::new(j, 1), BasisFunctionIndex::new(j, 2)]
            }
            _ => (0..self.level_size(j) as i64)
                .map(|k| BasisFunctionIndex::new(j, k))
                .collect(),
        }
    }

    pub fn is_valid(&self, idx: BasisFunctionIndex) -> bool {
        match self.kind {
            BasisKind::Trigonometric => {
                if idx.j == 0 {
                    idx.k == 0
                } else {
                    idx.k == 1 || idx.k == 2
                }
            }
            _ => idx.j < 62 && idx.k >= 0 && (idx.k as usize) < self.level_size(idx.j),
        }
    }

    fn check(&self, idx: BasisFunctionIndex) -> Result<()> {
        if self.is_valid(idx) {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                basis: self.kind.name(),
                index: idx,
            })
        }
    }

    /// Closed support interval `[a, b]` of ψ_{j,k} (as a subset of `[0, 1]`).
    pub fn support(&self, idx: BasisFunctionIndex) -> Result<(f64, f64)> {
        self.check(idx)?;
        Ok(match self.kind {
            BasisKind::HaarWavelet => {
                if idx.j == 0 {
                    (idx.k as f64 * 0.5, (idx.k + 1) as f64 * 0.5)
                } else {
                    let w = (-(idx.j as f64)).exp2();
                    (idx.k as f64 * w, (idx.k + 1) as f64 * w)
                }
            }
            BasisKind::Trigonometric => (0.0, 1.0),
            BasisKind::PiecewisePolynomial { order } => {
                if idx.j == 0 {
                    (0.0, 1.0)
                } else {
                    let w = (-((idx.j - 1) as f64)).exp2();
                    let cell = idx.k as usize / order;
                    (cell as f64 * w, (cell + 1) as f64 * w)
                }
            }
        })
    }

    /// ψ_{j,k}(x) for `x ∈ [0, 1]`.
    pub fn evaluate(&self, idx: BasisFunctionIndex, x: f64) -> Result<f64> {
        self.check(idx)?;
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("evaluation point {x} outside [0, 1]")));
        }
        Ok(self.evaluate_unchecked(idx, x))
    }

    pub(crate) fn evaluate_unchecked(&self, idx: BasisFunctionIndex, x: f64) -> f64 {
        match self.kind {
            BasisKind::HaarWavelet => haar_value(idx, x),
            BasisKind::Trigonometric => {
                let arg = 2.0 * PI * idx.j as f64 * x;
                match idx.k {
                    0 => 1.0,
                    1 => SQRT_2 * arg.cos(),
                    _ => SQRT_2 * arg.sin(),
                }
            }
            BasisKind::PiecewisePolynomial { order } => {
                let mw = self.multiwavelet.as_ref().expect("multiwavelet tables");
                if idx.j == 0 {
                    return legendre(idx.k as usize, x.min(1.0));
                }
                let level = idx.j - 1;
                let cells = 1u64 << level;
                let cell = idx.k as u64 / order as u64;
                let i = idx.k as usize % order;
                let scaled = x * cells as f64;
                let here = (scaled.floor() as u64).min(cells - 1);
                if here != cell {
                    return 0.0;
                }
                // left limit at the right end of the unit interval
                let t = if x >= 1.0 { 1.0 } else { scaled - cell as f64 };
                dyadic_scale(level) * mw.mother(i, t)
            }
        }
    }

    /// Points inside `[0, 1]` where ψ_{j,k} may be discontinuous or kinked.
    fn breakpoints(&self, idx: BasisFunctionIndex) -> Vec<f64> {
        match self.kind {
            BasisKind::Trigonometric => {
                (1..idx.j.min(4096)).map(|i| i as f64 / idx.j as f64).collect()
            }
            _ => {
                let (a, b) = self.support(idx).expect("validated index");
                vec![a, 0.5 * (a + b), b]
            }
        }
    }

    /// Φ = sqrt(‖Σ_{(j,k)∈m} ψ²_{j,k}‖∞ / D_m).
    ///
    /// Exact for Haar (the sum is constant on the finest dyadic cells of the
    /// model). Other systems take the supremum over a dyadic grid of step at
    /// most 2^{-(J+4)}.
    pub fn compute_phi(&self, model: &[BasisFunctionIndex]) -> Result<f64> {
        if model.is_empty() {
            return Err(Error::Domain("Φ of an empty model".into()));
        }
        for &idx in model {
            self.check(idx)?;
        }
        let dim = model.len() as f64;
        let sup = match self.kind {
            BasisKind::HaarWavelet => {
                let top = model.iter().map(|i| i.j).max().unwrap_or(0);
                let cells = 1usize << (top + 1);
                let mut sums = vec![0.0f64; cells];
                for &idx in model {
                    let (a, b) = self.support(idx)?;
                    let lo = (a * cells as f64) as usize;
                    let hi = (b * cells as f64) as usize;
                    let square = if idx.j == 0 { 2.0 } else { (idx.j as f64).exp2() };
                    for s in &mut sums[lo..hi] {
                        *s += square;
                    }
                }
                sums.into_iter().fold(0.0, f64::max)
            }
            BasisKind::Trigonometric => {
                let top = model.iter().map(|i| i.j).max().unwrap_or(0).max(1);
                let bits = 64 - (top as u64 - 1).leading_zeros() + 4;
                self.grid_sup(model, bits)
            }
            BasisKind::PiecewisePolynomial { .. } => {
                let top = model.iter().map(|i| i.j).max().unwrap_or(0);
                self.grid_sup(model, top + 4)
            }
        };
        Ok((sup / dim).sqrt())
    }

    fn grid_sup(&self, model: &[BasisFunctionIndex], bits: u32) -> f64 {
        let points = 1usize << bits;
        let members: HashSet<BasisFunctionIndex> = model.iter().copied().collect();
        let mut levels: Vec<u32> = model.iter().map(|i| i.j).collect();
        levels.sort_unstable();
        levels.dedup();
        let mut sup = 0.0f64;
        for p in 0..=points {
            let x = p as f64 / points as f64;
            let total: f64 = match self.kind {
                BasisKind::PiecewisePolynomial { order } => levels
                    .iter()
                    .flat_map(|&j| self.active_at(j, x, order))
                    .filter(|idx| members.contains(idx))
                    .map(|idx| self.evaluate_unchecked(idx, x).powi(2))
                    .sum(),
                _ => model
                    .iter()
                    .map(|&idx| self.evaluate_unchecked(idx, x).powi(2))
                    .sum(),
            };
            sup = sup.max(total);
        }
        sup
    }

    fn active_at(&self, j: u32, x: f64, order: usize) -> Vec<BasisFunctionIndex> {
        let cell = if j == 0 {
            0
        } else {
            let cells = 1u64 << (j - 1);
            ((x * cells as f64).floor() as u64).min(cells - 1)
        };
        (0..order)
            .map(|i| BasisFunctionIndex::new(j, (cell as usize * order + i) as i64))
            .collect()
    }

    /// Pψ_{j,k} = ∫ ψ_{j,k} s dμ.
    ///
    /// Closed form through the distribution function for Haar; adaptive
    /// quadrature at absolute tolerance 1e-10 otherwise.
    pub fn true_coefficient(&self, idx: BasisFunctionIndex, density: &DensityHandle) -> Result<f64> {
        self.check(idx)?;
        if self.kind == BasisKind::HaarWavelet {
            let (a, b) = self.support(idx)?;
            let mid = 0.5 * (a + b);
            return Ok(if idx.j == 0 {
                SQRT_2 * density.mass(a, b)
            } else {
                dyadic_scale(idx.j) * (density.mass(a, mid) - density.mass(mid, b))
            });
        }
        let (a, b) = self.support(idx)?;
        let mut breaks = self.breakpoints(idx);
        breaks.extend(density.breakpoints());
        integrate_piecewise(
            |x| self.evaluate_unchecked(idx, x) * density.pdf(x),
            a,
            b,
            &breaks,
            COEFFICIENT_TOL,
        )
    }
}

/// 2^{j/2}, exact for even `j`.
pub(crate) fn dyadic_scale(j: u32) -> f64 {
    let half = ((j / 2) as f64).exp2();
    if j.is_multiple_of(2) {
        half
    } else {
        SQRT_2 * half
    }
}

fn haar_value(idx: BasisFunctionIndex, x: f64) -> f64 {
    // Half-cell index at resolution 2^{j+1}; the scaling level uses halves of [0,1].
    let cells = 1u64 << (idx.j + 1);
    let cell = ((x * cells as f64).floor() as u64).min(cells - 1);
    if idx.j == 0 {
        return if cell == idx.k as u64 { SQRT_2 } else { 0.0 };
    }
    if cell / 2 != idx.k as u64 {
        return 0.0;
    }
    let v = dyadic_scale(idx.j);
    if cell.is_multiple_of(2) {
        v
    } else {
        -v
    }
}

/// Orthonormal Legendre polynomial of degree `i` on `[0, 1]`.
fn legendre(i: usize, x: f64) -> f64 {
    let t = 2.0 * x - 1.0;
    let (mut prev, mut cur) = (1.0, t);
    let p = match i {
        0 => 1.0,
        _ => {
            for n in 1..i {
                let next = ((2 * n + 1) as f64 * t * cur - n as f64 * prev) / (n + 1) as f64;
                prev = cur;
                cur = next;
            }
            cur
        }
    };
    ((2 * i + 1) as f64).sqrt() * p
}

/// Mother multiwavelets of a given order: piecewise polynomials on the two
/// halves of `[0, 1)` orthogonal to all polynomials of degree `< order`.
#[derive(Debug)]
struct Multiwavelet {
    order: usize,
    /// `order` rows of `2 * order` coefficients over the half-cell Legendre basis.
    rows: Vec<Vec<f64>>,
}

impl Multiwavelet {
    fn new(order: usize) -> Result<Self> {
        let dim = 2 * order;
        // Coarse Legendre functions expressed on the half-cell basis.
        let mut coarse = Vec::with_capacity(order);
        for i in 0..order {
            let mut row = vec![0.0; dim];
            for l in 0..order {
                row[l] = integrate(
                    |x| legendre(i, x) * SQRT_2 * legendre(l, 2.0 * x),
                    0.0,
                    0.5,
                    1e-14,
                )?;
                row[order + l] = integrate(
                    |x| legendre(i, x) * SQRT_2 * legendre(l, 2.0 * x - 1.0),
                    0.5,
                    1.0,
                    1e-14,
                )?;
            }
            coarse.push(row);
        }
        let mut basis = coarse.clone();
        let mut rows = Vec::with_capacity(order);
        for e in 0..dim {
            if rows.len() == order {
                break;
            }
            let mut v = vec![0.0; dim];
            v[e] = 1.0;
            for _ in 0..2 {
                for b in &basis {
                    let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                    for (x, y) in v.iter_mut().zip(b) {
                        *x -= proj * y;
                    }
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-6 {
                v.iter_mut().for_each(|x| *x /= norm);
                basis.push(v.clone());
                rows.push(v);
            }
        }
        Ok(Self { order, rows })
    }

    fn mother(&self, i: usize, t: f64) -> f64 {
        let row = &self.rows[i];
        let (offset, u) = if t < 0.5 {
            (0, 2.0 * t)
        } else {
            (self.order, 2.0 * t - 1.0)
        };
        (0..self.order)
            .map(|l| row[offset + l] * SQRT_2 * legendre(l, u))
            .sum()
    }

    /// (K∞, K_BV) over scaling and mother functions, on a 2^{-12} grid.
    fn norm_bounds(&self) -> (f64, f64) {
        let mut k_inf = 0.0f64;
        let mut k_bv = 0.0f64;
        let grid: Vec<f64> = (0..=4096).map(|p| p as f64 / 4096.0).collect();
        for i in 0..self.order {
            let scaling: Vec<f64> = grid.iter().map(|&x| legendre(i, x)).collect();
            let mother: Vec<f64> = grid
                .iter()
                .map(|&x| self.mother(i, x.min(1.0 - f64::EPSILON)) / SQRT_2)
                .collect();
            for values in [scaling, mother] {
                let max = values.iter().copied().fold(0.0, f64::max);
                let min = values.iter().copied().fold(0.0, f64::min);
                k_inf = k_inf.max(max).max(-min);
                k_bv = k_bv.max(max - min);
            }
        }
        (k_inf, k_bv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::integrate_piecewise;

    const I00: BasisFunctionIndex = BasisFunctionIndex::new(0, 0);
    const I10: BasisFunctionIndex = BasisFunctionIndex::new(1, 0);

    fn model(basis: &BasisSystem, top: u32) -> Vec<BasisFunctionIndex> {
        (0..=top).flat_map(|j| basis.level_indices(j)).collect()
    }

    #[test]
    fn haar_point_values() {
        let h = BasisSystem::haar();
        assert_eq!(h.evaluate(I00, 0.25).unwrap(), SQRT_2);
        assert_eq!(h.evaluate(I10, 0.25).unwrap(), -SQRT_2);
        assert_eq!(h.evaluate(I10, 0.75).unwrap(), 0.0);
        assert_eq!(h.evaluate(I10, 0.1).unwrap(), SQRT_2);
        assert_eq!(h.evaluate(BasisFunctionIndex::new(0, 1), 1.0).unwrap(), SQRT_2);
        assert_eq!(h.evaluate(BasisFunctionIndex::new(3, 7), 1.0).unwrap(), -(8f64.sqrt()));
        assert_eq!(h.evaluate(BasisFunctionIndex::new(2, 1), 0.25).unwrap(), 2.0);
    }

    #[test]
    fn trig_point_values() {
        let t = BasisSystem::trigonometric();
        // orthonormal normalisation: √2 cos(2πjx)
        assert_eq!(t.evaluate(BasisFunctionIndex::new(1, 1), 0.0).unwrap(), SQRT_2);
        assert_eq!(t.evaluate(I00, 0.3).unwrap(), 1.0);
        assert!(t.evaluate(BasisFunctionIndex::new(1, 2), 0.25).unwrap() - SQRT_2 < 1e-15);
    }

    #[test]
    fn invalid_indices_are_rejected() {
        let h = BasisSystem::haar();
        for idx in [
            BasisFunctionIndex::new(0, 2),
            BasisFunctionIndex::new(1, 2),
            BasisFunctionIndex::new(3, -1),
        ] {
            assert!(matches!(h.evaluate(idx, 0.5), Err(Error::IndexOutOfRange { .. })));
        }
        let t = BasisSystem::trigonometric();
        assert!(t.evaluate(BasisFunctionIndex::new(0, 1), 0.5).is_err());
        assert!(t.evaluate(BasisFunctionIndex::new(2, 3), 0.5).is_err());
        assert!(h.evaluate(I00, 1.5).is_err());
    }

    fn gram_error(basis: &BasisSystem, indices: &[BasisFunctionIndex]) -> f64 {
        let mut worst = 0.0f64;
        for (a, &p) in indices.iter().enumerate() {
            for &q in &indices[a..] {
                let mut breaks = basis.breakpoints(p);
                breaks.extend(basis.breakpoints(q));
                let ip = integrate_piecewise(
                    |x| basis.evaluate_unchecked(p, x) * basis.evaluate_unchecked(q, x),
                    0.0,
                    1.0,
                    &breaks,
                    1e-13,
                )
                .unwrap();
                let target = if p == q { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).abs());
            }
        }
        worst
    }

    #[test]
    fn gram_matrices_are_identity() {
        let h = BasisSystem::haar();
        assert!(gram_error(&h, &model(&h, 3)) < 1e-12);
        let t = BasisSystem::trigonometric();
        assert!(gram_error(&t, &model(&t, 6)) < 1e-10);
        for order in 1..=4 {
            let p = BasisSystem::piecewise_polynomial(order).unwrap();
            assert!(gram_error(&p, &model(&p, 3)) < 1e-10, "order {order}");
        }
    }

    #[test]
    fn order_one_polynomials_are_haar_shaped() {
        let p = BasisSystem::piecewise_polynomial(1).unwrap();
        assert!((p.evaluate(BasisFunctionIndex::new(1, 0), 0.2).unwrap() - 1.0).abs() < 1e-14);
        assert!((p.evaluate(BasisFunctionIndex::new(1, 0), 0.7).unwrap() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn phi_for_haar_models_is_one() {
        let h = BasisSystem::haar();
        for top in 0..10 {
            assert_eq!(h.compute_phi(&model(&h, top)).unwrap(), 1.0);
        }
        assert_eq!(h.compute_phi(&[I00]).unwrap(), SQRT_2);
        assert!(h.compute_phi(&[]).is_err());
    }

    #[test]
    fn phi_on_grid_matches_pointwise_sum() {
        // Exhaustive dyadic-grid evaluation of Σψ² for Haar equals D pointwise.
        let h = BasisSystem::haar();
        let m = model(&h, 5);
        for p in 0..=512 {
            let x = p as f64 / 512.0;
            let s: f64 = m.iter().map(|&i| h.evaluate_unchecked(i, x).powi(2)).sum();
            assert_eq!(s, m.len() as f64);
        }
        let t = BasisSystem::trigonometric();
        for top in [1, 3, 7] {
            let phi = t.compute_phi(&model(&t, top)).unwrap();
            assert!((phi - 1.0).abs() < 1e-12);
        }
        for order in 1..=3 {
            let p = BasisSystem::piecewise_polynomial(order).unwrap();
            let phi = p.compute_phi(&model(&p, 3)).unwrap();
            assert!((phi - (order as f64).sqrt()).abs() < 1e-9, "order {order}: {phi}");
        }
    }

    #[test]
    fn haar_coefficients_of_reference_densities() {
        let h = BasisSystem::haar();
        let u = DensityHandle::uniform();
        assert!((h.true_coefficient(I00, &u).unwrap() - 1.0 / SQRT_2).abs() < 1e-15);
        let lin = DensityHandle::linear();
        for j in 1..12u32 {
            for k in [0, (1i64 << j) / 3, (1i64 << j) - 1] {
                let idx = BasisFunctionIndex::new(j, k);
                assert_eq!(h.true_coefficient(idx, &u).unwrap(), 0.0);
                let expected = -(-1.5 * j as f64).exp2() / 2.0;
                let got = h.true_coefficient(idx, &lin).unwrap();
                assert!((got - expected).abs() < 1e-15 * (1 << j) as f64, "{idx}");
            }
        }
    }

    #[test]
    fn closed_form_coefficients_agree_with_quadrature() {
        let h = BasisSystem::haar();
        let densities: Vec<DensityHandle> = vec![
            DensityHandle::linear(),
            "poly:0,6,-6".parse().unwrap(),
            "steps:0.3;0.5,1.2142857142857142".parse().unwrap(),
        ];
        for d in &densities {
            for j in 0..6u32 {
                for idx in h.level_indices(j) {
                    let mut breaks = h.breakpoints(idx);
                    breaks.extend(d.breakpoints());
                    let q = integrate_piecewise(
                        |x| h.evaluate_unchecked(idx, x) * d.pdf(x),
                        0.0,
                        1.0,
                        &breaks,
                        1e-13,
                    )
                    .unwrap();
                    assert!((q - h.true_coefficient(idx, d).unwrap()).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn trig_coefficients_by_quadrature() {
        let t = BasisSystem::trigonometric();
        // ∫ √2 cos(2πx)·2x dx = 0, ∫ √2 sin(2πx)·2x dx = -√2/π
        let lin = DensityHandle::linear();
        let c = t.true_coefficient(BasisFunctionIndex::new(1, 1), &lin).unwrap();
        let s = t.true_coefficient(BasisFunctionIndex::new(1, 2), &lin).unwrap();
        assert!(c.abs() < 1e-10);
        assert!((s + SQRT_2 / PI).abs() < 1e-10);
    }

    #[test]
    fn wavelet_constant_bounds_on_dyadic_grid() {
        // K∞ and the (inf) sum bound hold for the detail levels; BV is the
        // largest jump of the function (oscillation form of the seminorm).
        let h = BasisSystem::haar();
        let NormConstants { k_inf, k_bv, .. } = h.norm_constants();
        let a = h.support_constants().unwrap().a as f64;
        let grid = 1usize << 16;
        for j in 1..=12u32 {
            let bound = dyadic_scale(j);
            let mut sum_sup = 0.0f64;
            for idx in h.level_indices(j).into_iter().step_by(((1usize << j) / 8).max(1)) {
                let (lo, hi) = h.support(idx).unwrap();
                let (mut max, mut min) = (0.0f64, 0.0f64);
                let start = (lo * grid as f64) as usize;
                let end = (hi * grid as f64) as usize;
                for p in start..end {
                    let v = h.evaluate_unchecked(idx, p as f64 / grid as f64);
                    max = max.max(v);
                    min = min.min(v);
                }
                assert!(max.max(-min) <= k_inf * bound);
                assert!(max - min <= k_bv * bound);
            }
            for p in (0..=grid).step_by(61) {
                let x = p as f64 / grid as f64;
                let s: f64 = h
                    .level_indices(j)
                    .iter()
                    .map(|&i| h.evaluate_unchecked(i, x).abs())
                    .sum();
                sum_sup = sum_sup.max(s);
            }
            assert!(sum_sup <= a * k_inf * bound);
        }
        // Scaling level: sup |ψ_{0,k}| = √2, jump √2 ≤ K_BV.
        assert_eq!(h.evaluate_unchecked(I00, 0.1), SQRT_2);
        assert!(SQRT_2 <= k_bv);
    }
}
