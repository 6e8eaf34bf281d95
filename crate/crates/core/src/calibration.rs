//! Mixing-rate descriptors, the penalty constants derived from them, and the
//! dimension-jump (slope heuristic) calibration of K.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::BasisSystem;
use crate::error::{Error, Result};
use crate::estimator::argmin_smallest;
use crate::numeric::{compensated_sum, power_tail};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixingFamily {
    Beta,
    Tau,
    BetaTilde,
}

/// Decay of the coefficient bound in the lag k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MixingDecay {
    /// (1+k)^{−(1+θ)}
    Arithmetic { theta: f64 },
    /// e^{−θk}
    Geometric { theta: f64 },
    /// Coefficients listed from lag 0; zero beyond the list.
    Explicit { values: Vec<f64> },
    /// Bound 1 at every lag.
    NonMixing,
}

/// Bound on γ_k (γ ∈ {β, τ, β̃}), `scale · decay(k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingRate {
    pub family: MixingFamily,
    pub decay: MixingDecay,
    #[serde(default = "unit")]
    pub scale: f64,
}

fn unit() -> f64 {
    1.0
}

impl MixingRate {
    pub fn arithmetic(family: MixingFamily, theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::Config(format!("arithmetic rate needs θ > 0, got {theta}")));
        }
        Ok(Self::with_decay(family, MixingDecay::Arithmetic { theta }))
    }

    pub fn geometric(family: MixingFamily, theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::Config(format!("geometric rate needs θ > 0, got {theta}")));
        }
        Ok(Self::with_decay(family, MixingDecay::Geometric { theta }))
    }

    pub fn explicit(family: MixingFamily, values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Config("mixing coefficients must be finite and non-negative".into()));
        }
        Ok(Self::with_decay(family, MixingDecay::Explicit { values }))
    }

    pub fn non_mixing(family: MixingFamily) -> Self {
        Self::with_decay(family, MixingDecay::NonMixing)
    }

    fn with_decay(family: MixingFamily, decay: MixingDecay) -> Self {
        Self {
            family,
            decay,
            scale: 1.0,
        }
    }

    pub fn scaled(mut self, scale: f64) -> Self {
        self.scale *= scale;
        self
    }

    /// Coefficient bound at `lag`.
    pub fn coefficient(&self, lag: u64) -> f64 {
        let base = match &self.decay {
            MixingDecay::Arithmetic { theta } => (1.0 + lag as f64).powf(-(1.0 + theta)),
            MixingDecay::Geometric { theta } => (-theta * lag as f64).exp(),
            MixingDecay::Explicit { values } => values.get(lag as usize).copied().unwrap_or(0.0),
            MixingDecay::NonMixing => 1.0,
        };
        self.scale * base
    }

    /// p Σ_{l≥0} l^{p−1} γ_l with 0⁰ = 1, for p ∈ {1, 2}.
    fn weighted_sum(&self, p: u32) -> Result<f64> {
        let series = match (&self.decay, p) {
            (MixingDecay::Explicit { values }, _) => compensated_sum(
                values
                    .iter()
                    .enumerate()
                    .map(|(l, v)| if p == 1 { *v } else { l as f64 * v }),
            ),
            (MixingDecay::Geometric { theta }, 1) => 1.0 / -(-theta).exp_m1(),
            (MixingDecay::Geometric { theta }, _) => {
                let q = (-theta).exp();
                q / (-(-theta).exp_m1()).powi(2)
            }
            (MixingDecay::Arithmetic { theta }, 1) => {
                power_tail(1.0 + theta, 1).map_err(|_| divergence(format!("θ > 0 (got {theta})")))?
            }
            (MixingDecay::Arithmetic { theta }, _) => {
                // Σ_l l(1+l)^{−(1+θ)} = ζ(θ) − ζ(1+θ)
                let head = power_tail(*theta, 1).map_err(|_| divergence(format!("θ > 1 (got {theta})")))?;
                head - power_tail(1.0 + theta, 1)?
            }
            (MixingDecay::NonMixing, _) => {
                return Err(divergence("coefficients decaying to zero (bound is 1 at every lag)".into()))
            }
        };
        Ok(p as f64 * self.scale * series)
    }

    /// Σ_{l≥0} γ_l.
    pub fn sum(&self) -> Result<f64> {
        self.weighted_sum(1)
    }
}

fn divergence(required: String) -> Error {
    Error::Divergence { required }
}

/// κ_p = p Σ_{l≥0} l^{p−1} β_l for p ∈ {1, 2}.
pub fn kappa(rate: &MixingRate, p: u32) -> Result<f64> {
    if rate.family != MixingFamily::Beta {
        return Err(Error::Precondition(format!(
            "κ_p is defined for β-mixing rates, got {:?}",
            rate.family
        )));
    }
    if !(p == 1 || p == 2) {
        return Err(Error::Domain(format!("κ_p needs p in {{1, 2}}, got {p}")));
    }
    rate.weighted_sum(p)
}

/// β̃_k ≤ 2‖s‖₂^{2/3} τ_k^{1/3}, applied to every lag including k = 0
/// (with τ₀ = 1 for iid sequences).
pub fn beta_tilde_from_tau(rate: &MixingRate, s_l2_norm: f64) -> Result<MixingRate> {
    if rate.family != MixingFamily::Tau {
        return Err(Error::Precondition(format!(
            "expected a τ-mixing rate, got {:?}",
            rate.family
        )));
    }
    if !(s_l2_norm > 0.0 && s_l2_norm.is_finite()) {
        return Err(Error::Domain(format!("‖s‖₂ must be positive, got {s_l2_norm}")));
    }
    let factor = 2.0 * s_l2_norm.powf(2.0 / 3.0);
    let scale = factor * rate.scale.cbrt();
    let decay = match &rate.decay {
        MixingDecay::Arithmetic { theta } => MixingDecay::Arithmetic {
            theta: (theta - 2.0) / 3.0,
        },
        MixingDecay::Geometric { theta } => MixingDecay::Geometric { theta: theta / 3.0 },
        MixingDecay::Explicit { values } => MixingDecay::Explicit {
            values: values.iter().map(|v| v.cbrt()).collect(),
        },
        MixingDecay::NonMixing => MixingDecay::NonMixing,
    };
    Ok(MixingRate {
        family: MixingFamily::BetaTilde,
        decay,
        scale,
    })
}

/// A · K∞ · K_BV · Σ_{l≥0} β̃_l, the τ-penalty factor without K.
pub fn tau_penalty_constant(rate: &MixingRate, basis: &BasisSystem, s_l2_norm: f64) -> Result<f64> {
    let support = basis.support_constants().ok_or_else(|| {
        Error::Precondition(format!(
            "the τ penalty needs a compactly supported wavelet basis, got {}",
            basis.kind()
        ))
    })?;
    let tilde = match rate.family {
        MixingFamily::Tau => {
            if let MixingDecay::Arithmetic { theta } = rate.decay {
                if theta <= 2.0 {
                    return Err(divergence(format!("arithmetic τ rate with θ > 2 (got {theta})")));
                }
            }
            beta_tilde_from_tau(rate, s_l2_norm)?
        }
        MixingFamily::BetaTilde => rate.clone(),
        MixingFamily::Beta => {
            return Err(Error::Precondition(
                "the τ penalty needs a τ or β̃ rate, got a β rate".into(),
            ))
        }
    };
    let norms = basis.norm_constants();
    Ok(support.a as f64 * norms.k_inf * norms.k_bv * tilde.sum()?)
}

/// One point of the dimension-jump path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub lambda: f64,
    pub selected_dim: usize,
}

/// Outcome of the slope heuristic.
///
/// `k_hat` is 2λ*, the calibrated penalty slope per unit of D/n; divide by a
/// structural factor with [`SlopeReport::k_for`] to obtain K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub lambda_star: f64,
    #[serde(rename = "K_hat")]
    pub k_hat: f64,
    /// Dimension selected right after the jump.
    pub jump_location: usize,
    pub path: Vec<PathPoint>,
}

impl SlopeReport {
    pub fn k_for(&self, structural: f64) -> f64 {
        self.k_hat / structural
    }
}

pub const GRID_SIZE: usize = 200;
pub const JUMP_FACTOR: f64 = 4.0;

/// Log-spaced λ grid from 1e-4/n to 1e2 · (contrast spread) · n / D_min.
pub fn default_grid(dims: &[usize], contrasts: &[f64], n: usize) -> Vec<f64> {
    let d_min = dims.iter().copied().min().unwrap_or(1).max(1) as f64;
    let (lo_c, hi_c) = contrasts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &c| (a.min(c), b.max(c)));
    let n = n as f64;
    let lo = 1e-4 / n;
    let hi = (1e2 * (hi_c - lo_c) * n / d_min).max(lo * 10.0);
    let step = (hi / lo).ln() / (GRID_SIZE - 1) as f64;
    (0..GRID_SIZE).map(|i| lo * (step * i as f64).exp()).collect()
}

fn check_inputs(dims: &[usize], contrasts: &[f64], n: usize) -> Result<()> {
    if dims.len() != contrasts.len() {
        return Err(Error::Precondition(format!(
            "{} dimensions but {} contrasts",
            dims.len(),
            contrasts.len()
        )));
    }
    if dims.len() < 5 {
        return Err(Error::Precondition(format!(
            "slope heuristic needs at least 5 models, got {}",
            dims.len()
        )));
    }
    let d_min = *dims.iter().min().unwrap();
    let d_max = *dims.iter().max().unwrap();
    if d_min == 0 || d_max < 16 * d_min {
        return Err(Error::Precondition(format!(
            "dimensions must span a factor of 16, got {d_min}..{d_max}"
        )));
    }
    if n == 0 || contrasts.iter().any(|c| !c.is_finite()) {
        return Err(Error::Precondition("contrasts must be finite and n >= 1".into()));
    }
    Ok(())
}

/// True when the contrasts lie on a line in D up to rounding.
fn is_affine(dims: &[usize], contrasts: &[f64]) -> bool {
    let m = dims.len() as f64;
    let xs: Vec<f64> = dims.iter().map(|&d| d as f64).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = contrasts.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(contrasts).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let spread = contrasts.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
        - contrasts.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let worst = xs
        .iter()
        .zip(contrasts)
        .map(|(x, y)| (y - my - slope * (x - mx)).abs())
        .fold(0.0, f64::max);
    worst <= 1e-9 * spread
}

/// Dimension-jump calibration on the default λ grid.
pub fn slope_heuristic(dims: &[usize], contrasts: &[f64], n: usize) -> Result<SlopeReport> {
    check_inputs(dims, contrasts, n)?;
    let grid = default_grid(dims, contrasts, n);
    slope_heuristic_on_grid(dims, contrasts, n, &grid)
}

/// Dimension-jump calibration on a caller-supplied increasing λ grid.
pub fn slope_heuristic_on_grid(
    dims: &[usize],
    contrasts: &[f64],
    n: usize,
    grid: &[f64],
) -> Result<SlopeReport> {
    check_inputs(dims, contrasts, n)?;
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Precondition("λ grid must be strictly increasing".into()));
    }
    let nf = n as f64;
    let path: Vec<PathPoint> = grid
        .par_iter()
        .map(|&lambda| {
            let criteria: Vec<f64> = dims
                .iter()
                .zip(contrasts)
                .map(|(&d, &c)| c + lambda * d as f64 / nf)
                .collect();
            let best = argmin_smallest(&criteria).expect("non-empty");
            PathPoint {
                lambda,
                selected_dim: dims[best],
            }
        })
        .collect();

    if is_affine(dims, contrasts) {
        return Err(Error::CalibrationInconclusive {
            reason: "contrasts are affine in the dimension; there is no elbow".into(),
            path,
        });
    }

    let mut jump: Option<(usize, usize)> = None;
    for (i, w) in path.windows(2).enumerate() {
        let drop = w[0].selected_dim.saturating_sub(w[1].selected_dim);
        if drop > 0 && jump.is_none_or(|(_, best)| drop > best) {
            jump = Some((i, drop));
        }
    }
    let Some((i, _)) = jump else {
        return Err(Error::CalibrationInconclusive {
            reason: "selected dimension never changes along the λ grid".into(),
            path,
        });
    };
    let (before, after) = (path[i].selected_dim, path[i + 1].selected_dim);
    if (before as f64) < JUMP_FACTOR * after as f64 {
        return Err(Error::CalibrationInconclusive {
            reason: format!("largest jump {before} -> {after} is below a factor of {JUMP_FACTOR}"),
            path,
        });
    }
    let lambda_star = path[i + 1].lambda;
    Ok(SlopeReport {
        lambda_star,
        k_hat: 2.0 * lambda_star,
        jump_location: after,
        path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_for_iid_is_one() {
        let iid = MixingRate::explicit(MixingFamily::Beta, vec![1.0]).unwrap();
        assert_eq!(kappa(&iid, 1).unwrap(), 1.0);
        // 0·β₀ + Σ_{l≥1} l·0
        assert_eq!(kappa(&iid, 2).unwrap(), 0.0);
    }

    #[test]
    fn kappa_geometric_against_partial_sums() {
        for &theta in &[0.1, 1.0, std::f64::consts::LN_2, 3.0] {
            let rate = MixingRate::geometric(MixingFamily::Beta, theta).unwrap();
            let brute1 = compensated_sum((0..100_000).map(|l| (-theta * l as f64).exp()));
            let brute2 =
                2.0 * compensated_sum((0..100_000).map(|l| l as f64 * (-theta * l as f64).exp()));
            assert!((kappa(&rate, 1).unwrap() - brute1).abs() < 1e-9, "θ={theta}");
            assert!((kappa(&rate, 2).unwrap() - brute2).abs() < 1e-9 * brute2.max(1.0));
        }
        let one = MixingRate::geometric(MixingFamily::Beta, 1.0).unwrap();
        assert!((kappa(&one, 1).unwrap() - 1.581_976_706_869_326_4).abs() < 1e-12);
    }

    #[test]
    fn kappa_arithmetic_and_divergence() {
        let rate = MixingRate::arithmetic(MixingFamily::Beta, 1.0).unwrap();
        let z2 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((kappa(&rate, 1).unwrap() - z2).abs() < 1e-12);
        assert!(matches!(kappa(&rate, 2), Err(Error::Divergence { .. })));
        let half = MixingRate::arithmetic(MixingFamily::Beta, 0.5).unwrap();
        let err = kappa(&half, 2).unwrap_err();
        assert!(err.to_string().contains("θ > 1"), "{err}");
        assert!(kappa(&MixingRate::non_mixing(MixingFamily::Beta), 1).is_err());
    }

    #[test]
    fn kappa_two_arithmetic_against_brute_force() {
        let theta = 2.5;
        let rate = MixingRate::arithmetic(MixingFamily::Beta, theta).unwrap();
        let n = 1_000_000u64;
        let partial =
            2.0 * compensated_sum((0..n).map(|l| l as f64 * (1.0 + l as f64).powf(-1.0 - theta)));
        // Σ_{l≥n} l(1+l)^{-(1+θ)} ≤ ∫_{n}^∞ x^{-θ} dx
        let tail = 2.0 * (n as f64).powf(1.0 - theta) / (theta - 1.0);
        let value = kappa(&rate, 2).unwrap();
        assert!(value >= partial - 1e-12 && value <= partial + tail + 1e-12);
    }

    #[test]
    fn beta_tilde_examples() {
        let andrews = MixingRate::geometric(MixingFamily::Tau, std::f64::consts::LN_2).unwrap();
        let tilde = beta_tilde_from_tau(&andrews, 1.0).unwrap();
        for k in 0..10 {
            let expected = 2.0 * (-(k as f64) / 3.0).exp2();
            assert!((tilde.coefficient(k) - expected).abs() < 1e-14);
        }
        let iid = MixingRate::explicit(MixingFamily::Tau, vec![1.0]).unwrap();
        let t = beta_tilde_from_tau(&iid, 1.0).unwrap();
        assert_eq!(t.coefficient(1), 0.0);
        assert_eq!(t.coefficient(0), 2.0);

        let ar = MixingRate::arithmetic(MixingFamily::Tau, 6.0).unwrap();
        let t = beta_tilde_from_tau(&ar, 2.0).unwrap();
        for k in [0u64, 1, 5, 100] {
            let expected = 2.0 * 2f64.powf(2.0 / 3.0) * (1.0 + k as f64).powf(-7.0 / 3.0);
            assert!((t.coefficient(k) - expected).abs() < 1e-14 * expected.max(1.0));
        }
        let brute = compensated_sum((0..1_000_000u64).map(|k| t.coefficient(k)));
        let tail = 2.0 * 2f64.powf(2.0 / 3.0) * 1e6f64.powf(-4.0 / 3.0) / (4.0 / 3.0);
        let sum = t.sum().unwrap();
        assert!(sum >= brute && sum <= brute + tail + 1e-12);
    }

    #[test]
    fn beta_tilde_rejects_beta_rates() {
        let b = MixingRate::explicit(MixingFamily::Beta, vec![1.0]).unwrap();
        assert!(beta_tilde_from_tau(&b, 1.0).is_err());
    }

    #[test]
    fn tau_constant_for_andrews_chain() {
        let andrews = MixingRate::geometric(MixingFamily::Tau, std::f64::consts::LN_2).unwrap();
        let c = tau_penalty_constant(&andrews, &BasisSystem::haar(), 1.0).unwrap();
        let closed = 4.0 / (1.0 - (-1.0f64 / 3.0).exp2());
        assert!((c - closed).abs() < 1e-12);
        assert!((c - 19.389_3).abs() < 1e-4);
    }

    #[test]
    fn tau_constant_errors() {
        let slow = MixingRate::arithmetic(MixingFamily::Tau, 1.5).unwrap();
        assert!(matches!(
            tau_penalty_constant(&slow, &BasisSystem::haar(), 1.0),
            Err(Error::Divergence { .. })
        ));
        let fine = MixingRate::arithmetic(MixingFamily::Tau, 6.0).unwrap();
        assert!(tau_penalty_constant(&fine, &BasisSystem::trigonometric(), 1.0).is_err());
        let iid = MixingRate::explicit(MixingFamily::Tau, vec![1.0]).unwrap();
        assert_eq!(tau_penalty_constant(&iid, &BasisSystem::haar(), 1.0).unwrap(), 4.0);
    }

    fn planted(n: usize, c: f64, b: f64, d0: usize, dims: &[usize]) -> Vec<f64> {
        dims.iter()
            .map(|&d| {
                let bias = if d < d0 {
                    b * (1.0 / (d * d) as f64 - 1.0 / (d0 * d0) as f64)
                } else {
                    0.0
                };
                -1.0 + bias - c * d as f64 / n as f64
            })
            .collect()
    }

    #[test]
    fn planted_slope_is_recovered() {
        let dims: Vec<usize> = (1..=9).map(|j| 1usize << j).collect();
        let contrasts = planted(4096, 3.0, 0.5, 32, &dims);
        let r = slope_heuristic(&dims, &contrasts, 4096).unwrap();
        assert!(r.lambda_star >= 1.5 && r.lambda_star <= 6.0, "{}", r.lambda_star);
        assert_eq!(r.k_hat, 2.0 * r.lambda_star);
        assert!(r.jump_location <= 32);
        assert_eq!(r.path.len(), GRID_SIZE);
    }

    #[test]
    fn affine_contrasts_are_inconclusive() {
        let dims: Vec<usize> = (1..=9).map(|j| 1usize << j).collect();
        let contrasts: Vec<f64> = dims.iter().map(|&d| -1.0 - 2.0 * d as f64 / 1000.0).collect();
        match slope_heuristic(&dims, &contrasts, 1000) {
            Err(Error::CalibrationInconclusive { path, .. }) => assert_eq!(path.len(), GRID_SIZE),
            other => panic!("expected inconclusive, got {other:?}"),
        }
    }

    #[test]
    fn small_jumps_are_inconclusive() {
        // Each doubling of D gains exactly as much as the next, so the path
        // walks down one model at a time.
        let dims: Vec<usize> = (1..=8).map(|j| 1usize << j).collect();
        let contrasts: Vec<f64> = dims.iter().map(|&d| -(d as f64).ln()).collect();
        assert!(matches!(
            slope_heuristic(&dims, &contrasts, 100),
            Err(Error::CalibrationInconclusive { .. })
        ));
    }

    #[test]
    fn preconditions() {
        let dims = [2, 4, 8, 16];
        assert!(matches!(
            slope_heuristic(&dims, &[0.0; 4], 10),
            Err(Error::Precondition(_))
        ));
        let dims = [2, 3, 4, 5, 6];
        assert!(slope_heuristic(&dims, &[0.0; 5], 10).is_err());
    }

    #[test]
    fn report_json_shape() {
        let dims: Vec<usize> = (1..=9).map(|j| 1usize << j).collect();
        let r = slope_heuristic(&dims, &planted(4096, 3.0, 0.5, 32, &dims), 4096).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert!(v["K_hat"].is_f64());
        assert!(v["lambda_star"].is_f64());
        assert!(v["path"][0]["selected_dim"].is_u64());
    }
}
