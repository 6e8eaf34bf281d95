//! Experiment configuration, replication loops and rate fitting.

pub mod config;
pub mod experiment;
pub mod rate;

pub use config::{ExperimentConfig, PenaltyPlan};
pub use experiment::{run_experiment, run_to_dir, ExperimentResult, ReplicationRecord, SizeSummary};
pub use rate::{fit_rate, RateFit, SummaryStatistic};

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Linear-interpolation quantile (R type 7).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}
