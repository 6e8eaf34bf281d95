use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{mean, median};

/// Least-squares line through (log n, log risk).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub log_n: Vec<f64>,
    pub log_risk: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_rate(per_n_risks: &BTreeMap<usize, f64>) -> Result<RateFit> {
    if per_n_risks.len() < 4 {
        return Err(Error::Precondition(format!(
            "rate fit needs at least 4 sample sizes, got {}",
            per_n_risks.len()
        )));
    }
    if let Some((n, r)) = per_n_risks.iter().find(|(_, r)| !(**r > 0.0 && r.is_finite())) {
        return Err(Error::Domain(format!("risk summary {r} at n = {n} is not positive")));
    }
    let log_n: Vec<f64> = per_n_risks.keys().map(|&n| (n as f64).ln()).collect();
    let log_risk: Vec<f64> = per_n_risks.values().map(|r| r.ln()).collect();
    let mx = mean(&log_n);
    let my = mean(&log_risk);
    let sxx: f64 = log_n.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = log_n.iter().zip(&log_risk).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = log_risk.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = log_n
        .iter()
        .zip(&log_risk)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(RateFit {
        log_n,
        log_risk,
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryStatistic {
    #[default]
    Median,
    Mean,
}

impl std::str::FromStr for SummaryStatistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "median" => Ok(Self::Median),
            "mean" => Ok(Self::Mean),
            other => Err(Error::Config(format!("unknown summary statistic '{other}'"))),
        }
    }
}

#[derive(Deserialize)]
struct RiskRow {
    n: usize,
    risk_selected: f64,
}

/// Selected-model risks per n from a replication CSV.
pub fn risks_from_csv<R: Read>(input: R) -> Result<BTreeMap<usize, Vec<f64>>> {
    let mut out: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for row in csv::Reader::from_reader(input).deserialize() {
        let row: RiskRow = row?;
        out.entry(row.n).or_default().push(row.risk_selected);
    }
    Ok(out)
}

pub fn summarize(per_n: &BTreeMap<usize, Vec<f64>>, statistic: SummaryStatistic) -> BTreeMap<usize, f64> {
    per_n
        .iter()
        .map(|(&n, risks)| {
            let v = match statistic {
                SummaryStatistic::Median => median(risks),
                SummaryStatistic::Mean => mean(risks),
            };
            (n, v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let risks: BTreeMap<usize, f64> =
            (10..=16).map(|k| (1usize << k, 3.0 * ((1u64 << k) as f64).powf(-2.0 / 3.0))).collect();
        let fit = fit_rate(&risks).unwrap();
        assert!((fit.slope + 2.0 / 3.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_risks() {
        let risks: BTreeMap<usize, f64> = (4..8).map(|k| (1usize << k, 0.25)).collect();
        let fit = fit_rate(&risks).unwrap();
        assert!(fit.slope.abs() < 1e-15);
        assert!((0.0..=1.0).contains(&fit.r_squared));
    }

    #[test]
    fn errors() {
        let few: BTreeMap<usize, f64> = (4..7).map(|k| (1usize << k, 0.25)).collect();
        assert!(matches!(fit_rate(&few), Err(Error::Precondition(_))));
        let mut bad: BTreeMap<usize, f64> = (4..8).map(|k| (1usize << k, 0.25)).collect();
        bad.insert(1024, 0.0);
        assert!(matches!(fit_rate(&bad), Err(Error::Domain(_))));
    }

    #[test]
    fn reads_risks_from_csv() {
        let text = "n,replication,risk_selected\n16,0,1.0\n16,1,3.0\n32,0,0.5\n";
        let per_n = risks_from_csv(text.as_bytes()).unwrap();
        assert_eq!(per_n[&16], vec![1.0, 3.0]);
        let med = summarize(&per_n, SummaryStatistic::Median);
        assert_eq!(med[&16], 2.0);
        assert_eq!(med[&32], 0.5);
    }
}
