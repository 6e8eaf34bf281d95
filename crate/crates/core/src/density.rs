//! Reference densities on `[0, 1]` with closed-form distribution functions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

/// Functional form of a density supported on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum DensityForm {
    Uniform,
    /// s(x) = 2x
    Linear,
    /// Step density: `levels[i]` on `[edges[i], edges[i+1])`, edges spanning `[0, 1]`.
    PiecewiseConstant { edges: Vec<f64>, levels: Vec<f64> },
    /// s(x) = Σ coeffs[i] x^i
    Polynomial { coeffs: Vec<f64> },
    /// Step density given by bin masses rather than heights.
    Histogram { edges: Vec<f64>, masses: Vec<f64> },
}

/// A validated density on `[0, 1]` together with its L² norm.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityHandle {
    form: DensityForm,
    steps: Option<(Vec<f64>, Vec<f64>)>,
    l2_norm: f64,
}

impl DensityHandle {
    pub fn uniform() -> Self {
        Self::new(DensityForm::Uniform).expect("uniform density is valid")
    }

    pub fn linear() -> Self {
        Self::new(DensityForm::Linear).expect("linear density is valid")
    }

    pub fn new(form: DensityForm) -> Result<Self> {
        let steps = match &form {
            DensityForm::PiecewiseConstant { edges, levels } => {
                check_edges(edges, levels.len())?;
                Some((edges.clone(), levels.clone()))
            }
            DensityForm::Histogram { edges, masses } => {
                check_edges(edges, masses.len())?;
                let levels = edges
                    .windows(2)
                    .zip(masses)
                    .map(|(w, m)| m / (w[1] - w[0]))
                    .collect();
                Some((edges.clone(), levels))
            }
            DensityForm::Polynomial { coeffs } if coeffs.is_empty() => {
                return Err(Error::Domain("polynomial density needs coefficients".into()))
            }
            _ => None,
        };
        let mut handle = Self {
            form,
            steps,
            l2_norm: 0.0,
        };
        handle.l2_norm = handle.squared_l2_norm().sqrt();
        handle.validate()?;
        Ok(handle)
    }

    fn validate(&self) -> Result<()> {
        let total = self.cdf(1.0);
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Domain(format!(
                "density integrates to {total}, expected 1"
            )));
        }
        let negative = match (&self.form, &self.steps) {
            (_, Some((_, levels))) => levels.iter().any(|&l| l < 0.0 || !l.is_finite()),
            (DensityForm::Polynomial { .. }, None) => {
                (0..=4096).any(|i| self.pdf(i as f64 / 4096.0) < -1e-12)
            }
            _ => false,
        };
        if negative {
            return Err(Error::Domain("density takes negative values".into()));
        }
        Ok(())
    }

    pub fn form(&self) -> &DensityForm {
        &self.form
    }

    /// ‖s‖₂
    pub fn l2_norm(&self) -> f64 {
        self.l2_norm
    }

    /// ‖s‖₂², in closed form.
    pub fn squared_l2_norm(&self) -> f64 {
        if let Some((edges, levels)) = &self.steps {
            return compensated_sum(
                edges
                    .windows(2)
                    .zip(levels)
                    .map(|(w, l)| l * l * (w[1] - w[0])),
            );
        }
        match &self.form {
            DensityForm::Uniform => 1.0,
            DensityForm::Linear => 4.0 / 3.0,
            DensityForm::Polynomial { coeffs } => {
                let mut terms = Vec::new();
                for (i, a) in coeffs.iter().enumerate() {
                    for (j, b) in coeffs.iter().enumerate() {
                        terms.push(a * b / (i + j + 1) as f64);
                    }
                }
                compensated_sum(terms)
            }
            _ => unreachable!("step forms handled above"),
        }
    }

    /// Density value; `x = 1` evaluates as the left limit.
    pub fn pdf(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        if let Some((edges, levels)) = &self.steps {
            return levels[cell_of(edges, x)];
        }
        match &self.form {
            DensityForm::Uniform => 1.0,
            DensityForm::Linear => 2.0 * x,
            DensityForm::Polynomial { coeffs } => horner(coeffs, x),
            _ => unreachable!("step forms handled above"),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.mass(0.0, x.clamp(0.0, 1.0))
    }

    /// ∫_a^b s, for `0 ≤ a ≤ b ≤ 1`, evaluated without forming F(b) − F(a)
    /// where a factored form is available.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.clamp(0.0, 1.0), b.clamp(0.0, 1.0));
        if b <= a {
            return 0.0;
        }
        if let Some((edges, levels)) = &self.steps {
            let mut acc = Vec::new();
            for (w, l) in edges.windows(2).zip(levels) {
                let lo = w[0].max(a);
                let hi = w[1].min(b);
                if hi > lo {
                    acc.push(l * (hi - lo));
                }
            }
            return compensated_sum(acc);
        }
        match &self.form {
            DensityForm::Uniform => b - a,
            DensityForm::Linear => (b - a) * (b + a),
            DensityForm::Polynomial { coeffs } => {
                // ∫_a^b x^i = (b - a) Σ_{t=0}^{i} b^t a^{i-t} / (i + 1)
                let width = b - a;
                let terms = coeffs.iter().enumerate().map(|(i, c)| {
                    let mut inner = 0.0;
                    for t in 0..=i {
                        inner += b.powi(t as i32) * a.powi((i - t) as i32);
                    }
                    c * inner / (i + 1) as f64
                });
                width * compensated_sum(terms)
            }
            _ => unreachable!("step forms handled above"),
        }
    }

    /// Inverse distribution function.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        if let Some((edges, levels)) = &self.steps {
            let mut below = 0.0;
            for (w, &l) in edges.windows(2).zip(levels) {
                let m = l * (w[1] - w[0]);
                if m > 0.0 && below + m >= u {
                    return (w[0] + (u - below) / l).min(w[1]);
                }
                below += m;
            }
            return 1.0;
        }
        match &self.form {
            DensityForm::Uniform => u,
            DensityForm::Linear => u.sqrt(),
            _ => {
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                for _ in 0..64 {
                    let mid = 0.5 * (lo + hi);
                    if self.cdf(mid) < u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    /// Interior points where the density is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.steps {
            Some((edges, _)) => edges[1..edges.len() - 1].to_vec(),
            None => Vec::new(),
        }
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn check_edges(edges: &[f64], cells: usize) -> Result<()> {
    if edges.len() != cells + 1 || cells == 0 {
        return Err(Error::Domain(format!(
            "{} edges cannot delimit {cells} cells",
            edges.len()
        )));
    }
    if edges[0] != 0.0 || edges[cells] != 1.0 || edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain(
            "edges must increase strictly from 0 to 1".into(),
        ));
    }
    Ok(())
}

fn cell_of(edges: &[f64], x: f64) -> usize {
    let cells = edges.len() - 1;
    edges[1..cells].partition_point(|&e| e <= x).min(cells - 1)
}

impl fmt::Display for DensityHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.form {
            DensityForm::Uniform => write!(f, "uniform"),
            DensityForm::Linear => write!(f, "linear"),
            DensityForm::Polynomial { coeffs } => write!(f, "poly:{}", join(coeffs)),
            DensityForm::Histogram { masses, .. } => write!(f, "hist:{}", join(masses)),
            DensityForm::PiecewiseConstant { edges, levels } => {
                write!(f, "steps:{};{}", join(&edges[1..edges.len() - 1]), join(levels))
            }
        }
    }
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_list(text: &str) -> Result<Vec<f64>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("cannot parse '{t}' as a number")))
        })
        .collect()
}

/// Parses `uniform`, `linear`, `poly:c0,c1,..`, `hist:m0,m1,..` (equal-width
/// bins) and `steps:b1,b2,..;l0,l1,..` (interior breaks; levels).
impl FromStr for DensityHandle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let form = match name.trim() {
            "uniform" => DensityForm::Uniform,
            "linear" => DensityForm::Linear,
            "poly" | "polynomial" => DensityForm::Polynomial {
                coeffs: parse_list(args)?,
            },
            "hist" | "histogram" => {
                let masses = parse_list(args)?;
                let bins = masses.len().max(1);
                let edges = (0..=bins).map(|i| i as f64 / bins as f64).collect();
                DensityForm::Histogram { edges, masses }
            }
            "steps" | "piecewise" => {
                let (breaks, levels) = args
                    .split_once(';')
                    .ok_or_else(|| Error::Config("steps density needs 'breaks;levels'".into()))?;
                let mut edges = vec![0.0];
                edges.extend(parse_list(breaks)?);
                edges.push(1.0);
                DensityForm::PiecewiseConstant {
                    edges,
                    levels: parse_list(levels)?,
                }
            }
            other => return Err(Error::Config(format!("unknown density '{other}'"))),
        };
        DensityHandle::new(form).map_err(|e| Error::Config(e.to_string()))
    }
}
