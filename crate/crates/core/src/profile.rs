//! Sampled decay profiles and the three-way "limit is zero" verdict.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    In,
    Out,
    Inconclusive,
}

impl Verdict {
    /// Three-valued conjunction: any OUT wins, then any INCONCLUSIVE.
    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Out, _) | (_, Out) => Out,
            (In, In) => In,
            _ => Inconclusive,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::In => "IN",
            Verdict::Out => "OUT",
            Verdict::Inconclusive => "INCONCLUSIVE",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Verdict {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "IN" => Ok(Verdict::In),
            "OUT" => Ok(Verdict::Out),
            "INCONCLUSIVE" => Ok(Verdict::Inconclusive),
            _ => Err(format!("unknown verdict `{s}`")),
        }
    }
}

/// Which end of the abscissa axis the limit is taken at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Limit {
    /// r → 0 (local Kato profiles).
    Zero,
    /// R → ∞ (tail profiles, B0 profiles, α-ladders).
    Infinity,
}

/// Parameters of the decision rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionRule {
    /// Required cumulative decrease over the last three values.
    pub min_decrease_factor: f64,
    /// Final value must be below `abs_tol_rel * first`.
    pub abs_tol_rel: f64,
    /// Relative spread under which the last three values count as a plateau.
    pub plateau_rel: f64,
}

impl Default for DecisionRule {
    fn default() -> Self {
        DecisionRule {
            min_decrease_factor: 2.0,
            abs_tol_rel: 1e-3,
            plateau_rel: 0.10,
        }
    }
}

impl DecisionRule {
    /// Classify a sequence given in the order of approach to the limit.
    pub fn verdict(&self, seq: &[f64]) -> Verdict {
        if seq.is_empty() {
            return Verdict::Inconclusive;
        }
        if seq.iter().all(|&v| v == 0.0) {
            return Verdict::In;
        }
        let n = seq.len();
        let tail = &seq[n.saturating_sub(3)..];
        if tail.iter().any(|v| v.is_infinite()) {
            return Verdict::Out;
        }
        if tail.iter().any(|v| v.is_nan()) {
            return Verdict::Inconclusive;
        }
        let last = seq[n - 1];
        if last == 0.0 {
            return Verdict::In;
        }
        if tail.len() < 3 {
            return Verdict::Inconclusive;
        }
        let reference = seq
            .iter()
            .copied()
            .find(|v| v.is_finite() && *v > 0.0)
            .unwrap_or(0.0);
        let decreasing = tail.windows(2).all(|w| w[1] <= w[0]);
        if decreasing
            && tail[0] >= self.min_decrease_factor * last
            && last < self.abs_tol_rel * reference
        {
            return Verdict::In;
        }
        let max = tail.iter().copied().fold(f64::MIN, f64::max);
        let min = tail.iter().copied().fold(f64::MAX, f64::min);
        if min > 0.0 && max <= (1.0 + self.plateau_rel) * min {
            return Verdict::Out;
        }
        if tail.windows(2).all(|w| w[1] >= w[0]) && last > tail[0] {
            // a sequence converging to zero cannot keep growing
            return Verdict::Out;
        }
        Verdict::Inconclusive
    }
}

/// Least-squares slope with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub exponent: f64,
    pub stderr: f64,
    pub points: usize,
}

/// A sampled profile `x ↦ φ(x)` with a limit verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayProfile {
    pub label: String,
    pub limit: Limit,
    /// Strictly increasing.
    pub abscissae: Vec<f64>,
    /// Finite or `+∞`.
    pub values: Vec<f64>,
    pub fitted_exponent: Option<ExponentFit>,
    pub verdict: Verdict,
    /// Free-form flags (low-confidence searches, inconclusive quadratures).
    pub notes: Vec<String>,
}

impl DecayProfile {
    /// Build a profile from `(x, φ(x))` pairs in any order; sorts, fits a
    /// log–log exponent and applies `rule`.
    pub fn from_points(
        label: impl Into<String>,
        limit: Limit,
        mut points: Vec<(f64, f64)>,
        rule: &DecisionRule,
    ) -> Self {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        points.dedup_by(|a, b| a.0 == b.0);
        let abscissae: Vec<f64> = points.iter().map(|p| p.0).collect();
        let values: Vec<f64> = points.iter().map(|p| p.1).collect();
        let mut p = DecayProfile {
            label: label.into(),
            limit,
            abscissae,
            values,
            fitted_exponent: None,
            verdict: Verdict::Inconclusive,
            notes: Vec::new(),
        };
        p.fitted_exponent = p.fit_loglog();
        p.verdict = rule.verdict(&p.sequence());
        p
    }

    /// Values in the order of approach to the limit.
    pub fn sequence(&self) -> Vec<f64> {
        match self.limit {
            Limit::Infinity => self.values.clone(),
            Limit::Zero => self.values.iter().rev().copied().collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Slope of `log φ` against `log x` over finite positive entries.
    pub fn fit_loglog(&self) -> Option<ExponentFit> {
        let pts: Vec<(f64, f64)> = self
            .abscissae
            .iter()
            .zip(&self.values)
            .filter(|(x, v)| **x > 0.0 && v.is_finite() && **v > 0.0)
            .map(|(x, v)| (x.ln(), v.ln()))
            .collect();
        linear_fit(&pts)
    }

    /// Slope of `log φ` against `x` (exponential decay rate when negative).
    pub fn fit_semilog(&self) -> Option<ExponentFit> {
        let pts: Vec<(f64, f64)> = self
            .abscissae
            .iter()
            .zip(&self.values)
            .filter(|(_, v)| v.is_finite() && **v > 0.0)
            .map(|(x, v)| (*x, v.ln()))
            .collect();
        linear_fit(&pts)
    }
}

pub(crate) fn linear_fit(pts: &[(f64, f64)]) -> Option<ExponentFit> {
    let n = pts.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let stderr = if n > 2 {
        let rss: f64 = pts
            .iter()
            .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
            .sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(ExponentFit {
        exponent: slope,
        stderr,
        points: n,
    })
}
