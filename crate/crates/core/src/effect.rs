//! Effect estimates `(y, σ)` derived from per-study summary data.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::norm_quantile;

/// One study's estimate and standard error, as entered into the analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub label: String,
    pub y: f64,
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
}

impl EffectEstimate {
    pub fn new(label: impl Into<String>, y: f64, sigma: f64, n: Option<f64>) -> Result<Self> {
        let label = label.into();
        if !y.is_finite() {
            return Err(Error::domain(format!("estimate for '{label}' is not finite")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!(
                "standard error for '{label}' must be positive, got {sigma}"
            )));
        }
        if let Some(n) = n {
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::domain(format!(
                    "sample size for '{label}' must be positive, got {n}"
                )));
            }
        }
        Ok(Self { label, y, sigma, n })
    }

    /// Re-expresses a regression slope for a regressor increment `factor` times
    /// as large: both the estimate and its standard error scale by `factor`.
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        if !(factor != 0.0 && factor.is_finite()) {
            return Err(Error::domain(format!("rescaling factor must be nonzero, got {factor}")));
        }
        Self::new(self.label.clone(), self.y * factor, self.sigma * factor.abs(), self.n)
    }
}

/// Means, standard deviations and sizes of a treatment (1) and control (2) group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoGroupContinuous {
    pub mean1: f64,
    pub sd1: f64,
    pub n1: f64,
    pub mean2: f64,
    pub sd2: f64,
    pub n2: f64,
}

impl TwoGroupContinuous {
    fn check(&self) -> Result<()> {
        if !(self.sd1 > 0.0 && self.sd2 > 0.0) {
            return Err(Error::domain("group standard deviations must be positive"));
        }
        for n in [self.n1, self.n2] {
            if !(n >= 2.0 && n.fract() == 0.0) {
                return Err(Error::domain(format!("group sizes must be integers >= 2, got {n}")));
            }
        }
        if !(self.mean1.is_finite() && self.mean2.is_finite()) {
            return Err(Error::domain("group means must be finite"));
        }
        Ok(())
    }

    pub fn swapped(&self) -> Self {
        Self {
            mean1: self.mean2,
            sd1: self.sd2,
            n1: self.n2,
            mean2: self.mean1,
            sd2: self.sd1,
            n2: self.n1,
        }
    }
}

/// Event counts and totals of a treatment (a of n1) and control (c of n2) arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoByTwoTable {
    pub events1: f64,
    pub total1: f64,
    pub events2: f64,
    pub total2: f64,
}

impl TwoByTwoTable {
    pub fn swapped(&self) -> Self {
        Self {
            events1: self.events2,
            total1: self.total2,
            events2: self.events1,
            total2: self.total1,
        }
    }
}

/// Events `x` among `n` subjects in a single arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProportionCount {
    pub events: f64,
    pub total: f64,
}

/// A ratio estimate reported with a confidence interval at `level`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioWithCi {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

/// A correlation coefficient and its sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCount {
    pub r: f64,
    pub n: f64,
}

/// Handling of empty cells in count data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ContinuityCorrection {
    /// Zero cells are an error.
    #[default]
    None,
    /// Add 0.5 to every cell of a table with an empty cell.
    Half,
}

fn counts_ok(name: &str, events: f64, total: f64) -> Result<()> {
    if !(events >= 0.0 && total > 0.0 && events <= total && events.fract() == 0.0 && total.fract() == 0.0) {
        return Err(Error::domain(format!(
            "{name}: need integer counts with 0 <= events <= total, got {events} of {total}"
        )));
    }
    Ok(())
}

const ZERO_CELL: &str = "a cell count is zero; enable the 0.5 continuity correction to proceed";

/// Mean difference `mean1 - mean2`.
pub fn mean_difference(g: &TwoGroupContinuous) -> Result<(f64, f64)> {
    g.check()?;
    let y = g.mean1 - g.mean2;
    let sigma = (g.sd1 * g.sd1 / g.n1 + g.sd2 * g.sd2 / g.n2).sqrt();
    Ok((y, sigma))
}

/// Standardized mean difference with the Hedges small-sample correction.
pub fn smd_hedges_g(g: &TwoGroupContinuous) -> Result<(f64, f64)> {
    g.check()?;
    let (n1, n2) = (g.n1, g.n2);
    let n = n1 + n2;
    if n <= 3.0 {
        return Err(Error::domain("Hedges' g needs more than three subjects in total"));
    }
    let pooled = (((n1 - 1.0) * g.sd1 * g.sd1 + (n2 - 1.0) * g.sd2 * g.sd2) / (n - 2.0)).sqrt();
    let d = (g.mean1 - g.mean2) / pooled;
    let j = 1.0 - 3.0 / (4.0 * n - 9.0);
    let y = j * d;
    let sigma = (n / (n1 * n2) + y * y / (2.0 * n)).sqrt();
    Ok((y, sigma))
}

/// Log odds ratio of arm 1 versus arm 2.
pub fn log_or(t: &TwoByTwoTable, cc: ContinuityCorrection) -> Result<(f64, f64)> {
    counts_ok("treatment arm", t.events1, t.total1)?;
    counts_ok("control arm", t.events2, t.total2)?;
    let mut cells = [
        t.events1,
        t.total1 - t.events1,
        t.events2,
        t.total2 - t.events2,
    ];
    if cells.contains(&0.0) {
        match cc {
            ContinuityCorrection::None => return Err(Error::domain(ZERO_CELL)),
            ContinuityCorrection::Half => cells.iter_mut().for_each(|c| *c += 0.5),
        }
    }
    let [a, b, c, d] = cells;
    let y = (a * d / (b * c)).ln();
    let sigma = (1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d).sqrt();
    Ok((y, sigma))
}

/// Log odds of a single proportion.
pub fn log_odds(p: &ProportionCount, cc: ContinuityCorrection) -> Result<(f64, f64)> {
    counts_ok("arm", p.events, p.total)?;
    let (mut x, mut rest) = (p.events, p.total - p.events);
    if x == 0.0 || rest == 0.0 {
        match cc {
            ContinuityCorrection::None => return Err(Error::domain(ZERO_CELL)),
            ContinuityCorrection::Half => {
                x += 0.5;
                rest += 0.5;
            }
        }
    }
    Ok(((x / rest).ln(), (1.0 / x + 1.0 / rest).sqrt()))
}

/// Log ratio with the standard error recovered from a symmetric log-scale interval.
pub fn log_ratio_from_ci(r: &RatioWithCi) -> Result<(f64, f64)> {
    if !(r.level > 0.0 && r.level < 1.0) {
        return Err(Error::domain(format!("confidence level must lie in (0, 1), got {}", r.level)));
    }
    if !(r.lower > 0.0 && r.lower < r.point && r.point < r.upper && r.upper.is_finite()) {
        return Err(Error::domain(format!(
            "need 0 < lower < point < upper, got {} [{}, {}]",
            r.point, r.lower, r.upper
        )));
    }
    let z = norm_quantile(0.5 * (1.0 + r.level));
    Ok((r.point.ln(), (r.upper.ln() - r.lower.ln()) / (2.0 * z)))
}

/// Fisher's variance-stabilizing z transform of a correlation.
pub fn fisher_z(c: &CorrelationCount) -> Result<(f64, f64)> {
    if !(c.r.abs() < 1.0) {
        return Err(Error::domain(format!("correlation must lie in (-1, 1), got {}", c.r)));
    }
    if !(c.n > 3.0) {
        return Err(Error::domain(format!("Fisher z needs n > 3, got {}", c.n)));
    }
    Ok((c.r.atanh(), 1.0 / (c.n - 3.0).sqrt()))
}

/// Effect measure of an input file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    /// Columns `y,sigma[,n]`.
    Precomputed,
    /// Columns `mean1,sd1,n1,mean2,sd2,n2`.
    Md,
    /// Columns `mean1,sd1,n1,mean2,sd2,n2`.
    Smd,
    /// Columns `events1,total1,events2,total2`.
    LogOr,
    /// Columns `events,total`.
    LogOdds,
    /// Columns `ratio,lower,upper[,level][,n]`.
    LogRatioCi,
    /// Columns `r,n`.
    FisherZ,
}

impl Measure {
    pub const ALL: [Measure; 7] = [
        Measure::Precomputed,
        Measure::Md,
        Measure::Smd,
        Measure::LogOr,
        Measure::LogOdds,
        Measure::LogRatioCi,
        Measure::FisherZ,
    ];

    /// Required input columns, besides the optional `label`.
    pub fn required_columns(self) -> &'static [&'static str] {
        match self {
            Measure::Precomputed => &["y", "sigma"],
            Measure::Md | Measure::Smd => &["mean1", "sd1", "n1", "mean2", "sd2", "n2"],
            Measure::LogOr => &["events1", "total1", "events2", "total2"],
            Measure::LogOdds => &["events", "total"],
            Measure::LogRatioCi => &["ratio", "lower", "upper"],
            Measure::FisherZ => &["r", "n"],
        }
    }

    /// True for log-scale measures whose results are read after exponentiation.
    pub fn is_log_scale(self) -> bool {
        matches!(self, Measure::LogOr | Measure::LogOdds | Measure::LogRatioCi)
    }

    pub fn name(self) -> &'static str {
        match self {
            Measure::Precomputed => "precomputed",
            Measure::Md => "md",
            Measure::Smd => "smd",
            Measure::LogOr => "logor",
            Measure::LogOdds => "logodds",
            Measure::LogRatioCi => "logratio-ci",
            Measure::FisherZ => "fisherz",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Measure::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| {
                let names: Vec<_> = Measure::ALL.iter().map(|m| m.name()).collect();
                Error::input(format!("unknown measure '{s}', expected one of {}", names.join(", ")))
            })
    }
}
