//! What a heterogeneity prior implies before seeing data: predictive ranges of
//! study effects, heterogeneity categories, catalogued presets and a Monte
//! Carlo sampler.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::HeterogeneityPrior;
use crate::error::{Error, Result};
use crate::numeric;
use crate::par::{self, Execution};
use crate::special::{norm_pdf, norm_quantile, norm_sf};

/// A symmetric predictive interval for `θᵢ - μ`, also on the exponentiated scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveSummary {
    pub level: f64,
    pub interval_lo: f64,
    pub interval_hi: f64,
    pub exp_lo: f64,
    pub exp_hi: f64,
}

impl PredictiveSummary {
    fn symmetric(half_width: f64, level: f64) -> Self {
        Self {
            level,
            interval_lo: -half_width,
            interval_hi: half_width,
            exp_lo: (-half_width).exp(),
            exp_hi: half_width.exp(),
        }
    }
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("level must lie in (0, 1), got {level}")))
    }
}

/// Predictive interval of `θᵢ - μ ~ N(0, τ²)` for a fixed `τ`.
pub fn conditional_predictive(tau: f64, level: f64) -> Result<PredictiveSummary> {
    check_level(level)?;
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::domain(format!("τ must be nonnegative, got {tau}")));
    }
    let z = norm_quantile(0.5 * (1.0 + level));
    Ok(PredictiveSummary::symmetric(z * tau, level))
}

/// Median of `|θᵢ - θⱼ|` for two random study effects, and its exponential.
pub fn random_pair_median(tau: f64) -> Result<(f64, f64)> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::domain(format!("τ must be nonnegative, got {tau}")));
    }
    let m = std::f64::consts::SQRT_2 * tau * norm_quantile(0.75);
    Ok((m, m.exp()))
}

/// Upper prior quantile beyond which the τ tail is neglected.
const TAIL: f64 = 1e-8;

/// `E[g(τ)]` under a proper prior: linear panels up to the median, log-spaced
/// panels from there to the `1 - TAIL` quantile, plus `g(∞)·TAIL`.
fn prior_expectation<G: Fn(f64) -> f64>(prior: &HeterogeneityPrior, g: G, g_inf: f64, tol: f64) -> Result<f64> {
    let median = prior.median()?;
    let top = prior.quantile(1.0 - TAIL)?;
    let dens = |t: f64| prior.density(t).unwrap_or(0.0);
    let body = numeric::integrate(|t| g(t) * dens(t), 0.0, median, tol);
    let tail = if top > median {
        numeric::integrate(
            |s| {
                let t = s.exp();
                g(t) * dens(t) * t
            },
            median.ln(),
            top.ln(),
            tol,
        )
    } else {
        0.0
    };
    Ok(body + tail + g_inf * prior.sf(top)?)
}

/// Two-sided tail mass `P(|θᵢ - μ| > x)` of the marginal prior predictive.
pub fn marginal_predictive_tail(prior: &HeterogeneityPrior, x: f64) -> Result<f64> {
    prior_expectation(prior, |t| if t == 0.0 { 0.0 } else { 2.0 * norm_sf(x / t) }, 1.0, 1e-11)
}

/// Symmetric interval of the marginal prior predictive of `θᵢ - μ`, the
/// τ-mixture of `N(0, τ²)` laws.
pub fn marginal_predictive(prior: &HeterogeneityPrior, level: f64) -> Result<PredictiveSummary> {
    check_level(level)?;
    if !prior.is_proper() {
        return Err(Error::ImproperPrior(prior.family_name(), "prior predictive"));
    }
    let target = 1.0 - level;
    // P(|θ - μ| <= x) is increasing in x; bracket the root first.
    let covered = |x: f64| 1.0 - marginal_predictive_tail(prior, x).unwrap_or(f64::NAN);
    let slope = |x: f64| {
        prior_expectation(prior, |t| if t == 0.0 { 0.0 } else { 2.0 * norm_pdf(x / t) / t }, 0.0, 1e-11)
            .unwrap_or(0.0)
    };
    let mut hi = prior.quantile(level)?.max(f64::MIN_POSITIVE) * 4.0;
    while marginal_predictive_tail(prior, hi)? > target {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::numeric("marginal predictive quantile diverged"));
        }
    }
    let x = numeric::invert_monotone(covered, slope, level, 0.0, hi);
    Ok(PredictiveSummary::symmetric(x, level))
}

/// A named τ range `(lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

/// Ordered, nonoverlapping heterogeneity categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryScheme {
    pub categories: Vec<Category>,
}

impl CategoryScheme {
    pub fn new(categories: Vec<Category>) -> Result<Self> {
        if categories.is_empty() {
            return Err(Error::input("a category scheme needs at least one category"));
        }
        let mut prev = 0.0;
        for c in &categories {
            if !(c.lower >= prev && c.upper > c.lower) {
                return Err(Error::input(format!(
                    "category '{}' ({}, {}] is empty or overlaps its predecessor",
                    c.name, c.lower, c.upper
                )));
            }
            prev = c.upper;
        }
        Ok(Self { categories })
    }

    /// Reasonable (0.1–0.5], fairly high (0.5–1.0] and fairly extreme (> 1.0)
    /// heterogeneity on the log-odds-ratio scale.
    pub fn log_or_default() -> Self {
        let c = |name: &str, lower: f64, upper: f64| Category {
            name: name.to_string(),
            lower,
            upper,
        };
        Self {
            categories: vec![
                c("reasonable", 0.1, 0.5),
                c("fairly high", 0.5, 1.0),
                c("fairly extreme", 1.0, f64::INFINITY),
            ],
        }
    }

    /// Parses `lo-hi,lo-hi,...` with `inf` allowed as the last upper bound;
    /// categories are named by their range.
    pub fn parse(s: &str) -> Result<Self> {
        let mut cats = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (lo, hi) = part
                .split_once('-')
                .ok_or_else(|| Error::input(format!("category '{part}' is not of the form lo-hi")))?;
            let num = |v: &str| -> Result<f64> {
                let v = v.trim();
                if v.eq_ignore_ascii_case("inf") {
                    Ok(f64::INFINITY)
                } else {
                    v.parse().map_err(|_| Error::input(format!("'{v}' is not a number in '{part}'")))
                }
            };
            cats.push(Category {
                name: part.to_string(),
                lower: num(lo)?,
                upper: num(hi)?,
            });
        }
        Self::new(cats)
    }
}

/// Prior mass per category, plus the mass below the first category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryProbabilities {
    pub below: f64,
    pub probabilities: Vec<(String, f64)>,
}

pub fn category_probabilities(prior: &HeterogeneityPrior, scheme: &CategoryScheme) -> Result<CategoryProbabilities> {
    let cdf = |x: f64| -> Result<f64> {
        if x.is_infinite() {
            Ok(1.0)
        } else {
            prior.cdf(x)
        }
    };
    let first = scheme.categories[0].lower;
    let probabilities = scheme
        .categories
        .iter()
        .map(|c| Ok((c.name.clone(), cdf(c.upper)? - cdf(c.lower)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CategoryProbabilities {
        below: cdf(first)?,
        probabilities,
    })
}

/// Catalogued priors: `(name, description, prior)`.
pub fn presets() -> Vec<(&'static str, &'static str, HeterogeneityPrior)> {
    use HeterogeneityPrior as P;
    vec![
        ("turner-logor-general", "empirical log-normal prior for log odds ratios", P::LogNormal { mu: -1.28, sigma: 0.87 }),
        ("rhodes-smd-general", "empirical log-Student-t prior for standardized mean differences", P::LogStudentT { location: -1.72, scale: 1.295, df: 5.0 }),
        ("hn0125", "half-normal(0.125)", P::HalfNormal { scale: 0.125 }),
        ("hn018", "half-normal(0.18)", P::HalfNormal { scale: 0.18 }),
        ("hn02", "half-normal(0.2)", P::HalfNormal { scale: 0.2 }),
        ("hn025", "half-normal(0.25)", P::HalfNormal { scale: 0.25 }),
        ("hn032", "half-normal(0.32)", P::HalfNormal { scale: 0.32 }),
        ("hn05", "half-normal(0.5)", P::HalfNormal { scale: 0.5 }),
        ("hn10", "half-normal(1.0)", P::HalfNormal { scale: 1.0 }),
        ("hn20", "half-normal(2.0)", P::HalfNormal { scale: 2.0 }),
    ]
}

pub fn preset(name: &str) -> Result<HeterogeneityPrior> {
    let key = name.trim().to_ascii_lowercase();
    presets()
        .into_iter()
        .find(|(n, _, _)| *n == key)
        .map(|(_, _, p)| p)
        .ok_or_else(|| {
            let names: Vec<_> = presets().iter().map(|(n, _, _)| *n).collect();
            Error::input(format!("unknown preset '{name}', known: {}", names.join(", ")))
        })
}

/// Draws per block; each block has its own ChaCha stream so the output does
/// not depend on how blocks are scheduled.
const BLOCK: usize = 1 << 16;

fn sample_blocks<F>(count: usize, seed: u64, exec: Execution, draw: F) -> Result<Vec<f64>>
where
    F: Fn(&mut ChaCha8Rng) -> Result<f64> + Sync + Send,
{
    if count == 0 {
        return Err(Error::domain("sample count must be at least 1"));
    }
    let blocks = count.div_ceil(BLOCK);
    let parts = par::map_range(exec, blocks, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        let n = BLOCK.min(count - b * BLOCK);
        (0..n).map(|_| draw(&mut rng)).collect::<Result<Vec<f64>>>()
    });
    let mut out = Vec::with_capacity(count);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

fn std_normal<R: Rng>(rng: &mut R) -> f64 {
    // Open interval keeps the quantile finite.
    let u: f64 = rng.random();
    norm_quantile(u.max(f64::MIN_POSITIVE))
}

/// Monte Carlo draws of `θᵢ - μ` from the marginal prior predictive: `τ` from
/// the prior, then `θᵢ - μ | τ ~ N(0, τ²)`. Identical seeds give identical draws.
pub fn sample_predictive(prior: &HeterogeneityPrior, count: usize, seed: u64, exec: Execution) -> Result<Vec<f64>> {
    if !prior.is_proper() {
        return Err(Error::ImproperPrior(prior.family_name(), "sampler"));
    }
    sample_blocks(count, seed, exec, |rng| {
        let tau = prior.sample(rng)?;
        Ok(tau * std_normal(rng))
    })
}

/// Monte Carlo draws of `θᵢ - μ ~ N(0, τ²)` for a fixed `τ`.
pub fn sample_conditional(tau: f64, count: usize, seed: u64, exec: Execution) -> Result<Vec<f64>> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::domain(format!("τ must be nonnegative, got {tau}")));
    }
    sample_blocks(count, seed, exec, |rng| Ok(tau * std_normal(rng)))
}
