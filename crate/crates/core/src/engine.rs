//! Posterior inference for the normal-normal hierarchical model
//!
//! ```text
//! yᵢ | θᵢ ~ N(θᵢ, σᵢ²),   θᵢ | μ, τ ~ N(μ, τ²)
//! ```
//!
//! The marginal heterogeneity posterior `p(τ | y)` is tabulated on a grid
//! whose density is treated as piecewise linear, so that density, CDF and
//! quantiles agree with the trapezoid normalization. Conditionally on τ the
//! effect, the study-specific effects and a new study's effect are normal;
//! their marginals are normal mixtures over the same grid nodes.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dist::{jeffreys_log_density, HeterogeneityPrior};
use crate::effect::EffectEstimate;
use crate::error::{Error, Result};
use crate::numeric;
use crate::par::{self, Execution};
use crate::special::{norm_cdf, norm_pdf, norm_quantile};
use crate::uisd::{empirical_uisd, UisdEstimate};

pub const DEFAULT_GRID_NODES: usize = 800;
const MIN_GRID_NODES: usize = 16;
/// Posterior mass allowed beyond the last grid node.
const TAIL_MASS: f64 = 1e-8;
/// Grid cap for improper priors, in multiples of the largest standard error.
const IMPROPER_CAP: f64 = 1e3;

/// The studies entering a meta-analysis. Labels are unique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<EffectEstimate>", into = "Vec<EffectEstimate>")]
pub struct Dataset {
    studies: Vec<EffectEstimate>,
}

impl Dataset {
    pub fn new(studies: Vec<EffectEstimate>) -> Result<Self> {
        if studies.is_empty() {
            return Err(Error::input("a dataset needs at least one study"));
        }
        let mut seen = HashSet::new();
        for (i, s) in studies.iter().enumerate() {
            if !(s.y.is_finite() && s.sigma > 0.0 && s.sigma.is_finite()) {
                return Err(Error::input(format!(
                    "study {} ('{}'): need a finite estimate and a positive standard error",
                    i + 1,
                    s.label
                )));
            }
            if !seen.insert(s.label.as_str()) {
                return Err(Error::input(format!("duplicate study label '{}'", s.label)));
            }
        }
        Ok(Self { studies })
    }

    pub fn studies(&self) -> &[EffectEstimate] {
        &self.studies
    }

    pub fn len(&self) -> usize {
        self.studies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.studies.is_empty()
    }

    pub fn estimates(&self) -> Vec<f64> {
        self.studies.iter().map(|s| s.y).collect()
    }

    pub fn sigmas(&self) -> Vec<f64> {
        self.studies.iter().map(|s| s.sigma).collect()
    }

    /// All estimates and standard errors multiplied by `factor`, e.g. to change
    /// the regressor increment of a slope.
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.studies.iter().map(|s| s.rescaled(factor)).collect::<Result<_>>()?)
    }
}

impl TryFrom<Vec<EffectEstimate>> for Dataset {
    type Error = Error;
    fn try_from(v: Vec<EffectEstimate>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Dataset> for Vec<EffectEstimate> {
    fn from(d: Dataset) -> Self {
        d.studies
    }
}

/// Prior for the overall effect μ.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EffectPrior {
    #[default]
    ImproperUniform,
    Normal { mean: f64, sd: f64 },
}

impl EffectPrior {
    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        if !mean.is_finite() || !(sd > 0.0 && sd.is_finite()) {
            return Err(Error::domain(format!(
                "normal effect prior needs a finite mean and positive sd, got ({mean}, {sd})"
            )));
        }
        Ok(EffectPrior::Normal { mean, sd })
    }
}

impl fmt::Display for EffectPrior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EffectPrior::ImproperUniform => write!(f, "uniform()"),
            EffectPrior::Normal { mean, sd } => write!(f, "normal({mean},{sd})"),
        }
    }
}

impl FromStr for EffectPrior {
    type Err = Error;

    /// Accepts `uniform()` (or `uniform`) and `normal(mean,sd)`.
    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_lowercase();
        if compact == "uniform()" || compact == "uniform" {
            return Ok(EffectPrior::ImproperUniform);
        }
        let args = compact
            .strip_prefix("normal(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| Error::input(format!("unknown effect prior '{s}'; use uniform() or normal(mean,sd)")))?;
        let nums = args
            .split(',')
            .map(|a| a.parse::<f64>().map_err(|_| Error::input(format!("'{a}' is not a number in '{s}'"))))
            .collect::<Result<Vec<_>>>()?;
        match nums[..] {
            [m, sd] => EffectPrior::normal(m, sd),
            _ => Err(Error::input(format!("normal() takes two arguments, got '{s}'"))),
        }
    }
}

/// How a credible interval is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiKind {
    #[default]
    Shortest,
    Central,
}

impl FromStr for CiKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "shortest" => Ok(CiKind::Shortest),
            "central" => Ok(CiKind::Central),
            _ => Err(Error::input(format!("unknown interval kind '{s}'; use shortest or central"))),
        }
    }
}

/// Posterior median and credible interval of one parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub level: f64,
    pub ci_kind: CiKind,
}

impl Summary {
    pub fn width(&self) -> f64 {
        self.ci_hi - self.ci_lo
    }
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("level must lie in (0, 1), got {level}")))
    }
}

/// Tuning knobs of [`analyze`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub level: f64,
    pub ci_kind: CiKind,
    pub grid_nodes: usize,
    pub execution: Execution,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            level: 0.95,
            ci_kind: CiKind::Shortest,
            grid_nodes: DEFAULT_GRID_NODES,
            execution: Execution::default(),
        }
    }
}

/// A finite mixture of normal laws.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMixture {
    weights: Vec<f64>,
    means: Vec<f64>,
    sds: Vec<f64>,
    mean: f64,
    sd: f64,
}

/// Components lighter than this fraction of the heaviest one are dropped.
const NEGLIGIBLE_WEIGHT: f64 = 1e-15;

impl NormalMixture {
    pub fn new(weights: &[f64], means: &[f64], sds: &[f64]) -> Self {
        let heaviest = weights.iter().copied().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..weights.len())
            .filter(|&i| weights[i] > heaviest * NEGLIGIBLE_WEIGHT)
            .collect();
        let weights: Vec<f64> = keep.iter().map(|&i| weights[i]).collect();
        let means: Vec<f64> = keep.iter().map(|&i| means[i]).collect();
        let sds: Vec<f64> = keep.iter().map(|&i| sds[i]).collect();
        let total: f64 = weights.iter().sum();
        let mean = weights.iter().zip(&means).map(|(w, m)| w * m).sum::<f64>() / total;
        let second: f64 = (0..weights.len())
            .map(|i| weights[i] * (sds[i].powi(2) + (means[i] - mean).powi(2)))
            .sum();
        Self {
            weights,
            means,
            sds,
            mean,
            sd: (second / total).sqrt(),
        }
    }

    fn cdf_and_density(&self, x: f64) -> (f64, f64) {
        let mut c = 0.0;
        let mut d = 0.0;
        for i in 0..self.weights.len() {
            let z = (x - self.means[i]) / self.sds[i];
            c += self.weights[i] * norm_cdf(z);
            d += self.weights[i] * norm_pdf(z) / self.sds[i];
        }
        (c, d)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.cdf_and_density(x).0
    }

    pub fn density(&self, x: f64) -> f64 {
        self.cdf_and_density(x).1
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sd(&self) -> f64 {
        self.sd
    }

    /// Newton iteration from a moment-matched guess, safeguarded by bisection
    /// inside a bracket grown from that guess.
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if p >= 1.0 {
            return f64::INFINITY;
        }
        let step = self.sd.max(f64::MIN_POSITIVE);
        let mut x = self.mean + step * norm_quantile(p);
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for _ in 0..200 {
            let (c, d) = self.cdf_and_density(x);
            let r = c - p;
            if r == 0.0 {
                return x;
            }
            if r < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let newton = x - r / d;
            let next = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else if lo.is_finite() && hi.is_finite() {
                0.5 * (lo + hi)
            } else if lo.is_finite() {
                x + 2.0 * step.max(x - self.mean)
            } else {
                x - 2.0 * step.max(self.mean - x)
            };
            if (next - x).abs() <= 1e-14 * (1.0 + x.abs()) || hi - lo <= 1e-14 * (1.0 + x.abs()) {
                return next;
            }
            x = next;
        }
        x
    }

    pub fn summary(&self, level: f64, kind: CiKind) -> Summary {
        let median = self.quantile(0.5);
        let (ci_lo, ci_hi) = match kind {
            CiKind::Central => (self.quantile(0.5 * (1.0 - level)), self.quantile(0.5 * (1.0 + level))),
            CiKind::Shortest => numeric::shortest_interval(|p| self.quantile(p), level, 0.0),
        };
        Summary {
            median,
            ci_lo,
            ci_hi,
            level,
            ci_kind: kind,
        }
    }
}

/// Tabulated marginal posterior of τ with the conditional moments of μ.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPosterior {
    /// Ascending nodes starting at 0.
    pub tau_grid: Vec<f64>,
    /// Normalized posterior density at each node.
    pub post_density: Vec<f64>,
    /// Posterior CDF at each node, from 0 to 1.
    pub post_cdf: Vec<f64>,
    /// Quadrature weight of each node; these sum to 1.
    pub weights: Vec<f64>,
    /// `E[μ | τ, y]` and `sd[μ | τ, y]`.
    pub cond_mu_mean: Vec<f64>,
    pub cond_mu_sd: Vec<f64>,
    /// `log p(y | τ)` up to an additive constant.
    pub log_marginal_terms: Vec<f64>,
    y: Vec<f64>,
    sigma: Vec<f64>,
}

/// Per-node quantities of the integrated likelihood.
struct NodeTerms {
    mu_mean: f64,
    mu_sd: f64,
    log_marginal: f64,
}

/// `μ̂(τ)`, `sd(τ)` and `log p(y|τ)`. The normal effect prior enters as the
/// pseudo-study `(y0, s0)`, which does not depend on τ.
fn node_terms(tau: f64, y: &[f64], sigma: &[f64], pseudo: Option<(f64, f64)>) -> NodeTerms {
    let t2 = tau * tau;
    let mut sw = 0.0;
    let mut swy = 0.0;
    let mut half_log_w = 0.0;
    for (yi, si) in y.iter().zip(sigma) {
        let w = 1.0 / (si * si + t2);
        sw += w;
        swy += w * yi;
        half_log_w += 0.5 * w.ln();
    }
    if let Some((y0, s0)) = pseudo {
        let w = 1.0 / (s0 * s0);
        sw += w;
        swy += w * y0;
    }
    let mu = swy / sw;
    let mut q = 0.0;
    for (yi, si) in y.iter().zip(sigma) {
        q += (yi - mu).powi(2) / (si * si + t2);
    }
    if let Some((y0, s0)) = pseudo {
        q += (y0 - mu).powi(2) / (s0 * s0);
    }
    let sd = sw.powf(-0.5);
    NodeTerms {
        mu_mean: mu,
        mu_sd: sd,
        log_marginal: sd.ln() + half_log_w - 0.5 * q,
    }
}

/// Linear nodes on `[0, tau_ref]` followed by geometric nodes up to `tau_max`.
fn build_grid(nodes: usize, tau_ref: f64, tau_max: f64) -> Vec<f64> {
    if tau_max <= tau_ref * (1.0 + 1e-12) {
        let h = tau_max / (nodes - 1) as f64;
        return (0..nodes).map(|i| i as f64 * h).collect();
    }
    let n_lin = nodes / 2;
    let n_geo = nodes - n_lin;
    let h = tau_ref / (n_lin - 1) as f64;
    let mut grid: Vec<f64> = (0..n_lin).map(|i| i as f64 * h).collect();
    let ratio = (tau_max / tau_ref).ln() / n_geo as f64;
    grid.extend((1..=n_geo).map(|i| tau_ref * (ratio * i as f64).exp()));
    *grid.last_mut().expect("nonempty") = tau_max;
    grid
}

/// Refuses prior/effect-prior/k combinations whose posterior is not integrable.
///
/// As τ grows the integrated likelihood decays like `τ^(1-k)` under a flat
/// effect prior and like `τ^(-k)` under a normal one; the improper uniform
/// prior is flat and the Jeffreys prior decays like `1/τ`.
fn check_integrable(k: usize, prior: &HeterogeneityPrior, eprior: &EffectPrior) -> Result<()> {
    let normal = matches!(eprior, EffectPrior::Normal { .. });
    let need = match prior {
        HeterogeneityPrior::ImproperUniform => {
            if normal {
                2
            } else {
                3
            }
        }
        HeterogeneityPrior::Jeffreys => {
            if normal {
                1
            } else {
                2
            }
        }
        _ => 1,
    };
    if k < need {
        return Err(Error::ImproperPosterior(format!(
            "the {} prior needs at least {need} studies under {} effect prior, got {k}",
            prior.family_name(),
            if normal { "a normal" } else { "an improper uniform" }
        )));
    }
    Ok(())
}

impl GridPosterior {
    fn evaluate(
        grid: Vec<f64>,
        y: &[f64],
        sigma: &[f64],
        prior: &HeterogeneityPrior,
        pseudo: Option<(f64, f64)>,
        exec: Execution,
    ) -> Result<Self> {
        let terms = par::map(exec, &grid, |&t| {
            let lp = match prior {
                HeterogeneityPrior::Jeffreys => jeffreys_log_density(t, sigma),
                other => other.log_density(t),
            };
            (lp, node_terms(t, y, sigma, pseudo))
        });
        let mut log_post = Vec::with_capacity(grid.len());
        let mut cond_mu_mean = Vec::with_capacity(grid.len());
        let mut cond_mu_sd = Vec::with_capacity(grid.len());
        let mut log_marginal_terms = Vec::with_capacity(grid.len());
        for (lp, nt) in terms {
            log_post.push(lp? + nt.log_marginal);
            cond_mu_mean.push(nt.mu_mean);
            cond_mu_sd.push(nt.mu_sd);
            log_marginal_terms.push(nt.log_marginal);
        }
        let top = log_post.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() || log_post.iter().any(|v| v.is_nan()) {
            return Err(Error::numeric("posterior density is not finite on the τ grid"));
        }
        let mut density: Vec<f64> = log_post.iter().map(|v| (v - top).exp()).collect();
        let n = grid.len();
        let mut cdf = vec![0.0; n];
        for j in 1..n {
            cdf[j] = cdf[j - 1] + 0.5 * (grid[j] - grid[j - 1]) * (density[j - 1] + density[j]);
        }
        let z = cdf[n - 1];
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::numeric("posterior of τ could not be normalized"));
        }
        density.iter_mut().for_each(|d| *d /= z);
        cdf.iter_mut().for_each(|c| *c /= z);
        cdf[n - 1] = 1.0;
        let mut weights = vec![0.0; n];
        for j in 0..n {
            let left = if j > 0 { grid[j] - grid[j - 1] } else { 0.0 };
            let right = if j + 1 < n { grid[j + 1] - grid[j] } else { 0.0 };
            weights[j] = 0.5 * (left + right) * density[j];
        }
        Ok(Self {
            tau_grid: grid,
            post_density: density,
            post_cdf: cdf,
            weights,
            cond_mu_mean,
            cond_mu_sd,
            log_marginal_terms,
            y: y.to_vec(),
            sigma: sigma.to_vec(),
        })
    }

    /// Number of studies.
    pub fn k(&self) -> usize {
        self.y.len()
    }

    /// Posterior density of τ, linear between nodes and 0 beyond the grid.
    pub fn tau_density(&self, x: f64) -> f64 {
        let g = &self.tau_grid;
        if !(x >= 0.0) || x > g[g.len() - 1] {
            return 0.0;
        }
        let j = (g.partition_point(|&t| t <= x)).clamp(1, g.len() - 1) - 1;
        let u = (x - g[j]) / (g[j + 1] - g[j]);
        self.post_density[j] * (1.0 - u) + self.post_density[j + 1] * u
    }

    pub fn tau_cdf(&self, x: f64) -> f64 {
        let g = &self.tau_grid;
        if !(x > 0.0) {
            return 0.0;
        }
        if x >= g[g.len() - 1] {
            return 1.0;
        }
        let j = g.partition_point(|&t| t <= x) - 1;
        let h = g[j + 1] - g[j];
        let u = x - g[j];
        let (d0, d1) = (self.post_density[j], self.post_density[j + 1]);
        self.post_cdf[j] + d0 * u + (d1 - d0) * u * u / (2.0 * h)
    }

    pub fn tau_quantile(&self, p: f64) -> f64 {
        let g = &self.tau_grid;
        let c = &self.post_cdf;
        if p <= 0.0 {
            return 0.0;
        }
        if p >= 1.0 {
            return g[g.len() - 1];
        }
        let j = c.partition_point(|&v| v <= p).clamp(1, c.len() - 1) - 1;
        let h = g[j + 1] - g[j];
        let (d0, d1) = (self.post_density[j], self.post_density[j + 1]);
        let r = p - c[j];
        // Solve d0·u + (d1 - d0)·u²/(2h) = r in the stable form.
        let a = (d1 - d0) / (2.0 * h);
        let disc = (d0 * d0 + 4.0 * a * r).max(0.0);
        let denom = d0 + disc.sqrt();
        let u = if denom > 0.0 { 2.0 * r / denom } else { 0.0 };
        g[j] + u.clamp(0.0, h)
    }

    /// Posterior median and credible interval of τ; shortest intervals that
    /// can start at 0 do.
    pub fn summarize_tau(&self, level: f64, kind: CiKind) -> Result<Summary> {
        check_level(level)?;
        let (ci_lo, ci_hi) = match kind {
            CiKind::Central => (
                self.tau_quantile(0.5 * (1.0 - level)),
                self.tau_quantile(0.5 * (1.0 + level)),
            ),
            CiKind::Shortest => {
                let tie = 1e-9 * self.tau_quantile(level);
                numeric::shortest_interval(|p| self.tau_quantile(p), level, tie)
            }
        };
        Ok(Summary {
            median: self.tau_quantile(0.5),
            ci_lo,
            ci_hi,
            level,
            ci_kind: kind,
        })
    }

    /// Posterior mode of τ: the grid argmax refined by a parabola through its
    /// neighbours.
    pub fn map_tau(&self) -> f64 {
        let d = &self.post_density;
        let g = &self.tau_grid;
        let j = (0..d.len()).fold(0, |best, i| if d[i] > d[best] { i } else { best });
        if j == 0 || j + 1 == d.len() {
            return g[j];
        }
        let (x0, x1, x2) = (g[j - 1], g[j], g[j + 1]);
        let (f0, f1, f2) = (d[j - 1], d[j], d[j + 1]);
        let num = (x1 - x0).powi(2) * (f1 - f2) - (x1 - x2).powi(2) * (f1 - f0);
        let den = (x1 - x0) * (f1 - f2) - (x1 - x2) * (f1 - f0);
        if den == 0.0 {
            return x1;
        }
        (x1 - 0.5 * num / den).clamp(x0, x2)
    }

    /// Marginal posterior of μ.
    pub fn mu_mixture(&self) -> NormalMixture {
        NormalMixture::new(&self.weights, &self.cond_mu_mean, &self.cond_mu_sd)
    }

    /// Posterior predictive of a new study's effect θ_{k+1}.
    pub fn prediction_mixture(&self) -> NormalMixture {
        let sds: Vec<f64> = self
            .tau_grid
            .iter()
            .zip(&self.cond_mu_sd)
            .map(|(t, s)| (s * s + t * t).sqrt())
            .collect();
        NormalMixture::new(&self.weights, &self.cond_mu_mean, &sds)
    }

    /// Conditional mean and sd of the shrinkage estimate θᵢ at node `j`.
    pub fn shrinkage_moments(&self, i: usize, j: usize) -> (f64, f64) {
        let t2 = self.tau_grid[j].powi(2);
        let s2 = self.sigma[i].powi(2);
        let b = t2 / (s2 + t2);
        let mean = b * self.y[i] + (1.0 - b) * self.cond_mu_mean[j];
        let var = b * s2 + (1.0 - b).powi(2) * self.cond_mu_sd[j].powi(2);
        (mean, var.sqrt())
    }

    /// Marginal posterior of the study-specific effect θᵢ.
    pub fn shrinkage_mixture(&self, i: usize) -> Result<NormalMixture> {
        if i >= self.k() {
            return Err(Error::domain(format!("study index {i} out of range for k = {}", self.k())));
        }
        let (means, sds): (Vec<f64>, Vec<f64>) =
            (0..self.tau_grid.len()).map(|j| self.shrinkage_moments(i, j)).unzip();
        Ok(NormalMixture::new(&self.weights, &means, &sds))
    }

    pub fn mu_marginal_posterior(&self, level: f64, kind: CiKind) -> Result<Summary> {
        check_level(level)?;
        Ok(self.mu_mixture().summary(level, kind))
    }

    pub fn shrinkage_posterior(&self, i: usize, level: f64, kind: CiKind) -> Result<Summary> {
        check_level(level)?;
        Ok(self.shrinkage_mixture(i)?.summary(level, kind))
    }

    pub fn prediction_posterior(&self, level: f64, kind: CiKind) -> Result<Summary> {
        check_level(level)?;
        Ok(self.prediction_mixture().summary(level, kind))
    }
}

/// Tabulates `p(τ | y)` for the given priors on a grid of `nodes` points.
///
/// A first pass runs to the prior's `1 - 1e-9` quantile (or `10³·max σᵢ` for
/// improper priors); the grid is then rebuilt up to the point beyond which
/// less than `1e-8` posterior mass remains.
pub fn tau_marginal_posterior(
    data: &Dataset,
    prior: &HeterogeneityPrior,
    eprior: &EffectPrior,
    nodes: usize,
    exec: Execution,
) -> Result<GridPosterior> {
    let prior = prior.validated()?;
    if nodes < MIN_GRID_NODES {
        return Err(Error::domain(format!("the τ grid needs at least {MIN_GRID_NODES} nodes, got {nodes}")));
    }
    check_integrable(data.len(), &prior, eprior)?;
    let y = data.estimates();
    let sigma = data.sigmas();
    let pseudo = match *eprior {
        EffectPrior::ImproperUniform => None,
        EffectPrior::Normal { mean, sd } => Some((mean, sd)),
    };
    let sigma_max = sigma.iter().copied().fold(0.0, f64::max);
    let cap = if prior.is_proper() {
        prior.quantile(1.0 - 1e-9)?
    } else {
        IMPROPER_CAP * sigma_max
    };
    let first = GridPosterior::evaluate(build_grid(nodes, sigma_max.min(cap), cap), &y, &sigma, &prior, pseudo, exec)?;
    let j = first
        .post_cdf
        .iter()
        .position(|&c| 1.0 - c < TAIL_MASS)
        .unwrap_or(nodes - 1)
        .max(1);
    let tau_max = first.tau_grid[(j + 1).min(nodes - 1)];
    if tau_max >= cap {
        return Ok(first);
    }
    GridPosterior::evaluate(build_grid(nodes, sigma_max.min(tau_max), tau_max), &y, &sigma, &prior, pseudo, exec)
}

/// Everything a meta-analysis reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub prior: HeterogeneityPrior,
    pub effect_prior: EffectPrior,
    pub studies: Vec<EffectEstimate>,
    pub tau: Summary,
    pub mu: Summary,
    /// One entry per study, in input order.
    pub shrinkage: Vec<Summary>,
    pub prediction: Summary,
    pub map_tau: f64,
    pub uisd: Option<UisdEstimate>,
    pub grid_nodes: usize,
}

pub fn analyze(
    data: &Dataset,
    prior: &HeterogeneityPrior,
    eprior: &EffectPrior,
    options: &AnalysisOptions,
) -> Result<AnalysisReport> {
    check_level(options.level)?;
    let gp = tau_marginal_posterior(data, prior, eprior, options.grid_nodes, options.execution)?;
    let (level, kind) = (options.level, options.ci_kind);
    let k = data.len();
    // Study rows first, then μ and the prediction; all independent.
    let mut summaries = par::map_range(options.execution, k + 2, |i| match i {
        i if i < k => gp.shrinkage_posterior(i, level, kind),
        i if i == k => gp.mu_marginal_posterior(level, kind),
        _ => gp.prediction_posterior(level, kind),
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let prediction = summaries.pop().expect("k + 2 summaries");
    let mu = summaries.pop().expect("k + 2 summaries");
    Ok(AnalysisReport {
        prior: *prior,
        effect_prior: *eprior,
        studies: data.studies().to_vec(),
        tau: gp.summarize_tau(level, kind)?,
        mu,
        shrinkage: summaries,
        prediction,
        map_tau: gp.map_tau(),
        uisd: empirical_uisd(data.studies()).ok(),
        grid_nodes: options.grid_nodes,
    })
}
