//! Brute-force reference for the NNHM posterior.
//!
//! The joint posterior p(μ, τ | y) is evaluated from the raw normal likelihood
//! on a dense rectangle and integrated with the trapezoid rule. τ and μ
//! summaries come from the tabulated marginals. Prediction and shrinkage
//! quantiles are roots of CDFs obtained by summing the conditional normal
//! laws of θ over all grid cells; their shortest intervals solve
//! `F(hi) - F(lo) = level, f(lo) = f(hi)` by Newton's method.
//!
//! Nothing here calls into the engine; the priors have their own closed forms.

#![allow(dead_code)]

use std::f64::consts::PI;

/// The four priors used for the equivalence checks.
#[derive(Debug, Clone, Copy)]
pub enum OraclePrior {
    HalfNormal(f64),
    HalfLogistic(f64),
    Lomax(f64, f64),
}

impl OraclePrior {
    pub fn density(self, t: f64) -> f64 {
        match self {
            OraclePrior::HalfNormal(s) => (2.0 / PI).sqrt() / s * (-0.5 * (t / s).powi(2)).exp(),
            OraclePrior::HalfLogistic(s) => {
                let e = (-t / s).exp();
                2.0 * e / (s * (1.0 + e).powi(2))
            }
            OraclePrior::Lomax(a, l) => a / l * (1.0 + t / l).powf(-(a + 1.0)),
        }
    }

    pub fn q99(self) -> f64 {
        match self {
            OraclePrior::HalfNormal(s) => 2.575_829_303_548_901 * s,
            OraclePrior::HalfLogistic(s) => s * (1.99f64 / 0.01).ln(),
            OraclePrior::Lomax(a, l) => l * (100f64.powf(1.0 / a) - 1.0),
        }
    }

    pub fn spec(self) -> String {
        match self {
            OraclePrior::HalfNormal(s) => format!("halfnormal({s})"),
            OraclePrior::HalfLogistic(s) => format!("halflogistic({s})"),
            OraclePrior::Lomax(a, l) => format!("lomax({a},{l})"),
        }
    }
}

fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

fn big_phi(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSummary {
    pub median: f64,
    pub lo: f64,
    pub hi: f64,
}

pub struct Oracle {
    y: Vec<f64>,
    sigma: Vec<f64>,
    taus: Vec<f64>,
    mus: Vec<f64>,
    h_tau: f64,
    h_mu: f64,
    /// Normalized joint density, row-major by τ.
    joint: Vec<f64>,
    /// Smallest conditional sd of μ, bounding how coarsely rows may be summed.
    sd0: f64,
}

pub const N_TAU: usize = 2001;
pub const N_MU: usize = 4001;
const N_PILOT: usize = 801;
/// Marginal density relative to its maximum below which the pilot pass
/// considers the joint negligible.
const SUPPORT_CUTOFF: f64 = 1e-13;

fn uniform(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + i as f64 * h).collect()
}

/// Normalized joint density on `taus × mus` (row-major by τ), by the
/// trapezoid rule.
fn joint_on(y: &[f64], sigma: &[f64], prior: OraclePrior, taus: &[f64], mus: &[f64]) -> Vec<f64> {
    let (nt, nm) = (taus.len(), mus.len());
    let mut joint = vec![0.0; nt * nm];
    for (j, &t) in taus.iter().enumerate() {
        let lp = prior.density(t).ln();
        let vars: Vec<f64> = sigma.iter().map(|s| s * s + t * t).collect();
        let c: f64 = vars.iter().map(|v| -0.5 * (2.0 * PI * v).ln()).sum();
        for (i, &m) in mus.iter().enumerate() {
            let mut ll = c + lp;
            for (yk, v) in y.iter().zip(&vars) {
                ll -= 0.5 * (yk - m).powi(2) / v;
            }
            joint[j * nm + i] = ll;
        }
    }
    let top = joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    joint.iter_mut().for_each(|v| *v = (*v - top).exp());
    let (ht, hm) = (taus[1] - taus[0], mus[1] - mus[0]);
    let mut z = 0.0;
    for j in 0..nt {
        let wt = if j == 0 || j == nt - 1 { 0.5 } else { 1.0 };
        for i in 0..nm {
            let wm = if i == 0 || i == nm - 1 { 0.5 } else { 1.0 };
            z += wt * wm * joint[j * nm + i];
        }
    }
    z *= ht * hm;
    joint.iter_mut().for_each(|v| *v /= z);
    joint
}

/// First and last index where `f` exceeds the cutoff, widened by one node.
fn support(f: &[f64]) -> (usize, usize) {
    let top = f.iter().copied().fold(0.0, f64::max);
    let keep = |v: &f64| *v > SUPPORT_CUTOFF * top;
    let lo = f.iter().position(keep).unwrap_or(0).saturating_sub(1);
    let hi = (f.iter().rposition(keep).unwrap_or(f.len() - 1) + 1).min(f.len() - 1);
    (lo, hi)
}

impl Oracle {
    /// A pilot pass over `[μ̂ ± 10 W] × [0, 10 W]`, `W = max(max σ, prior q99)`
    /// and μ̂ the inverse-variance weighted mean, locates the support of the
    /// joint; the dense grid then covers that support.
    pub fn new(y: &[f64], sigma: &[f64], prior: OraclePrior) -> Self {
        let s_max = sigma.iter().copied().fold(0.0, f64::max);
        let prec: f64 = sigma.iter().map(|s| 1.0 / (s * s)).sum();
        let mu_hat = y.iter().zip(sigma).map(|(y, s)| y / (s * s)).sum::<f64>() / prec;
        let w = s_max.max(prior.q99());
        let taus = uniform(0.0, 10.0 * w, N_PILOT);
        let mus = uniform(mu_hat - 10.0 * w, mu_hat + 10.0 * w, N_PILOT);
        let pilot = joint_on(y, sigma, prior, &taus, &mus);
        let tau_marg: Vec<f64> = (0..N_PILOT).map(|j| pilot[j * N_PILOT..(j + 1) * N_PILOT].iter().sum()).collect();
        let mu_marg: Vec<f64> = (0..N_PILOT).map(|i| (0..N_PILOT).map(|j| pilot[j * N_PILOT + i]).sum()).collect();
        let (_, t_hi) = support(&tau_marg);
        let (m_lo, m_hi) = support(&mu_marg);
        let taus = uniform(0.0, taus[t_hi], N_TAU);
        let mus = uniform(mus[m_lo], mus[m_hi], N_MU);
        let joint = joint_on(y, sigma, prior, &taus, &mus);
        Self {
            y: y.to_vec(),
            sigma: sigma.to_vec(),
            h_tau: taus[1] - taus[0],
            h_mu: mus[1] - mus[0],
            taus,
            mus,
            joint,
            sd0: prec.powf(-0.5),
        }
    }

    /// τ grid nodes.
    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    fn tau_weight(&self, j: usize) -> f64 {
        self.h_tau * if j == 0 || j == N_TAU - 1 { 0.5 } else { 1.0 }
    }

    /// Marginal density of τ at the grid nodes.
    pub fn tau_marginal(&self) -> Vec<f64> {
        (0..N_TAU)
            .map(|j| {
                let row = &self.joint[j * N_MU..(j + 1) * N_MU];
                self.h_mu * (row.iter().sum::<f64>() - 0.5 * (row[0] + row[N_MU - 1]))
            })
            .collect()
    }

    /// Marginal density of μ at the grid nodes.
    pub fn mu_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; N_MU];
        for j in 0..N_TAU {
            let w = self.tau_weight(j);
            for (o, p) in out.iter_mut().zip(&self.joint[j * N_MU..(j + 1) * N_MU]) {
                *o += w * p;
            }
        }
        out
    }

    pub fn tau_summary(&self, level: f64) -> OracleSummary {
        tabulated_summary(&self.taus, &self.tau_marginal(), level)
    }

    pub fn mu_summary(&self, level: f64) -> OracleSummary {
        tabulated_summary(&self.mus, &self.mu_marginal(), level)
    }

    /// `(F, f, f')` at `t` for θ with `θ | μ, τ_j ~ N(a_j + c_j μ, s_j²)`.
    fn conditional_sum<G: Fn(f64) -> (f64, f64, f64)>(&self, t: f64, law: &G) -> (f64, f64, f64) {
        let (mut f_cdf, mut f_pdf, mut f_d) = (0.0, 0.0, 0.0);
        for j in 0..N_TAU {
            let (a, c, s) = law(self.taus[j]);
            let row = &self.joint[j * N_MU..(j + 1) * N_MU];
            let wt = self.tau_weight(j);
            if s == 0.0 {
                // θ = μ on the τ = 0 row: integrate the row up to t directly.
                let x = (t - a) / c;
                let (cum, dens, slope) = row_cdf(&self.mus, row, self.h_mu, x);
                f_cdf += wt * cum;
                f_pdf += wt * dens / c;
                f_d += wt * slope / (c * c);
                continue;
            }
            // The integrand is smooth on the scale min(s/c, sd0); rows are
            // summed with a stride well below that scale.
            let scale = (s / c).min(self.sd0);
            let stride = ((scale / (3.0 * self.h_mu)).floor() as usize).clamp(1, 64);
            let w = wt * self.h_mu * stride as f64;
            let mut i = (N_MU - 1) % stride / 2;
            while i < N_MU {
                let p = row[i];
                if p > 0.0 {
                    let z = (t - a - c * self.mus[i]) / s;
                    let d = phi(z);
                    f_cdf += w * p * big_phi(z);
                    f_pdf += w * p * d / s;
                    f_d -= w * p * z * d / (s * s);
                }
                i += stride;
            }
        }
        (f_cdf, f_pdf, f_d)
    }

    fn refine<G: Fn(f64) -> (f64, f64, f64)>(&self, law: G, guess: OracleSummary, level: f64) -> OracleSummary {
        let mut m = guess.median;
        for _ in 0..3 {
            let (c, d, _) = self.conditional_sum(m, &law);
            m -= (c - 0.5) / d;
        }
        let (mut lo, mut hi) = (guess.lo, guess.hi);
        for _ in 0..3 {
            let (cl, dl, sl) = self.conditional_sum(lo, &law);
            let (ch, dh, sh) = self.conditional_sum(hi, &law);
            // g1 = F(hi) - F(lo) - level, g2 = f(hi) - f(lo)
            let g1 = ch - cl - level;
            let g2 = dh - dl;
            let (a11, a12, a21, a22) = (-dl, dh, -sl, sh);
            let det = a11 * a22 - a12 * a21;
            lo -= (g1 * a22 - a12 * g2) / det;
            hi -= (a11 * g2 - a21 * g1) / det;
        }
        OracleSummary { median: m, lo, hi }
    }

    /// Posterior predictive of a new study's effect, starting Newton's method
    /// at `guess`.
    pub fn prediction_summary(&self, guess: OracleSummary, level: f64) -> OracleSummary {
        self.refine(|t| (0.0, 1.0, t), guess, level)
    }

    /// Posterior of study `i`'s effect:
    /// `θᵢ | μ, τ, yᵢ ~ N(b yᵢ + (1-b) μ, b σᵢ²)`, `b = τ²/(σᵢ²+τ²)`.
    pub fn shrinkage_summary(&self, i: usize, guess: OracleSummary, level: f64) -> OracleSummary {
        let (yi, si) = (self.y[i], self.sigma[i]);
        self.refine(
            |t| {
                let b = t * t / (si * si + t * t);
                (b * yi, 1.0 - b, (b * si * si).sqrt())
            },
            guess,
            level,
        )
    }
}

/// Cumulative trapezoid integral of `row` up to `x`, with the interpolated
/// density and its slope at `x`.
fn row_cdf(grid: &[f64], row: &[f64], h: f64, x: f64) -> (f64, f64, f64) {
    if x <= grid[0] {
        return (0.0, 0.0, 0.0);
    }
    let last = grid.len() - 1;
    let mut cum = 0.0;
    for k in 0..last {
        if x <= grid[k + 1] {
            let u = x - grid[k];
            let slope = (row[k + 1] - row[k]) / h;
            cum += row[k] * u + 0.5 * slope * u * u;
            return (cum, row[k] + slope * u, slope);
        }
        cum += 0.5 * h * (row[k] + row[k + 1]);
    }
    (cum, 0.0, 0.0)
}

/// A density tabulated on a uniform grid, linear between nodes; its CDF is
/// piecewise quadratic.
struct Tabulated<'a> {
    grid: &'a [f64],
    dens: &'a [f64],
    cdf: Vec<f64>,
    h: f64,
}

impl<'a> Tabulated<'a> {
    fn new(grid: &'a [f64], dens: &'a [f64]) -> Self {
        let h = grid[1] - grid[0];
        let mut cdf = vec![0.0; grid.len()];
        for k in 1..grid.len() {
            cdf[k] = cdf[k - 1] + 0.5 * h * (dens[k - 1] + dens[k]);
        }
        Self { grid, dens, cdf, h }
    }

    fn total(&self) -> f64 {
        self.cdf[self.cdf.len() - 1]
    }

    fn cell(&self, x: f64) -> (usize, f64) {
        let k = (((x - self.grid[0]) / self.h).floor() as isize).clamp(0, self.grid.len() as isize - 2) as usize;
        (k, (x - self.grid[k]).clamp(0.0, self.h))
    }

    fn pdf(&self, x: f64) -> f64 {
        let (k, u) = self.cell(x);
        (self.dens[k] + (self.dens[k + 1] - self.dens[k]) * u / self.h) / self.total()
    }

    fn cdf_at(&self, x: f64) -> f64 {
        let (k, u) = self.cell(x);
        let slope = (self.dens[k + 1] - self.dens[k]) / self.h;
        (self.cdf[k] + self.dens[k] * u + 0.5 * slope * u * u) / self.total()
    }

    fn quantile(&self, p: f64) -> f64 {
        let target = p * self.total();
        let k = self.cdf.partition_point(|&c| c < target).clamp(1, self.cdf.len() - 1) - 1;
        let (mut a, mut b) = (self.grid[k], self.grid[k + 1]);
        for _ in 0..80 {
            let m = 0.5 * (a + b);
            if self.cdf_at(m) < p {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }
}

/// Median and shortest interval of a unimodal tabulated density: the interval
/// with equal density at both ends, or starting at the left end of the grid
/// when the density there is already the larger one.
fn tabulated_summary(grid: &[f64], density: &[f64], level: f64) -> OracleSummary {
    let t = Tabulated::new(grid, density);
    let gap = |p: f64| t.pdf(t.quantile(p + level)) - t.pdf(t.quantile(p));
    let (mut a, mut b) = (0.0, 1.0 - level);
    let p = if gap(a) <= 0.0 {
        0.0
    } else {
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if gap(m) > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    };
    OracleSummary {
        median: t.quantile(0.5),
        lo: if p == 0.0 { grid[0] } else { t.quantile(p) },
        hi: t.quantile(p + level),
    }
}
