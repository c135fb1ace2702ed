//! Root finding, one-dimensional minimization and adaptive quadrature.

/// Solves `f(x) = target` for a nondecreasing `f` on the bracket `[lo, hi]`.
///
/// Newton steps use `fprime`; any step leaving the current bracket falls back
/// to bisection, so convergence is guaranteed as long as the bracket is valid.
pub fn invert_monotone<F, D>(f: F, fprime: D, target: f64, mut lo: f64, mut hi: f64) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut x = 0.5 * (lo + hi);
    for _ in 0..300 {
        let fx = f(x) - target;
        if fx == 0.0 {
            return x;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        let d = fprime(x);
        let newton = x - fx / d;
        x = if d > 0.0 && newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (hi - lo).abs() < 1e-300 {
            break;
        }
    }
    x
}

/// Solves `f(x) = target` for a nondecreasing `f` by pure bisection.
pub fn bisect_monotone<F: Fn(f64) -> f64>(f: F, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Golden-section search for the minimum of `f` on `[a, b]`.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Shortest interval `[Q(p), Q(p + level)]` over `p ∈ [0, 1 - level]`.
///
/// `quantile` must accept probabilities in `[0, 1)`. Width differences below
/// `tie` resolve toward the `p = 0` boundary.
pub fn shortest_interval<Q: Fn(f64) -> f64>(quantile: Q, level: f64, tie: f64) -> (f64, f64) {
    let width = |p: f64| quantile(p + level) - quantile(p);
    let slack = 1.0 - level;
    // Coarse scan guards against the golden search locking onto a boundary
    // plateau; the search then refines around the best scan point.
    let n = 20;
    let step = slack / n as f64;
    let mut best_p = 0.0;
    let mut best_w = width(0.0);
    for i in 1..n {
        let p = i as f64 * step;
        let w = width(p);
        if w < best_w {
            best_w = w;
            best_p = p;
        }
    }
    // Keep the top end strictly below 1 so Q(p + level) stays finite.
    let top = slack * (1.0 - 1e-9);
    let (p, w) = golden_min(
        width,
        (best_p - step).max(0.0),
        (best_p + step).min(top),
        1e-8 * slack,
    );
    let (p, _) = if w < best_w { (p, w) } else { (best_p, best_w) };
    let boundary = width(0.0);
    let p = if boundary <= width(p) + tie { 0.0 } else { p };
    (quantile(p), quantile(p + level))
}

// 15-point Gauss–Kronrod nodes/weights with the embedded 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod integration of `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let mut panels = vec![{
        let (v, e) = gk15(&f, a, b);
        (a, b, v, e)
    }];
    let mut err: f64 = panels[0].3;
    let mut iterations = 0;
    while err > abs_tol && iterations < 2000 {
        iterations += 1;
        // bisect the panel with the largest error estimate
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (lo, hi, _, e) = panels.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        err += e1 + e2 - e;
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
    panels.iter().map(|p| p.2).sum()
}
