//! Helpers shared by the integration suites: an adaptive-quadrature oracle,
//! distribution fixtures, and closeness assertions.
#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sltbeta::discount::{hyperbolic_mean, Delay, DiscountParams};
use sltbeta::dist::{sample_beta, BetaMeanScale, SltConfig};
use sltbeta::series::IndifferenceSeries;

pub fn assert_close(actual: f64, expected: f64, tol: f64) {
    assert!(
        (actual - expected).abs() <= tol,
        "expected {expected}, got {actual} (tol {tol})"
    );
}

pub fn assert_rel_close(actual: f64, expected: f64, rel: f64) {
    let scale = expected.abs().max(f64::MIN_POSITIVE);
    assert!(
        ((actual - expected) / scale).abs() <= rel,
        "expected {expected}, got {actual} (rel tol {rel})"
    );
}

fn simpson(a: f64, fa: f64, fm: f64, b: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, fa, flm, m, fm);
    let right = simpson(m, fm, frm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adapt(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
        + adapt(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(a, fa, fm, b, fb);
    adapt(&f, a, fa, b, fb, m, fm, whole, tol, 60)
}

/// Two-sided Kolmogorov-Smirnov statistic of a sorted sample against `cdf`.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn mean_at(psi: f64, delay: f64) -> f64 {
    let params = DiscountParams::new(psi).unwrap();
    hyperbolic_mean(params, Delay::new(delay).unwrap())
}

/// Series whose points sit exactly on the hyperbolic mean curve.
pub fn noiseless_series(id: &str, psi: f64, grid: &[f64]) -> IndifferenceSeries {
    let rows: Vec<(f64, f64)> = grid.iter().map(|&d| (d, mean_at(psi, d))).collect();
    IndifferenceSeries::from_normalized(id, &rows).unwrap()
}

/// Beta-noise series around the hyperbolic curve, clamped to the interior
/// so every estimator accepts it.
pub fn interior_series(
    id: &str,
    psi: f64,
    phi: f64,
    grid: &[f64],
    rng: &mut impl Rng,
) -> IndifferenceSeries {
    let rows: Vec<(f64, f64)> = grid
        .iter()
        .map(|&d| {
            let shape = BetaMeanScale::new(mean_at(psi, d), phi).unwrap().to_shape();
            let y = sample_beta(shape, rng).clamp(1e-3, 1.0 - 1e-3);
            (d, y)
        })
        .collect();
    IndifferenceSeries::from_normalized(id, &rows).unwrap()
}

/// One draw from the SLT model: a beta variate conditioned on the retained
/// window, mapped back onto [0, 1].
pub fn sample_slt(mu: f64, phi: f64, cfg: SltConfig, rng: &mut impl Rng) -> f64 {
    let shape = BetaMeanScale::new(mu, phi).unwrap().to_shape();
    let (lower, upper) = (cfg.l(), 1.0 / cfg.s() + cfg.l());
    for _ in 0..10_000 {
        let y = sample_beta(shape, rng);
        if (lower..=upper).contains(&y) {
            return ((y - lower) * cfg.s()).clamp(0.0, 1.0);
        }
    }
    panic!("rejection sampler stalled at mu={mu}, phi={phi}");
}

/// Series drawn from the SLT model itself.
pub fn slt_series(
    id: &str,
    psi: f64,
    phi: f64,
    cfg: SltConfig,
    grid: &[f64],
    rng: &mut impl Rng,
) -> IndifferenceSeries {
    let rows: Vec<(f64, f64)> = grid
        .iter()
        .map(|&d| (d, sample_slt(mean_at(psi, d), phi, cfg, rng)))
        .collect();
    IndifferenceSeries::from_normalized(id, &rows).unwrap()
}
