//! Per-subject fitting of the hyperbolic discounting function by three
//! methods: NLS, standard beta regression MLE, and SLT beta regression MLE.
//!
//! All three estimate psi = ln(k). The beta methods additionally estimate
//! the scale phi, optimized as tau = ln(phi) so the search box is plain.
//! The beta-family likelihood is maximized by Nelder-Mead from an NLS warm
//! start plus deterministically jittered extra starts; NLS itself needs only
//! a one-dimensional grid-plus-golden-section search.

use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::discount::{hyperbolic_mean, Delay, DiscountParams};
use crate::dist::{beta_variance, slt_log_pdf, BetaMeanScale, SltConfig};
use crate::optim::{minimize, Bounds, OptimOptions, OptimResult};
use crate::series::IndifferenceSeries;

/// Search box for psi = ln(k).
pub const PSI_LOWER: f64 = -20.0;
pub const PSI_UPPER: f64 = 5.0;

/// Search box for tau = ln(phi), chosen to keep the special functions well
/// inside their accurate range.
pub const TAU_LOWER: f64 = -5.0;
pub const TAU_UPPER: f64 = 15.0;

/// Estimation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Nls,
    Beta,
    SltBeta,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Nls => "nls",
            Method::Beta => "beta",
            Method::SltBeta => "slt",
        }
    }

    pub fn parse(label: &str) -> Option<Self> {
        match label {
            "nls" => Some(Method::Nls),
            "beta" => Some(Method::Beta),
            "slt" => Some(Method::SltBeta),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One subject's estimate.
///
/// `dispersion` is the residual variance estimate for NLS and phi for the
/// beta methods. `objective` is the minimized SSE for NLS and the maximized
/// log-likelihood for the beta methods.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub subject_id: String,
    pub method: Method,
    pub psi_hat: f64,
    pub dispersion: f64,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub notes: String,
}

/// Typed fit-layer failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    /// The defining limitation of standard beta regression: its density is
    /// undefined at 0 and 1, so such observations must be rejected visibly.
    #[error(
        "subject {subject_id}: indifference point {value} at delay {delay} lies on the \
         boundary of [0, 1], where the standard beta likelihood is undefined"
    )]
    BoundaryValue {
        subject_id: String,
        delay: f64,
        value: f64,
    },
    #[error("subject {subject_id}: {method} fit did not converge")]
    Unconverged { subject_id: String, method: Method },
}

/// Knobs shared by the likelihood-based fits.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub optim: OptimOptions,
    /// Total Nelder-Mead starts per subject: the warm start plus
    /// `restarts - 1` jittered ones.
    pub restarts: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            optim: OptimOptions::default(),
            restarts: 3,
        }
    }
}

const NLS_GRID_STEP: f64 = 0.05;
const GOLDEN_TOL: f64 = 1e-10;
const BOUND_PROXIMITY: f64 = 1e-6;

fn sse(series: &IndifferenceSeries, psi: f64) -> f64 {
    let k = psi.exp();
    series
        .observations()
        .iter()
        .map(|obs| {
            let mu = if obs.delay.value() == 0.0 {
                1.0
            } else {
                1.0 / (1.0 + k * obs.delay.value())
            };
            (obs.y - mu).powi(2)
        })
        .sum()
}

/// Golden-section minimization on [a, b], assuming a bracketed minimum.
fn golden_section<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> (f64, usize) {
    const INV_PHI: f64 = 0.6180339887498949;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut evals = 2;
    while (b - a) > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        evals += 1;
    }
    ((a + b) / 2.0, evals)
}

/// Nonlinear least squares for the hyperbolic mean.
///
/// A coarse grid over the psi box locates the basin; golden-section polishes
/// it. The residual variance uses the d - 1 denominator, which for the
/// one-parameter mean structure is also the usual n - p convention.
pub fn fit_nls(series: &IndifferenceSeries) -> FitResult {
    let n_grid = ((PSI_UPPER - PSI_LOWER) / NLS_GRID_STEP).round() as usize;
    let mut best_idx = 0;
    let mut best_val = f64::INFINITY;
    for i in 0..=n_grid {
        let psi = PSI_LOWER + i as f64 * NLS_GRID_STEP;
        let val = sse(series, psi);
        if val < best_val {
            best_val = val;
            best_idx = i;
        }
    }
    let bracket_lo = (PSI_LOWER + best_idx.saturating_sub(1) as f64 * NLS_GRID_STEP).max(PSI_LOWER);
    let bracket_hi = (PSI_LOWER + (best_idx + 1) as f64 * NLS_GRID_STEP).min(PSI_UPPER);
    let (psi_hat, golden_evals) =
        golden_section(|psi| sse(series, psi), bracket_lo, bracket_hi, GOLDEN_TOL);
    let objective = sse(series, psi_hat);
    let sigma2 = objective / (series.len() - 1) as f64;

    let mut notes: Vec<&str> = Vec::new();
    let ys = series.ys();
    if ys.windows(2).all(|w| w[0] == w[1]) {
        notes.push("degenerate series: all indifference points equal");
    }
    if psi_hat - PSI_LOWER < BOUND_PROXIMITY {
        notes.push("psi at lower optimization bound; no measurable discounting");
    } else if PSI_UPPER - psi_hat < BOUND_PROXIMITY {
        notes.push("psi at upper optimization bound");
    }

    FitResult {
        subject_id: series.subject_id().to_string(),
        method: Method::Nls,
        psi_hat,
        dispersion: sigma2,
        objective,
        converged: true,
        iterations: n_grid + 1 + golden_evals,
        notes: notes.join("; "),
    }
}

/// Negative SLT log-likelihood at x = (psi, tau). Any parameter point where
/// an observation becomes impossible or a mean leaves (0, 1) evaluates to
/// +inf, which the optimizer treats as a worst case.
fn negative_log_likelihood(series: &IndifferenceSeries, cfg: SltConfig, x: &[f64]) -> f64 {
    let phi = x[1].exp();
    let params = match DiscountParams::new(x[0]) {
        Ok(p) => p,
        Err(_) => return f64::INFINITY,
    };
    let mut ll = 0.0;
    for obs in series.observations() {
        let mu = hyperbolic_mean(params, obs.delay);
        let Ok(mean_scale) = BetaMeanScale::new(mu, phi) else {
            return f64::INFINITY;
        };
        let term = slt_log_pdf(obs.y, mean_scale, cfg);
        if !term.is_finite() {
            return f64::INFINITY;
        }
        ll += term;
    }
    -ll
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn splitmix_unit(state: &mut u64) -> f64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

/// Deterministic start-point jitter derived from the subject id, so restarts
/// are reproducible run to run and independent of batch order.
fn jitter_offsets(subject_id: &str, count: usize) -> Vec<(f64, f64)> {
    let mut state = fnv1a(subject_id.as_bytes());
    (0..count)
        .map(|_| {
            let dpsi = 2.0 * (splitmix_unit(&mut state) - 0.5);
            let dtau = 2.0 * (splitmix_unit(&mut state) - 0.5);
            (dpsi, dtau)
        })
        .collect()
}

/// Moment-matched warm start for the beta-family fits: psi from NLS, phi
/// from VAR(y) = mu(1-mu)/(1+phi) solved with the pooled NLS residual
/// variance.
fn warm_start(series: &IndifferenceSeries, nls: &FitResult) -> [f64; 2] {
    let params = DiscountParams::new(nls.psi_hat).expect("NLS psi is finite");
    let mean_bernoulli_var = series
        .observations()
        .iter()
        .map(|obs| {
            let mu = hyperbolic_mean(params, obs.delay);
            mu * (1.0 - mu)
        })
        .sum::<f64>()
        / series.len() as f64;
    let phi0 = mean_bernoulli_var / nls.dispersion.max(1e-6) - 1.0;
    let tau0 = phi0.max(1e-2).ln().clamp(TAU_LOWER, TAU_UPPER);
    [nls.psi_hat, tau0]
}

fn fit_beta_family(
    series: &IndifferenceSeries,
    cfg: SltConfig,
    method: Method,
    opts: &FitOptions,
) -> FitResult {
    let nls = fit_nls(series);
    let start = warm_start(series, &nls);
    let bounds = Bounds::new(vec![PSI_LOWER, TAU_LOWER], vec![PSI_UPPER, TAU_UPPER]);

    let extra = opts.restarts.saturating_sub(1);
    let mut starts = vec![start];
    for (dpsi, dtau) in jitter_offsets(series.subject_id(), extra) {
        starts.push([start[0] + dpsi, start[1] + dtau]);
    }

    let mut best: Option<OptimResult> = None;
    let mut total_evals = 0;
    for candidate in &starts {
        let run = minimize(
            |x| negative_log_likelihood(series, cfg, x),
            candidate,
            &bounds,
            &opts.optim,
        );
        total_evals += run.evaluations;
        if best.as_ref().map_or(true, |b| run.value < b.value) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start");

    let psi_hat = best.x[0];
    let tau_hat = best.x[1];
    let objective = -best.value;
    let converged = best.converged && objective.is_finite();

    let mut notes: Vec<&str> = Vec::new();
    if !best.converged {
        notes.push("evaluation budget exhausted before convergence");
    }
    if !objective.is_finite() {
        notes.push("log-likelihood not finite at any evaluated point");
    }
    if tau_hat - TAU_LOWER < BOUND_PROXIMITY || TAU_UPPER - tau_hat < BOUND_PROXIMITY {
        notes.push("phi at optimization bound");
    }
    if psi_hat - PSI_LOWER < BOUND_PROXIMITY || PSI_UPPER - psi_hat < BOUND_PROXIMITY {
        notes.push("psi at optimization bound");
    }

    FitResult {
        subject_id: series.subject_id().to_string(),
        method,
        psi_hat,
        dispersion: tau_hat.exp(),
        objective,
        converged,
        iterations: total_evals,
        notes: notes.join("; "),
    }
}

/// SLT beta regression MLE. Boundary observations are permitted: with a
/// valid truncating config their density is finite and positive.
pub fn fit_slt_beta_with(
    series: &IndifferenceSeries,
    cfg: SltConfig,
    opts: &FitOptions,
) -> FitResult {
    fit_beta_family(series, cfg, Method::SltBeta, opts)
}

/// [`fit_slt_beta_with`] under default options.
pub fn fit_slt_beta(series: &IndifferenceSeries, cfg: SltConfig) -> FitResult {
    fit_slt_beta_with(series, cfg, &FitOptions::default())
}

/// Standard beta regression MLE: the SLT fit under the identity transform,
/// after rejecting any series that touches the boundary.
pub fn fit_beta_with(series: &IndifferenceSeries, opts: &FitOptions) -> Result<FitResult, FitError> {
    if let Some(obs) = series.boundary_observations().next() {
        return Err(FitError::BoundaryValue {
            subject_id: series.subject_id().to_string(),
            delay: obs.delay.value(),
            value: obs.y,
        });
    }
    Ok(fit_beta_family(series, SltConfig::identity(), Method::Beta, opts))
}

/// [`fit_beta_with`] under default options.
pub fn fit_beta(series: &IndifferenceSeries) -> Result<FitResult, FitError> {
    fit_beta_with(series, &FitOptions::default())
}

/// Model-implied variance at each delay: mu(1-mu)/(1+phi) for the beta
/// methods, the constant residual variance for NLS.
pub fn model_variance_by_delay(fit: &FitResult, delays: &[Delay]) -> Result<Vec<f64>, FitError> {
    if !fit.converged {
        return Err(FitError::Unconverged {
            subject_id: fit.subject_id.clone(),
            method: fit.method,
        });
    }
    match fit.method {
        Method::Nls => Ok(vec![fit.dispersion; delays.len()]),
        Method::Beta | Method::SltBeta => {
            let params = DiscountParams::new(fit.psi_hat).expect("fitted psi is finite");
            Ok(delays
                .iter()
                .map(|&d| {
                    let mu = hyperbolic_mean(params, d);
                    let mean_scale = BetaMeanScale::new(mu, fit.dispersion)
                        .expect("fitted mean and phi are valid");
                    beta_variance(mean_scale)
                })
                .collect())
        }
    }
}

/// One subject's outcome under one method.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectFit {
    pub subject_id: String,
    pub method: Method,
    pub outcome: Result<FitResult, FitError>,
}

/// Applies `method` to one series.
pub fn fit_one(
    series: &IndifferenceSeries,
    method: Method,
    cfg: SltConfig,
    opts: &FitOptions,
) -> Result<FitResult, FitError> {
    match method {
        Method::Nls => Ok(fit_nls(series)),
        Method::Beta => fit_beta_with(series, opts),
        Method::SltBeta => Ok(fit_slt_beta_with(series, cfg, opts)),
    }
}

/// Fits every series under every requested method, fanning subjects out to
/// the rayon pool. Per-subject failures are carried in the output rather
/// than aborting the batch, and the output order is the deterministic
/// (input series, requested method) order regardless of scheduling.
pub fn fit_population(
    population: &[IndifferenceSeries],
    methods: &[Method],
    cfg: SltConfig,
    opts: &FitOptions,
) -> Vec<SubjectFit> {
    let per_series: Vec<Vec<SubjectFit>> = population
        .par_iter()
        .map(|series| {
            methods
                .iter()
                .map(|&method| SubjectFit {
                    subject_id: series.subject_id().to_string(),
                    method,
                    outcome: fit_one(series, method, cfg, opts),
                })
                .collect()
        })
        .collect();
    per_series.into_iter().flatten().collect()
}
