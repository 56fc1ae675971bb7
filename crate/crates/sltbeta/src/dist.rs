//! Beta densities in both parameterizations, the scale-location-truncated
//! (SLT) extension, and random sampling.
//!
//! The SLT density arises from the transform y = g/s + l applied to a beta
//! variate, renormalized over the truncation window [l, 1/s + l]. With l > 0
//! and 1/s + l < 1 the transformed argument never touches the ends of the
//! beta support, so the density stays finite and positive at g = 0 and g = 1,
//! which is the entire point of the construction.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use thiserror::Error;

use crate::special::{log_gamma, regularized_incomplete_beta, Probability};

/// Invalid distribution parameter or SLT configuration.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("alpha must be positive and finite, got {0}")]
    BadAlpha(f64),
    #[error("beta must be positive and finite, got {0}")]
    BadBeta(f64),
    #[error("mu must lie strictly inside (0, 1), got {0}")]
    BadMu(f64),
    #[error("phi must be positive and finite, got {0}")]
    BadPhi(f64),
    #[error("SLT config requires s > 0, l >= 0 and 1/s + l <= 1, got s={s}, l={l}")]
    BadSltConfig { s: f64, l: f64 },
}

/// Beta distribution in the (alpha, beta) shape parameterization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaShape {
    alpha: f64,
    beta: f64,
}

impl BetaShape {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, DistError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(DistError::BadAlpha(alpha));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(DistError::BadBeta(beta));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(self) -> f64 {
        self.alpha
    }

    pub fn beta(self) -> f64 {
        self.beta
    }
}

/// Beta distribution in the mean-scale parameterization, with
/// mu = alpha/(alpha+beta) and phi = alpha+beta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaMeanScale {
    mu: f64,
    phi: f64,
}

impl BetaMeanScale {
    pub fn new(mu: f64, phi: f64) -> Result<Self, DistError> {
        if !(mu > 0.0 && mu < 1.0) {
            return Err(DistError::BadMu(mu));
        }
        if !(phi > 0.0 && phi.is_finite()) {
            return Err(DistError::BadPhi(phi));
        }
        Ok(Self { mu, phi })
    }

    pub fn mu(self) -> f64 {
        self.mu
    }

    pub fn phi(self) -> f64 {
        self.phi
    }

    /// Shape parameters alpha = mu*phi, beta = (1-mu)*phi.
    pub fn to_shape(self) -> BetaShape {
        BetaShape {
            alpha: self.mu * self.phi,
            beta: (1.0 - self.mu) * self.phi,
        }
    }

    pub fn from_shape(shape: BetaShape) -> Self {
        let phi = shape.alpha + shape.beta;
        Self {
            mu: shape.alpha / phi,
            phi,
        }
    }
}

/// Location parameter of the default [`SltConfig`].
pub const DEFAULT_SLT_LOCATION: f64 = 1e-4;

/// Scale-location transform applied before the beta density, together with
/// the truncation window [l, 1/s + l] it induces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SltConfig {
    s: f64,
    l: f64,
}

impl SltConfig {
    pub fn new(s: f64, l: f64) -> Result<Self, DistError> {
        let valid = s > 0.0 && s.is_finite() && l >= 0.0 && l.is_finite() && 1.0 / s + l <= 1.0;
        if valid {
            Ok(Self { s, l })
        } else {
            Err(DistError::BadSltConfig { s, l })
        }
    }

    /// The identity transform, under which the SLT density is the plain beta
    /// density on (0, 1).
    pub fn identity() -> Self {
        Self { s: 1.0, l: 0.0 }
    }

    /// True when this is the identity transform.
    pub fn is_identity(self) -> bool {
        self.s == 1.0 && self.l == 0.0
    }

    pub fn s(self) -> f64 {
        self.s
    }

    pub fn l(self) -> f64 {
        self.l
    }

    /// Image of g under the inverse transform, y = g/s + l.
    fn to_beta_support(self, g: f64) -> f64 {
        g / self.s + self.l
    }

    /// Upper end of the truncation window, 1/s + l.
    fn window_upper(self) -> f64 {
        1.0 / self.s + self.l
    }
}

impl Default for SltConfig {
    /// l = 1e-4, with s chosen so [0, 1] maps onto [l, 1-l] symmetrically.
    fn default() -> Self {
        let l = DEFAULT_SLT_LOCATION;
        Self {
            s: 1.0 / (1.0 - 2.0 * l),
            l,
        }
    }
}

/// Shared kernel for the beta log-density. The explicit checks on the
/// exponents keep y = 0 or y = 1 from producing 0 * (-inf) = NaN when a shape
/// parameter is exactly 1.
fn beta_log_pdf_at(y: f64, shape: BetaShape) -> f64 {
    let norm = log_gamma(shape.alpha + shape.beta) - log_gamma(shape.alpha) - log_gamma(shape.beta);
    let a_term = if shape.alpha == 1.0 {
        0.0
    } else {
        (shape.alpha - 1.0) * y.ln()
    };
    let b_term = if shape.beta == 1.0 {
        0.0
    } else {
        (shape.beta - 1.0) * (1.0 - y).ln()
    };
    norm + a_term + b_term
}

/// Log of the beta density at `y`.
///
/// # Panics
///
/// Panics at y = 0 and y = 1: the plain beta density is defined only on the
/// open interval, which is exactly the limitation the SLT variant removes.
pub fn beta_log_pdf(y: f64, params: BetaShape) -> f64 {
    assert!(
        y > 0.0 && y < 1.0,
        "beta density is defined only on the open interval (0, 1), got y={y}"
    );
    beta_log_pdf_at(y, params)
}

/// Beta density at `y`, computed in log space and exponentiated.
///
/// # Panics
///
/// As [`beta_log_pdf`].
pub fn beta_pdf(y: f64, params: BetaShape) -> f64 {
    beta_log_pdf(y, params).exp()
}

/// Variance mu(1-mu)/(1+phi) of the mean-scale beta.
pub fn beta_variance(params: BetaMeanScale) -> f64 {
    params.mu * (1.0 - params.mu) / (1.0 + params.phi)
}

/// Probability mass the base beta keeps inside the truncation window.
fn truncation_mass(shape: BetaShape, cfg: SltConfig) -> f64 {
    if cfg.is_identity() {
        return 1.0;
    }
    let upper = regularized_incomplete_beta(cfg.window_upper(), shape.alpha, shape.beta).value();
    let lower = regularized_incomplete_beta(cfg.l, shape.alpha, shape.beta).value();
    upper - lower
}

/// Natural log of the SLT beta density at g in [0, 1], endpoints included.
///
/// Evaluated directly in log space. The final -ln(s) term is the Jacobian of
/// the transform; it is constant in (mu, phi), so it never moves a likelihood
/// maximizer, but it is required for exp(slt_log_pdf) to equal slt_pdf.
///
/// # Panics
///
/// Panics when g is outside [0, 1].
pub fn slt_log_pdf(g: f64, params: BetaMeanScale, cfg: SltConfig) -> f64 {
    assert!(
        (0.0..=1.0).contains(&g),
        "SLT density is defined on [0, 1], got g={g}"
    );
    let shape = params.to_shape();
    let retained = truncation_mass(shape, cfg);
    if !(retained > 0.0) {
        // The window retains no representable mass at this parameter point.
        // Report the observation as impossible instead of dividing by zero;
        // optimizers treat -inf as a worst-case objective and move away.
        return f64::NEG_INFINITY;
    }
    beta_log_pdf_at(cfg.to_beta_support(g), shape) - retained.ln() - cfg.s.ln()
}

/// SLT beta density at g in [0, 1], endpoints included.
///
/// # Panics
///
/// As [`slt_log_pdf`].
pub fn slt_pdf(g: f64, params: BetaMeanScale, cfg: SltConfig) -> f64 {
    slt_log_pdf(g, params, cfg).exp()
}

/// SLT beta CDF at t in [0, 1]: the truncated-window mass below t/s + l,
/// rescaled by the total retained mass.
///
/// # Panics
///
/// Panics when t is outside [0, 1] or the window retains no mass.
pub fn slt_cdf(t: f64, params: BetaMeanScale, cfg: SltConfig) -> Probability {
    assert!(
        (0.0..=1.0).contains(&t),
        "SLT CDF is defined on [0, 1], got t={t}"
    );
    let shape = params.to_shape();
    let retained = truncation_mass(shape, cfg);
    assert!(
        retained > 0.0,
        "SLT truncation window retains no probability mass (alpha={}, beta={})",
        shape.alpha,
        shape.beta
    );
    let below_t = regularized_incomplete_beta(cfg.to_beta_support(t), shape.alpha, shape.beta);
    let below_window = regularized_incomplete_beta(cfg.l, shape.alpha, shape.beta);
    Probability::clamped((below_t.value() - below_window.value()) / retained)
}

/// One draw from Beta(alpha, beta) via the gamma-ratio construction
/// X/(X+Y) with X ~ Gamma(alpha, 1) and Y ~ Gamma(beta, 1).
pub fn sample_beta<R: Rng + ?Sized>(params: BetaShape, rng: &mut R) -> f64 {
    let x = Gamma::new(params.alpha, 1.0)
        .expect("alpha is positive")
        .sample(rng);
    let y = Gamma::new(params.beta, 1.0)
        .expect("beta is positive")
        .sample(rng);
    if x + y == 0.0 {
        // Both gamma draws underflowed to zero, which happens when the shapes
        // are tiny and nearly all beta mass hugs the endpoints. In that limit
        // the draw degenerates to a Bernoulli choice between the endpoints.
        let p = params.alpha / (params.alpha + params.beta);
        return if rng.gen::<f64>() < p { 1.0 } else { 0.0 };
    }
    x / (x + y)
}

/// One unclamped draw from Normal(mean, variance).
///
/// Draws outside [0, 1] are intentionally possible; counting them is the
/// whole point of the normal-model simulation arm. A zero variance returns
/// the mean exactly without consuming randomness.
///
/// # Panics
///
/// Panics when `variance` is negative or not finite.
pub fn sample_normal<R: Rng + ?Sized>(mean: f64, variance: f64, rng: &mut R) -> f64 {
    assert!(
        variance >= 0.0 && variance.is_finite(),
        "variance must be nonnegative and finite, got {variance}"
    );
    if variance == 0.0 {
        return mean;
    }
    let z: f64 = rng.sample(StandardNormal);
    mean + variance.sqrt() * z
}
