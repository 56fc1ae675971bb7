//! Log-gamma and the regularized incomplete beta function.
//!
//! These two functions carry every likelihood computation in the crate.
//! Both are classical ports: log-gamma uses a Lanczos approximation with the
//! 14-coefficient set, and the incomplete beta uses the continued fraction
//! evaluated by the modified Lentz method. All arithmetic is plain `f64`.

use thiserror::Error;

/// A finite value in the closed unit interval.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability(f64);

/// Error returned when a value cannot be interpreted as a probability.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{value} is not a probability: must be finite and in [0, 1]")]
pub struct InvalidProbability {
    pub value: f64,
}

impl Probability {
    /// Validates that `value` is finite and lies in `[0, 1]`.
    pub fn new(value: f64) -> Result<Self, InvalidProbability> {
        if value.is_finite() && (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(InvalidProbability { value })
        }
    }

    /// Wraps a computation whose exact result lies in `[0, 1]`, clamping
    /// floating-point spill just past the endpoints.
    pub(crate) fn clamped(value: f64) -> Self {
        debug_assert!(!value.is_nan());
        Self(value.clamp(0.0, 1.0))
    }

    /// The wrapped value.
    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> Self {
        p.0
    }
}

const LANCZOS_COEFFS: [f64; 14] = [
    57.1562356658629235,
    -59.5979603554754912,
    14.1360979747417471,
    -0.491913816097620199,
    0.339946499848118887e-4,
    0.465236289270485756e-4,
    -0.983744753048795646e-4,
    0.158088703224912494e-3,
    -0.210264441724104883e-3,
    0.217439618115212643e-3,
    -0.164318106536763890e-3,
    0.844182239838527433e-4,
    -0.261908384015814087e-4,
    0.368991826595316234e-5,
];

const LANCZOS_SERIES_BASE: f64 = 0.999999999999997092;
const SQRT_TWO_PI: f64 = 2.5066282746310005;

/// Natural log of the gamma function for positive `x`.
///
/// Relative error stays below 1e-12 across `[1e-6, 1e6]`.
///
/// # Panics
///
/// Panics when `x` is not a positive finite number.
pub fn log_gamma(x: f64) -> f64 {
    assert!(
        x > 0.0 && x.is_finite(),
        "log_gamma requires positive finite x, got {x}"
    );
    let tmp = x + 5.2421875;
    let tmp = (x + 0.5) * tmp.ln() - tmp;
    let mut ser = LANCZOS_SERIES_BASE;
    let mut y = x;
    for &c in &LANCZOS_COEFFS {
        y += 1.0;
        ser += c / y;
    }
    tmp + (SQRT_TWO_PI * ser / x).ln()
}

const CF_MAX_ITERATIONS: usize = 10_000;

/// Continued fraction for the incomplete beta function, evaluated with the
/// modified Lentz method. Underflow guards keep the recurrence from dividing
/// by zero; on the (never observed) failure to converge within the iteration
/// budget the current estimate is returned.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    let eps = f64::EPSILON;
    let fpmin = f64::MIN_POSITIVE / eps;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < fpmin {
        d = fpmin;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITERATIONS {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < fpmin {
            d = fpmin;
        }
        c = 1.0 + aa / c;
        if c.abs() < fpmin {
            c = fpmin;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < fpmin {
            d = fpmin;
        }
        c = 1.0 + aa / c;
        if c.abs() < fpmin {
            c = fpmin;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() <= eps {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function `I_x(alpha, beta)`, i.e. the CDF of
/// `Beta(alpha, beta)` at `x`.
///
/// The continued fraction converges fastest below the distribution mode, so
/// arguments past `(alpha + 1) / (alpha + beta + 2)` are routed through the
/// reflection `I_x(a, b) = 1 - I_{1-x}(b, a)`.
///
/// # Panics
///
/// Panics when `x` is outside `[0, 1]` or either shape parameter is not a
/// positive finite number.
pub fn regularized_incomplete_beta(x: f64, alpha: f64, beta: f64) -> Probability {
    assert!(
        alpha > 0.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite(),
        "regularized_incomplete_beta requires positive finite shapes, got alpha={alpha}, beta={beta}"
    );
    assert!(
        (0.0..=1.0).contains(&x),
        "regularized_incomplete_beta requires x in [0, 1], got {x}"
    );
    if x == 0.0 {
        return Probability(0.0);
    }
    if x == 1.0 {
        return Probability(1.0);
    }
    let ln_prefactor = log_gamma(alpha + beta) - log_gamma(alpha) - log_gamma(beta)
        + alpha * x.ln()
        + beta * (1.0 - x).ln();
    let prefactor = ln_prefactor.exp();
    let value = if x < (alpha + 1.0) / (alpha + beta + 2.0) {
        prefactor * beta_continued_fraction(alpha, beta, x) / alpha
    } else {
        1.0 - prefactor * beta_continued_fraction(beta, alpha, 1.0 - x) / beta
    };
    Probability::clamped(value)
}
