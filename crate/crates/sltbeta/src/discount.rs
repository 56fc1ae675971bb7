//! Discounting mean functions: mapping (parameters, delay) to the expected
//! indifference point.
//!
//! Only the hyperbolic form ships. The [`MeanFunction`] trait exists so other
//! forms (exponential, for instance) can plug into the same estimation
//! machinery later without touching it.

use thiserror::Error;

/// A delay to the larger-later reward, in the study's delay unit.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Delay(f64);

/// Error returned for a delay that is negative or not finite.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("delay must be nonnegative and finite, got {value}")]
pub struct InvalidDelay {
    pub value: f64,
}

impl Delay {
    pub fn new(value: f64) -> Result<Self, InvalidDelay> {
        if value >= 0.0 && value.is_finite() {
            Ok(Self(value))
        } else {
            Err(InvalidDelay { value })
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Discounting parameters on the estimation scale, psi = ln(k).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscountParams {
    psi: f64,
}

/// Error returned for a non-finite psi.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("psi must be finite, got {value}")]
pub struct InvalidPsi {
    pub value: f64,
}

impl DiscountParams {
    pub fn new(psi: f64) -> Result<Self, InvalidPsi> {
        if psi.is_finite() {
            Ok(Self { psi })
        } else {
            Err(InvalidPsi { value: psi })
        }
    }

    /// ln(k).
    pub fn psi(self) -> f64 {
        self.psi
    }

    /// The discounting rate k = exp(psi), always positive.
    pub fn k(self) -> f64 {
        self.psi.exp()
    }
}

/// A discounting mean function: expected indifference point at a delay.
pub trait MeanFunction {
    fn mean(&self, params: DiscountParams, delay: Delay) -> f64;
}

/// Mazur's hyperbolic discounting function, E(y) = 1/(1 + k D).
#[derive(Debug, Clone, Copy, Default)]
pub struct Hyperbolic;

impl MeanFunction for Hyperbolic {
    fn mean(&self, params: DiscountParams, delay: Delay) -> f64 {
        hyperbolic_mean(params, delay)
    }
}

/// Expected indifference point 1/(1 + exp(psi) * D).
///
/// Equals exactly 1 at D = 0 and lies strictly inside (0, 1] everywhere.
pub fn hyperbolic_mean(params: DiscountParams, delay: Delay) -> f64 {
    let d = delay.value();
    if d == 0.0 {
        return 1.0;
    }
    1.0 / (1.0 + params.psi.exp() * d)
}
