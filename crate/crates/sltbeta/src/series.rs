//! Per-subject indifference-point series: the unit of data every fit,
//! screen, and simulation consumes.

use thiserror::Error;

use crate::discount::Delay;

/// One normalized observation: indifference point y in [0, 1] at a delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub delay: Delay,
    pub y: f64,
}

/// Why a raw series could not be turned into an [`IndifferenceSeries`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("larger-later amount must be positive and finite, got {0}")]
    BadAmount(f64),
    #[error("a series needs at least {MIN_OBSERVATIONS} observations, got {0}")]
    TooShort(usize),
    #[error("delay {0} is not strictly positive")]
    NonPositiveDelay(f64),
    #[error("duplicate observation at delay {0}")]
    DuplicateDelay(f64),
    #[error("indifference point {point} at delay {delay} normalizes to {normalized}, outside [0, 1]")]
    PointOutOfRange {
        delay: f64,
        point: f64,
        normalized: f64,
    },
}

/// Smallest series any fit accepts: two mean-structure parameters plus one
/// residual degree of freedom.
pub const MIN_OBSERVATIONS: usize = 3;

/// A subject's indifference points, normalized by the larger-later amount A
/// and sorted by strictly increasing delay.
#[derive(Debug, Clone, PartialEq)]
pub struct IndifferenceSeries {
    subject_id: String,
    observations: Vec<Observation>,
    amount: f64,
}

impl IndifferenceSeries {
    /// Builds a series from raw (delay, indifference point) rows, dividing
    /// each point by `amount`. Rows may arrive in any order; they are sorted
    /// by delay here.
    pub fn new(
        subject_id: impl Into<String>,
        raw: &[(f64, f64)],
        amount: f64,
    ) -> Result<Self, SeriesError> {
        if !(amount > 0.0 && amount.is_finite()) {
            return Err(SeriesError::BadAmount(amount));
        }
        if raw.len() < MIN_OBSERVATIONS {
            return Err(SeriesError::TooShort(raw.len()));
        }
        let mut rows: Vec<(f64, f64)> = raw.to_vec();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut observations = Vec::with_capacity(rows.len());
        for (i, &(delay, point)) in rows.iter().enumerate() {
            if !(delay > 0.0 && delay.is_finite()) {
                return Err(SeriesError::NonPositiveDelay(delay));
            }
            if i > 0 && delay == rows[i - 1].0 {
                return Err(SeriesError::DuplicateDelay(delay));
            }
            let y = point / amount;
            if !((0.0..=1.0).contains(&y) && y.is_finite()) {
                return Err(SeriesError::PointOutOfRange {
                    delay,
                    point,
                    normalized: y,
                });
            }
            observations.push(Observation {
                delay: Delay::new(delay).expect("checked positive and finite"),
                y,
            });
        }
        Ok(Self {
            subject_id: subject_id.into(),
            observations,
            amount,
        })
    }

    /// Builds a series from already-normalized points (amount 1).
    pub fn from_normalized(
        subject_id: impl Into<String>,
        rows: &[(f64, f64)],
    ) -> Result<Self, SeriesError> {
        Self::new(subject_id, rows, 1.0)
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn amount(&self) -> f64 {
        self.amount
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn delays(&self) -> Vec<Delay> {
        self.observations.iter().map(|o| o.delay).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.y).collect()
    }

    /// Observations sitting exactly on 0 or 1.
    pub fn boundary_observations(&self) -> impl Iterator<Item = &Observation> {
        self.observations
            .iter()
            .filter(|o| o.y == 0.0 || o.y == 1.0)
    }

    /// True when any point sits exactly on 0 or 1, the case standard beta
    /// regression cannot accommodate.
    pub fn has_boundary_points(&self) -> bool {
        self.boundary_observations().next().is_some()
    }
}
