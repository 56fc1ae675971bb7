//! Data generation under the fitted normal and beta models, and the Monte
//! Carlo campaign that counts invalid (outside [0, 1]) simulated points.
//!
//! Every simulated point draws from its own ChaCha8 stream keyed by
//! (subject index, replication index, delay index), so sharding the work
//! across threads cannot change a single draw. Aggregation is pure counting,
//! which merges the same way in any order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discount::{hyperbolic_mean, Delay, DiscountParams};
use crate::dist::{sample_beta, sample_normal, BetaMeanScale};
use crate::fit::{FitResult, Method};

/// Which fitted model a generator mimics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorModel {
    /// Normal residuals around the NLS mean curve with one shared variance.
    NormalFromNls,
    /// Beta draws with mean on the fitted curve and the fitted scale phi.
    BetaFromSlt,
}

/// Invalid generator or campaign setup.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("subject {subject_id}: psi must be finite, got {psi}")]
    BadPsi { subject_id: String, psi: f64 },
    #[error("subject {subject_id}: dispersion {dispersion} is invalid for {model:?}")]
    BadDispersion {
        subject_id: String,
        model: GeneratorModel,
        dispersion: f64,
    },
    #[error("subject {subject_id}: generator needs at least one strictly positive delay")]
    BadDelays { subject_id: String },
    #[error("subject {subject_id}: cannot build a generator from an unconverged {method} fit")]
    UnconvergedFit { subject_id: String, method: Method },
}

/// Everything needed to regenerate one subject's indifference points.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectGenerator {
    subject_id: String,
    model: GeneratorModel,
    psi: f64,
    /// sigma^2 for the normal model, phi for the beta model.
    dispersion: f64,
    delays: Vec<Delay>,
}

impl SubjectGenerator {
    pub fn new(
        subject_id: impl Into<String>,
        model: GeneratorModel,
        psi: f64,
        dispersion: f64,
        delays: Vec<Delay>,
    ) -> Result<Self, SimError> {
        let subject_id = subject_id.into();
        if !psi.is_finite() {
            return Err(SimError::BadPsi { subject_id, psi });
        }
        let dispersion_ok = match model {
            GeneratorModel::NormalFromNls => dispersion >= 0.0 && dispersion.is_finite(),
            GeneratorModel::BetaFromSlt => dispersion > 0.0 && dispersion.is_finite(),
        };
        if !dispersion_ok {
            return Err(SimError::BadDispersion {
                subject_id,
                model,
                dispersion,
            });
        }
        if delays.is_empty() || delays.iter().any(|d| d.value() <= 0.0) {
            return Err(SimError::BadDelays { subject_id });
        }
        Ok(Self {
            subject_id,
            model,
            psi,
            dispersion,
            delays,
        })
    }

    /// Builds the generator matching a converged fit: NLS fits seed the
    /// normal model, beta-family fits seed the beta model.
    pub fn from_fit(fit: &FitResult, delays: Vec<Delay>) -> Result<Self, SimError> {
        if !fit.converged {
            return Err(SimError::UnconvergedFit {
                subject_id: fit.subject_id.clone(),
                method: fit.method,
            });
        }
        let model = match fit.method {
            Method::Nls => GeneratorModel::NormalFromNls,
            Method::Beta | Method::SltBeta => GeneratorModel::BetaFromSlt,
        };
        Self::new(&fit.subject_id, model, fit.psi_hat, fit.dispersion, delays)
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn model(&self) -> GeneratorModel {
        self.model
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn dispersion(&self) -> f64 {
        self.dispersion
    }

    pub fn delays(&self) -> &[Delay] {
        &self.delays
    }

    fn mean_at(&self, delay_idx: usize) -> f64 {
        let params = DiscountParams::new(self.psi).expect("psi validated finite");
        hyperbolic_mean(params, self.delays[delay_idx])
    }

    fn draw_point<R: Rng + ?Sized>(&self, delay_idx: usize, rng: &mut R) -> f64 {
        let mu = self.mean_at(delay_idx);
        match self.model {
            GeneratorModel::NormalFromNls => sample_normal(mu, self.dispersion, rng),
            GeneratorModel::BetaFromSlt => {
                let shape = BetaMeanScale::new(mu, self.dispersion)
                    .expect("positive delay keeps the mean interior")
                    .to_shape();
                sample_beta(shape, rng)
            }
        }
    }
}

/// One simulated dataset for the subject: one point per delay, drawn
/// sequentially from the caller's generator state.
pub fn simulate_subject<R: Rng + ?Sized>(gen: &SubjectGenerator, rng: &mut R) -> Vec<f64> {
    (0..gen.delays.len()).map(|j| gen.draw_point(j, rng)).collect()
}

/// Aggregated campaign outcome. Proportions are derived from the raw counts,
/// which are kept so the totals can be audited exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub replications: usize,
    pub n_subjects: usize,
    pub n_delays: usize,
    pub seed: u64,
    pub total_points: u64,
    pub invalid_count: u64,
    pub invalid_count_by_delay: Vec<u64>,
    /// Simulated subject datasets (subject x replication) with at least one
    /// invalid point.
    pub subject_datasets_with_any_invalid: u64,
    pub invalid_total_proportion: f64,
    pub invalid_by_delay: Vec<f64>,
    pub subjects_with_any_invalid_proportion: f64,
}

/// A point is invalid only when it lies strictly outside [0, 1]; the
/// endpoints themselves are legitimate indifference points.
fn is_invalid(y: f64) -> bool {
    y < 0.0 || y > 1.0
}

fn stream_id(subject: usize, replication: usize, delay: usize) -> u64 {
    ((subject as u64) << 40) | ((replication as u64) << 16) | delay as u64
}

/// Replicates every generator `replications` times and counts invalid points
/// overall, per delay, and per simulated dataset.
///
/// Fully reproducible from `seed`: each point's stream is keyed by its
/// (subject, replication, delay) coordinates, never by scheduling order.
///
/// # Panics
///
/// Panics when `generators` is empty, the delay grids differ in length, or
/// the campaign exceeds the stream-key capacity (2^24 subjects, 2^24
/// replications, 2^16 delays).
pub fn run_monte_carlo(
    generators: &[SubjectGenerator],
    replications: usize,
    seed: u64,
) -> SimulationReport {
    assert!(!generators.is_empty(), "campaign needs at least one generator");
    let n_delays = generators[0].delays.len();
    assert!(
        generators.iter().all(|g| g.delays.len() == n_delays),
        "all generators must share one delay-grid length"
    );
    assert!(
        generators.len() < (1 << 24) && replications < (1 << 24) && n_delays < (1 << 16),
        "campaign dimensions exceed stream-key capacity"
    );

    struct Partial {
        invalid_by_delay: Vec<u64>,
        datasets_with_invalid: u64,
    }

    let merged = generators
        .par_iter()
        .enumerate()
        .map(|(subject_idx, gen)| {
            let mut partial = Partial {
                invalid_by_delay: vec![0; n_delays],
                datasets_with_invalid: 0,
            };
            for replication in 0..replications {
                let mut any_invalid = false;
                for delay_idx in 0..n_delays {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(stream_id(subject_idx, replication, delay_idx));
                    let y = gen.draw_point(delay_idx, &mut rng);
                    if is_invalid(y) {
                        partial.invalid_by_delay[delay_idx] += 1;
                        any_invalid = true;
                    }
                }
                if any_invalid {
                    partial.datasets_with_invalid += 1;
                }
            }
            partial
        })
        .reduce(
            || Partial {
                invalid_by_delay: vec![0; n_delays],
                datasets_with_invalid: 0,
            },
            |mut a, b| {
                for (acc, add) in a.invalid_by_delay.iter_mut().zip(&b.invalid_by_delay) {
                    *acc += add;
                }
                a.datasets_with_invalid += b.datasets_with_invalid;
                a
            },
        );

    let n_subjects = generators.len();
    let datasets = (n_subjects * replications) as u64;
    let total_points = datasets * n_delays as u64;
    let invalid_count: u64 = merged.invalid_by_delay.iter().sum();
    SimulationReport {
        replications,
        n_subjects,
        n_delays,
        seed,
        total_points,
        invalid_count,
        invalid_count_by_delay: merged.invalid_by_delay.clone(),
        subject_datasets_with_any_invalid: merged.datasets_with_invalid,
        invalid_total_proportion: invalid_count as f64 / total_points as f64,
        invalid_by_delay: merged
            .invalid_by_delay
            .iter()
            .map(|&c| c as f64 / datasets as f64)
            .collect(),
        subjects_with_any_invalid_proportion: merged.datasets_with_invalid as f64 / datasets as f64,
    }
}
