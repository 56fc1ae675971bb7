//! Deterministic synthetic-population fixture.
//!
//! The bundled dataset is built here: 126 subjects on a 7-delay grid, drawn
//! from the beta model with heterogeneous (psi, phi), with exactly 34
//! subjects carrying at least one indifference point of exactly 0 or 1. The
//! construction is fully determined by the seed, so the committed CSV can be
//! regenerated bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::discount::{hyperbolic_mean, Delay, DiscountParams};
use crate::dist::{sample_beta, BetaMeanScale};
use crate::series::IndifferenceSeries;

/// Delay grid of the bundled fixture, in days.
pub const FIXTURE_DELAYS: [f64; 7] = [1.0, 7.0, 30.0, 90.0, 180.0, 365.0, 1825.0];

/// Fixture shape: subject count and how many subjects carry boundary points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub n_subjects: usize,
    /// Steep discounters forced to an exact 0 at the longest delay.
    pub n_floor_subjects: usize,
    /// Shallow discounters forced to an exact 1 at the shortest delay.
    pub n_ceiling_subjects: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_subjects: 126,
            n_floor_subjects: 20,
            n_ceiling_subjects: 14,
            seed: 1825,
        }
    }
}

const PSI_MEAN: f64 = -4.9;
const PSI_SD: f64 = 1.8;
const PSI_RANGE: (f64, f64) = (-8.5, -0.5);
const LN_PHI_MEAN: f64 = 3.6888794541139363; // ln(40)
const LN_PHI_SD: f64 = 0.5;
const PHI_RANGE: (f64, f64) = (10.0, 150.0);

/// Interior subjects are nudged off exact endpoints so that only the
/// designated boundary subjects carry 0/1 points.
const INTERIOR_MARGIN: f64 = 1e-3;

fn truncated_normal<R: Rng + ?Sized>(mean: f64, sd: f64, range: (f64, f64), rng: &mut R) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        let draw = mean + sd * z;
        if draw >= range.0 && draw <= range.1 {
            return draw;
        }
    }
}

/// Generates the synthetic population.
///
/// Subjects are ranked by psi after drawing: the steepest
/// `n_floor_subjects` get an exact 0 at the longest delay, the shallowest
/// `n_ceiling_subjects` an exact 1 at the shortest delay. Everyone else is
/// kept strictly interior.
pub fn synthetic_population(spec: &SynthSpec) -> Vec<IndifferenceSeries> {
    assert!(
        spec.n_floor_subjects + spec.n_ceiling_subjects <= spec.n_subjects,
        "boundary subjects cannot outnumber the population"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let params: Vec<(f64, f64)> = (0..spec.n_subjects)
        .map(|_| {
            let psi = truncated_normal(PSI_MEAN, PSI_SD, PSI_RANGE, &mut rng);
            let z: f64 = rng.sample(StandardNormal);
            let phi = (LN_PHI_MEAN + LN_PHI_SD * z)
                .exp()
                .clamp(PHI_RANGE.0, PHI_RANGE.1);
            (psi, phi)
        })
        .collect();

    // Rank subjects by steepness to pick the boundary carriers.
    let mut order: Vec<usize> = (0..spec.n_subjects).collect();
    order.sort_by(|&a, &b| params[b].0.total_cmp(&params[a].0));
    let floor_set: Vec<usize> = order[..spec.n_floor_subjects].to_vec();
    let ceiling_set: Vec<usize> =
        order[spec.n_subjects - spec.n_ceiling_subjects..].to_vec();

    (0..spec.n_subjects)
        .map(|i| {
            let (psi, phi) = params[i];
            let discount = DiscountParams::new(psi).expect("psi drawn finite");
            let mut rows: Vec<(f64, f64)> = FIXTURE_DELAYS
                .iter()
                .map(|&d| {
                    let mu = hyperbolic_mean(discount, Delay::new(d).unwrap());
                    let shape = BetaMeanScale::new(mu, phi)
                        .expect("positive delay keeps the mean interior")
                        .to_shape();
                    let y = sample_beta(shape, &mut rng)
                        .clamp(INTERIOR_MARGIN, 1.0 - INTERIOR_MARGIN);
                    (d, y)
                })
                .collect();
            if floor_set.contains(&i) {
                rows.last_mut().expect("grid is nonempty").1 = 0.0;
            }
            if ceiling_set.contains(&i) {
                rows.first_mut().expect("grid is nonempty").1 = 1.0;
            }
            let id = format!("S{:03}", i + 1);
            IndifferenceSeries::from_normalized(id, &rows).expect("fixture rows are valid")
        })
        .collect()
}
