//! Johnson-Bickel screen for systematic discounting data.
//!
//! The two criteria come from Johnson and Bickel's published algorithm, which
//! the source literature applies but does not restate: criterion 1 limits how
//! far any indifference point may rise above its predecessor, and criterion 2
//! demands a minimum overall decline from the first delay to the last. The
//! conventional thresholds are 0.2 and 0.1 of the larger-later amount; both
//! are exposed as parameters.

use crate::series::IndifferenceSeries;

/// Conventional criterion-1 threshold: maximum tolerated rise between
/// consecutive indifference points, as a proportion of the amount.
pub const DEFAULT_C1_THRESHOLD: f64 = 0.2;

/// Conventional criterion-2 threshold: minimum required drop from the first
/// indifference point to the last.
pub const DEFAULT_C2_THRESHOLD: f64 = 0.1;

/// Outcome of screening one subject.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScreenResult {
    pub subject_id: String,
    pub passes: bool,
    pub criterion1_violations: usize,
    pub criterion2_violated: bool,
}

/// Applies the Johnson-Bickel criteria to one series.
///
/// Criterion 1 is violated at every consecutive pair where the later point
/// exceeds the earlier one by more than `c1_threshold`. Criterion 2 is
/// violated when the last point is not at least `c2_threshold` below the
/// first. The series type guarantees ascending delays and at least three
/// observations, so the screen's length precondition always holds.
pub fn johnson_bickel_screen(
    series: &IndifferenceSeries,
    c1_threshold: f64,
    c2_threshold: f64,
) -> ScreenResult {
    let ys = series.ys();
    let criterion1_violations = ys
        .windows(2)
        .filter(|pair| pair[1] > pair[0] + c1_threshold)
        .count();
    let first = ys[0];
    let last = ys[ys.len() - 1];
    let criterion2_violated = (first - last) < c2_threshold;
    ScreenResult {
        subject_id: series.subject_id().to_string(),
        passes: criterion1_violations == 0 && !criterion2_violated,
        criterion1_violations,
        criterion2_violated,
    }
}
