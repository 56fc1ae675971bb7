//! Batch analyses over fitted populations: ln(k) summary tables, method
//! agreement, and variance-by-delay profiles.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::fit::{FitResult, Method};
use crate::series::IndifferenceSeries;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error("no converged {0} fits to summarize")]
    NoFits(Method),
    #[error("subject sets differ between the two fit lists")]
    MismatchedSubjects,
    #[error("variance profile needs at least 2 subjects, got {0}")]
    TooFewSubjects(usize),
    #[error("all series must share one delay grid")]
    MixedDelayGrids,
}

/// Order statistics and moments of ln(k-hat) for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub sd: f64,
}

/// One summary row per requested method.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

/// Linear-interpolation (type 7) quantile of an ascending-sorted sample.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

fn sample_sd(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Summarizes psi-hat = ln(k-hat) over the converged fits of each requested
/// method. A method with no converged fits is an error.
pub fn summarize_lnk(fits: &[FitResult], methods: &[Method]) -> Result<SummaryTable, ReportError> {
    let mut rows = Vec::with_capacity(methods.len());
    for &method in methods {
        let mut values: Vec<f64> = fits
            .iter()
            .filter(|f| f.method == method && f.converged)
            .map(|f| f.psi_hat)
            .collect();
        if values.is_empty() {
            return Err(ReportError::NoFits(method));
        }
        values.sort_by(f64::total_cmp);
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        rows.push(SummaryRow {
            method,
            n,
            min: values[0],
            q1: quantile_sorted(&values, 0.25),
            median: quantile_sorted(&values, 0.5),
            q3: quantile_sorted(&values, 0.75),
            max: values[n - 1],
            mean,
            sd: sample_sd(&values, mean),
        });
    }
    Ok(SummaryTable { rows })
}

/// One subject's paired estimates from two methods.
#[derive(Debug, Clone, PartialEq)]
pub struct AgreementPair {
    pub subject_id: String,
    pub lnk_a: f64,
    pub lnk_b: f64,
}

/// Paired estimates plus their Pearson correlation.
#[derive(Debug, Clone, PartialEq)]
pub struct AgreementScatter {
    pub pairs: Vec<AgreementPair>,
    /// Pearson correlation of the pairs; NaN when either side is constant.
    pub correlation: f64,
}

fn pearson(pairs: &[AgreementPair]) -> f64 {
    let n = pairs.len() as f64;
    let mean_a = pairs.iter().map(|p| p.lnk_a).sum::<f64>() / n;
    let mean_b = pairs.iter().map(|p| p.lnk_b).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for p in pairs {
        let da = p.lnk_a - mean_a;
        let db = p.lnk_b - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    cov / (var_a * var_b).sqrt()
}

/// Pairs the converged fits of two methods by subject id, in ascending id
/// order. The two lists must cover exactly the same subjects.
pub fn agreement_scatter(
    fits_a: &[FitResult],
    fits_b: &[FitResult],
) -> Result<AgreementScatter, ReportError> {
    let by_id = |fits: &[FitResult]| -> BTreeMap<String, f64> {
        fits.iter()
            .filter(|f| f.converged)
            .map(|f| (f.subject_id.clone(), f.psi_hat))
            .collect()
    };
    let a = by_id(fits_a);
    let b = by_id(fits_b);
    if a.len() != b.len() || !a.keys().eq(b.keys()) {
        return Err(ReportError::MismatchedSubjects);
    }
    let pairs: Vec<AgreementPair> = a
        .into_iter()
        .map(|(subject_id, lnk_a)| AgreementPair {
            lnk_b: b[&subject_id],
            subject_id,
            lnk_a,
        })
        .collect();
    if pairs.is_empty() {
        return Err(ReportError::MismatchedSubjects);
    }
    let correlation = pearson(&pairs);
    Ok(AgreementScatter { pairs, correlation })
}

/// Cross-subject sample variance of the indifference points at each delay.
/// Every series must share the same delay grid.
pub fn empirical_variance_by_delay(
    population: &[IndifferenceSeries],
) -> Result<Vec<f64>, ReportError> {
    if population.len() < 2 {
        return Err(ReportError::TooFewSubjects(population.len()));
    }
    let reference: Vec<f64> = population[0].delays().iter().map(|d| d.value()).collect();
    for series in &population[1..] {
        let delays: Vec<f64> = series.delays().iter().map(|d| d.value()).collect();
        if delays != reference {
            return Err(ReportError::MixedDelayGrids);
        }
    }
    let n = population.len() as f64;
    Ok((0..reference.len())
        .map(|j| {
            let mean = population
                .iter()
                .map(|s| s.observations()[j].y)
                .sum::<f64>()
                / n;
            population
                .iter()
                .map(|s| (s.observations()[j].y - mean).powi(2))
                .sum::<f64>()
                / (n - 1.0)
        })
        .collect())
}
