//! Property tests for the invariants that hold across whole parameter
//! ranges rather than at frozen points.

mod common;

use proptest::prelude::*;

use sltbeta::dist::{beta_log_pdf, slt_log_pdf, BetaMeanScale, SltConfig};
use sltbeta::fit::{FitResult, Method};
use sltbeta::report::summarize_lnk;
use sltbeta::screen::johnson_bickel_screen;
use sltbeta::series::IndifferenceSeries;
use sltbeta::special::regularized_incomplete_beta;

proptest! {
    #[test]
    fn incomplete_beta_symmetry(
        a in 0.1f64..50.0,
        b in 0.1f64..50.0,
        x in 1e-6f64..0.999999,
    ) {
        let lhs = regularized_incomplete_beta(x, a, b).value();
        let rhs = 1.0 - regularized_incomplete_beta(1.0 - x, b, a).value();
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn incomplete_beta_is_monotone_in_x(
        a in 0.1f64..50.0,
        b in 0.1f64..50.0,
        x1 in 1e-6f64..0.999999,
        x2 in 1e-6f64..0.999999,
    ) {
        let (lo, hi) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
        let f_lo = regularized_incomplete_beta(lo, a, b).value();
        let f_hi = regularized_incomplete_beta(hi, a, b).value();
        prop_assert!(f_lo <= f_hi + 1e-14);
    }

    #[test]
    fn parameterizations_round_trip(
        mu in 1e-3f64..0.999,
        phi in 1e-3f64..1e4,
    ) {
        let params = BetaMeanScale::new(mu, phi).unwrap();
        let back = BetaMeanScale::from_shape(params.to_shape());
        prop_assert!(((back.mu() - mu) / mu).abs() < 1e-14);
        prop_assert!(((back.phi() - phi) / phi).abs() < 1e-14);
    }

    #[test]
    fn identity_config_reduces_slt_to_beta(
        mu in 0.01f64..0.99,
        phi in 0.1f64..100.0,
        g in 1e-6f64..0.999999,
    ) {
        let params = BetaMeanScale::new(mu, phi).unwrap();
        let slt = slt_log_pdf(g, params, SltConfig::identity());
        let beta = beta_log_pdf(g, params.to_shape());
        prop_assert_eq!(slt, beta);
    }

    #[test]
    fn slt_density_is_finite_on_the_closed_interval(
        mu in 0.01f64..0.99,
        phi in 0.1f64..100.0,
        g in 0.0f64..=1.0,
    ) {
        let params = BetaMeanScale::new(mu, phi).unwrap();
        let log_pdf = slt_log_pdf(g, params, SltConfig::default());
        prop_assert!(log_pdf.is_finite());
    }

    #[test]
    fn screen_verdicts_are_monotone_in_the_thresholds(
        ys in prop::collection::vec(0.0f64..=1.0, 3..10),
        c1 in 0.0f64..0.5,
        c1_extra in 0.0f64..0.5,
        c2 in 0.0f64..0.5,
        c2_less in 0.0f64..1.0,
    ) {
        let rows: Vec<(f64, f64)> = ys
            .iter()
            .enumerate()
            .map(|(i, &y)| ((i + 1) as f64, y))
            .collect();
        let series = IndifferenceSeries::from_normalized("s", &rows).unwrap();
        let base = johnson_bickel_screen(&series, c1, c2);
        // A looser rise bound and a smaller required drop can only help.
        let looser = johnson_bickel_screen(&series, c1 + c1_extra, c2 * c2_less);
        prop_assert!(looser.criterion1_violations <= base.criterion1_violations);
        if base.passes {
            prop_assert!(looser.passes);
        }
    }

    #[test]
    fn summary_is_invariant_under_permutation(
        psis in prop::collection::vec(-15.0f64..3.0, 2..40),
        rotate in 0usize..40,
    ) {
        let fit = |i: usize, psi: f64| FitResult {
            subject_id: format!("s{i}"),
            method: Method::Nls,
            psi_hat: psi,
            dispersion: 0.01,
            objective: 0.0,
            converged: true,
            iterations: 1,
            notes: String::new(),
        };
        let fits: Vec<FitResult> = psis.iter().enumerate().map(|(i, &p)| fit(i, p)).collect();
        let mut shuffled = fits.clone();
        shuffled.rotate_left(rotate % fits.len());
        let a = summarize_lnk(&fits, &[Method::Nls]).unwrap();
        let b = summarize_lnk(&shuffled, &[Method::Nls]).unwrap();
        prop_assert_eq!(a, b);
    }
}
