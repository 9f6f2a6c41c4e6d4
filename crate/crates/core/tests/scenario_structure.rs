//! Structural checks of the conditional scenario generators: under each
//! null configuration the blocks must be conditionally independent given
//! the controls, and under a strong signal the conditional test must see
//! the dependence. Verified end-to-end at small dimensions with the
//! Lasso-residual test, whose own calibration is covered elsewhere.

use gausstest::ci_lasso::{ci_lasso_test_with, CiLassoOptions};
use gausstest::simgen::{generate, ScenarioSpec, Signal};
use gausstest::stream::mix;
use gausstest::MultiplierKind;
use rayon::prelude::*;

fn rejection_rate(example_id: u8, p: usize, m: usize, n: usize, signal: Signal, reps: u64) -> f64 {
    let opts = CiLassoOptions {
        folds: 5,
        grid_size: 30,
        ..CiLassoOptions::default()
    };
    let hits: usize = (0..reps)
        .into_par_iter()
        .map(|r| {
            let spec = ScenarioSpec {
                example_id,
                n,
                p,
                m,
                signal,
                seed: mix(1000 + example_id as u64, r),
            };
            let (x, y, z) = generate(&spec).unwrap();
            let report = ci_lasso_test_with(
                &x,
                &y,
                &z.expect("conditional scenario"),
                MultiplierKind::Rademacher,
                300,
                0.05,
                mix(2000 + example_id as u64, r),
                None,
                &opts,
            )
            .unwrap();
            report.reject as usize
        })
        .sum();
    hits as f64 / reps as f64
}

#[test]
fn conditional_nulls_are_sized_near_nominal() {
    // 150 replications at alpha 0.05: 3 binomial SEs allow up to ~10.3%,
    // so anything above 12% marks a leak between the blocks.
    for (example, signal) in [
        (6u8, Signal::K(0)),
        (7, Signal::Rho(0.0)),
        (8, Signal::K(0)),
        (9, Signal::K(0)),
        (10, Signal::K(0)),
    ] {
        let rate = rejection_rate(example, 4, 2, 200, signal, 150);
        assert!(
            rate <= 0.12,
            "example {example} null rejects at {:.1}%",
            100.0 * rate
        );
    }
}

#[test]
fn conditional_signals_are_detected() {
    for (example, signal) in [
        (6u8, Signal::K(1)),
        (7, Signal::Rho(0.8)),
        (8, Signal::K(1)),
        (9, Signal::K(1)),
        // Example 10 also needs p divisible by 4.
        (10, Signal::K(2)),
    ] {
        // Sparsity signals must satisfy K = p/10, so pick p accordingly.
        let p = match signal {
            Signal::K(k) if k > 0 => 10 * k,
            _ => 4,
        };
        let rate = rejection_rate(example, p, 2, 200, signal, 25);
        assert!(
            rate >= 0.8,
            "example {example} alternative rejects at only {:.1}%",
            100.0 * rate
        );
    }
}
