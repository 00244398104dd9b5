//! Property tests over the cleaning, windowing, and P&L primitives.

use deltrend::dataset::{chrono_split, clip, SplitLabel};
use deltrend::market_data::winsorize;
use deltrend::strategy::{pnl, PositionSeries};
use proptest::prelude::*;

fn position_series(weights: &[f64]) -> PositionSeries {
    let start = chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    PositionSeries {
        dates: (0..weights.len())
            .map(|i| start + chrono::Duration::days(i as i64))
            .collect(),
        weights: weights.to_vec(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn winsorize_is_idempotent_and_order_preserving(
        values in prop::collection::vec(-1e3_f64..1e3, 3..200),
        lo in 0.0_f64..0.2,
        span in 0.6_f64..0.99,
    ) {
        let hi = (lo + span).min(0.999);
        let once = winsorize(&values, lo, hi).unwrap();
        let twice = winsorize(&once, lo, hi).unwrap();
        prop_assert_eq!(&once, &twice);

        // order preserved: sorting commutes with clamping
        for (i, j) in (0..values.len()).zip(1..values.len()) {
            if values[i] <= values[j] {
                prop_assert!(once[i] <= once[j]);
            }
        }
    }

    #[test]
    fn clip_bounds_hold_everywhere(
        mut values in prop::collection::vec(-100.0_f64..100.0, 1..200),
    ) {
        clip(&mut values, -5.0, 5.0);
        prop_assert!(values.iter().all(|v| (-5.0..=5.0).contains(v)));
    }

    #[test]
    fn pnl_costs_never_help(
        weights in prop::collection::vec(-1.0_f64..1.0, 2..100),
        seed in 0_u64..1000,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let returns: Vec<f64> = (0..weights.len()).map(|_| rng.random_range(-0.05..0.05)).collect();
        let free = pnl(&position_series(&weights), &returns, 0.0).unwrap();
        let costly = pnl(&position_series(&weights), &returns, 5.0).unwrap();
        for (a, b) in costly.daily.iter().zip(&free.daily) {
            prop_assert!(a <= b);
        }
        // cost difference equals priced turnover
        let turnover: f64 = weights
            .iter()
            .scan(0.0, |prev, &w| {
                let t = (w - *prev).abs();
                *prev = w;
                Some(t)
            })
            .sum();
        let diff = free.final_cumulative() - costly.final_cumulative();
        prop_assert!((diff - 5.0 / 10_000.0 * turnover).abs() < 1e-12);
    }

    #[test]
    fn split_is_chronological_partition(n in 10_usize..500) {
        let start = chrono::NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
        let dates: Vec<_> = (0..n).map(|i| start + chrono::Duration::days(i as i64)).collect();
        let labels = chrono_split(&dates, (0.70, 0.15, 0.15)).unwrap();
        prop_assert_eq!(labels.len(), n);
        let rank = |l: &SplitLabel| match l {
            SplitLabel::Train => 0,
            SplitLabel::Validation => 1,
            SplitLabel::Test => 2,
        };
        for w in labels.windows(2) {
            prop_assert!(rank(&w[0]) <= rank(&w[1]));
        }
        // every block non-empty
        for target in [SplitLabel::Train, SplitLabel::Validation, SplitLabel::Test] {
            prop_assert!(labels.iter().any(|l| *l == target));
        }
    }
}
