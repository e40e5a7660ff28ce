//! Property suites for the spec-level invariants: grid quantization,
//! correlation invariances, grouping, alignment, and clamped prediction.

use mosfuse::data::{
    align, group_by_system, quantize_to_grid, MosDataset, ScoreGrid, ScoreMatrix,
    UtteranceRecord,
};
use mosfuse::fusers::{fit_voting, fit_weighted_voting, PredictInput, TrainConfig};
use mosfuse::metrics::{kendall_tau_b, mse, pearson, spearman, MetricError};
use proptest::prelude::*;

fn vec_pair(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2..max_len).prop_flat_map(|n| {
        (
            prop::collection::vec(1.0f64..5.0, n),
            prop::collection::vec(1.0f64..5.0, n),
        )
    })
}

// O(n^2) pair-counting tau-b oracle, independent of the implementation path.
fn kendall_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let (mut c, mut d, mut n1, mut n2) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 {
                n1 += 1.0;
            }
            if dy == 0.0 {
                n2 += 1.0;
            }
            if dx != 0.0 && dy != 0.0 {
                if dx * dy > 0.0 {
                    c += 1.0;
                } else {
                    d += 1.0;
                }
            }
        }
    }
    let n0 = (n * (n - 1)) as f64 / 2.0;
    let denom = (n0 - n1) * (n0 - n2);
    if denom <= 0.0 {
        None
    } else {
        Some((c - d) / denom.sqrt())
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn quantize_idempotent_and_on_grid(x in -20.0f64..20.0) {
        let grid = ScoreGrid::default();
        let q = quantize_to_grid(x, &grid).unwrap();
        prop_assert_eq!(quantize_to_grid(q, &grid).unwrap(), q);
        prop_assert!(grid.points().any(|p| p == q));
    }

    #[test]
    fn pearson_affine_invariance((x, y) in vec_pair(40), a in 0.1f64..8.0, b in -3.0f64..3.0) {
        if let Ok(r) = pearson(&x, &y) {
            let xt: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let rt = pearson(&xt, &y).unwrap();
            prop_assert!((r - rt).abs() < 1e-12, "{} vs {}", r, rt);
            let xn: Vec<f64> = x.iter().map(|v| -a * v + b).collect();
            let rn = pearson(&xn, &y).unwrap();
            prop_assert!((r + rn).abs() < 1e-12);
        }
    }

    #[test]
    fn pearson_power_of_two_scaling_is_bit_exact((x, y) in vec_pair(40)) {
        if let Ok(r) = pearson(&x, &y) {
            let xt: Vec<f64> = x.iter().map(|v| 4.0 * v).collect();
            prop_assert_eq!(r, pearson(&xt, &y).unwrap());
        }
    }

    #[test]
    fn rank_metrics_invariant_under_monotone_transform((x, y) in vec_pair(30)) {
        let transforms: [fn(f64) -> f64; 3] = [
            |v| v.exp(),
            |v| v * v * v,
            |v| (v + 1.0).ln(),
        ];
        for t in transforms {
            let xt: Vec<f64> = x.iter().map(|v| t(*v)).collect();
            match (spearman(&x, &y), spearman(&xt, &y)) {
                (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b),
                (Err(MetricError::ConstantInput), Err(MetricError::ConstantInput)) => {}
                (a, b) => prop_assert!(false, "mismatch {:?} vs {:?}", a, b),
            }
            match (kendall_tau_b(&x, &y), kendall_tau_b(&xt, &y)) {
                (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b),
                (Err(MetricError::ConstantInput), Err(MetricError::ConstantInput)) => {}
                (a, b) => prop_assert!(false, "mismatch {:?} vs {:?}", a, b),
            }
        }
    }

    #[test]
    fn kendall_matches_oracle((x, y) in vec_pair(50)) {
        // spot ties: snap half of the values to the MOS grid
        let grid = ScoreGrid::default();
        let x: Vec<f64> = x.iter().enumerate()
            .map(|(i, v)| if i % 2 == 0 { quantize_to_grid(*v, &grid).unwrap() } else { *v })
            .collect();
        match (kendall_tau_b(&x, &y), kendall_oracle(&x, &y)) {
            (Ok(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12, "{} vs {}", a, b),
            (Err(MetricError::ConstantInput), None) => {}
            (a, b) => prop_assert!(false, "mismatch {:?} vs {:?}", a, b),
        }
    }

    #[test]
    fn correlations_are_symmetric((x, y) in vec_pair(30)) {
        if let (Ok(a), Ok(b)) = (pearson(&x, &y), pearson(&y, &x)) {
            prop_assert!((a - b).abs() < 1e-15);
        }
        if let (Ok(a), Ok(b)) = (kendall_tau_b(&x, &y), kendall_tau_b(&y, &x)) {
            prop_assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn mse_shift_invariance_exact((x, y) in vec_pair(30), c in -2.0f64..2.0) {
        // shifting both sides by the same float leaves every residual bit-equal
        let xs: Vec<f64> = x.iter().map(|v| v + c).collect();
        let ys: Vec<f64> = y.iter().map(|v| v + c).collect();
        let plain = mse(&x, &y).unwrap();
        let shifted = mse(&xs, &ys).unwrap();
        prop_assert!((plain - shifted).abs() <= 1e-12 * plain.max(1.0));
    }

    #[test]
    fn grouping_is_permutation_invariant(seed in 0u64..1000) {
        let mut rng = mosfuse::rng::Rng::seed_from_u64(seed);
        let n = 12;
        let recs: Vec<UtteranceRecord> = (0..n)
            .map(|i| {
                let sys = format!("s{}", rng.below(4));
                UtteranceRecord::new(format!("{sys}-u{i}"), sys.clone(), Some(rng.range(1.0, 5.0)))
                    .unwrap()
            })
            .collect();
        let preds: Vec<f64> = (0..n).map(|_| rng.range(1.0, 5.0)).collect();
        let ds = MosDataset::new(recs.clone()).unwrap();
        let base = group_by_system(&ds, &preds).unwrap();

        // rotate the rows
        let shift = 1 + rng.below(n - 1);
        let mut rot_recs = recs;
        rot_recs.rotate_left(shift);
        let mut rot_preds = preds;
        rot_preds.rotate_left(shift);
        let rot_ds = MosDataset::new(rot_recs).unwrap();
        let rotated = group_by_system(&rot_ds, &rot_preds).unwrap();

        prop_assert_eq!(base.len(), rotated.len());
        for (a, b) in base.iter().zip(&rotated) {
            prop_assert_eq!(&a.system_id, &b.system_id);
            prop_assert!((a.mean_prediction - b.mean_prediction).abs() < 1e-12);
            prop_assert!((a.mean_true_mos - b.mean_true_mos).abs() < 1e-12);
        }
    }

    #[test]
    fn align_is_idempotent(seed in 0u64..1000) {
        let mut rng = mosfuse::rng::Rng::seed_from_u64(seed);
        let n = 8;
        let recs: Vec<UtteranceRecord> = (0..n)
            .map(|i| UtteranceRecord::new(format!("s-u{i}"), "s", Some(3.0)).unwrap())
            .collect();
        let ds = MosDataset::new(recs).unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.below(i + 1));
        }
        let ids: Vec<String> = order.iter().map(|i| format!("s-u{i}")).collect();
        let values: Vec<f64> = order.iter().map(|i| 1.0 + *i as f64 * 0.3).collect();
        let scores = ScoreMatrix::new(ids, vec!["a".into()], values).unwrap();
        let once = align(&ds, &scores).unwrap();
        let twice = align(&ds, &once).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn clamped_predictions_stay_in_mos_range(seed in 0u64..500) {
        let mut rng = mosfuse::rng::Rng::seed_from_u64(seed);
        let n = 10;
        let k = 3;
        let ids: Vec<String> = (0..n).map(|i| format!("u{i}")).collect();
        let names: Vec<String> = (0..k).map(|j| format!("c{j}")).collect();
        let values: Vec<f64> = (0..n * k).map(|_| rng.range(-10.0, 10.0)).collect();
        let m = ScoreMatrix::new(ids, names, values).unwrap();
        let truth: Vec<f64> = (0..n).map(|_| rng.range(1.0, 5.0)).collect();
        let cfg = TrainConfig { max_epochs: 50, ..TrainConfig::default() };
        for model in [
            fit_voting(&m).unwrap().with_clamp(true),
            fit_weighted_voting(&m, &truth, &cfg).unwrap().with_clamp(true),
        ] {
            let pred = model.predict(PredictInput::Scores(&m), None).unwrap();
            prop_assert!(pred.iter().all(|p| (1.0..=5.0).contains(p)));
        }
    }
}
