//! The challenge evaluation protocol: MSE, Pearson LCC, Spearman SRCC and
//! Kendall KTAU (tau-b), each at utterance level and at system level.
//!
//! Conventions, chosen once and used everywhere:
//! * Spearman uses average (fractional) ranks for ties.
//! * Kendall is the tie-corrected tau-b.
//! * A correlation of a constant input is reported as undefined, not 0.
//! * Summations run in fixed index order so results are bit-reproducible.

use crate::data::{group_by_system, DataError, MosDataset};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {x} vs {y}")]
    LengthMismatch { x: usize, y: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("constant input: correlation undefined")]
    ConstantInput,
    #[error("non-finite input at index {0}")]
    NonFiniteInput(usize),
    #[error(transparent)]
    Data(#[from] DataError),
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch { x: x.len(), y: y.len() });
    }
    for (i, v) in x.iter().chain(y.iter()).enumerate() {
        if !v.is_finite() {
            return Err(MetricError::NonFiniteInput(i % x.len().max(1)));
        }
    }
    Ok(())
}

/// Mean squared error, `(1/n) * sum((pred - truth)^2)`.
pub fn mse(pred: &[f64], truth: &[f64]) -> Result<f64, MetricError> {
    check_pair(pred, truth)?;
    if pred.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let mut acc = 0.0;
    for (p, t) in pred.iter().zip(truth) {
        let d = p - t;
        acc += d * d;
    }
    Ok(acc / pred.len() as f64)
}

/// Pearson linear correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    check_pair(x, y)?;
    let n = x.len();
    if n < 2 {
        return Err(MetricError::TooFewSamples(n));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        let dx = xi - mx;
        let dy = yi - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricError::ConstantInput);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Fractional (average) ranks, 1-based; ties share the mean of their span.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share the average 1-based rank
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson over fractional ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    check_pair(x, y)?;
    if x.len() < 2 {
        return Err(MetricError::TooFewSamples(x.len()));
    }
    pearson(&fractional_ranks(x), &fractional_ranks(y))
}

/// Kendall tau-b: `(C - D) / sqrt((n0 - n1) (n0 - n2))` with C/D the
/// concordant/discordant pair counts and n1/n2 the tie-pair counts in x/y.
///
/// Computed in O(n log n): sort by (x, y), count x-tie and xy-tie runs, then
/// count discordant pairs as merge-sort swaps on the y sequence and y-tie
/// runs on the sorted result.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    check_pair(x, y)?;
    let n = x.len();
    if n < 2 {
        return Err(MetricError::TooFewSamples(n));
    }
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let pair_count = |run: usize| (run * (run - 1) / 2) as f64;
    let n0 = pair_count(n);

    // tie pairs within x and within (x, y) jointly
    let mut tied_x = 0.0;
    let mut tied_xy = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && pairs[j + 1].0 == pairs[i].0 {
            j += 1;
        }
        tied_x += pair_count(j - i + 1);
        let mut a = i;
        while a <= j {
            let mut b = a;
            while b + 1 <= j && pairs[b + 1].1 == pairs[a].1 {
                b += 1;
            }
            tied_xy += pair_count(b - a + 1);
            a = b + 1;
        }
        i = j + 1;
    }

    // discordant pairs = inversions of y once rows are sorted by (x, y)
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let swaps = merge_count_inversions(&mut ys);

    let mut tied_y = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && ys[j + 1] == ys[i] {
            j += 1;
        }
        tied_y += pair_count(j - i + 1);
        i = j + 1;
    }

    let denom = (n0 - tied_x) * (n0 - tied_y);
    if denom <= 0.0 {
        return Err(MetricError::ConstantInput);
    }
    // C - D = n0 - n1 - n2 + n_xy - 2 * swaps
    let c_minus_d = n0 - tied_x - tied_y + tied_xy - 2.0 * swaps as f64;
    Ok((c_minus_d / denom.sqrt()).clamp(-1.0, 1.0))
}

/// Sorts `v` ascending and returns the number of strict inversions.
fn merge_count_inversions(v: &mut [f64]) -> u64 {
    let n = v.len();
    let mut buf = vec![0.0; n];
    let mut swaps = 0u64;
    let mut width = 1;
    while width < n {
        let mut lo = 0;
        while lo < n {
            let mid = (lo + width).min(n);
            let hi = (lo + 2 * width).min(n);
            if mid < hi {
                let (mut i, mut j, mut k) = (lo, mid, lo);
                while i < mid && j < hi {
                    // equal elements come from the left run: no inversion
                    if v[j] < v[i] {
                        buf[k] = v[j];
                        j += 1;
                        swaps += (mid - i) as u64;
                    } else {
                        buf[k] = v[i];
                        i += 1;
                    }
                    k += 1;
                }
                while i < mid {
                    buf[k] = v[i];
                    i += 1;
                    k += 1;
                }
                while j < hi {
                    buf[k] = v[j];
                    j += 1;
                    k += 1;
                }
                v[lo..hi].copy_from_slice(&buf[lo..hi]);
            }
            lo += 2 * width;
        }
        width *= 2;
    }
    swaps
}

/// The 8 challenge metrics. Correlations are `None` when undefined
/// (constant input, or fewer than 2 systems at system level).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub utt_mse: f64,
    pub utt_lcc: Option<f64>,
    pub utt_srcc: Option<f64>,
    pub utt_ktau: Option<f64>,
    pub sys_mse: f64,
    pub sys_lcc: Option<f64>,
    pub sys_srcc: Option<f64>,
    pub sys_ktau: Option<f64>,
}

fn correlation_or_undefined(
    r: Result<f64, MetricError>,
) -> Result<Option<f64>, MetricError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(MetricError::ConstantInput) | Err(MetricError::TooFewSamples(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Utterance-level metrics over `(pred, truth)` and system-level metrics
/// over per-system means.
pub fn evaluate(dataset: &MosDataset, pred: &[f64]) -> Result<MetricReport, MetricError> {
    let truth = dataset.truths()?;
    if pred.len() != truth.len() {
        return Err(MetricError::LengthMismatch { x: pred.len(), y: truth.len() });
    }
    let groups = group_by_system(dataset, pred)?;
    let sys_pred: Vec<f64> = groups.iter().map(|g| g.mean_prediction).collect();
    let sys_truth: Vec<f64> = groups.iter().map(|g| g.mean_true_mos).collect();
    Ok(MetricReport {
        utt_mse: mse(pred, &truth)?,
        utt_lcc: correlation_or_undefined(pearson(pred, &truth))?,
        utt_srcc: correlation_or_undefined(spearman(pred, &truth))?,
        utt_ktau: correlation_or_undefined(kendall_tau_b(pred, &truth))?,
        sys_mse: mse(&sys_pred, &sys_truth)?,
        sys_lcc: correlation_or_undefined(pearson(&sys_pred, &sys_truth))?,
        sys_srcc: correlation_or_undefined(spearman(&sys_pred, &sys_truth))?,
        sys_ktau: correlation_or_undefined(kendall_tau_b(&sys_pred, &sys_truth))?,
    })
}

fn fmt6(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{:.6}", if x == 0.0 { 0.0 } else { x }),
        None => "nan".to_string(),
    }
}

impl MetricReport {
    pub const CSV_HEADER: &'static str =
        "utt_mse,utt_lcc,utt_srcc,utt_ktau,sys_mse,sys_lcc,sys_srcc,sys_ktau";

    /// One CSV row, 6 decimal places, undefined rendered as `nan`.
    pub fn to_csv_row(&self) -> String {
        [
            fmt6(Some(self.utt_mse)),
            fmt6(self.utt_lcc),
            fmt6(self.utt_srcc),
            fmt6(self.utt_ktau),
            fmt6(Some(self.sys_mse)),
            fmt6(self.sys_lcc),
            fmt6(self.sys_srcc),
            fmt6(self.sys_ktau),
        ]
        .join(",")
    }

    /// Aligned text table with the challenge's column layout.
    pub fn to_table(&self) -> String {
        let cells = [
            fmt6(Some(self.utt_mse)),
            fmt6(self.utt_lcc),
            fmt6(self.utt_srcc),
            fmt6(self.utt_ktau),
            fmt6(Some(self.sys_mse)),
            fmt6(self.sys_lcc),
            fmt6(self.sys_srcc),
            fmt6(self.sys_ktau),
        ];
        let mut out = String::new();
        out.push_str("              Utterance level                       System level\n");
        out.push_str("      MSE       LCC      SRCC      KTAU       MSE       LCC      SRCC      KTAU\n");
        for (i, c) in cells.iter().enumerate() {
            if i == 4 {
                out.push(' ');
            }
            out.push_str(&format!("{c:>10}"));
        }
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::UtteranceRecord;

    // Independent O(n^2) pair-counting oracle for tau-b.
    fn kendall_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
        let n = x.len();
        let (mut c, mut d) = (0.0, 0.0);
        let (mut tx, mut ty) = (0.0, 0.0);
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = x[i] - x[j];
                let dy = y[i] - y[j];
                if dx == 0.0 && dy == 0.0 {
                    continue;
                } else if dx == 0.0 {
                    tx += 1.0;
                } else if dy == 0.0 {
                    ty += 1.0;
                } else if dx * dy > 0.0 {
                    c += 1.0;
                } else {
                    d += 1.0;
                }
            }
        }
        let n0 = (n * (n - 1)) as f64 / 2.0;
        // n1/n2 count ALL tie pairs in x resp. y (joint ties included)
        let mut n1 = 0.0;
        let mut n2 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                if x[i] == x[j] {
                    n1 += 1.0;
                }
                if y[i] == y[j] {
                    n2 += 1.0;
                }
            }
        }
        let denom = (n0 - n1) * (n0 - n2);
        if denom <= 0.0 {
            return None;
        }
        Some((c - d) / denom.sqrt())
    }

    // Independent rank-then-Pearson oracle for Spearman.
    fn spearman_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
        let rank = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .map(|&a| {
                    let less = v.iter().filter(|&&b| b < a).count() as f64;
                    let equal = v.iter().filter(|&&b| b == a).count() as f64;
                    less + (equal + 1.0) / 2.0
                })
                .collect()
        };
        let rx = rank(x);
        let ry = rank(y);
        let n = x.len() as f64;
        let mx = rx.iter().sum::<f64>() / n;
        let my = ry.iter().sum::<f64>() / n;
        let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
        let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
        if vx == 0.0 || vy == 0.0 {
            return None;
        }
        Some(cov / (vx * vy).sqrt())
    }

    #[test]
    fn mse_basics() {
        assert_eq!(mse(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert_eq!(mse(&[1.0, 3.0], &[2.0, 4.0]).unwrap(), 1.0);
        assert_eq!(mse(&[], &[]).unwrap_err(), MetricError::EmptyInput);
        assert!(matches!(
            mse(&[1.0], &[1.0, 2.0]).unwrap_err(),
            MetricError::LengthMismatch { .. }
        ));
    }

    #[test]
    fn mse_matches_direct_summation_oracle() {
        let mut rng = crate::rng::Rng::seed_from_u64(41);
        let x: Vec<f64> = (0..10).map(|_| rng.range(1.0, 5.0)).collect();
        let y: Vec<f64> = (0..10).map(|_| rng.range(1.0, 5.0)).collect();
        let oracle: f64 =
            x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64;
        assert!((mse(&x, &y).unwrap() - oracle).abs() < 1e-15);
    }

    #[test]
    fn pearson_exact_linear_relations() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn pearson_hand_expanded_example() {
        // x = [1,2,3,4], y = [1,3,2,4]: cov = 4, var_x = var_y = 5 => 0.8
        let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-15);
    }

    #[test]
    fn pearson_constant_input_is_undefined() {
        assert_eq!(
            pearson(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap_err(),
            MetricError::ConstantInput
        );
    }

    #[test]
    fn spearman_monotone_maps() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[1.0, 4.0, 9.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[9.0, 4.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn spearman_average_ranks_for_ties() {
        assert_eq!(fractional_ranks(&[1.0, 1.0, 2.0]), vec![1.5, 1.5, 3.0]);
        let ours = spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        let oracle = spearman_oracle(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((ours - oracle).abs() < 1e-12);
        // rank-then-Pearson by hand: ranks x = [1.5,1.5,3], y = [1,2,3]
        let by_hand = pearson(&[1.5, 1.5, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((ours - by_hand).abs() < 1e-15);
    }

    #[test]
    fn kendall_identical_and_reversed() {
        assert_eq!(kendall_tau_b(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(kendall_tau_b(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
    }

    #[test]
    fn kendall_matches_pair_counting_oracle_with_ties() {
        let x = [1.0, 2.0, 2.0, 3.0, 3.0, 3.0, 4.0, 1.0];
        let y = [2.0, 2.0, 1.0, 4.0, 4.0, 3.0, 5.0, 1.0];
        let ours = kendall_tau_b(&x, &y).unwrap();
        let oracle = kendall_oracle(&x, &y).unwrap();
        assert!((ours - oracle).abs() < 1e-12, "{ours} vs {oracle}");
    }

    #[test]
    fn kendall_and_spearman_match_oracles_on_random_grids() {
        let mut rng = crate::rng::Rng::seed_from_u64(99);
        for case in 0..50 {
            let n = 2 + rng.below(30);
            // draw from a coarse grid half the time to force ties
            let gridded = case % 2 == 0;
            let draw = |rng: &mut crate::rng::Rng| {
                if gridded {
                    1.0 + 0.5 * rng.below(9) as f64
                } else {
                    rng.range(1.0, 5.0)
                }
            };
            let x: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
            let y: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
            match (kendall_tau_b(&x, &y), kendall_oracle(&x, &y)) {
                (Ok(a), Some(b)) => assert!((a - b).abs() < 1e-12, "case {case}: {a} vs {b}"),
                (Err(MetricError::ConstantInput), None) => {}
                (a, b) => panic!("case {case}: mismatch {a:?} vs {b:?}"),
            }
            match (spearman(&x, &y), spearman_oracle(&x, &y)) {
                (Ok(a), Some(b)) => assert!((a - b).abs() < 1e-12, "case {case}: {a} vs {b}"),
                (Err(MetricError::ConstantInput), None) => {}
                (a, b) => panic!("case {case}: mismatch {a:?} vs {b:?}"),
            }
        }
    }

    #[test]
    fn spearman_closed_form_without_ties() {
        let mut rng = crate::rng::Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = 3 + rng.below(40);
            let x: Vec<f64> = (0..n).map(|_| rng.unit()).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.unit()).collect();
            let rx = fractional_ranks(&x);
            let ry = fractional_ranks(&y);
            let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b) * (a - b)).sum();
            let nf = n as f64;
            let closed = 1.0 - 6.0 * d2 / (nf * (nf * nf - 1.0));
            assert!((spearman(&x, &y).unwrap() - closed).abs() < 1e-12);
        }
    }

    fn demo_dataset() -> MosDataset {
        let mut recs = Vec::new();
        let labels = [
            ("A", 1.5),
            ("A", 2.0),
            ("B", 3.0),
            ("B", 3.5),
            ("C", 4.0),
            ("C", 4.5),
        ];
        for (i, (sys, mos)) in labels.iter().enumerate() {
            recs.push(UtteranceRecord::new(format!("{sys}-u{i}"), *sys, Some(*mos)).unwrap());
        }
        MosDataset::new(recs).unwrap()
    }

    #[test]
    fn evaluate_perfect_predictor() {
        let ds = demo_dataset();
        let pred = ds.truths().unwrap();
        let rep = evaluate(&ds, &pred).unwrap();
        assert_eq!(rep.utt_mse, 0.0);
        assert_eq!(rep.sys_mse, 0.0);
        for c in [rep.utt_lcc, rep.utt_srcc, rep.utt_ktau, rep.sys_lcc, rep.sys_srcc, rep.sys_ktau]
        {
            assert_eq!(c, Some(1.0));
        }
    }

    #[test]
    fn evaluate_reversed_predictor() {
        let ds = demo_dataset();
        let pred: Vec<f64> = ds.truths().unwrap().iter().map(|t| 6.0 - t).collect();
        let rep = evaluate(&ds, &pred).unwrap();
        for c in [rep.utt_lcc, rep.utt_srcc, rep.utt_ktau, rep.sys_lcc, rep.sys_srcc, rep.sys_ktau]
        {
            assert_eq!(c, Some(-1.0));
        }
    }

    #[test]
    fn evaluate_matches_composed_oracles() {
        // 4 systems x 5 utterances, random predictions.
        let mut rng = crate::rng::Rng::seed_from_u64(17);
        let mut recs = Vec::new();
        for s in 0..4 {
            for u in 0..5 {
                let mos = 1.0 + 0.125 * rng.below(33) as f64;
                recs.push(
                    UtteranceRecord::new(format!("s{s}-u{u}"), format!("s{s}"), Some(mos))
                        .unwrap(),
                );
            }
        }
        let ds = MosDataset::new(recs).unwrap();
        let pred: Vec<f64> = (0..ds.len()).map(|_| rng.range(1.0, 5.0)).collect();
        let rep = evaluate(&ds, &pred).unwrap();

        let truth = ds.truths().unwrap();
        assert!((rep.utt_mse - mse(&pred, &truth).unwrap()).abs() < 1e-15);
        assert!((rep.utt_ktau.unwrap() - kendall_oracle(&pred, &truth).unwrap()).abs() < 1e-12);
        assert!((rep.utt_srcc.unwrap() - spearman_oracle(&pred, &truth).unwrap()).abs() < 1e-12);

        let groups = group_by_system(&ds, &pred).unwrap();
        let sp: Vec<f64> = groups.iter().map(|g| g.mean_prediction).collect();
        let st: Vec<f64> = groups.iter().map(|g| g.mean_true_mos).collect();
        assert!((rep.sys_mse - mse(&sp, &st).unwrap()).abs() < 1e-15);
        assert!((rep.sys_lcc.unwrap() - pearson(&sp, &st).unwrap()).abs() < 1e-15);
        assert!((rep.sys_ktau.unwrap() - kendall_oracle(&sp, &st).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn evaluate_single_system_flags_system_correlations_undefined() {
        let recs = vec![
            UtteranceRecord::new("S-1", "S", Some(2.0)).unwrap(),
            UtteranceRecord::new("S-2", "S", Some(4.0)).unwrap(),
        ];
        let ds = MosDataset::new(recs).unwrap();
        let rep = evaluate(&ds, &[2.0, 4.0]).unwrap();
        assert_eq!(rep.utt_lcc, Some(1.0));
        assert_eq!(rep.sys_lcc, None);
        assert_eq!(rep.sys_srcc, None);
        assert_eq!(rep.sys_ktau, None);
        assert_eq!(rep.sys_mse, 0.0);
    }

    #[test]
    fn csv_row_shape() {
        let ds = demo_dataset();
        let rep = evaluate(&ds, &ds.truths().unwrap()).unwrap();
        let row = rep.to_csv_row();
        assert_eq!(row.split(',').count(), 8);
        assert_eq!(row, "0.000000,1.000000,1.000000,1.000000,0.000000,1.000000,1.000000,1.000000");
        assert_eq!(MetricReport::CSV_HEADER.split(',').count(), 8);
    }

    #[test]
    fn correlation_symmetry() {
        let mut rng = crate::rng::Rng::seed_from_u64(23);
        let x: Vec<f64> = (0..25).map(|_| rng.range(1.0, 5.0)).collect();
        let y: Vec<f64> = (0..25).map(|_| 1.0 + 0.5 * rng.below(9) as f64).collect();
        assert_eq!(pearson(&x, &y).unwrap(), pearson(&y, &x).unwrap());
        assert_eq!(spearman(&x, &y).unwrap(), spearman(&y, &x).unwrap());
        assert!((kendall_tau_b(&x, &y).unwrap() - kendall_tau_b(&y, &x).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn mse_shift_invariance() {
        let x = [1.0, 2.5, 3.0];
        let y = [1.5, 2.0, 4.0];
        let xs: Vec<f64> = x.iter().map(|v| v + 0.75).collect();
        let ys: Vec<f64> = y.iter().map(|v| v + 0.75).collect();
        assert_eq!(mse(&x, &y).unwrap(), mse(&xs, &ys).unwrap());
    }
}
