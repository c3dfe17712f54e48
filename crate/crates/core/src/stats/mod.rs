//! Evaluation metrics, agreement measures, and hypothesis tests.

pub mod agreement;
pub mod bias;
pub mod hypothesis;
pub mod special;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pooled regression-quality metrics for severity predictions.
///
/// Correlation fields are `None` when undefined (zero variance on either
/// side); `mape_percent` is `None` when every ground-truth value is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub mae: f64,
    pub mse: f64,
    pub mape_percent: Option<f64>,
    /// Rows skipped by MAPE because their ground truth is zero.
    pub mape_excluded_zero_truth: usize,
    /// Exact-match rate after rounding half-up and clamping to the scale.
    pub accuracy_percent: f64,
    pub pearson_r: Option<f64>,
    pub spearman_rho: Option<f64>,
    pub kendall_tau_b: Option<f64>,
}

/// Rounds half-up, then clamps onto the 0-4 severity scale.
pub fn round_to_scale(x: f64) -> u8 {
    let r = (x + 0.5).floor();
    r.clamp(0.0, 4.0) as u8
}

/// Computes the full metric suite over prediction/truth pairs.
pub fn regression_metrics(pred: &[f64], truth: &[u8]) -> Result<MetricReport> {
    if pred.len() != truth.len() {
        return Err(Error::invalid(format!(
            "predictions ({}) and truth ({}) differ in length",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::invalid("no prediction/truth pairs"));
    }
    let n = pred.len();
    let truth_f: Vec<f64> = truth.iter().map(|&t| f64::from(t)).collect();

    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut ape_sum = 0.0;
    let mut ape_n = 0usize;
    let mut hits = 0usize;
    for i in 0..n {
        let err = pred[i] - truth_f[i];
        abs_sum += err.abs();
        sq_sum += err * err;
        if truth[i] != 0 {
            ape_sum += err.abs() / truth_f[i];
            ape_n += 1;
        }
        if round_to_scale(pred[i]) == truth[i] {
            hits += 1;
        }
    }

    Ok(MetricReport {
        n,
        mae: abs_sum / n as f64,
        mse: sq_sum / n as f64,
        mape_percent: (ape_n > 0).then(|| 100.0 * ape_sum / ape_n as f64),
        mape_excluded_zero_truth: n - ape_n,
        accuracy_percent: 100.0 * hits as f64 / n as f64,
        pearson_r: pearson(pred, &truth_f),
        spearman_rho: spearman(pred, &truth_f),
        kendall_tau_b: kendall_tau_b(pred, &truth_f),
    })
}

/// Linear-interpolation percentile (the numpy default): `p` in [0, 1],
/// `sorted` ascending and nonempty.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!((0.0..=1.0).contains(&p));
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Pearson correlation coefficient, or `None` when either side has zero
/// variance or fewer than two points.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    debug_assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Average ranks (ties share the mean of the positions they occupy).
pub(crate) fn average_ranks(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).expect("rank values must not be NaN"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        // Positions are 1-based, so the run i..=j averages to this.
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Kendall's tau-b (tie-corrected).
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len();
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    let mut ties_x = 0i64;
    let mut ties_y = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[i].partial_cmp(&x[j]).expect("tau values must not be NaN");
            let dy = y[i].partial_cmp(&y[j]).expect("tau values must not be NaN");
            use std::cmp::Ordering::Equal;
            match (dx, dy) {
                (Equal, Equal) => {}
                (Equal, _) => ties_x += 1,
                (_, Equal) => ties_y += 1,
                (a, b) if a == b => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    // Pairs tied in both count toward the tie totals of each variable.
    let both = n0 - concordant - discordant - ties_x - ties_y;
    let tx = ties_x + both;
    let ty = ties_y + both;
    let denom = (((n0 - tx) as f64) * ((n0 - ty) as f64)).sqrt();
    if denom == 0.0 {
        return None;
    }
    Some(((concordant - discordant) as f64 / denom).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn perfect_predictions() {
        let truth = [0u8, 1, 2, 3, 4];
        let pred = [0.0, 1.0, 2.0, 3.0, 4.0];
        let m = regression_metrics(&pred, &truth).unwrap();
        assert_eq!(m.mae, 0.0);
        assert_eq!(m.mse, 0.0);
        assert_eq!(m.accuracy_percent, 100.0);
        assert_eq!(m.pearson_r, Some(1.0));
        assert_eq!(m.spearman_rho, Some(1.0));
        assert_eq!(m.kendall_tau_b, Some(1.0));
        assert_eq!(m.mape_percent, Some(0.0));
        assert_eq!(m.mape_excluded_zero_truth, 1);
    }

    #[test]
    fn one_point_error_at_severity_four_is_25_percent() {
        let m = regression_metrics(&[3.0], &[4u8]).unwrap();
        assert_eq!(m.mape_percent, Some(25.0));
        assert_eq!(m.mae, 1.0);
        assert_eq!(m.mse, 1.0);
        assert_eq!(m.accuracy_percent, 0.0);
    }

    #[test]
    fn mape_skips_zero_truth_rows() {
        let m = regression_metrics(&[0.5, 2.0], &[0u8, 4]).unwrap();
        assert_eq!(m.mape_excluded_zero_truth, 1);
        assert_eq!(m.mape_percent, Some(50.0));
        let all_zero = regression_metrics(&[0.5], &[0u8]).unwrap();
        assert_eq!(all_zero.mape_percent, None);
    }

    #[test]
    fn rounding_is_half_up_then_clamped() {
        assert_eq!(round_to_scale(0.49), 0);
        assert_eq!(round_to_scale(0.5), 1);
        assert_eq!(round_to_scale(3.5), 4);
        assert_eq!(round_to_scale(4.7), 4);
        assert_eq!(round_to_scale(-0.2), 0);
    }

    #[test]
    fn constant_series_has_no_correlation() {
        let m = regression_metrics(&[2.0, 2.0, 2.0], &[1u8, 2, 3]).unwrap();
        assert_eq!(m.pearson_r, None);
        assert_eq!(m.spearman_rho, None);
        assert_eq!(m.kendall_tau_b, None);
    }

    #[test]
    fn rank_correlations_match_references() {
        // Reference values from scipy.stats (spearmanr / kendalltau variant b).
        let x = [1.0, 2.0, 2.0, 3.0, 4.0, 5.0, 5.0, 6.0];
        let y = [2.0, 1.0, 3.0, 3.0, 5.0, 4.0, 6.0, 6.0];
        assert_relative_eq!(
            kendall_tau_b(&x, &y).unwrap(),
            0.7692307692307694,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            spearman(&x, &y).unwrap(),
            0.8902439024390245,
            max_relative = 1e-12
        );
        let x2 = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        let y2 = [2.0, 7.0, 1.0, 8.0, 2.0, 8.0, 1.0, 8.0];
        assert_relative_eq!(
            kendall_tau_b(&x2, &y2).unwrap(),
            0.16051447078102563,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            spearman(&x2, &y2).unwrap(),
            0.19885368120992467,
            max_relative = 1e-12
        );
    }

    #[test]
    fn average_ranks_handle_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 30.0]), vec![1.0, 2.5, 2.5, 4.0]);
    }

    #[test]
    fn length_mismatch_and_empty_are_errors() {
        assert!(regression_metrics(&[1.0], &[1u8, 2]).is_err());
        assert!(regression_metrics(&[], &[]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn mae_squared_never_exceeds_mse(
            pairs in proptest::collection::vec((0.0f64..4.0, 0u8..=4), 1..40)
        ) {
            let pred: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let truth: Vec<u8> = pairs.iter().map(|p| p.1).collect();
            let m = regression_metrics(&pred, &truth).unwrap();
            proptest::prop_assert!(m.mae * m.mae <= m.mse + 1e-12);
            if let Some(r) = m.pearson_r {
                proptest::prop_assert!((-1.0..=1.0).contains(&r));
            }
            if let Some(r) = m.spearman_rho {
                proptest::prop_assert!((-1.0..=1.0).contains(&r));
            }
            if let Some(t) = m.kendall_tau_b {
                proptest::prop_assert!((-1.0..=1.0).contains(&t));
            }
        }
    }
}
