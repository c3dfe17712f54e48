//! Inter-rater agreement: ICC(2,1), Krippendorff's alpha, pairwise tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{RaterRole, RatingRecord};
use crate::stats::special;

/// Intraclass correlation result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IccReport {
    pub value: f64,
    pub ci95: (f64, f64),
    pub n_targets: usize,
    pub n_raters: usize,
    /// Fixed to "ICC(2,1)": two-way random effects, absolute agreement,
    /// single rater.
    pub variant: String,
}

/// ICC(2,1) on a complete targets-by-raters matrix.
///
/// The confidence interval is the standard F-distribution construction for
/// this variant (Satterthwaite degrees of freedom for the column/error
/// mixture). Requires at least 5 targets and 2 raters, and no missing cells.
pub fn icc_two_way_single(matrix: &[Vec<f64>]) -> Result<IccReport> {
    let n = matrix.len();
    if n < 5 {
        return Err(Error::invalid(format!(
            "icc needs at least 5 complete targets, got {n}"
        )));
    }
    let k = matrix[0].len();
    if k < 2 {
        return Err(Error::invalid("icc needs at least 2 raters"));
    }
    for (i, row) in matrix.iter().enumerate() {
        if row.len() != k {
            return Err(Error::invalid(format!(
                "icc matrix row {i} has {} entries, expected {k}",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("icc matrix row {i} is incomplete")));
        }
    }

    let nf = n as f64;
    let kf = k as f64;
    let grand = matrix.iter().flatten().sum::<f64>() / (nf * kf);
    let row_means: Vec<f64> = matrix
        .iter()
        .map(|r| r.iter().sum::<f64>() / kf)
        .collect();
    let col_means: Vec<f64> = (0..k)
        .map(|j| matrix.iter().map(|r| r[j]).sum::<f64>() / nf)
        .collect();

    let ss_rows = kf * row_means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>();
    let ss_cols = nf * col_means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>();
    let ss_total = matrix
        .iter()
        .flatten()
        .map(|v| (v - grand) * (v - grand))
        .sum::<f64>();
    let ss_err = (ss_total - ss_rows - ss_cols).max(0.0);

    let msr = ss_rows / (nf - 1.0);
    let msc = ss_cols / (kf - 1.0);
    let mse = ss_err / ((nf - 1.0) * (kf - 1.0));

    let denom = msr + (kf - 1.0) * mse + kf / nf * (msc - mse);
    if denom == 0.0 {
        return Err(Error::invalid(
            "icc undefined: ratings are constant across targets and raters",
        ));
    }
    let value = (msr - mse) / denom;

    // Perfect agreement leaves no column or error variance to build an
    // interval from; the estimate is exact.
    let ci95 = if mse == 0.0 && msc == 0.0 {
        (value, value)
    } else {
        let a = kf * value / (nf * (1.0 - value));
        let b = 1.0 + kf * value * (nf - 1.0) / (nf * (1.0 - value));
        let mix = a * msc + b * mse;
        let v = mix * mix
            / ((a * msc) * (a * msc) / (kf - 1.0)
                + (b * mse) * (b * mse) / ((nf - 1.0) * (kf - 1.0)));
        let fl = special::f_quantile(0.975, nf - 1.0, v)?;
        let fu = special::f_quantile(0.975, v, nf - 1.0)?;
        let spread = kf * msc + (kf * nf - kf - nf) * mse;
        let lower = nf * (msr - fl * mse) / (fl * spread + nf * msr);
        let upper = nf * (fu * msr - mse) / (spread + nf * fu * msr);
        (lower.clamp(-1.0, 1.0), upper.clamp(-1.0, 1.0))
    };

    Ok(IccReport {
        value,
        ci95,
        n_targets: n,
        n_raters: k,
        variant: "ICC(2,1)".to_string(),
    })
}

/// Distance metric for Krippendorff's alpha.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlphaMetric {
    /// Rank-based distance from coincidence marginals. The right choice for
    /// the 0-4 severity scale and the default everywhere in this crate.
    Ordinal,
    Interval,
}

/// Krippendorff's alpha over units-by-raters ratings with missing cells.
///
/// Units with fewer than two ratings carry no pairing information and are
/// skipped; it is an error if every unit is skipped or if only one distinct
/// value occurs (no disagreement is expressible).
pub fn krippendorff_alpha(units: &[Vec<Option<f64>>], metric: AlphaMetric) -> Result<f64> {
    let mut values: Vec<f64> = units
        .iter()
        .flatten()
        .flatten()
        .copied()
        .collect();
    values.sort_by(|a, b| a.partial_cmp(b).expect("ratings must not be NaN"));
    values.dedup();
    let m = values.len();
    if m == 0 {
        return Err(Error::invalid("krippendorff alpha: no ratings at all"));
    }
    let index_of = |v: f64| values.partition_point(|&x| x < v);

    // Coincidence matrix: each pairable unit contributes every ordered pair
    // of its ratings, weighted by 1/(m_u - 1).
    let mut coincidence = vec![vec![0.0; m]; m];
    let mut any_pairable = false;
    for unit in units {
        let xs: Vec<usize> = unit.iter().flatten().map(|&v| index_of(v)).collect();
        let mu = xs.len();
        if mu < 2 {
            continue;
        }
        any_pairable = true;
        let w = 1.0 / (mu as f64 - 1.0);
        for i in 0..mu {
            for j in 0..mu {
                if i != j {
                    coincidence[xs[i]][xs[j]] += w;
                }
            }
        }
    }
    if !any_pairable {
        return Err(Error::invalid(
            "krippendorff alpha: no unit has two or more ratings",
        ));
    }

    let marginals: Vec<f64> = coincidence.iter().map(|row| row.iter().sum()).collect();
    let n_total: f64 = marginals.iter().sum();

    let delta2 = |c: usize, k: usize| -> f64 {
        match metric {
            AlphaMetric::Interval => {
                let d = values[c] - values[k];
                d * d
            }
            AlphaMetric::Ordinal => {
                let (lo, hi) = (c.min(k), c.max(k));
                let s: f64 =
                    marginals[lo..=hi].iter().sum::<f64>() - (marginals[lo] + marginals[hi]) / 2.0;
                s * s
            }
        }
    };

    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..m {
        for k in (c + 1)..m {
            let d2 = delta2(c, k);
            observed += coincidence[c][k] * d2;
            expected += marginals[c] * marginals[k] * d2;
        }
    }
    if expected == 0.0 {
        return Err(Error::invalid(
            "krippendorff alpha undefined: only one distinct rating value",
        ));
    }
    Ok(1.0 - (n_total - 1.0) * observed / expected)
}

/// Head-to-head comparison of two raters over the videos both rated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseAgreement {
    pub rater_a: String,
    pub rater_b: String,
    pub n: usize,
    pub exact_percent: f64,
    pub mae: f64,
}

/// One point of a rater-vs-rater scatter plot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub video_id: String,
    pub rater_a: String,
    pub rating_a: u8,
    pub rater_b: String,
    pub rating_b: u8,
}

/// Full agreement report over a rating sheet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    /// ICC(2,1) over videos rated by every expert.
    pub icc: IccReport,
    /// Krippendorff's alpha (ordinal) over expert ratings, tolerating
    /// missing cells.
    pub alpha: f64,
    pub alpha_metric: String,
    pub n_videos: usize,
    pub n_experts: usize,
    /// Every rater pair, experts and non-experts alike.
    pub pairwise: Vec<PairwiseAgreement>,
}

fn sorted_unique<T: Ord + Clone>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut v: Vec<T> = items.collect();
    v.sort();
    v.dedup();
    v
}

fn rating_of(records: &[RatingRecord], video: &str, rater: &str) -> Option<u8> {
    records
        .iter()
        .find(|r| r.video_id == video && r.rater_id == rater)
        .map(|r| r.rating)
}

/// Builds the agreement report from raw rating records.
pub fn agreement_report(records: &[RatingRecord]) -> Result<AgreementReport> {
    let videos = sorted_unique(records.iter().map(|r| r.video_id.clone()));
    let experts = sorted_unique(
        records
            .iter()
            .filter(|r| r.rater_role == RaterRole::Expert)
            .map(|r| r.rater_id.clone()),
    );
    if experts.is_empty() {
        return Err(Error::invalid("agreement report needs expert ratings"));
    }

    // Alpha tolerates holes; ICC needs complete rows.
    let mut alpha_units: Vec<Vec<Option<f64>>> = Vec::new();
    let mut icc_rows: Vec<Vec<f64>> = Vec::new();
    for video in &videos {
        let row: Vec<Option<f64>> = experts
            .iter()
            .map(|e| rating_of(records, video, e).map(f64::from))
            .collect();
        if row.iter().all(Option::is_some) {
            icc_rows.push(row.iter().map(|v| v.unwrap()).collect());
        }
        alpha_units.push(row);
    }

    let icc = icc_two_way_single(&icc_rows)?;
    let alpha = krippendorff_alpha(&alpha_units, AlphaMetric::Ordinal)?;

    let raters = sorted_unique(records.iter().map(|r| r.rater_id.clone()));
    let mut pairwise = Vec::new();
    for i in 0..raters.len() {
        for j in (i + 1)..raters.len() {
            let mut n = 0usize;
            let mut exact = 0usize;
            let mut abs_sum = 0.0;
            for video in &videos {
                let (Some(a), Some(b)) = (
                    rating_of(records, video, &raters[i]),
                    rating_of(records, video, &raters[j]),
                ) else {
                    continue;
                };
                n += 1;
                if a == b {
                    exact += 1;
                }
                abs_sum += (f64::from(a) - f64::from(b)).abs();
            }
            if n > 0 {
                pairwise.push(PairwiseAgreement {
                    rater_a: raters[i].clone(),
                    rater_b: raters[j].clone(),
                    n,
                    exact_percent: 100.0 * exact as f64 / n as f64,
                    mae: abs_sum / n as f64,
                });
            }
        }
    }

    Ok(AgreementReport {
        n_videos: icc.n_targets,
        n_experts: experts.len(),
        icc,
        alpha,
        alpha_metric: "ordinal".to_string(),
        pairwise,
    })
}

/// All rater-pair rating pairs, for scatter plots.
pub fn pairwise_scatter(records: &[RatingRecord]) -> Vec<ScatterRow> {
    let videos = sorted_unique(records.iter().map(|r| r.video_id.clone()));
    let raters = sorted_unique(records.iter().map(|r| r.rater_id.clone()));
    let mut rows = Vec::new();
    for i in 0..raters.len() {
        for j in (i + 1)..raters.len() {
            for video in &videos {
                let (Some(a), Some(b)) = (
                    rating_of(records, video, &raters[i]),
                    rating_of(records, video, &raters[j]),
                ) else {
                    continue;
                };
                rows.push(ScatterRow {
                    video_id: video.clone(),
                    rater_a: raters[i].clone(),
                    rating_a: a,
                    rater_b: raters[j].clone(),
                    rating_b: b,
                });
            }
        }
    }
    rows
}
