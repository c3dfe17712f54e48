//! Hypothesis tests used by the correlation and bias reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::special;

/// Which t-test to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TTestKind {
    /// Unequal-variance (Welch) test for independent samples.
    Welch,
    /// Test on per-pair differences; samples must align.
    Paired,
}

/// Tail convention for p-values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tails {
    Two,
    /// Upper tail: small p supports "first sample mean is larger".
    OneGreater,
}

/// t statistic, degrees of freedom, and p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

fn mean_and_sample_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Student's t-test.
///
/// Welch uses the Welch-Satterthwaite degrees of freedom. Zero variance in
/// both samples (or in the paired differences) leaves t undefined and is
/// reported as an error rather than an infinity.
pub fn t_test(a: &[f64], b: &[f64], kind: TTestKind, tails: Tails) -> Result<TTestResult> {
    match kind {
        TTestKind::Welch => {
            if a.len() < 2 || b.len() < 2 {
                return Err(Error::invalid(format!(
                    "welch t-test needs at least 2 samples per group, got {} and {}",
                    a.len(),
                    b.len()
                )));
            }
            let (ma, va) = mean_and_sample_var(a);
            let (mb, vb) = mean_and_sample_var(b);
            if va == 0.0 && vb == 0.0 {
                return Err(Error::invalid(
                    "welch t-test undefined: zero variance in both samples",
                ));
            }
            let na = a.len() as f64;
            let nb = b.len() as f64;
            let se2 = va / na + vb / nb;
            let t = (ma - mb) / se2.sqrt();
            let df = se2 * se2
                / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
            finish_t(t, df, tails)
        }
        TTestKind::Paired => {
            if a.len() != b.len() {
                return Err(Error::invalid(format!(
                    "paired t-test needs equal lengths, got {} and {}",
                    a.len(),
                    b.len()
                )));
            }
            if a.len() < 2 {
                return Err(Error::invalid("paired t-test needs at least 2 pairs"));
            }
            let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            let (md, vd) = mean_and_sample_var(&d);
            if vd == 0.0 {
                return Err(Error::invalid(
                    "paired t-test undefined: differences have zero variance",
                ));
            }
            let n = d.len() as f64;
            let t = md / (vd / n).sqrt();
            finish_t(t, n - 1.0, tails)
        }
    }
}

fn finish_t(t: f64, df: f64, tails: Tails) -> Result<TTestResult> {
    let p = match tails {
        Tails::Two => special::student_t_two_sided_p(t, df)?,
        Tails::OneGreater => special::student_t_upper_p(t, df)?,
    };
    Ok(TTestResult { t, df, p })
}

/// Chi-square statistic and p-value for a 2x2 contingency table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub df: f64,
    pub p: f64,
}

/// Chi-square test of independence on a 2x2 table of counts.
///
/// Expected counts come from the marginals; any zero marginal makes an
/// expected cell zero and the test undefined. Yates continuity correction
/// is available but off by default to match how the rest of the pipeline
/// reports the statistic.
pub fn chi_square_independence(table: [[u64; 2]; 2], yates: bool) -> Result<ChiSquareResult> {
    let row: [f64; 2] = [
        (table[0][0] + table[0][1]) as f64,
        (table[1][0] + table[1][1]) as f64,
    ];
    let col: [f64; 2] = [
        (table[0][0] + table[1][0]) as f64,
        (table[0][1] + table[1][1]) as f64,
    ];
    let total = row[0] + row[1];
    if row.contains(&0.0) || col.contains(&0.0) {
        return Err(Error::invalid(
            "chi-square undefined: a marginal of the 2x2 table is zero",
        ));
    }
    let mut stat = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            let expected = row[r] * col[c] / total;
            let mut dev = (table[r][c] as f64 - expected).abs();
            if yates {
                dev = (dev - 0.5).max(0.0);
            }
            stat += dev * dev / expected;
        }
    }
    Ok(ChiSquareResult {
        statistic: stat,
        df: 1.0,
        p: special::chi_square_upper_p(stat, 1.0)?,
    })
}

/// Pearson correlation with a two-sided p-value from the exact t transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTest {
    pub r: f64,
    pub n: usize,
    pub p: f64,
}

/// Correlation of `x` and `y` with significance.
///
/// Returns `Ok(None)` when the correlation is undefined (zero variance) so
/// callers can report the exclusion instead of failing.
pub fn pearson_with_p(x: &[f64], y: &[f64]) -> Result<Option<CorrelationTest>> {
    if x.len() != y.len() {
        return Err(Error::invalid("correlation inputs differ in length"));
    }
    if x.len() < 3 {
        return Err(Error::invalid(
            "correlation significance needs at least 3 points",
        ));
    }
    let Some(r) = crate::stats::pearson(x, y) else {
        return Ok(None);
    };
    let n = x.len();
    let df = (n - 2) as f64;
    let p = if 1.0 - r * r <= 0.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        special::student_t_two_sided_p(t, df)?
    };
    Ok(Some(CorrelationTest { r, n, p }))
}
