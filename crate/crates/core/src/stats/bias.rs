//! Subgroup error analysis: does the model err more for some groups?
//!
//! Takes per-video absolute errors (typically out-of-fold residuals from
//! cross-validation) joined with participant demographics, and compares
//! each demographic group against its complement with a Welch two-tailed
//! t-test. Age is handled as a continuous correlate instead.

use crate::error::Result;
use crate::ingest::{ParticipantInfo, PdStatus, Sex};
use crate::stats::hypothesis::{pearson_with_p, t_test, TTestKind, Tails};

/// One video's model error, carrying everything needed for grouping.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoError {
    pub video_id: String,
    pub participant_id: String,
    pub abs_error: f64,
    /// Whether raters flagged the video as difficult to score; None when
    /// no rating metadata is available.
    pub difficult: Option<bool>,
}

/// Error statistics of one subgroup versus everyone else.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SubgroupRow {
    /// Which demographic axis ("sex", "pd_status", "race", "quality").
    pub grouping: String,
    /// Group value within the axis ("male", "pd", "white", "difficult", ...).
    pub group: String,
    pub n: usize,
    pub mean_abs_error: f64,
    /// Sample standard deviation of the group's absolute errors.
    pub std_abs_error: f64,
    /// Welch t statistic against the complement, when testable.
    pub t_vs_rest: Option<f64>,
    pub p_vs_rest: Option<f64>,
    /// Why the test is missing, when it is.
    pub note: Option<String>,
}

/// Correlation of absolute error with participant age.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AgeEffect {
    pub n: usize,
    pub r: f64,
    pub p: f64,
}

/// Full subgroup analysis output.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BiasReport {
    pub n_videos: usize,
    pub rows: Vec<SubgroupRow>,
    pub age: Option<AgeEffect>,
    /// Groups dropped entirely (fewer than 2 videos) and other caveats.
    pub notes: Vec<String>,
}

/// Runs the subgroup analysis.
///
/// Groups with fewer than 2 videos are excluded and recorded in `notes`.
/// Errors from videos whose participant has no demographics row still
/// count for the quality grouping but are noted and skipped elsewhere.
pub fn subgroup_error_analysis(
    errors: &[VideoError],
    demographics: &[ParticipantInfo],
) -> Result<BiasReport> {
    let mut notes = Vec::new();
    let lookup = |pid: &str| demographics.iter().find(|d| d.participant_id == pid);

    let mut missing_demo = 0usize;
    for e in errors {
        if lookup(&e.participant_id).is_none() {
            missing_demo += 1;
        }
    }
    if missing_demo > 0 {
        notes.push(format!(
            "{missing_demo} video(s) lack demographics and only contribute to the quality grouping"
        ));
    }

    let mut rows = Vec::new();

    // Each axis maps a video to Some(group label) or None (not groupable).
    let axes: Vec<(&str, Box<dyn Fn(&VideoError) -> Option<String> + '_>)> = vec![
        (
            "sex",
            Box::new(|e: &VideoError| {
                lookup(&e.participant_id).map(|d| {
                    match d.sex {
                        Sex::Male => "male",
                        Sex::Female => "female",
                        Sex::Other => "other",
                    }
                    .to_string()
                })
            }),
        ),
        (
            "pd_status",
            Box::new(|e: &VideoError| {
                lookup(&e.participant_id).map(|d| {
                    match d.pd_status {
                        PdStatus::Pd => "pd",
                        PdStatus::Control => "control",
                        PdStatus::Unknown => "unknown",
                    }
                    .to_string()
                })
            }),
        ),
        (
            "race",
            Box::new(|e: &VideoError| {
                lookup(&e.participant_id).map(|d| {
                    if d.race.trim().eq_ignore_ascii_case("white") {
                        "white".to_string()
                    } else {
                        "non-white".to_string()
                    }
                })
            }),
        ),
        (
            "quality",
            Box::new(|e: &VideoError| {
                e.difficult
                    .map(|f| if f { "difficult" } else { "standard" }.to_string())
            }),
        ),
    ];

    for (axis, classify) in &axes {
        // Collect group labels in first-appearance order for stable output.
        let mut groups: Vec<String> = Vec::new();
        for e in errors {
            if let Some(g) = classify(e) {
                if !groups.contains(&g) {
                    groups.push(g);
                }
            }
        }
        groups.sort();
        for group in groups {
            let in_group: Vec<f64> = errors
                .iter()
                .filter(|e| classify(e).as_deref() == Some(group.as_str()))
                .map(|e| e.abs_error)
                .collect();
            let rest: Vec<f64> = errors
                .iter()
                .filter(|e| {
                    matches!(classify(e), Some(ref g) if *g != group)
                })
                .map(|e| e.abs_error)
                .collect();
            if in_group.len() < 2 {
                notes.push(format!(
                    "{axis}/{group}: only {} video(s), excluded",
                    in_group.len()
                ));
                continue;
            }
            let n = in_group.len();
            let mean = in_group.iter().sum::<f64>() / n as f64;
            let var =
                in_group.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            let (t_vs_rest, p_vs_rest, note) = if rest.len() < 2 {
                (
                    None,
                    None,
                    Some(format!("complement has {} video(s), test skipped", rest.len())),
                )
            } else {
                match t_test(&in_group, &rest, TTestKind::Welch, Tails::Two) {
                    Ok(res) => (Some(res.t), Some(res.p), None),
                    Err(e) => (None, None, Some(format!("test skipped: {e}"))),
                }
            };
            rows.push(SubgroupRow {
                grouping: axis.to_string(),
                group,
                n,
                mean_abs_error: mean,
                std_abs_error: var.sqrt(),
                t_vs_rest,
                p_vs_rest,
                note,
            });
        }
    }

    // Age: continuous, so correlate instead of splitting.
    let mut ages = Vec::new();
    let mut errs = Vec::new();
    for e in errors {
        if let Some(age) = lookup(&e.participant_id).and_then(|d| d.age) {
            ages.push(age);
            errs.push(e.abs_error);
        }
    }
    let age = if ages.len() >= 3 {
        pearson_with_p(&ages, &errs)?.map(|test| AgeEffect {
            n: ages.len(),
            r: test.r,
            p: test.p,
        })
    } else {
        notes.push(format!(
            "age correlation skipped: only {} video(s) with known age",
            ages.len()
        ));
        None
    };
    if age.is_none() && ages.len() >= 3 {
        notes.push("age correlation skipped: no variance in age or error".to_string());
    }

    Ok(BiasReport {
        n_videos: errors.len(),
        rows,
        age,
        notes,
    })
}
