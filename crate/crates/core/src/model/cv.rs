//! Leave-one-participant-out cross-validation and full-set training.
//!
//! Every participant becomes one fold holding out all of their
//! recordings. Inside a fold nothing touches the held-out rows: the
//! scaler, the optional oversampling, the feature elimination, and the
//! ensemble all fit on the remaining participants, and only then score
//! the held-out videos. Folds run in ascending participant order and the
//! whole procedure is deterministic for a fixed config.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Provenance, RunConfig};
use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::model::gbm::{fit_gbm, BoostedEnsemble};
use crate::model::rfe::boost_rfe;
use crate::model::scaler::{apply_scaler, fit_scaler};
use crate::model::smote::smote_oversample;
use crate::stats::{regression_metrics, MetricReport};

/// One held-out recording's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoPrediction {
    pub video_id: String,
    pub participant_id: String,
    pub truth: u8,
    /// Clamped to the severity scale.
    pub prediction: f64,
    pub prediction_raw: f64,
    /// |prediction - truth| on the clamped value.
    pub abs_error: f64,
}

/// Row ids each training stage consumed, for leakage audits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAudit {
    pub train_video_ids: Vec<String>,
    pub scaler_video_ids: Vec<String>,
    pub rfe_video_ids: Vec<String>,
}

/// One fold: the participant held out and what happened to their videos.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub participant_id: String,
    /// Rows the final ensemble fit on (after any oversampling).
    pub n_train_rows: usize,
    pub selected_features: Vec<String>,
    pub videos: Vec<VideoPrediction>,
    /// Worst |base + sum(contributions) - raw| over held-out rows,
    /// present when the config asks for the check.
    pub shap_max_local_error: Option<f64>,
    pub audit: Option<FoldAudit>,
}

/// The full cross-validation outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub provenance: Provenance,
    pub folds: Vec<FoldReport>,
    /// Metrics over the pooled clamped predictions.
    pub pooled: MetricReport,
    /// Mean absolute error of the raw (unclamped) predictions.
    pub mae_raw: f64,
    pub n_videos: usize,
    pub n_participants: usize,
}

impl CvReport {
    pub fn save_json(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::internal(format!("report serialization: {e}")))?;
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    /// Per-video predictions as CSV, fold order.
    pub fn save_predictions_csv(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        writeln!(
            file,
            "# tool_version={} catalog_version={} config_hash={}",
            self.provenance.tool_version,
            self.provenance.catalog_version,
            self.provenance.config_hash
        )
        .map_err(|e| Error::io(path, e))?;
        writeln!(
            file,
            "video_id,participant_id,truth,prediction,prediction_raw,abs_error"
        )
        .map_err(|e| Error::io(path, e))?;
        for fold in &self.folds {
            for v in &fold.videos {
                writeln!(
                    file,
                    "{},{},{},{},{},{}",
                    v.video_id,
                    v.participant_id,
                    v.truth,
                    v.prediction,
                    v.prediction_raw,
                    v.abs_error
                )
                .map_err(|e| Error::io(path, e))?;
            }
        }
        Ok(())
    }

    /// Flattened per-video predictions in fold order.
    pub fn all_videos(&self) -> impl Iterator<Item = &VideoPrediction> {
        self.folds.iter().flat_map(|f| f.videos.iter())
    }
}

/// A model fitted on some training rows plus everything needed to report
/// how it was produced.
struct FittedFold {
    ensemble: BoostedEnsemble,
    n_train_rows: usize,
}

/// Fits scaler, optional oversampling, feature elimination, and the
/// ensemble on `train`. `smote_stream` keeps oversampling draws
/// independent between folds regardless of execution order.
fn fit_training_stack(
    train: &FeatureTable,
    cfg: &RunConfig,
    smote_stream: u64,
) -> Result<FittedFold> {
    let truth = train
        .truth
        .as_ref()
        .ok_or_else(|| Error::invalid("training rows carry no ground truth"))?;

    let scaler_full = fit_scaler(train)?;
    if scaler_full.feature_names.is_empty() {
        return Err(Error::invalid(
            "no feature survived scaling (all constant or missing)".to_string(),
        ));
    }
    let scaled = apply_scaler(&scaler_full, train)?;

    // Oversampling happens in scaled space so neighbor distances weigh
    // every feature equally; elimination and fitting then see the
    // augmented rows.
    let (rows, labels): (Vec<Vec<f64>>, Vec<u8>) = if cfg.smote.enabled {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.gbm.seed);
        // Boosting rounds use streams 1..=n_estimators of the same seed;
        // oversampling lives beyond 2^32 so the two never collide.
        rng.set_stream((1 << 32) + smote_stream);
        smote_oversample(&scaled.values, truth, cfg.smote.k, &mut rng)?
    } else {
        (scaled.values.clone(), truth.clone())
    };
    let targets: Vec<f64> = labels.iter().map(|&t| f64::from(t)).collect();
    let cols: Vec<Vec<f64>> = (0..scaled.n_features())
        .map(|j| rows.iter().map(|r| r[j]).collect())
        .collect();

    let selected = if cfg.rfe.enabled {
        let available = scaled.n_features();
        let n_top = if cfg.rfe.n_top > available {
            log::warn!(
                "elimination target {} capped at the {available} available features",
                cfg.rfe.n_top
            );
            available
        } else {
            cfg.rfe.n_top
        };
        boost_rfe(&cols, &scaled.feature_names, &targets, n_top, &cfg.gbm)?
    } else {
        scaled.feature_names.clone()
    };

    let selected_cols: Vec<Vec<f64>> = selected
        .iter()
        .map(|name| {
            let j = scaled
                .feature_pos(name)
                .expect("selected features come from the scaled table");
            rows.iter().map(|r| r[j]).collect()
        })
        .collect();
    let model = fit_gbm(&selected_cols, &targets, &cfg.gbm)?;
    let scaler = scaler_full.subset(&selected)?;
    let ensemble = BoostedEnsemble::assemble(
        model,
        selected,
        scaler,
        &cfg.gbm,
        &Provenance::new(cfg),
    )?;
    Ok(FittedFold {
        ensemble,
        n_train_rows: rows.len(),
    })
}

/// Applies correlation pruning once, table-wide. The published method
/// fixes the feature roster before any train/test split, so this is part
/// of the dataset preparation rather than a per-fold fitted quantity.
fn pruned_view(table: &FeatureTable, cfg: &RunConfig) -> Option<FeatureTable> {
    if !cfg.prune.enabled {
        return None;
    }
    let keep = table.prune_correlated(cfg.prune.threshold);
    if keep.len() == table.n_features() {
        return None;
    }
    log::info!(
        "correlation pruning kept {} of {} features",
        keep.len(),
        table.n_features()
    );
    Some(table.select_columns(&keep))
}

/// Trains one model on the entire table (no held-out rows). Used for the
/// shippable artifact after cross-validation has estimated performance.
pub fn train_model(table: &FeatureTable, cfg: &RunConfig) -> Result<BoostedEnsemble> {
    let pruned = pruned_view(table, cfg);
    let table = pruned.as_ref().unwrap_or(table);
    Ok(fit_training_stack(table, cfg, 0)?.ensemble)
}

/// Runs leave-one-participant-out cross-validation.
pub fn lopo_cv(table: &FeatureTable, cfg: &RunConfig) -> Result<CvReport> {
    let pruned = pruned_view(table, cfg);
    let table = pruned.as_ref().unwrap_or(table);
    let truth = table
        .truth
        .as_ref()
        .ok_or_else(|| Error::invalid("cross-validation needs ground truth attached"))?;
    if table.n_rows() == 0 {
        return Err(Error::invalid("empty feature table"));
    }

    let mut by_participant: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, meta) in table.rows.iter().enumerate() {
        by_participant
            .entry(meta.participant_id.as_str())
            .or_default()
            .push(i);
    }
    if by_participant.len() < 3 {
        return Err(Error::invalid(format!(
            "cross-validation needs at least 3 participants, got {}",
            by_participant.len()
        )));
    }

    let mut folds = Vec::with_capacity(by_participant.len());
    let mut pooled_pred = Vec::with_capacity(table.n_rows());
    let mut pooled_truth = Vec::with_capacity(table.n_rows());
    let mut raw_abs_sum = 0.0;

    for (ordinal, (participant, test_idx)) in by_participant.iter().enumerate() {
        let train_idx: Vec<usize> = (0..table.n_rows())
            .filter(|i| !test_idx.contains(i))
            .collect();
        let train = table.select_rows(&train_idx);
        let test = table.select_rows(test_idx);

        let fitted = fit_training_stack(&train, cfg, 1 + ordinal as u64)
            .map_err(|e| Error::invalid(format!("fold {participant}: {e}")))?;
        let preds = fitted.ensemble.predict_table(&test)?;

        let shap_max_local_error = if cfg.cv.shap_check {
            let attrs = crate::explain::explain_table(&fitted.ensemble, &test)?;
            let worst = attrs
                .iter()
                .zip(&preds.raw)
                .map(|(a, &raw)| {
                    let reconstructed: f64 = a.base + a.contributions.iter().sum::<f64>();
                    (reconstructed - raw).abs()
                })
                .fold(0.0f64, f64::max);
            Some(worst)
        } else {
            None
        };

        let audit = cfg.cv.audit_rows.then(|| {
            let ids: Vec<String> = train.rows.iter().map(|m| m.video_id.clone()).collect();
            FoldAudit {
                train_video_ids: ids.clone(),
                scaler_video_ids: ids.clone(),
                rfe_video_ids: ids,
            }
        });

        let mut videos = Vec::with_capacity(test_idx.len());
        for (k, &row) in test_idx.iter().enumerate() {
            let t = truth[row];
            let clamped = preds.clamped[k];
            let raw = preds.raw[k];
            raw_abs_sum += (raw - f64::from(t)).abs();
            pooled_pred.push(clamped);
            pooled_truth.push(t);
            videos.push(VideoPrediction {
                video_id: table.rows[row].video_id.clone(),
                participant_id: table.rows[row].participant_id.clone(),
                truth: t,
                prediction: clamped,
                prediction_raw: raw,
                abs_error: (clamped - f64::from(t)).abs(),
            });
        }

        folds.push(FoldReport {
            participant_id: (*participant).to_string(),
            n_train_rows: fitted.n_train_rows,
            selected_features: fitted.ensemble.selected_features.clone(),
            videos,
            shap_max_local_error,
            audit,
        });
    }

    let pooled = regression_metrics(&pooled_pred, &pooled_truth)?;
    Ok(CvReport {
        provenance: Provenance::new(cfg),
        mae_raw: raw_abs_sum / pooled_pred.len() as f64,
        n_videos: pooled_pred.len(),
        n_participants: folds.len(),
        folds,
        pooled,
    })
}
