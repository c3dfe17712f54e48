//! Gradient-boosted regression on squared error.
//!
//! Boosting is the plain residual-fitting scheme: the base score is the
//! mean target, and each round fits a depth-limited tree to the current
//! residuals of a per-round row subsample, then shrinks it by the
//! learning rate. The subsample for round `k` comes from an independent
//! stream `k + 1` of a counter-based generator seeded with the configured
//! seed, so regenerating any round never depends on how many draws other
//! rounds consumed.

use crate::config::{GbmConfig, CLAMP_RANGE};
use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::model::scaler::ScalerParams;
use crate::model::tree::{grow_tree, GrowScratch, PreparedCols, RegressionTree};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

/// Version stamp of the serialized model layout.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A fitted boosting core: everything needed to score rows that are
/// already scaled and laid out in the model's feature order.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GbmModel {
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
}

impl GbmModel {
    /// Unclamped score of one row (tree feature space).
    pub fn predict_raw_row(&self, row: &[f64]) -> f64 {
        let mut acc = 0.0;
        for tree in &self.trees {
            acc += tree.predict_row(row);
        }
        self.base_score + self.learning_rate * acc
    }

    /// Score clamped to the severity scale.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.predict_raw_row(row).clamp(CLAMP_RANGE.0, CLAMP_RANGE.1)
    }
}

fn check_config(cfg: &GbmConfig) -> Result<()> {
    if cfg.learning_rate <= 0.0 {
        return Err(Error::Config(format!(
            "gbm learning rate must be positive, got {}",
            cfg.learning_rate
        )));
    }
    if cfg.n_estimators < 1 {
        return Err(Error::Config("gbm needs at least 1 estimator".into()));
    }
    if !(cfg.subsample > 0.0 && cfg.subsample <= 1.0) {
        return Err(Error::Config(format!(
            "gbm subsample must be in (0,1], got {}",
            cfg.subsample
        )));
    }
    if cfg.max_depth < 1 || cfg.max_depth > 15 {
        return Err(Error::Config(format!(
            "gbm max depth must be in 1..=15, got {}",
            cfg.max_depth
        )));
    }
    if cfg.min_leaf < 1 {
        return Err(Error::Config("gbm min_leaf must be at least 1".into()));
    }
    Ok(())
}

/// Fits an ensemble on a column-major matrix.
pub fn fit_gbm(cols: &[Vec<f64>], targets: &[f64], cfg: &GbmConfig) -> Result<GbmModel> {
    let prep = PreparedCols::new(cols);
    let active: Vec<usize> = (0..cols.len()).collect();
    fit_gbm_prepared(&prep, &active, targets, cfg)
}

/// Fits on pre-sorted columns restricted to `active` feature slots. Tree
/// `feature_index` values are positions within `active`, so callers
/// shrinking the active set (feature elimination) reuse one sort.
pub(crate) fn fit_gbm_prepared(
    prep: &PreparedCols,
    active: &[usize],
    targets: &[f64],
    cfg: &GbmConfig,
) -> Result<GbmModel> {
    check_config(cfg)?;
    let n = targets.len();
    // Fewer than ~5 rows cannot support a meaningful fit (trees degenerate
    // to single leaves), but tiny folds still deserve a mean-only model
    // rather than a refusal; only the truly degenerate cases are errors.
    if n < 2 {
        return Err(Error::invalid(format!(
            "gbm training needs at least 2 rows, got {n}"
        )));
    }
    if prep.n_rows != n {
        return Err(Error::invalid("target length does not match rows".to_string()));
    }
    let k = (cfg.subsample * n as f64).floor() as usize;
    if k == 0 {
        return Err(Error::Config(format!(
            "subsample {} of {n} rows draws nothing",
            cfg.subsample
        )));
    }

    let base_score = targets.iter().sum::<f64>() / n as f64;
    let mut residuals: Vec<f64> = targets.iter().map(|t| t - base_score).collect();
    let mut trees = Vec::with_capacity(cfg.n_estimators);
    let mut scratch = GrowScratch::new(n);
    let master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let full: Vec<u32> = (0..n as u32).collect();

    for round in 0..cfg.n_estimators {
        let sample: Vec<u32> = if k == n {
            full.clone()
        } else {
            let mut rng = master.clone();
            rng.set_stream(round as u64 + 1);
            let mut ids: Vec<u32> = rand::seq::index::sample(&mut rng, n, k)
                .into_iter()
                .map(|i| i as u32)
                .collect();
            ids.sort_unstable();
            ids
        };
        let tree = grow_tree(
            prep,
            active,
            &residuals,
            &sample,
            cfg.max_depth,
            cfg.min_leaf,
            &mut scratch,
        );
        for (r, res) in residuals.iter_mut().enumerate() {
            *res -= cfg.learning_rate * eval_on_cols(&tree, prep, active, r);
        }
        trees.push(tree);
    }
    Ok(GbmModel {
        base_score,
        learning_rate: cfg.learning_rate,
        trees,
    })
}

/// Walks a tree for row `r` of a column-major matrix.
fn eval_on_cols(tree: &RegressionTree, prep: &PreparedCols, active: &[usize], r: usize) -> f64 {
    if tree.nodes.is_empty() {
        return tree.leaves[0].value;
    }
    let mut at: i32 = 0;
    loop {
        let nd = &tree.nodes[at as usize];
        let v = prep.cols[active[nd.feature_index]][r];
        let next = if !v.is_nan() && v < nd.threshold {
            nd.left
        } else {
            nd.right
        };
        if next < 0 {
            return tree.leaves[(-next - 1) as usize].value;
        }
        at = next;
    }
}

/// The complete trained artifact: feature selection, scaling, boosting
/// core, and provenance, as serialized to disk.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BoostedEnsemble {
    pub format_version: u32,
    pub tool_version: String,
    pub catalog_version: String,
    pub config_hash: String,
    pub config: GbmConfig,
    /// Features the model consumes, in order; trees index into this list.
    pub selected_features: Vec<String>,
    /// Scaler restricted to `selected_features`, same order.
    pub scaler: ScalerParams,
    pub base_score: f64,
    pub trees: Vec<RegressionTree>,
}

impl BoostedEnsemble {
    pub fn assemble(
        model: GbmModel,
        selected_features: Vec<String>,
        scaler: ScalerParams,
        cfg: &GbmConfig,
        provenance: &crate::config::Provenance,
    ) -> Result<BoostedEnsemble> {
        if scaler.feature_names != selected_features {
            return Err(Error::internal(
                "scaler features out of step with selected features".to_string(),
            ));
        }
        Ok(BoostedEnsemble {
            format_version: MODEL_FORMAT_VERSION,
            tool_version: provenance.tool_version.clone(),
            catalog_version: provenance.catalog_version.clone(),
            config_hash: provenance.config_hash.clone(),
            config: cfg.clone(),
            selected_features,
            scaler,
            base_score: model.base_score,
            trees: model.trees,
        })
    }

    pub fn core(&self) -> GbmModel {
        GbmModel {
            base_score: self.base_score,
            learning_rate: self.config.learning_rate,
            trees: self.trees.clone(),
        }
    }

    /// Raw and clamped predictions for every table row.
    ///
    /// The table must carry every selected feature (extra columns are
    /// ignored); values are scaled with the stored training parameters.
    pub fn predict_table(&self, table: &FeatureTable) -> Result<Predictions> {
        let positions: Vec<usize> = self
            .selected_features
            .iter()
            .map(|name| {
                table
                    .feature_pos(name)
                    .ok_or_else(|| Error::invalid(format!("features lack column {name:?}")))
            })
            .collect::<Result<_>>()?;
        let mut raw = Vec::with_capacity(table.n_rows());
        let mut clamped = Vec::with_capacity(table.n_rows());
        let mut buf = vec![0.0; positions.len()];
        for row in &table.values {
            for (j, &p) in positions.iter().enumerate() {
                buf[j] = self.scaler.scale_value(j, row[p]);
            }
            let mut acc = 0.0;
            for tree in &self.trees {
                acc += tree.predict_row(&buf);
            }
            let r = self.base_score + self.config.learning_rate * acc;
            raw.push(r);
            clamped.push(r.clamp(CLAMP_RANGE.0, CLAMP_RANGE.1));
        }
        Ok(Predictions { raw, clamped })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::internal(format!("model serialization: {e}")))?;
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<BoostedEnsemble> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: BoostedEnsemble = serde_json::from_str(&text)
            .map_err(|e| Error::malformed(path, e.line(), format!("bad model file: {e}")))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "model format version {} unsupported (this build reads {})",
                model.format_version, MODEL_FORMAT_VERSION
            )));
        }
        model.validate()?;
        Ok(model)
    }

    /// Structural integrity of a (possibly hand-edited) model file.
    pub fn validate(&self) -> Result<()> {
        if self.scaler.feature_names != self.selected_features {
            return Err(Error::invalid(
                "model scaler features disagree with selected features".to_string(),
            ));
        }
        if self.scaler.mean.len() != self.selected_features.len()
            || self.scaler.std.len() != self.selected_features.len()
        {
            return Err(Error::invalid("model scaler arrays misaligned".to_string()));
        }
        if self.scaler.std.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::invalid("model scaler has nonpositive std".to_string()));
        }
        for (i, tree) in self.trees.iter().enumerate() {
            tree.validate(self.selected_features.len(), self.config.max_depth)
                .map_err(|e| Error::invalid(format!("tree {i}: {e}")))?;
        }
        Ok(())
    }
}

/// Raw and clamped model outputs, row-aligned with the input table.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub raw: Vec<f64>,
    pub clamped: Vec<f64>,
}
