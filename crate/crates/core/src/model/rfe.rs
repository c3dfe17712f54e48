//! Recursive feature elimination driven by boosting importance.
//!
//! Each round fits a full ensemble on the surviving features, credits
//! every split's squared-error reduction to its feature, and permanently
//! drops the single feature with the lowest total gain (an exact tie
//! drops the one later in canonical order). The surviving set keeps its
//! original order, so elimination paths are nested: the result for
//! `n_top` is always a subset of the result for `n_top + 1`.

use crate::config::GbmConfig;
use crate::error::{Error, Result};
use crate::model::gbm::fit_gbm_prepared;
use crate::model::tree::PreparedCols;

/// Runs the elimination loop and returns the surviving feature names in
/// their original (canonical) order.
pub fn boost_rfe(
    cols: &[Vec<f64>],
    feature_names: &[String],
    targets: &[f64],
    n_top: usize,
    cfg: &GbmConfig,
) -> Result<Vec<String>> {
    if cols.len() != feature_names.len() {
        return Err(Error::invalid(
            "feature name count does not match column count".to_string(),
        ));
    }
    if n_top < 1 {
        return Err(Error::invalid("rfe needs n_top >= 1".to_string()));
    }
    if n_top > feature_names.len() {
        return Err(Error::invalid(format!(
            "rfe asked for {n_top} features but only {} exist",
            feature_names.len()
        )));
    }

    let prep = PreparedCols::new(cols);
    let mut active: Vec<usize> = (0..cols.len()).collect();
    while active.len() > n_top {
        let model = fit_gbm_prepared(&prep, &active, targets, cfg)?;
        let mut importance = vec![0.0f64; active.len()];
        for tree in &model.trees {
            for node in &tree.nodes {
                importance[node.feature_index] += node.gain;
            }
        }
        // Lowest importance loses; `<=` walks ties toward the later
        // (higher canonical index) feature.
        let mut drop_pos = 0;
        for (pos, &imp) in importance.iter().enumerate().skip(1) {
            if imp <= importance[drop_pos] {
                drop_pos = pos;
            }
        }
        active.remove(drop_pos);
    }
    Ok(active.iter().map(|&j| feature_names[j].clone()).collect())
}
