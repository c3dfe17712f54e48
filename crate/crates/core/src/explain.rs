//! Per-prediction Shapley attributions for the tree ensemble.
//!
//! The game being valued: features "present" in a coalition steer each
//! tree down their actual branch, absent features spread over both
//! children in proportion to the training rows each child saw (the
//! counts stored in the tree at fit time). `tree_shap` computes exact
//! Shapley values of that game in polynomial time per tree;
//! `brute_force_shapley` recomputes them by enumerating all feature
//! subsets and exists to cross-examine the fast path.
//!
//! Attributions decompose the raw (unclamped) score, so the local
//! accuracy identity is exact; the clamp would break additivity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::model::gbm::BoostedEnsemble;
use crate::model::tree::RegressionTree;

/// One row's decomposition: `base + contributions.sum()` equals the raw
/// ensemble output within numerical noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    /// Training-weighted expected ensemble output.
    pub base: f64,
    /// Per-feature Shapley value, aligned with the model's selected
    /// feature order.
    pub contributions: Vec<f64>,
}

impl Attribution {
    pub fn total(&self) -> f64 {
        self.base + self.contributions.iter().sum::<f64>()
    }
}

/// Shapley attributions for one row already scaled into the model's
/// feature space.
pub fn tree_shap(ensemble: &BoostedEnsemble, scaled_row: &[f64]) -> Attribution {
    let m = ensemble.selected_features.len();
    debug_assert_eq!(scaled_row.len(), m);
    let mut phi = vec![0.0; m];
    let mut expected = 0.0;
    for tree in &ensemble.trees {
        expected += expected_value(tree);
        shap_one_tree(tree, scaled_row, &mut phi);
    }
    let lr = ensemble.config.learning_rate;
    for p in &mut phi {
        *p *= lr;
    }
    Attribution {
        base: ensemble.base_score + lr * expected,
        contributions: phi,
    }
}

/// Attributions for every table row; columns are located by name and
/// scaled exactly as prediction does.
pub fn explain_table(
    ensemble: &BoostedEnsemble,
    table: &FeatureTable,
) -> Result<Vec<Attribution>> {
    let positions: Vec<usize> = ensemble
        .selected_features
        .iter()
        .map(|name| {
            table
                .feature_pos(name)
                .ok_or_else(|| Error::invalid(format!("features lack column {name:?}")))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(table.n_rows());
    let mut buf = vec![0.0; positions.len()];
    for row in &table.values {
        for (j, &p) in positions.iter().enumerate() {
            buf[j] = ensemble.scaler.scale_value(j, row[p]);
        }
        out.push(tree_shap(ensemble, &buf));
    }
    Ok(out)
}

/// Training-weighted mean output of one tree.
fn expected_value(tree: &RegressionTree) -> f64 {
    let root_n = if tree.nodes.is_empty() {
        f64::from(tree.leaves[0].n_rows)
    } else {
        f64::from(tree.nodes[0].n_rows)
    };
    let total: f64 = tree
        .leaves
        .iter()
        .map(|l| l.value * f64::from(l.n_rows))
        .sum();
    total / root_n
}

/// One step of the decision path bookkeeping: the fraction of coalition
/// orderings flowing through when this feature is absent (`zero_frac`)
/// or present (`one_frac`), and the accumulated permutation weight.
#[derive(Clone, Copy)]
struct PathElem {
    feature: usize,
    zero_frac: f64,
    one_frac: f64,
    weight: f64,
}

fn extend(path: &mut Vec<PathElem>, zero_frac: f64, one_frac: f64, feature: usize) {
    let l = path.len();
    path.push(PathElem {
        feature,
        zero_frac,
        one_frac,
        weight: if l == 0 { 1.0 } else { 0.0 },
    });
    let denom = (l + 1) as f64;
    for i in (0..l).rev() {
        path[i + 1].weight += one_frac * path[i].weight * (i + 1) as f64 / denom;
        path[i].weight = zero_frac * path[i].weight * (l - i) as f64 / denom;
    }
}

fn unwind(path: &mut Vec<PathElem>, i: usize) {
    let l = path.len() - 1;
    let one = path[i].one_frac;
    let zero = path[i].zero_frac;
    let mut carried = path[l].weight;
    for j in (0..l).rev() {
        if one != 0.0 {
            let kept = path[j].weight;
            path[j].weight = carried * (l + 1) as f64 / ((j + 1) as f64 * one);
            carried = kept - path[j].weight * zero * (l - j) as f64 / (l + 1) as f64;
        } else {
            path[j].weight = path[j].weight * (l + 1) as f64 / (zero * (l - j) as f64);
        }
    }
    for j in i..l {
        path[j].feature = path[j + 1].feature;
        path[j].zero_frac = path[j + 1].zero_frac;
        path[j].one_frac = path[j + 1].one_frac;
    }
    path.pop();
}

/// Total permutation weight the path would have if element `i` were
/// removed; used at leaves without mutating the path.
fn unwound_sum(path: &[PathElem], i: usize) -> f64 {
    let l = path.len() - 1;
    let one = path[i].one_frac;
    let zero = path[i].zero_frac;
    let mut total = 0.0;
    if one != 0.0 {
        let mut carried = path[l].weight;
        for j in (0..l).rev() {
            let w = carried * (l + 1) as f64 / ((j + 1) as f64 * one);
            total += w;
            carried = path[j].weight - w * zero * (l - j) as f64 / (l + 1) as f64;
        }
    } else {
        for j in (0..l).rev() {
            total += path[j].weight * (l + 1) as f64 / (zero * (l - j) as f64);
        }
    }
    total
}

fn cover(tree: &RegressionTree, node_ref: i32) -> f64 {
    if node_ref >= 0 {
        f64::from(tree.nodes[node_ref as usize].n_rows)
    } else {
        f64::from(tree.leaves[(-node_ref - 1) as usize].n_rows)
    }
}

/// Adds one tree's (unscaled) Shapley values into `phi`.
fn shap_one_tree(tree: &RegressionTree, row: &[f64], phi: &mut [f64]) {
    let root = if tree.nodes.is_empty() { -1 } else { 0 };
    descend(tree, row, phi, root, Vec::new(), 1.0, 1.0, usize::MAX);
}

#[allow(clippy::too_many_arguments)]
fn descend(
    tree: &RegressionTree,
    row: &[f64],
    phi: &mut [f64],
    node_ref: i32,
    mut path: Vec<PathElem>,
    zero_frac: f64,
    one_frac: f64,
    came_by: usize,
) {
    extend(&mut path, zero_frac, one_frac, came_by);
    if node_ref < 0 {
        let value = tree.leaves[(-node_ref - 1) as usize].value;
        for i in 1..path.len() {
            let w = unwound_sum(&path, i);
            phi[path[i].feature] += w * (path[i].one_frac - path[i].zero_frac) * value;
        }
        return;
    }
    let nd = &tree.nodes[node_ref as usize];
    let v = row[nd.feature_index];
    let goes_left = !v.is_nan() && v < nd.threshold;
    let (hot, cold) = if goes_left {
        (nd.left, nd.right)
    } else {
        (nd.right, nd.left)
    };
    let n_here = f64::from(nd.n_rows);
    let hot_frac = cover(tree, hot) / n_here;
    let cold_frac = cover(tree, cold) / n_here;
    // A feature that already split higher up folds its old fractions
    // into the new ones instead of occupying two path slots.
    let (mut iz, mut io) = (1.0, 1.0);
    if let Some(prev) = path
        .iter()
        .skip(1)
        .position(|e| e.feature == nd.feature_index)
    {
        let at = prev + 1;
        iz = path[at].zero_frac;
        io = path[at].one_frac;
        unwind(&mut path, at);
    }
    descend(
        tree,
        row,
        phi,
        hot,
        path.clone(),
        iz * hot_frac,
        io,
        nd.feature_index,
    );
    descend(tree, row, phi, cold, path, iz * cold_frac, 0.0, nd.feature_index);
}

/// Exact Shapley values by subset enumeration, sharing `tree_shap`'s
/// conditional-expectation convention. Exponential in the feature count,
/// so it refuses more than 15 features.
pub fn brute_force_shapley(
    ensemble: &BoostedEnsemble,
    scaled_row: &[f64],
) -> Result<Attribution> {
    let m = ensemble.selected_features.len();
    if m > 15 {
        return Err(Error::invalid(format!(
            "subset enumeration over {m} features is infeasible (limit 15)"
        )));
    }
    debug_assert_eq!(scaled_row.len(), m);

    // Raw tree-sum expectation for every coalition mask.
    let mut ev = vec![0.0f64; 1usize << m];
    for (mask, slot) in ev.iter_mut().enumerate() {
        let mut acc = 0.0;
        for tree in &ensemble.trees {
            let root = if tree.nodes.is_empty() { -1 } else { 0 };
            acc += coalition_value(tree, scaled_row, mask, root);
        }
        *slot = acc;
    }

    let mut fact = [1.0f64; 16];
    for i in 1..16 {
        fact[i] = fact[i - 1] * i as f64;
    }
    let lr = ensemble.config.learning_rate;
    let mut phi = vec![0.0; m];
    for i in 0..m {
        let bit = 1usize << i;
        let mut acc = 0.0;
        for mask in 0..(1usize << m) {
            if mask & bit != 0 {
                continue;
            }
            let s = mask.count_ones() as usize;
            let weight = fact[s] * fact[m - s - 1] / fact[m];
            acc += weight * (ev[mask | bit] - ev[mask]);
        }
        phi[i] = lr * acc;
    }
    Ok(Attribution {
        base: ensemble.base_score + lr * ev[0],
        contributions: phi,
    })
}

/// Expected tree output when only the features in `mask` are pinned to
/// the row's values; the rest follow training branch proportions.
fn coalition_value(tree: &RegressionTree, row: &[f64], mask: usize, node_ref: i32) -> f64 {
    if node_ref < 0 {
        return tree.leaves[(-node_ref - 1) as usize].value;
    }
    let nd = &tree.nodes[node_ref as usize];
    if mask & (1usize << nd.feature_index) != 0 {
        let v = row[nd.feature_index];
        let next = if !v.is_nan() && v < nd.threshold {
            nd.left
        } else {
            nd.right
        };
        coalition_value(tree, row, mask, next)
    } else {
        let n_here = f64::from(nd.n_rows);
        (cover(tree, nd.left) * coalition_value(tree, row, mask, nd.left)
            + cover(tree, nd.right) * coalition_value(tree, row, mask, nd.right))
            / n_here
    }
}

/// One feature's standing in the global ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub feature: String,
    pub mean_abs_contribution: f64,
}

/// Mean absolute contribution per feature, descending; exact ties fall
/// back to name order.
pub fn global_importance(
    attributions: &[Attribution],
    feature_names: &[String],
) -> Result<Vec<ImportanceRow>> {
    if attributions.is_empty() {
        return Err(Error::invalid("no attributions to rank".to_string()));
    }
    let m = feature_names.len();
    if attributions.iter().any(|a| a.contributions.len() != m) {
        return Err(Error::invalid(
            "attribution width does not match feature list".to_string(),
        ));
    }
    let mut rows: Vec<ImportanceRow> = (0..m)
        .map(|j| {
            let mean = attributions
                .iter()
                .map(|a| a.contributions[j].abs())
                .sum::<f64>()
                / attributions.len() as f64;
            ImportanceRow {
                feature: feature_names[j].clone(),
                mean_abs_contribution: mean,
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        b.mean_abs_contribution
            .partial_cmp(&a.mean_abs_contribution)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.feature.cmp(&b.feature))
    });
    Ok(rows)
}
