//! Depth-limited regression trees grown by greedy variance reduction.
//!
//! Growth is level-order: every node of the current level is split (when
//! a split helps) before the next level starts. Split candidates are
//! midpoints between consecutive distinct sorted values of each feature;
//! the best candidate maximizes the sum-of-squared-error reduction, with
//! exact ties resolved toward the lowest feature index, then the lowest
//! threshold. Rows with a NaN feature value always route to the right
//! child, both during training and prediction, so "missing" is handled
//! identically everywhere.
//!
//! The grower is written for a tight single-core budget: feature columns
//! are pre-sorted once per training set and reused across all trees and
//! subsamples, per-level node membership lives in a flat `u16` array, and
//! gains use a reciprocal table instead of dividing in the inner loop.

use crate::error::{Error, Result};

/// Sentinel in the row-to-node map for rows outside the current tree.
const NO_NODE: u16 = u16::MAX;

/// Relative floor below which a split gain counts as zero (guards float
/// noise when all residuals in a node are equal).
const GAIN_REL_EPS: f64 = 1e-12;

/// An internal split. `left`/`right` reference `nodes` when nonnegative
/// and `leaves[-x - 1]` when negative.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SplitNode {
    pub feature_index: usize,
    pub threshold: f64,
    /// Sum-of-squared-error reduction this split achieved at fit time.
    pub gain: f64,
    /// Training rows that reached this node.
    pub n_rows: u32,
    pub left: i32,
    pub right: i32,
}

/// A terminal node holding the mean residual of its training rows.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Leaf {
    pub value: f64,
    pub n_rows: u32,
}

/// One fitted tree. An empty `nodes` array means the tree is the single
/// leaf `leaves[0]`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<SplitNode>,
    pub leaves: Vec<Leaf>,
}

impl RegressionTree {
    /// Evaluates the tree on a row laid out in the tree's own feature
    /// space (same order the tree was fitted with).
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        if self.nodes.is_empty() {
            return self.leaves[0].value;
        }
        let mut at: i32 = 0;
        loop {
            let nd = &self.nodes[at as usize];
            let v = row[nd.feature_index];
            let next = if !v.is_nan() && v < nd.threshold {
                nd.left
            } else {
                nd.right
            };
            if next < 0 {
                return self.leaves[(-next - 1) as usize].value;
            }
            at = next;
        }
    }

    /// Structural checks for trees loaded from disk: references in range,
    /// children strictly after parents (level order), every node and leaf
    /// reachable exactly once, depth within bound.
    pub fn validate(&self, n_features: usize, max_depth: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(format!("malformed tree: {msg}")));
        if self.nodes.is_empty() {
            return if self.leaves.len() == 1 {
                Ok(())
            } else {
                bad(format!("no nodes but {} leaves", self.leaves.len()))
            };
        }
        let mut node_seen = vec![false; self.nodes.len()];
        let mut leaf_seen = vec![false; self.leaves.len()];
        // (node index, depth) stack rooted at 0.
        let mut stack = vec![(0usize, 0usize)];
        node_seen[0] = true;
        while let Some((i, depth)) = stack.pop() {
            let nd = &self.nodes[i];
            if nd.feature_index >= n_features {
                return bad(format!("node {i} feature {} out of range", nd.feature_index));
            }
            if depth >= max_depth {
                return bad(format!("node {i} exceeds max depth {max_depth}"));
            }
            for child in [nd.left, nd.right] {
                if child >= 0 {
                    let c = child as usize;
                    if c >= self.nodes.len() {
                        return bad(format!("node {i} references missing node {c}"));
                    }
                    if c <= i {
                        return bad(format!("node {i} references earlier node {c}"));
                    }
                    if std::mem::replace(&mut node_seen[c], true) {
                        return bad(format!("node {c} reached twice"));
                    }
                    stack.push((c, depth + 1));
                } else {
                    let l = (-child - 1) as usize;
                    if l >= self.leaves.len() {
                        return bad(format!("node {i} references missing leaf {l}"));
                    }
                    if std::mem::replace(&mut leaf_seen[l], true) {
                        return bad(format!("leaf {l} reached twice"));
                    }
                }
            }
        }
        if node_seen.iter().any(|s| !s) || leaf_seen.iter().any(|s| !s) {
            return bad("unreachable nodes or leaves".into());
        }
        Ok(())
    }

    /// Maximum depth actually present (0 for a single leaf).
    pub fn depth(&self) -> usize {
        if self.nodes.is_empty() {
            return 0;
        }
        let mut best = 0;
        let mut stack = vec![(0i32, 1usize)];
        while let Some((i, d)) = stack.pop() {
            let nd = &self.nodes[i as usize];
            for child in [nd.left, nd.right] {
                if child >= 0 {
                    stack.push((child, d + 1));
                } else {
                    best = best.max(d);
                }
            }
        }
        best
    }
}

/// Columns pre-sorted for the grower; built once per training matrix and
/// shared by every tree and every subsample drawn from it.
pub(crate) struct PreparedCols<'a> {
    pub cols: &'a [Vec<f64>],
    /// Per feature: row indices of finite values, ascending by value then
    /// by row index.
    pub sorted: Vec<Vec<u32>>,
    pub n_rows: usize,
}

impl<'a> PreparedCols<'a> {
    pub fn new(cols: &'a [Vec<f64>]) -> Self {
        let n_rows = cols.first().map_or(0, |c| c.len());
        let sorted = cols
            .iter()
            .map(|col| {
                debug_assert_eq!(col.len(), n_rows);
                let mut idx: Vec<u32> = (0..n_rows as u32)
                    .filter(|&r| col[r as usize].is_finite())
                    .collect();
                idx.sort_unstable_by(|&a, &b| {
                    col[a as usize]
                        .partial_cmp(&col[b as usize])
                        .expect("finite values compare")
                        .then(a.cmp(&b))
                });
                idx
            })
            .collect();
        PreparedCols {
            cols,
            sorted,
            n_rows,
        }
    }
}

/// Reusable buffers so fitting hundreds of trees allocates nothing.
pub(crate) struct GrowScratch {
    node_of_row: Vec<u16>,
    /// Per-slot accumulators for the level scan.
    cnt: Vec<u32>,
    sum: Vec<f64>,
    last: Vec<f64>,
    /// Reciprocal table: recip[i] == 1.0 / i.
    recip: Vec<f64>,
}

impl GrowScratch {
    pub fn new(n_rows: usize) -> Self {
        let mut recip = Vec::with_capacity(n_rows + 1);
        recip.push(f64::INFINITY); // recip[0] is never used
        for i in 1..=n_rows {
            recip.push(1.0 / i as f64);
        }
        GrowScratch {
            node_of_row: vec![NO_NODE; n_rows],
            cnt: Vec::new(),
            sum: Vec::new(),
            last: Vec::new(),
            recip,
        }
    }
}

/// One node of the level currently being grown.
struct Pend {
    n: u32,
    sum: f64,
    /// Where to patch our final reference: (node index, is_left_child).
    parent: Option<(usize, bool)>,
}

struct BestSplit {
    gain: f64,
    feature_pos: usize,
    threshold: f64,
    left_n: u32,
    left_sum: f64,
}

/// Grows one tree on the sampled rows.
///
/// `active` lists the feature slots (into `prep.cols`) the tree may use;
/// the fitted tree's `feature_index` values are positions within
/// `active`. `sample` holds the training row ids for this tree.
pub(crate) fn grow_tree(
    prep: &PreparedCols,
    active: &[usize],
    residuals: &[f64],
    sample: &[u32],
    max_depth: usize,
    min_leaf: usize,
    scratch: &mut GrowScratch,
) -> RegressionTree {
    debug_assert!(max_depth >= 1 && max_depth <= 15);
    let mut tree = RegressionTree {
        nodes: Vec::new(),
        leaves: Vec::new(),
    };

    let mut root_sum = 0.0;
    for &r in sample {
        scratch.node_of_row[r as usize] = 0;
        root_sum += residuals[r as usize];
    }
    let mut level: Vec<Pend> = vec![Pend {
        n: sample.len() as u32,
        sum: root_sum,
        parent: None,
    }];

    for _depth in 0..max_depth {
        let width = level.len();
        scratch.cnt.resize(width, 0);
        scratch.sum.resize(width, 0.0);
        scratch.last.resize(width, 0.0);

        let mut best: Vec<Option<BestSplit>> = (0..width).map(|_| None).collect();
        let parent_term: Vec<f64> = level
            .iter()
            .map(|p| p.sum * p.sum * scratch.recip[p.n as usize])
            .collect();
        let gain_floor: Vec<f64> = parent_term
            .iter()
            .map(|t| GAIN_REL_EPS * t.abs().max(1.0))
            .collect();

        for (pos, &f) in active.iter().enumerate() {
            scratch.cnt[..width].fill(0);
            scratch.sum[..width].fill(0.0);
            let col = &prep.cols[f];
            for &r in &prep.sorted[f] {
                let slot = scratch.node_of_row[r as usize];
                if slot == NO_NODE {
                    continue;
                }
                let s = slot as usize;
                let v = col[r as usize];
                let cnt = scratch.cnt[s];
                if cnt > 0 && v > scratch.last[s] {
                    let n_left = cnt;
                    let n_right = level[s].n - n_left;
                    if n_left as usize >= min_leaf && n_right as usize >= min_leaf {
                        let sum_left = scratch.sum[s];
                        let sum_right = level[s].sum - sum_left;
                        let gain = sum_left * sum_left * scratch.recip[n_left as usize]
                            + sum_right * sum_right * scratch.recip[n_right as usize]
                            - parent_term[s];
                        let beats = match &best[s] {
                            Some(b) => gain > b.gain,
                            None => gain > gain_floor[s],
                        };
                        if beats {
                            let a = scratch.last[s];
                            let mut threshold = (a + v) * 0.5;
                            // Midpoints of adjacent floats can round down
                            // onto the left value; nudge so `x < t` still
                            // separates the sides.
                            if !(threshold > a) {
                                threshold = v;
                            }
                            best[s] = Some(BestSplit {
                                gain,
                                feature_pos: pos,
                                threshold,
                                left_n: n_left,
                                left_sum: sum_left,
                            });
                        }
                    }
                }
                scratch.cnt[s] = cnt + 1;
                scratch.sum[s] += residuals[r as usize];
                scratch.last[s] = v;
            }
        }

        // Realize this level: splits become nodes, the rest become leaves.
        let mut next: Vec<Pend> = Vec::new();
        // Per slot: Some((node index, left slot, right slot)).
        let mut routing: Vec<Option<(usize, u16, u16)>> = Vec::with_capacity(width);
        for (s, pend) in level.iter().enumerate() {
            match &best[s] {
                Some(b) => {
                    let node_idx = tree.nodes.len();
                    tree.nodes.push(SplitNode {
                        feature_index: b.feature_pos,
                        threshold: b.threshold,
                        gain: b.gain,
                        n_rows: pend.n,
                        left: 0,
                        right: 0,
                    });
                    patch_parent(&mut tree, pend.parent, node_idx as i32);
                    let left_slot = next.len() as u16;
                    next.push(Pend {
                        n: b.left_n,
                        sum: b.left_sum,
                        parent: Some((node_idx, true)),
                    });
                    let right_slot = next.len() as u16;
                    next.push(Pend {
                        n: pend.n - b.left_n,
                        sum: pend.sum - b.left_sum,
                        parent: Some((node_idx, false)),
                    });
                    routing.push(Some((node_idx, left_slot, right_slot)));
                }
                None => {
                    finish_leaf(&mut tree, pend);
                    routing.push(None);
                }
            }
        }

        if next.is_empty() {
            // No node split; every row is already in a leaf.
            for &r in sample {
                scratch.node_of_row[r as usize] = NO_NODE;
            }
            return tree;
        }

        // Route rows into the next level.
        for &r in sample {
            let slot = scratch.node_of_row[r as usize];
            if slot == NO_NODE {
                continue;
            }
            scratch.node_of_row[r as usize] = match routing[slot as usize] {
                Some((node_idx, left_slot, right_slot)) => {
                    let nd = &tree.nodes[node_idx];
                    let v = prep.cols[active[nd.feature_index]][r as usize];
                    if !v.is_nan() && v < nd.threshold {
                        left_slot
                    } else {
                        right_slot
                    }
                }
                None => NO_NODE,
            };
        }
        level = next;
    }

    // Depth budget exhausted: everything still pending becomes a leaf.
    for pend in &level {
        finish_leaf(&mut tree, pend);
    }
    for &r in sample {
        scratch.node_of_row[r as usize] = NO_NODE;
    }
    tree
}

fn finish_leaf(tree: &mut RegressionTree, pend: &Pend) {
    let leaf_idx = tree.leaves.len();
    tree.leaves.push(Leaf {
        value: pend.sum / pend.n as f64,
        n_rows: pend.n,
    });
    patch_parent(tree, pend.parent, -(leaf_idx as i32) - 1);
}

fn patch_parent(tree: &mut RegressionTree, parent: Option<(usize, bool)>, reference: i32) {
    if let Some((idx, is_left)) = parent {
        if is_left {
            tree.nodes[idx].left = reference;
        } else {
            tree.nodes[idx].right = reference;
        }
    }
}

/// Fits one tree on all rows of a column-major matrix. Requires at least
/// `2 * min_leaf` rows (fewer can never split and indicates a caller bug;
/// degenerate *data* still yields a single leaf without error).
pub fn fit_tree(
    cols: &[Vec<f64>],
    residuals: &[f64],
    max_depth: usize,
    min_leaf: usize,
) -> Result<RegressionTree> {
    let n = residuals.len();
    if n < 2 * min_leaf {
        return Err(Error::invalid(format!(
            "tree fitting needs at least {} rows, got {n}",
            2 * min_leaf
        )));
    }
    for col in cols {
        if col.len() != n {
            return Err(Error::invalid("feature column length mismatch".to_string()));
        }
    }
    let prep = PreparedCols::new(cols);
    let mut scratch = GrowScratch::new(n);
    let active: Vec<usize> = (0..cols.len()).collect();
    let sample: Vec<u32> = (0..n as u32).collect();
    Ok(grow_tree(
        &prep,
        &active,
        residuals,
        &sample,
        max_depth,
        min_leaf,
        &mut scratch,
    ))
}
