//! Minority-class oversampling by interpolation between class neighbours.
//!
//! Every class is topped up to the size of the largest one. A synthetic
//! row is built by picking one of the source row's k nearest same-class
//! neighbours and interpolating: `x + u * (nb - x)` with `u` uniform in
//! [0, 1). Distances are Euclidean over the dimensions where both rows
//! are finite, so missing values neither attract nor repel.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Returns `(rows, labels)` with the originals first (in input order)
/// and synthetic rows appended, minority classes in ascending label
/// order. Classes already at the majority count gain nothing.
pub fn smote_oversample(
    rows: &[Vec<f64>],
    labels: &[u8],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Vec<f64>>, Vec<u8>)> {
    if rows.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} rows but {} labels",
            rows.len(),
            labels.len()
        )));
    }
    if rows.is_empty() {
        return Err(Error::invalid("cannot oversample an empty table".to_string()));
    }
    if k < 1 {
        return Err(Error::invalid("oversampling needs k >= 1".to_string()));
    }
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::invalid("ragged rows".to_string()));
    }

    let mut classes: Vec<u8> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();

    let mut out_rows = rows.to_vec();
    let mut out_labels = labels.to_vec();
    let majority = classes
        .iter()
        .map(|c| labels.iter().filter(|&&l| l == *c).count())
        .max()
        .unwrap_or(0);

    for &class in &classes {
        let members: Vec<usize> = (0..rows.len()).filter(|&i| labels[i] == class).collect();
        let deficit = majority - members.len();
        if deficit == 0 {
            continue;
        }
        if members.len() < 2 {
            return Err(Error::invalid(format!(
                "class {class} has {} row(s); need at least 2 to interpolate",
                members.len()
            )));
        }
        let k_eff = k.min(members.len() - 1);
        // Neighbour lists are computed once per member, lazily.
        let mut neighbours: Vec<Option<Vec<usize>>> = vec![None; members.len()];
        for s in 0..deficit {
            let src = s % members.len();
            let nbs = neighbours[src].get_or_insert_with(|| {
                nearest_same_class(rows, &members, src, k_eff)
            });
            let pick = nbs[rng.gen_range(0..nbs.len())];
            let u: f64 = rng.gen_range(0.0..1.0);
            let a = &rows[members[src]];
            let b = &rows[pick];
            let synthetic: Vec<f64> = a
                .iter()
                .zip(b.iter())
                .map(|(&x, &y)| x + u * (y - x))
                .collect();
            out_rows.push(synthetic);
            out_labels.push(class);
        }
    }
    Ok((out_rows, out_labels))
}

/// Indices (into `rows`) of the `k_eff` same-class rows closest to
/// `members[src]`, excluding itself. Ties keep input order.
fn nearest_same_class(
    rows: &[Vec<f64>],
    members: &[usize],
    src: usize,
    k_eff: usize,
) -> Vec<usize> {
    let origin = &rows[members[src]];
    let mut scored: Vec<(f64, usize)> = members
        .iter()
        .enumerate()
        .filter(|&(pos, _)| pos != src)
        .map(|(_, &ri)| (mutual_finite_distance(origin, &rows[ri]), ri))
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    scored.truncate(k_eff);
    scored.into_iter().map(|(_, ri)| ri).collect()
}

fn mutual_finite_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&x, &y) in a.iter().zip(b.iter()) {
        if x.is_finite() && y.is_finite() {
            let d = x - y;
            acc += d * d;
        }
    }
    acc.sqrt()
}
