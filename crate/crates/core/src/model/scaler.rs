//! Feature standardization fitted on training rows only.

use crate::error::{Error, Result};
use crate::features::FeatureTable;

/// Per-feature centering and scaling parameters.
///
/// Only features with a positive, finite spread are kept; the rest are
/// dropped at fit time (a constant column carries no information and
/// would divide by zero). `mean`/`std` are aligned with `feature_names`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScalerParams {
    pub feature_names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ScalerParams {
    /// Restriction to a subset of features, in the order given.
    pub fn subset(&self, names: &[String]) -> Result<ScalerParams> {
        let mut mean = Vec::with_capacity(names.len());
        let mut std = Vec::with_capacity(names.len());
        for name in names {
            let j = self
                .feature_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::invalid(format!("scaler has no feature {name:?}")))?;
            mean.push(self.mean[j]);
            std.push(self.std[j]);
        }
        Ok(ScalerParams {
            feature_names: names.to_vec(),
            mean,
            std,
        })
    }

    /// Scales a single value of feature `j`. NaN stays NaN.
    #[inline]
    pub fn scale_value(&self, j: usize, v: f64) -> f64 {
        (v - self.mean[j]) / self.std[j]
    }
}

/// Fits mean and population standard deviation per feature over the
/// finite entries of each column. Needs at least 2 rows. Columns with
/// fewer than 2 finite entries or zero spread are dropped with a warning.
pub fn fit_scaler(table: &FeatureTable) -> Result<ScalerParams> {
    if table.n_rows() < 2 {
        return Err(Error::invalid(format!(
            "scaler needs at least 2 rows, got {}",
            table.n_rows()
        )));
    }
    let mut feature_names = Vec::new();
    let mut mean = Vec::new();
    let mut std = Vec::new();
    for (j, name) in table.feature_names.iter().enumerate() {
        let finite: Vec<f64> = table
            .values
            .iter()
            .map(|row| row[j])
            .filter(|v| v.is_finite())
            .collect();
        if finite.len() < 2 {
            log::warn!("scaler drops {name}: only {} finite value(s)", finite.len());
            continue;
        }
        let n = finite.len() as f64;
        let m = finite.iter().sum::<f64>() / n;
        let var = finite.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
        let s = var.sqrt();
        if !(s > 0.0) || !s.is_finite() {
            log::warn!("scaler drops {name}: zero variance");
            continue;
        }
        feature_names.push(name.clone());
        mean.push(m);
        std.push(s);
    }
    Ok(ScalerParams {
        feature_names,
        mean,
        std,
    })
}

/// Applies the scaler: the result contains exactly the scaler's features
/// (in scaler order), transformed. Missing columns are an error; NaN
/// entries pass through untouched.
pub fn apply_scaler(params: &ScalerParams, table: &FeatureTable) -> Result<FeatureTable> {
    let positions: Vec<usize> = params
        .feature_names
        .iter()
        .map(|name| {
            table
                .feature_pos(name)
                .ok_or_else(|| Error::invalid(format!("table lacks feature {name:?}")))
        })
        .collect::<Result<_>>()?;
    let values = table
        .values
        .iter()
        .map(|row| {
            positions
                .iter()
                .enumerate()
                .map(|(j, &p)| params.scale_value(j, row[p]))
                .collect()
        })
        .collect();
    Ok(FeatureTable {
        feature_names: params.feature_names.clone(),
        rows: table.rows.clone(),
        values,
        truth: table.truth.clone(),
    })
}
