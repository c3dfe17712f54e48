//! The fixed feature catalog.
//!
//! Every feature vector this crate produces has exactly these 65 entries,
//! in exactly this order. Models, CSV columns, pruning scans, and
//! tie-breaking all reference this canonical order, so reordering or
//! renaming entries is a breaking change: bump [`CATALOG_VERSION`].

/// Version of the feature catalog, embedded in artifacts so a model and a
/// feature table can be checked for compatibility.
pub const CATALOG_VERSION: &str = "1";

/// Number of features in the catalog.
pub const N_FEATURES: usize = 65;

/// Canonical feature names.
///
/// Layout: five per-tap/per-frame metrics with seven aggregates each
/// (35), three wrist displacement channels with six aggregates each (18),
/// nine whole-signal descriptors, three auxiliary descriptors.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "speed_median",
    "speed_iqr",
    "speed_mean",
    "speed_min",
    "speed_max",
    "speed_std",
    "speed_entropy",
    "acceleration_median",
    "acceleration_iqr",
    "acceleration_mean",
    "acceleration_min",
    "acceleration_max",
    "acceleration_std",
    "acceleration_entropy",
    "period_median",
    "period_iqr",
    "period_mean",
    "period_min",
    "period_max",
    "period_std",
    "period_entropy",
    "frequency_median",
    "frequency_iqr",
    "frequency_mean",
    "frequency_min",
    "frequency_max",
    "frequency_std",
    "frequency_entropy",
    "amplitude_median",
    "amplitude_iqr",
    "amplitude_mean",
    "amplitude_min",
    "amplitude_max",
    "amplitude_std",
    "amplitude_entropy",
    "wrist_dx_median",
    "wrist_dx_iqr",
    "wrist_dx_mean",
    "wrist_dx_min",
    "wrist_dx_max",
    "wrist_dx_std",
    "wrist_dy_median",
    "wrist_dy_iqr",
    "wrist_dy_mean",
    "wrist_dy_min",
    "wrist_dy_max",
    "wrist_dy_std",
    "wrist_dist_median",
    "wrist_dist_iqr",
    "wrist_dist_mean",
    "wrist_dist_min",
    "wrist_dist_max",
    "wrist_dist_std",
    "aperiodicity",
    "n_interruptions",
    "n_freezing",
    "longest_freezing_s",
    "period_linearity_r2",
    "period_linearity_slope",
    "period_fit_complexity",
    "amp_decrement_end_minus_mean",
    "amp_decrement_end_minus_start",
    "amp_decrement_slope",
    "period_variance_norm",
    "total_taps",
];

/// Index of a feature name in canonical order.
pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|&n| n == name)
}
