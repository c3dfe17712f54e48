//! Pipeline configuration.
//!
//! One flat `key=value` file drives every command. Unknown keys are
//! rejected so a typo cannot silently fall back to a default. The defaults
//! are the published best settings for this task; override only what an
//! experiment needs.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Signal-processing tunables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalConfig {
    /// Detection-score gate; hands at or below this score are ignored.
    pub score_gate: f64,
    /// Minimum spacing between accepted peaks, in seconds.
    pub min_period_s: f64,
    /// Required trough depth between peaks, as a fraction of the P90-P10
    /// value spread of the signal.
    pub min_drop_frac: f64,
    /// Speeds below this (deg/s) count as a pause.
    pub speed_floor_deg_s: f64,
    /// Pauses at least this long (s) count as interruptions.
    pub interruption_min_s: f64,
    /// Pauses strictly longer than this (s) count as freezing.
    pub freezing_min_s: f64,
    /// Histogram bins for the entropy aggregate.
    pub entropy_bins: usize,
}

impl Default for SignalConfig {
    fn default() -> Self {
        SignalConfig {
            score_gate: 0.9,
            min_period_s: 0.133,
            min_drop_frac: 0.25,
            speed_floor_deg_s: 50.0,
            interruption_min_s: 0.010,
            freezing_min_s: 0.020,
            entropy_bins: 16,
        }
    }
}

/// Gradient-boosting hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmConfig {
    pub learning_rate: f64,
    pub max_depth: usize,
    pub n_estimators: usize,
    /// Fraction of training rows drawn (without replacement) per round.
    pub subsample: f64,
    /// Minimum rows in each child of a split.
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for GbmConfig {
    fn default() -> Self {
        GbmConfig {
            learning_rate: 0.01313,
            max_depth: 3,
            n_estimators: 611,
            subsample: 0.8,
            min_leaf: 5,
            seed: 42,
        }
    }
}

/// Recursive feature elimination settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeConfig {
    pub enabled: bool,
    /// Number of features to keep.
    pub n_top: usize,
}

impl Default for RfeConfig {
    fn default() -> Self {
        RfeConfig {
            enabled: true,
            n_top: 22,
        }
    }
}

/// Minority-class oversampling settings. Off by default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoteConfig {
    pub enabled: bool,
    /// Neighbors considered when synthesizing a sample.
    pub k: usize,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        SmoteConfig {
            enabled: false,
            k: 5,
        }
    }
}

/// Correlation-based feature pruning settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneConfig {
    pub enabled: bool,
    /// Absolute Pearson correlation above which the later feature is dropped.
    pub threshold: f64,
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig {
            enabled: true,
            threshold: 0.85,
        }
    }
}

/// Cross-validation extras. The audit switches add verification payloads to
/// the report without changing predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    /// Record the exact row ids each fold trained on.
    pub audit_rows: bool,
    /// Check SHAP local accuracy for every held-out prediction.
    pub shap_check: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            audit_rows: false,
            shap_check: false,
        }
    }
}

/// Complete pipeline configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunConfig {
    pub signal: SignalConfig,
    pub prune: PruneConfig,
    pub gbm: GbmConfig,
    pub rfe: RfeConfig,
    pub smote: SmoteConfig,
    pub cv: CvConfig,
    pub stats: StatsConfig,
}

/// Significance settings for correlation reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsConfig {
    pub alpha: f64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig { alpha: 0.01 }
    }
}

macro_rules! config_keys {
    ($($key:literal => $field:expr, $parse:ty;)*) => {
        /// Every key accepted in a configuration file, in canonical order.
        pub const KEYS: [&str; 24] = [$($key),*];
    };
}

config_keys! {
    "signal.score_gate" => 0, f64;
    "signal.min_period_s" => 0, f64;
    "signal.min_drop_frac" => 0, f64;
    "signal.speed_floor_deg_s" => 0, f64;
    "signal.interruption_min_s" => 0, f64;
    "signal.freezing_min_s" => 0, f64;
    "signal.entropy_bins" => 0, usize;
    "prune.enabled" => 0, bool;
    "prune.threshold" => 0, f64;
    "gbm.learning_rate" => 0, f64;
    "gbm.max_depth" => 0, usize;
    "gbm.n_estimators" => 0, usize;
    "gbm.subsample" => 0, f64;
    "gbm.min_leaf" => 0, usize;
    "gbm.seed" => 0, u64;
    "rfe.enabled" => 0, bool;
    "rfe.n_top" => 0, usize;
    "smote.enabled" => 0, bool;
    "smote.k" => 0, usize;
    "cv.audit_rows" => 0, bool;
    "cv.shap_check" => 0, bool;
    "stats.alpha" => 0, f64;
    "clamp.low" => 0, f64;
    "clamp.high" => 0, f64;
}

/// Prediction clamp range. Severity is defined on this scale; the bounds are
/// not configurable and appear in [`KEYS`] only so that a file stating them
/// explicitly is accepted when it restates the fixed values.
pub const CLAMP_RANGE: (f64, f64) = (0.0, 4.0);

impl RunConfig {
    /// Reads a `key=value` file. Blank lines and `#` comments are skipped.
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_key_values(&text)
    }

    /// Parses configuration text. Every key must be listed in [`KEYS`].
    pub fn from_key_values(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse()
                .map_err(|_| format!("{key}: cannot parse {v:?}"))
        }
        match key {
            "signal.score_gate" => self.signal.score_gate = num(key, value)?,
            "signal.min_period_s" => self.signal.min_period_s = num(key, value)?,
            "signal.min_drop_frac" => self.signal.min_drop_frac = num(key, value)?,
            "signal.speed_floor_deg_s" => self.signal.speed_floor_deg_s = num(key, value)?,
            "signal.interruption_min_s" => self.signal.interruption_min_s = num(key, value)?,
            "signal.freezing_min_s" => self.signal.freezing_min_s = num(key, value)?,
            "signal.entropy_bins" => self.signal.entropy_bins = num(key, value)?,
            "prune.enabled" => self.prune.enabled = num(key, value)?,
            "prune.threshold" => self.prune.threshold = num(key, value)?,
            "gbm.learning_rate" => self.gbm.learning_rate = num(key, value)?,
            "gbm.max_depth" => self.gbm.max_depth = num(key, value)?,
            "gbm.n_estimators" => self.gbm.n_estimators = num(key, value)?,
            "gbm.subsample" => self.gbm.subsample = num(key, value)?,
            "gbm.min_leaf" => self.gbm.min_leaf = num(key, value)?,
            "gbm.seed" => self.gbm.seed = num(key, value)?,
            "rfe.enabled" => self.rfe.enabled = num(key, value)?,
            "rfe.n_top" => self.rfe.n_top = num(key, value)?,
            "smote.enabled" => self.smote.enabled = num(key, value)?,
            "smote.k" => self.smote.k = num(key, value)?,
            "cv.audit_rows" => self.cv.audit_rows = num(key, value)?,
            "cv.shap_check" => self.cv.shap_check = num(key, value)?,
            "stats.alpha" => self.stats.alpha = num(key, value)?,
            "clamp.low" | "clamp.high" => {
                let v: f64 = num(key, value)?;
                let expect = if key == "clamp.low" {
                    CLAMP_RANGE.0
                } else {
                    CLAMP_RANGE.1
                };
                if v != expect {
                    return Err(format!("{key} is fixed at {expect}"));
                }
            }
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        let e = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.signal.score_gate) {
            return e(format!("signal.score_gate out of [0,1]: {}", self.signal.score_gate));
        }
        if self.signal.min_period_s <= 0.0 {
            return e("signal.min_period_s must be positive".into());
        }
        if !(0.0..1.0).contains(&self.signal.min_drop_frac) {
            return e("signal.min_drop_frac out of [0,1)".into());
        }
        if self.signal.speed_floor_deg_s <= 0.0 {
            return e("signal.speed_floor_deg_s must be positive".into());
        }
        if self.signal.interruption_min_s < 0.0 || self.signal.freezing_min_s < 0.0 {
            return e("pause thresholds must be nonnegative".into());
        }
        if self.signal.freezing_min_s < self.signal.interruption_min_s {
            return e("signal.freezing_min_s must not be below signal.interruption_min_s".into());
        }
        if self.signal.entropy_bins < 2 {
            return e("signal.entropy_bins must be at least 2".into());
        }
        if !(0.0..1.0).contains(&self.prune.threshold) {
            return e("prune.threshold out of [0,1)".into());
        }
        if self.gbm.learning_rate <= 0.0 || self.gbm.learning_rate >= 2.0 {
            return e(format!("gbm.learning_rate out of (0,2): {}", self.gbm.learning_rate));
        }
        if self.gbm.max_depth == 0 {
            return e("gbm.max_depth must be at least 1".into());
        }
        if self.gbm.n_estimators == 0 {
            return e("gbm.n_estimators must be at least 1".into());
        }
        if !(self.gbm.subsample > 0.0 && self.gbm.subsample <= 1.0) {
            return e(format!("gbm.subsample out of (0,1]: {}", self.gbm.subsample));
        }
        if self.gbm.min_leaf == 0 {
            return e("gbm.min_leaf must be at least 1".into());
        }
        if self.rfe.n_top == 0 {
            return e("rfe.n_top must be at least 1".into());
        }
        if self.smote.k == 0 {
            return e("smote.k must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.stats.alpha) || self.stats.alpha == 0.0 {
            return e("stats.alpha out of (0,1)".into());
        }
        Ok(())
    }

    /// Canonical text form: every key in [`KEYS`] order with its effective
    /// value. Two configs hash equal iff they behave identically.
    pub fn canonical_string(&self) -> String {
        let mut s = String::new();
        let w = |s: &mut String, k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        w(&mut s, "signal.score_gate", self.signal.score_gate.to_string());
        w(&mut s, "signal.min_period_s", self.signal.min_period_s.to_string());
        w(&mut s, "signal.min_drop_frac", self.signal.min_drop_frac.to_string());
        w(&mut s, "signal.speed_floor_deg_s", self.signal.speed_floor_deg_s.to_string());
        w(&mut s, "signal.interruption_min_s", self.signal.interruption_min_s.to_string());
        w(&mut s, "signal.freezing_min_s", self.signal.freezing_min_s.to_string());
        w(&mut s, "signal.entropy_bins", self.signal.entropy_bins.to_string());
        w(&mut s, "prune.enabled", self.prune.enabled.to_string());
        w(&mut s, "prune.threshold", self.prune.threshold.to_string());
        w(&mut s, "gbm.learning_rate", self.gbm.learning_rate.to_string());
        w(&mut s, "gbm.max_depth", self.gbm.max_depth.to_string());
        w(&mut s, "gbm.n_estimators", self.gbm.n_estimators.to_string());
        w(&mut s, "gbm.subsample", self.gbm.subsample.to_string());
        w(&mut s, "gbm.min_leaf", self.gbm.min_leaf.to_string());
        w(&mut s, "gbm.seed", self.gbm.seed.to_string());
        w(&mut s, "rfe.enabled", self.rfe.enabled.to_string());
        w(&mut s, "rfe.n_top", self.rfe.n_top.to_string());
        w(&mut s, "smote.enabled", self.smote.enabled.to_string());
        w(&mut s, "smote.k", self.smote.k.to_string());
        w(&mut s, "cv.audit_rows", self.cv.audit_rows.to_string());
        w(&mut s, "cv.shap_check", self.cv.shap_check.to_string());
        w(&mut s, "stats.alpha", self.stats.alpha.to_string());
        w(&mut s, "clamp.low", CLAMP_RANGE.0.to_string());
        w(&mut s, "clamp.high", CLAMP_RANGE.1.to_string());
        s
    }

    /// SHA-256 of [`RunConfig::canonical_string`], lowercase hex.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_string().as_bytes());
        let mut out = String::with_capacity(64);
        for byte in digest {
            let _ = write!(out, "{byte:02x}");
        }
        out
    }
}

/// Identification block embedded in every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub catalog_version: String,
    pub config_hash: String,
}

impl Provenance {
    pub fn new(config: &RunConfig) -> Self {
        Provenance {
            tool_version: crate::TOOL_VERSION.to_string(),
            catalog_version: crate::features::CATALOG_VERSION.to_string(),
            config_hash: config.hash(),
        }
    }
}
