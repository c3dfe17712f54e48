//! Tabular feature storage: CSV persistence, correlation pruning, and
//! feature/target screening.
//!
//! The on-disk format is plain CSV with an optional leading `#` comment
//! line carrying provenance (`# tool_version=... catalog_version=...
//! config_hash=...`), then a header of `video_id,participant_id,hand`,
//! the feature columns, and optionally a trailing `truth` column.

use crate::config::Provenance;
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::ingest::Handedness;
use crate::stats::{pearson, percentile_sorted};
use std::io::Write as _;
use std::path::Path;

/// Identity columns of one table row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureRowMeta {
    pub video_id: String,
    pub participant_id: String,
    pub hand: Handedness,
}

/// A feature matrix with row identities and optional severity labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub feature_names: Vec<String>,
    pub rows: Vec<FeatureRowMeta>,
    /// Row-major values; every row has `feature_names.len()` entries.
    pub values: Vec<Vec<f64>>,
    /// Per-row severity label, when the table has been joined with ground
    /// truth.
    pub truth: Option<Vec<u8>>,
}

impl FeatureTable {
    /// Builds a table from extracted vectors, in the order given, with the
    /// full canonical feature set.
    pub fn from_vectors(vectors: &[FeatureVector]) -> Self {
        FeatureTable {
            feature_names: super::FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            rows: vectors
                .iter()
                .map(|v| FeatureRowMeta {
                    video_id: v.video_id.clone(),
                    participant_id: v.participant_id.clone(),
                    hand: v.hand,
                })
                .collect(),
            values: vectors.iter().map(|v| v.values.clone()).collect(),
            truth: None,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Position of a feature by name.
    pub fn feature_pos(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// One feature column, copied.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[j]).collect()
    }

    /// A new table containing only the given feature columns, in the given
    /// order. Row metadata and truth carry over.
    pub fn select_columns(&self, keep: &[usize]) -> FeatureTable {
        FeatureTable {
            feature_names: keep
                .iter()
                .map(|&j| self.feature_names[j].clone())
                .collect(),
            rows: self.rows.clone(),
            values: self
                .values
                .iter()
                .map(|row| keep.iter().map(|&j| row[j]).collect())
                .collect(),
            truth: self.truth.clone(),
        }
    }

    /// A new table containing only the given rows, in the given order.
    pub fn select_rows(&self, keep: &[usize]) -> FeatureTable {
        FeatureTable {
            feature_names: self.feature_names.clone(),
            rows: keep.iter().map(|&i| self.rows[i].clone()).collect(),
            values: keep.iter().map(|&i| self.values[i].clone()).collect(),
            truth: self
                .truth
                .as_ref()
                .map(|t| keep.iter().map(|&i| t[i]).collect()),
        }
    }

    /// Attaches severity labels by video id. Every row must have a label.
    pub fn attach_truth(&mut self, labels: &[(String, u8)]) -> Result<()> {
        let mut truth = Vec::with_capacity(self.rows.len());
        for meta in &self.rows {
            let found = labels
                .iter()
                .find(|(vid, _)| *vid == meta.video_id)
                .map(|(_, t)| *t)
                .ok_or_else(|| {
                    Error::invalid(format!("no ground truth for video {}", meta.video_id))
                })?;
            truth.push(found);
        }
        self.truth = Some(truth);
        Ok(())
    }

    /// Writes the table as CSV, optionally stamped with a provenance
    /// comment line.
    pub fn write_csv(&self, path: &Path, provenance: Option<&Provenance>) -> Result<()> {
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        if let Some(p) = provenance {
            writeln!(
                file,
                "# tool_version={} catalog_version={} config_hash={}",
                p.tool_version, p.catalog_version, p.config_hash
            )
            .map_err(|e| Error::io(path, e))?;
        }
        let mut w = csv::Writer::from_writer(file);
        let mut header = vec!["video_id", "participant_id", "hand"];
        header.extend(self.feature_names.iter().map(|s| s.as_str()));
        if self.truth.is_some() {
            header.push("truth");
        }
        w.write_record(&header).map_err(|e| csv_err(path, e))?;
        for (r, meta) in self.rows.iter().enumerate() {
            let mut record = vec![
                meta.video_id.clone(),
                meta.participant_id.clone(),
                meta.hand.as_str().to_string(),
            ];
            record.extend(self.values[r].iter().map(|v| format_value(*v)));
            if let Some(truth) = &self.truth {
                record.push(truth[r].to_string());
            }
            w.write_record(&record).map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Reads a table written by [`FeatureTable::write_csv`], returning the
    /// provenance stamp when one is present.
    pub fn read_csv(path: &Path) -> Result<(FeatureTable, Option<Provenance>)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let provenance = text
            .lines()
            .next()
            .filter(|l| l.starts_with('#'))
            .map(parse_provenance_line)
            .transpose()
            .map_err(|reason| Error::malformed(path, 1, reason))?;

        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| csv_err(path, e))?
            .clone();
        let cols: Vec<&str> = headers.iter().collect();
        if cols.len() < 4 || cols[0] != "video_id" || cols[1] != "participant_id" || cols[2] != "hand"
        {
            return Err(Error::malformed(
                path,
                provenance_offset(provenance.is_some()),
                "expected header video_id,participant_id,hand,<features...>[,truth]",
            ));
        }
        let has_truth = *cols.last().unwrap() == "truth";
        let feature_end = if has_truth { cols.len() - 1 } else { cols.len() };
        let feature_names: Vec<String> =
            cols[3..feature_end].iter().map(|s| s.to_string()).collect();

        let mut rows = Vec::new();
        let mut values = Vec::new();
        let mut truth = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| csv_err(path, e))?;
            let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
            if record.len() != cols.len() {
                return Err(Error::malformed(
                    path,
                    line,
                    format!("expected {} fields, got {}", cols.len(), record.len()),
                ));
            }
            let hand = Handedness::parse(&record[2])
                .ok_or_else(|| Error::malformed(path, line, format!("bad hand {:?}", &record[2])))?;
            rows.push(FeatureRowMeta {
                video_id: record[0].to_string(),
                participant_id: record[1].to_string(),
                hand,
            });
            let mut row = Vec::with_capacity(feature_names.len());
            for j in 3..feature_end {
                let v: f64 = record[j].parse().map_err(|_| {
                    Error::malformed(
                        path,
                        line,
                        format!("column {} is not a number: {:?}", cols[j], &record[j]),
                    )
                })?;
                row.push(v);
            }
            values.push(row);
            if has_truth {
                let t: u8 = record[cols.len() - 1].parse().map_err(|_| {
                    Error::malformed(path, line, format!("bad truth value {:?}", &record[cols.len() - 1]))
                })?;
                if t > 4 {
                    return Err(Error::malformed(path, line, format!("truth {t} outside 0..=4")));
                }
                truth.push(t);
            }
        }
        Ok((
            FeatureTable {
                feature_names,
                rows,
                values,
                truth: if has_truth { Some(truth) } else { None },
            },
            provenance,
        ))
    }

    /// Drops near-duplicate features: scanning columns in order, a column
    /// is removed when its absolute Pearson correlation with an
    /// already-retained column strictly exceeds `threshold`. Returns the
    /// retained column indices (ascending).
    ///
    /// Correlations use pairwise-complete rows; pairs with fewer than 3
    /// complete rows or no variance are treated as uncorrelated.
    pub fn prune_correlated(&self, threshold: f64) -> Vec<usize> {
        let m = self.n_features();
        let cols: Vec<Vec<f64>> = (0..m).map(|j| self.column(j)).collect();
        let mut retained: Vec<usize> = Vec::new();
        for j in 0..m {
            let duplicate = retained.iter().any(|&i| {
                pairwise_abs_r(&cols[i], &cols[j]).is_some_and(|r| r > threshold)
            });
            if !duplicate {
                retained.push(j);
            }
        }
        retained
    }

    /// Screens every feature against the severity label: Pearson r, its
    /// two-sided p-value, and a significance flag at `alpha`. Features are
    /// ranked by |r| descending (ties keep catalog order). Features that
    /// cannot be tested are reported separately with the reason.
    pub fn feature_target_correlations(&self, alpha: f64) -> Result<CorrelationReport> {
        let truth = self
            .truth
            .as_ref()
            .ok_or_else(|| Error::invalid("correlation screening needs ground truth labels"))?;
        let y: Vec<f64> = truth.iter().map(|&t| t as f64).collect();
        let mut tested: Vec<CorrelationRow> = Vec::new();
        let mut excluded: Vec<ExcludedFeature> = Vec::new();
        for (j, name) in self.feature_names.iter().enumerate() {
            let col = self.column(j);
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for (x, t) in col.iter().zip(&y) {
                if x.is_finite() {
                    xs.push(*x);
                    ys.push(*t);
                }
            }
            if xs.len() < 3 {
                excluded.push(ExcludedFeature {
                    feature: name.clone(),
                    reason: format!("only {} valid rows", xs.len()),
                });
                continue;
            }
            match crate::stats::hypothesis::pearson_with_p(&xs, &ys)? {
                Some(test) => tested.push(CorrelationRow {
                    feature: name.clone(),
                    n: xs.len(),
                    r: test.r,
                    p: test.p,
                    significant: test.p < alpha,
                    rank: 0,
                }),
                None => excluded.push(ExcludedFeature {
                    feature: name.clone(),
                    reason: "zero variance".to_string(),
                }),
            }
        }
        tested.sort_by(|a, b| {
            b.r.abs()
                .partial_cmp(&a.r.abs())
                .expect("correlation is finite")
        });
        for (i, row) in tested.iter_mut().enumerate() {
            row.rank = i + 1;
        }
        Ok(CorrelationReport {
            alpha,
            n_rows: self.n_rows(),
            rows: tested,
            excluded,
        })
    }

    /// Summary of each feature column's spread, used to sanity-check a
    /// table without eyeballing raw CSV.
    pub fn column_summary(&self, j: usize) -> ColumnSummary {
        let mut finite: Vec<f64> = self.column(j).into_iter().filter(|v| v.is_finite()).collect();
        finite.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n_missing = self.n_rows() - finite.len();
        if finite.is_empty() {
            return ColumnSummary {
                feature: self.feature_names[j].clone(),
                n_missing,
                min: f64::NAN,
                median: f64::NAN,
                max: f64::NAN,
            };
        }
        ColumnSummary {
            feature: self.feature_names[j].clone(),
            n_missing,
            min: finite[0],
            median: percentile_sorted(&finite, 0.5),
            max: *finite.last().unwrap(),
        }
    }
}

/// |r| over pairwise-complete rows; None when untestable.
fn pairwise_abs_r(a: &[f64], b: &[f64]) -> Option<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (x, y) in a.iter().zip(b) {
        if x.is_finite() && y.is_finite() {
            xs.push(*x);
            ys.push(*y);
        }
    }
    if xs.len() < 3 {
        return None;
    }
    pearson(&xs, &ys).map(f64::abs)
}

/// One screened feature.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CorrelationRow {
    pub feature: String,
    pub n: usize,
    pub r: f64,
    pub p: f64,
    pub significant: bool,
    pub rank: usize,
}

/// A feature that could not be screened.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExcludedFeature {
    pub feature: String,
    pub reason: String,
}

/// Output of [`FeatureTable::feature_target_correlations`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CorrelationReport {
    pub alpha: f64,
    pub n_rows: usize,
    pub rows: Vec<CorrelationRow>,
    pub excluded: Vec<ExcludedFeature>,
}

/// Spread of one column, for quick inspection.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ColumnSummary {
    pub feature: String,
    pub n_missing: usize,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        // Shortest representation that round-trips exactly.
        format!("{v}")
    }
}

fn parse_provenance_line(line: &str) -> std::result::Result<Provenance, String> {
    let mut tool_version = None;
    let mut catalog_version = None;
    let mut config_hash = None;
    for part in line.trim_start_matches('#').split_whitespace() {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| format!("bad provenance token {part:?}"))?;
        match key {
            "tool_version" => tool_version = Some(value.to_string()),
            "catalog_version" => catalog_version = Some(value.to_string()),
            "config_hash" => config_hash = Some(value.to_string()),
            other => return Err(format!("unknown provenance key {other:?}")),
        }
    }
    match (tool_version, catalog_version, config_hash) {
        (Some(t), Some(c), Some(h)) => Ok(Provenance {
            tool_version: t,
            catalog_version: c,
            config_hash: h,
        }),
        _ => Err("provenance line must carry tool_version, catalog_version, config_hash".into()),
    }
}

fn provenance_offset(has_comment: bool) -> usize {
    if has_comment {
        2
    } else {
        1
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.position() {
        Some(pos) => Error::malformed(path, pos.line() as usize, e.to_string()),
        None => Error::invalid(format!("{}: {e}", path.display())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toy_table() -> FeatureTable {
        // Column 0: 1..6. Column 1: exactly 2x column 0. Column 2:
        // uncorrelated wiggle. Column 3: negative of column 0 plus noise
        // small enough to stay past the 0.85 threshold.
        let base = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let wiggle = [0.3, -0.4, 0.35, -0.2, 0.1, -0.31];
        let rows: Vec<FeatureRowMeta> = (0..6)
            .map(|i| FeatureRowMeta {
                video_id: format!("v{i}"),
                participant_id: format!("p{}", i / 2),
                hand: Handedness::Left,
            })
            .collect();
        let values: Vec<Vec<f64>> = (0..6)
            .map(|i| {
                vec![
                    base[i],
                    2.0 * base[i],
                    wiggle[i],
                    -base[i] + 0.05 * wiggle[i],
                ]
            })
            .collect();
        FeatureTable {
            feature_names: vec!["a".into(), "b".into(), "c".into(), "d".into()],
            rows,
            values,
            truth: Some(vec![0, 1, 1, 2, 3, 4]),
        }
    }

    #[test]
    fn prune_keeps_first_of_each_correlated_group() {
        let t = toy_table();
        assert_eq!(t.prune_correlated(0.85), vec![0, 2]);
    }

    #[test]
    fn prune_threshold_is_strict() {
        let t = toy_table();
        // Columns 0 and 1 correlate at exactly 1.0; a threshold of 1.0
        // must keep both because "strictly greater" never fires.
        let retained = t.prune_correlated(1.0);
        assert!(retained.contains(&1));
    }

    #[test]
    fn prune_ignores_nan_rows() {
        let mut t = toy_table();
        // Poison one row of column 1; the rest still correlate perfectly
        // with column 0 on the complete pairs.
        t.values[2][1] = f64::NAN;
        assert_eq!(t.prune_correlated(0.85), vec![0, 2]);
    }

    #[test]
    fn csv_round_trip_preserves_everything() {
        let t = toy_table();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        let prov = Provenance {
            tool_version: "0.1.0".into(),
            catalog_version: "1".into(),
            config_hash: "deadbeef".into(),
        };
        t.write_csv(&path, Some(&prov)).unwrap();
        let (back, stamp) = FeatureTable::read_csv(&path).unwrap();
        assert_eq!(back, t);
        let stamp = stamp.unwrap();
        assert_eq!(stamp.tool_version, "0.1.0");
        assert_eq!(stamp.catalog_version, "1");
        assert_eq!(stamp.config_hash, "deadbeef");
    }

    #[test]
    fn csv_round_trip_preserves_nan_and_exact_floats() {
        let mut t = toy_table();
        t.values[0][0] = f64::NAN;
        t.values[1][1] = 0.1 + 0.2; // not representable as "0.3"
        t.values[2][2] = 1.0e-17;
        t.truth = None;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        t.write_csv(&path, None).unwrap();
        let (back, stamp) = FeatureTable::read_csv(&path).unwrap();
        assert!(stamp.is_none());
        assert!(back.values[0][0].is_nan());
        assert_eq!(back.values[1][1], 0.1 + 0.2);
        assert_eq!(back.values[2][2], 1.0e-17);
        assert!(back.truth.is_none());
    }

    #[test]
    fn read_rejects_bad_numbers_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(
            &path,
            "video_id,participant_id,hand,a\nv1,p1,left,1.0\nv2,p2,right,oops\n",
        )
        .unwrap();
        let err = FeatureTable::read_csv(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":3:"), "error should carry line 3: {msg}");
        assert!(msg.contains("not a number"), "{msg}");
    }

    #[test]
    fn read_rejects_wrong_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "foo,bar\n1,2\n").unwrap();
        assert!(FeatureTable::read_csv(&path).is_err());
    }

    #[test]
    fn screening_ranks_by_absolute_correlation() {
        let mut t = toy_table();
        // Add a constant column to exercise exclusion.
        t.feature_names.push("flat".into());
        for row in &mut t.values {
            row.push(7.0);
        }
        let report = t.feature_target_correlations(0.01).unwrap();
        // a, b, d all track the label nearly perfectly; c barely.
        assert_eq!(report.rows.len(), 4);
        assert_eq!(report.rows.last().unwrap().feature, "c");
        assert_eq!(report.rows[0].rank, 1);
        assert!(report.rows[0].r.abs() >= report.rows[1].r.abs());
        assert_eq!(report.excluded.len(), 1);
        assert_eq!(report.excluded[0].feature, "flat");
        assert_eq!(report.excluded[0].reason, "zero variance");
        // Perfectly linear features on 6 points are significant at 0.01.
        assert!(report.rows[0].significant);
    }

    #[test]
    fn screening_skips_features_with_too_few_valid_rows() {
        let mut t = toy_table();
        for row in &mut t.values {
            row[2] = f64::NAN;
        }
        t.values[0][2] = 0.5;
        let report = t.feature_target_correlations(0.01).unwrap();
        assert!(report
            .excluded
            .iter()
            .any(|e| e.feature == "c" && e.reason.contains("valid rows")));
    }

    #[test]
    fn select_columns_reorders() {
        let t = toy_table();
        let s = t.select_columns(&[2, 0]);
        assert_eq!(s.feature_names, vec!["c".to_string(), "a".to_string()]);
        assert_eq!(s.values[0], vec![0.3, 1.0]);
        assert_eq!(s.truth, t.truth);
    }

    #[test]
    fn attach_truth_by_video_id() {
        let mut t = toy_table();
        t.truth = None;
        let labels: Vec<(String, u8)> = (0..6).map(|i| (format!("v{i}"), (i % 5) as u8)).collect();
        t.attach_truth(&labels).unwrap();
        assert_eq!(t.truth.as_ref().unwrap()[5], 0);
        let missing = vec![("nope".to_string(), 1u8)];
        assert!(t.attach_truth(&missing).is_err());
    }

    #[test]
    fn correlation_math_spot_check() {
        // Verify the pairwise r against the closed form on a small pair.
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [2.0, 4.1, 5.9, 8.0];
        let r = pairwise_abs_r(&a, &b).unwrap();
        assert_relative_eq!(r, 0.9995411791453814, epsilon = 1e-12);
    }
}
