//! Implementations behind the command surface.
//!
//! Shared conventions: input collections are processed in sorted order,
//! every artifact carries a provenance stamp (tool version, feature
//! catalog version, configuration hash), and nothing here consults the
//! clock, so re-running a command on the same inputs reproduces the same
//! bytes.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use tapkit::config::Provenance;
use tapkit::error::{Error, Result};
use tapkit::features::{FeatureTable, CATALOG_VERSION};
use tapkit::ingest::{
    load_demographics, load_ratings, parse_landmark_file, write_landmark_file,
    derive_ground_truth, RaterRole, RatingRecord,
};
use tapkit::model::{lopo_cv, train_model, BoostedEnsemble};
use tapkit::pipeline::extract_recording;
use tapkit::stats::agreement::{agreement_report, pairwise_scatter};
use tapkit::stats::bias::{subgroup_error_analysis, VideoError};
use tapkit::synth::{inject_keypoint_noise, severity_grade_dataset, RecordingOracle};
use tapkit::RunConfig;

use crate::Command;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Extract {
            landmarks,
            out,
            debug_signals,
            config,
            jobs,
        } => extract(&landmarks, &out, debug_signals.as_deref(), config.as_deref(), jobs),
        Command::GroundTruth { ratings, out } => ground_truth(&ratings, &out),
        Command::Correlate {
            features,
            labels,
            out,
            config,
        } => correlate(&features, &labels, &out, config.as_deref()),
        Command::Cv {
            features,
            labels,
            config,
            out,
        } => cv(&features, &labels, config.as_deref(), &out),
        Command::Train {
            features,
            labels,
            config,
            out,
        } => train(&features, &labels, config.as_deref(), &out),
        Command::Predict {
            model,
            features,
            out,
        } => predict(&model, &features, &out),
        Command::Explain {
            model,
            features,
            out,
            importance,
        } => explain(&model, &features, &out, importance.as_deref()),
        Command::Agreement {
            ratings,
            out,
            scatter,
        } => agreement(&ratings, &out, scatter.as_deref()),
        Command::Bias {
            cv_report,
            demographics,
            ratings,
            out,
        } => bias(&cv_report, &demographics, ratings.as_deref(), &out),
        Command::Synth {
            grades,
            participants,
            seed,
            out,
        } => synth(grades, participants, seed, &out),
        Command::Noise {
            landmarks,
            sigma,
            seed,
            out,
        } => noise(&landmarks, sigma, seed, &out),
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::from_file(p),
        None => Ok(RunConfig::default()),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn make_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// The .jsonl files of a directory, sorted by name.
fn landmark_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Invalid(format!(
            "no .jsonl landmark files in {}",
            dir.display()
        )));
    }
    Ok(files)
}

fn provenance_line(p: &Provenance) -> String {
    format!(
        "# tool_version={} catalog_version={} config_hash={}",
        p.tool_version, p.catalog_version, p.config_hash
    )
}

fn write_labels(path: &Path, labels: &[(String, u8)], prov: &Provenance) -> Result<()> {
    let mut text = provenance_line(prov);
    text.push_str("\nvideo_id,truth\n");
    for (video_id, truth) in labels {
        text.push_str(video_id);
        text.push(',');
        text.push_str(&truth.to_string());
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn read_labels(path: &Path) -> Result<Vec<(String, u8)>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, header)) if header.trim() == "video_id,truth" => {}
        _ => {
            return Err(Error::Invalid(format!(
                "{}: expected header video_id,truth",
                path.display()
            )))
        }
    }
    let mut labels = Vec::new();
    for (i, line) in lines {
        let (video_id, value) = line.split_once(',').ok_or_else(|| {
            Error::Invalid(format!("{}:{}: expected video_id,truth", path.display(), i + 1))
        })?;
        let truth: u8 = value.trim().parse().map_err(|_| {
            Error::Invalid(format!(
                "{}:{}: severity {value:?} is not an integer",
                path.display(),
                i + 1
            ))
        })?;
        if truth > 4 {
            return Err(Error::Invalid(format!(
                "{}:{}: severity {truth} outside 0-4",
                path.display(),
                i + 1
            )));
        }
        labels.push((video_id.trim().to_string(), truth));
    }
    if labels.is_empty() {
        return Err(Error::Invalid(format!("{}: no labels", path.display())));
    }
    Ok(labels)
}

fn labeled_table(features: &Path, labels: &Path) -> Result<FeatureTable> {
    let (mut table, _) = FeatureTable::read_csv(features)?;
    table.attach_truth(&read_labels(labels)?)?;
    Ok(table)
}

/// JSON artifact wrapper adding the provenance stamp.
#[derive(Serialize)]
struct Stamped<T: Serialize> {
    provenance: Provenance,
    #[serde(flatten)]
    payload: T,
}

fn write_stamped_json<T: Serialize>(path: &Path, prov: &Provenance, payload: T) -> Result<()> {
    let doc = Stamped {
        provenance: prov.clone(),
        payload,
    };
    let json = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::Internal(format!("serialize {}: {e}", path.display())))?;
    std::fs::write(path, json + "\n").map_err(|e| io_err(path, e))
}

fn extract(
    landmarks: &Path,
    out: &Path,
    debug_signals: Option<&Path>,
    config: Option<&Path>,
    jobs: usize,
) -> Result<()> {
    if jobs < 1 {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    let cfg = load_config(config)?;
    let files = landmark_files(landmarks)?;
    if let Some(dir) = debug_signals {
        make_dir(dir)?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    let results: Vec<Result<tapkit::features::FeatureVector>> = pool.install(|| {
        files
            .par_iter()
            .map(|path| {
                let rec = parse_landmark_file(path)?;
                let extracted = extract_recording(&rec, &cfg.signal)?;
                if let Some(dir) = debug_signals {
                    extracted
                        .trace
                        .write_csv(&dir.join(format!("{}.csv", rec.video_id)))?;
                }
                Ok(extracted.features)
            })
            .collect()
    });
    let vectors: Vec<_> = results.into_iter().collect::<Result<_>>()?;

    let table = FeatureTable::from_vectors(&vectors);
    table.write_csv(out, Some(&Provenance::new(&cfg)))?;
    log::info!("extracted {} recordings -> {}", vectors.len(), out.display());
    Ok(())
}

fn ground_truth(ratings: &Path, out: &Path) -> Result<()> {
    let records = load_ratings(ratings)?;
    let mut by_video: BTreeMap<&str, Vec<RatingRecord>> = BTreeMap::new();
    for r in &records {
        if r.rater_role == RaterRole::Expert {
            by_video.entry(r.video_id.as_str()).or_default().push(r.clone());
        }
    }
    if by_video.is_empty() {
        return Err(Error::Invalid(format!(
            "{}: no expert ratings",
            ratings.display()
        )));
    }
    let mut labels = Vec::with_capacity(by_video.len());
    for (video_id, video_ratings) in by_video {
        let truth = derive_ground_truth(&video_ratings)
            .map_err(|e| Error::Invalid(format!("video {video_id}: {e}")))?;
        labels.push((video_id.to_string(), truth));
    }
    write_labels(out, &labels, &Provenance::new(&RunConfig::default()))
}

fn correlate(features: &Path, labels: &Path, out: &Path, config: Option<&Path>) -> Result<()> {
    let cfg = load_config(config)?;
    let table = labeled_table(features, labels)?;
    let report = table.feature_target_correlations(cfg.stats.alpha)?;

    let mut text = provenance_line(&Provenance::new(&cfg));
    text.push_str("\nfeature,n,r,p,significant,rank\n");
    for row in &report.rows {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.feature, row.n, row.r, row.p, row.significant, row.rank
        ));
    }
    for ex in &report.excluded {
        text.push_str(&format!("# excluded {}: {}\n", ex.feature, ex.reason));
    }
    std::fs::write(out, text).map_err(|e| io_err(out, e))
}

fn cv(features: &Path, labels: &Path, config: Option<&Path>, out_dir: &Path) -> Result<()> {
    let cfg = load_config(config)?;
    let table = labeled_table(features, labels)?;
    let report = lopo_cv(&table, &cfg)?;
    make_dir(out_dir)?;
    report.save_json(&out_dir.join("cv_report.json"))?;
    report.save_predictions_csv(&out_dir.join("predictions.csv"))?;

    let pooled = &report.pooled;
    let corr = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
    println!(
        "{} videos, {} participants: mae {:.4} (raw {:.4}), mse {:.4}, accuracy {:.1}%, pcc {}, spearman {}",
        report.n_videos,
        report.n_participants,
        pooled.mae,
        report.mae_raw,
        pooled.mse,
        pooled.accuracy_percent,
        corr(pooled.pearson_r),
        corr(pooled.spearman_rho),
    );
    Ok(())
}

fn train(features: &Path, labels: &Path, config: Option<&Path>, out: &Path) -> Result<()> {
    let cfg = load_config(config)?;
    let table = labeled_table(features, labels)?;
    let model = train_model(&table, &cfg)?;
    model.save(out)?;
    log::info!(
        "trained on {} rows, {} features kept -> {}",
        table.n_rows(),
        model.selected_features.len(),
        out.display()
    );
    Ok(())
}

/// Rejects a model whose feature catalog differs from this build's.
fn check_catalog(model: &BoostedEnsemble) -> Result<()> {
    if model.catalog_version != CATALOG_VERSION {
        return Err(Error::Invalid(format!(
            "model uses feature catalog version {} but this build produces {}",
            model.catalog_version, CATALOG_VERSION
        )));
    }
    Ok(())
}

fn predict(model_path: &Path, features: &Path, out: &Path) -> Result<()> {
    let model = BoostedEnsemble::load(model_path)?;
    check_catalog(&model)?;
    let (table, _) = FeatureTable::read_csv(features)?;
    let preds = model.predict_table(&table)?;

    let prov = Provenance {
        tool_version: tapkit::TOOL_VERSION.to_string(),
        catalog_version: model.catalog_version.clone(),
        config_hash: model.config_hash.clone(),
    };
    let mut text = provenance_line(&prov);
    text.push_str("\nvideo_id,prediction,prediction_raw\n");
    for (i, meta) in table.rows.iter().enumerate() {
        text.push_str(&format!(
            "{},{},{}\n",
            meta.video_id, preds.clamped[i], preds.raw[i]
        ));
    }
    std::fs::write(out, text).map_err(|e| io_err(out, e))
}

fn explain(
    model_path: &Path,
    features: &Path,
    out: &Path,
    importance_path: Option<&Path>,
) -> Result<()> {
    let model = BoostedEnsemble::load(model_path)?;
    check_catalog(&model)?;
    let (table, _) = FeatureTable::read_csv(features)?;
    let attributions = tapkit::explain::explain_table(&model, &table)?;

    let prov = Provenance {
        tool_version: tapkit::TOOL_VERSION.to_string(),
        catalog_version: model.catalog_version.clone(),
        config_hash: model.config_hash.clone(),
    };
    let mut file = std::fs::File::create(out).map_err(|e| io_err(out, e))?;
    writeln!(file, "{}", provenance_line(&prov)).map_err(|e| io_err(out, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["video_id".to_string(), "base_value".to_string()];
    header.extend(model.selected_features.iter().cloned());
    w.write_record(&header)
        .map_err(|e| Error::Invalid(format!("{}: {e}", out.display())))?;
    for (meta, attr) in table.rows.iter().zip(&attributions) {
        let mut record = vec![meta.video_id.clone(), attr.base.to_string()];
        record.extend(attr.contributions.iter().map(|v| v.to_string()));
        w.write_record(&record)
            .map_err(|e| Error::Invalid(format!("{}: {e}", out.display())))?;
    }
    w.flush().map_err(|e| io_err(out, e))?;

    let ranking =
        tapkit::explain::global_importance(&attributions, &model.selected_features)?;
    let importance_file = importance_path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out.with_file_name("importance.txt"));
    let mut text = provenance_line(&prov);
    text.push_str("\nrank  mean_abs_shap  feature\n");
    for (i, row) in ranking.iter().enumerate() {
        text.push_str(&format!(
            "{:<4}  {:<13.6}  {}\n",
            i + 1,
            row.mean_abs_contribution,
            row.feature
        ));
    }
    std::fs::write(&importance_file, text).map_err(|e| io_err(&importance_file, e))
}

fn agreement(ratings: &Path, out: &Path, scatter: Option<&Path>) -> Result<()> {
    let records = load_ratings(ratings)?;
    let report = agreement_report(&records)?;
    write_stamped_json(out, &Provenance::new(&RunConfig::default()), &report)?;

    if let Some(scatter_path) = scatter {
        let mut text = provenance_line(&Provenance::new(&RunConfig::default()));
        text.push_str("\nvideo_id,rater_a,rating_a,rater_b,rating_b\n");
        for row in pairwise_scatter(&records) {
            text.push_str(&format!(
                "{},{},{},{},{}\n",
                row.video_id, row.rater_a, row.rating_a, row.rater_b, row.rating_b
            ));
        }
        std::fs::write(scatter_path, text).map_err(|e| io_err(scatter_path, e))?;
    }
    Ok(())
}

fn bias(
    cv_report: &Path,
    demographics: &Path,
    ratings: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let text = std::fs::read_to_string(cv_report).map_err(|e| io_err(cv_report, e))?;
    let report: tapkit::model::CvReport = serde_json::from_str(&text).map_err(|e| {
        Error::Malformed {
            path: cv_report.to_path_buf(),
            line: e.line(),
            reason: format!("bad cv report: {e}"),
        }
    })?;
    let demo = load_demographics(demographics)?;

    // A video counts as difficult when any rater flagged it.
    let difficult: Option<BTreeMap<String, bool>> = match ratings {
        Some(path) => {
            let mut map = BTreeMap::new();
            for r in load_ratings(path)? {
                let entry = map.entry(r.video_id.clone()).or_insert(false);
                *entry |= r.difficult;
            }
            Some(map)
        }
        None => None,
    };

    let errors: Vec<VideoError> = report
        .all_videos()
        .map(|v| VideoError {
            video_id: v.video_id.clone(),
            participant_id: v.participant_id.clone(),
            abs_error: v.abs_error,
            difficult: difficult
                .as_ref()
                .and_then(|m| m.get(&v.video_id).copied()),
        })
        .collect();
    let analysis = subgroup_error_analysis(&errors, &demo)?;
    write_stamped_json(out, &report.provenance, &analysis)
}

/// Oracle sidecar written next to each generated recording.
#[derive(Serialize)]
struct OracleSidecar<'a> {
    video_id: &'a str,
    participant_id: &'a str,
    label: u8,
    oracle: &'a RecordingOracle,
}

fn synth(grades: bool, participants: usize, seed: u64, out_dir: &Path) -> Result<()> {
    if !grades {
        return Err(Error::Config(
            "pass --grades to generate the severity-graded dataset".into(),
        ));
    }
    let data = severity_grade_dataset(participants, seed)?;
    make_dir(out_dir)?;
    let prov = Provenance::new(&RunConfig::default());
    let mut labels = Vec::with_capacity(data.len());
    for item in &data {
        let video_id = item.recording.video_id.as_str();
        write_landmark_file(&item.recording, &out_dir.join(format!("{video_id}.jsonl")))?;
        let sidecar = OracleSidecar {
            video_id,
            participant_id: &item.recording.participant_id,
            label: item.label,
            oracle: &item.oracle,
        };
        let path = out_dir.join(format!("{video_id}.oracle.json"));
        let json = serde_json::to_string_pretty(&sidecar)
            .map_err(|e| Error::Internal(format!("serialize oracle: {e}")))?;
        std::fs::write(&path, json + "\n").map_err(|e| io_err(&path, e))?;
        labels.push((video_id.to_string(), item.label));
    }
    write_labels(&out_dir.join("labels.csv"), &labels, &prov)?;
    log::info!(
        "generated {} recordings for {participants} participants -> {}",
        data.len(),
        out_dir.display()
    );
    Ok(())
}

/// Stable per-recording seed so renaming or reordering files cannot
/// change any individual recording's noise.
fn mix_seed(seed: u64, video_id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in video_id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    seed ^ h
}

fn noise(landmarks: &Path, sigma: f64, seed: u64, out_dir: &Path) -> Result<()> {
    let files = landmark_files(landmarks)?;
    make_dir(out_dir)?;
    for path in files {
        let rec = parse_landmark_file(&path)?;
        let noisy = inject_keypoint_noise(&rec, sigma, mix_seed(seed, &rec.video_id))?;
        let name = path
            .file_name()
            .ok_or_else(|| Error::Invalid(format!("{}: no file name", path.display())))?;
        write_landmark_file(&noisy, &out_dir.join(name))?;
    }
    Ok(())
}
