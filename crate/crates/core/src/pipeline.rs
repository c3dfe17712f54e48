//! End-to-end extraction of one recording into its feature vector.
//!
//! Wires the stages together in their required order: angle signal,
//! dropout repair, largest usable segment, peak detection, first/last tap
//! trimming, then the per-frame, per-tap, and whole-signal measurements
//! feeding the 65-slot assembly. Recordings whose taps cannot be
//! segmented still produce a vector; only the tap-dependent slots turn
//! NaN. A recording with no usable hand at all is an error.

use std::io::Write as _;
use std::path::Path;

use crate::config::SignalConfig;
use crate::error::{Error, Result};
use crate::features::{
    aperiodicity, assemble_feature_vector, pause_stats, per_frame_kinematics, per_tap_metrics,
    AssemblyInput, FeatureVector,
};
use crate::ingest::VideoRecording;
use crate::signal::{
    build_angle_series, compute_wrist_deltas, detect_peaks, extract_largest_visible_segment,
    interpolate_missing, trim_first_last_tap, SENTINEL,
};

/// One frame's processing state, for plotting and inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub frame: u64,
    /// Angle after dropout repair; NaN where no value exists.
    pub angle: f64,
    pub is_interpolated: bool,
    /// Accepted tap peak (before first/last trimming).
    pub is_peak: bool,
}

/// Per-frame trace of the signal stages for one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct DebugTrace {
    pub video_id: String,
    pub rows: Vec<TraceRow>,
}

impl DebugTrace {
    /// Writes `frame,angle,is_interpolated,is_peak` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        writeln!(file, "frame,angle,is_interpolated,is_peak").map_err(|e| Error::io(path, e))?;
        for row in &self.rows {
            writeln!(
                file,
                "{},{},{},{}",
                row.frame,
                if row.angle.is_nan() {
                    "NaN".to_string()
                } else {
                    format!("{}", row.angle)
                },
                row.is_interpolated,
                row.is_peak
            )
            .map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }
}

/// The features and the trace behind them.
#[derive(Debug, Clone)]
pub struct ExtractedRecording {
    pub features: FeatureVector,
    pub trace: DebugTrace,
    /// Accepted peak count before trimming; 0 means tap features are NaN.
    pub n_peaks: usize,
    /// False when fewer than four peaks prevented trimming.
    pub taps_valid: bool,
}

/// Runs the full signal and feature pipeline on one recording.
pub fn extract_recording(
    rec: &VideoRecording,
    cfg: &SignalConfig,
) -> Result<ExtractedRecording> {
    let raw = build_angle_series(rec, cfg.score_gate);
    let filled = interpolate_missing(&raw);
    let segment = extract_largest_visible_segment(&filled)
        .map_err(|e| Error::invalid(format!("{}: {e}", rec.video_id)))?;
    let detected = detect_peaks(&segment, cfg);
    let (trimmed, seg) = trim_first_last_tap(&segment, &detected);

    let trace = {
        let peak_frames: Vec<usize> = detected
            .peak_indices
            .iter()
            .map(|&p| segment.offset + p)
            .collect();
        let rows = rec
            .frames
            .iter()
            .enumerate()
            .map(|(i, frame)| TraceRow {
                frame: frame.frame_index,
                angle: if filled.values[i] == SENTINEL {
                    f64::NAN
                } else {
                    filled.values[i]
                },
                is_interpolated: filled.interpolated[i],
                is_peak: peak_frames.contains(&i),
            })
            .collect();
        DebugTrace {
            video_id: rec.video_id.clone(),
            rows,
        }
    };

    let (speed, accel) = if trimmed.len() >= 3 {
        let (v, a) = per_frame_kinematics(&trimmed)?;
        (Some(v), Some(a))
    } else {
        (None, None)
    };
    let taps = if seg.valid {
        Some(per_tap_metrics(&trimmed, &seg)?)
    } else {
        None
    };
    let pauses = speed.as_ref().map(|v| pause_stats(v, trimmed.fps, cfg));
    let spectral = if trimmed.len() >= 8 {
        Some(aperiodicity(&trimmed.values)?)
    } else {
        None
    };

    // Wrist movement between consecutive frames that both sit inside the
    // final analysis window and have usable geometry.
    let wrist = compute_wrist_deltas(rec, cfg.score_gate);
    let lo = trimmed.offset;
    let hi = trimmed.offset + trimmed.len();
    let mut wrist_dx = Vec::new();
    let mut wrist_dy = Vec::new();
    let mut wrist_dist = Vec::new();
    for i in (lo + 1)..hi {
        if wrist.valid[i] {
            wrist_dx.push(wrist.dx[i]);
            wrist_dy.push(wrist.dy[i]);
            wrist_dist.push(wrist.dist[i]);
        }
    }

    let input = AssemblyInput {
        speed,
        accel,
        taps,
        wrist_dx,
        wrist_dy,
        wrist_dist,
        aperiodicity: spectral,
        pauses,
    };
    let features = assemble_feature_vector(
        &rec.video_id,
        &rec.participant_id,
        rec.hand,
        &input,
        cfg.entropy_bins,
    )?;
    Ok(ExtractedRecording {
        features,
        trace,
        n_peaks: detected.peak_indices.len(),
        taps_valid: seg.valid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{feature_index, N_FEATURES};
    use crate::ingest::{HandObservation, Handedness, LandmarkFrame, HAND_POINTS};
    use approx::assert_relative_eq;

    /// Builds a recording whose angle follows `angles` exactly: thumb tip
    /// fixed on the x axis, index fingertip rotated by the target angle.
    /// A negative angle encodes a dropped frame (no hands).
    fn recording_from_angles(angles: &[f64], fps: f64) -> VideoRecording {
        let frames = angles
            .iter()
            .enumerate()
            .map(|(i, &deg)| {
                let hands = if deg < 0.0 {
                    vec![]
                } else {
                    let rad = deg.to_radians();
                    let mut points = vec![[0.45, 0.45]; HAND_POINTS];
                    points[crate::ingest::WRIST] = [0.5, 0.5];
                    points[crate::ingest::THUMB_CMC] = [0.5, 0.42];
                    points[crate::ingest::THUMB_TIP] = [0.5 + 0.2, 0.5];
                    points[crate::ingest::INDEX_TIP] =
                        [0.5 + 0.25 * rad.cos(), 0.5 + 0.25 * rad.sin()];
                    vec![HandObservation {
                        label: Handedness::Left,
                        score: 0.97,
                        points,
                    }]
                };
                LandmarkFrame {
                    frame_index: i as u64,
                    timestamp_s: i as f64 / fps,
                    hands,
                }
            })
            .collect();
        VideoRecording {
            video_id: "vtest".into(),
            participant_id: "ptest".into(),
            hand: Handedness::Left,
            frames,
            fps,
        }
    }

    /// Triangle-wave tap train: `n_taps` ramps of `half` frames up and
    /// `half` frames down between 5 and 65 degrees.
    fn tapping_angles(n_taps: usize, half: usize) -> Vec<f64> {
        let mut angles = Vec::new();
        for _ in 0..n_taps {
            for k in 0..half {
                angles.push(5.0 + 60.0 * (k as f64) / half as f64);
            }
            for k in 0..half {
                angles.push(65.0 - 60.0 * (k as f64) / half as f64);
            }
        }
        angles.push(5.0);
        angles
    }

    #[test]
    fn clean_tap_train_fills_every_slot() {
        let rec = recording_from_angles(&tapping_angles(8, 6), 30.0);
        let out = extract_recording(&rec, &SignalConfig::default()).unwrap();
        assert!(out.taps_valid);
        assert_eq!(out.n_peaks, 8);
        assert_eq!(out.features.values.len(), N_FEATURES);
        // 8 peaks, first and last trimmed -> 6 amplitudes.
        let total = out.features.values[feature_index("total_taps").unwrap()];
        assert_relative_eq!(total, 6.0, epsilon = 1e-12);
        // Period: 12 frames at 30 fps.
        let pm = out.features.values[feature_index("period_median").unwrap()];
        assert_relative_eq!(pm, 0.4, epsilon = 1e-9);
        // Amplitude: peaks at 65 degrees.
        let am = out.features.values[feature_index("amplitude_max").unwrap()];
        assert_relative_eq!(am, 65.0, epsilon = 1e-6);
        // The wrist never moves in this construction.
        let wd = out.features.values[feature_index("wrist_dist_max").unwrap()];
        assert_relative_eq!(wd, 0.0, epsilon = 1e-12);
        // No NaN anywhere: every slot is supported.
        for (j, v) in out.features.values.iter().enumerate() {
            assert!(!v.is_nan(), "slot {j} is NaN");
        }
    }

    #[test]
    fn too_few_taps_leaves_tap_slots_nan_but_keeps_kinematics() {
        let rec = recording_from_angles(&tapping_angles(2, 6), 30.0);
        let out = extract_recording(&rec, &SignalConfig::default()).unwrap();
        assert!(!out.taps_valid);
        let v = &out.features.values;
        assert!(v[feature_index("period_median").unwrap()].is_nan());
        assert!(v[feature_index("total_taps").unwrap()].is_nan());
        assert!(!v[feature_index("speed_median").unwrap()].is_nan());
        assert!(!v[feature_index("aperiodicity").unwrap()].is_nan());
    }

    #[test]
    fn dropouts_are_repaired_and_traced() {
        let mut angles = tapping_angles(8, 6);
        angles[20] = -1.0;
        angles[21] = -1.0;
        let rec = recording_from_angles(&angles, 30.0);
        let out = extract_recording(&rec, &SignalConfig::default()).unwrap();
        assert!(out.trace.rows[20].is_interpolated);
        assert!(out.trace.rows[21].is_interpolated);
        assert!(!out.trace.rows[20].angle.is_nan());
        assert!(out.taps_valid, "repair keeps the tap train usable");
        assert_eq!(out.trace.rows.len(), rec.frames.len());
        assert_eq!(
            out.trace.rows.iter().filter(|r| r.is_peak).count(),
            out.n_peaks
        );
    }

    #[test]
    fn fully_missing_recording_is_an_error() {
        let rec = recording_from_angles(&[-1.0, -1.0, -1.0, -1.0], 30.0);
        let err = extract_recording(&rec, &SignalConfig::default()).unwrap_err();
        assert!(err.to_string().contains("vtest"), "{err}");
    }

    #[test]
    fn trace_csv_has_one_row_per_frame() {
        let rec = recording_from_angles(&tapping_angles(5, 6), 30.0);
        let out = extract_recording(&rec, &SignalConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        out.trace.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + rec.frames.len());
        assert!(text.starts_with("frame,angle,is_interpolated,is_peak"));
    }
}
