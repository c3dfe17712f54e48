//! Synthetic finger-tapping recordings with known ground truth.
//!
//! Real exam footage cannot ship with the code, so verification runs on
//! generated landmark streams whose analytic properties (tap times,
//! amplitudes, freezes) are known exactly. The angle waveform is a train
//! of raised-cosine bumps above a resting angle; each bump's apex lands
//! exactly on a frame, so the programmed amplitude is readable off the
//! signal without interpolation error. Period rounding to whole frames
//! uses error diffusion, keeping the mean period on target even when
//! `fps / frequency` is not an integer.
//!
//! Everything is driven by one counter-seeded generator per recording:
//! identical parameters give byte-identical landmark files on any
//! platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{
    HandObservation, Handedness, LandmarkFrame, VideoRecording, HAND_POINTS, INDEX_TIP,
    THUMB_CMC, THUMB_TIP, WRIST,
};

/// Resting angle between taps, degrees.
const REST_ANGLE_DEG: f64 = 3.0;
/// Distance of the index fingertip from the wrist, normalized units.
const INDEX_RADIUS: f64 = 0.22;
/// Baseline-quality detection scores are drawn from this range; always
/// above the 0.9 gate, so clean recordings never lose frames to it.
const SCORE_RANGE: (f64, f64) = (0.93, 0.99);

/// Knobs of one synthetic recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    /// Number of tap bumps.
    pub taps: usize,
    /// Peak angle of the first tap, degrees.
    pub base_amplitude_deg: f64,
    /// Programmed tapping rate, Hz.
    pub base_frequency_hz: f64,
    /// Amplitude lost per successive tap, degrees.
    pub amplitude_decrement_per_tap_deg: f64,
    /// Uniform per-tap period perturbation, as a fraction of the base
    /// period. Also scales a small wrist sway so irregular tappers move
    /// their hand more.
    pub period_jitter_frac: f64,
    /// `(after_tap, duration_s)`: hold the resting angle for a while
    /// after the given tap index completes.
    pub freeze_events: Vec<(usize, f64)>,
    /// Fraction of frames whose hand detection is dropped entirely.
    pub dropout_frac: f64,
    pub fps: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            taps: 10,
            base_amplitude_deg: 60.0,
            base_frequency_hz: 2.0,
            amplitude_decrement_per_tap_deg: 0.0,
            period_jitter_frac: 0.0,
            freeze_events: Vec::new(),
            dropout_frac: 0.0,
            fps: 30.0,
            seed: 0,
        }
    }
}

impl SynthParams {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        if self.taps < 1 {
            return bad("need at least 1 tap".into());
        }
        if !(self.base_frequency_hz > 0.0) {
            return bad(format!("frequency must be positive: {}", self.base_frequency_hz));
        }
        if !(self.base_amplitude_deg > 0.0 && self.base_amplitude_deg <= 180.0) {
            return bad(format!(
                "amplitude {} outside (0, 180]",
                self.base_amplitude_deg
            ));
        }
        if self.base_amplitude_deg <= REST_ANGLE_DEG + 1.0 {
            return bad(format!(
                "amplitude {} does not clear the {REST_ANGLE_DEG} degree resting angle",
                self.base_amplitude_deg
            ));
        }
        if self.amplitude_decrement_per_tap_deg < 0.0 {
            return bad("amplitude decrement cannot be negative".into());
        }
        if !(0.0..=0.5).contains(&self.period_jitter_frac) {
            return bad(format!("period jitter {} outside [0, 0.5]", self.period_jitter_frac));
        }
        if !(0.0..=0.5).contains(&self.dropout_frac) {
            return bad(format!("dropout {} outside [0, 0.5]", self.dropout_frac));
        }
        if !(5.0..=240.0).contains(&self.fps) {
            return bad(format!("fps {} outside [5, 240]", self.fps));
        }
        for &(after_tap, dur) in &self.freeze_events {
            if after_tap >= self.taps {
                return bad(format!(
                    "freeze after tap {after_tap} but only {} taps exist",
                    self.taps
                ));
            }
            if !(0.0..=10.0).contains(&dur) {
                return bad(format!("freeze duration {dur} outside [0, 10] s"));
            }
        }
        Ok(())
    }
}

/// Analytic truths of a generated recording, for oracle-based checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingOracle {
    /// Frame index of each tap apex.
    pub apex_frames: Vec<u64>,
    /// Time between consecutive apexes, seconds.
    pub periods_s: Vec<f64>,
    /// Programmed apex angle per tap, degrees.
    pub amplitudes_deg: Vec<f64>,
    /// Realized (frame-quantized) freeze lengths, seconds.
    pub freeze_durations_s: Vec<f64>,
    pub base_frequency_hz: f64,
    pub fps: f64,
}

/// Generates one landmark recording plus its analytic ground truth.
pub fn generate_recording(
    video_id: &str,
    participant_id: &str,
    hand: Handedness,
    params: &SynthParams,
) -> Result<(VideoRecording, RecordingOracle)> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let fps = params.fps;

    // Angle waveform first: rest, bumps with frozen holds, rest.
    let lead = ((0.25 * fps).ceil() as usize).max(2);
    let mut angles: Vec<f64> = vec![REST_ANGLE_DEG; lead];
    let mut apex_frames = Vec::with_capacity(params.taps);
    let mut amplitudes = Vec::with_capacity(params.taps);
    let mut freeze_durations = Vec::new();
    let base_frames = fps / params.base_frequency_hz;
    let mut carry = 0.0;
    for i in 0..params.taps {
        let u: f64 = rng.gen_range(-1.0..1.0);
        let target = base_frames * (1.0 + params.period_jitter_frac * u) + carry;
        let frames = (target.round() as i64).max(4) as usize;
        carry = target - frames as f64;

        let apex = params.base_amplitude_deg
            - params.amplitude_decrement_per_tap_deg * i as f64;
        let apex = apex.max(REST_ANGLE_DEG + 1.0);
        let height = apex - REST_ANGLE_DEG;
        let rise = frames / 2;
        let fall = frames - rise;
        apex_frames.push((angles.len() + rise) as u64);
        amplitudes.push(apex);
        for k in 0..frames {
            let v = if k <= rise {
                REST_ANGLE_DEG
                    + height * (1.0 - (std::f64::consts::PI * k as f64 / rise as f64).cos()) / 2.0
            } else {
                REST_ANGLE_DEG
                    + height
                        * (1.0
                            + (std::f64::consts::PI * (k - rise) as f64 / fall as f64).cos())
                        / 2.0
            };
            angles.push(v);
        }
        for &(after_tap, dur) in &params.freeze_events {
            if after_tap == i {
                let hold = ((dur * fps).round() as i64).max(1) as usize;
                freeze_durations.push(hold as f64 / fps);
                angles.extend(std::iter::repeat(REST_ANGLE_DEG).take(hold));
            }
        }
    }
    angles.extend(std::iter::repeat(REST_ANGLE_DEG).take(lead));

    // Landmarks second: a rigid hand whose index finger realizes the
    // angle, riding on a gentle wrist sway plus per-frame tremor noise.
    let sway = 0.002 + 0.02 * params.period_jitter_frac;
    let tremor = Normal::new(0.0, 0.15 * sway)
        .map_err(|e| Error::internal(format!("tremor distribution: {e}")))?;
    let mut frames_out = Vec::with_capacity(angles.len());
    for (i, &deg) in angles.iter().enumerate() {
        let t = i as f64 / fps;
        let dropped = params.dropout_frac > 0.0 && rng.gen::<f64>() < params.dropout_frac;
        let hands = if dropped {
            Vec::new()
        } else {
            let score = rng.gen_range(SCORE_RANGE.0..SCORE_RANGE.1);
            let wx = 0.5
                + sway * (2.0 * std::f64::consts::PI * 0.37 * t).sin()
                + tremor.sample(&mut rng);
            let wy = 0.46
                + 0.8 * sway * (2.0 * std::f64::consts::PI * 0.29 * t + 1.3).sin()
                + tremor.sample(&mut rng);
            let rad = deg.to_radians();
            let mut points = Vec::with_capacity(HAND_POINTS);
            for j in 0..HAND_POINTS {
                points.push([
                    wx - 0.03 + 0.012 * (j % 5) as f64,
                    wy - 0.10 + 0.011 * (j / 5) as f64,
                ]);
            }
            points[WRIST] = [wx, wy];
            points[THUMB_CMC] = [wx, wy - 0.08];
            points[THUMB_TIP] = [wx + 0.20, wy];
            points[INDEX_TIP] = [wx + INDEX_RADIUS * rad.cos(), wy + INDEX_RADIUS * rad.sin()];
            vec![HandObservation {
                label: hand,
                score,
                points,
            }]
        };
        frames_out.push(LandmarkFrame {
            frame_index: i as u64,
            timestamp_s: t,
            hands,
        });
    }

    let periods_s = apex_frames
        .windows(2)
        .map(|w| (w[1] - w[0]) as f64 / fps)
        .collect();
    Ok((
        VideoRecording {
            video_id: video_id.to_string(),
            participant_id: participant_id.to_string(),
            hand,
            frames: frames_out,
            fps,
        },
        RecordingOracle {
            apex_frames,
            periods_s,
            amplitudes_deg: amplitudes,
            freeze_durations_s: freeze_durations,
            base_frequency_hz: params.base_frequency_hz,
            fps,
        },
    ))
}

/// Impairment preset per severity grade: slower, smaller, more irregular
/// tapping as the grade climbs, with hesitations from grade 2 on.
fn grade_preset(grade: u8) -> SynthParams {
    let (freq, amp, dec, jitter, dropout, taps, freezes): (
        f64,
        f64,
        f64,
        f64,
        f64,
        usize,
        Vec<(usize, f64)>,
    ) = match grade {
        0 => (3.0, 85.0, 0.0, 0.02, 0.00, 16, vec![]),
        1 => (2.6, 70.0, 0.8, 0.06, 0.01, 14, vec![]),
        2 => (2.1, 55.0, 1.6, 0.12, 0.02, 12, vec![(5, 0.35)]),
        3 => (1.6, 40.0, 2.5, 0.20, 0.04, 10, vec![(3, 0.5), (6, 0.4)]),
        _ => (1.1, 26.0, 3.5, 0.30, 0.07, 8, vec![(2, 0.7), (4, 0.6), (6, 0.5)]),
    };
    SynthParams {
        taps,
        base_amplitude_deg: amp,
        base_frequency_hz: freq,
        amplitude_decrement_per_tap_deg: dec,
        period_jitter_frac: jitter,
        freeze_events: freezes,
        dropout_frac: dropout,
        fps: 30.0,
        seed: 0,
    }
}

/// One generated recording with its severity label and analytic truth.
#[derive(Debug, Clone)]
pub struct LabeledRecording {
    pub recording: VideoRecording,
    pub label: u8,
    pub oracle: RecordingOracle,
}

/// Generates `n_participants` synthetic participants, two recordings
/// (left and right hand) each. Grades 0-4 rotate over participants, so
/// any multiple of 5 yields exactly balanced classes. Within a grade,
/// frequency and amplitude vary a few percent per hand; the grade
/// ordering of those parameters is preserved for every seed because the
/// preset gaps exceed the variation range.
pub fn severity_grade_dataset(n_participants: usize, seed: u64) -> Result<Vec<LabeledRecording>> {
    if n_participants < 3 {
        return Err(Error::invalid(format!(
            "need at least 3 participants, got {n_participants}"
        )));
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_participants * 2);
    for i in 0..n_participants {
        let grade = (i % 5) as u8;
        let pid = format!("sp{:04}", i + 1);
        for hand in [Handedness::Left, Handedness::Right] {
            let u_freq: f64 = master.gen_range(-1.0..1.0);
            let u_amp: f64 = master.gen_range(-1.0..1.0);
            let extra_taps: usize = master.gen_range(0..3);
            let rec_seed: u64 = master.gen();
            let mut params = grade_preset(grade);
            params.base_frequency_hz *= 1.0 + 0.05 * u_freq;
            params.base_amplitude_deg *= 1.0 + 0.05 * u_amp;
            params.taps += extra_taps;
            params.seed = rec_seed;
            let letter = match hand {
                Handedness::Left => "L",
                Handedness::Right => "R",
            };
            let video_id = format!("{pid}-{letter}");
            let (recording, oracle) = generate_recording(&video_id, &pid, hand, &params)?;
            out.push(LabeledRecording {
                recording,
                label: grade,
                oracle,
            });
        }
    }
    Ok(out)
}

/// Adds zero-mean Gaussian offsets (std `sigma`, normalized image units)
/// to every landmark coordinate, and lowers each detection score by
/// `8 * sigma * u` (u uniform per hand, floored at 0.5), so the 0.9
/// score gate swallows a growing fraction of frames as sigma rises.
/// `sigma == 0` returns the recording unchanged.
pub fn inject_keypoint_noise(
    rec: &VideoRecording,
    sigma: f64,
    seed: u64,
) -> Result<VideoRecording> {
    if sigma < 0.0 {
        return Err(Error::invalid(format!("sigma must be nonnegative: {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(rec.clone());
    }
    let normal = Normal::new(0.0, sigma)
        .map_err(|e| Error::internal(format!("noise distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = rec.clone();
    for frame in &mut out.frames {
        for hand in &mut frame.hands {
            let u: f64 = rng.gen();
            hand.score = (hand.score - 8.0 * sigma * u).max(0.5);
            for point in &mut hand.points {
                point[0] += normal.sample(&mut rng);
                point[1] += normal.sample(&mut rng);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SignalConfig;
    use crate::features::feature_index;
    use crate::ingest::write_landmark_file;
    use crate::pipeline::extract_recording;
    use approx::assert_relative_eq;

    fn clean_params(taps: usize) -> SynthParams {
        SynthParams {
            taps,
            seed: 5,
            ..SynthParams::default()
        }
    }

    fn feature(values: &[f64], name: &str) -> f64 {
        values[feature_index(name).unwrap()]
    }

    #[test]
    fn clean_taps_are_recovered_exactly() {
        let (rec, oracle) =
            generate_recording("v", "p", Handedness::Left, &clean_params(10)).unwrap();
        let out = extract_recording(&rec, &SignalConfig::default()).unwrap();
        assert_eq!(out.n_peaks, 10, "every programmed tap is one peak");
        assert!(out.taps_valid);
        let v = &out.features.values;
        // Amplitude is exact by construction (apex on a frame).
        assert_relative_eq!(feature(v, "amplitude_median"), 60.0, epsilon = 1.0);
        assert_relative_eq!(feature(v, "amplitude_max"), 60.0, epsilon = 1e-9);
        // Period: 30 fps / 2 Hz = 15 frames, no rounding error.
        assert_relative_eq!(feature(v, "period_mean"), 0.5, epsilon = 0.5 * 0.02);
        assert_eq!(oracle.amplitudes_deg, vec![60.0; 10]);
        assert_eq!(oracle.periods_s.len(), 9);
        for p in &oracle.periods_s {
            assert_relative_eq!(*p, 0.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn mean_period_stays_on_target_despite_frame_rounding() {
        // 30 fps / 2.8 Hz = 10.71 frames: individual periods must round,
        // the running mean must not drift.
        let params = SynthParams {
            taps: 20,
            base_frequency_hz: 2.8,
            seed: 6,
            ..SynthParams::default()
        };
        let (_, oracle) = generate_recording("v", "p", Handedness::Left, &params).unwrap();
        let mean = oracle.periods_s.iter().sum::<f64>() / oracle.periods_s.len() as f64;
        assert_relative_eq!(mean, 1.0 / 2.8, max_relative = 0.02);
    }

    #[test]
    fn amplitude_decrement_flows_through_to_the_feature() {
        let params = SynthParams {
            taps: 10,
            base_amplitude_deg: 70.0,
            amplitude_decrement_per_tap_deg: 2.0,
            seed: 8,
            ..SynthParams::default()
        };
        let (rec, _) = generate_recording("v", "p", Handedness::Left, &params).unwrap();
        let out = extract_recording(&rec, &SignalConfig::default()).unwrap();
        let slope = feature(&out.features.values, "amp_decrement_slope");
        assert_relative_eq!(slope, -2.0, max_relative = 0.1);
    }

    #[test]
    fn freezes_surface_as_freezing_features() {
        let params = SynthParams {
            taps: 10,
            freeze_events: vec![(4, 0.5)],
            seed: 3,
            ..SynthParams::default()
        };
        let (rec, oracle) = generate_recording("v", "p", Handedness::Left, &params).unwrap();
        assert_eq!(oracle.freeze_durations_s.len(), 1);
        assert_relative_eq!(oracle.freeze_durations_s[0], 0.5, epsilon = 1e-9);
        let out = extract_recording(&rec, &SignalConfig::default()).unwrap();
        let v = &out.features.values;
        assert!(feature(v, "n_freezing") >= 1.0);
        assert!(feature(v, "longest_freezing_s") >= 0.4);
    }

    #[test]
    fn byte_identical_per_seed() {
        let params = SynthParams {
            period_jitter_frac: 0.2,
            dropout_frac: 0.1,
            seed: 42,
            ..SynthParams::default()
        };
        let (a, _) = generate_recording("v", "p", Handedness::Right, &params).unwrap();
        let (b, _) = generate_recording("v", "p", Handedness::Right, &params).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let pa = dir.path().join("a.jsonl");
        let pb = dir.path().join("b.jsonl");
        write_landmark_file(&a, &pa).unwrap();
        write_landmark_file(&b, &pb).unwrap();
        assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());

        let other = SynthParams { seed: 43, ..params };
        let (c, _) = generate_recording("v", "p", Handedness::Right, &other).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_params_are_rejected() {
        let base = SynthParams::default();
        for bad in [
            SynthParams { taps: 0, ..base.clone() },
            SynthParams { base_frequency_hz: 0.0, ..base.clone() },
            SynthParams { base_amplitude_deg: 200.0, ..base.clone() },
            SynthParams { base_amplitude_deg: 2.0, ..base.clone() },
            SynthParams { amplitude_decrement_per_tap_deg: -1.0, ..base.clone() },
            SynthParams { dropout_frac: 0.6, ..base.clone() },
            SynthParams { period_jitter_frac: 0.9, ..base.clone() },
            SynthParams { fps: 1.0, ..base.clone() },
            SynthParams { freeze_events: vec![(10, 0.5)], ..base.clone() },
            SynthParams { freeze_events: vec![(1, -0.5)], ..base.clone() },
        ] {
            assert!(
                generate_recording("v", "p", Handedness::Left, &bad).is_err(),
                "{bad:?} should be rejected"
            );
        }
    }

    #[test]
    fn dataset_rotates_grades_and_is_deterministic() {
        let data = severity_grade_dataset(10, 7).unwrap();
        assert_eq!(data.len(), 20);
        for (i, chunk) in data.chunks(2).enumerate() {
            let grade = (i % 5) as u8;
            for rec in chunk {
                assert_eq!(rec.label, grade);
                assert_eq!(rec.recording.participant_id, format!("sp{:04}", i + 1));
            }
            assert_eq!(chunk[0].recording.hand, Handedness::Left);
            assert_eq!(chunk[1].recording.hand, Handedness::Right);
            assert_ne!(chunk[0].recording.video_id, chunk[1].recording.video_id);
        }
        let again = severity_grade_dataset(10, 7).unwrap();
        assert_eq!(data[7].recording, again[7].recording);
        let shifted = severity_grade_dataset(10, 8).unwrap();
        assert_ne!(data[7].recording, shifted[7].recording);
        assert!(severity_grade_dataset(2, 7).is_err());
    }

    #[test]
    fn grade_presets_order_speed_and_amplitude_medians() {
        for seed in [1u64, 99, 4096] {
            // 5 participants -> one per grade, two hands each.
            let data = severity_grade_dataset(5, seed).unwrap();
            let mut speed_medians = vec![Vec::new(); 5];
            let mut amp_medians = vec![Vec::new(); 5];
            for item in &data {
                let out =
                    extract_recording(&item.recording, &SignalConfig::default()).unwrap();
                let v = &out.features.values;
                speed_medians[item.label as usize].push(feature(v, "speed_median"));
                amp_medians[item.label as usize].push(feature(v, "amplitude_median"));
            }
            let median = |xs: &mut Vec<f64>| {
                xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
                xs[xs.len() / 2]
            };
            for grades in [&mut speed_medians, &mut amp_medians] {
                let med: Vec<f64> = grades.iter_mut().map(median).collect();
                for g in 1..5 {
                    assert!(
                        med[g] < med[g - 1],
                        "seed {seed}: grade {g} median {} not below grade {} median {}",
                        med[g],
                        g - 1,
                        med[g - 1]
                    );
                }
            }
        }
    }

    #[test]
    fn zero_sigma_noise_is_identity() {
        let (rec, _) =
            generate_recording("v", "p", Handedness::Left, &clean_params(6)).unwrap();
        let same = inject_keypoint_noise(&rec, 0.0, 99).unwrap();
        assert_eq!(rec, same);
        assert!(inject_keypoint_noise(&rec, -0.1, 99).is_err());
    }

    #[test]
    fn gated_frame_fraction_grows_with_sigma() {
        let (rec, _) =
            generate_recording("v", "p", Handedness::Left, &clean_params(12)).unwrap();
        let gate = SignalConfig::default().score_gate;
        let gated_fraction = |r: &VideoRecording| {
            let lost = r
                .frames
                .iter()
                .filter(|f| !f.hands.iter().any(|h| h.score > gate))
                .count();
            lost as f64 / r.frames.len() as f64
        };
        let mut last = -1.0;
        for sigma in [0.0, 0.005, 0.02] {
            let noisy = inject_keypoint_noise(&rec, sigma, 31).unwrap();
            let frac = gated_fraction(&noisy);
            assert!(
                frac >= last,
                "sigma {sigma}: gated fraction {frac} fell below {last}"
            );
            last = frac;
        }
        assert!(last > 0.0, "highest sigma should gate something");
        assert!(last < 1.0, "some frames must survive the highest sigma");
    }

    #[test]
    fn noisy_recording_still_extracts_features() {
        let (rec, _) =
            generate_recording("v", "p", Handedness::Left, &clean_params(14)).unwrap();
        let noisy = inject_keypoint_noise(&rec, 0.02, 17).unwrap();
        let clean_out = extract_recording(&rec, &SignalConfig::default()).unwrap();
        let noisy_out = extract_recording(&noisy, &SignalConfig::default()).unwrap();
        let name = "speed_median";
        let a = feature(&clean_out.features.values, name);
        let b = feature(&noisy_out.features.values, name);
        assert!(a.is_finite() && b.is_finite());
        assert_ne!(a, b, "positional noise must perturb the measurement");
    }
}
