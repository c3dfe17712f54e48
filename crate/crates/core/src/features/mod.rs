//! Feature extraction from a cleaned tapping-angle series.
//!
//! Inputs here are assumed sentinel-free: the pipeline interpolates and
//! windows the raw series before any of these run. Outputs feed the fixed
//! 65-entry catalog in [`catalog`]; assembly fills slots that cannot be
//! computed (too few taps, no valid wrist deltas, short clip) with NaN
//! rather than failing, because a near-frozen severe recording genuinely
//! produces few taps and the model treats NaN as "missing".

pub mod catalog;
pub mod table;

pub use catalog::{feature_index, CATALOG_VERSION, FEATURE_NAMES, N_FEATURES};
pub use table::{FeatureRowMeta, FeatureTable};

use crate::config::SignalConfig;
use crate::error::{Error, Result};
use crate::ingest::Handedness;
use crate::signal::{AngleSeries, TapSegmentation};
use crate::stats::percentile_sorted;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Per-frame angular speed and acceleration, both in degrees per second
/// (acceleration uses the same first-difference-times-fps form applied to
/// speed, so its units are deg/s per frame-step scaled by fps).
///
/// `speed[i]` covers the step into frame `i + 1`; `accel[i]` the step into
/// speed sample `i + 1`. Needs at least 3 frames.
pub fn per_frame_kinematics(series: &AngleSeries) -> Result<(Vec<f64>, Vec<f64>)> {
    let v = &series.values;
    if v.len() < 3 {
        return Err(Error::invalid(format!(
            "kinematics need at least 3 frames, got {}",
            v.len()
        )));
    }
    debug_assert!(v.iter().all(|x| *x >= 0.0), "sentinel leaked into kinematics");
    let fps = series.fps;
    let speed: Vec<f64> = v.windows(2).map(|w| (w[1] - w[0]).abs() * fps).collect();
    let accel: Vec<f64> = speed
        .windows(2)
        .map(|w| (w[1] - w[0]).abs() * fps)
        .collect();
    Ok((speed, accel))
}

/// Tap-cycle metrics read off the detected peaks.
///
/// With k peaks there are k - 1 periods and frequencies (one per adjacent
/// peak pair) and k amplitudes (the angle value at every peak).
#[derive(Debug, Clone, PartialEq)]
pub struct TapMetrics {
    pub periods_s: Vec<f64>,
    pub frequencies_hz: Vec<f64>,
    pub amplitudes_deg: Vec<f64>,
}

/// Computes per-tap metrics from a segmentation over `series`.
///
/// Requires at least 2 peaks; the segmentation's peak indices must be valid
/// positions in `series.values`.
pub fn per_tap_metrics(series: &AngleSeries, seg: &TapSegmentation) -> Result<TapMetrics> {
    let peaks = &seg.peak_indices;
    if peaks.len() < 2 {
        return Err(Error::invalid(format!(
            "per-tap metrics need at least 2 peaks, got {}",
            peaks.len()
        )));
    }
    let t_frame = series.t_frame();
    let periods_s: Vec<f64> = peaks
        .windows(2)
        .map(|w| (w[1] - w[0]) as f64 * t_frame)
        .collect();
    let frequencies_hz: Vec<f64> = periods_s.iter().map(|p| 1.0 / p).collect();
    let amplitudes_deg: Vec<f64> = peaks.iter().map(|&i| series.values[i]).collect();
    Ok(TapMetrics {
        periods_s,
        frequencies_hz,
        amplitudes_deg,
    })
}

/// The seven-number summary used for distribution-shaped features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregates {
    pub median: f64,
    pub iqr: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub std: f64,
    pub entropy: f64,
}

/// Summarizes a sample: median, interquartile range, mean, min, max,
/// population standard deviation, and Shannon entropy of a 16-bin
/// histogram. Errors on empty input; NaN entries are rejected upstream.
pub fn aggregate_stats(values: &[f64], entropy_bins: usize) -> Result<Aggregates> {
    if values.is_empty() {
        return Err(Error::invalid("aggregate_stats on empty input"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN in aggregate input"));
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Ok(Aggregates {
        median: percentile_sorted(&sorted, 0.5),
        iqr: percentile_sorted(&sorted, 0.75) - percentile_sorted(&sorted, 0.25),
        mean,
        min: sorted[0],
        max: *sorted.last().unwrap(),
        std: var.sqrt(),
        entropy: shannon_entropy(values, entropy_bins),
    })
}

/// Shannon entropy (natural log) of an equal-width histogram over
/// `[min, max]`. Degenerate inputs (empty, or all values equal) carry no
/// spread information and yield 0.
pub fn shannon_entropy(values: &[f64], bins: usize) -> f64 {
    assert!(bins >= 1, "entropy needs at least one bin");
    if values.is_empty() {
        return 0.0;
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return 0.0;
    }
    let mut counts = vec![0u64; bins];
    let width = max - min;
    for &v in values {
        let idx = (((v - min) / width) * bins as f64).floor() as usize;
        counts[idx.min(bins - 1)] += 1;
    }
    let n = values.len() as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

/// Spectral flatness of the tapping rhythm, as the entropy of the
/// normalized DFT power spectrum (DC excluded, bins 1..=n/2).
///
/// A clean periodic signal concentrates power in one bin (entropy near 0);
/// irregular tapping spreads it out. Requires at least 8 samples. A
/// constant signal has an empty spectrum and scores 0.
pub fn aperiodicity(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 8 {
        return Err(Error::invalid(format!("aperiodicity needs at least 8 samples, got {n}")));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = values
        .iter()
        .map(|&v| Complex::new(v - mean, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let power: Vec<f64> = buf[1..=n / 2].iter().map(|c| c.norm_sqr()).collect();
    let total: f64 = power.iter().sum();
    if total <= 0.0 {
        return Ok(0.0);
    }
    Ok(-power
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| {
            let q = p / total;
            q * q.ln()
        })
        .sum::<f64>())
}

/// Counts of low-speed episodes.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PauseStats {
    /// Runs of sub-threshold speed lasting at least the interruption
    /// minimum.
    pub n_interruptions: usize,
    /// Runs lasting strictly longer than the freezing minimum.
    pub n_freezing: usize,
    /// Duration of the longest freezing run, in seconds (0 when none).
    pub longest_freezing_s: f64,
}

/// Scans the per-frame speed trace for pauses.
///
/// A pause is a maximal run of frames with speed strictly below
/// `speed_floor_deg_s`; its duration is run length times the frame period.
/// Runs of at least `interruption_min_s` count as interruptions, and runs
/// strictly longer than `freezing_min_s` count as freezing episodes, so
/// with the default thresholds every freeze is also an interruption.
pub fn pause_stats(speed: &[f64], fps: f64, cfg: &SignalConfig) -> PauseStats {
    let t_frame = 1.0 / fps;
    let mut n_interruptions = 0usize;
    let mut n_freezing = 0usize;
    let mut longest = 0.0f64;
    let mut run = 0usize;
    for i in 0..=speed.len() {
        let below = i < speed.len() && speed[i] < cfg.speed_floor_deg_s;
        if below {
            run += 1;
            continue;
        }
        if run > 0 {
            let dur = run as f64 * t_frame;
            if dur >= cfg.interruption_min_s {
                n_interruptions += 1;
            }
            if dur > cfg.freezing_min_s {
                n_freezing += 1;
                longest = longest.max(dur);
            }
            run = 0;
        }
    }
    PauseStats {
        n_interruptions,
        n_freezing,
        longest_freezing_s: longest,
    }
}

/// Ordinary least-squares fit of tap period against tap index, reported as
/// (r-squared, slope in seconds per tap).
///
/// Fewer than 3 periods give (NaN, NaN); perfectly constant periods fit a
/// flat line exactly, (1.0, 0.0).
pub fn period_linearity(periods_s: &[f64]) -> (f64, f64) {
    let k = periods_s.len();
    if k < 3 {
        return (f64::NAN, f64::NAN);
    }
    let n = k as f64;
    let mean_x = (n - 1.0) / 2.0;
    let mean_y = periods_s.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (i, &y) in periods_s.iter().enumerate() {
        let dx = i as f64 - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if syy <= 0.0 {
        return (1.0, 0.0);
    }
    let slope = sxy / sxx;
    let r2 = (sxy * sxy) / (sxx * syy);
    (r2, slope)
}

/// Lowest polynomial degree (1..=min(10, k-1)) whose least-squares fit of
/// period against tap index reaches R-squared >= 0.9; 11 when no degree in
/// range manages it.
///
/// Constant periods are degree-1-perfect and score 1. Fewer than 3 periods
/// give NaN. Tap indices are rescaled to [-1, 1] before building the
/// Vandermonde system so high degrees stay numerically tame.
pub fn period_fit_complexity(periods_s: &[f64]) -> f64 {
    const R2_THRESHOLD: f64 = 0.9;
    let k = periods_s.len();
    if k < 3 {
        return f64::NAN;
    }
    let n = k as f64;
    let mean_y = periods_s.iter().sum::<f64>() / n;
    let ss_tot: f64 = periods_s.iter().map(|y| (y - mean_y).powi(2)).sum();
    if ss_tot <= 0.0 {
        return 1.0;
    }
    // x rescaled to [-1, 1].
    let xs: Vec<f64> = (0..k)
        .map(|i| 2.0 * i as f64 / (n - 1.0) - 1.0)
        .collect();
    let y = nalgebra::DVector::from_column_slice(periods_s);
    let max_degree = 10.min(k - 1);
    for degree in 1..=max_degree {
        let design = nalgebra::DMatrix::from_fn(k, degree + 1, |r, c| xs[r].powi(c as i32));
        let svd = design.svd(true, true);
        let coef = match svd.solve(&y, 1e-12) {
            Ok(c) => c,
            Err(_) => continue,
        };
        let ss_res: f64 = (0..k)
            .map(|r| {
                let fit: f64 = (0..=degree).map(|c| coef[c] * xs[r].powi(c as i32)).sum();
                (periods_s[r] - fit).powi(2)
            })
            .sum();
        if 1.0 - ss_res / ss_tot >= R2_THRESHOLD {
            return degree as f64;
        }
    }
    11.0
}

/// Amplitude decrement summary: (last minus mean, last minus first, OLS
/// slope of amplitude against tap index). Negative values mean the motion
/// is shrinking. Fewer than 3 amplitudes give NaNs.
pub fn amplitude_decrement(amplitudes_deg: &[f64]) -> (f64, f64, f64) {
    let k = amplitudes_deg.len();
    if k < 3 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let n = k as f64;
    let mean = amplitudes_deg.iter().sum::<f64>() / n;
    let last = *amplitudes_deg.last().unwrap();
    let first = amplitudes_deg[0];
    let mean_x = (n - 1.0) / 2.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (i, &a) in amplitudes_deg.iter().enumerate() {
        let dx = i as f64 - mean_x;
        sxx += dx * dx;
        sxy += dx * (a - mean);
    }
    (last - mean, last - first, sxy / sxx)
}

/// Everything assembly needs, already computed by the pipeline. Optional
/// pieces are None when the recording could not support them.
#[derive(Debug, Clone)]
pub struct AssemblyInput {
    pub speed: Option<Vec<f64>>,
    pub accel: Option<Vec<f64>>,
    pub taps: Option<TapMetrics>,
    pub wrist_dx: Vec<f64>,
    pub wrist_dy: Vec<f64>,
    pub wrist_dist: Vec<f64>,
    pub aperiodicity: Option<f64>,
    pub pauses: Option<PauseStats>,
}

/// One extracted recording: identity plus the 65 catalog values.
#[derive(Debug, Clone)]
pub struct FeatureVector {
    pub video_id: String,
    pub participant_id: String,
    pub hand: Handedness,
    pub values: Vec<f64>,
}

/// Maps computed signal properties into the canonical 65-slot layout.
///
/// Missing pieces become NaN in their slots. Panics (debug assert) if the
/// slot count drifts from the catalog; that would be a programming error.
pub fn assemble_feature_vector(
    video_id: &str,
    participant_id: &str,
    hand: Handedness,
    input: &AssemblyInput,
    entropy_bins: usize,
) -> Result<FeatureVector> {
    let nan7 = [f64::NAN; 7];
    let agg7 = |vals: Option<&[f64]>| -> Result<[f64; 7]> {
        match vals {
            Some(v) if !v.is_empty() => {
                let a = aggregate_stats(v, entropy_bins)?;
                Ok([a.median, a.iqr, a.mean, a.min, a.max, a.std, a.entropy])
            }
            _ => Ok(nan7),
        }
    };
    let agg6 = |vals: &[f64]| -> Result<[f64; 6]> {
        if vals.is_empty() {
            return Ok([f64::NAN; 6]);
        }
        let a = aggregate_stats(vals, entropy_bins)?;
        Ok([a.median, a.iqr, a.mean, a.min, a.max, a.std])
    };

    let mut values = Vec::with_capacity(N_FEATURES);
    values.extend(agg7(input.speed.as_deref())?);
    values.extend(agg7(input.accel.as_deref())?);
    let (periods, freqs, amps) = match &input.taps {
        Some(t) => (
            Some(t.periods_s.as_slice()),
            Some(t.frequencies_hz.as_slice()),
            Some(t.amplitudes_deg.as_slice()),
        ),
        None => (None, None, None),
    };
    values.extend(agg7(periods)?);
    values.extend(agg7(freqs)?);
    values.extend(agg7(amps)?);
    values.extend(agg6(&input.wrist_dx)?);
    values.extend(agg6(&input.wrist_dy)?);
    values.extend(agg6(&input.wrist_dist)?);

    values.push(input.aperiodicity.unwrap_or(f64::NAN));
    match &input.pauses {
        Some(p) => {
            values.push(p.n_interruptions as f64);
            values.push(p.n_freezing as f64);
            values.push(p.longest_freezing_s);
        }
        None => values.extend([f64::NAN; 3]),
    }

    let (r2, lin_slope) = periods.map(period_linearity).unwrap_or((f64::NAN, f64::NAN));
    values.push(r2);
    values.push(lin_slope);
    values.push(periods.map(period_fit_complexity).unwrap_or(f64::NAN));
    let (dec_mean, dec_first, dec_slope) = amps
        .map(amplitude_decrement)
        .unwrap_or((f64::NAN, f64::NAN, f64::NAN));
    values.push(dec_mean);
    values.push(dec_first);
    values.push(dec_slope);
    // Normalized period variance: population variance over mean period.
    let pvar = match periods {
        Some(p) if !p.is_empty() => {
            let n = p.len() as f64;
            let m = p.iter().sum::<f64>() / n;
            let var = p.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
            if m > 0.0 {
                var / m
            } else {
                f64::NAN
            }
        }
        _ => f64::NAN,
    };
    values.push(pvar);
    values.push(amps.map(|a| a.len() as f64).unwrap_or(f64::NAN));

    debug_assert_eq!(values.len(), N_FEATURES);
    if values.len() != N_FEATURES {
        return Err(Error::internal(format!(
            "assembled {} feature values, catalog has {}",
            values.len(),
            N_FEATURES
        )));
    }
    Ok(FeatureVector {
        video_id: video_id.to_string(),
        participant_id: participant_id.to_string(),
        hand,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn series(values: Vec<f64>, fps: f64) -> AngleSeries {
        let n = values.len();
        AngleSeries {
            values,
            interpolated: vec![false; n],
            fps,
            offset: 0,
        }
    }

    #[test]
    fn kinematics_first_differences_scaled_by_fps() {
        // 30 fps, angles 10, 12, 15, 11: speeds |2|,|3|,|4| * 30.
        let s = series(vec![10.0, 12.0, 15.0, 11.0], 30.0);
        let (speed, accel) = per_frame_kinematics(&s).unwrap();
        assert_eq!(speed, vec![60.0, 90.0, 120.0]);
        assert_eq!(accel, vec![900.0, 900.0]);
    }

    #[test]
    fn kinematics_reject_too_short() {
        let s = series(vec![10.0, 12.0], 30.0);
        assert!(per_frame_kinematics(&s).is_err());
    }

    #[test]
    fn per_tap_metrics_match_worked_example() {
        // Peaks at frames 10, 40, 70 at 30 fps: periods 1 s each,
        // frequency 1 Hz, amplitudes are the raw peak angles.
        let mut v = vec![20.0; 80];
        v[10] = 60.0;
        v[40] = 55.0;
        v[70] = 50.0;
        let s = series(v, 30.0);
        let seg = TapSegmentation {
            peak_indices: vec![10, 40, 70],
            analysis_window: (0, 80),
            valid: true,
        };
        let m = per_tap_metrics(&s, &seg).unwrap();
        assert_eq!(m.periods_s, vec![1.0, 1.0]);
        assert_eq!(m.frequencies_hz, vec![1.0, 1.0]);
        assert_eq!(m.amplitudes_deg, vec![60.0, 55.0, 50.0]);
    }

    #[test]
    fn per_tap_metrics_need_two_peaks() {
        let s = series(vec![1.0; 10], 30.0);
        let seg = TapSegmentation {
            peak_indices: vec![4],
            analysis_window: (0, 10),
            valid: false,
        };
        assert!(per_tap_metrics(&s, &seg).is_err());
    }

    #[test]
    fn entropy_uniform_spread_hits_ln_bins() {
        // One value per bin: 16 values 0.5, 1.5, ..., 15.5 over [0.5, 15.5].
        let vals: Vec<f64> = (0..16).map(|i| i as f64 + 0.5).collect();
        assert_relative_eq!(shannon_entropy(&vals, 16), (16.0f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn entropy_degenerate_and_constant_are_zero() {
        assert_eq!(shannon_entropy(&[], 16), 0.0);
        assert_eq!(shannon_entropy(&[3.0, 3.0, 3.0], 16), 0.0);
        assert_eq!(shannon_entropy(&[5.0], 16), 0.0);
    }

    #[test]
    fn aggregates_on_known_sample() {
        // 1..=9: median 5, q1 3, q3 7, mean 5, population std sqrt(60/9).
        let vals: Vec<f64> = (1..=9).map(f64::from).collect();
        let a = aggregate_stats(&vals, 16).unwrap();
        assert_eq!(a.median, 5.0);
        assert_eq!(a.iqr, 4.0);
        assert_eq!(a.mean, 5.0);
        assert_eq!(a.min, 1.0);
        assert_eq!(a.max, 9.0);
        assert_relative_eq!(a.std, (60.0f64 / 9.0).sqrt(), epsilon = 1e-12);
    }

    /// Naive O(n^2) DFT used only to cross-check the fft-backed spectrum.
    fn naive_power_spectrum(values: &[f64]) -> Vec<f64> {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        (1..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0f64, 0.0f64);
                for (t, &v) in values.iter().enumerate() {
                    let phase = -2.0 * std::f64::consts::PI * k as f64 * t as f64 / n as f64;
                    re += (v - mean) * phase.cos();
                    im += (v - mean) * phase.sin();
                }
                re * re + im * im
            })
            .collect()
    }

    fn entropy_of_power(power: &[f64]) -> f64 {
        let total: f64 = power.iter().sum();
        if total <= 0.0 {
            return 0.0;
        }
        -power
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| {
                let q = p / total;
                q * q.ln()
            })
            .sum::<f64>()
    }

    #[test]
    fn aperiodicity_matches_naive_dft() {
        // Mix of two tones plus a drift; n = 96 (not a power of two).
        let vals: Vec<f64> = (0..96)
            .map(|i| {
                let t = i as f64;
                30.0 + 20.0 * (0.4 * t).sin() + 7.0 * (1.3 * t).cos() + 0.05 * t
            })
            .collect();
        let via_fft = aperiodicity(&vals).unwrap();
        let via_naive = entropy_of_power(&naive_power_spectrum(&vals));
        assert_relative_eq!(via_fft, via_naive, epsilon = 1e-8);
    }

    #[test]
    fn aperiodicity_pure_tone_is_zero_and_noise_is_large() {
        // Exactly 8 cycles in 64 samples: all power lands in bin 8.
        let pure: Vec<f64> = (0..64)
            .map(|i| (2.0 * std::f64::consts::PI * 8.0 * i as f64 / 64.0).sin())
            .collect();
        let pure_entropy = aperiodicity(&pure).unwrap();
        assert!(pure_entropy < 1e-10, "pure tone entropy {pure_entropy}");

        // Deterministic broadband: power spread over many bins.
        let mut x = 0.5f64;
        let noisy: Vec<f64> = (0..64)
            .map(|_| {
                x = (x * 997.0 + 0.1234).fract();
                x
            })
            .collect();
        assert!(aperiodicity(&noisy).unwrap() > 1.0);
    }

    #[test]
    fn aperiodicity_rejects_short_and_zeroes_constant() {
        assert!(aperiodicity(&[1.0; 7]).is_err());
        assert_eq!(aperiodicity(&[5.0; 32]).unwrap(), 0.0);
    }

    fn pause_cfg() -> SignalConfig {
        SignalConfig::default()
    }

    #[test]
    fn pause_boundaries_at_100_fps() {
        // At 100 fps one frame is 0.010 s: a single slow frame is exactly
        // the interruption minimum (counts, >=) but not freezing (needs
        // strictly more than 0.020 s).
        let cfg = pause_cfg();
        let one = [10.0];
        let p = pause_stats(&one, 100.0, &cfg);
        assert_eq!((p.n_interruptions, p.n_freezing), (1, 0));

        // Two slow frames: 0.020 s, still not strictly greater.
        let two = [10.0, 10.0];
        let p = pause_stats(&two, 100.0, &cfg);
        assert_eq!((p.n_interruptions, p.n_freezing), (1, 0));

        // Three slow frames: 0.030 s, freezing.
        let three = [10.0, 10.0, 10.0];
        let p = pause_stats(&three, 100.0, &cfg);
        assert_eq!((p.n_interruptions, p.n_freezing), (1, 1));
        assert_relative_eq!(p.longest_freezing_s, 0.030, epsilon = 1e-9);
    }

    #[test]
    fn pause_boundaries_at_50_and_250_fps() {
        let cfg = pause_cfg();
        // 50 fps: one frame = 0.020 s. Interruption yes, freezing no
        // (not strictly greater).
        let p = pause_stats(&[0.0], 50.0, &cfg);
        assert_eq!((p.n_interruptions, p.n_freezing), (1, 0));
        // 250 fps: one frame = 0.004 s, two frames 0.008 s: neither counts.
        let p = pause_stats(&[0.0, 0.0], 250.0, &cfg);
        assert_eq!((p.n_interruptions, p.n_freezing), (0, 0));
        // Six frames = 0.024 s: both.
        let p = pause_stats(&[0.0; 6], 250.0, &cfg);
        assert_eq!((p.n_interruptions, p.n_freezing), (1, 1));
    }

    #[test]
    fn pause_runs_separated_by_fast_frames() {
        let cfg = pause_cfg();
        // fast=400 splits three runs; fps 100. Runs of 1, 3, 5 frames.
        let mut speed = vec![400.0; 2];
        speed.push(10.0);
        speed.extend([400.0, 10.0, 10.0, 10.0, 400.0]);
        speed.extend([10.0; 5]);
        let p = pause_stats(&speed, 100.0, &cfg);
        assert_eq!(p.n_interruptions, 3);
        assert_eq!(p.n_freezing, 2);
        assert_relative_eq!(p.longest_freezing_s, 0.05, epsilon = 1e-9);
    }

    #[test]
    fn pause_threshold_is_strict() {
        let cfg = pause_cfg();
        // Exactly at the floor is not "below".
        let p = pause_stats(&[cfg.speed_floor_deg_s; 10], 100.0, &cfg);
        assert_eq!(p.n_interruptions, 0);
    }

    #[test]
    fn linearity_perfect_line_and_constant() {
        let (r2, slope) = period_linearity(&[0.50, 0.55, 0.60, 0.65]);
        assert_relative_eq!(r2, 1.0, epsilon = 1e-12);
        assert_relative_eq!(slope, 0.05, epsilon = 1e-12);

        let (r2, slope) = period_linearity(&[0.4, 0.4, 0.4, 0.4]);
        assert_eq!((r2, slope), (1.0, 0.0));

        let (r2, _) = period_linearity(&[0.4, 0.4]);
        assert!(r2.is_nan());
    }

    #[test]
    fn complexity_picks_lowest_sufficient_degree() {
        // A clean line needs degree 1.
        let line: Vec<f64> = (0..8).map(|i| 0.4 + 0.01 * i as f64).collect();
        assert_eq!(period_fit_complexity(&line), 1.0);

        // A clean parabola needs degree 2.
        let para: Vec<f64> = (0..8)
            .map(|i| {
                let x = i as f64 - 3.5;
                0.5 + 0.01 * x * x
            })
            .collect();
        assert_eq!(period_fit_complexity(&para), 2.0);

        // Constant: degree 1 fits exactly but the rule pins it to 1.
        assert_eq!(period_fit_complexity(&[0.5; 6]), 1.0);
    }

    #[test]
    fn complexity_saturates_at_eleven() {
        // 24 alternating values: a degree-10 polynomial has at most 9
        // interior extrema and cannot follow 23 alternations, so no
        // degree in range reaches 0.9.
        let jagged: Vec<f64> = (0..24)
            .map(|i| if i % 2 == 0 { 0.2 } else { 0.9 })
            .collect();
        assert_eq!(period_fit_complexity(&jagged), 11.0);
    }

    #[test]
    fn complexity_uses_exact_interpolation_when_points_are_few() {
        // Five points cap the search at degree 4, which interpolates
        // any five values exactly.
        let jagged = [0.2, 0.9, 0.2, 0.9, 0.2];
        assert_eq!(period_fit_complexity(&jagged), 4.0);
    }

    /// Textbook Gram-Schmidt polynomial least squares, used as an
    /// independent check on the SVD route.
    fn poly_r2_reference(xs: &[f64], ys: &[f64], degree: usize) -> f64 {
        let n = xs.len();
        // Build orthogonal basis over sample points.
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for d in 0..=degree {
            let mut v: Vec<f64> = xs.iter().map(|x| x.powi(d as i32)).collect();
            let snapshot = basis.clone();
            for b in &snapshot {
                let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
                let nrm: f64 = b.iter().map(|c| c * c).sum();
                if nrm > 0.0 {
                    for (vi, bi) in v.iter_mut().zip(b) {
                        *vi -= dot / nrm * bi;
                    }
                }
            }
            basis.push(v);
        }
        let mut fit = vec![0.0; n];
        for b in &basis {
            let dot: f64 = ys.iter().zip(b).map(|(a, c)| a * c).sum();
            let nrm: f64 = b.iter().map(|c| c * c).sum();
            if nrm > 1e-300 {
                for (f, bi) in fit.iter_mut().zip(b) {
                    *f += dot / nrm * bi;
                }
            }
        }
        let mean = ys.iter().sum::<f64>() / n as f64;
        let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
        let ss_res: f64 = ys.iter().zip(&fit).map(|(y, f)| (y - f).powi(2)).sum();
        1.0 - ss_res / ss_tot
    }

    #[test]
    fn complexity_agrees_with_gram_schmidt_reference() {
        // Mildly cubic periods; find the reference's minimal degree and
        // compare.
        let ys: Vec<f64> = (0..9)
            .map(|i| {
                let x = i as f64 / 8.0;
                0.5 + 0.08 * x - 0.3 * x * x + 0.28 * x * x * x
            })
            .collect();
        let k = ys.len();
        let xs: Vec<f64> = (0..k)
            .map(|i| 2.0 * i as f64 / (k as f64 - 1.0) - 1.0)
            .collect();
        let mut expected = 11.0;
        for d in 1..=10.min(k - 1) {
            if poly_r2_reference(&xs, &ys, d) >= 0.9 {
                expected = d as f64;
                break;
            }
        }
        assert_eq!(period_fit_complexity(&ys), expected);
    }

    #[test]
    fn decrement_matches_hand_computation() {
        let amps = [60.0, 55.0, 50.0];
        let (vs_mean, vs_first, slope) = amplitude_decrement(&amps);
        assert_relative_eq!(vs_mean, -5.0, epsilon = 1e-12);
        assert_relative_eq!(vs_first, -10.0, epsilon = 1e-12);
        assert_relative_eq!(slope, -5.0, epsilon = 1e-12);
    }

    #[test]
    fn assembly_fills_all_slots_and_nans_missing() {
        let input = AssemblyInput {
            speed: Some(vec![100.0, 120.0, 90.0, 83.0]),
            accel: Some(vec![600.0, 900.0, 300.0]),
            taps: None,
            wrist_dx: vec![],
            wrist_dy: vec![],
            wrist_dist: vec![],
            aperiodicity: None,
            pauses: None,
        };
        let fv =
            assemble_feature_vector("v1", "p1", Handedness::Left, &input, 16).unwrap();
        assert_eq!(fv.values.len(), N_FEATURES);
        // Speed slots are finite.
        assert!(fv.values[..7].iter().all(|v| v.is_finite()));
        // Tap, wrist, and whole-signal slots are NaN.
        assert!(fv.values[14..53].iter().all(|v| v.is_nan()));
        assert!(fv.values[53..].iter().all(|v| v.is_nan()));
    }

    #[test]
    fn assembly_populates_tap_slots() {
        let taps = TapMetrics {
            periods_s: vec![0.5, 0.52, 0.55, 0.6],
            frequencies_hz: vec![2.0, 1.923, 1.818, 1.667],
            amplitudes_deg: vec![60.0, 58.0, 55.0, 51.0, 47.0],
        };
        let input = AssemblyInput {
            speed: Some(vec![100.0, 120.0, 90.0]),
            accel: Some(vec![600.0, 900.0]),
            taps: Some(taps),
            wrist_dx: vec![0.01, 0.02],
            wrist_dy: vec![0.01, 0.03],
            wrist_dist: vec![0.014, 0.036],
            aperiodicity: Some(0.8),
            pauses: Some(PauseStats {
                n_interruptions: 2,
                n_freezing: 1,
                longest_freezing_s: 0.03,
            }),
        };
        let fv =
            assemble_feature_vector("v2", "p2", Handedness::Right, &input, 16).unwrap();
        let at = |name: &str| fv.values[feature_index(name).unwrap()];
        assert_eq!(at("total_taps"), 5.0);
        assert_eq!(at("n_interruptions"), 2.0);
        assert_eq!(at("n_freezing"), 1.0);
        assert_relative_eq!(at("longest_freezing_s"), 0.03, epsilon = 1e-9);
        assert_eq!(at("aperiodicity"), 0.8);
        assert_eq!(at("amplitude_max"), 60.0);
        assert_eq!(at("period_min"), 0.5);
        assert_relative_eq!(
            at("amp_decrement_end_minus_start"),
            -13.0,
            epsilon = 1e-12
        );
    }

    proptest! {
        #[test]
        fn entropy_bounded_by_ln_bins(vals in proptest::collection::vec(0.0f64..100.0, 1..200)) {
            let h = shannon_entropy(&vals, 16);
            prop_assert!(h >= 0.0);
            prop_assert!(h <= (16.0f64).ln() + 1e-12);
        }

        #[test]
        fn aggregates_ordering_invariants(vals in proptest::collection::vec(-50.0f64..50.0, 1..100)) {
            let a = aggregate_stats(&vals, 16).unwrap();
            prop_assert!(a.min <= a.median + 1e-12);
            prop_assert!(a.median <= a.max + 1e-12);
            prop_assert!(a.min <= a.mean + 1e-12);
            prop_assert!(a.mean <= a.max + 1e-12);
            prop_assert!(a.iqr >= -1e-12);
            prop_assert!(a.std >= 0.0);
        }

        #[test]
        fn pause_counts_ordered(speed in proptest::collection::vec(0.0f64..400.0, 1..300)) {
            let cfg = pause_cfg();
            let p = pause_stats(&speed, 60.0, &cfg);
            // Freezing threshold exceeds interruption threshold by default,
            // so every freeze is an interruption.
            prop_assert!(p.n_freezing <= p.n_interruptions);
        }
    }
}
