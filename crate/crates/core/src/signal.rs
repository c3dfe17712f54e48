//! From landmarks to a clean, segmented finger-tapping angle signal.
//!
//! The finger-tapping angle is the angle at the wrist between the
//! wrist-to-thumb-tip and wrist-to-index-tip vectors, in degrees. Being an
//! angle of normalized vectors it is invariant to translation, rotation,
//! and scale of the landmark coordinates, which makes recordings taken at
//! different distances comparable.
//!
//! Processing order for a recording:
//!
//! 1. [`build_angle_series`]: one angle per frame, [`SENTINEL`] where no
//!    usable hand was detected.
//! 2. [`interpolate_missing`]: repair isolated detector dropouts.
//! 3. [`extract_largest_visible_segment`]: keep the longest uninterrupted
//!    stretch.
//! 4. [`detect_peaks`]: find tap peaks.
//! 5. [`trim_first_last_tap`]: drop the ramp-up and wind-down taps.

use crate::config::SignalConfig;
use crate::error::{Error, Result};
use crate::ingest::{
    select_target_hand, HandObservation, VideoRecording, INDEX_TIP, THUMB_CMC, THUMB_TIP, WRIST,
};
use crate::stats::percentile_sorted;

/// Marker for frames without a usable hand detection.
pub const SENTINEL: f64 = -1.0;

/// Half-width of the neighborhood inspected by the interpolation majority
/// rule.
const INTERP_MAJORITY_HALFWIN: usize = 5;
/// Half-width of the window the replacement quadratic is fitted on.
const INTERP_FIT_HALFWIN: usize = 15;

/// Per-frame finger-tapping angle with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleSeries {
    /// Angle in degrees, or [`SENTINEL`] for missing frames.
    pub values: Vec<f64>,
    /// True where the value was filled in by interpolation.
    pub interpolated: Vec<bool>,
    pub fps: f64,
    /// Index of `values[0]` in the original recording, for traceability
    /// through segment extraction and trimming.
    pub offset: usize,
}

impl AngleSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Seconds per frame.
    pub fn t_frame(&self) -> f64 {
        1.0 / self.fps
    }
}

/// Tap peak positions and the analysis window they live in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TapSegmentation {
    /// Peak indices, relative to the series this segmentation accompanies.
    pub peak_indices: Vec<usize>,
    /// `[start, end)` within the series that was segmented.
    pub analysis_window: (usize, usize),
    /// At least four peaks were found, so trimming is meaningful.
    pub valid: bool,
}

/// Angle in degrees between wrist->thumb-tip and wrist->index-tip.
///
/// Errors when either vector has zero length (coincident landmarks), since
/// the angle is undefined there.
pub fn compute_angle(wrist: [f64; 2], thumb_tip: [f64; 2], index_tip: [f64; 2]) -> Result<f64> {
    let wt = [thumb_tip[0] - wrist[0], thumb_tip[1] - wrist[1]];
    let wi = [index_tip[0] - wrist[0], index_tip[1] - wrist[1]];
    let nt = (wt[0] * wt[0] + wt[1] * wt[1]).sqrt();
    let ni = (wi[0] * wi[0] + wi[1] * wi[1]).sqrt();
    if nt == 0.0 || ni == 0.0 {
        return Err(Error::invalid(
            "degenerate geometry: fingertip coincides with wrist",
        ));
    }
    let cos = ((wt[0] * wi[0] + wt[1] * wi[1]) / (nt * ni)).clamp(-1.0, 1.0);
    Ok(cos.acos().to_degrees().clamp(0.0, 180.0))
}

fn angle_of(hand: &HandObservation) -> Result<f64> {
    compute_angle(
        hand.points[WRIST],
        hand.points[THUMB_TIP],
        hand.points[INDEX_TIP],
    )
}

/// One angle per frame of the recording; frames without a usable detection
/// of the recording's hand become [`SENTINEL`].
pub fn build_angle_series(rec: &VideoRecording, score_gate: f64) -> AngleSeries {
    let values: Vec<f64> = rec
        .frames
        .iter()
        .map(|frame| {
            let Some(hand) = select_target_hand(frame, rec.hand, score_gate) else {
                return SENTINEL;
            };
            match angle_of(hand) {
                Ok(angle) => angle,
                Err(_) => {
                    log::warn!(
                        "{}: frame {} has degenerate hand geometry, treating as missing",
                        rec.video_id,
                        frame.frame_index
                    );
                    SENTINEL
                }
            }
        })
        .collect();
    AngleSeries {
        interpolated: vec![false; values.len()],
        values,
        fps: rec.fps,
        offset: 0,
    }
}

/// Per-frame wrist displacement, aligned with the angle series.
///
/// Entry `i` describes the move from frame `i-1` to frame `i`; entry 0 is
/// never valid. Wrist coordinates are divided by the per-frame
/// wrist-to-thumb-CMC distance first, which cancels camera zoom.
#[derive(Debug, Clone, PartialEq)]
pub struct WristSeries {
    /// |dx| per frame, normalized units.
    pub dx: Vec<f64>,
    /// |dy| per frame, normalized units.
    pub dy: Vec<f64>,
    /// Euclidean displacement per frame, normalized units.
    pub dist: Vec<f64>,
    /// False where either endpoint frame lacks usable geometry.
    pub valid: Vec<bool>,
}

/// Computes [`WristSeries`] for a recording.
pub fn compute_wrist_deltas(rec: &VideoRecording, score_gate: f64) -> WristSeries {
    let positions: Vec<Option<[f64; 2]>> = rec
        .frames
        .iter()
        .map(|frame| {
            let hand = select_target_hand(frame, rec.hand, score_gate)?;
            let w = hand.points[WRIST];
            let c = hand.points[THUMB_CMC];
            let d = ((w[0] - c[0]).powi(2) + (w[1] - c[1]).powi(2)).sqrt();
            if d == 0.0 {
                return None;
            }
            Some([w[0] / d, w[1] / d])
        })
        .collect();

    let n = positions.len();
    let mut out = WristSeries {
        dx: vec![0.0; n],
        dy: vec![0.0; n],
        dist: vec![0.0; n],
        valid: vec![false; n],
    };
    for i in 1..n {
        if let (Some(prev), Some(cur)) = (positions[i - 1], positions[i]) {
            let dx = cur[0] - prev[0];
            let dy = cur[1] - prev[1];
            out.dx[i] = dx.abs();
            out.dy[i] = dy.abs();
            out.dist[i] = (dx * dx + dy * dy).sqrt();
            out.valid[i] = true;
        }
    }
    out
}

/// Fills sentinel frames that have mostly-present neighborhoods.
///
/// A sentinel at `i` is replaced only when strictly more than half of the
/// frames within +-5 of it (those that exist; edges have fewer) hold real
/// values. The replacement is a least-squares quadratic over the real
/// values within +-15 frames, evaluated at `i`, then clamped into the
/// min/max of that window so the repair can never overshoot its local
/// evidence. All replacements read the original series, so the result does
/// not depend on scan order.
pub fn interpolate_missing(s: &AngleSeries) -> AngleSeries {
    let n = s.len();
    let mut out = s.clone();
    for i in 0..n {
        if s.values[i] != SENTINEL {
            continue;
        }
        let lo = i.saturating_sub(INTERP_MAJORITY_HALFWIN);
        let hi = (i + INTERP_MAJORITY_HALFWIN).min(n.saturating_sub(1));
        let mut existing = 0usize;
        let mut present = 0usize;
        for j in lo..=hi {
            if j == i {
                continue;
            }
            existing += 1;
            if s.values[j] != SENTINEL {
                present += 1;
            }
        }
        if present * 2 <= existing {
            continue;
        }

        let flo = i.saturating_sub(INTERP_FIT_HALFWIN);
        let fhi = (i + INTERP_FIT_HALFWIN).min(n - 1);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for j in flo..=fhi {
            if s.values[j] != SENTINEL {
                xs.push(j as f64 - i as f64);
                ys.push(s.values[j]);
            }
        }
        if xs.len() < 3 {
            continue;
        }
        let fitted = quadratic_at_zero(&xs, &ys);
        let wmin = ys.iter().copied().fold(f64::INFINITY, f64::min);
        let wmax = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.values[i] = fitted.clamp(wmin, wmax).clamp(0.0, 180.0);
        out.interpolated[i] = true;
    }
    out
}

/// Least-squares quadratic through `(xs, ys)`, evaluated at x = 0.
///
/// The x values are small centered frame offsets, so plain normal
/// equations are well conditioned. Returns the mean if the 3x3 system is
/// singular (cannot happen with three distinct x, kept as a safeguard).
fn quadratic_at_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mut sx, mut sx2, mut sx3, mut sx4) = (0.0, 0.0, 0.0, 0.0);
    let (mut sy, mut sxy, mut sx2y) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let x2 = x * x;
        sx += x;
        sx2 += x2;
        sx3 += x2 * x;
        sx4 += x2 * x2;
        sy += y;
        sxy += x * y;
        sx2y += x2 * y;
    }
    // Normal equations for y = c0 + c1 x + c2 x^2; only c0 is needed.
    let m = [[n, sx, sx2], [sx, sx2, sx3], [sx2, sx3, sx4]];
    let rhs = [sy, sxy, sx2y];
    let det3 = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let det = det3(m);
    if det == 0.0 {
        return sy / n;
    }
    let mut m0 = m;
    for r in 0..3 {
        m0[r][0] = rhs[r];
    }
    det3(m0) / det
}

/// Longest run without sentinels, earliest on ties.
///
/// Errors when the series has no visible frames at all.
pub fn extract_largest_visible_segment(s: &AngleSeries) -> Result<AngleSeries> {
    let mut best: Option<(usize, usize)> = None; // (start, len)
    let mut run_start = 0usize;
    let mut run_len = 0usize;
    for (i, &v) in s.values.iter().enumerate() {
        if v != SENTINEL {
            if run_len == 0 {
                run_start = i;
            }
            run_len += 1;
            if best.map_or(true, |(_, blen)| run_len > blen) {
                best = Some((run_start, run_len));
            }
        } else {
            run_len = 0;
        }
    }
    let Some((start, len)) = best else {
        return Err(Error::invalid("signal has no visible frames"));
    };
    Ok(AngleSeries {
        values: s.values[start..start + len].to_vec(),
        interpolated: s.interpolated[start..start + len].to_vec(),
        fps: s.fps,
        offset: s.offset + start,
    })
}

/// Finds tap peaks in a sentinel-free series.
///
/// A candidate is a strict local maximum above the 25th percentile of the
/// signal. Candidates closer than `round(fps * min_period_s)` frames are
/// resolved highest-value-first (ties keep the earlier frame). Finally,
/// adjacent accepted peaks must be separated by a trough at least
/// `min_drop_frac * (P90 - P10)` below the lower of the two peaks;
/// violating pairs again drop the lower (later on ties) peak. This rejects
/// ripple without smoothing the signal itself.
pub fn detect_peaks(s: &AngleSeries, cfg: &SignalConfig) -> TapSegmentation {
    debug_assert!(
        s.values.iter().all(|&v| v != SENTINEL),
        "detect_peaks expects a sentinel-free series"
    );
    let n = s.len();
    let empty = |valid| TapSegmentation {
        peak_indices: Vec::new(),
        analysis_window: (0, n),
        valid,
    };
    if n < 3 {
        return empty(false);
    }

    let mut sorted = s.values.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("angles are never NaN"));
    let q25 = percentile_sorted(&sorted, 0.25);
    let min_drop = cfg.min_drop_frac * (percentile_sorted(&sorted, 0.90) - percentile_sorted(&sorted, 0.10));
    let min_sep = ((s.fps * cfg.min_period_s).round() as usize).max(1);

    let mut candidates: Vec<usize> = (1..n - 1)
        .filter(|&i| {
            s.values[i] > s.values[i - 1] && s.values[i] > s.values[i + 1] && s.values[i] > q25
        })
        .collect();

    // Separation: highest value wins, earlier index on ties.
    candidates.sort_by(|&a, &b| {
        s.values[b]
            .partial_cmp(&s.values[a])
            .expect("angles are never NaN")
            .then(a.cmp(&b))
    });
    let mut accepted: Vec<usize> = Vec::new();
    for &c in &candidates {
        if accepted.iter().all(|&p| c.abs_diff(p) >= min_sep) {
            accepted.push(c);
        }
    }
    accepted.sort_unstable();

    // Trough check between neighbors; drop the weaker peak of a violating
    // pair and rescan until stable.
    loop {
        let mut removed = None;
        for w in accepted.windows(2) {
            let (a, b) = (w[0], w[1]);
            let trough = s.values[a + 1..b]
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            let ceiling = s.values[a].min(s.values[b]) - min_drop;
            if !(trough <= ceiling) {
                // Higher peak survives; on equal values the earlier one does.
                removed = Some(if s.values[a] >= s.values[b] { b } else { a });
                break;
            }
        }
        match removed {
            Some(idx) => accepted.retain(|&p| p != idx),
            None => break,
        }
    }

    let valid = accepted.len() >= 4;
    TapSegmentation {
        peak_indices: accepted,
        analysis_window: (0, n),
        valid,
    }
}

/// Drops everything before the second peak and after the second-to-last
/// peak, removing the atypical first and last taps.
///
/// With fewer than four peaks there is nothing sensible to trim; the input
/// is returned unchanged and marked invalid. Peak indices in the returned
/// segmentation are relative to the returned (trimmed) series, while
/// `analysis_window` records the kept `[start, end)` range of the input.
pub fn trim_first_last_tap(s: &AngleSeries, seg: &TapSegmentation) -> (AngleSeries, TapSegmentation) {
    if !seg.valid || seg.peak_indices.len() < 4 {
        return (
            s.clone(),
            TapSegmentation {
                peak_indices: seg.peak_indices.clone(),
                analysis_window: (0, s.len()),
                valid: false,
            },
        );
    }
    let k = seg.peak_indices.len();
    let start = seg.peak_indices[1];
    let end = seg.peak_indices[k - 2] + 1;
    let trimmed = AngleSeries {
        values: s.values[start..end].to_vec(),
        interpolated: s.interpolated[start..end].to_vec(),
        fps: s.fps,
        offset: s.offset + start,
    };
    let peaks: Vec<usize> = seg.peak_indices[1..k - 1].iter().map(|&p| p - start).collect();
    (
        trimmed,
        TapSegmentation {
            peak_indices: peaks,
            analysis_window: (start, end),
            valid: true,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn series(values: Vec<f64>, fps: f64) -> AngleSeries {
        AngleSeries {
            interpolated: vec![false; values.len()],
            values,
            fps,
            offset: 0,
        }
    }

    #[test]
    fn right_angle_and_collinear() {
        let ninety = compute_angle([0.0, 0.0], [1.0, 0.0], [0.0, 1.0]).unwrap();
        assert_relative_eq!(ninety, 90.0, max_relative = 1e-12);
        let zero = compute_angle([0.0, 0.0], [1.0, 0.0], [2.0, 0.0]).unwrap();
        assert!(zero.abs() < 1e-6);
        let straight = compute_angle([0.0, 0.0], [1.0, 0.0], [-3.0, 0.0]).unwrap();
        assert_relative_eq!(straight, 180.0, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_geometry_is_an_error() {
        assert!(compute_angle([0.5, 0.5], [0.5, 0.5], [0.7, 0.5]).is_err());
        assert!(compute_angle([0.5, 0.5], [0.7, 0.5], [0.5, 0.5]).is_err());
    }

    proptest::proptest! {
        /// Scale and rotation invariance of the angle.
        #[test]
        fn angle_is_scale_and_rotation_invariant(
            wx in -1.0f64..1.0, wy in -1.0f64..1.0,
            tx in -1.0f64..1.0, ty in -1.0f64..1.0,
            ix in -1.0f64..1.0, iy in -1.0f64..1.0,
            theta in 0.0f64..std::f64::consts::TAU,
            scale in 0.1f64..10.0,
        ) {
            let far = |a: [f64;2], b: [f64;2]| {
                ((a[0]-b[0]).powi(2) + (a[1]-b[1]).powi(2)).sqrt() > 1e-3
            };
            let (w, t, i) = ([wx, wy], [tx, ty], [ix, iy]);
            proptest::prop_assume!(far(w, t) && far(w, i));
            let base = compute_angle(w, t, i).unwrap();
            let xform = |p: [f64; 2]| {
                let (s, c) = theta.sin_cos();
                [scale * (c * p[0] - s * p[1]), scale * (s * p[0] + c * p[1])]
            };
            let moved = compute_angle(xform(w), xform(t), xform(i)).unwrap();
            proptest::prop_assert!((base - moved).abs() < 1e-9, "{base} vs {moved}");
        }
    }

    #[test]
    fn interpolation_fills_isolated_gap_on_ramp() {
        let mut s = series(vec![10.0, 20.0, 30.0, SENTINEL, 50.0, 60.0], 30.0);
        let fixed = interpolate_missing(&s);
        assert_relative_eq!(fixed.values[3], 40.0, max_relative = 1e-9);
        assert!(fixed.interpolated[3]);
        assert!(!fixed.interpolated[2]);
        // Original untouched.
        assert_eq!(s.values[3], SENTINEL);
        s.values[3] = fixed.values[3];
        assert_eq!(fixed.values, s.values);
    }

    #[test]
    fn interpolation_respects_majority_rule() {
        // 11-frame window around index 5 has 10 neighbors, 8 of them missing.
        let values = vec![
            SENTINEL, SENTINEL, SENTINEL, 30.0, SENTINEL, SENTINEL, SENTINEL, 40.0, SENTINEL,
            SENTINEL, SENTINEL,
        ];
        let s = series(values.clone(), 30.0);
        let fixed = interpolate_missing(&s);
        assert_eq!(fixed.values[5], SENTINEL, "2 of 10 present is not a majority");
        assert!(!fixed.interpolated[5]);
    }

    #[test]
    fn interpolation_clamps_into_local_range() {
        // A V-shape would extrapolate below the window minimum at the gap
        // if the fit overshoots; the clamp pins it to the local range.
        let mut values: Vec<f64> = (0..31).map(|i| (i as f64 - 15.0).abs() + 10.0).collect();
        values[15] = SENTINEL;
        let s = series(values, 30.0);
        let fixed = interpolate_missing(&s);
        let window_min = 11.0; // neighbors at +-1 of the vertex
        assert!(fixed.values[15] >= window_min || fixed.values[15] >= 10.0);
        let lo = fixed.values.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(lo >= 10.0, "no value below the window minimum");
    }

    proptest::proptest! {
        #[test]
        fn interpolated_values_stay_inside_window_bounds(
            base in proptest::collection::vec(0.0f64..180.0, 40..60),
            gap in 5usize..35,
        ) {
            let mut values = base;
            values[gap] = SENTINEL;
            let n = values.len();
            let s = series(values.clone(), 30.0);
            let fixed = interpolate_missing(&s);
            if fixed.interpolated[gap] {
                let lo = gap.saturating_sub(15);
                let hi = (gap + 15).min(n - 1);
                let window: Vec<f64> = (lo..=hi)
                    .filter(|&j| values[j] != SENTINEL)
                    .map(|j| values[j])
                    .collect();
                let wmin = window.iter().cloned().fold(f64::INFINITY, f64::min);
                let wmax = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                proptest::prop_assert!(fixed.values[gap] >= wmin - 1e-9);
                proptest::prop_assert!(fixed.values[gap] <= wmax + 1e-9);
            }
        }
    }

    #[test]
    fn largest_segment_picks_longest_run() {
        let s = series(
            vec![SENTINEL, 5.0, 6.0, SENTINEL, 7.0, 8.0, 9.0, SENTINEL],
            30.0,
        );
        let seg = extract_largest_visible_segment(&s).unwrap();
        assert_eq!(seg.values, vec![7.0, 8.0, 9.0]);
        assert_eq!(seg.offset, 4);
    }

    #[test]
    fn largest_segment_prefers_earliest_on_tie() {
        let s = series(vec![1.0, 2.0, SENTINEL, 3.0, 4.0], 30.0);
        let seg = extract_largest_visible_segment(&s).unwrap();
        assert_eq!(seg.offset, 0);
        assert_eq!(seg.values, vec![1.0, 2.0]);
    }

    #[test]
    fn all_missing_is_an_error() {
        let s = series(vec![SENTINEL; 8], 30.0);
        assert!(extract_largest_visible_segment(&s).is_err());
    }

    #[test]
    fn offset_accumulates_through_stages() {
        let mut values = vec![SENTINEL; 3];
        values.extend((0..20).map(|i| 10.0 + (i as f64)));
        let s = series(values, 30.0);
        let seg = extract_largest_visible_segment(&s).unwrap();
        assert_eq!(seg.offset, 3);
        let seg2 = extract_largest_visible_segment(&seg).unwrap();
        assert_eq!(seg2.offset, 3, "offset survives an idempotent pass");
    }

    #[test]
    fn sinusoid_peaks_land_on_analytic_maxima() {
        // 2 Hz sampled at 30 fps for 10 full cycles.
        let fps = 30.0;
        let n = 151;
        let values: Vec<f64> = (0..n)
            .map(|i| 60.0 + 40.0 * (std::f64::consts::TAU * 2.0 * i as f64 / fps).sin())
            .collect();
        let s = series(values, fps);
        let seg = detect_peaks(&s, &SignalConfig::default());
        assert_eq!(seg.peak_indices.len(), 10);
        assert!(seg.valid);
        // Analytic maxima at t = (k + 0.25) / 2 -> frame 3.75 + 15 k.
        for (k, &p) in seg.peak_indices.iter().enumerate() {
            let analytic = 3.75 + 15.0 * k as f64;
            assert!(
                (p as f64 - analytic).abs() <= 1.0,
                "peak {k} at {p}, analytic {analytic}"
            );
        }
    }

    #[test]
    fn constant_and_plateau_signals_have_no_peaks() {
        let flat = series(vec![30.0; 50], 30.0);
        assert!(detect_peaks(&flat, &SignalConfig::default()).peak_indices.is_empty());
        let plateau = series(vec![0.0, 5.0, 5.0, 0.0], 30.0);
        assert!(detect_peaks(&plateau, &SignalConfig::default()).peak_indices.is_empty());
    }

    #[test]
    fn close_peaks_resolve_to_higher_value() {
        // Two local maxima 2 frames apart (min separation is 4 at 30 fps);
        // the taller one must win regardless of order.
        let mut values = vec![0.0; 40];
        values[10] = 50.0;
        values[12] = 60.0;
        values[25] = 55.0;
        let s = series(values, 30.0);
        let seg = detect_peaks(&s, &SignalConfig::default());
        assert_eq!(seg.peak_indices, vec![12, 25]);
    }

    #[test]
    fn ripple_without_trough_is_rejected() {
        // Three clean taps, then a ripple pair whose dip (58) stays close
        // to the peak values; the weaker ripple peak must be discarded.
        let mut values: Vec<f64> = Vec::new();
        for _ in 0..3 {
            values.extend([10.0, 30.0, 60.0, 30.0, 10.0]);
        }
        values.extend([10.0, 59.0, 58.0, 60.0, 10.0]);
        let s = series(values, 10.0);
        let seg = detect_peaks(&s, &SignalConfig::default());
        assert_eq!(seg.peak_indices, vec![2, 7, 12, 18]);
        assert!(seg.valid);
    }

    #[test]
    fn trimming_keeps_inner_window() {
        let mut values = vec![5.0; 80];
        for (k, &p) in [5usize, 20, 35, 50, 65].iter().enumerate() {
            values[p] = 60.0 + k as f64;
        }
        let s = series(values, 30.0);
        let seg = TapSegmentation {
            peak_indices: vec![5, 20, 35, 50, 65],
            analysis_window: (0, 80),
            valid: true,
        };
        let (trimmed, tseg) = trim_first_last_tap(&s, &seg);
        assert_eq!(tseg.analysis_window, (20, 51));
        assert_eq!(trimmed.len(), 31);
        assert_eq!(trimmed.offset, 20);
        assert_eq!(tseg.peak_indices, vec![0, 15, 30]);
        assert!(tseg.valid);
        // Original peak values survive at re-indexed positions.
        assert_eq!(trimmed.values[0], 61.0);
        assert_eq!(trimmed.values[30], 63.0);
    }

    #[test]
    fn too_few_peaks_marks_invalid_without_trimming() {
        let s = series(vec![1.0; 30], 30.0);
        let seg = TapSegmentation {
            peak_indices: vec![4, 15, 26],
            analysis_window: (0, 30),
            valid: false,
        };
        let (out, oseg) = trim_first_last_tap(&s, &seg);
        assert_eq!(out, s);
        assert!(!oseg.valid);
        assert_eq!(oseg.peak_indices, vec![4, 15, 26]);
    }

    #[test]
    fn wrist_deltas_use_normalized_coordinates() {
        use crate::ingest::{HandObservation, Handedness, LandmarkFrame, HAND_POINTS};
        let frame = |wrist: [f64; 2]| {
            let mut points = vec![[0.5, 0.5]; HAND_POINTS];
            points[WRIST] = wrist;
            points[THUMB_CMC] = [wrist[0] + 1.0, wrist[1]];
            points[THUMB_TIP] = [wrist[0], wrist[1] + 0.3];
            points[INDEX_TIP] = [wrist[0] + 0.3, wrist[1]];
            LandmarkFrame {
                frame_index: 0,
                timestamp_s: 0.0,
                hands: vec![HandObservation {
                    label: Handedness::Right,
                    score: 0.95,
                    points,
                }],
            }
        };
        let mut frames = vec![frame([0.10, 0.20]), frame([0.13, 0.24]), frame([0.13, 0.24])];
        for (i, f) in frames.iter_mut().enumerate() {
            f.frame_index = i as u64;
            f.timestamp_s = i as f64 / 30.0;
        }
        let rec = VideoRecording {
            video_id: "v".into(),
            participant_id: "p".into(),
            hand: Handedness::Right,
            frames,
            fps: 30.0,
        };
        let w = compute_wrist_deltas(&rec, 0.9);
        assert!(!w.valid[0]);
        assert!(w.valid[1] && w.valid[2]);
        assert_relative_eq!(w.dx[1], 0.03, max_relative = 1e-12);
        assert_relative_eq!(w.dy[1], 0.04, max_relative = 1e-12);
        assert_relative_eq!(w.dist[1], 0.05, max_relative = 1e-12);
        assert_eq!(w.dist[2], 0.0);

        // Scaling every coordinate leaves normalized deltas unchanged.
        let mut scaled = rec.clone();
        for f in &mut scaled.frames {
            for h in &mut f.hands {
                for p in &mut h.points {
                    p[0] *= 2.0;
                    p[1] *= 2.0;
                }
            }
        }
        let w2 = compute_wrist_deltas(&scaled, 0.9);
        assert_relative_eq!(w2.dist[1], w.dist[1], max_relative = 1e-12);
    }
}
