//! Input parsing: landmark time series, rating sheets, demographics.
//!
//! Landmark files are JSON Lines. The first line identifies the recording
//! (`video_id`, `participant_id`, `hand`); every following line is one
//! frame with a nonnegative index, a timestamp in seconds, and zero or
//! more detected hands of 21 `[x, y]` points each (a third coordinate is
//! tolerated and ignored). Point indices follow the usual hand schema:
//! 0 wrist, 1 thumb CMC, 4 thumb tip, 8 index fingertip.

use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of landmarks per hand.
pub const HAND_POINTS: usize = 21;

/// Landmark index of the wrist.
pub const WRIST: usize = 0;
/// Landmark index of the thumb CMC joint (base of the thumb).
pub const THUMB_CMC: usize = 1;
/// Landmark index of the thumb tip.
pub const THUMB_TIP: usize = 4;
/// Landmark index of the index fingertip.
pub const INDEX_TIP: usize = 8;

/// Which hand a recording or detection refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Handedness {
    Left,
    Right,
}

impl Handedness {
    pub fn parse(s: &str) -> Option<Handedness> {
        match s {
            "Left" | "left" | "L" => Some(Handedness::Left),
            "Right" | "right" | "R" => Some(Handedness::Right),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Handedness::Left => "Left",
            Handedness::Right => "Right",
        }
    }
}

impl fmt::Display for Handedness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One detected hand in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct HandObservation {
    pub label: Handedness,
    /// Detector confidence in [0, 1].
    pub score: f64,
    /// Exactly [`HAND_POINTS`] normalized `[x, y]` coordinates.
    pub points: Vec<[f64; 2]>,
}

impl HandObservation {
    /// Euclidean wrist-to-thumb-tip distance; the apparent hand size used
    /// to pick among multiple candidate detections.
    pub fn hand_size(&self) -> f64 {
        let w = self.points[WRIST];
        let t = self.points[THUMB_TIP];
        ((w[0] - t[0]).powi(2) + (w[1] - t[1]).powi(2)).sqrt()
    }
}

/// One frame of a landmark file.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkFrame {
    pub frame_index: u64,
    pub timestamp_s: f64,
    pub hands: Vec<HandObservation>,
}

/// A parsed landmark recording.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoRecording {
    pub video_id: String,
    pub participant_id: String,
    pub hand: Handedness,
    pub frames: Vec<LandmarkFrame>,
    /// Frames per second derived from the first and last timestamps.
    pub fps: f64,
}

#[derive(Deserialize)]
struct RawHeader {
    video_id: String,
    participant_id: String,
    hand: String,
}

#[derive(Deserialize)]
struct RawFrame {
    frame: u64,
    t: f64,
    hands: Vec<RawHand>,
}

#[derive(Deserialize)]
struct RawHand {
    label: String,
    score: f64,
    points: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct OutHeader<'a> {
    video_id: &'a str,
    participant_id: &'a str,
    hand: &'a str,
}

#[derive(Serialize)]
struct OutFrame<'a> {
    frame: u64,
    t: f64,
    hands: Vec<OutHand<'a>>,
}

#[derive(Serialize)]
struct OutHand<'a> {
    label: &'a str,
    score: f64,
    points: &'a [[f64; 2]],
}

fn convert_hand(raw: RawHand, path: &Path, line: usize) -> Result<HandObservation> {
    let label = Handedness::parse(&raw.label)
        .ok_or_else(|| Error::malformed(path, line, format!("unknown hand label {:?}", raw.label)))?;
    if !(0.0..=1.0).contains(&raw.score) {
        return Err(Error::malformed(
            path,
            line,
            format!("detection score {} outside [0,1]", raw.score),
        ));
    }
    if raw.points.len() != HAND_POINTS {
        return Err(Error::malformed(
            path,
            line,
            format!("hand has {} points, expected {HAND_POINTS}", raw.points.len()),
        ));
    }
    let mut points = Vec::with_capacity(HAND_POINTS);
    for (i, p) in raw.points.iter().enumerate() {
        // A z coordinate may be present; only x and y are consumed.
        if p.len() != 2 && p.len() != 3 {
            return Err(Error::malformed(
                path,
                line,
                format!("point {i} has {} coordinates, expected 2 or 3", p.len()),
            ));
        }
        if !p[0].is_finite() || !p[1].is_finite() {
            return Err(Error::malformed(path, line, format!("point {i} is not finite")));
        }
        points.push([p[0], p[1]]);
    }
    Ok(HandObservation {
        label,
        score: raw.score,
        points,
    })
}

/// Parses one landmark JSONL file.
pub fn parse_landmark_file(path: &Path) -> Result<VideoRecording> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();

    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::malformed(path, 1, "empty file"))?;
    let first = first.map_err(|e| Error::io(path, e))?;
    let header: RawHeader = serde_json::from_str(&first)
        .map_err(|e| Error::malformed(path, 1, format!("bad header: {e}")))?;
    let hand = Handedness::parse(&header.hand)
        .ok_or_else(|| Error::malformed(path, 1, format!("unknown hand {:?}", header.hand)))?;

    let mut frames: Vec<LandmarkFrame> = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawFrame = serde_json::from_str(&line)
            .map_err(|e| Error::malformed(path, lineno, format!("bad frame record: {e}")))?;
        if !raw.t.is_finite() {
            return Err(Error::malformed(path, lineno, "timestamp is not finite"));
        }
        if let Some(prev) = frames.last() {
            if raw.frame <= prev.frame_index {
                return Err(Error::malformed(
                    path,
                    lineno,
                    format!(
                        "frame index {} does not increase (previous {})",
                        raw.frame, prev.frame_index
                    ),
                ));
            }
            if raw.t <= prev.timestamp_s {
                return Err(Error::malformed(
                    path,
                    lineno,
                    format!(
                        "timestamp {} does not increase (previous {})",
                        raw.t, prev.timestamp_s
                    ),
                ));
            }
        }
        let hands = raw
            .hands
            .into_iter()
            .map(|h| convert_hand(h, path, lineno))
            .collect::<Result<Vec<_>>>()?;
        frames.push(LandmarkFrame {
            frame_index: raw.frame,
            timestamp_s: raw.t,
            hands,
        });
    }

    if frames.len() < 2 {
        return Err(Error::invalid(format!(
            "{}: a recording needs at least 2 frames, got {}",
            path.display(),
            frames.len()
        )));
    }
    let duration = frames.last().unwrap().timestamp_s - frames[0].timestamp_s;
    let fps = (frames.len() - 1) as f64 / duration;

    Ok(VideoRecording {
        video_id: header.video_id,
        participant_id: header.participant_id,
        hand,
        frames,
        fps,
    })
}

/// Writes a recording in the same JSONL layout [`parse_landmark_file`] reads.
pub fn write_landmark_file(rec: &VideoRecording, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    serde_json::to_writer(
        &mut out,
        &OutHeader {
            video_id: &rec.video_id,
            participant_id: &rec.participant_id,
            hand: rec.hand.as_str(),
        },
    )
    .map_err(|e| Error::Internal(format!("serialize header: {e}")))?;
    out.push(b'\n');
    for frame in &rec.frames {
        let hands: Vec<OutHand> = frame
            .hands
            .iter()
            .map(|h| OutHand {
                label: h.label.as_str(),
                score: h.score,
                points: &h.points,
            })
            .collect();
        serde_json::to_writer(
            &mut out,
            &OutFrame {
                frame: frame.frame_index,
                t: frame.timestamp_s,
                hands,
            },
        )
        .map_err(|e| Error::Internal(format!("serialize frame: {e}")))?;
        out.push(b'\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Picks the hand observation the pipeline should track in one frame.
///
/// Candidates must carry the target label and score strictly above the
/// gate. Several candidates (detector glitches) are resolved by the largest
/// apparent hand size; exact ties keep the earliest list entry, so the
/// result does not depend on detector output order for distinct sizes.
pub fn select_target_hand(
    frame: &LandmarkFrame,
    target: Handedness,
    score_gate: f64,
) -> Option<&HandObservation> {
    let mut best: Option<(&HandObservation, f64)> = None;
    for hand in &frame.hands {
        if hand.label != target || hand.score <= score_gate {
            continue;
        }
        let size = hand.hand_size();
        match best {
            Some((_, best_size)) if size <= best_size => {}
            _ => best = Some((hand, size)),
        }
    }
    best.map(|(h, _)| h)
}

/// Who produced a rating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RaterRole {
    Expert,
    NonExpert,
}

/// One row of a ratings sheet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub video_id: String,
    pub participant_id: String,
    pub hand: String,
    pub rater_id: String,
    pub rater_role: RaterRole,
    /// Severity on the 0-4 scale.
    pub rating: u8,
    /// Rater flagged the video as difficult to score.
    pub difficult: bool,
}

/// Loads and validates a ratings CSV
/// (`video_id,participant_id,hand,rater_id,rater_role,rating,difficult`).
pub fn load_ratings(path: &Path) -> Result<Vec<RatingRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::malformed(path, 1, e.to_string()))?
        .clone();
    let mut records: Vec<(RatingRecord, usize)> = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0) as usize;
        let record: RatingRecord = row
            .deserialize(Some(&headers))
            .map_err(|e| Error::malformed(path, line, e.to_string()))?;
        if record.rating > 4 {
            return Err(Error::malformed(
                path,
                line,
                format!("rating {} outside 0-4", record.rating),
            ));
        }
        if let Some((_, dup_line)) = records
            .iter()
            .find(|(r, _)| r.video_id == record.video_id && r.rater_id == record.rater_id)
        {
            return Err(Error::malformed(
                path,
                line,
                format!(
                    "duplicate rating for video {:?} by rater {:?} (first at line {dup_line})",
                    record.video_id, record.rater_id
                ),
            ));
        }
        records.push((record, line));
    }
    Ok(records.into_iter().map(|(r, _)| r).collect())
}

/// Consensus severity from exactly three expert ratings: a value two
/// experts agree on wins, otherwise the mean rounded to the nearest
/// integer (a .5 tie cannot occur when all three differ).
pub fn consensus(values: [u8; 3]) -> u8 {
    let [a, b, c] = values;
    if a == b || a == c {
        return a;
    }
    if b == c {
        return b;
    }
    let mean = f64::from(u16::from(a) + u16::from(b) + u16::from(c)) / 3.0;
    mean.round() as u8
}

/// Ground truth for one video from its rating records.
///
/// Requires exactly three ratings, all from experts.
pub fn derive_ground_truth(ratings: &[RatingRecord]) -> Result<u8> {
    if ratings.len() != 3 {
        return Err(Error::invalid(format!(
            "ground truth needs exactly 3 expert ratings, got {}",
            ratings.len()
        )));
    }
    if let Some(bad) = ratings.iter().find(|r| r.rater_role != RaterRole::Expert) {
        return Err(Error::invalid(format!(
            "ground truth only uses expert ratings; rater {:?} is not an expert",
            bad.rater_id
        )));
    }
    Ok(consensus([ratings[0].rating, ratings[1].rating, ratings[2].rating]))
}

/// Participant sex as recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
    #[serde(other)]
    Other,
}

/// Clinical status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PdStatus {
    Pd,
    Control,
    #[serde(other)]
    Unknown,
}

/// Where the video was recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Environment {
    Home,
    Clinic,
    #[serde(other)]
    Unknown,
}

/// One row of a demographics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantInfo {
    pub participant_id: String,
    /// Years; empty cells are allowed.
    pub age: Option<f64>,
    pub sex: Sex,
    /// Free text; "white" (case-insensitive) is grouped against the rest
    /// in bias analysis.
    pub race: String,
    pub pd_status: PdStatus,
    pub environment: Environment,
}

/// Loads a demographics CSV
/// (`participant_id,age,sex,race,pd_status,environment`).
pub fn load_demographics(path: &Path) -> Result<Vec<ParticipantInfo>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::malformed(path, 1, e.to_string()))?
        .clone();
    let mut records: Vec<ParticipantInfo> = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0) as usize;
        let record: ParticipantInfo = row
            .deserialize(Some(&headers))
            .map_err(|e| Error::malformed(path, line, e.to_string()))?;
        if let Some(age) = record.age {
            if !(age >= 0.0) {
                return Err(Error::malformed(path, line, format!("negative age {age}")));
            }
        }
        if records
            .iter()
            .any(|r| r.participant_id == record.participant_id)
        {
            return Err(Error::malformed(
                path,
                line,
                format!("duplicate participant {:?}", record.participant_id),
            ));
        }
        records.push(record);
    }
    Ok(records)
}
