//! ROI squares anchored on facial landmarks.
//!
//! Landmark indices follow the 84-point scheme in [`landmark`]. The mapping
//! from ROI to landmark is data ([`RoiLayoutMap`]) so a different tracker's
//! numbering only needs a new layout file:
//!
//! ```text
//! inner_eye = 10,18
//! roi.0 = 0 eyebrow
//! roi.10 = 31 nose_reference
//! roi.8 = 39,40 mouth        # midpoint of two landmarks
//! ```
//!
//! Rectangles use 1-based inclusive pixel coordinates, the same frame as the
//! landmarks (pixel centers on integers).

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataio::{
    parse_key_values, DatasetConfig, GrayFrame, Landmarks, Point2, LANDMARK_COUNT,
};
use crate::error::{Error, Result};

pub const ROI_COUNT: usize = 12;

/// Smallest ROI side accepted anywhere.
pub const MIN_ROI_SIDE: u32 = 4;

/// Indices of the default 84-point landmark scheme.
pub mod landmark {
    use std::ops::RangeInclusive;

    /// Brow on the image-left side, inner end first.
    pub const BROW_A: RangeInclusive<usize> = 0..=4;
    /// Brow on the image-right side, inner end first.
    pub const BROW_B: RangeInclusive<usize> = 5..=9;
    /// Eye on the image-left side; 10 is the inner corner, 14 the outer.
    pub const EYE_A: RangeInclusive<usize> = 10..=17;
    /// Eye on the image-right side; 18 is the inner corner, 22 the outer.
    pub const EYE_B: RangeInclusive<usize> = 18..=25;
    /// Bridge (26..=29) then the nose base (30..=37).
    pub const NOSE: RangeInclusive<usize> = 26..=37;
    /// Outer lip contour, starting at the image-left corner (38), over the
    /// upper lip to the right corner (48) and back along the lower lip.
    pub const MOUTH_OUTER: RangeInclusive<usize> = 38..=57;
    pub const MOUTH_INNER: RangeInclusive<usize> = 58..=65;
    pub const CONTOUR: RangeInclusive<usize> = 66..=83;

    pub const BROW_A_INNER: usize = 0;
    pub const BROW_A_MID: usize = 2;
    pub const BROW_A_OUTER: usize = 4;
    pub const BROW_B_INNER: usize = 5;
    pub const BROW_B_MID: usize = 7;
    pub const BROW_B_OUTER: usize = 9;
    pub const EYE_A_INNER: usize = 10;
    pub const EYE_B_INNER: usize = 18;
    pub const NOSE_SIDE_A: usize = 31;
    pub const NOSE_SIDE_B: usize = 35;
    pub const MOUTH_CORNER_A: usize = 38;
    pub const UPPER_LIP_A: usize = 40;
    pub const UPPER_LIP_B: usize = 46;
    pub const MOUTH_CORNER_B: usize = 48;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoiRole {
    Eyebrow,
    Mouth,
    NoseReference,
}

impl RoiRole {
    pub fn as_str(&self) -> &'static str {
        match self {
            RoiRole::Eyebrow => "eyebrow",
            RoiRole::Mouth => "mouth",
            RoiRole::NoseReference => "nose_reference",
        }
    }

    pub fn is_nose(&self) -> bool {
        matches!(self, RoiRole::NoseReference)
    }
}

impl fmt::Display for RoiRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RoiRole {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "eyebrow" => Ok(RoiRole::Eyebrow),
            "mouth" => Ok(RoiRole::Mouth),
            "nose_reference" | "nose" => Ok(RoiRole::NoseReference),
            _ => Err(format!("unknown ROI role `{s}`")),
        }
    }
}

/// How one ROI center is derived from the landmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub roi_id: usize,
    pub landmark: usize,
    /// When set, the center is the midpoint of both landmarks.
    pub second: Option<usize>,
    pub role: RoiRole,
}

impl LayoutEntry {
    pub fn center(&self, landmarks: &Landmarks) -> Point2 {
        let p = landmarks[self.landmark];
        match self.second {
            Some(q) => p.midpoint(&landmarks[q]),
            None => p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiLayoutMap {
    /// Sorted by `roi_id`, ids `0..12`.
    pub entries: Vec<LayoutEntry>,
    /// Left and right inner eye corners.
    pub inner_eye: (usize, usize),
}

impl Default for RoiLayoutMap {
    /// Four brow corners, two mouth corners, two mid-brow and two upper-lip
    /// auxiliary points, and the two sides of the nose.
    fn default() -> Self {
        use landmark::*;
        let e = |roi_id, landmark, role| LayoutEntry {
            roi_id,
            landmark,
            second: None,
            role,
        };
        RoiLayoutMap {
            entries: vec![
                e(0, BROW_A_INNER, RoiRole::Eyebrow),
                e(1, BROW_A_OUTER, RoiRole::Eyebrow),
                e(2, BROW_B_INNER, RoiRole::Eyebrow),
                e(3, BROW_B_OUTER, RoiRole::Eyebrow),
                e(4, MOUTH_CORNER_A, RoiRole::Mouth),
                e(5, MOUTH_CORNER_B, RoiRole::Mouth),
                e(6, BROW_A_MID, RoiRole::Eyebrow),
                e(7, BROW_B_MID, RoiRole::Eyebrow),
                e(8, UPPER_LIP_A, RoiRole::Mouth),
                e(9, UPPER_LIP_B, RoiRole::Mouth),
                e(10, NOSE_SIDE_A, RoiRole::NoseReference),
                e(11, NOSE_SIDE_B, RoiRole::NoseReference),
            ],
            inner_eye: (EYE_A_INNER, EYE_B_INNER),
        }
    }
}

impl RoiLayoutMap {
    pub fn validate(&self) -> Result<()> {
        if self.entries.len() != ROI_COUNT {
            return Err(Error::Config(format!(
                "layout needs {ROI_COUNT} ROIs, found {}",
                self.entries.len()
            )));
        }
        for (i, e) in self.entries.iter().enumerate() {
            if e.roi_id != i {
                return Err(Error::Config(format!(
                    "layout ROI ids must be 0..{ROI_COUNT} without gaps (missing {i})"
                )));
            }
            let bad = e.landmark >= LANDMARK_COUNT || e.second.is_some_and(|s| s >= LANDMARK_COUNT);
            if bad {
                return Err(Error::Config(format!(
                    "ROI {i}: landmark index out of range"
                )));
            }
        }
        let noses = self.entries.iter().filter(|e| e.role.is_nose()).count();
        if noses != 2 {
            return Err(Error::Config(format!(
                "layout needs exactly 2 nose_reference ROIs, found {noses}"
            )));
        }
        let (a, b) = self.inner_eye;
        if a >= LANDMARK_COUNT || b >= LANDMARK_COUNT || a == b {
            return Err(Error::Config("bad inner_eye landmark pair".into()));
        }
        Ok(())
    }

    pub fn roles(&self) -> Vec<RoiRole> {
        self.entries.iter().map(|e| e.role).collect()
    }

    /// Parses a layout file; keys it does not mention keep their default.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = RoiLayoutMap::default();
        let index = |s: &str, line: usize| -> Result<usize> {
            s.trim()
                .parse()
                .map_err(|_| Error::format(line, format!("bad landmark index `{s}`")))
        };
        for kv in parse_key_values(text)? {
            if kv.key == "inner_eye" {
                let Some((a, b)) = kv.value.split_once(',') else {
                    return Err(Error::format(kv.line, "inner_eye needs two indices"));
                };
                map.inner_eye = (index(a, kv.line)?, index(b, kv.line)?);
                continue;
            }
            let Some(id) = kv.key.strip_prefix("roi.") else {
                return Err(Error::format(kv.line, format!("unknown key `{}`", kv.key)));
            };
            let roi_id: usize = id
                .parse()
                .ok()
                .filter(|&i| i < ROI_COUNT)
                .ok_or_else(|| Error::format(kv.line, format!("bad ROI id `{id}`")))?;
            let mut parts = kv.value.split_whitespace();
            let (Some(idx), Some(role), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::format(
                    kv.line,
                    "expected `<landmark>[,<landmark>] <role>`",
                ));
            };
            let (landmark, second) = match idx.split_once(',') {
                Some((a, b)) => (index(a, kv.line)?, Some(index(b, kv.line)?)),
                None => (index(idx, kv.line)?, None),
            };
            let role = role.parse().map_err(|m| Error::format(kv.line, m))?;
            map.entries[roi_id] = LayoutEntry {
                roi_id,
                landmark,
                second,
                role,
            };
        }
        map.validate()?;
        Ok(map)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("inner_eye = {},{}\n", self.inner_eye.0, self.inner_eye.1);
        for e in &self.entries {
            let idx = match e.second {
                Some(q) => format!("{},{q}", e.landmark),
                None => e.landmark.to_string(),
            };
            s.push_str(&format!("roi.{} = {idx} {}\n", e.roi_id, e.role));
        }
        s
    }
}

/// A square ROI, `x0..=x0+side-1` × `y0..=y0+side-1` in 1-based pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiRect {
    pub roi_id: usize,
    pub role: RoiRole,
    /// Integer pixel center before clamping.
    pub center: Point2,
    pub side: u32,
    pub x0: u32,
    pub y0: u32,
}

impl RoiRect {
    pub fn x1(&self) -> u32 {
        self.x0 + self.side - 1
    }

    pub fn y1(&self) -> u32 {
        self.y0 + self.side - 1
    }
}

pub fn inner_eye_distance(landmarks: &Landmarks, layout: &RoiLayoutMap) -> Result<f64> {
    let (a, b) = layout.inner_eye;
    let d = landmarks[a].distance(&landmarks[b]);
    if d == 0.0 || !d.is_finite() {
        return Err(Error::DegenerateFace);
    }
    Ok(d)
}

/// ROI side: the configured fixed size, else a fifth of the inner-eye
/// distance (rounded, at least [`MIN_ROI_SIDE`]).
pub fn roi_side(inner_eye: f64, config: &DatasetConfig) -> u32 {
    match config.size_roi {
        Some(side) => side,
        None => ((inner_eye / 5.0).round() as u32).max(MIN_ROI_SIDE),
    }
}

/// Places the 12 ROI squares for one window from its first frame's
/// landmarks. Squares crossing the border are shifted back inside.
pub fn roi_layout(
    landmarks: &Landmarks,
    side: u32,
    layout: &RoiLayoutMap,
    frame_dims: (u32, u32),
) -> Result<Vec<RoiRect>> {
    let (width, height) = frame_dims;
    layout
        .entries
        .iter()
        .map(|entry| {
            let out_of_frame = Error::RoiOutOfFrame {
                roi_id: entry.roi_id,
                width,
                height,
            };
            let c = entry.center(landmarks);
            if !c.x.is_finite() || !c.y.is_finite() || side > width || side > height {
                return Err(out_of_frame);
            }
            let center = Point2::new(c.x.round(), c.y.round());
            let half = (side / 2) as f64;
            let place = |c: f64, limit: u32| -> Option<u32> {
                let lo = c - half;
                let hi = lo + side as f64 - 1.0;
                if hi < 1.0 || lo > limit as f64 {
                    return None;
                }
                Some(lo.clamp(1.0, (limit - side + 1) as f64) as u32)
            };
            match (place(center.x, width), place(center.y, height)) {
                (Some(x0), Some(y0)) => Ok(RoiRect {
                    roi_id: entry.roi_id,
                    role: entry.role,
                    center,
                    side,
                    x0,
                    y0,
                }),
                _ => Err(out_of_frame),
            }
        })
        .collect()
}

/// Pixel patches of one ROI over a run of frames, each flattened row-major
/// to `side²` values.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiTrack {
    pub roi_id: usize,
    pub side: u32,
    pub patches: Vec<Vec<f64>>,
}

impl RoiTrack {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn dim(&self) -> usize {
        (self.side * self.side) as usize
    }
}

pub fn extract_roi_track(frames: &[GrayFrame], rect: &RoiRect) -> RoiTrack {
    let side = rect.side as usize;
    let patches = frames
        .iter()
        .map(|f| {
            let mut patch = Vec::with_capacity(side * side);
            for y in 0..side {
                let row = rect.y0 as usize - 1 + y;
                for x in 0..side {
                    patch.push(f.get(rect.x0 as usize - 1 + x, row) as f64);
                }
            }
            patch
        })
        .collect();
    RoiTrack {
        roi_id: rect.roi_id,
        side: rect.side,
        patches,
    }
}
