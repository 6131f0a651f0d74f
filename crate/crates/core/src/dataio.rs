//! Frame sequences, landmark tracks, ground-truth annotations and dataset
//! parameter sets.
//!
//! Frame sources are either a directory of binary PGM (`P5`, 8-bit) images,
//! read in lexicographic file-name order, or a single packed raw file:
//!
//! ```text
//! offset  0: magic  u32 LE  (b"MESV")
//! offset  4: width  u32 LE
//! offset  8: height u32 LE
//! offset 12: frames u32 LE
//! offset 16: frames × height × width bytes, row-major
//! ```

use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of facial landmarks per frame.
pub const LANDMARK_COUNT: usize = 84;

/// Magic number of the packed raw format.
pub const PACKED_MAGIC: u32 = u32::from_le_bytes(*b"MESV");

const PACKED_HEADER_LEN: usize = 16;

/// An 8-bit grayscale image stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayFrame {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl GrayFrame {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(Error::dims(
                format!("{expected} pixels"),
                format!("{} pixels", pixels.len()),
            ));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width as usize * height as usize],
        }
    }

    /// Pixel at 0-based column `x`, row `y`.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width as usize + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        let w = self.width as usize;
        self.pixels[y * w + x] = value;
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }
}

/// Per-video metadata that does not live in the frame files.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoMeta {
    pub video_id: String,
    pub subject_id: String,
    pub fps: f64,
    pub first_index: u32,
}

/// The ordered frames of one video.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub video_id: String,
    pub subject_id: String,
    pub fps: f64,
    pub frames: Vec<GrayFrame>,
    /// Frame number of `frames[0]` (1-based).
    pub first_index: u32,
}

impl FrameSequence {
    pub fn new(meta: VideoMeta, frames: Vec<GrayFrame>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::EmptyVideo(meta.video_id));
        }
        if !(meta.fps > 0.0) {
            return Err(Error::Config(format!(
                "video `{}`: fps must be positive",
                meta.video_id
            )));
        }
        if meta.first_index == 0 {
            return Err(Error::Config(format!(
                "video `{}`: frame indices are 1-based",
                meta.video_id
            )));
        }
        let dims = frames[0].dims();
        if let Some(bad) = frames.iter().find(|f| f.dims() != dims) {
            return Err(Error::dims(
                format!("{}x{}", dims.0, dims.1),
                format!("{}x{}", bad.width, bad.height),
            ));
        }
        Ok(Self {
            video_id: meta.video_id,
            subject_id: meta.subject_id,
            fps: meta.fps,
            frames,
            first_index: meta.first_index,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (u32, u32) {
        self.frames[0].dims()
    }

    /// Frame number of the last frame.
    pub fn last_index(&self) -> u32 {
        self.first_index + self.frames.len() as u32 - 1
    }

    /// Frame at 1-based position `pos` within the video (`1..=len`).
    pub fn at_position(&self, pos: usize) -> &GrayFrame {
        &self.frames[pos - 1]
    }
}

/// Loads a video from a PGM directory or a packed raw file.
pub fn load_frame_sequence(path: &Path, meta: VideoMeta) -> Result<FrameSequence> {
    let frames = if path.is_dir() {
        load_pgm_dir(path)?
    } else {
        read_packed_raw(path)?
    };
    if frames.is_empty() {
        return Err(Error::EmptyVideo(meta.video_id));
    }
    FrameSequence::new(meta, frames)
}

fn load_pgm_dir(dir: &Path) -> Result<Vec<GrayFrame>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let p = entry.path();
        let is_pgm = p
            .extension()
            .map(|e| e.eq_ignore_ascii_case("pgm"))
            .unwrap_or(false);
        if is_pgm && p.is_file() {
            paths.push(p);
        }
    }
    paths.sort();
    paths.iter().map(|p| read_pgm(p)).collect()
}

pub fn read_pgm(path: &Path) -> Result<GrayFrame> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes).map_err(|msg| {
        Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::InvalidData, msg),
        )
    })
}

/// Decodes a binary `P5` PGM with maxval ≤ 255.
pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<GrayFrame, String> {
    let mut pos = 0usize;
    let mut header = [0u32; 3];

    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err("not a binary PGM (missing P5 magic)".into());
    }
    pos += 2;
    for slot in header.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err("truncated PGM header".into()),
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err("malformed PGM header".into());
        }
        *slot = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| "PGM header value out of range".to_string())?;
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err("malformed PGM header".into());
    }
    pos += 1;

    let [width, height, maxval] = header;
    if maxval == 0 || maxval > 255 {
        return Err(format!("unsupported PGM maxval {maxval}"));
    }
    let n = width as usize * height as usize;
    if bytes.len() < pos + n {
        return Err(format!(
            "PGM raster truncated: expected {n} bytes, found {}",
            bytes.len() - pos
        ));
    }
    GrayFrame::new(width, height, bytes[pos..pos + n].to_vec()).map_err(|e| e.to_string())
}

pub fn encode_pgm(frame: &GrayFrame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend_from_slice(&frame.pixels);
    out
}

pub fn write_pgm(path: &Path, frame: &GrayFrame) -> Result<()> {
    fs::write(path, encode_pgm(frame)).map_err(|e| Error::io(path, e))
}

/// Writes frames as `frame_000001.pgm`, `frame_000002.pgm`, ... so that
/// lexicographic order equals frame order.
pub fn write_pgm_dir(dir: &Path, frames: &[GrayFrame]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, frame) in frames.iter().enumerate() {
        write_pgm(&dir.join(format!("frame_{:06}.pgm", i + 1)), frame)?;
    }
    Ok(())
}

pub fn read_packed_raw(path: &Path) -> Result<Vec<GrayFrame>> {
    let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = [0u8; PACKED_HEADER_LEN];
    file.read_exact(&mut header)
        .map_err(|e| Error::io(path, e))?;
    let word = |i: usize| u32::from_le_bytes(header[i * 4..i * 4 + 4].try_into().unwrap());
    if word(0) != PACKED_MAGIC {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::InvalidData, "bad packed-raw magic"),
        ));
    }
    let (width, height, count) = (word(1), word(2), word(3));
    let frame_len = width as usize * height as usize;
    let mut frames = Vec::with_capacity(count as usize);
    for i in 0..count {
        let mut pixels = vec![0u8; frame_len];
        file.read_exact(&mut pixels).map_err(|e| {
            Error::io(
                path,
                std::io::Error::new(
                    e.kind(),
                    format!("packed raw truncated in frame {} of {count}", i + 1),
                ),
            )
        })?;
        frames.push(GrayFrame {
            width,
            height,
            pixels,
        });
    }
    Ok(frames)
}

pub fn write_packed_raw(path: &Path, frames: &[GrayFrame]) -> Result<()> {
    let (width, height) = frames.first().map(GrayFrame::dims).unwrap_or((0, 0));
    let mut out =
        Vec::with_capacity(PACKED_HEADER_LEN + frames.len() * width as usize * height as usize);
    for word in [PACKED_MAGIC, width, height, frames.len() as u32] {
        out.extend_from_slice(&word.to_le_bytes());
    }
    for f in frames {
        if f.dims() != (width, height) {
            return Err(Error::dims(
                format!("{width}x{height}"),
                format!("{}x{}", f.width, f.height),
            ));
        }
        out.extend_from_slice(&f.pixels);
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))
}

/// A 2-D point in pixel coordinates. Pixel centers sit on integer
/// coordinates, with `(1, 1)` the top-left pixel.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn midpoint(&self, other: &Point2) -> Point2 {
        Point2::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }
}

pub type Landmarks = [Point2; LANDMARK_COUNT];

/// Dense per-frame landmarks covering `first_frame..first_frame+len`.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkTrack {
    pub first_frame: u32,
    pub frames: Vec<Landmarks>,
}

impl LandmarkTrack {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn last_frame(&self) -> u32 {
        self.first_frame + self.frames.len() as u32 - 1
    }

    /// Landmarks of frame number `frame`; frames outside the track hold the
    /// nearest tracked entry.
    pub fn at(&self, frame: u32) -> &Landmarks {
        let idx = frame.clamp(self.first_frame, self.last_frame()) - self.first_frame;
        &self.frames[idx as usize]
    }

    /// Re-indexes the track onto exactly `len` frames starting at `first`.
    pub fn aligned_to(&self, first: u32, len: usize) -> LandmarkTrack {
        LandmarkTrack {
            first_frame: first,
            frames: (0..len as u32).map(|i| *self.at(first + i)).collect(),
        }
    }
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader)
}

/// Parses `frame_idx, x1, y1, ..., x84, y84` rows. A non-numeric first row is
/// taken as a header. Gaps between listed frames are filled by linear
/// interpolation.
pub fn parse_landmark_track<R: Read>(reader: R) -> Result<LandmarkTrack> {
    const COLS: usize = 1 + 2 * LANDMARK_COUNT;
    let mut rows: Vec<(u32, Landmarks)> = Vec::new();

    for (i, rec) in csv_reader(reader).records().enumerate() {
        let rec = rec.map_err(|e| Error::format(i + 1, e.to_string()))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(i + 1);
        if rec.len() != COLS {
            return Err(Error::format(
                line,
                format!("expected {COLS} columns, found {}", rec.len()),
            ));
        }
        let Ok(frame) = rec[0].parse::<u32>() else {
            if i == 0 && rec[0].parse::<f64>().is_err() {
                continue;
            }
            return Err(Error::format(
                line,
                format!("bad frame index `{}`", &rec[0]),
            ));
        };
        if frame == 0 {
            return Err(Error::format(line, "frame indices are 1-based"));
        }
        let mut pts = [Point2::default(); LANDMARK_COUNT];
        for (k, p) in pts.iter_mut().enumerate() {
            let parse = |s: &str| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::format(line, format!("bad coordinate `{s}`")))
            };
            p.x = parse(&rec[1 + 2 * k])?;
            p.y = parse(&rec[2 + 2 * k])?;
        }
        rows.push((frame, pts));
    }
    if rows.is_empty() {
        return Err(Error::EmptyTrack);
    }
    rows.sort_by_key(|r| r.0);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::format(0, format!("frame {} listed twice", w[0].0)));
    }

    let first_frame = rows[0].0;
    let mut frames = Vec::with_capacity((rows.last().unwrap().0 - first_frame + 1) as usize);
    frames.push(rows[0].1);
    for w in rows.windows(2) {
        let (f0, a) = (w[0].0, &w[0].1);
        let (f1, b) = (w[1].0, &w[1].1);
        let span = (f1 - f0) as f64;
        for f in f0 + 1..f1 {
            let t = (f - f0) as f64 / span;
            let mut pts = [Point2::default(); LANDMARK_COUNT];
            for k in 0..LANDMARK_COUNT {
                pts[k] = Point2::new(
                    a[k].x + t * (b[k].x - a[k].x),
                    a[k].y + t * (b[k].y - a[k].y),
                );
            }
            frames.push(pts);
        }
        frames.push(*b);
    }
    Ok(LandmarkTrack {
        first_frame,
        frames,
    })
}

pub fn read_landmark_track(path: &Path) -> Result<LandmarkTrack> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_landmark_track(std::io::BufReader::new(file))
}

/// Writes one row per frame. Coordinates use the shortest representation
/// that parses back to the same `f64`.
pub fn write_landmark_track<W: Write>(mut out: W, track: &LandmarkTrack) -> std::io::Result<()> {
    for (i, pts) in track.frames.iter().enumerate() {
        write!(out, "{}", track.first_frame as usize + i)?;
        for p in pts {
            write!(out, ",{:?},{:?}", p.x, p.y)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Micro,
    Macro,
    Blink,
    Other,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Micro => "micro",
            EventKind::Macro => "macro",
            EventKind::Blink => "blink",
            EventKind::Other => "other",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "micro" | "me" => Ok(EventKind::Micro),
            "macro" => Ok(EventKind::Macro),
            "blink" => Ok(EventKind::Blink),
            "other" => Ok(EventKind::Other),
            _ => Err(format!("unknown event kind `{s}`")),
        }
    }
}

/// An annotated facial movement. Both `onset` and `offset` belong to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthInterval {
    pub video_id: String,
    pub kind: EventKind,
    pub onset: u32,
    pub apex: Option<u32>,
    pub offset: u32,
}

impl GroundTruthInterval {
    /// Number of frames covered.
    pub fn frame_count(&self) -> u32 {
        self.offset - self.onset + 1
    }
}

/// Parses `video_id, kind, onset, apex, offset` rows (apex may be empty).
/// A first row whose onset column is not a number is skipped as a header.
/// The result is sorted by video id, then onset.
pub fn parse_ground_truth<R: Read>(reader: R) -> Result<Vec<GroundTruthInterval>> {
    let mut out = Vec::new();
    for (i, rec) in csv_reader(reader).records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::format(row, e.to_string()))?;
        if rec.len() != 5 {
            return Err(Error::format(
                row,
                format!("expected 5 columns, found {}", rec.len()),
            ));
        }
        if i == 0 && rec[2].parse::<u32>().is_err() {
            continue;
        }
        let num = |s: &str, what: &str| {
            s.parse::<u32>()
                .map_err(|_| Error::format(row, format!("bad {what} `{s}`")))
        };
        let kind = rec[1]
            .parse::<EventKind>()
            .map_err(|m| Error::format(row, m))?;
        let onset = num(&rec[2], "onset")?;
        let apex = if rec[3].is_empty() {
            None
        } else {
            Some(num(&rec[3], "apex")?)
        };
        let offset = num(&rec[4], "offset")?;
        if onset == 0 {
            return Err(Error::InvalidInterval {
                row,
                message: "frame indices are 1-based".into(),
            });
        }
        if onset > offset {
            return Err(Error::InvalidInterval {
                row,
                message: format!("onset {onset} > offset {offset}"),
            });
        }
        if let Some(a) = apex {
            if a < onset || a > offset {
                return Err(Error::InvalidInterval {
                    row,
                    message: format!("apex {a} outside [{onset}, {offset}]"),
                });
            }
        }
        out.push(GroundTruthInterval {
            video_id: rec[0].to_string(),
            kind,
            onset,
            apex,
            offset,
        });
    }
    out.sort_by(|a, b| {
        (a.video_id.as_str(), a.onset, a.offset).cmp(&(b.video_id.as_str(), b.onset, b.offset))
    });
    Ok(out)
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruthInterval>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_ground_truth(std::io::BufReader::new(file))
}

pub fn write_ground_truth<W: Write>(
    mut out: W,
    intervals: &[GroundTruthInterval],
) -> std::io::Result<()> {
    for g in intervals {
        let apex = g.apex.map(|a| a.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{}",
            g.video_id, g.kind, g.onset, apex, g.offset
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetName {
    Samm,
    Casme2,
}

impl FromStr for DatasetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "samm" => Ok(DatasetName::Samm),
            "casme2" | "casme" => Ok(DatasetName::Casme2),
            _ => Err(Error::UnknownDataset(s.to_string())),
        }
    }
}

/// Video-level processing parameters of one database.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub name: String,
    pub fps: f64,
    /// Length of the video sliding window, frames.
    pub l_window: usize,
    /// Overlap between consecutive video windows, frames.
    pub l_overlap: usize,
    /// Length of the intra-ROI analysis window, frames.
    pub l_interval: usize,
    /// Fixed ROI side in pixels; `None` derives it from the inner-eye distance.
    pub size_roi: Option<u32>,
    /// Peak-selection threshold ratio of the LBP-χ² spotter.
    pub tau: f64,
}

pub fn dataset_config(name: DatasetName) -> DatasetConfig {
    match name {
        DatasetName::Samm => DatasetConfig {
            name: "SAMM".into(),
            fps: 200.0,
            l_window: 200,
            l_overlap: 60,
            l_interval: 60,
            size_roi: Some(15),
            tau: 0.05,
        },
        DatasetName::Casme2 => DatasetConfig {
            name: "CASME2".into(),
            fps: 30.0,
            l_window: 30,
            l_overlap: 9,
            l_interval: 9,
            size_roi: Some(10),
            tau: 0.15,
        },
    }
}

/// Looks up a dataset by name, e.g. `"SAMM"` or `"casme2"`.
pub fn dataset_config_by_name(name: &str) -> Result<DatasetConfig> {
    Ok(dataset_config(name.parse()?))
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.fps > 0.0) {
            return fail(format!("fps must be positive, got {}", self.fps));
        }
        if self.l_overlap == 0 || self.l_overlap >= self.l_window {
            return fail(format!(
                "need 0 < l_overlap < l_window, got {} / {}",
                self.l_overlap, self.l_window
            ));
        }
        if self.l_interval < 2 {
            return fail(format!("l_interval must be >= 2, got {}", self.l_interval));
        }
        if let Some(s) = self.size_roi {
            if s < 4 {
                return fail(format!("size_roi must be >= 4, got {s}"));
            }
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return fail(format!("tau must lie in [0, 1], got {}", self.tau));
        }
        Ok(())
    }

    /// Applies `key = value` overrides on top of `self`. A `dataset` key
    /// resets to that dataset's defaults before later keys apply.
    pub fn apply_overrides(mut self, text: &str) -> Result<Self> {
        for kv in parse_key_values(text)? {
            let bad = |what: &str| Error::format(kv.line, format!("bad {what} `{}`", kv.value));
            match kv.key.as_str() {
                "dataset" => self = dataset_config_by_name(&kv.value)?,
                "name" => self.name = kv.value.clone(),
                "fps" => self.fps = kv.value.parse().map_err(|_| bad("fps"))?,
                "l_window" => self.l_window = kv.value.parse().map_err(|_| bad("l_window"))?,
                "l_overlap" => self.l_overlap = kv.value.parse().map_err(|_| bad("l_overlap"))?,
                "l_interval" => {
                    self.l_interval = kv.value.parse().map_err(|_| bad("l_interval"))?
                }
                "size_roi" => {
                    self.size_roi = if kv.value.eq_ignore_ascii_case("formula") {
                        None
                    } else {
                        Some(kv.value.parse().map_err(|_| bad("size_roi"))?)
                    }
                }
                "tau" => self.tau = kv.value.parse().map_err(|_| bad("tau"))?,
                other => {
                    return Err(Error::format(kv.line, format!("unknown key `{other}`")));
                }
            }
        }
        self.validate()?;
        Ok(self)
    }

    /// Reads a config file. Without a `dataset` key the overrides start from
    /// CASME2 defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        dataset_config(DatasetName::Casme2).apply_overrides(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyValue {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Splits `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<KeyValue>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::format(
                i + 1,
                format!("expected `key = value`, got `{line}`"),
            ));
        };
        let key = k.trim();
        if key.is_empty() {
            return Err(Error::format(i + 1, "empty key"));
        }
        out.push(KeyValue {
            line: i + 1,
            key: key.to_string(),
            value: v.trim().to_string(),
        });
    }
    Ok(out)
}
