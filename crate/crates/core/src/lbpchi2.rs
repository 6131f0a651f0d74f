//! Texture-difference spotter: uniform LBP histograms over a 6×6 block grid,
//! χ² distances across an interval, contrast and peak picking.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::OnceLock;

use crate::dataio::{DatasetConfig, FrameSequence, GrayFrame, LandmarkTrack, Landmarks};
use crate::error::{Error, Result};
use crate::fusion::{Method, SpottedInterval};
use crate::windowing::{segment_video, WindowSpan};

pub const LBP_RADIUS: f64 = 3.0;
pub const LBP_POINTS: usize = 8;
/// 58 uniform codes of 8 bits plus one catch-all bin.
pub const LBP_BINS: usize = 59;
pub const GRID_SIDE: usize = 6;
pub const OVERLAP_X: f64 = 0.2;
pub const OVERLAP_Y: f64 = 0.3;
/// Margin added on each side of the landmark bounding box, relative to its size.
pub const FACE_MARGIN: f64 = 0.05;

/// Pixel rectangle, 1-based, `x0..x0+width` × `y0..y0+height`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub x0: u32,
    pub y0: u32,
    pub width: u32,
    pub height: u32,
}

impl Rect {
    pub fn x1(&self) -> u32 {
        self.x0 + self.width - 1
    }

    pub fn y1(&self) -> u32 {
        self.y0 + self.height - 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockGrid {
    pub region: Rect,
    /// Row-major, 36 blocks.
    pub blocks: Vec<Rect>,
}

fn axis(origin: u32, extent: u32, overlap: f64) -> Vec<(u32, u32)> {
    let n = GRID_SIDE as f64;
    let size = extent as f64 / (1.0 + (n - 1.0) * (1.0 - overlap));
    let len = size.floor() as u32;
    let step = size * (1.0 - overlap);
    let last_start = origin + extent - len.min(extent);
    (0..GRID_SIDE)
        .map(|i| {
            let start = origin + (i as f64 * step).round() as u32;
            (start.min(last_start), len)
        })
        .collect()
}

impl BlockGrid {
    pub fn new(region: Rect) -> Result<Self> {
        let xs = axis(region.x0, region.width, OVERLAP_X);
        let ys = axis(region.y0, region.height, OVERLAP_Y);
        let min_side = 2 * LBP_RADIUS.ceil() as u32 + 1;
        let (bw, bh) = (xs[0].1, ys[0].1);
        if bw < min_side || bh < min_side {
            return Err(Error::BlockTooSmall {
                width: bw as usize,
                height: bh as usize,
                radius: LBP_RADIUS.ceil() as usize,
            });
        }
        let mut blocks = Vec::with_capacity(GRID_SIDE * GRID_SIDE);
        for &(y0, height) in &ys {
            for &(x0, width) in &xs {
                blocks.push(Rect {
                    x0,
                    y0,
                    width,
                    height,
                });
            }
        }
        Ok(Self { region, blocks })
    }

    /// Grid over the landmark bounding box grown by 10%, clamped to the frame.
    pub fn from_landmarks(landmarks: &Landmarks, dims: (u32, u32)) -> Result<Self> {
        let (mut lo_x, mut lo_y) = (f64::INFINITY, f64::INFINITY);
        let (mut hi_x, mut hi_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in landmarks {
            lo_x = lo_x.min(p.x);
            lo_y = lo_y.min(p.y);
            hi_x = hi_x.max(p.x);
            hi_y = hi_y.max(p.y);
        }
        if !(lo_x.is_finite() && lo_y.is_finite() && hi_x.is_finite() && hi_y.is_finite()) {
            return Err(Error::DegenerateFace);
        }
        let (mx, my) = ((hi_x - lo_x) * FACE_MARGIN, (hi_y - lo_y) * FACE_MARGIN);
        let clamp = |v: f64, limit: u32| v.clamp(1.0, limit as f64) as u32;
        let x0 = clamp((lo_x - mx).floor(), dims.0);
        let x1 = clamp((hi_x + mx).ceil(), dims.0);
        let y0 = clamp((lo_y - my).floor(), dims.1);
        let y1 = clamp((hi_y + my).ceil(), dims.1);
        Self::new(Rect {
            x0,
            y0,
            width: x1 - x0 + 1,
            height: y1 - y0 + 1,
        })
    }
}

/// Number of 0/1 changes walking once around the 8-bit circle.
fn circular_transitions(code: u8) -> u32 {
    (code ^ code.rotate_left(1)).count_ones()
}

/// Code → bin: uniform codes in increasing order take bins 0..58, all other
/// codes share bin 58.
pub fn uniform_bin_table() -> &'static [u8; 256] {
    static TABLE: OnceLock<[u8; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [(LBP_BINS - 1) as u8; 256];
        let mut next = 0u8;
        for code in 0..=255u8 {
            if circular_transitions(code) <= 2 {
                table[code as usize] = next;
                next += 1;
            }
        }
        debug_assert_eq!(next as usize, LBP_BINS - 1);
        table
    })
}

struct Sample {
    dx: isize,
    dy: isize,
    fx: f64,
    fy: f64,
}

fn snap(v: f64) -> f64 {
    if (v - v.round()).abs() < 1e-9 {
        v.round()
    } else {
        v
    }
}

/// Neighbor `k` sits at angle `2πk/p`, counter-clockwise from +x with y
/// pointing down.
fn samples() -> &'static [Sample] {
    static S: OnceLock<Vec<Sample>> = OnceLock::new();
    S.get_or_init(|| {
        (0..LBP_POINTS)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / LBP_POINTS as f64;
                let ox = snap(LBP_RADIUS * a.cos());
                let oy = snap(-LBP_RADIUS * a.sin());
                let (bx, by) = (ox.floor(), oy.floor());
                Sample {
                    dx: bx as isize,
                    dy: by as isize,
                    fx: ox - bx,
                    fy: oy - by,
                }
            })
            .collect()
    })
}

/// Uniform LBP histogram (r = 3, p = 8) of a row-major block, normalized to
/// sum 1. Only pixels whose whole circle lies inside the block are coded.
pub fn lbp_histogram(pixels: &[u8], width: usize, height: usize) -> Result<Vec<f64>> {
    let r = LBP_RADIUS.ceil() as usize;
    if width < 2 * r + 1 || height < 2 * r + 1 {
        return Err(Error::BlockTooSmall {
            width,
            height,
            radius: r,
        });
    }
    if pixels.len() != width * height {
        return Err(Error::dims(
            format!("{} pixels", width * height),
            format!("{} pixels", pixels.len()),
        ));
    }
    let table = uniform_bin_table();
    let px = |x: isize, y: isize| pixels[y as usize * width + x as usize] as f64;
    let mut counts = [0u64; LBP_BINS];
    for y in r..height - r {
        for x in r..width - r {
            let (x, y) = (x as isize, y as isize);
            let center = px(x, y);
            let mut code = 0u8;
            for (k, s) in samples().iter().enumerate() {
                let (sx, sy) = (x + s.dx, y + s.dy);
                let mut v = (1.0 - s.fx) * (1.0 - s.fy) * px(sx, sy);
                if s.fx > 0.0 {
                    v += s.fx * (1.0 - s.fy) * px(sx + 1, sy);
                }
                if s.fy > 0.0 {
                    v += (1.0 - s.fx) * s.fy * px(sx, sy + 1);
                }
                if s.fx > 0.0 && s.fy > 0.0 {
                    v += s.fx * s.fy * px(sx + 1, sy + 1);
                }
                if v >= center - 1e-9 {
                    code |= 1 << k;
                }
            }
            counts[table[code as usize] as usize] += 1;
        }
    }
    let total = ((width - 2 * r) * (height - 2 * r)) as f64;
    Ok(counts.iter().map(|&c| c as f64 / total).collect())
}

/// Concatenated block histograms of one frame, `36 × 59` values.
pub fn frame_feature(frame: &GrayFrame, grid: &BlockGrid) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(grid.blocks.len() * LBP_BINS);
    let mut buf = Vec::new();
    for b in &grid.blocks {
        buf.clear();
        for y in b.y0..=b.y1() {
            for x in b.x0..=b.x1() {
                buf.push(frame.get(x as usize - 1, y as usize - 1));
            }
        }
        out.extend(lbp_histogram(&buf, b.width as usize, b.height as usize)?);
    }
    Ok(out)
}

/// `Σ (a_i − b_i)² / (a_i + b_i)`, skipping empty bins.
pub fn chi2_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dims(a.len().to_string(), b.len().to_string()));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let s = x + y;
            if s == 0.0 {
                0.0
            } else {
                (x - y) * (x - y) / s
            }
        })
        .sum())
}

/// Per-frame feature difference `D` and contrasted curve `C`, index 0 being
/// the video's first frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceCurve {
    pub first_index: u32,
    pub l_interval: usize,
    pub d: Vec<f64>,
    pub c: Vec<f64>,
}

impl DifferenceCurve {
    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn last_index(&self) -> u32 {
        self.first_index + self.c.len() as u32 - 1
    }

    pub fn write_csv<W: Write>(&self, mut out: W, video_id: &str) -> std::io::Result<()> {
        for (i, (d, c)) in self.d.iter().zip(&self.c).enumerate() {
            writeln!(out, "{video_id},{},{d},{c}", self.first_index + i as u32)?;
        }
        Ok(())
    }
}

/// `D` at 1-based position `i`, comparing the frame with the average of the
/// frames `L` before and after.
fn d_at<'a>(features: &impl Fn(usize) -> Result<&'a [f64]>, i: usize, l: usize) -> Result<f64> {
    let before = features(i - l)?;
    let after = features(i + l)?;
    let avg: Vec<f64> = before
        .iter()
        .zip(after)
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    chi2_distance(features(i)?, &avg)
}

/// Contrasted value at `i`. A neighbour outside the valid range `[L+1, T−L]`
/// is replaced by the other one so the ends of the video are not inflated.
fn contrast(d: &impl Fn(usize) -> f64, i: usize, l: usize, t: usize) -> f64 {
    let valid = |j: usize| j > l && j + l <= t;
    let base = match (i > l && valid(i - l), valid(i + l)) {
        (true, true) => 0.5 * (d(i - l) + d(i + l)),
        (true, false) => d(i - l),
        (false, true) => d(i + l),
        (false, false) => return 0.0,
    };
    (d(i) - base).max(0.0)
}

/// Difference curve of a whole video given one feature vector per frame.
/// Values outside `[L+1, T−L]` are zero.
pub fn difference_curve(features: &[Vec<f64>], l_interval: usize) -> Result<DifferenceCurve> {
    let t = features.len();
    if l_interval == 0 || t <= 2 * l_interval {
        return Err(Error::VideoTooShort {
            frames: t,
            interval: l_interval,
        });
    }
    let l = l_interval;
    let get = |pos: usize| -> Result<&[f64]> { Ok(&features[pos - 1]) };
    let mut d = vec![0.0; t];
    for i in l + 1..=t - l {
        d[i - 1] = d_at(&get, i, l)?;
    }
    let dv = |pos: usize| if pos <= t { d[pos - 1] } else { 0.0 };
    let mut c = vec![0.0; t];
    for i in l + 1..=t - l {
        c[i - 1] = contrast(&dv, i, l, t);
    }
    Ok(DifferenceCurve {
        first_index: 1,
        l_interval,
        d,
        c,
    })
}

/// Builds the curve of a video span by span. Each span places its grid from
/// the landmarks of its first frame; frames shared by two spans take the
/// value of the later span.
pub fn video_curve(
    video: &FrameSequence,
    landmarks: &LandmarkTrack,
    config: &DatasetConfig,
) -> Result<DifferenceCurve> {
    let t = video.len();
    let l = config.l_interval;
    if l == 0 || t <= 2 * l {
        return Err(Error::VideoTooShort {
            frames: t,
            interval: l,
        });
    }
    let mut d = vec![0.0; t];
    let mut c = vec![0.0; t];
    for span in segment_video(t, config) {
        let grid = BlockGrid::from_landmarks(
            landmarks.at(video.first_index + span.start as u32 - 1),
            video.dims(),
        )?;
        let lo = span.start.saturating_sub(2 * l).max(1);
        let hi = (span.end + 2 * l).min(t);
        let feats = (lo..=hi)
            .map(|pos| frame_feature(video.at_position(pos), &grid))
            .collect::<Result<Vec<_>>>()?;
        let get = |pos: usize| -> Result<&[f64]> { Ok(&feats[pos - lo]) };

        let d_lo = span.start.saturating_sub(l).max(l + 1);
        let d_hi = (span.end + l).min(t - l);
        let mut local_d = vec![0.0; t + l + 1];
        for i in d_lo..=d_hi {
            local_d[i] = d_at(&get, i, l)?;
        }
        let dv = |pos: usize| local_d[pos];
        for i in span.start.max(l + 1)..=span.end.min(t - l) {
            d[i - 1] = local_d[i];
            c[i - 1] = contrast(&dv, i, l, t);
        }
    }
    Ok(DifferenceCurve {
        first_index: video.first_index,
        l_interval: l,
        d,
        c,
    })
}

/// `mean + tau · (max − mean)` of the whole curve.
pub fn peak_threshold(c: &[f64], tau: f64) -> f64 {
    let max = c.iter().copied().fold(0.0, f64::max);
    let mean = c.iter().sum::<f64>() / c.len().max(1) as f64;
    mean + tau * (max - mean)
}

/// One interval per span whose highest contrast exceeds the curve threshold,
/// `[peak − L, peak + L]` clipped to the video. Peaks at most `L` frames
/// apart are merged (union, max score); intervals of neighboring groups
/// that still overlap are split halfway between their peaks.
pub fn spot_peaks(
    video_id: &str,
    curve: &DifferenceCurve,
    spans: &[WindowSpan],
    tau: f64,
) -> Vec<SpottedInterval> {
    if curve.is_empty() {
        return Vec::new();
    }
    let threshold = peak_threshold(&curve.c, tau);
    let l = curve.l_interval as u32;
    let mut peaks: Vec<(u32, f64)> = Vec::new();
    for span in spans {
        let mut best: Option<(usize, f64)> = None;
        for pos in span.start..=span.end.min(curve.len()) {
            let v = curve.c[pos - 1];
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((pos, v));
            }
        }
        if let Some((pos, v)) = best {
            if v > 0.0 && v > threshold {
                peaks.push((curve.first_index + pos as u32 - 1, v));
            }
        }
    }
    peaks.sort_by_key(|p| p.0);
    peaks.dedup_by_key(|p| p.0);

    // groups of peaks chained at most L apart: (first, last, score)
    let mut groups: Vec<(u32, u32, f64)> = Vec::new();
    for (frame, v) in peaks {
        match groups.last_mut() {
            Some(g) if frame - g.1 <= l => {
                g.1 = frame;
                g.2 = g.2.max(v);
            }
            _ => groups.push((frame, frame, v)),
        }
    }

    let (first, last) = (curve.first_index, curve.last_index());
    let mut out: Vec<SpottedInterval> = groups
        .iter()
        .map(|&(a, b, score)| SpottedInterval {
            video_id: video_id.to_string(),
            onset: a.saturating_sub(l).max(first),
            offset: (b + l).min(last),
            score,
            source: Method::LbpChi2,
        })
        .collect();
    for i in 1..out.len() {
        if out[i - 1].offset >= out[i].onset {
            let mid = (groups[i - 1].1 + groups[i].0) / 2;
            out[i - 1].offset = mid;
            out[i].onset = mid + 1;
        }
    }
    out
}

/// Curve and spotted intervals of one video.
pub fn spot_video(
    video: &FrameSequence,
    landmarks: &LandmarkTrack,
    config: &DatasetConfig,
) -> Result<(DifferenceCurve, Vec<SpottedInterval>)> {
    let curve = video_curve(video, landmarks, config)?;
    let spans = segment_video(video.len(), config);
    let intervals = spot_peaks(&video.video_id, &curve, &spans, config.tau);
    Ok((curve, intervals))
}
