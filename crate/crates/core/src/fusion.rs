//! From per-ROI positive patterns to video-level spotted intervals:
//! local qualification, spatial fusion, merge.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classify::{predict, SvmModel};
use crate::error::{Error, Result};
use crate::geometry::RoiRole;
use crate::ltp::{LtpFeature, RoiFeatures};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    LtpMl,
    LbpChi2,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::LtpMl => "ltp_ml",
            Method::LbpChi2 => "lbp_chi2",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.replace('-', "_").to_ascii_lowercase().as_str() {
            "ltp_ml" => Ok(Method::LtpMl),
            "lbp_chi2" => Ok(Method::LbpChi2),
            _ => Err(format!("unknown method `{s}`")),
        }
    }
}

/// A detector output, frames `onset..=offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpottedInterval {
    pub video_id: String,
    pub onset: u32,
    pub offset: u32,
    pub score: f64,
    pub source: Method,
}

/// Writes `video_id, onset, offset, score, source` rows.
pub fn write_intervals<W: Write>(mut out: W, intervals: &[SpottedInterval]) -> std::io::Result<()> {
    for s in intervals {
        writeln!(
            out,
            "{},{},{},{},{}",
            s.video_id, s.onset, s.offset, s.score, s.source
        )?;
    }
    Ok(())
}

pub fn parse_intervals<R: Read>(reader: R) -> Result<Vec<SpottedInterval>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::format(row, e.to_string()))?;
        if rec.len() != 5 {
            return Err(Error::format(
                row,
                format!("expected 5 columns, found {}", rec.len()),
            ));
        }
        if i == 0 && rec[1].parse::<u32>().is_err() {
            continue;
        }
        let bad = |what: &str, v: &str| Error::format(row, format!("bad {what} `{v}`"));
        let onset: u32 = rec[1].parse().map_err(|_| bad("onset", &rec[1]))?;
        let offset: u32 = rec[2].parse().map_err(|_| bad("offset", &rec[2]))?;
        if onset == 0 || onset > offset {
            return Err(Error::InvalidInterval {
                row,
                message: format!("[{onset}, {offset}]"),
            });
        }
        out.push(SpottedInterval {
            video_id: rec[0].to_string(),
            onset,
            offset,
            score: rec[3].parse().map_err(|_| bad("score", &rec[3]))?,
            source: rec[4].parse().map_err(|m: String| Error::format(row, m))?,
        });
    }
    Ok(out)
}

/// Thresholds of the three fusion steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionParams {
    /// Minimum largest normalized distance for a positive to count.
    pub d_min: f64,
    /// Temporal tolerance, frames, when pooling ROIs around an instant.
    pub t_tol: usize,
    /// More positive ROIs than this around an instant means a global movement.
    pub k_max: usize,
    /// Intervals separated by at most this many frames are merged.
    pub merge_gap: usize,
    /// Reject instants where a nose reference ROI also moves.
    pub nose_veto: bool,
}

impl FusionParams {
    pub fn for_interval(l_interval: usize) -> Self {
        Self {
            d_min: 0.2,
            t_tol: (l_interval as f64 / 3.0).round() as usize,
            k_max: 6,
            merge_gap: l_interval.div_ceil(2),
            nose_veto: true,
        }
    }
}

/// A classified-positive pattern reduced to what fusion needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiPositive {
    pub roi_id: usize,
    pub frame: u32,
    pub cn: f64,
    pub max_distance: f64,
}

impl From<&LtpFeature> for RoiPositive {
    fn from(f: &LtpFeature) -> Self {
        Self {
            roi_id: f.roi_id,
            frame: f.frame,
            cn: f.cn,
            max_distance: f.max_distance(),
        }
    }
}

/// Keeps positives that show real motion amplitude.
pub fn local_qualification(positives: &[RoiPositive], d_min: f64) -> Vec<RoiPositive> {
    positives
        .iter()
        .filter(|p| p.cn > 0.0 && p.max_distance >= d_min)
        .copied()
        .collect()
}

/// Candidate instants: frames where a non-nose ROI has a qualified positive,
/// unless within `±t_tol` frames a nose reference also fires or more than
/// `k_max` ROIs fire.
pub fn spatial_fusion(
    qualified: &[RoiPositive],
    roles: &[RoiRole],
    params: &FusionParams,
) -> Vec<u32> {
    let mut per_roi: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); roles.len()];
    for p in qualified {
        per_roi[p.roi_id].insert(p.frame);
    }
    let instants: BTreeSet<u32> = qualified
        .iter()
        .filter(|p| !roles[p.roi_id].is_nose())
        .map(|p| p.frame)
        .collect();

    let tol = params.t_tol as u32;
    instants
        .into_iter()
        .filter(|&n| {
            let lo = n.saturating_sub(tol);
            let hi = n + tol;
            let mut active = 0;
            let mut nose = false;
            for (roi, frames) in per_roi.iter().enumerate() {
                if frames.range(lo..=hi).next().is_some() {
                    active += 1;
                    nose |= roles[roi].is_nose();
                }
            }
            !(params.nose_veto && nose) && active <= params.k_max
        })
        .collect()
}

/// Expands each instant to `[n, n + l_interval - 1]`, merges intervals whose
/// gap is at most `merge_gap` frames and clips to `bounds`. The score counts
/// the instants behind each interval.
pub fn merge_intervals(
    video_id: &str,
    instants: &[u32],
    l_interval: usize,
    merge_gap: usize,
    bounds: (u32, u32),
) -> Vec<SpottedInterval> {
    let (first, last) = bounds;
    let mut out: Vec<SpottedInterval> = Vec::new();
    let mut sorted = instants.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for n in sorted {
        let onset = n.max(first);
        let offset = (n + l_interval as u32 - 1).min(last);
        if onset > offset {
            continue;
        }
        match out.last_mut() {
            Some(cur) if onset <= cur.offset + 1 + merge_gap as u32 => {
                cur.offset = cur.offset.max(offset);
                cur.score += 1.0;
            }
            _ => out.push(SpottedInterval {
                video_id: video_id.to_string(),
                onset,
                offset,
                score: 1.0,
                source: Method::LtpMl,
            }),
        }
    }
    out
}

/// Classifies every pattern of a video and fuses the positives.
pub fn spot_video(
    video_id: &str,
    rois: &[RoiFeatures],
    model: &SvmModel,
    params: &FusionParams,
    l_interval: usize,
    bounds: (u32, u32),
) -> Result<Vec<SpottedInterval>> {
    let mut positives = Vec::new();
    for roi in rois {
        for f in &roi.features {
            let (_, label) = predict(model, &f.vector())?;
            if label > 0 {
                positives.push(RoiPositive::from(f));
            }
        }
    }
    let roles: Vec<RoiRole> = rois.iter().map(|r| r.role).collect();
    let qualified = local_qualification(&positives, params.d_min);
    let instants = spatial_fusion(&qualified, &roles, params);
    Ok(merge_intervals(
        video_id,
        &instants,
        l_interval,
        params.merge_gap,
        bounds,
    ))
}
