//! Local temporal patterns.
//!
//! Within every video window each ROI's pixel track is reduced by PCA along
//! the time axis to a 2-D trajectory. For each frame `n` the distances from
//! `P_n` to the next `l_interval - 1` trajectory points form the raw pattern;
//! patterns are then scaled by the largest raw distance the ROI shows over
//! the whole video, and that scale is kept as the first feature.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::dataio::{DatasetConfig, FrameSequence, LandmarkTrack};
use crate::error::{Error, Result};
use crate::geometry::{
    extract_roi_track, inner_eye_distance, roi_layout, roi_side, RoiLayoutMap, RoiRole, RoiTrack,
};
use crate::windowing::segment_video;

/// Eigenvalues below this fraction of the total variance are treated as zero.
const RANK_TOLERANCE: f64 = 1e-12;

/// How the principal directions are obtained. Both routes give the same
/// subspace; `Auto` picks the smaller eigenproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PcaRoute {
    #[default]
    Auto,
    /// Eigenvectors of the `N×N` frame Gram matrix, mapped back to pixel space.
    Gram,
    /// Eigenvectors of the `a²×a²` pixel covariance.
    Covariance,
}

/// A ROI track projected on its first two temporal principal components.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedTrack {
    pub points: Vec<[f64; 2]>,
    /// Rows of the projection matrix, each of length `a²`.
    pub basis: [Vec<f64>; 2],
    pub mean: Vec<f64>,
    /// Share of the total variance carried by the two components; 1 for a
    /// constant track.
    pub variance_captured: f64,
}

impl ProjectedTrack {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Maps a 2-D point back to pixel space.
    pub fn back_project(&self, p: [f64; 2]) -> Vec<f64> {
        self.mean
            .iter()
            .zip(self.basis[0].iter().zip(&self.basis[1]))
            .map(|(m, (u, v))| m + p[0] * u + p[1] * v)
            .collect()
    }
}

pub fn temporal_pca(track: &RoiTrack) -> Result<ProjectedTrack> {
    temporal_pca_with(track, PcaRoute::Auto)
}

pub fn temporal_pca_with(track: &RoiTrack, route: PcaRoute) -> Result<ProjectedTrack> {
    let n = track.len();
    if n < 2 {
        return Err(Error::TooFewFrames(n));
    }
    let dim = track.dim();

    let mut mean = vec![0.0; dim];
    for patch in &track.patches {
        for (m, v) in mean.iter_mut().zip(patch) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let centered = DMatrix::from_fn(dim, n, |i, j| track.patches[j][i] - mean[i]);
    let total: f64 = centered.iter().map(|v| v * v).sum();

    if total == 0.0 {
        return Ok(ProjectedTrack {
            points: vec![[0.0; 2]; n],
            basis: [vec![0.0; dim], vec![0.0; dim]],
            mean,
            variance_captured: 1.0,
        });
    }

    let use_gram = match route {
        PcaRoute::Auto => n < dim,
        PcaRoute::Gram => true,
        PcaRoute::Covariance => false,
    };
    let (values, mut basis) = if use_gram {
        gram_directions(&centered, total)
    } else {
        covariance_directions(&centered)
    };

    for row in &mut basis {
        let mut lead = 0;
        for (i, v) in row.iter().enumerate() {
            if v.abs() > row[lead].abs() {
                lead = i;
            }
        }
        if row[lead] < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
    }

    let points = (0..n)
        .map(|j| {
            let col = centered.column(j);
            let proj = |row: &DVector<f64>| row.dot(&col);
            [proj(&basis[0]), proj(&basis[1])]
        })
        .collect();
    let variance_captured = ((values[0] + values[1]).max(0.0) / total).min(1.0);
    let [b0, b1] = basis;
    Ok(ProjectedTrack {
        points,
        basis: [b0.data.into(), b1.data.into()],
        mean,
        variance_captured,
    })
}

/// Eigenpairs of a symmetric matrix sorted by decreasing eigenvalue.
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

fn covariance_directions(centered: &DMatrix<f64>) -> ([f64; 2], [DVector<f64>; 2]) {
    let dim = centered.nrows();
    let (values, vectors) = sorted_eigen(centered * centered.transpose());
    let pick = |k: usize| {
        if k < dim {
            (values[k], vectors.column(k).into_owned())
        } else {
            (0.0, DVector::zeros(dim))
        }
    };
    let (l0, v0) = pick(0);
    let (l1, mut v1) = pick(1);
    if dim < 2 {
        v1 = DVector::zeros(dim);
    }
    ([l0, l1], [v0, v1])
}

fn gram_directions(centered: &DMatrix<f64>, total: f64) -> ([f64; 2], [DVector<f64>; 2]) {
    let dim = centered.nrows();
    let (values, vectors) = sorted_eigen(centered.transpose() * centered);
    let mut dirs: Vec<DVector<f64>> = Vec::with_capacity(2);
    let mut lambdas = [0.0; 2];
    for k in 0..2 {
        let lambda = values.get(k).copied().unwrap_or(0.0);
        if lambda > RANK_TOLERANCE * total {
            let u = centered * vectors.column(k);
            let u = &u / u.norm();
            lambdas[k] = lambda;
            dirs.push(u);
        } else {
            dirs.push(orthonormal_complement(&dirs, dim));
        }
    }
    let v1 = dirs.pop().unwrap();
    let v0 = dirs.pop().unwrap();
    (lambdas, [v0, v1])
}

/// First unit axis made orthogonal to `existing` (Gram–Schmidt).
fn orthonormal_complement(existing: &[DVector<f64>], dim: usize) -> DVector<f64> {
    for axis in 0..dim {
        let mut v = DVector::zeros(dim);
        v[axis] = 1.0;
        for u in existing {
            let c = u.dot(&v);
            v -= u * c;
        }
        let norm = v.norm();
        if norm > 0.5 {
            return v / norm;
        }
    }
    DVector::zeros(dim)
}

/// Distances from `P_n` to `P_{n+1} .. P_{n+l_interval-1}` (1-based `n`),
/// truncated at the end of the track.
pub fn distance_pattern(proj: &ProjectedTrack, n: usize, l_interval: usize) -> Vec<f64> {
    assert!(n >= 1 && n <= proj.len(), "start {n} outside track");
    let p = proj.points[n - 1];
    (1..l_interval)
        .map(|w| n + w)
        .take_while(|&m| m <= proj.len())
        .map(|m| {
            let q = proj.points[m - 1];
            (q[0] - p[0]).hypot(q[1] - p[1])
        })
        .collect()
}

/// A raw distance pattern tagged with its frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPattern {
    pub frame: u32,
    pub span_index: usize,
    pub deltas: Vec<f64>,
}

/// One frame's local temporal pattern in one ROI.
#[derive(Debug, Clone, PartialEq)]
pub struct LtpFeature {
    pub roi_id: usize,
    /// Video frame number the pattern starts at.
    pub frame: u32,
    /// Window span the pattern was computed in.
    pub span_index: usize,
    /// Normalization coefficient of the ROI over the whole video.
    pub cn: f64,
    /// Normalized distances, length `l_interval - 1`, each in `[0, 1]`.
    pub distances: Vec<f64>,
}

impl LtpFeature {
    /// Classifier input `[cn, d1, ..., d_{L-1}]`.
    pub fn vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(1 + self.distances.len());
        v.push(self.cn);
        v.extend_from_slice(&self.distances);
        v
    }

    pub fn max_distance(&self) -> f64 {
        self.distances.iter().copied().fold(0.0, f64::max)
    }

    /// Largest un-normalized distance in the pattern.
    pub fn raw_amplitude(&self) -> f64 {
        self.cn * self.max_distance()
    }
}

/// Scales every pattern of one ROI by the ROI's largest raw distance and pads
/// to `l_interval - 1` entries.
pub fn normalize_roi(roi_id: usize, patterns: &[RawPattern], l_interval: usize) -> Vec<LtpFeature> {
    let cn = patterns
        .iter()
        .flat_map(|p| p.deltas.iter().copied())
        .fold(0.0, f64::max);
    patterns
        .iter()
        .map(|p| {
            let mut distances = vec![0.0; l_interval - 1];
            if cn > 0.0 {
                for (d, raw) in distances.iter_mut().zip(&p.deltas) {
                    *d = raw / cn;
                }
            }
            LtpFeature {
                roi_id,
                frame: p.frame,
                span_index: p.span_index,
                cn,
                distances,
            }
        })
        .collect()
}

/// All features of one ROI over a video, in (span, frame) order. Frames in
/// the overlap of two spans appear once per span.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiFeatures {
    pub roi_id: usize,
    pub role: RoiRole,
    pub features: Vec<LtpFeature>,
}

pub fn extract_ltp_features(
    video: &FrameSequence,
    landmarks: &LandmarkTrack,
    config: &DatasetConfig,
    layout: &RoiLayoutMap,
) -> Result<Vec<RoiFeatures>> {
    let roi_count = layout.entries.len();
    let mut raw: Vec<Vec<RawPattern>> = vec![Vec::new(); roi_count];

    for span in segment_video(video.len(), config) {
        let first_frame = video.first_index + span.start as u32 - 1;
        let marks = landmarks.at(first_frame);
        let side = roi_side(inner_eye_distance(marks, layout)?, config);
        let rects = roi_layout(marks, side, layout, video.dims())?;
        let frames = &video.frames[span.start - 1..span.end];
        for rect in &rects {
            let proj = temporal_pca(&extract_roi_track(frames, rect))?;
            for n in 1..=proj.len() {
                raw[rect.roi_id].push(RawPattern {
                    frame: first_frame + n as u32 - 1,
                    span_index: span.index,
                    deltas: distance_pattern(&proj, n, config.l_interval),
                });
            }
        }
    }

    Ok(layout
        .entries
        .iter()
        .map(|e| RoiFeatures {
            roi_id: e.roi_id,
            role: e.role,
            features: normalize_roi(e.roi_id, &raw[e.roi_id], config.l_interval),
        })
        .collect())
}

/// Writes `video_id, roi_id, global_frame, cn, d1..d{L-1}` rows.
pub fn write_feature_dump<W: Write>(
    mut out: W,
    video_id: &str,
    rois: &[RoiFeatures],
) -> std::io::Result<()> {
    for roi in rois {
        for f in &roi.features {
            write!(out, "{video_id},{},{},{}", f.roi_id, f.frame, f.cn)?;
            for d in &f.distances {
                write!(out, ",{d}")?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}
