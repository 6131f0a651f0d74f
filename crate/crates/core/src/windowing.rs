//! Video sliding windows and the intra-ROI analysis window.

use serde::{Deserialize, Serialize};

use crate::dataio::DatasetConfig;

/// One short sequence cut from a long video, frames `start..=end` (1-based
/// positions within the video).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpan {
    pub start: usize,
    pub end: usize,
    /// Ordinal of the span within the video, from 0.
    pub index: usize,
}

impl WindowSpan {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, pos: usize) -> bool {
        (self.start..=self.end).contains(&pos)
    }
}

/// Cuts `total` frames into windows of `l_window` frames advancing by
/// `l_window - l_overlap`. A final window that would run past the end is
/// replaced by the back-aligned window `[total - l_window + 1, total]`.
pub fn segment_video(total: usize, config: &DatasetConfig) -> Vec<WindowSpan> {
    segment(total, config.l_window, config.l_overlap)
}

pub fn segment(total: usize, window: usize, overlap: usize) -> Vec<WindowSpan> {
    assert!(total >= 1, "cannot segment an empty video");
    assert!(overlap < window, "overlap must be shorter than the window");
    let stride = window - overlap;
    if total <= window {
        return vec![WindowSpan {
            start: 1,
            end: total,
            index: 0,
        }];
    }

    let mut spans = Vec::new();
    let mut start = 1;
    while start + window - 1 <= total {
        spans.push(WindowSpan {
            start,
            end: start + window - 1,
            index: spans.len(),
        });
        start += stride;
    }
    if spans.last().map(|s| s.end) != Some(total) {
        spans.push(WindowSpan {
            start: total + 1 - window,
            end: total,
            index: spans.len(),
        });
    }
    spans
}

/// An intra-ROI analysis window, 1-based positions within a span.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoiWindow {
    pub start: usize,
    pub end: usize,
}

impl RoiWindow {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// One window per frame of an `n`-frame span; windows near the end shrink.
pub fn roi_window_starts(n: usize, l_interval: usize) -> Vec<RoiWindow> {
    (1..=n)
        .map(|start| RoiWindow {
            start,
            end: (start + l_interval - 1).min(n),
        })
        .collect()
}
