//! Interval overlap scoring and recall / precision / F1 at video and
//! database level.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataio::{EventKind, GroundTruthInterval};
use crate::error::{Error, Result};
use crate::fusion::SpottedInterval;

/// Default overlap ratio for a true positive.
pub const DEFAULT_K: f64 = 0.5;

/// Inclusive frame interval `(onset, offset)`.
pub type Frames = (u32, u32);

fn overlap(a: Frames, b: Frames) -> (u64, u64) {
    let inter = (a.1.min(b.1) as i64 - a.0.max(b.0) as i64 + 1).max(0) as u64;
    let union = (a.1 - a.0 + 1) as u64 + (b.1 - b.0 + 1) as u64 - inter;
    (inter, union)
}

/// Shared frames over frames covered by either interval, both ends counted.
pub fn interval_iou(a: Frames, b: Frames) -> f64 {
    let (inter, union) = overlap(a, b);
    inter as f64 / union as f64
}

/// One-to-one greedy matching: pairs with IoU ≥ `k` are taken in order of
/// decreasing IoU, then earlier ground-truth onset, then earlier spotted
/// onset (remaining ties by list position). Returns `(gt, spotted)` index
/// pairs in the order they were taken.
pub fn greedy_matches(spotted: &[Frames], gt: &[Frames], k: f64) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize, u64, u64)> = Vec::new();
    for (g, &gi) in gt.iter().enumerate() {
        for (s, &si) in spotted.iter().enumerate() {
            let (inter, union) = overlap(si, gi);
            if inter > 0 && inter as f64 / union as f64 >= k {
                pairs.push((g, s, inter, union));
            }
        }
    }
    pairs.sort_by(|a, b| {
        // a.inter / a.union vs b.inter / b.union, exactly
        (b.2 * a.3)
            .cmp(&(a.2 * b.3))
            .then(gt[a.0].0.cmp(&gt[b.0].0))
            .then(spotted[a.1].0.cmp(&spotted[b.1].0))
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
    });
    let mut gt_used = vec![false; gt.len()];
    let mut sp_used = vec![false; spotted.len()];
    let mut out = Vec::new();
    for (g, s, _, _) in pairs {
        if !gt_used[g] && !sp_used[s] {
            gt_used[g] = true;
            sp_used[s] = true;
            out.push((g, s));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoCounts {
    pub video_id: String,
    /// Ground-truth intervals.
    pub m: usize,
    /// Spotted intervals.
    pub n: usize,
    /// True positives.
    pub a: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

pub fn match_intervals(video_id: &str, spotted: &[Frames], gt: &[Frames], k: f64) -> VideoCounts {
    let a = greedy_matches(spotted, gt, k).len();
    VideoCounts {
        video_id: video_id.to_string(),
        m: gt.len(),
        n: spotted.len(),
        a,
        fp: spotted.len() - a,
        fn_: gt.len() - a,
    }
}

/// `None` marks an undefined value (zero denominator).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// `a/m`, `a/n` and `2a/(m+n)`.
pub fn video_metrics(c: &VideoCounts) -> Scores {
    Scores {
        recall: ratio(c.a, c.m),
        precision: ratio(c.a, c.n),
        f1: ratio(2 * c.a, c.m + c.n),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoReport {
    #[serde(flatten)]
    pub counts: VideoCounts,
    #[serde(flatten)]
    pub scores: Scores,
}

/// Whole-database evaluation: all videos pooled as one long video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k: f64,
    /// Sorted by video id.
    pub videos: Vec<VideoReport>,
    #[serde(rename = "A")]
    pub tp: usize,
    #[serde(rename = "N")]
    pub spotted: usize,
    #[serde(rename = "M")]
    pub ground_truth: usize,
    #[serde(rename = "FP")]
    pub fp: usize,
    #[serde(rename = "FN")]
    pub fn_: usize,
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
}

/// Sums the counts and derives recall `A/M`, precision `A/N` and
/// `F1 = 2RP/(R+P)`. When R or P is undefined F1 falls back to
/// `2A/(M+N)`.
pub fn database_metrics(counts: &[VideoCounts], k: f64) -> EvalReport {
    let mut videos: Vec<VideoReport> = counts
        .iter()
        .map(|c| VideoReport {
            counts: c.clone(),
            scores: video_metrics(c),
        })
        .collect();
    videos.sort_by(|a, b| a.counts.video_id.cmp(&b.counts.video_id));
    let tp: usize = counts.iter().map(|c| c.a).sum();
    let spotted: usize = counts.iter().map(|c| c.n).sum();
    let ground_truth: usize = counts.iter().map(|c| c.m).sum();
    let recall = ratio(tp, ground_truth);
    let precision = ratio(tp, spotted);
    let f1 = match (recall, precision) {
        (Some(r), Some(p)) if r + p > 0.0 => Some(2.0 * r * p / (r + p)),
        _ => ratio(2 * tp, ground_truth + spotted),
    };
    EvalReport {
        k,
        videos,
        tp,
        spotted,
        ground_truth,
        fp: spotted - tp,
        fn_: ground_truth - tp,
        recall,
        precision,
        f1,
    }
}

/// Database totals from published `(TP, FP, FN)` counts.
pub fn metrics_from_totals(tp: usize, fp: usize, fn_: usize) -> EvalReport {
    let c = VideoCounts {
        video_id: "all".into(),
        m: tp + fn_,
        n: tp + fp,
        a: tp,
        fp,
        fn_,
    };
    database_metrics(&[c], DEFAULT_K)
}

/// Scores spotted intervals against micro-expression ground truth. Every
/// video listed in `videos` is evaluated, with or without annotations.
pub fn evaluate(
    spotted: &[SpottedInterval],
    ground_truth: &[GroundTruthInterval],
    videos: &[String],
    k: f64,
) -> Result<EvalReport> {
    let known: BTreeSet<&str> = videos.iter().map(String::as_str).collect();
    let mut per_video: BTreeMap<&str, (Vec<Frames>, Vec<Frames>)> =
        known.iter().map(|v| (*v, Default::default())).collect();
    for s in spotted {
        let entry = per_video.get_mut(s.video_id.as_str()).ok_or_else(|| {
            Error::Config(format!(
                "spotted interval for unknown video `{}`",
                s.video_id
            ))
        })?;
        entry.0.push((s.onset, s.offset));
    }
    for g in ground_truth.iter().filter(|g| g.kind == EventKind::Micro) {
        if let Some(entry) = per_video.get_mut(g.video_id.as_str()) {
            entry.1.push((g.onset, g.offset));
        }
    }
    let counts: Vec<VideoCounts> = per_video
        .iter()
        .map(|(id, (sp, gt))| match_intervals(id, sp, gt, k))
        .collect();
    Ok(database_metrics(&counts, k))
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

impl EvalReport {
    /// One row per video then an `ALL` row; undefined values print as `NA`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "video_id,m,n,a,fp,fn,recall,precision,f1")?;
        for v in &self.videos {
            let c = &v.counts;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                c.video_id,
                c.m,
                c.n,
                c.a,
                c.fp,
                c.fn_,
                cell(v.scores.recall),
                cell(v.scores.precision),
                cell(v.scores.f1)
            )?;
        }
        writeln!(
            out,
            "ALL,{},{},{},{},{},{},{},{}",
            self.ground_truth,
            self.spotted,
            self.tp,
            self.fp,
            self.fn_,
            cell(self.recall),
            cell(self.precision),
            cell(self.f1)
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::Method;
    use proptest::prelude::*;

    #[test]
    fn iou_examples() {
        assert_eq!(interval_iou((10, 20), (10, 20)), 1.0);
        assert_eq!(interval_iou((10, 20), (15, 30)), 6.0 / 21.0);
        assert_eq!(interval_iou((1, 5), (10, 12)), 0.0);
        assert_eq!(interval_iou((1, 5), (6, 8)), 0.0);
        assert_eq!(interval_iou((7, 7), (7, 7)), 1.0);
    }

    #[test]
    fn matching_examples() {
        let c = match_intervals("v", &[(10, 19)], &[(12, 21)], 0.5);
        assert_eq!((c.a, c.fp, c.fn_), (1, 0, 0));
        let c = match_intervals("v", &[(10, 20), (11, 20)], &[(10, 20)], 0.5);
        assert_eq!((c.a, c.fp, c.fn_), (1, 1, 0));
        let c = match_intervals("v", &[(1, 2), (5, 9), (30, 40)], &[], 0.5);
        assert_eq!((c.a, c.fp, c.fn_), (0, 3, 0));
        // the better overlap wins the shared ground truth
        assert_eq!(
            greedy_matches(&[(10, 30), (10, 20)], &[(10, 20)], 0.5),
            vec![(0, 1)]
        );
    }

    #[test]
    fn video_metric_cases() {
        let c = VideoCounts {
            video_id: "v".into(),
            m: 2,
            n: 3,
            a: 1,
            fp: 2,
            fn_: 1,
        };
        let s = video_metrics(&c);
        assert_eq!(s.recall, Some(0.5));
        assert_eq!(s.precision, Some(1.0 / 3.0));
        assert_eq!(s.f1, Some(0.4));
        let s = video_metrics(&VideoCounts {
            m: 0,
            a: 0,
            fn_: 0,
            ..c.clone()
        });
        assert_eq!(s.recall, None);
        let s = video_metrics(&VideoCounts {
            n: 0,
            a: 0,
            fp: 0,
            fn_: 2,
            ..c
        });
        assert_eq!(s.precision, None);
        assert_eq!(s.f1, Some(0.0));
    }

    fn close(v: Option<f64>, want: f64) {
        let v = v.unwrap();
        assert!((v - want).abs() <= 0.0002, "{v} vs {want}");
    }

    #[test]
    fn published_totals() {
        let r = metrics_from_totals(34, 1958, 125);
        assert_eq!((r.tp, r.spotted, r.ground_truth), (34, 1992, 159));
        close(r.precision, 0.0171);
        close(r.recall, 0.2138);
        close(r.f1, 0.0316);
        let r = metrics_from_totals(16, 1711, 41);
        close(r.precision, 0.0093);
        close(r.recall, 0.2807);
        close(r.f1, 0.0179);
        let r = metrics_from_totals(12, 4172, 147);
        close(r.precision, 0.0028);
        close(r.recall, 0.0755);
        close(r.f1, 0.0055);
    }

    #[test]
    fn degenerate_database() {
        let r = metrics_from_totals(0, 0, 0);
        assert_eq!((r.recall, r.precision, r.f1), (None, None, None));
        let r = metrics_from_totals(0, 0, 5);
        assert_eq!((r.recall, r.precision, r.f1), (Some(0.0), None, Some(0.0)));
        let r = metrics_from_totals(0, 4, 0);
        assert_eq!((r.recall, r.precision, r.f1), (None, Some(0.0), Some(0.0)));
    }

    fn sp(video: &str, onset: u32, offset: u32) -> SpottedInterval {
        SpottedInterval {
            video_id: video.into(),
            onset,
            offset,
            score: 1.0,
            source: Method::LtpMl,
        }
    }

    fn gt(video: &str, kind: EventKind, onset: u32, offset: u32) -> GroundTruthInterval {
        GroundTruthInterval {
            video_id: video.into(),
            kind,
            onset,
            apex: None,
            offset,
        }
    }

    #[test]
    fn evaluate_pools_videos() {
        let videos = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let truth = vec![
            gt("a", EventKind::Micro, 10, 18),
            gt("a", EventKind::Blink, 40, 45),
            gt("b", EventKind::Micro, 100, 108),
        ];
        let spotted = vec![sp("a", 10, 18), sp("a", 40, 45), sp("c", 5, 9)];
        let r = evaluate(&spotted, &truth, &videos, 0.5).unwrap();
        assert_eq!(
            (r.tp, r.spotted, r.ground_truth, r.fp, r.fn_),
            (1, 3, 2, 2, 1)
        );
        assert_eq!(r.videos.len(), 3);
        assert!(evaluate(&[sp("zz", 1, 2)], &truth, &videos, 0.5).is_err());

        let empty = evaluate(&[], &truth, &videos, 0.5).unwrap();
        assert_eq!((empty.tp, empty.precision), (0, None));
        let strict = evaluate(&[sp("a", 10, 19)], &truth, &videos, 1.0).unwrap();
        assert_eq!(strict.tp, 0);
    }

    #[test]
    fn report_outputs() {
        let r = evaluate(
            &[sp("a", 10, 18)],
            &[gt("a", EventKind::Micro, 10, 18)],
            &["a".into(), "b".into()],
            0.5,
        )
        .unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "video_id,m,n,a,fp,fn,recall,precision,f1\na,1,1,1,0,0,1,1,1\nb,0,0,0,0,0,NA,NA,NA\nALL,1,1,1,0,0,1,1,1\n"
        );
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json["A"], 1);
        assert_eq!(json["videos"][1]["recall"], serde_json::Value::Null);
        assert_eq!(json["videos"][0]["fn"], 0);
    }

    /// Largest possible number of one-to-one pairs with IoU ≥ k.
    fn optimal_matching(spotted: &[Frames], gt: &[Frames], k: f64) -> usize {
        fn go(g: usize, used: u32, spotted: &[Frames], gt: &[Frames], k: f64) -> usize {
            if g == gt.len() {
                return 0;
            }
            let mut best = go(g + 1, used, spotted, gt, k);
            for s in 0..spotted.len() {
                if used & (1 << s) == 0 && interval_iou(spotted[s], gt[g]) >= k {
                    best = best.max(1 + go(g + 1, used | 1 << s, spotted, gt, k));
                }
            }
            best
        }
        go(0, 0, spotted, gt, k)
    }

    fn arb_frames() -> impl Strategy<Value = Frames> {
        (1u32..=200, 0u32..30).prop_map(|(a, len)| (a, (a + len).min(200)))
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_identity(a in arb_frames(), b in arb_frames()) {
            prop_assert_eq!(interval_iou(a, b), interval_iou(b, a));
            let v = interval_iou(a, b);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v == 1.0, a == b);
        }

        #[test]
        fn greedy_is_a_valid_matching(
            sp in prop::collection::vec(arb_frames(), 0..=6),
            gt in prop::collection::vec(arb_frames(), 0..=6),
        ) {
            let pairs = greedy_matches(&sp, &gt, 0.5);
            let gs: BTreeSet<_> = pairs.iter().map(|p| p.0).collect();
            let ss: BTreeSet<_> = pairs.iter().map(|p| p.1).collect();
            prop_assert_eq!(gs.len(), pairs.len());
            prop_assert_eq!(ss.len(), pairs.len());
            prop_assert!(pairs.len() <= optimal_matching(&sp, &gt, 0.5));
            let c = match_intervals("v", &sp, &gt, 0.5);
            prop_assert!(c.a <= c.m.min(c.n));
            prop_assert_eq!(c.fp + c.a, c.n);
            prop_assert_eq!(c.fn_ + c.a, c.m);
        }

        // With gaps between ground-truth intervals no spotted interval can
        // reach k = 0.5 with two of them, so greedy is optimal.
        #[test]
        fn greedy_optimal_for_disjoint_ground_truth(
            sp in prop::collection::vec(arb_frames(), 0..=6),
            starts in prop::collection::btree_set(0u32..6, 0..=6),
            lens in prop::collection::vec(0u32..30, 6),
        ) {
            let gt: Vec<Frames> = starts.iter().zip(&lens).map(|(&s, &l)| (1 + 33 * s, 1 + 33 * s + l)).collect();
            prop_assert_eq!(greedy_matches(&sp, &gt, 0.5).len(), optimal_matching(&sp, &gt, 0.5));
        }

        #[test]
        fn f1_identity(tp in 0usize..5000, fp in 0usize..5000, fn_ in 0usize..5000) {
            let r = metrics_from_totals(tp, fp, fn_);
            if 2 * tp + fp + fn_ > 0 {
                let alt = 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64;
                prop_assert!((r.f1.unwrap() - alt).abs() <= 1e-12);
            } else {
                prop_assert_eq!(r.f1, None);
            }
        }

        #[test]
        fn aggregation_order_invariant(
            counts in prop::collection::vec((0usize..10, 0usize..10, 0usize..10), 1..8),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut v: Vec<VideoCounts> = counts.iter().enumerate().map(|(i, &(m, n, a))| {
                let a = a.min(m).min(n);
                VideoCounts { video_id: format!("v{i}"), m, n, a, fp: n - a, fn_: m - a }
            }).collect();
            let r = database_metrics(&v, 0.5);
            v.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(database_metrics(&v, 0.5), r);
        }
    }
}
