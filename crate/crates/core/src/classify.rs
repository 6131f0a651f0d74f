//! Labels, leave-one-subject-out folds and a weighted linear SVM.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::{EventKind, GroundTruthInterval};
use crate::error::{Error, Result};
use crate::hexfloat;
use crate::ltp::RoiFeatures;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub feature: Vec<f64>,
    /// +1 for a micro-expression pattern, -1 otherwise.
    pub label: i8,
    pub subject_id: String,
    pub video_id: String,
    pub roi_id: usize,
    pub frame: u32,
    pub span_index: usize,
    /// Un-normalized motion amplitude of the pattern.
    pub amplitude: f64,
}

/// True when the analysis window starting at `frame` begins inside a
/// micro-expression: `frame ∈ [onset, max(onset, offset − L + 1)]`.
pub fn is_positive_frame(
    frame: u32,
    ground_truth: &[GroundTruthInterval],
    l_interval: usize,
) -> bool {
    ground_truth.iter().any(|g| {
        g.kind == EventKind::Micro && {
            let last = (g.offset + 1)
                .saturating_sub(l_interval as u32)
                .max(g.onset);
            (g.onset..=last).contains(&frame)
        }
    })
}

/// Labels every feature of one video. Ground truth of other videos is
/// ignored.
pub fn assign_labels(
    rois: &[RoiFeatures],
    ground_truth: &[GroundTruthInterval],
    video_id: &str,
    subject_id: &str,
    l_interval: usize,
) -> Vec<LabeledSample> {
    let own: Vec<GroundTruthInterval> = ground_truth
        .iter()
        .filter(|g| g.video_id == video_id)
        .cloned()
        .collect();
    rois.iter()
        .flat_map(|roi| roi.features.iter())
        .map(|f| LabeledSample {
            feature: f.vector(),
            label: if is_positive_frame(f.frame, &own, l_interval) {
                1
            } else {
                -1
            },
            subject_id: subject_id.to_string(),
            video_id: video_id.to_string(),
            roi_id: f.roi_id,
            frame: f.frame,
            span_index: f.span_index,
            amplitude: f.raw_amplitude(),
        })
        .collect()
}

/// Fraction of the strongest ROI's amplitude a positive needs to be kept
/// for training.
pub const SELECTION_RATIO: f64 = 0.5;

/// Keeps positives whose ROI actually moves: at each positive (video, span,
/// frame) only ROIs reaching `ratio` of the largest amplitude stay. Dropped
/// positives are removed, not relabeled. Negatives are untouched.
pub fn select_training_samples(samples: Vec<LabeledSample>, ratio: f64) -> Vec<LabeledSample> {
    let mut peak: HashMap<(&str, usize, u32), f64> = HashMap::new();
    for s in samples.iter().filter(|s| s.label > 0) {
        let e = peak
            .entry((&s.video_id, s.span_index, s.frame))
            .or_insert(0.0);
        *e = e.max(s.amplitude);
    }
    let keep: Vec<bool> = samples
        .iter()
        .map(|s| {
            s.label < 0 || {
                let top = peak[&(s.video_id.as_str(), s.span_index, s.frame)];
                top > 0.0 && s.amplitude >= ratio * top
            }
        })
        .collect();
    samples
        .into_iter()
        .zip(keep)
        .filter_map(|(s, k)| k.then_some(s))
        .collect()
}

/// Drops negatives whose analysis window `[n, n + L − 1]` overlaps a
/// micro-expression of the same video. Such windows hold part of the
/// movement and would teach the classifier to reject it.
pub fn drop_ambiguous_negatives(
    samples: Vec<LabeledSample>,
    ground_truth: &[GroundTruthInterval],
    l_interval: usize,
) -> Vec<LabeledSample> {
    let span = l_interval.max(1) as u32 - 1;
    samples
        .into_iter()
        .filter(|s| {
            s.label > 0
                || !ground_truth.iter().any(|g| {
                    g.kind == EventKind::Micro
                        && g.video_id == s.video_id
                        && s.frame <= g.offset
                        && s.frame + span >= g.onset
                })
        })
        .collect()
}

/// One leave-one-subject-out fold, as indices into the sample list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LosoFold {
    pub held_out_subject: String,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// One fold per subject, ordered by subject id.
pub fn loso_splits(samples: &[LabeledSample]) -> Result<Vec<LosoFold>> {
    let subjects: Vec<&str> = samples.iter().map(|s| s.subject_id.as_str()).collect();
    loso_splits_by(&subjects)
}

/// Folds over any list of items tagged with a subject id.
pub fn loso_splits_by<S: AsRef<str>>(subjects: &[S]) -> Result<Vec<LosoFold>> {
    let distinct: BTreeSet<&str> = subjects.iter().map(|s| s.as_ref()).collect();
    if distinct.len() < 2 {
        return Err(Error::NeedMultipleSubjects(distinct.len()));
    }
    Ok(distinct
        .into_iter()
        .map(|held| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..subjects.len()).partition(|&i| subjects[i].as_ref() == held);
            LosoFold {
                held_out_subject: held.to_string(),
                train,
                test,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c_param: f64,
    /// Loss weights of the positive and negative class.
    pub class_weights: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmParams {
    pub c_param: f64,
    /// `None` weights classes inversely to their frequency.
    pub class_weights: Option<(f64, f64)>,
    pub seed: u64,
    pub max_epochs: usize,
    /// Training ends once the spread of projected dual gradients over an
    /// epoch falls below this.
    pub tolerance: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c_param: 1.0,
            class_weights: None,
            seed: 0,
            max_epochs: 20_000,
            tolerance: 0.1,
        }
    }
}

/// `(1, n₊ / n₋)`: both classes carry the same total weight, that of the
/// positive class.
pub fn inverse_frequency_weights(labels: &[i8]) -> (f64, f64) {
    let pos = labels.iter().filter(|&&y| y > 0).count() as f64;
    let neg = labels.len() as f64 - pos;
    (1.0, pos / neg.max(1.0))
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Per-dimension mean and spread used to standardize features. A constant
/// dimension gets a spread of 1.
fn standardization(xs: &[&[f64]], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = xs.len().max(1) as f64;
    let mut mean = vec![0.0; dim];
    for x in xs {
        for (m, v) in mean.iter_mut().zip(*x) {
            *m += v / n;
        }
    }
    let mut spread = vec![0.0; dim];
    for x in xs {
        for ((s, v), m) in spread.iter_mut().zip(*x).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    for s in &mut spread {
        *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
    }
    (mean, spread)
}

/// Hinge-loss linear SVM solved by dual coordinate descent on standardized
/// features; the returned weights act on raw features. The bias is learned
/// as the weight of a constant extra feature. Samples are visited in a
/// seeded random order each epoch, so results depend only on the inputs and
/// the seed.
pub fn train_linear_svm(xs: &[&[f64]], ys: &[i8], params: &SvmParams) -> Result<SvmModel> {
    if xs.len() != ys.len() {
        return Err(Error::dims(
            format!("{} labels", xs.len()),
            format!("{} labels", ys.len()),
        ));
    }
    let dim = xs.first().map_or(0, |x| x.len());
    if let Some(bad) = xs.iter().find(|x| x.len() != dim) {
        return Err(Error::dims(dim.to_string(), bad.len().to_string()));
    }
    let has_pos = ys.iter().any(|&y| y > 0);
    let has_neg = ys.iter().any(|&y| y <= 0);
    if !has_pos || !has_neg {
        return Err(Error::DegenerateTrainingSet);
    }
    let class_weights = params
        .class_weights
        .unwrap_or_else(|| inverse_frequency_weights(ys));
    let ys: Vec<i8> = ys.iter().map(|&y| if y > 0 { 1 } else { -1 }).collect();
    let cost: Vec<f64> = ys
        .iter()
        .map(|&y| {
            params.c_param
                * if y > 0 {
                    class_weights.0
                } else {
                    class_weights.1
                }
        })
        .collect();
    let (mean, spread) = standardization(xs, dim);
    let scaled: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| {
            x.iter()
                .zip(&mean)
                .zip(&spread)
                .map(|((v, m), s)| (v - m) / s)
                .collect()
        })
        .collect();
    let xs: Vec<&[f64]> = scaled.iter().map(Vec::as_slice).collect();
    let q: Vec<f64> = xs.iter().map(|x| dot(x, x) + 1.0).collect();

    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut alpha = vec![0.0; xs.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    // Shrinking: variables stuck at a bound are set aside until the active
    // set converges, then everything is checked again.
    let n = xs.len();
    let mut active: Vec<usize> = (0..n).collect();
    let mut active_len = n;
    let (mut bound_max, mut bound_min) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..params.max_epochs {
        active[..active_len].shuffle(&mut rng);
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut s = 0;
        while s < active_len {
            let i = active[s];
            let y = ys[i] as f64;
            let g = y * (dot(&w, xs[i]) + b) - 1.0;
            let a = alpha[i];
            let projected = if a == 0.0 {
                if g > bound_max {
                    active_len -= 1;
                    active.swap(s, active_len);
                    continue;
                }
                g.min(0.0)
            } else if a == cost[i] {
                if g < bound_min {
                    active_len -= 1;
                    active.swap(s, active_len);
                    continue;
                }
                g.max(0.0)
            } else {
                g
            };
            s += 1;
            pg_max = pg_max.max(projected);
            pg_min = pg_min.min(projected);
            if projected == 0.0 {
                continue;
            }
            let next = (a - g / q[i]).clamp(0.0, cost[i]);
            let step = (next - a) * y;
            if step != 0.0 {
                for (wj, xj) in w.iter_mut().zip(xs[i]) {
                    *wj += step * xj;
                }
                b += step;
                alpha[i] = next;
            }
        }
        if pg_max - pg_min < params.tolerance {
            if active_len == n {
                break;
            }
            active_len = n;
            bound_max = f64::INFINITY;
            bound_min = f64::NEG_INFINITY;
            continue;
        }
        bound_max = if pg_max <= 0.0 { f64::INFINITY } else { pg_max };
        bound_min = if pg_min >= 0.0 {
            f64::NEG_INFINITY
        } else {
            pg_min
        };
    }

    let weights: Vec<f64> = w.iter().zip(&spread).map(|(wj, s)| wj / s).collect();
    let bias = b - dot(&weights, &mean);
    Ok(SvmModel {
        weights,
        bias,
        c_param: params.c_param,
        class_weights,
    })
}

/// Trains on labeled samples.
pub fn train_on_samples(samples: &[&LabeledSample], params: &SvmParams) -> Result<SvmModel> {
    let xs: Vec<&[f64]> = samples.iter().map(|s| s.feature.as_slice()).collect();
    let ys: Vec<i8> = samples.iter().map(|s| s.label).collect();
    train_linear_svm(&xs, &ys, params)
}

/// `(w·x + b, label)`; a zero score is negative.
pub fn predict(model: &SvmModel, x: &[f64]) -> Result<(f64, i8)> {
    if x.len() != model.weights.len() {
        return Err(Error::dims(
            model.weights.len().to_string(),
            x.len().to_string(),
        ));
    }
    let score = dot(&model.weights, x) + model.bias;
    Ok((score, if score > 0.0 { 1 } else { -1 }))
}

const MODEL_MAGIC: &str = "mespot-linear-svm 1";

pub fn write_model<W: Write>(mut out: W, model: &SvmModel) -> std::io::Result<()> {
    writeln!(out, "{MODEL_MAGIC}")?;
    writeln!(out, "dims {}", model.weights.len())?;
    writeln!(out, "c {}", hexfloat::format(model.c_param))?;
    writeln!(
        out,
        "class_weights {} {}",
        hexfloat::format(model.class_weights.0),
        hexfloat::format(model.class_weights.1)
    )?;
    writeln!(out, "bias {}", hexfloat::format(model.bias))?;
    write!(out, "weights")?;
    for w in &model.weights {
        write!(out, " {}", hexfloat::format(*w))?;
    }
    writeln!(out)
}

pub fn parse_model<R: BufRead>(reader: R) -> Result<SvmModel> {
    let mut fields: BTreeMap<String, (usize, Vec<String>)> = BTreeMap::new();
    let mut lines = reader.lines().enumerate();
    match lines.next() {
        Some((_, Ok(l))) if l.trim() == MODEL_MAGIC => {}
        _ => return Err(Error::Model("missing model header".into())),
    }
    for (i, line) in lines {
        let line = line.map_err(|e| Error::Model(e.to_string()))?;
        let mut parts = line.split_whitespace();
        if let Some(key) = parts.next() {
            fields.insert(
                key.to_string(),
                (i + 1, parts.map(str::to_string).collect()),
            );
        }
    }
    let get = |key: &str, count: Option<usize>| -> Result<Vec<f64>> {
        let (line, vals) = fields
            .get(key)
            .ok_or_else(|| Error::Model(format!("missing `{key}`")))?;
        if count.is_some_and(|n| n != vals.len()) {
            return Err(Error::format(
                *line,
                format!("wrong number of values for `{key}`"),
            ));
        }
        vals.iter()
            .map(|v| {
                hexfloat::parse(v).ok_or_else(|| Error::format(*line, format!("bad number `{v}`")))
            })
            .collect()
    };
    let dims: usize = fields
        .get("dims")
        .and_then(|(_, v)| v.first())
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Model("missing `dims`".into()))?;
    let cw = get("class_weights", Some(2))?;
    Ok(SvmModel {
        weights: get("weights", Some(dims))?,
        bias: get("bias", Some(1))?[0],
        c_param: get("c", Some(1))?[0],
        class_weights: (cw[0], cw[1]),
    })
}

pub fn save_model(path: &Path, model: &SvmModel) -> Result<()> {
    let mut buf = Vec::new();
    write_model(&mut buf, model).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<SvmModel> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_model(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RoiRole;
    use crate::ltp::LtpFeature;
    use proptest::prelude::*;
    use rand::Rng;

    fn gt(onset: u32, offset: u32, kind: EventKind) -> GroundTruthInterval {
        GroundTruthInterval {
            video_id: "v".into(),
            kind,
            onset,
            apex: None,
            offset,
        }
    }

    fn one_roi(frames: std::ops::RangeInclusive<u32>) -> Vec<RoiFeatures> {
        vec![RoiFeatures {
            roi_id: 0,
            role: RoiRole::Eyebrow,
            features: frames
                .map(|frame| LtpFeature {
                    roi_id: 0,
                    frame,
                    span_index: 0,
                    cn: 1.0,
                    distances: vec![0.5; 8],
                })
                .collect(),
        }]
    }

    fn positives(samples: &[LabeledSample]) -> Vec<u32> {
        samples
            .iter()
            .filter(|s| s.label > 0)
            .map(|s| s.frame)
            .collect()
    }

    #[test]
    fn label_rule() {
        let rois = one_roi(1..=200);
        let s = assign_labels(&rois, &[gt(100, 130, EventKind::Micro)], "v", "s1", 9);
        assert_eq!(positives(&s), (100..=122).collect::<Vec<_>>());
        let s = assign_labels(&rois, &[gt(100, 104, EventKind::Micro)], "v", "s1", 9);
        assert_eq!(positives(&s), vec![100]);
        let s = assign_labels(&rois, &[], "v", "s1", 9);
        assert!(positives(&s).is_empty());
        let s = assign_labels(
            &rois,
            &[gt(50, 60, EventKind::Blink), gt(70, 90, EventKind::Macro)],
            "v",
            "s1",
            9,
        );
        assert!(positives(&s).is_empty());
        let mut other = gt(100, 130, EventKind::Micro);
        other.video_id = "w".into();
        assert!(positives(&assign_labels(&rois, &[other], "v", "s1", 9)).is_empty());
        assert_eq!(
            s[0].feature,
            vec![1.0, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5]
        );
    }

    fn sample(subject: &str, label: i8) -> LabeledSample {
        LabeledSample {
            feature: vec![0.0],
            label,
            subject_id: subject.into(),
            video_id: format!("{subject}_v"),
            roi_id: 0,
            frame: 1,
            span_index: 0,
            amplitude: 1.0,
        }
    }

    #[test]
    fn folds_partition_by_subject() {
        let s: Vec<_> = ["s2", "s1", "s3", "s1", "s2"]
            .iter()
            .map(|id| sample(id, 1))
            .collect();
        let folds = loso_splits(&s).unwrap();
        assert_eq!(folds.len(), 3);
        assert_eq!(folds[0].held_out_subject, "s1");
        assert_eq!(folds[0].test, vec![1, 3]);
        assert!(folds[0].train.iter().all(|&i| s[i].subject_id != "s1"));
        let mut all: Vec<usize> = folds.iter().flat_map(|f| f.test.clone()).collect();
        all.sort();
        assert_eq!(all, (0..5).collect::<Vec<_>>());
        assert!(matches!(
            loso_splits(&[sample("s1", 1), sample("s1", -1)]),
            Err(Error::NeedMultipleSubjects(1))
        ));
    }

    #[test]
    fn selection_drops_weak_positives() {
        let mut s = vec![
            sample("a", 1),
            sample("a", 1),
            sample("a", 1),
            sample("a", -1),
        ];
        s[0].amplitude = 10.0;
        s[1].amplitude = 4.0;
        s[2].amplitude = 6.0;
        s[3].amplitude = 0.0;
        for (i, x) in s.iter_mut().enumerate() {
            x.roi_id = i;
        }
        let kept: Vec<usize> = select_training_samples(s, 0.5)
            .iter()
            .map(|x| x.roi_id)
            .collect();
        assert_eq!(kept, vec![0, 2, 3]);
    }

    #[test]
    fn separable_toy_set() {
        let xs: Vec<Vec<f64>> = vec![
            vec![2.0, 1.0],
            vec![3.0, 2.5],
            vec![2.5, -1.0],
            vec![4.0, 0.0],
            vec![-2.0, 0.5],
            vec![-3.0, -1.0],
            vec![-1.5, 2.0],
            vec![-2.5, -2.0],
        ];
        let ys = [1, 1, 1, 1, -1, -1, -1, -1];
        let x: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
        let m = train_linear_svm(&x, &ys, &SvmParams::default()).unwrap();
        for (xi, &y) in x.iter().zip(&ys) {
            assert_eq!(predict(&m, xi).unwrap().1, y);
        }
    }

    #[test]
    fn symmetric_data_has_no_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..50 {
            let v: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let label = if v[0] + 0.3 * v[1] > 0.0 { 1 } else { -1 };
            xs.push(v.iter().map(|a| -a).collect::<Vec<_>>());
            ys.push(-label);
            xs.push(v);
            ys.push(label);
        }
        let x: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
        let m = train_linear_svm(&x, &ys, &SvmParams::default()).unwrap();
        assert!(m.bias.abs() < 1e-3, "bias {}", m.bias);
    }

    #[test]
    fn feature_units_do_not_matter() {
        let (xs, ys) = toy(21);
        let stretched: Vec<Vec<f64>> = xs
            .iter()
            .map(|v| vec![v[0] * 1000.0, v[1] + 50.0, v[2] * 0.01, v[3]])
            .collect();
        let a: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
        let b: Vec<&[f64]> = stretched.iter().map(|v| v.as_slice()).collect();
        let ma = train_linear_svm(&a, &ys, &SvmParams::default()).unwrap();
        let mb = train_linear_svm(&b, &ys, &SvmParams::default()).unwrap();
        for (xa, xb) in a.iter().zip(&b) {
            let (sa, _) = predict(&ma, xa).unwrap();
            let (sb, _) = predict(&mb, xb).unwrap();
            assert!((sa - sb).abs() < 1e-6 * (1.0 + sa.abs()), "{sa} vs {sb}");
        }
    }

    #[test]
    fn imbalanced_minority_recalled() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..1000 {
            let pos = i % 100 == 0;
            let centre = if pos { 1.0 } else { -1.0 };
            xs.push(vec![
                centre * 0.6 + rng.random_range(-0.5..0.5),
                rng.random_range(-1.0..1.0),
            ]);
            ys.push(if pos { 1 } else { -1 });
        }
        let x: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
        let m = train_linear_svm(&x, &ys, &SvmParams::default()).unwrap();
        assert_eq!(m.class_weights, (1.0, 10.0 / 990.0));
        for (xi, &y) in x.iter().zip(&ys) {
            if y > 0 {
                assert_eq!(predict(&m, xi).unwrap().1, 1);
            }
        }
    }

    #[test]
    fn one_class_rejected() {
        let x: Vec<&[f64]> = vec![&[1.0], &[2.0]];
        assert!(matches!(
            train_linear_svm(&x, &[1, 1], &SvmParams::default()),
            Err(Error::DegenerateTrainingSet)
        ));
    }

    #[test]
    fn prediction_rules() {
        let m = SvmModel {
            weights: vec![1.0, 0.0],
            bias: 0.0,
            c_param: 1.0,
            class_weights: (1.0, 1.0),
        };
        assert_eq!(predict(&m, &[2.0, 5.0]).unwrap(), (2.0, 1));
        assert_eq!(predict(&m, &[0.0, 5.0]).unwrap(), (0.0, -1));
        assert!(matches!(
            predict(&m, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        let neg = SvmModel {
            weights: vec![-1.0, -0.0],
            bias: -0.5,
            ..m.clone()
        };
        let m2 = SvmModel { bias: 0.5, ..m };
        assert_eq!(
            predict(&neg, &[3.0, 1.0]).unwrap().0,
            -predict(&m2, &[3.0, 1.0]).unwrap().0
        );
    }

    fn toy(seed: u64) -> (Vec<Vec<f64>>, Vec<i8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let ys = xs
            .iter()
            .map(|v| {
                if v[0] - v[2] + 0.1 * rng.random_range(-1.0..1.0) > 0.0 {
                    1
                } else {
                    -1
                }
            })
            .collect();
        (xs, ys)
    }

    #[test]
    fn deterministic_given_seed() {
        let (xs, ys) = toy(1);
        let x: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
        let p = SvmParams {
            seed: 42,
            ..SvmParams::default()
        };
        let a = train_linear_svm(&x, &ys, &p).unwrap();
        let b = train_linear_svm(&x, &ys, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn model_file_round_trip() {
        let (xs, ys) = toy(2);
        let x: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
        let m = train_linear_svm(&x, &ys, &SvmParams::default()).unwrap();
        let mut buf = Vec::new();
        write_model(&mut buf, &m).unwrap();
        assert_eq!(parse_model(buf.as_slice()).unwrap(), m);
        assert!(parse_model("nonsense\n".as_bytes()).is_err());
        let text = String::from_utf8(buf).unwrap().replace("dims 4", "dims 5");
        assert!(parse_model(text.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn positive_count_formula(
            starts in prop::collection::btree_set(0u32..20, 0..5),
            lens in prop::collection::vec(1u32..40, 5),
            l in 2usize..12,
        ) {
            // disjoint intervals on a 50-frame grid
            let intervals: Vec<_> = starts.iter().zip(&lens)
                .map(|(&s, &len)| gt(1 + 50 * s, 50 * s + len, EventKind::Micro)).collect();
            let rois = one_roi(1..=1000);
            let got = positives(&assign_labels(&rois, &intervals, "v", "s", l)).len() as i64;
            let want: i64 = intervals.iter()
                .map(|g| (g.offset as i64 - g.onset as i64 - l as i64 + 2).max(1)).sum();
            prop_assert_eq!(got, want);
        }

        #[test]
        fn folds_are_exact_partitions(subjects in prop::collection::vec(0u8..5, 2..60)) {
            let ids: Vec<String> = subjects.iter().map(|s| format!("s{s}")).collect();
            let distinct: BTreeSet<_> = ids.iter().collect();
            prop_assume!(distinct.len() >= 2);
            let folds = loso_splits_by(&ids).unwrap();
            prop_assert_eq!(folds.len(), distinct.len());
            let mut seen = vec![0; ids.len()];
            for f in &folds {
                prop_assert_eq!(f.train.len() + f.test.len(), ids.len());
                for &i in &f.test {
                    prop_assert_eq!(&ids[i], &f.held_out_subject);
                    seen[i] += 1;
                }
                for &i in &f.train {
                    prop_assert_ne!(&ids[i], &f.held_out_subject);
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }
    }
}
