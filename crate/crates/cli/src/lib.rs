//! Commands behind the `mespot` binary.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use mespot_core::classify::{
    assign_labels, drop_ambiguous_negatives, load_model, loso_splits_by, select_training_samples,
    train_on_samples, LabeledSample, SvmModel, SvmParams, SELECTION_RATIO,
};
use mespot_core::dataio::{
    dataset_config_by_name, load_frame_sequence, parse_ground_truth, parse_key_values,
    read_ground_truth, read_landmark_track, write_ground_truth, DatasetConfig, FrameSequence,
    GroundTruthInterval, LandmarkTrack, VideoMeta,
};
use mespot_core::fusion::{
    parse_intervals, spot_video, write_intervals, FusionParams, Method, SpottedInterval,
};
use mespot_core::geometry::RoiLayoutMap;
use mespot_core::lbpchi2;
use mespot_core::ltp::{extract_ltp_features, RoiFeatures};
use mespot_core::metrics::{evaluate, EvalReport};
use mespot_core::synth::{generate_sequence, standard_suite, write_video_dir, SynthSpec};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}:{line}: {message}")]
    Manifest {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Core(#[from] mespot_core::Error),
}

impl CliError {
    /// 2 for usage errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(mespot_core::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestVideo {
    pub video_id: String,
    pub subject_id: String,
    pub frames: PathBuf,
    pub landmarks: PathBuf,
}

/// A dataset on disk: `dataset = NAME` or `config = PATH`, `gt = PATH`,
/// `out = DIR` and one `video = id, subject, frames, landmarks` line per
/// video. Relative paths are resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub config: DatasetConfig,
    pub ground_truth: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub videos: Vec<ManifestVideo>,
}

impl Manifest {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &str| base.join(p);
        let err = |line: usize, message: String| CliError::Manifest {
            path: path.to_path_buf(),
            line,
            message,
        };
        let entries = parse_key_values(text).map_err(|e| match e {
            mespot_core::Error::Format { line, message } => err(line, message),
            other => CliError::Core(other),
        })?;
        let mut config = None;
        let mut ground_truth = None;
        let mut out = None;
        let mut videos: Vec<ManifestVideo> = Vec::new();
        let mut ids = BTreeSet::new();
        for kv in entries {
            match kv.key.as_str() {
                "dataset" => {
                    config = Some(
                        dataset_config_by_name(&kv.value)
                            .map_err(|e| err(kv.line, e.to_string()))?,
                    )
                }
                "config" => {
                    config = Some(
                        DatasetConfig::from_file(&resolve(&kv.value))
                            .map_err(|e| err(kv.line, e.to_string()))?,
                    )
                }
                "gt" => ground_truth = Some(resolve(&kv.value)),
                "out" => out = Some(resolve(&kv.value)),
                "video" => {
                    let parts: Vec<&str> = kv.value.split(',').map(str::trim).collect();
                    if parts.len() != 4 || parts.iter().any(|p| p.is_empty()) {
                        return Err(err(
                            kv.line,
                            "expected `video = id, subject, frames, landmarks`".into(),
                        ));
                    }
                    if !ids.insert(parts[0].to_string()) {
                        return Err(err(kv.line, format!("duplicate video id `{}`", parts[0])));
                    }
                    videos.push(ManifestVideo {
                        video_id: parts[0].into(),
                        subject_id: parts[1].into(),
                        frames: resolve(parts[2]),
                        landmarks: resolve(parts[3]),
                    });
                }
                other => return Err(err(kv.line, format!("unknown key `{other}`"))),
            }
        }
        if videos.is_empty() {
            return Err(err(0, "manifest lists no videos".into()));
        }
        let config = config.ok_or_else(|| err(0, "manifest needs `dataset` or `config`".into()))?;
        config.validate()?;
        Ok(Self {
            config,
            ground_truth,
            out,
            videos,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_text(&self, dataset: &str) -> String {
        let mut s = format!("dataset = {dataset}\n");
        if let Some(gt) = &self.ground_truth {
            s += &format!("gt = {}\n", gt.display());
        }
        if let Some(out) = &self.out {
            s += &format!("out = {}\n", out.display());
        }
        for v in &self.videos {
            s += &format!(
                "video = {}, {}, {}, {}\n",
                v.video_id,
                v.subject_id,
                v.frames.display(),
                v.landmarks.display()
            );
        }
        s
    }
}

/// Flags shared by the commands.
#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    pub dataset: Option<String>,
    pub config: Option<PathBuf>,
    pub k: f64,
    pub tau: Option<f64>,
    pub c_param: f64,
    pub seed: u64,
    pub jobs: usize,
    pub nose_veto: bool,
    pub out: Option<PathBuf>,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            dataset: None,
            config: None,
            k: mespot_core::metrics::DEFAULT_K,
            tau: None,
            c_param: 1.0,
            seed: 0,
            jobs: 0,
            nose_veto: true,
            out: None,
        }
    }
}

impl Options {
    fn config(&self, manifest: &Manifest) -> Result<DatasetConfig> {
        let mut cfg = match (&self.config, &self.dataset) {
            (Some(path), _) => DatasetConfig::from_file(path)?,
            (None, Some(name)) => dataset_config_by_name(name)?,
            (None, None) => manifest.config.clone(),
        };
        if let Some(tau) = self.tau {
            cfg.tau = tau;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self, manifest: Option<&Manifest>) -> Result<PathBuf> {
        self.out
            .clone()
            .or_else(|| manifest.and_then(|m| m.out.clone()))
            .ok_or_else(|| CliError::Usage("no output directory: pass --out".into()))
    }

    fn fusion(&self, cfg: &DatasetConfig) -> FusionParams {
        FusionParams {
            nose_veto: self.nose_veto,
            ..FusionParams::for_interval(cfg.l_interval)
        }
    }

    fn svm(&self) -> SvmParams {
        SvmParams {
            c_param: self.c_param,
            seed: self.seed,
            ..SvmParams::default()
        }
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {} worker threads: {e}", self.jobs)))
    }
}

struct LoadedVideo {
    video: FrameSequence,
    landmarks: LandmarkTrack,
}

fn load_video(v: &ManifestVideo, cfg: &DatasetConfig) -> Result<LoadedVideo> {
    let meta = VideoMeta {
        video_id: v.video_id.clone(),
        subject_id: v.subject_id.clone(),
        fps: cfg.fps,
        first_index: 1,
    };
    Ok(LoadedVideo {
        video: load_frame_sequence(&v.frames, meta)?,
        landmarks: read_landmark_track(&v.landmarks)?,
    })
}

fn ltp_features(
    v: &ManifestVideo,
    cfg: &DatasetConfig,
) -> Result<(FrameSequence, Vec<RoiFeatures>)> {
    let loaded = load_video(v, cfg)?;
    let rois = extract_ltp_features(
        &loaded.video,
        &loaded.landmarks,
        cfg,
        &RoiLayoutMap::default(),
    )?;
    Ok((loaded.video, rois))
}

fn intervals_csv(intervals: &[SpottedInterval]) -> Vec<u8> {
    let mut buf = b"video_id,onset,offset,score,source\n".to_vec();
    write_intervals(&mut buf, intervals).expect("writing to memory");
    buf
}

fn sort_intervals(v: &mut [SpottedInterval]) {
    v.sort_by(|a, b| (&a.video_id, a.onset, a.offset).cmp(&(&b.video_id, b.onset, b.offset)));
}

/// Spots every video of a manifest and writes `intervals.csv` (plus
/// `curves.csv` for the LBP-χ² method) to the output directory.
pub fn cmd_spot(
    manifest_path: &Path,
    method: Method,
    model_path: Option<&Path>,
    opts: &Options,
) -> Result<Vec<SpottedInterval>> {
    if method == Method::LtpMl && model_path.is_none() {
        return Err(CliError::Usage("ltp-ml spotting needs --model".into()));
    }
    let manifest = Manifest::load(manifest_path)?;
    let cfg = opts.config(&manifest)?;
    let out = opts.out_dir(Some(&manifest))?;
    let pool = opts.pool()?;

    let mut intervals = Vec::new();
    match method {
        Method::LtpMl => {
            let model = load_model(model_path.expect("checked above"))?;
            let fusion = opts.fusion(&cfg);
            let per_video: Vec<Result<Vec<SpottedInterval>>> = pool.install(|| {
                manifest
                    .videos
                    .par_iter()
                    .map(|v| {
                        let (video, rois) = ltp_features(v, &cfg)?;
                        spot_ltp(&video, &rois, &model, &fusion, &cfg)
                    })
                    .collect()
            });
            for r in per_video {
                intervals.extend(r?);
            }
        }
        Method::LbpChi2 => {
            let per_video: Vec<Result<(Vec<u8>, Vec<SpottedInterval>)>> = pool.install(|| {
                manifest
                    .videos
                    .par_iter()
                    .map(|v| {
                        let loaded = load_video(v, &cfg)?;
                        let (curve, found) =
                            lbpchi2::spot_video(&loaded.video, &loaded.landmarks, &cfg)?;
                        let mut buf = Vec::new();
                        curve
                            .write_csv(&mut buf, &v.video_id)
                            .expect("writing to memory");
                        Ok((buf, found))
                    })
                    .collect()
            });
            let mut curves = b"video_id,frame,D,C\n".to_vec();
            for r in per_video {
                let (buf, found) = r?;
                curves.extend(buf);
                intervals.extend(found);
            }
            write_atomic(&out.join("curves.csv"), &curves)?;
        }
    }
    sort_intervals(&mut intervals);
    write_atomic(&out.join("intervals.csv"), &intervals_csv(&intervals))?;
    Ok(intervals)
}

fn spot_ltp(
    video: &FrameSequence,
    rois: &[RoiFeatures],
    model: &SvmModel,
    fusion: &FusionParams,
    cfg: &DatasetConfig,
) -> Result<Vec<SpottedInterval>> {
    Ok(spot_video(
        &video.video_id,
        rois,
        model,
        fusion,
        cfg.l_interval,
        (video.first_index, video.last_index()),
    )?)
}

fn load_ground_truth(manifest: &Manifest) -> Result<Vec<GroundTruthInterval>> {
    let path = manifest
        .ground_truth
        .as_ref()
        .ok_or_else(|| CliError::Usage("manifest has no `gt` file".into()))?;
    Ok(read_ground_truth(path)?)
}

fn training_samples(
    manifest: &Manifest,
    features: &[(FrameSequence, Vec<RoiFeatures>)],
    gt: &[GroundTruthInterval],
    cfg: &DatasetConfig,
) -> Vec<Vec<LabeledSample>> {
    manifest
        .videos
        .iter()
        .zip(features)
        .map(|(v, (_, rois))| {
            let labeled = assign_labels(rois, gt, &v.video_id, &v.subject_id, cfg.l_interval);
            let labeled = drop_ambiguous_negatives(labeled, gt, cfg.l_interval);
            select_training_samples(labeled, SELECTION_RATIO)
        })
        .collect()
}

fn extract_all(
    manifest: &Manifest,
    cfg: &DatasetConfig,
    pool: &rayon::ThreadPool,
) -> Result<Vec<(FrameSequence, Vec<RoiFeatures>)>> {
    pool.install(|| {
        manifest
            .videos
            .par_iter()
            .map(|v| ltp_features(v, cfg))
            .collect()
    })
}

/// Trains one model on every video of the manifest.
pub fn cmd_train(manifest_path: &Path, model_out: &Path, opts: &Options) -> Result<SvmModel> {
    let manifest = Manifest::load(manifest_path)?;
    let cfg = opts.config(&manifest)?;
    let gt = load_ground_truth(&manifest)?;
    let features = extract_all(&manifest, &cfg, &opts.pool()?)?;
    let samples = training_samples(&manifest, &features, &gt, &cfg);
    let refs: Vec<&LabeledSample> = samples.iter().flatten().collect();
    let model = train_on_samples(&refs, &opts.svm())?;
    let mut buf = Vec::new();
    mespot_core::classify::write_model(&mut buf, &model).expect("writing to memory");
    write_atomic(model_out, &buf)?;
    Ok(model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LosoOutcome {
    pub report: EvalReport,
    pub intervals: Vec<SpottedInterval>,
    pub model_files: Vec<PathBuf>,
}

/// Leave-one-subject-out run: one model per held-out subject, its videos
/// spotted with that model, all intervals pooled and evaluated once.
/// Writes `model_<subject>.txt`, `intervals.csv`, `report.csv` and
/// `report.json`.
pub fn cmd_loso(manifest_path: &Path, opts: &Options) -> Result<LosoOutcome> {
    let manifest = Manifest::load(manifest_path)?;
    let cfg = opts.config(&manifest)?;
    let out = opts.out_dir(Some(&manifest))?;
    let gt = load_ground_truth(&manifest)?;
    let subjects: Vec<&str> = manifest
        .videos
        .iter()
        .map(|v| v.subject_id.as_str())
        .collect();
    let folds = loso_splits_by(&subjects)?;
    let pool = opts.pool()?;

    let features = extract_all(&manifest, &cfg, &pool)?;
    let samples = training_samples(&manifest, &features, &gt, &cfg);
    let fusion = opts.fusion(&cfg);
    let svm = opts.svm();

    let trained: Vec<Result<(SvmModel, Vec<SpottedInterval>)>> = pool.install(|| {
        folds
            .par_iter()
            .map(|fold| {
                let train: Vec<&LabeledSample> =
                    fold.train.iter().flat_map(|&i| &samples[i]).collect();
                let model = train_on_samples(&train, &svm)?;
                let mut found = Vec::new();
                for &i in &fold.test {
                    let (video, rois) = &features[i];
                    found.extend(spot_ltp(video, rois, &model, &fusion, &cfg)?);
                }
                Ok((model, found))
            })
            .collect()
    });

    let mut intervals = Vec::new();
    let mut model_files = Vec::new();
    for (fold, r) in folds.iter().zip(trained) {
        let (model, found) = r?;
        let path = out.join(format!("model_{}.txt", fold.held_out_subject));
        let mut buf = Vec::new();
        mespot_core::classify::write_model(&mut buf, &model).expect("writing to memory");
        write_atomic(&path, &buf)?;
        model_files.push(path);
        intervals.extend(found);
    }
    sort_intervals(&mut intervals);

    let ids: Vec<String> = manifest.videos.iter().map(|v| v.video_id.clone()).collect();
    let report = evaluate(&intervals, &gt, &ids, opts.k)?;
    write_atomic(&out.join("intervals.csv"), &intervals_csv(&intervals))?;
    write_report(&out, &report)?;
    Ok(LosoOutcome {
        report,
        intervals,
        model_files,
    })
}

fn write_report(out: &Path, report: &EvalReport) -> Result<()> {
    let mut csv = Vec::new();
    report.write_csv(&mut csv).expect("writing to memory");
    write_atomic(&out.join("report.csv"), &csv)?;
    let mut json = report.to_json();
    json.push('\n');
    write_atomic(&out.join("report.json"), json.as_bytes())
}

/// Scores a spotted-intervals CSV against a ground-truth CSV. The videos
/// evaluated are those of the ground truth plus any in `extra_videos`.
pub fn cmd_evaluate(
    spotted_path: &Path,
    gt_path: &Path,
    extra_videos: &[String],
    opts: &Options,
) -> Result<EvalReport> {
    let open = |p: &Path| fs::File::open(p).map_err(|e| io_err(p, e));
    let spotted = parse_intervals(open(spotted_path)?)?;
    let gt = parse_ground_truth(open(gt_path)?)?;
    let mut videos: BTreeSet<String> = gt.iter().map(|g| g.video_id.clone()).collect();
    videos.extend(extra_videos.iter().cloned());
    let ids: Vec<String> = videos.into_iter().collect();
    let report = evaluate(&spotted, &gt, &ids, opts.k)?;
    if let Some(out) = &opts.out {
        write_report(out, &report)?;
    }
    Ok(report)
}

/// Video specs of a synth file: sections separated by `---` lines, each a
/// single-video spec or `suite = standard` (with an optional `seed`).
pub fn parse_synth_plan(text: &str) -> Result<Vec<SynthSpec>> {
    let mut specs = Vec::new();
    let mut section = String::new();
    let mut sections = Vec::new();
    for line in text.lines() {
        if line.trim() == "---" {
            sections.push(std::mem::take(&mut section));
        } else {
            section.push_str(line);
            section.push('\n');
        }
    }
    sections.push(section);
    for s in sections
        .iter()
        .filter(|s| !parse_key_values(s).map(|kv| kv.is_empty()).unwrap_or(false))
    {
        let kv = parse_key_values(s)?;
        if let Some(suite) = kv.iter().find(|k| k.key == "suite") {
            if suite.value != "standard" {
                return Err(CliError::Core(mespot_core::Error::Format {
                    line: suite.line,
                    message: format!("unknown suite `{}`", suite.value),
                }));
            }
            let seed = match kv.iter().find(|k| k.key == "seed") {
                Some(k) => k.value.parse().map_err(|_| {
                    CliError::Core(mespot_core::Error::Format {
                        line: k.line,
                        message: format!("bad seed `{}`", k.value),
                    })
                })?,
                None => 0,
            };
            specs.extend(standard_suite(seed));
        } else {
            specs.push(SynthSpec::parse(s)?);
        }
    }
    Ok(specs)
}

/// Renders every video of a synth plan under `out/<video_id>/` and writes
/// a pooled `gt.csv` and a `manifest.txt` pointing at them.
pub fn cmd_synth_specs(specs: &[SynthSpec], out: &Path, opts: &Options) -> Result<PathBuf> {
    let ids: BTreeSet<&str> = specs.iter().map(|s| s.video_id.as_str()).collect();
    if ids.len() != specs.len() {
        return Err(CliError::Core(mespot_core::Error::Spec(
            "duplicate video ids".into(),
        )));
    }
    let pool = opts.pool()?;
    let rendered: Vec<Result<Vec<GroundTruthInterval>>> = pool.install(|| {
        specs
            .par_iter()
            .map(|s| {
                let v = generate_sequence(s)?;
                write_video_dir(&out.join(&s.video_id), &v)?;
                Ok(v.ground_truth)
            })
            .collect()
    });
    let mut gt = Vec::new();
    for r in rendered {
        gt.extend(r?);
    }
    let mut buf = b"video_id,kind,onset,apex,offset\n".to_vec();
    write_ground_truth(&mut buf, &gt).expect("writing to memory");
    write_atomic(&out.join("gt.csv"), &buf)?;

    let fps = specs.first().map_or(30.0, |s| s.fps);
    let dataset = if (fps - 200.0).abs() < 1e-9 {
        "samm"
    } else {
        "casme2"
    };
    let manifest = Manifest {
        config: dataset_config_by_name(dataset)?,
        ground_truth: Some(PathBuf::from("gt.csv")),
        out: Some(PathBuf::from("results")),
        videos: specs
            .iter()
            .map(|s| ManifestVideo {
                video_id: s.video_id.clone(),
                subject_id: s.subject_id.clone(),
                frames: PathBuf::from(&s.video_id).join("frames"),
                landmarks: PathBuf::from(&s.video_id).join("landmarks.csv"),
            })
            .collect(),
    };
    let path = out.join("manifest.txt");
    write_atomic(&path, manifest.to_text(dataset).as_bytes())?;
    Ok(path)
}

pub fn cmd_synth(spec_path: &Path, out: &Path, opts: &Options) -> Result<PathBuf> {
    let text = fs::read_to_string(spec_path).map_err(|e| io_err(spec_path, e))?;
    let specs = parse_synth_plan(&text)?;
    if specs.is_empty() {
        return Err(CliError::Core(mespot_core::Error::Spec(
            "spec file describes no videos".into(),
        )));
    }
    cmd_synth_specs(&specs, out, opts)
}
