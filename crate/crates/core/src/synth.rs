//! Synthetic face videos with known events, for end-to-end checks.
//!
//! A smooth textured face is drawn once and translated by a slow drift.
//! Events are Gaussian intensity bumps whose strength follows a triangle
//! from onset through apex to offset.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataio::{
    parse_key_values, write_ground_truth, write_landmark_track, write_pgm_dir, EventKind,
    FrameSequence, GrayFrame, GroundTruthInterval, LandmarkTrack, Landmarks, Point2, VideoMeta,
    LANDMARK_COUNT,
};
use crate::error::{Error, Result};
use crate::geometry::{landmark, RoiLayoutMap};

/// Side of the square frame the template landmarks are laid out for.
pub const TEMPLATE_SIZE: f64 = 128.0;

/// Where an event is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventTarget {
    /// Centre of one ROI of the default layout.
    Roi(usize),
    /// Both eye centres.
    Eyes,
    /// Mouth and cheek ROIs together.
    LowerFace,
    /// All twelve ROIs.
    Face,
}

impl std::str::FromStr for EventTarget {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "eyes" => Ok(EventTarget::Eyes),
            "lower" => Ok(EventTarget::LowerFace),
            "face" | "all" => Ok(EventTarget::Face),
            _ => s
                .strip_prefix("roi")
                .unwrap_or(s)
                .parse()
                .map(EventTarget::Roi)
                .map_err(|_| format!("unknown event target `{s}`")),
        }
    }
}

impl std::fmt::Display for EventTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EventTarget::Roi(id) => write!(f, "{id}"),
            EventTarget::Eyes => f.write_str("eyes"),
            EventTarget::LowerFace => f.write_str("lower"),
            EventTarget::Face => f.write_str("face"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthEvent {
    pub kind: EventKind,
    pub target: EventTarget,
    pub onset_s: f64,
    pub duration_s: f64,
    /// Peak intensity change in gray levels.
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub video_id: String,
    pub subject_id: String,
    pub fps: f64,
    pub duration_s: f64,
    pub width: u32,
    pub height: u32,
    /// Scale of the face relative to a 128-pixel frame.
    pub face_scale: f64,
    /// Phase of the skin texture; varies the look between subjects.
    pub texture_phase: f64,
    /// ROI side the micro-event bumps are sized for (σ = side / 3).
    pub roi_size: f64,
    pub noise_sigma: f64,
    /// Face translation in pixels per second, (x, y).
    pub drift_px_per_s: (f64, f64),
    /// Peak displacement of a slow head sway added to the drift, pixels.
    pub sway_px: f64,
    /// Period of the sway, seconds.
    pub sway_period_s: f64,
    pub seed: u64,
    pub events: Vec<SynthEvent>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            video_id: "synth".into(),
            subject_id: "s1".into(),
            fps: 30.0,
            duration_s: 10.0,
            width: 128,
            height: 128,
            face_scale: 1.0,
            texture_phase: 0.0,
            roi_size: 10.0,
            noise_sigma: 0.0,
            drift_px_per_s: (0.0, 0.0),
            sway_px: 0.0,
            sway_period_s: 4.0,
            seed: 0,
            events: Vec::new(),
        }
    }
}

fn parse_event(value: &str) -> std::result::Result<SynthEvent, String> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    if parts.len() != 5 {
        return Err(format!(
            "event needs `kind target onset_s duration_s amplitude`, got `{value}`"
        ));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|_| format!("bad number `{s}`"));
    Ok(SynthEvent {
        kind: parts[0].parse()?,
        target: parts[1].parse()?,
        onset_s: num(parts[2])?,
        duration_s: num(parts[3])?,
        amplitude: num(parts[4])?,
    })
}

impl SynthSpec {
    /// Reads `key = value` text. Repeat `event = kind target onset_s
    /// duration_s amplitude` for each event.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = SynthSpec::default();
        for kv in parse_key_values(text)? {
            let bad = |m: String| Error::format(kv.line, m);
            let num = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| bad(format!("bad number `{v}`")))
            };
            let v = kv.value.as_str();
            match kv.key.as_str() {
                "video_id" => spec.video_id = v.to_string(),
                "subject_id" => spec.subject_id = v.to_string(),
                "fps" => spec.fps = num(v)?,
                "duration_s" => spec.duration_s = num(v)?,
                "width" => spec.width = num(v)? as u32,
                "height" => spec.height = num(v)? as u32,
                "face_scale" => spec.face_scale = num(v)?,
                "texture_phase" => spec.texture_phase = num(v)?,
                "roi_size" => spec.roi_size = num(v)?,
                "noise_sigma" => spec.noise_sigma = num(v)?,
                "drift_px_per_s" => {
                    let (x, y) = v.split_once(',').unwrap_or((v, "0"));
                    spec.drift_px_per_s = (num(x.trim())?, num(y.trim())?);
                }
                "sway_px" => spec.sway_px = num(v)?,
                "sway_period_s" => spec.sway_period_s = num(v)?,
                "seed" => spec.seed = v.parse().map_err(|_| bad(format!("bad seed `{v}`")))?,
                "event" => spec.events.push(parse_event(v).map_err(bad)?),
                other => return Err(bad(format!("unknown key `{other}`"))),
            }
        }
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "video_id = {}\nsubject_id = {}\nfps = {}\nduration_s = {}\nwidth = {}\nheight = {}\n\
             face_scale = {}\ntexture_phase = {}\nroi_size = {}\nnoise_sigma = {}\n\
             drift_px_per_s = {}, {}\nsway_px = {}\nsway_period_s = {}\nseed = {}\n",
            self.video_id,
            self.subject_id,
            self.fps,
            self.duration_s,
            self.width,
            self.height,
            self.face_scale,
            self.texture_phase,
            self.roi_size,
            self.noise_sigma,
            self.drift_px_per_s.0,
            self.drift_px_per_s.1,
            self.sway_px,
            self.sway_period_s,
            self.seed
        );
        for e in &self.events {
            s += &format!(
                "event = {} {} {} {} {}\n",
                e.kind, e.target, e.onset_s, e.duration_s, e.amplitude
            );
        }
        s
    }

    pub fn frame_count(&self) -> usize {
        (self.duration_s * self.fps).round() as usize
    }

    /// First and last frame of an event (1-based, inclusive).
    pub fn event_frames(&self, e: &SynthEvent) -> (u32, u32) {
        let onset = (e.onset_s * self.fps).round() as u32 + 1;
        let len = ((e.duration_s * self.fps).round() as u32).max(1);
        (onset, onset + len - 1)
    }

    fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Spec(m));
        if !(self.fps > 0.0) || !(self.duration_s > 0.0) || self.frame_count() == 0 {
            return fail("fps and duration must be positive".into());
        }
        if self.width < 16 || self.height < 16 {
            return fail(format!("frame {}x{} too small", self.width, self.height));
        }
        if !(self.sway_period_s > 0.0) || !(self.sway_px >= 0.0) {
            return fail("sway period must be positive and amplitude non-negative".into());
        }
        if !(self.face_scale > 0.0) || !(self.roi_size > 0.0) || self.noise_sigma < 0.0 {
            return fail("face_scale and roi_size must be positive, noise non-negative".into());
        }
        let total = self.frame_count() as u32;
        for e in &self.events {
            if !(e.amplitude > 0.0) {
                return fail(format!("event amplitude {} must be positive", e.amplitude));
            }
            if e.onset_s < 0.0 || !(e.duration_s > 0.0) || self.event_frames(e).1 > total {
                return fail(format!(
                    "event at {} s lasting {} s is outside the {} s video",
                    e.onset_s, e.duration_s, self.duration_s
                ));
            }
            if let EventTarget::Roi(id) = e.target {
                if id >= RoiLayoutMap::default().entries.len() {
                    return fail(format!("no ROI {id}"));
                }
            }
        }
        Ok(())
    }

    /// Face displacement at `frame`: linear drift plus an elliptic sway.
    fn drift_at(&self, frame: u32) -> (f64, f64) {
        let t = (frame - 1) as f64 / self.fps;
        let phase = 2.0 * PI * t / self.sway_period_s;
        (
            self.drift_px_per_s.0 * t + self.sway_px * phase.sin(),
            self.drift_px_per_s.1 * t + 0.5 * self.sway_px * (1.0 - phase.cos()),
        )
    }
}

/// Face landmarks for a 128-pixel frame, following the 84-point scheme of
/// [`crate::geometry::landmark`].
pub fn template_landmarks() -> Landmarks {
    let mut m = [Point2::new(0.0, 0.0); LANDMARK_COUNT];
    let mut put = |i: usize, x: f64, y: f64| m[i] = Point2::new(x, y);
    for j in 0..5 {
        let lift = if j == 2 {
            2.0
        } else if j == 1 || j == 3 {
            1.0
        } else {
            0.0
        };
        put(j, 56.0 - 5.0 * j as f64, 40.0 - lift);
        put(5 + j, 72.0 + 5.0 * j as f64, 40.0 - lift);
    }
    for j in 0..8 {
        let a = PI * j as f64 / 4.0;
        // inner corner first, walking over the top to the outer corner
        put(10 + j, 46.0 + 8.0 * a.cos(), 50.0 - 3.0 * a.sin());
        put(18 + j, 82.0 - 8.0 * a.cos(), 50.0 - 3.0 * a.sin());
    }
    for j in 0..4 {
        put(26 + j, 64.0, 52.0 + 4.0 * j as f64);
    }
    for j in 0..8 {
        put(30 + j, 55.0 + 3.0 * j as f64, 70.0);
    }
    for j in 0..20 {
        let a = PI - PI * j as f64 / 10.0;
        put(38 + j, 64.0 + 14.0 * a.cos(), 88.0 - 6.0 * a.sin());
    }
    for j in 0..8 {
        let a = PI - PI * j as f64 / 4.0;
        put(58 + j, 64.0 + 9.0 * a.cos(), 88.0 - 2.0 * a.sin());
    }
    for j in 0..18 {
        let a = PI * j as f64 / 17.0;
        put(66 + j, 64.0 - 34.0 * a.cos(), 50.0 + 60.0 * a.sin());
    }
    debug_assert_eq!(m[landmark::MOUTH_CORNER_A], Point2::new(50.0, 88.0));
    m
}

fn eye_centres(marks: &Landmarks) -> [Point2; 2] {
    let mean = |r: std::ops::RangeInclusive<usize>| {
        let n = r.clone().count() as f64;
        let (sx, sy) = r.fold((0.0, 0.0), |(x, y), i| (x + marks[i].x, y + marks[i].y));
        Point2::new(sx / n, sy / n)
    };
    [mean(landmark::EYE_A), mean(landmark::EYE_B)]
}

/// Landmarks of the spec's face before drift.
fn base_landmarks(spec: &SynthSpec) -> Landmarks {
    let (cx, cy) = (spec.width as f64 / 2.0, spec.height as f64 / 2.0);
    let mut m = template_landmarks();
    for p in m.iter_mut() {
        *p = Point2::new(
            cx + spec.face_scale * (p.x - TEMPLATE_SIZE / 2.0),
            cy + spec.face_scale * (p.y - TEMPLATE_SIZE / 2.0),
        );
    }
    m
}

fn gauss2(dx: f64, dy: f64, sigma: f64) -> f64 {
    (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
}

/// Face intensity at pixel `(x, y)` before drift.
fn face_value(spec: &SynthSpec, marks: &Landmarks, x: f64, y: f64) -> f64 {
    let s = spec.face_scale;
    let (cx, cy) = (spec.width as f64 / 2.0, spec.height as f64 / 2.0 + 8.0 * s);
    let (u, v) = ((x - cx) / s, (y - cy) / s);
    let r = (u / 38.0).powi(2) + (v / 50.0).powi(2);
    let inside = 1.0 / (1.0 + ((r - 1.0) * 12.0).exp());
    let ph = spec.texture_phase;
    let skin = 140.0
        + 14.0 * (0.9 * u + 0.35 * v + ph).sin() * (0.75 * v - 0.25 * u + 0.5 * ph).cos()
        + 6.0 * (0.31 * u - 0.57 * v + 1.7 * ph).sin();
    let backdrop = 70.0 + 5.0 * (0.2 * x + 0.13 * y).sin();
    let mut value = backdrop + inside * (skin - backdrop);
    let features = landmark::BROW_A
        .chain(landmark::BROW_B)
        .chain(landmark::EYE_A)
        .chain(landmark::EYE_B)
        .chain(landmark::MOUTH_OUTER)
        .chain(30..=37);
    let sigma = 2.0 * s;
    for i in features {
        let p = marks[i];
        if (p.x - x).abs() < 4.0 * sigma && (p.y - y).abs() < 4.0 * sigma {
            value -= 28.0 * gauss2(x - p.x, y - p.y, sigma);
        }
    }
    value
}

/// Strength of an event at `frame`: rises linearly to 1 at the apex and
/// falls back, positive on every frame of the event and zero elsewhere.
pub fn triangle_profile(onset: u32, offset: u32, frame: u32) -> f64 {
    if frame < onset || frame > offset {
        return 0.0;
    }
    let apex = onset + (offset - onset) / 2;
    if frame <= apex {
        (frame - onset + 1) as f64 / (apex - onset + 1) as f64
    } else {
        (offset - frame + 1) as f64 / (offset - apex + 1) as f64
    }
}

/// Bump centres and widths of an event on the undrifted face.
fn event_bumps(spec: &SynthSpec, marks: &Landmarks, e: &SynthEvent) -> Vec<(Point2, f64)> {
    let layout = RoiLayoutMap::default();
    let roi = |id: usize| {
        (
            layout.entries[id].center(marks),
            spec.roi_size * spec.face_scale / 3.0,
        )
    };
    match e.target {
        EventTarget::Roi(id) => vec![roi(id)],
        EventTarget::Eyes => eye_centres(marks)
            .into_iter()
            .map(|c| (c, 2.5 * spec.face_scale))
            .collect(),
        EventTarget::LowerFace => [4, 5, 8, 9].into_iter().map(roi).collect(),
        EventTarget::Face => (0..layout.entries.len()).map(roi).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthVideo {
    pub video: FrameSequence,
    pub landmarks: LandmarkTrack,
    pub ground_truth: Vec<GroundTruthInterval>,
}

/// Renders a spec. The same spec always gives the same bytes.
pub fn generate_sequence(spec: &SynthSpec) -> Result<SynthVideo> {
    spec.validate()?;
    let (w, h) = (spec.width as usize, spec.height as usize);
    let total = spec.frame_count();
    let marks = base_landmarks(spec);

    // undrifted face on a grid with a margin wide enough for the full drift
    let reach = (1..=total as u32)
        .map(|f| spec.drift_at(f))
        .fold(0.0f64, |m, (dx, dy)| m.max(dx.abs()).max(dy.abs()));
    let margin = reach.ceil() as usize + 2;
    let (gw, gh) = (w + 2 * margin, h + 2 * margin);
    let mut face = vec![0.0; gw * gh];
    for gy in 0..gh {
        for gx in 0..gw {
            let x = gx as f64 - margin as f64 + 1.0;
            let y = gy as f64 - margin as f64 + 1.0;
            face[gy * gw + gx] = face_value(spec, &marks, x, y);
        }
    }
    let sample = |x: f64, y: f64| -> f64 {
        let fx = x + margin as f64 - 1.0;
        let fy = y + margin as f64 - 1.0;
        let (x0, y0) = (fx.floor(), fy.floor());
        let (tx, ty) = (fx - x0, fy - y0);
        let (i, j) = (x0 as usize, y0 as usize);
        let at = |i: usize, j: usize| face[j.min(gh - 1) * gw + i.min(gw - 1)];
        (1.0 - tx) * (1.0 - ty) * at(i, j)
            + tx * (1.0 - ty) * at(i + 1, j)
            + (1.0 - tx) * ty * at(i, j + 1)
            + tx * ty * at(i + 1, j + 1)
    };

    let bumps: Vec<(u32, u32, f64, Vec<(Point2, f64)>)> = spec
        .events
        .iter()
        .map(|e| {
            let (on, off) = spec.event_frames(e);
            let sign = if e.kind == EventKind::Blink {
                -1.0
            } else {
                1.0
            };
            (on, off, sign * e.amplitude, event_bumps(spec, &marks, e))
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Spec(e.to_string()))?;

    let mut frames = Vec::with_capacity(total);
    let mut track = Vec::with_capacity(total);
    let mut values = vec![0.0; w * h];
    for frame in 1..=total as u32 {
        let (dx, dy) = spec.drift_at(frame);
        for y in 0..h {
            for x in 0..w {
                values[y * w + x] = sample(x as f64 + 1.0 - dx, y as f64 + 1.0 - dy);
            }
        }
        for (on, off, amp, centres) in &bumps {
            let strength = amp * triangle_profile(*on, *off, frame);
            if strength == 0.0 {
                continue;
            }
            for &(c, sigma) in centres {
                let (cx, cy) = (c.x + dx, c.y + dy);
                let reach = 4.0 * sigma;
                let xs = ((cx - reach).floor().max(1.0) as usize)
                    ..=((cx + reach).ceil().min(w as f64) as usize);
                let ys = ((cy - reach).floor().max(1.0) as usize)
                    ..=((cy + reach).ceil().min(h as f64) as usize);
                for y in ys {
                    for x in xs.clone() {
                        values[(y - 1) * w + x - 1] +=
                            strength * gauss2(x as f64 - cx, y as f64 - cy, sigma);
                    }
                }
            }
        }
        let pixels = values
            .iter()
            .map(|&v| {
                let v = if spec.noise_sigma > 0.0 {
                    v + noise.sample(&mut rng)
                } else {
                    v
                };
                v.round().clamp(0.0, 255.0) as u8
            })
            .collect();
        frames.push(GrayFrame::new(spec.width, spec.height, pixels)?);
        let mut m = marks;
        for p in m.iter_mut() {
            *p = Point2::new(p.x + dx, p.y + dy);
        }
        track.push(m);
    }

    let meta = VideoMeta {
        video_id: spec.video_id.clone(),
        subject_id: spec.subject_id.clone(),
        fps: spec.fps,
        first_index: 1,
    };
    let mut ground_truth: Vec<GroundTruthInterval> = spec
        .events
        .iter()
        .map(|e| {
            let (onset, offset) = spec.event_frames(e);
            GroundTruthInterval {
                video_id: spec.video_id.clone(),
                kind: e.kind,
                onset,
                apex: Some(onset + (offset - onset) / 2),
                offset,
            }
        })
        .collect();
    ground_truth.sort_by_key(|g| (g.onset, g.offset));
    Ok(SynthVideo {
        video: FrameSequence::new(meta, frames)?,
        landmarks: LandmarkTrack {
            first_frame: 1,
            frames: track,
        },
        ground_truth,
    })
}

/// Twelve 20 s videos at 30 fps from three subjects holding 20
/// micro-expressions, 6 blinks and 4 macro-expressions, with mild drift and
/// noise.
pub fn standard_suite(seed: u64) -> Vec<SynthSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // per video: (micro, blink, macro)
    #[rustfmt::skip]
    let plan = [
        (2, 1, 0), (2, 0, 1), (1, 1, 0), (2, 0, 0),
        (2, 1, 0), (1, 0, 1), (2, 0, 0), (2, 1, 0),
        (1, 1, 1), (2, 0, 0), (2, 1, 0), (1, 0, 1),
    ];
    let mut specs = Vec::new();
    for (v, &(micro, blink, mac)) in plan.iter().enumerate() {
        let subject = v / 4;
        // 2 s slots from 1 s to 19 s, one event per slot
        let mut slots: Vec<usize> = (0..9).collect();
        for i in (1..slots.len()).rev() {
            slots.swap(i, rng.random_range(0..=i));
        }
        let mut slot = slots.into_iter();
        let mut events = Vec::new();
        let mut at = |rng: &mut ChaCha8Rng| {
            1.0 + 2.0 * slot.next().unwrap() as f64 + rng.random_range(0.0..0.8)
        };
        for _ in 0..micro {
            let onset_s = at(&mut rng);
            events.push(SynthEvent {
                kind: EventKind::Micro,
                target: EventTarget::Roi(rng.random_range(0..10)),
                onset_s,
                duration_s: rng.random_range(0.27..0.37),
                amplitude: rng.random_range(28.0..36.0),
            });
        }
        for _ in 0..blink {
            let onset_s = at(&mut rng);
            events.push(SynthEvent {
                kind: EventKind::Blink,
                target: EventTarget::Eyes,
                onset_s,
                duration_s: rng.random_range(0.2..0.3),
                amplitude: rng.random_range(40.0..60.0),
            });
        }
        for _ in 0..mac {
            let onset_s = at(&mut rng);
            events.push(SynthEvent {
                kind: EventKind::Macro,
                target: EventTarget::LowerFace,
                onset_s,
                duration_s: rng.random_range(0.5..0.8),
                amplitude: rng.random_range(34.0..42.0),
            });
        }
        specs.push(SynthSpec {
            video_id: format!("s{}_v{}", subject + 1, v % 4 + 1),
            subject_id: format!("s{}", subject + 1),
            fps: 30.0,
            duration_s: 20.0,
            face_scale: 1.0 + 0.04 * subject as f64,
            texture_phase: 0.7 * subject as f64,
            noise_sigma: 0.5,
            drift_px_per_s: (rng.random_range(-0.06..0.06), rng.random_range(-0.04..0.04)),
            sway_px: rng.random_range(1.0..1.6),
            sway_period_s: rng.random_range(6.0..12.0),
            seed: seed.wrapping_mul(1000).wrapping_add(v as u64),
            events,
            ..SynthSpec::default()
        });
    }
    specs
}

/// Writes `frames/` (PGM), `landmarks.csv` and `gt.csv` under `dir`.
pub fn write_video_dir(dir: &Path, v: &SynthVideo) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_pgm_dir(&dir.join("frames"), &v.video.frames)?;
    let mut buf = Vec::new();
    write_landmark_track(&mut buf, &v.landmarks).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("landmarks.csv");
    fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
    let mut buf = Vec::new();
    write_ground_truth(&mut buf, &v.ground_truth).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("gt.csv");
    fs::write(&path, buf).map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(events: Vec<SynthEvent>) -> SynthSpec {
        SynthSpec {
            duration_s: 3.0,
            events,
            ..SynthSpec::default()
        }
    }

    fn micro(onset_s: f64, duration_s: f64) -> SynthEvent {
        SynthEvent {
            kind: EventKind::Micro,
            target: EventTarget::Roi(0),
            onset_s,
            duration_s,
            amplitude: 20.0,
        }
    }

    #[test]
    fn no_events_no_noise_is_constant() {
        let v = generate_sequence(&spec(vec![])).unwrap();
        assert_eq!(v.video.len(), 90);
        assert!(v.video.frames.iter().all(|f| f == &v.video.frames[0]));
        assert!(v.ground_truth.is_empty());
    }

    #[test]
    fn micro_event_frames() {
        let v = generate_sequence(&spec(vec![micro(1.0, 0.3)])).unwrap();
        let g = &v.ground_truth[0];
        assert_eq!((g.onset, g.offset, g.apex), (31, 39, Some(35)));
        assert_eq!(g.frame_count(), 9);
        assert_eq!(g.kind, EventKind::Micro);
    }

    #[test]
    fn deterministic() {
        let mut s = spec(vec![micro(1.0, 0.3)]);
        s.noise_sigma = 2.0;
        s.drift_px_per_s = (0.5, -0.3);
        s.seed = 17;
        let a = generate_sequence(&s).unwrap();
        let b = generate_sequence(&s).unwrap();
        assert_eq!(a, b);
        s.seed = 18;
        assert_ne!(generate_sequence(&s).unwrap().video, a.video);
    }

    #[test]
    fn energy_confined_to_events() {
        let s = spec(vec![micro(0.5, 0.3), micro(1.6, 0.25)]);
        let base = generate_sequence(&spec(vec![])).unwrap();
        let v = generate_sequence(&s).unwrap();
        let inside = |f: u32| v.ground_truth.iter().any(|g| g.onset <= f && f <= g.offset);
        let near = |f: u32| {
            v.ground_truth
                .iter()
                .any(|g| g.onset <= f + 1 && f <= g.offset + 1)
        };
        for (i, (a, b)) in v.video.frames.iter().zip(&base.video.frames).enumerate() {
            let frame = i as u32 + 1;
            let energy: u32 = a
                .pixels
                .iter()
                .zip(&b.pixels)
                .map(|(x, y)| x.abs_diff(*y) as u32)
                .sum();
            if inside(frame) {
                assert!(energy > 0, "frame {frame}");
            }
            if !near(frame) {
                assert_eq!(energy, 0, "frame {frame}");
            }
        }
    }

    #[test]
    fn landmarks_follow_drift() {
        let mut s = spec(vec![]);
        s.drift_px_per_s = (0.9, -0.45);
        let v = generate_sequence(&s).unwrap();
        let first = v.landmarks.at(1);
        for frame in [1u32, 31, 90] {
            let t = (frame - 1) as f64 / 30.0;
            for (p, q) in v.landmarks.at(frame).iter().zip(first) {
                assert!((p.x - q.x - 0.9 * t).abs() < 1e-9);
                assert!((p.y - q.y + 0.45 * t).abs() < 1e-9);
            }
        }
        // the rendered face moves with them: a one-pixel shift of the image
        s.drift_px_per_s = (30.0, 0.0);
        let v = generate_sequence(&s).unwrap();
        let (a, b) = (&v.video.frames[0], &v.video.frames[1]);
        for y in 20..100 {
            for x in 20..100 {
                assert!((a.get(x, y) as i32 - b.get(x + 1, y) as i32).abs() <= 1);
            }
        }
    }

    #[test]
    fn bad_specs_rejected() {
        assert!(matches!(
            generate_sequence(&spec(vec![micro(2.9, 0.3)])),
            Err(Error::Spec(_))
        ));
        let mut e = micro(1.0, 0.3);
        e.amplitude = 0.0;
        assert!(matches!(
            generate_sequence(&spec(vec![e])),
            Err(Error::Spec(_))
        ));
        let mut e = micro(1.0, 0.3);
        e.target = EventTarget::Roi(12);
        assert!(matches!(
            generate_sequence(&spec(vec![e])),
            Err(Error::Spec(_))
        ));
    }

    #[test]
    fn spec_text_round_trip() {
        let mut s = spec(vec![micro(1.0, 0.3)]);
        s.events.push(SynthEvent {
            kind: EventKind::Blink,
            target: EventTarget::Eyes,
            onset_s: 2.0,
            duration_s: 0.25,
            amplitude: 40.0,
        });
        s.drift_px_per_s = (0.25, -0.5);
        assert_eq!(SynthSpec::parse(&s.to_text()).unwrap(), s);
        assert!(SynthSpec::parse("event = micro 0 1\n").is_err());
        assert!(SynthSpec::parse("colour = blue\n").is_err());
    }

    #[test]
    fn suite_shape() {
        let suite = standard_suite(7);
        assert_eq!(suite.len(), 12);
        let count = |k: EventKind| {
            suite
                .iter()
                .flat_map(|s| &s.events)
                .filter(|e| e.kind == k)
                .count()
        };
        assert_eq!(count(EventKind::Micro), 20);
        assert_eq!(count(EventKind::Blink), 6);
        assert_eq!(count(EventKind::Macro), 4);
        let subjects: std::collections::BTreeSet<_> = suite.iter().map(|s| &s.subject_id).collect();
        assert_eq!(subjects.len(), 3);
        for s in &suite {
            assert_eq!(s.frame_count(), 600);
            s.validate().unwrap();
        }
        assert_eq!(standard_suite(7), suite);
    }

    #[test]
    fn triangle() {
        assert_eq!(triangle_profile(10, 18, 9), 0.0);
        assert_eq!(triangle_profile(10, 18, 14), 1.0);
        assert!(triangle_profile(10, 18, 10) > 0.0 && triangle_profile(10, 18, 18) > 0.0);
        assert_eq!(triangle_profile(10, 18, 19), 0.0);
        assert_eq!(triangle_profile(5, 5, 5), 1.0);
    }
}
