//! Annotation and prediction files, and the synthetic scene generator.
//!
//! Files are JSON with a `format` tag and a `version` number. Angles are
//! stored in degrees and held in radians in memory. Every real number is
//! written rounded to nine decimals, so a loaded file saves back to the
//! same bytes.
//!
//! Annotation file:
//!
//! ```json
//! {
//!   "format": "rotdet-annotations",
//!   "version": 1,
//!   "videos": [
//!     {
//!       "name": "lunch",
//!       "width": 608,
//!       "height": 608,
//!       "frames": [
//!         {"name": "000000",
//!          "objects": [{"id": 3, "cx": 120.5, "cy": 88.0, "w": 30.0, "h": 70.0, "angle": -12.5}]}
//!       ]
//!     }
//!   ]
//! }
//! ```
//!
//! Prediction files use `"format": "rotdet-predictions"`, drop `width` and
//! `height`, and list `"detections"` with an extra `"conf"` in place of
//! `"objects"` and `"id"`.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{radius_aligned_angle, wrap_half_pi, Point, RotatedBox};
use crate::postprocess::Detection;

pub const SCHEMA_VERSION: u32 = 1;
pub const ANNOTATIONS_FORMAT: &str = "rotdet-annotations";
pub const PREDICTIONS_FORMAT: &str = "rotdet-predictions";

/// Decimal places kept on disk.
pub const DECIMALS: i32 = 9;

#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub person_id: u64,
    pub bbox: RotatedBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub name: String,
    pub objects: Vec<Annotation>,
}

impl Frame {
    pub fn boxes(&self) -> Vec<RotatedBox> {
        self.objects.iter().map(|o| o.bbox).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Video {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub frames: Vec<Frame>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnnotationSet {
    pub videos: Vec<Video>,
}

impl AnnotationSet {
    pub fn frame(&self, video: &str, frame: &str) -> Option<&Frame> {
        self.videos
            .iter()
            .find(|v| v.name == video)
            .and_then(|v| v.frames.iter().find(|f| f.name == frame))
    }

    pub fn num_boxes(&self) -> usize {
        self.videos.iter().flat_map(|v| &v.frames).map(|f| f.objects.len()).sum()
    }

    /// Predictions identical to the annotations, all at confidence `conf`.
    pub fn as_predictions(&self, conf: f64) -> PredictionSet {
        PredictionSet {
            videos: self
                .videos
                .iter()
                .map(|v| PredVideo {
                    name: v.name.clone(),
                    frames: v
                        .frames
                        .iter()
                        .map(|f| PredFrame {
                            name: f.name.clone(),
                            detections: f.objects.iter().map(|o| Detection::new(o.bbox, conf)).collect(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredFrame {
    pub name: String,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredVideo {
    pub name: String,
    pub frames: Vec<PredFrame>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionSet {
    pub videos: Vec<PredVideo>,
}

impl PredictionSet {
    pub fn all_detections(&self) -> Vec<Detection> {
        self.videos
            .iter()
            .flat_map(|v| &v.frames)
            .flat_map(|f| f.detections.iter().copied())
            .collect()
    }
}

/// Rounds to [`DECIMALS`] places.
pub fn quantize(x: f64) -> f64 {
    let scale = 10f64.powi(DECIMALS);
    let q = (x * scale).round() / scale;
    if q == 0.0 {
        0.0
    } else {
        q
    }
}

// ---- on-disk records ----

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileObject {
    id: u64,
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
    angle: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileDetection {
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
    angle: f64,
    conf: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileFrame {
    name: String,
    objects: Vec<FileObject>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileVideo {
    name: String,
    width: u32,
    height: u32,
    frames: Vec<FileFrame>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilePredFrame {
    name: String,
    detections: Vec<FileDetection>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilePredVideo {
    name: String,
    frames: Vec<FilePredFrame>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileAnnotations {
    format: String,
    version: u32,
    videos: Vec<FileVideo>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilePredictions {
    format: String,
    version: u32,
    videos: Vec<FilePredVideo>,
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let start: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
    (start + column.saturating_sub(1)).min(text.len())
}

fn parse_json<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        offset: byte_offset(text, e.line(), e.column()),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn check_header(text: &str, path: &Path, format: &str) -> Result<()> {
    // The header is checked before the full schema so that a version
    // mismatch is reported as such rather than as a field error.
    #[derive(Deserialize)]
    struct Peek {
        format: Option<String>,
        version: Option<u32>,
    }
    let peek: Peek = parse_json(text, path)?;
    let found_format = peek.format.unwrap_or_default();
    let found_version = peek.version.unwrap_or(0);
    if found_format != format {
        return Err(Error::Validation {
            path: path.to_path_buf(),
            location: "format".into(),
            message: format!("expected \"{format}\", found \"{found_format}\""),
        });
    }
    if found_version != SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            path: path.to_path_buf(),
            found: found_version,
            expected: SCHEMA_VERSION,
        });
    }
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn invalid(path: &Path, location: String, message: impl Into<String>) -> Error {
    Error::Validation {
        path: path.to_path_buf(),
        location,
        message: message.into(),
    }
}

fn box_from_file(cx: f64, cy: f64, w: f64, h: f64, angle_deg: f64) -> Result<RotatedBox> {
    RotatedBox::new(cx, cy, w, h, angle_deg.to_radians())?.canonicalize()
}

fn unique_names<'a>(
    names: impl Iterator<Item = &'a str>,
    path: &Path,
    what: &str,
    parent: &str,
) -> Result<()> {
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(invalid(path, format!("{parent}{what} '{n}'"), "duplicate name"));
        }
    }
    Ok(())
}

pub fn parse_annotations(text: &str, path: &Path) -> Result<AnnotationSet> {
    check_header(text, path, ANNOTATIONS_FORMAT)?;
    let file: FileAnnotations = parse_json(text, path)?;
    unique_names(file.videos.iter().map(|v| v.name.as_str()), path, "video", "")?;
    let mut videos = Vec::with_capacity(file.videos.len());
    for v in file.videos {
        let vloc = format!("video '{}'", v.name);
        if v.width == 0 || v.height == 0 {
            return Err(invalid(path, vloc, "image size must be positive"));
        }
        unique_names(v.frames.iter().map(|f| f.name.as_str()), path, "frame", &format!("{vloc} "))?;
        let mut frames = Vec::with_capacity(v.frames.len());
        for f in v.frames {
            let floc = format!("{vloc} frame '{}'", f.name);
            let mut ids = HashSet::new();
            let mut objects = Vec::with_capacity(f.objects.len());
            for (i, o) in f.objects.into_iter().enumerate() {
                let oloc = format!("{floc} object {i}");
                if !ids.insert(o.id) {
                    return Err(invalid(path, oloc, format!("person id {} repeated in frame", o.id)));
                }
                let bbox = box_from_file(o.cx, o.cy, o.w, o.h, o.angle)
                    .map_err(|e| invalid(path, oloc, e.to_string()))?;
                objects.push(Annotation { person_id: o.id, bbox });
            }
            frames.push(Frame { name: f.name, objects });
        }
        videos.push(Video {
            name: v.name,
            width: v.width,
            height: v.height,
            frames,
        });
    }
    Ok(AnnotationSet { videos })
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<AnnotationSet> {
    let path = path.as_ref();
    parse_annotations(&read(path)?, path)
}

pub fn annotations_to_string(set: &AnnotationSet) -> String {
    let file = FileAnnotations {
        format: ANNOTATIONS_FORMAT.into(),
        version: SCHEMA_VERSION,
        videos: set
            .videos
            .iter()
            .map(|v| FileVideo {
                name: v.name.clone(),
                width: v.width,
                height: v.height,
                frames: v
                    .frames
                    .iter()
                    .map(|f| FileFrame {
                        name: f.name.clone(),
                        objects: f
                            .objects
                            .iter()
                            .map(|o| FileObject {
                                id: o.person_id,
                                cx: quantize(o.bbox.cx),
                                cy: quantize(o.bbox.cy),
                                w: quantize(o.bbox.w),
                                h: quantize(o.bbox.h),
                                angle: quantize(o.bbox.theta.to_degrees()),
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("annotations serialize");
    s.push('\n');
    s
}

pub fn save_annotations(set: &AnnotationSet, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &annotations_to_string(set))
}

pub fn parse_predictions(text: &str, path: &Path) -> Result<PredictionSet> {
    check_header(text, path, PREDICTIONS_FORMAT)?;
    let file: FilePredictions = parse_json(text, path)?;
    unique_names(file.videos.iter().map(|v| v.name.as_str()), path, "video", "")?;
    let mut videos = Vec::with_capacity(file.videos.len());
    for v in file.videos {
        let vloc = format!("video '{}'", v.name);
        unique_names(v.frames.iter().map(|f| f.name.as_str()), path, "frame", &format!("{vloc} "))?;
        let mut frames = Vec::with_capacity(v.frames.len());
        for f in v.frames {
            let floc = format!("{vloc} frame '{}'", f.name);
            let mut detections = Vec::with_capacity(f.detections.len());
            for (i, d) in f.detections.into_iter().enumerate() {
                let dloc = format!("{floc} detection {i}");
                if !(0.0..=1.0).contains(&d.conf) {
                    return Err(invalid(path, dloc, format!("confidence {} outside [0, 1]", d.conf)));
                }
                let bbox = box_from_file(d.cx, d.cy, d.w, d.h, d.angle)
                    .map_err(|e| invalid(path, dloc, e.to_string()))?;
                detections.push(Detection::new(bbox, d.conf));
            }
            frames.push(PredFrame { name: f.name, detections });
        }
        videos.push(PredVideo { name: v.name, frames });
    }
    Ok(PredictionSet { videos })
}

pub fn load_predictions(path: impl AsRef<Path>) -> Result<PredictionSet> {
    let path = path.as_ref();
    parse_predictions(&read(path)?, path)
}

/// Serializes predictions. Boxes are written in canonical form.
pub fn predictions_to_string(set: &PredictionSet) -> Result<String> {
    let mut videos = Vec::with_capacity(set.videos.len());
    for v in &set.videos {
        let mut frames = Vec::with_capacity(v.frames.len());
        for f in &v.frames {
            let detections = f
                .detections
                .iter()
                .map(|d| {
                    let b = d.bbox.canonicalize()?;
                    Ok(FileDetection {
                        cx: quantize(b.cx),
                        cy: quantize(b.cy),
                        w: quantize(b.w),
                        h: quantize(b.h),
                        angle: quantize(b.theta.to_degrees()),
                        conf: quantize(d.conf),
                    })
                })
                .collect::<Result<_>>()?;
            frames.push(FilePredFrame {
                name: f.name.clone(),
                detections,
            });
        }
        videos.push(FilePredVideo {
            name: v.name.clone(),
            frames,
        });
    }
    let file = FilePredictions {
        format: PREDICTIONS_FORMAT.into(),
        version: SCHEMA_VERSION,
        videos,
    };
    let mut s = serde_json::to_string_pretty(&file).expect("predictions serialize");
    s.push('\n');
    Ok(s)
}

pub fn save_predictions(set: &PredictionSet, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &predictions_to_string(set)?)
}

/// Best-effort import of a COCO-style file whose `bbox` entries are
/// `[cx, cy, w, h, angle_degrees]` and whose annotations carry a
/// `person_id`. All images become frames of one video named after the file.
pub fn import_coco_rotated(path: impl AsRef<Path>) -> Result<AnnotationSet> {
    #[derive(Deserialize)]
    struct Image {
        id: u64,
        file_name: String,
        width: u32,
        height: u32,
    }
    #[derive(Deserialize)]
    struct Ann {
        image_id: u64,
        bbox: [f64; 5],
        #[serde(default)]
        person_id: Option<u64>,
    }
    #[derive(Deserialize)]
    struct Coco {
        images: Vec<Image>,
        annotations: Vec<Ann>,
    }

    let path = path.as_ref();
    let coco: Coco = parse_json(&read(path)?, path)?;
    let (width, height) = coco
        .images
        .first()
        .map(|i| (i.width, i.height))
        .ok_or_else(|| invalid(path, "images".into(), "no images"))?;
    let mut frames: Vec<Frame> = coco
        .images
        .iter()
        .map(|i| Frame {
            name: i.file_name.clone(),
            objects: Vec::new(),
        })
        .collect();
    for (k, a) in coco.annotations.iter().enumerate() {
        let loc = format!("annotation {k}");
        let idx = coco
            .images
            .iter()
            .position(|i| i.id == a.image_id)
            .ok_or_else(|| invalid(path, loc.clone(), format!("unknown image id {}", a.image_id)))?;
        let [cx, cy, w, h, deg] = a.bbox;
        let bbox = box_from_file(cx, cy, w, h, deg).map_err(|e| invalid(path, loc, e.to_string()))?;
        let frame = &mut frames[idx];
        let person_id = a.person_id.unwrap_or(frame.objects.len() as u64);
        frame.objects.push(Annotation { person_id, bbox });
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "video".into());
    let set = AnnotationSet {
        videos: vec![Video {
            name,
            width,
            height,
            frames,
        }],
    };
    // run the native validation on the result
    parse_annotations(&annotations_to_string(&set), path)
}

// ---- synthetic scenes ----

/// Corruption applied to ground truth to emulate detector output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptionConfig {
    /// Center jitter standard deviation, pixels.
    pub center_jitter: f64,
    /// Relative size jitter standard deviation.
    pub size_jitter: f64,
    /// Angle jitter standard deviation, radians.
    pub angle_jitter: f64,
    /// Probability that a ground-truth box is missed.
    pub drop_rate: f64,
    /// Expected number of spurious boxes per frame.
    pub spurious_per_frame: f64,
    /// Confidence of kept boxes: normal with this mean and deviation.
    pub tp_conf_mean: f64,
    pub tp_conf_std: f64,
    /// Confidence of spurious boxes: uniform in `[0, fp_conf_max)`.
    pub fp_conf_max: f64,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        Self {
            center_jitter: 2.0,
            size_jitter: 0.05,
            angle_jitter: 0.05,
            drop_rate: 0.1,
            spurious_per_frame: 0.5,
            tp_conf_mean: 0.8,
            tp_conf_std: 0.1,
            fp_conf_max: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub videos: usize,
    pub frames: usize,
    pub people_min: usize,
    pub people_max: usize,
    /// Square image side, pixels.
    pub image_size: u32,
    /// Radius of the circular field of view as a fraction of half the side.
    pub fov_fraction: f64,
    /// Box height range, pixels.
    pub height_range: [f64; 2],
    /// Range of the height / width ratio.
    pub aspect_range: [f64; 2],
    /// Standard deviation of the angle around the radius-aligned angle.
    pub pose_noise: f64,
    /// Per-frame random-walk step deviation of each person, pixels.
    pub motion_std: f64,
    /// Minimum distance between the centers of two people, pixels. Initial
    /// placement retries and random-walk steps that would break it are
    /// skipped.
    pub min_separation: f64,
    pub corruption: Option<CorruptionConfig>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            videos: 2,
            frames: 5,
            people_min: 3,
            people_max: 8,
            image_size: 608,
            fov_fraction: 0.9,
            height_range: [60.0, 140.0],
            aspect_range: [1.8, 3.0],
            pose_noise: 0.1,
            motion_std: 3.0,
            min_separation: 0.0,
            corruption: None,
        }
    }
}

impl SynthConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&read(path.as_ref())?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.image_size == 0 {
            return bad("image size must be positive".into());
        }
        if self.people_min > self.people_max {
            return bad(format!("people range [{}, {}] is empty", self.people_min, self.people_max));
        }
        if !(self.fov_fraction > 0.0 && self.fov_fraction <= 1.0) {
            return bad(format!("fov_fraction {} outside (0, 1]", self.fov_fraction));
        }
        for (name, [lo, hi]) in [("height_range", self.height_range), ("aspect_range", self.aspect_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
                return bad(format!("{name} [{lo}, {hi}] must be positive and ordered"));
            }
        }
        for (name, v) in [
            ("pose_noise", self.pose_noise),
            ("motion_std", self.motion_std),
            ("min_separation", self.min_separation),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be a non-negative number"));
            }
        }
        if let Some(c) = &self.corruption {
            for (name, v) in [
                ("center_jitter", c.center_jitter),
                ("size_jitter", c.size_jitter),
                ("angle_jitter", c.angle_jitter),
                ("spurious_per_frame", c.spurious_per_frame),
                ("tp_conf_std", c.tp_conf_std),
            ] {
                if !(v.is_finite() && v >= 0.0) {
                    return bad(format!("{name} must be a non-negative number"));
                }
            }
            for (name, v) in [
                ("drop_rate", c.drop_rate),
                ("tp_conf_mean", c.tp_conf_mean),
                ("fp_conf_max", c.fp_conf_max),
            ] {
                if !(0.0..=1.0).contains(&v) {
                    return bad(format!("{name} must lie in [0, 1]"));
                }
            }
        }
        Ok(())
    }

    fn fov_radius(&self) -> f64 {
        self.fov_fraction * self.image_size as f64 / 2.0
    }

    fn center(&self) -> Point {
        let c = self.image_size as f64 / 2.0;
        Point::new(c, c)
    }
}

/// Placement attempts per person before accepting a crowded spot.
const PLACEMENT_TRIES: usize = 100;

fn normal(std: f64) -> Normal<f64> {
    Normal::new(0.0, std).expect("finite non-negative deviation")
}

fn uniform_in_disk(rng: &mut ChaCha8Rng, center: Point, radius: f64) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let phi = rng.random::<f64>() * std::f64::consts::TAU;
    Point::new(center.x + r * phi.cos(), center.y + r * phi.sin())
}

fn pull_into_disk(p: Point, center: Point, radius: f64) -> Point {
    let (dx, dy) = (p.x - center.x, p.y - center.y);
    let d = dx.hypot(dy);
    if d <= radius {
        p
    } else {
        Point::new(center.x + dx * radius / d, center.y + dy * radius / d)
    }
}

fn range(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn posed_box(cfg: &SynthConfig, rng: &mut ChaCha8Rng, p: Point, w: f64, h: f64) -> RotatedBox {
    let base = radius_aligned_angle(p.x, p.y, cfg.center());
    let noise = if cfg.pose_noise > 0.0 { normal(cfg.pose_noise).sample(rng) } else { 0.0 };
    RotatedBox {
        cx: p.x,
        cy: p.y,
        w,
        h,
        theta: wrap_half_pi(base + noise),
    }
    .canonicalize()
    .expect("positive finite sides")
}

/// Generates a synthetic overhead scene set and, if configured, a
/// corrupted copy to act as detector output.
///
/// People keep their id through a video and move by a random walk that
/// stays inside the circular field of view.
pub fn generate_scene(cfg: &SynthConfig) -> Result<(AnnotationSet, Option<PredictionSet>)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (center, radius) = (cfg.center(), cfg.fov_radius());
    let size = cfg.image_size as f64;
    let mut videos = Vec::with_capacity(cfg.videos);
    for v in 0..cfg.videos {
        let people = rng.random_range(cfg.people_min..=cfg.people_max);
        let far_enough = |p: Point, others: &[(Point, f64, f64)], skip: usize| {
            others
                .iter()
                .enumerate()
                .all(|(k, o)| k == skip || (o.0.x - p.x).hypot(o.0.y - p.y) >= cfg.min_separation)
        };
        let mut state: Vec<(Point, f64, f64)> = Vec::with_capacity(people);
        for _ in 0..people {
            let mut p = uniform_in_disk(&mut rng, center, radius);
            for _ in 0..PLACEMENT_TRIES {
                if far_enough(p, &state, usize::MAX) {
                    break;
                }
                p = uniform_in_disk(&mut rng, center, radius);
            }
            let h = range(&mut rng, cfg.height_range);
            let w = h / range(&mut rng, cfg.aspect_range);
            state.push((p, w, h));
        }
        let mut frames = Vec::with_capacity(cfg.frames);
        for f in 0..cfg.frames {
            if f > 0 && cfg.motion_std > 0.0 {
                let step = normal(cfg.motion_std);
                for i in 0..state.len() {
                    let cur = state[i].0;
                    let p = Point::new(cur.x + step.sample(&mut rng), cur.y + step.sample(&mut rng));
                    let p = pull_into_disk(p, center, radius);
                    if far_enough(p, &state, i) {
                        state[i].0 = p;
                    }
                }
            }
            let objects = state
                .iter()
                .enumerate()
                .map(|(id, &(p, w, h))| Annotation {
                    person_id: id as u64,
                    bbox: clamp_center(posed_box(cfg, &mut rng, p, w, h), size),
                })
                .collect();
            frames.push(Frame {
                name: format!("{f:06}"),
                objects,
            });
        }
        videos.push(Video {
            name: format!("synth_{v:02}"),
            width: cfg.image_size,
            height: cfg.image_size,
            frames,
        });
    }
    let gt = AnnotationSet { videos };
    let preds = cfg.corruption.as_ref().map(|c| corrupt(&gt, cfg, c));
    Ok((gt, preds))
}

fn clamp_center(mut b: RotatedBox, size: f64) -> RotatedBox {
    let hi = size * (1.0 - f64::EPSILON);
    b.cx = b.cx.clamp(0.0, hi);
    b.cy = b.cy.clamp(0.0, hi);
    b
}

/// Noisy detector-like copy of `gt`. Uses its own random stream so that
/// the ground truth does not depend on the corruption settings.
pub fn corrupt(gt: &AnnotationSet, cfg: &SynthConfig, c: &CorruptionConfig) -> PredictionSet {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let (center, radius) = (cfg.center(), cfg.fov_radius());
    let jitter = |rng: &mut ChaCha8Rng, std: f64| if std > 0.0 { normal(std).sample(rng) } else { 0.0 };
    let videos = gt
        .videos
        .iter()
        .map(|v| {
            let size = v.width.min(v.height) as f64;
            let frames = v
                .frames
                .iter()
                .map(|f| {
                    let mut detections = Vec::new();
                    for o in &f.objects {
                        if rng.random::<f64>() < c.drop_rate {
                            continue;
                        }
                        let b = o.bbox;
                        let bbox = RotatedBox {
                            cx: b.cx + jitter(&mut rng, c.center_jitter),
                            cy: b.cy + jitter(&mut rng, c.center_jitter),
                            w: b.w * jitter(&mut rng, c.size_jitter).exp(),
                            h: b.h * jitter(&mut rng, c.size_jitter).exp(),
                            theta: b.theta + jitter(&mut rng, c.angle_jitter),
                        }
                        .canonicalize()
                        .expect("positive finite sides");
                        let conf = (c.tp_conf_mean + jitter(&mut rng, c.tp_conf_std)).clamp(0.01, 0.99);
                        detections.push(Detection::new(clamp_center(bbox, size), conf));
                    }
                    let spurious = poisson(&mut rng, c.spurious_per_frame);
                    for _ in 0..spurious {
                        let p = uniform_in_disk(&mut rng, center, radius);
                        let h = range(&mut rng, cfg.height_range);
                        let w = h / range(&mut rng, cfg.aspect_range);
                        let theta = rng.random_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2);
                        let bbox = RotatedBox { cx: p.x, cy: p.y, w, h, theta }
                            .canonicalize()
                            .expect("positive finite sides");
                        let conf = rng.random::<f64>() * c.fp_conf_max;
                        detections.push(Detection::new(clamp_center(bbox, size), conf));
                    }
                    PredFrame {
                        name: f.name.clone(),
                        detections,
                    }
                })
                .collect();
            PredVideo {
                name: v.name.clone(),
                frames,
            }
        })
        .collect();
    PredictionSet { videos }
}

/// Knuth's product method; fine for the small means used here.
fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let limit = (-mean).exp();
    let mut k = 0;
    let mut p = rng.random::<f64>();
    while p > limit {
        k += 1;
        p *= rng.random::<f64>();
    }
    k
}

/// Writes annotations (and predictions, if any) next to each other:
/// `<dir>/annotations.json` and `<dir>/predictions.json`.
pub fn write_scene(dir: impl AsRef<Path>, gt: &AnnotationSet, preds: Option<&PredictionSet>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = vec![dir.join("annotations.json")];
    save_annotations(gt, &written[0])?;
    if let Some(p) = preds {
        written.push(dir.join("predictions.json"));
        save_predictions(p, &written[1])?;
    }
    Ok(written)
}
