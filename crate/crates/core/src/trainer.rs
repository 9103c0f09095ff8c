//! Gradient-descent fitting of raw predictions through the detection loss.
//!
//! There is no network: the raw head outputs are the parameters. Plain
//! full-batch descent with a fixed step is used throughout.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{
    decode, encode_raw, encode_targets, AnchorSet, CodecParams, HeadLayout, RawPrediction, RawPredictions,
    SlotIndex, Targets, DEFAULT_STRIDES,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalConfig};
use crate::geometry::{angular_error, RotatedBox};
use crate::io::{generate_scene, AnnotationSet, PredFrame, PredVideo, PredictionSet, SynthConfig};
use crate::loss::{
    assign, periodic_residual, positive_loss, total_loss, AngleLossKind, Assignment, LossBreakdown, LossConfig,
    WhLoss, DEFAULT_IGNORE_IOU,
};
use crate::postprocess::{nms, Detection, NmsConfig};

/// Starting point of the positive slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitInit {
    /// These raw values.
    Raw(RawPrediction),
    /// The exact encoding of the ground truth with its angle turned by
    /// `delta` radians and `offset` added to the other raw components.
    Offset { delta: f64, offset: RawPrediction },
    /// Angle turned by a uniform draw from `(-max_delta, max_delta)`, other
    /// raw components offset by normal noise of deviation `spread`.
    Seeded { seed: u64, max_delta: f64, spread: f64 },
}

impl FitInit {
    pub fn angle(delta: f64) -> Self {
        FitInit::Offset {
            delta,
            offset: RawPrediction::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub loss: LossConfig,
    pub params: CodecParams,
    pub lr: f64,
    pub steps: usize,
    pub init: FitInit,
    pub layout: HeadLayout,
    /// Raw values of every slot other than the positive one.
    pub background: RawPrediction,
    pub ignore_iou: f64,
}

/// Side of the square image used by the fitting demos.
pub const DEMO_IMAGE_SIZE: u32 = 128;

pub fn demo_layout(size: u32) -> Result<HeadLayout> {
    HeadLayout::new(size, size, &DEFAULT_STRIDES, AnchorSet::default_geometric())
}

impl FitConfig {
    /// Demo defaults: a 128 px layout, the exponential-consistent size
    /// term, `lr = 0.002` for 1000 steps.
    pub fn new(kind: AngleLossKind, params: CodecParams, init: FitInit) -> Self {
        Self {
            loss: LossConfig { angle: kind, wh: WhLoss::Direct },
            params,
            lr: 0.002,
            steps: 1000,
            init,
            layout: demo_layout(DEMO_IMAGE_SIZE).expect("demo layout is valid"),
            background: RawPrediction { tconf: -4.0, ..Default::default() },
            ignore_iou: DEFAULT_IGNORE_IOU,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be positive".into()));
        }
        Ok(())
    }
}

/// State after a step (record 0 is the initial state).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub loss: LossBreakdown,
    /// Decoded box of the positive slot, as predicted (not canonicalized).
    pub decoded: RotatedBox,
    pub conf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub slot: SlotIndex,
    pub records: Vec<StepRecord>,
    pub final_raw: RawPrediction,
    /// Angular error modulo pi of the last decoded box, in `[0, pi/2]`.
    pub final_angular_error: f64,
    /// The loss or a parameter became non-finite.
    pub failed: bool,
}

impl Trajectory {
    pub fn final_record(&self) -> &StepRecord {
        self.records.last().expect("at least the initial record")
    }

    pub fn final_detection(&self) -> Detection {
        let r = self.final_record();
        Detection::new(r.decoded, r.conf)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            step: usize,
            total: f64,
            xy: f64,
            wh: f64,
            angle: f64,
            conf_pos: f64,
            conf_neg: f64,
            cx: f64,
            cy: f64,
            w: f64,
            h: f64,
            theta: f64,
            conf: f64,
        }
        let path = path.as_ref();
        let to_err = |e: csv::Error| Error::io(path, e.into());
        let mut w = csv::Writer::from_path(path).map_err(to_err)?;
        for r in &self.records {
            let (l, b) = (r.loss, r.decoded);
            w.serialize(Row {
                step: r.step,
                total: l.total,
                xy: l.xy,
                wh: l.wh,
                angle: l.angle,
                conf_pos: l.conf_pos,
                conf_neg: l.conf_neg,
                cx: b.cx,
                cy: b.cy,
                w: b.w,
                h: b.h,
                theta: b.theta,
                conf: r.conf,
            })
            .map_err(to_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// `theta` if it lies in the open prediction range, otherwise the
/// equivalent angle (whole turns of pi away) nearest the middle of the
/// range. If the range is shorter than pi no equivalent may fit; the value
/// is then left for the logit clamp to handle.
pub fn represent_angle(theta: f64, params: &CodecParams) -> f64 {
    let (lo, hi) = params.bounds();
    if theta > lo && theta < hi {
        return theta;
    }
    let mut t = theta + (((lo + hi) / 2.0 - theta) / PI).round() * PI;
    while t >= hi && t - PI > lo {
        t -= PI;
    }
    while t <= lo && t + PI < hi {
        t += PI;
    }
    t
}

fn add(a: RawPrediction, b: RawPrediction) -> RawPrediction {
    let (a, b) = (a.to_array(), b.to_array());
    RawPrediction::from_array(std::array::from_fn(|i| a[i] + b[i]))
}

fn initial_raw(init: &FitInit, gt: &RotatedBox, t: &Targets, params: &CodecParams) -> RawPrediction {
    let exact = |delta: f64| {
        let turned = RotatedBox { theta: represent_angle(gt.theta + delta, params), ..*gt };
        encode_raw(&turned, t, params, 0.5)
    };
    match *init {
        FitInit::Raw(raw) => raw,
        FitInit::Offset { delta, offset } => add(exact(delta), offset),
        FitInit::Seeded { seed, max_delta, spread } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (delta, offset) = draw_offset(&mut rng, max_delta, spread);
            add(exact(delta), offset)
        }
    }
}

fn draw_offset(rng: &mut ChaCha8Rng, max_delta: f64, spread: f64) -> (f64, RawPrediction) {
    let delta = if max_delta > 0.0 { rng.random_range(-max_delta..max_delta) } else { 0.0 };
    let mut offset = RawPrediction::default();
    if spread > 0.0 {
        let n = Normal::new(0.0, spread).expect("finite spread");
        offset = RawPrediction {
            tx: n.sample(rng),
            ty: n.sample(rng),
            tw: n.sample(rng),
            th: n.sample(rng),
            tangle: 0.0,
            tconf: n.sample(rng),
        };
    }
    (delta, offset)
}

fn best_slot(gt: &RotatedBox, layout: &HeadLayout) -> Result<(SlotIndex, Targets)> {
    let a = assign(std::slice::from_ref(gt), layout, DEFAULT_IGNORE_IOU, None)?;
    let slot = a.positives[0].slot;
    let t = encode_targets(gt, &layout.grids()[slot.level], layout.anchor(slot))?;
    Ok((slot, t))
}

fn finite(r: &RawPrediction) -> bool {
    r.to_array().iter().all(|v| v.is_finite())
}

/// Fits every raw slot of `cfg.layout` to a single ground-truth box by
/// gradient descent on the full loss and records each step.
pub fn fit(cfg: &FitConfig, gt: &RotatedBox) -> Result<Trajectory> {
    cfg.validate()?;
    let gt = gt.canonicalize()?;
    let layout = &cfg.layout;
    let (slot, t) = best_slot(&gt, layout)?;
    let mut preds = RawPredictions::filled(layout.clone(), cfg.background);
    *preds.get_mut(slot)? = initial_raw(&cfg.init, &gt, &t, &cfg.params);
    let gts = [gt];
    let assignment = assign(&gts, layout, cfg.ignore_iou, Some((&preds, &cfg.params)))?;

    let mut records = Vec::with_capacity(cfg.steps + 1);
    let mut failed = false;
    for step in 0..=cfg.steps {
        let out = total_loss(&preds, &gts, &assignment, &cfg.loss, &cfg.params)?;
        let raw = *preds.get(slot)?;
        let det = decode(&raw, slot, layout, &cfg.params)?;
        records.push(StepRecord {
            step,
            loss: out.breakdown,
            decoded: det.bbox,
            conf: det.conf,
        });
        if !out.breakdown.total.is_finite() || !finite(&raw) {
            failed = true;
            break;
        }
        if step == cfg.steps {
            break;
        }
        for (p, g) in preds.slots_mut().iter_mut().zip(&out.grad) {
            *p = add(*p, RawPrediction::from_array(g.to_array().map(|v| -cfg.lr * v)));
        }
    }
    let final_raw = *preds.get(slot)?;
    let last = records.last().expect("initial record");
    let final_angular_error = if failed { f64::NAN } else { angular_error(last.decoded.theta, gt.theta) };
    Ok(Trajectory {
        slot,
        records,
        final_raw,
        final_angular_error,
        failed,
    })
}

/// Descent on a single positive slot; other slots do not influence it.
fn fit_positive(
    raw: RawPrediction,
    gt: &RotatedBox,
    t: &Targets,
    loss: &LossConfig,
    params: &CodecParams,
    lr: f64,
    steps: usize,
) -> RawPrediction {
    let mut p = raw;
    for _ in 0..steps {
        let (_, g) = positive_loss(&p, gt, t, loss, params);
        let next = add(p, RawPrediction::from_array(g.to_array().map(|v| -lr * v)));
        if !finite(&next) {
            break;
        }
        p = next;
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Flat slot and component index of the largest relative error.
    pub worst: (usize, usize),
}

/// Denominator floor of the relative error, so that components whose true
/// gradient is zero are compared absolutely.
pub const GRAD_CHECK_FLOOR: f64 = 1e-3;
pub const GRAD_CHECK_STEP: f64 = 1e-6;

/// Compares analytic gradients of [`total_loss`] with central differences
/// over every raw component. The relative error of a component is
/// `|a - n| / max(|a|, |n|, GRAD_CHECK_FLOOR)`.
pub fn finite_diff_check(
    raw: &RawPredictions,
    gts: &[RotatedBox],
    assignment: &Assignment,
    cfg: &LossConfig,
    params: &CodecParams,
) -> Result<GradCheck> {
    let analytic = total_loss(raw, gts, assignment, cfg, params)?.grad;
    let mut probe = raw.clone();
    let mut report = GradCheck {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst: (0, 0),
    };
    let h = GRAD_CHECK_STEP;
    for (flat, grad) in analytic.iter().enumerate() {
        for c in 0..RawPrediction::LEN {
            let base = raw.slots()[flat].to_array();
            let mut eval_at = |x: f64| -> Result<f64> {
                let mut v = base;
                v[c] = x;
                probe.slots_mut()[flat] = RawPrediction::from_array(v);
                Ok(total_loss(&probe, gts, assignment, cfg, params)?.breakdown.total)
            };
            let numeric = (eval_at(base[c] + h)? - eval_at(base[c] - h)?) / (2.0 * h);
            probe.slots_mut()[flat] = raw.slots()[flat];
            let a = grad.to_array()[c];
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
            report.max_abs_error = report.max_abs_error.max(abs);
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = (flat, c);
            }
        }
    }
    Ok(report)
}

/// Smallest distance of any positive's angle difference from a point where
/// the angle loss is not differentiable.
pub fn kink_distance(
    raw: &RawPredictions,
    gts: &[RotatedBox],
    assignment: &Assignment,
    kind: AngleLossKind,
    params: &CodecParams,
) -> Result<f64> {
    let mut d = f64::INFINITY;
    for pos in &assignment.positives {
        let gt = gts.get(pos.gt).ok_or_else(|| Error::ShapeMismatch("positive without ground truth".into()))?;
        let delta = params.decode_angle(raw.get(pos.slot)?.tangle) - gt.theta;
        let here = match kind {
            AngleLossKind::PlainL1 => delta.abs(),
            AngleLossKind::PlainL2 => f64::INFINITY,
            AngleLossKind::PeriodicL1 => {
                let r = periodic_residual(delta);
                r.abs().min(PI / 2.0 - r.abs())
            }
            AngleLossKind::PeriodicL2 => PI / 2.0 - periodic_residual(delta).abs(),
        };
        d = d.min(here);
    }
    Ok(d)
}

// ---- ablation ----

/// One (prediction range, angle loss) configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationCell {
    pub params: CodecParams,
    pub loss: AngleLossKind,
}

impl AblationCell {
    /// Unbounded and `(-pi, pi)` plain losses against the periodic loss on
    /// `(-pi, pi)`, for L1 then L2.
    pub fn table() -> Vec<Self> {
        use AngleLossKind::*;
        let (inf, wide) = (CodecParams::unbounded(), CodecParams::wide());
        [(inf, PlainL1), (wide, PlainL1), (wide, PeriodicL1), (inf, PlainL2), (wide, PlainL2), (wide, PeriodicL2)]
            .into_iter()
            .map(|(params, loss)| Self { params, loss })
            .collect()
    }

    /// Every loss on every range given.
    pub fn full(ranges: &[CodecParams]) -> Vec<Self> {
        ranges
            .iter()
            .flat_map(|&params| AngleLossKind::ALL.into_iter().map(move |loss| Self { params, loss }))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub synth: SynthConfig,
    /// Configurations to compare, in report order.
    pub grid: Vec<AblationCell>,
    pub lr: f64,
    pub steps: usize,
    /// Initial angle offsets are uniform in `(-max_delta, max_delta)`.
    pub max_delta: f64,
    /// Deviation of the noise added to the other raw components.
    pub spread: f64,
    pub nms: NmsConfig,
    pub eval_iou: f64,
    pub strides: Vec<u32>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            synth: SynthConfig {
                seed: 0,
                videos: 4,
                frames: 4,
                people_min: 4,
                people_max: 8,
                image_size: 256,
                fov_fraction: 0.9,
                height_range: [40.0, 90.0],
                aspect_range: [1.8, 3.0],
                pose_noise: 0.1,
                motion_std: 2.0,
                min_separation: 50.0,
                corruption: None,
            },
            grid: AblationCell::table(),
            lr: 0.05,
            steps: 300,
            max_delta: PI,
            spread: 0.3,
            nms: NmsConfig::default(),
            eval_iou: 0.5,
            strides: DEFAULT_STRIDES.to_vec(),
        }
    }
}

fn merge_toml(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge_toml(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

impl AblationConfig {
    /// Parses TOML over the defaults: keys given, including those inside
    /// `[synth]` or `[nms]`, replace the default values one by one.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg_err = |e: &dyn std::fmt::Display| Error::Config(e.to_string());
        let over: toml::Value = toml::from_str(text).map_err(|e| cfg_err(&e))?;
        let mut merged = toml::Value::try_from(Self::default()).map_err(|e| cfg_err(&e))?;
        merge_toml(&mut merged, over);
        let cfg: Self = merged.try_into().map_err(|e| cfg_err(&e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.nms.validate()?;
        for c in &self.grid {
            c.params.validate()?;
        }
        if self.grid.is_empty() {
            return Err(Error::Config("empty ablation grid".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) || self.steps == 0 {
            return Err(Error::Config("learning rate and steps must be positive".into()));
        }
        if !(self.max_delta >= 0.0 && self.max_delta <= PI && self.spread >= 0.0) {
            return Err(Error::Config("max_delta must be in [0, pi] and spread non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub range: String,
    pub params: CodecParams,
    pub kind: AngleLossKind,
    pub ap50: f64,
    /// Mean final angular error modulo pi over all objects.
    pub mean_angular_error: f64,
    /// Fraction of objects ending within 0.1 rad of the ground-truth angle.
    pub converged: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    pub objects: usize,
}

impl AblationReport {
    pub fn row(&self, params: &CodecParams, kind: AngleLossKind) -> Option<&AblationRow> {
        self.rows
            .iter()
            .find(|r| r.params == *params && r.kind == kind)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<18} {:<12} {:>8} {:>10} {:>10}", "prediction range", "angle loss", "AP50", "ang.err", "converged");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<18} {:<12} {:>8.4} {:>10.4} {:>10.4}",
                r.range,
                r.kind.name(),
                r.ap50,
                r.mean_angular_error,
                r.converged
            );
        }
        let _ = writeln!(s, "objects: {}", self.objects);
        s
    }
}

pub fn range_label(p: &CodecParams) -> String {
    if p.unbounded {
        "(-inf, inf)".into()
    } else if *p == CodecParams::wide() {
        "(-pi, pi)".into()
    } else if *p == CodecParams::narrow() {
        "(-pi/2, pi/2)".into()
    } else {
        format!("({:.4}, {:.4})", -p.beta, p.alpha - p.beta)
    }
}

struct Job {
    video: usize,
    frame: usize,
    gt: RotatedBox,
    slot: SlotIndex,
    targets: Targets,
    delta: f64,
    offset: RawPrediction,
}

struct Prepared {
    gt: AnnotationSet,
    layout: HeadLayout,
    jobs: Vec<Job>,
}

fn prepare(cfg: &AblationConfig) -> Result<Prepared> {
    cfg.validate()?;
    let (gt, _) = generate_scene(&cfg.synth)?;
    let size = cfg.synth.image_size;
    let layout = HeadLayout::new(size, size, &cfg.strides, AnchorSet::default_geometric())?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.synth.seed);
    rng.set_stream(2);
    let mut jobs = Vec::new();
    for (vi, v) in gt.videos.iter().enumerate() {
        for (fi, f) in v.frames.iter().enumerate() {
            let boxes = f.boxes();
            let a = assign(&boxes, &layout, DEFAULT_IGNORE_IOU, None)?;
            for pos in &a.positives {
                let g = boxes[pos.gt];
                let targets = encode_targets(&g, &layout.grids()[pos.slot.level], layout.anchor(pos.slot))?;
                let (delta, offset) = draw_offset(&mut rng, cfg.max_delta, cfg.spread);
                jobs.push(Job {
                    video: vi,
                    frame: fi,
                    gt: g,
                    slot: pos.slot,
                    targets,
                    delta,
                    offset,
                });
            }
        }
    }
    Ok(Prepared { gt, layout, jobs })
}

/// One synthetic object after fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedObject {
    pub video: usize,
    pub frame: usize,
    pub gt: RotatedBox,
    /// Initial angle offset from the ground truth.
    pub delta: f64,
    /// Decoded as predicted, not canonicalized.
    pub detection: Detection,
    pub angular_error: f64,
}

fn fit_jobs(
    cfg: &AblationConfig,
    p: &Prepared,
    params: &CodecParams,
    kind: AngleLossKind,
) -> Result<Vec<FittedObject>> {
    let loss = LossConfig { angle: kind, wh: WhLoss::Direct };
    p.jobs
        .par_iter()
        .map(|j| {
            let turned = RotatedBox { theta: represent_angle(j.gt.theta + j.delta, params), ..j.gt };
            let start = add(encode_raw(&turned, &j.targets, params, 0.5), j.offset);
            let end = fit_positive(start, &j.gt, &j.targets, &loss, params, cfg.lr, cfg.steps);
            let det = decode(&end, j.slot, &p.layout, params)?;
            Ok(FittedObject {
                video: j.video,
                frame: j.frame,
                gt: j.gt,
                delta: j.delta,
                detection: det,
                angular_error: angular_error(det.bbox.theta, j.gt.theta),
            })
        })
        .collect()
}

/// Fits every object of the synthetic set described by `cfg` from its
/// noisy start, under one range and angle loss.
pub fn fit_synthetic(
    cfg: &AblationConfig,
    params: &CodecParams,
    kind: AngleLossKind,
) -> Result<(AnnotationSet, Vec<FittedObject>)> {
    let p = prepare(cfg)?;
    let fitted = fit_jobs(cfg, &p, params, kind)?;
    Ok((p.gt, fitted))
}

/// Fits every object of a synthetic set from a noisy start under each
/// (range, loss) pair, then decodes, suppresses and scores AP50.
///
/// The starting offsets are drawn once and shared by all configurations.
pub fn synthetic_ablation(cfg: &AblationConfig) -> Result<AblationReport> {
    let p = prepare(cfg)?;
    let rows = cfg
        .grid
        .iter()
        .map(|c| ablation_row(cfg, &p, &c.params, c.loss))
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationReport {
        rows,
        objects: p.jobs.len(),
    })
}

/// Per-frame NMS of fitted detections, collected into a prediction set
/// aligned with `gt`.
pub fn fitted_predictions(gt: &AnnotationSet, fitted: &[FittedObject], nms_cfg: &NmsConfig) -> PredictionSet {
    let mut preds = PredictionSet {
        videos: gt
            .videos
            .iter()
            .map(|v| PredVideo {
                name: v.name.clone(),
                frames: v
                    .frames
                    .iter()
                    .map(|f| PredFrame {
                        name: f.name.clone(),
                        detections: Vec::new(),
                    })
                    .collect(),
            })
            .collect(),
    };
    for o in fitted {
        preds.videos[o.video].frames[o.frame].detections.push(o.detection);
    }
    for f in preds.videos.iter_mut().flat_map(|v| v.frames.iter_mut()) {
        f.detections = nms(&f.detections, nms_cfg);
    }
    preds
}

fn ablation_row(cfg: &AblationConfig, p: &Prepared, params: &CodecParams, kind: AngleLossKind) -> Result<AblationRow> {
    let fitted = fit_jobs(cfg, p, params, kind)?;
    let preds = fitted_predictions(&p.gt, &fitted, &cfg.nms);
    let report = evaluate(
        &p.gt,
        &preds,
        &EvalConfig {
            iou_threshold: cfg.eval_iou,
            conf_threshold: cfg.nms.conf_threshold,
            pooled: false,
        },
    )?;
    let n = fitted.len().max(1) as f64;
    Ok(AblationRow {
        range: range_label(params),
        params: *params,
        kind,
        ap50: report.ap50,
        mean_angular_error: fitted.iter().map(|o| o.angular_error).sum::<f64>() / n,
        converged: fitted.iter().filter(|o| o.angular_error < 0.1).count() as f64 / n,
    })
}
