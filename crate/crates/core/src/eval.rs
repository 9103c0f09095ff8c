//! AP50 and fixed-threshold precision / recall / F-measure.
//!
//! Predictions are matched greedily per frame in descending confidence
//! order. AP is the area under the precision-envelope PR curve, integrated
//! over every recall step (all-point interpolation). Dataset figures are
//! the mean of per-video figures unless pooled evaluation is requested.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, RotatedBox};
use crate::io::{AnnotationSet, PredictionSet};
use crate::postprocess::{ranking_order, Detection};

pub const DEFAULT_EVAL_IOU: f64 = 0.5;
pub const DEFAULT_EVAL_CONF: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub pred: usize,
    pub gt: usize,
    pub iou: f64,
}

/// Matching result of one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEval {
    pub matches: Vec<Match>,
    pub unmatched_preds: Vec<usize>,
    pub unmatched_gts: Vec<usize>,
    /// Confidence of every prediction, by input index.
    pub pred_conf: Vec<f64>,
    pub num_gts: usize,
}

impl FrameEval {
    /// `(confidence, is_true_positive)` for every prediction.
    pub fn scored(&self) -> Vec<(f64, bool)> {
        let mut tp = vec![false; self.pred_conf.len()];
        for m in &self.matches {
            tp[m.pred] = true;
        }
        self.pred_conf.iter().copied().zip(tp).collect()
    }
}

/// Greedy matching: predictions in descending confidence each take the
/// unmatched ground truth of highest IoU, provided it is `>= iou_thresh`.
/// Predictions are canonicalized first.
pub fn match_frame(preds: &[Detection], gts: &[RotatedBox], iou_thresh: f64) -> Result<FrameEval> {
    let canon = preds.iter().map(Detection::canonical).collect::<Result<Vec<_>>>()?;
    let mut gt_taken = vec![false; gts.len()];
    let mut matches = Vec::new();
    let mut unmatched_preds = Vec::new();
    for p in ranking_order(&canon) {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if gt_taken[g] {
                continue;
            }
            let v = iou(&canon[p].bbox, gt);
            if v >= iou_thresh && best.is_none_or(|(_, b)| v > b) {
                best = Some((g, v));
            }
        }
        match best {
            Some((g, v)) => {
                gt_taken[g] = true;
                matches.push(Match { pred: p, gt: g, iou: v });
            }
            None => unmatched_preds.push(p),
        }
    }
    let unmatched_gts = (0..gts.len()).filter(|&g| !gt_taken[g]).collect();
    Ok(FrameEval {
        matches,
        unmatched_preds,
        unmatched_gts,
        pred_conf: preds.iter().map(|d| d.conf).collect(),
        num_gts: gts.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
    /// Confidence threshold at which this point is reached.
    pub confidence: f64,
}

/// PR curve with one point per distinct confidence, in descending
/// confidence order. Predictions sharing a confidence enter together.
pub fn pr_curve(frames: &[FrameEval]) -> Result<Vec<PrPoint>> {
    let num_gts: usize = frames.iter().map(|f| f.num_gts).sum();
    if num_gts == 0 {
        return Err(Error::NoGroundTruth);
    }
    let mut scored: Vec<(f64, bool)> = frames.iter().flat_map(FrameEval::scored).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < scored.len() {
        let conf = scored[i].0;
        while i < scored.len() && scored[i].0 == conf {
            if scored[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(PrPoint {
            recall: tp as f64 / num_gts as f64,
            precision: tp as f64 / (tp + fp) as f64,
            confidence: conf,
        });
    }
    Ok(points)
}

/// Area under the precision envelope of a PR curve ordered by
/// non-decreasing recall.
pub fn area_under_envelope(points: &[PrPoint]) -> f64 {
    let mut envelope: Vec<f64> = points.iter().map(|p| p.precision).collect();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for (p, env) in points.iter().zip(envelope) {
        ap += (p.recall - prev_recall) * env;
        prev_recall = p.recall;
    }
    ap
}

/// AP over all frames pooled together.
pub fn average_precision(frames: &[FrameEval]) -> Result<f64> {
    Ok(area_under_envelope(&pr_curve(frames)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

impl Prf {
    pub fn from_counts(tp: usize, fp: usize, num_gts: usize) -> Result<Self> {
        if num_gts == 0 {
            return Err(Error::NoGroundTruth);
        }
        let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = tp as f64 / num_gts as f64;
        Ok(Self {
            precision,
            recall,
            f_measure: harmonic_mean(precision, recall),
        })
    }
}

pub fn harmonic_mean(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Precision, recall and F over predictions with `conf >= conf_thresh`.
/// With no such predictions, precision is 1 by convention.
pub fn fixed_threshold_metrics(frames: &[FrameEval], conf_thresh: f64) -> Result<Prf> {
    let (mut tp, mut fp, mut gts) = (0, 0, 0);
    for f in frames {
        gts += f.num_gts;
        for (conf, is_tp) in f.scored() {
            if conf >= conf_thresh {
                if is_tp {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
    }
    Prf::from_counts(tp, fp, gts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub iou_threshold: f64,
    pub conf_threshold: f64,
    /// Pool all frames instead of averaging per-video figures.
    pub pooled: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_threshold: DEFAULT_EVAL_IOU,
            conf_threshold: DEFAULT_EVAL_CONF,
            pooled: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoReport {
    pub name: String,
    pub ap50: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ap50: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    /// PR curve of all frames pooled, in descending confidence order.
    pub pr_curve: Vec<PrPoint>,
    pub per_video: Option<Vec<VideoReport>>,
    pub config: EvalConfig,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("bad report: {e}")))
    }

    /// Fixed four-decimal table.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mode = if self.config.pooled { "pooled frames" } else { "mean over videos" };
        let _ = writeln!(
            s,
            "IoU {:.2}, confidence {:.2}, {mode}",
            self.config.iou_threshold, self.config.conf_threshold
        );
        let _ = writeln!(s, "{:<24} {:>8} {:>8} {:>8} {:>8}", "video", "AP50", "P", "R", "F");
        for v in self.per_video.iter().flatten() {
            let _ = writeln!(
                s,
                "{:<24} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
                v.name, v.ap50, v.precision, v.recall, v.f_measure
            );
        }
        let _ = writeln!(
            s,
            "{:<24} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            "all", self.ap50, self.precision, self.recall, self.f_measure
        );
        s
    }

    /// Writes the pooled PR curve as `recall,precision,confidence` CSV.
    pub fn write_pr_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let to_err = |e: csv::Error| Error::io(path, e.into());
        let mut w = csv::Writer::from_path(path).map_err(to_err)?;
        for p in &self.pr_curve {
            w.serialize(p).map_err(to_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Matches every annotated frame against its predictions. Frames without
/// predictions count as empty; predictions for unknown frames are an error.
pub fn match_dataset(
    gt: &AnnotationSet,
    preds: &PredictionSet,
    iou_thresh: f64,
) -> Result<Vec<(String, Vec<FrameEval>)>> {
    let mut index: HashMap<(&str, &str), &[Detection]> = HashMap::new();
    for v in &preds.videos {
        for f in &v.frames {
            index.insert((v.name.as_str(), f.name.as_str()), &f.detections);
        }
    }
    let mut known = 0;
    let mut out = Vec::with_capacity(gt.videos.len());
    for v in &gt.videos {
        let mut frames = Vec::with_capacity(v.frames.len());
        for f in &v.frames {
            let dets = index.get(&(v.name.as_str(), f.name.as_str())).copied();
            known += dets.is_some() as usize;
            let boxes: Vec<RotatedBox> = f.objects.iter().map(|o| o.bbox).collect();
            frames.push(match_frame(dets.unwrap_or(&[]), &boxes, iou_thresh)?);
        }
        out.push((v.name.clone(), frames));
    }
    if known != index.len() {
        let missing = preds
            .videos
            .iter()
            .flat_map(|v| v.frames.iter().map(move |f| (v, f)))
            .find(|(v, f)| gt.frame(&v.name, &f.name).is_none())
            .map(|(v, f)| format!("video '{}' frame '{}'", v.name, f.name))
            .unwrap_or_default();
        return Err(Error::Validation {
            path: Default::default(),
            location: missing,
            message: "prediction for a frame with no annotation".into(),
        });
    }
    Ok(out)
}

/// Full protocol: AP50 plus P/R/F at a fixed confidence.
pub fn evaluate(gt: &AnnotationSet, preds: &PredictionSet, cfg: &EvalConfig) -> Result<EvalReport> {
    let videos = match_dataset(gt, preds, cfg.iou_threshold)?;
    let all: Vec<FrameEval> = videos.iter().flat_map(|(_, f)| f.iter().cloned()).collect();
    let pr = pr_curve(&all)?;
    let per_video = videos
        .iter()
        .map(|(name, frames)| {
            let prf = fixed_threshold_metrics(frames, cfg.conf_threshold)?;
            Ok(VideoReport {
                name: name.clone(),
                ap50: average_precision(frames)?,
                precision: prf.precision,
                recall: prf.recall,
                f_measure: prf.f_measure,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (ap50, precision, recall, f_measure) = if cfg.pooled {
        let prf = fixed_threshold_metrics(&all, cfg.conf_threshold)?;
        (area_under_envelope(&pr), prf.precision, prf.recall, prf.f_measure)
    } else {
        let n = per_video.len() as f64;
        let mean = |f: fn(&VideoReport) -> f64| per_video.iter().map(f).sum::<f64>() / n;
        (
            mean(|v| v.ap50),
            mean(|v| v.precision),
            mean(|v| v.recall),
            mean(|v| v.f_measure),
        )
    };
    Ok(EvalReport {
        ap50,
        precision,
        recall,
        f_measure,
        pr_curve: pr,
        per_video: Some(per_video),
        config: *cfg,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectHistogram {
    /// `bins + 1` edges over `[0, max(2, ceil(largest ratio))]`.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Fraction of boxes with `h / w >= 1`; absent for empty input.
    pub fraction_tall: Option<f64>,
}

impl AspectHistogram {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let total: usize = self.counts.iter().sum();
        let _ = writeln!(s, "{:>8} {:>8} {:>8}", "h/w from", "to", "count");
        let peak = self.counts.iter().copied().max().unwrap_or(0).max(1);
        for (i, c) in self.counts.iter().enumerate() {
            let bar = "#".repeat(c * 40 / peak);
            let _ = writeln!(s, "{:>8.4} {:>8.4} {:>8} {bar}", self.edges[i], self.edges[i + 1], c);
        }
        match self.fraction_tall {
            Some(f) => {
                let _ = writeln!(s, "boxes: {total}, fraction with h/w >= 1: {f:.4}");
            }
            None => {
                let _ = writeln!(s, "boxes: 0");
            }
        }
        s
    }
}

/// Histogram of the predicted height/width ratio `h / w`.
pub fn aspect_ratio_histogram(dets: &[Detection], bins: usize) -> Result<AspectHistogram> {
    if bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    let ratios = dets
        .iter()
        .map(|d| {
            d.bbox.validate()?;
            Ok(d.bbox.h / d.bbox.w)
        })
        .collect::<Result<Vec<f64>>>()?;
    if ratios.is_empty() {
        return Ok(AspectHistogram {
            edges: Vec::new(),
            counts: Vec::new(),
            fraction_tall: None,
        });
    }
    let top = ratios.iter().copied().fold(2.0f64, f64::max).ceil();
    let width = top / bins as f64;
    let edges = (0..=bins).map(|i| i as f64 * width).collect();
    let mut counts = vec![0; bins];
    for r in &ratios {
        counts[((r / width) as usize).min(bins - 1)] += 1;
    }
    let tall = ratios.iter().filter(|&&r| r >= 1.0).count();
    Ok(AspectHistogram {
        edges,
        counts,
        fraction_tall: Some(tall as f64 / ratios.len() as f64),
    })
}
