//! Confidence thresholding and class-agnostic rotated NMS.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, RotatedBox};

/// A predicted box and its confidence.
///
/// The box keeps the parameterization it was decoded with (it may have
/// `w > h` or an angle outside `[-pi/2, pi/2)`); use [`Detection::canonical`]
/// before comparing against annotations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "box")]
    pub bbox: RotatedBox,
    pub conf: f64,
}

impl Detection {
    pub fn new(bbox: RotatedBox, conf: f64) -> Self {
        Self { bbox, conf }
    }

    pub fn canonical(&self) -> Result<Detection> {
        Ok(Detection {
            bbox: self.bbox.canonicalize()?,
            conf: self.conf,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmsConfig {
    pub conf_threshold: f64,
    pub iou_threshold: f64,
}

impl Default for NmsConfig {
    fn default() -> Self {
        Self {
            conf_threshold: 0.3,
            iou_threshold: 0.45,
        }
    }
}

impl NmsConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("conf_threshold", self.conf_threshold), ("iou_threshold", self.iou_threshold)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// Keeps detections with `conf >= threshold`, preserving order.
pub fn confidence_filter(dets: &[Detection], threshold: f64) -> Vec<Detection> {
    dets.iter().filter(|d| d.conf >= threshold).copied().collect()
}

/// Descending confidence; ties broken by the canonical box's
/// `(cy, cx, w, h, theta)`, then by input position.
pub fn ranking_order(dets: &[Detection]) -> Vec<usize> {
    let keys: Vec<RotatedBox> = dets
        .iter()
        .map(|d| d.bbox.canonicalize().unwrap_or(d.bbox))
        .collect();
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .conf
            .total_cmp(&dets[a].conf)
            .then_with(|| keys[a].lexicographic_cmp(&keys[b]))
            .then(a.cmp(&b))
    });
    order
}

/// Greedy suppression over a precomputed ranking: walks `order`, keeping an
/// item unless `overlap(kept, item) > threshold` for an already kept item.
/// Returns kept positions in ranking order.
pub fn greedy_suppress<F>(order: &[usize], threshold: f64, mut overlap: F) -> Vec<usize>
where
    F: FnMut(usize, usize) -> f64,
{
    let mut kept: Vec<usize> = Vec::new();
    for &i in order {
        if kept.iter().all(|&k| overlap(k, i) <= threshold) {
            kept.push(i);
        }
    }
    kept
}

/// Confidence filter followed by greedy rotated NMS. Output is sorted by
/// descending confidence and is a subset of the input.
pub fn nms(dets: &[Detection], cfg: &NmsConfig) -> Vec<Detection> {
    let filtered = confidence_filter(dets, cfg.conf_threshold);
    let order = ranking_order(&filtered);
    greedy_suppress(&order, cfg.iou_threshold, |a, b| iou(&filtered[a].bbox, &filtered[b].bbox))
        .into_iter()
        .map(|i| filtered[i])
        .collect()
}

/// Sorts detections by [`ranking_order`].
pub fn sort_by_confidence(dets: &mut Vec<Detection>) {
    let order = ranking_order(dets);
    *dets = order.into_iter().map(|i| dets[i]).collect();
}
