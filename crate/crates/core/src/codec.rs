//! Mapping between detection-head outputs and image-space rotated boxes.
//!
//! The head predicts, for every pyramid level `k`, anchor `n` and grid cell
//! `(i, j)`, a raw 6-vector `(tx, ty, tw, th, tangle, tconf)`. Decoding:
//!
//! ```text
//! x = s_k (j + sig(tx))        w = w_anchor exp(tw)
//! y = s_k (i + sig(ty))        h = h_anchor exp(th)
//! angle = alpha sig(tangle) - beta
//! conf  = sig(tconf)
//! ```

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RotatedBox;
use crate::math::{logit, sigmoid};
use crate::postprocess::Detection;

pub const ANCHORS_PER_LEVEL: usize = 3;
pub const DEFAULT_STRIDES: [u32; 3] = [8, 16, 32];
pub const DEFAULT_IMAGE_SIZE: u32 = 608;

/// One pyramid level's prediction grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Zero-based level index; level 0 has the finest stride.
    pub level: usize,
    pub stride: u32,
    pub rows: usize,
    pub cols: usize,
    pub image_width: u32,
    pub image_height: u32,
}

impl GridSpec {
    pub fn new(level: usize, stride: u32, image_width: u32, image_height: u32) -> Result<Self> {
        if stride == 0 || image_width == 0 || image_height == 0 {
            return Err(Error::Config("stride and image size must be positive".into()));
        }
        if !image_width.is_multiple_of(stride) || !image_height.is_multiple_of(stride) {
            return Err(Error::Config(format!(
                "image size {image_width}x{image_height} is not divisible by stride {stride}"
            )));
        }
        Ok(Self {
            level,
            stride,
            rows: (image_height / stride) as usize,
            cols: (image_width / stride) as usize,
            image_width,
            image_height,
        })
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub w: f64,
    pub h: f64,
}

impl Anchor {
    pub const fn new(w: f64, h: f64) -> Self {
        Self { w, h }
    }

    /// IoU of two co-centered axis-aligned boxes of the given shapes.
    pub fn shape_iou(&self, w: f64, h: f64) -> f64 {
        let inter = self.w.min(w) * self.h.min(h);
        inter / (self.w * self.h + w * h - inter)
    }
}

/// Exactly three anchors per pyramid level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorSet {
    levels: Vec<[Anchor; ANCHORS_PER_LEVEL]>,
}

impl AnchorSet {
    pub fn new(levels: Vec<[Anchor; ANCHORS_PER_LEVEL]>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Config("anchor set has no levels".into()));
        }
        for (k, level) in levels.iter().enumerate() {
            for a in level {
                if !(a.w.is_finite() && a.h.is_finite() && a.w > 0.0 && a.h > 0.0) {
                    return Err(Error::Config(format!("level {k}: anchor {a:?} is not positive")));
                }
            }
        }
        Ok(Self { levels })
    }

    /// Nine square anchors spaced geometrically from 20 px to 400 px, three
    /// per level for the three default strides.
    pub fn default_geometric() -> Self {
        let size = |i: usize| 20.0 * 20f64.powf(i as f64 / 8.0);
        let levels = (0..3)
            .map(|k| std::array::from_fn(|n| {
                let s = size(3 * k + n);
                Anchor::new(s, s)
            }))
            .collect();
        Self { levels }
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, k: usize) -> &[Anchor; ANCHORS_PER_LEVEL] {
        &self.levels[k]
    }

    pub fn get(&self, level: usize, anchor: usize) -> Option<Anchor> {
        self.levels.get(level).and_then(|l| l.get(anchor)).copied()
    }
}

/// Angle decoding range: predicted angles lie in `(-beta, alpha - beta)`.
///
/// With `unbounded` set the raw value is the angle itself and `alpha`,
/// `beta` are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodecParams {
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub unbounded: bool,
}

impl Default for CodecParams {
    fn default() -> Self {
        Self::wide()
    }
}

impl CodecParams {
    /// `(2 pi, pi)`: predictions in `(-pi, pi)`.
    pub fn wide() -> Self {
        Self { alpha: 2.0 * PI, beta: PI, unbounded: false }
    }

    /// `(pi, pi/2)`: predictions restricted to the ground-truth range.
    pub fn narrow() -> Self {
        Self { alpha: PI, beta: PI / 2.0, unbounded: false }
    }

    /// Identity decoding: any real angle can be predicted.
    pub fn unbounded() -> Self {
        Self { alpha: f64::INFINITY, beta: 0.0, unbounded: true }
    }

    /// Open interval of predictable angles.
    pub fn bounds(&self) -> (f64, f64) {
        if self.unbounded {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            (-self.beta, self.alpha - self.beta)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.unbounded {
            return Ok(());
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("invalid angle range {self:?}")));
        }
        Ok(())
    }

    pub fn decode_angle(&self, t: f64) -> f64 {
        if self.unbounded {
            return t;
        }
        self.alpha * sigmoid(t) - self.beta
    }

    /// Raw value that decodes to `angle`, clamped near the open range ends.
    pub fn encode_angle(&self, angle: f64) -> f64 {
        if self.unbounded {
            return angle;
        }
        logit((angle + self.beta) / self.alpha)
    }

    /// `d angle / d t` at raw value `t`.
    pub fn angle_slope(&self, t: f64) -> f64 {
        if self.unbounded {
            return 1.0;
        }
        let s = sigmoid(t);
        self.alpha * s * (1.0 - s)
    }
}

/// Raw head output for one prediction slot.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RawPrediction {
    pub tx: f64,
    pub ty: f64,
    pub tw: f64,
    pub th: f64,
    pub tangle: f64,
    pub tconf: f64,
}

impl RawPrediction {
    pub const LEN: usize = 6;

    pub fn to_array(self) -> [f64; 6] {
        [self.tx, self.ty, self.tw, self.th, self.tangle, self.tconf]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            tx: a[0],
            ty: a[1],
            tw: a[2],
            th: a[3],
            tangle: a[4],
            tconf: a[5],
        }
    }
}

/// Address of one prediction slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SlotIndex {
    pub level: usize,
    pub anchor: usize,
    pub row: usize,
    pub col: usize,
}

/// Grids of all pyramid levels together with their anchors.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadLayout {
    grids: Vec<GridSpec>,
    anchors: AnchorSet,
    offsets: Vec<usize>,
}

impl HeadLayout {
    pub fn new(image_width: u32, image_height: u32, strides: &[u32], anchors: AnchorSet) -> Result<Self> {
        if strides.is_empty() {
            return Err(Error::Config("no strides given".into()));
        }
        if strides.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!("strides must increase strictly: {strides:?}")));
        }
        if anchors.num_levels() != strides.len() {
            return Err(Error::Config(format!(
                "{} anchor levels for {} strides",
                anchors.num_levels(),
                strides.len()
            )));
        }
        let grids = strides
            .iter()
            .enumerate()
            .map(|(k, &s)| GridSpec::new(k, s, image_width, image_height))
            .collect::<Result<Vec<_>>>()?;
        let mut offsets = Vec::with_capacity(grids.len() + 1);
        let mut acc = 0;
        for g in &grids {
            offsets.push(acc);
            acc += ANCHORS_PER_LEVEL * g.cells();
        }
        offsets.push(acc);
        Ok(Self {
            grids,
            anchors,
            offsets,
        })
    }

    /// 608x608 image, strides 8/16/32, [`AnchorSet::default_geometric`].
    pub fn default_layout() -> Self {
        Self::new(
            DEFAULT_IMAGE_SIZE,
            DEFAULT_IMAGE_SIZE,
            &DEFAULT_STRIDES,
            AnchorSet::default_geometric(),
        )
        .expect("default layout is valid")
    }

    pub fn from_config(cfg: &LayoutConfig) -> Result<Self> {
        let anchors = match &cfg.anchors {
            Some(levels) => AnchorSet::new(
                levels
                    .iter()
                    .map(|l| l.map(|[w, h]| Anchor::new(w, h)))
                    .collect(),
            )?,
            None => AnchorSet::default_geometric(),
        };
        Self::new(cfg.image_width, cfg.image_height, &cfg.strides, anchors)
    }

    pub fn grids(&self) -> &[GridSpec] {
        &self.grids
    }

    pub fn anchors(&self) -> &AnchorSet {
        &self.anchors
    }

    pub fn image_width(&self) -> u32 {
        self.grids[0].image_width
    }

    pub fn image_height(&self) -> u32 {
        self.grids[0].image_height
    }

    pub fn num_slots(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn anchor(&self, slot: SlotIndex) -> Anchor {
        self.anchors.level(slot.level)[slot.anchor]
    }

    /// Flat position of a slot; `(level, anchor, row, col)` in row-major order.
    pub fn flat_index(&self, slot: SlotIndex) -> Result<usize> {
        let err = || Error::IndexOutOfRange {
            level: slot.level,
            anchor: slot.anchor,
            row: slot.row,
            col: slot.col,
        };
        let g = self.grids.get(slot.level).ok_or_else(err)?;
        if slot.anchor >= ANCHORS_PER_LEVEL || slot.row >= g.rows || slot.col >= g.cols {
            return Err(err());
        }
        Ok(self.offsets[slot.level] + (slot.anchor * g.rows + slot.row) * g.cols + slot.col)
    }

    pub fn slot_at(&self, flat: usize) -> SlotIndex {
        let level = self.offsets.partition_point(|&o| o <= flat) - 1;
        let g = &self.grids[level];
        let rem = flat - self.offsets[level];
        SlotIndex {
            level,
            anchor: rem / g.cells(),
            row: (rem % g.cells()) / g.cols,
            col: rem % g.cols,
        }
    }

    pub fn slots(&self) -> impl Iterator<Item = SlotIndex> + '_ {
        (0..self.num_slots()).map(|i| self.slot_at(i))
    }
}

/// On-disk layout configuration (TOML). Every key is optional.
///
/// ```toml
/// image_width = 608
/// image_height = 608
/// strides = [8, 16, 32]
/// # one list of three [w, h] pairs per stride
/// anchors = [[[10, 20], [16, 30], [33, 23]], ...]
/// alpha = 6.283185307179586
/// beta = 3.141592653589793
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutConfig {
    pub image_width: u32,
    pub image_height: u32,
    pub strides: Vec<u32>,
    pub anchors: Option<Vec<[[f64; 2]; ANCHORS_PER_LEVEL]>>,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        let p = CodecParams::default();
        Self {
            image_width: DEFAULT_IMAGE_SIZE,
            image_height: DEFAULT_IMAGE_SIZE,
            strides: DEFAULT_STRIDES.to_vec(),
            anchors: None,
            alpha: p.alpha,
            beta: p.beta,
        }
    }
}

impl LayoutConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn codec_params(&self) -> Result<CodecParams> {
        let p = CodecParams {
            alpha: self.alpha,
            beta: self.beta,
            unbounded: false,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Regression targets of a ground-truth box for one anchor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Targets {
    pub tx: f64,
    pub ty: f64,
    pub tw: f64,
    pub th: f64,
    pub row: usize,
    pub col: usize,
}

/// Decodes one raw prediction into an image-space detection.
///
/// The box is returned as predicted, which need not be canonical.
pub fn decode(
    raw: &RawPrediction,
    slot: SlotIndex,
    layout: &HeadLayout,
    params: &CodecParams,
) -> Result<Detection> {
    layout.flat_index(slot)?;
    let s = layout.grids[slot.level].stride as f64;
    let anchor = layout.anchor(slot);
    Ok(Detection {
        bbox: RotatedBox {
            cx: s * (slot.col as f64 + sigmoid(raw.tx)),
            cy: s * (slot.row as f64 + sigmoid(raw.ty)),
            w: anchor.w * raw.tw.exp(),
            h: anchor.h * raw.th.exp(),
            theta: params.decode_angle(raw.tangle),
        },
        conf: sigmoid(raw.tconf),
    })
}

/// Regression targets of `gt` against `anchor` on `grid`.
pub fn encode_targets(gt: &RotatedBox, grid: &GridSpec, anchor: Anchor) -> Result<Targets> {
    gt.validate()?;
    let (width, height) = (grid.image_width as f64, grid.image_height as f64);
    if !(gt.cx >= 0.0 && gt.cx < width && gt.cy >= 0.0 && gt.cy < height) {
        return Err(Error::OutOfBounds {
            cx: gt.cx,
            cy: gt.cy,
            width,
            height,
        });
    }
    let s = grid.stride as f64;
    let (gx, gy) = (gt.cx / s, gt.cy / s);
    Ok(Targets {
        tx: gx - gx.floor(),
        ty: gy - gy.floor(),
        tw: (gt.w / anchor.w).ln(),
        th: (gt.h / anchor.h).ln(),
        row: (gy.floor() as usize).min(grid.rows - 1),
        col: (gx.floor() as usize).min(grid.cols - 1),
    })
}

/// Raw prediction that decodes exactly to `gt` (up to the logit clamp) at
/// the slot its targets select.
pub fn encode_raw(gt: &RotatedBox, targets: &Targets, params: &CodecParams, conf: f64) -> RawPrediction {
    RawPrediction {
        tx: logit(targets.tx),
        ty: logit(targets.ty),
        tw: targets.tw,
        th: targets.th,
        tangle: params.encode_angle(gt.theta),
        tconf: logit(conf),
    }
}

/// Predictions for every slot of a layout.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPredictions {
    layout: HeadLayout,
    slots: Vec<RawPrediction>,
}

impl RawPredictions {
    /// All slots set to `fill`.
    pub fn filled(layout: HeadLayout, fill: RawPrediction) -> Self {
        let slots = vec![fill; layout.num_slots()];
        Self { layout, slots }
    }

    pub fn from_slots(layout: HeadLayout, slots: Vec<RawPrediction>) -> Result<Self> {
        if slots.len() != layout.num_slots() {
            return Err(Error::ShapeMismatch(format!(
                "{} predictions for {} slots",
                slots.len(),
                layout.num_slots()
            )));
        }
        Ok(Self { layout, slots })
    }

    pub fn layout(&self) -> &HeadLayout {
        &self.layout
    }

    pub fn slots(&self) -> &[RawPrediction] {
        &self.slots
    }

    pub fn slots_mut(&mut self) -> &mut [RawPrediction] {
        &mut self.slots
    }

    pub fn get(&self, slot: SlotIndex) -> Result<&RawPrediction> {
        Ok(&self.slots[self.layout.flat_index(slot)?])
    }

    pub fn get_mut(&mut self, slot: SlotIndex) -> Result<&mut RawPrediction> {
        let i = self.layout.flat_index(slot)?;
        Ok(&mut self.slots[i])
    }

    /// Decodes every slot, in flat order.
    pub fn decode_all(&self, params: &CodecParams) -> Vec<Detection> {
        self.slots
            .iter()
            .enumerate()
            .map(|(i, raw)| {
                decode(raw, self.layout.slot_at(i), &self.layout, params).expect("slot in range")
            })
            .collect()
    }
}
