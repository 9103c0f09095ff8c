//! Angle losses, YOLO-style target assignment, and the full detection loss
//! with analytic gradients with respect to the raw head outputs.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::codec::{encode_targets, CodecParams, Targets, HeadLayout, RawPrediction, RawPredictions, SlotIndex};
use crate::error::{Error, Result};
use crate::geometry::{iou, RotatedBox};
use crate::math::sigmoid;

/// Probability clamp inside the BCE logarithms.
pub const BCE_EPS: f64 = 1e-12;

/// Default IoU above which a non-positive slot is ignored rather than
/// treated as a negative.
pub const DEFAULT_IGNORE_IOU: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AngleLossKind {
    PlainL1,
    PlainL2,
    PeriodicL1,
    PeriodicL2,
}

impl AngleLossKind {
    pub const ALL: [AngleLossKind; 4] = [
        AngleLossKind::PlainL1,
        AngleLossKind::PeriodicL1,
        AngleLossKind::PlainL2,
        AngleLossKind::PeriodicL2,
    ];

    pub fn is_periodic(self) -> bool {
        matches!(self, AngleLossKind::PeriodicL1 | AngleLossKind::PeriodicL2)
    }

    fn is_l1(self) -> bool {
        matches!(self, AngleLossKind::PlainL1 | AngleLossKind::PeriodicL1)
    }

    fn norm(self, x: f64) -> f64 {
        if self.is_l1() {
            x.abs()
        } else {
            x * x
        }
    }

    /// Derivative of the norm; the L1 subgradient at 0 is 0.
    fn norm_grad(self, x: f64) -> f64 {
        if self.is_l1() {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        } else {
            2.0 * x
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AngleLossKind::PlainL1 => "plain-l1",
            AngleLossKind::PlainL2 => "plain-l2",
            AngleLossKind::PeriodicL1 => "periodic-l1",
            AngleLossKind::PeriodicL2 => "periodic-l2",
        }
    }
}

impl fmt::Display for AngleLossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AngleLossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AngleLossKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown angle loss '{s}'")))
    }
}

/// `mod(delta - pi/2, pi) - pi/2`, with `mod` taking values in `[0, pi)`.
pub fn periodic_residual(delta: f64) -> f64 {
    let x = delta - FRAC_PI_2;
    let mut m = x - PI * (x / PI).floor();
    if m >= PI {
        m -= PI;
    }
    if m < 0.0 {
        m += PI;
    }
    m - FRAC_PI_2
}

/// Angle loss between a predicted and a ground-truth angle.
pub fn angle_loss(theta_hat: f64, theta: f64, kind: AngleLossKind) -> f64 {
    let delta = theta_hat - theta;
    if kind.is_periodic() {
        kind.norm(periodic_residual(delta))
    } else {
        kind.norm(delta)
    }
}

/// Derivative of [`angle_loss`] with respect to `theta_hat`.
///
/// At the periodic wrap point (`delta = pi/2 mod pi`) the left-hand limit
/// is returned; the L1 kink at zero residual yields 0.
pub fn angle_loss_grad(theta_hat: f64, theta: f64, kind: AngleLossKind) -> f64 {
    let delta = theta_hat - theta;
    if kind.is_periodic() {
        let mut r = periodic_residual(delta);
        if r == -FRAC_PI_2 {
            r = FRAC_PI_2;
        }
        kind.norm_grad(r)
    } else {
        kind.norm_grad(delta)
    }
}

/// Binary cross-entropy of `sigmoid(z)` against `target`, and its
/// derivative with respect to the logit `z`.
pub fn bce_with_logit(z: f64, target: f64) -> (f64, f64) {
    let p = sigmoid(z);
    let q = sigmoid(-z);
    let mut loss = 0.0;
    let mut grad = 0.0;
    if target != 0.0 {
        loss -= target * p.max(BCE_EPS).ln();
        if p > BCE_EPS {
            grad -= target * q;
        }
    }
    if target != 1.0 {
        loss -= (1.0 - target) * q.max(BCE_EPS).ln();
        if q > BCE_EPS {
            grad += (1.0 - target) * p;
        }
    }
    (loss, grad)
}

/// Form of the width/height regression term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WhLoss {
    /// `(sig(tw_hat) - tw)^2`, the sigmoid applied to the raw width output.
    #[default]
    Sigmoid,
    /// `(tw_hat - tw)^2`, consistent with the exponential size decoding.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub angle: AngleLossKind,
    pub wh: WhLoss,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            angle: AngleLossKind::PeriodicL1,
            wh: WhLoss::Sigmoid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Positive {
    pub slot: SlotIndex,
    pub gt: usize,
}

/// Split of all prediction slots into positives, negatives and ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub positives: Vec<Positive>,
    /// Indexed by flat slot position.
    pub negative: Vec<bool>,
    /// Indexed by flat slot position.
    pub ignored: Vec<bool>,
}

impl Assignment {
    pub fn num_negatives(&self) -> usize {
        self.negative.iter().filter(|&&n| n).count()
    }

    pub fn num_ignored(&self) -> usize {
        self.ignored.iter().filter(|&&n| n).count()
    }
}

/// Assigns ground-truth boxes to prediction slots.
///
/// Each ground truth gets the `(level, anchor)` whose anchor shape has the
/// largest co-centered axis-aligned IoU with its `(w, h)`, at the cell
/// containing its center. When that slot is already taken by an earlier
/// ground truth the next best anchor is used. With `predictions` given,
/// non-positive slots whose decoded box overlaps any ground truth with IoU
/// above `ignore_iou` are ignored; every other slot is a negative.
pub fn assign(
    gts: &[RotatedBox],
    layout: &HeadLayout,
    ignore_iou: f64,
    predictions: Option<(&RawPredictions, &CodecParams)>,
) -> Result<Assignment> {
    let n = layout.num_slots();
    let mut taken = vec![false; n];
    let mut positives = Vec::with_capacity(gts.len());
    let anchors = layout.anchors();
    for (g, gt) in gts.iter().enumerate() {
        let mut candidates: Vec<(usize, usize, f64)> = (0..anchors.num_levels())
            .flat_map(|k| anchors.level(k).iter().enumerate().map(move |(a, anc)| (k, a, anc.shape_iou(gt.w, gt.h))))
            .collect();
        candidates.sort_by(|x, y| y.2.total_cmp(&x.2));
        let mut placed = false;
        for (level, anchor, _) in candidates {
            let grid = &layout.grids()[level];
            let t = encode_targets(gt, grid, anchors.level(level)[anchor])?;
            let slot = SlotIndex { level, anchor, row: t.row, col: t.col };
            let flat = layout.flat_index(slot)?;
            if !taken[flat] {
                taken[flat] = true;
                positives.push(Positive { slot, gt: g });
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::SlotConflict(format!(
                "every anchor slot for ground truth {g} is taken by another object"
            )));
        }
    }

    let mut ignored = vec![false; n];
    if let Some((preds, params)) = predictions {
        if preds.layout() != layout {
            return Err(Error::ShapeMismatch("predictions use a different layout".into()));
        }
        if !gts.is_empty() {
            for (flat, det) in preds.decode_all(params).iter().enumerate() {
                if !taken[flat] && gts.iter().any(|gt| iou(&det.bbox, gt) > ignore_iou) {
                    ignored[flat] = true;
                }
            }
        }
    }
    let negative = (0..n).map(|i| !taken[i] && !ignored[i]).collect();
    Ok(Assignment {
        positives,
        negative,
        ignored,
    })
}

/// Per-term values of the detection loss.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub xy: f64,
    pub wh: f64,
    pub angle: f64,
    pub conf_pos: f64,
    pub conf_neg: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub breakdown: LossBreakdown,
    /// Gradient of the total with respect to each raw component, by flat slot.
    pub grad: Vec<RawPrediction>,
}

/// Loss terms and raw gradient of one positive slot against its targets.
/// `total` is left at zero.
pub fn positive_loss(
    p: &RawPrediction,
    gt: &RotatedBox,
    t: &Targets,
    cfg: &LossConfig,
    params: &CodecParams,
) -> (LossBreakdown, RawPrediction) {
    let mut b = LossBreakdown::default();
    let mut g = RawPrediction::default();

    let (lx, gx) = bce_with_logit(p.tx, t.tx);
    let (ly, gy) = bce_with_logit(p.ty, t.ty);
    b.xy = lx + ly;
    g.tx = gx;
    g.ty = gy;

    for (pred, target, out) in [(p.tw, t.tw, &mut g.tw), (p.th, t.th, &mut g.th)] {
        match cfg.wh {
            WhLoss::Sigmoid => {
                let s = sigmoid(pred);
                let d = s - target;
                b.wh += d * d;
                *out = 2.0 * d * s * (1.0 - s);
            }
            WhLoss::Direct => {
                let d = pred - target;
                b.wh += d * d;
                *out = 2.0 * d;
            }
        }
    }

    let theta_hat = params.decode_angle(p.tangle);
    b.angle = angle_loss(theta_hat, gt.theta, cfg.angle);
    g.tangle = angle_loss_grad(theta_hat, gt.theta, cfg.angle) * params.angle_slope(p.tangle);

    let (lc, gc) = bce_with_logit(p.tconf, 1.0);
    b.conf_pos = lc;
    g.tconf = gc;
    (b, g)
}

/// Detection loss over an assignment:
///
/// * positives: BCE of `sig(tx)`, `sig(ty)` against the cell offsets, the
///   width/height term selected by `cfg.wh`, the angle loss between the
///   decoded angle and the ground-truth angle, and BCE of the confidence
///   against 1;
/// * negatives: BCE of the confidence against 0;
/// * ignored slots contribute nothing.
///
/// Sums run over positives in assignment order, then negatives in flat
/// order, so the result is reproducible bit for bit.
pub fn total_loss(
    raw: &RawPredictions,
    gts: &[RotatedBox],
    assignment: &Assignment,
    cfg: &LossConfig,
    params: &CodecParams,
) -> Result<LossOutput> {
    let layout = raw.layout();
    let n = layout.num_slots();
    if assignment.negative.len() != n || assignment.ignored.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "assignment covers {} slots, layout has {n}",
            assignment.negative.len()
        )));
    }
    let mut b = LossBreakdown::default();
    let mut grad = vec![RawPrediction::default(); n];

    for pos in &assignment.positives {
        let gt = gts.get(pos.gt).ok_or_else(|| {
            Error::ShapeMismatch(format!("positive refers to ground truth {} of {}", pos.gt, gts.len()))
        })?;
        let flat = layout.flat_index(pos.slot)?;
        if assignment.negative[flat] || assignment.ignored[flat] {
            return Err(Error::ShapeMismatch(format!("slot {:?} is both positive and not", pos.slot)));
        }
        let grid = &layout.grids()[pos.slot.level];
        let t = encode_targets(gt, grid, layout.anchor(pos.slot))?;
        if (t.row, t.col) != (pos.slot.row, pos.slot.col) {
            return Err(Error::ShapeMismatch(format!(
                "ground truth {} lies in cell ({}, {}), not {:?}",
                pos.gt, t.row, t.col, pos.slot
            )));
        }
        let (terms, g) = positive_loss(&raw.slots()[flat], gt, &t, cfg, params);
        b.xy += terms.xy;
        b.wh += terms.wh;
        b.angle += terms.angle;
        b.conf_pos += terms.conf_pos;
        let acc = &mut grad[flat];
        acc.tx += g.tx;
        acc.ty += g.ty;
        acc.tw += g.tw;
        acc.th += g.th;
        acc.tangle += g.tangle;
        acc.tconf += g.tconf;
    }

    for (flat, _) in assignment.negative.iter().enumerate().filter(|(_, &neg)| neg) {
        let (lc, gc) = bce_with_logit(raw.slots()[flat].tconf, 0.0);
        b.conf_neg += lc;
        grad[flat].tconf += gc;
    }

    b.total = b.xy + b.wh + b.angle + b.conf_pos + b.conf_neg;
    Ok(LossOutput { breakdown: b, grad })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{encode_raw, Anchor, AnchorSet};
    use approx::assert_abs_diff_eq;

    /// Periodic loss as the minimum of the plain loss over equivalent
    /// angles, independent of the modulo implementation.
    fn oracle(delta: f64, l1: bool) -> f64 {
        (-3..=3)
            .map(|k| {
                let d = delta + k as f64 * PI;
                if l1 {
                    d.abs()
                } else {
                    d * d
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn central_diff(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-6;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn angle_loss_examples() {
        for kind in AngleLossKind::ALL {
            assert_eq!(angle_loss(0.4, 0.4, kind), 0.0);
        }
        assert_abs_diff_eq!(angle_loss(0.3 + PI, 0.3, AngleLossKind::PeriodicL1), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(angle_loss(0.5, 0.0, AngleLossKind::PeriodicL1), 0.5, epsilon = 1e-12);
        let l = angle_loss(2.8, 0.0, AngleLossKind::PeriodicL1);
        assert_abs_diff_eq!(l, oracle(2.8, true), epsilon = 1e-12);
        assert_abs_diff_eq!(l, 0.3416, epsilon = 1e-4);
    }

    #[test]
    fn periodic_matches_min_oracle() {
        for i in 0..2000 {
            let delta = -6.0 + 12.0 * i as f64 / 2000.0;
            assert_abs_diff_eq!(angle_loss(delta, 0.0, AngleLossKind::PeriodicL1), oracle(delta, true), epsilon = 1e-12);
            assert_abs_diff_eq!(angle_loss(delta, 0.0, AngleLossKind::PeriodicL2), oracle(delta, false), epsilon = 1e-11);
        }
    }

    #[test]
    fn angle_grad_examples() {
        let g = angle_loss_grad(0.3, 0.0, AngleLossKind::PeriodicL2);
        assert_abs_diff_eq!(g, 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(
            g,
            central_diff(|x| angle_loss(x, 0.0, AngleLossKind::PeriodicL2), 0.3),
            epsilon = 1e-6
        );
        let g = angle_loss_grad(-0.2, 0.0, AngleLossKind::PeriodicL1);
        assert_eq!(g, -1.0);
        assert_abs_diff_eq!(
            g,
            central_diff(|x| angle_loss(x, 0.0, AngleLossKind::PeriodicL1), -0.2),
            epsilon = 1e-6
        );
        assert_eq!(angle_loss_grad(PI, 0.0, AngleLossKind::PeriodicL2), 0.0);
    }

    #[test]
    fn angle_grad_kinks() {
        assert_eq!(angle_loss_grad(1.0, 1.0, AngleLossKind::PeriodicL1), 0.0);
        assert_eq!(angle_loss_grad(1.0, 1.0, AngleLossKind::PlainL1), 0.0);
        // left limit at the wrap point
        assert_eq!(angle_loss_grad(FRAC_PI_2, 0.0, AngleLossKind::PeriodicL1), 1.0);
        assert_abs_diff_eq!(angle_loss_grad(FRAC_PI_2, 0.0, AngleLossKind::PeriodicL2), PI, epsilon = 1e-12);
    }

    #[test]
    fn plain_and_periodic_coincide_inside_half_pi() {
        for i in 0..=100 {
            let d = -1.5 + 3.0 * i as f64 / 100.0;
            assert_abs_diff_eq!(
                angle_loss(d, 0.0, AngleLossKind::PlainL2),
                angle_loss(d, 0.0, AngleLossKind::PeriodicL2),
                epsilon = 1e-12
            );
            assert_eq!(
                angle_loss_grad(d, 0.0, AngleLossKind::PlainL1),
                angle_loss_grad(d, 0.0, AngleLossKind::PeriodicL1)
            );
        }
    }

    #[test]
    fn plain_loss_is_not_periodic() {
        assert_abs_diff_eq!(angle_loss(0.1 + PI, 0.1, AngleLossKind::PlainL1), PI, epsilon = 1e-12);
    }

    #[test]
    fn kind_parsing() {
        for k in AngleLossKind::ALL {
            assert_eq!(k.name().parse::<AngleLossKind>().unwrap(), k);
        }
        assert!("l3".parse::<AngleLossKind>().is_err());
    }

    #[test]
    fn bce_saturation_and_gradient() {
        let (l, g) = bce_with_logit(-20.0, 0.0);
        assert!(l > 0.0 && l < 3e-9);
        assert!(g > 0.0 && g < 3e-9);
        for &(z, t) in &[(0.3, 0.2), (-1.7, 0.9), (2.5, 1.0), (0.0, 0.0)] {
            let (_, g) = bce_with_logit(z, t);
            assert_abs_diff_eq!(g, central_diff(|x| bce_with_logit(x, t).0, z), epsilon = 1e-7);
        }
        // clamped at extreme logits
        assert!(bce_with_logit(-100.0, 1.0).0 <= -(BCE_EPS.ln()) + 1e-9);
    }

    fn layout_9() -> HeadLayout {
        HeadLayout::new(64, 64, &[8, 16, 32], AnchorSet::default_geometric()).unwrap()
    }

    #[test]
    fn assign_empty() {
        let layout = layout_9();
        let a = assign(&[], &layout, 0.7, None).unwrap();
        assert!(a.positives.is_empty());
        assert_eq!(a.num_negatives(), layout.num_slots());
    }

    #[test]
    fn assign_exact_anchor_shape() {
        let layout = layout_9();
        let anchor = layout.anchors().level(1)[1];
        let gt = RotatedBox::new(30.0, 40.0, anchor.w, anchor.h * 1.0001, 0.2).unwrap();
        let a = assign(&[gt], &layout, 0.7, None).unwrap();
        // brute force over all nine anchors
        let mut best = (0, 0, -1.0);
        for k in 0..3 {
            for n in 0..3 {
                let v = layout.anchors().level(k)[n].shape_iou(gt.w, gt.h);
                if v > best.2 {
                    best = (k, n, v);
                }
            }
        }
        assert_eq!((best.0, best.1), (1, 1));
        assert_eq!(
            a.positives,
            vec![Positive { slot: SlotIndex { level: 1, anchor: 1, row: 2, col: 1 }, gt: 0 }]
        );
        assert_eq!(a.num_negatives(), layout.num_slots() - 1);
    }

    #[test]
    fn assign_two_cells_and_collision() {
        let layout = layout_9();
        let g1 = RotatedBox::new(4.0, 4.0, 19.0, 21.0, 0.0).unwrap();
        let g2 = RotatedBox::new(60.0, 60.0, 19.0, 21.0, 0.0).unwrap();
        let a = assign(&[g1, g2], &layout, 0.7, None).unwrap();
        assert_eq!(a.positives.len(), 2);
        assert_ne!(a.positives[0].slot, a.positives[1].slot);
        assert_eq!(a.positives[0].slot.anchor, a.positives[1].slot.anchor);

        // same cell and shape: second object falls back to the next anchor
        let g3 = RotatedBox::new(4.5, 4.5, 19.0, 21.0, 0.0).unwrap();
        let a = assign(&[g1, g3], &layout, 0.7, None).unwrap();
        assert_eq!(a.positives[0].slot, SlotIndex { level: 0, anchor: 0, row: 0, col: 0 });
        assert_eq!(a.positives[1].slot, SlotIndex { level: 0, anchor: 1, row: 0, col: 0 });
    }

    #[test]
    fn assign_rejects_outside() {
        let layout = layout_9();
        let g = RotatedBox::new(70.0, 4.0, 19.0, 21.0, 0.0).unwrap();
        assert!(matches!(assign(&[g], &layout, 0.7, None), Err(Error::OutOfBounds { .. })));
    }

    #[test]
    fn assign_marks_ignored() {
        let layout = HeadLayout::new(32, 32, &[16], AnchorSet::new(vec![[Anchor::new(16.0, 16.0); 3]]).unwrap()).unwrap();
        let gt = RotatedBox::new(8.0, 8.0, 15.0, 16.0, 0.0).unwrap();
        let params = CodecParams::wide();
        // every slot decodes to a 16x16 box centered in its cell
        let preds = RawPredictions::filled(layout.clone(), RawPrediction::default());
        let a = assign(&[gt], &layout, 0.7, Some((&preds, &params))).unwrap();
        assert_eq!(a.positives.len(), 1);
        // the other two anchors of cell (0, 0) overlap the ground truth
        assert_eq!(a.num_ignored(), 2);
        assert_eq!(a.num_negatives(), layout.num_slots() - 3);
        for i in 0..layout.num_slots() {
            assert!(!(a.negative[i] && a.ignored[i]));
        }
    }

    #[test]
    fn total_loss_saturated_negatives() {
        let layout = layout_9();
        let preds = RawPredictions::filled(layout.clone(), RawPrediction { tconf: -20.0, ..Default::default() });
        let a = assign(&[], &layout, 0.7, None).unwrap();
        let out = total_loss(&preds, &[], &a, &LossConfig::default(), &CodecParams::wide()).unwrap();
        let per = (-20f64).exp().ln_1p();
        assert_abs_diff_eq!(out.breakdown.total, per * layout.num_slots() as f64, epsilon = 1e-12);
        assert!(out.breakdown.total < 1e-6);
    }

    #[test]
    fn total_loss_at_optimum() {
        let layout = layout_9();
        let params = CodecParams::wide();
        let gt = RotatedBox::new(21.3, 42.7, 18.0, 45.0, -0.6).unwrap();
        let a = assign(&[gt], &layout, 0.7, None).unwrap();
        let slot = a.positives[0].slot;
        let t = encode_targets(&gt, &layout.grids()[slot.level], layout.anchor(slot)).unwrap();
        let mut preds = RawPredictions::filled(layout.clone(), RawPrediction { tconf: -30.0, ..Default::default() });
        *preds.get_mut(slot).unwrap() = encode_raw(&gt, &t, &params, 1.0 - 1e-7);
        let cfg = LossConfig { angle: AngleLossKind::PeriodicL1, wh: WhLoss::Direct };
        let out = total_loss(&preds, &[gt], &a, &cfg, &params).unwrap();
        let entropy = |p: f64| -(p * p.ln() + (1.0 - p) * (1.0 - p).ln());
        assert_abs_diff_eq!(out.breakdown.xy, entropy(t.tx) + entropy(t.ty), epsilon = 1e-9);
        assert_eq!(out.breakdown.wh, 0.0);
        assert!(out.breakdown.angle < 1e-9);
        let g = out.grad[layout.flat_index(slot).unwrap()];
        for v in [g.tx, g.ty, g.tw, g.th] {
            assert!(v.abs() < 1e-9, "{g:?}");
        }
    }

    #[test]
    fn total_loss_rejects_inconsistent_assignment() {
        let layout = layout_9();
        let preds = RawPredictions::filled(layout.clone(), RawPrediction::default());
        let gt = RotatedBox::new(20.0, 20.0, 18.0, 45.0, 0.0).unwrap();
        let mut a = assign(&[gt], &layout, 0.7, None).unwrap();
        let cfg = LossConfig::default();
        let p = CodecParams::wide();
        assert!(total_loss(&preds, &[], &a, &cfg, &p).is_err());
        a.positives[0].slot.row += 1;
        assert!(total_loss(&preds, &[gt], &a, &cfg, &p).is_err());
        a.negative.pop();
        assert!(total_loss(&preds, &[gt], &a, &cfg, &p).is_err());
    }
}
