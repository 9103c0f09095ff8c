//! Rotated bounding boxes in image coordinates.
//!
//! Coordinates are x-right / y-down. A box `(cx, cy, w, h, theta)` is the
//! axis-aligned `w x h` rectangle centered at `(cx, cy)` rotated clockwise (as
//! seen on screen) by `theta` radians: a local offset `(u, v)` maps to
//! `(u cos theta - v sin theta, u sin theta + v cos theta)`.
//!
//! A rectangle is unchanged by `theta -> theta + pi` and by
//! `(w, h, theta) -> (h, w, theta - pi/2)`. The canonical representative has
//! `w < h` and `theta` in `[-pi/2, pi/2)`.

use std::cmp::Ordering;
use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Amount subtracted from the width of an exactly square box before
/// canonicalization, so that `w < h` holds strictly.
pub const SQUARE_TIE_EPS: f64 = 1e-4;

/// Distance (pixels) within which a point counts as lying on a clip edge.
pub const CLIP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn sub(self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }

    fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    /// Rotates the offset `self` clockwise (on screen) by `angle`.
    pub fn rotated(self, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        Point::new(self.x * c - self.y * s, self.x * s + self.y * c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotatedBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    /// Clockwise rotation in radians.
    pub theta: f64,
}

impl RotatedBox {
    /// Builds a box, rejecting non-finite values and non-positive sides.
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, theta: f64) -> Result<Self> {
        let b = Self { cx, cy, w, h, theta };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cx.is_finite() && self.cy.is_finite() && self.theta.is_finite()) {
            return Err(Error::InvalidBox(format!("non-finite component in {self:?}")));
        }
        if !(self.w.is_finite() && self.h.is_finite() && self.w > 0.0 && self.h > 0.0) {
            return Err(Error::InvalidBox(format!(
                "sides must be positive and finite, got w={} h={}",
                self.w, self.h
            )));
        }
        Ok(())
    }

    pub fn center(&self) -> Point {
        Point::new(self.cx, self.cy)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn is_canonical(&self) -> bool {
        self.w < self.h && (-FRAC_PI_2..FRAC_PI_2).contains(&self.theta)
    }

    /// Returns the canonical representative of the same rectangle.
    ///
    /// Exact squares have their width reduced by [`SQUARE_TIE_EPS`] first.
    /// Already canonical boxes are returned bit-for-bit unchanged.
    pub fn canonicalize(&self) -> Result<RotatedBox> {
        self.validate()?;
        let (mut w, mut h, mut theta) = (self.w, self.h, self.theta);
        if w == h {
            w -= SQUARE_TIE_EPS.min(0.5 * w);
        }
        if w > h {
            std::mem::swap(&mut w, &mut h);
            theta -= FRAC_PI_2;
        }
        Ok(RotatedBox {
            cx: self.cx,
            cy: self.cy,
            w,
            h,
            theta: wrap_half_pi(theta),
        })
    }

    /// The four corners, clockwise on screen starting from the local
    /// top-left `(-w/2, -h/2)`.
    pub fn corners(&self) -> ConvexQuad {
        let (hw, hh) = (0.5 * self.w, 0.5 * self.h);
        let local = [
            Point::new(-hw, -hh),
            Point::new(hw, -hh),
            Point::new(hw, hh),
            Point::new(-hw, hh),
        ];
        let c = self.center();
        ConvexQuad {
            vertices: local.map(|p| {
                let r = p.rotated(self.theta);
                Point::new(c.x + r.x, c.y + r.y)
            }),
        }
    }

    /// Point-in-rectangle test; boundary points count as inside.
    pub fn contains(&self, p: Point) -> bool {
        let local = p.sub(self.center()).rotated(-self.theta);
        local.x.abs() <= 0.5 * self.w && local.y.abs() <= 0.5 * self.h
    }

    /// Lexicographic order on `(cy, cx, w, h, theta)`, total over floats.
    pub fn lexicographic_cmp(&self, other: &RotatedBox) -> Ordering {
        self.cy
            .total_cmp(&other.cy)
            .then(self.cx.total_cmp(&other.cx))
            .then(self.w.total_cmp(&other.w))
            .then(self.h.total_cmp(&other.h))
            .then(self.theta.total_cmp(&other.theta))
    }
}

/// Wraps an angle into `[-pi/2, pi/2)`. In-range input is returned unchanged.
pub fn wrap_half_pi(theta: f64) -> f64 {
    if (-FRAC_PI_2..FRAC_PI_2).contains(&theta) {
        return theta;
    }
    let mut t = theta - PI * ((theta + FRAC_PI_2) / PI).floor();
    if t >= FRAC_PI_2 {
        t -= PI;
    }
    if t < -FRAC_PI_2 {
        t += PI;
    }
    t
}

/// Distance between two angles as orientations of a rectangle, in `[0, pi/2]`.
pub fn angular_error(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % PI;
    d.min(PI - d)
}

/// Four vertices of a convex quadrilateral, clockwise on screen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexQuad {
    pub vertices: [Point; 4],
}

impl ConvexQuad {
    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices)
    }
}

/// Shoelace formula. Positive for clockwise-on-screen winding.
pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        acc += poly[i].cross(poly[(i + 1) % n]);
    }
    0.5 * acc
}

pub fn polygon_area(poly: &[Point]) -> f64 {
    signed_area(poly).abs()
}

/// Clips `subject` against one edge of a convex clip polygon.
///
/// `orientation` is the sign of the clip polygon's signed area, so the
/// interior is where `orientation * cross(edge, p - start) >= -tol * |edge|`.
fn clip_edge(subject: &[Point], start: Point, end: Point, orientation: f64) -> Vec<Point> {
    let edge = end.sub(start);
    let len = edge.x.hypot(edge.y);
    if len == 0.0 {
        return subject.to_vec();
    }
    // signed distance from the clip line, positive inside
    let dist = |p: Point| orientation * edge.cross(p.sub(start)) / len;
    let n = subject.len();
    let mut out = Vec::with_capacity(n + 2);
    for i in 0..n {
        let s = subject[i];
        let e = subject[(i + 1) % n];
        let (ds, de) = (dist(s), dist(e));
        let s_in = ds >= -CLIP_TOLERANCE;
        let e_in = de >= -CLIP_TOLERANCE;
        if s_in != e_in {
            let denom = ds - de;
            if denom != 0.0 {
                let t = ds / denom;
                out.push(Point::new(s.x + (e.x - s.x) * t, s.y + (e.y - s.y) * t));
            }
        }
        if e_in {
            out.push(e);
        }
    }
    out
}

/// Intersection of two convex polygons (either winding) by
/// Sutherland-Hodgman clipping. Empty when the overlap is degenerate.
pub fn convex_intersection(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let orientation = signed_area(clip).signum();
    if orientation == 0.0 || signed_area(subject) == 0.0 {
        return Vec::new();
    }
    let mut poly = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        poly = clip_edge(&poly, clip[i], clip[(i + 1) % n], orientation);
        if poly.len() < 3 {
            return Vec::new();
        }
    }
    poly
}

/// Area of the intersection of two convex quads. Degenerate overlaps
/// (touching edges or vertices, zero-area inputs) give 0.
pub fn intersect_area(a: &ConvexQuad, b: &ConvexQuad) -> f64 {
    if a.area() <= 0.0 || b.area() <= 0.0 {
        return 0.0;
    }
    polygon_area(&convex_intersection(&a.vertices, &b.vertices))
}

/// Intersection-over-union of two rotated boxes.
///
/// Exactly symmetric: the pair is put in a fixed order before clipping.
pub fn iou(a: &RotatedBox, b: &RotatedBox) -> f64 {
    let (a, b) = if a.lexicographic_cmp(b) == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    };
    // circumscribed circles do not meet
    let reach = 0.5 * (a.w.hypot(a.h) + b.w.hypot(b.h));
    if (a.cx - b.cx).powi(2) + (a.cy - b.cy).powi(2) > reach * reach {
        return 0.0;
    }
    if same_rectangle(a, b) {
        return 1.0;
    }
    let inter = intersect_area(&a.corners(), &b.corners());
    let union = a.area() + b.area() - inter;
    if union.is_nan() || union <= 0.0 || inter <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Relative tolerance under which two parameterizations are taken to describe
/// one rectangle.
const SAME_RECT_TOL: f64 = 1e-12;

fn same_rectangle(a: &RotatedBox, b: &RotatedBox) -> bool {
    let (Ok(a), Ok(b)) = (a.canonicalize(), b.canonicalize()) else {
        return false;
    };
    let scale = a.w.max(a.h).max(b.w).max(b.h);
    let close = |x: f64, y: f64| (x - y).abs() <= SAME_RECT_TOL * scale;
    close(a.cx, b.cx)
        && close(a.cy, b.cy)
        && close(a.w, b.w)
        && close(a.h, b.h)
        && angular_error(a.theta, b.theta) <= SAME_RECT_TOL
}

/// Rotates a box clockwise by `phi` about `center` and canonicalizes it.
pub fn rotate_box(b: &RotatedBox, phi: f64, center: Point) -> Result<RotatedBox> {
    let offset = b.center().sub(center).rotated(phi);
    RotatedBox {
        cx: center.x + offset.x,
        cy: center.y + offset.y,
        theta: b.theta + phi,
        ..*b
    }
    .canonicalize()
}

/// Mirrors a box about the vertical line `x = image_width / 2`.
pub fn hflip_box(b: &RotatedBox, image_width: f64) -> Result<RotatedBox> {
    RotatedBox {
        cx: image_width - b.cx,
        theta: -b.theta,
        ..*b
    }
    .canonicalize()
}

/// Mirrors a box about the horizontal line `y = image_height / 2`.
pub fn vflip_box(b: &RotatedBox, image_height: f64) -> Result<RotatedBox> {
    RotatedBox {
        cy: image_height - b.cy,
        theta: -b.theta,
        ..*b
    }
    .canonicalize()
}

/// Canonical angle whose height axis points along the ray from
/// `image_center` through `(cx, cy)`. Zero at the center itself.
pub fn radius_aligned_angle(cx: f64, cy: f64, image_center: Point) -> f64 {
    let (dx, dy) = (cx - image_center.x, cy - image_center.y);
    if dx == 0.0 && dy == 0.0 {
        return 0.0;
    }
    // the height axis of a box at angle t is (-sin t, cos t)
    wrap_half_pi((-dx).atan2(dy))
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn any_box(spread: f64) -> impl Strategy<Value = RotatedBox> {
        (-spread..spread, -spread..spread, 0.5..30.0f64, 0.5..30.0f64, -7.0..7.0f64)
            .prop_map(|(cx, cy, w, h, theta)| RotatedBox { cx, cy, w, h, theta })
    }

    proptest! {
        #[test]
        fn canonicalize_idempotent(b in any_box(50.0)) {
            let c = b.canonicalize().unwrap();
            prop_assert!(c.is_canonical());
            prop_assert_eq!(c.canonicalize().unwrap(), c);
            prop_assert!((iou(&b, &c) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn iou_symmetric_and_bounded(a in any_box(10.0), b in any_box(10.0)) {
            let v = iou(&a, &b);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert!((v - iou(&b, &a)).abs() < 1e-12);
        }

        #[test]
        fn iou_ignores_parameterization(a in any_box(10.0), b in any_box(10.0)) {
            let v = iou(&a, &b);
            prop_assert!((v - iou(&a.canonicalize().unwrap(), &b)).abs() < 1e-9);
            prop_assert!((v - iou(&a, &b.canonicalize().unwrap())).abs() < 1e-9);
        }

        #[test]
        fn iou_rigid_motion_invariant(
            a in any_box(10.0),
            b in any_box(10.0),
            phi in -PI..PI,
            x in -100.0..100.0f64,
            y in -100.0..100.0f64,
        ) {
            let c = Point::new(x, y);
            let v = iou(&rotate_box(&a, phi, c).unwrap(), &rotate_box(&b, phi, c).unwrap());
            prop_assert!((v - iou(&a, &b)).abs() < 1e-9);
        }

        #[test]
        fn flips_preserve_iou(a in any_box(10.0), b in any_box(10.0)) {
            let (a, b) = (
                RotatedBox { cx: a.cx + 50.0, cy: a.cy + 50.0, ..a },
                RotatedBox { cx: b.cx + 50.0, cy: b.cy + 50.0, ..b },
            );
            let v = iou(&a, &b);
            let h = iou(&hflip_box(&a, 100.0).unwrap(), &hflip_box(&b, 100.0).unwrap());
            let f = iou(&vflip_box(&a, 100.0).unwrap(), &vflip_box(&b, 100.0).unwrap());
            prop_assert!((v - h).abs() < 1e-9);
            prop_assert!((v - f).abs() < 1e-9);
        }

        #[test]
        fn corners_convex_with_box_area(b in any_box(50.0)) {
            let q = b.corners();
            prop_assert!((q.area() - b.w * b.h).abs() <= 1e-9 * b.w * b.h);
            let v = q.vertices;
            let turns: Vec<f64> = (0..4)
                .map(|i| v[(i + 1) % 4].sub(v[i]).cross(v[(i + 2) % 4].sub(v[(i + 1) % 4])))
                .collect();
            prop_assert!(turns.iter().all(|&t| t > 0.0) || turns.iter().all(|&t| t < 0.0));
        }
    }
}
