//! Planar similarity transforms and box types.
//!
//! Coordinates are continuous image coordinates with the y axis pointing
//! down; pixel `(row, col)` covers `[col, col+1) x [row, row+1)` so its
//! center sits at `(col + 0.5, row + 0.5)`. A positive angle rotates
//! counter-clockwise as seen on screen.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Rotates an offset by `theta` (counter-clockwise on screen, y down).
#[inline]
pub fn rotate(theta: f64, (x, y): (f64, f64)) -> (f64, f64) {
    let (sin, cos) = theta.sin_cos();
    (cos * x + sin * y, -sin * x + cos * y)
}

/// The 4-DoF target status: center, rotation and scale relative to the
/// initial template.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityState {
    pub tx: f64,
    pub ty: f64,
    pub theta: f64,
    pub s: f64,
}

impl SimilarityState {
    pub fn new(tx: f64, ty: f64, theta: f64, s: f64) -> Self {
        Self {
            tx,
            ty,
            theta: wrap_angle(theta),
            s,
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.tx, self.ty)
    }

    /// Maps a centered template offset into frame coordinates.
    pub fn apply(&self, offset: (f64, f64)) -> (f64, f64) {
        let (x, y) = rotate(self.theta, offset);
        (self.tx + self.s * x, self.ty + self.s * y)
    }

    /// Inverse of [`apply`](Self::apply).
    pub fn unapply(&self, point: (f64, f64)) -> (f64, f64) {
        let d = ((point.0 - self.tx) / self.s, (point.1 - self.ty) / self.s);
        rotate(-self.theta, d)
    }

    /// State of a warp applied to a patch that was itself produced by
    /// warping with `self` into an `outer_dims` (height, width) grid.
    ///
    /// If `P = warp(frame, self, outer_dims)` then
    /// `warp(P, inner, ..) == warp(frame, self.compose(inner, outer_dims), ..)`.
    pub fn compose(&self, inner: &SimilarityState, outer_dims: (usize, usize)) -> SimilarityState {
        let (h, w) = outer_dims;
        let offset = (inner.tx - w as f64 / 2.0, inner.ty - h as f64 / 2.0);
        let (tx, ty) = self.apply(offset);
        SimilarityState::new(tx, ty, self.theta + inner.theta, self.s * inner.s)
    }

    /// 2x3 affine matrix `[a b tx; c d ty]` mapping template offsets to frame points.
    pub fn matrix(&self) -> [[f64; 3]; 2] {
        let (sin, cos) = self.theta.sin_cos();
        [
            [self.s * cos, self.s * sin, self.tx],
            [-self.s * sin, self.s * cos, self.ty],
        ]
    }
}

/// Axis-aligned rectangle `(x, y, w, h)` in continuous coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn to_quad(&self) -> Quad {
        Quad([
            (self.x, self.y),
            (self.x + self.w, self.y),
            (self.x + self.w, self.y + self.h),
            (self.x, self.y + self.h),
        ])
    }

    pub fn iou(&self, other: &Rect) -> f64 {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = (self.x + self.w).min(other.x + other.w);
        let y1 = (self.y + self.h).min(other.y + other.h);
        let inter = (x1 - x0).max(0.0) * (y1 - y0).max(0.0);
        let union = self.area() + other.area() - inter;
        if union > 0.0 {
            inter / union
        } else {
            0.0
        }
    }
}

/// Four corners, in order: top-left, top-right, bottom-right, bottom-left
/// of the (possibly rotated) object frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quad(pub [(f64, f64); 4]);

impl Quad {
    pub fn corners(&self) -> &[(f64, f64); 4] {
        &self.0
    }

    pub fn center(&self) -> (f64, f64) {
        let (sx, sy) = self
            .0
            .iter()
            .fold((0.0, 0.0), |(ax, ay), (x, y)| (ax + x, ay + y));
        (sx / 4.0, sy / 4.0)
    }

    pub fn bounding_rect(&self) -> Rect {
        let xs = self.0.iter().map(|p| p.0);
        let ys = self.0.iter().map(|p| p.1);
        let x0 = xs.clone().fold(f64::INFINITY, f64::min);
        let x1 = xs.fold(f64::NEG_INFINITY, f64::max);
        let y0 = ys.clone().fold(f64::INFINITY, f64::min);
        let y1 = ys.fold(f64::NEG_INFINITY, f64::max);
        Rect::new(x0, y0, x1 - x0, y1 - y0)
    }

    /// Signed shoelace area (positive for clockwise-on-screen order).
    pub fn signed_area(&self) -> f64 {
        polygon_signed_area(&self.0)
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.iter().flat_map(|&(x, y)| [x, y]).collect()
    }

    pub fn from_slice(v: &[f64]) -> Option<Quad> {
        if v.len() != 8 {
            return None;
        }
        Some(Quad([(v[0], v[1]), (v[2], v[3]), (v[4], v[5]), (v[6], v[7])]))
    }
}

pub(crate) fn polygon_signed_area(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len();
    let mut acc = 0.0;
    for i in 0..n {
        let (x0, y0) = pts[i];
        let (x1, y1) = pts[(i + 1) % n];
        acc += x0 * y1 - x1 * y0;
    }
    acc / 2.0
}
