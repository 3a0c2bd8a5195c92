#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::Path;

use ldes::bench::MotionStep;
use ldes::imgproc::{load_frame, Frame};
use ldes::Rect;

pub fn astronaut() -> Frame {
    load_frame(&Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/astronaut_384.ppm")).unwrap()
}

/// Face of the astronaut in the 384x384 image.
pub const FACE: Rect = Rect {
    x: 132.0,
    y: 28.0,
    w: 72.0,
    h: 80.0,
};
/// Mission patch on the suit.
pub const PATCH: Rect = Rect {
    x: 98.0,
    y: 260.0,
    w: 60.0,
    h: 60.0,
};

/// Smooth periodic motion with per-frame amplitude `(px, deg, scale)`.
/// Row 0 is the identity; rotation is constant, negative when
/// `phase > 1`, so the cumulative total is large.
pub fn wobble(n: usize, amp: (f64, f64, f64), phase: f64) -> Vec<MotionStep> {
    let (t, r, s) = amp;
    let sign = if phase > 1.0 { -1.0 } else { 1.0 };
    let mut v = vec![MotionStep::IDENTITY];
    for k in 1..n {
        let k = k as f64;
        v.push(MotionStep::new(
            t * (2.0 * PI * k / 37.0 + phase).sin(),
            t * (2.0 * PI * k / 53.0 + 2.0 * phase).cos(),
            sign * r.to_radians(),
            s.powf((2.0 * PI * k / 40.0 + phase).sin()),
        ));
    }
    v
}

/// Unwraps a sequence of wrapped angles into a cumulative one.
pub fn unwrap_total(thetas: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = 0.0;
    let mut prev = 0.0;
    for t in thetas {
        acc += ldes::geometry::wrap_angle(t - prev);
        prev = t;
    }
    acc
}

pub fn percentile(v: &[f64], p: f64) -> f64 {
    let mut v = v.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[((v.len() - 1) as f64 * p).round() as usize]
}
