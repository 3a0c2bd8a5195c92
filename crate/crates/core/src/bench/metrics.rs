//! Precision, success and alignment curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{polygon_signed_area, Quad, Rect};

use super::sequence::GroundTruth;

/// Center-error and corner-error thresholds: 0..=50 px.
pub const PIXEL_THRESHOLDS: usize = 51;
/// IoU thresholds: 0, 0.05, .., 1.
pub const IOU_THRESHOLDS: usize = 21;
/// IoU at or above this counts as exact overlap.
const EXACT_IOU: f64 = 1.0 - 1e-9;

fn ccw(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut v = pts.to_vec();
    if polygon_signed_area(&v) < 0.0 {
        v.reverse();
    }
    v
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Intersection of convex polygons by Sutherland–Hodgman clipping.
pub fn clip_convex(subject: &[(f64, f64)], clip: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let clip = ccw(clip);
    let mut out = ccw(subject);
    for i in 0..clip.len() {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % clip.len()]);
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let p = input[j];
            let q = input[(j + 1) % input.len()];
            let (dp, dq) = (cross(a, b, p), cross(a, b, q));
            if dp >= 0.0 {
                out.push(p);
            }
            if (dp >= 0.0) != (dq >= 0.0) {
                let t = dp / (dp - dq);
                out.push((p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1)));
            }
        }
    }
    out
}

/// Intersection over union of two convex quads.
pub fn quad_iou(a: &Quad, b: &Quad) -> f64 {
    let inter = polygon_signed_area(&clip_convex(&a.0, &b.0)).abs();
    let union = a.signed_area().abs() + b.signed_area().abs() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// A tracker output for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameBox {
    pub quad: Quad,
    pub rect: Rect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCurves {
    pub precision: Vec<f64>,
    pub success: Vec<f64>,
    pub alignment: Vec<f64>,
    /// Mean of the success curve.
    pub auc: f64,
    /// Precision at 20 px.
    pub precision_20: f64,
    pub mean_iou: f64,
    pub mean_center_error: f64,
    pub mean_alignment_error: f64,
}

/// Fraction of values `<= t` for `t = 0..n-1`.
fn threshold_curve(errors: &[f64], n: usize) -> Vec<f64> {
    let len = errors.len() as f64;
    (0..n)
        .map(|t| errors.iter().filter(|&&e| e <= t as f64).count() as f64 / len)
        .collect()
}

/// Fraction of IoUs above each of `n` evenly spaced thresholds in `[0, 1]`.
/// At threshold 1 only exact overlaps count.
pub fn success_curve(ious: &[f64], n: usize) -> Vec<f64> {
    let len = ious.len() as f64;
    (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            let hits = if i == n - 1 {
                ious.iter().filter(|&&v| v >= EXACT_IOU).count()
            } else {
                ious.iter().filter(|&&v| v > t).count()
            };
            hits as f64 / len
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Per-frame overlap: rotated-polygon IoU against quad ground truth,
/// rectangle IoU against box ground truth.
pub fn frame_iou(r: &FrameBox, gt: &GroundTruth) -> f64 {
    match gt {
        GroundTruth::Quad(q) => quad_iou(&r.quad, q),
        GroundTruth::Rect(g) => r.rect.iou(g),
    }
}

/// Mean distance between corresponding corners.
pub fn alignment_error(r: &FrameBox, gt: &GroundTruth) -> f64 {
    let ours = match gt {
        GroundTruth::Quad(_) => r.quad,
        GroundTruth::Rect(_) => r.rect.to_quad(),
    };
    let theirs = gt.quad();
    ours.0.iter().zip(theirs.0).map(|(a, b)| dist(*a, b)).sum::<f64>() / 4.0
}

pub fn evaluate(results: &[FrameBox], gt: &[GroundTruth]) -> Result<MetricCurves> {
    if results.len() != gt.len() {
        return Err(Error::DimMismatch {
            expected: (gt.len(), 1),
            actual: (results.len(), 1),
        });
    }
    if results.is_empty() {
        return Err(Error::invalid("results", "no frames to evaluate"));
    }
    let centers: Vec<f64> = results
        .iter()
        .zip(gt)
        .map(|(r, g)| {
            let c = match g {
                GroundTruth::Quad(_) => r.quad.center(),
                GroundTruth::Rect(_) => r.rect.center(),
            };
            dist(c, g.center())
        })
        .collect();
    let ious: Vec<f64> = results.iter().zip(gt).map(|(r, g)| frame_iou(r, g)).collect();
    let align: Vec<f64> = results
        .iter()
        .zip(gt)
        .map(|(r, g)| alignment_error(r, g))
        .collect();
    let precision = threshold_curve(&centers, PIXEL_THRESHOLDS);
    let success = success_curve(&ious, IOU_THRESHOLDS);
    let alignment = threshold_curve(&align, PIXEL_THRESHOLDS);
    Ok(MetricCurves {
        auc: mean(&success),
        precision_20: precision[20],
        mean_iou: mean(&ious),
        mean_center_error: mean(&centers),
        mean_alignment_error: mean(&align),
        precision,
        success,
        alignment,
    })
}

/// Curves as CSV: `threshold,value` blocks per curve.
pub fn curves_csv(m: &MetricCurves) -> String {
    let mut s = String::from("curve,threshold,value\n");
    for (t, v) in m.precision.iter().enumerate() {
        s.push_str(&format!("precision,{t},{v}\n"));
    }
    for (i, v) in m.success.iter().enumerate() {
        s.push_str(&format!(
            "success,{:.2},{v}\n",
            i as f64 / (IOU_THRESHOLDS - 1) as f64
        ));
    }
    for (t, v) in m.alignment.iter().enumerate() {
        s.push_str(&format!("alignment,{t},{v}\n"));
    }
    s
}
