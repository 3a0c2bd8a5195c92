//! Synthetic sequences: a seed image moved by scripted similarity motion,
//! with exact quad ground truth.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{rotate, Quad, Rect, SimilarityState};
use crate::imgproc::{save_pnm, warp_similarity, Frame};

use super::sequence::format_quads;

/// Motion between consecutive frames: a frame-space translation in pixels,
/// a rotation in radians and a multiplicative scale change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionStep {
    pub dtx: f64,
    pub dty: f64,
    pub dtheta: f64,
    pub ds: f64,
}

impl MotionStep {
    pub const IDENTITY: MotionStep = MotionStep {
        dtx: 0.0,
        dty: 0.0,
        dtheta: 0.0,
        ds: 1.0,
    };

    pub fn new(dtx: f64, dty: f64, dtheta: f64, ds: f64) -> Self {
        Self { dtx, dty, dtheta, ds }
    }
}

const SCALE_RANGE: (f64, f64) = (0.125, 8.0);

/// Parses a script: one `dtx dty dtheta_deg dscale` row per frame,
/// separated by whitespace or commas; `#` starts a comment.
pub fn parse_script(text: &str, path: &Path) -> Result<Vec<MotionStep>> {
    let mut steps = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let nums = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(path, i + 1, format!("not a number: {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if nums.len() != 4 {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected 4 numbers, got {}", nums.len()),
            ));
        }
        if nums[3] <= 0.0 {
            return Err(Error::parse(path, i + 1, "scale change must be positive"));
        }
        steps.push(MotionStep::new(nums[0], nums[1], nums[2].to_radians(), nums[3]));
    }
    if steps.is_empty() {
        return Err(Error::parse(path, 0, "empty script"));
    }
    Ok(steps)
}

/// Frame states: frame `k` is the initial placement advanced by steps
/// `0..=k`.
pub fn compose_states(init: SimilarityState, steps: &[MotionStep]) -> Vec<SimilarityState> {
    let mut cur = init;
    steps
        .iter()
        .map(|m| {
            cur = SimilarityState::new(cur.tx + m.dtx, cur.ty + m.dty, cur.theta + m.dtheta, cur.s * m.ds);
            cur
        })
        .collect()
}

/// A rendered synthetic sequence.
#[derive(Debug, Clone)]
pub struct SynthSequence {
    pub frames: Vec<Frame>,
    pub states: Vec<SimilarityState>,
    pub ground_truth: Vec<Quad>,
    /// Target size `(w, h)` at scale 1.
    pub target: (f64, f64),
}

impl SynthSequence {
    /// Box to initialize a tracker with.
    pub fn init_rect(&self) -> Rect {
        self.ground_truth[0].bounding_rect()
    }

    /// Writes `img/NNNN.ppm` (or `.pgm`) frames and a 1-based quad
    /// `groundtruth.txt`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let img = dir.join("img");
        std::fs::create_dir_all(&img).map_err(|e| Error::io(&img, e))?;
        for (i, f) in self.frames.iter().enumerate() {
            let ext = if f.channels() == 1 { "pgm" } else { "ppm" };
            save_pnm(f, &img.join(format!("{:04}.{ext}", i + 1)))?;
        }
        let gt = dir.join("groundtruth.txt");
        std::fs::write(&gt, format_quads(&self.ground_truth)).map_err(|e| Error::io(&gt, e))
    }
}

/// Renders `steps.len()` frames of the seed scene. `target` is the initial
/// upright box in seed coordinates; frames keep the seed's size.
pub fn synth_sequence(seed: &Frame, target: Rect, steps: &[MotionStep]) -> Result<SynthSequence> {
    if !(target.w > 0.0 && target.h > 0.0) {
        return Err(Error::invalid("target", "empty box"));
    }
    let (h, w) = seed.dims();
    let (t0x, t0y) = target.center();
    let init = SimilarityState::new(t0x, t0y, 0.0, 1.0);
    let states = compose_states(init, steps);
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    let mut frames = Vec::with_capacity(states.len());
    let mut ground_truth = Vec::with_capacity(states.len());
    for (k, st) in states.iter().enumerate() {
        if !(SCALE_RANGE.0..=SCALE_RANGE.1).contains(&st.s) {
            return Err(Error::invalid(
                "script",
                format!("cumulative scale {:.3} at frame {k} is outside [1/8, 8]", st.s),
            ));
        }
        // Frame point p shows seed point t0 + R(-θ)(p - t)/s.
        let (ox, oy) = rotate(-st.theta, (cx - st.tx, cy - st.ty));
        let warp = SimilarityState::new(t0x + ox / st.s, t0y + oy / st.s, -st.theta, 1.0 / st.s);
        frames.push(warp_similarity(seed, &warp, h, w)?.image);
        let (hw, hh) = (target.w / 2.0, target.h / 2.0);
        ground_truth.push(Quad([
            st.apply((-hw, -hh)),
            st.apply((hw, -hh)),
            st.apply((hw, hh)),
            st.apply((-hw, hh)),
        ]));
    }
    Ok(SynthSequence {
        frames,
        states,
        ground_truth,
        target: (target.w, target.h),
    })
}
