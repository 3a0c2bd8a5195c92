//! Running a tracker over sequences and the results document.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Quad, Rect};
use crate::imgproc::{draw_polygon, load_frame, save_pnm, Frame};
use crate::solver::ScoreBreakdown;
use crate::tracker::{BoxMode, Tracker, TrackerConfig};

use super::metrics::{evaluate, FrameBox, MetricCurves};
use super::sequence::{GroundTruth, Sequence};

/// Per-frame record. Coordinates are 0-based frame pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: usize,
    pub tx: f64,
    pub ty: f64,
    pub theta: f64,
    pub s: f64,
    pub score: ScoreBreakdown,
    pub iters: usize,
    /// Rotated box corners `x1,y1,..,x4,y4`.
    pub quad: Vec<f64>,
    /// Axis-aligned box `x,y,w,h`.
    pub rect: [f64; 4],
}

impl FrameRecord {
    pub fn frame_box(&self) -> Result<FrameBox> {
        let quad =
            Quad::from_slice(&self.quad).ok_or_else(|| Error::invalid("quad", "expected 8 coordinates"))?;
        let [x, y, w, h] = self.rect;
        Ok(FrameBox {
            quad,
            rect: Rect::new(x, y, w, h),
        })
    }
}

/// One run over one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub sequence: String,
    pub config: TrackerConfig,
    /// Template size `(w, h)` in frame pixels.
    pub template: (f64, f64),
    pub frames: Vec<FrameRecord>,
    pub fps: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub metrics: Option<MetricCurves>,
}

impl RunResult {
    pub fn boxes(&self) -> Result<Vec<FrameBox>> {
        self.frames.iter().map(FrameRecord::frame_box).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("results serialize")
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }
}

/// Run options beyond the tracker config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Report axis-aligned boxes as the tracking output.
    pub axis_aligned: bool,
    /// Write annotated frames here.
    pub dump_frames: Option<PathBuf>,
}

fn record(
    frame: usize,
    tracker: &Tracker,
    score: ScoreBreakdown,
    iters: usize,
    opts: &RunOptions,
) -> FrameRecord {
    let st = *tracker.state();
    let rect = tracker.output_box(BoxMode::AxisAligned).bounding_rect();
    let quad = if opts.axis_aligned {
        rect.to_quad()
    } else {
        tracker.output_box(BoxMode::Rotated)
    };
    FrameRecord {
        frame,
        tx: st.tx,
        ty: st.ty,
        theta: st.theta,
        s: st.s,
        score,
        iters,
        quad: quad.to_vec(),
        rect: [rect.x, rect.y, rect.w, rect.h],
    }
}

fn dump(frame: &Frame, quad: &[f64], dir: &Path, index: usize) -> Result<()> {
    let mut f = frame.clone();
    let q = Quad::from_slice(quad).expect("8 coordinates");
    draw_polygon(&mut f, &q.0, [1.0, 0.0, 0.0]);
    save_pnm(&f, &dir.join(format!("{:04}.ppm", index + 1)))
}

/// Tracks frames supplied by `next_frame`, initializing on `init` in the
/// first frame. Metrics are attached when `gt` is given.
pub fn run_frames(
    name: &str,
    config: &TrackerConfig,
    n: usize,
    mut next_frame: impl FnMut(usize) -> Result<Frame>,
    init: Rect,
    gt: Option<&[GroundTruth]>,
    opts: &RunOptions,
) -> Result<RunResult> {
    if n == 0 {
        return Err(Error::invalid("sequence", "no frames"));
    }
    if let Some(dir) = &opts.dump_frames {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let first = next_frame(0)?;
    let start = Instant::now();
    let mut tracker = Tracker::init(config.clone(), &first, init)?;
    let mut frames = vec![record(0, &tracker, ScoreBreakdown::default(), 0, opts)];
    if let Some(dir) = &opts.dump_frames {
        dump(&first, &frames[0].quad, dir, 0)?;
    }
    let mut tracked = 0.0;
    for i in 1..n {
        let frame = next_frame(i)?;
        let t = Instant::now();
        let r = tracker.track(&frame)?;
        tracked += t.elapsed().as_secs_f64();
        frames.push(record(i, &tracker, r.score, r.iters, opts));
        if let Some(dir) = &opts.dump_frames {
            dump(&frame, &frames[i].quad, dir, i)?;
        }
    }
    let fps = if n > 1 && tracked > 0.0 {
        (n - 1) as f64 / tracked
    } else {
        1.0 / start.elapsed().as_secs_f64().max(1e-9)
    };
    let template = tracker.track_state().template_size();
    let mut result = RunResult {
        sequence: name.to_string(),
        config: config.clone(),
        template,
        frames,
        fps,
        metrics: None,
    };
    if let Some(gt) = gt {
        result.metrics = Some(evaluate(&result.boxes()?, gt)?);
    }
    Ok(result)
}

/// Tracks a sequence from disk, initialized on the first ground-truth box.
pub fn run_sequence(seq: &Sequence, config: &TrackerConfig, opts: &RunOptions) -> Result<RunResult> {
    let gt = seq.ground_truth.as_deref().ok_or_else(|| {
        Error::invalid(
            "sequence",
            format!("{} has no ground truth to initialize from", seq.name),
        )
    })?;
    run_frames(
        &seq.name,
        config,
        seq.frames.len(),
        |i| load_frame(&seq.frames[i]),
        gt[0].rect(),
        Some(gt),
        opts,
    )
}

/// Runs several sequences concurrently, one tracker per sequence. Frame
/// dumps, if requested, go to a per-sequence subdirectory.
pub fn run_sequences(seqs: &[Sequence], config: &TrackerConfig, opts: &RunOptions) -> Vec<Result<RunResult>> {
    crate::par::map_slice(seqs, |seq| {
        let opts = RunOptions {
            axis_aligned: opts.axis_aligned,
            dump_frames: opts.dump_frames.as_ref().map(|d| d.join(&seq.name)),
        };
        run_sequence(seq, config, &opts)
    })
}

/// Re-evaluates stored results against a sequence's ground truth.
pub fn evaluate_results(results: &RunResult, seq: &Sequence) -> Result<MetricCurves> {
    let gt = seq
        .ground_truth
        .as_deref()
        .ok_or_else(|| Error::invalid("sequence", format!("{} has no ground truth", seq.name)))?;
    evaluate(&results.boxes()?, gt)
}
