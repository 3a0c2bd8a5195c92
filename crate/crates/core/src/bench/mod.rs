//! Sequences, synthetic benchmarks and evaluation metrics.

pub mod metrics;
pub mod run;
pub mod sequence;
pub mod synth;

pub use metrics::{evaluate, quad_iou, FrameBox, MetricCurves};
pub use run::{run_frames, run_sequence, run_sequences, RunOptions, RunResult};
pub use sequence::{load_sequence, GroundTruth, Sequence};
pub use synth::{parse_script, synth_sequence, MotionStep, SynthSequence};
