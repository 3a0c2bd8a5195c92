mod common;

use ldes::bench::{
    load_sequence, run_frames, run_sequence, synth_sequence, GroundTruth, RunOptions, RunResult,
};
use ldes::imgproc::Frame;
use ldes::{SimilarityState, Tracker, TrackerConfig};

use common::{astronaut, wobble, FACE, PATCH};

fn drift(a: &SimilarityState, b: &SimilarityState) -> (f64, f64, f64) {
    (
        ((a.tx - b.tx).powi(2) + (a.ty - b.ty).powi(2)).sqrt(),
        ldes::geometry::wrap_angle(a.theta - b.theta).abs().to_degrees(),
        (a.s / b.s - 1.0).abs(),
    )
}

fn frozen() -> TrackerConfig {
    TrackerConfig {
        lambda_phi: 0.0,
        lambda_alpha: 0.0,
        lambda_w: 0.0,
        color_learn_rate: 0.0,
        ..TrackerConfig::default()
    }
}

#[test]
fn static_scene_drift_stays_small() {
    let img = astronaut();
    let mut t = Tracker::init(TrackerConfig::default(), &img, PATCH).unwrap();
    let start = *t.state();
    for _ in 0..100 {
        let st = t.track(&img).unwrap().state;
        let (px, deg, rel) = drift(&st, &start);
        assert!(
            px < 0.2 && deg < 0.5 && rel < 0.01,
            "drift {px:.3} px, {deg:.3} deg, {rel:.4}"
        );
    }
}

#[test]
fn zero_rates_freeze_every_model() {
    let img = astronaut();
    let mut t = Tracker::init(frozen(), &img, PATCH).unwrap();
    let start = *t.state();
    let before = t.track_state().clone();
    for _ in 0..100 {
        let st = t.track(&img).unwrap().state;
        let (px, deg, rel) = drift(&st, &start);
        assert!(
            px < 0.2 && deg < 0.5 && rel < 0.01,
            "drift {px:.3} px, {deg:.3} deg, {rel:.4}"
        );
    }
    let after = t.track_state();
    assert_eq!(after.frame_index(), before.frame_index() + 100);
    assert_eq!(
        after.translation_model().alpha_hat(),
        before.translation_model().alpha_hat()
    );
    assert_eq!(
        after.translation_model().psi_hat(),
        before.translation_model().psi_hat()
    );
    assert_eq!(
        after.scale_rotation_model().upsilon(),
        before.scale_rotation_model().upsilon()
    );
    let (a, b) = (after.color_model().unwrap(), before.color_model().unwrap());
    assert_eq!((a.fg(), a.bg()), (b.fg(), b.bg()));
}

#[test]
fn bcd_is_at_least_as_good_as_one_sweep() {
    let img = astronaut();
    let seq = synth_sequence(&img, FACE, &wobble(100, (4.0, 2.0, 1.02), 0.0)).unwrap();
    let gt: Vec<GroundTruth> = seq.ground_truth.iter().map(|q| GroundTruth::Quad(*q)).collect();
    let miou = |iters| {
        run_frames(
            "wobble",
            &TrackerConfig::default().with_max_iters(iters),
            100,
            |i| Ok(seq.frames[i].clone()),
            seq.init_rect(),
            Some(&gt),
            &RunOptions::default(),
        )
        .unwrap()
        .metrics
        .unwrap()
        .mean_iou
    };
    let (bcd, single) = (miou(5), miou(1));
    assert!(bcd >= 0.7, "{bcd}");
    assert!(single <= bcd, "{single} > {bcd}");
}

#[test]
fn grayscale_sequences_track_without_color() {
    let gray = Frame::from_grid(&astronaut().to_gray());
    let seq = synth_sequence(&gray, PATCH, &wobble(40, (3.0, 1.5, 1.01), 0.4)).unwrap();
    let gt: Vec<GroundTruth> = seq.ground_truth.iter().map(|q| GroundTruth::Quad(*q)).collect();
    let r = run_frames(
        "gray",
        &TrackerConfig::default(),
        40,
        |i| Ok(seq.frames[i].clone()),
        seq.init_rect(),
        Some(&gt),
        &RunOptions::default(),
    )
    .unwrap();
    assert!(r.metrics.unwrap().mean_iou >= 0.7);
}

#[test]
fn sequences_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let seq = synth_sequence(&astronaut(), PATCH, &wobble(12, (2.0, 1.0, 1.01), 0.0)).unwrap();
    seq.write(dir.path()).unwrap();
    let loaded = load_sequence(dir.path()).unwrap();
    assert_eq!(loaded.frames.len(), 12);

    let dump = dir.path().join("dump");
    let opts = RunOptions {
        axis_aligned: false,
        dump_frames: Some(dump.clone()),
    };
    let r = run_sequence(&loaded, &TrackerConfig::default(), &opts).unwrap();
    assert!(r.metrics.as_ref().unwrap().mean_iou >= 0.7);
    assert_eq!(std::fs::read_dir(&dump).unwrap().count(), 12);

    let path = dir.path().join("results.json");
    std::fs::write(&path, r.to_json()).unwrap();
    let back = RunResult::load(&path).unwrap();
    assert_eq!(back.frames, r.frames);
    let again = ldes::bench::run::evaluate_results(&back, &loaded).unwrap();
    assert_eq!(Some(again), r.metrics);
}

#[test]
fn axis_aligned_output_ignores_rotation() {
    let seq = synth_sequence(&astronaut(), PATCH, &wobble(10, (0.0, 3.0, 1.0), 0.0)).unwrap();
    let opts = RunOptions {
        axis_aligned: true,
        dump_frames: None,
    };
    let r = run_frames(
        "aa",
        &TrackerConfig::default(),
        10,
        |i| Ok(seq.frames[i].clone()),
        seq.init_rect(),
        None,
        &opts,
    )
    .unwrap();
    for f in &r.frames {
        let b = f.frame_box().unwrap();
        assert_eq!(b.quad, b.rect.to_quad());
        assert!(f.theta.abs() > 0.0 || f.frame == 0);
    }
}
