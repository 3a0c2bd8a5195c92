//! Block coordinate descent over translation and scale-rotation.
//!
//! The joint score of a candidate state `τ` is
//! `η·f_t + (1-η)·f_ρ + g(τ, τ_prev)`, with `g` a motion prior that decays
//! with the bandwidth-normalized distance to the previous state. Each sweep
//! maximizes over translation with `(θ, s)` fixed, then over `(θ, s)` at the
//! new translation.

use crate::error::{Error, Result};
use crate::geometry::rotate;
use crate::logpolar::{peak_to_scale_rotation, LogPolarConfig};
use crate::spectral::{signed_shift, ResponseMap};

pub use crate::geometry::SimilarityState;

/// Per-DoF normalizers of the motion prior. Translation bandwidths are
/// fractions of the current target width and height.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PriorBandwidths {
    pub tx_rel: f64,
    pub ty_rel: f64,
    pub theta: f64,
    pub log_s: f64,
}

impl PriorBandwidths {
    /// Absolute bandwidths `[tx px, ty px, θ rad, ln s]` for a target of
    /// `target` pixels.
    pub fn resolve(&self, target: (f64, f64)) -> [f64; 4] {
        [
            self.tx_rel * target.0,
            self.ty_rel * target.1,
            self.theta,
            self.log_s,
        ]
    }
}

impl Default for PriorBandwidths {
    fn default() -> Self {
        Self {
            tx_rel: 10.0,
            ty_rel: 10.0,
            theta: 2.0 * std::f64::consts::PI,
            log_s: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    pub eta: f64,
    pub max_iters: usize,
    pub score_tol: f64,
    pub bandwidths: PriorBandwidths,
    /// Bounds on the scale change relative to the previous frame.
    pub scale_clamp: (f64, f64),
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eta: 0.15,
            max_iters: 5,
            score_tol: 1e-4,
            bandwidths: PriorBandwidths::default(),
            scale_clamp: (0.6, 1.6),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::invalid("eta", "must be in [0, 1]"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters", "must be at least 1"));
        }
        if !(self.score_tol >= 0.0) {
            return Err(Error::invalid("score_tol", "must be non-negative"));
        }
        let b = &self.bandwidths;
        if [b.tx_rel, b.ty_rel, b.theta, b.log_s]
            .iter()
            .any(|v| !(*v > 0.0) || !v.is_finite())
        {
            return Err(Error::invalid("prior bandwidths", "must be positive"));
        }
        let (lo, hi) = self.scale_clamp;
        if !(lo > 0.0 && lo <= 1.0 && hi >= 1.0 && hi.is_finite()) {
            return Err(Error::invalid("scale_clamp", "must satisfy 0 < lo <= 1 <= hi"));
        }
        Ok(())
    }
}

/// The three terms of the joint score and their combination.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct ScoreBreakdown {
    pub ft: f64,
    pub frho: f64,
    pub g: f64,
    pub total: f64,
}

impl ScoreBreakdown {
    pub fn new(eta: f64, ft: f64, frho: f64, g: f64) -> Self {
        Self {
            ft,
            frho,
            g,
            total: eta * ft + (1.0 - eta) * frho + g,
        }
    }
}

/// `g = exp(-‖Δτ / bandwidth‖₂)` with `Δθ` wrapped and `Δs` in log space.
pub fn motion_prior(tau: &SimilarityState, prev: &SimilarityState, bandwidths: &[f64; 4]) -> f64 {
    let d = [
        (tau.tx - prev.tx) / bandwidths[0],
        (tau.ty - prev.ty) / bandwidths[1],
        crate::geometry::wrap_angle(tau.theta - prev.theta) / bandwidths[2],
        (tau.s / prev.s).ln() / bandwidths[3],
    ];
    (-d.iter().map(|v| v * v).sum::<f64>().sqrt()).exp()
}

/// Translation scores over a grid of displacements from the sampling state.
#[derive(Debug, Clone)]
pub struct TranslationResponse {
    /// Wrapped layout: index `(0, 0)` is zero displacement.
    pub map: ResponseMap,
    /// Frame pixels spanned by one response cell.
    pub frame_px_per_cell: f64,
}

/// Phase-correlation scores over log-polar shifts.
#[derive(Debug, Clone)]
pub struct ScaleRotationResponse {
    pub map: ResponseMap,
    pub lp: LogPolarConfig,
    /// Log-polar pixels per response cell.
    pub cell_size: usize,
}

/// Everything the solver needs from the current frame and the models.
pub trait FrameContext {
    /// Response of the search patch sampled at `at`.
    fn translation_response(&self, at: &SimilarityState) -> Result<TranslationResponse>;
    /// Response of the log-polar patch sampled at `at`.
    fn scale_rotation_response(&self, at: &SimilarityState) -> Result<ScaleRotationResponse>;
    /// Target size in frame pixels at `state`, for the prior bandwidths.
    fn target_size(&self, state: &SimilarityState) -> (f64, f64);
}

/// Argmax of `weight·response + g(candidate)` over all cells, followed by
/// centroid refinement on the response around the winning cell.
fn prior_argmax(
    map: &ResponseMap,
    weight: f64,
    candidate: impl Fn(f64, f64) -> SimilarityState,
    prior: impl Fn(&SimilarityState) -> f64,
) -> (f64, f64, f64) {
    let (h, w) = map.dims();
    let mut best = (0usize, 0usize, f64::NEG_INFINITY);
    for r in 0..h {
        let dy = signed_shift(r, h) as f64;
        for c in 0..w {
            let dx = signed_shift(c, w) as f64;
            let v = weight * map.grid.get(r, c) + prior(&candidate(dy, dx));
            if v > best.2 {
                best = (r, c, v);
            }
        }
    }
    let (dy, dx) = map.refine(best.0, best.1);
    (dy, dx, map.grid.get(best.0, best.1))
}

/// Best translation with `(θ, s)` fixed at `at`. Returns the updated state
/// and the raw response at the chosen cell.
pub fn solve_translation(
    ctx: &dyn FrameContext,
    at: &SimilarityState,
    prev: &SimilarityState,
    cfg: &SolverConfig,
) -> Result<(SimilarityState, f64)> {
    let resp = ctx.translation_response(at)?;
    let bw = cfg.bandwidths.resolve(ctx.target_size(prev));
    let step = resp.frame_px_per_cell;
    let moved = |dy: f64, dx: f64| {
        let (ox, oy) = rotate(at.theta, (dx * step, dy * step));
        SimilarityState {
            tx: at.tx + ox,
            ty: at.ty + oy,
            ..*at
        }
    };
    let (dy, dx, ft) = prior_argmax(&resp.map, cfg.eta, moved, |c| motion_prior(c, prev, &bw));
    Ok((moved(dy, dx), ft))
}

/// Best `(θ, s)` at the translation of `at`, composed onto its orientation
/// and scale. The scale change relative to `prev` is clamped.
pub fn solve_scale_rotation(
    ctx: &dyn FrameContext,
    at: &SimilarityState,
    prev: &SimilarityState,
    cfg: &SolverConfig,
) -> Result<(SimilarityState, f64)> {
    let resp = ctx.scale_rotation_response(at)?;
    let bw = cfg.bandwidths.resolve(ctx.target_size(prev));
    let cs = resp.cell_size as f64;
    let (lo, hi) = cfg.scale_clamp;
    let lp = resp.lp;
    let turned = |dy: f64, dx: f64| {
        let rel = peak_to_scale_rotation(dy * cs, dx * cs, &lp);
        let s = (at.s * rel.s).clamp(prev.s * lo, prev.s * hi);
        SimilarityState::new(at.tx, at.ty, at.theta + rel.theta, s)
    };
    let (dy, dx, frho) = prior_argmax(&resp.map, 1.0 - cfg.eta, turned, |c| motion_prior(c, prev, &bw));
    Ok((turned(dy, dx), frho))
}

/// Result of one frame's optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct BcdOutcome {
    pub state: SimilarityState,
    pub score: ScoreBreakdown,
    /// Sweeps run, including a final non-improving one.
    pub iters: usize,
    /// Total score of every accepted sweep, in order.
    pub accepted: Vec<f64>,
}

/// Alternates translation and scale-rotation sweeps from `prev` until the
/// total gains less than `score_tol` or `max_iters` sweeps ran. Returns the
/// best iterate seen.
pub fn run_bcd(ctx: &dyn FrameContext, prev: &SimilarityState, cfg: &SolverConfig) -> Result<BcdOutcome> {
    cfg.validate()?;
    let bw = cfg.bandwidths.resolve(ctx.target_size(prev));
    let mut cur = *prev;
    let mut best: Option<(SimilarityState, ScoreBreakdown)> = None;
    let mut accepted = Vec::new();
    let mut iters = 0;
    while iters < cfg.max_iters {
        iters += 1;
        let (moved, ft) = solve_translation(ctx, &cur, prev, cfg)?;
        let (next, frho) = solve_scale_rotation(ctx, &moved, prev, cfg)?;
        let score = ScoreBreakdown::new(cfg.eta, ft, frho, motion_prior(&next, prev, &bw));
        let gain = match &best {
            None => f64::INFINITY,
            Some((_, b)) => score.total - b.total,
        };
        if gain > 0.0 {
            best = Some((next, score));
            accepted.push(score.total);
            cur = next;
        }
        if gain < cfg.score_tol {
            break;
        }
    }
    let (state, score) = best.expect("at least one sweep runs");
    Ok(BcdOutcome {
        state,
        score,
        iters,
        accepted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logpolar::scale_rotation_to_shift;
    use crate::logpolar::ScaleRotation;
    use crate::spectral::RealGrid;

    /// Synthetic context with Gaussian response blobs centered on the
    /// displacement from the sampling state to a hidden true state.
    struct Blobs {
        truth: Vec<(SimilarityState, f64)>,
        cell_px: f64,
        lp: LogPolarConfig,
        width: f64,
    }

    impl Blobs {
        fn single(truth: SimilarityState) -> Self {
            Self {
                truth: vec![(truth, 1.0)],
                cell_px: 4.0,
                lp: LogPolarConfig::for_patch(128, 128),
                width: 0.7,
            }
        }

        fn blob(h: usize, w: usize, centers: &[(f64, f64, f64)], width: f64) -> ResponseMap {
            ResponseMap::new(RealGrid::from_fn(h, w, |r, c| {
                let y = signed_shift(r, h) as f64;
                let x = signed_shift(c, w) as f64;
                centers
                    .iter()
                    .map(|(cy, cx, a)| {
                        a * (-((y - cy).powi(2) + (x - cx).powi(2)) / (2.0 * width * width)).exp()
                    })
                    .fold(0.0, f64::max)
            }))
        }
    }

    impl FrameContext for Blobs {
        fn translation_response(&self, at: &SimilarityState) -> Result<TranslationResponse> {
            let centers: Vec<_> = self
                .truth
                .iter()
                .map(|(t, a)| {
                    let (dx, dy) = rotate(-at.theta, (t.tx - at.tx, t.ty - at.ty));
                    (dy / self.cell_px, dx / self.cell_px, *a)
                })
                .collect();
            Ok(TranslationResponse {
                map: Self::blob(32, 32, &centers, self.width),
                frame_px_per_cell: self.cell_px,
            })
        }

        fn scale_rotation_response(&self, at: &SimilarityState) -> Result<ScaleRotationResponse> {
            // Scale-rotation evidence degrades with translation error.
            let centers: Vec<_> = self
                .truth
                .iter()
                .map(|(t, a)| {
                    let rel = ScaleRotation {
                        s: t.s / at.s,
                        theta: crate::geometry::wrap_angle(t.theta - at.theta),
                    };
                    let (r, c) = scale_rotation_to_shift(rel, &self.lp);
                    let miss = ((t.tx - at.tx).powi(2) + (t.ty - at.ty).powi(2)).sqrt();
                    (r / 4.0, c / 4.0, a * (-miss / 8.0).exp())
                })
                .collect();
            Ok(ScaleRotationResponse {
                map: Self::blob(32, 32, &centers, self.width),
                lp: self.lp,
                cell_size: 4,
            })
        }

        fn target_size(&self, state: &SimilarityState) -> (f64, f64) {
            (40.0 * state.s, 40.0 * state.s)
        }
    }

    fn origin() -> SimilarityState {
        SimilarityState::new(100.0, 100.0, 0.0, 1.0)
    }

    #[test]
    fn prior_values() {
        let bw = [10.0, 20.0, 0.5, 0.2];
        let p = origin();
        assert_eq!(motion_prior(&p, &p, &bw), 1.0);
        let moved = SimilarityState { tx: 110.0, ..p };
        assert!((motion_prior(&moved, &p, &bw) - (-1.0f64).exp()).abs() < 1e-12);
        let mut last = 1.0;
        for k in 1..20 {
            let q = SimilarityState::new(100.0, 100.0, 0.05 * k as f64, 1.0);
            let g = motion_prior(&q, &p, &bw);
            assert!(g < last);
            last = g;
        }
        let mut last = 1.0;
        for k in 1..20 {
            let q = SimilarityState {
                s: 1.0 + 0.03 * k as f64,
                ..p
            };
            let g = motion_prior(&q, &p, &bw);
            assert!(g < last);
            last = g;
        }
    }

    #[test]
    fn breakdown_total() {
        let b = ScoreBreakdown::new(0.15, 0.7, 0.4, 0.9);
        assert!((b.total - (0.15 * 0.7 + 0.85 * 0.4 + 0.9)).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        for bad in [
            SolverConfig {
                eta: 1.5,
                ..Default::default()
            },
            SolverConfig {
                max_iters: 0,
                ..Default::default()
            },
            SolverConfig {
                scale_clamp: (1.2, 1.6),
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
        let mut c = SolverConfig::default();
        c.bandwidths.theta = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn static_target_stays_put() {
        let ctx = Blobs::single(origin());
        let out = run_bcd(&ctx, &origin(), &SolverConfig::default()).unwrap();
        assert!((out.state.tx - 100.0).abs() < 0.5 && (out.state.ty - 100.0).abs() < 0.5);
        assert!(out.state.theta.abs() < 1e-3 && (out.state.s - 1.0).abs() < 1e-3);
    }

    #[test]
    fn pure_shift_converges_in_one_sweep() {
        let truth = SimilarityState::new(108.0, 100.0, 0.0, 1.0);
        let ctx = Blobs::single(truth);
        let out = run_bcd(&ctx, &origin(), &SolverConfig::default()).unwrap();
        assert!((out.state.tx - 108.0).abs() < 1.0);
        assert_eq!(out.accepted.len(), 1);
        assert!(out.iters <= 2);
    }

    #[test]
    fn combined_motion_beats_single_sweep() {
        let truth = SimilarityState::new(110.0, 100.0, 15f64.to_radians(), 1.1);
        let ctx = Blobs::single(truth);
        let err = |s: &SimilarityState| {
            (
                ((s.tx - truth.tx).powi(2) + (s.ty - truth.ty).powi(2)).sqrt(),
                (s.theta - truth.theta).abs().to_degrees(),
                (s.s / truth.s - 1.0).abs(),
            )
        };
        let full = run_bcd(&ctx, &origin(), &SolverConfig::default()).unwrap();
        let once = run_bcd(
            &ctx,
            &origin(),
            &SolverConfig {
                max_iters: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let (et, er, es) = err(&full.state);
        assert!(et < 1.0 && er < 3.0 && es < 0.05, "{et} {er} {es}");
        assert!(full.score.total >= once.score.total);
        let (ot, or, os) = err(&once.state);
        assert!(et <= ot + 1e-9 && er <= or + 1e-9 && es <= os + 1e-9);
        assert_eq!(once.iters, 1);
    }

    #[test]
    fn accepted_scores_never_decrease() {
        for (k, truth) in [
            SimilarityState::new(112.0, 93.0, 0.3, 1.15),
            SimilarityState::new(95.0, 104.0, -0.4, 0.85),
            SimilarityState::new(100.0, 100.0, 0.0, 1.0),
        ]
        .into_iter()
        .enumerate()
        {
            let ctx = Blobs::single(truth);
            let out = run_bcd(&ctx, &origin(), &SolverConfig::default()).unwrap();
            assert!(!out.accepted.is_empty());
            assert!(out.accepted.windows(2).all(|w| w[1] >= w[0]), "case {k}");
            assert_eq!(*out.accepted.last().unwrap(), out.score.total);
            let b = out.score;
            assert!((b.total - (0.15 * b.ft + 0.85 * b.frho + b.g)).abs() < 1e-9);
        }
    }

    #[test]
    fn prior_breaks_twin_tie_toward_previous_state() {
        let near = SimilarityState::new(104.0, 100.0, 0.0, 1.0);
        let far = SimilarityState::new(84.0, 100.0, 0.0, 1.0);
        let ctx = Blobs {
            truth: vec![(near, 1.0), (far, 1.0)],
            ..Blobs::single(near)
        };
        let (st, _) = solve_translation(&ctx, &origin(), &origin(), &SolverConfig::default()).unwrap();
        assert!((st.tx - 104.0).abs() < 1.0, "{}", st.tx);
    }

    #[test]
    fn tight_prior_on_half_turn_is_deterministic() {
        let truth = SimilarityState::new(100.0, 100.0, 170f64.to_radians(), 1.0);
        let ctx = Blobs::single(truth);
        let mut cfg = SolverConfig::default();
        cfg.bandwidths.theta = 0.05;
        let a = run_bcd(&ctx, &origin(), &cfg).unwrap();
        let b = run_bcd(&ctx, &origin(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scale_change_is_clamped() {
        let truth = SimilarityState::new(100.0, 100.0, 0.0, 3.0);
        let ctx = Blobs::single(truth);
        let cfg = SolverConfig {
            scale_clamp: (0.8, 1.25),
            ..Default::default()
        };
        let out = run_bcd(&ctx, &origin(), &cfg).unwrap();
        assert!(out.state.s <= 1.25 + 1e-12);
    }
}
