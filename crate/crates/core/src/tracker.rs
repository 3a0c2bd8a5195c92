//! Public tracking API.
//!
//! A target is described by an upright template of `template` pixels. A
//! state `(tx, ty, θ, s)` places that template in the frame: every sampled
//! patch is warped at the current rotation and scale, so the estimators
//! only ever see residual motion.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cf::{default_sigma, gaussian_target, TranslationModel};
use crate::error::{Error, Result};
use crate::features::{apply_cosine_window, extract_hog, ColorHistModel, FeatureMap};
use crate::geometry::{Quad, Rect, SimilarityState};
use crate::imgproc::{hann_window, warp_similarity, Frame, Patch};
use crate::logpolar::{log_polar_features, LogPolarConfig, LogPolarFeatureKind, ScaleRotationModel};
use crate::solver::{
    run_bcd, FrameContext, PriorBandwidths, ScaleRotationResponse, ScoreBreakdown, SolverConfig,
    TranslationResponse,
};
use crate::spectral::{signed_shift, RealGrid};

/// All hyper-parameters. Update rates of zero disable the corresponding
/// model update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub lambda1: f64,
    pub lambda_phi: f64,
    pub lambda_alpha: f64,
    pub lambda_w: f64,
    pub train_padding: f64,
    pub search_factor: f64,
    pub phase_corr_window: f64,
    pub cell_size: usize,
    /// Largest template area in pixels; bigger targets are downsampled.
    pub template_max_area: f64,
    /// Weight of the color score in the fused translation response.
    pub color_merge: f64,
    pub color_learn_rate: f64,
    pub lp_features: LogPolarFeatureKind,
    pub solver: SolverConfig,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            lambda1: 1e-4,
            lambda_phi: 0.01,
            lambda_alpha: 0.01,
            lambda_w: 0.015,
            train_padding: 2.2,
            search_factor: 1.5,
            phase_corr_window: 1.8,
            cell_size: 4,
            template_max_area: 150.0 * 150.0,
            color_merge: 0.3,
            color_learn_rate: 0.04,
            lp_features: LogPolarFeatureKind::Hog { cell_size: 4 },
            solver: SolverConfig::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &'static str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be in [0, 1], got {v}")))
            }
        };
        unit("lambda_phi", self.lambda_phi)?;
        unit("lambda_alpha", self.lambda_alpha)?;
        unit("lambda_w", self.lambda_w)?;
        unit("color_merge", self.color_merge)?;
        unit("color_learn_rate", self.color_learn_rate)?;
        if (self.lambda_phi == 0.0) != (self.lambda_alpha == 0.0) {
            return Err(Error::invalid(
                "lambda_phi/lambda_alpha",
                "must both be zero or both be positive",
            ));
        }
        if !(self.lambda1 > 0.0) {
            return Err(Error::invalid("lambda1", "must be positive"));
        }
        for (name, v) in [
            ("train_padding", self.train_padding),
            ("search_factor", self.search_factor),
            ("phase_corr_window", self.phase_corr_window),
        ] {
            if !(v > 1.0) || !v.is_finite() {
                return Err(Error::invalid(name, "must exceed 1"));
            }
        }
        if self.cell_size == 0 {
            return Err(Error::invalid("cell_size", "must be positive"));
        }
        if let LogPolarFeatureKind::Hog { cell_size: 0 } = self.lp_features {
            return Err(Error::invalid("lp_cell_size", "must be positive"));
        }
        if !(self.template_max_area >= 64.0) {
            return Err(Error::invalid("template_max_area", "must be at least 64"));
        }
        self.solver.validate()
    }

    /// Plain-text `key = value` form, one entry per line.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        let s = &self.solver;
        let (lp_kind, lp_cell) = match self.lp_features {
            LogPolarFeatureKind::Hog { cell_size } => ("hog", cell_size),
            LogPolarFeatureKind::Gray => ("gray", 1),
        };
        vec![
            ("eta", s.eta.to_string()),
            ("lambda1", self.lambda1.to_string()),
            ("lambda_phi", self.lambda_phi.to_string()),
            ("lambda_alpha", self.lambda_alpha.to_string()),
            ("lambda_w", self.lambda_w.to_string()),
            ("train_padding", self.train_padding.to_string()),
            ("search_factor", self.search_factor.to_string()),
            ("phase_corr_window", self.phase_corr_window.to_string()),
            ("cell_size", self.cell_size.to_string()),
            ("template_max_area", self.template_max_area.to_string()),
            ("color_merge", self.color_merge.to_string()),
            ("color_learn_rate", self.color_learn_rate.to_string()),
            ("lp_features", lp_kind.to_string()),
            ("lp_cell_size", lp_cell.to_string()),
            ("max_iters", s.max_iters.to_string()),
            ("score_tol", s.score_tol.to_string()),
            ("prior_tx", s.bandwidths.tx_rel.to_string()),
            ("prior_ty", s.bandwidths.ty_rel.to_string()),
            ("prior_theta", s.bandwidths.theta.to_string()),
            ("prior_log_s", s.bandwidths.log_s.to_string()),
            ("scale_min", s.scale_clamp.0.to_string()),
            ("scale_max", s.scale_clamp.1.to_string()),
        ]
    }

    /// Parses the `key = value` form. Blank lines and `#` comments are
    /// ignored; missing keys keep their defaults.
    pub fn from_kv(text: &str, path: &std::path::Path) -> Result<Self> {
        let mut c = Self::default();
        let mut lp_kind = "hog".to_string();
        let mut lp_cell = match c.lp_features {
            LogPolarFeatureKind::Hog { cell_size } => cell_size,
            LogPolarFeatureKind::Gray => 1,
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: String| Error::parse(path, i + 1, m);
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            let f = || {
                v.parse::<f64>()
                    .map_err(|_| err(format!("{k}: not a number: {v:?}")))
            };
            let u = || {
                v.parse::<usize>()
                    .map_err(|_| err(format!("{k}: not a count: {v:?}")))
            };
            let s = &mut c.solver;
            match k {
                "eta" => s.eta = f()?,
                "lambda1" => c.lambda1 = f()?,
                "lambda_phi" => c.lambda_phi = f()?,
                "lambda_alpha" => c.lambda_alpha = f()?,
                "lambda_w" => c.lambda_w = f()?,
                "train_padding" => c.train_padding = f()?,
                "search_factor" => c.search_factor = f()?,
                "phase_corr_window" => c.phase_corr_window = f()?,
                "cell_size" => c.cell_size = u()?,
                "template_max_area" => c.template_max_area = f()?,
                "color_merge" => c.color_merge = f()?,
                "color_learn_rate" => c.color_learn_rate = f()?,
                "lp_features" => match v {
                    "hog" | "gray" => lp_kind = v.to_string(),
                    _ => return Err(err(format!("lp_features must be hog or gray, got {v:?}"))),
                },
                "lp_cell_size" => lp_cell = u()?,
                "max_iters" => s.max_iters = u()?,
                "score_tol" => s.score_tol = f()?,
                "prior_tx" => s.bandwidths.tx_rel = f()?,
                "prior_ty" => s.bandwidths.ty_rel = f()?,
                "prior_theta" => s.bandwidths.theta = f()?,
                "prior_log_s" => s.bandwidths.log_s = f()?,
                "scale_min" => s.scale_clamp.0 = f()?,
                "scale_max" => s.scale_clamp.1 = f()?,
                _ => return Err(err(format!("unknown key {k:?}"))),
            }
        }
        c.lp_features = if lp_kind == "gray" {
            LogPolarFeatureKind::Gray
        } else {
            LogPolarFeatureKind::Hog { cell_size: lp_cell }
        };
        Ok(c)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv(&text, path)
    }

    /// Default configuration with a different sweep limit.
    pub fn with_max_iters(mut self, n: usize) -> Self {
        self.solver.max_iters = n;
        self
    }

    pub fn with_bandwidths(mut self, b: PriorBandwidths) -> Self {
        self.solver.bandwidths = b;
        self
    }
}

/// Output box flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxMode {
    Rotated,
    AxisAligned,
}

/// Cell counts rounded to an even number, at least four.
fn even_cells(px: f64, cell: usize) -> usize {
    let n = (px / cell as f64).round().max(4.0) as usize;
    n + n % 2
}

/// Patch sizes derived from the template at init.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Geometry {
    /// Template size in template pixels `(w, h)`.
    template: (f64, f64),
    /// Frame pixels per template pixel at `s = 1`.
    base_scale: f64,
    train_cells: (usize, usize),
    search_cells: (usize, usize),
    lp_side: usize,
}

impl Geometry {
    fn new(cfg: &TrackerConfig, w: f64, h: f64) -> Self {
        let base_scale = ((w * h) / cfg.template_max_area).sqrt().max(1.0);
        let (tw, th) = (w / base_scale, h / base_scale);
        let cs = cfg.cell_size;
        let train_cells = (
            even_cells(th * cfg.train_padding, cs),
            even_cells(tw * cfg.train_padding, cs),
        );
        let search_cells = (
            even_cells(train_cells.0 as f64 * cs as f64 * cfg.search_factor, cs).max(train_cells.0),
            even_cells(train_cells.1 as f64 * cs as f64 * cfg.search_factor, cs).max(train_cells.1),
        );
        let lp_cell = match cfg.lp_features {
            LogPolarFeatureKind::Hog { cell_size } => cell_size,
            LogPolarFeatureKind::Gray => 1,
        };
        let side = cfg.phase_corr_window * (tw * th).sqrt();
        let unit = 2 * lp_cell;
        let lp_side = ((side / unit as f64).round() as usize).max(16usize.div_ceil(unit)) * unit;
        Self {
            template: (tw, th),
            base_scale,
            train_cells,
            search_cells,
            lp_side: lp_side.max(16),
        }
    }

    fn sampling(&self, st: &SimilarityState) -> SimilarityState {
        SimilarityState::new(st.tx, st.ty, st.theta, st.s * self.base_scale)
    }

    fn lp_config(&self) -> LogPolarConfig {
        LogPolarConfig::for_patch(self.lp_side, self.lp_side)
    }
}

/// Models and geometry of one tracked target.
#[derive(Debug, Clone)]
pub struct TrackState {
    state: SimilarityState,
    geometry: Geometry,
    translation: TranslationModel,
    scale_rotation: ScaleRotationModel,
    color: Option<ColorHistModel>,
    train_window: RealGrid,
    search_window: RealGrid,
    frame_dims: (usize, usize),
    frame_index: usize,
}

impl TrackState {
    pub fn state(&self) -> &SimilarityState {
        &self.state
    }

    /// Template size `(w, h)` in frame pixels at `s = 1`.
    pub fn template_size(&self) -> (f64, f64) {
        let g = &self.geometry;
        (g.template.0 * g.base_scale, g.template.1 * g.base_scale)
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn translation_model(&self) -> &TranslationModel {
        &self.translation
    }

    pub fn scale_rotation_model(&self) -> &ScaleRotationModel {
        &self.scale_rotation
    }

    pub fn color_model(&self) -> Option<&ColorHistModel> {
        self.color.as_ref()
    }

    /// Train and search grid sizes in cells, `(rows, cols)`.
    pub fn grid_dims(&self) -> ((usize, usize), (usize, usize)) {
        (self.geometry.train_cells, self.geometry.search_cells)
    }

    pub fn output_box(&self, mode: BoxMode) -> Quad {
        output_box(&self.state, self.template_size(), mode)
    }
}

/// Box of a `template` sized target placed at `st`. Corners run top-left,
/// top-right, bottom-right, bottom-left in template orientation.
pub fn output_box(st: &SimilarityState, template: (f64, f64), mode: BoxMode) -> Quad {
    let (hw, hh) = (template.0 / 2.0, template.1 / 2.0);
    match mode {
        BoxMode::Rotated => Quad([
            st.apply((-hw, -hh)),
            st.apply((hw, -hh)),
            st.apply((hw, hh)),
            st.apply((-hw, hh)),
        ]),
        BoxMode::AxisAligned => {
            let (w, h) = (template.0 * st.s, template.1 * st.s);
            Rect::new(st.tx - w / 2.0, st.ty - h / 2.0, w, h).to_quad()
        }
    }
}

/// Per-frame outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub state: SimilarityState,
    pub score: ScoreBreakdown,
    pub iters: usize,
    /// Total score of each accepted sweep.
    pub accepted: Vec<f64>,
}

fn hog_at(
    frame: &Frame,
    geom: &Geometry,
    cell: usize,
    st: &SimilarityState,
    cells: (usize, usize),
    window: &RealGrid,
) -> Result<FeatureMap> {
    let patch = warp_similarity(frame, &geom.sampling(st), cells.0 * cell, cells.1 * cell)?;
    hog_on(&patch, cell, window)
}

fn hog_on(patch: &Patch, cell: usize, window: &RealGrid) -> Result<FeatureMap> {
    apply_cosine_window(&extract_hog(patch, cell)?, window)
}

fn lp_features_at(
    frame: &Frame,
    geom: &Geometry,
    kind: LogPolarFeatureKind,
    st: &SimilarityState,
) -> Result<FeatureMap> {
    let patch = warp_similarity(frame, &geom.sampling(st), geom.lp_side, geom.lp_side)?;
    log_polar_features(&patch, &geom.lp_config(), kind)
}

/// Odd box dims in template pixels, `(h, w)`.
fn color_box(geom: &Geometry) -> (usize, usize) {
    let odd = |v: f64| {
        let n = v.round().max(1.0) as usize;
        n | 1
    };
    (odd(geom.template.1), odd(geom.template.0))
}

/// Bilinear read of a grid at pixel-index coordinates, clamped.
fn sample_grid(g: &RealGrid, x: f64, y: f64) -> f64 {
    let (h, w) = g.dims();
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let top = g.get(y0, x0) * (1.0 - fx) + g.get(y0, x1) * fx;
    let bot = g.get(y1, x0) * (1.0 - fx) + g.get(y1, x1) * fx;
    top * (1.0 - fy) + bot * fy
}

struct Context<'a> {
    frame: &'a Frame,
    ts: &'a TrackState,
    cfg: &'a TrackerConfig,
}

impl Context<'_> {
    /// Color score per displacement cell, wrapped layout, from the sampled
    /// search patch.
    fn color_cells(&self, model: &ColorHistModel, patch: &Frame) -> RealGrid {
        let geom = &self.ts.geometry;
        let cs = self.cfg.cell_size;
        let (nh, nw) = geom.search_cells;
        let pix = model.patch_response(patch, color_box(geom));
        let (cy, cx) = ((nh * cs) as f64 / 2.0, (nw * cs) as f64 / 2.0);
        RealGrid::from_fn(nh, nw, |r, c| {
            let dy = signed_shift(r, nh) as f64 * cs as f64;
            let dx = signed_shift(c, nw) as f64 * cs as f64;
            sample_grid(&pix, cx + dx - 0.5, cy + dy - 0.5)
        })
    }
}

impl FrameContext for Context<'_> {
    fn translation_response(&self, at: &SimilarityState) -> Result<TranslationResponse> {
        let ts = self.ts;
        let geom = &ts.geometry;
        let cs = self.cfg.cell_size;
        let (nh, nw) = geom.search_cells;
        let patch = warp_similarity(self.frame, &geom.sampling(at), nh * cs, nw * cs)?;
        let z = hog_on(&patch, cs, &ts.search_window)?;
        let mut map = ts.translation.respond(&z)?;
        if let Some(color) = &ts.color {
            let gamma = self.cfg.color_merge;
            if gamma > 0.0 {
                let cg = self.color_cells(color, &patch.image);
                for (v, c) in map.grid.data_mut().iter_mut().zip(cg.data()) {
                    *v = (1.0 - gamma) * *v + gamma * c;
                }
            }
        }
        Ok(TranslationResponse {
            map,
            frame_px_per_cell: cs as f64 * at.s * geom.base_scale,
        })
    }

    fn scale_rotation_response(&self, at: &SimilarityState) -> Result<ScaleRotationResponse> {
        let ts = self.ts;
        let f = lp_features_at(self.frame, &ts.geometry, self.cfg.lp_features, at)?;
        let map = ts.scale_rotation.phase_correlate(&f)?;
        Ok(ScaleRotationResponse {
            map,
            lp: ts.geometry.lp_config(),
            cell_size: f.cell_size(),
        })
    }

    fn target_size(&self, st: &SimilarityState) -> (f64, f64) {
        let (w, h) = self.ts.template_size();
        (w * st.s, h * st.s)
    }
}

/// Single-target tracker.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    state: TrackState,
}

impl Tracker {
    /// Initializes from an axis-aligned box on the first frame.
    pub fn init(config: TrackerConfig, frame: &Frame, rect: Rect) -> Result<Self> {
        let state = init(&config, frame, rect)?;
        Ok(Self { config, state })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn track_state(&self) -> &TrackState {
        &self.state
    }

    pub fn state(&self) -> &SimilarityState {
        &self.state.state
    }

    /// Estimates the state in `frame`, then updates the models there.
    pub fn track(&mut self, frame: &Frame) -> Result<FrameResult> {
        let (next, result) = track(&self.config, &self.state, frame)?;
        self.state = next;
        Ok(result)
    }

    pub fn output_box(&self, mode: BoxMode) -> Quad {
        self.state.output_box(mode)
    }
}

/// Trains all models on the first frame.
pub fn init(cfg: &TrackerConfig, frame: &Frame, rect: Rect) -> Result<TrackState> {
    cfg.validate()?;
    if !(rect.w >= 8.0 && rect.h >= 8.0) || !rect.x.is_finite() || !rect.y.is_finite() {
        return Err(Error::invalid("box", "width and height must be at least 8 px"));
    }
    let (fh, fw) = frame.dims();
    let (cx, cy) = rect.center();
    if !(0.0..fw as f64).contains(&cx) || !(0.0..fh as f64).contains(&cy) {
        return Err(Error::invalid("box", "center lies outside the frame"));
    }
    let geometry = Geometry::new(cfg, rect.w, rect.h);
    let state = SimilarityState::new(cx, cy, 0.0, 1.0);
    let cs = cfg.cell_size;
    let train_window = hann_window(geometry.train_cells.0, geometry.train_cells.1)?;
    let search_window = hann_window(geometry.search_cells.0, geometry.search_cells.1)?;

    let x = hog_at(frame, &geometry, cs, &state, geometry.train_cells, &train_window)?;
    let (tw, th) = geometry.template;
    let sigma = default_sigma((th / cs as f64, tw / cs as f64));
    let y = gaussian_target(geometry.train_cells.0, geometry.train_cells.1, sigma)?;
    let translation = TranslationModel::train(&x, &y, cfg.lambda1, geometry.search_cells)?;

    let lp = lp_features_at(frame, &geometry, cfg.lp_features, &state)?;
    let scale_rotation = ScaleRotationModel::new(lp, geometry.lp_config())?;

    let color = if frame.channels() == 3 && cfg.color_merge > 0.0 {
        let rate = if cfg.color_learn_rate > 0.0 {
            cfg.color_learn_rate
        } else {
            1.0
        };
        Some(ColorHistModel::new(
            frame,
            &geometry.sampling(&state),
            (tw, th),
            rate,
        )?)
    } else {
        None
    };

    Ok(TrackState {
        state,
        geometry,
        translation,
        scale_rotation,
        color,
        train_window,
        search_window,
        frame_dims: (fh, fw),
        frame_index: 0,
    })
}

/// One frame: BCD from the previous state, then model updates at the
/// converged state. The input state is left untouched.
pub fn track(cfg: &TrackerConfig, ts: &TrackState, frame: &Frame) -> Result<(TrackState, FrameResult)> {
    if frame.dims() != ts.frame_dims {
        return Err(Error::ContractViolation(format!(
            "frame size changed from {:?} to {:?}",
            ts.frame_dims,
            frame.dims()
        )));
    }
    let ctx = Context { frame, ts, cfg };
    let out = run_bcd(&ctx, &ts.state, &cfg.solver)?;
    let (fh, fw) = ts.frame_dims;
    let mut st = out.state;
    if !(0.0..=fw as f64).contains(&st.tx) || !(0.0..=fh as f64).contains(&st.ty) {
        log::debug!("frame {}: center left the frame, clamping", ts.frame_index + 1);
        st.tx = st.tx.clamp(0.0, fw as f64);
        st.ty = st.ty.clamp(0.0, fh as f64);
    }

    let geom = &ts.geometry;
    let mut next = ts.clone();
    next.state = st;
    next.frame_index += 1;
    if cfg.lambda_phi > 0.0 {
        let x = hog_at(
            frame,
            geom,
            cfg.cell_size,
            &st,
            geom.train_cells,
            &ts.train_window,
        )?;
        next.translation = ts.translation.update(&x, cfg.lambda_phi, cfg.lambda_alpha)?;
    }
    if cfg.lambda_w > 0.0 {
        let f = lp_features_at(frame, geom, cfg.lp_features, &st)?;
        next.scale_rotation = ts.scale_rotation.update(&f, cfg.lambda_w)?;
    }
    if let Some(color) = &ts.color {
        if cfg.color_learn_rate > 0.0 {
            next.color = Some(color.update(frame, &geom.sampling(&st), geom.template)?);
        }
    }
    if !next.translation.is_finite() {
        return Err(Error::NonFinite("translation model"));
    }
    let result = FrameResult {
        state: st,
        score: out.score,
        iters: out.iters,
        accepted: out.accepted,
    };
    Ok((next, result))
}
