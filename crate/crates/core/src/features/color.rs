//! Foreground/background color histograms and the dense per-pixel
//! foreground probability they induce, box-filtered to the target size.

use crate::error::{Error, Result};
use crate::geometry::SimilarityState;
use crate::imgproc::{warp_similarity, Frame};
use crate::spectral::RealGrid;

pub const BINS_PER_CHANNEL: usize = 32;
const NUM_BINS: usize = BINS_PER_CHANNEL * BINS_PER_CHANNEL * BINS_PER_CHANNEL;
const PROB_EPS: f64 = 1e-12;

/// Joint RGB histograms of the target and its surroundings.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorHistModel {
    fg: Vec<f64>,
    bg: Vec<f64>,
    learn_rate: f64,
}

/// A region of a frame sampled upright at `state` on a `height x width` grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchRegion {
    pub state: SimilarityState,
    pub height: usize,
    pub width: usize,
}

#[inline]
fn bin_of(rgb: [f64; 3]) -> usize {
    let q = |v: f64| (((v * 255.0).round() as usize) >> 3).min(BINS_PER_CHANNEL - 1);
    (q(rgb[0]) * BINS_PER_CHANNEL + q(rgb[1])) * BINS_PER_CHANNEL + q(rgb[2])
}

#[inline]
fn pixel_rgb(img: &Frame, r: usize, c: usize) -> [f64; 3] {
    if img.channels() == 1 {
        let v = img.get(r, c, 0);
        [v, v, v]
    } else {
        [img.get(r, c, 0), img.get(r, c, 1), img.get(r, c, 2)]
    }
}

fn normalize(h: &mut [f64]) -> Result<()> {
    let total: f64 = h.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("region", "empty histogram region"));
    }
    h.iter_mut().for_each(|v| *v /= total);
    Ok(())
}

/// Histograms of the box (`target_w x target_h` template px, centered) and
/// of the ring out to twice the box size, both sampled upright at `state`.
fn histograms(frame: &Frame, state: &SimilarityState, target: (f64, f64)) -> Result<(Vec<f64>, Vec<f64>)> {
    let (tw, th) = target;
    if !(tw >= 1.0 && th >= 1.0) {
        return Err(Error::invalid("target", "empty target region"));
    }
    let ow = (2.0 * tw).round().max(2.0) as usize;
    let oh = (2.0 * th).round().max(2.0) as usize;
    let patch = warp_similarity(frame, state, oh, ow)?;
    let mut fg = vec![0.0; NUM_BINS];
    let mut bg = vec![0.0; NUM_BINS];
    let (x0, x1) = ((ow as f64 - tw) / 2.0, (ow as f64 + tw) / 2.0);
    let (y0, y1) = ((oh as f64 - th) / 2.0, (oh as f64 + th) / 2.0);
    for r in 0..oh {
        let y = r as f64 + 0.5;
        for c in 0..ow {
            let x = c as f64 + 0.5;
            let b = bin_of(pixel_rgb(&patch.image, r, c));
            if x >= x0 && x < x1 && y >= y0 && y < y1 {
                fg[b] += 1.0;
            } else {
                bg[b] += 1.0;
            }
        }
    }
    normalize(&mut fg)?;
    normalize(&mut bg)?;
    Ok((fg, bg))
}

impl ColorHistModel {
    /// Learns both histograms from `frame` at `state`; `target` is the
    /// object size in pixels at that state's scale.
    pub fn new(frame: &Frame, state: &SimilarityState, target: (f64, f64), learn_rate: f64) -> Result<Self> {
        if !(learn_rate > 0.0 && learn_rate <= 1.0) {
            return Err(Error::invalid("learn_rate", "must be in (0, 1]"));
        }
        let (fg, bg) = histograms(frame, state, target)?;
        Ok(Self { fg, bg, learn_rate })
    }

    /// Model with explicit (unnormalized) histograms.
    pub fn from_histograms(mut fg: Vec<f64>, mut bg: Vec<f64>, learn_rate: f64) -> Result<Self> {
        if fg.len() != NUM_BINS || bg.len() != NUM_BINS {
            return Err(Error::invalid("histogram", format!("expected {NUM_BINS} bins")));
        }
        if fg.iter().chain(&bg).any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid(
                "histogram",
                "bins must be finite and non-negative",
            ));
        }
        normalize(&mut fg)?;
        normalize(&mut bg)?;
        Ok(Self { fg, bg, learn_rate })
    }

    pub fn fg(&self) -> &[f64] {
        &self.fg
    }

    pub fn bg(&self) -> &[f64] {
        &self.bg
    }

    pub fn learn_rate(&self) -> f64 {
        self.learn_rate
    }

    /// Exponential averaging of both histograms with the model's learn rate.
    pub fn update(&self, frame: &Frame, state: &SimilarityState, target: (f64, f64)) -> Result<Self> {
        let (fg, bg) = histograms(frame, state, target)?;
        let a = self.learn_rate;
        let mix = |old: &[f64], new: &[f64]| -> Vec<f64> {
            old.iter().zip(new).map(|(o, n)| (1.0 - a) * o + a * n).collect()
        };
        Ok(Self {
            fg: mix(&self.fg, &fg),
            bg: mix(&self.bg, &bg),
            learn_rate: a,
        })
    }

    /// `P(fg | color)`; colors seen in neither histogram score 0.5.
    #[inline]
    pub fn probability(&self, rgb: [f64; 3]) -> f64 {
        let b = bin_of(rgb);
        let (f, g) = (self.fg[b], self.bg[b]);
        if f + g <= 0.0 {
            0.5
        } else {
            f / (f + g + PROB_EPS)
        }
    }

    /// Per-pixel foreground probability of an image.
    pub fn probability_map(&self, img: &Frame) -> RealGrid {
        RealGrid::from_fn(img.height(), img.width(), |r, c| {
            self.probability(pixel_rgb(img, r, c))
        })
    }

    /// Dense translation score over `region`: the mean foreground
    /// probability inside a `box_h x box_w` window centered on each pixel.
    pub fn response(
        &self,
        frame: &Frame,
        region: &SearchRegion,
        box_dims: (usize, usize),
    ) -> Result<RealGrid> {
        if region.height == 0 || region.width == 0 {
            return Err(Error::invalid("region", "empty search region"));
        }
        let patch = warp_similarity(frame, &region.state, region.height.max(2), region.width.max(2))?;
        Ok(self.patch_response(&patch.image, box_dims))
    }

    /// [`Self::response`] on an already sampled search patch.
    pub fn patch_response(&self, patch: &Frame, box_dims: (usize, usize)) -> RealGrid {
        box_filter(&self.probability_map(patch), box_dims)
    }
}

/// Learns a fresh model at `state`.
pub fn update_color_model(
    m: &ColorHistModel,
    frame: &Frame,
    state: &SimilarityState,
    target: (f64, f64),
) -> Result<ColorHistModel> {
    m.update(frame, state, target)
}

/// Mean over a `bh x bw` window centered on each cell, with the window
/// clipped to the grid. Uses an integral image.
pub fn box_filter(g: &RealGrid, (bh, bw): (usize, usize)) -> RealGrid {
    let (h, w) = g.dims();
    let mut integral = vec![0.0; (h + 1) * (w + 1)];
    for r in 0..h {
        let mut row = 0.0;
        for c in 0..w {
            row += g.get(r, c);
            integral[(r + 1) * (w + 1) + c + 1] = integral[r * (w + 1) + c + 1] + row;
        }
    }
    let bh = bh.max(1);
    let bw = bw.max(1);
    let (up, left) = ((bh - 1) / 2, (bw - 1) / 2);
    RealGrid::from_fn(h, w, |r, c| {
        let r0 = r.saturating_sub(up);
        let c0 = c.saturating_sub(left);
        let r1 = (r + bh - up).min(h);
        let c1 = (c + bw - left).min(w);
        let sum = integral[r1 * (w + 1) + c1] - integral[r0 * (w + 1) + c1] - integral[r1 * (w + 1) + c0]
            + integral[r0 * (w + 1) + c0];
        let n = ((r1 - r0) * (c1 - c0)) as f64;
        (sum / n).clamp(0.0, 1.0)
    })
}
