//! 31-channel HoG in the Felzenszwalb layout: 18 contrast-sensitive
//! orientations, 9 contrast-insensitive orientations, 4 texture channels.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::imgproc::Patch;
use crate::spectral::RealGrid;

use super::FeatureMap;

pub const HOG_CHANNELS: usize = 31;

const ORIENTS: usize = 9;
const CLIP: f64 = 0.2;
const NORM_EPS: f64 = 1e-4;
/// Texture-channel weight, 1/sqrt(18).
const TEXTURE_WEIGHT: f64 = 0.2357;

/// Upper bound of a texture channel: 18 orientations, each clipped at 0.2.
pub const TEXTURE_MAX: f64 = TEXTURE_WEIGHT * 2.0 * ORIENTS as f64 * CLIP;

/// HoG over `cell_size` pixel cells. Patch dims that are not a multiple of
/// the cell size are cropped to the largest multiple.
pub fn extract_hog(p: &Patch, cell_size: usize) -> Result<FeatureMap> {
    if cell_size == 0 {
        return Err(Error::invalid("cell_size", "must be positive"));
    }
    let img = &p.image;
    let (h, w) = img.dims();
    if h < cell_size || w < cell_size {
        return Err(Error::invalid(
            "patch",
            format!("{h}x{w} is smaller than one {cell_size}px cell"),
        ));
    }
    let hc = h / cell_size;
    let wc = w / cell_size;
    let (h, w) = (hc * cell_size, wc * cell_size);
    let ch = img.channels();

    let dirs: Vec<(f64, f64)> = (0..ORIENTS)
        .map(|o| {
            let a = o as f64 * PI / ORIENTS as f64;
            (a.cos(), a.sin())
        })
        .collect();

    // Orientation histograms with bilinear spatial voting.
    let mut hist = vec![0.0f64; hc * wc * 2 * ORIENTS];
    let data = img.data();
    let stride = img.width() * ch;
    // Replicated-border neighbors, as offsets into a row.
    let left: Vec<usize> = (0..w).map(|c| c.saturating_sub(1) * ch).collect();
    let right: Vec<usize> = (0..w).map(|c| (c + 1).min(w - 1) * ch).collect();
    let cs = cell_size as f64;
    // First voting cell and the weight of the next one.
    let votes = |i: usize| {
        let p = (i as f64 + 0.5) / cs - 0.5;
        let f = p.floor();
        (f as isize, p - f)
    };
    let col_votes: Vec<_> = (0..w).map(votes).collect();
    for r in 0..h {
        let row = r * stride;
        let up = r.saturating_sub(1) * stride;
        let down = (r + 1).min(h - 1) * stride;
        let (iyp, vy0) = votes(r);
        for c in 0..w {
            let mut best = (0.0, 0.0, -1.0);
            let here = c * ch;
            for k in 0..ch {
                let dx = data[row + right[c] + k] - data[row + left[c] + k];
                let dy = data[down + here + k] - data[up + here + k];
                let m2 = dx * dx + dy * dy;
                if m2 > best.2 {
                    best = (dx, dy, m2);
                }
            }
            let (dx, dy, m2) = best;
            if m2 <= 0.0 {
                continue;
            }
            let mag = m2.sqrt();
            let mut bin = 0;
            let mut best_dot = 0.0;
            for (o, &(u, v)) in dirs.iter().enumerate() {
                let dot = u * dx + v * dy;
                if dot > best_dot {
                    best_dot = dot;
                    bin = o;
                } else if -dot > best_dot {
                    best_dot = -dot;
                    bin = o + ORIENTS;
                }
            }

            let (ixp, vx0) = col_votes[c];
            for (oy, wy) in [(0isize, 1.0 - vy0), (1, vy0)] {
                let cy = iyp + oy;
                if cy < 0 || cy >= hc as isize {
                    continue;
                }
                for (ox, wx) in [(0isize, 1.0 - vx0), (1, vx0)] {
                    let cx = ixp + ox;
                    if cx < 0 || cx >= wc as isize {
                        continue;
                    }
                    let idx = ((cy as usize * wc) + cx as usize) * 2 * ORIENTS + bin;
                    hist[idx] += wy * wx * mag;
                }
            }
        }
    }

    // Gradient energy per cell from the contrast-insensitive histogram.
    let energy: Vec<f64> = (0..hc * wc)
        .map(|i| {
            let hcell = &hist[i * 2 * ORIENTS..(i + 1) * 2 * ORIENTS];
            (0..ORIENTS)
                .map(|o| (hcell[o] + hcell[o + ORIENTS]).powi(2))
                .sum()
        })
        .collect();
    let e = |r: isize, c: isize| {
        let r = r.clamp(0, hc as isize - 1) as usize;
        let c = c.clamp(0, wc as isize - 1) as usize;
        energy[r * wc + c]
    };

    let mut out: Vec<Vec<f64>> = vec![vec![0.0; hc * wc]; HOG_CHANNELS];
    for r in 0..hc {
        for c in 0..wc {
            let (ri, ci) = (r as isize, c as isize);
            // The four 2x2 blocks containing this cell.
            let mut norms = [0.0; 4];
            for (k, (by, bx)) in [(-1isize, -1isize), (-1, 0), (0, -1), (0, 0)]
                .into_iter()
                .enumerate()
            {
                let s = e(ri + by, ci + bx)
                    + e(ri + by, ci + bx + 1)
                    + e(ri + by + 1, ci + bx)
                    + e(ri + by + 1, ci + bx + 1);
                norms[k] = 1.0 / (s + NORM_EPS).sqrt();
            }
            let i = r * wc + c;
            let hcell = &hist[i * 2 * ORIENTS..(i + 1) * 2 * ORIENTS];
            let mut texture = [0.0; 4];
            for o in 0..2 * ORIENTS {
                let mut sum = 0.0;
                for (k, n) in norms.iter().enumerate() {
                    let v = (hcell[o] * n).min(CLIP);
                    sum += v;
                    texture[k] += v;
                }
                out[o][i] = 0.5 * sum;
            }
            for o in 0..ORIENTS {
                let v = hcell[o] + hcell[o + ORIENTS];
                let sum: f64 = norms.iter().map(|n| (v * n).min(CLIP)).sum();
                out[2 * ORIENTS + o][i] = 0.5 * sum;
            }
            for k in 0..4 {
                out[3 * ORIENTS + k][i] = TEXTURE_WEIGHT * texture[k];
            }
        }
    }

    let channels = out
        .into_iter()
        .map(|d| RealGrid::new(hc, wc, d))
        .collect::<Result<Vec<_>>>()?;
    FeatureMap::new(channels, cell_size)
}
