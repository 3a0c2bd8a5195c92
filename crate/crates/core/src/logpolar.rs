//! Scale and rotation by phase correlation in log-polar coordinates.
//!
//! About a pole, rotating a patch by `Δθ` and scaling it by `Δs` become
//! circular shifts of its log-polar resampling: `Δθ·H/2π` rows along the
//! angular axis and `ln(Δs)·W/ln(R)` columns along the log-radial axis,
//! where `R` is the radius reached by the last column. One phase
//! correlation therefore scores every scale/rotation pair at once.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{check_dims, Error, Result};
use crate::features::{apply_cosine_window, extract_gray, extract_hog, FeatureMap};
use crate::geometry::wrap_angle;
use crate::imgproc::{hann_1d, Frame, Patch};
use crate::spectral::{self, idft2, ComplexGrid, RealGrid, ResponseMap};

/// Relative floor of the cross-power normalization.
const PHASE_EPS: f64 = 1e-6;

/// Log-polar sampling grid.
///
/// Row `θ'` maps to the angle `2πθ'/out_h` measured counter-clockwise (on
/// screen) from the +x axis; column `s'` maps to the radius
/// `exp(s'·ln(max_radius)/out_w)` pixels from the pole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogPolarConfig {
    pub out_h: usize,
    pub out_w: usize,
    pub max_radius: f64,
    /// Pole in patch coordinates; `None` means the patch center.
    pub pole: Option<(f64, f64)>,
}

impl LogPolarConfig {
    /// Grid matching a square-ish patch: output dims equal the patch dims and
    /// the last column reaches half the patch width.
    pub fn for_patch(h: usize, w: usize) -> Self {
        Self {
            out_h: h,
            out_w: w,
            max_radius: w as f64 / 2.0,
            pole: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.out_h < 8 || self.out_w < 8 {
            return Err(Error::invalid("log-polar dims", "must be at least 8x8"));
        }
        if !(self.max_radius > 1.0) || !self.max_radius.is_finite() {
            return Err(Error::invalid("max_radius", "must exceed one pixel"));
        }
        Ok(())
    }

    /// Log-radius step per column.
    pub fn log_step(&self) -> f64 {
        self.max_radius.ln() / self.out_w as f64
    }
}

/// Relative scale and rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleRotation {
    pub s: f64,
    pub theta: f64,
}

impl ScaleRotation {
    pub const IDENTITY: ScaleRotation = ScaleRotation { s: 1.0, theta: 0.0 };

    pub fn clamp_scale(self, s_min: f64, s_max: f64) -> Self {
        Self {
            s: self.s.clamp(s_min, s_max),
            theta: self.theta,
        }
    }
}

/// Resamples a patch onto the log-polar grid (bilinear, replicated borders).
pub fn to_log_polar(p: &Patch, cfg: &LogPolarConfig) -> Result<Patch> {
    cfg.validate()?;
    let (h, w) = p.dims();
    if h < 2 || w < 2 {
        return Err(Error::invalid("patch", "degenerate patch"));
    }
    let (px, py) = cfg.pole.unwrap_or((w as f64 / 2.0, h as f64 / 2.0));
    if !(0.0..=w as f64).contains(&px) || !(0.0..=h as f64).contains(&py) {
        return Err(Error::invalid("pole", "must lie inside the patch"));
    }
    let ch = p.image.channels();
    let k = cfg.log_step();
    let radii: Vec<f64> = (0..cfg.out_w).map(|c| (k * c as f64).exp()).collect();
    let mut data = vec![0.0; cfg.out_h * cfg.out_w * ch];
    crate::par::for_each_chunk_mut(&mut data, cfg.out_w * ch, |row, out| {
        let phi = 2.0 * PI * row as f64 / cfg.out_h as f64;
        let (sin, cos) = phi.sin_cos();
        for (c, &rho) in radii.iter().enumerate() {
            let x = px + rho * cos - 0.5;
            let y = py - rho * sin - 0.5;
            p.image.sample(x, y, &mut out[c * ch..(c + 1) * ch]);
        }
    });
    Ok(Patch {
        image: Frame::new(cfg.out_h, cfg.out_w, ch, data)?,
        origin: p.origin,
    })
}

/// Which features feed the phase correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogPolarFeatureKind {
    Hog { cell_size: usize },
    Gray,
}

/// Log-polar features of a patch: resample, extract, then taper the
/// log-radial axis with a Hann profile. The angular axis is periodic and is
/// left untapered so that rotations stay exact circular shifts.
pub fn log_polar_features(p: &Patch, cfg: &LogPolarConfig, kind: LogPolarFeatureKind) -> Result<FeatureMap> {
    let lp = to_log_polar(p, cfg)?;
    let f = match kind {
        LogPolarFeatureKind::Hog { cell_size } => extract_hog(&lp, cell_size)?,
        LogPolarFeatureKind::Gray => extract_gray(&lp)?,
    };
    let (h, w) = f.dims();
    let radial = hann_1d(w);
    let window = RealGrid::from_fn(h, w, |_, c| radial[c]);
    apply_cosine_window(&f, &window)
}

/// Exponentially averaged log-polar feature template.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleRotationModel {
    upsilon: FeatureMap,
    upsilon_hat: Vec<ComplexGrid>,
    config: LogPolarConfig,
}

impl ScaleRotationModel {
    pub fn new(f: FeatureMap, config: LogPolarConfig) -> Result<Self> {
        config.validate()?;
        let upsilon_hat = f.spectra()?;
        Ok(Self {
            upsilon: f,
            upsilon_hat,
            config,
        })
    }

    pub fn upsilon(&self) -> &FeatureMap {
        &self.upsilon
    }

    pub fn config(&self) -> &LogPolarConfig {
        &self.config
    }

    pub fn dims(&self) -> (usize, usize) {
        self.upsilon.dims()
    }

    /// `Υ ← (1-λw)·Υ + λw·f`, in feature space.
    pub fn update(&self, f: &FeatureMap, lambda_w: f64) -> Result<Self> {
        if !(lambda_w > 0.0 && lambda_w <= 1.0) {
            return Err(Error::invalid(
                "lambda_w",
                format!("must be in (0, 1], got {lambda_w}"),
            ));
        }
        let upsilon = self.upsilon.blend(1.0 - lambda_w, f, lambda_w)?;
        Self::new(upsilon, self.config)
    }

    /// Phase correlation against the template: per channel the cross-power
    /// spectrum `conj(Υ̂)·F̂` normalized by its magnitude, averaged over
    /// channels and transformed back. Peaks near 1 for a pure shift.
    pub fn phase_correlate(&self, f: &FeatureMap) -> Result<ResponseMap> {
        check_dims(self.dims(), f.dims())?;
        if f.num_channels() != self.upsilon.num_channels() {
            return Err(Error::DimMismatch {
                expected: (self.upsilon.num_channels(), 1),
                actual: (f.num_channels(), 1),
            });
        }
        let spectra = f.spectra()?;
        let (h, w) = self.dims();
        let k = spectra.len() as f64;
        let per_channel: Vec<Vec<Complex64>> = crate::par::map_range(spectra.len(), |i| {
            let cross: Vec<Complex64> = self.upsilon_hat[i]
                .data()
                .iter()
                .zip(spectra[i].data())
                .map(|(u, v)| u.conj() * v)
                .collect();
            let mean = cross.iter().map(|c| c.norm()).sum::<f64>() / cross.len() as f64;
            let eps = PHASE_EPS * mean.max(f64::MIN_POSITIVE);
            cross.into_iter().map(|c| c / (c.norm() + eps)).collect()
        });
        let mut acc = ComplexGrid::zeros(h, w);
        for ch in per_channel {
            for (a, v) in acc.data_mut().iter_mut().zip(ch) {
                *a += v / k;
            }
        }
        Ok(ResponseMap::new(idft2(&acc)?))
    }
}

pub fn phase_correlate(m: &ScaleRotationModel, f: &FeatureMap) -> Result<ResponseMap> {
    m.phase_correlate(f)
}

pub fn update_scale_rotation_model(
    m: &ScaleRotationModel,
    f: &FeatureMap,
    lambda_w: f64,
) -> Result<ScaleRotationModel> {
    m.update(f, lambda_w)
}

/// Converts a response peak position, in log-polar pixel units, to the
/// relative scale and rotation. Positions beyond half an axis wrap to
/// negative shifts; exactly half a turn maps to `θ = π`.
pub fn peak_to_scale_rotation(row: f64, col: f64, cfg: &LogPolarConfig) -> ScaleRotation {
    let wrap = |v: f64, len: f64| {
        let v = v.rem_euclid(len);
        if v > len / 2.0 {
            v - len
        } else {
            v
        }
    };
    let dr = wrap(row, cfg.out_h as f64);
    let dc = wrap(col, cfg.out_w as f64);
    let theta = 2.0 * PI * dr / cfg.out_h as f64;
    let theta = if (theta - PI).abs() < 1e-12 {
        PI
    } else {
        wrap_angle(theta)
    };
    ScaleRotation {
        s: (dc * cfg.log_step()).exp(),
        theta,
    }
}

/// Inverse of [`peak_to_scale_rotation`]: signed shift in log-polar pixels.
pub fn scale_rotation_to_shift(sr: ScaleRotation, cfg: &LogPolarConfig) -> (f64, f64) {
    (
        sr.theta * cfg.out_h as f64 / (2.0 * PI),
        sr.s.ln() / cfg.log_step(),
    )
}

/// Signed peak of a log-polar response converted to pixel units of the
/// log-polar grid (cells times cell size).
pub fn response_peak_px(resp: &ResponseMap, cell_size: usize) -> (f64, f64, f64) {
    let p = resp.peak();
    (p.dy * cell_size as f64, p.dx * cell_size as f64, p.value)
}

/// Ratio of the main peak to the mean absolute response outside an
/// 11x11 exclusion zone around it.
pub fn peak_to_sidelobe(resp: &ResponseMap) -> f64 {
    let (h, w) = resp.dims();
    let (pr, pc, pv) = resp.argmax();
    let mut sum = 0.0;
    let mut n = 0usize;
    for r in 0..h {
        for c in 0..w {
            let dr = spectral::signed_shift((r + h - pr) % h, h).abs();
            let dc = spectral::signed_shift((c + w - pc) % w, w).abs();
            if dr <= 5 && dc <= 5 {
                continue;
            }
            sum += resp.grid.get(r, c).abs();
            n += 1;
        }
    }
    if n == 0 || sum == 0.0 {
        return f64::INFINITY;
    }
    pv / (sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SimilarityState;
    use crate::imgproc::warp_similarity;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn patch(image: Frame) -> Patch {
        Patch {
            image,
            origin: SimilarityState::new(0.0, 0.0, 0.0, 1.0),
        }
    }

    fn random_map(rng: &mut ChaCha8Rng, k: usize, h: usize, w: usize) -> FeatureMap {
        let chans = (0..k)
            .map(|_| RealGrid::from_fn(h, w, |_, _| rng.gen_range(-1.0..1.0)))
            .collect();
        FeatureMap::new(chans, 1).unwrap()
    }

    fn smooth_scene(n: usize) -> Frame {
        Frame::from_fn(n, n, 1, |r, c, _| {
            let (x, y) = (c as f64, r as f64);
            0.5 + 0.2 * (0.13 * x + 0.05 * y).sin()
                + 0.15 * (0.07 * x - 0.11 * y).cos()
                + 0.1 * (0.21 * x * 0.5 + 0.17 * y).sin()
        })
    }

    #[test]
    fn concentric_rings_are_constant_along_angle() {
        let n = 64;
        let img = Frame::from_fn(n, n, 1, |r, c, _| {
            let dx = c as f64 + 0.5 - 32.0;
            let dy = r as f64 + 0.5 - 32.0;
            0.5 + 0.5 * ((dx * dx + dy * dy).sqrt() * 0.6).sin()
        });
        let cfg = LogPolarConfig::for_patch(n, n);
        let lp = to_log_polar(&patch(img), &cfg).unwrap();
        for c in 10..n {
            let col: Vec<f64> = (0..n).map(|r| lp.image.get(r, c, 0)).collect();
            let mean = col.iter().sum::<f64>() / n as f64;
            let dev = col.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
            assert!(dev < 0.06, "column {c} varies by {dev}");
        }
    }

    fn best_circular_shift(a: &Patch, b: &Patch, axis_rows: bool, max: isize) -> isize {
        // Brute-force oracle: shift minimizing the mean squared difference
        // over the interior of the other axis.
        let (h, w) = a.dims();
        let mut best = (0, f64::INFINITY);
        for s in -max..=max {
            let mut err = 0.0;
            for r in 0..h {
                for c in 8..w - 8 {
                    let (rr, cc) = if axis_rows {
                        ((r as isize - s).rem_euclid(h as isize) as usize, c)
                    } else {
                        let cc = c as isize - s;
                        if cc < 0 || cc >= w as isize {
                            continue;
                        }
                        (r, cc as usize)
                    };
                    err += (b.image.get(r, c, 0) - a.image.get(rr, cc, 0)).powi(2);
                }
            }
            if err < best.1 {
                best = (s, err);
            }
        }
        best.0
    }

    #[test]
    fn rotation_is_a_row_shift() {
        let scene = smooth_scene(200);
        let n = 96;
        let center = SimilarityState::new(100.0, 100.0, 0.0, 1.0);
        let base = warp_similarity(&scene, &center, n, n).unwrap();
        // Content rotated 30 degrees counter-clockwise: sample at -30 degrees.
        let rot = warp_similarity(
            &scene,
            &SimilarityState::new(100.0, 100.0, -30f64.to_radians(), 1.0),
            n,
            n,
        )
        .unwrap();
        let cfg = LogPolarConfig::for_patch(n, n);
        let a = to_log_polar(&base, &cfg).unwrap();
        let b = to_log_polar(&rot, &cfg).unwrap();
        let expect = (30.0 / 360.0 * n as f64).round() as isize;
        assert_eq!(best_circular_shift(&a, &b, true, 20), expect);
    }

    #[test]
    fn scaling_is_a_column_shift() {
        let scene = smooth_scene(200);
        let n = 96;
        let base = warp_similarity(&scene, &SimilarityState::new(100.0, 100.0, 0.0, 1.0), n, n).unwrap();
        // Content enlarged 1.2x: sample with scale 1/1.2.
        let zoom =
            warp_similarity(&scene, &SimilarityState::new(100.0, 100.0, 0.0, 1.0 / 1.2), n, n).unwrap();
        let cfg = LogPolarConfig::for_patch(n, n);
        let a = to_log_polar(&base, &cfg).unwrap();
        let b = to_log_polar(&zoom, &cfg).unwrap();
        let expect = 1.2f64.ln() * n as f64 / (n as f64 / 2.0).ln();
        let got = best_circular_shift(&a, &b, false, 12);
        assert!(
            (got as f64 - expect).abs() <= 0.5 + 1e-9,
            "got {got}, expect {expect}"
        );
    }

    #[test]
    fn degenerate_config_rejected() {
        let p = patch(Frame::filled(16, 16, 1, 0.5));
        let mut cfg = LogPolarConfig::for_patch(16, 16);
        cfg.out_h = 4;
        assert!(to_log_polar(&p, &cfg).is_err());
        let mut cfg = LogPolarConfig::for_patch(16, 16);
        cfg.max_radius = 0.5;
        assert!(to_log_polar(&p, &cfg).is_err());
        let mut cfg = LogPolarConfig::for_patch(16, 16);
        cfg.pole = Some((40.0, 2.0));
        assert!(to_log_polar(&p, &cfg).is_err());
    }

    #[test]
    fn self_correlation_peaks_at_origin() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_map(&mut rng, 3, 32, 32);
        let m = ScaleRotationModel::new(f.clone(), LogPolarConfig::for_patch(32, 32)).unwrap();
        let resp = m.phase_correlate(&f).unwrap();
        let (r, c, v) = resp.argmax();
        assert_eq!((r, c), (0, 0));
        // The epsilon floor damps weak bins slightly.
        assert!((v - 1.0).abs() < 1e-3, "{v}");
    }

    #[test]
    fn circular_shift_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_map(&mut rng, 2, 32, 40);
        let m = ScaleRotationModel::new(f.clone(), LogPolarConfig::for_patch(32, 40)).unwrap();
        for (dy, dx) in [(5isize, -3isize), (-12, 9), (16, 0)] {
            let chans = f.channels().iter().map(|c| c.circshift(dy, dx)).collect();
            let g = FeatureMap::new(chans, 1).unwrap();
            let p = m.phase_correlate(&g).unwrap().peak();
            assert_eq!(
                (
                    spectral::signed_shift(p.row, 32),
                    spectral::signed_shift(p.col, 40)
                ),
                (dy, dx)
            );
        }
    }

    #[test]
    fn matched_pairs_are_peakier_than_mismatched() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_map(&mut rng, 1, 64, 64);
        let m = ScaleRotationModel::new(f.clone(), LogPolarConfig::for_patch(64, 64)).unwrap();
        let g = FeatureMap::new(vec![f.channel(0).circshift(7, -4)], 1).unwrap();
        let other = random_map(&mut rng, 1, 64, 64);
        let matched = peak_to_sidelobe(&m.phase_correlate(&g).unwrap());
        let mismatched = peak_to_sidelobe(&m.phase_correlate(&other).unwrap());
        assert!(matched >= 3.0 * mismatched, "{matched} vs {mismatched}");
    }

    #[test]
    fn peak_conversion() {
        let cfg = LogPolarConfig::for_patch(64, 64);
        let id = peak_to_scale_rotation(0.0, 0.0, &cfg);
        assert_eq!(id, ScaleRotation::IDENTITY);
        let half = peak_to_scale_rotation(32.0, 0.0, &cfg);
        assert!((half.theta - PI).abs() < 1e-12);
        let col = 1.2f64.ln() * 64.0 / 32f64.ln();
        let sr = peak_to_scale_rotation(0.0, col, &cfg);
        assert!((sr.s - 1.2).abs() < 1e-12);
        // Wrapped negative shifts.
        let neg = peak_to_scale_rotation(60.0, 64.0 - col, &cfg);
        assert!((neg.theta + 2.0 * PI * 4.0 / 64.0).abs() < 1e-12);
        assert!((neg.s - 1.0 / 1.2).abs() < 1e-12);
        let (r, c) = scale_rotation_to_shift(sr, &cfg);
        assert!(r.abs() < 1e-12 && (c - col).abs() < 1e-9);
    }

    #[test]
    fn model_update_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f0 = random_map(&mut rng, 2, 16, 16);
        let f1 = random_map(&mut rng, 2, 16, 16);
        let cfg = LogPolarConfig::for_patch(16, 16);
        let m = ScaleRotationModel::new(f0.clone(), cfg).unwrap();
        assert_eq!(m.update(&f1, 1.0).unwrap().upsilon(), &f1);
        assert!(m.update(&f1, 0.0).is_err());
        assert!(m.update(&f1, 1.01).is_err());
        let mut same = m.clone();
        for _ in 0..10 {
            same = same.update(&f0, 0.015).unwrap();
        }
        for (a, b) in same.upsilon().channels().iter().zip(f0.channels()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        let dist = |m: &ScaleRotationModel| -> f64 {
            m.upsilon()
                .channels()
                .iter()
                .zip(f1.channels())
                .flat_map(|(a, b)| a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)))
                .sum::<f64>()
                .sqrt()
        };
        let mut cur = m;
        let mut prev = dist(&cur);
        for _ in 0..10 {
            cur = cur.update(&f1, 0.2).unwrap();
            let d = dist(&cur);
            assert!((d / prev - 0.8).abs() < 1e-6);
            prev = d;
        }
    }
}
