//! Frames, similarity-warp sampling, windows and resizing, plus PNM I/O.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::SimilarityState;
use crate::spectral::RealGrid;

/// Image with 1 (gray) or 3 (RGB) interleaved channels, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Frame {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("dims", "frame must be at least 1x1"));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(
                "channels",
                format!("expected 1 or 3, got {channels}"),
            ));
        }
        if data.len() != height * width * channels {
            return Err(Error::invalid(
                "data",
                format!(
                    "expected {} values, got {}",
                    height * width * channels,
                    data.len()
                ),
            ));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("data", "pixel values must lie in [0, 1]"));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        Self::new(
            height,
            width,
            channels,
            vec![value.clamp(0.0, 1.0); height * width * channels],
        )
        .expect("valid constant frame")
    }

    /// Builds a frame from a per-pixel function; outputs are clamped to `[0, 1]`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for r in 0..height {
            for c in 0..width {
                for k in 0..channels {
                    data.push(f(r, c, k).clamp(0.0, 1.0));
                }
            }
        }
        Self::new(height, width, channels, data).expect("valid generated frame")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + ch]
    }

    #[inline]
    fn get_clamped(&self, row: isize, col: isize, ch: usize) -> f64 {
        let r = row.clamp(0, self.height as isize - 1) as usize;
        let c = col.clamp(0, self.width as isize - 1) as usize;
        self.get(r, c, ch)
    }

    /// Bilinear sample at fractional pixel-index coordinates with border
    /// replication. `(x, y) = (col, row)`; integer values hit pixel centers.
    pub fn sample(&self, x: f64, y: f64, out: &mut [f64]) {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (c0, r0) = (x0 as isize, y0 as isize);
        if r0 >= 0 && c0 >= 0 && (r0 as usize) + 1 < self.height && (c0 as usize) + 1 < self.width {
            let ch = self.channels;
            let i00 = (r0 as usize * self.width + c0 as usize) * ch;
            let i10 = i00 + self.width * ch;
            for (k, o) in out.iter_mut().enumerate().take(ch) {
                let (a, b) = (self.data[i00 + k], self.data[i00 + ch + k]);
                let (c, d) = (self.data[i10 + k], self.data[i10 + ch + k]);
                let top = a + (b - a) * fx;
                let bottom = c + (d - c) * fx;
                *o = (top + (bottom - top) * fy).clamp(0.0, 1.0);
            }
            return;
        }
        for (k, o) in out.iter_mut().enumerate().take(self.channels) {
            let a = self.get_clamped(r0, c0, k);
            let b = self.get_clamped(r0, c0 + 1, k);
            let c = self.get_clamped(r0 + 1, c0, k);
            let d = self.get_clamped(r0 + 1, c0 + 1, k);
            let top = a + (b - a) * fx;
            let bottom = c + (d - c) * fx;
            *o = (top + (bottom - top) * fy).clamp(0.0, 1.0);
        }
    }

    /// Luminance (Rec. 601 weights) as a single-channel grid.
    pub fn to_gray(&self) -> RealGrid {
        RealGrid::from_fn(self.height, self.width, |r, c| {
            if self.channels == 1 {
                self.get(r, c, 0)
            } else {
                0.299 * self.get(r, c, 0) + 0.587 * self.get(r, c, 1) + 0.114 * self.get(r, c, 2)
            }
        })
    }

    /// Single-channel frame from a grid, clamping values into `[0, 1]`.
    pub fn from_grid(g: &RealGrid) -> Self {
        Frame::from_fn(g.height(), g.width(), 1, |r, c, _| g.get(r, c))
    }

    /// One channel as a grid.
    pub fn channel(&self, ch: usize) -> RealGrid {
        RealGrid::from_fn(self.height, self.width, |r, c| self.get(r, c, ch))
    }

    /// Copy of the `h x w` region whose top-left pixel is `(row, col)`, with
    /// border replication.
    pub fn crop(&self, row: isize, col: isize, h: usize, w: usize) -> Frame {
        Frame::from_fn(h, w, self.channels, |r, c, k| {
            self.get_clamped(row + r as isize, col + c as isize, k)
        })
    }
}

/// A fixed-size sample of a frame together with the state it was taken at.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub image: Frame,
    pub origin: SimilarityState,
}

impl Patch {
    pub fn height(&self) -> usize {
        self.image.height()
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.image.dims()
    }
}

/// Samples `frame` on an `out_h x out_w` grid: output pixel `(u, v)` reads
/// the frame at `state.apply(d)` where `d` is the pixel center relative to
/// the grid center. Inverse mapping, bilinear, replicated borders.
pub fn warp_similarity(frame: &Frame, state: &SimilarityState, out_h: usize, out_w: usize) -> Result<Patch> {
    if !(state.s > 0.0) || !state.s.is_finite() {
        return Err(Error::invalid(
            "s",
            format!("scale must be positive, got {}", state.s),
        ));
    }
    if out_h < 2 || out_w < 2 {
        return Err(Error::invalid("out dims", "output must be at least 2x2"));
    }
    let ch = frame.channels();
    let mut data = vec![0.0; out_h * out_w * ch];
    let (sin, cos) = state.theta.sin_cos();
    let (a, b) = (state.s * cos, state.s * sin);
    let half_w = out_w as f64 / 2.0;
    let half_h = out_h as f64 / 2.0;
    let row_len = out_w * ch;
    crate::par::for_each_chunk_mut(&mut data, row_len, |v, row| {
        let dy = v as f64 + 0.5 - half_h;
        for u in 0..out_w {
            let dx = u as f64 + 0.5 - half_w;
            // Frame point, then shift to pixel-index coordinates.
            let x = state.tx + a * dx + b * dy - 0.5;
            let y = state.ty - b * dx + a * dy - 0.5;
            frame.sample(x, y, &mut row[u * ch..(u + 1) * ch]);
        }
    });
    Ok(Patch {
        image: Frame {
            height: out_h,
            width: out_w,
            channels: ch,
            data,
        },
        origin: *state,
    })
}

/// Symmetric 1D Hann sequence of length `n`.
pub fn hann_1d(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos()))
        .collect()
}

/// Separable 2D Hann window: zero on the border, one at the center of odd
/// sizes.
pub fn hann_window(h: usize, w: usize) -> Result<RealGrid> {
    if h < 2 || w < 2 {
        return Err(Error::invalid("dims", "window must be at least 2x2"));
    }
    let rows = hann_1d(h);
    let cols = hann_1d(w);
    Ok(RealGrid::from_fn(h, w, |r, c| rows[r] * cols[c]))
}

/// Bilinear resampling with pixel centers aligned (`src = (dst + 0.5)·in/out − 0.5`).
/// The origin state is carried over unchanged.
pub fn resize_bilinear(p: &Patch, out_h: usize, out_w: usize) -> Result<Patch> {
    if out_h < 2 || out_w < 2 || p.height() < 2 || p.width() < 2 {
        return Err(Error::invalid("dims", "resize needs at least 2x2"));
    }
    Ok(Patch {
        image: resize_frame(&p.image, out_h, out_w),
        origin: p.origin,
    })
}

pub(crate) fn resize_frame(f: &Frame, out_h: usize, out_w: usize) -> Frame {
    let ch = f.channels();
    let sy = f.height() as f64 / out_h as f64;
    let sx = f.width() as f64 / out_w as f64;
    let mut data = vec![0.0; out_h * out_w * ch];
    crate::par::for_each_chunk_mut(&mut data, out_w * ch, |v, row| {
        let y = ((v as f64 + 0.5) * sy - 0.5).clamp(0.0, (f.height() - 1) as f64);
        for u in 0..out_w {
            let x = ((u as f64 + 0.5) * sx - 0.5).clamp(0.0, (f.width() - 1) as f64);
            f.sample(x, y, &mut row[u * ch..(u + 1) * ch]);
        }
    });
    Frame {
        height: out_h,
        width: out_w,
        channels: ch,
        data,
    }
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| &bytes[start..*pos])
}

/// Decodes binary PGM (`P5`) or PPM (`P6`) with maxval ≤ 255.
pub fn decode_pnm(bytes: &[u8], path: &Path) -> Result<Frame> {
    let mut pos = 0;
    let channels = match next_token(bytes, &mut pos).unwrap_or_default() {
        b"P5" => 1,
        b"P6" => 3,
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: magic {:?}",
                path.display(),
                String::from_utf8_lossy(other)
            )))
        }
    };
    let mut read = |what: &str| -> Result<usize> {
        let tok =
            next_token(bytes, &mut pos).ok_or_else(|| Error::parse(path, 1, format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(path, 1, format!("bad {what}")))
    };
    let width = read("width")?;
    let height = read("height")?;
    let maxval = read("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedFormat(format!(
            "{}: maxval {maxval} (only 1..=255 supported)",
            path.display()
        )));
    }
    // Exactly one whitespace byte separates the header from the raster.
    let start = pos + 1;
    let n = width * height * channels;
    if width == 0 || height == 0 || bytes.len() < start + n {
        return Err(Error::parse(path, 1, "truncated raster"));
    }
    let scale = 1.0 / maxval as f64;
    let data = bytes[start..start + n]
        .iter()
        .map(|&b| (b as f64 * scale).min(1.0))
        .collect();
    Frame::new(height, width, channels, data)
}

/// Loads a frame from disk. PGM/PPM are always supported; PNG/JPEG need the
/// `image-io` feature.
pub fn load_frame(path: &Path) -> Result<Frame> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "pgm" | "ppm" | "pnm" => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            decode_pnm(&bytes, path)
        }
        #[cfg(feature = "image-io")]
        "png" | "jpg" | "jpeg" => {
            let img = image::open(path)
                .map_err(|e| Error::UnsupportedFormat(format!("{}: {e}", path.display())))?;
            let rgb = img.to_rgb8();
            let (w, h) = rgb.dimensions();
            let data = rgb.into_raw().into_iter().map(|b| b as f64 / 255.0).collect();
            Frame::new(h as usize, w as usize, 3, data)
        }
        other => Err(Error::UnsupportedFormat(format!(
            "{}: extension {other:?}",
            path.display()
        ))),
    }
}

/// Encodes as binary PGM/PPM depending on the channel count.
pub fn encode_pnm(frame: &Frame) -> Vec<u8> {
    let magic = if frame.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend(frame.data().iter().map(|v| (v * 255.0).round() as u8));
    out
}

pub fn save_pnm(frame: &Frame, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_pnm(frame)).map_err(|e| Error::io(path, e))
}

/// Draws a closed polyline in place (nearest-pixel, 1 px wide).
pub fn draw_polygon(frame: &mut Frame, pts: &[(f64, f64)], color: [f64; 3]) {
    let n = pts.len();
    for i in 0..n {
        let (x0, y0) = pts[i];
        let (x1, y1) = pts[(i + 1) % n];
        let steps = ((x1 - x0).abs().max((y1 - y0).abs()).ceil() as usize).max(1);
        for k in 0..=steps {
            let t = k as f64 / steps as f64;
            let x = (x0 + (x1 - x0) * t - 0.5).round();
            let y = (y0 + (y1 - y0) * t - 0.5).round();
            if x < 0.0 || y < 0.0 || x >= frame.width as f64 || y >= frame.height as f64 {
                continue;
            }
            let base = (y as usize * frame.width + x as usize) * frame.channels;
            for ch in 0..frame.channels {
                frame.data[base + ch] = if frame.channels == 1 {
                    color.iter().sum::<f64>() / 3.0
                } else {
                    color[ch]
                };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ramp_frame(h: usize, w: usize) -> Frame {
        Frame::from_fn(h, w, 1, |r, c, _| ((r * w + c) as f64) / (h * w) as f64)
    }

    #[test]
    fn identity_warp_copies_crop() {
        let f = ramp_frame(20, 30);
        // Crop rows 4..12, cols 6..16: center at (6 + 5, 4 + 4) in continuous coords.
        let st = SimilarityState::new(11.0, 8.0, 0.0, 1.0);
        let p = warp_similarity(&f, &st, 8, 10).unwrap();
        for r in 0..8 {
            for c in 0..10 {
                assert!((p.image.get(r, c, 0) - f.get(r + 4, c + 6, 0)).abs() < 1e-12);
            }
        }
        assert_eq!(p.origin, st);
    }

    #[test]
    fn quarter_turn_on_3x3() {
        // Distinct values; center pixel (2, 2) of a 5x5 frame sits at (2.5, 2.5).
        let f = Frame::from_fn(5, 5, 1, |r, c, _| (r * 5 + c) as f64 / 25.0);
        let st = SimilarityState::new(2.5, 2.5, PI / 2.0, 1.0);
        let p = warp_similarity(&f, &st, 3, 3).unwrap();
        // Hand-computed inverse map: offset (dx, dy) samples frame offset (dy, -dx),
        // so output (row v, col u) reads frame (row 2 - (u - 1), col 2 + (v - 1)).
        for v in 0..3 {
            for u in 0..3 {
                let fr = 2 - (u as isize - 1);
                let fc = 2 + (v as isize - 1);
                let expect = f.get(fr as usize, fc as usize, 0);
                assert!((p.image.get(v, u, 0) - expect).abs() < 1e-9, "({v},{u})");
            }
        }
    }

    #[test]
    fn constant_frame_gives_constant_patch() {
        let f = Frame::filled(16, 16, 3, 0.42);
        let st = SimilarityState::new(3.0, 40.0, 1.1, 2.7);
        let p = warp_similarity(&f, &st, 9, 13).unwrap();
        assert!(p.image.data().iter().all(|v| (v - 0.42).abs() < 1e-12));
    }

    #[test]
    fn non_positive_scale_is_rejected() {
        let f = Frame::filled(4, 4, 1, 0.0);
        let st = SimilarityState::new(2.0, 2.0, 0.0, 0.0);
        assert!(warp_similarity(&f, &st, 4, 4).is_err());
        let st = SimilarityState::new(2.0, 2.0, 0.0, -1.0);
        assert!(warp_similarity(&f, &st, 4, 4).is_err());
    }

    #[test]
    fn hann_window_values() {
        let w = hann_window(5, 7).unwrap();
        assert_eq!(w.get(0, 0), 0.0);
        assert!((w.get(2, 3) - 1.0).abs() < 1e-12);
        // Oracle: n=4 Hann is [0, 0.75, 0.75, 0].
        let w4 = hann_window(4, 4).unwrap();
        let seq = [0.0, 0.75, 0.75, 0.0];
        for r in 0..4 {
            for c in 0..4 {
                assert!((w4.get(r, c) - seq[r] * seq[c]).abs() < 1e-12);
            }
        }
        assert!(hann_window(1, 4).is_err());
    }

    #[test]
    fn resize_identity_and_constant() {
        let f = ramp_frame(6, 7);
        let p = Patch {
            image: f.clone(),
            origin: SimilarityState::new(0.0, 0.0, 0.0, 1.0),
        };
        assert_eq!(resize_bilinear(&p, 6, 7).unwrap().image, f);
        let c = Patch {
            image: Frame::filled(5, 5, 3, 0.3),
            origin: p.origin,
        };
        let r = resize_bilinear(&c, 9, 4).unwrap();
        assert!(r.image.data().iter().all(|v| (v - 0.3).abs() < 1e-12));
    }

    #[test]
    fn resize_2x2_to_4x4_matches_closed_form() {
        let vals = [0.1, 0.5, 0.3, 0.9];
        let f = Frame::new(2, 2, 1, vals.to_vec()).unwrap();
        let p = Patch {
            image: f,
            origin: SimilarityState::new(0.0, 0.0, 0.0, 1.0),
        };
        let r = resize_bilinear(&p, 4, 4).unwrap();
        // Source coordinate of output index i: clamp((i + 0.5)/2 - 0.5, 0, 1).
        let src = |i: usize| ((i as f64 + 0.5) / 2.0 - 0.5).clamp(0.0, 1.0);
        for v in 0..4 {
            for u in 0..4 {
                let (y, x) = (src(v), src(u));
                let expect = vals[0] * (1.0 - x) * (1.0 - y)
                    + vals[1] * x * (1.0 - y)
                    + vals[2] * (1.0 - x) * y
                    + vals[3] * x * y;
                assert!((r.image.get(v, u, 0) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn warp_composition_matches_composed_state() {
        // Smooth texture so bilinear resampling error stays small.
        let f = Frame::from_fn(120, 120, 1, |r, c, _| {
            0.5 + 0.25 * ((r as f64) * 0.11).sin() * ((c as f64) * 0.07).cos()
                + 0.2 * ((r + c) as f64 * 0.05).sin()
        });
        let outer = SimilarityState::new(60.0, 58.0, 0.35, 1.1);
        let inner = SimilarityState::new(31.0, 29.0, -0.2, 0.9);
        let pre = warp_similarity(&f, &outer, 64, 64).unwrap();
        let twice = warp_similarity(&pre.image, &inner, 32, 32).unwrap();
        let direct = warp_similarity(&f, &outer.compose(&inner, (64, 64)), 32, 32).unwrap();
        let mut acc = 0.0;
        let mut n = 0;
        for r in 4..28 {
            for c in 4..28 {
                acc += (twice.image.get(r, c, 0) - direct.image.get(r, c, 0)).abs();
                n += 1;
            }
        }
        assert!(acc / n as f64 <= 2.0 / 255.0);
    }

    #[test]
    fn pnm_round_trip() {
        let f = Frame::from_fn(3, 4, 3, |r, c, k| ((r * 4 + c) * 3 + k) as f64 / 255.0);
        let bytes = encode_pnm(&f);
        let back = decode_pnm(&bytes, Path::new("mem.ppm")).unwrap();
        for (a, b) in f.data().iter().zip(back.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn pnm_header_comments_and_errors() {
        let mut bytes = b"P5\n# a comment\n2 1\n255\n".to_vec();
        bytes.extend([0u8, 255]);
        let f = decode_pnm(&bytes, Path::new("x.pgm")).unwrap();
        assert_eq!((f.height(), f.width(), f.channels()), (1, 2, 1));
        assert_eq!(f.get(0, 1, 0), 1.0);
        assert!(decode_pnm(b"P5\n2 2\n255\n\x00", Path::new("x.pgm")).is_err());
        assert!(matches!(
            decode_pnm(b"P3\n1 1\n255\n0 0 0", Path::new("x.ppm")),
            Err(Error::UnsupportedFormat(_))
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn warp_output_stays_in_unit_range(
                tx in -20.0f64..60.0, ty in -20.0f64..60.0,
                theta in -3.2f64..3.2, s in 0.2f64..4.0,
            ) {
                let f = Frame::from_fn(40, 40, 3, |r, c, k| ((r * 7 + c * 13 + k * 5) % 17) as f64 / 16.0);
                let p = warp_similarity(&f, &SimilarityState::new(tx, ty, theta, s), 11, 9).unwrap();
                prop_assert!(p.image.data().iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}
