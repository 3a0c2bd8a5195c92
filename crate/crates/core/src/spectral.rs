//! 2D discrete Fourier transforms and element-wise complex algebra.
//!
//! Transforms are unnormalized in the forward direction and carry the
//! `1/(H·W)` factor in the inverse, with the DC term at index `(0, 0)`.
//! Row and column passes are delegated to `rustfft`, which handles any
//! length in `O(N log N)`.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_dims, Error, Result};

/// Default regularizer for [`ewise_div_safe`]; matches the ridge `λ₁`.
pub const DEFAULT_DIV_EPS: f64 = 1e-4;

/// Relative energy of the imaginary residue tolerated by [`idft2`].
pub const IMAG_RESIDUE_TOL: f64 = 1e-6;

/// Real-valued grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RealGrid {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

/// Complex-valued grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    height: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl RealGrid {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("dims", "grid must be at least 1x1"));
        }
        check_dims((height * width, 1), (data.len(), 1))?;
        Ok(Self { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "grid must be at least 1x1");
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(height > 0 && width > 0, "grid must be at least 1x1");
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    /// Reads with circular index wrapping.
    #[inline]
    pub fn get_wrapped(&self, row: isize, col: isize) -> f64 {
        let r = row.rem_euclid(self.height as isize) as usize;
        let c = col.rem_euclid(self.width as isize) as usize;
        self.get(r, c)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Element-wise product.
    pub fn mul(&self, other: &RealGrid) -> Result<Self> {
        check_dims(self.dims(), other.dims())?;
        Ok(Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        })
    }

    /// Circular shift: output `(r, c)` takes input `(r - dy, c - dx)`.
    pub fn circshift(&self, dy: isize, dx: isize) -> Self {
        Self::from_fn(self.height, self.width, |r, c| {
            self.get_wrapped(r as isize - dy, c as isize - dx)
        })
    }
}

impl ComplexGrid {
    pub fn new(height: usize, width: usize, data: Vec<Complex64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("dims", "grid must be at least 1x1"));
        }
        check_dims((height * width, 1), (data.len(), 1))?;
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: Complex64) -> Self {
        assert!(height > 0 && width > 0, "grid must be at least 1x1");
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, Complex64::new(0.0, 0.0))
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.width + col]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// `a·self + b·other`, element-wise.
    pub fn blend(&self, a: f64, other: &ComplexGrid, b: f64) -> Result<Self> {
        check_dims(self.dims(), other.dims())?;
        Ok(Self {
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| x * a + y * b)
                .collect(),
        })
    }

    pub fn add_assign(&mut self, other: &ComplexGrid) -> Result<()> {
        check_dims(self.dims(), other.dims())?;
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += y;
        }
        Ok(())
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| v * k).collect(),
        }
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

fn transpose(data: &[Complex64], height: usize, width: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    for r in 0..height {
        for c in 0..width {
            out[c * height + r] = data[r * width + c];
        }
    }
    out
}

/// In-place 2D transform of a row-major buffer (unnormalized both ways).
fn fft2_in_place(data: &mut Vec<Complex64>, height: usize, width: usize, inverse: bool) {
    if width > 1 {
        plan(width, inverse).process(data);
    }
    if height > 1 {
        let mut t = transpose(data, height, width);
        plan(height, inverse).process(&mut t);
        *data = transpose(&t, width, height);
    }
}

/// Forward 2D DFT of a real grid.
pub fn dft2(g: &RealGrid) -> Result<ComplexGrid> {
    if !g.is_finite() {
        return Err(Error::NonFinite("dft2 input"));
    }
    let mut data: Vec<Complex64> = g.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2_in_place(&mut data, g.height, g.width, false);
    Ok(ComplexGrid {
        height: g.height,
        width: g.width,
        data,
    })
}

/// Forward 2D DFT of a complex grid.
pub fn dft2_complex(g: &ComplexGrid) -> ComplexGrid {
    let mut data = g.data.clone();
    fft2_in_place(&mut data, g.height, g.width, false);
    ComplexGrid {
        height: g.height,
        width: g.width,
        data,
    }
}

/// Inverse 2D DFT with `1/(H·W)` normalization, without discarding the
/// imaginary part.
pub fn idft2_complex(g: &ComplexGrid) -> ComplexGrid {
    let mut data = g.data.clone();
    fft2_in_place(&mut data, g.height, g.width, true);
    let norm = 1.0 / (g.height * g.width) as f64;
    for v in &mut data {
        *v *= norm;
    }
    ComplexGrid {
        height: g.height,
        width: g.width,
        data,
    }
}

/// Inverse 2D DFT of the spectrum of a real signal.
///
/// Fails with [`Error::ContractViolation`] when the imaginary residue
/// carries more than [`IMAG_RESIDUE_TOL`] of the total energy, i.e. when
/// the input was not (close to) conjugate-symmetric.
pub fn idft2(g: &ComplexGrid) -> Result<RealGrid> {
    if !g.is_finite() {
        return Err(Error::NonFinite("idft2 input"));
    }
    let spatial = idft2_complex(g);
    let mut imag = 0.0;
    let mut total = 0.0;
    for v in &spatial.data {
        imag += v.im * v.im;
        total += v.norm_sqr();
    }
    if imag > IMAG_RESIDUE_TOL * total {
        return Err(Error::ContractViolation(format!(
            "inverse transform has imaginary energy {imag:.3e} of total {total:.3e}; \
             spectrum is not conjugate-symmetric"
        )));
    }
    Ok(RealGrid {
        height: g.height,
        width: g.width,
        data: spatial.data.iter().map(|v| v.re).collect(),
    })
}

/// Element-wise product.
pub fn hadamard(a: &ComplexGrid, b: &ComplexGrid) -> Result<ComplexGrid> {
    check_dims(a.dims(), b.dims())?;
    Ok(ComplexGrid {
        height: a.height,
        width: a.width,
        data: a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect(),
    })
}

/// Element-wise complex conjugate.
pub fn conj(a: &ComplexGrid) -> ComplexGrid {
    ComplexGrid {
        height: a.height,
        width: a.width,
        data: a.data.iter().map(|v| v.conj()).collect(),
    }
}

/// Element-wise `a / (b + eps)`.
pub fn ewise_div_safe(a: &ComplexGrid, b: &ComplexGrid, eps: f64) -> Result<ComplexGrid> {
    check_dims(a.dims(), b.dims())?;
    if !(eps > 0.0) {
        return Err(Error::invalid("eps", "must be positive"));
    }
    Ok(ComplexGrid {
        height: a.height,
        width: a.width,
        data: a.data.iter().zip(&b.data).map(|(x, y)| x / (y + eps)).collect(),
    })
}

/// Maps a wrapped index to a signed shift. Indices above half the axis
/// length become negative; exactly half stays positive.
#[inline]
pub fn signed_shift(index: usize, len: usize) -> isize {
    if 2 * index > len {
        index as isize - len as isize
    } else {
        index as isize
    }
}

/// Score surface over circular displacements. Index `(0, 0)` is zero shift.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMap {
    pub grid: RealGrid,
}

/// Location of a response maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub row: usize,
    pub col: usize,
    pub value: f64,
    /// Signed, sub-cell refined shift along rows.
    pub dy: f64,
    /// Signed, sub-cell refined shift along columns.
    pub dx: f64,
}

impl ResponseMap {
    pub fn new(grid: RealGrid) -> Self {
        Self { grid }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.grid.dims()
    }

    /// First maximum in row-major order.
    pub fn argmax(&self) -> (usize, usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, &v) in self.grid.data().iter().enumerate() {
            if v > best.1 {
                best = (i, v);
            }
        }
        let w = self.grid.width();
        (best.0 / w, best.0 % w, best.1)
    }

    /// Bilinear sample with circular wrap.
    fn sample_wrapped(&self, y: f64, x: f64) -> f64 {
        let (y0, x0) = (y.floor(), x.floor());
        let (fy, fx) = (y - y0, x - x0);
        let (r, c) = (y0 as isize, x0 as isize);
        let g = &self.grid;
        (1.0 - fy) * ((1.0 - fx) * g.get_wrapped(r, c) + fx * g.get_wrapped(r, c + 1))
            + fy * ((1.0 - fx) * g.get_wrapped(r + 1, c) + fx * g.get_wrapped(r + 1, c + 1))
    }

    /// Centroid of a 3x3 neighborhood with values clamped at zero, re-centered
    /// on the running estimate until it stops moving. Starts at `(row, col)`
    /// and stays within one cell of it. Returns a signed shift.
    pub fn refine(&self, row: usize, col: usize) -> (f64, f64) {
        const MAX_STEPS: usize = 32;
        const TOL: f64 = 1e-4;
        let (h, w) = self.dims();
        let (mut py, mut px) = (0.0f64, 0.0f64);
        for _ in 0..MAX_STEPS {
            let mut sum = 0.0;
            let mut sy = 0.0;
            let mut sx = 0.0;
            for dr in -1isize..=1 {
                if h < 3 && dr != 0 {
                    continue;
                }
                for dc in -1isize..=1 {
                    if w < 3 && dc != 0 {
                        continue;
                    }
                    let v = self
                        .sample_wrapped(row as f64 + py + dr as f64, col as f64 + px + dc as f64)
                        .max(0.0);
                    sum += v;
                    sy += v * dr as f64;
                    sx += v * dc as f64;
                }
            }
            if sum <= 0.0 {
                break;
            }
            let (oy, ox) = (sy / sum, sx / sum);
            py = (py + oy).clamp(-1.0, 1.0);
            px = (px + ox).clamp(-1.0, 1.0);
            if oy.abs() < TOL && ox.abs() < TOL {
                break;
            }
        }
        (signed_shift(row, h) as f64 + py, signed_shift(col, w) as f64 + px)
    }

    /// Argmax followed by centroid refinement.
    pub fn peak(&self) -> Peak {
        let (row, col, value) = self.argmax();
        let (dy, dx) = self.refine(row, col);
        Peak {
            row,
            col,
            value,
            dy,
            dx,
        }
    }

    /// Rearranges so that zero shift sits at `(h/2, w/2)`.
    pub fn centered(&self) -> RealGrid {
        let (h, w) = self.dims();
        self.grid.circshift((h / 2) as isize, (w / 2) as isize)
    }
}
