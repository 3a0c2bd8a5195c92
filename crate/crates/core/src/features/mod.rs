//! Cell-structured feature maps: HoG for both estimators and a color
//! histogram score for translation.

pub mod color;
pub mod hog;

use crate::error::{check_dims, Error, Result};
use crate::imgproc::Patch;
use crate::spectral::{dft2, ComplexGrid, RealGrid};

pub use color::{ColorHistModel, SearchRegion};
pub use hog::{extract_hog, HOG_CHANNELS};

/// `K` channels over an `h x w` cell grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: Vec<RealGrid>,
    cell_size: usize,
}

impl FeatureMap {
    pub fn new(channels: Vec<RealGrid>, cell_size: usize) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| Error::invalid("channels", "feature map needs at least one channel"))?;
        for ch in &channels {
            check_dims(first.dims(), ch.dims())?;
            if !ch.is_finite() {
                return Err(Error::NonFinite("feature map"));
            }
        }
        if cell_size == 0 {
            return Err(Error::invalid("cell_size", "must be positive"));
        }
        Ok(Self { channels, cell_size })
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn height(&self) -> usize {
        self.channels[0].height()
    }

    pub fn width(&self) -> usize {
        self.channels[0].width()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.channels[0].dims()
    }

    pub fn cell_size(&self) -> usize {
        self.cell_size
    }

    pub fn channels(&self) -> &[RealGrid] {
        &self.channels
    }

    pub fn channel(&self, k: usize) -> &RealGrid {
        &self.channels[k]
    }

    /// Per-channel forward DFTs.
    pub fn spectra(&self) -> Result<Vec<ComplexGrid>> {
        crate::par::map_slice(&self.channels, dft2).into_iter().collect()
    }

    /// `a·self + b·other`, channel by channel.
    pub fn blend(&self, a: f64, other: &FeatureMap, b: f64) -> Result<FeatureMap> {
        if self.num_channels() != other.num_channels() {
            return Err(Error::DimMismatch {
                expected: (self.num_channels(), 1),
                actual: (other.num_channels(), 1),
            });
        }
        check_dims(self.dims(), other.dims())?;
        let channels = self
            .channels
            .iter()
            .zip(&other.channels)
            .map(|(x, y)| {
                RealGrid::new(
                    x.height(),
                    x.width(),
                    x.data()
                        .iter()
                        .zip(y.data())
                        .map(|(p, q)| a * p + b * q)
                        .collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureMap {
            channels,
            cell_size: self.cell_size,
        })
    }

    pub fn energy(&self) -> f64 {
        self.channels.iter().map(RealGrid::energy).sum()
    }
}

/// Multiplies every channel element-wise by `window`.
pub fn apply_cosine_window(f: &FeatureMap, window: &RealGrid) -> Result<FeatureMap> {
    check_dims(f.dims(), window.dims())?;
    let channels = f
        .channels
        .iter()
        .map(|ch| ch.mul(window))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureMap {
        channels,
        cell_size: f.cell_size,
    })
}

/// Single-channel zero-mean intensity features at one pixel per cell. Used
/// as the grayscale alternative to HoG for phase correlation.
pub fn extract_gray(p: &Patch) -> Result<FeatureMap> {
    let g = p.image.to_gray();
    let mean = g.data().iter().sum::<f64>() / g.data().len() as f64;
    FeatureMap::new(vec![g.map(|v| v - mean)], 1)
}
