//! Multi-channel linear correlation filter for translation.
//!
//! Training solves the channel-independent ridge problem in closed form:
//! `α̂ = ŷ / (Σ_k conj(Φ̂ₖ)·Φ̂ₖ + λ₁)` and `ĥₖ = α̂ · conj(Ψ̂ₖ)`, where `Ψ̂`
//! is the (running average of the) training feature spectrum. The filter is
//! learned on a `D` cell grid and evaluated on a larger `N` cell search
//! grid by zero-padding its spatial template around the center.
//!
//! Conjugation follows the correlation convention: a search patch holding
//! the training patch shifted by `+d` responds with a peak at `+d`.

use crate::error::{check_dims, Error, Result};
use crate::features::FeatureMap;
use crate::spectral::{self, dft2, idft2, signed_shift, ComplexGrid, RealGrid, ResponseMap};

/// Circularly-centered Gaussian: `1` at `(0, 0)`, decaying with the wrapped
/// distance from the origin.
pub fn gaussian_target(h: usize, w: usize, sigma: f64) -> Result<RealGrid> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma", "must be positive"));
    }
    let k = -0.5 / (sigma * sigma);
    Ok(RealGrid::from_fn(h, w, |r, c| {
        let dy = signed_shift(r, h) as f64;
        let dx = signed_shift(c, w) as f64;
        (k * (dy * dy + dx * dx)).exp()
    }))
}

/// Target bandwidth: a tenth of the geometric mean of the target size in cells.
pub fn default_sigma(target_cells: (f64, f64)) -> f64 {
    0.1 * (target_cells.0 * target_cells.1).sqrt()
}

/// Snapshot of a trained translation filter.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationModel {
    alpha_hat: ComplexGrid,
    psi_hat: Vec<ComplexGrid>,
    y_hat: ComplexGrid,
    lambda1: f64,
    train_dims: (usize, usize),
    search_dims: (usize, usize),
    /// `conj` of the padded template spectra at `search_dims`, one per channel.
    filter_hat: Vec<ComplexGrid>,
}

fn dual_weights(y_hat: &ComplexGrid, spectra: &[ComplexGrid], lambda1: f64) -> Result<ComplexGrid> {
    let (h, w) = y_hat.dims();
    let mut energy = ComplexGrid::zeros(h, w);
    for s in spectra {
        check_dims((h, w), s.dims())?;
        for (e, v) in energy.data_mut().iter_mut().zip(s.data()) {
            e.re += v.norm_sqr();
        }
    }
    spectral::ewise_div_safe(y_hat, &energy, lambda1)
}

impl TranslationModel {
    /// Trains on `x` with desired response `y` and evaluates on a
    /// `search_dims` cell grid. `search_dims - train_dims` must be even and
    /// non-negative in both axes so that the two grids share a center.
    pub fn train(x: &FeatureMap, y: &RealGrid, lambda1: f64, search_dims: (usize, usize)) -> Result<Self> {
        check_dims(x.dims(), y.dims())?;
        if !(lambda1 > 0.0) {
            return Err(Error::invalid("lambda1", "must be positive"));
        }
        let train_dims = x.dims();
        validate_search_dims(train_dims, search_dims)?;
        let y_hat = dft2(y)?;
        let psi_hat = x.spectra()?;
        let alpha_hat = dual_weights(&y_hat, &psi_hat, lambda1)?;
        let mut model = Self {
            alpha_hat,
            psi_hat,
            y_hat,
            lambda1,
            train_dims,
            search_dims,
            filter_hat: Vec::new(),
        };
        model.filter_hat = model.padded_filters()?;
        Ok(model)
    }

    pub fn alpha_hat(&self) -> &ComplexGrid {
        &self.alpha_hat
    }

    pub fn psi_hat(&self) -> &[ComplexGrid] {
        &self.psi_hat
    }

    pub fn y_hat(&self) -> &ComplexGrid {
        &self.y_hat
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn train_dims(&self) -> (usize, usize) {
        self.train_dims
    }

    pub fn search_dims(&self) -> (usize, usize) {
        self.search_dims
    }

    pub fn num_channels(&self) -> usize {
        self.psi_hat.len()
    }

    /// Filter spectra `ĥₖ = α̂ · conj(Ψ̂ₖ)` at the training size.
    pub fn filter_spectra(&self) -> Result<Vec<ComplexGrid>> {
        let alpha_hat = &self.alpha_hat;
        crate::par::map_slice(&self.psi_hat, |psi| {
            spectral::hadamard(alpha_hat, &spectral::conj(psi))
        })
        .into_iter()
        .collect()
    }

    /// Correlation templates zero-padded from the training to the search
    /// grid around the shared center, returned as conjugated spectra.
    fn padded_filters(&self) -> Result<Vec<ComplexGrid>> {
        let (dh, dw) = self.train_dims;
        let (nh, nw) = self.search_dims;
        let (oy, ox) = (nh / 2 - dh / 2, nw / 2 - dw / 2);
        let alpha_hat = &self.alpha_hat;
        crate::par::map_slice(&self.psi_hat, |psi| {
            // Spatial correlation template: F⁻¹(conj(ĥ)) = F⁻¹(conj(α̂)·Ψ̂).
            let t_hat = spectral::hadamard(&spectral::conj(alpha_hat), psi)?;
            let t = idft2(&t_hat)?;
            let padded = if (dh, dw) == (nh, nw) {
                t
            } else {
                let mut p = RealGrid::zeros(nh, nw);
                for r in 0..dh {
                    for c in 0..dw {
                        p.set(r + oy, c + ox, t.get(r, c));
                    }
                }
                p
            };
            Ok(spectral::conj(&dft2(&padded)?))
        })
        .into_iter()
        .collect()
    }

    /// Dense response over circular displacements of the search grid.
    pub fn respond(&self, z: &FeatureMap) -> Result<ResponseMap> {
        check_dims(self.search_dims, z.dims())?;
        if z.num_channels() != self.num_channels() {
            return Err(Error::DimMismatch {
                expected: (self.num_channels(), 1),
                actual: (z.num_channels(), 1),
            });
        }
        let spectra = z.spectra()?;
        let (nh, nw) = self.search_dims;
        let mut acc = ComplexGrid::zeros(nh, nw);
        for (f, zk) in self.filter_hat.iter().zip(&spectra) {
            for ((a, x), y) in acc.data_mut().iter_mut().zip(f.data()).zip(zk.data()) {
                *a += x * y;
            }
        }
        Ok(ResponseMap::new(idft2(&acc)?))
    }

    /// Linear-interpolation update: `Ψ̂ ← (1-λφ)Ψ̂ + λφ·Φ̂(x)` and
    /// `α̂ ← (1-λα)α̂ + λα·ŷ/(Σ|Φ̂(x)|² + λ₁)`.
    pub fn update(&self, x: &FeatureMap, lambda_phi: f64, lambda_alpha: f64) -> Result<Self> {
        for (name, v) in [("lambda_phi", lambda_phi), ("lambda_alpha", lambda_alpha)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(name, format!("must be in (0, 1], got {v}")));
            }
        }
        check_dims(self.train_dims, x.dims())?;
        if x.num_channels() != self.num_channels() {
            return Err(Error::DimMismatch {
                expected: (self.num_channels(), 1),
                actual: (x.num_channels(), 1),
            });
        }
        let spectra = x.spectra()?;
        let alpha_new = dual_weights(&self.y_hat, &spectra, self.lambda1)?;
        let psi_hat = self
            .psi_hat
            .iter()
            .zip(&spectra)
            .map(|(old, new)| old.blend(1.0 - lambda_phi, new, lambda_phi))
            .collect::<Result<Vec<_>>>()?;
        let alpha_hat = self
            .alpha_hat
            .blend(1.0 - lambda_alpha, &alpha_new, lambda_alpha)?;
        let mut model = Self {
            alpha_hat,
            psi_hat,
            y_hat: self.y_hat.clone(),
            lambda1: self.lambda1,
            train_dims: self.train_dims,
            search_dims: self.search_dims,
            filter_hat: Vec::new(),
        };
        model.filter_hat = model.padded_filters()?;
        Ok(model)
    }

    pub fn is_finite(&self) -> bool {
        self.alpha_hat.is_finite()
            && self.psi_hat.iter().all(ComplexGrid::is_finite)
            && self.filter_hat.iter().all(ComplexGrid::is_finite)
    }
}

fn validate_search_dims(train: (usize, usize), search: (usize, usize)) -> Result<()> {
    let ok = |d: usize, n: usize| n >= d && (n - d).is_multiple_of(2);
    if ok(train.0, search.0) && ok(train.1, search.1) {
        Ok(())
    } else {
        Err(Error::invalid(
            "search_dims",
            format!("{search:?} must be >= {train:?} with an even difference so the grids share a center"),
        ))
    }
}

/// Trains with the search grid equal to the training grid.
pub fn train_init(x: &FeatureMap, y: &RealGrid, lambda1: f64) -> Result<TranslationModel> {
    TranslationModel::train(x, y, lambda1, x.dims())
}

pub fn respond(m: &TranslationModel, z: &FeatureMap) -> Result<ResponseMap> {
    m.respond(z)
}

pub fn update_model(
    m: &TranslationModel,
    x: &FeatureMap,
    lambda_phi: f64,
    lambda_alpha: f64,
) -> Result<TranslationModel> {
    m.update(x, lambda_phi, lambda_alpha)
}

/// Sum of `|α̂|` over all bins.
pub fn alpha_l1(m: &TranslationModel) -> f64 {
    m.alpha_hat.data().iter().map(|c| c.norm()).sum()
}
