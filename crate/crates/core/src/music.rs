//! SE-only MUSIC baseline.
//!
//! Uses the sample covariance of the `M` sensing-element channels and the
//! noise subspace spanned by its `M − K` smallest eigenvectors. When the
//! boundary eigenvalue is repeated any orthonormal completion is taken; the
//! pseudo-spectrum only depends on the projector onto the subspace, so the
//! choice does not matter unless the degenerate eigenspace straddles the
//! signal/noise split.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{hermitian_eig, ComplexMatrix};
use crate::scene::{se_frequency, ula_steering, EchoData};
use crate::spectrum::{angle_grid, pick_peaks, validate_grid_step, DoaEstimate, Method, Spectrum};

/// Floor on `‖E_nᴴ·b(θ)‖²` keeping the pseudo-spectrum finite.
pub const DENOMINATOR_FLOOR: f64 = 1e-24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MusicConfig {
    /// Radians.
    pub grid_step: f64,
    pub refine: bool,
}

impl Default for MusicConfig {
    fn default() -> Self {
        Self {
            grid_step: crate::spectrum::DEFAULT_GRID_STEP,
            refine: true,
        }
    }
}

impl MusicConfig {
    pub fn validate(&self) -> Result<()> {
        validate_grid_step(self.grid_step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MusicSettings {
    pub grid_step_deg: f64,
    pub refine: bool,
}

impl Default for MusicSettings {
    fn default() -> Self {
        let d = MusicConfig::default();
        Self {
            grid_step_deg: d.grid_step.to_degrees(),
            refine: d.refine,
        }
    }
}

impl MusicSettings {
    pub fn resolve(&self) -> Result<MusicConfig> {
        let cfg = MusicConfig {
            grid_step: self.grid_step_deg.to_radians(),
            refine: self.refine,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `Y·Yᴴ / L`.
pub fn sample_covariance(echo: &EchoData) -> ComplexMatrix {
    let y = &echo.y;
    (y * y.adjoint()).unscale(y.ncols() as f64)
}

/// Orthonormal basis of the `M − K` dimensional noise subspace.
pub fn noise_subspace(covariance: &ComplexMatrix, k: usize) -> Result<ComplexMatrix> {
    let m = covariance.nrows();
    if k >= m {
        return Err(Error::DegenerateSubspace { k, m });
    }
    let eig = hermitian_eig(covariance)?;
    Ok(eig.eigenvectors.columns(0, m - k).into_owned())
}

/// `‖E_nᴴ·b(θ)‖²`.
pub fn noise_projection(noise: &ComplexMatrix, theta: f64) -> f64 {
    let b = ula_steering(noise.nrows(), se_frequency(theta));
    (noise.adjoint() * b).norm_squared()
}

pub fn music_spectrum(noise: &ComplexMatrix, grid: &[f64]) -> Spectrum {
    let values = grid
        .iter()
        .map(|&theta| 1.0 / noise_projection(noise, theta).max(DENOMINATOR_FLOOR))
        .collect();
    Spectrum {
        grid: grid.to_vec(),
        values,
    }
}

pub fn estimate_music(echo: &EchoData, k: usize, cfg: &MusicConfig) -> Result<DoaEstimate> {
    cfg.validate()?;
    if k == 0 {
        return Err(Error::Config("number of targets must be >= 1".into()));
    }
    let noise = noise_subspace(&sample_covariance(echo), k)?;
    let spectrum = music_spectrum(&noise, &angle_grid(cfg.grid_step));
    pick_peaks(&spectrum, k, cfg.refine, Method::Music)
}
