//! Angle grids, sampled spectra and peak picking shared by both estimators.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default search step, 0.02°.
pub const DEFAULT_GRID_STEP: f64 = 0.02 * std::f64::consts::PI / 180.0;

/// Largest accepted grid step (radians).
pub const MAX_GRID_STEP: f64 = 0.1;

pub fn validate_grid_step(step: f64) -> Result<()> {
    if step > 0.0 && step <= MAX_GRID_STEP {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "grid step must lie in (0, {MAX_GRID_STEP}] rad, got {step}"
        )))
    }
}

/// Strictly increasing grid over `(−π/2, π/2]`, anchored at `π/2` so that
/// integer multiples of the step (e.g. whole degrees for a 0.02° step) are
/// sampled exactly up to rounding.
pub fn angle_grid(step: f64) -> Vec<f64> {
    let count = (std::f64::consts::PI / step).ceil() as usize;
    let mut grid: Vec<f64> = (0..=count)
        .map(|i| FRAC_PI_2 - i as f64 * step)
        .filter(|&theta| theta > -FRAC_PI_2)
        .collect();
    grid.reverse();
    grid
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl Spectrum {
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn max(&self) -> f64 {
        self.values[self.argmax()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ANM", alias = "anm")]
    Anm,
    #[serde(rename = "MUSIC", alias = "music")]
    Music,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Anm => "ANM",
            Method::Music => "MUSIC",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "anm" => Ok(Method::Anm),
            "music" => Ok(Method::Music),
            other => Err(Error::Config(format!("unknown estimator '{other}'"))),
        }
    }
}

/// `K` direction estimates in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct DoaEstimate {
    /// Radians, ascending.
    pub angles: Vec<f64>,
    /// Spectrum value at each returned angle.
    pub peak_values: Vec<f64>,
    pub method: Method,
    /// Set when the spectrum had fewer than `K` local maxima (slots filled
    /// with the largest remaining samples) or when the ANM solver stopped at
    /// its iteration limit.
    pub degraded: bool,
    pub solver_iterations: Option<usize>,
}

/// Picks the `k` strongest strict local maxima of `spectrum`.
///
/// Equal peak values are ordered by angle, smaller first. With `refine`, each
/// interior peak is moved to the vertex of the parabola through its two
/// neighbours, clamped to the bracketing grid interval.
pub fn pick_peaks(spectrum: &Spectrum, k: usize, refine: bool, method: Method) -> Result<DoaEstimate> {
    let n = spectrum.values.len();
    if k == 0 {
        return Err(Error::Config("number of targets must be >= 1".into()));
    }
    if n < 3 || spectrum.grid.len() != n {
        return Err(Error::Dimension(format!(
            "peak picking needs a grid of at least 3 samples, got {n}"
        )));
    }
    if k > n {
        return Err(Error::Dimension(format!("cannot pick {k} peaks from {n} grid samples")));
    }
    let v = &spectrum.values;
    let is_peak = |i: usize| {
        let left = i == 0 || v[i] > v[i - 1];
        let right = i + 1 == n || v[i] > v[i + 1];
        left && right
    };
    // descending by value, then ascending by index
    let by_strength = |a: &usize, b: &usize| v[*b].total_cmp(&v[*a]).then(a.cmp(b));

    let mut peaks: Vec<usize> = (0..n).filter(|&i| is_peak(i)).collect();
    peaks.sort_by(by_strength);
    peaks.truncate(k);

    let degraded = peaks.len() < k;
    if degraded {
        let mut rest: Vec<usize> = (0..n).filter(|i| !peaks.contains(i)).collect();
        rest.sort_by(by_strength);
        peaks.extend(rest.into_iter().take(k - peaks.len()));
    }

    let mut picked: Vec<(f64, f64)> = peaks
        .into_iter()
        .map(|i| {
            if refine && i > 0 && i + 1 < n {
                refine_parabolic(&spectrum.grid, v, i)
            } else {
                (spectrum.grid[i], v[i])
            }
        })
        .collect();
    picked.sort_by(|a, b| a.0.total_cmp(&b.0));

    Ok(DoaEstimate {
        angles: picked.iter().map(|p| p.0).collect(),
        peak_values: picked.iter().map(|p| p.1).collect(),
        method,
        degraded,
        solver_iterations: None,
    })
}

fn refine_parabolic(grid: &[f64], v: &[f64], i: usize) -> (f64, f64) {
    let (ym, y0, yp) = (v[i - 1], v[i], v[i + 1]);
    let curvature = ym - 2.0 * y0 + yp;
    if !(curvature < 0.0) || !curvature.is_finite() {
        return (grid[i], y0);
    }
    let delta = (0.5 * (ym - yp) / curvature).clamp(-1.0, 1.0);
    let angle = if delta >= 0.0 {
        grid[i] + delta * (grid[i + 1] - grid[i])
    } else {
        grid[i] + delta * (grid[i] - grid[i - 1])
    };
    let value = y0 - 0.25 * (ym - yp) * delta;
    (angle, value)
}
