//! Balanced photodetection of Stokes fluctuations and squeezing benchmarks.
//!
//! A polarization beam splitter at angle `φ` to the emitted linear
//! polarization, preceded by a phase plate adding `θ` between the field
//! components, feeds two photodiodes. The difference current, normalized to
//! shot noise, probes one Stokes combination per geometry; values below 1 are
//! squeezed. The prefactor uses the bare cavity rate `κ`, also when `κ_a ≠ 0`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::analytic::{FrequencyGrid, StokesSpectra};
use crate::error::{Error, Result};
use crate::model::{DerivedParams, LaserParams};

/// The six detection set-ups with known Stokes combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionGeometry {
    /// `φ = 0`: intensity noise `(δS1²)`.
    Intensity,
    /// `φ = π/4, θ = 0`: `(δS2²)`.
    Diagonal,
    /// `φ = π/4, θ = π/2`: `(δS3²)`.
    Circular,
    /// `φ = π/4, θ = π/4`: `(δS2²) + (δS3²) + 2(δS2δS3)`.
    DiagonalCircular,
    /// `φ = π/8, θ = 0`: `(δS1²) + (δS2²) + 2(δS1δS2)`.
    IntensityDiagonal,
    /// `φ = π/8, θ = π/2`: `(δS1²) + (δS3²) + 2(δS1δS3)`.
    IntensityCircular,
}

impl DetectionGeometry {
    pub const ALL: [DetectionGeometry; 6] = [
        DetectionGeometry::Intensity,
        DetectionGeometry::Diagonal,
        DetectionGeometry::Circular,
        DetectionGeometry::DiagonalCircular,
        DetectionGeometry::IntensityDiagonal,
        DetectionGeometry::IntensityCircular,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DetectionGeometry::Intensity => "intensity",
            DetectionGeometry::Diagonal => "diagonal",
            DetectionGeometry::Circular => "circular",
            DetectionGeometry::DiagonalCircular => "diagonal_circular",
            DetectionGeometry::IntensityDiagonal => "intensity_diagonal",
            DetectionGeometry::IntensityCircular => "intensity_circular",
        }
    }

    /// `(φ, θ)` in radians. `θ` is irrelevant for `φ = 0` and reported as 0.
    pub fn angles(&self) -> (f64, f64) {
        match self {
            DetectionGeometry::Intensity => (0.0, 0.0),
            DetectionGeometry::Diagonal => (FRAC_PI_4, 0.0),
            DetectionGeometry::Circular => (FRAC_PI_4, FRAC_PI_2),
            DetectionGeometry::DiagonalCircular => (FRAC_PI_4, FRAC_PI_4),
            DetectionGeometry::IntensityDiagonal => (FRAC_PI_8, 0.0),
            DetectionGeometry::IntensityCircular => (FRAC_PI_8, FRAC_PI_2),
        }
    }

    /// Looks up a geometry by its angles (within 1e−9 rad).
    pub fn from_angles(phi: f64, theta: f64) -> Result<Self> {
        let close = |a: f64, b: f64| (a - b).abs() < 1e-9;
        if close(phi, 0.0) {
            return Ok(DetectionGeometry::Intensity);
        }
        DetectionGeometry::ALL
            .into_iter()
            .find(|g| {
                let (p, t) = g.angles();
                close(p, phi) && close(t, theta)
            })
            .ok_or_else(|| Error::UnsupportedGeometry(format!("phi = {phi}, theta = {theta}")))
    }

    /// Weights of `(s11, s22, s33, s23, s12, s13)` inside the bracket, and the
    /// prefactor multiplier of `κ/n_x`.
    fn combination(&self) -> (f64, [f64; 6]) {
        match self {
            DetectionGeometry::Intensity => (2.0, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            DetectionGeometry::Diagonal => (2.0, [0.0, 1.0, 0.0, 0.0, 0.0, 0.0]),
            DetectionGeometry::Circular => (2.0, [0.0, 0.0, 1.0, 0.0, 0.0, 0.0]),
            DetectionGeometry::DiagonalCircular => (1.0, [0.0, 1.0, 1.0, 2.0, 0.0, 0.0]),
            DetectionGeometry::IntensityDiagonal => (1.0, [1.0, 1.0, 0.0, 0.0, 2.0, 0.0]),
            DetectionGeometry::IntensityCircular => (1.0, [1.0, 0.0, 1.0, 0.0, 0.0, 2.0]),
        }
    }
}

impl fmt::Display for DetectionGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectionGeometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectionGeometry::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::UnsupportedGeometry(s.to_string()))
    }
}

/// Shot-noise-normalized difference-current spectrum `(δi−²)_Ω / <i+>`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSpectrum {
    pub geometry: DetectionGeometry,
    pub grid: FrequencyGrid,
    pub values: Vec<f64>,
}

pub fn detection_spectrum(
    spectra: &StokesSpectra,
    geometry: DetectionGeometry,
    params: &LaserParams,
    derived: &DerivedParams,
) -> DetectionSpectrum {
    let (mult, w) = geometry.combination();
    let pref = mult * params.kappa / derived.n_x;
    let values = (0..spectra.len())
        .map(|i| {
            let bracket = w[0] * spectra.s11[i]
                + w[1] * spectra.s22[i]
                + w[2] * spectra.s33[i]
                + w[3] * spectra.s23[i]
                + w[4] * spectra.s12[i]
                + w[5] * spectra.s13[i];
            1.0 + pref * bracket
        })
        .collect();
    DetectionSpectrum {
        geometry,
        grid: spectra.grid.clone(),
        values,
    }
}

/// Zero-frequency intensity-difference noise for a regular pump without
/// dichroism, with two reference lasers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SqueezingAtZero {
    pub r: f64,
    /// Equally living, spin-degenerate levels: `1 + ½ (5−r)/(r−1) · r/(r−1)`.
    pub this_laser: f64,
    /// Two-level laser without degeneracy: `1 + ½ (5−r)/(r−1)`.
    pub nondegenerate_ref: f64,
    /// Short-lived lower level: `1 + (3−r)/(r−1) · r/(r−1)`.
    pub short_lower_ref: f64,
}

pub fn squeezing_at_zero(r: f64) -> Result<SqueezingAtZero> {
    if !r.is_finite() {
        return Err(Error::InvalidParameter {
            name: "pump_r",
            reason: format!("{r} is not finite"),
        });
    }
    if r <= 1.0 {
        return Err(Error::BelowThreshold(r));
    }
    let x = r - 1.0;
    let degeneracy = r / x;
    Ok(SqueezingAtZero {
        r,
        this_laser: 1.0 + 0.5 * (5.0 - r) / x * degeneracy,
        nondegenerate_ref: 1.0 + 0.5 * (5.0 - r) / x,
        short_lower_ref: 1.0 + (3.0 - r) / x * degeneracy,
    })
}
