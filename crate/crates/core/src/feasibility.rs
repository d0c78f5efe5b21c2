//! Back-of-the-envelope feasibility estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boltzmann constant, J/K (CODATA 2018, exact).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Reduced Planck constant, J·s (CODATA 2018, exact).
pub const HBAR: f64 = 1.054_571_817e-34;

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} = {v} must be positive")))
    }
}

fn nonnegative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} = {v} must be nonnegative")))
    }
}

/// High-temperature mean occupation `k_B T / ħΩ`, with `Ω` in rad/s.
pub fn thermal_occupancy(temperature: f64, omega: f64) -> Result<f64> {
    positive("temperature", temperature)?;
    positive("mechanical frequency", omega)?;
    Ok(BOLTZMANN * temperature / (HBAR * omega))
}

/// Heating from laser phase noise, `4 g² n_phot S_φ̇ / κ²`. `g` and `κ` must
/// share units; the result carries the units of `S_φ̇`.
pub fn phase_noise_heating(g: f64, n_phot: f64, kappa: f64, s_phidot: f64) -> Result<f64> {
    nonnegative("g", g)?;
    nonnegative("n_phot", n_phot)?;
    nonnegative("S_phidot", s_phidot)?;
    positive("kappa", kappa)?;
    Ok(4.0 * g * g * n_phot * s_phidot / (kappa * kappa))
}

/// Peak intensity `2P/(πw²)` of a Gaussian beam in W/cm², from `P` in W and
/// the waist `w` in m.
pub fn tweezer_intensity(power: f64, waist: f64) -> Result<f64> {
    positive("power", power)?;
    positive("waist", waist)?;
    Ok(2.0 * power / (std::f64::consts::PI * waist * waist) * 1e-4)
}

/// Inputs of the feasibility calculator. Frequencies in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityInputs {
    /// K
    pub temperature: f64,
    pub mechanical_frequency: f64,
    pub g: f64,
    pub n_phot: f64,
    pub kappa: f64,
    /// Hz²/Hz
    pub s_phidot: f64,
    /// W
    pub power: f64,
    /// m
    pub waist: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub thermal_occupancy: f64,
    pub phase_noise_heating: f64,
    /// W/cm²
    pub tweezer_intensity: f64,
}

impl FeasibilityInputs {
    pub fn evaluate(&self) -> Result<FeasibilityReport> {
        Ok(FeasibilityReport {
            thermal_occupancy: thermal_occupancy(self.temperature, self.mechanical_frequency)?,
            phase_noise_heating: phase_noise_heating(self.g, self.n_phot, self.kappa, self.s_phidot)?,
            tweezer_intensity: tweezer_intensity(self.power, self.waist)?,
        })
    }
}
