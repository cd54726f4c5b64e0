//! Physical units and conversion into the dimensionless engine convention.
//!
//! Inside the engine, lengths are measured in `1/k` with `k = 2π/λ`, energies
//! in the recoil energy `E_r = h²/(2 m λ²)`, times in `ħ/E_r` and angular
//! frequencies in `E_r/ħ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planck constant, J s (exact, SI 2019).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Unified atomic mass unit, kg (CODATA 2018).
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Mass of ⁴⁰Ar in atomic mass units.
pub const ARGON40_MASS_U: f64 = 39.962_383_123_7;
/// Lattice laser wavelength used for the double-well potentials, m.
pub const LATTICE_WAVELENGTH: f64 = 811.775e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoilEnergy {
    pub joules: f64,
    /// `E_r / h` in Hz.
    pub hertz: f64,
}

/// `E_r = h² / (2 m λ²)` together with its frequency equivalent `E_r/h`.
pub fn recoil_energy(wavelength: f64, mass: f64) -> Result<RecoilEnergy> {
    if !(wavelength > 0.0 && wavelength.is_finite()) {
        return Err(Error::domain(format!("wavelength must be positive, got {wavelength}")));
    }
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::domain(format!("mass must be positive, got {mass}")));
    }
    let joules = PLANCK * PLANCK / (2.0 * mass * wavelength * wavelength);
    Ok(RecoilEnergy { joules, hertz: joules / PLANCK })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    pub wavelength: f64,
    pub particle_mass: f64,
    pub recoil_energy: f64,
}

impl UnitSystem {
    pub fn new(wavelength: f64, particle_mass: f64) -> Result<Self> {
        let er = recoil_energy(wavelength, particle_mass)?;
        Ok(Self { wavelength, particle_mass, recoil_energy: er.joules })
    }

    /// Metastable ⁴⁰Ar in the 811.775 nm lattice.
    pub fn argon40() -> Self {
        Self::new(LATTICE_WAVELENGTH, ARGON40_MASS_U * ATOMIC_MASS_UNIT)
            .expect("positive constants")
    }

    pub fn recoil_frequency_hz(&self) -> f64 {
        self.recoil_energy / PLANCK
    }

    /// Dimensionless `ħω/E_r` for a drive of ordinary frequency `nu` (Hz), `ω = 2πν`.
    pub fn omega_from_frequency(&self, nu_hz: f64) -> f64 {
        nu_hz / self.recoil_frequency_hz()
    }

    /// Dimensionless `ħω/E_r` for an angular frequency given in rad/s.
    pub fn omega_from_angular(&self, omega_rad_s: f64) -> f64 {
        omega_rad_s / (2.0 * std::f64::consts::PI * self.recoil_frequency_hz())
    }

    /// Seconds corresponding to a dimensionless time in `ħ/E_r`.
    pub fn seconds(&self, t: f64) -> f64 {
        t * PLANCK / (2.0 * std::f64::consts::PI * self.recoil_energy)
    }

    pub fn energy_in_recoil(&self, joules: f64) -> f64 {
        joules / self.recoil_energy
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argon_recoil_frequency() {
        // Independent arithmetic: E_r/h = h / (2 m λ²).
        let m = 39.962 * 1.660_539e-27;
        let lambda = 811.775e-9;
        let expected = 6.626_07e-34 / (2.0 * m * lambda * lambda);
        let er = recoil_energy(LATTICE_WAVELENGTH, ARGON40_MASS_U * ATOMIC_MASS_UNIT).unwrap();
        assert!((er.hertz - expected).abs() / expected < 1e-4);
        assert!((er.hertz - 7.6e3).abs() / 7.6e3 < 0.01, "{}", er.hertz);
    }

    #[test]
    fn doubling_wavelength_quarters_energy() {
        let m = ARGON40_MASS_U * ATOMIC_MASS_UNIT;
        let a = recoil_energy(800e-9, m).unwrap();
        let b = recoil_energy(1600e-9, m).unwrap();
        assert!((a.joules / b.joules - 4.0).abs() < 1e-12);
    }

    #[test]
    fn wavelength_rounding_shift() {
        let m = ARGON40_MASS_U * ATOMIC_MASS_UNIT;
        let a = recoil_energy(811e-9, m).unwrap();
        let b = recoil_energy(811.775e-9, m).unwrap();
        let rel = a.joules / b.joules - 1.0;
        let first_order = 2.0 * 0.775 / 811.0;
        assert!((rel - first_order).abs() < 1e-5, "{rel} vs {first_order}");
        assert!((rel - 0.0019).abs() < 1e-4);
    }

    #[test]
    fn rejects_non_positive_inputs() {
        assert!(recoil_energy(0.0, 1.0).is_err());
        assert!(recoil_energy(1.0, -1.0).is_err());
        assert!(recoil_energy(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn six_kilohertz_readings_differ_by_two_pi() {
        let u = UnitSystem::argon40();
        let nu = u.omega_from_frequency(6.0e3);
        let ang = u.omega_from_angular(6.0e3);
        assert!((nu / ang - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!((nu - 0.792).abs() < 0.01, "{nu}");
    }
}
