//! Built-in parameter sets for the published lattice and drive settings.
//!
//! Lattice depths and the amplitude `S = 0.88 E_r` are the published values.
//! Grids, sampling and the fig5 operating point are choices of this crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::ScanAxis;
use crate::lattice::{DriveForm, DriveSpec, LatticeParams, Waveform};
use crate::units::UnitSystem;

/// Drive amplitude of the frequency scans, E_r.
pub const FIG4A_AMPLITUDE: f64 = 0.88;
/// Drive frequency quoted as 6 kHz.
pub const SIX_KHZ: f64 = 6.0e3;
/// Floquet crossing amplitude for `(8.27, 2.68)` at the cyclic 6 kHz reading.
pub const FIG5_CDT_AMPLITUDE: f64 = 1.0592;
/// Mirror phase of the uncompensated lattice, rad.
pub const MIRROR_PHASE: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSetup {
    pub axis: ScanAxis,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsSetup {
    /// ħ/E_r.
    pub t_final: f64,
    pub sample_dt: f64,
}

/// One row of a symmetry comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub name: String,
    pub waveform: Waveform,
    pub amplitude_s: f64,
    pub phi_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub lattice: LatticeParams,
    pub drive: DriveSpec,
    pub form: DriveForm,
    pub scan: Option<ScanSetup>,
    pub dynamics: Option<DynamicsSetup>,
    pub variants: Vec<Variant>,
}

pub const NAMES: [&str; 7] = ["fig3a", "fig3b", "fig4a", "fig4b", "fig4b-angular", "fig5", "undriven"];

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// `ħω/E_r` for 6 kHz read as an ordinary frequency (ω = 2π·6 kHz).
pub fn six_khz_cyclic() -> f64 {
    UnitSystem::argon40().omega_from_frequency(SIX_KHZ)
}

/// `ħω/E_r` for 6 kHz read as an angular frequency (ω = 6000 rad/s).
pub fn six_khz_angular() -> f64 {
    UnitSystem::argon40().omega_from_angular(SIX_KHZ)
}

fn fig4a_lattice() -> LatticeParams {
    LatticeParams { v1: 6.25, v2: 5.40, phi_s: 0.0 }
}

fn fig4b_lattice() -> LatticeParams {
    LatticeParams { v1: 8.27, v2: 2.68, phi_s: 0.0 }
}

fn drive(waveform: Waveform, s: f64, omega: f64) -> DriveSpec {
    DriveSpec::new(waveform, s, omega).expect("preset drives are valid")
}

/// Sub-resonant frequency window of the crossing scans.
fn crossing_grid() -> ScanSetup {
    ScanSetup { axis: ScanAxis::OmegaD, grid: linspace(0.40, 1.45, 22) }
}

pub fn canonical_variants() -> Vec<Variant> {
    let v = |name: &str, waveform: Waveform, amplitude_s: f64, phi_s: f64| Variant {
        name: name.to_string(),
        waveform,
        amplitude_s,
        phi_s,
    };
    vec![
        v("static", Waveform::Sine, 0.0, 0.0),
        v("sine", Waveform::Sine, FIG5_CDT_AMPLITUDE, 0.0),
        v("sawtooth", Waveform::sawtooth(), FIG5_CDT_AMPLITUDE, 0.0),
        v("sine+phi_s", Waveform::Sine, FIG5_CDT_AMPLITUDE, MIRROR_PHASE),
    ]
}

pub fn preset(name: &str) -> Result<Preset> {
    let p = match name {
        "fig3a" => Preset {
            name: "fig3a",
            description: "quasienergies vs frequency, sine drive, S = 0.88",
            lattice: fig4a_lattice(),
            drive: drive(Waveform::Sine, FIG4A_AMPLITUDE, 0.634),
            form: DriveForm::Linearized,
            scan: Some(crossing_grid()),
            dynamics: None,
            variants: Vec::new(),
        },
        "fig3b" => Preset {
            name: "fig3b",
            description: "quasienergies vs frequency, five-harmonic sawtooth, S = 0.88",
            lattice: fig4a_lattice(),
            drive: drive(Waveform::sawtooth(), FIG4A_AMPLITUDE, 0.634),
            form: DriveForm::Linearized,
            scan: Some(crossing_grid()),
            dynamics: None,
            variants: Vec::new(),
        },
        "fig4a" => Preset {
            name: "fig4a",
            description: "effective splitting vs frequency, sine drive, S = 0.88",
            lattice: fig4a_lattice(),
            drive: drive(Waveform::Sine, FIG4A_AMPLITUDE, 1.0),
            form: DriveForm::Linearized,
            scan: Some(ScanSetup { axis: ScanAxis::OmegaD, grid: linspace(0.3, 3.0, 28) }),
            dynamics: Some(DynamicsSetup { t_final: 60.0, sample_dt: 0.25 }),
            variants: Vec::new(),
        },
        "fig4b" => Preset {
            name: "fig4b",
            description: "effective splitting vs amplitude at 6 kHz read as 2π·6 kHz",
            lattice: fig4b_lattice(),
            drive: drive(Waveform::Sine, 0.5, six_khz_cyclic()),
            form: DriveForm::Linearized,
            scan: Some(ScanSetup { axis: ScanAxis::AmplitudeS, grid: linspace(0.0, 1.6, 17) }),
            dynamics: Some(DynamicsSetup { t_final: 150.0, sample_dt: 0.5 }),
            variants: Vec::new(),
        },
        "fig4b-angular" => Preset {
            name: "fig4b-angular",
            description: "effective splitting vs amplitude at 6 kHz read as 6000 rad/s",
            lattice: fig4b_lattice(),
            drive: drive(Waveform::Sine, 0.1, six_khz_angular()),
            form: DriveForm::Linearized,
            scan: Some(ScanSetup { axis: ScanAxis::AmplitudeS, grid: linspace(0.0, 0.3, 13) }),
            dynamics: Some(DynamicsSetup { t_final: 150.0, sample_dt: 0.5 }),
            variants: Vec::new(),
        },
        "fig5" => {
            let omega = six_khz_cyclic();
            // 2π/Δ₁₂ for (8.27, 2.68)
            let tunneling_period = 44.117;
            Preset {
                name: "fig5",
                description: "tunneling at the CDT point for symmetric and symmetry-broken drives",
                lattice: fig4b_lattice(),
                drive: drive(Waveform::Sine, FIG5_CDT_AMPLITUDE, omega),
                form: DriveForm::Linearized,
                scan: None,
                dynamics: Some(DynamicsSetup { t_final: 3.0 * tunneling_period, sample_dt: 0.25 }),
                variants: canonical_variants(),
            }
        }
        "undriven" => Preset {
            name: "undriven",
            description: "free tunneling in the deep double well",
            lattice: fig4b_lattice(),
            drive: drive(Waveform::Sine, 0.0, six_khz_cyclic()),
            form: DriveForm::Linearized,
            scan: None,
            dynamics: Some(DynamicsSetup { t_final: 100.0, sample_dt: 0.5 }),
            variants: Vec::new(),
        },
        other => {
            return Err(Error::domain(format!("unknown preset `{other}`; known: {}", NAMES.join(", "))));
        }
    };
    Ok(p)
}
