//! Run configuration: a strict TOML file, optionally layered over a built-in preset.
//!
//! ```toml
//! preset = "fig4a"          # optional; `--preset` on the command line wins
//!
//! [lattice]
//! v1 = 6.25
//! v2 = 5.40
//! phi_s = 0.0
//!
//! [drive]
//! waveform = { kind = "sawtooth_fourier", harmonics = 5 }
//! amplitude_s = 0.88
//! omega_d = 0.9             # or frequency_hz / angular_frequency_rad_s
//!
//! [scan]
//! axis = "omega_d"
//! grid = { start = 0.4, stop = 1.45, points = 22 }
//! ```
//!
//! Every table rejects unknown keys.

use std::path::{Path, PathBuf};

use dwf_core::dynamics::PopulationReadout;
use dwf_core::floquet::{PropagatorOptions, ScanAxis, Scanner};
use dwf_core::lattice::{DriveForm, DriveSpec, LatticeParams, Waveform};
use dwf_core::presets::{self, DynamicsSetup, Preset, ScanSetup, Variant};
use dwf_core::stationary::{EigenSolution, PlaneWaveBasis};
use dwf_core::units::{UnitSystem, ARGON40_MASS_U, ATOMIC_MASS_UNIT, LATTICE_WAVELENGTH};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub preset: Option<String>,
    pub units: Option<UnitsSection>,
    pub lattice: Option<LatticeSection>,
    pub drive: Option<DriveSection>,
    pub solver: Option<SolverSection>,
    pub scan: Option<ScanSection>,
    pub dynamics: Option<DynamicsSection>,
    pub variants: Option<Vec<VariantSection>>,
    pub output: Option<OutputSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitsSection {
    pub wavelength_nm: Option<f64>,
    /// Particle mass in atomic mass units.
    pub mass_u: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub v1: Option<f64>,
    pub v2: Option<f64>,
    pub phi_s: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    pub waveform: Option<Waveform>,
    pub amplitude_s: Option<f64>,
    /// ħω/E_r.
    pub omega_d: Option<f64>,
    /// Ordinary frequency ν; ω = 2πν.
    pub frequency_hz: Option<f64>,
    pub angular_frequency_rad_s: Option<f64>,
    /// Drive phase at t = 0.
    pub phase: Option<f64>,
    pub form: Option<DriveForm>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub n_max: Option<usize>,
    pub n_states_kept: Option<usize>,
    /// Quasienergy convergence target of the one-period propagator, E_r.
    pub propagator_tolerance: Option<f64>,
    pub max_steps: Option<usize>,
    pub weight_floor: Option<f64>,
    pub multi_state_ratio: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Values(Vec<f64>),
    Range(RangeSpec),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub axis: Option<ScanAxis>,
    pub grid: Option<GridSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialWell {
    #[default]
    Right,
    Left,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSection {
    pub t_final: Option<f64>,
    pub sample_dt: Option<f64>,
    pub readout: Option<PopulationReadout>,
    pub initial: Option<InitialWell>,
    /// Static states to propagate in; omit for the full plane-wave basis.
    pub n_states: Option<usize>,
    /// Largest |m| of the momentum orders written to the trace.
    pub orders: Option<usize>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSection {
    pub name: String,
    pub waveform: Option<Waveform>,
    pub amplitude_s: Option<f64>,
    pub phi_s: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub plots: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsRun {
    pub t_final: f64,
    pub sample_dt: f64,
    pub readout: PopulationReadout,
    pub initial: InitialWell,
    pub n_states: Option<usize>,
    pub orders: usize,
    pub tolerance: f64,
}

/// Fully resolved settings of one invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub units: UnitSystem,
    pub lattice: LatticeParams,
    /// `None` when neither the config nor a preset gives a drive frequency.
    pub drive: Option<DriveSpec>,
    pub form: DriveForm,
    pub basis: PlaneWaveBasis,
    pub n_states_kept: usize,
    pub propagator: PropagatorOptions,
    pub weight_floor: f64,
    pub multi_state_ratio: f64,
    pub scan: Option<ScanSetup>,
    pub dynamics: Option<DynamicsRun>,
    pub variants: Vec<Variant>,
    pub out_dir: Option<PathBuf>,
    pub plots: bool,
}

pub const DEFAULT_TRACE_ORDERS: usize = 2;

/// Parse TOML text; errors carry the dotted key path.
pub fn parse(text: &str) -> Result<ConfigFile> {
    let de = toml::de::Deserializer::parse(text).map_err(|e| CliError::config("<file>", e.to_string()))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        CliError::config(key, e.into_inner().message().trim().to_string())
    })
}

pub fn load(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text)
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::config(key, format!("must be positive and finite, got {v}")))
    }
}

fn finite(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::config(key, "must be finite"))
    }
}

fn drive_frequency(d: &DriveSection, units: &UnitSystem) -> Result<Option<f64>> {
    let given = [d.omega_d.is_some(), d.frequency_hz.is_some(), d.angular_frequency_rad_s.is_some()];
    if given.iter().filter(|&&g| g).count() > 1 {
        return Err(CliError::config(
            "drive",
            "give only one of omega_d, frequency_hz, angular_frequency_rad_s",
        ));
    }
    if let Some(w) = d.omega_d {
        return positive("drive.omega_d", w).map(Some);
    }
    if let Some(nu) = d.frequency_hz {
        return Ok(Some(units.omega_from_frequency(positive("drive.frequency_hz", nu)?)));
    }
    if let Some(w) = d.angular_frequency_rad_s {
        return Ok(Some(units.omega_from_angular(positive("drive.angular_frequency_rad_s", w)?)));
    }
    Ok(None)
}

fn grid_values(spec: &GridSpec) -> Result<Vec<f64>> {
    let grid = match spec {
        GridSpec::Values(v) => v.clone(),
        GridSpec::Range(r) => {
            if r.points == 0 {
                return Err(CliError::config("scan.grid.points", "must be at least 1"));
            }
            finite("scan.grid.start", r.start)?;
            finite("scan.grid.stop", r.stop)?;
            presets::linspace(r.start, r.stop, r.points)
        }
    };
    if grid.is_empty() {
        return Err(CliError::config("scan.grid", "grid is empty"));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(CliError::config("scan.grid", "grid values must be finite"));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(CliError::config("scan.grid", "grid must be strictly ascending"));
    }
    Ok(grid)
}

/// Merge `file` over `preset_name` (command-line choice first, then the file's own key).
pub fn resolve(file: ConfigFile, preset_name: Option<&str>) -> Result<RunConfig> {
    let name = preset_name.map(str::to_string).or(file.preset.clone());
    let preset: Option<Preset> = match &name {
        Some(n) => Some(presets::preset(n).map_err(|e| CliError::config("preset", e.to_string()))?),
        None => None,
    };

    let units = match &file.units {
        None => UnitSystem::argon40(),
        Some(u) => {
            let wavelength = positive("units.wavelength_nm", u.wavelength_nm.unwrap_or(LATTICE_WAVELENGTH * 1e9))?;
            let mass = positive("units.mass_u", u.mass_u.unwrap_or(ARGON40_MASS_U))?;
            UnitSystem::new(wavelength * 1e-9, mass * ATOMIC_MASS_UNIT)
                .map_err(|e| CliError::config("units", e.to_string()))?
        }
    };

    let base_lattice = preset.as_ref().map(|p| p.lattice);
    let lat = file.lattice.unwrap_or_default();
    let v1 = lat.v1.or(base_lattice.map(|l| l.v1)).ok_or_else(|| CliError::config("lattice.v1", "missing"))?;
    let v2 = lat.v2.or(base_lattice.map(|l| l.v2)).ok_or_else(|| CliError::config("lattice.v2", "missing"))?;
    let phi_s = lat.phi_s.or(base_lattice.map(|l| l.phi_s)).unwrap_or(0.0);
    finite("lattice.phi_s", phi_s)?;
    if !(v1 >= 0.0 && v1.is_finite()) {
        return Err(CliError::config("lattice.v1", format!("must be finite and non-negative, got {v1}")));
    }
    if !(v2 >= 0.0 && v2.is_finite()) {
        return Err(CliError::config("lattice.v2", format!("must be finite and non-negative, got {v2}")));
    }
    let lattice = LatticeParams { v1, v2, phi_s };

    let base_drive = preset.as_ref().map(|p| p.drive.clone());
    let d = file.drive.unwrap_or_default();
    let omega = drive_frequency(&d, &units)?.or(base_drive.as_ref().map(|b| b.omega_d()));
    let waveform = d
        .waveform
        .clone()
        .or(base_drive.as_ref().map(|b| b.waveform().clone()))
        .unwrap_or(Waveform::Sine);
    let amplitude = d.amplitude_s.or(base_drive.as_ref().map(|b| b.amplitude_s())).unwrap_or(0.0);
    finite("drive.amplitude_s", amplitude)?;
    let phase = d.phase.or(base_drive.as_ref().map(|b| b.phase())).unwrap_or(0.0);
    finite("drive.phase", phase)?;
    let drive = match omega {
        Some(w) => Some(
            DriveSpec::new(waveform.clone(), amplitude, w)
                .map_err(|e| CliError::config("drive", e.to_string()))?
                .with_phase(phase),
        ),
        None => None,
    };
    let form = d.form.or(preset.as_ref().map(|p| p.form)).unwrap_or_default();

    let solver = file.solver.unwrap_or_default();
    let basis = PlaneWaveBasis::new(solver.n_max.unwrap_or(PlaneWaveBasis::DEFAULT_N_MAX))
        .map_err(|e| CliError::config("solver.n_max", e.to_string()))?;
    let n_states_kept = solver.n_states_kept.unwrap_or(EigenSolution::DEFAULT_STATES_KEPT);
    if n_states_kept < 2 || n_states_kept > basis.dim() {
        return Err(CliError::config(
            "solver.n_states_kept",
            format!("must lie in [2, {}], got {n_states_kept}", basis.dim()),
        ));
    }
    let mut propagator = PropagatorOptions::default();
    if let Some(t) = solver.propagator_tolerance {
        propagator.tolerance = positive("solver.propagator_tolerance", t)?;
    }
    if let Some(m) = solver.max_steps {
        if m < propagator.initial_steps {
            return Err(CliError::config(
                "solver.max_steps",
                format!("must be at least {}", propagator.initial_steps),
            ));
        }
        propagator.max_steps = m;
    }
    let weight_floor = positive("solver.weight_floor", solver.weight_floor.unwrap_or(Scanner::DEFAULT_WEIGHT_FLOOR))?;
    let multi_state_ratio =
        positive("solver.multi_state_ratio", solver.multi_state_ratio.unwrap_or(Scanner::DEFAULT_MULTI_STATE_RATIO))?;

    let base_scan = preset.as_ref().and_then(|p| p.scan.clone());
    let scan = match (file.scan, base_scan) {
        (None, base) => base,
        (Some(s), base) => {
            let axis = s
                .axis
                .or(base.as_ref().map(|b| b.axis))
                .ok_or_else(|| CliError::config("scan.axis", "missing"))?;
            let grid = match &s.grid {
                Some(g) => grid_values(g)?,
                None => base.map(|b| b.grid).ok_or_else(|| CliError::config("scan.grid", "missing"))?,
            };
            Some(ScanSetup { axis, grid })
        }
    };

    let base_dyn: Option<DynamicsSetup> = preset.as_ref().and_then(|p| p.dynamics);
    let dynamics = match (file.dynamics, base_dyn) {
        (None, None) => None,
        (section, base) => {
            let s = section.unwrap_or_default();
            let t_final = s
                .t_final
                .or(base.map(|b| b.t_final))
                .ok_or_else(|| CliError::config("dynamics.t_final", "missing"))?;
            let sample_dt = s
                .sample_dt
                .or(base.map(|b| b.sample_dt))
                .ok_or_else(|| CliError::config("dynamics.sample_dt", "missing"))?;
            if let Some(n) = s.n_states {
                if n < 2 || n > basis.dim() {
                    return Err(CliError::config("dynamics.n_states", format!("must lie in [2, {}]", basis.dim())));
                }
            }
            let orders = s.orders.unwrap_or(DEFAULT_TRACE_ORDERS);
            if orders > basis.n_max() {
                return Err(CliError::config("dynamics.orders", format!("must not exceed n_max = {}", basis.n_max())));
            }
            Some(DynamicsRun {
                t_final: positive("dynamics.t_final", t_final)?,
                sample_dt: positive("dynamics.sample_dt", sample_dt)?,
                readout: s.readout.unwrap_or_default(),
                initial: s.initial.unwrap_or_default(),
                n_states: s.n_states,
                orders,
                tolerance: positive("dynamics.tolerance", s.tolerance.unwrap_or(1e-6))?,
            })
        }
    };

    let default_amplitude = drive.as_ref().map_or(0.0, |d| d.amplitude_s());
    let variants = match file.variants {
        Some(list) => list
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                let amplitude_s = finite(&format!("variants[{i}].amplitude_s"), v.amplitude_s.unwrap_or(default_amplitude))?;
                let phi_s = finite(&format!("variants[{i}].phi_s"), v.phi_s.unwrap_or(0.0))?;
                Ok(Variant { name: v.name, waveform: v.waveform.unwrap_or(Waveform::Sine), amplitude_s, phi_s })
            })
            .collect::<Result<Vec<_>>>()?,
        None => preset.as_ref().map(|p| p.variants.clone()).unwrap_or_default(),
    };

    let output = file.output.unwrap_or_default();
    Ok(RunConfig {
        preset: name,
        units,
        lattice,
        drive,
        form,
        basis,
        n_states_kept,
        propagator,
        weight_floor,
        multi_state_ratio,
        scan,
        dynamics,
        variants,
        out_dir: output.dir,
        plots: output.plots.unwrap_or(false),
    })
}

impl RunConfig {
    pub fn require_drive(&self) -> Result<&DriveSpec> {
        self.drive
            .as_ref()
            .ok_or_else(|| CliError::config("drive.omega_d", "missing (no drive frequency given)"))
    }

    pub fn require_dynamics(&self) -> Result<&DynamicsRun> {
        self.dynamics
            .as_ref()
            .ok_or_else(|| CliError::config("dynamics", "missing t_final and sample_dt"))
    }
}
