//! Bichromatic double-well potential and its time-periodic drive.
//!
//! Coordinates are `x = k·x_phys` with `k = 2π/λ`; one unit cell of the long
//! lattice spans `x ∈ [-π, π)`. The cell centre `x = 0` is the symmetry
//! point of the double well.

use std::f64::consts::{FRAC_PI_3, PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Depths of the two standing waves in recoil units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeParams {
    /// Depth of the λ/2-period lattice.
    pub v1: f64,
    /// Depth of the λ-period lattice.
    pub v2: f64,
    /// Phase of the long lattice relative to the short one; 0 is a symmetric double well.
    #[serde(default)]
    pub phi_s: f64,
}

impl LatticeParams {
    pub fn new(v1: f64, v2: f64, phi_s: f64) -> Result<Self> {
        let p = Self { v1, v2, phi_s };
        p.validate()?;
        Ok(p)
    }

    pub fn symmetric(v1: f64, v2: f64) -> Result<Self> {
        Self::new(v1, v2, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v1 >= 0.0 && self.v1.is_finite()) || !(self.v2 >= 0.0 && self.v2.is_finite()) {
            return Err(Error::domain(format!(
                "lattice depths must be finite and non-negative (v1={}, v2={})",
                self.v1, self.v2
            )));
        }
        if !self.phi_s.is_finite() {
            return Err(Error::domain("phi_s must be finite"));
        }
        Ok(())
    }
}

/// `V₁cos²(x) + V₂cos²(x/2 + φ_s/2)`.
pub fn static_potential(params: &LatticeParams, x: f64) -> f64 {
    let a = x.cos();
    let b = (0.5 * x + 0.5 * params.phi_s).cos();
    params.v1 * a * a + params.v2 * b * b
}

/// One sinusoidal component `amplitude · sin(order·θ + phase)` of a drive waveform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Harmonic {
    pub order: u32,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "WaveformRepr")]
pub enum Waveform {
    Sine,
    /// Band-limited sawtooth `Σ_{m=1..M} (-1)^{m+1} sin(mθ)/m`, rescaled to unit peak.
    SawtoothFourier { harmonics: u32 },
    /// User-supplied Fourier series, used as given (no peak normalization).
    CustomFourier { harmonics: Vec<Harmonic> },
}

// Flat form used for parsing: serde would accept stray keys next to a unit
// variant of an internally tagged enum.
#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum WaveformKind {
    Sine,
    SawtoothFourier,
    CustomFourier,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum HarmonicsRepr {
    Count(u32),
    List(Vec<Harmonic>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WaveformRepr {
    kind: WaveformKind,
    harmonics: Option<HarmonicsRepr>,
}

impl TryFrom<WaveformRepr> for Waveform {
    type Error = String;

    fn try_from(r: WaveformRepr) -> std::result::Result<Self, String> {
        match (r.kind, r.harmonics) {
            (WaveformKind::Sine, None) => Ok(Waveform::Sine),
            (WaveformKind::Sine, Some(_)) => Err("sine takes no `harmonics`".into()),
            (WaveformKind::SawtoothFourier, None) => Ok(Waveform::sawtooth()),
            (WaveformKind::SawtoothFourier, Some(HarmonicsRepr::Count(harmonics))) => {
                Ok(Waveform::SawtoothFourier { harmonics })
            }
            (WaveformKind::CustomFourier, Some(HarmonicsRepr::List(harmonics))) => {
                Ok(Waveform::CustomFourier { harmonics })
            }
            (WaveformKind::SawtoothFourier, Some(_)) => Err("sawtooth_fourier needs an integer `harmonics`".into()),
            (WaveformKind::CustomFourier, _) => Err("custom_fourier needs a list of `harmonics`".into()),
        }
    }
}

impl Waveform {
    pub const DEFAULT_SAWTOOTH_HARMONICS: u32 = 5;

    pub fn sawtooth() -> Self {
        Waveform::SawtoothFourier { harmonics: Self::DEFAULT_SAWTOOTH_HARMONICS }
    }

    pub fn name(&self) -> String {
        match self {
            Waveform::Sine => "sine".into(),
            Waveform::SawtoothFourier { harmonics } => format!("sawtooth{harmonics}"),
            Waveform::CustomFourier { .. } => "custom".into(),
        }
    }

    fn harmonics(&self) -> Result<Vec<Harmonic>> {
        match self {
            Waveform::Sine => Ok(vec![Harmonic { order: 1, amplitude: 1.0, phase: 0.0 }]),
            Waveform::SawtoothFourier { harmonics } => {
                if *harmonics == 0 {
                    return Err(Error::domain("sawtooth needs at least one harmonic"));
                }
                let raw: Vec<Harmonic> = (1..=*harmonics)
                    .map(|m| Harmonic {
                        order: m,
                        amplitude: if m % 2 == 1 { 1.0 } else { -1.0 } / m as f64,
                        phase: 0.0,
                    })
                    .collect();
                let peak = peak_abs(&raw);
                Ok(raw
                    .into_iter()
                    .map(|h| Harmonic { amplitude: h.amplitude / peak, ..h })
                    .collect())
            }
            Waveform::CustomFourier { harmonics } => {
                if harmonics.is_empty() {
                    return Err(Error::domain("custom waveform has no harmonics"));
                }
                if harmonics.iter().any(|h| !h.amplitude.is_finite() || !h.phase.is_finite()) {
                    return Err(Error::domain("custom waveform has non-finite coefficients"));
                }
                Ok(harmonics.clone())
            }
        }
    }
}

fn eval_series(harmonics: &[Harmonic], theta: f64) -> f64 {
    harmonics
        .iter()
        .map(|h| h.amplitude * (h.order as f64 * theta + h.phase).sin())
        .sum()
}

fn peak_abs(harmonics: &[Harmonic]) -> f64 {
    let max_order = harmonics.iter().map(|h| h.order).max().unwrap_or(1).max(1);
    let samples = 2048 * max_order as usize;
    let step = TAU / samples as f64;
    let (mut best_theta, mut best) = (0.0, -1.0);
    for i in 0..samples {
        let theta = i as f64 * step;
        let v = eval_series(harmonics, theta).abs();
        if v > best {
            best = v;
            best_theta = theta;
        }
    }
    // golden-section polish inside the bracketing samples
    let (mut a, mut b) = (best_theta - step, best_theta + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if eval_series(harmonics, c).abs() > eval_series(harmonics, d).abs() {
            b = d;
        } else {
            a = c;
        }
    }
    best.max(eval_series(harmonics, 0.5 * (a + b)).abs())
}

/// Waveform `f(t)`, drive amplitude `S` and angular frequency `ω_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveSpec {
    waveform: Waveform,
    amplitude_s: f64,
    omega_d: f64,
    /// Drive phase at `t = 0`, in radians of `ω_d t`.
    phase: f64,
    harmonics: Vec<Harmonic>,
}

impl DriveSpec {
    pub fn new(waveform: Waveform, amplitude_s: f64, omega_d: f64) -> Result<Self> {
        if !(omega_d > 0.0 && omega_d.is_finite()) {
            return Err(Error::domain(format!("omega_d must be positive, got {omega_d}")));
        }
        if !(amplitude_s >= 0.0 && amplitude_s.is_finite()) {
            return Err(Error::domain(format!("amplitude_s must be non-negative, got {amplitude_s}")));
        }
        let harmonics = waveform.harmonics()?;
        Ok(Self { waveform, amplitude_s, omega_d, phase: 0.0, harmonics })
    }

    pub fn sine(amplitude_s: f64, omega_d: f64) -> Result<Self> {
        Self::new(Waveform::Sine, amplitude_s, omega_d)
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn with_amplitude(&self, amplitude_s: f64) -> Result<Self> {
        Ok(Self::new(self.waveform.clone(), amplitude_s, self.omega_d)?.with_phase(self.phase))
    }

    pub fn with_omega(&self, omega_d: f64) -> Result<Self> {
        Ok(Self::new(self.waveform.clone(), self.amplitude_s, omega_d)?.with_phase(self.phase))
    }

    pub fn waveform(&self) -> &Waveform {
        &self.waveform
    }
    pub fn amplitude_s(&self) -> f64 {
        self.amplitude_s
    }
    pub fn omega_d(&self) -> f64 {
        self.omega_d
    }
    pub fn phase(&self) -> f64 {
        self.phase
    }
    pub fn period(&self) -> f64 {
        TAU / self.omega_d
    }
    pub fn harmonics(&self) -> &[Harmonic] {
        &self.harmonics
    }

    /// Dimensionless `f(t)`.
    pub fn value(&self, t: f64) -> f64 {
        eval_series(&self.harmonics, self.omega_d * t + self.phase)
    }

    /// Complex coefficient `f_k` of `f(t) = Σ_k f_k e^{ikω_d t}`.
    pub fn fourier_coefficient(&self, k: i64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for h in &self.harmonics {
            let m = h.order as i64;
            let psi = h.order as f64 * self.phase + h.phase;
            // a sin(mθ + ψ) = a/(2i) (e^{i(mθ+ψ)} - e^{-i(mθ+ψ)})
            let half = Complex64::new(0.0, -0.5 * h.amplitude);
            if m == 0 {
                if k == 0 {
                    acc += h.amplitude * psi.sin();
                }
                continue;
            }
            if k == m {
                acc += half * Complex64::from_polar(1.0, psi);
            }
            if k == -m {
                acc -= half * Complex64::from_polar(1.0, -psi);
            }
        }
        acc
    }

    pub fn max_harmonic(&self) -> u32 {
        self.harmonics.iter().map(|h| h.order).max().unwrap_or(0)
    }
}

/// `f(t)` for the given drive.
pub fn drive_value(spec: &DriveSpec, t: f64) -> f64 {
    spec.value(t)
}

/// RMS of `f(t + T/2) + f(t)` over one period; zero iff the drive is
/// half-period antisymmetric.
pub fn symmetry_defect(spec: &DriveSpec) -> f64 {
    // Parseval: g_k = (1 + (-1)^k) f_k, so only even k survive.
    let kmax = spec.max_harmonic() as i64;
    let mut sum = 0.0;
    for k in -kmax..=kmax {
        if k % 2 == 0 {
            sum += (2.0 * spec.fourier_coefficient(k)).norm_sqr();
        }
    }
    sum.sqrt()
}

/// Parameters of the literal angle-modulated long lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactDrive {
    /// Peak deviation of the incidence angle from 60°, rad.
    pub epsilon: f64,
    /// Number of long-lattice periods between the mirror and the cell under study.
    #[serde(default = "ExactDrive::default_mirror_cells")]
    pub mirror_cells: u32,
}

impl ExactDrive {
    /// 120 µm from the mirror at λ = 811.775 nm.
    pub const DEFAULT_MIRROR_CELLS: u32 = 148;

    fn default_mirror_cells() -> u32 {
        Self::DEFAULT_MIRROR_CELLS
    }

    /// Angle deviation whose linearized drive has amplitude `amplitude_s`.
    pub fn for_amplitude(params: &LatticeParams, amplitude_s: f64, mirror_cells: u32) -> Result<Self> {
        let slope = drive_calibration(params, mirror_cells);
        if slope.abs() < 1e-14 {
            return Err(Error::domain("exact drive does not couple to sin(kx) for these parameters"));
        }
        Ok(Self { epsilon: amplitude_s / slope, mirror_cells })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriveForm {
    #[default]
    Linearized,
    Exact(ExactDrive),
}

fn exact_long_lattice_arg(params: &LatticeParams, exact: &ExactDrive, x: f64, f: f64) -> f64 {
    let distance = TAU * exact.mirror_cells as f64 + x;
    distance * (FRAC_PI_3 + exact.epsilon * f).cos() + 0.5 * params.phi_s
}

/// Full potential at `(x, t)`.
///
/// `Linearized` adds `S sin(x) f(t)` to the static lattice. `Exact` evaluates
/// `V₁cos²(x) + V₂cos²(x_m cos(π/3 + ε f(t)) + φ_s/2)` with `x_m` the distance
/// from the mirror; the amplitude stored in `spec` is then ignored.
pub fn total_potential(params: &LatticeParams, form: &DriveForm, spec: &DriveSpec, x: f64, t: f64) -> f64 {
    let f = spec.value(t);
    match form {
        DriveForm::Linearized => static_potential(params, x) + spec.amplitude_s() * x.sin() * f,
        DriveForm::Exact(exact) => {
            let a = x.cos();
            let b = exact_long_lattice_arg(params, exact, x, f).cos();
            params.v1 * a * a + params.v2 * b * b
        }
    }
}

/// `dS/dε`: coefficient of `sin(x)` in the first-order expansion of the exact
/// potential about `ε = 0`, projected over one cell.
pub fn drive_calibration(params: &LatticeParams, mirror_cells: u32) -> f64 {
    // ∂V/∂ε at ε=0, f=1: V₂ sin(π/3) (2πc + x) sin(x + φ_s)
    let n = 2048;
    let h = TAU / n as f64;
    let sin60 = FRAC_PI_3.sin();
    let mut acc = 0.0;
    for i in 0..n {
        let x = -PI + (i as f64 + 0.5) * h;
        let deriv = params.v2 * sin60 * (TAU * mirror_cells as f64 + x) * (x + params.phi_s).sin();
        acc += deriv * x.sin();
    }
    acc * h / PI
}

/// `max |V(-x, t+T/2) - V(x, t)|` sampled on an `nx × nt` grid over one cell and period.
pub fn generalized_parity_defect(
    params: &LatticeParams,
    form: &DriveForm,
    spec: &DriveSpec,
    nx: usize,
    nt: usize,
) -> f64 {
    let period = spec.period();
    let mut worst: f64 = 0.0;
    for i in 0..nx {
        let x = -PI + TAU * (i as f64 + 0.37) / nx as f64;
        for j in 0..nt {
            let t = period * j as f64 / nt as f64;
            let a = total_potential(params, form, spec, -x, t + 0.5 * period);
            let b = total_potential(params, form, spec, x, t);
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> LatticeParams {
        LatticeParams::symmetric(6.25, 5.40).unwrap()
    }

    #[test]
    fn barrier_heights() {
        let p = params();
        assert!((static_potential(&p, 0.0) - (p.v1 + p.v2)).abs() < 1e-14);
        assert!((static_potential(&p, PI) - p.v1).abs() < 1e-14);
    }

    #[test]
    fn well_minimum_by_grid_search() {
        let p = params();
        let n = 200_000;
        let (mut xmin, mut vmin) = (0.0, f64::INFINITY);
        for i in 0..n {
            let x = TAU * i as f64 / n as f64;
            let v = static_potential(&p, x);
            if v < vmin {
                vmin = v;
                xmin = x;
            }
        }
        // two symmetric wells, minima slightly displaced from ±π/2
        let d = (xmin - PI / 2.0).abs().min((xmin - 3.0 * PI / 2.0).abs());
        assert!(d > 0.05 && d < 0.4, "displacement {d}");
        assert!((vmin - 2.70).abs() < 0.6, "{vmin}");
        assert!(vmin < p.v2 / 2.0);
    }

    #[test]
    fn periodicity_and_parity() {
        let p = params();
        let asym = LatticeParams::new(6.25, 5.40, 0.4).unwrap();
        let mut even_defect: f64 = 0.0;
        let mut asym_defect: f64 = 0.0;
        for i in 0..1000 {
            let x = -PI + TAU * i as f64 / 1000.0 + 0.001;
            assert!((static_potential(&p, x) - static_potential(&p, x + TAU)).abs() < 1e-12);
            even_defect = even_defect.max((static_potential(&p, x) - static_potential(&p, -x)).abs());
            asym_defect = asym_defect.max((static_potential(&asym, x) - static_potential(&asym, -x)).abs());
        }
        assert!(even_defect < 1e-13);
        assert!(asym_defect > 0.1);
    }

    #[test]
    fn negative_depth_rejected() {
        assert!(LatticeParams::new(-1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn sine_normalization() {
        let d = DriveSpec::sine(1.0, 2.0).unwrap();
        let t = d.period();
        assert!(d.value(0.0).abs() < 1e-15);
        assert!((d.value(t / 4.0) - 1.0).abs() < 1e-15);
        let n = 1000;
        let mean: f64 = (0..n).map(|i| d.value(t * i as f64 / n as f64)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 1e-15);
    }

    #[test]
    fn sawtooth_is_unit_peak_and_asymmetric() {
        let d = DriveSpec::new(Waveform::sawtooth(), 1.0, 1.3).unwrap();
        let t = d.period();
        let n = 20000;
        let peak = (0..n).map(|i| d.value(t * i as f64 / n as f64).abs()).fold(0.0, f64::max);
        assert!((peak - 1.0).abs() < 1e-6, "{peak}");
        let t0 = 0.123 * t;
        assert!((d.value(t0 + t / 2.0) + d.value(t0)).abs() > 1e-3);
    }

    #[test]
    fn symmetry_defect_matches_quadrature() {
        for wf in [Waveform::Sine, Waveform::sawtooth()] {
            let d = DriveSpec::new(wf, 1.0, 0.7).unwrap();
            let t = d.period();
            let n = 4096;
            let rms = ((0..n)
                .map(|i| {
                    let s = t * i as f64 / n as f64;
                    (d.value(s + t / 2.0) + d.value(s)).powi(2)
                })
                .sum::<f64>()
                / n as f64)
                .sqrt();
            assert!((rms - symmetry_defect(&d)).abs() < 1e-12);
        }
        let saw = DriveSpec::new(Waveform::sawtooth(), 1.0, 0.7).unwrap();
        assert!(symmetry_defect(&saw) > 0.1);
        assert!(symmetry_defect(&DriveSpec::sine(1.0, 0.7).unwrap()) < 1e-15);
    }

    #[test]
    fn odd_harmonics_have_no_defect() {
        let wf = Waveform::CustomFourier {
            harmonics: vec![
                Harmonic { order: 1, amplitude: 0.7, phase: 0.2 },
                Harmonic { order: 3, amplitude: 0.3, phase: -1.0 },
            ],
        };
        let d = DriveSpec::new(wf, 1.0, 1.0).unwrap();
        assert!(symmetry_defect(&d) < 1e-15);
    }

    #[test]
    fn empty_custom_waveform_rejected() {
        let wf = Waveform::CustomFourier { harmonics: vec![] };
        assert!(DriveSpec::new(wf, 1.0, 1.0).is_err());
        assert!(DriveSpec::sine(1.0, 0.0).is_err());
        assert!(DriveSpec::sine(-1.0, 1.0).is_err());
    }

    #[test]
    fn fourier_coefficients_reconstruct() {
        let d = DriveSpec::new(Waveform::sawtooth(), 1.0, 0.9).unwrap().with_phase(0.3);
        for &t in &[0.0, 0.4, 2.2, 5.0] {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in -6..=6 {
                acc += d.fourier_coefficient(k) * Complex64::from_polar(1.0, k as f64 * 0.9 * t);
            }
            assert!((acc.re - d.value(t)).abs() < 1e-13 && acc.im.abs() < 1e-13);
        }
    }

    #[test]
    fn zero_drive_leaves_static() {
        let p = params();
        let d = DriveSpec::sine(0.0, 1.0).unwrap();
        for i in 0..50 {
            let x = -3.0 + 0.12 * i as f64;
            let v = total_potential(&p, &DriveForm::Linearized, &d, x, 0.3 * i as f64);
            assert_eq!(v, static_potential(&p, x));
        }
    }

    #[test]
    fn generalized_parity_defect_iff_both_symmetries() {
        let sym = params();
        let asym = LatticeParams::new(6.25, 5.40, 0.4).unwrap();
        let sine = DriveSpec::sine(0.88, 0.6).unwrap();
        let saw = DriveSpec::new(Waveform::sawtooth(), 0.88, 0.6).unwrap();
        let lin = DriveForm::Linearized;
        assert!(generalized_parity_defect(&sym, &lin, &sine, 64, 32) < 1e-13);
        assert!(generalized_parity_defect(&sym, &lin, &saw, 64, 32) > 1e-2);
        assert!(generalized_parity_defect(&asym, &lin, &sine, 64, 32) > 1e-2);
    }

    #[test]
    fn calibration_is_dominated_by_mirror_distance() {
        let p = params();
        let slope = drive_calibration(&p, 148);
        let leading = p.v2 * FRAC_PI_3.sin() * TAU * 148.0;
        assert!((slope / leading - 1.0).abs() < 0.01, "{slope} vs {leading}");
    }

    fn drive_residual(p: &LatticeParams, s: f64) -> (f64, f64) {
        let exact = ExactDrive::for_amplitude(p, s, 148).unwrap();
        let form = DriveForm::Exact(exact);
        let spec = DriveSpec::sine(s, 1.0).unwrap();
        let t = spec.period() / 4.0;
        let n = 2048;
        let (mut diff, mut norm) = (0.0, 0.0);
        for i in 0..n {
            let x = -PI + TAU * (i as f64 + 0.5) / n as f64;
            let lin = total_potential(p, &DriveForm::Linearized, &spec, x, t);
            let ex = total_potential(p, &form, &spec, x, t);
            diff += (ex - lin).powi(2);
            norm += (lin - static_potential(p, x)).powi(2);
        }
        (diff.sqrt(), norm.sqrt())
    }

    #[test]
    fn exact_and_linearized_agree_for_small_angle() {
        let p = params();
        let (diff, norm) = drive_residual(&p, 0.1);
        assert!(diff / norm < 0.05, "relative L2 difference {}", diff / norm);
    }

    #[test]
    fn linearization_error_is_second_order() {
        let p = params();
        // The sin(x) projection drops a first-order remainder of relative size
        // ~1/(2π·cells); amplitudes are chosen where the quadratic term dominates it.
        let amps = [0.8, 0.4, 0.2, 0.1];
        let errs: Vec<f64> = amps.iter().map(|&s| drive_residual(&p, s).0).collect();
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!((slope - 2.0).abs() < 0.2, "slope {slope}");
        }
    }
}
