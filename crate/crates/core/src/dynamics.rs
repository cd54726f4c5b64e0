//! Time-domain propagation of a localized particle and the observables read
//! out from it: well populations, diffraction orders and fitted tunneling
//! frequencies.

use std::f64::consts::{PI, TAU};

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use log::debug;
use nalgebra::storage::Owned;
use nalgebra::{DVector, Dyn, Matrix3, OMatrix, Vector3, Vector4, U4};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::propagator::{apply_midpoint, evolve_marks};
use crate::floquet::DrivenHamiltonian;
use crate::lattice::{DriveForm, DriveSpec, LatticeParams};
use crate::linalg::{CMatrix, CVector, C64};
use crate::stationary::{doublet_data, right_half_probability, solve_lattice, DoubletData, EigenSolution, PlaneWaveBasis};

/// Size of the static subspace kept by the Floquet analysis.
pub const TRUNCATION_STATES: usize = EigenSolution::DEFAULT_STATES_KEPT;

/// How `p_left` and `p_right` are read out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopulationReadout {
    /// `|<L|ψ>|²` and `|<R|ψ>|²`.
    #[default]
    Projection,
    /// Probability integrated over the half cells `x < 0` and `x > 0`.
    HalfCell,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsOptions {
    /// Static eigenstates to propagate in; `None` keeps the full basis.
    pub n_states: Option<usize>,
    pub readout: PopulationReadout,
    /// Largest change of the propagated state over one period between successive step doublings.
    pub tolerance: f64,
    pub initial_steps: usize,
    pub max_steps: usize,
    /// Stored intermediate propagators per period; samples between them are reached by extra steps.
    pub checkpoints: usize,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        Self {
            n_states: None,
            readout: PopulationReadout::Projection,
            tolerance: 1e-6,
            initial_steps: 64,
            max_steps: 1 << 16,
            checkpoints: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsTrace {
    /// Sample times in ħ/E_r.
    pub times: Vec<f64>,
    pub p_left: Vec<f64>,
    pub p_right: Vec<f64>,
    /// `1 - p_left - p_right`.
    pub leakage: Vec<f64>,
    /// Population outside the lowest [`TRUNCATION_STATES`] static eigenstates;
    /// for a truncated run, the norm lost when projecting the initial state.
    pub truncation_leakage: Vec<f64>,
    /// Diffraction orders `n` labelling the columns of `momentum_orders`.
    pub orders: Vec<i64>,
    pub momentum_orders: Vec<Vec<f64>>,
    pub norms: Vec<f64>,
    pub steps_per_period: usize,
}

impl DynamicsTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_norm_defect(&self) -> f64 {
        self.norms.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn max_truncation_leakage(&self) -> f64 {
        self.truncation_leakage.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_p_left(&self) -> f64 {
        self.p_left.iter().copied().fold(0.0, f64::max)
    }

    /// First sample time at which `p_left` exceeds `level`.
    pub fn first_time_above(&self, level: f64) -> Option<f64> {
        self.times.iter().zip(&self.p_left).find(|(_, &p)| p > level).map(|(&t, _)| t)
    }

    /// Populations of orders `-n..=n`, with zeros for orders outside the basis.
    pub fn orders_window(&self, sample: usize, n: i64) -> Vec<f64> {
        (-n..=n)
            .map(|m| match self.orders.iter().position(|&o| o == m) {
                Some(i) => self.momentum_orders[sample][i],
                None => 0.0,
            })
            .collect()
    }
}

/// `(|<L|ψ>|², |<R|ψ>|²)` for plane-wave coefficients `state`.
pub fn populations_lr(state: &CVector, doublet: &DoubletData) -> (f64, f64) {
    let l = doublet.left_state.dotc(state).norm_sqr();
    let r = doublet.right_state.dotc(state).norm_sqr();
    (l, r)
}

/// Probability in the left and right half cells.
pub fn populations_half_cell(state: &CVector) -> (f64, f64) {
    let right = right_half_probability(state);
    (state.norm_squared() - right, right)
}

/// `|c_n|²` ordered like the basis, `n = -n_max..=n_max`.
pub fn momentum_distribution(state: &CVector, basis: &PlaneWaveBasis) -> Result<Vec<f64>> {
    if state.len() != basis.dim() {
        return Err(Error::domain(format!("state has {} components, basis has {}", state.len(), basis.dim())));
    }
    Ok(state.iter().map(|c| c.norm_sqr()).collect())
}

/// Static solution of a lattice, reused for many trajectories.
#[derive(Debug, Clone)]
pub struct Dynamics {
    params: LatticeParams,
    basis: PlaneWaveBasis,
    sol: EigenSolution,
    doublet: DoubletData,
    opts: DynamicsOptions,
}

impl Dynamics {
    pub fn new(params: &LatticeParams, basis: &PlaneWaveBasis, opts: DynamicsOptions) -> Result<Self> {
        let kept = opts.n_states.unwrap_or(basis.dim());
        if kept < 2 || kept > basis.dim() {
            return Err(Error::domain(format!("n_states must lie in [2, {}], got {kept}", basis.dim())));
        }
        if !(opts.tolerance > 0.0) || opts.checkpoints < 2 || opts.checkpoints % 2 == 1 {
            return Err(Error::domain("need a positive tolerance and an even number of checkpoints"));
        }
        let sol = solve_lattice(params, basis, kept)?;
        let doublet = doublet_data(&sol, basis)?;
        Ok(Self { params: *params, basis: *basis, sol, doublet, opts })
    }

    pub fn doublet(&self) -> &DoubletData {
        &self.doublet
    }

    pub fn basis(&self) -> &PlaneWaveBasis {
        &self.basis
    }

    pub fn options(&self) -> &DynamicsOptions {
        &self.opts
    }

    /// Propagate `initial` (plane-wave coefficients, default `|R>`) and sample
    /// every `sample_dt` up to `t_final`.
    pub fn run(
        &self,
        form: &DriveForm,
        spec: &DriveSpec,
        initial: Option<&CVector>,
        t_final: f64,
        sample_dt: f64,
    ) -> Result<DynamicsTrace> {
        if !(sample_dt > 0.0) || !(t_final >= 0.0) || !t_final.is_finite() {
            return Err(Error::domain(format!("need sample_dt > 0 and t_final ≥ 0, got {sample_dt}, {t_final}")));
        }
        let samples = (t_final / sample_dt + 1e-9).floor() as usize + 1;
        if samples > 10_000_000 {
            return Err(Error::domain(format!("{samples} samples requested")));
        }
        let psi0_pw = match initial {
            Some(v) => {
                if v.len() != self.basis.dim() {
                    return Err(Error::domain(format!("initial state has {} components, basis has {}", v.len(), self.basis.dim())));
                }
                if (v.norm() - 1.0).abs() > 1e-8 {
                    return Err(Error::domain(format!("initial state is not normalized (norm {})", v.norm())));
                }
                v.clone()
            }
            None => self.doublet.right_state.clone(),
        };
        let psi0 = self.sol.to_eigenbasis(&psi0_pw);
        let h = DrivenHamiltonian::new(&self.params, form, spec, &self.sol, &self.basis)?;
        let map = self.period_map(&h, &psi0)?;
        debug!("dynamics: {} steps per period", map.steps);

        let period = h.period();
        let mut trace = DynamicsTrace {
            times: Vec::with_capacity(samples),
            p_left: Vec::with_capacity(samples),
            p_right: Vec::with_capacity(samples),
            leakage: Vec::with_capacity(samples),
            truncation_leakage: Vec::with_capacity(samples),
            orders: self.basis.orders().collect(),
            momentum_orders: Vec::with_capacity(samples),
            norms: Vec::with_capacity(samples),
            steps_per_period: map.steps,
        };
        let mut strobe = psi0;
        let mut strobe_period = 0usize;
        for s in 0..samples {
            let t = s as f64 * sample_dt;
            let mut m = (t / period).floor();
            let mut tau = t - m * period;
            if period - tau < 1e-9 * period {
                m += 1.0;
                tau = 0.0;
            }
            let m = m as usize;
            while strobe_period < m {
                strobe = map.full() * strobe;
                strobe_period += 1;
            }
            let psi = map.state_at(&h, &strobe, tau)?;
            self.record(&mut trace, t, &psi);
        }
        Ok(trace)
    }

    fn record(&self, trace: &mut DynamicsTrace, t: f64, psi: &CVector) {
        let pw = self.sol.to_plane_wave(psi);
        let (l, r) = match self.opts.readout {
            PopulationReadout::Projection => populations_lr(&pw, &self.doublet),
            PopulationReadout::HalfCell => populations_half_cell(&pw),
        };
        trace.times.push(t);
        trace.p_left.push(l);
        trace.p_right.push(r);
        trace.leakage.push(1.0 - l - r);
        let outside = if self.sol.n_states_kept == self.basis.dim() {
            psi.iter().skip(TRUNCATION_STATES).map(|c| c.norm_sqr()).sum()
        } else {
            1.0 - psi.norm_squared()
        };
        trace.truncation_leakage.push(outside);
        trace.momentum_orders.push(pw.iter().map(|c| c.norm_sqr()).collect());
        trace.norms.push(psi.norm());
    }

    /// Step doubling until one period moves the initial state by less than the tolerance.
    fn period_map(&self, h: &DrivenHamiltonian, psi0: &CVector) -> Result<PeriodMap> {
        if h.max_harmonic() == 0 {
            return PeriodMap::build(h, 2, 2);
        }
        let mut steps = self.opts.initial_steps.max(self.opts.checkpoints);
        steps = steps.next_power_of_two();
        let k = self.opts.checkpoints.next_power_of_two();
        let mut map = PeriodMap::build(h, steps, k)?;
        let mut prev = map.probe(psi0);
        let mut achieved = f64::INFINITY;
        while steps * 2 <= self.opts.max_steps {
            let mut next = steps * 2;
            if achieved.is_finite() {
                let mut predicted = achieved / 4.0;
                while predicted > 0.5 * self.opts.tolerance && next * 4 <= self.opts.max_steps {
                    next *= 2;
                    predicted /= 4.0;
                }
                if next > steps * 2 {
                    prev = PeriodMap::build(h, next / 2, 2)?.probe(psi0);
                }
            }
            steps = next;
            map = PeriodMap::build(h, steps, k)?;
            let probe = map.probe(psi0);
            achieved = (&probe.0 - &prev.0).norm().max((&probe.1 - &prev.1).norm());
            debug!("dynamics: {steps} steps, state change {achieved:.3e}");
            if achieved < self.opts.tolerance {
                return Ok(map);
            }
            prev = probe;
        }
        Err(Error::RefinementNotConverged { steps, achieved, target: self.opts.tolerance })
    }
}

/// `U(τ_k)` on an even grid of checkpoints over one period.
struct PeriodMap {
    steps: usize,
    dt: f64,
    stride: usize,
    checkpoints: Vec<CMatrix>,
}

impl PeriodMap {
    fn build(h: &DrivenHamiltonian, steps: usize, k: usize) -> Result<Self> {
        let k = k.min(steps);
        let stride = steps / k;
        let dt = h.period() / steps as f64;
        let checkpoints = match h.generalized_parity() {
            Some(pi) => {
                let marks: Vec<usize> = (0..=k / 2).map(|j| j * stride).collect();
                let mut cps = evolve_marks(h, steps, &marks)?;
                let half = cps[k / 2].clone();
                for j in 1..=k / 2 {
                    let second = pi * &cps[j] * pi * &half;
                    cps.push(second);
                }
                cps
            }
            None => {
                let marks: Vec<usize> = (0..=k).map(|j| j * stride).collect();
                evolve_marks(h, steps, &marks)?
            }
        };
        Ok(Self { steps, dt, stride, checkpoints })
    }

    fn full(&self) -> &CMatrix {
        self.checkpoints.last().expect("at least two checkpoints")
    }

    /// `(U(T) ψ, U(T/2) ψ)`.
    fn probe(&self, psi: &CVector) -> (CVector, CVector) {
        let k = self.checkpoints.len() - 1;
        (self.full() * psi, &self.checkpoints[k / 2] * psi)
    }

    /// `U(τ) ψ` for `0 ≤ τ < T`.
    fn state_at(&self, h: &DrivenHamiltonian, psi: &CVector, tau: f64) -> Result<CVector> {
        let span = self.stride as f64 * self.dt;
        let k = ((tau / span).floor() as usize).min(self.checkpoints.len() - 2);
        let mut out = &self.checkpoints[k] * psi;
        let start = k as f64 * span;
        let rem = tau - start;
        if rem > 1e-12 * span {
            let n = (rem / self.dt - 1e-9).ceil().max(1.0) as usize;
            let w = rem / n as f64;
            for j in 0..n {
                out = apply_midpoint(h, start + (j as f64 + 0.5) * w, w, &out)?;
            }
        }
        Ok(out)
    }
}

/// Propagate in the full plane-wave basis with default options.
pub fn propagate(
    params: &LatticeParams,
    form: &DriveForm,
    spec: &DriveSpec,
    initial: Option<&CVector>,
    t_final: f64,
    sample_dt: f64,
) -> Result<DynamicsTrace> {
    Dynamics::new(params, &PlaneWaveBasis::default(), DynamicsOptions::default())?.run(form, spec, initial, t_final, sample_dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitStatus {
    Ok,
    PoorFit,
    NotConverged,
}

impl FitStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            FitStatus::Ok => "ok",
            FitStatus::PoorFit => "poor-fit",
            FitStatus::NotConverged => "not-converged",
        }
    }
}

/// `offset + amplitude · sin(omega t + phase)` with `amplitude, omega ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    /// Angular frequency in E_r/ħ.
    pub omega: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub phase: f64,
    /// RMS residual.
    pub residual: f64,
    pub status: FitStatus,
}

impl SinusoidFit {
    pub const POOR_FIT_RESIDUAL: f64 = 0.1;

    pub fn value(&self, t: f64) -> f64 {
        self.offset + self.amplitude * (self.omega * t + self.phase).sin()
    }
}

struct SineProblem<'a> {
    t: &'a [f64],
    y: &'a [f64],
    /// `(offset, amplitude, omega, phase)`.
    p: Vector4<f64>,
}

impl LeastSquaresProblem<f64, Dyn, U4> for SineProblem<'_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, U4>;
    type ParameterStorage = Owned<f64, U4>;

    fn set_params(&mut self, x: &Vector4<f64>) {
        self.p = *x;
    }

    fn params(&self) -> Vector4<f64> {
        self.p
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let [a, b, w, th] = [self.p[0], self.p[1], self.p[2], self.p[3]];
        Some(DVector::from_iterator(self.t.len(), self.t.iter().zip(self.y).map(|(&t, &y)| a + b * (w * t + th).sin() - y)))
    }

    fn jacobian(&self) -> Option<OMatrix<f64, Dyn, U4>> {
        let [_, b, w, th] = [self.p[0], self.p[1], self.p[2], self.p[3]];
        let mut j = OMatrix::<f64, Dyn, U4>::zeros(self.t.len());
        for (i, &t) in self.t.iter().enumerate() {
            let (s, c) = (w * t + th).sin_cos();
            j[(i, 0)] = 1.0;
            j[(i, 1)] = s;
            j[(i, 2)] = b * t * c;
            j[(i, 3)] = b * c;
        }
        Some(j)
    }
}

/// Dominant angular frequency of the mean-removed samples from a zero-padded
/// FFT, refined by parabolic interpolation of the peak.
fn spectral_peak(y: &[f64], dt: f64) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let n = (8 * y.len()).next_power_of_two();
    let mut buf: Vec<C64> = y.iter().map(|&v| C64::new(v - mean, 0.0)).collect();
    buf.resize(n, C64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mag: Vec<f64> = buf[..=n / 2].iter().map(|z| z.norm()).collect();
    let k = (1..mag.len()).max_by(|&a, &b| mag[a].total_cmp(&mag[b])).unwrap_or(1);
    let shift = if k + 1 < mag.len() {
        let (l, c, r) = (mag[k - 1], mag[k], mag[k + 1]);
        let den = l - 2.0 * c + r;
        if den.abs() > 0.0 { (0.5 * (l - r) / den).clamp(-0.5, 0.5) } else { 0.0 }
    } else {
        0.0
    };
    TAU * (k as f64 + shift) / (n as f64 * dt)
}

/// Linear least squares for offset and quadratures at fixed `omega`.
fn linear_seed(t: &[f64], y: &[f64], omega: f64) -> Vector4<f64> {
    let mut ata = Matrix3::<f64>::zeros();
    let mut aty = Vector3::<f64>::zeros();
    for (&ti, &yi) in t.iter().zip(y) {
        let (s, c) = (omega * ti).sin_cos();
        let row = Vector3::new(1.0, s, c);
        ata += row * row.transpose();
        aty += row * yi;
    }
    let x = ata.lu().solve(&aty).unwrap_or_else(|| Vector3::new(y.iter().sum::<f64>() / y.len() as f64, 0.0, 0.0));
    // B sin(ωt + θ) = B cos θ sin ωt + B sin θ cos ωt
    Vector4::new(x[0], x[1].hypot(x[2]), omega, x[2].atan2(x[1]))
}

/// Least-squares fit of `A + B sin(Ωt + θ)` to uniformly sampled data.
pub fn fit_sinusoid(times: &[f64], values: &[f64]) -> Result<SinusoidFit> {
    if times.len() != values.len() || times.len() < 5 {
        return Err(Error::domain("need at least five samples of equal length"));
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) || times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
        return Err(Error::domain("fit needs uniformly spaced, increasing times"));
    }
    let omega0 = spectral_peak(values, dt);
    let problem = SineProblem { t: times, y: values, p: linear_seed(times, values, omega0) };
    let (problem, report) = LevenbergMarquardt::new().with_tol(1e-14).minimize(problem);
    let rms = (2.0 * report.objective_function / times.len() as f64).sqrt();
    let [offset, mut amplitude, mut omega, mut phase] = [problem.p[0], problem.p[1], problem.p[2], problem.p[3]];
    if omega < 0.0 {
        omega = -omega;
        amplitude = -amplitude;
        phase = -phase;
    }
    if amplitude < 0.0 {
        amplitude = -amplitude;
        phase += PI;
    }
    phase = crate::linalg::wrap_phase(phase);
    let status = if !report.termination.was_successful() || !rms.is_finite() {
        FitStatus::NotConverged
    } else if rms > SinusoidFit::POOR_FIT_RESIDUAL {
        FitStatus::PoorFit
    } else {
        FitStatus::Ok
    };
    Ok(SinusoidFit { omega, amplitude, offset, phase, residual: rms, status })
}

/// Sinusoid fit to `p_left(t)`.
pub fn fit_tunneling_frequency(trace: &DynamicsTrace) -> Result<SinusoidFit> {
    fit_sinusoid(&trace.times, &trace.p_left)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Waveform;
    use proptest::prelude::*;

    fn deep() -> LatticeParams {
        LatticeParams::symmetric(8.27, 2.68).unwrap()
    }

    #[test]
    fn readouts_of_localized_states() {
        let dy = Dynamics::new(&deep(), &PlaneWaveBasis::default(), DynamicsOptions::default()).unwrap();
        let d = dy.doublet();
        let (l, r) = populations_lr(&d.right_state, d);
        assert!(l < 1e-14 && (r - 1.0).abs() < 1e-12);
        let mix = (&d.left_state + &d.right_state).unscale(2f64.sqrt());
        let (l, r) = populations_lr(&mix, d);
        assert!((l - 0.5).abs() < 1e-12 && (r - 0.5).abs() < 1e-12);
        for s in [&d.left_state, &d.right_state] {
            let (pl, pr) = populations_lr(s, d);
            let (hl, hr) = populations_half_cell(s);
            assert!((pl - hl).abs() < 0.05 && (pr - hr).abs() < 0.05, "{pl} {hl} {pr} {hr}");
        }
    }

    #[test]
    fn free_ground_state_has_only_order_zero() {
        let b = PlaneWaveBasis::new(10).unwrap();
        let sol = solve_lattice(&LatticeParams::symmetric(0.0, 0.0).unwrap(), &b, 3).unwrap();
        let p = momentum_distribution(&sol.state(0), &b).unwrap();
        assert!((p[10] - 1.0).abs() < 1e-14);
        assert!(p.iter().enumerate().all(|(i, &x)| i == 10 || x < 1e-28));
        assert!(momentum_distribution(&sol.state(0), &PlaneWaveBasis::new(9).unwrap()).is_err());
    }

    #[test]
    fn symmetric_states_have_symmetric_orders() {
        let b = PlaneWaveBasis::default();
        let sol = solve_lattice(&LatticeParams::symmetric(6.25, 5.4).unwrap(), &b, 4).unwrap();
        for i in 0..4 {
            let p = momentum_distribution(&sol.state(i), &b).unwrap();
            for n in 0..p.len() {
                assert!((p[n] - p[p.len() - 1 - n]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn undriven_rabi_oscillation() {
        let dy = Dynamics::new(&deep(), &PlaneWaveBasis::default(), DynamicsOptions::default()).unwrap();
        let delta = dy.doublet().delta_12;
        let spec = DriveSpec::sine(0.0, 0.8).unwrap();
        let period = TAU / delta;
        let tr = dy.run(&DriveForm::Linearized, &spec, None, 2.0 * period, period / 40.0).unwrap();
        let mut contrast: f64 = 0.0;
        for (t, p) in tr.times.iter().zip(&tr.p_left) {
            let expected = (0.5 * delta * t).sin().powi(2);
            assert!((p - expected).abs() < 1e-3, "t={t} p={p} expected={expected}");
            contrast = contrast.max(*p);
        }
        assert!(contrast > 0.95);
        assert!(tr.max_norm_defect() < 1e-10);
        for row in &tr.momentum_orders {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        }
        assert!(tr.leakage.iter().all(|l| l.abs() < 1e-10));
        let fit = fit_tunneling_frequency(&tr).unwrap();
        assert_eq!(fit.status, FitStatus::Ok);
        assert!((fit.omega - delta).abs() < 5e-3 * delta);
    }

    #[test]
    fn left_and_right_states_share_order_populations() {
        // mirror images have the same |c_n|²
        let dy = Dynamics::new(&deep(), &PlaneWaveBasis::default(), DynamicsOptions::default()).unwrap();
        let d = dy.doublet().clone();
        let b = *dy.basis();
        let l = momentum_distribution(&d.left_state, &b).unwrap();
        let r = momentum_distribution(&d.right_state, &b).unwrap();
        for (x, y) in l.iter().zip(&r) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_sampling_and_states() {
        let dy = Dynamics::new(&deep(), &PlaneWaveBasis::default(), DynamicsOptions::default()).unwrap();
        let spec = DriveSpec::sine(0.0, 0.8).unwrap();
        assert!(dy.run(&DriveForm::Linearized, &spec, None, 1.0, 0.0).is_err());
        let bad = CVector::from_element(65, C64::new(1.0, 0.0));
        assert!(dy.run(&DriveForm::Linearized, &spec, Some(&bad), 1.0, 0.1).is_err());
        let opts = DynamicsOptions { n_states: Some(1), ..Default::default() };
        assert!(Dynamics::new(&deep(), &PlaneWaveBasis::default(), opts).is_err());
    }

    #[test]
    fn truncated_basis_reports_leakage() {
        let opts = DynamicsOptions { n_states: Some(15), ..Default::default() };
        let dy = Dynamics::new(&deep(), &PlaneWaveBasis::default(), opts).unwrap();
        let spec = DriveSpec::new(Waveform::sawtooth(), 0.3, 0.8).unwrap();
        let tr = dy.run(&DriveForm::Linearized, &spec, None, 20.0, 0.5).unwrap();
        for ((l, r), k) in tr.p_left.iter().zip(&tr.p_right).zip(&tr.leakage) {
            assert!((l + r + k - 1.0).abs() < 1e-14);
            assert!(*k > -1e-12);
        }
        assert!(tr.max_norm_defect() < 1e-10);
    }

    #[test]
    fn sampling_between_checkpoints_matches_direct_stepping() {
        let dy = Dynamics::new(&deep(), &PlaneWaveBasis::new(12).unwrap(), DynamicsOptions::default()).unwrap();
        let spec = DriveSpec::new(Waveform::sawtooth(), 0.5, 0.9).unwrap();
        let period = spec.period();
        let coarse = dy.run(&DriveForm::Linearized, &spec, None, 2.0 * period, period / 3.0).unwrap();
        let fine = dy.run(&DriveForm::Linearized, &spec, None, 2.0 * period, period / 6.0).unwrap();
        for (i, t) in coarse.times.iter().enumerate() {
            assert!((fine.times[2 * i] - t).abs() < 1e-12);
            assert!((fine.p_left[2 * i] - coarse.p_left[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn pure_sinusoid_is_recovered() {
        let t: Vec<f64> = (0..200).map(|i| i as f64 * 0.37).collect();
        let y: Vec<f64> = t.iter().map(|&t| 0.4 + 0.3 * (0.21 * t + 1.1).sin()).collect();
        let fit = fit_sinusoid(&t, &y).unwrap();
        assert!((fit.omega - 0.21).abs() < 1e-6);
        assert!((fit.amplitude - 0.3).abs() < 1e-6);
        assert!((fit.offset - 0.4).abs() < 1e-6);
        assert!((fit.phase - 1.1).abs() < 1e-6);
        assert!(fit.residual < 1e-8);
        assert_eq!(fit.status, FitStatus::Ok);
    }

    #[test]
    fn beating_signal_is_flagged() {
        let t: Vec<f64> = (0..400).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|&t| 0.5 * (1.0 * t).sin() + 0.5 * (1.3 * t).sin() + (3.1 * t).cos()).collect();
        let fit = fit_sinusoid(&t, &y).unwrap();
        assert_ne!(fit.status, FitStatus::Ok);
    }

    #[test]
    fn fit_rejects_irregular_times() {
        let t = [0.0, 1.0, 2.0, 3.5, 4.0, 5.0];
        assert!(fit_sinusoid(&t, &[0.0; 6]).is_err());
        assert!(fit_sinusoid(&t[..3], &[0.0; 3]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn sinusoid_parameters_round_trip(
            omega in 0.05f64..1.2,
            amp in 0.05f64..1.0,
            offset in -1.0f64..1.0,
            phase in -3.0f64..3.0,
        ) {
            let dt = 0.25;
            let n = ((3.0 * TAU / omega / dt) as usize).max(64);
            let t: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
            let y: Vec<f64> = t.iter().map(|&t| offset + amp * (omega * t + phase).sin()).collect();
            let fit = fit_sinusoid(&t, &y).unwrap();
            prop_assert!((fit.omega - omega).abs() < 1e-6 * omega.max(1.0));
            prop_assert!((fit.amplitude - amp).abs() < 1e-6);
            prop_assert!(crate::linalg::wrap_phase(fit.phase - phase).abs() < 1e-5);
        }
    }
}
