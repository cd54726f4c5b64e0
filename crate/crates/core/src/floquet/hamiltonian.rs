use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::lattice::{static_potential, total_potential, DriveForm, DriveSpec, LatticeParams};
use nalgebra::DMatrix;

use crate::linalg::{CMatrix, C64, ZERO};
use crate::stationary::{sin_matrix, EigenSolution, PlaneWaveBasis};

/// Time-periodic Hamiltonian projected onto the kept static eigenstates,
/// stored as a finite Fourier series `H(t) = Σ_k H_k e^{ikωt}` with
/// `H_{-k} = H_k†`.
#[derive(Debug, Clone)]
pub struct DrivenHamiltonian {
    omega: f64,
    h0: CMatrix,
    /// `(k, H_k)` for `k ≥ 1`; zero components are dropped.
    harmonics: Vec<(u32, CMatrix)>,
    real: Option<RealForm>,
    parity: Option<CMatrix>,
}

/// The same Hamiltonian after rephasing each eigenstate so its wavefunction
/// is real; `H(t)` is then real symmetric.
#[derive(Debug, Clone)]
pub(crate) struct RealForm {
    /// `ψ_real_j = gauge_j ψ_j`.
    pub gauge: Vec<C64>,
    h0: DMatrix<f64>,
    harmonics: Vec<(u32, CMatrix)>,
}

impl DrivenHamiltonian {
    /// Time samples used to extract the Fourier series of the exact drive.
    const EXACT_TIME_SAMPLES: usize = 64;
    /// Spatial quadrature points for potential matrix elements.
    const EXACT_GRID: usize = 2048;

    pub fn new(
        params: &LatticeParams,
        form: &DriveForm,
        spec: &DriveSpec,
        sol: &EigenSolution,
        basis: &PlaneWaveBasis,
    ) -> Result<Self> {
        if sol.vectors.nrows() != basis.dim() {
            return Err(Error::domain("eigen solution does not match the basis dimension"));
        }
        let mut h = match form {
            DriveForm::Linearized => Self::linearized(spec, sol, basis),
            DriveForm::Exact(_) => Self::exact(params, form, spec, sol, basis)?,
        };
        h.real = h.real_form(sol);
        h.parity = h.half_period_parity(&sol.parity_operator());
        Ok(h)
    }

    fn scale(&self) -> f64 {
        self.harmonics.iter().map(|(_, m)| m.norm()).fold(self.h0.norm(), f64::max).max(1.0)
    }

    fn real_form(&self, sol: &EigenSolution) -> Option<RealForm> {
        let d = sol.vectors.nrows();
        let gauge: Vec<C64> = (0..sol.n_states_kept)
            .map(|j| {
                let c = sol.vectors.column(j);
                // a real ψ has c_{-n} = c_n*; fix the phase on the largest pair
                let i = (0..d).max_by(|&a, &b| c[a].norm().total_cmp(&c[b].norm())).unwrap_or(0);
                let ratio = c[i].conj() / c[d - 1 - i];
                if ratio.norm() > 0.0 && ratio.is_finite() {
                    C64::from_polar(1.0, 0.5 * ratio.arg())
                } else {
                    C64::new(1.0, 0.0)
                }
            })
            .collect();
        let rephase = |m: &CMatrix| CMatrix::from_fn(m.nrows(), m.ncols(), |r, c| gauge[r].conj() * m[(r, c)] * gauge[c]);
        let tol = 1e-12 * self.scale();
        let h0 = rephase(&self.h0);
        if h0.iter().any(|z| z.im.abs() > tol) {
            return None;
        }
        let mut harmonics = Vec::with_capacity(self.harmonics.len());
        for (k, m) in &self.harmonics {
            let r = rephase(m);
            // H_k e^{ikωt} + h.c. is real for all t iff H_k is symmetric
            if (&r - r.transpose()).iter().any(|z| z.norm() > tol) {
                return None;
            }
            harmonics.push((*k, r));
        }
        Some(RealForm { gauge, h0: h0.map(|z| z.re), harmonics })
    }

    /// Inversion operator `Π` if `H(t + T/2) = Π H(t) Π` holds exactly.
    fn half_period_parity(&self, parity: &CMatrix) -> Option<CMatrix> {
        let n = self.dim();
        if parity.nrows() != n || (parity * parity - CMatrix::identity(n, n)).norm() > 1e-10 {
            return None;
        }
        let tol = 1e-12 * self.scale();
        if (parity * &self.h0 * parity - &self.h0).norm() > tol {
            return None;
        }
        for (k, m) in &self.harmonics {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            if (parity * m * parity - m * C64::new(sign, 0.0)).norm() > tol {
                return None;
            }
        }
        Some(parity.clone())
    }

    pub(crate) fn real_form_ref(&self) -> Option<&RealForm> {
        self.real.as_ref()
    }

    /// `Π` when the Hamiltonian has the half-period inversion symmetry.
    pub fn generalized_parity(&self) -> Option<&CMatrix> {
        self.parity.as_ref()
    }

    fn linearized(spec: &DriveSpec, sol: &EigenSolution, basis: &PlaneWaveBasis) -> Self {
        let h0 = diag(&sol.energies);
        let x = sol.project(&sin_matrix(basis));
        let mut harmonics = Vec::new();
        if spec.amplitude_s() > 0.0 {
            for k in 1..=spec.max_harmonic() {
                let fk = spec.fourier_coefficient(k as i64);
                if fk.norm() > 0.0 {
                    harmonics.push((k, &x * (fk * spec.amplitude_s())));
                }
            }
        }
        Self { omega: spec.omega_d(), h0, harmonics, real: None, parity: None }
    }

    fn exact(
        params: &LatticeParams,
        form: &DriveForm,
        spec: &DriveSpec,
        sol: &EigenSolution,
        basis: &PlaneWaveBasis,
    ) -> Result<Self> {
        let nt = Self::EXACT_TIME_SAMPLES;
        let nx = Self::EXACT_GRID;
        let d = basis.dim();
        let kmax = 2 * basis.n_max() as i64;
        let period = spec.period();
        let xs: Vec<f64> = (0..nx).map(|i| -PI + TAU * (i as f64 + 0.5) / nx as f64).collect();
        let static_v: Vec<f64> = xs.iter().map(|&x| static_potential(params, x)).collect();
        // e^{-ikx} table for k in 0..=kmax; negative k by conjugation
        let phases: Vec<Vec<C64>> =
            (0..=kmax).map(|k| xs.iter().map(|&x| C64::from_polar(1.0, -(k as f64) * x)).collect()).collect();

        let mut samples = Vec::with_capacity(nt);
        for j in 0..nt {
            let t = period * j as f64 / nt as f64;
            let w: Vec<f64> = xs
                .iter()
                .zip(&static_v)
                .map(|(&x, &v0)| total_potential(params, form, spec, x, t) - v0)
                .collect();
            // w_k = (1/2π)∫ W e^{-ikx} dx, W real so w_{-k} = w_k*
            let coeff: Vec<C64> = phases
                .iter()
                .map(|row| row.iter().zip(&w).map(|(p, &wv)| p * wv).sum::<C64>() / nx as f64)
                .collect();
            let wmat = CMatrix::from_fn(d, d, |r, c| {
                let k = r as i64 - c as i64;
                if k >= 0 {
                    coeff[k as usize]
                } else {
                    coeff[(-k) as usize].conj()
                }
            });
            samples.push(sol.project(&wmat));
        }

        let mean = samples.iter().fold(CMatrix::zeros(sol.n_states_kept, sol.n_states_kept), |acc, m| acc + m)
            / C64::new(nt as f64, 0.0);
        let scale = mean.norm().max(1.0);
        let mut harmonics = Vec::new();
        for k in 1..(nt / 2) as u32 {
            let mut hk = CMatrix::zeros(sol.n_states_kept, sol.n_states_kept);
            for (j, m) in samples.iter().enumerate() {
                let phase = C64::from_polar(1.0 / nt as f64, -TAU * (k as usize * j) as f64 / nt as f64);
                hk += m * phase;
            }
            if hk.norm() > 1e-13 * scale {
                harmonics.push((k, hk));
            }
        }
        let mut h0 = diag(&sol.energies) + mean;
        h0 = (&h0 + h0.adjoint()) * C64::new(0.5, 0.0);
        Ok(Self { omega: spec.omega_d(), h0, harmonics, real: None, parity: None })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn period(&self) -> f64 {
        TAU / self.omega
    }

    pub fn dim(&self) -> usize {
        self.h0.nrows()
    }

    pub fn max_harmonic(&self) -> u32 {
        self.harmonics.iter().map(|(k, _)| *k).max().unwrap_or(0)
    }

    /// Fourier component `H_k`.
    pub fn fourier(&self, k: i64) -> CMatrix {
        if k == 0 {
            return self.h0.clone();
        }
        let n = self.dim();
        match self.harmonics.iter().find(|(m, _)| *m as i64 == k.abs()) {
            Some((_, hk)) if k > 0 => hk.clone(),
            Some((_, hk)) => hk.adjoint(),
            None => CMatrix::zeros(n, n),
        }
    }

    /// `H(t)`.
    pub fn at(&self, t: f64) -> CMatrix {
        let mut h = self.h0.clone();
        for (k, hk) in &self.harmonics {
            let e = C64::from_polar(1.0, *k as f64 * self.omega * t);
            let n = h.nrows();
            for c in 0..n {
                for r in 0..n {
                    let z = hk[(r, c)] * e;
                    h[(r, c)] += z;
                    h[(c, r)] += z.conj();
                }
            }
        }
        h
    }
}

impl RealForm {
    /// Real symmetric `H(t)` in the rephased basis.
    pub fn at(&self, omega: f64, t: f64) -> DMatrix<f64> {
        let mut h = self.h0.clone();
        for (k, hk) in &self.harmonics {
            let e = C64::from_polar(2.0, *k as f64 * omega * t);
            h.zip_apply(hk, |a, z| *a += (z * e).re);
        }
        h
    }

    /// Undo the rephasing on a propagator: `U = G U' G†`.
    pub fn restore(&self, u: &CMatrix) -> CMatrix {
        CMatrix::from_fn(u.nrows(), u.ncols(), |r, c| self.gauge[r] * u[(r, c)] * self.gauge[c].conj())
    }
}

fn diag(values: &[f64]) -> CMatrix {
    let n = values.len();
    let mut m = CMatrix::from_element(n, n, ZERO);
    for (i, &v) in values.iter().enumerate() {
        m[(i, i)] = C64::new(v, 0.0);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::ExactDrive;
    use crate::linalg::hermitian_defect;
    use crate::stationary::solve_lattice;

    fn setup() -> (LatticeParams, PlaneWaveBasis, EigenSolution) {
        let p = LatticeParams::symmetric(6.25, 5.40).unwrap();
        let b = PlaneWaveBasis::default();
        let s = solve_lattice(&p, &b, 15).unwrap();
        (p, b, s)
    }

    #[test]
    fn linearized_matches_direct_projection() {
        let (p, b, s) = setup();
        let spec = DriveSpec::sine(0.88, 0.7).unwrap();
        let h = DrivenHamiltonian::new(&p, &DriveForm::Linearized, &spec, &s, &b).unwrap();
        let x = s.project(&sin_matrix(&b));
        for &t in &[0.0, 0.3, 1.7, 5.0] {
            let direct = diag(&s.energies) + &x * C64::new(0.88 * spec.value(t), 0.0);
            let ht = h.at(t);
            assert!((ht - &direct).norm() < 1e-12);
            assert!(hermitian_defect(&direct) < 1e-12);
        }
    }

    #[test]
    fn real_form_reproduces_complex_hamiltonian() {
        for phi in [0.0, 0.4] {
            let p = LatticeParams::new(6.25, 5.40, phi).unwrap();
            let b = PlaneWaveBasis::default();
            let s = solve_lattice(&p, &b, 15).unwrap();
            let spec = DriveSpec::new(crate::lattice::Waveform::sawtooth(), 0.88, 0.7).unwrap();
            let h = DrivenHamiltonian::new(&p, &DriveForm::Linearized, &spec, &s, &b).unwrap();
            let real = h.real_form_ref().expect("real potential gives a real gauge");
            for &t in &[0.0, 0.9, 3.3] {
                let r = real.at(h.omega(), t).map(|x| C64::new(x, 0.0));
                assert!((real.restore(&r) - h.at(t)).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn half_period_symmetry_detection() {
        let (p, b, s) = setup();
        let sine = DriveSpec::sine(0.88, 0.7).unwrap();
        let h = DrivenHamiltonian::new(&p, &DriveForm::Linearized, &sine, &s, &b).unwrap();
        let pi = h.generalized_parity().expect("sine drive of a symmetric well");
        let t = 0.37;
        let shifted = pi * h.at(t + 0.5 * h.period()) * pi;
        assert!((shifted - h.at(t)).norm() < 1e-12);
        let saw = DriveSpec::new(crate::lattice::Waveform::sawtooth(), 0.88, 0.7).unwrap();
        let h = DrivenHamiltonian::new(&p, &DriveForm::Linearized, &saw, &s, &b).unwrap();
        assert!(h.generalized_parity().is_none());
        let p4 = LatticeParams::new(6.25, 5.40, 0.4).unwrap();
        let s4 = solve_lattice(&p4, &b, 15).unwrap();
        let h = DrivenHamiltonian::new(&p4, &DriveForm::Linearized, &sine, &s4, &b).unwrap();
        assert!(h.generalized_parity().is_none());
    }

    #[test]
    fn static_drive_has_no_harmonics() {
        let (p, b, s) = setup();
        let spec = DriveSpec::sine(0.0, 0.7).unwrap();
        let h = DrivenHamiltonian::new(&p, &DriveForm::Linearized, &spec, &s, &b).unwrap();
        assert_eq!(h.max_harmonic(), 0);
        assert!((h.at(1.0) - diag(&s.energies)).norm() == 0.0);
    }

    #[test]
    fn exact_mode_tracks_linearized_at_small_amplitude() {
        let (p, b, s) = setup();
        let amp = 0.1;
        let exact = ExactDrive::for_amplitude(&p, amp, ExactDrive::DEFAULT_MIRROR_CELLS).unwrap();
        let spec = DriveSpec::sine(amp, 0.7).unwrap();
        let he = DrivenHamiltonian::new(&p, &DriveForm::Exact(exact), &spec, &s, &b).unwrap();
        let hl = DrivenHamiltonian::new(&p, &DriveForm::Linearized, &spec, &s, &b).unwrap();
        let first = hl.fourier(1);
        let diff = (he.fourier(1) - &first).norm() / first.norm();
        assert!(diff < 0.1, "relative difference {diff}");
        assert!(hermitian_defect(&he.at(0.4)) < 1e-12);
    }
}
