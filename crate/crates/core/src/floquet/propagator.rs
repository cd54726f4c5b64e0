use log::debug;

use super::hamiltonian::DrivenHamiltonian;
use super::{quasienergy_from_phase, zone_set_distance};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::linalg::{unitary_eigen, unitary_step, CMatrix, CVector, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorOptions {
    /// Midpoint steps per period for the first attempt; must be even.
    pub initial_steps: usize,
    /// Largest quasienergy shift between successive refinements, E_r.
    pub tolerance: f64,
    pub max_steps: usize,
}

impl Default for PropagatorOptions {
    fn default() -> Self {
        Self { initial_steps: 64, tolerance: 1e-8, max_steps: 1 << 17 }
    }
}

/// One-period propagator `U(T)` together with `U(T/2)`.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub full: CMatrix,
    pub half: CMatrix,
    pub steps: usize,
    /// Quasienergy shift observed at the last refinement.
    pub achieved: f64,
}

/// Compose `steps` exponential-midpoint steps over one period starting at `t = 0`.
/// Returns `(U(T), U(T/2))`; `steps` must be even.
///
/// When the Hamiltonian has the half-period inversion symmetry only the first
/// half period is integrated and `U(T) = Π U(T/2) Π U(T/2)`; the discrete
/// midpoints of the two halves map onto each other, so this is exact.
pub fn period_steps(h: &DrivenHamiltonian, steps: usize) -> Result<(CMatrix, CMatrix)> {
    if steps == 0 || steps % 2 == 1 {
        return Err(Error::domain(format!("step count must be even and positive, got {steps}")));
    }
    match h.generalized_parity() {
        Some(pi) => {
            let half = evolve_marks(h, steps, &[steps / 2])?.remove(0);
            let second = pi * &half * pi;
            Ok((second * &half, half))
        }
        None => {
            let mut m = evolve_marks(h, steps, &[steps / 2, steps])?;
            let full = m.remove(1);
            Ok((full, m.remove(0)))
        }
    }
}

/// `U(j dt)` for each `j` in the ascending list `marks`, with `dt = T / steps`.
pub(crate) fn evolve_marks(h: &DrivenHamiltonian, steps: usize, marks: &[usize]) -> Result<Vec<CMatrix>> {
    let n = h.dim();
    let dt = h.period() / steps as f64;
    let last = marks.last().copied().unwrap_or(0);
    let mut out = Vec::with_capacity(marks.len());
    let mut next = marks.iter().peekable();
    while next.peek() == Some(&&0) {
        out.push(CMatrix::identity(n, n));
        next.next();
    }
    match h.real_form_ref() {
        Some(real) => {
            let mut re = DMatrix::<f64>::identity(n, n);
            let mut im = DMatrix::<f64>::zeros(n, n);
            for j in 0..last {
                let (v, lambda) = real_spectrum(&real.at(h.omega(), (j as f64 + 0.5) * dt))?;
                rotate_split(&v, &lambda, dt, &mut re, &mut im);
                while next.peek() == Some(&&(j + 1)) {
                    out.push(real.restore(&join(&re, &im)));
                    next.next();
                }
            }
        }
        None => {
            let mut u = CMatrix::identity(n, n);
            for j in 0..last {
                u = unitary_step(&h.at((j as f64 + 0.5) * dt), dt)? * u;
                while next.peek() == Some(&&(j + 1)) {
                    out.push(u.clone());
                    next.next();
                }
            }
        }
    }
    Ok(out)
}

/// A single exponential-midpoint step `exp(-i H(t_mid) dt)`.
pub fn midpoint_step(h: &DrivenHamiltonian, t_mid: f64, dt: f64) -> Result<CMatrix> {
    match h.real_form_ref() {
        Some(real) => {
            let n = h.dim();
            let (v, lambda) = real_spectrum(&real.at(h.omega(), t_mid))?;
            let mut re = DMatrix::<f64>::identity(n, n);
            let mut im = DMatrix::<f64>::zeros(n, n);
            rotate_split(&v, &lambda, dt, &mut re, &mut im);
            Ok(real.restore(&join(&re, &im)))
        }
        None => unitary_step(&h.at(t_mid), dt),
    }
}

/// Apply one midpoint step to a state without forming the step matrix.
pub(crate) fn apply_midpoint(h: &DrivenHamiltonian, t_mid: f64, dt: f64, psi: &CVector) -> Result<CVector> {
    match h.real_form_ref() {
        Some(real) => {
            let n = h.dim();
            let g = &real.gauge;
            let mut re = DMatrix::<f64>::from_fn(n, 1, |r, _| (g[r].conj() * psi[r]).re);
            let mut im = DMatrix::<f64>::from_fn(n, 1, |r, _| (g[r].conj() * psi[r]).im);
            let (v, lambda) = real_spectrum(&real.at(h.omega(), t_mid))?;
            rotate_split(&v, &lambda, dt, &mut re, &mut im);
            Ok(CVector::from_fn(n, |r, _| g[r] * C64::new(re[(r, 0)], im[(r, 0)])))
        }
        None => Ok(unitary_step(&h.at(t_mid), dt)? * psi),
    }
}

fn real_spectrum(h: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = h.nrows();
    let max_iter = 200 * n.max(10);
    let eig = SymmetricEigen::try_new(h.clone(), f64::EPSILON, max_iter)
        .ok_or(Error::EigenNonConvergence { dim: n, max_iterations: max_iter })?;
    Ok((eig.eigenvectors, eig.eigenvalues))
}

/// `(re + i im) ← V e^{-iΛdt} Vᵀ (re + i im)` using real products only.
fn rotate_split(v: &DMatrix<f64>, lambda: &DVector<f64>, dt: f64, re: &mut DMatrix<f64>, im: &mut DMatrix<f64>) {
    let mut p = v.tr_mul(re);
    let mut q = v.tr_mul(im);
    for k in 0..lambda.len() {
        let (s, c) = (-lambda[k] * dt).sin_cos();
        for col in 0..p.ncols() {
            let (a, b) = (p[(k, col)], q[(k, col)]);
            p[(k, col)] = c * a - s * b;
            q[(k, col)] = s * a + c * b;
        }
    }
    v.mul_to(&p, re);
    v.mul_to(&q, im);
}

fn join(re: &DMatrix<f64>, im: &DMatrix<f64>) -> CMatrix {
    CMatrix::from_fn(re.nrows(), re.ncols(), |r, c| C64::new(re[(r, c)], im[(r, c)]))
}

fn quasienergy_set(u: &CMatrix, omega: f64) -> Result<Vec<f64>> {
    let (phases, _) = unitary_eigen(u)?;
    Ok(phases.iter().map(|&t| quasienergy_from_phase(t, omega)).collect())
}

/// `U(T)` refined by step doubling until the quasienergy set moves by less
/// than `opts.tolerance`.
pub fn one_period_propagator(h: &DrivenHamiltonian, opts: &PropagatorOptions) -> Result<Propagator> {
    let mut steps = opts.initial_steps.max(2);
    steps += steps % 2;
    // an undriven Hamiltonian is integrated exactly by a single step pair
    if h.max_harmonic() == 0 {
        let (full, half) = period_steps(h, 2)?;
        return Ok(Propagator { full, half, steps: 2, achieved: 0.0 });
    }
    let omega = h.omega();
    let (full, _) = period_steps(h, steps)?;
    let mut eps = quasienergy_set(&full, omega)?;
    let mut achieved = f64::INFINITY;
    while steps * 2 <= opts.max_steps {
        // the midpoint rule shifts quasienergies as N⁻²: skip levels whose
        // predicted shift is still far above the tolerance
        let mut next = steps * 2;
        if achieved.is_finite() {
            let mut predicted = achieved / 4.0;
            while predicted > 0.5 * opts.tolerance && next * 4 <= opts.max_steps {
                next *= 2;
                predicted /= 4.0;
            }
            if next > steps * 2 {
                let (f, _) = period_steps(h, next / 2)?;
                eps = quasienergy_set(&f, omega)?;
            }
        }
        steps = next;
        let (full, half) = period_steps(h, steps)?;
        let e = quasienergy_set(&full, omega)?;
        achieved = zone_set_distance(&eps, &e, omega);
        debug!("propagator: {steps} steps, shift {achieved:.3e}");
        if achieved < opts.tolerance {
            return Ok(Propagator { full, half, steps, achieved });
        }
        eps = e;
    }
    Err(Error::RefinementNotConverged { steps, achieved, target: opts.tolerance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::reduce_to_zone;
    use crate::lattice::{DriveForm, DriveSpec, LatticeParams};
    use crate::linalg::{unitarity_defect, C64};
    use crate::stationary::{solve_lattice, PlaneWaveBasis};

    fn hamiltonian(s: f64, omega: f64) -> (DrivenHamiltonian, Vec<f64>) {
        let p = LatticeParams::symmetric(6.25, 5.40).unwrap();
        let b = PlaneWaveBasis::default();
        let sol = solve_lattice(&p, &b, 15).unwrap();
        let spec = DriveSpec::sine(s, omega).unwrap();
        (DrivenHamiltonian::new(&p, &DriveForm::Linearized, &spec, &sol, &b).unwrap(), sol.energies)
    }

    #[test]
    fn static_propagator_is_diagonal_phase() {
        let (h, e) = hamiltonian(0.0, 0.9);
        let p = one_period_propagator(&h, &PropagatorOptions::default()).unwrap();
        let t = h.period();
        for r in 0..15 {
            for c in 0..15 {
                let expected = if r == c { C64::from_polar(1.0, -e[r] * t) } else { C64::new(0.0, 0.0) };
                assert!((p.full[(r, c)] - expected).norm() < 1e-10);
            }
        }
        let eps = quasienergy_set(&p.full, 0.9).unwrap();
        let static_set: Vec<f64> = e.iter().map(|&x| reduce_to_zone(x, 0.9)).collect();
        assert!(zone_set_distance(&eps, &static_set, 0.9) < 1e-10);
    }

    #[test]
    fn driven_propagator_is_unitary_and_converged() {
        let (h, _) = hamiltonian(0.88, 1.1);
        let p = one_period_propagator(&h, &PropagatorOptions::default()).unwrap();
        assert!(unitarity_defect(&p.full) < 1e-10);
        assert!(unitarity_defect(&p.half) < 1e-10);
        assert!(p.achieved < 1e-8);
    }

    #[test]
    fn step_cap_reports_achieved_tolerance() {
        let (h, _) = hamiltonian(0.88, 1.1);
        let opts = PropagatorOptions { initial_steps: 16, tolerance: 1e-14, max_steps: 64 };
        match one_period_propagator(&h, &opts) {
            Err(Error::RefinementNotConverged { steps, achieved, .. }) => {
                assert_eq!(steps, 64);
                assert!(achieved > 1e-14 && achieved.is_finite());
            }
            other => panic!("expected refinement failure, got {other:?}"),
        }
    }

    #[test]
    fn odd_step_count_rejected() {
        let (h, _) = hamiltonian(0.5, 1.0);
        assert!(period_steps(&h, 3).is_err());
    }

    #[test]
    fn split_step_matches_dense_exponential() {
        let (h, _) = hamiltonian(0.88, 0.7);
        let (t, dt) = (0.37, 0.05);
        let a = midpoint_step(&h, t, dt).unwrap();
        let b = unitary_step(&h.at(t), dt).unwrap();
        assert!((&a - &b).norm() < 1e-12);
        let psi = CVector::from_fn(15, |r, _| C64::new(1.0 + r as f64, 0.5 - r as f64).unscale(40.0));
        assert!((apply_midpoint(&h, t, dt, &psi).unwrap() - &b * &psi).norm() < 1e-12);
    }

    #[test]
    fn marks_match_period_steps() {
        let (h, _) = hamiltonian(0.88, 0.9);
        let m = evolve_marks(&h, 64, &[0, 32, 64]).unwrap();
        let (full, half) = period_steps(&h, 64).unwrap();
        assert!((&m[0] - CMatrix::identity(15, 15)).norm() < 1e-15);
        assert!((&m[1] - &half).norm() < 1e-12);
        assert!((&m[2] - &full).norm() < 1e-10);
    }
}

