//! Undriven double well in a plane-wave basis.
//!
//! Only the `q = 0` Bloch sector of one long-lattice cell is represented:
//! basis functions are `e^{inx}/√(2π)` with `n ∈ [-n_max, n_max]`, so the
//! kinetic energy of order `n` is exactly `n² E_r`.

use std::f64::consts::{PI, TAU};
use std::fmt;

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::lattice::LatticeParams;
use crate::linalg::{fix_phase, hermitian_eigen, CMatrix, CVector, HermitianEigen, C64, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlaneWaveBasis {
    n_max: usize,
}

impl PlaneWaveBasis {
    pub const MIN_N_MAX: usize = 8;
    pub const DEFAULT_N_MAX: usize = 32;

    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < Self::MIN_N_MAX {
            return Err(Error::domain(format!(
                "n_max must be at least {}, got {n_max}",
                Self::MIN_N_MAX
            )));
        }
        Ok(Self { n_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        2 * self.n_max + 1
    }

    /// Momentum order (in units of ħk) of basis index `i`.
    pub fn order(&self, i: usize) -> i64 {
        i as i64 - self.n_max as i64
    }

    pub fn orders(&self) -> impl Iterator<Item = i64> {
        let n = self.n_max as i64;
        -n..=n
    }
}

impl Default for PlaneWaveBasis {
    fn default() -> Self {
        Self { n_max: Self::DEFAULT_N_MAX }
    }
}

pub fn build_static_hamiltonian(params: &LatticeParams, basis: &PlaneWaveBasis) -> CMatrix {
    let d = basis.dim();
    let mut h = CMatrix::from_element(d, d, ZERO);
    let offset = 0.5 * (params.v1 + params.v2);
    let short = C64::new(0.25 * params.v1, 0.0);
    let long_up = C64::from_polar(0.25 * params.v2, params.phi_s);
    for i in 0..d {
        let n = basis.order(i) as f64;
        h[(i, i)] = C64::new(n * n + offset, 0.0);
        if i + 1 < d {
            // <n+1|V|n> picks the e^{+ix} Fourier component of the long lattice
            h[(i + 1, i)] = long_up;
            h[(i, i + 1)] = long_up.conj();
        }
        if i + 2 < d {
            h[(i + 2, i)] = short;
            h[(i, i + 2)] = short;
        }
    }
    h
}

/// Matrix of `sin(x)` between plane waves.
pub fn sin_matrix(basis: &PlaneWaveBasis) -> CMatrix {
    let d = basis.dim();
    let mut m = CMatrix::from_element(d, d, ZERO);
    for i in 0..d - 1 {
        m[(i + 1, i)] = C64::new(0.0, -0.5);
        m[(i, i + 1)] = C64::new(0.0, 0.5);
    }
    m
}

/// Spatial inversion `x → -x`, i.e. `c_n → c_{-n}`.
pub fn reflect(v: &CVector) -> CVector {
    let d = v.len();
    CVector::from_fn(d, |i, _| v[d - 1 - i])
}

/// `ψ(x)` for plane-wave coefficients `c`.
pub fn wavefunction(basis: &PlaneWaveBasis, c: &CVector, x: f64) -> C64 {
    let norm = 1.0 / TAU.sqrt();
    basis
        .orders()
        .zip(c.iter())
        .map(|(n, &cn)| cn * C64::from_polar(norm, n as f64 * x))
        .sum()
}

/// Probability in the half cell `x ∈ (0, π)`.
pub fn right_half_probability(c: &CVector) -> f64 {
    let d = c.len();
    let mut acc = 0.5 * c.norm_squared();
    // ∫_0^π e^{i d x} dx = 2i/d for odd d, 0 for even d ≠ 0
    for shift in (1..d).step_by(2) {
        let mut s = ZERO;
        for n in 0..d - shift {
            s += c[n].conj() * c[n + shift];
        }
        let w = C64::new(0.0, 1.0 / (PI * shift as f64));
        // the -shift term is the complex conjugate of the +shift term
        acc += 2.0 * (w * s).re;
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Parity {
    Plus,
    Minus,
    Broken(f64),
}

impl Parity {
    pub const TOLERANCE: f64 = 1e-6;

    pub fn from_defects(plus_defect: f64, minus_defect: f64, tol: f64) -> Self {
        if plus_defect < tol {
            Parity::Plus
        } else if minus_defect < tol {
            Parity::Minus
        } else {
            Parity::Broken(plus_defect.min(minus_defect))
        }
    }

    pub fn is_definite(&self) -> bool {
        !matches!(self, Parity::Broken(_))
    }

    pub fn sign(&self) -> Option<i8> {
        match self {
            Parity::Plus => Some(1),
            Parity::Minus => Some(-1),
            Parity::Broken(_) => None,
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Parity::Plus => write!(f, "+1"),
            Parity::Minus => write!(f, "-1"),
            Parity::Broken(d) => write!(f, "broken({d:.3e})"),
        }
    }
}

/// Parity of a plane-wave state under `x → -x`.
pub fn spatial_parity(c: &CVector) -> Parity {
    let r = reflect(c);
    Parity::from_defects((&r - c).norm(), (&r + c).norm(), Parity::TOLERANCE)
}

#[derive(Debug, Clone)]
pub struct EigenSolution {
    /// Ascending energies of the kept states, E_r.
    pub energies: Vec<f64>,
    /// Plane-wave coefficients, one column per kept state.
    pub vectors: CMatrix,
    pub n_states_kept: usize,
    /// Largest `‖H v - E v‖` over the kept states.
    pub max_residual: f64,
}

impl EigenSolution {
    pub const DEFAULT_STATES_KEPT: usize = 15;
    const RESIDUAL_TOLERANCE: f64 = 1e-8;

    pub fn state(&self, i: usize) -> CVector {
        self.vectors.column(i).into_owned()
    }

    /// Express eigenbasis coefficients in the plane-wave basis.
    pub fn to_plane_wave(&self, coeffs: &CVector) -> CVector {
        &self.vectors * coeffs
    }

    /// Project a plane-wave vector onto the kept eigenstates.
    pub fn to_eigenbasis(&self, c: &CVector) -> CVector {
        self.vectors.adjoint() * c
    }

    /// `V† A V` for a plane-wave operator `A`.
    pub fn project(&self, a: &CMatrix) -> CMatrix {
        self.vectors.adjoint() * a * &self.vectors
    }

    pub fn gram_defect(&self) -> f64 {
        crate::linalg::unitarity_defect(&self.vectors)
    }

    /// Spatial inversion restricted to the kept states.
    pub fn parity_operator(&self) -> CMatrix {
        let d = self.vectors.nrows();
        let reflected = CMatrix::from_fn(d, self.n_states_kept, |r, c| self.vectors[(d - 1 - r, c)]);
        self.vectors.adjoint() * reflected
    }
}

pub fn solve_eigen(h: &CMatrix, n_states_kept: usize) -> Result<EigenSolution> {
    let dim = h.nrows();
    if n_states_kept == 0 || n_states_kept > dim {
        return Err(Error::domain(format!(
            "n_states_kept must be in 1..={dim}, got {n_states_kept}"
        )));
    }
    let eig = if is_real_operator(h) { real_basis_eigen(h)? } else { hermitian_eigen(h)? };
    let mut vectors = CMatrix::from_element(dim, n_states_kept, ZERO);
    let mut max_residual: f64 = 0.0;
    for k in 0..n_states_kept {
        let mut v = eig.vectors.column(k).into_owned();
        fix_phase(&mut v);
        let r = h * &v - &v * C64::new(eig.values[k], 0.0);
        max_residual = max_residual.max(r.norm());
        vectors.set_column(k, &v);
    }
    if max_residual > EigenSolution::RESIDUAL_TOLERANCE {
        return Err(Error::domain(format!(
            "eigenvector residual {max_residual:.3e} exceeds {:.0e}",
            EigenSolution::RESIDUAL_TOLERANCE
        )));
    }
    Ok(EigenSolution {
        energies: eig.values[..n_states_kept].to_vec(),
        vectors,
        n_states_kept,
        max_residual,
    })
}

fn matrix_scale(h: &CMatrix) -> f64 {
    h.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0)
}

/// `H` commutes with `c_n → c_{-n}*`, i.e. it is the matrix of a real operator.
fn is_real_operator(h: &CMatrix) -> bool {
    let d = h.nrows();
    let tol = 1e-14 * matrix_scale(h);
    (0..d).all(|r| (0..d).all(|c| (h[(r, c)] - h[(d - 1 - r, d - 1 - c)].conj()).norm() <= tol))
}

fn is_reflection_symmetric(h: &CMatrix) -> bool {
    let d = h.nrows();
    let tol = 1e-14 * matrix_scale(h);
    (0..d).all(|r| (0..d).all(|c| (h[(r, c)] - h[(d - 1 - r, d - 1 - c)]).norm() <= tol))
}

/// Diagonalize the matrix of a real operator in the real basis
/// `{1, √2 cos nx, √2 sin nx}`, where it is real symmetric, so every
/// eigenfunction is real even inside near-degenerate clusters. With
/// inversion symmetry the cosine and sine sectors are solved separately,
/// which gives every eigenvector exact parity.
fn real_basis_eigen(h: &CMatrix) -> Result<HermitianEigen> {
    let d = h.nrows();
    let centre = d / 2;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // columns 0..=centre are cosines, the rest sines
    let mut q = CMatrix::from_element(d, d, ZERO);
    q[(centre, 0)] = C64::new(1.0, 0.0);
    for n in 1..=centre {
        q[(centre + n, n)] = C64::new(s, 0.0);
        q[(centre - n, n)] = C64::new(s, 0.0);
        q[(centre + n, centre + n)] = C64::new(0.0, -s);
        q[(centre - n, centre + n)] = C64::new(0.0, s);
    }
    let t = (q.adjoint() * h * &q).map(|z| z.re);
    let t = (&t + t.transpose()) * 0.5;
    let sectors: Vec<(usize, usize)> =
        if is_reflection_symmetric(h) { vec![(0, centre + 1), (centre + 1, centre)] } else { vec![(0, d)] };
    let mut pairs: Vec<(f64, CVector)> = Vec::with_capacity(d);
    for (start, len) in sectors {
        let block = t.view((start, start), (len, len)).into_owned();
        let max_iter = 200 * len.max(10);
        let eig = SymmetricEigen::try_new(block, f64::EPSILON, max_iter)
            .ok_or(Error::EigenNonConvergence { dim: len, max_iterations: max_iter })?;
        for k in 0..len {
            let v = eig.eigenvectors.column(k).map(|x| C64::new(x, 0.0));
            pairs.push((eig.eigenvalues[k], q.columns(start, len) * v));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let values = pairs.iter().map(|p| p.0).collect();
    let vectors = CMatrix::from_fn(d, d, |r, c| pairs[c].1[r]);
    Ok(HermitianEigen { values, vectors })
}

/// Convenience: build and diagonalize in one go.
pub fn solve_lattice(params: &LatticeParams, basis: &PlaneWaveBasis, n_states_kept: usize) -> Result<EigenSolution> {
    solve_eigen(&build_static_hamiltonian(params, basis), n_states_kept)
}

/// Lowest doublet: splitting, dipole element and well-localized combinations.
///
/// The localized states diagonalize `sin x` inside the doublet span. For a
/// symmetric well this gives `(φ₁ ± e^{iχ}φ₂)/√2`; for an asymmetric well it
/// gives the states that actually sit in one well.
#[derive(Debug, Clone)]
pub struct DoubletData {
    pub delta_12: f64,
    /// `|<φ₁|sin x|φ₂>|`.
    pub x12: f64,
    /// Unit phase `e^{iχ}` with `<φ₁|sin x|e^{iχ}φ₂>` real and non-negative.
    pub relative_phase: C64,
    /// `|R> = r₁ φ₁ + r₂ φ₂`.
    pub right_coeffs: [C64; 2],
    /// `|L> = l₁ φ₁ + l₂ φ₂`.
    pub left_coeffs: [C64; 2],
    pub left_state: CVector,
    pub right_state: CVector,
    /// Set when the doublet is too close to degenerate for the phase convention to be meaningful.
    pub degenerate: bool,
}

impl DoubletData {
    /// Coefficients of `|R>` in the first `n_states` eigenstates.
    pub fn right_in_eigenbasis(&self, n_states: usize) -> CVector {
        Self::embed(n_states, self.right_coeffs)
    }

    pub fn left_in_eigenbasis(&self, n_states: usize) -> CVector {
        Self::embed(n_states, self.left_coeffs)
    }

    fn embed(n_states: usize, c: [C64; 2]) -> CVector {
        let mut v = CVector::from_element(n_states, ZERO);
        v[0] = c[0];
        v[1] = c[1];
        v
    }
}

pub fn doublet_data(sol: &EigenSolution, basis: &PlaneWaveBasis) -> Result<DoubletData> {
    if sol.n_states_kept < 2 {
        return Err(Error::domain("doublet needs at least two kept states"));
    }
    if sol.vectors.nrows() != basis.dim() {
        return Err(Error::domain("eigen solution does not match the basis dimension"));
    }
    let phi1 = sol.state(0);
    let phi2 = sol.state(1);
    let delta_12 = sol.energies[1] - sol.energies[0];
    let s = sin_matrix(basis);
    let element = (phi1.adjoint() * &s * &phi2)[(0, 0)];
    let a = (phi1.adjoint() * &s * &phi1)[(0, 0)].re;
    let d = (phi2.adjoint() * &s * &phi2)[(0, 0)].re;
    let x12 = element.norm();
    let relative_phase = if x12 > 1e-14 { element.conj() / x12 } else { C64::new(1.0, 0.0) };
    let degenerate = delta_12 < 1e-12 * (1.0 + sol.energies[0].abs()) || x12 < 1e-14;

    // upper eigenvector of [[a, x12], [x12, d]] in the rephased pair (φ₁, e^{iχ}φ₂)
    let half_gap = 0.5 * (a - d);
    let angle = 0.5 * x12.atan2(half_gap);
    let (u, v) = (angle.cos(), angle.sin());
    let right_coeffs = [C64::new(u, 0.0), relative_phase * v];
    let left_coeffs = [C64::new(v, 0.0), relative_phase * -u];
    let combine = |c: [C64; 2]| &phi1 * c[0] + &phi2 * c[1];
    let right_state = combine(right_coeffs);
    let left_state = combine(left_coeffs);
    Ok(DoubletData { delta_12, x12, relative_phase, right_coeffs, left_coeffs, left_state, right_state, degenerate })
}
