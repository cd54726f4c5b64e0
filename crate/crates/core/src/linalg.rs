//! Dense complex linear algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

fn max_iterations(dim: usize) -> usize {
    200 * dim.max(10)
}

pub fn hermitian_eigen(h: &CMatrix) -> Result<HermitianEigen> {
    let dim = h.nrows();
    let max_iter = max_iterations(dim);
    let eig = SymmetricEigen::try_new(h.clone(), f64::EPSILON, max_iter)
        .ok_or(Error::EigenNonConvergence { dim, max_iterations: max_iter })?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(HermitianEigen { values, vectors })
}

pub fn hermitian_eigenvalues(h: &CMatrix) -> Result<Vec<f64>> {
    let dim = h.nrows();
    let max_iter = max_iterations(dim);
    let eig = SymmetricEigen::try_new(h.clone(), f64::EPSILON, max_iter)
        .ok_or(Error::EigenNonConvergence { dim, max_iterations: max_iter })?;
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// `exp(-i H dt)` for Hermitian `H` by spectral decomposition.
pub fn unitary_step(h: &CMatrix, dt: f64) -> Result<CMatrix> {
    let eig = hermitian_eigen(h)?;
    let n = h.nrows();
    let mut scaled = eig.vectors.clone();
    for (c, &lambda) in eig.values.iter().enumerate() {
        let phase = C64::from_polar(1.0, -lambda * dt);
        for r in 0..n {
            scaled[(r, c)] *= phase;
        }
    }
    Ok(scaled * eig.vectors.adjoint())
}

/// Eigen-decomposition of a unitary matrix.
///
/// Returns eigenphases in `(-π, π]` and an orthonormal eigenvector matrix.
/// The phases are located with a complex Schur form; the vectors come from a
/// Hermitian solve of the Cayley transform `i(1 - U')(1 + U')⁻¹`, where `U'`
/// is `U` rotated so that the largest phase gap sits at `-1`.
pub fn unitary_eigen(u: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = u.nrows();
    let max_iter = max_iterations(n);
    let schur = Schur::try_new(u.clone(), f64::EPSILON, max_iter)
        .ok_or(Error::EigenNonConvergence { dim: n, max_iterations: max_iter })?;
    let (_, t) = schur.unpack();
    let mut phases: Vec<f64> = (0..n).map(|i| t[(i, i)].arg()).collect();
    phases.sort_by(f64::total_cmp);

    // centre of the widest gap between consecutive eigenphases (cyclically)
    let mut gap_centre = 0.0;
    let mut widest = -1.0;
    for i in 0..n {
        let a = phases[i];
        let b = if i + 1 < n { phases[i + 1] } else { phases[0] + std::f64::consts::TAU };
        if b - a > widest {
            widest = b - a;
            gap_centre = 0.5 * (a + b);
        }
    }
    let rotation = gap_centre - std::f64::consts::PI;
    let rotated = u * C64::from_polar(1.0, -rotation);
    let id = CMatrix::identity(n, n);
    let plus = &id + &rotated;
    let minus = &id - &rotated;
    let inv = plus
        .try_inverse()
        .ok_or_else(|| Error::domain("Cayley transform singular; matrix is not unitary"))?;
    let i = C64::new(0.0, 1.0);
    let cayley = (minus * inv) * i;
    let herm = (&cayley + cayley.adjoint()) * C64::new(0.5, 0.0);
    let eig = hermitian_eigen(&herm)?;
    let phases = eig
        .values
        .iter()
        .map(|&tn| wrap_phase(rotation + 2.0 * tn.atan()))
        .collect();
    Ok((phases, eig.vectors))
}

/// Wrap an angle into `(-π, π]`.
pub fn wrap_phase(theta: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut r = theta.rem_euclid(tau);
    if r > std::f64::consts::PI {
        r -= tau;
    }
    r
}

/// `‖U†U - I‖_max`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.ncols();
    let g = u.adjoint() * u;
    let mut worst: f64 = 0.0;
    for r in 0..n {
        for c in 0..n {
            let target = if r == c { ONE } else { ZERO };
            worst = worst.max((g[(r, c)] - target).norm());
        }
    }
    worst
}

pub fn hermitian_defect(h: &CMatrix) -> f64 {
    (h - h.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Make the largest-magnitude entry of `v` real and positive.
pub fn fix_phase(v: &mut CVector) {
    let mut best = 0;
    let mut mag = -1.0;
    for (i, z) in v.iter().enumerate() {
        // ties resolved toward the lower index so the convention is deterministic
        if z.norm() > mag * (1.0 + 1e-12) {
            mag = z.norm();
            best = i;
        }
    }
    if mag > 0.0 {
        let phase = v[best].conj() / v[best].norm();
        *v *= phase;
    }
}
