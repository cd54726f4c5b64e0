use log::warn;

use super::hamiltonian::DrivenHamiltonian;
use super::{reduce_to_zone, zone_set_distance};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, CMatrix, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct SambeResult {
    /// Zone-reduced quasienergies, ascending.
    pub quasienergies: Vec<f64>,
    pub m_fourier: usize,
    /// Largest shift of the set when the harmonic window grows by two on each side.
    pub edge_shift: f64,
    pub converged: bool,
}

impl SambeResult {
    pub const DEFAULT_M_FOURIER: usize = 12;
    pub const TOLERANCE: f64 = 1e-8;
    /// Bisection resolution of each quasienergy, E_r.
    pub const RESOLUTION: f64 = 1e-11;
}

/// Quasienergies of the extended-space matrix `H_{m-m'} + mω δ_{mm'}`.
///
/// The harmonic window spans every static state's zone-centre harmonic
/// `-round(E_j/ω)` plus `m_fourier` harmonics on either side. The matrix is
/// block banded, so eigenvalues in the zone are located by bisection on the
/// inertia of a block LDL† factorization of `A - σ` rather than by a dense
/// solve.
pub fn sambe_diagonalize(h: &DrivenHamiltonian, m_fourier: usize) -> Result<SambeResult> {
    if m_fourier == 0 {
        return Err(Error::domain("m_fourier must be at least 1"));
    }
    let omega = h.omega();
    let eps = ExtendedMatrix::new(h, m_fourier).zone_eigenvalues()?;
    let wider = ExtendedMatrix::new(h, m_fourier + 2).zone_eigenvalues()?;
    let edge_shift = if eps.len() == wider.len() && eps.len() == h.dim() {
        zone_set_distance(&eps, &wider, omega)
    } else {
        f64::INFINITY
    };
    let converged = edge_shift < SambeResult::TOLERANCE;
    if !converged {
        warn!("extended-space quasienergies moved by {edge_shift:.3e} when m_fourier grew from {m_fourier}");
    }
    Ok(SambeResult { quasienergies: eps, m_fourier, edge_shift, converged })
}

/// Block-tridiagonal view: each super-block groups `group` consecutive harmonics.
struct ExtendedMatrix {
    omega: f64,
    /// Diagonal super-block without the `mω` shift of its first harmonic.
    diag: CMatrix,
    /// Coupling from super-block `b-1` to `b`.
    upper: CMatrix,
    group: usize,
    first_harmonic: i64,
    blocks: usize,
}

impl ExtendedMatrix {
    fn new(h: &DrivenHamiltonian, m: usize) -> Self {
        let omega = h.omega();
        let k = h.dim();
        let h0 = h.fourier(0);
        let centres: Vec<i64> = (0..k).map(|j| -(h0[(j, j)].re / omega).round() as i64).collect();
        let lo = centres.iter().min().copied().unwrap_or(0) - m as i64;
        let hi = centres.iter().max().copied().unwrap_or(0) + m as i64;
        let kmax = h.max_harmonic().max(1) as i64;
        let group = kmax as usize;
        let harmonics = (hi - lo + 1) as usize;
        let blocks = harmonics.div_ceil(group);
        let comps: Vec<CMatrix> = (-2 * kmax..=2 * kmax).map(|q| h.fourier(q)).collect();
        let comp = |q: i64| &comps[(q + 2 * kmax) as usize];

        let n = group * k;
        let mut diag = CMatrix::zeros(n, n);
        let mut upper = CMatrix::zeros(n, n);
        for s in 0..group {
            for s2 in 0..group {
                let q = s as i64 - s2 as i64;
                let qu = q - group as i64;
                for j in 0..k {
                    for l in 0..k {
                        diag[(s * k + j, s2 * k + l)] = comp(q)[(j, l)];
                        if qu.abs() <= kmax {
                            upper[(s * k + j, s2 * k + l)] = comp(qu)[(j, l)];
                        }
                    }
                }
            }
            for j in 0..k {
                diag[(s * k + j, s * k + j)] += C64::new(s as f64 * omega, 0.0);
            }
        }
        Self { omega, diag, upper, group, first_harmonic: lo, blocks }
    }

    /// Number of eigenvalues below `sigma` (Sylvester inertia of the block LDL† pivots).
    fn count_below(&self, sigma: f64) -> Result<usize> {
        let n = self.diag.nrows();
        let mut count = 0;
        let mut carry: Option<CMatrix> = None;
        for b in 0..self.blocks {
            let shift = (self.first_harmonic + (b * self.group) as i64) as f64 * self.omega - sigma;
            let mut d = self.diag.clone();
            for i in 0..n {
                d[(i, i)] += C64::new(shift, 0.0);
            }
            if let Some(c) = &carry {
                d -= c;
            }
            let need_carry = b + 1 < self.blocks;
            let (neg, next) = match pivoted_ldl(&d, need_carry.then_some(&self.upper)) {
                Some(r) => r,
                None => eigen_pivot(&d, need_carry.then_some(&self.upper))?,
            };
            count += neg;
            carry = next;
        }
        Ok(count)
    }

    fn zone_eigenvalues(&self) -> Result<Vec<f64>> {
        let (lo, hi) = (-0.5 * self.omega, 0.5 * self.omega);
        let (c_lo, c_hi) = (self.count_below(lo)?, self.count_below(hi)?);
        let mut out = Vec::new();
        self.isolate(lo, hi, c_lo, c_hi, &mut out)?;
        let mut eps: Vec<f64> = out.into_iter().map(|e| reduce_to_zone(e, self.omega)).collect();
        eps.sort_by(f64::total_cmp);
        Ok(eps)
    }

    fn isolate(&self, lo: f64, hi: f64, c_lo: usize, c_hi: usize, out: &mut Vec<f64>) -> Result<()> {
        if c_hi <= c_lo {
            return Ok(());
        }
        let mid = 0.5 * (lo + hi);
        if hi - lo < SambeResult::RESOLUTION {
            out.extend(std::iter::repeat_n(mid, c_hi - c_lo));
            return Ok(());
        }
        let c_mid = self.count_below(mid)?;
        self.isolate(lo, mid, c_lo, c_mid, out)?;
        self.isolate(mid, hi, c_mid, c_hi, out)
    }
}

/// Negative-eigenvalue count of Hermitian `d` and `B† d⁻¹ B`, via a
/// diagonally pivoted LDL† factorization. `None` if a pivot is too small
/// relative to the remaining block for 1×1 pivoting to be reliable.
fn pivoted_ldl(d: &CMatrix, b: Option<&CMatrix>) -> Option<(usize, Option<CMatrix>)> {
    let n = d.nrows();
    let mut a = d.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut pivots = vec![0.0; n];
    let mut neg = 0;
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[(i, i)].re.abs().total_cmp(&a[(j, j)].re.abs()))?;
        let mut biggest: f64 = 0.0;
        for c in k..n {
            for r in k..n {
                biggest = biggest.max(a[(r, c)].norm());
            }
        }
        if a[(p, p)].re.abs() < 1e-6 * biggest || biggest == 0.0 {
            return None;
        }
        if p != k {
            a.swap_rows(k, p);
            a.swap_columns(k, p);
            perm.swap(k, p);
        }
        let dk = a[(k, k)].re;
        pivots[k] = dk;
        if dk < 0.0 {
            neg += 1;
        }
        for i in k + 1..n {
            a[(i, k)] /= dk;
        }
        for j in k + 1..n {
            let ljk = a[(j, k)].conj() * dk;
            for i in j..n {
                let lik = a[(i, k)];
                a[(i, j)] -= lik * ljk;
            }
        }
        for j in k + 1..n {
            for i in j + 1..n {
                a[(j, i)] = a[(i, j)].conj();
            }
        }
    }
    let Some(b) = b else { return Some((neg, None)) };
    // Y = L⁻¹ P B, carry = Y† Λ⁻¹ Y
    let m = b.ncols();
    let mut y = CMatrix::from_fn(n, m, |r, c| b[(perm[r], c)]);
    for c in 0..m {
        for r in 0..n {
            let mut acc = y[(r, c)];
            for k in 0..r {
                acc -= a[(r, k)] * y[(k, c)];
            }
            y[(r, c)] = acc;
        }
    }
    let mut scaled = y.clone();
    for r in 0..n {
        let inv = 1.0 / pivots[r];
        for c in 0..m {
            scaled[(r, c)] *= inv;
        }
    }
    Some((neg, Some(y.adjoint() * scaled)))
}

fn eigen_pivot(d: &CMatrix, b: Option<&CMatrix>) -> Result<(usize, Option<CMatrix>)> {
    let eig = hermitian_eigen(d)?;
    let neg = eig.values.iter().filter(|&&v| v < 0.0).count();
    let Some(b) = b else { return Ok((neg, None)) };
    let proj = eig.vectors.adjoint() * b;
    let mut w = proj.clone();
    for (r, &v) in eig.values.iter().enumerate() {
        let inv = if v.abs() > 1e-300 { 1.0 / v } else { 1e300 };
        for c in 0..w.ncols() {
            w[(r, c)] *= inv;
        }
    }
    Ok((neg, Some(proj.adjoint() * w)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::{one_period_propagator, quasienergy_from_phase, PropagatorOptions};
    use crate::lattice::{DriveForm, DriveSpec, LatticeParams};
    use crate::linalg::{hermitian_eigenvalues, unitary_eigen};
    use crate::stationary::{solve_lattice, PlaneWaveBasis};

    fn ham(s: f64, omega: f64, n: usize) -> (DrivenHamiltonian, Vec<f64>) {
        let p = LatticeParams::symmetric(6.25, 5.40).unwrap();
        let b = PlaneWaveBasis::default();
        let sol = solve_lattice(&p, &b, n).unwrap();
        let spec = DriveSpec::sine(s, omega).unwrap();
        (DrivenHamiltonian::new(&p, &DriveForm::Linearized, &spec, &sol, &b).unwrap(), sol.energies)
    }

    #[test]
    fn inertia_count_matches_dense_spectrum() {
        let (h, _) = ham(0.88, 3.0, 4);
        let ext = ExtendedMatrix::new(&h, 2);
        let n = ext.blocks * ext.diag.nrows();
        let bs = ext.diag.nrows();
        let mut dense = CMatrix::zeros(n, n);
        for b in 0..ext.blocks {
            let shift = (ext.first_harmonic + (b * ext.group) as i64) as f64 * ext.omega;
            for r in 0..bs {
                for c in 0..bs {
                    dense[(b * bs + r, b * bs + c)] = ext.diag[(r, c)];
                    if b + 1 < ext.blocks {
                        dense[(b * bs + r, (b + 1) * bs + c)] = ext.upper[(r, c)];
                        dense[((b + 1) * bs + c, b * bs + r)] = ext.upper[(r, c)].conj();
                    }
                }
                dense[(b * bs + r, b * bs + r)] += C64::new(shift, 0.0);
            }
        }
        let values = hermitian_eigenvalues(&dense).unwrap();
        for sigma in [-7.3, -1.0, 0.2, 4.9, 11.0] {
            let expected = values.iter().filter(|&&v| v < sigma).count();
            assert_eq!(ext.count_below(sigma).unwrap(), expected, "sigma {sigma}");
        }
    }

    #[test]
    fn ldl_inertia_matches_eigenvalues() {
        let n = 7;
        let mut state = 17u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = CMatrix::from_fn(n, n, |_, _| C64::new(next(), next()));
        let d = (&a + a.adjoint()) * C64::new(0.5, 0.0);
        let b = CMatrix::from_fn(n, n, |_, _| C64::new(next(), next()));
        let (neg, carry) = pivoted_ldl(&d, Some(&b)).unwrap();
        let (neg2, carry2) = eigen_pivot(&d, Some(&b)).unwrap();
        assert_eq!(neg, neg2);
        assert!((carry.unwrap() - carry2.unwrap()).norm() < 1e-9);
    }

    #[test]
    fn static_energies_recovered() {
        let (h, e) = ham(0.0, 0.8, 15);
        let r = sambe_diagonalize(&h, 2).unwrap();
        assert!(r.converged);
        assert!(zone_set_distance(&r.quasienergies, &e, 0.8) < 1e-10);
    }

    #[test]
    fn agrees_with_propagator() {
        let (h, _) = ham(0.88, 1.4, 15);
        let r = sambe_diagonalize(&h, SambeResult::DEFAULT_M_FOURIER).unwrap();
        assert!(r.converged, "shift {}", r.edge_shift);
        let p = one_period_propagator(&h, &PropagatorOptions::default()).unwrap();
        let (phases, _) = unitary_eigen(&p.full).unwrap();
        let eps: Vec<f64> = phases.iter().map(|&t| quasienergy_from_phase(t, 1.4)).collect();
        let d = zone_set_distance(&eps, &r.quasienergies, 1.4);
        assert!(d < 1e-6, "distance {d}");
    }

    #[test]
    fn rejects_zero_window() {
        let (h, _) = ham(0.1, 1.0, 4);
        assert!(sambe_diagonalize(&h, 0).is_err());
    }
}
