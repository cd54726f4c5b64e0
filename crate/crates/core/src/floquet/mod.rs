//! Floquet analysis of the driven double well in the basis of the lowest
//! static eigenstates.
//!
//! Quasienergies are always reported in the zone `(-ω/2, ω/2]`.

mod hamiltonian;
pub(crate) mod propagator;
mod sambe;
mod scan;
mod solution;

pub use hamiltonian::DrivenHamiltonian;
pub use propagator::{midpoint_step, one_period_propagator, period_steps, Propagator, PropagatorOptions};
pub use sambe::{sambe_diagonalize, SambeResult};
pub use scan::{crossing_detect, Crossing, CrossingKind, ScanAxis, ScanPoint, ScanRow, ScanTable, Scanner};
pub use solution::{
    effective_splitting, parity_classify, quasienergies, EffectiveSplitting, FloquetSolution, SplittingLine,
    SplittingSpectrum,
};

use std::f64::consts::TAU;

/// Reduce a quasienergy into `(-ω/2, ω/2]`.
pub fn reduce_to_zone(e: f64, omega: f64) -> f64 {
    let r = e - omega * (e / omega - 0.5).ceil();
    // guard the open lower edge against rounding
    if r <= -0.5 * omega {
        r + omega
    } else {
        r
    }
}

/// Fold a quasienergy difference into `[0, ω/2]`.
pub fn fold_difference(d: f64, omega: f64) -> f64 {
    let r = d.abs().rem_euclid(omega);
    r.min(omega - r)
}

/// Largest distance between two quasienergy sets after the best cyclic
/// alignment of their zone-sorted values. Both sets must have equal length.
pub fn zone_set_distance(a: &[f64], b: &[f64], omega: f64) -> f64 {
    assert_eq!(a.len(), b.len(), "quasienergy sets differ in size");
    if a.is_empty() {
        return 0.0;
    }
    let sorted = |v: &[f64]| {
        let mut s: Vec<f64> = v.iter().map(|&e| reduce_to_zone(e, omega)).collect();
        s.sort_by(f64::total_cmp);
        s
    };
    let (a, b) = (sorted(a), sorted(b));
    let n = a.len();
    (0..n)
        .map(|shift| {
            (0..n)
                .map(|i| fold_difference(a[i] - b[(i + shift) % n], omega))
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Quasienergy `-θ/T` belonging to an eigenphase `θ` of the one-period propagator.
pub fn quasienergy_from_phase(theta: f64, omega: f64) -> f64 {
    reduce_to_zone(-theta * omega / TAU, omega)
}
