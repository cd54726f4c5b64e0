//! Two-level reduction of the driven doublet.
//!
//! A drive `S sin(x) f(t)` shifts the well-localized states `|L>` and `|R>`
//! by `∓S x₁₂ f(t)`, a bias of amplitude `2 S x₁₂`. For a sinusoidal drive
//! this renormalizes the tunneling splitting to `J₀(2 S x₁₂ / ω) Δ₁₂`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stationary::DoubletData;

/// First positive zero of `J₀`.
pub const J0_FIRST_ZERO: f64 = 2.404_825_557_695_773;

/// `J₀(z)` with absolute error below `1e-10` for `|z| ≤ 50`.
pub fn bessel_j0(z: f64) -> f64 {
    let z = z.abs();
    if z <= 8.0 {
        // Σ (-z²/4)^k / (k!)²
        let q = -0.25 * z * z;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            term *= q / (k * k) as f64;
            sum += term;
            if term.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        sum
    } else {
        miller_j0(z)
    }
}

/// Backward recurrence `J_{n-1} = (2n/z) J_n - J_{n+1}` normalized by
/// `J₀ + 2 Σ J_{2k} = 1`.
fn miller_j0(z: f64) -> f64 {
    let start = 2 * ((z as usize + 40) / 2 + 10);
    let (mut next, mut cur) = (0.0_f64, 1e-300_f64);
    let mut norm = 0.0;
    for n in (1..=start).rev() {
        let prev = 2.0 * n as f64 / z * cur - next;
        next = cur;
        cur = prev;
        // cur is now J_{n-1}
        if (n - 1) % 2 == 0 && n - 1 > 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
        }
    }
    cur / (norm + cur)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoModeParams {
    pub delta_12: f64,
    pub x12: f64,
}

impl TwoModeParams {
    pub fn new(delta_12: f64, x12: f64) -> Result<Self> {
        if !(delta_12 >= 0.0 && x12 >= 0.0 && delta_12.is_finite() && x12.is_finite()) {
            return Err(Error::domain(format!("need delta_12 ≥ 0 and x12 ≥ 0, got {delta_12}, {x12}")));
        }
        Ok(Self { delta_12, x12 })
    }

    pub fn from_doublet(d: &DoubletData) -> Self {
        Self { delta_12: d.delta_12, x12: d.x12 }
    }

    /// Bessel argument `2 S x₁₂ / ω`.
    pub fn argument(&self, amplitude_s: f64, omega_d: f64) -> f64 {
        2.0 * amplitude_s * self.x12 / omega_d
    }
}

/// `J₀(2 S x₁₂/ω) Δ₁₂`, keeping the sign.
pub fn two_mode_splitting_signed(tm: &TwoModeParams, amplitude_s: f64, omega_d: f64) -> Result<f64> {
    if !(omega_d > 0.0) {
        return Err(Error::domain(format!("omega_d must be positive, got {omega_d}")));
    }
    Ok(bessel_j0(tm.argument(amplitude_s, omega_d)) * tm.delta_12)
}

/// `|J₀(2 S x₁₂/ω)| Δ₁₂`.
pub fn two_mode_splitting(tm: &TwoModeParams, amplitude_s: f64, omega_d: f64) -> Result<f64> {
    two_mode_splitting_signed(tm, amplitude_s, omega_d).map(f64::abs)
}

/// Smallest amplitude at which the two-mode splitting vanishes.
pub fn cdt_amplitude(tm: &TwoModeParams, omega_d: f64) -> Result<f64> {
    if !(tm.x12 > 0.0) {
        return Err(Error::domain("x12 = 0: the drive does not couple the doublet"));
    }
    if !(omega_d > 0.0) {
        return Err(Error::domain(format!("omega_d must be positive, got {omega_d}")));
    }
    Ok(J0_FIRST_ZERO * omega_d / (2.0 * tm.x12))
}

/// Drive frequency at which the two-mode splitting vanishes for amplitude `S`.
pub fn cdt_frequency(tm: &TwoModeParams, amplitude_s: f64) -> Result<f64> {
    if !(tm.x12 > 0.0) {
        return Err(Error::domain("x12 = 0: the drive does not couple the doublet"));
    }
    Ok(2.0 * amplitude_s * tm.x12 / J0_FIRST_ZERO)
}
