//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::io::Write;

/// Lowest `count` eigenvalues of `-d²/dx² + V(x)` on a periodic grid of `n`
/// points over `[-π, π)`, by Sturm counts on the cyclic tridiagonal matrix.
pub fn fd_spectrum(v: impl Fn(f64) -> f64, n: usize, count: usize) -> Vec<f64> {
    let h = 2.0 * PI / n as f64;
    let off = -1.0 / (h * h);
    let diag: Vec<f64> = (0..n).map(|i| 2.0 / (h * h) + v(-PI + i as f64 * h)).collect();
    let vmax = diag.iter().fold(f64::MIN, |a, &b| a.max(b));
    (0..count)
        .map(|k| {
            let (mut lo, mut hi) = (-1.0 - vmax.abs(), vmax + 4.0 / (h * h));
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if count_below(&diag, off, mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo < 1e-13 {
                    break;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

/// Eigenvalues below `sigma`: inertia of the leading tridiagonal block plus
/// the sign of the Schur complement of the last row and column.
fn count_below(diag: &[f64], off: f64, sigma: f64) -> usize {
    let n = diag.len();
    let m = n - 1;
    // LDLᵀ of T - σ (first m rows), solving (T - σ) y = u on the way
    let mut d = vec![0.0; m];
    let mut y = vec![0.0; m];
    let mut negatives = 0;
    let tiny = 1e-300;
    for i in 0..m {
        let mut p = diag[i] - sigma;
        let mut r = if i == 0 { off } else { 0.0 };
        if i == m - 1 {
            r += off;
        }
        if i > 0 {
            let l = off / d[i - 1];
            p -= l * off;
            r -= l * y[i - 1];
        }
        if p.abs() < tiny {
            p = tiny;
        }
        d[i] = p;
        y[i] = r;
        if p < 0.0 {
            negatives += 1;
        }
    }
    // back substitution for (T - σ)⁻¹ u with the bidiagonal factor
    let mut x = vec![0.0; m];
    for i in (0..m).rev() {
        let next = if i + 1 < m { x[i + 1] } else { 0.0 };
        x[i] = y[i] / d[i] - if i + 1 < m { off / d[i] * next } else { 0.0 };
    }
    let mut u = vec![0.0; m];
    u[0] += off;
    u[m - 1] += off;
    let schur = diag[n - 1] - sigma - u.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
    negatives + usize::from(schur < 0.0)
}

/// Richardson-extrapolated finite-difference spectrum from grids of `n` and `2n` points.
pub fn fd_spectrum_extrapolated(v: impl Fn(f64) -> f64 + Copy, n: usize, count: usize) -> Vec<f64> {
    let a = fd_spectrum(v, n, count);
    let b = fd_spectrum(v, 2 * n, count);
    a.iter().zip(&b).map(|(x, y)| (4.0 * y - x) / 3.0).collect()
}

pub fn double_well(v1: f64, v2: f64, phi_s: f64) -> impl Fn(f64) -> f64 + Copy {
    move |x: f64| v1 * x.cos().powi(2) + v2 * (0.5 * x + 0.5 * phi_s).cos().powi(2)
}

/// One result line that is shown even when test output is captured.
pub fn report(line: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}
