use super::{fold_difference, quasienergy_from_phase};
use crate::error::{Error, Result};
use crate::linalg::{fix_phase, unitarity_defect, unitary_eigen, CMatrix, CVector, C64};
use crate::stationary::Parity;

/// Floquet modes at `t = 0` in the kept eigenbasis, sorted by quasienergy.
#[derive(Debug, Clone)]
pub struct FloquetSolution {
    pub omega: f64,
    /// Zone-reduced quasienergies, ascending.
    pub quasienergies: Vec<f64>,
    /// One column per mode.
    pub modes_t0: CMatrix,
    /// `|<Φ_α(0)|ψ₀>|²` for the preparation state.
    pub weights: Vec<f64>,
    /// Empty until [`parity_classify`] has run.
    pub parity: Vec<Parity>,
    initial: CVector,
}

impl FloquetSolution {
    pub fn dim(&self) -> usize {
        self.quasienergies.len()
    }

    pub fn mode(&self, alpha: usize) -> CVector {
        self.modes_t0.column(alpha).into_owned()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Mode indices ordered by decreasing weight, ties to the smaller index.
    pub fn by_weight(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.dim()).collect();
        idx.sort_by(|&a, &b| self.weights[b].total_cmp(&self.weights[a]).then(a.cmp(&b)));
        idx
    }

    /// Product of the parity labels of modes `a` and `b` after bringing their
    /// quasienergies to adjacent representatives; `None` if either is broken.
    ///
    /// Shifting a quasienergy by `ω` multiplies the mode by `e^{iωt}`, which
    /// flips its label, so raw labels of modes reduced from different zones
    /// are not directly comparable.
    pub fn relative_parity(&self, a: usize, b: usize) -> Option<i8> {
        let pa = self.parity.get(a)?.sign()?;
        let pb = self.parity.get(b)?.sign()?;
        let folds = ((self.quasienergies[a] - self.quasienergies[b]) / self.omega).round() as i64;
        Some(if folds % 2 == 0 { pa * pb } else { -pa * pb })
    }

    fn recompute_weights(&mut self) {
        self.weights = (0..self.dim())
            .map(|a| self.modes_t0.column(a).dotc(&self.initial).norm_sqr())
            .collect();
    }
}

/// Diagonalize `U(T)`; weights are taken against `initial`.
pub fn quasienergies(u: &CMatrix, omega: f64, initial: &CVector) -> Result<FloquetSolution> {
    if u.nrows() != initial.len() {
        return Err(Error::domain("initial state does not match the propagator dimension"));
    }
    let (phases, vectors) = unitary_eigen(u)?;
    let eps: Vec<f64> = phases.iter().map(|&t| quasienergy_from_phase(t, omega)).collect();
    let mut order: Vec<usize> = (0..eps.len()).collect();
    order.sort_by(|&a, &b| eps[a].total_cmp(&eps[b]));
    let n = u.nrows();
    let mut modes = CMatrix::zeros(n, n);
    for (c, &k) in order.iter().enumerate() {
        let mut v = vectors.column(k).into_owned();
        fix_phase(&mut v);
        modes.set_column(c, &v);
    }
    let mut fs = FloquetSolution {
        omega,
        quasienergies: order.iter().map(|&k| eps[k]).collect(),
        modes_t0: modes,
        weights: Vec::new(),
        parity: Vec::new(),
        initial: initial.clone(),
    };
    fs.recompute_weights();
    Ok(fs)
}

/// Quasienergies closer than this (in phase `εT`) are treated as one
/// degenerate cluster when assigning parity.
const DEGENERACY_PHASE: f64 = 1e-9;

/// Label each mode under `x → -x, t → t + T/2`.
///
/// `half` is `U(T/2)` and `parity` the spatial inversion in the kept
/// eigenbasis. Inside exactly degenerate clusters the modes are first rotated
/// to eigenvectors of the symmetry operator, which changes the stored modes
/// and weights but not the quasienergies.
pub fn parity_classify(fs: &mut FloquetSolution, half: &CMatrix, parity: &CMatrix) -> Vec<Parity> {
    let period = std::f64::consts::TAU / fs.omega;
    let g = parity * half;
    let n = fs.dim();

    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (fs.quasienergies[end] - fs.quasienergies[end - 1]) * period < DEGENERACY_PHASE {
            end += 1;
        }
        if end - start > 1 {
            rotate_cluster(fs, &g, start, end);
        }
        start = end;
    }
    fs.recompute_weights();

    let labels: Vec<Parity> = (0..n)
        .map(|a| {
            let phi = fs.mode(a);
            let shift = C64::from_polar(1.0, 0.5 * fs.quasienergies[a] * period);
            let p_phi = &g * &phi * shift;
            Parity::from_defects((&p_phi - &phi).norm(), (&p_phi + &phi).norm(), Parity::TOLERANCE)
        })
        .collect();
    fs.parity = labels.clone();
    labels
}

fn rotate_cluster(fs: &mut FloquetSolution, g: &CMatrix, start: usize, end: usize) {
    let q = fs.modes_t0.columns(start, end - start).into_owned();
    let m = q.adjoint() * g * &q;
    // only meaningful when the cluster is invariant under the symmetry
    if unitarity_defect(&m) > 1e-6 {
        return;
    }
    if let Ok((_, w)) = unitary_eigen(&m) {
        let rotated = q * w;
        for c in 0..end - start {
            let mut v = rotated.column(c).into_owned();
            fix_phase(&mut v);
            fs.modes_t0.set_column(start + c, &v);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplittingLine {
    /// Folded quasienergy difference in `[0, ω/2]`.
    pub frequency: f64,
    pub weight: f64,
    pub modes: (usize, usize),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SplittingSpectrum {
    /// Sorted by decreasing weight.
    pub lines: Vec<SplittingLine>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveSplitting {
    pub principal: f64,
    /// The two largest-weight modes.
    pub dominant: (usize, usize),
    /// Third weight exceeds `multi_state_ratio` times the second.
    pub multi_state: bool,
    pub spectrum: SplittingSpectrum,
}

/// Principal splitting of the two dominant modes plus all weighted pair lines.
pub fn effective_splitting(fs: &FloquetSolution, weight_floor: f64, multi_state_ratio: f64) -> EffectiveSplitting {
    let order = fs.by_weight();
    let (a, b) = (order[0], order[1.min(order.len() - 1)]);
    let principal = fold_difference(fs.quasienergies[a] - fs.quasienergies[b], fs.omega);
    let multi_state = order.len() > 2 && fs.weights[order[2]] > multi_state_ratio * fs.weights[b];

    let n = fs.dim();
    let mut total = 0.0;
    let mut raw = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let w = fs.weights[i] * fs.weights[j];
            total += w;
            raw.push((i, j, w));
        }
    }
    let mut lines: Vec<SplittingLine> = raw
        .into_iter()
        .filter_map(|(i, j, w)| {
            let w = if total > 0.0 { w / total } else { 0.0 };
            (w >= weight_floor).then(|| SplittingLine {
                frequency: fold_difference(fs.quasienergies[i] - fs.quasienergies[j], fs.omega),
                weight: w,
                modes: (i, j),
            })
        })
        .collect();
    lines.sort_by(|x, y| y.weight.total_cmp(&x.weight).then(x.modes.cmp(&y.modes)));
    EffectiveSplitting { principal, dominant: (a.min(b), a.max(b)), multi_state, spectrum: SplittingSpectrum { lines } }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::{one_period_propagator, reduce_to_zone, DrivenHamiltonian, PropagatorOptions};
    use crate::lattice::{DriveForm, DriveSpec, LatticeParams};
    use crate::stationary::{doublet_data, solve_lattice, spatial_parity, PlaneWaveBasis};

    fn solve(v1: f64, v2: f64, phi: f64, spec: &DriveSpec) -> (FloquetSolution, Vec<Parity>, Vec<f64>, f64) {
        let p = LatticeParams::new(v1, v2, phi).unwrap();
        let b = PlaneWaveBasis::default();
        let sol = solve_lattice(&p, &b, 15).unwrap();
        let dd = doublet_data(&sol, &b).unwrap();
        let h = DrivenHamiltonian::new(&p, &DriveForm::Linearized, spec, &sol, &b).unwrap();
        let prop = one_period_propagator(&h, &PropagatorOptions::default()).unwrap();
        let mut fs = quasienergies(&prop.full, spec.omega_d(), &dd.right_in_eigenbasis(15)).unwrap();
        let labels = parity_classify(&mut fs, &prop.half, &sol.parity_operator());
        let static_par: Vec<f64> = (0..15)
            .map(|k| spatial_parity(&sol.state(k)).sign().map_or(0.0, f64::from))
            .collect();
        (fs, labels, static_par, dd.delta_12)
    }

    #[test]
    fn static_limit() {
        let omega = 1.3;
        let spec = DriveSpec::sine(0.0, omega).unwrap();
        let (fs, labels, static_par, delta) = solve(6.25, 5.40, 0.0, &spec);
        assert!((fs.weight_sum() - 1.0).abs() < 1e-10);
        let eff = effective_splitting(&fs, 1e-3, 0.5);
        assert!((eff.principal - delta).abs() < 1e-10);
        assert!(!eff.multi_state);
        // every mode is a static eigenstate; its label is the spatial parity
        // times the sign picked up by folding its energy into the zone
        let p = LatticeParams::symmetric(6.25, 5.40).unwrap();
        let sol = solve_lattice(&p, &PlaneWaveBasis::default(), 15).unwrap();
        for (a, label) in labels.iter().enumerate() {
            let k = (0..15).find(|&k| fs.mode(a)[k].norm() > 0.99).unwrap();
            let folds = ((sol.energies[k] - reduce_to_zone(sol.energies[k], omega)) / omega).round() as i64;
            let expected = static_par[k] * if folds % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(label.sign().map(f64::from), Some(expected), "mode {a}");
        }
    }

    #[test]
    fn weights_concentrate_on_two_modes() {
        let spec = DriveSpec::sine(0.3, 1.0).unwrap();
        let (fs, _, _, _) = solve(8.27, 2.68, 0.0, &spec);
        let order = fs.by_weight();
        assert!(fs.weights[order[0]] + fs.weights[order[1]] > 0.95);
        assert!((fs.weight_sum() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn sine_labels_definite_sawtooth_broken() {
        let spec = DriveSpec::sine(0.88, 1.0).unwrap();
        let (fs, labels, _, _) = solve(6.25, 5.40, 0.0, &spec);
        assert!(labels.iter().all(Parity::is_definite));
        let (a, b) = effective_splitting(&fs, 1e-3, 0.5).dominant;
        assert_eq!(fs.relative_parity(a, b), Some(-1));

        let saw = DriveSpec::new(crate::lattice::Waveform::sawtooth(), 0.88, 1.0).unwrap();
        let (fs, labels, _, _) = solve(6.25, 5.40, 0.0, &saw);
        let (a, b) = effective_splitting(&fs, 1e-3, 0.5).dominant;
        for k in [a, b] {
            match labels[k] {
                Parity::Broken(d) => assert!(d > 1e-2),
                other => panic!("expected broken, got {other}"),
            }
        }

        let (fs, labels, _, _) = solve(6.25, 5.40, 0.4, &spec);
        let (a, b) = effective_splitting(&fs, 1e-3, 0.5).dominant;
        for k in [a, b] {
            assert!(matches!(labels[k], Parity::Broken(d) if d > 1e-2), "{}", labels[k]);
        }
    }

    #[test]
    fn spectrum_lines_are_normalized() {
        let spec = DriveSpec::sine(0.88, 0.75).unwrap();
        let (fs, _, _, _) = solve(6.25, 5.40, 0.0, &spec);
        let eff = effective_splitting(&fs, 0.0, 0.5);
        let total: f64 = eff.spectrum.lines.iter().map(|l| l.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(eff.spectrum.lines.iter().all(|l| l.frequency >= 0.0 && l.frequency <= 0.375));
    }
}
