use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hamiltonian::DrivenHamiltonian;
use super::propagator::{one_period_propagator, PropagatorOptions};
use super::solution::{effective_splitting, parity_classify, quasienergies, EffectiveSplitting, FloquetSolution};
use crate::error::{Error, Result};
use crate::lattice::{DriveForm, DriveSpec, ExactDrive, LatticeParams};
use crate::linalg::{CMatrix, CVector};
use crate::stationary::{doublet_data, solve_lattice, DoubletData, EigenSolution, Parity, PlaneWaveBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanAxis {
    OmegaD,
    AmplitudeS,
}

/// Everything needed to evaluate the Floquet problem at one drive setting.
#[derive(Debug, Clone)]
pub struct Scanner {
    pub params: LatticeParams,
    pub form: DriveForm,
    pub spec: DriveSpec,
    pub basis: PlaneWaveBasis,
    pub eigen: EigenSolution,
    pub doublet: DoubletData,
    pub propagator: PropagatorOptions,
    pub weight_floor: f64,
    pub multi_state_ratio: f64,
    initial: CVector,
    parity_op: CMatrix,
}

/// Solution at a single drive setting.
#[derive(Debug, Clone)]
pub struct ScanPoint {
    pub spec: DriveSpec,
    pub solution: FloquetSolution,
    pub splitting: EffectiveSplitting,
    pub steps: usize,
}

impl ScanPoint {
    /// Parity labels of the two dominant modes.
    pub fn dominant_parity(&self) -> (Parity, Parity) {
        let (a, b) = self.splitting.dominant;
        (self.solution.parity[a], self.solution.parity[b])
    }

    /// The two largest weights, in decreasing order.
    pub fn dominant_weights(&self) -> (f64, f64) {
        let order = self.solution.by_weight();
        (self.solution.weights[order[0]], self.solution.weights[order[1]])
    }
}

impl Scanner {
    pub const DEFAULT_WEIGHT_FLOOR: f64 = 1e-3;
    pub const DEFAULT_MULTI_STATE_RATIO: f64 = 0.5;

    pub fn new(
        params: LatticeParams,
        form: DriveForm,
        spec: DriveSpec,
        basis: PlaneWaveBasis,
        n_states_kept: usize,
    ) -> Result<Self> {
        params.validate()?;
        let eigen = solve_lattice(&params, &basis, n_states_kept)?;
        let doublet = doublet_data(&eigen, &basis)?;
        let initial = doublet.right_in_eigenbasis(n_states_kept);
        let parity_op = eigen.parity_operator();
        Ok(Self {
            params,
            form,
            spec,
            basis,
            eigen,
            doublet,
            propagator: PropagatorOptions::default(),
            weight_floor: Self::DEFAULT_WEIGHT_FLOOR,
            multi_state_ratio: Self::DEFAULT_MULTI_STATE_RATIO,
            initial,
            parity_op,
        })
    }

    /// Drive and drive form at `value` along `axis`. Scanning the amplitude of
    /// an exact drive recalibrates the angle deviation.
    pub fn setting(&self, axis: ScanAxis, value: f64) -> Result<(DriveSpec, DriveForm)> {
        match axis {
            ScanAxis::OmegaD => Ok((self.spec.with_omega(value)?, self.form)),
            ScanAxis::AmplitudeS => {
                let spec = self.spec.with_amplitude(value)?;
                let form = match self.form {
                    DriveForm::Linearized => DriveForm::Linearized,
                    DriveForm::Exact(e) => {
                        DriveForm::Exact(ExactDrive::for_amplitude(&self.params, value, e.mirror_cells)?)
                    }
                };
                Ok((spec, form))
            }
        }
    }

    pub fn hamiltonian(&self, spec: &DriveSpec, form: &DriveForm) -> Result<DrivenHamiltonian> {
        DrivenHamiltonian::new(&self.params, form, spec, &self.eigen, &self.basis)
    }

    pub fn solve(&self, spec: &DriveSpec, form: &DriveForm) -> Result<ScanPoint> {
        let h = self.hamiltonian(spec, form)?;
        let prop = one_period_propagator(&h, &self.propagator)?;
        let mut solution = quasienergies(&prop.full, spec.omega_d(), &self.initial)?;
        parity_classify(&mut solution, &prop.half, &self.parity_op);
        let splitting = effective_splitting(&solution, self.weight_floor, self.multi_state_ratio);
        Ok(ScanPoint { spec: spec.clone(), solution, splitting, steps: prop.steps })
    }

    pub fn point(&self, axis: ScanAxis, value: f64) -> Result<ScanPoint> {
        let (spec, form) = self.setting(axis, value)?;
        self.solve(&spec, &form)
    }

    /// Solve every grid point (concurrently) and track quasienergy branches.
    pub fn scan(&self, axis: ScanAxis, grid: &[f64]) -> Result<ScanTable> {
        if grid.is_empty() {
            return Err(Error::domain("scan grid is empty"));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::domain("scan grid must be strictly ascending"));
        }
        let results: Vec<Result<ScanPoint>> = grid.par_iter().map(|&v| self.point(axis, v)).collect();
        let mut rows: Vec<ScanRow> = grid
            .iter()
            .zip(results)
            .map(|(&axis_value, result)| ScanRow { axis_value, result, branches: Vec::new() })
            .collect();
        track_branches(&mut rows);
        Ok(ScanTable { axis, rows })
    }
}

#[derive(Debug, Clone)]
pub struct ScanRow {
    pub axis_value: f64,
    pub result: Result<ScanPoint>,
    /// `branches[b]` is the mode index carrying branch `b` at this row.
    pub branches: Vec<usize>,
}

impl ScanRow {
    pub fn point(&self) -> Option<&ScanPoint> {
        self.result.as_ref().ok()
    }

    /// Quasienergies in branch order.
    pub fn branch_quasienergies(&self) -> Option<Vec<f64>> {
        let p = self.point()?;
        Some(self.branches.iter().map(|&a| p.solution.quasienergies[a]).collect())
    }
}

#[derive(Debug, Clone)]
pub struct ScanTable {
    pub axis: ScanAxis,
    pub rows: Vec<ScanRow>,
}

impl ScanTable {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.result.is_err()).count()
    }
}

/// Label modes by maximal overlap with the previous successful row. Branch
/// `b` at the first successful row is the `b`-th mode in quasienergy order.
fn track_branches(rows: &mut [ScanRow]) {
    let mut previous: Option<CMatrix> = None;
    for row in rows.iter_mut() {
        let Some(point) = row.point() else { continue };
        let modes = &point.solution.modes_t0;
        let n = modes.ncols();
        let branches: Vec<usize> = match &previous {
            None => (0..n).collect(),
            Some(prev) => {
                let overlap = prev.adjoint() * modes;
                let mut taken = vec![false; n];
                let mut out = Vec::with_capacity(n);
                for b in 0..n {
                    let mut best = None;
                    let mut best_val = -1.0;
                    for a in 0..n {
                        let v = overlap[(b, a)].norm_sqr();
                        if !taken[a] && v > best_val {
                            best_val = v;
                            best = Some(a);
                        }
                    }
                    let a = best.expect("square overlap matrix");
                    taken[a] = true;
                    out.push(a);
                }
                out
            }
        };
        // store the previous row's modes in branch order
        let ordered = CMatrix::from_fn(modes.nrows(), n, |r, c| modes[(r, branches[c])]);
        previous = Some(ordered);
        row.branches = branches;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossingKind {
    ExactCrossing,
    Avoided,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Crossing {
    /// Bracket of neighbouring grid points around the minimum.
    pub interval: (f64, f64),
    /// Refined location of the minimum.
    pub axis_value: f64,
    pub min_gap: f64,
    pub kind: CrossingKind,
    pub parity: (Parity, Parity),
}

impl Crossing {
    pub const EXACT_GAP: f64 = 1e-4;
    pub const RESOLUTION: f64 = 1e-4;
}

/// Local minima of the dominant-pair gap, refined by golden-section search to
/// a relative axis resolution of [`Crossing::RESOLUTION`].
pub fn crossing_detect(scanner: &Scanner, table: &ScanTable) -> Result<Vec<Crossing>> {
    crossing_detect_with(scanner, table, Crossing::RESOLUTION)
}

pub fn crossing_detect_with(scanner: &Scanner, table: &ScanTable, resolution: f64) -> Result<Vec<Crossing>> {
    const NOISE: f64 = 1e-9;
    let pts: Vec<(f64, f64)> = table
        .rows
        .iter()
        .filter_map(|r| r.point().map(|p| (r.axis_value, p.splitting.principal)))
        .collect();
    if pts.len() < 3 {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for i in 1..pts.len() - 1 {
        let (g0, g1, g2) = (pts[i - 1].1, pts[i].1, pts[i + 1].1);
        // a flat bottom counts once, at its first point
        if !(g1 < g0 - NOISE && g1 <= g2 + NOISE) {
            continue;
        }
        let (lo, hi) = (pts[i - 1].0, pts[i + 1].0);
        let (x, gap, point) = golden_minimum(scanner, table.axis, lo, hi, pts[i], resolution)?;
        let parity = point.dominant_parity();
        let (a, b) = point.splitting.dominant;
        let opposite = point.solution.relative_parity(a, b) == Some(-1);
        let kind = if gap < Crossing::EXACT_GAP && opposite { CrossingKind::ExactCrossing } else { CrossingKind::Avoided };
        out.push(Crossing { interval: (lo, hi), axis_value: x, min_gap: gap, kind, parity });
    }
    Ok(out)
}

fn golden_minimum(
    scanner: &Scanner,
    axis: ScanAxis,
    lo: f64,
    hi: f64,
    seed: (f64, f64),
    resolution: f64,
) -> Result<(f64, f64, ScanPoint)> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let eval = |x: f64| -> Result<(f64, ScanPoint)> {
        let p = scanner.point(axis, x)?;
        Ok((p.splitting.principal, p))
    };
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut pc) = eval(c)?;
    let (mut fd, mut pd) = eval(d)?;
    let (seed_x, _) = seed;
    let (mut best_x, mut best_f, mut best_p) = if fc <= fd { (c, fc, pc.clone()) } else { (d, fd, pd.clone()) };
    let scale = seed_x.abs().max(lo.abs()).max(hi.abs()).max(f64::MIN_POSITIVE);
    while b - a > resolution * scale {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            pd = pc;
            c = b - g * (b - a);
            (fc, pc) = eval(c)?;
            if fc < best_f {
                (best_x, best_f, best_p) = (c, fc, pc.clone());
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            pc = pd;
            d = a + g * (b - a);
            (fd, pd) = eval(d)?;
            if fd < best_f {
                (best_x, best_f, best_p) = (d, fd, pd.clone());
            }
        }
    }
    Ok((best_x, best_f, best_p))
}
