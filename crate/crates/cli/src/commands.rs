use std::collections::HashSet;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use dwf_core::dynamics::{fit_tunneling_frequency, Dynamics, DynamicsOptions, DynamicsTrace, FitStatus, SinusoidFit};
use dwf_core::floquet::{crossing_detect, Crossing, ScanAxis, ScanPoint, ScanTable, Scanner};
use dwf_core::lattice::{generalized_parity_defect, static_potential, symmetry_defect, DriveSpec, LatticeParams};
use dwf_core::linalg::CVector;
use dwf_core::presets::Variant;
use dwf_core::stationary::{doublet_data, solve_lattice, spatial_parity, Parity};
use dwf_core::twomode::{two_mode_splitting, TwoModeParams};
use rayon::prelude::*;

use crate::config::{InitialWell, RunConfig};
use crate::error::{CliError, Result};
use crate::svg::{Plot, Series};
use crate::table::{fmt_f64, write_atomic, Table};

/// Samples per period of the potential plot.
const POTENTIAL_SAMPLES: usize = 400;
/// Grid used to evaluate the generalized-parity defect.
const DEFECT_GRID: usize = 64;

pub fn parity_label(p: &Parity) -> &'static str {
    match p {
        Parity::Plus => "+1",
        Parity::Minus => "-1",
        Parity::Broken(_) => "broken",
    }
}

fn axis_name(axis: ScanAxis) -> &'static str {
    match axis {
        ScanAxis::OmegaD => "omega_d",
        ScanAxis::AmplitudeS => "amplitude_s",
    }
}

fn write_svg(dir: &Path, name: &str, plot: &Plot, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    write_atomic(&path, plot.render().as_bytes())?;
    written.push(path);
    Ok(())
}

fn write_table(dir: &Path, name: &str, table: &Table, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    table.write(&path)?;
    written.push(path);
    Ok(())
}

pub fn cmd_spectrum(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let eig = solve_lattice(&cfg.lattice, &cfg.basis, cfg.n_states_kept)?;
    let doublet = doublet_data(&eig, &cfg.basis)?;
    let mut spectrum = Table::new(["index", "energy_Er", "parity"]);
    for (i, e) in eig.energies.iter().enumerate() {
        let parity = spatial_parity(&eig.state(i));
        spectrum.push(vec![i.to_string(), fmt_f64(*e), parity_label(&parity).into()]);
    }
    let mut d = Table::new(["delta12_Er", "x12"]);
    d.push(vec![fmt_f64(doublet.delta_12), fmt_f64(doublet.x12)]);

    let mut written = Vec::new();
    write_table(dir, "spectrum.csv", &spectrum, &mut written)?;
    write_table(dir, "doublet.csv", &d, &mut written)?;
    if cfg.plots {
        let mut plot = Plot::new(
            format!("V(x), v1 = {}, v2 = {}, phi_s = {}", cfg.lattice.v1, cfg.lattice.v2, cfg.lattice.phi_s),
            "kx",
            "V / E_r",
        );
        let pts = (0..=POTENTIAL_SAMPLES)
            .map(|i| {
                let x = -PI + 2.0 * PI * i as f64 / POTENTIAL_SAMPLES as f64;
                (x, static_potential(&cfg.lattice, x))
            })
            .collect();
        plot.add(Series::line("potential", pts));
        for (i, e) in eig.energies.iter().take(4).enumerate() {
            plot.add(Series::dashed(format!("E_{}", i + 1), vec![(-PI, *e), (PI, *e)]));
        }
        write_svg(dir, "potential.svg", &plot, &mut written)?;
    }
    Ok(written)
}

fn scanner_for(cfg: &RunConfig, lattice: LatticeParams, spec: DriveSpec) -> Result<Scanner> {
    let mut sc = Scanner::new(lattice, cfg.form, spec, cfg.basis, cfg.n_states_kept)?;
    sc.propagator = cfg.propagator;
    sc.weight_floor = cfg.weight_floor;
    sc.multi_state_ratio = cfg.multi_state_ratio;
    Ok(sc)
}

pub const SCAN_STATUS_OK: &str = "ok";

fn scan_table(table: &ScanTable, tm: &TwoModeParams, n: usize) -> Table {
    let mut headers: Vec<String> = vec!["axis_value".into()];
    headers.extend((1..=n).map(|a| format!("eps_alpha_{a}")));
    headers.extend(
        [
            "principal_splitting_Er",
            "weight_1",
            "weight_2",
            "parity_1",
            "parity_2",
            "flag_multistate",
            "two_mode_splitting_Er",
            "status",
        ]
        .map(String::from),
    );
    let mut out = Table::new(headers);
    for row in &table.rows {
        let mut cells = vec![fmt_f64(row.axis_value)];
        match &row.result {
            Ok(p) => {
                let eps = row.branch_quasienergies().unwrap_or_default();
                cells.extend((0..n).map(|a| fmt_f64(eps.get(a).copied().unwrap_or(f64::NAN))));
                let (w1, w2) = p.dominant_weights();
                let (p1, p2) = p.dominant_parity();
                let two_mode = two_mode_splitting(tm, p.spec.amplitude_s(), p.spec.omega_d()).unwrap_or(f64::NAN);
                cells.extend([
                    fmt_f64(p.splitting.principal),
                    fmt_f64(w1),
                    fmt_f64(w2),
                    parity_label(&p1).into(),
                    parity_label(&p2).into(),
                    p.splitting.multi_state.to_string(),
                    fmt_f64(two_mode),
                    SCAN_STATUS_OK.into(),
                ]);
            }
            Err(e) => {
                cells.extend((0..n + 3).map(|_| fmt_f64(f64::NAN)));
                cells.extend(["".into(), "".into(), "false".into(), fmt_f64(f64::NAN), format!("failed: {e}")]);
            }
        }
        out.push(cells);
    }
    out
}

fn crossings_table(crossings: &[Crossing]) -> Table {
    let mut t = Table::new([
        "axis_value",
        "interval_lo",
        "interval_hi",
        "min_gap_Er",
        "kind",
        "parity_1",
        "parity_2",
        "relative_parity",
    ]);
    for c in crossings {
        let relative = match (c.parity.0.sign(), c.parity.1.sign()) {
            (Some(a), Some(b)) => (a * b).to_string(),
            _ => "undefined".into(),
        };
        let kind = match c.kind {
            dwf_core::floquet::CrossingKind::ExactCrossing => "exact-crossing",
            dwf_core::floquet::CrossingKind::Avoided => "avoided",
        };
        t.push(vec![
            fmt_f64(c.axis_value),
            fmt_f64(c.interval.0),
            fmt_f64(c.interval.1),
            fmt_f64(c.min_gap),
            kind.into(),
            parity_label(&c.parity.0).into(),
            parity_label(&c.parity.1).into(),
            relative,
        ]);
    }
    t
}

fn scan_plots(table: &ScanTable, tm: &TwoModeParams, n: usize, axis: ScanAxis) -> (Plot, Plot) {
    let x_label = match axis {
        ScanAxis::OmegaD => "hbar omega_d / E_r",
        ScanAxis::AmplitudeS => "S / E_r",
    };
    let mut quasi = Plot::new("Floquet quasienergies (shading: weight of |R>)", x_label, "epsilon / E_r");
    for b in 0..n {
        let mut pts = Vec::new();
        let mut shade = Vec::new();
        for row in &table.rows {
            let Some(p) = row.point() else { continue };
            let Some(&a) = row.branches.get(b) else { continue };
            pts.push((row.axis_value, p.solution.quasienergies[a]));
            shade.push(p.solution.weights[a].sqrt());
        }
        quasi.add(Series::points(format!("branch {}", b + 1), pts, Some(shade)));
    }
    let mut split = Plot::new("effective tunneling splitting", x_label, "splitting / E_r");
    let floquet: Vec<(f64, f64)> = table
        .rows
        .iter()
        .map(|r| (r.axis_value, r.point().map_or(f64::NAN, |p: &ScanPoint| p.splitting.principal)))
        .collect();
    let two_mode: Vec<(f64, f64)> = table
        .rows
        .iter()
        .filter_map(|r| r.point())
        .map(|p| {
            let v = match table.axis {
                ScanAxis::OmegaD => p.spec.omega_d(),
                ScanAxis::AmplitudeS => p.spec.amplitude_s(),
            };
            (v, two_mode_splitting(tm, p.spec.amplitude_s(), p.spec.omega_d()).unwrap_or(f64::NAN))
        })
        .collect();
    split.add(Series::line("Floquet", floquet.clone()));
    split.add(Series::points("Floquet points", floquet, None));
    split.add(Series::dashed("two-mode", two_mode));
    (quasi, split)
}

pub fn cmd_floquet_scan(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let setup = cfg.scan.as_ref().ok_or_else(|| CliError::config("scan", "missing axis and grid"))?;
    if setup.grid.is_empty() {
        return Err(CliError::config("scan.grid", "grid is empty"));
    }
    let spec = match (&cfg.drive, setup.axis) {
        (Some(d), _) => d.clone(),
        // the grid supplies the frequency
        (None, ScanAxis::OmegaD) => DriveSpec::sine(0.0, setup.grid[0])?,
        (None, ScanAxis::AmplitudeS) => return Err(CliError::config("drive.omega_d", "required for an amplitude scan")),
    };
    let scanner = scanner_for(cfg, cfg.lattice, spec)?;
    let table = scanner.scan(setup.axis, &setup.grid)?;
    let total = table.rows.len();
    let failed = table.failures();
    if failed == total {
        let first = table.rows.iter().find_map(|r| r.result.clone().err());
        return Err(CliError::Numeric(first.expect("every row failed")));
    }
    let tm = TwoModeParams::from_doublet(&scanner.doublet);
    let n = cfg.n_states_kept;

    let mut written = Vec::new();
    write_table(dir, "scan.csv", &scan_table(&table, &tm, n), &mut written)?;
    // scan.csv stays on disk even if refining a crossing fails
    let crossings = crossing_detect(&scanner, &table)?;
    write_table(dir, "crossings.csv", &crossings_table(&crossings), &mut written)?;
    if cfg.plots {
        let (quasi, split) = scan_plots(&table, &tm, n, setup.axis);
        write_svg(dir, "quasienergy.svg", &quasi, &mut written)?;
        write_svg(dir, "splitting.svg", &split, &mut written)?;
    }
    log::info!("scan along {}: {} points, {} crossings", axis_name(setup.axis), total, crossings.len());
    if failed > 0 {
        return Err(CliError::PartialScan { failed, total });
    }
    Ok(written)
}

fn dynamics_options(cfg: &RunConfig) -> Result<DynamicsOptions> {
    let run = cfg.require_dynamics()?;
    Ok(DynamicsOptions {
        n_states: run.n_states,
        readout: run.readout,
        tolerance: run.tolerance,
        ..DynamicsOptions::default()
    })
}

fn initial_state(dy: &Dynamics, which: InitialWell) -> Option<CVector> {
    match which {
        InitialWell::Right => None,
        InitialWell::Left => Some(dy.doublet().left_state.clone()),
    }
}

/// Fit that never fails: too-short traces come back as not converged.
fn fit_or_flag(trace: &DynamicsTrace) -> SinusoidFit {
    fit_tunneling_frequency(trace).unwrap_or_else(|e| {
        log::warn!("sinusoid fit failed: {e}");
        SinusoidFit {
            omega: f64::NAN,
            amplitude: f64::NAN,
            offset: f64::NAN,
            phase: f64::NAN,
            residual: f64::NAN,
            status: FitStatus::NotConverged,
        }
    })
}

pub fn cmd_dynamics(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let run = cfg.require_dynamics()?.clone();
    let spec = cfg.require_drive()?.clone();
    let dy = Dynamics::new(&cfg.lattice, &cfg.basis, dynamics_options(cfg)?)?;
    let init = initial_state(&dy, run.initial);
    let trace = dy.run(&cfg.form, &spec, init.as_ref(), run.t_final, run.sample_dt)?;
    let fit = fit_or_flag(&trace);

    let n = run.orders as i64;
    let mut headers: Vec<String> = vec!["t_hbar_over_Er".into(), "p_left".into(), "p_right".into()];
    headers.extend((-n..=n).map(|m| format!("order_m{m}")));
    let mut t = Table::new(headers);
    for i in 0..trace.len() {
        let mut cells = vec![fmt_f64(trace.times[i]), fmt_f64(trace.p_left[i]), fmt_f64(trace.p_right[i])];
        cells.extend(trace.orders_window(i, n).into_iter().map(fmt_f64));
        t.push(cells);
    }
    let mut f = Table::new([
        "omega_Er",
        "amplitude",
        "offset",
        "phase",
        "residual",
        "max_p_left",
        "max_leakage",
        "steps_per_period",
        "status",
    ]);
    f.push(vec![
        fmt_f64(fit.omega),
        fmt_f64(fit.amplitude),
        fmt_f64(fit.offset),
        fmt_f64(fit.phase),
        fmt_f64(fit.residual),
        fmt_f64(trace.max_p_left()),
        fmt_f64(trace.leakage.iter().copied().fold(0.0, f64::max)),
        trace.steps_per_period.to_string(),
        fit.status.as_str().into(),
    ]);

    let mut written = Vec::new();
    write_table(dir, "trace.csv", &t, &mut written)?;
    write_table(dir, "fit.csv", &f, &mut written)?;
    if cfg.plots {
        let mut plot = Plot::new("well populations", "t / (hbar/E_r)", "population");
        let pts = |v: &[f64]| trace.times.iter().copied().zip(v.iter().copied()).collect::<Vec<_>>();
        plot.add(Series::points("p_left", pts(&trace.p_left), None));
        plot.add(Series::points("p_right", pts(&trace.p_right), None));
        if fit.omega.is_finite() {
            let curve = trace.times.iter().map(|&t| (t, fit.value(t))).collect();
            plot.add(Series::line("sinusoidal fit", curve));
        }
        write_svg(dir, "trace.svg", &plot, &mut written)?;
    }
    Ok(written)
}

struct VariantResult {
    fit: SinusoidFit,
    max_p_left: f64,
    floquet_splitting: f64,
    drive_defect: f64,
    parity_defect: f64,
    trace: DynamicsTrace,
}

fn run_variant(cfg: &RunConfig, base: &DriveSpec, v: &Variant) -> Result<VariantResult> {
    let run = cfg.require_dynamics()?;
    let lattice = LatticeParams::new(cfg.lattice.v1, cfg.lattice.v2, v.phi_s)?;
    let spec = DriveSpec::new(v.waveform.clone(), v.amplitude_s, base.omega_d())?.with_phase(base.phase());
    let dy = Dynamics::new(&lattice, &cfg.basis, dynamics_options(cfg)?)?;
    let init = initial_state(&dy, run.initial);
    // Driven traces are sampled once per period so the fit sees tunneling, not micromotion.
    let (t_final, dt) = if v.amplitude_s == 0.0 {
        (run.t_final, run.sample_dt)
    } else {
        (run.t_final.max(STROBOSCOPIC_PERIODS * spec.period()), spec.period())
    };
    let trace = dy.run(&cfg.form, &spec, init.as_ref(), t_final, dt)?;
    let fit = fit_or_flag(&trace);
    let floquet_splitting = scanner_for(cfg, lattice, spec.clone())?.solve(&spec, &cfg.form)?.splitting.principal;
    Ok(VariantResult {
        max_p_left: trace.max_p_left(),
        fit,
        floquet_splitting,
        drive_defect: symmetry_defect(&spec),
        parity_defect: generalized_parity_defect(&lattice, &cfg.form, &spec, DEFECT_GRID, DEFECT_GRID),
        trace,
    })
}

/// Minimum stroboscopic record length of a driven variant, in drive periods.
pub const STROBOSCOPIC_PERIODS: f64 = 64.0;

pub fn cmd_symmetry_report(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let variants = &cfg.variants;
    if variants.len() < 2 {
        return Err(CliError::Usage(format!("symmetry report needs at least two variants, got {}", variants.len())));
    }
    let mut seen = HashSet::new();
    for v in variants {
        if !seen.insert(v.name.as_str()) {
            return Err(CliError::Usage(format!("duplicate variant name `{}`", v.name)));
        }
    }
    let base = cfg.require_drive()?.clone();
    cfg.require_dynamics()?;
    let results: Vec<Result<VariantResult>> = variants.par_iter().map(|v| run_variant(cfg, &base, v)).collect();
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut t = Table::new([
        "name",
        "waveform",
        "amplitude_s",
        "phi_s",
        "omega_d",
        "fitted_omega_Er",
        "fit_amplitude",
        "fit_residual",
        "fit_status",
        "max_p_left",
        "floquet_splitting_Er",
        "drive_symmetry_defect",
        "generalized_parity_defect",
    ]);
    for (v, r) in variants.iter().zip(&results) {
        t.push(vec![
            v.name.clone(),
            v.waveform.name(),
            fmt_f64(v.amplitude_s),
            fmt_f64(v.phi_s),
            fmt_f64(base.omega_d()),
            fmt_f64(r.fit.omega),
            fmt_f64(r.fit.amplitude),
            fmt_f64(r.fit.residual),
            r.fit.status.as_str().into(),
            fmt_f64(r.max_p_left),
            fmt_f64(r.floquet_splitting),
            fmt_f64(r.drive_defect),
            fmt_f64(r.parity_defect),
        ]);
    }
    let mut written = Vec::new();
    write_table(dir, "symmetry_report.csv", &t, &mut written)?;
    if cfg.plots {
        let mut plot = Plot::new("p_left for each drive variant", "t / (hbar/E_r)", "p_left");
        for (v, r) in variants.iter().zip(&results) {
            let pts = r.trace.times.iter().copied().zip(r.trace.p_left.iter().copied()).collect();
            plot.add(Series::line(v.name.clone(), pts));
        }
        write_svg(dir, "symmetry.svg", &plot, &mut written)?;
    }
    Ok(written)
}
