//! Scenario execution and CSV reporting.
//!
//! Every file is written in one shot from an in-memory string, with LF line
//! endings and `%.12e` numbers, so repeated runs of the same config produce
//! byte-identical output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use qat_core::classical::LsodeSpec;
use qat_core::operators::{commutator_table, hamiltonian, invariant_momentum, invariant_position};
use qat_core::propagators::{
    apply_matrix, evolve_crank_nicolson, evolve_qat_exact, magnus_omega, magnus_omega6_dho,
    matrix_exponential,
};
use qat_core::qat::{schrodinger_residual, QatContext};
use qat_core::spectra::{eigenfunction_phi_n, hstar_eigenvalue, hstar_operator, HStarParams};
use qat_core::wavegrid::{fmt_e, Grid, WaveFunction};

use crate::config::{Method, Preset, ScenarioConfig, StateCfg, SystemCfg};
use crate::error::CliError;

/// Spacing of the five-point stencil behind the `residual` column.
const STENCIL_DELTA: f64 = 1e-3;
/// When a requested horizon overshoots the validity window, sampling stops
/// this fraction of the window short of the u2 zero: right at the focal
/// point the state compresses below any fixed grid's resolution, so the
/// last few percent are not representable anyway.
const CLIP_FRACTION: f64 = 0.05;
/// Absolute floor on the clip margin, sized so the residual stencil never
/// straddles the zero.
const CLIP_MARGIN: f64 = 3e-3;
/// Relative tolerance for the commutator closure check.
const ALGEBRA_TOL: f64 = 1e-6;
/// Tolerances for the ladder checks (Rayleigh offset, eigen-residual).
const RAYLEIGH_TOL: f64 = 1e-5;
const EIGEN_RES_TOL: f64 = 1e-4;

pub struct Summary {
    pub label: String,
    pub files: Vec<String>,
    pub warnings: Vec<String>,
    pub failures: Vec<String>,
}

fn core_err(scenario: &str, e: qat_core::Error) -> CliError {
    CliError::Core {
        scenario: scenario.to_string(),
        source: e,
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source: e,
    }
}

fn l2_distance(a: &WaveFunction, b: &WaveFunction) -> f64 {
    let sum: f64 = a
        .amps
        .iter()
        .zip(&b.amps)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum();
    (sum * a.grid.dx()).sqrt()
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

/// Sample times for a run: `samples` points from 0 to the effective end of
/// the window, plus a clip warning when u2 vanishes before `t_max`.
fn sample_times(
    label: &str,
    ctx: &QatContext,
    t_max: f64,
    samples: usize,
    warnings: &mut Vec<String>,
) -> Vec<f64> {
    let mut t_stop = t_max;
    if ctx.basis.clipped.1 && ctx.basis.window.1 < t_max {
        let margin = (CLIP_FRACTION * ctx.basis.window.1).max(CLIP_MARGIN);
        t_stop = ctx.basis.window.1 - margin;
        let zero = ctx
            .basis
            .u2_zeros
            .iter()
            .copied()
            .find(|z| *z > 0.0)
            .unwrap_or(ctx.basis.window.1);
        warnings.push(format!(
            "{label}: validity window clipped where u2 vanishes (t = {zero:.6}); \
             sampling limited to t <= {t_stop:.6}"
        ));
    }
    (0..samples)
        .map(|j| t_stop * j as f64 / (samples - 1) as f64)
        .collect()
}

pub fn run_scenario(cfg: &ScenarioConfig, out_root: &Path) -> Result<Summary, CliError> {
    let label = cfg.label.clone();
    let ce = |e: qat_core::Error| core_err(&label, e);

    let spec = cfg.system.to_lsode(&cfg.units);
    let grid = Grid::uniform(cfg.grid.n, cfg.grid.x_min, cfg.grid.x_max).map_err(ce)?;
    let pad = 2.0 * CLIP_MARGIN;
    let ctx = QatContext::solve(&spec, -0.05, cfg.time.t_max + pad).map_err(ce)?;

    let mut warnings = Vec::new();
    let mut failures = Vec::new();
    let times = sample_times(&label, &ctx, cfg.time.t_max, cfg.time.samples, &mut warnings);

    let psi0 = match &cfg.state {
        StateCfg::Gaussian { x0, p0, sigma } => {
            WaveFunction::gaussian(grid, *x0, *sigma, *p0, spec.hbar)
        }
        StateCfg::PlaneWave { k } => WaveFunction::plane_wave(grid, *k),
        StateCfg::Eigen {
            n,
            omega_tilde,
            gamma_tilde,
        } => {
            let params = HStarParams::new(*omega_tilde, *gamma_tilde);
            eigenfunction_phi_n(&ctx, &params, *n, &grid, 0.0).map_err(ce)?
        }
    };

    // Evolve through the sample times; Crank-Nicolson is chained segment by
    // segment so each row reuses the work behind the previous one.
    let mut states = Vec::with_capacity(times.len());
    match cfg.time.method {
        Method::Exact => {
            for &t in &times {
                states.push(evolve_qat_exact(&ctx, &psi0, t).map_err(ce)?);
            }
        }
        Method::CrankNicolson => {
            let mut prev = psi0.clone();
            let mut t_prev = 0.0;
            for &t in &times {
                let next =
                    evolve_crank_nicolson(&spec, &prev, t_prev, t, cfg.time.cn_dt, |_, _| {})
                        .map_err(ce)?;
                t_prev = t;
                prev = next.clone();
                states.push(next);
            }
        }
    }

    // Norm conservation is checked on every run: both propagators are
    // norm-preserving, so drift signals a broken scenario.
    let norm0 = states[0].norm();
    for (t, psi) in times.iter().zip(&states) {
        let drift = (psi.norm() - norm0).abs();
        if drift > 1e-6 * norm0 {
            failures.push(format!(
                "norm drift {:.3e} at t = {t:.4} exceeds 1e-6 (relative)",
                drift / norm0
            ));
        }
    }

    let x_op = invariant_position(&ctx);
    let p_op = invariant_momentum(&ctx);
    let h_op = hamiltonian(&spec);

    let residual_at = |t: f64, psi_t: &WaveFunction| -> Result<f64, qat_core::Error> {
        let mut stencil = Vec::with_capacity(5);
        for k in -2i32..=2 {
            let tk = t + f64::from(k) * STENCIL_DELTA;
            let state = match cfg.time.method {
                Method::Exact => evolve_qat_exact(&ctx, &psi0, tk)?,
                Method::CrankNicolson => {
                    if k == 0 {
                        psi_t.clone()
                    } else {
                        evolve_crank_nicolson(&spec, psi_t, t, tk, cfg.time.cn_dt, |_, _| {})?
                    }
                }
            };
            stencil.push((tk, state));
        }
        schrodinger_residual(|tt, psi| h_op.apply(psi, tt), &stencil, spec.hbar)
    };

    // report.csv: one row per sample time. The expectation columns use the
    // invariant observables, whose means stay pinned at their t = 0 values
    // while the state itself evolves; a wandering column is a regression.
    let mut header = String::from("t,norm");
    if cfg.outputs.expectations {
        header.push_str(",X_expect,P_expect");
    }
    if cfg.outputs.residuals {
        header.push_str(",residual");
    }
    let mut report = header;
    report.push('\n');
    for (t, psi) in times.iter().zip(&states) {
        write!(report, "{},{}", fmt_e(*t), fmt_e(psi.norm())).unwrap();
        if cfg.outputs.expectations {
            let x = x_op.expectation(psi, *t).map_err(ce)?;
            let p = p_op.expectation(psi, *t).map_err(ce)?;
            write!(report, ",{},{}", fmt_e(x.re), fmt_e(p.re)).unwrap();
        }
        if cfg.outputs.residuals {
            let r = residual_at(*t, psi).map_err(ce)?;
            write!(report, ",{}", fmt_e(r)).unwrap();
        }
        report.push('\n');
    }

    let dir = out_root.join(&label);
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let mut files = Vec::new();
    write_file(&dir, "report.csv", &report)?;
    files.push("report.csv".to_string());

    if cfg.outputs.wavefunction_dump {
        for (j, psi) in states.iter().enumerate() {
            let name = format!("psi_t{j}.csv");
            let path = dir.join(&name);
            let mut buf = Vec::new();
            psi.write_csv(&mut buf).map_err(|e| io_err(&path, e))?;
            fs::write(&path, buf).map_err(|e| io_err(&path, e))?;
            files.push(name);
        }
    }

    if cfg.outputs.algebra_table {
        let t_end = *times.last().expect("at least two samples");
        let mut csv = String::from("t,commutator,abs_error,rel_error\n");
        for t in [0.0, 0.5 * t_end, t_end] {
            for row in commutator_table(&ctx, &grid, t).map_err(ce)? {
                writeln!(
                    csv,
                    "{},\"{}\",{},{}",
                    fmt_e(t),
                    row.label,
                    fmt_e(row.abs_error),
                    fmt_e(row.rel_error)
                )
                .unwrap();
                if row.rel_error >= ALGEBRA_TOL {
                    failures.push(format!(
                        "commutator {} fails at t = {t:.4}: rel error {:.3e}",
                        row.label, row.rel_error
                    ));
                }
            }
        }
        write_file(&dir, "algebra.csv", &csv)?;
        files.push("algebra.csv".to_string());
    }

    if cfg.outputs.spectrum {
        let (omega, gamma) = cfg
            .system
            .oscillator_params()
            .expect("validated during config parse");
        let params = HStarParams::new(omega, gamma);
        let h_star = hstar_operator(&ctx, &params).map_err(ce)?;
        let t_end = *times.last().expect("at least two samples");
        let mut csv = String::from("t,n,energy,rayleigh,abs_error,eigen_residual\n");
        for t in [0.0, 0.5 * t_end] {
            for n in 0..=5u32 {
                let energy = hstar_eigenvalue(&params, spec.hbar, C64::from(f64::from(n))).re;
                let phi = eigenfunction_phi_n(&ctx, &params, n, &grid, t).map_err(ce)?;
                let rayleigh = h_star.expectation(&phi, t).map_err(ce)?.re;
                let diff = (rayleigh - energy).abs();
                let h_phi = h_star.apply(&phi, t).map_err(ce)?;
                let res_sq: f64 = h_phi
                    .amps
                    .iter()
                    .zip(&phi.amps)
                    .map(|(h, p)| (h - p * C64::from(energy)).norm_sqr())
                    .sum();
                let res = (res_sq * grid.dx()).sqrt() / phi.norm();
                writeln!(
                    csv,
                    "{},{n},{},{},{},{}",
                    fmt_e(t),
                    fmt_e(energy),
                    fmt_e(rayleigh),
                    fmt_e(diff),
                    fmt_e(res)
                )
                .unwrap();
                if diff >= RAYLEIGH_TOL {
                    failures.push(format!(
                        "ladder n = {n} Rayleigh offset {diff:.3e} at t = {t:.4}"
                    ));
                }
                if res >= EIGEN_RES_TOL {
                    failures.push(format!(
                        "ladder n = {n} eigen-residual {res:.3e} at t = {t:.4}"
                    ));
                }
            }
        }
        write_file(&dir, "spectrum.csv", &csv)?;
        files.push("spectrum.csv".to_string());
    }

    Ok(Summary {
        label,
        files,
        warnings,
        failures,
    })
}

// ---------------------------------------------------------------------------
// Verbs.
// ---------------------------------------------------------------------------

/// Preset selection shared by the non-config verbs.
pub struct SystemSel {
    pub preset: Preset,
    pub gamma: f64,
    pub omega: f64,
}

impl SystemSel {
    fn to_system(&self) -> SystemCfg {
        SystemCfg::Preset {
            preset: self.preset,
            gamma: self.gamma,
            omega: self.omega,
            lambda: None,
        }
    }

    fn to_spec(&self) -> LsodeSpec {
        match self.preset {
            Preset::Free => LsodeSpec::free(),
            Preset::DampedParticle => LsodeSpec::damped_particle(self.gamma),
            Preset::Harmonic => LsodeSpec::harmonic(self.omega),
            Preset::DampedHarmonic => LsodeSpec::damped_harmonic(self.gamma, self.omega),
        }
    }

    fn label(&self) -> &'static str {
        match self.preset {
            Preset::Free => "free",
            Preset::DampedParticle => "damped_particle",
            Preset::Harmonic => "harmonic",
            Preset::DampedHarmonic => "damped_harmonic",
        }
    }
}

pub struct VerbOutput {
    /// CSV payload (printed to stdout or written under --out-dir).
    pub csv: String,
    /// File name used under --out-dir.
    pub file_name: &'static str,
    /// Human summary lines for stdout.
    pub notes: Vec<String>,
    pub warnings: Vec<String>,
    pub passed: bool,
}

fn solve_for(sel: &SystemSel, t_max: f64) -> Result<(LsodeSpec, QatContext), CliError> {
    let spec = sel.to_spec();
    let ctx = QatContext::solve(&spec, -0.05, t_max).map_err(|e| core_err(sel.label(), e))?;
    Ok((spec, ctx))
}

pub fn verify_algebra(
    sel: &SystemSel,
    times: &[f64],
    grid: Grid,
) -> Result<VerbOutput, CliError> {
    let t_hi = times.iter().cloned().fold(0.0f64, f64::max);
    let (_, ctx) = solve_for(sel, t_hi + 0.05)?;
    if ctx.basis.clipped.1 && ctx.basis.window.1 < t_hi {
        return Err(CliError::Usage(format!(
            "t = {t_hi} lies outside the validity window (u2 vanishes at {:.6})",
            ctx.basis.window.1
        )));
    }

    let mut csv = String::from("t,commutator,abs_error,rel_error\n");
    let mut notes = Vec::new();
    let mut pass = 0usize;
    let mut total = 0usize;
    for &t in times {
        for row in commutator_table(&ctx, &grid, t).map_err(|e| core_err(sel.label(), e))? {
            total += 1;
            let ok = row.rel_error < ALGEBRA_TOL;
            if ok {
                pass += 1;
            }
            notes.push(format!(
                "t = {t:>5.2}  {:<18} abs {:.3e}  rel {:.3e}  {}",
                row.label,
                row.abs_error,
                row.rel_error,
                if ok { "pass" } else { "FAIL" }
            ));
            writeln!(
                csv,
                "{},\"{}\",{},{}",
                fmt_e(t),
                row.label,
                fmt_e(row.abs_error),
                fmt_e(row.rel_error)
            )
            .unwrap();
        }
    }
    notes.push(format!(
        "{pass}/{total} commutators close (rel < {ALGEBRA_TOL:.0e}) on preset {}",
        sel.label()
    ));
    Ok(VerbOutput {
        csv,
        file_name: "algebra.csv",
        notes,
        warnings: Vec::new(),
        passed: pass == total,
    })
}

pub struct CompareArgs {
    pub t_list: Vec<f64>,
    pub x0: f64,
    pub p0: f64,
    pub sigma: f64,
    pub cn_dt: f64,
}

pub fn compare_propagators(
    sel: &SystemSel,
    grid: Grid,
    args: &CompareArgs,
) -> Result<VerbOutput, CliError> {
    let ce = |e: qat_core::Error| core_err(sel.label(), e);
    let t_hi = args.t_list.iter().cloned().fold(0.0f64, f64::max);
    let (spec, ctx) = solve_for(sel, t_hi + 0.05)?;
    let psi0 = WaveFunction::gaussian(grid, args.x0, args.sigma, args.p0, spec.hbar);

    let mut csv = String::from("t,\"d(QAT,CN)\",\"d(QAT,M6)\",\"d(CN,M6)\"\n");
    for &t in &args.t_list {
        let qat = evolve_qat_exact(&ctx, &psi0, t).map_err(ce)?;
        let cn = evolve_crank_nicolson(&spec, &psi0, 0.0, t, args.cn_dt, |_, _| {}).map_err(ce)?;
        // The oscillator presets use the sixth-order closed form; for the
        // commuting Hamiltonians (free, damped particle) the Magnus series
        // terminates after the first term, which is therefore exact.
        let omega_mat = match sel.preset {
            Preset::Harmonic => {
                magnus_omega6_dho(0.0, sel.omega, &grid, t, spec.mass, spec.hbar)
            }
            Preset::DampedHarmonic => {
                magnus_omega6_dho(sel.gamma, sel.omega, &grid, t, spec.mass, spec.hbar)
            }
            Preset::Free | Preset::DampedParticle => {
                magnus_omega(&spec, &grid, t, 1).map_err(ce)?
            }
        };
        let m6 = apply_matrix(&matrix_exponential(&omega_mat).map_err(ce)?, &psi0).map_err(ce)?;
        writeln!(
            csv,
            "{},{},{},{}",
            fmt_e(t),
            fmt_e(l2_distance(&qat, &cn)),
            fmt_e(l2_distance(&qat, &m6)),
            fmt_e(l2_distance(&cn, &m6))
        )
        .unwrap();
    }
    Ok(VerbOutput {
        csv,
        file_name: "compare_propagators.csv",
        notes: Vec::new(),
        warnings: Vec::new(),
        passed: true,
    })
}

pub fn spectrum_report(
    sel: &SystemSel,
    omega_tilde: Option<f64>,
    gamma_tilde: Option<f64>,
    n_max: u32,
    t: f64,
    grid: Grid,
) -> Result<VerbOutput, CliError> {
    let ce = |e: qat_core::Error| core_err(sel.label(), e);
    let inferred = sel.to_system().oscillator_params();
    let (wt, gt) = match (omega_tilde, gamma_tilde, inferred) {
        (Some(w), Some(g), _) => (w, g),
        (Some(w), None, Some((_, g))) => (w, g),
        (None, Some(g), Some((w, _))) => (w, g),
        (None, None, Some((w, g))) => (w, g),
        _ => {
            return Err(CliError::Usage(
                "spectrum needs --omega-tilde and --gamma-tilde for non-oscillator presets"
                    .to_string(),
            ))
        }
    };
    if wt <= gt / 2.0 {
        return Err(CliError::Usage(format!(
            "the discrete ladder needs omega_tilde > gamma_tilde/2 (got {wt} vs {gt}/2)"
        )));
    }
    let (spec, ctx) = solve_for(sel, t + 0.05)?;
    let params = HStarParams::new(wt, gt);
    let h_star = hstar_operator(&ctx, &params).map_err(ce)?;

    let mut csv = String::from("n,energy,rayleigh,abs_error,eigen_residual\n");
    let mut notes = Vec::new();
    let mut passed = true;
    for n in 0..=n_max {
        let energy = hstar_eigenvalue(&params, spec.hbar, C64::from(f64::from(n))).re;
        let phi = eigenfunction_phi_n(&ctx, &params, n, &grid, t).map_err(ce)?;
        let rayleigh = h_star.expectation(&phi, t).map_err(ce)?.re;
        let diff = (rayleigh - energy).abs();
        let h_phi = h_star.apply(&phi, t).map_err(ce)?;
        let res_sq: f64 = h_phi
            .amps
            .iter()
            .zip(&phi.amps)
            .map(|(h, p)| (h - p * C64::from(energy)).norm_sqr())
            .sum();
        let res = (res_sq * grid.dx()).sqrt() / phi.norm();
        writeln!(
            csv,
            "{n},{},{},{},{}",
            fmt_e(energy),
            fmt_e(rayleigh),
            fmt_e(diff),
            fmt_e(res)
        )
        .unwrap();
        // The stated tolerances cover the first six ladder states; higher
        // indices are reported as data only.
        let checked = n <= 5;
        if checked && (diff >= RAYLEIGH_TOL || res >= EIGEN_RES_TOL) {
            passed = false;
        }
        notes.push(format!(
            "n = {n}:  h* = {energy:.8}  Rayleigh off {diff:.3e}  residual {res:.3e}{}",
            if checked && (diff >= RAYLEIGH_TOL || res >= EIGEN_RES_TOL) {
                "  FAIL"
            } else {
                ""
            }
        ));
    }
    notes.push(format!(
        "ladder checks {} (Rayleigh < {RAYLEIGH_TOL:.0e}, residual < {EIGEN_RES_TOL:.0e}, n <= 5)",
        if passed { "pass" } else { "FAIL" }
    ));
    Ok(VerbOutput {
        csv,
        file_name: "spectrum.csv",
        notes,
        warnings: Vec::new(),
        passed,
    })
}

pub fn dump_basis(sel: &SystemSel, t_max: f64, samples: usize) -> Result<VerbOutput, CliError> {
    let (_, ctx) = solve_for(sel, t_max + 2.0 * CLIP_MARGIN)?;
    let mut warnings = Vec::new();
    let times = sample_times(sel.label(), &ctx, t_max, samples, &mut warnings);
    let mut csv = String::from("t,u1,du1,u2,du2,up,dup,w\n");
    for &t in &times {
        let p = ctx.basis.point(t).map_err(|e| core_err(sel.label(), e))?;
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            fmt_e(t),
            fmt_e(p.u1),
            fmt_e(p.du1),
            fmt_e(p.u2),
            fmt_e(p.du2),
            fmt_e(p.up),
            fmt_e(p.dup),
            fmt_e(p.w)
        )
        .unwrap();
    }
    Ok(VerbOutput {
        csv,
        file_name: "basis.csv",
        notes: Vec::new(),
        warnings,
        passed: true,
    })
}
