//! qat-lab: scenario front end for the qat-core toolkit.
//!
//! Verbs:
//! - `run <cfg>...`         run scenario configs, write per-scenario CSV
//! - `verify-algebra`       check the ten-commutator closure table
//! - `compare-propagators`  pairwise L2 distances of the three propagators
//! - `spectrum`             ladder energies, Rayleigh quotients, residuals
//! - `dump-basis`           time series of u1, u2, u_p, and the Wronskian
//!
//! Exit codes: 0 all checks pass, 1 check or runtime failure, 2 usage or
//! configuration error.

mod config;
mod error;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qat_core::wavegrid::Grid;

use crate::config::{Preset, ScenarioConfig};
use crate::error::CliError;
use crate::scenario::{CompareArgs, SystemSel, VerbOutput};

#[derive(Parser)]
#[command(
    name = "qat-lab",
    version,
    about = "Linear quantum systems via the Arnold transformation: scenarios, \
             propagator comparisons, and algebra checks"
)]
struct Cli {
    /// Directory for output files (verbs print CSV to stdout when omitted).
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    /// Suppress stdout; files and the exit code carry the results.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    #[value(name = "free")]
    Free,
    #[value(name = "damped_particle", alias = "damped-particle")]
    DampedParticle,
    #[value(name = "harmonic")]
    Harmonic,
    #[value(name = "damped_harmonic", alias = "damped-harmonic")]
    DampedHarmonic,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Preset {
        match p {
            PresetArg::Free => Preset::Free,
            PresetArg::DampedParticle => Preset::DampedParticle,
            PresetArg::Harmonic => Preset::Harmonic,
            PresetArg::DampedHarmonic => Preset::DampedHarmonic,
        }
    }
}

#[derive(Args)]
struct SystemArgs {
    /// System preset.
    #[arg(long, value_enum)]
    preset: PresetArg,

    /// Damping rate for the damped presets.
    #[arg(long, default_value_t = 0.2)]
    gamma: f64,

    /// Oscillator frequency for the harmonic presets.
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
}

impl SystemArgs {
    fn sel(&self) -> SystemSel {
        SystemSel {
            preset: self.preset.into(),
            gamma: self.gamma,
            omega: self.omega,
        }
    }
}

#[derive(Args)]
struct GridArgs {
    /// Number of grid points (a power of two).
    #[arg(long = "n", default_value_t = 512)]
    n: usize,

    #[arg(long, default_value_t = -16.0, allow_hyphen_values = true)]
    x_min: f64,

    #[arg(long, default_value_t = 16.0, allow_hyphen_values = true)]
    x_max: f64,
}

impl GridArgs {
    fn grid(&self) -> Result<Grid, CliError> {
        if !self.n.is_power_of_two() || self.n < 8 {
            return Err(CliError::Usage(format!(
                "--n must be a power of two and at least 8 (got {})",
                self.n
            )));
        }
        if self.x_max <= self.x_min {
            return Err(CliError::Usage("--x-max must exceed --x-min".to_string()));
        }
        Grid::uniform(self.n, self.x_min, self.x_max).map_err(|e| CliError::Core {
            scenario: "grid".to_string(),
            source: e,
        })
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one or more scenario configs and write per-scenario reports.
    Run {
        /// Scenario config files (see the shipped scenarios/ directory).
        #[arg(required = true, value_name = "CFG")]
        configs: Vec<PathBuf>,
    },
    /// Check the ten-commutator closure table on dense grid matrices.
    VerifyAlgebra {
        #[command(flatten)]
        system: SystemArgs,

        /// Times at which the table is evaluated (repeatable).
        #[arg(long = "t", value_name = "T")]
        times: Vec<f64>,

        #[command(flatten)]
        grid: GridArgs,
    },
    /// Pairwise L2 distances between the exact, Crank-Nicolson, and Magnus
    /// propagators on a shared Gaussian.
    ComparePropagators {
        #[command(flatten)]
        system: SystemArgs,

        /// Comma-separated evaluation times.
        #[arg(long, default_value = "0,0.25,0.5,1.0")]
        t_list: String,

        #[arg(long, default_value_t = 0.3, allow_hyphen_values = true)]
        x0: f64,

        #[arg(long, default_value_t = 0.4, allow_hyphen_values = true)]
        p0: f64,

        /// Width of the shared Gaussian. Wide enough that the fourth-order
        /// Crank-Nicolson stencil resolves it cleanly on the default grid.
        #[arg(long, default_value_t = 1.2)]
        sigma: f64,

        /// Crank-Nicolson step size. The default keeps the time-stepping
        /// error under the spatial floor out to t = 2 on the default grid.
        #[arg(long, default_value_t = 5e-4)]
        cn_dt: f64,

        #[command(flatten)]
        grid: GridArgs,
    },
    /// Ladder-state energies, Rayleigh quotients, and eigen-residuals.
    Spectrum {
        #[command(flatten)]
        system: SystemArgs,

        /// Generator frequency (defaults to the preset's omega).
        #[arg(long)]
        omega_tilde: Option<f64>,

        /// Generator damping (defaults to the preset's gamma).
        #[arg(long)]
        gamma_tilde: Option<f64>,

        /// Highest ladder index to report.
        #[arg(long, default_value_t = 5)]
        n_max: u32,

        /// Evaluation time.
        #[arg(long, default_value_t = 0.0)]
        t: f64,

        #[command(flatten)]
        grid: GridArgs,
    },
    /// Time series of the classical basis u1, u2, u_p and the Wronskian.
    DumpBasis {
        #[command(flatten)]
        system: SystemArgs,

        #[arg(long, default_value_t = 1.0)]
        t_max: f64,

        #[arg(long, default_value_t = 21)]
        samples: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: &Cli) -> Result<bool, CliError> {
    match &cli.cmd {
        Cmd::Run { configs } => run_configs(cli, configs),
        Cmd::VerifyAlgebra {
            system,
            times,
            grid,
        } => {
            let times = if times.is_empty() {
                vec![0.0, 0.5, 1.0]
            } else {
                times.clone()
            };
            emit_verb(cli, scenario::verify_algebra(&system.sel(), &times, grid.grid()?)?)
        }
        Cmd::ComparePropagators {
            system,
            t_list,
            x0,
            p0,
            sigma,
            cn_dt,
            grid,
        } => {
            let t_list = parse_t_list(t_list)?;
            if *cn_dt <= 0.0 || !cn_dt.is_finite() {
                return Err(CliError::Usage("--cn-dt must be positive".to_string()));
            }
            if *sigma <= 0.0 {
                return Err(CliError::Usage("--sigma must be positive".to_string()));
            }
            let args = CompareArgs {
                t_list,
                x0: *x0,
                p0: *p0,
                sigma: *sigma,
                cn_dt: *cn_dt,
            };
            emit_verb(
                cli,
                scenario::compare_propagators(&system.sel(), grid.grid()?, &args)?,
            )
        }
        Cmd::Spectrum {
            system,
            omega_tilde,
            gamma_tilde,
            n_max,
            t,
            grid,
        } => emit_verb(
            cli,
            scenario::spectrum_report(
                &system.sel(),
                *omega_tilde,
                *gamma_tilde,
                *n_max,
                *t,
                grid.grid()?,
            )?,
        ),
        Cmd::DumpBasis {
            system,
            t_max,
            samples,
        } => {
            if *t_max <= 0.0 || !t_max.is_finite() {
                return Err(CliError::Usage("--t-max must be positive".to_string()));
            }
            if *samples < 2 {
                return Err(CliError::Usage("--samples must be at least 2".to_string()));
            }
            emit_verb(cli, scenario::dump_basis(&system.sel(), *t_max, *samples)?)
        }
    }
}

fn parse_t_list(text: &str) -> Result<Vec<f64>, CliError> {
    let ts: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let ts = ts.map_err(|_| {
        CliError::Usage(format!(
            "--t-list expects comma-separated numbers, got `{text}`"
        ))
    })?;
    if ts.is_empty() {
        return Err(CliError::Usage("--t-list must not be empty".to_string()));
    }
    Ok(ts)
}

/// Print or write a verb's CSV, echo its notes, and fold in the exit status.
fn emit_verb(cli: &Cli, out: VerbOutput) -> Result<bool, CliError> {
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(dir) = &cli.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
            path: dir.display().to_string(),
            source: e,
        })?;
        let path = dir.join(out.file_name);
        std::fs::write(&path, &out.csv).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        if !cli.quiet {
            println!("wrote {}", path.display());
        }
    } else if !cli.quiet {
        print!("{}", out.csv);
    }
    if !cli.quiet {
        for note in &out.notes {
            println!("{note}");
        }
    }
    Ok(out.passed)
}

fn run_configs(cli: &Cli, paths: &[PathBuf]) -> Result<bool, CliError> {
    let configs: Vec<ScenarioConfig> = paths
        .iter()
        .map(|p| config::load(p))
        .collect::<Result<_, _>>()?;
    for (i, a) in configs.iter().enumerate() {
        if configs[..i].iter().any(|b| b.label == a.label) {
            return Err(CliError::Usage(format!(
                "duplicate scenario name `{}` (config stems must be unique)",
                a.label
            )));
        }
    }
    let out_root = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));

    // Scenarios are independent and write disjoint directories, so a batch
    // runs them in parallel; summaries are reported in input order.
    let results: Vec<Result<scenario::Summary, CliError>> = if configs.len() == 1 {
        vec![scenario::run_scenario(&configs[0], &out_root)]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = configs
                .iter()
                .map(|cfg| scope.spawn(|| scenario::run_scenario(cfg, &out_root)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("scenario thread panicked"))
                .collect()
        })
    };

    let mut all_passed = true;
    for result in results {
        let summary = result?;
        for w in &summary.warnings {
            eprintln!("warning: {w}");
        }
        let status = if summary.failures.is_empty() {
            "checks pass"
        } else {
            all_passed = false;
            "CHECKS FAILED"
        };
        if !cli.quiet {
            println!(
                "scenario {}: wrote {}; {status}",
                summary.label,
                summary.files.join(", ")
            );
            for f in &summary.failures {
                println!("  failed: {f}");
            }
        }
    }
    Ok(all_passed)
}
