//! Command-line runner for the scaling experiments: execute spec files or
//! built-in presets, emit CSV, evaluate bounds, and check the discretization
//! against the validity conditions of the error analysis.
//!
//! Exit codes: 0 on success, 1 on a spec or usage error, 2 on numerical
//! divergence.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use slowfast::analysis::check_assumptions;
use slowfast::experiments::{
    csv, preset, preset_description, run_experiment, spec_file, ExperimentKind, ExperimentResult,
    ExperimentSpec, PRESET_NAMES,
};
use slowfast::integrators::SchemeConfig;
use slowfast::Error;

#[derive(Parser)]
#[command(
    name = "slowfast",
    about = "Coarse time-stepping experiments for slow-fast systems",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Experiment spec file (flat key = value lines).
    #[arg(value_name = "SPEC", conflicts_with = "preset")]
    spec: Option<PathBuf>,
    /// Built-in preset name (see `slowfast presets`).
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Execute an experiment and write the measurement CSV.
    Run {
        #[command(flatten)]
        source: Source,
        /// Output path; `-` writes to stdout. Defaults to `<name>.csv`.
        #[arg(short, long, value_name = "PATH")]
        output: Option<PathBuf>,
    },
    /// Execute an experiment and write measurements with all bound values.
    Bounds {
        #[command(flatten)]
        source: Source,
        /// Output path; `-` writes to stdout. Defaults to `<name>_bounds.csv`.
        #[arg(short, long, value_name = "PATH")]
        output: Option<PathBuf>,
    },
    /// Print the validity report of the discretization parameters.
    Check {
        #[command(flatten)]
        source: Source,
    },
    /// List the built-in presets.
    Presets,
}

fn load(source: &Source) -> Result<(String, Vec<ExperimentSpec>), Error> {
    match (&source.spec, &source.preset) {
        (Some(path), None) => {
            let text = fs::read_to_string(path)?;
            let spec = spec_file::parse(&text)?;
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "experiment".into());
            Ok((name, vec![spec]))
        }
        (None, Some(name)) => {
            let specs = preset(name)
                .ok_or_else(|| Error::Spec(format!("unknown preset `{name}`")))?;
            Ok((name.clone(), specs))
        }
        _ => Err(Error::Spec(
            "provide a spec file or --preset <name> (see `slowfast presets`)".into(),
        )),
    }
}

fn run_all(specs: &[ExperimentSpec]) -> Result<Vec<ExperimentResult>, Error> {
    specs.iter().map(run_experiment).collect()
}

fn emit(
    name: &str,
    specs: &[ExperimentSpec],
    results: &[ExperimentResult],
    output: Option<&Path>,
    bounds: bool,
) -> Result<(), Error> {
    let default_name = if bounds {
        format!("{name}_bounds.csv")
    } else {
        format!("{name}.csv")
    };
    let path = output.map(Path::to_path_buf).unwrap_or_else(|| default_name.into());
    let title = format!("slowfast experiment: {name}");

    let mut buf = Vec::new();
    if bounds {
        csv::write_bounds_csv(&mut buf, &title, specs, results)?;
    } else {
        csv::write_run_csv(&mut buf, &title, specs, results)?;
    }

    if path.as_os_str() == "-" {
        std::io::stdout().write_all(&buf)?;
    } else {
        fs::write(&path, &buf)?;
        println!("wrote {}", path.display());
    }
    for (i, r) in results.iter().enumerate() {
        println!(
            "slope[{i}] = {:.6} (intercept {:.6}, max log-residual {:.3e}, {} points)",
            r.slope,
            r.intercept,
            r.residual,
            r.sweep_values.len()
        );
    }
    Ok(())
}

fn check(specs: &[ExperimentSpec]) -> Result<(), Error> {
    for (i, spec) in specs.iter().enumerate() {
        spec.validate()?;
        let ledger = spec.ledger();
        println!("spec[{i}] ({})", spec.kind);
        match spec.kind {
            ExperimentKind::DtMacroScaling => {
                for &dt_macro in &spec.sweep {
                    let cfg = SchemeConfig::new(spec.dt_micro, dt_macro, spec.num_micro)?;
                    let report = check_assumptions(&ledger, &cfg, spec.eps);
                    println!("-- dt_macro = {dt_macro:.6e}");
                    print!("{report}");
                }
            }
            ExperimentKind::EpsScaling => {
                let cfg = SchemeConfig::new(spec.dt_micro, spec.dt_macro, spec.num_micro)?;
                for &eps in &spec.sweep {
                    let report = check_assumptions(&ledger, &cfg, eps);
                    println!("-- eps = {eps:.6e}");
                    print!("{report}");
                }
            }
            ExperimentKind::DnScaling => {
                // the swept offsets do not change the discretization
                let cfg = SchemeConfig::new(spec.dt_micro, spec.dt_macro, spec.num_micro)?;
                let report = check_assumptions(&ledger, &cfg, spec.eps);
                print!("{report}");
            }
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { source, output } => {
            let (name, specs) = load(&source)?;
            let results = run_all(&specs)?;
            emit(&name, &specs, &results, output.as_deref(), false)
        }
        Command::Bounds { source, output } => {
            let (name, specs) = load(&source)?;
            let results = run_all(&specs)?;
            emit(&name, &specs, &results, output.as_deref(), true)
        }
        Command::Check { source } => {
            let (_, specs) = load(&source)?;
            check(&specs)
        }
        Command::Presets => {
            for name in PRESET_NAMES {
                println!("{name}: {}", preset_description(name).unwrap());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version through the error path with exit 0
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_divergence() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
