//! Command-line front end for the convergence studies.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use neumann_control::controls::ControlSpaceKind;
use neumann_control::harness::{run_all, run_check, StudyConfig, StudyKind};
use neumann_control::mesh::AngleCase;
use neumann_control::{Error, Result};

#[derive(Parser)]
#[command(
    name = "neumann-control",
    about = "Convergence studies for Neumann boundary control on prism domains with an edge singularity",
    version
)]
struct Cli {
    /// Run the manufactured-solution oracle suite and kernel property
    /// checks, then exit (no study).
    #[arg(long, global = true)]
    check: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run convergence studies and emit CSV tables.
    Study(StudyArgs),
}

#[derive(Args)]
struct StudyArgs {
    /// Interior edge angle: pi2, 2pi3, 3pi4 or all.
    #[arg(long, default_value = "all")]
    omega: String,

    /// Control discretization: pw-constant, pw-linear or both.
    #[arg(long, default_value = "both")]
    control: String,

    /// Study kind: control, trace or all.
    #[arg(long, default_value = "all")]
    kind: String,

    /// Inclusive refinement-level range MIN..MAX.
    #[arg(long, default_value = "1..4", value_parser = parse_levels)]
    levels: (u32, u32),

    /// Regularization weight (the reference optimum assumes 1).
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,

    /// Quadrature degree for error integrals.
    #[arg(long, default_value_t = 4)]
    quad_degree: usize,

    /// Relative tolerance of the sparse inner solves.
    #[arg(long, default_value_t = 1e-11)]
    tol_inner: f64,

    /// Relative tolerance of the outer reduced-Hessian CG.
    #[arg(long, default_value_t = 1e-10)]
    tol_outer: f64,

    /// CSV output path. With several studies the study tag is inserted
    /// before the extension.
    #[arg(long)]
    out: PathBuf,

    /// Also dump each generated mesh as plain text (per-mesh suffixes).
    #[arg(long)]
    dump_mesh: Option<PathBuf>,
}

fn parse_levels(s: &str) -> std::result::Result<(u32, u32), String> {
    let (lo, hi) = s
        .split_once("..")
        .ok_or_else(|| format!("expected MIN..MAX, got '{s}'"))?;
    let lo: u32 = lo.parse().map_err(|e| format!("bad MIN '{lo}': {e}"))?;
    let hi: u32 = hi.parse().map_err(|e| format!("bad MAX '{hi}': {e}"))?;
    Ok((lo, hi))
}

fn study_config(args: &StudyArgs) -> Result<StudyConfig> {
    let omegas = match args.omega.as_str() {
        "all" => AngleCase::ALL.to_vec(),
        label => vec![AngleCase::from_label(label)?],
    };
    let controls = match args.control.as_str() {
        "both" => ControlSpaceKind::ALL.to_vec(),
        label => vec![ControlSpaceKind::from_label(label)?],
    };
    let kind = StudyKind::from_label(&args.kind)?;
    let config = StudyConfig {
        omegas,
        controls,
        kind,
        min_level: args.levels.0,
        max_level: args.levels.1,
        alpha: args.alpha,
        quad_degree: args.quad_degree,
        tol_inner: args.tol_inner,
        tol_outer: args.tol_outer,
        out: Some(args.out.clone()),
        dump_mesh: args.dump_mesh.clone(),
    };
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    if cli.check {
        run_check()?;
        println!("all checks passed");
        return Ok(());
    }
    match cli.command {
        Some(Command::Study(args)) => {
            let config = study_config(&args)?;
            run_all(&config)?;
            Ok(())
        }
        None => Err(Error::Config(
            "nothing to do: pass a subcommand or --check (see --help)".into(),
        )),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
