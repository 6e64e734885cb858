use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use fraclab::field::{write_scalar_raster, write_vector_raster};
use fraclab::flatnorm::{flat_norm, SolverOptions};
use fraclab::lab::report::{write_csv, write_json, CSV_HEADER};
use fraclab::lab::{run_compactness_probe, run_gamma_sweep, run_lemma_suite, run_selftest, Check, ExperimentConfig};
use fraclab::riesz::potential;
use fraclab::topology::jacobian;
use fraclab::vortex::build_recovery;
use fraclab::{make_params, DiracSum, Error, FlatBall, FlatInput, FlatVariant, Grid2, Normalization};

#[derive(Parser)]
#[command(name = "fraclab", version, about = "Fractional Sobolev energies of planar vortex fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Energy sweep over s with the affine fit against 1/|log(1-s)|.
    Sweep(ConfigArgs),
    /// Vortex localisation and boundary degrees along the sweep.
    Compactness(ConfigArgs),
    /// Lower-bound chain, ball scaling and the three-term splitting.
    Lemmas(ConfigArgs),
    /// Flat norm of a sum of Dirac masses.
    Flatnorm(FlatArgs),
    /// Write a field of the recovery construction as a VF2 raster.
    FieldDump(DumpArgs),
    /// Oracle comparisons on small grids.
    Selftest,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// `key = value` configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `output_dir`.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Closed,
    Open,
}

#[derive(Clone, Copy, ValueEnum)]
enum Ball {
    Paper,
    Simple,
}

#[derive(clap::Args)]
struct FlatArgs {
    /// Atoms as `(x,y):d; ...`.
    #[arg(long)]
    atoms: String,
    /// Nodes per side.
    #[arg(long, default_value_t = 64)]
    grid: usize,
    #[arg(long, default_value_t = 4.0)]
    side: f64,
    /// Radius of the disk the measure lives in.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[arg(long, value_enum, default_value_t = Variant::Closed)]
    variant: Variant,
    #[arg(long, value_enum, default_value_t = Ball::Paper)]
    ball: Ball,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Write the optimal test function as a VF2 raster.
    #[arg(long)]
    phi: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DumpField {
    /// The S^1-valued competitor.
    U,
    /// Its core truncation.
    Us,
    /// Normalised Riesz potential of `u`.
    Potential,
    /// Jacobian of the potential, at nodes.
    Jacobian,
    /// Domain masks.
    Mask,
}

#[derive(clap::Args)]
struct DumpArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    s: f64,
    #[arg(long, value_enum, default_value_t = DumpField::U)]
    field: DumpField,
    #[arg(long)]
    output: PathBuf,
}

/// Exit status 2 for configuration problems, 1 for anything else.
enum Failure {
    Config(String),
    Run(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<Error>() {
            Some(Error::Config { .. }) => Failure::Config(format!("{e:#}")),
            _ => Failure::Run(e),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::from(anyhow::Error::from(e))
    }
}

fn load(args: &ConfigArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::from_file(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?,
        None => ExperimentConfig::default(),
    };
    if let Some(o) = &args.output {
        cfg.output_dir = Some(o.clone());
    }
    Ok(cfg)
}

fn output_dir(cfg: &ExperimentConfig) -> anyhow::Result<Option<&Path>> {
    match &cfg.output_dir {
        Some(d) => {
            std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
            Ok(Some(d))
        }
        None => Ok(None),
    }
}

fn print_checks(checks: &[Check]) -> bool {
    for c in checks {
        println!("{}", c.line());
    }
    checks.iter().all(|c| c.passed)
}

fn sweep(args: &ConfigArgs) -> Result<bool, Failure> {
    let cfg = load(args)?;
    let report = run_gamma_sweep(&cfg)?;
    let rows = report.csv_rows();
    write_csv(io::stdout().lock(), CSV_HEADER, &rows)?;
    println!("{}", report.fit_line());
    if let Some(dir) = output_dir(&cfg)? {
        write_csv(BufWriter::new(File::create(dir.join("sweep.csv")).map_err(Error::from)?), CSV_HEADER, &rows)?;
        write_json(&dir.join("sweep.json"), &report)?;
    }
    Ok(print_checks(&report.checks))
}

fn compactness(args: &ConfigArgs) -> Result<bool, Failure> {
    let cfg = load(args)?;
    let report = run_compactness_probe(&cfg)?;
    if let Some(dir) = output_dir(&cfg)? {
        write_json(&dir.join("compactness.json"), &report)?;
    }
    Ok(print_checks(&report.checks))
}

fn lemmas(args: &ConfigArgs) -> Result<bool, Failure> {
    let cfg = load(args)?;
    let report = run_lemma_suite(&cfg)?;
    for d in &report.decomposition {
        println!("s={} I1={} I2={} I3={} (I2 bound {})", d.s, d.i1, d.i2, d.i3, d.i2_bound);
    }
    if let Some(dir) = output_dir(&cfg)? {
        write_json(&dir.join("lemmas.json"), &report)?;
    }
    Ok(print_checks(&report.checks))
}

fn flatnorm(args: &FlatArgs) -> Result<bool, Failure> {
    let atoms = DiracSum::parse(&args.atoms).map_err(|e| Failure::Config(format!("--atoms: {e}")))?;
    let grid = Grid2::centered(args.side, args.grid).map_err(|e| Failure::Config(e.to_string()))?;
    let region = grid.mask(|p| p[0].hypot(p[1]) <= args.radius);
    let variant = match args.variant {
        Variant::Closed => FlatVariant::Closed,
        Variant::Open => FlatVariant::Open,
    };
    let ball = match args.ball {
        Ball::Paper => FlatBall::Paper,
        Ball::Simple => FlatBall::Simple,
    };
    let input = FlatInput::atoms_only(grid, atoms, region, variant).with_ball(ball);
    let opts = SolverOptions { tol: args.tol, ..SolverOptions::default() };
    match flat_norm(&input, opts) {
        Ok(r) => {
            let name = match args.variant {
                Variant::Closed => "flat_closed",
                Variant::Open => "flat_open",
            };
            println!("{name} = {} (upper bound {}, gap {:e})", r.value, r.upper_bound, r.primal_dual_gap);
            if let (Some(path), Some(phi)) = (&args.phi, &r.phi) {
                write_scalar_raster(BufWriter::new(File::create(path).map_err(Error::from)?), phi)?;
            }
            Ok(true)
        }
        Err(e @ Error::FlatNormNotConverged { .. }) => {
            println!("{e}");
            Ok(false)
        }
        Err(Error::InvalidInput(m)) => Err(Failure::Config(m)),
        Err(e) => Err(e.into()),
    }
}

fn field_dump(args: &DumpArgs) -> Result<bool, Failure> {
    let cfg = load(&ConfigArgs { config: args.config.clone(), output: None })?;
    let dom = cfg.domain()?;
    let rc = cfg.recovery(&dom, args.s).map_err(|e| Failure::Config(format!("--s: {e}")))?;
    rc.validate(&dom).map_err(|e| Failure::Config(format!("--s: {e}")))?;
    let out = BufWriter::new(File::create(&args.output).map_err(Error::from)?);
    if let DumpField::Mask = args.field {
        let mut f = fraclab::ScalarField::zeros(dom.grid);
        for (k, v) in f.values.iter_mut().enumerate() {
            *v = dom.omega_mask[k] as u8 as f64 + dom.neighborhood_mask[k] as u8 as f64;
        }
        write_scalar_raster(out, &f)?;
        return Ok(true);
    }
    let pair = build_recovery(&rc, &dom)?;
    let params = make_params(args.s, cfg.kernel_radius)?;
    match args.field {
        DumpField::U => write_vector_raster(out, &pair.u)?,
        DumpField::Us => write_vector_raster(out, &pair.us)?,
        DumpField::Potential => write_vector_raster(out, &potential(&pair.u, &params, Normalization::Normalized)?)?,
        DumpField::Jacobian => {
            let v = potential(&pair.u, &params, Normalization::Normalized)?;
            write_scalar_raster(out, &jacobian(&v).to_nodes())?
        }
        DumpField::Mask => unreachable!(),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sweep(a) => sweep(a),
        Command::Compactness(a) => compactness(a),
        Command::Lemmas(a) => lemmas(a),
        Command::Flatnorm(a) => flatnorm(a),
        Command::FieldDump(a) => field_dump(a),
        Command::Selftest => Ok(print_checks(&run_selftest())),
    };
    let _ = io::stdout().flush();
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
