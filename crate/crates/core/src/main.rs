use clap::{Parser, Subcommand, ValueEnum};
use ldpm::cli::{self, BenchmarkSpec, Preset, SolverKind};
use ldpm::compare::{compare_fields, FieldSample, Thresholds};
use ldpm::geometry::{build_fixture, load_mesh, validate_mesh, write_mesh, Fixture};
use ldpm::{Error, Mesh64, Result};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ldpm", version, about = "Lattice Discrete Particle Model solver")]
struct Args {
    /// Worker threads for facet evaluation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a TOML configuration.
    Run { config: PathBuf },
    /// Run a benchmark preset.
    Bench {
        preset: Preset,
        /// Mesh file; a synthetic lattice is generated when omitted.
        #[arg(long)]
        mesh: Option<PathBuf>,
        /// Geometry scale factor (preset default when omitted).
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long, value_enum)]
        solver: Option<SolverArg>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        total_time: Option<f64>,
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Write the resolved configuration here instead of running it.
        #[arg(long)]
        write_config: Option<PathBuf>,
    },
    /// Compare crack-opening or volumetric-strain dumps.
    Compare {
        /// Dump files, optionally `label=path`; the label defaults to the
        /// dump's directory name.
        #[arg(required = true, num_args = 2..)]
        dumps: Vec<String>,
        #[arg(long)]
        reference: String,
        /// Elementwise cap on the fields, mm.
        #[arg(long)]
        cap: Option<f64>,
        /// Correlation class boundaries.
        #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.999, 0.9, 0.8])]
        corr: Vec<f64>,
        /// NRMSE class boundaries, %.
        #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [1.0, 5.0, 10.0])]
        nrmse: Vec<f64>,
        /// Also write the matrix as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Check a mesh file against the geometric invariants.
    Validate { mesh: PathBuf },
    /// Write a synthetic mesh.
    Fixture {
        kind: FixtureArg,
        #[arg(short, long)]
        output: PathBuf,
        /// Geometry scale for the preset lattices.
        #[arg(long)]
        scale: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Explicit,
    Genalpha,
    Hht,
    Static,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Explicit => SolverKind::Explicit,
            SolverArg::Genalpha => SolverKind::Genalpha,
            SolverArg::Hht => SolverKind::Hht,
            SolverArg::Static => SolverKind::Static,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureArg {
    SingleFacet,
    Chain,
    SingleTet,
    FreeVibration,
    UniaxialStrain,
    DogBone,
    NotchedBend,
    UnconfinedFixed,
    UnconfinedFree,
}

impl FixtureArg {
    fn fixture(self, scale: Option<f64>) -> Fixture {
        let preset = |p: Preset| p.fixture(scale.unwrap_or(p.default_scale()));
        match self {
            FixtureArg::SingleFacet => Fixture::SingleFacet {
                length: 50.0,
                area: 100.0,
            },
            FixtureArg::Chain => Fixture::TwoParticleChain {
                count: 4,
                length: 100.0,
                area: 100.0,
            },
            FixtureArg::SingleTet => Fixture::SingleTet { size: 20.0 },
            FixtureArg::FreeVibration => preset(Preset::FreeVibration),
            FixtureArg::UniaxialStrain => preset(Preset::UniaxialStrain),
            FixtureArg::DogBone => preset(Preset::DogBone),
            FixtureArg::NotchedBend => preset(Preset::NotchedBend),
            FixtureArg::UnconfinedFixed => preset(Preset::UnconfinedFixed),
            FixtureArg::UnconfinedFree => preset(Preset::UnconfinedFree),
        }
    }
}

fn print_record(r: &cli::RunRecord) {
    println!(
        "{}: {} steps of {:e} s, {} not converged, peak nominal stress {}, max balance error {:.3e} %, {:.2} s",
        r.solver, r.steps, r.dt, r.non_converged, r.peak_stress, r.max_balance_error, r.wall_time
    );
    println!("outputs in {}", r.dir.display());
}

fn execute(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run { config } => {
            let cfg = cli::parse_config(&config)?;
            print_record(&cli::run(&cfg)?);
        }
        Command::Bench {
            preset,
            mesh,
            scale,
            solver,
            dt,
            total_time,
            out,
            write_config,
        } => {
            let spec = BenchmarkSpec {
                preset,
                scale,
                mesh,
                solver: solver.map(Into::into),
                dt,
                total_time,
                out,
            };
            let cfg = spec.to_config()?;
            if let Some(path) = write_config {
                std::fs::write(&path, cli::write_config(&cfg)?).map_err(|e| Error::Io {
                    context: path.display().to_string(),
                    source: e,
                })?;
                return Ok(ExitCode::SUCCESS);
            }
            print_record(&cli::run(&cfg)?);
        }
        Command::Compare {
            dumps,
            reference,
            cap,
            corr,
            nrmse,
            csv,
        } => {
            let mut runs = Vec::new();
            for d in &dumps {
                let mut s = match d.split_once('=') {
                    Some((label, path)) => {
                        let mut s = FieldSample::load(path)?;
                        s.label = label.to_owned();
                        s
                    }
                    None => FieldSample::load(d)?,
                };
                if runs.iter().any(|r: &FieldSample| r.label == s.label) {
                    s.label = d.clone();
                }
                runs.push(s);
            }
            let thresholds = Thresholds {
                corr: [corr[0], corr[1], corr[2]],
                nrmse: [nrmse[0], nrmse[1], nrmse[2]],
            };
            let m = compare_fields(&runs, &reference, cap, thresholds)?;
            print!("{}", m.to_table());
            if let Some(path) = csv {
                std::fs::write(&path, m.to_csv()).map_err(|e| Error::Io {
                    context: path.display().to_string(),
                    source: e,
                })?;
            }
        }
        Command::Validate { mesh } => {
            let m: Mesh64 = load_mesh(&mesh)?;
            let report = validate_mesh(&m);
            println!(
                "{}: {} nodes, {} tets, {} facets, hash {}",
                mesh.display(),
                m.nodes.len(),
                m.tets.len(),
                m.facets.len(),
                m.content_hash()
            );
            for v in &report.violations {
                println!("  {v}");
            }
            if !report.is_valid() {
                println!("{} violation(s)", report.violations.len());
                return Ok(ExitCode::from(2));
            }
            println!("valid");
        }
        Command::Fixture { kind, output, scale } => {
            let m: Mesh64 = build_fixture(&kind.fixture(scale))?;
            let file = std::fs::File::create(&output).map_err(|e| Error::Io {
                context: output.display().to_string(),
                source: e,
            })?;
            let mut w = std::io::BufWriter::new(file);
            write_mesh(&m, &mut w).map_err(|e| Error::Io {
                context: output.display().to_string(),
                source: e,
            })?;
            println!("{}: {} DoFs, hash {}", output.display(), m.dof_count(), m.content_hash());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(args.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_solver_failure() { 3 } else { 2 })
        }
    }
}
