//! Thin command-line front end over the spherebound library.
//!
//! Exit codes: 0 success; 2 parse/validation errors; 1 solver or identity
//! failures.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spherebound::error::Error;
use spherebound::gram::{build_nk, build_pk};
use spherebound::polyform::parse_form;
use spherebound::report::{
    identity_suite, init_threads, run_bound, run_spectral_norm, ProblemKind, ProblemSpec,
    ResultReport, SolverSpec,
};

#[derive(Parser)]
#[command(name = "spherebound", version, about = "Convergent eigenvalue bounds for polynomial optimization on spheres")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Solver selection: auto (dense below a size cutoff), dense, or sparse.
    #[arg(long, default_value = "auto")]
    solver: String,
    /// Relative residual target.
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap for the sparse path.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Seed for the deterministic starting vector.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = default / SPHEREBOUND_THREADS).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

impl SolverArgs {
    fn to_spec(&self) -> SolverSpec {
        let defaults = SolverSpec::default();
        SolverSpec {
            mode: self.solver.clone(),
            tol: self.tol.unwrap_or(defaults.tol),
            max_iter: self.max_iter.unwrap_or(defaults.max_iter),
            seed: self.seed.unwrap_or(defaults.seed),
            threads: self.threads,
        }
    }
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the three-column table (k,bound,seconds) here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Lower bounds on the minimum of a form over the unit sphere(s).
    Bound {
        /// Problem file (JSON); overrides the inline flags.
        #[arg(long)]
        problem: Option<PathBuf>,
        /// Polynomial text, e.g. "x1^2*x2^2*(x1^2+x2^2-3*x3^2)+x3^6".
        #[arg(long)]
        poly: Option<String>,
        /// Comma-separated variable names for a single sphere.
        #[arg(long, value_delimiter = ',')]
        vars: Vec<String>,
        /// Semicolon-separated groups of comma-separated names, for a
        /// product of spheres (e.g. "x1,x2;y1,y2").
        #[arg(long)]
        multi_vars: Option<String>,
        /// Hierarchy levels k (absolute; the report echoes k and k-d).
        #[arg(long, value_delimiter = ',')]
        levels: Vec<u32>,
        /// Run the projected-gradient oracle and attach the cross-check.
        #[arg(long)]
        oracle: bool,
        /// Attach the a-priori gap-bound annotation per level.
        #[arg(long)]
        gap: bool,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Nonincreasing upper bounds on the spectral norm of a real tensor.
    SpectralNorm {
        /// Problem file (JSON) or tensor file ({"dims": .., "entries": ..}).
        #[arg(long)]
        tensor: PathBuf,
        #[arg(long, value_delimiter = ',')]
        levels: Vec<u32>,
        /// Attach the a-priori gap-bound annotation per level.
        #[arg(long)]
        gap: bool,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Assemble and export the pencil matrices P_k and N_k.
    Gram {
        #[arg(long)]
        poly: String,
        #[arg(long, value_delimiter = ',')]
        vars: Vec<String>,
        /// Level k (k >= d).
        #[arg(long)]
        k: u32,
        /// Export format; only "coo" (row col value, 1-based, upper triangle).
        #[arg(long, default_value = "coo")]
        format: String,
        /// Output prefix: writes <prefix>_Pk.coo and <prefix>_Nk.coo.
        #[arg(long)]
        out_prefix: PathBuf,
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Run the fast identity suite and print one pass/fail line per check.
    Check,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Parse { .. }
        | Error::InvalidProblem(_)
        | Error::DegreeMismatch { .. }
        | Error::DimensionMismatch { .. }
        | Error::LevelBelowDegree { .. }
        | Error::OddDegree(_)
        | Error::EvenDegree(_)
        | Error::ZeroTensor
        | Error::Json(_) => 2,
        _ => 1,
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, Error> {
    match cli.cmd {
        Cmd::Bound { problem, poly, vars, multi_vars, levels, oracle, gap, solver, output } => {
            let spec = if let Some(path) = problem {
                let f = File::open(path)?;
                serde_json::from_reader(f)?
            } else {
                let poly = poly.ok_or_else(|| {
                    Error::InvalidProblem("provide --problem or --poly with --vars".into())
                })?;
                let (kind, variables) = if let Some(groups) = multi_vars {
                    let groups: Vec<Vec<String>> = groups
                        .split(';')
                        .map(|g| g.split(',').map(|s| s.trim().to_string()).collect())
                        .collect();
                    (ProblemKind::MultiSphereMin, groups)
                } else {
                    if vars.is_empty() {
                        return Err(Error::InvalidProblem("provide --vars".into()));
                    }
                    (ProblemKind::SphereMin, vec![vars])
                };
                ProblemSpec {
                    kind,
                    variables,
                    polynomial: Some(poly),
                    terms: None,
                    tensor: None,
                    levels,
                    solver: solver.to_spec(),
                }
            };
            let report = run_bound(&spec, oracle, gap)?;
            emit(&report, &output)?;
            Ok(if report.any_level_failed() { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
        Cmd::SpectralNorm { tensor, levels, gap, solver, output } => {
            let text = std::fs::read_to_string(&tensor)?;
            let spec: ProblemSpec = match serde_json::from_str::<ProblemSpec>(&text) {
                Ok(mut s) => {
                    if !levels.is_empty() {
                        s.levels = levels;
                    }
                    s.solver = solver.to_spec();
                    s
                }
                Err(_) => {
                    // bare tensor file
                    let t: spherebound::report::TensorSpec = serde_json::from_str(&text)?;
                    ProblemSpec {
                        kind: ProblemKind::SpectralNorm,
                        variables: Vec::new(),
                        polynomial: None,
                        terms: None,
                        tensor: Some(t),
                        levels,
                        solver: solver.to_spec(),
                    }
                }
            };
            let report = run_spectral_norm(&spec, gap)?;
            emit(&report, &output)?;
            Ok(if report.any_level_failed() { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
        Cmd::Gram { poly, vars, k, format, out_prefix, threads } => {
            if format != "coo" {
                return Err(Error::InvalidProblem(format!("unknown format '{format}'")));
            }
            if vars.is_empty() {
                return Err(Error::InvalidProblem("provide --vars".into()));
            }
            init_threads(threads);
            let p = parse_form(&poly, &vars)?;
            if p.degree() % 2 != 0 {
                return Err(Error::OddDegree(p.degree()));
            }
            let d = p.degree() / 2;
            let pk = build_pk(&p, k)?;
            let nk = build_nk(p.n(), d, k)?;
            let prefix = out_prefix.to_string_lossy();
            for (name, m) in [("Pk", &pk), ("Nk", &nk)] {
                let path = format!("{prefix}_{name}.coo");
                let mut w = BufWriter::new(File::create(&path)?);
                m.write_coo(&mut w)?;
                w.flush()?;
                eprintln!("wrote {path} (dim {}, nnz {})", m.dim(), m.nnz_upper());
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Check => {
            let lines = identity_suite();
            let mut all = true;
            for l in &lines {
                println!("{} {}: {}", if l.passed { "PASS" } else { "FAIL" }, l.name, l.detail);
                all &= l.passed;
            }
            Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn emit(report: &ResultReport, output: &OutputArgs) -> Result<(), Error> {
    let json = serde_json::to_string_pretty(report)?;
    match &output.out {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path)?);
            writeln!(f, "{json}")?;
        }
        None => println!("{json}"),
    }
    if let Some(path) = &output.csv {
        let mut f = BufWriter::new(File::create(path)?);
        report.write_csv(&mut f)?;
        f.flush()?;
    }
    Ok(())
}
