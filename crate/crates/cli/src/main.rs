mod config;
mod table;

use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand};
use hdapx::harness::{self, run_experiment, RESULTS_FILE};
use hdapx::least_squares::{DEFAULT_MATRIX_CAP, OVERSAMPLING};
use hdapx::poly_space::{count_degrees, DEFAULT_POINT_CAP};
use hdapx::sparse_grid::count_points;

#[derive(Debug, Parser)]
#[command(
    name = "hdapx",
    version,
    about = "Sparse-grid vs. least-squares approximation benchmarks on [0,1]^d"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a benchmark sweep and write results.csv, failures.csv and manifest.json
    Run(Box<RunArgs>),
    /// Report grid size, space dimension and memory footprint for (q, d)
    Inspect(InspectArgs),
    /// Render result CSVs as a table, best method per cell marked with *
    Table(TableArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// paper-low-dim, paper-high-dim or paper-noise
    #[arg(long, env = "HDAPX_PRESET")]
    pub preset: Option<String>,
    /// Flat TOML file whose keys mirror these flags
    #[arg(long, env = "HDAPX_CONFIG")]
    pub config: Option<PathBuf>,
    /// Comma-separated methods or "all": smolyak, ls_uniform, ls_chebyshev
    #[arg(long, env = "HDAPX_METHODS")]
    pub methods: Option<String>,
    /// Comma-separated families or "all" (the nine parametric ones)
    #[arg(long, env = "HDAPX_FAMILIES")]
    pub families: Option<String>,
    /// Dimensions, e.g. "10" or "1..5"
    #[arg(long, env = "HDAPX_D")]
    pub d: Option<String>,
    /// Scales k = q - d, e.g. "3,4,5,6" or "1..3"
    #[arg(long, env = "HDAPX_SCALES")]
    pub scales: Option<String>,
    /// Random instances per family
    #[arg(long, env = "HDAPX_INSTANCES")]
    pub instances: Option<usize>,
    /// Root seed, decimal or 0x-prefixed hex
    #[arg(long, env = "HDAPX_SEED")]
    pub seed: Option<String>,
    /// Standard deviation of the noise family
    #[arg(long, env = "HDAPX_SIGMA")]
    pub sigma: Option<f64>,
    /// Fixed number of test points instead of the default rule
    #[arg(long, env = "HDAPX_TEST_POINTS")]
    pub test_points: Option<usize>,
    /// Draw test points from the Chebyshev density instead of uniformly
    #[arg(long, env = "HDAPX_CHEBYSHEV_TEST_POINTS")]
    pub chebyshev_test_points: bool,
    /// Output directory
    #[arg(long, env = "HDAPX_OUT")]
    pub out: Option<PathBuf>,
    /// Worker threads (0: one per core)
    #[arg(long, env = "HDAPX_THREADS")]
    pub threads: Option<usize>,
    /// Largest grid, degree set or test point set allowed
    #[arg(long, env = "HDAPX_CAP_POINTS")]
    pub cap_points: Option<usize>,
    /// Largest design matrix (elements) allowed; larger LS cells are skipped
    #[arg(long, env = "HDAPX_CAP_MATRIX_ELEMS")]
    pub cap_matrix_elems: Option<usize>,
    /// Write 0 in the timing columns so reruns give identical files
    #[arg(long, env = "HDAPX_NO_TIMINGS")]
    pub no_timings: bool,
    /// Suppress progress output
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
struct InspectArgs {
    #[arg(long)]
    q: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, env = "HDAPX_CAP_POINTS", default_value_t = DEFAULT_POINT_CAP)]
    cap_points: usize,
    #[arg(long, env = "HDAPX_CAP_MATRIX_ELEMS", default_value_t = DEFAULT_MATRIX_CAP)]
    cap_matrix_elems: usize,
}

#[derive(Debug, Args)]
struct TableArgs {
    /// Result CSV files
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Inspect(args) => cmd_inspect(&args),
        Command::Table(args) => cmd_table(&args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Bad input is reported with exit status 2.
fn config_error(e: anyhow::Error, usage: bool) -> Result<ExitCode> {
    eprintln!("error: {e:#}");
    if usage {
        eprintln!("\n{}", Cli::command().render_usage());
    }
    Ok(ExitCode::from(2))
}

fn cmd_run(args: &RunArgs) -> Result<ExitCode> {
    let spec = match config::resolve(args) {
        Ok(spec) => spec,
        Err(e) => return config_error(e, true),
    };
    let quiet = args.quiet;
    let out = run_experiment(&spec, &mut |line| {
        if !quiet {
            eprintln!("{line}");
        }
    })?;
    print!("{}", table::render(&out.records));
    let dir = spec
        .output_dir
        .as_deref()
        .unwrap_or(std::path::Path::new(config::DEFAULT_OUT));
    println!(
        "{} records, {} skipped, {} failures; results in {}",
        out.records.len(),
        out.skipped.len(),
        out.failures.len(),
        dir.join(RESULTS_FILE).display()
    );
    for f in &out.failures {
        eprintln!(
            "failure: method={} family={} d={} q={} instance={}: {}",
            f.method.map_or("-".into(), |m| m.to_string()),
            f.family.map_or("-".into(), |m| m.to_string()),
            f.d,
            f.q,
            f.instance.map_or("-".into(), |j| j.to_string()),
            f.error
        );
    }
    Ok(if out.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn fits(size: u128, cap: usize) -> &'static str {
    if size <= cap as u128 {
        "within cap"
    } else {
        "EXCEEDS cap"
    }
}

fn cmd_inspect(args: &InspectArgs) -> Result<ExitCode> {
    let (q, d) = (args.q, args.d);
    let n = match count_points(q, d) {
        Ok(n) => n,
        Err(e) => return config_error(e.into(), false),
    };
    let dim = count_degrees(q, d)?;
    let samples = (OVERSAMPLING as u128).saturating_mul(dim);
    let elems = samples.saturating_mul(dim);
    let m = harness::standard_test_point_count(q, d)?;
    println!("q = {q}, d = {d}, scale = {}", q - d);
    println!("sparse grid points N(q,d)   {n}");
    println!("dim E(q,d)                  {dim}");
    println!("LS sample points            {samples}");
    println!("test points M               {m}");
    println!(
        "design matrix               {elems} elements, {:.1} MiB",
        elems as f64 * 8.0 / (1024.0 * 1024.0)
    );
    println!(
        "point cap {:>12}        grid {}, test points {}",
        args.cap_points,
        fits(n, args.cap_points),
        fits(m, args.cap_points)
    );
    println!(
        "matrix cap {:>11}        LS {}",
        args.cap_matrix_elems,
        fits(elems, args.cap_matrix_elems)
    );
    let runnable = n <= args.cap_points as u128 && m <= args.cap_points as u128;
    println!(
        "runnable                    smolyak: {}, least squares: {}",
        if runnable { "yes" } else { "no" },
        if runnable && elems <= args.cap_matrix_elems as u128 {
            "yes"
        } else {
            "no"
        }
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_table(args: &TableArgs) -> Result<ExitCode> {
    let mut records = Vec::new();
    for path in &args.files {
        let file = match File::open(path).with_context(|| format!("cannot open {}", path.display()))
        {
            Ok(f) => f,
            Err(e) => return config_error(e, false),
        };
        match harness::read_csv(file) {
            Ok(r) => records.extend(r),
            Err(e) => {
                return config_error(
                    anyhow::Error::from(e).context(format!("{}", path.display())),
                    false,
                )
            }
        }
    }
    print!("{}", table::render(&records));
    Ok(ExitCode::SUCCESS)
}
