//! Command-line interface for Cayley transform ellipsoid fitting.
//!
//! Exit codes: 0 on success, 2 for malformed input or configuration, 3 when
//! the fit itself fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ctef::cluster::{self, ClusterOptions};
use ctef::pipeline::{self, DEFAULT_WEIGHT};
use ctef::simulate::{simulate, SimSpec};
use ctef::solver::SolveOptions;
use ctef_cli::bench::{self, GridConfig};
use ctef_cli::csvio;
use ctef_cli::report::{self, ClusterReport, FitReport, TruthReport};
use ctef_cli::svg;

#[derive(Parser)]
#[command(
    name = "ctef",
    version,
    about = "Ellipsoid fitting via the Cayley transform: fit, reduce, simulate, benchmark, cluster"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit an ellipsoid to the rows of a CSV file.
    Fit(FitArgs),
    /// Dimension-reduced fit: search principal-component subsets for the
    /// lowest-loss k-dimensional ellipsoid.
    Reduce(ReduceArgs),
    /// Generate a dataset from the Ellipsoid-Gaussian model.
    Simulate(SimulateArgs),
    /// Run a simulate-and-fit experiment grid from a JSON config.
    Benchmark(BenchmarkArgs),
    /// Cluster points by alternating ellipsoid fits and reassignment.
    Cluster(ClusterArgs),
}

#[derive(Args)]
struct ToleranceArgs {
    /// Gradient tolerance of the solver.
    #[arg(long, default_value_t = 1e-8)]
    gtol: f64,
    /// Cost tolerance of the solver.
    #[arg(long, default_value_t = 1e-8)]
    ftol: f64,
    /// Step tolerance of the solver.
    #[arg(long, default_value_t = 1e-8)]
    xtol: f64,
    /// Iteration cap of the solver.
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
}

impl ToleranceArgs {
    fn to_options(&self) -> SolveOptions {
        SolveOptions {
            gtol: self.gtol,
            ftol: self.ftol,
            xtol: self.xtol,
            max_iterations: self.max_iter,
            initial_trust_radius: None,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV (rows are points; a non-numeric first line is a header).
    #[arg(long)]
    input: PathBuf,
    /// Feasible-box weight for the center rectangle.
    #[arg(long, default_value_t = DEFAULT_WEIGHT)]
    w: f64,
    /// Fit a k-dimensional ellipsoid instead of a full-dimensional one.
    #[arg(long)]
    dim: Option<usize>,
    /// 1-based principal-component columns for --dim, e.g. "1,3".
    #[arg(long, value_delimiter = ',')]
    columns: Option<Vec<usize>>,
    #[command(flatten)]
    tolerances: ToleranceArgs,
    /// Output JSON path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long)]
    input: PathBuf,
    /// Target dimension k of the reduced ellipsoid.
    #[arg(long)]
    dim: usize,
    #[arg(long, default_value_t = DEFAULT_WEIGHT)]
    w: f64,
    /// Candidate column sets, 1-based, ';'-separated: "1,2;1,3;2,3".
    /// Defaults to all k-subsets of the first min(p, k+2) components.
    #[arg(long)]
    candidates: Option<String>,
    /// Enumerate all k-subsets of all p components instead.
    #[arg(long)]
    all_candidates: bool,
    #[command(flatten)]
    tolerances: ToleranceArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Ambient dimension.
    #[arg(long, default_value_t = 3)]
    p: usize,
    /// Number of samples.
    #[arg(long, default_value_t = 18)]
    n: usize,
    /// von Mises-Fisher concentration; 0 is uniform.
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    /// Noise standard deviation as a fraction of the longest axis diameter.
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    /// Axis ratio (longest / shortest), at least 1.
    #[arg(long, default_value_t = 2.0)]
    ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output prefix: writes `<prefix>.csv` and `<prefix>_truth.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Grid config JSON (see the benchmark section of the README).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for trials.csv, summary.csv, timings.csv and SVGs.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    input: PathBuf,
    /// Number of clusters.
    #[arg(long)]
    k: usize,
    /// Maximum fit/reassign steps.
    #[arg(long, default_value_t = 20)]
    steps: usize,
    #[arg(long, default_value_t = DEFAULT_WEIGHT)]
    w: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output prefix: writes `<prefix>_assignments.csv`,
    /// `<prefix>_ellipsoids.json` and, for 2-d input, `<prefix>_overlay.svg`.
    #[arg(long)]
    out: PathBuf,
}

/// Failures mapped to exit codes.
enum CliError {
    /// Bad input, config or I/O: exit 2.
    Input(String),
    /// The fit itself failed: exit 3.
    Fit(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Fit(_) => 3,
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Fit(m) => m,
        }
    }
}

fn fit_error(e: ctef::Error) -> CliError {
    CliError::Fit(e.to_string())
}

fn input_error(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn write_output(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(path) => std::fs::write(path, contents)
            .map_err(|e| input_error(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn parse_columns(columns: &[usize], p: usize) -> Result<Vec<usize>, CliError> {
    columns
        .iter()
        .map(|&c| {
            if c == 0 || c > p {
                Err(CliError::Input(format!("column {c} out of range 1..={p}")))
            } else {
                Ok(c - 1)
            }
        })
        .collect()
}

fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    let (data, _) = csvio::read_matrix(&args.input).map_err(input_error)?;
    let p = data.ncols();
    let opts = args.tolerances.to_options();
    let result = match args.dim {
        None => pipeline::fit(&data, args.w, &opts).map_err(fit_error)?,
        Some(k) => {
            let columns = match &args.columns {
                Some(cols) => parse_columns(cols, p)?,
                None => (0..k.min(p)).collect(),
            };
            pipeline::fit_reduced(&data, k, &columns, args.w, &opts).map_err(fit_error)?
        }
    };
    let report = FitReport::from_fit(&result, args.w);
    write_output(args.out.as_deref(), &report::to_json_string(&report))
}

fn cmd_reduce(args: &ReduceArgs) -> Result<(), CliError> {
    let (data, _) = csvio::read_matrix(&args.input).map_err(input_error)?;
    let p = data.ncols();
    let opts = args.tolerances.to_options();
    let candidates: Vec<Vec<usize>> = match &args.candidates {
        Some(spec) => spec
            .split(';')
            .map(|set| {
                let cols: Vec<usize> = set
                    .split(',')
                    .map(|c| {
                        c.trim()
                            .parse::<usize>()
                            .map_err(|_| CliError::Input(format!("bad column {c:?}")))
                    })
                    .collect::<Result<_, _>>()?;
                parse_columns(&cols, p)
            })
            .collect::<Result<_, _>>()?,
        None if args.all_candidates => all_subsets(p, args.dim),
        None => pipeline::default_candidates(p, args.dim),
    };
    let selection = pipeline::select_subspace(&data, args.dim, args.w, &candidates, &opts)
        .map_err(fit_error)?;

    #[derive(serde::Serialize)]
    struct ReduceReport {
        schema_version: u32,
        best_columns: Vec<usize>,
        candidates: Vec<CandidateLine>,
        best: FitReport,
    }
    #[derive(serde::Serialize)]
    struct CandidateLine {
        columns: Vec<usize>,
        loss: Option<f64>,
        error: Option<String>,
    }
    let out = ReduceReport {
        schema_version: report::SCHEMA_VERSION,
        best_columns: selection.best_columns.iter().map(|c| c + 1).collect(),
        candidates: selection
            .candidates
            .iter()
            .map(|c| CandidateLine {
                columns: c.columns.iter().map(|x| x + 1).collect(),
                loss: c.loss,
                error: c.error.clone(),
            })
            .collect(),
        best: FitReport::from_fit(&selection.best, args.w),
    };
    write_output(args.out.as_deref(), &report::to_json_string(&out))
}

/// All k-subsets of {0, .., p-1} in lexicographic order.
fn all_subsets(p: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn recurse(start: usize, p: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..p {
            current.push(i);
            recurse(i + 1, p, k, current, out);
            current.pop();
        }
    }
    recurse(0, p, k, &mut current, &mut out);
    out
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let spec = SimSpec::new(args.p, args.n, args.tau, args.noise, args.ratio, args.seed);
    spec.validate().map_err(input_error)?;
    let mut rng = spec.rng();
    let (data, truth) = simulate(&spec, &mut rng).map_err(fit_error)?;

    let csv_path = args.out.with_extension("csv");
    let truth_path = sibling_with_suffix(&args.out, "_truth.json");
    std::fs::write(&csv_path, csvio::matrix_to_csv(&data, None))
        .map_err(|e| input_error(format!("cannot write {}: {e}", csv_path.display())))?;
    let truth_report = TruthReport::new(&spec, &truth);
    std::fs::write(&truth_path, report::to_json_string(&truth_report))
        .map_err(|e| input_error(format!("cannot write {}: {e}", truth_path.display())))?;
    eprintln!(
        "wrote {} ({} x {}) and {}",
        csv_path.display(),
        data.nrows(),
        data.ncols(),
        truth_path.display()
    );
    Ok(())
}

fn sibling_with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    name.push_str(suffix);
    prefix.with_file_name(name)
}

fn cmd_benchmark(args: &BenchmarkArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| input_error(format!("cannot read {}: {e}", args.config.display())))?;
    let config: GridConfig = serde_json::from_str(&text)
        .map_err(|e| input_error(format!("{}: {e}", args.config.display())))?;
    config.validate().map_err(CliError::Input)?;

    let outcome = bench::run_grid(&config).map_err(CliError::Input)?;
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| input_error(format!("cannot create {}: {e}", args.out_dir.display())))?;

    let write = |name: &str, contents: &str| -> Result<(), CliError> {
        let path = args.out_dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| input_error(format!("cannot write {}: {e}", path.display())))
    };
    write("trials.csv", &bench::trials_csv(&outcome.records))?;
    write("timings.csv", &bench::timings_csv(&outcome.records))?;
    write("summary.csv", &bench::summary_csv(&outcome.summaries))?;

    let labels: Vec<String> = config.values.iter().map(|v| v.to_string()).collect();
    for metric in ["offset", "shape"] {
        let stats: Vec<Option<svg::BoxStats>> = config
            .values
            .iter()
            .map(|&value| {
                outcome
                    .summaries
                    .iter()
                    .find(|s| s.metric == metric && s.value == value)
                    .and_then(|s| s.stats.clone())
            })
            .collect();
        let title = format!("{metric} error vs {}", config.vary.as_str());
        let doc = svg::box_plot_svg(&title, config.vary.as_str(), &labels, &stats);
        write(&format!("{metric}_{}.svg", config.vary.as_str()), &doc)?;
    }
    let failed = outcome
        .records
        .iter()
        .filter(|r| r.status.starts_with("failed"))
        .count();
    eprintln!(
        "ran {} trials over {} values ({failed} failed); outputs in {}",
        outcome.records.len(),
        config.values.len(),
        args.out_dir.display()
    );
    Ok(())
}

fn cmd_cluster(args: &ClusterArgs) -> Result<(), CliError> {
    let (data, _) = csvio::read_matrix(&args.input).map_err(input_error)?;
    let opts = ClusterOptions {
        max_steps: args.steps,
        weight: args.w,
        ..Default::default()
    };
    let mut rng = ctef::simulate::stream_rng(args.seed, 0);
    let state = cluster::cluster(&data, args.k, &mut rng, &opts).map_err(fit_error)?;

    let assignments_path = sibling_with_suffix(&args.out, "_assignments.csv");
    let mut assignments_csv = String::from("point,cluster\n");
    for (i, &a) in state.assignments.iter().enumerate() {
        assignments_csv.push_str(&format!("{i},{a}\n"));
    }
    std::fs::write(&assignments_path, assignments_csv)
        .map_err(|e| input_error(format!("cannot write {}: {e}", assignments_path.display())))?;

    let cluster_report = ClusterReport {
        schema_version: report::SCHEMA_VERSION,
        n_clusters: args.k,
        steps: state.steps,
        objective: state.objective,
        ellipsoids: state
            .ellipsoids
            .iter()
            .map(|e| e.as_ref().map(|fit| FitReport::from_fit(fit, args.w)))
            .collect(),
        warnings: state.warnings.clone(),
    };
    let json_path = sibling_with_suffix(&args.out, "_ellipsoids.json");
    std::fs::write(&json_path, report::to_json_string(&cluster_report))
        .map_err(|e| input_error(format!("cannot write {}: {e}", json_path.display())))?;

    if data.ncols() == 2 {
        let ellipses: Vec<Option<&ctef::Ellipsoid>> = state
            .ellipsoids
            .iter()
            .map(|e| e.as_ref().map(|fit| &fit.ellipsoid_original))
            .collect();
        let doc = svg::cluster_scatter_svg(&data, &state.assignments, &ellipses);
        let svg_path = sibling_with_suffix(&args.out, "_overlay.svg");
        std::fs::write(&svg_path, doc)
            .map_err(|e| input_error(format!("cannot write {}: {e}", svg_path.display())))?;
    }
    eprintln!(
        "clustered {} points into {} groups in {} steps",
        data.nrows(),
        args.k,
        state.steps
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Reduce(args) => cmd_reduce(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Benchmark(args) => cmd_benchmark(args),
        Command::Cluster(args) => cmd_cluster(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
