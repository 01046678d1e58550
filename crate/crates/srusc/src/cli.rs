//! `srusc` command-line interface.
//!
//! Exit codes: 0 on success, 2 on argument errors, 1 on runtime errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use srusc_core::metrics::evaluate;
use srusc_core::pipeline::{
    estimate_k_multiscale, run_baseline, run_srusc, BaselineParams, ClusterCount, Method, RunReport, SigmaChoice,
    SruscConfig, DEFAULT_K_MAX,
};
use srusc_core::spectral::EigenParams;
use srusc_core::synth::{self, Dataset, SynthSpec};

use crate::bench::{bench_csv, bench_scaling, time_ratios, BenchConfig};
use crate::formats::{load_cube, load_labels, save_cube, save_labels, write_json, write_text};
use crate::report::{dataset_name, eigencurves_csv, metrics_json, provenance_json, run_report_json};
use crate::Error;

#[derive(Debug, Parser)]
#[command(name = "srusc", version, about = "Spatially regularized ultrametric spectral clustering for hyperspectral images")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cube with ground truth.
    Synth(SynthArgs),
    /// Cluster a cube with SRUSC.
    Cluster(ClusterArgs),
    /// Sweep sigma and estimate the number of clusters.
    Eigengap(EigengapArgs),
    /// Run a baseline clustering method.
    Baseline(BaselineArgs),
    /// Score a predicted label raster against ground truth.
    Eval(EvalArgs),
    /// Time graph, ultrametric and Laplacian construction at growing sizes.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DatasetArg {
    FourSpheres,
    ThreeCubes,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    pub dataset: DatasetArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Pixel pairs exchanged between cubes 1 and 3 (three-cubes only).
    #[arg(long, default_value_t = synth::DEFAULT_SWAP_COUNT)]
    pub swap_count: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScaleArgs {
    /// Fixed affinity scale; omit to select it from the grid.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Comma-separated scales to sweep (default: derived from the data).
    #[arg(long, value_delimiter = ',')]
    pub sigma_grid: Option<Vec<f64>>,
    /// Eigensolver residual tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl ScaleArgs {
    fn sigma(&self) -> SigmaChoice {
        self.sigma.map_or(SigmaChoice::Auto, SigmaChoice::Fixed)
    }

    fn eigen(&self) -> EigenParams {
        EigenParams {
            tol: self.tol,
            ..EigenParams::default()
        }
    }
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("count").required(true).args(["k_clusters", "estimate_k"]))]
pub struct ClusterArgs {
    /// Cube path without extension (`<input>.json` + `<input>.raw`).
    #[arg(long)]
    pub input: PathBuf,
    /// Side length of the spatial window, in pixels.
    #[arg(long)]
    pub radius: usize,
    #[arg(long)]
    pub k_clusters: Option<usize>,
    /// Estimate the number of clusters with the multiscale eigengap.
    #[arg(long)]
    pub estimate_k: bool,
    #[arg(long, default_value_t = DEFAULT_K_MAX)]
    pub kmax: usize,
    /// Neighbors per pixel in the spectral graph (default: max(10, ceil(2 ln n))).
    #[arg(long)]
    pub knn_k: Option<usize>,
    #[command(flatten)]
    pub scale: ScaleArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EigengapArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub radius: usize,
    #[arg(long, default_value_t = DEFAULT_K_MAX)]
    pub kmax: usize,
    #[arg(long)]
    pub knn_k: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub sigma_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Km,
    PcaKm,
    EuclideanSc,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub method: MethodArg,
    #[arg(long)]
    pub k_clusters: usize,
    #[command(flatten)]
    pub scale: ScaleArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Directory for `metrics.json`; the metrics are always printed.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated pixel counts, each a multiple of 3 * cols.
    #[arg(long, value_delimiter = ',', default_value = "1500,3000,6000")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    pub cols: usize,
    #[arg(long, default_value_t = 15)]
    pub radius: usize,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_argument_error() {
                2
            } else {
                1
            }
        }
    }
}

/// Runs a parsed command, on a dedicated pool when `--threads` is given.
pub fn execute(cli: Cli) -> Result<(), Error> {
    match cli.threads {
        Some(0) => Err(Error::Argument("--threads must be at least 1".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Argument(e.to_string()))?
            .install(|| dispatch(cli.command)),
        None => dispatch(cli.command),
    }
}

fn dispatch(command: Command) -> Result<(), Error> {
    match command {
        Command::Synth(a) => synth_cmd(&a),
        Command::Cluster(a) => cluster_cmd(&a),
        Command::Eigengap(a) => eigengap_cmd(&a),
        Command::Baseline(a) => baseline_cmd(&a),
        Command::Eval(a) => eval_cmd(&a),
        Command::Bench(a) => bench_cmd(&a),
    }
}

/// Writes to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($t:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

fn out_dir(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn synth_cmd(a: &SynthArgs) -> Result<(), Error> {
    let dataset = match a.dataset {
        DatasetArg::FourSpheres => Dataset::FourSpheres,
        DatasetArg::ThreeCubes => Dataset::ThreeCubes,
    };
    let data = synth::generate(SynthSpec {
        dataset,
        seed: a.seed,
        swap_count: a.swap_count,
    })?;
    out_dir(&a.out)?;
    save_cube(&a.out.join("cube"), &data.cube)?;
    save_labels(&a.out.join("gt.csv"), &data.labels)?;
    write_json(&a.out.join("provenance.json"), &provenance_json(&data))?;
    say!(
        "wrote {} ({}x{}x{}) to {}",
        dataset_name(dataset),
        data.cube.rows(),
        data.cube.cols(),
        data.cube.bands(),
        a.out.display()
    );
    Ok(())
}

fn write_run(out: &Path, report: &RunReport) -> Result<(), Error> {
    out_dir(out)?;
    save_labels(&out.join("labels.csv"), &report.labels)?;
    write_json(&out.join("report.json"), &run_report_json(report))?;
    if !report.eigencurves.is_empty() {
        write_text(&out.join("eigencurves.csv"), &eigencurves_csv(&report.eigencurves))?;
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn cluster_cmd(a: &ClusterArgs) -> Result<(), Error> {
    let cube = load_cube(&a.input)?;
    let clusters = match a.k_clusters {
        Some(k) => ClusterCount::Fixed(k),
        None => ClusterCount::Estimate,
    };
    let config = SruscConfig {
        knn_k: a.knn_k,
        radius: a.radius,
        sigma: a.scale.sigma(),
        clusters,
        sigma_grid: a.scale.sigma_grid.clone(),
        k_max: a.kmax,
        eigen: a.scale.eigen(),
        seed: a.scale.seed,
    };
    let report = run_srusc(&cube, &config)?;
    write_run(&a.out, &report)?;
    say!(
        "clustered {} pixels into {} clusters (sigma {:.6e})",
        cube.n_pixels(),
        report.k_used,
        report.sigma_used.unwrap_or(f64::NAN)
    );
    Ok(())
}

fn eigengap_cmd(a: &EigengapArgs) -> Result<(), Error> {
    let cube = load_cube(&a.input)?;
    let config = SruscConfig {
        knn_k: a.knn_k,
        radius: a.radius,
        sigma: SigmaChoice::Auto,
        clusters: ClusterCount::Estimate,
        sigma_grid: a.sigma_grid.clone(),
        k_max: a.kmax,
        eigen: EigenParams {
            tol: a.tol,
            ..EigenParams::default()
        },
        seed: a.seed,
    };
    let report = run_srusc(&cube, &config)?;
    let (k_hat, sigma_star) = estimate_k_multiscale(&report.eigencurves, a.kmax)?;
    write_run(&a.out, &report)?;
    write_json(
        &a.out.join("eigengap.json"),
        &json!({
            "k_hat": k_hat,
            "sigma_star": sigma_star,
            "k_max": a.kmax,
            "sigma_grid": report.sigma_grid,
        }),
    )?;
    say!("estimated K = {k_hat} at sigma {sigma_star:.6e}");
    Ok(())
}

fn baseline_cmd(a: &BaselineArgs) -> Result<(), Error> {
    let cube = load_cube(&a.input)?;
    let method = match a.method {
        MethodArg::Km => Method::Km,
        MethodArg::PcaKm => Method::PcaKm,
        MethodArg::EuclideanSc => Method::EuclideanSc,
    };
    let params = BaselineParams {
        seed: a.scale.seed,
        sigma: a.scale.sigma(),
        sigma_grid: a.scale.sigma_grid.clone(),
        eigen: a.scale.eigen(),
    };
    let report = run_baseline(&cube, method, a.k_clusters, &params)?;
    write_run(&a.out, &report)?;
    say!("{} finished with {} clusters", method.name(), report.k_used);
    Ok(())
}

fn eval_cmd(a: &EvalArgs) -> Result<(), Error> {
    let pred = load_labels(&a.pred)?;
    let gt = load_labels(&a.gt)?;
    let metrics = metrics_json(&evaluate(&pred, &gt)?);
    if let Some(out) = &a.out {
        out_dir(out)?;
        write_json(&out.join("metrics.json"), &metrics)?;
    }
    say!("{}", serde_json::to_string_pretty(&metrics)?);
    Ok(())
}

fn bench_cmd(a: &BenchArgs) -> Result<(), Error> {
    let cfg = BenchConfig {
        sizes: a.sizes.clone(),
        cols: a.cols,
        radius: a.radius,
        reps: a.reps,
        seed: a.seed,
    };
    let rows = bench_scaling(&cfg)?;
    out_dir(&a.out)?;
    let csv = bench_csv(&rows);
    write_text(&a.out.join("bench.csv"), &csv)?;
    write_json(
        &a.out.join("bench.json"),
        &json!({
            "radius": a.radius,
            "cols": a.cols,
            "reps": a.reps,
            "seed": a.seed,
            "sizes": rows.iter().map(|r| json!({
                "n": r.n,
                "knn_k": r.knn_k,
                "knn_secs": r.knn_secs,
                "upd_secs": r.upd_secs,
                "laplacian_secs": r.laplacian_secs,
                "nnz_w": r.nnz_w,
                "r2n": r.nnz_bound(),
            })).collect::<Vec<_>>(),
            "upd_laplacian_ratios": time_ratios(&rows),
        }),
    )?;
    say!("{}", csv.trim_end());
    Ok(())
}
