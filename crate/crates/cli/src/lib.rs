//! Command-line driver. Every subcommand reads its inputs, writes its
//! artifacts, and drops a run manifest next to the primary output; replaying
//! the manifest with `--config` reproduces the run byte for byte.
//!
//! Exit codes: 0 success, 1 validation error, 2 numerical failure.

mod report;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use fkuq_core::connectome::{
    filter_outlier_nodes, generate_synthetic, ingest_scaled_scan, load_scan_csv, project_scan,
    save_scan_csv, ConnectomeError, SyntheticConfig,
};
use fkuq_core::field::{assemble_reaction_vector, FieldError, RegionTable};
use fkuq_core::forward_mc::{mc_convergence, mc_estimate, McError, MomentSeries};
use fkuq_core::mcmc::{diagnostics, posterior_summary, run_mcmc, McmcError};
use fkuq_core::model::ModelError;
use fkuq_core::qoi::{region_volumes, QoiError};
use fkuq_core::solver::{solve_trajectory, SolverError};
use fkuq_core::sparse_grid::{sc_convergence, sc_moments, EvalCache, ScError};
use fkuq_core::{
    CalibrationModel, Connectome, ForwardModel, GridConfig, KnotFamily, LevelToKnots, McmcConfig,
    NodeField, ParameterVector, SolverConfig, SparseGrid, VolumeNormalization,
};

/// Validation errors exit with 1, numerical breakdowns with 2. The split
/// follows the core error taxonomy: misuse of the interface versus a solve
/// that went bad on legitimate inputs.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
}

impl From<ConnectomeError> for CliError {
    fn from(e: ConnectomeError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<QoiError> for CliError {
    fn from(e: QoiError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::NonFinite { .. }
            | SolverError::NearSingular { .. }
            | SolverError::NoConvergence { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<McmcError> for CliError {
    fn from(e: McmcError) -> Self {
        match e {
            McmcError::InitialModelFailure(_) | McmcError::NonFinite(_) => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<McError> for CliError {
    fn from(e: McError) -> Self {
        match e {
            McError::Model { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ScError> for CliError {
    fn from(e: ScError) -> Self {
        match e {
            ScError::Model { .. } | ScError::NegativeVariance { .. } | ScError::NonFinite(_) => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "fkuq", version, about = "Reaction-diffusion on weighted graphs: simulation, calibration, forward uncertainty")]
struct Cli {
    /// Replay a run manifest; its settings replace every other argument.
    #[arg(long, global = true, value_name = "MANIFEST")]
    config: Option<PathBuf>,

    /// Cap the evaluation thread pool (default: FKUQ_THREADS, then all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Serialize, Deserialize, Debug, Clone)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Generate a random connected multi-region network, optionally with a
    /// two-snapshot calibration fixture.
    GenSynthetic(GenSyntheticArgs),
    /// Run one forward trajectory with fixed reaction coefficients.
    Simulate(SimulateArgs),
    /// Calibrate region-wise reaction coefficients from two scans.
    Calibrate(CalibrateArgs),
    /// Monte Carlo forward uncertainty propagation.
    UqMc(UqMcArgs),
    /// Sparse-grid collocation forward uncertainty propagation.
    UqSc(UqScArgs),
    /// Monte Carlo error sweep against a reference moment file.
    UqMcConvergence(UqMcConvergenceArgs),
    /// Collocation error sweep against a high-level reference grid.
    UqScConvergence(UqScConvergenceArgs),
    /// Emit plot-ready bundles from existing artifacts.
    Report(report::ReportArgs),
}

#[derive(Args, Serialize, Deserialize, Debug, Clone)]
struct GenSyntheticArgs {
    #[arg(long, default_value_t = 7)]
    regions: u32,
    #[arg(long, default_value_t = 6)]
    nodes_per_region: u32,
    /// Edge probability inside a region.
    #[arg(long, default_value_t = 0.6)]
    intra_density: f64,
    /// Edge probability between regions.
    #[arg(long, default_value_t = 0.15)]
    inter_density: f64,
    #[arg(long, default_value_t = 1.0)]
    weight_scale: f64,
    #[arg(long, default_value_t = 0.5)]
    volume_min: f64,
    #[arg(long, default_value_t = 2.0)]
    volume_max: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Also write scan1.csv, scan2.csv and truth.json next to the graph:
    /// two snapshots of a trajectory driven by the truth-table means.
    #[arg(long)]
    #[serde(default)]
    with_scans: bool,
    /// Years between the two fixture snapshots.
    #[arg(long, default_value_t = 7.0)]
    horizon: f64,
    /// Time step for the fixture trajectory.
    #[arg(long, default_value_t = 0.2)]
    dt: f64,
    /// Region table whose means drive the fixture (default: built-in).
    #[arg(long)]
    #[serde(default)]
    truth_table: Option<PathBuf>,
    /// Output graph JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone)]
struct SimulateArgs {
    #[arg(long)]
    graph: PathBuf,
    /// One reaction coefficient for every region.
    #[arg(long)]
    #[serde(default)]
    alpha: Option<f64>,
    /// Region table whose means give per-region coefficients.
    #[arg(long)]
    #[serde(default)]
    alpha_table: Option<PathBuf>,
    /// Initial scan CSV (node_id,value).
    #[arg(long)]
    #[serde(default)]
    c0: Option<PathBuf>,
    /// Constant initial concentration in [0, 1].
    #[arg(long)]
    #[serde(default)]
    c0_const: Option<f64>,
    /// Treat scan values as already in [0, 1]; skip the affine rescale.
    #[arg(long)]
    #[serde(default)]
    already_scaled: bool,
    #[arg(long = "T", default_value_t = 20.0)]
    t_final: f64,
    #[arg(long, default_value_t = 0.2)]
    dt: f64,
    /// Comma-separated sample times.
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = vec![5.0, 10.0, 15.0, 20.0])]
    times: Vec<f64>,
    #[arg(long, value_enum, default_value_t = NormArg::PerRegion)]
    normalization: NormArg,
    /// Output QoI CSV (time,global,region_1..R).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone)]
struct CalibrateArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    scan1: PathBuf,
    #[arg(long)]
    scan2: PathBuf,
    #[arg(long)]
    #[serde(default)]
    already_scaled: bool,
    /// Years between the two scans.
    #[arg(long, default_value_t = 7.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0.2)]
    dt: f64,
    /// Nodes whose second scan drops by more than this fraction are
    /// excluded from the fit (they still diffuse).
    #[arg(long, default_value_t = 0.10)]
    outlier_tol: f64,
    #[arg(long, default_value_t = 100_000)]
    steps: usize,
    #[arg(long, default_value_t = 10_000)]
    burn_in: usize,
    #[arg(long, default_value_t = 0.01)]
    proposal_sigma: f64,
    #[arg(long, default_value_t = 0.1)]
    lik_sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Region table providing the prior box (default: built-in).
    #[arg(long)]
    #[serde(default)]
    prior_table: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = NormArg::PerRegion)]
    normalization: NormArg,
    /// Output region table JSON with posterior mean and variance.
    #[arg(long)]
    out: PathBuf,
    /// Optional full-chain CSV dump (step,p_1..p_R,accepted).
    #[arg(long)]
    #[serde(default)]
    chain_out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone)]
struct UqMcArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Region table JSON with posterior mean and variance per region.
    #[arg(long)]
    posterior: PathBuf,
    #[arg(long)]
    #[serde(default)]
    c0: Option<PathBuf>,
    #[arg(long)]
    #[serde(default)]
    c0_const: Option<f64>,
    #[arg(long)]
    #[serde(default)]
    already_scaled: bool,
    #[arg(long = "T", default_value_t = 20.0)]
    t_final: f64,
    #[arg(long, default_value_t = 0.02)]
    dt: f64,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = vec![5.0, 10.0, 15.0, 20.0])]
    times: Vec<f64>,
    #[arg(long)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = NormArg::PerRegion)]
    normalization: NormArg,
    /// Output moment CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone)]
struct UqScArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    posterior: PathBuf,
    #[arg(long)]
    #[serde(default)]
    c0: Option<PathBuf>,
    #[arg(long)]
    #[serde(default)]
    c0_const: Option<f64>,
    #[arg(long)]
    #[serde(default)]
    already_scaled: bool,
    #[arg(long = "T", default_value_t = 20.0)]
    t_final: f64,
    #[arg(long, default_value_t = 0.02)]
    dt: f64,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = vec![5.0, 10.0, 15.0, 20.0])]
    times: Vec<f64>,
    /// Sparse-grid approximation level.
    #[arg(long)]
    level: usize,
    #[arg(long, value_enum, default_value_t = RuleArg::Leja)]
    rule: RuleArg,
    #[arg(long, value_enum, default_value_t = GrowthArg::TwoStep)]
    lev2knots: GrowthArg,
    #[arg(long, value_enum, default_value_t = NormArg::PerRegion)]
    normalization: NormArg,
    /// Output moment CSV.
    #[arg(long)]
    out: PathBuf,
    /// Optional grid dump (point_index,p_1..p_N,weight).
    #[arg(long)]
    #[serde(default)]
    grid_out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone)]
struct UqMcConvergenceArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    posterior: PathBuf,
    #[arg(long)]
    #[serde(default)]
    c0: Option<PathBuf>,
    #[arg(long)]
    #[serde(default)]
    c0_const: Option<f64>,
    #[arg(long)]
    #[serde(default)]
    already_scaled: bool,
    #[arg(long = "T", default_value_t = 20.0)]
    t_final: f64,
    #[arg(long, default_value_t = 0.02)]
    dt: f64,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = vec![5.0, 10.0, 15.0, 20.0])]
    times: Vec<f64>,
    /// Strictly increasing sample counts, e.g. 100,1000,10000.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    counts: Vec<usize>,
    /// Reference moment CSV (from a larger run or a collocation grid).
    #[arg(long)]
    reference: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = NormArg::PerRegion)]
    normalization: NormArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone)]
struct UqScConvergenceArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    posterior: PathBuf,
    #[arg(long)]
    #[serde(default)]
    c0: Option<PathBuf>,
    #[arg(long)]
    #[serde(default)]
    c0_const: Option<f64>,
    #[arg(long)]
    #[serde(default)]
    already_scaled: bool,
    #[arg(long = "T", default_value_t = 20.0)]
    t_final: f64,
    #[arg(long, default_value_t = 0.02)]
    dt: f64,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = vec![5.0, 10.0, 15.0, 20.0])]
    times: Vec<f64>,
    /// Levels to sweep: an inclusive range "3..8" or a comma list "3,4,5".
    #[arg(long, default_value = "3..8")]
    levels: String,
    /// Reference grid level; must exceed every swept level.
    #[arg(long, default_value_t = 9)]
    reference_level: usize,
    #[arg(long, value_enum, default_value_t = RuleArg::Leja)]
    rule: RuleArg,
    #[arg(long, value_enum, default_value_t = GrowthArg::TwoStep)]
    lev2knots: GrowthArg,
    #[arg(long, value_enum, default_value_t = NormArg::PerRegion)]
    normalization: NormArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
enum RuleArg {
    Leja,
    GaussHermite,
}

impl From<RuleArg> for KnotFamily {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Leja => KnotFamily::WeightedLeja,
            RuleArg::GaussHermite => KnotFamily::GaussHermite,
        }
    }
}

#[derive(ValueEnum, Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
enum GrowthArg {
    Linear,
    TwoStep,
}

impl From<GrowthArg> for LevelToKnots {
    fn from(g: GrowthArg) -> Self {
        match g {
            GrowthArg::Linear => LevelToKnots::Linear,
            GrowthArg::TwoStep => LevelToKnots::TwoStep,
        }
    }
}

#[derive(ValueEnum, Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
enum NormArg {
    PerRegion,
    TotalVolume,
}

impl From<NormArg> for VolumeNormalization {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::PerRegion => VolumeNormalization::PerRegion,
            NormArg::TotalVolume => VolumeNormalization::TotalVolume,
        }
    }
}

/// Everything needed to reproduce a run. The `command` block is the parsed
/// subcommand, so a manifest doubles as a config file.
#[derive(Serialize, Deserialize, Debug)]
struct Manifest {
    version: String,
    command: Command,
}

/// Entry point used by both the binary and the integration tests.
/// Returns the process exit code instead of calling `exit` so tests can
/// drive it in-process.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprintln!("error: validation: {}", single_line(&e.to_string()));
            return 1;
        }
    };

    let command = if let Some(path) = &cli.config {
        match load_manifest(path) {
            Ok(m) => m.command,
            Err(e) => return report_error(e),
        }
    } else if let Some(cmd) = cli.command {
        cmd
    } else {
        eprintln!("error: validation: no subcommand given (see --help)");
        return 1;
    };

    let cap = cli
        .threads
        .or_else(|| std::env::var("FKUQ_THREADS").ok().and_then(|s| s.parse().ok()));
    let outcome = match cap {
        Some(0) => Err(CliError::Validation("--threads must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&command)),
            Err(e) => Err(CliError::Validation(format!("thread pool: {e}"))),
        },
        None => dispatch(&command),
    };

    match outcome {
        Ok(()) => 0,
        Err(e) => report_error(e),
    }
}

fn report_error(e: CliError) -> i32 {
    match e {
        CliError::Validation(m) => {
            eprintln!("error: validation: {}", single_line(&m));
            1
        }
        CliError::Numerical(m) => {
            eprintln!("error: numerical: {}", single_line(&m));
            2
        }
    }
}

fn single_line(msg: &str) -> String {
    msg.trim()
        .trim_start_matches("error: ")
        .replace('\n', "; ")
}

fn load_manifest(path: &Path) -> Result<Manifest, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn dispatch(cmd: &Command) -> Result<(), CliError> {
    match cmd {
        Command::GenSynthetic(a) => exec_gen_synthetic(a)?,
        Command::Simulate(a) => exec_simulate(a)?,
        Command::Calibrate(a) => exec_calibrate(a)?,
        Command::UqMc(a) => exec_uq_mc(a)?,
        Command::UqSc(a) => exec_uq_sc(a)?,
        Command::UqMcConvergence(a) => exec_uq_mc_convergence(a)?,
        Command::UqScConvergence(a) => exec_uq_sc_convergence(a)?,
        Command::Report(a) => report::exec_report(a)?,
    }
    let mpath = manifest_path(cmd);
    write_manifest(&mpath, cmd)?;
    println!("manifest: {}", mpath.display());
    Ok(())
}

fn manifest_path(cmd: &Command) -> PathBuf {
    let primary = match cmd {
        Command::GenSynthetic(a) => &a.out,
        Command::Simulate(a) => &a.out,
        Command::Calibrate(a) => &a.out,
        Command::UqMc(a) => &a.out,
        Command::UqSc(a) => &a.out,
        Command::UqMcConvergence(a) => &a.out,
        Command::UqScConvergence(a) => &a.out,
        Command::Report(a) => return a.out_dir.join("report.manifest.json"),
    };
    let mut s = primary.as_os_str().to_os_string();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn write_manifest(path: &Path, cmd: &Command) -> Result<(), CliError> {
    let m = Manifest { version: env!("CARGO_PKG_VERSION").to_string(), command: cmd.clone() };
    let mut text = serde_json::to_string_pretty(&m)
        .map_err(|e| CliError::Validation(format!("manifest: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

// ---------------------------------------------------------------- shared

fn load_graph(path: &Path) -> Result<Connectome, CliError> {
    Ok(Connectome::load(path)?)
}

/// Initial concentration from exactly one of a scan file or a constant.
fn initial_field(
    conn: &Connectome,
    c0: &Option<PathBuf>,
    c0_const: Option<f64>,
    already_scaled: bool,
) -> Result<NodeField, CliError> {
    match (c0, c0_const) {
        (Some(path), None) => {
            let raw = load_scan_csv(path, conn.num_nodes())?;
            if already_scaled {
                Ok(ingest_scaled_scan(raw)?)
            } else {
                Ok(project_scan(&raw))
            }
        }
        (None, Some(v)) => {
            if !(0.0..=1.0).contains(&v) {
                return Err(CliError::Validation(format!(
                    "--c0-const must lie in [0, 1], got {v}"
                )));
            }
            Ok(NodeField::constant(v, conn.num_nodes()))
        }
        _ => Err(CliError::Validation(
            "pass exactly one of --c0 / --c0-const".into(),
        )),
    }
}

fn posterior_table(path: &Path, region_count: u32) -> Result<RegionTable, CliError> {
    let table = RegionTable::load(path)?;
    if table.len() != region_count as usize {
        return Err(CliError::Validation(format!(
            "{}: {} rows but the graph has {} regions",
            path.display(),
            table.len(),
            region_count
        )));
    }
    Ok(table)
}

fn forward_model(
    conn: Connectome,
    c0: NodeField,
    t_final: f64,
    dt: f64,
    times: &[f64],
    norm: NormArg,
) -> ForwardModel {
    ForwardModel::new(conn, c0, SolverConfig::new(dt, t_final, times.to_vec()), norm.into())
}

/// "3..8" (inclusive) or "3,5,7".
fn parse_levels(expr: &str) -> Result<Vec<usize>, CliError> {
    let bad = |m: String| CliError::Validation(format!("--levels {expr:?}: {m}"));
    if let Some((lo, hi)) = expr.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad("bad range start".into()))?;
        let hi: usize = hi.trim().parse().map_err(|_| bad("bad range end".into()))?;
        if lo > hi {
            return Err(bad(format!("empty range {lo}..{hi}")));
        }
        return Ok((lo..=hi).collect());
    }
    let levels: Vec<usize> = expr
        .split(',')
        .map(|t| t.trim().parse().map_err(|_| bad(format!("bad level {t:?}"))))
        .collect::<Result<_, _>>()?;
    if levels.is_empty() {
        return Err(bad("no levels".into()));
    }
    Ok(levels)
}

// ------------------------------------------------------------- commands

fn exec_gen_synthetic(a: &GenSyntheticArgs) -> Result<(), CliError> {
    let cfg = SyntheticConfig {
        regions: a.regions,
        nodes_per_region: a.nodes_per_region,
        intra_density: a.intra_density,
        inter_density: a.inter_density,
        weight_scale: a.weight_scale,
        volume_range: (a.volume_min, a.volume_max),
    };
    let conn = generate_synthetic(&cfg, a.seed)?;
    conn.save(&a.out)?;
    println!(
        "wrote {} ({} nodes, {} edges, {} regions)",
        a.out.display(),
        conn.num_nodes(),
        conn.edges.len(),
        conn.region_count
    );

    if a.with_scans {
        let table = match &a.truth_table {
            Some(p) => posterior_table(p, a.regions)?,
            None if a.regions == 7 => RegionTable::seven_lobe_reference(),
            None => RegionTable::uniform_default(a.regions),
        };
        let truth = ParameterVector(table.posterior()?.mu.clone());
        // Stream 0xF1 keeps the fixture noise independent of the graph draw.
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        rng.set_stream(0xF1);
        let c0: Vec<f64> = (0..conn.num_nodes()).map(|_| rng.gen_range(0.02..0.12)).collect();
        let alpha = assemble_reaction_vector(&truth, &conn)?;
        let traj = solve_trajectory(
            &conn.laplacian(),
            &alpha,
            &NodeField::from_vec(c0.clone()),
            &SolverConfig::new(a.dt, a.horizon, vec![a.horizon]),
        )?;
        let dir = a.out.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        let scan2 = traj.states.last().expect("one sample time");
        save_scan_csv(dir.join("scan1.csv"), &c0)?;
        save_scan_csv(dir.join("scan2.csv"), scan2.as_slice())?;
        table.save(dir.join("truth.json"))?;
        println!(
            "wrote scan1.csv, scan2.csv, truth.json in {} ({} years apart; calibrate with --already-scaled)",
            dir.display(),
            a.horizon
        );
    }
    Ok(())
}

fn exec_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let conn = load_graph(&a.graph)?;
    let p: Vec<f64> = match (a.alpha, &a.alpha_table) {
        (Some(v), None) => vec![v; conn.region_count as usize],
        (None, Some(path)) => posterior_table(path, conn.region_count)?.posterior()?.mu,
        _ => {
            return Err(CliError::Validation(
                "pass exactly one of --alpha / --alpha-table".into(),
            ))
        }
    };
    let c0 = initial_field(&conn, &a.c0, a.c0_const, a.already_scaled)?;
    let model = forward_model(conn, c0, a.t_final, a.dt, &a.times, a.normalization);
    let q = model.evaluate_slice(&p)?;
    q.save_csv(&a.out)?;
    let last = q.global.last().copied().unwrap_or(f64::NAN);
    println!(
        "wrote {} ({} sample times, final global mean {last:.4})",
        a.out.display(),
        q.times.len()
    );
    Ok(())
}

fn exec_calibrate(a: &CalibrateArgs) -> Result<(), CliError> {
    let conn = load_graph(&a.graph)?;
    let n = conn.num_nodes();
    let raw1 = load_scan_csv(&a.scan1, n)?;
    let raw2 = load_scan_csv(&a.scan2, n)?;
    let (s1, s2) = if a.already_scaled {
        (ingest_scaled_scan(raw1)?, ingest_scaled_scan(raw2)?)
    } else {
        (project_scan(&raw1), project_scan(&raw2))
    };
    let mask = filter_outlier_nodes(&s1, &s2, a.outlier_tol);
    let excluded = mask.iter().filter(|&&m| !m).count();

    let table = match &a.prior_table {
        Some(p) => posterior_table(p, conn.region_count)?,
        None if conn.region_count == 7 => RegionTable::seven_lobe_reference(),
        None => RegionTable::uniform_default(conn.region_count),
    };
    let bounds = table.bounds()?;

    let model = CalibrationModel::new(
        conn,
        s1,
        Some(mask),
        a.horizon,
        a.dt,
        a.normalization.into(),
    );
    let q_data = model.data_vector(&s2)?;
    let cfg = McmcConfig {
        proposal_sigma: a.proposal_sigma,
        likelihood_sigma: a.lik_sigma,
        steps: a.steps,
        burn_in: a.burn_in,
        seed: a.seed,
        bounds,
        horizon: a.horizon,
    };
    let chain = run_mcmc(|p| model.evaluate(p), &q_data, &cfg)?;
    let post = posterior_summary(&chain, a.burn_in)?;

    let out_table = table.with_posterior(&post);
    out_table.save(&a.out)?;
    if let Some(path) = &a.chain_out {
        chain.save_csv(path)?;
        println!("wrote {}", path.display());
    }

    println!(
        "{} steps, acceptance {:.3}, {} model failures, {excluded} nodes excluded",
        chain.len(),
        chain.acceptance_rate(),
        chain.model_failures
    );
    let mut min_ess = f64::INFINITY;
    for (l, row) in out_table.regions.iter().enumerate() {
        let ess = diagnostics::effective_sample_size(&chain.component(l, a.burn_in));
        min_ess = min_ess.min(ess);
        println!(
            "region {} ({}): mean {:.4}, sd {:.4}",
            l + 1,
            row.name,
            row.mu,
            row.var.sqrt()
        );
    }
    println!("min effective sample size {min_ess:.0}");
    println!("wrote {}", a.out.display());
    Ok(())
}

fn exec_uq_mc(a: &UqMcArgs) -> Result<(), CliError> {
    let conn = load_graph(&a.graph)?;
    let post = posterior_table(&a.posterior, conn.region_count)?.posterior()?;
    let c0 = initial_field(&conn, &a.c0, a.c0_const, a.already_scaled)?;
    let model = forward_model(conn, c0, a.t_final, a.dt, &a.times, a.normalization);
    let m = mc_estimate(|p| model.evaluate(p), &post, a.samples, a.seed)?;
    m.save_csv(&a.out)?;
    println!("{} samples, wrote {}", m.evals, a.out.display());
    Ok(())
}

fn exec_uq_sc(a: &UqScArgs) -> Result<(), CliError> {
    let conn = load_graph(&a.graph)?;
    let post = posterior_table(&a.posterior, conn.region_count)?.posterior()?;
    let c0 = initial_field(&conn, &a.c0, a.c0_const, a.already_scaled)?;
    let config = GridConfig::from_posterior(&post, a.rule.into(), a.lev2knots.into())?;
    let grid = SparseGrid::smolyak(&config, a.level)?;
    println!("level {} grid: {} points", a.level, grid.num_points());
    if let Some(path) = &a.grid_out {
        grid.save_points_csv(path)?;
        println!("wrote {}", path.display());
    }
    let model = forward_model(conn, c0, a.t_final, a.dt, &a.times, a.normalization);
    let m = sc_moments(|p| model.evaluate(p), &grid, None)?;
    m.save_csv(&a.out)?;
    println!("{} model evaluations, wrote {}", m.evals, a.out.display());
    Ok(())
}

fn exec_uq_mc_convergence(a: &UqMcConvergenceArgs) -> Result<(), CliError> {
    let conn = load_graph(&a.graph)?;
    let post = posterior_table(&a.posterior, conn.region_count)?.posterior()?;
    let c0 = initial_field(&conn, &a.c0, a.c0_const, a.already_scaled)?;
    let reference = MomentSeries::load_csv(&a.reference)?;
    let model = forward_model(conn, c0, a.t_final, a.dt, &a.times, a.normalization);
    let conv = mc_convergence(|p| model.evaluate(p), &post, &a.counts, &reference, a.seed)?;
    conv.save_csv(&a.out)?;
    for row in &conv.rows {
        println!(
            "Q={} t={}: mean err {:.3e}, var err {:.3e}",
            row.count, row.time, row.err_mean_global, row.err_var_global
        );
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

fn exec_uq_sc_convergence(a: &UqScConvergenceArgs) -> Result<(), CliError> {
    let conn = load_graph(&a.graph)?;
    let post = posterior_table(&a.posterior, conn.region_count)?.posterior()?;
    let c0 = initial_field(&conn, &a.c0, a.c0_const, a.already_scaled)?;
    let levels = parse_levels(&a.levels)?;
    let max_level = *levels.iter().max().expect("nonempty");
    if a.reference_level <= max_level {
        return Err(CliError::Validation(format!(
            "--reference-level {} must exceed the largest swept level {max_level}",
            a.reference_level
        )));
    }
    let config = GridConfig::from_posterior(&post, a.rule.into(), a.lev2knots.into())?;
    let volumes = region_volumes(&conn, None);
    let model = forward_model(conn, c0, a.t_final, a.dt, &a.times, a.normalization);

    // The cache carries nested-point evaluations from the reference grid
    // into the sweep, so each physical point is solved once.
    let cache = EvalCache::new();
    let ref_grid = SparseGrid::smolyak(&config, a.reference_level)?;
    println!("reference level {}: {} points", a.reference_level, ref_grid.num_points());
    let reference = sc_moments(|p| model.evaluate(p), &ref_grid, Some(&cache))?;
    let conv = sc_convergence(
        |p| model.evaluate(p),
        &config,
        &levels,
        &reference,
        &volumes,
        Some(&cache),
    )?;
    conv.save_csv(&a.out)?;
    for row in &conv.rows {
        println!(
            "level {} ({} points) t={}: mean err {:.3e}, var err {:.3e}",
            row.level, row.num_points, row.time, row.err_mean_global, row.err_var_global
        );
    }
    println!("wrote {}", a.out.display());
    Ok(())
}
