//! Command-line front end.
//!
//! Exit codes: `0` success, `1` I/O failure while writing, `2` unreadable or
//! unparsable input (including usage errors), `3` validation failure, `4`
//! solver failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{ChainError, ChainSolution, Method, SolverSettings};
use crate::detector::{self, DetectorConfig};
use crate::graph::{validate_graph, RegionGraph, TargetDistribution};
use crate::rng;
use crate::sequencer::{plan_sequence, DEFAULT_ROLLOUTS};
use crate::sim::{self, Policy, ScenarioConfig, SimError};

/// Environment variable holding the default worker count.
pub const JOBS_ENV: &str = "ERGOMIX_JOBS";

#[derive(Debug, Parser)]
#[command(name = "ergomix", version, about = "Fast-mixing chains, ergodic sequences and inspection simulations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Design a transition matrix for a target distribution.
    Solve(SolveArgs),
    /// Compare all four methods on random targets.
    BenchSlem(BenchArgs),
    /// Plan a region sequence from a solved chain.
    Sequence(SequenceArgs),
    /// Run the inspection simulation.
    Simulate(SimulateArgs),
    /// Update reference-point beliefs with one batch of observations.
    Detect(DetectArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = SolverSettings::default().max_iterations)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = SolverSettings::default().tolerance)]
    pub tolerance: f64,
    #[arg(long, default_value_t = SolverSettings::default().barrier_growth)]
    pub barrier_growth: f64,
    #[arg(long, default_value_t = SolverSettings::default().restarts)]
    pub restarts: usize,
}

impl SolverArgs {
    fn settings(&self, seed: u64) -> SolverSettings {
        SolverSettings {
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            barrier_growth: self.barrier_growth,
            restarts: self.restarts,
            seed,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// Graph file, or `fig2` / `fig2-directed` for the bundled graphs.
    #[arg(long)]
    pub graph: String,
    /// `uniform`, a JSON file holding an array, or comma-separated values.
    #[arg(long, default_value = "uniform")]
    pub weights: String,
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelfLoops {
    /// Keep the graph file's setting.
    Graph,
    On,
    Off,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, default_value = "fig2")]
    pub graph: String,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Histogram CSV of SLEM values per method.
    #[arg(long)]
    pub histogram: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    #[arg(long, value_enum, default_value_t = SelfLoops::Graph)]
    pub self_loops: SelfLoops,
    /// Add a wall-time column (makes the CSV run-dependent).
    #[arg(long)]
    pub timing: bool,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SequenceArgs {
    #[arg(long)]
    pub solution: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub start: usize,
    #[arg(long = "K", short = 'k', default_value_t = 10)]
    pub horizon: usize,
    #[arg(long, default_value_t = DEFAULT_ROLLOUTS)]
    pub rollouts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Scenario configuration (JSON); defaults are used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated subset of random, greedy, ergodic.
    #[arg(long, value_delimiter = ',', value_parser = parse_policy, default_value = "random,greedy,ergodic")]
    pub policies: Vec<Policy>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Where to write the summary table; printed to stdout as well.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct DetectArgs {
    /// Reference points: `x y z nx ny nz [belief_h1]` per line.
    #[arg(long)]
    pub reference: PathBuf,
    /// Observations: `x y z c11 c12 ... c33` per line.
    #[arg(long)]
    pub observations: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub dimension: usize,
    #[arg(long, default_value_t = DetectorConfig::default().epsilon)]
    pub epsilon: f64,
    #[arg(long, default_value_t = DetectorConfig::default().smoothing_c)]
    pub smoothing_c: f64,
    #[arg(long, short = 'k', default_value_t = DetectorConfig::default().neighborhood_k)]
    pub neighborhood_k: usize,
    /// Prior P(H1) for reference lines without a belief column.
    #[arg(long, default_value_t = 0.5)]
    pub prior: f64,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
}

fn parse_policy(s: &str) -> Result<Policy, String> {
    s.parse()
}

/// Error carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn parse(m: impl std::fmt::Display) -> Self {
        Self { code: 2, message: m.to_string() }
    }
    fn validation(m: impl std::fmt::Display) -> Self {
        Self { code: 3, message: m.to_string() }
    }
    fn solver(m: impl std::fmt::Display) -> Self {
        Self { code: 4, message: m.to_string() }
    }
    fn io(m: impl std::fmt::Display) -> Self {
        Self { code: 1, message: m.to_string() }
    }
}

impl From<ChainError> for CliError {
    fn from(e: ChainError) -> Self {
        match e {
            ChainError::Graph(_) | ChainError::SizeMismatch { .. } => Self::validation(e),
            _ => Self::solver(e),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Parse(_) => Self::parse(e),
            SimError::Config(_) | SimError::Graph(_) => Self::validation(e),
            SimError::Io(_) | SimError::Csv(_) => Self::io(e),
            _ => Self::solver(e),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Provenance of one command invocation, written next to its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub seed: u64,
    pub tool_version: String,
    pub timestamp_unix: u64,
    pub output_paths: Vec<PathBuf>,
    pub metadata: serde_json::Value,
}

impl RunManifest {
    fn new(command: &str, config_path: Option<PathBuf>, seed: u64, output_paths: Vec<PathBuf>, metadata: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            config_path,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            output_paths,
            metadata,
        }
    }

    /// `<first output>.manifest.json`.
    pub fn path_for(output: &Path) -> PathBuf {
        let mut s = output.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    }

    fn write(&self) -> CliResult<()> {
        if let Some(first) = self.output_paths.first() {
            let text = serde_json::to_string_pretty(self).expect("manifest serializes");
            fs::write(Self::path_for(first), text + "\n").map_err(CliError::io)?;
        }
        Ok(())
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

pub fn load_graph(spec: &str) -> CliResult<RegionGraph> {
    let g = match spec {
        "fig2" | "fig2-undirected" => RegionGraph::fig2_undirected(),
        "fig2-directed" => RegionGraph::fig2_directed(),
        path => RegionGraph::from_json(&read(Path::new(path))?).map_err(CliError::parse)?,
    };
    validate_graph(&g).map_err(CliError::validation)?;
    Ok(g)
}

pub fn load_weights(spec: &str, n: usize) -> CliResult<TargetDistribution> {
    let values: Vec<f64> = if spec == "uniform" {
        return Ok(TargetDistribution::uniform(n));
    } else if Path::new(spec).is_file() {
        serde_json::from_str(&read(Path::new(spec))?).map_err(CliError::parse)?
    } else {
        spec.split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::parse(format!("weights '{spec}': {e}")))?
    };
    if values.len() != n {
        return Err(CliError::validation(format!("{} weights for {n} nodes", values.len())));
    }
    TargetDistribution::normalized(&values).map_err(CliError::validation)
}

fn default_jobs(flag: Option<usize>) -> usize {
    flag.or_else(|| std::env::var(JOBS_ENV).ok().and_then(|v| v.parse().ok()))
        .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
        .unwrap_or(1)
        .max(1)
}

fn cmd_solve(a: &SolveArgs) -> CliResult<()> {
    let g = load_graph(&a.graph)?;
    let w = load_weights(&a.weights, g.node_count())?;
    let sol = a.method.solve(&g, &w, &a.solver.settings(a.seed))?;
    if !sol.removed_edges.is_empty() {
        let list: Vec<String> = sol.removed_edges.iter().map(|(i, j)| format!("{i}->{j}")).collect();
        eprintln!("warning: one-way edges removed for detailed balance: {}", list.join(", "));
    }
    println!("method {}  slem {:.10}  objective {:.10}", sol.method, sol.slem, sol.objective_value);
    if let Some(out) = &a.output {
        write(out, &(sol.to_json() + "\n"))?;
        RunManifest::new(
            "solve",
            Some(PathBuf::from(&a.graph)),
            a.seed,
            vec![out.clone()],
            serde_json::json!({ "method": sol.method.name(), "weights": a.weights }),
        )
        .write()?;
    }
    Ok(())
}

/// One solve in the SLEM benchmark.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub trial: usize,
    pub method: Method,
    pub slem: f64,
    pub objective: f64,
    pub wall_time_s: f64,
}

/// Random target for benchmark trial `trial`: uniform entries, normalized.
pub fn bench_target(seed: u64, trial: usize, n: usize) -> TargetDistribution {
    let mut s = rng::stream(seed, "bench-weights", trial as u64);
    let v: Vec<f64> = (0..n).map(|_| s.gen::<f64>()).collect();
    TargetDistribution::normalized(&v).expect("positive draws")
}

/// Solves every method on `trials` random targets, on up to `jobs` threads.
/// Rows are ordered by trial, then by [`Method::ALL`].
pub fn bench_slem(g: &RegionGraph, trials: usize, seed: u64, settings: &SolverSettings, jobs: usize) -> Result<Vec<BenchRow>, ChainError> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().expect("thread pool");
    let per_trial: Vec<Result<Vec<BenchRow>, ChainError>> = pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|t| {
                let w = bench_target(seed, t, g.node_count());
                Method::ALL
                    .iter()
                    .map(|&m| {
                        let started = Instant::now();
                        let sol = m.solve(g, &w, settings)?;
                        Ok(BenchRow {
                            trial: t,
                            method: m,
                            slem: sol.slem,
                            objective: sol.objective_value,
                            wall_time_s: started.elapsed().as_secs_f64(),
                        })
                    })
                    .collect()
            })
            .collect()
    });
    let mut rows = Vec::with_capacity(trials * 4);
    for r in per_trial {
        rows.extend(r?);
    }
    Ok(rows)
}

pub fn write_bench_csv<W: std::io::Write>(out: W, rows: &[BenchRow], timing: bool) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["trial", "method", "slem", "objective"];
    if timing {
        header.push("wall_time_s");
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.trial.to_string(), r.method.name().to_string(), format!("{:.12}", r.slem), format!("{:.12}", r.objective)];
        if timing {
            rec.push(format!("{:.6}", r.wall_time_s));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// SLEM histogram over `[0, 1]`: one row per bin, one count column per method.
pub fn write_histogram_csv<W: std::io::Write>(out: W, rows: &[BenchRow], bins: usize) -> csv::Result<()> {
    let bins = bins.max(1);
    let mut counts = vec![[0usize; 4]; bins];
    for r in rows {
        let b = ((r.slem * bins as f64).floor().max(0.0) as usize).min(bins - 1);
        let m = Method::ALL.iter().position(|&x| x == r.method).expect("known method");
        counts[b][m] += 1;
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["bin_lo".to_string(), "bin_hi".to_string()];
    header.extend(Method::ALL.iter().map(|m| m.name().to_string()));
    w.write_record(&header)?;
    for (b, c) in counts.iter().enumerate() {
        let mut rec = vec![format!("{:.4}", b as f64 / bins as f64), format!("{:.4}", (b + 1) as f64 / bins as f64)];
        rec.extend(c.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean SLEM per method, in [`Method::ALL`] order.
pub fn mean_slem(rows: &[BenchRow]) -> [f64; 4] {
    let mut sum = [0.0; 4];
    let mut n = [0usize; 4];
    for r in rows {
        let m = Method::ALL.iter().position(|&x| x == r.method).expect("known method");
        sum[m] += r.slem;
        n[m] += 1;
    }
    std::array::from_fn(|i| if n[i] == 0 { f64::NAN } else { sum[i] / n[i] as f64 })
}

fn cmd_bench(a: &BenchArgs) -> CliResult<()> {
    let mut g = load_graph(&a.graph)?;
    match a.self_loops {
        SelfLoops::Graph => {}
        SelfLoops::On => g = g.with_self_loops(true),
        SelfLoops::Off => g = g.with_self_loops(false),
    }
    validate_graph(&g).map_err(CliError::validation)?;
    let rows = bench_slem(&g, a.trials, a.seed, &a.solver.settings(a.seed), default_jobs(a.jobs))?;
    let mut buf = Vec::new();
    write_bench_csv(&mut buf, &rows, a.timing).map_err(CliError::io)?;
    fs::write(&a.output, buf).map_err(CliError::io)?;
    let mut outputs = vec![a.output.clone()];
    if let Some(h) = &a.histogram {
        let mut buf = Vec::new();
        write_histogram_csv(&mut buf, &rows, a.bins).map_err(CliError::io)?;
        fs::write(h, buf).map_err(CliError::io)?;
        outputs.push(h.clone());
    }
    let means = mean_slem(&rows);
    for (m, v) in Method::ALL.iter().zip(means) {
        println!("{:<22} mean slem {:.6}", m.name(), v);
    }
    RunManifest::new(
        "bench-slem",
        Some(PathBuf::from(&a.graph)),
        a.seed,
        outputs,
        serde_json::json!({
            "trials": a.trials,
            "self_loops": g.allow_self_loops(),
            "mean_slem": Method::ALL.iter().zip(means).map(|(m, v)| (m.name(), v)).collect::<std::collections::BTreeMap<_, _>>(),
        }),
    )
    .write()
}

fn cmd_sequence(a: &SequenceArgs) -> CliResult<()> {
    let sol = ChainSolution::from_json(&read(&a.solution)?).map_err(CliError::parse)?;
    if a.start >= sol.node_count() {
        return Err(CliError::validation(format!("start node {} outside 0..{}", a.start, sol.node_count())));
    }
    if a.horizon == 0 || a.rollouts == 0 {
        return Err(CliError::validation("K and rollouts must be at least 1"));
    }
    let mut stream = rng::stream(a.seed, "sequence", 0);
    let seq = plan_sequence(&sol, a.start, a.horizon, a.rollouts, &mut stream);
    println!("regions {:?}  tv_cost {:.6}", seq.regions, seq.tv_cost);
    if let Some(out) = &a.output {
        write(out, &(seq.to_json() + "\n"))?;
        RunManifest::new(
            "sequence",
            Some(a.solution.clone()),
            a.seed,
            vec![out.clone()],
            serde_json::json!({ "start": a.start, "K": a.horizon, "rollouts": a.rollouts }),
        )
        .write()?;
    }
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs) -> CliResult<()> {
    let mut cfg = match &a.config {
        Some(p) => ScenarioConfig::from_json(&read(p)?).map_err(|e| match e {
            SimError::Parse(_) => CliError::parse(e),
            other => CliError::validation(other),
        })?,
        None => ScenarioConfig::default(),
    };
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(CliError::validation)?;
    let mut policies = a.policies.clone();
    policies.dedup();
    let records = sim::run_simulation(&cfg, &policies, default_jobs(a.jobs))?;
    let mut buf = Vec::new();
    sim::write_records_csv(&mut buf, &records)?;
    fs::write(&a.output, buf).map_err(CliError::io)?;
    let summary = sim::summarize(&records, &policies);
    let table = sim::format_summary(&summary, cfg.trials);
    print!("{table}");
    let mut outputs = vec![a.output.clone()];
    if let Some(p) = &a.summary {
        write(p, &table)?;
        outputs.push(p.clone());
    }
    RunManifest::new(
        "simulate",
        a.config.clone(),
        cfg.seed,
        outputs,
        serde_json::json!({
            "trials": cfg.trials,
            "policies": policies.iter().map(|p| p.name()).collect::<Vec<_>>(),
            "node_summary": "max P(H1) over reference points (mean also reported)",
            "random_includes_self": cfg.random_includes_self,
            "beam": {
                "length": sim::BEAM_LENGTH,
                "flange_width": sim::FLANGE_WIDTH,
                "flange_thickness": sim::FLANGE_THICKNESS,
                "web_height": sim::WEB_HEIGHT,
                "web_thickness": sim::WEB_THICKNESS,
                "patches": ["top flange outer face", "bottom flange outer face", "web outer face"],
            },
            "summary": summary,
        }),
    )
    .write()
}

fn cmd_detect(a: &DetectArgs) -> CliResult<()> {
    let config = DetectorConfig {
        epsilon: a.epsilon,
        smoothing_c: a.smoothing_c,
        neighborhood_k: a.neighborhood_k,
        dimension: a.dimension,
    };
    config.validate().map_err(CliError::validation)?;
    let mut refs = detector::parse_reference_points(&read(&a.reference)?, a.dimension, a.prior).map_err(CliError::parse)?;
    let obs = detector::parse_observations(&read(&a.observations)?, a.dimension).map_err(CliError::parse)?;
    let report = detector::process_observation_batch(&mut refs, &obs, &config).map_err(CliError::validation)?;
    let entropy = detector::region_entropy(&refs).map_err(CliError::validation)?;
    println!("updated {} reference points  region entropy {:.6}", report.updated.len(), entropy);
    let text = detector::write_reference_points(&refs);
    match &a.output {
        Some(out) => {
            write(out, &text)?;
            RunManifest::new("detect", Some(a.reference.clone()), 0, vec![out.clone()], serde_json::json!({ "detector": config })).write()?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::BenchSlem(a) => cmd_bench(a),
        Command::Sequence(a) => cmd_sequence(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Detect(a) => cmd_detect(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn unknown_method_is_a_usage_error() {
        assert_eq!(run(["ergomix", "solve", "--graph", "fig2", "--method", "simplex"]), 2);
    }

    #[test]
    fn weights_parsing() {
        assert_eq!(load_weights("uniform", 3).unwrap().as_slice(), &[1.0 / 3.0; 3]);
        let w = load_weights("1,1,2", 3).unwrap();
        assert_eq!(w.as_slice(), &[0.25, 0.25, 0.5]);
        assert_eq!(load_weights("1,2", 3).unwrap_err().code, 3);
        assert_eq!(load_weights("1,x,2", 3).unwrap_err().code, 2);
    }

    #[test]
    fn histogram_counts_every_row() {
        let rows: Vec<BenchRow> = (0..10)
            .map(|i| BenchRow {
                trial: i,
                method: Method::Fmrmc,
                slem: i as f64 / 10.0,
                objective: 0.0,
                wall_time_s: 0.0,
            })
            .collect();
        let mut buf = Vec::new();
        write_histogram_csv(&mut buf, &rows, 5).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.lines().nth(1).unwrap().ends_with(",0,2,0,0"));
    }
}
