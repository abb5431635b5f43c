//! Inspection simulation: I-beam structures on a region graph, some carrying
//! a cube anomaly, explored by three traversal policies.
//!
//! Every trial draws one scenario and runs each policy against it with common
//! random numbers: the observation noise of the `v`-th visit to node `n` is
//! the same for every policy.

use std::fmt::Write as _;
use std::io;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{optimize_modified_upper_bound, ChainError, SolverSettings};
use crate::detector::{
    process_observation_batch, region_entropy, DetectorConfig, DetectorError, ObservedPoint, ReferencePoint,
};
use crate::graph::{weights_from_entropy, GraphError, GraphFile, RegionGraph};
use crate::linalg::{GaussianSampler, LinalgError, Matrix};
use crate::rng;
use crate::sequencer::{plan_sequence, DEFAULT_ROLLOUTS};
use crate::tol;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("unreadable scenario configuration: {0}")]
    Parse(String),
    #[error("invalid scenario configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;

/// Beam length along x.
pub const BEAM_LENGTH: f64 = 400.0;
/// Flange width (y) and thickness (z).
pub const FLANGE_WIDTH: f64 = 100.0;
pub const FLANGE_THICKNESS: f64 = 20.0;
/// Web height (z) and thickness (y).
pub const WEB_HEIGHT: f64 = 300.0;
pub const WEB_THICKNESS: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    Random,
    GreedyMaxEntropy,
    EntropyErgodic,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Random, Policy::GreedyMaxEntropy, Policy::EntropyErgodic];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Random => "random",
            Policy::GreedyMaxEntropy => "greedy-max-entropy",
            Policy::EntropyErgodic => "entropy-ergodic",
        }
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "random" => Ok(Policy::Random),
            "greedy" | "greedy-max-entropy" => Ok(Policy::GreedyMaxEntropy),
            "ergodic" | "entropy-ergodic" => Ok(Policy::EntropyErgodic),
            other => Err(format!("unknown policy '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub graph: RegionGraph,
    pub structure_points_per_node: usize,
    pub anomaly_points: usize,
    pub anomaly_size: f64,
    pub anomaly_prob_range: (f64, f64),
    pub noise_cov: Matrix,
    pub prior_perturb_sigma: f64,
    pub steps: usize,
    pub observations_per_visit: usize,
    pub detector: DetectorConfig,
    pub horizon_k: usize,
    pub rollouts: usize,
    /// Whether the random walk may stay put.
    pub random_includes_self: bool,
    pub solver: SolverSettings,
    pub trials: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            graph: RegionGraph::fig2_directed(),
            structure_points_per_node: 500,
            anomaly_points: 250,
            anomaly_size: 100.0,
            anomaly_prob_range: (0.25, 0.75),
            noise_cov: Matrix::from_diag(&[40.0, 40.0, 40.0]),
            prior_perturb_sigma: 0.2,
            steps: 20,
            observations_per_visit: 250,
            detector: DetectorConfig::default(),
            horizon_k: 10,
            rollouts: DEFAULT_ROLLOUTS,
            random_includes_self: false,
            solver: SolverSettings::default(),
            trials: 500,
            seed: 0,
        }
    }
}

/// On-disk form of [`ScenarioConfig`]; every field is optional.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub graph: Option<GraphFile>,
    pub structure_points_per_node: usize,
    pub anomaly_points: usize,
    pub anomaly_size: f64,
    pub anomaly_prob_range: [f64; 2],
    pub noise_cov: Vec<Vec<f64>>,
    pub prior_perturb_sigma: f64,
    pub steps: usize,
    pub observations_per_visit: usize,
    pub detector: DetectorConfig,
    pub horizon_k: usize,
    pub rollouts: usize,
    pub random_includes_self: bool,
    pub solver: SolverSettings,
    pub trials: usize,
    pub seed: u64,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        ScenarioConfig::default().to_file()
    }
}

impl ScenarioConfig {
    pub fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            graph: Some(self.graph.to_file_spec()),
            structure_points_per_node: self.structure_points_per_node,
            anomaly_points: self.anomaly_points,
            anomaly_size: self.anomaly_size,
            anomaly_prob_range: [self.anomaly_prob_range.0, self.anomaly_prob_range.1],
            noise_cov: self.noise_cov.to_rows(),
            prior_perturb_sigma: self.prior_perturb_sigma,
            steps: self.steps,
            observations_per_visit: self.observations_per_visit,
            detector: self.detector,
            horizon_k: self.horizon_k,
            rollouts: self.rollouts,
            random_includes_self: self.random_includes_self,
            solver: self.solver,
            trials: self.trials,
            seed: self.seed,
        }
    }

    pub fn from_file(file: &ScenarioFile) -> Result<Self> {
        let graph = match &file.graph {
            Some(spec) => RegionGraph::from_file_spec(spec)?,
            None => RegionGraph::fig2_directed(),
        };
        let d = file.detector.dimension;
        if file.noise_cov.len() != d || file.noise_cov.iter().any(|r| r.len() != d) {
            return Err(SimError::Config(format!("noise_cov must be {d}×{d}")));
        }
        let cfg = Self {
            graph,
            structure_points_per_node: file.structure_points_per_node,
            anomaly_points: file.anomaly_points,
            anomaly_size: file.anomaly_size,
            anomaly_prob_range: (file.anomaly_prob_range[0], file.anomaly_prob_range[1]),
            noise_cov: Matrix::from_rows(&file.noise_cov),
            prior_perturb_sigma: file.prior_perturb_sigma,
            steps: file.steps,
            observations_per_visit: file.observations_per_visit,
            detector: file.detector,
            horizon_k: file.horizon_k,
            rollouts: file.rollouts,
            random_includes_self: file.random_includes_self,
            solver: file.solver,
            trials: file.trials,
            seed: file.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        Self::from_file(&file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if self.structure_points_per_node == 0 || self.anomaly_points == 0 || self.observations_per_visit == 0 {
            return bad("point counts must be at least 1");
        }
        if self.horizon_k == 0 || self.rollouts == 0 || self.trials == 0 {
            return bad("horizon_k, rollouts and trials must be at least 1");
        }
        let (lo, hi) = self.anomaly_prob_range;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return bad("anomaly_prob_range must be an interval inside [0, 1]");
        }
        if !(self.prior_perturb_sigma >= 0.0) || !(self.anomaly_size > 0.0) {
            return bad("prior_perturb_sigma must be nonnegative and anomaly_size positive");
        }
        if self.detector.dimension != 3 {
            return bad("the simulation is three-dimensional");
        }
        self.detector.validate()?;
        GaussianSampler::new(&self.noise_cov)?;
        crate::graph::validate_graph(&self.graph)?;
        Ok(())
    }
}

/// Ground truth and initial beliefs of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeScenario {
    pub anomaly_probability: f64,
    pub anomalous: bool,
    pub prior_h1: f64,
    /// Lower corner of the cube, when present.
    pub cube_origin: Option<[f64; 3]>,
    pub reference: Vec<ReferencePoint>,
    /// Points of the true surface that observations are drawn from.
    pub surface: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub nodes: Vec<NodeScenario>,
}

impl Scenario {
    pub fn labels(&self) -> Vec<bool> {
        self.nodes.iter().map(|n| n.anomalous).collect()
    }
}

struct Face {
    origin: [f64; 3],
    u: [f64; 3],
    v: [f64; 3],
    normal: [f64; 3],
}

impl Face {
    fn area(&self) -> f64 {
        let n = |a: [f64; 3]| (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        n(self.u) * n(self.v)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 3] {
        let (a, b): (f64, f64) = (rng.gen(), rng.gen());
        std::array::from_fn(|i| self.origin[i] + a * self.u[i] + b * self.v[i])
    }
}

fn face(origin: [f64; 3], u: [f64; 3], v: [f64; 3], normal: [f64; 3]) -> Face {
    Face { origin, u, v, normal }
}

/// The three plate patches of the I-beam seen from the inspection side: the
/// outer faces of both flanges and the outer face of the web. The beam runs
/// along x and the web's outer face looks along +y.
fn beam_faces() -> Vec<Face> {
    let l = BEAM_LENGTH;
    let hw = FLANGE_WIDTH / 2.0;
    let zi = WEB_HEIGHT / 2.0;
    let zo = zi + FLANGE_THICKNESS;
    vec![
        face([0.0, -hw, zo], [l, 0.0, 0.0], [0.0, FLANGE_WIDTH, 0.0], [0.0, 0.0, 1.0]),
        face([0.0, -hw, -zo], [l, 0.0, 0.0], [0.0, FLANGE_WIDTH, 0.0], [0.0, 0.0, -1.0]),
        face([0.0, WEB_THICKNESS / 2.0, -zi], [l, 0.0, 0.0], [0.0, 0.0, WEB_HEIGHT], [0.0, 1.0, 0.0]),
    ]
}

/// The five faces of a cube sitting on the web face at `origin` (its corner
/// touching the web with the smallest coordinates).
fn cube_faces(origin: [f64; 3], s: f64) -> Vec<Face> {
    let [x, y, z] = origin;
    vec![
        face([x, y + s, z], [s, 0.0, 0.0], [0.0, 0.0, s], [0.0, 1.0, 0.0]),
        face([x, y, z], [0.0, s, 0.0], [0.0, 0.0, s], [-1.0, 0.0, 0.0]),
        face([x + s, y, z], [0.0, s, 0.0], [0.0, 0.0, s], [1.0, 0.0, 0.0]),
        face([x, y, z], [s, 0.0, 0.0], [0.0, s, 0.0], [0.0, 0.0, -1.0]),
        face([x, y, z + s], [s, 0.0, 0.0], [0.0, s, 0.0], [0.0, 0.0, 1.0]),
    ]
}

fn sample_by_area<R: Rng + ?Sized>(faces: &[Face], count: usize, rng: &mut R) -> Vec<([f64; 3], [f64; 3])> {
    let total: f64 = faces.iter().map(Face::area).sum();
    (0..count)
        .map(|_| {
            let mut u = rng.gen::<f64>() * total;
            let mut chosen = &faces[faces.len() - 1];
            for f in faces {
                if u < f.area() {
                    chosen = f;
                    break;
                }
                u -= f.area();
            }
            (chosen.sample(rng), chosen.normal)
        })
        .collect()
}

/// Draws the ground truth and priors of every node.
pub fn generate_scenario<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<Scenario> {
    let beam = beam_faces();
    let s = config.anomaly_size;
    let (lo, hi) = config.anomaly_prob_range;
    let mut nodes = Vec::with_capacity(config.graph.node_count());
    for _ in 0..config.graph.node_count() {
        let anomaly_probability = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        let anomalous = rng.gen::<f64>() < anomaly_probability;
        let prior_h1 = perturb_prior(anomaly_probability, config.prior_perturb_sigma, rng);
        let points = sample_by_area(&beam, config.structure_points_per_node, rng);
        let reference = points
            .iter()
            .map(|(p, n)| ReferencePoint::new(p.to_vec(), n.to_vec(), prior_h1))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let (cube_origin, surface) = if anomalous {
            let x0 = rng.gen_range(0.0..=(BEAM_LENGTH - s).max(0.0));
            let origin = [x0, WEB_THICKNESS / 2.0, -s / 2.0];
            // Beam points under the cube are hidden by it.
            let covered = |p: &[f64; 3]| {
                p[1] == origin[1]
                    && (origin[0]..=origin[0] + s).contains(&p[0])
                    && (origin[2]..=origin[2] + s).contains(&p[2])
            };
            let mut surface: Vec<[f64; 3]> = points.iter().map(|(p, _)| *p).filter(|p| !covered(p)).collect();
            surface.extend(sample_by_area(&cube_faces(origin, s), config.anomaly_points, rng).into_iter().map(|(p, _)| p));
            (Some(origin), surface)
        } else {
            (None, points.iter().map(|(p, _)| *p).collect())
        };
        nodes.push(NodeScenario {
            anomaly_probability,
            anomalous,
            prior_h1,
            cube_origin,
            reference,
            surface,
        });
    }
    Ok(Scenario { nodes })
}

/// Gaussian perturbation of `p`, redrawn until it lands in `[0, 1]`.
fn perturb_prior<R: Rng + ?Sized>(p: f64, sigma: f64, rng: &mut R) -> f64 {
    if sigma == 0.0 {
        return p;
    }
    let normal = rand_distr::Normal::new(p, sigma).expect("finite sigma");
    loop {
        let v: f64 = rng.sample(normal);
        if (0.0..=1.0).contains(&v) {
            return v;
        }
    }
}

/// Noisy observations of one node, drawn with replacement from its surface.
pub fn observe_node<R: Rng + ?Sized>(
    scenario: &Scenario,
    config: &ScenarioConfig,
    node: usize,
    rng: &mut R,
) -> Result<Vec<ObservedPoint>> {
    let sampler = GaussianSampler::new(&config.noise_cov)?;
    let surface = &scenario.nodes[node].surface;
    (0..config.observations_per_visit)
        .map(|_| {
            let p = surface[rng.gen_range(0..surface.len())];
            let position = sampler.sample(&p, rng);
            Ok(ObservedPoint {
                position,
                covariance: config.noise_cov.clone(),
            })
        })
        .collect()
}

/// Outcome of one policy on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub policy: Policy,
    pub anomaly_labels: Vec<bool>,
    /// Node-level P(H₁): maximum over the node's reference points.
    pub final_max_h1: Vec<f64>,
    /// Node-level P(H₁): mean over the node's reference points.
    pub final_mean_h1: Vec<f64>,
    pub visit_sequence: Vec<usize>,
    /// `None` when the scenario has no anomalous node.
    pub bce_anomalous: Option<f64>,
    pub bce_all: f64,
    pub bce_anomalous_mean: Option<f64>,
    pub bce_all_mean: f64,
    pub updates: usize,
    pub clamped_updates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subset {
    AnomalousOnly,
    All,
}

/// Mean binary cross-entropy of node beliefs against labels; `None` if the
/// subset is empty.
pub fn bce_loss(beliefs: &[f64], labels: &[bool], subset: Subset) -> Option<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for (&p, &y) in beliefs.iter().zip(labels) {
        if subset == Subset::AnomalousOnly && !y {
            continue;
        }
        let p = p.clamp(tol::BELIEF_CLAMP, 1.0 - tol::BELIEF_CLAMP);
        total -= if y { p.ln() } else { (1.0 - p).ln() };
        count += 1;
    }
    (count > 0).then(|| total / count as f64)
}

fn observation_stream(config: &ScenarioConfig, trial: usize, node: usize, visit: usize) -> rng::Stream {
    rng::substream(config.seed, "observe", &[trial as u64, node as u64, visit as u64])
}

/// Runs one policy for `config.steps` moves from node 0.
pub fn run_policy_trial(scenario: &Scenario, config: &ScenarioConfig, policy: Policy, trial: usize) -> Result<TrialRecord> {
    let g = &config.graph;
    let n = g.node_count();
    let mut beliefs: Vec<Vec<ReferencePoint>> = scenario.nodes.iter().map(|s| s.reference.clone()).collect();
    let mut visits = vec![0usize; n];
    let mut sequence = Vec::with_capacity(config.steps + 1);
    let mut updates = 0usize;
    let mut clamped = 0usize;

    let mut arrive = |node: usize, beliefs: &mut Vec<Vec<ReferencePoint>>| -> Result<()> {
        let mut stream = observation_stream(config, trial, node, visits[node]);
        visits[node] += 1;
        let obs = observe_node(scenario, config, node, &mut stream)?;
        let report = process_observation_batch(&mut beliefs[node], &obs, &config.detector)?;
        updates += report.updated.len();
        clamped += report.clamped;
        Ok(())
    };

    let mut current = 0usize;
    sequence.push(current);
    arrive(current, &mut beliefs)?;

    let mut move_rng = rng::stream(config.seed, "random-walk", trial as u64);
    let mut plan: std::collections::VecDeque<usize> = Default::default();
    let mut replans = 0u64;
    for _ in 0..config.steps {
        let mut choices = g.out_neighbors(current);
        let next = match policy {
            Policy::Random => {
                if config.random_includes_self && g.allow_self_loops() {
                    choices.push(current);
                    choices.sort_unstable();
                }
                if choices.is_empty() {
                    current
                } else {
                    choices[move_rng.gen_range(0..choices.len())]
                }
            }
            Policy::GreedyMaxEntropy => {
                let mut best: Option<(usize, f64)> = None;
                for &c in &choices {
                    let h = region_entropy(&beliefs[c])?;
                    if best.map_or(true, |(_, bh)| h > bh) {
                        best = Some((c, h));
                    }
                }
                best.map_or(current, |(c, _)| c)
            }
            Policy::EntropyErgodic => {
                if plan.is_empty() {
                    let entropies = beliefs.iter().map(|b| region_entropy(b)).collect::<std::result::Result<Vec<_>, _>>()?;
                    let w = weights_from_entropy(&entropies)?;
                    let chain = optimize_modified_upper_bound(g, &w, &config.solver)?;
                    let mut plan_rng = rng::substream(config.seed, "plan", &[trial as u64, replans]);
                    replans += 1;
                    let seq = plan_sequence(&chain, current, config.horizon_k, config.rollouts, &mut plan_rng);
                    plan.extend(seq.regions.into_iter().skip(1));
                    if plan.is_empty() {
                        // A horizon of one never moves.
                        plan.push_back(current);
                    }
                }
                plan.pop_front().expect("plan refilled above")
            }
        };
        current = next;
        sequence.push(current);
        arrive(current, &mut beliefs)?;
    }

    let max_h1: Vec<f64> = beliefs
        .iter()
        .map(|b| b.iter().map(|r| r.belief_h1).fold(0.0, f64::max))
        .collect();
    let mean_h1: Vec<f64> = beliefs
        .iter()
        .map(|b| b.iter().map(|r| r.belief_h1).sum::<f64>() / b.len() as f64)
        .collect();
    let labels = scenario.labels();
    Ok(TrialRecord {
        trial,
        policy,
        bce_anomalous: bce_loss(&max_h1, &labels, Subset::AnomalousOnly),
        bce_all: bce_loss(&max_h1, &labels, Subset::All).unwrap_or(0.0),
        bce_anomalous_mean: bce_loss(&mean_h1, &labels, Subset::AnomalousOnly),
        bce_all_mean: bce_loss(&mean_h1, &labels, Subset::All).unwrap_or(0.0),
        anomaly_labels: labels,
        final_max_h1: max_h1,
        final_mean_h1: mean_h1,
        visit_sequence: sequence,
        updates,
        clamped_updates: clamped,
    })
}

pub fn scenario_for_trial(config: &ScenarioConfig, trial: usize) -> Result<Scenario> {
    generate_scenario(config, &mut rng::stream(config.seed, "scenario", trial as u64))
}

/// Runs every `(trial, policy)` pair on up to `jobs` threads. Records come
/// back ordered by trial, then by the order of `policies`.
pub fn run_simulation(config: &ScenarioConfig, policies: &[Policy], jobs: usize) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| SimError::Config(e.to_string()))?;
    let per_trial: Vec<Result<Vec<TrialRecord>>> = pool.install(|| {
        (0..config.trials)
            .into_par_iter()
            .map(|t| {
                let scenario = scenario_for_trial(config, t)?;
                policies.iter().map(|&p| run_policy_trial(&scenario, config, p, t)).collect()
            })
            .collect()
    });
    let mut out = Vec::with_capacity(config.trials * policies.len());
    for r in per_trial {
        out.extend(r?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, se: f64::NAN, n };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, se, n }
    }
}

impl std::fmt::Display for MeanSe {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.3} ± {:.3}", self.mean, self.se)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicySummary {
    pub policy: Policy,
    pub bce_anomalous: MeanSe,
    pub bce_all: MeanSe,
    pub bce_anomalous_mean: MeanSe,
    pub bce_all_mean: MeanSe,
    pub clamped_fraction: f64,
}

pub fn summarize(records: &[TrialRecord], policies: &[Policy]) -> Vec<PolicySummary> {
    policies
        .iter()
        .map(|&p| {
            let rs: Vec<&TrialRecord> = records.iter().filter(|r| r.policy == p).collect();
            let pick = |f: &dyn Fn(&TrialRecord) -> Option<f64>| MeanSe::of(&rs.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
            let updates: usize = rs.iter().map(|r| r.updates).sum();
            let clamped: usize = rs.iter().map(|r| r.clamped_updates).sum();
            PolicySummary {
                policy: p,
                bce_anomalous: pick(&|r| r.bce_anomalous),
                bce_all: pick(&|r| Some(r.bce_all)),
                bce_anomalous_mean: pick(&|r| r.bce_anomalous_mean),
                bce_all_mean: pick(&|r| Some(r.bce_all_mean)),
                clamped_fraction: if updates == 0 { 0.0 } else { clamped as f64 / updates as f64 },
            }
        })
        .collect()
}

/// Plain-text summary table, one row per policy.
pub fn format_summary(summary: &[PolicySummary], trials: usize) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Average binary cross-entropy over {trials} trials (node P(H1) = max over points)");
    let _ = writeln!(s, "{:<20} {:>16} {:>16}", "policy", "anomalous nodes", "all nodes");
    for p in summary {
        let _ = writeln!(s, "{:<20} {:>16} {:>16}", p.policy.name(), p.bce_anomalous.to_string(), p.bce_all.to_string());
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "Same, with node P(H1) = mean over points");
    let _ = writeln!(s, "{:<20} {:>16} {:>16}", "policy", "anomalous nodes", "all nodes");
    for p in summary {
        let _ = writeln!(
            s,
            "{:<20} {:>16} {:>16}",
            p.policy.name(),
            p.bce_anomalous_mean.to_string(),
            p.bce_all_mean.to_string()
        );
    }
    s
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.12}")).unwrap_or_default()
}

/// One CSV row per record.
pub fn write_records_csv<W: io::Write>(out: W, records: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "trial",
        "policy",
        "bce_anomalous",
        "bce_all",
        "bce_anomalous_mean",
        "bce_all_mean",
        "anomalous_nodes",
        "visit_sequence",
    ])?;
    for r in records {
        let anomalous: Vec<String> = r
            .anomaly_labels
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .map(|(i, _)| i.to_string())
            .collect();
        let seq: Vec<String> = r.visit_sequence.iter().map(|v| v.to_string()).collect();
        w.write_record([
            r.trial.to_string(),
            r.policy.name().to_string(),
            fmt_opt(r.bce_anomalous),
            format!("{:.12}", r.bce_all),
            fmt_opt(r.bce_anomalous_mean),
            format!("{:.12}", r.bce_all_mean),
            anomalous.join(" "),
            seq.join(" "),
        ])?;
    }
    w.flush()?;
    Ok(())
}
