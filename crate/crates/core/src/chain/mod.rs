//! Transition matrices with a prescribed stationary distribution.
//!
//! Matrices are column-stochastic: `P[(j, i)]` is the probability of moving
//! from node `i` to node `j`, so `P w = w` for the stationary vector `w`.
//!
//! Four constructions are provided:
//!
//! * [`metropolis_hastings`] — the classical baseline,
//! * [`optimize_upper_bound`] — minimizes `‖P − w𝟙ᵀ‖₂`,
//! * [`optimize_fmrmc`] — fastest mixing reversible chain,
//!   `‖W^{-1/2} P W^{1/2} − q qᵀ‖₂` under detailed balance,
//! * [`optimize_modified_upper_bound`] — the same norm without detailed balance.
//!
//! The three optimizers share one interior-point solver (see `barrier`).

mod barrier;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{validate_graph, GraphError, RegionGraph, TargetDistribution};
use crate::linalg::{self, LinalgError, Matrix};
use crate::rng;
use crate::tol;

use barrier::{BarrierFailure, BarrierOptions, NormBound, Problem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("no strictly feasible chain exists on this graph for the given target{}", removed_note(.removed_edges))]
    Infeasible { removed_edges: Vec<(usize, usize)> },
    #[error("solver stalled after {newton_steps} Newton steps (gap bound {gap_bound:.3e})")]
    SolverStalled { newton_steps: usize, gap_bound: f64 },
    #[error("Metropolis-Hastings is not applicable: {0}")]
    NotApplicable(String),
    #[error("stationarity violated: ‖Pw − w‖∞ = {0:.3e}")]
    StationarityViolated(f64),
    #[error("target has {target} entries but the graph has {nodes} nodes")]
    SizeMismatch { target: usize, nodes: usize },
    #[error("certification failed: {0}")]
    Certification(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

fn removed_note(edges: &[(usize, usize)]) -> String {
    if edges.is_empty() {
        String::new()
    } else {
        format!(" (after removing one-way edges {edges:?})")
    }
}

pub type Result<T> = std::result::Result<T, ChainError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    MetropolisHastings,
    Fmrmc,
    UpperBound,
    ModifiedUpperBound,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::MetropolisHastings,
        Method::Fmrmc,
        Method::UpperBound,
        Method::ModifiedUpperBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::MetropolisHastings => "metropolis-hastings",
            Method::Fmrmc => "fmrmc",
            Method::UpperBound => "upper-bound",
            Method::ModifiedUpperBound => "modified-upper-bound",
        }
    }

    pub fn solve(self, g: &RegionGraph, w: &TargetDistribution, settings: &SolverSettings) -> Result<ChainSolution> {
        match self {
            Method::MetropolisHastings => metropolis_hastings(g, w),
            Method::Fmrmc => optimize_fmrmc(g, w, settings),
            Method::UpperBound => optimize_upper_bound(g, w, settings),
            Method::ModifiedUpperBound => optimize_modified_upper_bound(g, w, settings),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "metropolis-hastings" | "mh" => Ok(Method::MetropolisHastings),
            "fmrmc" => Ok(Method::Fmrmc),
            "upper-bound" => Ok(Method::UpperBound),
            "modified-upper-bound" | "modified" => Ok(Method::ModifiedUpperBound),
            other => Err(format!("unknown method '{other}'")),
        }
    }
}

/// Settings of the interior-point solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    /// Cap on Newton steps per solve (phase I and main phase together).
    pub max_iterations: usize,
    /// Target bound on the duality gap of the returned objective.
    pub tolerance: f64,
    /// Factor by which the barrier weight grows between centerings.
    pub barrier_growth: f64,
    /// Number of starting points; the best objective is kept. The problems
    /// are convex, so more than one is only useful as a cross-check.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iterations: 2_000,
            tolerance: 1e-8,
            barrier_growth: 20.0,
            restarts: 1,
            seed: 0,
        }
    }
}

impl SolverSettings {
    fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || !(self.barrier_growth > 1.0) || self.max_iterations == 0 {
            return Err(ChainError::Certification(format!("invalid solver settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSolution {
    pub transition: Matrix,
    /// The target actually used, after flooring tiny weights.
    pub target: TargetDistribution,
    pub slem: f64,
    pub method: Method,
    pub objective_value: f64,
    /// One-way edges dropped to make detailed balance possible.
    pub removed_edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SolutionFile {
    method: Method,
    w: Vec<f64>,
    #[serde(rename = "P")]
    p: Vec<Vec<f64>>,
    slem: f64,
    objective: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    removed_edges: Vec<(usize, usize)>,
}

impl ChainSolution {
    pub fn to_json(&self) -> String {
        let file = SolutionFile {
            method: self.method,
            w: self.target.as_slice().to_vec(),
            p: self.transition.to_rows(),
            slem: self.slem,
            objective: self.objective_value,
            removed_edges: self.removed_edges.clone(),
        };
        serde_json::to_string_pretty(&file).expect("solution serializes")
    }

    /// Parses a serialized solution and re-checks stochasticity and stationarity.
    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let file: SolutionFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let n = file.w.len();
        if file.p.len() != n || file.p.iter().any(|r| r.len() != n) {
            return Err(format!("P must be {n}×{n}"));
        }
        let target = TargetDistribution::new(file.w).map_err(|e| e.to_string())?;
        let transition = Matrix::from_rows(&file.p);
        check_stochastic(&transition, &target).map_err(|e| e.to_string())?;
        Ok(Self {
            transition,
            target,
            slem: file.slem,
            method: file.method,
            objective_value: file.objective,
            removed_edges: file.removed_edges,
        })
    }

    pub fn node_count(&self) -> usize {
        self.target.len()
    }

    /// Largest `|P_ij w_j − P_ji w_i|`.
    pub fn detailed_balance_violation(&self) -> f64 {
        detailed_balance_violation(&self.transition, &self.target)
    }

    pub fn stationarity_error(&self) -> f64 {
        stationarity_error(&self.transition, self.target.as_slice())
    }

    /// Checks every invariant of a returned solution against `g`.
    pub fn certify(&self, g: &RegionGraph) -> Result<()> {
        check_stochastic(&self.transition, &self.target)?;
        let n = g.node_count();
        for j in 0..n {
            for i in 0..n {
                let allowed = if i == j { g.allow_self_loops() || g.has_edge(i, i) } else { g.has_edge(i, j) };
                if !allowed && self.transition[(j, i)] != 0.0 {
                    return Err(ChainError::Certification(format!("nonzero entry on non-edge {i}→{j}")));
                }
            }
        }
        if !(0.0..=1.0 + tol::SLEM_SLACK).contains(&self.slem) {
            return Err(ChainError::Certification(format!("SLEM {} out of range", self.slem)));
        }
        Ok(())
    }
}

fn stationarity_error(p: &Matrix, w: &[f64]) -> f64 {
    let pw = p.mul_vec(w);
    pw.iter().zip(w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn detailed_balance_violation(p: &Matrix, w: &TargetDistribution) -> f64 {
    let w = w.as_slice();
    let n = w.len();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((p[(i, j)] * w[j] - p[(j, i)] * w[i]).abs());
        }
    }
    worst
}

fn check_stochastic(p: &Matrix, w: &TargetDistribution) -> Result<()> {
    let n = w.len();
    if p.rows() != n || p.cols() != n {
        return Err(ChainError::SizeMismatch { target: n, nodes: p.rows() });
    }
    for i in 0..n {
        let col = p.col(i);
        if col.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(ChainError::Certification(format!("column {i} has a negative or non-finite entry")));
        }
        let s: f64 = col.iter().sum();
        if (s - 1.0).abs() > tol::COLUMN_SUM_TOL {
            return Err(ChainError::Certification(format!("column {i} sums to {s}")));
        }
    }
    let err = stationarity_error(p, w.as_slice());
    if err > tol::STATIONARITY_TOL {
        return Err(ChainError::StationarityViolated(err));
    }
    Ok(())
}

/// Wielandt deflation `P − w𝟙ᵀ`; moves the unit eigenvalue to zero.
pub fn deflate(p: &Matrix, w: &TargetDistribution) -> Result<Matrix> {
    let n = w.len();
    if !p.is_square() || p.rows() != n {
        return Err(ChainError::SizeMismatch { target: n, nodes: p.rows() });
    }
    let err = stationarity_error(p, w.as_slice());
    if err > tol::DEFLATE_STATIONARITY_TOL {
        return Err(ChainError::StationarityViolated(err));
    }
    Ok(p.sub(&Matrix::outer(w.as_slice(), &vec![1.0; n])))
}

/// Second largest eigenvalue modulus of `P`.
pub fn slem(p: &Matrix, w: &TargetDistribution) -> Result<f64> {
    let moduli = linalg::eigenvalue_moduli(&deflate(p, w)?)?;
    Ok(moduli.first().copied().unwrap_or(0.0))
}

/// `W^{-1/2} P W^{1/2} − q qᵀ` with `q = √w`.
pub fn symmetrized_deviation(p: &Matrix, w: &TargetDistribution) -> Matrix {
    let q: Vec<f64> = w.as_slice().iter().map(|v| v.sqrt()).collect();
    let n = q.len();
    let mut m = Matrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            m[(j, i)] = p[(j, i)] * q[i] / q[j] - q[j] * q[i];
        }
    }
    m
}

fn prepare(g: &RegionGraph, w: &TargetDistribution) -> Result<TargetDistribution> {
    if w.len() != g.node_count() {
        return Err(ChainError::SizeMismatch { target: w.len(), nodes: g.node_count() });
    }
    validate_graph(g)?;
    Ok(w.with_floor(tol::WEIGHT_FLOOR))
}

/// Metropolis–Hastings chain with uniform proposals over out-neighbors
/// (and the node itself when holding is allowed).
///
/// A proposal along a one-way edge has reverse proposal probability zero and
/// is always rejected. Rejected mass stays at the source node, which requires
/// a self-loop there.
pub fn metropolis_hastings(g: &RegionGraph, w: &TargetDistribution) -> Result<ChainSolution> {
    let w = prepare(g, w)?;
    let ws = w.as_slice();
    let n = g.node_count();
    let holds = |i: usize| g.allow_self_loops() || g.has_edge(i, i);
    let proposal = |i: usize| -> f64 {
        let deg = g.out_neighbors(i).len() + usize::from(holds(i));
        1.0 / deg as f64
    };
    let mut p = Matrix::zeros(n, n);
    for i in 0..n {
        let qi = proposal(i);
        let mut moved = 0.0;
        for j in g.out_neighbors(i) {
            let reverse = if g.has_edge(j, i) { proposal(j) } else { 0.0 };
            let accept = (ws[j] * reverse / (ws[i] * qi)).min(1.0);
            p[(j, i)] = qi * accept;
            moved += qi * accept;
        }
        let stay = (1.0 - moved).max(0.0);
        if stay > 1e-15 && !holds(i) {
            return Err(ChainError::NotApplicable(format!(
                "rejected proposals at node {i} need a self-loop, which the graph forbids"
            )));
        }
        p[(i, i)] = if holds(i) { stay } else { 0.0 };
    }
    let support = RegionGraph::new(
        n,
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| p[(j, i)] > 0.0),
        false,
    )?;
    if let Err(e) = validate_graph(&support) {
        return Err(ChainError::NotApplicable(format!("the accepted moves do not form an ergodic chain: {e}")));
    }
    let slem = slem(&p, &w)?;
    let objective_value = linalg::spectral_norm(&symmetrized_deviation(&p, &w))?;
    let sol = ChainSolution {
        transition: p,
        target: w,
        slem,
        method: Method::MetropolisHastings,
        objective_value,
        removed_edges: Vec::new(),
    };
    sol.certify(g)?;
    Ok(sol)
}

/// Minimizes `‖P − w𝟙ᵀ‖₂` over feasible chains on `g`.
pub fn optimize_upper_bound(g: &RegionGraph, w: &TargetDistribution, settings: &SolverSettings) -> Result<ChainSolution> {
    optimize(g, w, settings, Method::UpperBound)
}

/// Fastest mixing reversible chain. One-way edges cannot carry flow under
/// detailed balance and are dropped first; they are listed in
/// [`ChainSolution::removed_edges`].
pub fn optimize_fmrmc(g: &RegionGraph, w: &TargetDistribution, settings: &SolverSettings) -> Result<ChainSolution> {
    optimize(g, w, settings, Method::Fmrmc)
}

/// Minimizes `‖W^{-1/2} P W^{1/2} − q qᵀ‖₂` without requiring reversibility.
pub fn optimize_modified_upper_bound(
    g: &RegionGraph,
    w: &TargetDistribution,
    settings: &SolverSettings,
) -> Result<ChainSolution> {
    optimize(g, w, settings, Method::ModifiedUpperBound)
}

/// Equality constraints on the edge variables: column sums, stationarity
/// and (for FMRMC) detailed balance.
fn equality_system(n: usize, vars: &[(usize, usize)], w: &[f64], reversible: bool) -> (Matrix, Vec<f64>) {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    let m = vars.len();
    for i in 0..n {
        let mut r = vec![0.0; m];
        for (e, &(from, _)) in vars.iter().enumerate() {
            if from == i {
                r[e] = 1.0;
            }
        }
        rows.push(r);
        rhs.push(1.0);
    }
    for j in 0..n {
        let mut r = vec![0.0; m];
        for (e, &(from, to)) in vars.iter().enumerate() {
            if to == j {
                r[e] = w[from];
            }
        }
        rows.push(r);
        rhs.push(w[j]);
    }
    if reversible {
        for (e, &(i, j)) in vars.iter().enumerate() {
            if i < j {
                if let Some(back) = vars.iter().position(|&v| v == (j, i)) {
                    let mut r = vec![0.0; m];
                    r[e] = w[i];
                    r[back] = -w[j];
                    rows.push(r);
                    rhs.push(0.0);
                }
            }
        }
    }
    (Matrix::from_rows(&rows), rhs)
}

fn optimize(g: &RegionGraph, w: &TargetDistribution, settings: &SolverSettings, method: Method) -> Result<ChainSolution> {
    settings.validate()?;
    let w = prepare(g, w)?;
    let ws = w.as_slice();
    let n = g.node_count();

    let (work_graph, removed_edges) = if method == Method::Fmrmc {
        let removed = g.one_way_edges();
        let reduced = g.without_one_way_edges();
        if validate_graph(&reduced).is_err() {
            return Err(ChainError::Infeasible { removed_edges: removed });
        }
        (reduced, removed)
    } else {
        (g.clone(), Vec::new())
    };
    let mut vars = work_graph.transitions();
    let mut budget = settings.max_iterations;
    let (a, x0) = loop {
        let (a, b) = equality_system(n, &vars, ws, method == Method::Fmrmc);
        match strictly_feasible_point(&a, &b, &mut budget, &removed_edges)? {
            PhaseOne::Interior(x) => break (a, x),
            PhaseOne::ForcedZero(idx) => {
                vars = vars.into_iter().enumerate().filter(|(e, _)| !idx.contains(e)).map(|(_, v)| v).collect();
            }
        }
    };
    let m = vars.len();

    // Variables: y = (x, t); M(x) = base + Σ coef·x_e at (to, from).
    let q: Vec<f64> = ws.iter().map(|v| v.sqrt()).collect();
    let (base, coefs): (Matrix, Vec<f64>) = match method {
        Method::UpperBound => (
            Matrix::outer(ws, &vec![1.0; n]).scale(-1.0),
            vec![1.0; m],
        ),
        _ => (
            Matrix::outer(&q, &q).scale(-1.0),
            vars.iter().map(|&(from, to)| q[from] / q[to]).collect(),
        ),
    };
    let norm_bound = NormBound {
        base,
        terms: vars.iter().zip(&coefs).enumerate().map(|(e, (&(from, to), &c))| (e, to, from, c)).collect(),
        t_var: m,
    };
    let zx = linalg::null_space(&a, 1e-10)?;
    let r = zx.cols();
    let mut z = Matrix::zeros(m + 1, r + 1);
    for i in 0..m {
        for k in 0..r {
            z[(i, k)] = zx[(i, k)];
        }
    }
    z[(m, r)] = 1.0;
    let mut objective = vec![0.0; m + 1];
    objective[m] = 1.0;
    let problem = Problem {
        n_vars: m + 1,
        n_pos: m,
        objective,
        null_basis: z,
        norm_bound: Some(norm_bound.clone()),
    };

    let starts = starting_points(&x0, &zx, settings);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut last_failure = None;
    for x_start in starts {
        let t0 = linalg::spectral_norm(&norm_bound.matrix(&x_start))? * 1.05 + 1e-3;
        let mut y0 = x_start.clone();
        y0.push(t0);
        let opts = BarrierOptions {
            gap_tolerance: settings.tolerance,
            growth: settings.barrier_growth,
            max_newton_steps: budget,
        };
        match problem.solve(&y0, &opts, None) {
            Ok(out) => {
                budget = budget.saturating_sub(out.newton_steps).max(1);
                let x = out.y[..m].to_vec();
                let value = linalg::spectral_norm(&norm_bound.matrix(&x))?;
                if best.as_ref().map_or(true, |(v, _)| value < *v) {
                    best = Some((value, x));
                }
            }
            Err(BarrierFailure::Stalled { newton_steps, gap_bound }) => {
                last_failure = Some(ChainError::SolverStalled { newton_steps, gap_bound });
            }
            Err(BarrierFailure::InfeasibleStart) => {
                last_failure = Some(ChainError::Infeasible { removed_edges: removed_edges.clone() });
            }
        }
    }
    let (_, x) = match best {
        Some(b) => b,
        None => return Err(last_failure.unwrap_or(ChainError::Infeasible { removed_edges })),
    };

    let mut p = Matrix::zeros(n, n);
    for (e, &(from, to)) in vars.iter().enumerate() {
        p[(to, from)] = x[e];
    }
    clean_transition(&mut p)?;
    let deviation = match method {
        Method::UpperBound => p.sub(&Matrix::outer(ws, &vec![1.0; n])),
        _ => symmetrized_deviation(&p, &w),
    };
    let objective_value = linalg::spectral_norm(&deviation)?;
    let slem = slem(&p, &w)?;
    let sol = ChainSolution {
        transition: p,
        target: w,
        slem,
        method,
        objective_value,
        removed_edges,
    };
    check_stochastic(&sol.transition, &sol.target)?;
    sol.certify(&work_graph)?;
    Ok(sol)
}

/// Clamps round-off negatives and renormalizes columns.
fn clean_transition(p: &mut Matrix) -> Result<()> {
    let n = p.rows();
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            let v = p[(j, i)];
            if v < 0.0 {
                if v < -tol::NEGATIVE_ENTRY_CLAMP {
                    return Err(ChainError::Certification(format!("entry ({j}, {i}) = {v:e} is negative")));
                }
                p[(j, i)] = 0.0;
            }
            s += p[(j, i)];
        }
        for j in 0..n {
            p[(j, i)] /= s;
        }
    }
    Ok(())
}

enum PhaseOne {
    Interior(Vec<f64>),
    /// Feasible only with these variables at zero.
    ForcedZero(Vec<usize>),
}

/// Finds `x > 0` with `A x = b` by an LP phase I: maximize the smallest entry.
fn strictly_feasible_point(
    a: &Matrix,
    b: &[f64],
    budget: &mut usize,
    removed_edges: &[(usize, usize)],
) -> Result<PhaseOne> {
    let infeasible = || ChainError::Infeasible { removed_edges: removed_edges.to_vec() };
    let m = a.cols();
    let xp = barrier::least_norm_solution(a, b).ok_or_else(infeasible)?;
    let min = xp.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 1e-3 {
        return Ok(PhaseOne::Interior(xp));
    }
    // Variables (u, s) with u = x + s𝟙 > 0: A u − s A𝟙 = b, minimize s.
    let row_sums: Vec<f64> = (0..a.rows()).map(|i| a.row(i).iter().sum()).collect();
    let mut ext = Matrix::zeros(a.rows(), m + 1);
    for i in 0..a.rows() {
        for k in 0..m {
            ext[(i, k)] = a[(i, k)];
        }
        ext[(i, m)] = -row_sums[i];
    }
    let mut objective = vec![0.0; m + 1];
    objective[m] = 1.0;
    let problem = Problem {
        n_vars: m + 1,
        n_pos: m,
        objective,
        null_basis: linalg::null_space(&ext, 1e-10)?,
        norm_bound: None,
    };
    let s0 = 1.0 - min;
    let mut y0: Vec<f64> = xp.iter().map(|v| v + s0).collect();
    y0.push(s0);
    let opts = BarrierOptions {
        gap_tolerance: 1e-9,
        growth: 20.0,
        max_newton_steps: *budget,
    };
    let out = problem.solve(&y0, &opts, None).map_err(|f| match f {
        BarrierFailure::Stalled { newton_steps, gap_bound } => ChainError::SolverStalled { newton_steps, gap_bound },
        BarrierFailure::InfeasibleStart => infeasible(),
    })?;
    *budget = budget.saturating_sub(out.newton_steps).max(1);
    let s = out.y[m];
    let x: Vec<f64> = out.y[..m].iter().map(|u| u - s).collect();
    if s < -1e-9 {
        return Ok(PhaseOne::Interior(x));
    }
    if s > 1e-7 {
        return Err(infeasible());
    }
    // The optimum sits on a face where some entries must vanish; the central
    // path keeps the others well away from zero.
    let forced: Vec<usize> = (0..m).filter(|&k| x[k] < 1e-5).collect();
    if forced.is_empty() || forced.len() == m {
        return Err(infeasible());
    }
    Ok(PhaseOne::ForcedZero(forced))
}

/// The phase-I point followed by `restarts − 1` random interior points.
fn starting_points(x0: &[f64], z: &Matrix, settings: &SolverSettings) -> Vec<Vec<f64>> {
    let mut out = vec![x0.to_vec()];
    if z.cols() == 0 {
        return out;
    }
    let mut stream = rng::stream(settings.seed, "chain-restart", 0);
    for _ in 1..settings.restarts.max(1) {
        let v: Vec<f64> = (0..z.cols()).map(|_| stream.gen_range(-1.0..1.0)).collect();
        let d = z.mul_vec(&v);
        // Largest step keeping every entry above half its starting value.
        let mut step = f64::INFINITY;
        for (xi, di) in x0.iter().zip(&d) {
            if *di < 0.0 {
                step = step.min(-0.5 * xi / di);
            }
        }
        let step = if step.is_finite() { step * stream.gen_range(0.2..1.0) } else { 1.0 };
        out.push(x0.iter().zip(&d).map(|(a, b)| a + step * b).collect());
    }
    out
}
