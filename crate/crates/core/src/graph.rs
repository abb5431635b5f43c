//! Directed region graphs and target visit distributions.

use std::collections::{BTreeSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tol;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("graph is not irreducible: node {unreachable} is not mutually reachable with node 0")]
    NotIrreducible { unreachable: usize },
    #[error("graph is periodic with period {period}")]
    Periodic { period: usize },
    #[error("graph has no nodes")]
    Empty,
    #[error("edge ({0}, {1}) has an endpoint outside the node range")]
    EdgeOutOfRange(usize, usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("invalid target distribution: {0}")]
    InvalidDistribution(String),
    #[error("graph file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, GraphError>;

/// Directed graph whose nodes are inspection regions.
///
/// An edge `(from, to)` allows the robot to move from region `from` to
/// region `to`. When `allow_self_loops` is set, every node may also hold in
/// place.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionGraph {
    node_count: usize,
    edges: BTreeSet<(usize, usize)>,
    allow_self_loops: bool,
    node_labels: Option<Vec<String>>,
}

/// On-disk graph description.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GraphFile {
    pub nodes: usize,
    #[serde(default = "default_self_loops")]
    pub self_loops: bool,
    #[serde(default)]
    pub edges: Vec<[usize; 2]>,
    #[serde(default)]
    pub undirected_edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

fn default_self_loops() -> bool {
    true
}

const FIG2_UNDIRECTED: &str = include_str!("../assets/fig2_undirected.json");
const FIG2_DIRECTED: &str = include_str!("../assets/fig2_directed.json");

impl RegionGraph {
    /// Builds a graph from directed edges. Self-loop pairs `(i, i)` in the
    /// list are kept as explicit edges.
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = (usize, usize)>, allow_self_loops: bool) -> Result<Self> {
        if node_count == 0 {
            return Err(GraphError::Empty);
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= node_count || b >= node_count {
                return Err(GraphError::EdgeOutOfRange(a, b));
            }
            if !set.insert((a, b)) {
                return Err(GraphError::DuplicateEdge(a, b));
            }
        }
        Ok(Self {
            node_count,
            edges: set,
            allow_self_loops,
            node_labels: None,
        })
    }

    /// Builds a graph where every listed pair is traversable both ways.
    pub fn undirected(node_count: usize, pairs: impl IntoIterator<Item = (usize, usize)>, allow_self_loops: bool) -> Result<Self> {
        let mut edges = Vec::new();
        for (a, b) in pairs {
            edges.push((a, b));
            if a != b {
                edges.push((b, a));
            }
        }
        Self::new(node_count, edges, allow_self_loops)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.node_count {
            return Err(GraphError::Format(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.node_count
            )));
        }
        self.node_labels = Some(labels);
        Ok(self)
    }

    pub fn from_file_spec(spec: &GraphFile) -> Result<Self> {
        let mut edges: Vec<(usize, usize)> = spec.edges.iter().map(|e| (e[0], e[1])).collect();
        for e in &spec.undirected_edges {
            edges.push((e[0], e[1]));
            if e[0] != e[1] {
                edges.push((e[1], e[0]));
            }
        }
        let g = Self::new(spec.nodes, edges, spec.self_loops)?;
        match &spec.labels {
            Some(l) => g.with_labels(l.clone()),
            None => Ok(g),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: GraphFile = serde_json::from_str(text).map_err(|e| GraphError::Format(e.to_string()))?;
        Self::from_file_spec(&spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GraphError::Format(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Serializes with every edge listed as directed.
    pub fn to_file_spec(&self) -> GraphFile {
        GraphFile {
            nodes: self.node_count,
            self_loops: self.allow_self_loops,
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
            undirected_edges: Vec::new(),
            labels: self.node_labels.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file_spec()).expect("graph serializes")
    }

    /// The bundled 9-region benchmark graph, all edges two-way.
    pub fn fig2_undirected() -> Self {
        Self::from_json(FIG2_UNDIRECTED).expect("bundled graph parses")
    }

    /// The bundled 9-region benchmark graph with the one-way edges
    /// `1 → 4` and `6 → 7`.
    pub fn fig2_directed() -> Self {
        Self::from_json(FIG2_DIRECTED).expect("bundled graph parses")
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn allow_self_loops(&self) -> bool {
        self.allow_self_loops
    }

    pub fn with_self_loops(&self, allow: bool) -> Self {
        Self {
            allow_self_loops: allow,
            ..self.clone()
        }
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.node_labels.as_deref()
    }

    /// Explicit edges, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        (from == to && self.allow_self_loops) || self.edges.contains(&(from, to))
    }

    /// Distinct successors of `node`, excluding `node` itself.
    pub fn out_neighbors(&self, node: usize) -> Vec<usize> {
        self.edges
            .range((node, 0)..(node + 1, 0))
            .map(|&(_, b)| b)
            .filter(|&b| b != node)
            .collect()
    }

    /// Every allowed transition `(from, to)`, including holds when enabled.
    pub fn transitions(&self) -> Vec<(usize, usize)> {
        let mut all: BTreeSet<(usize, usize)> = self.edges.clone();
        if self.allow_self_loops {
            all.extend((0..self.node_count).map(|i| (i, i)));
        }
        all.into_iter().collect()
    }

    /// Edges whose reverse is absent.
    pub fn one_way_edges(&self) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .copied()
            .filter(|&(a, b)| a != b && !self.edges.contains(&(b, a)))
            .collect()
    }

    pub fn is_symmetric(&self) -> bool {
        self.one_way_edges().is_empty()
    }

    /// The same graph with every edge made two-way.
    pub fn skeleton(&self) -> Self {
        let mut edges = self.edges.clone();
        for &(a, b) in &self.edges {
            edges.insert((b, a));
        }
        Self {
            edges,
            ..self.clone()
        }
    }

    /// The same graph with one-way edges dropped.
    pub fn without_one_way_edges(&self) -> Self {
        let one_way: BTreeSet<_> = self.one_way_edges().into_iter().collect();
        Self {
            edges: self.edges.difference(&one_way).copied().collect(),
            ..self.clone()
        }
    }

    fn has_any_self_loop(&self) -> bool {
        self.allow_self_loops || self.edges.iter().any(|&(a, b)| a == b)
    }

    fn bfs_levels(&self, reverse: bool) -> Vec<Option<usize>> {
        let n = self.node_count;
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            if reverse {
                adj[b].push(a);
            } else {
                adj[a].push(b);
            }
        }
        let mut level = vec![None; n];
        level[0] = Some(0);
        let mut queue = VecDeque::from([0]);
        while let Some(u) = queue.pop_front() {
            let lu = level[u].expect("queued nodes have levels");
            for &v in &adj[u] {
                if level[v].is_none() {
                    level[v] = Some(lu + 1);
                    queue.push_back(v);
                }
            }
        }
        level
    }
}

/// Outcome of [`validate_graph`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphReport {
    pub node_count: usize,
    pub edge_count: usize,
    pub one_way_edges: Vec<(usize, usize)>,
    pub irreducible: bool,
    pub period: usize,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Checks irreducibility (strong connectivity) and aperiodicity.
pub fn validate_graph(g: &RegionGraph) -> Result<GraphReport> {
    let forward = g.bfs_levels(false);
    let backward = g.bfs_levels(true);
    if let Some(bad) = (0..g.node_count).find(|&i| forward[i].is_none() || backward[i].is_none()) {
        return Err(GraphError::NotIrreducible { unreachable: bad });
    }
    let period = if g.has_any_self_loop() {
        1
    } else {
        // For a strongly connected graph the period is the gcd of
        // level[u] + 1 − level[v] over all edges u → v.
        g.edges.iter().fold(0, |acc, &(u, v)| {
            let lu = forward[u].unwrap() as i64;
            let lv = forward[v].unwrap() as i64;
            gcd(acc, (lu + 1 - lv).unsigned_abs() as usize)
        })
    };
    // A single node without loops has no cycles at all.
    let period = if period == 0 { usize::MAX } else { period };
    if period != 1 {
        return Err(GraphError::Periodic { period });
    }
    Ok(GraphReport {
        node_count: g.node_count,
        edge_count: g.transitions().len(),
        one_way_edges: g.one_way_edges(),
        irreducible: true,
        period,
    })
}

/// Probability vector of desired long-run visit frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TargetDistribution {
    weights: Vec<f64>,
}

impl TryFrom<Vec<f64>> for TargetDistribution {
    type Error = GraphError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<TargetDistribution> for Vec<f64> {
    fn from(t: TargetDistribution) -> Self {
        t.weights
    }
}

impl TargetDistribution {
    /// Validates strictly positive entries that sum to one.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(GraphError::InvalidDistribution("empty".into()));
        }
        if let Some(bad) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(GraphError::InvalidDistribution(format!(
                "entry {bad} is not strictly positive"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > tol::DISTRIBUTION_SUM_TOL {
            return Err(GraphError::InvalidDistribution(format!("entries sum to {sum}")));
        }
        Ok(Self { weights })
    }

    /// Normalizes nonnegative scores; an all-zero input is an error.
    pub fn normalized(scores: &[f64]) -> Result<Self> {
        let sum: f64 = scores.iter().sum();
        if !(sum > 0.0) {
            return Err(GraphError::InvalidDistribution("scores sum to zero".into()));
        }
        Self::new(scores.iter().map(|s| s / sum).collect())
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Raises entries below `floor` to `floor` and renormalizes.
    pub fn with_floor(&self, floor: f64) -> Self {
        if self.weights.iter().all(|&w| w >= floor) {
            return self.clone();
        }
        let raised: Vec<f64> = self.weights.iter().map(|&w| w.max(floor)).collect();
        let sum: f64 = raised.iter().sum();
        Self {
            weights: raised.into_iter().map(|w| w / sum).collect(),
        }
    }
}

/// Target weights proportional to region entropies; uniform when every
/// entropy is (numerically) zero.
pub fn weights_from_entropy(entropies: &[f64]) -> Result<TargetDistribution> {
    if entropies.is_empty() {
        return Err(GraphError::InvalidDistribution("no regions".into()));
    }
    if let Some(bad) = entropies.iter().find(|h| !(**h >= 0.0) || !h.is_finite()) {
        return Err(GraphError::InvalidDistribution(format!("negative entropy {bad}")));
    }
    if entropies.iter().all(|&h| h <= tol::ZERO_ENTROPY) {
        return Ok(TargetDistribution::uniform(entropies.len()));
    }
    let sum: f64 = entropies.iter().sum();
    let mut weights: Vec<f64> = entropies.iter().map(|h| h / sum).collect();
    // Zero-entropy regions get the smallest representable positive share.
    if weights.iter().any(|&w| w <= 0.0) {
        weights.iter_mut().for_each(|w| *w = w.max(f64::MIN_POSITIVE));
        let s: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= s);
    }
    Ok(TargetDistribution { weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    #[test]
    fn bundled_graphs_validate() {
        let d = RegionGraph::fig2_directed();
        assert_eq!(d.node_count(), 9);
        assert_eq!(d.one_way_edges(), vec![(1, 4), (6, 7)]);
        validate_graph(&d).unwrap();
        let u = RegionGraph::fig2_undirected();
        assert!(u.is_symmetric());
        validate_graph(&u).unwrap();
        assert_eq!(d.skeleton(), u);
        validate_graph(&d.without_one_way_edges()).unwrap();
    }

    #[test]
    fn disconnected_is_rejected() {
        let g = RegionGraph::new(2, [], true).unwrap();
        assert!(matches!(validate_graph(&g), Err(GraphError::NotIrreducible { .. })));
        let g = RegionGraph::new(2, [(0, 1)], true).unwrap();
        assert!(matches!(validate_graph(&g), Err(GraphError::NotIrreducible { .. })));
    }

    #[test]
    fn two_cycle_is_periodic() {
        let g = RegionGraph::new(2, [(0, 1), (1, 0)], false).unwrap();
        assert_eq!(validate_graph(&g), Err(GraphError::Periodic { period: 2 }));
        validate_graph(&g.with_self_loops(true)).unwrap();
        // triangle plus a chord of length 2 has cycles of length 3 and 2
        let g = RegionGraph::new(3, [(0, 1), (1, 2), (2, 0), (1, 0)], false).unwrap();
        validate_graph(&g).unwrap();
        let g = RegionGraph::new(3, [(0, 1), (1, 2), (2, 0)], false).unwrap();
        assert_eq!(validate_graph(&g), Err(GraphError::Periodic { period: 3 }));
    }

    #[test]
    fn single_node() {
        let g = RegionGraph::new(1, [], true).unwrap();
        validate_graph(&g).unwrap();
        let g = RegionGraph::new(1, [], false).unwrap();
        assert!(matches!(validate_graph(&g), Err(GraphError::Periodic { .. })));
    }

    #[test]
    fn construction_errors() {
        assert_eq!(RegionGraph::new(0, [], true), Err(GraphError::Empty));
        assert_eq!(RegionGraph::new(2, [(0, 2)], true), Err(GraphError::EdgeOutOfRange(0, 2)));
        assert_eq!(RegionGraph::new(2, [(0, 1), (0, 1)], true), Err(GraphError::DuplicateEdge(0, 1)));
        assert!(RegionGraph::from_json("{\"nodes\": 2, \"edges\": [[0]]}").is_err());
    }

    #[test]
    fn json_round_trip() {
        let g = RegionGraph::fig2_directed();
        assert_eq!(RegionGraph::from_json(&g.to_json()).unwrap(), g);
    }

    #[test]
    fn entropy_weights() {
        let w = weights_from_entropy(&[LN_2, LN_2, LN_2]).unwrap();
        for v in w.as_slice() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let w = weights_from_entropy(&[0.6, 0.2, 0.2]).unwrap();
        assert!((w.as_slice()[0] - 0.6).abs() < 1e-15);
        assert_eq!(weights_from_entropy(&[0.0, 0.0]).unwrap(), TargetDistribution::uniform(2));
        let w = weights_from_entropy(&[0.5, 0.0]).unwrap();
        assert!(w.as_slice()[1] > 0.0);
    }

    #[test]
    fn floor_renormalizes() {
        let w = TargetDistribution::new(vec![1.0 - 1e-9, 1e-9]).unwrap();
        let f = w.with_floor(tol::WEIGHT_FLOOR);
        assert!(f.as_slice()[1] >= tol::WEIGHT_FLOOR * 0.99);
        assert!((f.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn distribution_validation() {
        assert!(TargetDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(TargetDistribution::new(vec![1.0, 0.0]).is_err());
        let t: TargetDistribution = serde_json::from_str("[0.25, 0.75]").unwrap();
        assert_eq!(t.as_slice(), &[0.25, 0.75]);
    }
}
