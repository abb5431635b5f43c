//! Point-cloud anomaly detection by two-hypothesis Bayesian testing.
//!
//! Every observed point carries a Gaussian uncertainty. For the reference
//! point it associates with, the detector measures the smallest Mahalanobis
//! distance from the observation to two halfspaces:
//!
//! - `H₀`: the reference plane or anything behind it (no anomaly);
//! - `H₁`: anything beyond the plane pushed outward by `epsilon` along the
//!   normal (an anomaly larger than the allowed deviation).
//!
//! Squared distances of the `k` observations nearest to a reference point
//! are summed and turned into likelihoods through the chi-squared tail with
//! `dimension · k` degrees of freedom. Beliefs are then updated recursively
//! with a smoothing constant added to both likelihoods.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, dot, LinalgError, Matrix, PsdFactor};
use crate::tol;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectorError {
    #[error("covariance is not positive semidefinite")]
    NotPsd,
    #[error("covariance is singular along the plane normal even after regularization")]
    SingularCovariance,
    #[error("no reference points in structure")]
    EmptyStructure,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("normal vector has zero length")]
    ZeroNormal,
    #[error("belief {0} outside (0, 1)")]
    InvalidBelief(f64),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl From<LinalgError> for DetectorError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::NotPsd { .. } => DetectorError::NotPsd,
            other => DetectorError::Dimension(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, DetectorError>;

/// Planar robot pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2 {
    /// Creates a pose with `theta` wrapped into `(−π, π]`.
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }
}

fn wrap_angle(theta: f64) -> f64 {
    use std::f64::consts::PI;
    let mut t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    if t <= -PI {
        t += 2.0 * PI;
    }
    t
}

/// A globally framed observation with its covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedPoint {
    pub position: Vec<f64>,
    pub covariance: Matrix,
}

impl ObservedPoint {
    pub fn new(position: Vec<f64>, covariance: Matrix) -> Result<Self> {
        let d = position.len();
        if covariance.rows() != d || covariance.cols() != d {
            return Err(DetectorError::Dimension(format!(
                "point has dimension {d}, covariance is {}x{}",
                covariance.rows(),
                covariance.cols()
            )));
        }
        if !covariance.is_symmetric(tol::SYMMETRY_TOL * covariance.max_abs().max(1.0)) {
            return Err(DetectorError::NotPsd);
        }
        PsdFactor::new(&covariance)?;
        Ok(Self {
            position,
            covariance,
        })
    }

    pub fn dim(&self) -> usize {
        self.position.len()
    }
}

/// A reference-model point with its outward unit normal and the persistent
/// belief over the two hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub position: Vec<f64>,
    pub normal: Vec<f64>,
    pub belief_h0: f64,
    pub belief_h1: f64,
}

impl ReferencePoint {
    /// Normalizes `normal` and sets the beliefs from `prior_h1` (clamped).
    pub fn new(position: Vec<f64>, normal: Vec<f64>, prior_h1: f64) -> Result<Self> {
        if position.len() != normal.len() {
            return Err(DetectorError::Dimension(
                "position and normal differ in dimension".into(),
            ));
        }
        let len = linalg::norm2(&normal);
        if !(len > 0.0) || !len.is_finite() {
            return Err(DetectorError::ZeroNormal);
        }
        if !(0.0..=1.0).contains(&prior_h1) {
            return Err(DetectorError::InvalidBelief(prior_h1));
        }
        let h1 = clamp_belief(prior_h1);
        Ok(Self {
            position,
            normal: normal.iter().map(|v| v / len).collect(),
            belief_h0: 1.0 - h1,
            belief_h1: h1,
        })
    }

    pub fn dim(&self) -> usize {
        self.position.len()
    }

    /// Binary entropy of the current belief, in nats.
    pub fn entropy(&self) -> f64 {
        binary_entropy(self.belief_h1)
    }
}

fn clamp_belief(p: f64) -> f64 {
    p.clamp(tol::BELIEF_CLAMP, 1.0 - tol::BELIEF_CLAMP)
}

/// `−p ln p − (1−p) ln(1−p)`, zero at the endpoints.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// Detector parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Allowed outward deviation before a point counts as anomalous.
    pub epsilon: f64,
    /// Constant added to both likelihoods before the Bayes update.
    pub smoothing_c: f64,
    /// Number of nearest observations pooled per reference point.
    pub neighborhood_k: usize,
    /// Spatial dimension, 2 or 3.
    pub dimension: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            epsilon: 20.0,
            smoothing_c: 0.5,
            neighborhood_k: 5,
            dimension: 3,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !(self.smoothing_c >= 0.0) || self.neighborhood_k == 0 {
            return Err(DetectorError::Dimension(
                "epsilon and smoothing_c must be nonnegative and neighborhood_k positive".into(),
            ));
        }
        if self.dimension != 2 && self.dimension != 3 {
            return Err(DetectorError::Dimension(format!(
                "dimension must be 2 or 3, got {}",
                self.dimension
            )));
        }
        Ok(())
    }
}

/// Propagates pose and sensor uncertainty of a body-frame point into the
/// global frame: `Σ = J Σ_X Jᵀ + R Σ_local Rᵀ`.
pub fn propagate_covariance_2d(
    pose: Pose2,
    pose_cov: &Matrix,
    local_point: [f64; 2],
    local_cov: &Matrix,
) -> Result<ObservedPoint> {
    if (pose_cov.rows(), pose_cov.cols()) != (3, 3) || (local_cov.rows(), local_cov.cols()) != (2, 2)
    {
        return Err(DetectorError::Dimension(
            "pose covariance must be 3x3 and local covariance 2x2".into(),
        ));
    }
    PsdFactor::new(pose_cov)?;
    PsdFactor::new(local_cov)?;
    let (s, c) = pose.theta.sin_cos();
    let [px, py] = local_point;
    let rot = Matrix::from_rows(&[[c, -s], [s, c]]);
    let jac = Matrix::from_rows(&[[1.0, 0.0, -py * c - px * s], [0.0, 1.0, px * c - py * s]]);
    let from_pose = jac.matmul(pose_cov).matmul(&jac.transpose());
    let from_sensor = rot.matmul(local_cov).matmul(&rot.transpose());
    let mut cov = from_pose.add(&from_sensor);
    // exact symmetry
    let off = 0.5 * (cov[(0, 1)] + cov[(1, 0)]);
    cov[(0, 1)] = off;
    cov[(1, 0)] = off;
    let position = vec![pose.x + c * px - s * py, pose.y + s * px + c * py];
    ObservedPoint::new(position, cov)
}

/// Which side of the plane a hypothesis occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalfSpace {
    /// `n·x ≤ n·plane_point`: on the plane or behind it.
    Inside,
    /// `n·x ≥ n·plane_point`: on the plane or beyond it.
    Outside,
}

/// Smallest squared Mahalanobis distance from `point` to a halfspace,
/// together with the minimizing location.
///
/// Returns `(position, 0)` when the point already lies in the halfspace.
/// Otherwise the minimizer sits on the bounding plane and solves the
/// Lagrangian stationarity system `Σ⁻¹(μ − p) = λ n`, `n·μ = n·plane_point`,
/// whose solution is `μ = p − Σn (n·p − c) / (nᵀΣn)`.
pub fn halfspace_projection(
    point: &ObservedPoint,
    plane_point: &[f64],
    normal: &[f64],
    side: HalfSpace,
) -> Result<(Vec<f64>, f64)> {
    let d = point.dim();
    if plane_point.len() != d || normal.len() != d {
        return Err(DetectorError::Dimension(
            "plane and point dimensions differ".into(),
        ));
    }
    let offset = dot(normal, &point.position) - dot(normal, plane_point);
    let inside = match side {
        HalfSpace::Inside => offset <= 0.0,
        HalfSpace::Outside => offset >= 0.0,
    };
    if inside {
        return Ok((point.position.clone(), 0.0));
    }
    let mut sigma_n = point.covariance.mul_vec(normal);
    let mut curvature = dot(normal, &sigma_n);
    if !(curvature > tol::COV_REGULARIZATION * dot(normal, normal)) {
        for (s, n) in sigma_n.iter_mut().zip(normal) {
            *s += tol::COV_REGULARIZATION * n;
        }
        curvature = dot(normal, &sigma_n);
        if !(curvature > 0.0) || !curvature.is_finite() {
            return Err(DetectorError::SingularCovariance);
        }
    }
    let step = offset / curvature;
    let mu = point
        .position
        .iter()
        .zip(&sigma_n)
        .map(|(p, s)| p - step * s)
        .collect();
    Ok((mu, offset * offset / curvature))
}

/// Chi-squared likelihoods of the pooled squared distances under each
/// hypothesis, with `dimension · k` degrees of freedom.
pub fn hypothesis_likelihoods(d0_sum: f64, d1_sum: f64, k: usize, dimension: usize) -> (f64, f64) {
    let dof = (dimension * k) as u32;
    (
        linalg::chi2_survival(d0_sum.max(0.0), dof),
        linalg::chi2_survival(d1_sum.max(0.0), dof),
    )
}

/// One recursive Bayes step with additive smoothing on both likelihoods.
pub fn bayes_update(
    reference: &ReferencePoint,
    likelihood_h0: f64,
    likelihood_h1: f64,
    smoothing_c: f64,
) -> ReferencePoint {
    let a = (likelihood_h0 + smoothing_c) * reference.belief_h0;
    let b = (likelihood_h1 + smoothing_c) * reference.belief_h1;
    let total = a + b;
    let h1 = if total > 0.0 && total.is_finite() {
        clamp_belief(b / total)
    } else {
        reference.belief_h1
    };
    ReferencePoint {
        belief_h0: 1.0 - h1,
        belief_h1: h1,
        ..reference.clone()
    }
}

/// Summary of one batch update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchReport {
    /// Indices of reference points that received an update.
    pub updated: Vec<usize>,
    /// Number of updated beliefs that hit the clamp.
    pub clamped: usize,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest reference point; ties go to the lowest index.
pub fn nearest_reference(refs: &[ReferencePoint], point: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in refs.iter().enumerate() {
        let d = squared_distance(&r.position, point);
        if best.map_or(true, |(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

/// Applies one batch of observations to a structure's reference points.
///
/// Each observation is associated with its nearest reference point. Every
/// reference point with at least one association pools the `k` observations
/// nearest to it (fewer if the batch is smaller), sums the squared halfspace
/// distances for both hypotheses and takes a single Bayes step.
pub fn process_observation_batch(
    refs: &mut [ReferencePoint],
    observations: &[ObservedPoint],
    config: &DetectorConfig,
) -> Result<BatchReport> {
    config.validate()?;
    let mut report = BatchReport::default();
    if refs.is_empty() || observations.is_empty() {
        return Ok(report);
    }
    let d = config.dimension;
    if refs.iter().any(|r| r.dim() != d) || observations.iter().any(|o| o.dim() != d) {
        return Err(DetectorError::Dimension(format!(
            "all points must have dimension {d}"
        )));
    }

    let mut touched = vec![false; refs.len()];
    for obs in observations {
        if let Some(i) = nearest_reference(refs, &obs.position) {
            touched[i] = true;
        }
    }

    let k = config.neighborhood_k.min(observations.len());
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(observations.len());
    for (ri, _) in touched.iter().enumerate().filter(|(_, &t)| t) {
        let reference = &refs[ri];
        order.clear();
        order.extend(
            observations
                .iter()
                .enumerate()
                .map(|(oi, o)| (squared_distance(&o.position, &reference.position), oi)),
        );
        if k < order.len() {
            order.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        let shifted: Vec<f64> = reference
            .position
            .iter()
            .zip(&reference.normal)
            .map(|(p, n)| p + config.epsilon * n)
            .collect();
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for &(_, oi) in &order[..k] {
            let obs = &observations[oi];
            d0 += halfspace_projection(obs, &reference.position, &reference.normal, HalfSpace::Inside)?.1;
            d1 += halfspace_projection(obs, &shifted, &reference.normal, HalfSpace::Outside)?.1;
        }
        let (l0, l1) = hypothesis_likelihoods(d0, d1, k, d);
        let updated = bayes_update(reference, l0, l1, config.smoothing_c);
        if updated.belief_h1 <= tol::BELIEF_CLAMP || updated.belief_h1 >= 1.0 - tol::BELIEF_CLAMP {
            report.clamped += 1;
        }
        refs[ri] = updated;
        report.updated.push(ri);
    }
    Ok(report)
}

/// Largest binary entropy among a structure's reference points.
pub fn region_entropy(refs: &[ReferencePoint]) -> Result<f64> {
    refs.iter()
        .map(ReferencePoint::entropy)
        .fold(None, |acc: Option<f64>, h| Some(acc.map_or(h, |a| a.max(h))))
        .ok_or(DetectorError::EmptyStructure)
}

fn parse_fields(line: &str, lineno: usize) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|e| DetectorError::Parse {
                line: lineno,
                message: format!("bad number {tok:?}: {e}"),
            })
        })
        .collect()
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Parses reference points: `x y [z] nx ny [nz] [belief_h1]` per line.
///
/// Missing beliefs default to `default_h1`.
pub fn parse_reference_points(text: &str, dimension: usize, default_h1: f64) -> Result<Vec<ReferencePoint>> {
    let mut out = Vec::new();
    for (lineno, line) in data_lines(text) {
        let f = parse_fields(line, lineno)?;
        let belief = match f.len() {
            n if n == 2 * dimension => default_h1,
            n if n == 2 * dimension + 1 => f[2 * dimension],
            n => {
                return Err(DetectorError::Parse {
                    line: lineno,
                    message: format!("expected {} or {} fields, got {n}", 2 * dimension, 2 * dimension + 1),
                })
            }
        };
        let r = ReferencePoint::new(
            f[..dimension].to_vec(),
            f[dimension..2 * dimension].to_vec(),
            belief,
        )
        .map_err(|e| DetectorError::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        out.push(r);
    }
    Ok(out)
}

pub fn write_reference_points(refs: &[ReferencePoint]) -> String {
    let mut s = String::new();
    for r in refs {
        let fields: Vec<String> = r
            .position
            .iter()
            .chain(&r.normal)
            .chain(std::iter::once(&r.belief_h1))
            .map(|v| format!("{v}"))
            .collect();
        let _ = writeln!(s, "{}", fields.join(" "));
    }
    s
}

/// Parses observations: position followed by the row-major covariance.
pub fn parse_observations(text: &str, dimension: usize) -> Result<Vec<ObservedPoint>> {
    let expected = dimension + dimension * dimension;
    let mut out = Vec::new();
    for (lineno, line) in data_lines(text) {
        let f = parse_fields(line, lineno)?;
        if f.len() != expected {
            return Err(DetectorError::Parse {
                line: lineno,
                message: format!("expected {expected} fields, got {}", f.len()),
            });
        }
        let cov = Matrix::from_row_major(dimension, dimension, f[dimension..].to_vec());
        let p = ObservedPoint::new(f[..dimension].to_vec(), cov).map_err(|e| DetectorError::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        out.push(p);
    }
    Ok(out)
}

pub fn write_observations(points: &[ObservedPoint]) -> String {
    let mut s = String::new();
    for p in points {
        let fields: Vec<String> = p
            .position
            .iter()
            .chain(p.covariance.as_slice())
            .map(|v| format!("{v}"))
            .collect();
        let _ = writeln!(s, "{}", fields.join(" "));
    }
    s
}
