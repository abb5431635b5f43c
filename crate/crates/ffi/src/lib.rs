//! C ABI over `ergomix`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_load`
//! functions and released with the matching `*_free`. Every fallible call
//! returns an [`ErgomixStatus`]; on failure a message is available from
//! [`ergomix_last_error`] until the next failing call on the same thread.
//!
//! Matrices are exchanged row-major. Transition matrices are column
//! stochastic: entry `(j, i)` is the probability of moving from `i` to `j`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use ergomix::chain::ChainError;
use ergomix::detector::{self, DetectorConfig, ObservedPoint, ReferencePoint};
use ergomix::linalg::{self, Matrix};
use ergomix::sequencer::plan_sequence;
use ergomix::{rng, ChainSolution, Method, RegionGraph, SolverSettings, TargetDistribution};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErgomixStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    ValidationError = 4,
    SolverError = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Chain construction method.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErgomixMethod {
    MetropolisHastings = 0,
    Fmrmc = 1,
    UpperBound = 2,
    ModifiedUpperBound = 3,
}

impl From<ErgomixMethod> for Method {
    fn from(m: ErgomixMethod) -> Self {
        match m {
            ErgomixMethod::MetropolisHastings => Method::MetropolisHastings,
            ErgomixMethod::Fmrmc => Method::Fmrmc,
            ErgomixMethod::UpperBound => Method::UpperBound,
            ErgomixMethod::ModifiedUpperBound => Method::ModifiedUpperBound,
        }
    }
}

/// Solver settings; obtain defaults from [`ergomix_solver_settings_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ErgomixSolverSettings {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub barrier_growth: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl From<ErgomixSolverSettings> for SolverSettings {
    fn from(s: ErgomixSolverSettings) -> Self {
        SolverSettings {
            max_iterations: s.max_iterations,
            tolerance: s.tolerance,
            barrier_growth: s.barrier_growth,
            restarts: s.restarts,
            seed: s.seed,
        }
    }
}

/// Detector parameters.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ErgomixDetectorConfig {
    pub epsilon: f64,
    pub smoothing_c: f64,
    pub neighborhood_k: usize,
    pub dimension: usize,
}

impl From<ErgomixDetectorConfig> for DetectorConfig {
    fn from(c: ErgomixDetectorConfig) -> Self {
        DetectorConfig {
            epsilon: c.epsilon,
            smoothing_c: c.smoothing_c,
            neighborhood_k: c.neighborhood_k,
            dimension: c.dimension,
        }
    }
}

/// Opaque region graph.
pub struct ErgomixGraph(RegionGraph);

/// Opaque chain solution.
pub struct ErgomixSolution(ChainSolution);

/// Opaque set of reference points with their beliefs.
pub struct ErgomixReferenceSet {
    dimension: usize,
    points: Vec<ReferencePoint>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).expect("no interior nul")));
}

fn fail(status: ErgomixStatus, msg: impl Into<String>) -> ErgomixStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> ErgomixStatus) -> ErgomixStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(ErgomixStatus::Panic, "internal panic"),
    }
}

fn chain_status(e: &ChainError) -> ErgomixStatus {
    match e {
        ChainError::Graph(_) | ChainError::SizeMismatch { .. } => ErgomixStatus::ValidationError,
        _ => ErgomixStatus::SolverError,
    }
}

unsafe fn input_slice<'a, T>(p: *const T, len: usize) -> Option<&'a [T]> {
    if len == 0 {
        Some(&[])
    } else if p.is_null() {
        None
    } else {
        Some(slice::from_raw_parts(p, len))
    }
}

unsafe fn c_str<'a>(p: *const c_char) -> Result<&'a str, ErgomixStatus> {
    if p.is_null() {
        return Err(fail(ErgomixStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(ErgomixStatus::ParseError, "string is not valid UTF-8"))
}

/// Message of the last failure on this thread, or NULL. Valid until the next
/// failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn ergomix_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ergomix_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub extern "C" fn ergomix_solver_settings_default() -> ErgomixSolverSettings {
    let s = SolverSettings::default();
    ErgomixSolverSettings {
        max_iterations: s.max_iterations,
        tolerance: s.tolerance,
        barrier_growth: s.barrier_growth,
        restarts: s.restarts,
        seed: s.seed,
    }
}

#[no_mangle]
pub extern "C" fn ergomix_detector_config_default() -> ErgomixDetectorConfig {
    let c = DetectorConfig::default();
    ErgomixDetectorConfig {
        epsilon: c.epsilon,
        smoothing_c: c.smoothing_c,
        neighborhood_k: c.neighborhood_k,
        dimension: c.dimension,
    }
}

/// Parses a graph from its JSON description.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ergomix_graph_from_json(json: *const c_char, out: *mut *mut ErgomixGraph) -> ErgomixStatus {
    guard(|| {
        if out.is_null() {
            return fail(ErgomixStatus::NullPointer, "out is null");
        }
        let text = match c_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match RegionGraph::from_json(text) {
            Ok(g) => {
                *out = Box::into_raw(Box::new(ErgomixGraph(g)));
                ErgomixStatus::Ok
            }
            Err(e) => fail(ErgomixStatus::ParseError, e.to_string()),
        }
    })
}

/// The bundled 9-node benchmark graph, with or without its two one-way edges.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ergomix_graph_benchmark(directed: bool, out: *mut *mut ErgomixGraph) -> ErgomixStatus {
    guard(|| {
        if out.is_null() {
            return fail(ErgomixStatus::NullPointer, "out is null");
        }
        let g = if directed { RegionGraph::fig2_directed() } else { RegionGraph::fig2_undirected() };
        *out = Box::into_raw(Box::new(ErgomixGraph(g)));
        ErgomixStatus::Ok
    })
}

/// # Safety
/// `graph` must be NULL or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn ergomix_graph_free(graph: *mut ErgomixGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Number of nodes, or 0 for a NULL handle.
///
/// # Safety
/// `graph` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ergomix_graph_node_count(graph: *const ErgomixGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.node_count())
}

/// Checks irreducibility and aperiodicity.
///
/// # Safety
/// `graph` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ergomix_graph_validate(graph: *const ErgomixGraph) -> ErgomixStatus {
    guard(|| match graph.as_ref() {
        None => fail(ErgomixStatus::NullPointer, "graph is null"),
        Some(g) => match ergomix::graph::validate_graph(&g.0) {
            Ok(_) => ErgomixStatus::Ok,
            Err(e) => fail(ErgomixStatus::ValidationError, e.to_string()),
        },
    })
}

/// Builds a chain on `graph` whose stationary distribution is `weights`
/// (normalized internally). `settings` may be NULL for defaults.
///
/// # Safety
/// `weights` must point to `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ergomix_solve(
    graph: *const ErgomixGraph,
    method: ErgomixMethod,
    weights: *const f64,
    len: usize,
    settings: *const ErgomixSolverSettings,
    out: *mut *mut ErgomixSolution,
) -> ErgomixStatus {
    guard(|| {
        let (Some(g), false) = (graph.as_ref(), out.is_null()) else {
            return fail(ErgomixStatus::NullPointer, "graph or out is null");
        };
        let Some(w) = input_slice(weights, len) else {
            return fail(ErgomixStatus::NullPointer, "weights is null");
        };
        let target = match TargetDistribution::normalized(w) {
            Ok(t) => t,
            Err(e) => return fail(ErgomixStatus::InvalidArgument, e.to_string()),
        };
        let settings: SolverSettings = settings.as_ref().map_or_else(SolverSettings::default, |s| (*s).into());
        match Method::from(method).solve(&g.0, &target, &settings) {
            Ok(sol) => {
                *out = Box::into_raw(Box::new(ErgomixSolution(sol)));
                ErgomixStatus::Ok
            }
            Err(e) => fail(chain_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `solution` must be NULL or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn ergomix_solution_free(solution: *mut ErgomixSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// SLEM of the solution, NaN for a NULL handle.
///
/// # Safety
/// `solution` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ergomix_solution_slem(solution: *const ErgomixSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.0.slem)
}

/// Objective value (spectral norm minimized by the method), NaN for NULL.
///
/// # Safety
/// `solution` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ergomix_solution_objective(solution: *const ErgomixSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.0.objective_value)
}

/// Copies the `n × n` transition matrix, row-major, into `buf` of length `cap`.
///
/// # Safety
/// `buf` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn ergomix_solution_transition(
    solution: *const ErgomixSolution,
    buf: *mut f64,
    cap: usize,
) -> ErgomixStatus {
    guard(|| {
        let Some(s) = solution.as_ref() else {
            return fail(ErgomixStatus::NullPointer, "solution is null");
        };
        let data = s.0.transition.as_slice();
        if cap < data.len() {
            return fail(ErgomixStatus::BufferTooSmall, format!("need {} entries", data.len()));
        }
        if buf.is_null() {
            return fail(ErgomixStatus::NullPointer, "buf is null");
        }
        ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len());
        ErgomixStatus::Ok
    })
}

/// JSON serialization; free the result with [`ergomix_string_free`].
///
/// # Safety
/// `solution` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ergomix_solution_to_json(solution: *const ErgomixSolution) -> *mut c_char {
    match solution.as_ref() {
        None => {
            set_error("solution is null");
            ptr::null_mut()
        }
        Some(s) => CString::new(s.0.to_json()).map_or(ptr::null_mut(), CString::into_raw),
    }
}

/// Plans a `horizon`-long region sequence (best of `rollouts`) starting at
/// `start`. Writes the regions to `regions` (capacity `cap`) and the total
/// variation cost to `tv_cost` (may be NULL).
///
/// # Safety
/// `regions` must hold `cap` entries.
#[no_mangle]
pub unsafe extern "C" fn ergomix_plan_sequence(
    solution: *const ErgomixSolution,
    start: usize,
    horizon: usize,
    rollouts: usize,
    seed: u64,
    regions: *mut usize,
    cap: usize,
    tv_cost: *mut f64,
) -> ErgomixStatus {
    guard(|| {
        let Some(s) = solution.as_ref() else {
            return fail(ErgomixStatus::NullPointer, "solution is null");
        };
        if start >= s.0.node_count() || horizon == 0 || rollouts == 0 {
            return fail(ErgomixStatus::InvalidArgument, "start out of range or zero horizon/rollouts");
        }
        if cap < horizon {
            return fail(ErgomixStatus::BufferTooSmall, format!("need {horizon} entries"));
        }
        if regions.is_null() {
            return fail(ErgomixStatus::NullPointer, "regions is null");
        }
        let seq = plan_sequence(&s.0, start, horizon, rollouts, &mut rng::stream(seed, "sequence", 0));
        ptr::copy_nonoverlapping(seq.regions.as_ptr(), regions, horizon);
        if !tv_cost.is_null() {
            *tv_cost = seq.tv_cost;
        }
        ErgomixStatus::Ok
    })
}

/// Upper-tail probability of a chi-squared variable.
#[no_mangle]
pub extern "C" fn ergomix_chi2_survival(x: f64, dof: u32) -> f64 {
    linalg::chi2_survival(x, dof.max(1))
}

/// Empty reference set of the given dimension (2 or 3).
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ergomix_reference_set_new(dimension: usize, out: *mut *mut ErgomixReferenceSet) -> ErgomixStatus {
    guard(|| {
        if out.is_null() {
            return fail(ErgomixStatus::NullPointer, "out is null");
        }
        if dimension != 2 && dimension != 3 {
            return fail(ErgomixStatus::InvalidArgument, "dimension must be 2 or 3");
        }
        *out = Box::into_raw(Box::new(ErgomixReferenceSet { dimension, points: Vec::new() }));
        ErgomixStatus::Ok
    })
}

/// # Safety
/// `set` must be NULL or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn ergomix_reference_set_free(set: *mut ErgomixReferenceSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Appends a reference point; `position` and `normal` hold `dimension` values.
///
/// # Safety
/// Pointers must reference `dimension` doubles each.
#[no_mangle]
pub unsafe extern "C" fn ergomix_reference_set_add(
    set: *mut ErgomixReferenceSet,
    position: *const f64,
    normal: *const f64,
    prior_h1: f64,
) -> ErgomixStatus {
    guard(|| {
        let Some(set) = set.as_mut() else {
            return fail(ErgomixStatus::NullPointer, "set is null");
        };
        let d = set.dimension;
        let (Some(p), Some(n)) = (input_slice(position, d), input_slice(normal, d)) else {
            return fail(ErgomixStatus::NullPointer, "position or normal is null");
        };
        match ReferencePoint::new(p.to_vec(), n.to_vec(), prior_h1) {
            Ok(r) => {
                set.points.push(r);
                ErgomixStatus::Ok
            }
            Err(e) => fail(ErgomixStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Number of points, 0 for NULL.
///
/// # Safety
/// `set` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ergomix_reference_set_len(set: *const ErgomixReferenceSet) -> usize {
    set.as_ref().map_or(0, |s| s.points.len())
}

/// P(H1) of point `index`, NaN when out of range.
///
/// # Safety
/// `set` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ergomix_reference_set_belief_h1(set: *const ErgomixReferenceSet, index: usize) -> f64 {
    set.as_ref().and_then(|s| s.points.get(index)).map_or(f64::NAN, |r| r.belief_h1)
}

/// Largest binary entropy among the points, NaN when empty or NULL.
///
/// # Safety
/// `set` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ergomix_reference_set_entropy(set: *const ErgomixReferenceSet) -> f64 {
    set.as_ref().and_then(|s| detector::region_entropy(&s.points).ok()).unwrap_or(f64::NAN)
}

/// Applies one observation batch. `positions` holds `count × d` values and
/// `covariances` `count × d × d` values (row-major per point). `config` may
/// be NULL for defaults; its dimension must match the set.
///
/// # Safety
/// Arrays must have the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn ergomix_reference_set_observe(
    set: *mut ErgomixReferenceSet,
    positions: *const f64,
    covariances: *const f64,
    count: usize,
    config: *const ErgomixDetectorConfig,
) -> ErgomixStatus {
    guard(|| {
        let Some(set) = set.as_mut() else {
            return fail(ErgomixStatus::NullPointer, "set is null");
        };
        let d = set.dimension;
        let (Some(pos), Some(cov)) = (input_slice(positions, count * d), input_slice(covariances, count * d * d)) else {
            return fail(ErgomixStatus::NullPointer, "positions or covariances is null");
        };
        let config: DetectorConfig = config.as_ref().map_or_else(
            || DetectorConfig {
                dimension: d,
                ..DetectorConfig::default()
            },
            |c| (*c).into(),
        );
        if config.dimension != d {
            return fail(ErgomixStatus::InvalidArgument, "config dimension differs from the set");
        }
        let mut obs = Vec::with_capacity(count);
        for i in 0..count {
            let c = Matrix::from_row_major(d, d, cov[i * d * d..(i + 1) * d * d].to_vec());
            match ObservedPoint::new(pos[i * d..(i + 1) * d].to_vec(), c) {
                Ok(o) => obs.push(o),
                Err(e) => return fail(ErgomixStatus::InvalidArgument, format!("observation {i}: {e}")),
            }
        }
        match detector::process_observation_batch(&mut set.points, &obs, &config) {
            Ok(_) => ErgomixStatus::Ok,
            Err(e) => fail(ErgomixStatus::InvalidArgument, e.to_string()),
        }
    })
}
