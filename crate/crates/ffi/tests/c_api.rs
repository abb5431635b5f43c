use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use ergomix_ffi::*;

fn last_error() -> String {
    let p = ergomix_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn benchmark(directed: bool) -> *mut ErgomixGraph {
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { ergomix_graph_benchmark(directed, &mut g) }, ErgomixStatus::Ok);
    g
}

#[test]
fn solve_and_read_back() {
    let g = benchmark(false);
    let n = unsafe { ergomix_graph_node_count(g) };
    assert_eq!(n, 9);
    assert_eq!(unsafe { ergomix_graph_validate(g) }, ErgomixStatus::Ok);

    let w: Vec<f64> = (1..=n).map(|i| i as f64).collect();
    let mut sol = ptr::null_mut();
    let st = unsafe { ergomix_solve(g, ErgomixMethod::Fmrmc, w.as_ptr(), n, ptr::null(), &mut sol) };
    assert_eq!(st, ErgomixStatus::Ok);
    let slem = unsafe { ergomix_solution_slem(sol) };
    assert!(slem > 0.0 && slem < 1.0);
    assert!((unsafe { ergomix_solution_objective(sol) } - slem).abs() < 1e-6);

    let mut p = vec![0.0; n * n];
    assert_eq!(
        unsafe { ergomix_solution_transition(sol, p.as_mut_ptr(), p.len() - 1) },
        ErgomixStatus::BufferTooSmall
    );
    assert_eq!(unsafe { ergomix_solution_transition(sol, p.as_mut_ptr(), p.len()) }, ErgomixStatus::Ok);
    let total: f64 = w.iter().sum();
    for i in 0..n {
        let col: f64 = (0..n).map(|j| p[j * n + i]).sum();
        assert!((col - 1.0).abs() < 1e-9);
        let pw: f64 = (0..n).map(|k| p[i * n + k] * w[k] / total).sum();
        assert!((pw - w[i] / total).abs() < 1e-9);
    }

    let json = unsafe { ergomix_solution_to_json(sol) };
    assert!(!json.is_null());
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { ergomix_string_free(json) };
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["method"], "fmrmc");

    let mut regions = vec![usize::MAX; 10];
    let mut tv = f64::NAN;
    let st = unsafe { ergomix_plan_sequence(sol, 0, 10, 32, 7, regions.as_mut_ptr(), regions.len(), &mut tv) };
    assert_eq!(st, ErgomixStatus::Ok);
    assert_eq!(regions[0], 0);
    assert!(regions.iter().all(|&r| r < n));
    assert!((0.0..=1.0).contains(&tv));
    let mut again = vec![0usize; 10];
    unsafe { ergomix_plan_sequence(sol, 0, 10, 32, 7, again.as_mut_ptr(), 10, ptr::null_mut()) };
    assert_eq!(regions, again);

    unsafe {
        ergomix_solution_free(sol);
        ergomix_graph_free(g);
    }
}

#[test]
fn null_and_bad_arguments_report_errors() {
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { ergomix_graph_from_json(ptr::null(), &mut g) }, ErgomixStatus::NullPointer);
    let bad = CString::new("{not json").unwrap();
    assert_eq!(unsafe { ergomix_graph_from_json(bad.as_ptr(), &mut g) }, ErgomixStatus::ParseError);
    assert!(!last_error().is_empty());
    assert!(g.is_null());

    let g = benchmark(true);
    let mut sol = ptr::null_mut();
    let w = [1.0; 3];
    let st = unsafe { ergomix_solve(g, ErgomixMethod::UpperBound, w.as_ptr(), w.len(), ptr::null(), &mut sol) };
    assert_ne!(st, ErgomixStatus::Ok);
    assert!(sol.is_null());
    let neg = [-1.0; 9];
    let st = unsafe { ergomix_solve(g, ErgomixMethod::UpperBound, neg.as_ptr(), 9, ptr::null(), &mut sol) };
    assert_eq!(st, ErgomixStatus::InvalidArgument);
    let st = unsafe { ergomix_solve(ptr::null(), ErgomixMethod::UpperBound, neg.as_ptr(), 9, ptr::null(), &mut sol) };
    assert_eq!(st, ErgomixStatus::NullPointer);

    assert!(unsafe { ergomix_solution_slem(ptr::null()) }.is_nan());
    assert!(unsafe { ergomix_solution_to_json(ptr::null()) }.is_null());
    unsafe {
        ergomix_graph_free(g);
        ergomix_graph_free(ptr::null_mut());
        ergomix_solution_free(ptr::null_mut());
        ergomix_string_free(ptr::null_mut());
    }
}

#[test]
fn graph_from_json_roundtrip() {
    let json = CString::new(ergomix::RegionGraph::fig2_directed().to_json()).unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { ergomix_graph_from_json(json.as_ptr(), &mut g) }, ErgomixStatus::Ok);
    assert_eq!(unsafe { ergomix_graph_node_count(g) }, 9);
    let mut settings = ergomix_solver_settings_default();
    settings.restarts = 2;
    let w = [1.0; 9];
    let mut sol = ptr::null_mut();
    let st = unsafe { ergomix_solve(g, ErgomixMethod::ModifiedUpperBound, w.as_ptr(), 9, &settings, &mut sol) };
    assert_eq!(st, ErgomixStatus::Ok);
    unsafe {
        ergomix_solution_free(sol);
        ergomix_graph_free(g);
    }
}

#[test]
fn chi2_tail() {
    assert!((ergomix_chi2_survival(0.0, 3) - 1.0).abs() < 1e-12);
    // P(χ²₂ > x) = exp(-x/2)
    assert!((ergomix_chi2_survival(3.0, 2) - (-1.5f64).exp()).abs() < 1e-10);
}

#[test]
fn reference_set_updates() {
    let mut set = ptr::null_mut();
    assert_eq!(unsafe { ergomix_reference_set_new(4, &mut set) }, ErgomixStatus::InvalidArgument);
    assert_eq!(unsafe { ergomix_reference_set_new(3, &mut set) }, ErgomixStatus::Ok);
    for i in 0..5 {
        let p = [i as f64, 0.0, 0.0];
        let n = [0.0, 0.0, 1.0];
        assert_eq!(unsafe { ergomix_reference_set_add(set, p.as_ptr(), n.as_ptr(), 0.5) }, ErgomixStatus::Ok);
    }
    assert_eq!(unsafe { ergomix_reference_set_len(set) }, 5);
    assert_eq!(
        unsafe { ergomix_reference_set_add(set, [0.0; 3].as_ptr(), [0.0; 3].as_ptr(), 0.5) },
        ErgomixStatus::InvalidArgument
    );
    let h0 = unsafe { ergomix_reference_set_entropy(set) };
    assert!((h0 - std::f64::consts::LN_2).abs() < 1e-12);

    // Points sitting on the surface: beliefs drift toward "no anomaly".
    let mut pos = Vec::new();
    let mut cov = Vec::new();
    for i in 0..5 {
        pos.extend_from_slice(&[i as f64, 0.0, 0.0]);
        cov.extend_from_slice(&[1e-4, 0.0, 0.0, 0.0, 1e-4, 0.0, 0.0, 0.0, 1e-4]);
    }
    let mut cfg = ergomix_detector_config_default();
    cfg.dimension = 3;
    for _ in 0..3 {
        let st = unsafe { ergomix_reference_set_observe(set, pos.as_ptr(), cov.as_ptr(), 5, &cfg) };
        assert_eq!(st, ErgomixStatus::Ok, "{}", last_error());
    }
    for i in 0..5 {
        assert!(unsafe { ergomix_reference_set_belief_h1(set, i) } < 0.5);
    }
    assert!(unsafe { ergomix_reference_set_belief_h1(set, 99) }.is_nan());
    assert!(unsafe { ergomix_reference_set_entropy(set) } < h0);
    unsafe { ergomix_reference_set_free(set) };
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/ergomix.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["ergomix_solve", "ergomix_last_error", "ergomix_plan_sequence", "ergomix_reference_set_observe"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"]).arg(&header).output() else {
        eprintln!("no C compiler; skipping syntax check");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

/// Links a small C program against the static library, when one is around.
#[test]
fn c_program_links_and_runs() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let Some(profile_dir) = exe.parent().and_then(Path::parent) else { return };
    let lib = profile_dir.join("libergomix_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("static library or C compiler unavailable; skipping");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let out = Command::new("cc")
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}: {}", run.status.code(), String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("slem="));
}
