use ergomix::rng;
use ergomix::sim::{self, NodeScenario, Policy, Scenario, ScenarioConfig, Subset};
use ergomix::{Matrix, RegionGraph};

fn quick(trials: usize, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        steps: 6,
        observations_per_visit: 60,
        structure_points_per_node: 120,
        anomaly_points: 60,
        rollouts: 32,
        trials,
        seed,
        ..ScenarioConfig::default()
    }
}

#[test]
fn anomalous_fraction_matches_generative_mean() {
    let config = ScenarioConfig {
        structure_points_per_node: 10,
        anomaly_points: 10,
        trials: 500,
        seed: 21,
        ..ScenarioConfig::default()
    };
    let mut anomalous = 0usize;
    let mut total = 0usize;
    for t in 0..config.trials {
        let s = sim::scenario_for_trial(&config, t).unwrap();
        anomalous += s.labels().iter().filter(|&&a| a).count();
        total += s.nodes.len();
    }
    let frac = anomalous as f64 / total as f64;
    assert!((frac - 0.5).abs() < 0.05, "{frac}");
}

#[test]
fn folded_normal_displacement() {
    let config = ScenarioConfig {
        observations_per_visit: 200_000,
        ..ScenarioConfig::default()
    };
    let node = NodeScenario {
        anomaly_probability: 0.0,
        anomalous: false,
        prior_h1: 0.5,
        cube_origin: None,
        reference: vec![],
        surface: vec![[1.0, 2.0, 3.0]],
    };
    let scenario = Scenario { nodes: vec![node] };
    let obs = sim::observe_node(&scenario, &config, 0, &mut rng::stream(1, "fold", 0)).unwrap();
    let want = (2.0 * 40.0 / std::f64::consts::PI).sqrt();
    for (axis, centre) in [1.0, 2.0, 3.0].iter().enumerate() {
        let m = obs.iter().map(|o| (o.position[axis] - centre).abs()).sum::<f64>() / obs.len() as f64;
        assert!((m - want).abs() < 0.05, "axis {axis}: {m} vs {want}");
    }
    assert!(obs.iter().all(|o| o.covariance == config.noise_cov));
}

#[test]
fn clean_nodes_sample_only_the_beam() {
    let config = ScenarioConfig {
        noise_cov: Matrix::zeros(3, 3),
        ..quick(1, 3)
    };
    let s = sim::scenario_for_trial(&config, 0).unwrap();
    let on_beam = |p: &[f64]| {
        let flange = (p[2].abs() - 170.0).abs() < 1e-9 && p[1].abs() <= 50.0;
        let web = (p[1] - 10.0).abs() < 1e-9 && p[2].abs() <= 150.0;
        (0.0..=400.0).contains(&p[0]) && (flange || web)
    };
    for (i, node) in s.nodes.iter().enumerate() {
        let obs = sim::observe_node(&s, &config, i, &mut rng::stream(0, "clean", i as u64)).unwrap();
        let off_beam = obs.iter().filter(|o| !on_beam(&o.position)).count();
        if node.anomalous {
            assert!(off_beam > 0);
        } else {
            assert_eq!(off_beam, 0);
        }
    }
}

#[test]
fn bce_examples() {
    assert!(sim::bce_loss(&[1.0, 0.0], &[true, false], Subset::All).unwrap() < 1e-11);
    assert!((sim::bce_loss(&[0.5; 3], &[true, false, true], Subset::All).unwrap() - 2f64.ln()).abs() < 1e-12);
    assert!((sim::bce_loss(&[0.7, 0.1], &[true, false], Subset::AnomalousOnly).unwrap() + 0.7f64.ln()).abs() < 1e-12);
    assert_eq!(sim::bce_loss(&[0.7], &[false], Subset::AnomalousOnly), None);
}

#[test]
fn trials_are_reproducible_and_share_scenarios() {
    let config = quick(3, 8);
    let a = sim::run_simulation(&config, &Policy::ALL, 2).unwrap();
    let b = sim::run_simulation(&config, &Policy::ALL, 1).unwrap();
    assert_eq!(a, b);
    for t in 0..3 {
        let rows: Vec<_> = a.iter().filter(|r| r.trial == t).collect();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.anomaly_labels == rows[0].anomaly_labels));
        for r in &rows {
            assert_eq!(r.visit_sequence[0], 0);
            assert!(r.visit_sequence.len() <= config.steps + 1);
            assert!(r.final_max_h1.iter().all(|&p| p > 0.0 && p < 1.0));
            for w in r.visit_sequence.windows(2) {
                assert!(config.graph.has_edge(w[0], w[1]));
            }
        }
    }
}

#[test]
fn matched_visits_see_identical_noise() {
    // Two policies that visit the same node for the first time must see the
    // same observations: the start node is always observed first.
    let config = ScenarioConfig { steps: 0, ..quick(2, 4) };
    let recs = sim::run_simulation(&config, &Policy::ALL, 1).unwrap();
    for t in 0..2 {
        let rows: Vec<_> = recs.iter().filter(|r| r.trial == t).collect();
        assert!(rows.iter().all(|r| r.final_max_h1 == rows[0].final_max_h1));
    }
}

#[test]
fn one_node_policies_agree() {
    let graph = RegionGraph::new(1, [], true).unwrap();
    let config = ScenarioConfig { graph, ..quick(2, 6) };
    let recs = sim::run_simulation(&config, &Policy::ALL, 1).unwrap();
    for t in 0..2 {
        let rows: Vec<_> = recs.iter().filter(|r| r.trial == t).collect();
        assert!(rows.iter().all(|r| r.bce_all == rows[0].bce_all && r.visit_sequence == rows[0].visit_sequence));
    }
}

#[test]
fn clamping_is_rare() {
    let config = quick(4, 10);
    let recs = sim::run_simulation(&config, &Policy::ALL, 2).unwrap();
    let updates: usize = recs.iter().map(|r| r.updates).sum();
    let clamped: usize = recs.iter().map(|r| r.clamped_updates).sum();
    assert!(updates > 0);
    assert!((clamped as f64) < 0.01 * updates as f64, "{clamped}/{updates}");
}

#[test]
fn csv_and_summary_shapes() {
    let config = quick(2, 12);
    let recs = sim::run_simulation(&config, &[Policy::Random], 1).unwrap();
    let mut buf = Vec::new();
    sim::write_records_csv(&mut buf, &recs).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().next().unwrap().starts_with("trial,policy"));
    let summary = sim::format_summary(&sim::summarize(&recs, &[Policy::Random]), 2);
    assert!(summary.contains("±"));
}
