mod common;

use std::f64::consts::PI;
use std::fs;
use std::sync::Arc;

use common::sim::{moments_simpson, qoi_reference};
use mada::mcp::{ClientError, McpClient};
use mada::scheduler::{scheduler_server, JobState, Scheduler, SchedulerConfig};
use mada::sim::{
    energy_density, energy_moments, evaluate_design, generate_runs, get_qoi, mock_sim, qoi, read_diagnostics,
    register_mock_sim, sim_server, tracers, Deck, EnergyDesign, QoiParams, SimError, StagingOptions,
    TracerDiagnostics, DECK_FILE, DIAGNOSTICS_FILE, ENERGY_BOUNDS, QUADRATURE_POINTS,
};
use proptest::prelude::*;
use serde_json::json;

fn design(a1: f64, a2: f64, a3: f64, a4: f64) -> EnergyDesign {
    EnergyDesign { a1, a2, a3, a4 }
}

fn stage_one(d: EnergyDesign) -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let runs = generate_runs(&[d], dir.path(), &StagingOptions::default()).unwrap();
    (dir, runs[0].deck_path.clone())
}

fn diag(x1: f64, x2: f64, x3: f64, v: [f64; 3]) -> TracerDiagnostics {
    TracerDiagnostics { x1, x2, x3, v1: v[0], v2: v[1], v3: v[2] }
}

fn arb_design() -> impl Strategy<Value = EnergyDesign> {
    let [b1, b2, b3, b4] = ENERGY_BOUNDS;
    (b1.1..=b1.2, b2.1..=b2.2, b3.1..=b3.2, b4.1..=b4.2).prop_map(|(a1, a2, a3, a4)| design(a1, a2, a3, a4))
}

#[test]
fn flat_energy_gives_no_asymmetry() {
    let (_dir, deck) = stage_one(design(0.0, 1.0, 0.0, 0.0));
    let t = mock_sim(&deck).unwrap();
    assert_eq!((t.x1, t.x2, t.x3), (0.0, 0.0, 0.0));
    for v in [t.v1, t.v2, t.v3] {
        assert!((v + 0.05).abs() < 1e-15, "{v}");
    }
    let (a, e) = energy_moments(&design(0.0, 1.0, 0.0, 0.0), QUADRATURE_POINTS);
    assert!(a.abs() < 1e-15);
    assert!((e - 0.1).abs() < 1e-15);
}

#[test]
fn unit_wavenumber_moment_matches_fine_quadrature() {
    let d = design(0.1, 1.0, 0.0, 0.0);
    let (a_ref, e_ref) = moments_simpson(0.1, 1.0, 0.0, 0.0, 100_000);
    assert!((a_ref - 0.05).abs() < 1e-9, "oracle {a_ref}");
    let (a, e) = energy_moments(&d, QUADRATURE_POINTS);
    assert!((a - a_ref).abs() < 1e-6, "{a} vs {a_ref}");
    assert!((e - e_ref).abs() < 1e-6, "{e} vs {e_ref}");
    assert!((e - 0.1).abs() < 1e-6);

    let (_dir, deck) = stage_one(d);
    let t = mock_sim(&deck).unwrap();
    assert!((t.x1 - 0.05 * a_ref).abs() < 1e-6);
    assert!((t.x2 - (0.05 * a_ref + 0.8 * a_ref * a_ref)).abs() < 1e-6);
    assert_eq!(t.x1, t.x3);
    assert!((t.v2 + 0.5 * e_ref).abs() < 1e-6);
}

#[test]
fn clamped_profile_is_nonnegative() {
    let d = design(0.2, 2.3, 1.1, -0.05);
    let n = 10_000;
    let mut clamped = 0;
    for i in 0..=n {
        let x = i as f64 / n as f64;
        let e = energy_density(&d, x);
        assert!(e >= 0.0);
        if e == 0.0 {
            clamped += 1;
        }
    }
    assert!(clamped > 0, "clamp never engaged");
    let (a_ref, e_ref) = moments_simpson(d.a1, d.a2, d.a3, d.a4, 100_000);
    let (a, e) = energy_moments(&d, QUADRATURE_POINTS);
    // Clamp kinks cost the midpoint rule some accuracy.
    assert!((a - a_ref).abs() < 1e-4 && (e - e_ref).abs() < 1e-4, "{a} {a_ref} {e} {e_ref}");
    assert!(e > 0.0);
}

#[test]
fn qoi_hand_evaluations() {
    let p = QoiParams::default();
    assert_eq!(qoi(&diag(0.0, 0.0, 0.0, [0.0; 3]), &p), 4.0);
    // Symmetric positions and any equal velocities leave only the reward term.
    assert_eq!(qoi(&diag(0.3, 0.3, 0.3, [0.0; 3]), &p), 4.0);
    let q = qoi(&diag(0.0, 0.1, 0.0, [1.0, 1.0, 1.0]), &p);
    assert!((q - 2.15).abs() < 1e-12, "{q}");
    let q = qoi(&diag(0.0, 0.1, 0.0, [0.5, 1.0, 1.5]), &p);
    assert!((q - 2.15).abs() < 1e-12, "{q}");
    let q = qoi(&diag(0.2, 0.2, 0.2, [-2.0, -2.0, -2.0]), &p);
    assert!((q - 4.0 / 3.0).abs() < 1e-12, "{q}");
    let q = qoi(&diag(-0.1, 0.0, 0.1, [-3.0, -1.0, -2.0]), &p);
    assert!((q - 4.0 / 3.0).abs() < 1e-12, "{q}");
    let custom = QoiParams { lambda1: 2.0, lambda2: 1.0, delta: 0.5 };
    let q = qoi(&diag(0.0, 1.0, 0.0, [0.5; 3]), &custom);
    assert!((q - 2.0).abs() < 1e-12, "{q}");
}

#[test]
fn get_qoi_reads_the_diagnostics_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = QoiParams::default();
    assert!(matches!(get_qoi(dir.path(), &p), Err(SimError::MissingDiagnostics(_))));
    fs::write(dir.path().join(DIAGNOSTICS_FILE), "{\"x1\": 0}").unwrap();
    assert!(matches!(get_qoi(dir.path(), &p), Err(SimError::MissingDiagnostics(_))));
    let t = diag(0.0, 0.1, 0.0, [-1.0; 3]);
    fs::write(dir.path().join(DIAGNOSTICS_FILE), serde_json::to_string(&t).unwrap()).unwrap();
    assert!((get_qoi(dir.path(), &p).unwrap() - 2.15).abs() < 1e-12);
    // JSON has no NaN or infinity literals, so an overflowing value is refused
    // at parse time; the finiteness check guards values built in memory.
    fs::write(
        dir.path().join(DIAGNOSTICS_FILE),
        r#"{"x1": 0, "x2": 1e400, "x3": 0, "v1": 0, "v2": 0, "v3": 0}"#,
    )
    .unwrap();
    assert!(get_qoi(dir.path(), &p).is_err());
    assert!(!diag(0.0, f64::NAN, 0.0, [0.0; 3]).is_finite());
    assert!(!diag(0.0, 0.0, 0.0, [0.0, f64::INFINITY, 0.0]).is_finite());
}

#[test]
fn staging_examples() {
    let dir = tempfile::tempdir().unwrap();
    let designs = [design(0.1, 1.0, 0.0, 0.0), design(0.05, 2.0, 1.0, 0.1)];
    let runs = generate_runs(&designs, dir.path(), &StagingOptions::default()).unwrap();
    assert_eq!(runs.len(), 2);
    assert_eq!(runs[0].run_id, "run_0000");
    assert_eq!(runs[1].run_id, "run_0001");
    assert_ne!(runs[0].working_dir, runs[1].working_dir);
    for (r, d) in runs.iter().zip(&designs) {
        assert!(r.deck_path.exists());
        assert_eq!(r.deck_path, r.working_dir.join(DECK_FILE));
        assert_eq!(Deck::read(&r.deck_path).unwrap().design(), *d);
        assert_eq!(r.command[0], "mada-mocksim");
        assert_eq!(r.resource.working_dir, r.working_dir);
    }

    assert!(generate_runs(&[], dir.path(), &StagingOptions::default()).unwrap().is_empty());

    let opts = StagingOptions { first_index: 20, nodes: 2, ..Default::default() };
    let later = generate_runs(&designs[..1], dir.path(), &opts).unwrap();
    assert_eq!(later[0].run_id, "run_0020");
    assert_eq!(later[0].resource.nodes, 2);

    let fresh = tempfile::tempdir().unwrap();
    let err = generate_runs(&[designs[0], design(0.5, 1.0, 0.0, 0.0)], fresh.path(), &StagingOptions::default())
        .unwrap_err();
    assert!(matches!(err, SimError::OutOfBounds { index: 1, field: "a1", .. }), "{err}");
    assert_eq!(fs::read_dir(fresh.path()).unwrap().count(), 0);
}

#[test]
fn malformed_decks_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join(DECK_FILE);
    assert!(matches!(mock_sim(&p), Err(SimError::DeckParse { .. })));
    fs::write(&p, "{\"a1\": 0.1}").unwrap();
    assert!(matches!(mock_sim(&p), Err(SimError::DeckParse { .. })));
    fs::write(&p, r#"{"a1":0,"a2":1,"a3":0,"a4":0,"quadrature_points":0}"#).unwrap();
    assert!(matches!(mock_sim(&p), Err(SimError::DeckParse { .. })));
    assert!(!dir.path().join(DIAGNOSTICS_FILE).exists());
}

#[test]
fn twenty_run_ensemble_through_the_scheduler() {
    let dir = tempfile::tempdir().unwrap();
    let designs: Vec<_> = (0..20)
        .map(|i| {
            let t = i as f64 / 19.0;
            design(0.2 * t, 0.5 + 2.5 * t, PI * t, -0.05 + 0.25 * (1.0 - t))
        })
        .collect();
    let runs = generate_runs(&designs, dir.path(), &StagingOptions::default()).unwrap();
    let s = Scheduler::new(SchedulerConfig::new(4, 8));
    register_mock_sim(&s);
    let summary = s.execute_generated_runs(&runs);
    assert_eq!(summary.count(JobState::Completed), 20, "{}", summary.text);
    assert!(s.peak_nodes_in_use() <= 4);
    let p = QoiParams::default();
    for (r, d) in runs.iter().zip(&designs) {
        assert!(r.working_dir.join(DIAGNOSTICS_FILE).exists());
        // Tolerance 0: the pipeline must reproduce the direct evaluation bit for bit.
        assert_eq!(get_qoi(&r.working_dir, &p).unwrap(), evaluate_design(d, &p));
    }
}

#[test]
fn mcp_pipeline_stage_execute_score() {
    let dir = tempfile::tempdir().unwrap();
    let sched = Scheduler::new(SchedulerConfig::new(4, 8));
    register_mock_sim(&sched);
    let mut sim = McpClient::connect_local(Arc::new(sim_server()), "test").unwrap();
    let mut jobs = McpClient::connect_local(Arc::new(scheduler_server(sched)), "test").unwrap();

    let space = sim.call_tool("design_space", json!({})).unwrap();
    assert_eq!(space["dimensions"].as_array().unwrap().len(), 4);
    assert_eq!(space["dimensions"][2]["name"], "a3");

    let staged = sim
        .call_tool(
            "generate_runs",
            json!({"designs": [[0.1, 1.0, 0.0, 0.0], {"a1": 0.0, "a2": 1.0, "a3": 0.0, "a4": 0.0}], "staging_dir": dir.path()}),
        )
        .unwrap();
    let exec = jobs.call_tool("execute_generated_runs", json!({"runs": staged["runs"]})).unwrap();
    assert!(exec["summary"].as_str().unwrap().ends_with("2 runs: 2 completed, 0 failed, 0 timeout, 0 cancelled, 0 rejected; nonzero exits: 0"));

    let wd = staged["runs"][1]["working_dir"].clone();
    let scored = sim.call_tool("get_qoi", json!({"working_dir": wd})).unwrap();
    assert!((scored["qoi"].as_f64().unwrap() - 4.0 / 1.05).abs() < 1e-12);
    assert_eq!(scored["diagnostics"]["x2"], 0.0);

    let err = sim
        .call_tool("generate_runs", json!({"designs": [[0.1, 9.0, 0.0, 0.0]], "staging_dir": dir.path()}))
        .unwrap_err();
    assert!(matches!(err, ClientError::Tool(m) if m.contains("a2")));
    let err = sim.call_tool("get_qoi", json!({"working_dir": dir.path()})).unwrap_err();
    assert!(matches!(err, ClientError::Tool(m) if m.contains("no diagnostics")));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn qoi_is_nonnegative_and_bounded_when_aligned(d in arb_design()) {
        let p = QoiParams::default();
        let q = evaluate_design(&d, &p);
        prop_assert!(q >= 0.0);
        let t = tracers(&d, QUADRATURE_POINTS);
        let aligned = TracerDiagnostics { x2: 0.5 * (t.x1 + t.x3), ..t };
        prop_assert!(qoi(&aligned, &p) <= p.lambda2 / p.delta);
    }

    #[test]
    fn half_turn_phase_flips_the_moment(
        a1 in 0.0..0.15f64, a2 in 0.5..3.0f64, a3 in 0.0..PI, a4 in -0.05..0.2f64,
    ) {
        // Without clamping the profile is affine in the sine term.
        prop_assume!(0.1 + a4 >= a1);
        let d = design(a1, a2, a3, a4);
        let flipped = design(a1, a2, a3 + PI, a4);
        let t = tracers(&d, QUADRATURE_POINTS);
        let tf = tracers(&flipped, QUADRATURE_POINTS);
        let (a, af) = (t.x1 / 0.05, tf.x1 / 0.05);
        prop_assert!((a + af).abs() < 1e-12, "{} {}", a, af);
        let bulge = |t: &TracerDiagnostics| t.x2 - 0.5 * (t.x1 + t.x3);
        prop_assert!((bulge(&t) - bulge(&tf)).abs() < 1e-15);
    }

    #[test]
    fn half_turn_phase_keeps_the_qoi_for_whole_wavenumbers(
        a1 in 0.0..0.15f64, k in 1..=3u32, a3 in 0.0..PI, a4 in -0.05..0.2f64,
    ) {
        // A whole number of periods integrates to zero, so E is unchanged too.
        prop_assume!(0.1 + a4 >= a1);
        let p = QoiParams::default();
        let q = evaluate_design(&design(a1, k as f64, a3, a4), &p);
        let qf = evaluate_design(&design(a1, k as f64, a3 + PI, a4), &p);
        prop_assert!((q - qf).abs() < 1e-12, "{} {}", q, qf);
    }

    #[test]
    fn identical_decks_give_identical_files(d in arb_design()) {
        let (dir_a, deck_a) = stage_one(d);
        let (dir_b, deck_b) = stage_one(d);
        prop_assert_eq!(mock_sim(&deck_a).unwrap(), mock_sim(&deck_b).unwrap());
        let a = fs::read(dir_a.path().join("run_0000").join(DIAGNOSTICS_FILE)).unwrap();
        let b = fs::read(dir_b.path().join("run_0000").join(DIAGNOSTICS_FILE)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn solver_agrees_with_reference_formula(d in arb_design()) {
        let (a, e) = energy_moments(&d, QUADRATURE_POINTS);
        let q = evaluate_design(&d, &QoiParams::default());
        prop_assert!((q - qoi_reference(a, e)).abs() < 1e-12);
        let (_dir, deck) = stage_one(d);
        mock_sim(&deck).unwrap();
        let wd = deck.parent().unwrap();
        prop_assert_eq!(read_diagnostics(wd).unwrap(), tracers(&d, QUADRATURE_POINTS));
        prop_assert_eq!(get_qoi(wd, &QoiParams::default()).unwrap(), q);
    }
}
