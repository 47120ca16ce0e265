//! Integration tests for the experiment runner: record persistence of real
//! runs, per-row sparsity bookkeeping, and mask-generation cost scaling.

use samlab::experiment::{run_ablation, train, ExperimentConfig, RunRecord};

fn config(text: &str) -> ExperimentConfig {
    serde_json::from_str(text).unwrap()
}

#[test]
fn real_run_record_roundtrips_through_disk() {
    let cfg = config(
        r#"{
            "objective": {"family": "mlp-classifier",
                          "dataset": {"source": "blobs", "n_samples": 100, "n_features": 6},
                          "hidden": 4},
            "optimizer": {"kind": "ssam", "eta0": 0.05, "rho0": 0.02, "momentum": 0.9},
            "mask": {"sparsity": 0.8, "kind": "fisher", "update_every": 2, "fisher_samples": 16},
            "epochs": 4,
            "batch_size": 16,
            "seed": 31
        }"#,
    );
    let run = train(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run.record.write_to(dir.path()).unwrap();
    let back = RunRecord::read_from(dir.path()).unwrap();
    assert_eq!(run.record, back);
    assert_eq!(back.config, cfg);
}

#[test]
fn sparsity_column_tracks_configured_value_for_every_policy() {
    for kind in ["fixed", "fisher", "dynamic", "random"] {
        let cfg = config(&format!(
            r#"{{
                "objective": {{"family": "mlp-classifier",
                              "dataset": {{"source": "blobs", "n_samples": 120, "n_features": 6}},
                              "hidden": 4}},
                "optimizer": {{"kind": "ssam", "eta0": 0.05, "rho0": 0.02}},
                "mask": {{"sparsity": 0.75, "kind": "{kind}", "fisher_samples": 16}},
                "epochs": 3,
                "batch_size": 24,
                "seed": 8
            }}"#
        ));
        let run = train(&cfg).unwrap();
        assert!(
            run.record.rows.iter().all(|r| r.sparsity == 0.75),
            "policy {kind}: sparsity column drifted"
        );
        assert_eq!(
            run.state.mask.active_count(),
            samlab::mask::target_active(run.state.w.len(), 0.75)
        );
    }
}

#[test]
fn fisher_pass_time_grows_with_sample_count() {
    let base = config(
        r#"{
            "objective": {"family": "mlp-classifier",
                          "dataset": {"source": "blobs", "n_samples": 2000, "n_features": 20},
                          "hidden": 16},
            "optimizer": {"kind": "ssam", "eta0": 0.05, "rho0": 0.05},
            "mask": {"sparsity": 0.5, "kind": "fisher", "update_every": 1},
            "epochs": 6,
            "batch_size": 64,
            "seed": 12,
            "ablation": {"fisher_samples": [16, 128, 1024]}
        }"#,
    );
    let dir = tempfile::tempdir().unwrap();
    let rows = run_ablation(&base, dir.path(), 1).unwrap();
    assert_eq!(rows.len(), 3);
    let times: Vec<f64> = rows.iter().map(|r| r.mask_gen_total_ms).collect();
    // 8x more samples per pass; allow generous slack for timer jitter while
    // still demanding the qualitative ordering.
    assert!(
        times[1] >= times[0] * 0.8 && times[2] >= times[1] * 0.8,
        "fisher times not increasing: {times:?}"
    );
    println!("fisher pass totals (ms) for 16/128/1024 samples: {times:?}");
}
