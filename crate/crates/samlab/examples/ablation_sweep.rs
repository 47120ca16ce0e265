//! Sweep mask strategy and sparsity on the blobs classifier and print the
//! summary table.
//!
//! Run with: cargo run --release --example ablation_sweep

use samlab::experiment::{run_ablation, ExperimentConfig};

fn main() {
    let base: ExperimentConfig = serde_json::from_str(
        r#"{
            "objective": {
                "family": "mlp-classifier",
                "dataset": {"source": "blobs", "n_samples": 1000, "n_features": 20},
                "hidden": 16
            },
            "optimizer": {"kind": "ssam", "eta0": 0.05, "rho0": 0.05, "momentum": 0.9},
            "mask": {"kind": "fisher", "update_every": 2},
            "epochs": 8,
            "batch_size": 32,
            "seed": 1234,
            "ablation": {
                "sparsity": [0.5, 0.9],
                "strategy": ["fisher", "random", "dynamic-flattest", "dynamic-sharpest"]
            }
        }"#,
    )
    .unwrap();

    let out = std::env::temp_dir().join("samlab_ablation");
    let rows = run_ablation(&base, &out, 4).unwrap();

    println!(
        "{:>4} {:>8} {:>18} {:>10} {:>10}",
        "cell", "sparsity", "strategy", "test acc", "status"
    );
    for row in &rows {
        println!(
            "{:>4} {:>8.2} {:>18} {:>10} {:>10}",
            row.cell,
            row.sparsity,
            row.strategy,
            row.test_accuracy
                .map(|a| format!("{a:.3}"))
                .unwrap_or_default(),
            row.status
        );
    }
    println!("\nper-cell records and summary.csv in {}", out.display());
}
