//! Slice the loss surface around trained weights along two
//! filter-normalized random directions and write the grid as CSV.
//!
//! Run with: cargo run --release --example loss_landscape

use samlab::diagnostics::landscape_slice;
use samlab::experiment::{train, ExperimentConfig};

fn main() {
    let config: ExperimentConfig = serde_json::from_str(
        r#"{
            "objective": {
                "family": "mlp-classifier",
                "dataset": {"source": "blobs", "n_samples": 400, "n_features": 10},
                "hidden": 8
            },
            "optimizer": {"kind": "sam", "eta0": 0.05, "rho0": 0.05, "momentum": 0.9},
            "epochs": 10,
            "seed": 3
        }"#,
    )
    .unwrap();
    let run = train(&config).unwrap();
    let probe = run.train_data.as_ref().unwrap().as_batch();
    let grid = landscape_slice(&run.objective, &run.state.w, &probe, 51, 1.0, 3).unwrap();

    let out = std::env::temp_dir().join("samlab_landscape.csv");
    std::fs::write(&out, grid.to_csv()).unwrap();

    let center = grid.loss_at(25, 25);
    let corner = grid.loss_at(0, 0);
    println!("51x51 grid over [-1, 1]^2 written to {}", out.display());
    println!("loss at center (trained weights): {center:.4}");
    println!("loss at corner (-1, -1):          {corner:.4}");

    // Coarse ASCII rendering, one character per 5x5 block.
    let lo = grid.losses.iter().cloned().fold(f64::MAX, f64::min);
    let hi = grid.losses.iter().cloned().fold(f64::MIN, f64::max);
    let shades = [' ', '.', ':', '+', '*', '#'];
    println!("\ncoarse view (dark = high loss):");
    for by in 0..10 {
        let mut line = String::new();
        for bx in 0..10 {
            let mut acc = 0.0;
            for dy in 0..5 {
                for dx in 0..5 {
                    acc += grid.loss_at(bx * 5 + dx, by * 5 + dy);
                }
            }
            let level = ((acc / 25.0 - lo) / (hi - lo).max(1e-12) * 5.0).round() as usize;
            line.push(shades[level.min(5)]);
        }
        println!("  {line}");
    }
}
