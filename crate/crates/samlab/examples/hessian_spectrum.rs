//! Estimate top Hessian eigenvalues with Lanczos over finite-difference
//! Hessian-vector products, on a known quadratic and on a trained
//! classifier.
//!
//! Run with: cargo run --release --example hessian_spectrum

use samlab::diagnostics::lanczos_spectrum;
use samlab::experiment::{train, ExperimentConfig};
use samlab::hvp::HvpOracle;
use samlab::objective::{NoisyQuadratic, StochasticObjective};
use samlab::param::ParamVector;

fn main() {
    // Known ground truth: diagonal curvatures 1..10.
    let obj = StochasticObjective::NoisyQuadratic(
        NoisyQuadratic::new((1..=10).map(|i| i as f64).collect(), 0.0, 100.0).unwrap(),
    );
    let center = ParamVector::from_values(vec![0.3; 10]);
    let oracle = HvpOracle::new(&obj, center).unwrap();
    let report = lanczos_spectrum(&oracle, 5, 10, 1).unwrap();
    println!("quadratic, true top eigenvalues 10..6:");
    println!("  ritz values {:?}", report.eigenvalues);
    println!("  lambda1/lambda5 = {:.6}\n", report.ratio_1_5.unwrap());

    // Trained classifier: spectrum at the final weights on a fixed batch.
    let config: ExperimentConfig = serde_json::from_str(
        r#"{
            "objective": {
                "family": "mlp-classifier",
                "dataset": {"source": "blobs", "n_samples": 400, "n_features": 8},
                "hidden": 8
            },
            "optimizer": {"kind": "sam", "eta0": 0.05, "rho0": 0.05, "momentum": 0.9},
            "epochs": 8,
            "seed": 5
        }"#,
    )
    .unwrap();
    let run = train(&config).unwrap();
    let probe = run.train_data.as_ref().unwrap().as_batch();
    let oracle = HvpOracle::with_batch(&run.objective, run.state.w.clone(), probe).unwrap();
    let report = lanczos_spectrum(&oracle, 5, 30, 5).unwrap();
    println!("trained classifier ({} parameters):", run.state.w.len());
    println!("  ritz values {:?}", report.eigenvalues);
    if let Some(ratio) = report.ratio_1_5 {
        println!("  lambda1/lambda5 = {ratio:.4} (smaller = flatter top of spectrum)");
    }
    println!("  residuals {:?}", report.residuals);
}
