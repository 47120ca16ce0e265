//! How different are the two-step gradients from plain ones, coordinate by
//! coordinate? Most log-ratios land below zero: the perturbation barely
//! moves the gradient for the bulk of the parameters.
//!
//! Run with: cargo run --release --example grad_ratio

use samlab::diagnostics::grad_diff_ratio;
use samlab::experiment::{train, ExperimentConfig};
use samlab::objective::Objective;
use samlab::optim::compute_perturbation;

fn main() {
    let config: ExperimentConfig = serde_json::from_str(
        r#"{
            "objective": {
                "family": "mlp-classifier",
                "dataset": {"source": "blobs", "n_samples": 2000, "n_features": 20},
                "hidden": 16
            },
            "optimizer": {"kind": "sgd", "eta0": 0.05, "momentum": 0.9},
            "epochs": 5,
            "seed": 21
        }"#,
    )
    .unwrap();
    let run = train(&config).unwrap();
    let probe = run.train_data.as_ref().unwrap().as_batch();

    let g_plain = run.objective.grad(&run.state.w, &probe).unwrap();
    let (eps, _) = compute_perturbation(&g_plain, 0.05);
    let g_two_step = run
        .objective
        .grad(&run.state.w.add_scaled(&eps, 1.0), &probe)
        .unwrap();
    let hist = grad_diff_ratio(&g_two_step, &g_plain).unwrap();

    println!(
        "{} of {} coordinates have log10-ratio below zero ({} excluded)",
        (hist.fraction_below_zero * hist.included_count() as f64).round(),
        hist.included_count(),
        hist.excluded_count
    );
    println!("fraction below zero: {:.3}\n", hist.fraction_below_zero);

    // Print the populated part of the histogram.
    let max_count = hist.counts.iter().max().copied().unwrap_or(1).max(1);
    for (i, &count) in hist.counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let bar = "#".repeat((count * 50 / max_count).max(1) as usize);
        println!(
            "  [{:6.1}, {:6.1})  {count:5}  {bar}",
            hist.bin_edges[i],
            hist.bin_edges[i + 1]
        );
    }
}
