//! Relative training cost per optimizer step as perturbation sparsity
//! grows: one full pass, plus a forward and a sparsity-scaled backward.
//!
//! Run with: cargo run --release --example flops_table

use samlab::diagnostics::{flops_estimate, CostModel};
use samlab::optim::OptimizerKind;

fn main() {
    let model = CostModel::default();
    println!(
        "cost model: forward fraction {}, backward fraction {}\n",
        model.forward_fraction,
        model.backward_fraction()
    );
    println!(
        "{:<10} {:>8} {:>15}",
        "optimizer", "sparsity", "relative flops"
    );
    println!(
        "{:<10} {:>8} {:>15.2}",
        "sgd",
        "-",
        flops_estimate(&model, OptimizerKind::Sgd, 0.0)
    );
    println!(
        "{:<10} {:>8} {:>15.2}",
        "sam",
        "0.00",
        flops_estimate(&model, OptimizerKind::Sam, 0.0)
    );
    for s in [0.5, 0.8, 0.9, 0.95, 0.98, 0.99] {
        println!(
            "{:<10} {:>8.2} {:>15.2}",
            "ssam",
            s,
            flops_estimate(&model, OptimizerKind::Ssam, s)
        );
    }
}
