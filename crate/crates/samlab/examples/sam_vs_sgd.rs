//! Compare SGD, SAM and sparse SAM on the two synthetic objectives.
//!
//! Run with: cargo run --release --example sam_vs_sgd

use samlab::data::Batch;
use samlab::mask::random_mask;
use samlab::objective::{NoisyQuadratic, Objective, StochasticObjective, TrigNonconvex};
use samlab::optim::{self, OptimizerConfig, OptimizerKind, OptimizerState, ScheduleRule};
use samlab::seed::stream_rng;
use samlab::SparseMask;

fn run(
    obj: &StochasticObjective,
    kind: OptimizerKind,
    rho0: f64,
    steps: usize,
    seed: u64,
) -> (f64, f64) {
    let cfg = OptimizerConfig {
        kind,
        eta0: 0.1,
        rho0,
        schedule: ScheduleRule::InverseSqrt,
        momentum: 0.0,
        weight_decay: 0.0,
    };
    let d = obj.dim();
    let w = obj.init_weights(seed);
    let mask = if kind == OptimizerKind::Ssam {
        random_mask(d, 0.5, &mut stream_rng(seed, 77)).unwrap()
    } else {
        SparseMask::all_ones(d)
    };
    let mut state = OptimizerState::new(w, mask, seed).unwrap();
    let mut rng = stream_rng(seed, 1);
    for _ in 0..steps {
        let batch = Batch::noise(&mut rng, d);
        optim::step(&mut state, obj, &batch, &cfg).unwrap();
    }
    let noiseless = Batch::noiseless(d);
    let loss = obj.eval_loss(&state.w, &noiseless).unwrap();
    let grad = obj.true_grad(&state.w).unwrap().norm();
    (loss, grad)
}

fn main() {
    let quadratic = StochasticObjective::NoisyQuadratic(
        NoisyQuadratic::new(vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0], 0.1, 10.0).unwrap(),
    );
    let trig =
        StochasticObjective::TrigNonconvex(TrigNonconvex::new(6, 1.0, 3.0, 0.1, 10.0).unwrap());

    for (name, obj) in [("noisy quadratic", &quadratic), ("trig non-convex", &trig)] {
        println!("== {name} (1000 steps, 5 seeds) ==");
        for (label, kind, rho0) in [
            ("sgd ", OptimizerKind::Sgd, 0.0),
            ("sam ", OptimizerKind::Sam, 0.3),
            ("ssam", OptimizerKind::Ssam, 0.3),
        ] {
            let mut losses = Vec::new();
            let mut grads = Vec::new();
            for seed in 0..5u64 {
                let (loss, grad) = run(obj, kind, rho0, 1000, seed);
                losses.push(loss);
                grads.push(grad);
            }
            losses.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = losses[2];
            let mean_grad: f64 = grads.iter().sum::<f64>() / grads.len() as f64;
            println!("  {label}  median final loss {median:9.5}   mean ||grad|| {mean_grad:.2e}");
        }
        println!();
    }
}
