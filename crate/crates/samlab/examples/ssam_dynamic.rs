//! Watch a dynamic drop/grow mask evolve: drop counts decay on the cosine
//! schedule while the active-set size stays pinned.
//!
//! Run with: cargo run --release --example ssam_dynamic

use samlab::data::Batch;
use samlab::mask::{cosine_decay, drop_grow_update, random_mask, DropCriterion};
use samlab::objective::{NoisyQuadratic, Objective, StochasticObjective};
use samlab::optim::{self, OptimizerConfig, OptimizerState, ScheduleRule};
use samlab::seed::stream_rng;

fn main() {
    let dim = 40;
    let sparsity = 0.5;
    let epochs = 10u64;
    let alpha = 0.5;

    let obj = StochasticObjective::NoisyQuadratic(
        NoisyQuadratic::new((1..=dim).map(|i| i as f64 / 10.0).collect(), 0.1, 20.0).unwrap(),
    );
    let cfg = OptimizerConfig {
        kind: samlab::OptimizerKind::Ssam,
        eta0: 0.1,
        rho0: 0.2,
        schedule: ScheduleRule::Constant,
        momentum: 0.0,
        weight_decay: 0.0,
    };

    let mut rng = stream_rng(7, 0);
    let mask = random_mask(dim, sparsity, &mut rng).unwrap();
    let mut state = OptimizerState::new(obj.init_weights(7), mask, 7).unwrap();

    println!("epoch  decay   kept  dropped+grown  active");
    let mut previous = state.mask.clone();
    for epoch in 0..epochs {
        let mut last_grad = None;
        for _ in 0..50 {
            let batch = Batch::noise(&mut rng, dim);
            let info = optim::step(&mut state, &obj, &batch, &cfg).unwrap();
            last_grad = Some(info.first_grad);
        }
        let decay = cosine_decay(epoch + 1, epochs, alpha).unwrap();
        let (updated, _) = drop_grow_update(
            &state.mask,
            &last_grad.unwrap(),
            epoch + 1,
            epochs,
            alpha,
            DropCriterion::Flattest,
            &mut rng,
        )
        .unwrap();
        state.mask = updated;

        let kept = (0..dim)
            .filter(|&i| previous.is_active(i) && state.mask.is_active(i))
            .count();
        let churn = (0..dim)
            .filter(|&i| previous.is_active(i) != state.mask.is_active(i))
            .count();
        println!(
            "{:5}  {:.3}  {:5}  {:13}  {:6}",
            epoch + 1,
            decay,
            kept,
            churn,
            state.mask.active_count()
        );
        previous = state.mask.clone();
    }
    println!("\ncardinality never moves; churn follows the cosine decay to zero");
}
