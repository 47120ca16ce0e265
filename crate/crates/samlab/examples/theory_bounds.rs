//! Check the analysis numerically: alignment and descent inequalities, then
//! the averaged-gradient rate bounds at every prefix of a real run.
//!
//! Run with: cargo run --release --example theory_bounds

use samlab::mask::DropCriterion;
use samlab::objective::NoisyQuadratic;
use samlab::optim::OptimizerKind;
use samlab::theory::{
    check_bound, run_convergence, verify_alignment_bound, verify_descent,
    verify_stochastic_alignment, AssumptionConstants, BoundReport, RateBound, TheoryMask,
};

fn show(report: &BoundReport) {
    println!(
        "[{}] {}\n        trials {}, violations {}, worst margin {:.4e}{}",
        if report.passed { "pass" } else { "FAIL" },
        report.check,
        report.trials,
        report.violations,
        report.worst_margin,
        report
            .mc_stderr
            .map(|s| format!(" (stderr {s:.2e})"))
            .unwrap_or_default()
    );
}

fn main() {
    // Isotropic quadratic: L = 1, ball radius 10, so G = 10; sigma = 0.1.
    let obj = NoisyQuadratic::isotropic(10, 0.1, 10.0).unwrap();
    let constants = AssumptionConstants::from_objective(&obj).unwrap();
    println!(
        "constants: L = {}, G = {}, sigma = {}, R = {}\n",
        constants.smoothness, constants.grad_bound, constants.noise_std, constants.ball_radius
    );

    for rho in [0.01, 0.1] {
        show(&verify_alignment_bound(&obj, &constants, rho, 300, 1).unwrap());
        show(&verify_stochastic_alignment(&obj, &constants, rho, 30, 2000, 1, None).unwrap());
    }
    show(
        &verify_descent(
            &obj,
            &constants,
            0.5,
            0.05,
            OptimizerKind::Sam,
            300,
            20,
            2,
            None,
        )
        .unwrap(),
    );
    show(
        &verify_descent(
            &obj,
            &constants,
            0.5,
            0.05,
            OptimizerKind::Ssam,
            300,
            20,
            2,
            Some(TheoryMask::FixedRandom { sparsity: 0.5 }),
        )
        .unwrap(),
    );

    println!(
        "\nrate bounds over 2000 steps, 10 repeats, eta_t = 0.5/sqrt(t), rho_t = 0.05/sqrt(t):"
    );
    let dense = run_convergence(
        &obj,
        &constants,
        OptimizerKind::Sam,
        0.5,
        0.05,
        2000,
        10,
        3,
        None,
    )
    .unwrap();
    show(&check_bound(&dense, &constants, RateBound::Dense).unwrap());
    let masked = run_convergence(
        &obj,
        &constants,
        OptimizerKind::Ssam,
        0.5,
        0.05,
        2000,
        10,
        3,
        Some(TheoryMask::Dynamic {
            sparsity: 0.5,
            alpha: 0.5,
            criterion: DropCriterion::Flattest,
        }),
    )
    .unwrap();
    show(&check_bound(&masked, &constants, RateBound::Masked).unwrap());

    let t = dense.steps();
    println!(
        "\naveraged ||grad||^2 at T = {}: dense {:.5}, masked {:.5}",
        t,
        dense.averaged_grad_sq(t),
        masked.averaged_grad_sq(t)
    );
}
