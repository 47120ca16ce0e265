//! Acceptance suite: one test per exit criterion, each printing a PASS line
//! with the measured numbers. Run with `cargo test --test acceptance`.

mod common;

use samlab::data::{Batch, Dataset};
use samlab::diagnostics::{
    flops_estimate, grad_diff_ratio, lanczos_spectrum, CostModel, DenseSymmetric,
};
use samlab::experiment::{train, ExperimentConfig};
use samlab::mask::empirical_fisher;
use samlab::mask::{
    drop_grow_update, fisher_mask, random_mask, target_active, DropCriterion, FisherEstimate,
    SparseMask,
};
use samlab::objective::{NoisyQuadratic, Objective};
use samlab::optim::{self, compute_perturbation, OptimizerConfig, OptimizerKind, OptimizerState};
use samlab::param::ParamVector;
use samlab::seed::stream_rng;
use samlab::theory::{
    check_bound, run_convergence, verify_alignment_bound, verify_descent,
    verify_stochastic_alignment, AssumptionConstants, RateBound, TheoryMask,
};
use samlab::MlpClassifier;

use rand::Rng;

/// Shared theory-bench objective: isotropic quadratic with L = 1, R = 10,
/// G = 10, sigma = 0.1.
fn bench_quadratic() -> (NoisyQuadratic, AssumptionConstants) {
    let obj = NoisyQuadratic::isotropic(10, 0.1, 10.0).unwrap();
    let constants = AssumptionConstants::from_objective(&obj).unwrap();
    assert_eq!(constants.smoothness, 1.0);
    assert_eq!(constants.grad_bound, 10.0);
    (obj, constants)
}

fn bits_equal(a: &ParamVector, b: &ParamVector) -> bool {
    a.values()
        .iter()
        .zip(b.values())
        .all(|(x, y)| x.to_bits() == y.to_bits())
}

#[test]
fn criterion_01_recovery_identities() {
    let obj =
        NoisyQuadratic::new(vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 0.7, 1.2], 0.2, 100.0).unwrap();
    let d = obj.dim();
    let mut rng = stream_rng(1001, 0);

    let start = ParamVector::from_values((0..d).map(|_| rng.random_range(-2.0..2.0)).collect());
    let base = OptimizerConfig {
        kind: OptimizerKind::Sgd,
        eta0: 0.05,
        rho0: 0.0,
        schedule: samlab::ScheduleRule::InverseSqrt,
        momentum: 0.9,
        weight_decay: 0.001,
    };
    let sam_cfg = OptimizerConfig {
        kind: OptimizerKind::Sam,
        rho0: 0.1,
        ..base
    };
    let sam_rho_zero = OptimizerConfig {
        kind: OptimizerKind::Sam,
        rho0: 0.0,
        ..base
    };
    let ssam_cfg = OptimizerConfig {
        kind: OptimizerKind::Ssam,
        rho0: 0.1,
        ..base
    };

    let mut s_sgd = OptimizerState::dense(start.clone(), 0);
    let mut s_sam_zero = OptimizerState::dense(start.clone(), 0);
    let mut s_sam = OptimizerState::dense(start.clone(), 0);
    let mut s_ssam = OptimizerState::new(start.clone(), SparseMask::all_ones(d), 0).unwrap();

    for step in 0..100 {
        let batch = Batch::noise(&mut rng, d);
        optim::sgd_step(&mut s_sgd, &obj, &batch, &base).unwrap();
        optim::sam_step(&mut s_sam_zero, &obj, &batch, &sam_rho_zero).unwrap();
        optim::sam_step(&mut s_sam, &obj, &batch, &sam_cfg).unwrap();
        optim::ssam_step(&mut s_ssam, &obj, &batch, &ssam_cfg).unwrap();
        assert!(
            bits_equal(&s_sgd.w, &s_sam_zero.w)
                && bits_equal(&s_sgd.velocity, &s_sam_zero.velocity),
            "step {step}: sam(rho=0) diverged from sgd"
        );
        assert!(
            bits_equal(&s_sam.w, &s_ssam.w) && bits_equal(&s_sam.velocity, &s_ssam.velocity),
            "step {step}: ssam(all-ones) diverged from sam"
        );
    }

    // All-zeros mask reduces ssam to sgd bitwise on the same stream.
    let mut rng = stream_rng(1001, 1);
    let mut s_sgd = OptimizerState::dense(start.clone(), 0);
    let mut s_materialized = OptimizerState::new(start, SparseMask::all_zeros(d), 0).unwrap();
    for _ in 0..100 {
        let batch = Batch::noise(&mut rng, d);
        optim::sgd_step(&mut s_sgd, &obj, &batch, &base).unwrap();
        optim::ssam_step(&mut s_materialized, &obj, &batch, &ssam_cfg).unwrap();
        assert!(bits_equal(&s_sgd.w, &s_materialized.w));
    }
    println!("acceptance 01 recovery-identities: PASS (100 bitwise-equal steps per identity)");
}

#[test]
fn criterion_02_mask_cardinality() {
    let dims = [10usize, 101, 10_000];
    let sparsities = [0.5, 0.8, 0.9, 0.95, 0.98, 0.99];
    let mut rng = stream_rng(1002, 0);
    for &d in &dims {
        for &s in &sparsities {
            let want = target_active(d, s);

            let random = random_mask(d, s, &mut rng).unwrap();
            assert_eq!(random.active_count(), want, "random d={d} s={s}");

            let fisher_values: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
            let fisher = fisher_mask(&FisherEstimate::from_values(fisher_values, 1), s).unwrap();
            assert_eq!(fisher.active_count(), want, "fisher d={d} s={s}");

            // Fixed policy: the mask never changes, so the initial count is
            // the whole story. Dynamic policy: 1000 drop/grow updates with
            // fresh gradients must preserve the count exactly.
            let mut mask = random_mask(d, s, &mut rng).unwrap();
            let updates = 1000u64;
            for t in 0..updates {
                let grad =
                    ParamVector::from_values((0..d).map(|_| rng.random_range(-1.0..1.0)).collect());
                let criterion = if t % 2 == 0 {
                    DropCriterion::Flattest
                } else {
                    DropCriterion::Random
                };
                let (updated, _) =
                    drop_grow_update(&mask, &grad, t, updates, 0.5, criterion, &mut rng).unwrap();
                mask = updated;
                assert_eq!(mask.active_count(), want, "dynamic d={d} s={s} t={t}");
            }
        }
    }
    println!(
        "acceptance 02 mask-cardinality: PASS ({} policy/dim/sparsity combinations, 1000 updates each)",
        dims.len() * sparsities.len()
    );
}

#[test]
fn criterion_03_fisher_oracle() {
    // 50-parameter classifier: 5 inputs, 6 hidden, 2 classes.
    let mlp = MlpClassifier::new(5, 6, 2).unwrap();
    assert_eq!(mlp.n_params(), 50);
    let data = Dataset::synthetic_blobs(32, 5, 2, 2.0, 77);
    let batch = data.as_batch();
    let w = mlp.init_weights(13);

    let fisher = empirical_fisher(&mlp, &w, &batch).unwrap();

    // Oracle: finite-difference log-likelihood gradients, squared and
    // averaged per coordinate.
    let h = 1e-5;
    let mut oracle = vec![0.0; mlp.n_params()];
    for i in 0..batch.n_samples() {
        let single = Batch::new(batch.input_row(i).to_vec(), 5, vec![batch.target(i)], 2).unwrap();
        let log_prob = |values: &[f64]| -> f64 {
            let wv = ParamVector::new(values.to_vec(), mlp.partition().clone()).unwrap();
            -mlp.eval_loss(&wv, &single).unwrap()
        };
        let grad = common::finite_diff_grad(log_prob, w.values(), h);
        for (acc, g) in oracle.iter_mut().zip(&grad) {
            *acc += g * g;
        }
    }
    for acc in &mut oracle {
        *acc /= batch.n_samples() as f64;
    }

    let mut worst = 0.0f64;
    for (i, (got, want)) in fisher.values().iter().zip(&oracle).enumerate() {
        let rel = (got - want).abs() / want.max(1e-10);
        worst = worst.max(rel);
        assert!(
            rel < 1e-4,
            "coordinate {i}: fisher {got} vs oracle {want} (rel {rel:.3e})"
        );
    }
    println!("acceptance 03 fisher-oracle: PASS (worst relative error {worst:.3e})");
}

#[test]
fn criterion_04_lanczos_vs_dense_eig() {
    // Random 50-dim symmetric positive definite matrix.
    let n = 50;
    let mut rng = stream_rng(1004, 0);
    let mut sym = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = rng.random_range(-1.0..1.0);
            sym[i * n + j] = v;
            sym[j * n + i] = v;
        }
    }
    // M = S*S + I/2 is symmetric positive definite.
    let mut matrix = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += sym[i * n + k] * sym[k * n + j];
            }
            matrix[i * n + j] = acc + if i == j { 0.5 } else { 0.0 };
        }
    }

    let dense = common::jacobi_eigenvalues(&matrix, n);
    let op = DenseSymmetric::new(n, matrix.clone()).unwrap();
    let report = lanczos_spectrum(&op, 5, n, 9).unwrap();

    let mut worst = 0.0f64;
    for (i, (ritz, eig)) in report.eigenvalues.iter().zip(&dense).enumerate() {
        let rel = (ritz - eig).abs() / eig.abs();
        worst = worst.max(rel);
        assert!(
            rel < 1e-6,
            "eigenvalue {i}: {ritz} vs {eig} (rel {rel:.3e})"
        );
    }
    let ratio = report.ratio_1_5.unwrap();
    let dense_ratio = dense[0] / dense[4];
    assert!(
        ((ratio - dense_ratio) / dense_ratio).abs() < 1e-6,
        "ratio {ratio} vs {dense_ratio}"
    );
    println!(
        "acceptance 04 lanczos-vs-dense: PASS (worst relative error {worst:.3e}, lambda1/lambda5 {ratio:.6})"
    );
}

#[test]
fn criterion_05_alignment_bounds() {
    let (obj, constants) = bench_quadratic();
    for rho in [0.01, 0.05, 0.1] {
        let deterministic = verify_alignment_bound(&obj, &constants, rho, 200, 105).unwrap();
        assert_eq!(
            deterministic.violations, 0,
            "deterministic alignment, rho {rho}: {deterministic:?}"
        );
        let stochastic =
            verify_stochastic_alignment(&obj, &constants, rho, 20, 10_000, 105, None).unwrap();
        assert_eq!(
            stochastic.violations, 0,
            "stochastic alignment, rho {rho}: {stochastic:?}"
        );
    }
    println!(
        "acceptance 05 alignment-bounds: PASS (3 radii, deterministic + 10^4-rep Monte-Carlo)"
    );
}

#[test]
fn criterion_06_descent_inequalities() {
    let (obj, constants) = bench_quadratic();
    let eta = 0.5;
    let rho = 0.05;
    let dense = verify_descent(
        &obj,
        &constants,
        eta,
        rho,
        OptimizerKind::Sam,
        1000,
        100,
        106,
        None,
    )
    .unwrap();
    assert_eq!(dense.violations, 0, "{dense:?}");
    let masked = verify_descent(
        &obj,
        &constants,
        eta,
        rho,
        OptimizerKind::Ssam,
        1000,
        100,
        107,
        Some(TheoryMask::FixedRandom { sparsity: 0.5 }),
    )
    .unwrap();
    assert_eq!(masked.violations, 0, "{masked:?}");
    println!(
        "acceptance 06 descent-inequalities: PASS (worst margins dense {:.4}, masked {:.4} over 1000 states)",
        dense.worst_margin, masked.worst_margin
    );
}

#[test]
fn criterion_07_rate_bound_dense() {
    let (obj, constants) = bench_quadratic();
    let trace = run_convergence(
        &obj,
        &constants,
        OptimizerKind::Sam,
        0.5,
        0.05,
        10_000,
        20,
        1007,
        None,
    )
    .unwrap();
    let report = check_bound(&trace, &constants, RateBound::Dense).unwrap();
    assert_eq!(report.violations, 0, "{report:?}");
    println!(
        "acceptance 07 rate-bound-dense: PASS (T = 10^4, 20 repeats, worst prefix margin {:.4})",
        report.worst_margin
    );
}

#[test]
fn criterion_08_rate_bound_masked() {
    let (obj, constants) = bench_quadratic();
    // rho0 = 0.05 <= G eta0 / 2 = 2.5.
    let trace = run_convergence(
        &obj,
        &constants,
        OptimizerKind::Ssam,
        0.5,
        0.05,
        10_000,
        20,
        1008,
        Some(TheoryMask::Dynamic {
            sparsity: 0.5,
            alpha: 0.5,
            criterion: DropCriterion::Flattest,
        }),
    )
    .unwrap();
    let report = check_bound(&trace, &constants, RateBound::Masked).unwrap();
    assert_eq!(report.violations, 0, "{report:?}");
    println!(
        "acceptance 08 rate-bound-masked: PASS (T = 10^4, 20 repeats, worst prefix margin {:.4})",
        report.worst_margin
    );
}

#[test]
fn criterion_09_flops_table() {
    let model = CostModel::default();
    let table = [
        (0.5, 1.65),
        (0.8, 1.44),
        (0.9, 1.36),
        (0.95, 1.33),
        (0.98, 1.31),
        (0.99, 1.30),
    ];
    let mut worst = 0.0f64;
    for (s, reference) in table {
        let cost = flops_estimate(&model, OptimizerKind::Ssam, s);
        let err = (cost - reference).abs();
        worst = worst.max(err);
        assert!(err <= 0.01 + 1e-12, "s = {s}: {cost} vs {reference}");
    }
    let sam = flops_estimate(&model, OptimizerKind::Sam, 0.0);
    assert!((sam - 2.0).abs() < 1e-12);
    println!("acceptance 09 flops-table: PASS (worst deviation {worst:.4}, two-step cost 2.00)");
}

fn blobs_config(
    seed: u64,
    n_samples: usize,
    optimizer: &str,
    mask: &str,
    epochs: u64,
) -> ExperimentConfig {
    let text = format!(
        r#"{{
            "objective": {{
                "family": "mlp-classifier",
                "dataset": {{"source": "blobs", "n_samples": {n_samples}, "n_features": 20,
                             "separation": 2.0}},
                "hidden": 16
            }},
            "optimizer": {optimizer},
            "mask": {mask},
            "epochs": {epochs},
            "batch_size": 32,
            "seed": {seed}
        }}"#
    );
    serde_json::from_str(&text).expect("valid test config")
}

#[test]
fn criterion_10_grad_diff_ratio() {
    let mut fractions = Vec::new();
    for seed in [3101u64, 3102, 3103] {
        let config = blobs_config(
            seed,
            2000,
            r#"{"kind": "sgd", "eta0": 0.05, "momentum": 0.9}"#,
            r#"{}"#,
            5,
        );
        let run = train(&config).unwrap();
        let probe = run.train_data.as_ref().unwrap().as_batch();
        let g_plain = run.objective.grad(&run.state.w, &probe).unwrap();
        let (eps, _) = compute_perturbation(&g_plain, 0.05);
        let g_two = run
            .objective
            .grad(&run.state.w.add_scaled(&eps, 1.0), &probe)
            .unwrap();
        let hist = grad_diff_ratio(&g_two, &g_plain).unwrap();
        assert!(
            hist.fraction_below_zero > 0.5,
            "seed {seed}: fraction {:.4}",
            hist.fraction_below_zero
        );
        fractions.push(hist.fraction_below_zero);
    }
    println!(
        "acceptance 10 grad-diff-ratio: PASS (fractions below zero: {:.3}, {:.3}, {:.3})",
        fractions[0], fractions[1], fractions[2]
    );
}

#[test]
fn criterion_11_generalization_analogue() {
    let seeds = [4201u64, 4202, 4203];
    let epochs = 15;
    let n_samples = 4000;
    let sgd_opt = r#"{"kind": "sgd", "eta0": 0.05, "momentum": 0.9, "weight_decay": 0.001}"#;
    let sam_opt =
        r#"{"kind": "sam", "eta0": 0.05, "rho0": 0.05, "momentum": 0.9, "weight_decay": 0.001}"#;
    let ssam_opt =
        r#"{"kind": "ssam", "eta0": 0.05, "rho0": 0.05, "momentum": 0.9, "weight_decay": 0.001}"#;
    let fisher_mask_cfg =
        r#"{"sparsity": 0.5, "kind": "fisher", "update_every": 1, "fisher_samples": 128}"#;
    let dynamic_mask_cfg =
        r#"{"sparsity": 0.5, "kind": "dynamic", "update_every": 1, "alpha": 0.5}"#;

    let mean_accuracy = |optimizer: &str, mask: &str| -> f64 {
        let mut total = 0.0;
        for &seed in &seeds {
            let run = train(&blobs_config(seed, n_samples, optimizer, mask, epochs)).unwrap();
            total += run.record.metrics.test_accuracy.expect("classifier run");
        }
        total / seeds.len() as f64
    };

    let sgd = mean_accuracy(sgd_opt, "{}");
    let sam = mean_accuracy(sam_opt, "{}");
    let ssam_fisher = mean_accuracy(ssam_opt, fisher_mask_cfg);
    let ssam_dynamic = mean_accuracy(ssam_opt, dynamic_mask_cfg);

    assert!(
        sam >= sgd - 0.002,
        "two-step update fell behind: sam {sam:.4} vs sgd {sgd:.4}"
    );
    assert!(
        ssam_fisher >= sam - 0.005,
        "fisher-masked update fell behind: {ssam_fisher:.4} vs sam {sam:.4}"
    );
    assert!(
        ssam_dynamic >= sam - 0.005,
        "dynamic-masked update fell behind: {ssam_dynamic:.4} vs sam {sam:.4}"
    );
    println!(
        "acceptance 11 generalization-analogue: PASS (test acc means: sgd {sgd:.4}, sam {sam:.4}, \
         ssam-fisher {ssam_fisher:.4}, ssam-dynamic {ssam_dynamic:.4})"
    );
}

#[test]
fn criterion_12_determinism() {
    let config = blobs_config(
        5201,
        2000,
        r#"{"kind": "ssam", "eta0": 0.05, "rho0": 0.05, "momentum": 0.9}"#,
        r#"{"sparsity": 0.5, "kind": "dynamic", "update_every": 1}"#,
        3,
    );
    let strip_wall = |csv: &str| -> String {
        csv.lines()
            .map(|line| {
                let mut fields: Vec<&str> = line.split(',').collect();
                fields.pop();
                fields.join(",")
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    let a = train(&config).unwrap();
    let b = train(&config).unwrap();
    let rows_a = strip_wall(&a.record.rows_csv());
    let rows_b = strip_wall(&b.record.rows_csv());
    assert!(!rows_a.is_empty());
    assert_eq!(rows_a.as_bytes(), rows_b.as_bytes());
    println!(
        "acceptance 12 determinism: PASS ({} byte-identical rows excluding wall clock)",
        a.record.rows.len()
    );
}
