//! Library entry points behind the CLI verbs. Each takes a validated
//! config, runs the work, writes artifacts into an output directory, and
//! returns the structured result for callers that want it in-process.

use std::path::Path;

use serde::Serialize;

use crate::data::Batch;
use crate::diagnostics::{
    flops_estimate, grad_diff_ratio, lanczos_spectrum, landscape_slice, CostModel, RatioHistogram,
    SpectrumReport,
};
use crate::error::{Error, Result};
use crate::hvp::HvpOracle;
use crate::mask::DropCriterion;
use crate::objective::Objective;
use crate::optim::{self, OptimizerKind};
use crate::seed::{self, tags};
use crate::theory::{
    check_bound, run_convergence, verify_alignment_bound, verify_descent,
    verify_stochastic_alignment, AssumptionConstants, BoundReport, RateBound, TheoryMask,
};

use super::ablation::{run_ablation, SummaryRow};
use super::config::ExperimentConfig;
use super::record::RunStatus;
use super::train::{train, TrainedRun};

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("json encode: {e}")))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Train once, persist the record (plus the final mask for masked runs).
pub fn train_command(config: &ExperimentConfig, out: &Path) -> Result<RunStatus> {
    ensure_dir(out)?;
    let run = train(config)?;
    run.record.write_to(out)?;
    if config.optimizer.kind == OptimizerKind::Ssam {
        run.state.mask.write_binary(&out.join("mask.bin"))?;
        run.state.mask.write_json(&out.join("mask.json"))?;
    }
    Ok(run.status())
}

/// Run the configured ablation grid and write per-cell records plus
/// `summary.csv`.
pub fn ablate_command(
    config: &ExperimentConfig,
    out: &Path,
    threads: usize,
) -> Result<Vec<SummaryRow>> {
    ensure_dir(out)?;
    run_ablation(config, out, threads)
}

/// Probe batch used for classifier-side diagnostics: a seeded fixed subset
/// of the training set.
fn probe_batch(run: &TrainedRun, samples: usize) -> Result<Batch> {
    match &run.train_data {
        Some(data) => {
            let mut rng = seed::stream_rng(run.record.config.seed, tags::DIAGNOSTICS);
            let n = samples.min(data.len());
            let picks = rand::seq::index::sample(&mut rng, data.len(), n).into_vec();
            Ok(data.batch(&picks))
        }
        None => Ok(Batch::noiseless(run.state.w.len())),
    }
}

/// Train, then estimate the top of the Hessian spectrum at the final
/// weights. Writes `spectrum.json`.
pub fn spectrum_command(config: &ExperimentConfig, out: &Path) -> Result<SpectrumReport> {
    ensure_dir(out)?;
    let run = train(config)?;
    require_completed(&run)?;
    let settings = config.spectrum;
    let oracle = if run.objective.is_classifier() {
        HvpOracle::with_batch(
            &run.objective,
            run.state.w.clone(),
            probe_batch(&run, settings.probe_samples)?,
        )?
    } else {
        HvpOracle::new(&run.objective, run.state.w.clone())?
    };
    let iterations = settings.iterations.min(run.state.w.len());
    let top_k = settings.top_k.min(iterations);
    let report = lanczos_spectrum(&oracle, top_k, iterations, config.seed)?;
    write_json(&report, &out.join("spectrum.json"))?;
    Ok(report)
}

/// Train, then slice the loss landscape around the final weights. Writes
/// `landscape.csv`.
pub fn landscape_command(config: &ExperimentConfig, out: &Path) -> Result<()> {
    ensure_dir(out)?;
    let run = train(config)?;
    require_completed(&run)?;
    let settings = config.landscape;
    let batch = probe_batch(&run, settings.probe_samples)?;
    let grid = landscape_slice(
        &run.objective,
        &run.state.w,
        &batch,
        settings.resolution,
        settings.range,
        config.seed,
    )?;
    let path = out.join("landscape.csv");
    std::fs::write(&path, grid.to_csv()).map_err(|e| Error::io(&path, e))
}

/// Ratio summary persisted as JSON next to the histogram CSV.
#[derive(Debug, Clone, Serialize)]
pub struct RatioSummary {
    pub fraction_below_zero: f64,
    pub excluded_count: usize,
    pub included_count: u64,
    pub rho: f64,
    pub histogram: RatioHistogram,
}

/// Train, then compare the plain gradient against the two-step gradient at
/// the final weights on a fixed probe batch. Writes `ratio.csv` and
/// `ratio.json`.
pub fn ratio_command(config: &ExperimentConfig, out: &Path) -> Result<RatioSummary> {
    ensure_dir(out)?;
    let run = train(config)?;
    require_completed(&run)?;
    let rho = config.ratio.rho;
    let batch = probe_batch(&run, config.ratio.probe_samples)?;
    let g_plain = run.objective.grad(&run.state.w, &batch)?;
    let (eps, _) = optim::compute_perturbation(&g_plain, rho);
    let g_two_step = run
        .objective
        .grad(&run.state.w.add_scaled(&eps, 1.0), &batch)?;
    let histogram = grad_diff_ratio(&g_two_step, &g_plain)?;
    let summary = RatioSummary {
        fraction_below_zero: histogram.fraction_below_zero,
        excluded_count: histogram.excluded_count,
        included_count: histogram.included_count(),
        rho,
        histogram,
    };
    let csv_path = out.join("ratio.csv");
    std::fs::write(&csv_path, summary.histogram.to_csv()).map_err(|e| Error::io(&csv_path, e))?;
    write_json(&summary, &out.join("ratio.json"))?;
    Ok(summary)
}

/// Run the inequality bench on the configured synthetic objective. Writes
/// `theory.json` with one report per check.
pub fn theory_command(config: &ExperimentConfig, out: &Path) -> Result<Vec<BoundReport>> {
    ensure_dir(out)?;
    let (objective, _) = config.build_objective()?;
    let constants = AssumptionConstants::from_objective(&objective)?;
    let settings = &config.theory;
    let seed_value = config.seed;
    let mut reports = Vec::new();

    for &rho in &settings.rho_grid {
        reports.push(verify_alignment_bound(
            &objective,
            &constants,
            rho,
            settings.points,
            seed_value,
        )?);
        reports.push(verify_stochastic_alignment(
            &objective,
            &constants,
            rho,
            settings.points,
            settings.mc_reps,
            seed_value,
            None,
        )?);
    }

    let eta = settings.descent_eta.min(1.0 / constants.smoothness);
    let descent_rho = settings.rho_grid.first().copied().unwrap_or(0.05);
    reports.push(verify_descent(
        &objective,
        &constants,
        eta,
        descent_rho,
        OptimizerKind::Sam,
        settings.descent_states,
        settings.descent_reps,
        seed_value,
        None,
    )?);
    reports.push(verify_descent(
        &objective,
        &constants,
        eta,
        descent_rho,
        OptimizerKind::Ssam,
        settings.descent_states,
        settings.descent_reps,
        seed_value,
        Some(TheoryMask::FixedRandom {
            sparsity: settings.rate_sparsity,
        }),
    )?);

    let dense_trace = run_convergence(
        &objective,
        &constants,
        OptimizerKind::Sam,
        settings.rate_eta0,
        settings.rate_rho0,
        settings.rate_steps,
        settings.rate_repeats,
        seed_value,
        None,
    )?;
    reports.push(check_bound(&dense_trace, &constants, RateBound::Dense)?);
    let masked_trace = run_convergence(
        &objective,
        &constants,
        OptimizerKind::Ssam,
        settings.rate_eta0,
        settings.rate_rho0,
        settings.rate_steps,
        settings.rate_repeats,
        seed_value,
        Some(TheoryMask::Dynamic {
            sparsity: settings.rate_sparsity,
            alpha: 0.5,
            criterion: DropCriterion::Flattest,
        }),
    )?;
    reports.push(check_bound(&masked_trace, &constants, RateBound::Masked)?);

    write_json(&reports, &out.join("theory.json"))?;
    Ok(reports)
}

/// Relative-cost table over a sparsity grid. Writes `flops.csv` when an
/// output directory is given; always returns the table text.
pub fn flops_command(out: Option<&Path>) -> Result<String> {
    let model = CostModel::default();
    let mut text = String::from("optimizer,sparsity,relative_flops\n");
    text.push_str(&format!(
        "sgd,,{:.2}\n",
        flops_estimate(&model, OptimizerKind::Sgd, 0.0)
    ));
    text.push_str(&format!(
        "sam,0,{:.2}\n",
        flops_estimate(&model, OptimizerKind::Sam, 0.0)
    ));
    for s in [0.5, 0.8, 0.9, 0.95, 0.98, 0.99] {
        text.push_str(&format!(
            "ssam,{s},{:.2}\n",
            flops_estimate(&model, OptimizerKind::Ssam, s)
        ));
    }
    if let Some(dir) = out {
        ensure_dir(dir)?;
        let path = dir.join("flops.csv");
        std::fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(text)
}

fn require_completed(run: &TrainedRun) -> Result<()> {
    match run.status() {
        RunStatus::Completed => Ok(()),
        RunStatus::NumericalFailure => Err(Error::Numerical(format!(
            "training failed before diagnostics: {}",
            run.record
                .metrics
                .failure
                .as_deref()
                .unwrap_or("unknown failure")
        ))),
    }
}

/// Gradient evaluations a single optimizer step performs; used to keep the
/// cost table honest against the implementation.
pub fn grad_evals_per_step(kind: OptimizerKind) -> u8 {
    match kind {
        OptimizerKind::Sgd => 1,
        OptimizerKind::Sam | OptimizerKind::Ssam => 2,
    }
}
