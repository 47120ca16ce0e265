//! The training loop: epochs of seeded minibatches, optimizer steps, epoch-
//! boundary mask regeneration, and per-step metric rows.

use std::time::Instant;

use rand::seq::SliceRandom;

use crate::data::{Batch, Dataset};
use crate::error::{Error, Result};
use crate::mask::{maybe_regenerate, RegenContext, SparseMask};
use crate::objective::{Objective, StochasticObjective};
use crate::optim::{self, OptimizerKind, OptimizerState};
use crate::param::ParamVector;
use crate::seed::{self, tags};

use super::config::ExperimentConfig;
use super::record::{FinalMetrics, RunRecord, RunStatus, StepRow};

/// A finished (or aborted) run with everything diagnostics need.
pub struct TrainedRun {
    pub record: RunRecord,
    pub state: OptimizerState,
    pub objective: StochasticObjective,
    pub train_data: Option<Dataset>,
    pub test_data: Option<Dataset>,
}

impl TrainedRun {
    pub fn status(&self) -> RunStatus {
        self.record.metrics.status
    }
}

/// Run the configured experiment to completion.
///
/// Deterministic given `(config, seed)`: weight init, batch order, noise
/// draws and mask updates each consume their own derived stream. A
/// numerical failure stops the loop and returns the partial record with
/// failure status rather than erroring, so callers can persist it.
pub fn train(config: &ExperimentConfig) -> Result<TrainedRun> {
    config.validate()?;
    let (objective, full_data) = config.build_objective()?;
    let run_seed = config.seed;

    let (train_data, test_data) = match full_data {
        Some(data) => {
            let (train, test) = data.split(config.test_fraction(), run_seed);
            (Some(train), Some(test))
        }
        None => (None, None),
    };

    let w = objective.init_weights(run_seed);
    let dim = w.len();

    // Algorithm start: weights and (for masked runs) mask both random.
    let mut mask_rng = seed::stream_rng(run_seed, tags::MASK_INIT);
    let mut mask_gen_ms = 0.0;
    let mut mask_regen_count = 0u64;
    let mut pending_regen_flag = false;
    let mask = if config.optimizer.kind == OptimizerKind::Ssam {
        let t0 = Instant::now();
        let m = crate::mask::random_mask(dim, config.mask.sparsity, &mut mask_rng)?;
        mask_gen_ms += t0.elapsed().as_secs_f64() * 1e3;
        mask_regen_count += 1;
        pending_regen_flag = true;
        m
    } else {
        SparseMask::all_ones(dim)
    };

    let mut state = OptimizerState::new(w, mask, run_seed)?;
    let mut order_rng = seed::stream_rng(run_seed, tags::BATCH_ORDER);
    let mut noise_rng = seed::stream_rng(run_seed, tags::NOISE);
    let mut update_rng = seed::stream_rng(run_seed, tags::MASK_UPDATE);

    let policy = config.mask.policy();
    let mut rows = Vec::new();
    let mut last_grad: Option<ParamVector> = None;
    let mut failure: Option<String> = None;

    'epochs: for epoch in 0..config.epochs {
        let batches = epoch_batches(
            config,
            &objective,
            train_data.as_ref(),
            &mut order_rng,
            &mut noise_rng,
        )?;
        for batch in batches {
            let t0 = Instant::now();
            let info = match optim::step(&mut state, &objective, &batch, &config.optimizer) {
                Ok(info) => info,
                Err(Error::Numerical(msg)) => {
                    failure = Some(msg);
                    break 'epochs;
                }
                Err(other) => return Err(other),
            };
            let wall_ms = t0.elapsed().as_secs_f64() * 1e3;
            rows.push(StepRow {
                step: state.t - 1,
                epoch,
                loss: info.loss,
                grad_norm_sq: info.grad_norm_sq,
                rho_t: info.rho_t,
                eta_t: info.eta_t,
                sparsity: state.mask.sparsity(),
                mask_regen: std::mem::take(&mut pending_regen_flag),
                wall_ms,
            });
            last_grad = Some(info.first_grad);
        }

        if config.optimizer.kind == OptimizerKind::Ssam {
            let ctx = RegenContext {
                objective: &objective,
                weights: &state.w,
                current_mask: &state.mask,
                last_grad: last_grad.as_ref(),
                train_data: train_data.as_ref(),
                sparsity: config.mask.sparsity,
                total_epochs: config.epochs,
            };
            let t0 = Instant::now();
            if let Some(fresh) = maybe_regenerate(epoch + 1, &policy, &ctx, &mut update_rng)? {
                mask_gen_ms += t0.elapsed().as_secs_f64() * 1e3;
                state.mask = fresh;
                mask_regen_count += 1;
                pending_regen_flag = true;
            }
        }
    }

    let status = if failure.is_none() {
        RunStatus::Completed
    } else {
        RunStatus::NumericalFailure
    };
    let metrics = final_metrics(
        &objective,
        &state,
        train_data.as_ref(),
        test_data.as_ref(),
        status,
        failure,
        mask_gen_ms,
        mask_regen_count,
    );

    Ok(TrainedRun {
        record: RunRecord {
            config: config.clone(),
            rows,
            metrics,
        },
        state,
        objective,
        train_data,
        test_data,
    })
}

fn epoch_batches(
    config: &ExperimentConfig,
    objective: &StochasticObjective,
    train_data: Option<&Dataset>,
    order_rng: &mut rand_chacha::ChaCha8Rng,
    noise_rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Vec<Batch>> {
    match train_data {
        Some(data) => {
            // Fresh shuffle every epoch, minibatches of batch_size (last one
            // may be short).
            let mut indices: Vec<usize> = (0..data.len()).collect();
            indices.shuffle(order_rng);
            Ok(indices
                .chunks(config.batch_size)
                .map(|chunk| data.batch(chunk))
                .collect())
        }
        None => {
            let dim = objective.dim();
            Ok((0..config.synthetic_steps_per_epoch())
                .map(|_| Batch::noise(noise_rng, dim))
                .collect())
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn final_metrics(
    objective: &StochasticObjective,
    state: &OptimizerState,
    train_data: Option<&Dataset>,
    test_data: Option<&Dataset>,
    status: RunStatus,
    failure: Option<String>,
    mask_gen_total_ms: f64,
    mask_regen_count: u64,
) -> FinalMetrics {
    let (final_loss, train_accuracy, test_accuracy) = match (objective, train_data) {
        (StochasticObjective::MlpClassifier(mlp), Some(train)) => {
            let train_batch = train.as_batch();
            let loss = objective.eval_loss(&state.w, &train_batch).ok();
            let train_acc = mlp.accuracy(&state.w, &train_batch).ok();
            let test_acc = test_data
                .filter(|t| !t.is_empty())
                .and_then(|t| mlp.accuracy(&state.w, &t.as_batch()).ok());
            (loss, train_acc, test_acc)
        }
        _ => {
            let loss = objective
                .eval_loss(&state.w, &Batch::noiseless(state.w.len()))
                .ok();
            (loss, None, None)
        }
    };
    FinalMetrics {
        status,
        final_loss,
        train_accuracy,
        test_accuracy,
        mask_gen_total_ms,
        mask_regen_count,
        failure,
    }
}
