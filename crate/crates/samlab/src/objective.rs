//! Differentiable objectives with stochastic gradient oracles.
//!
//! Three families:
//!
//! - [`NoisyQuadratic`]: `f(w) = 1/2 * sum_i a_i w_i^2` with additive
//!   Gaussian gradient noise. Every constant (smoothness, gradient bound on a
//!   ball, noise variance) is known exactly, which is what the theory bench
//!   needs.
//! - [`TrigNonconvex`]: `f(w) = 1/2 ||w||^2 + amp * sum_i cos(freq * w_i)`,
//!   a non-convex landscape with a lattice of spurious minima and, again,
//!   exact constants.
//! - [`MlpClassifier`]: a small tanh MLP with softmax cross-entropy and
//!   hand-derived gradients (see [`crate::mlp`]).
//!
//! The stochastic oracle model: a noise batch fixes one realization
//! `xi ~ N(0, (sigma^2/d) I)` and the noisy gradient is
//! `g(w) = grad f(w) + xi` for every `w` queried with that batch. So
//! `E||g - grad f||^2 = sigma^2` holds with equality, and two evaluations on
//! the same batch see the same realization (one stochastic oracle per step).

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Batch;
use crate::error::{Error, Result};
use crate::mlp::MlpClassifier;
use crate::param::{ParamVector, Partition};

/// Constants of the standard smooth non-convex analysis, valid on a ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnownConstants {
    /// Smoothness constant L.
    pub smoothness: f64,
    /// Gradient-norm bound G on the working ball.
    pub grad_bound: f64,
    /// Noise standard deviation.
    pub noise_std: f64,
    /// Radius of the ball on which `grad_bound` is valid.
    pub ball_radius: f64,
}

/// Gradient/loss oracle interface every module operates against.
pub trait Objective {
    fn dim(&self) -> usize;

    fn partition(&self) -> &Partition;

    /// Mean loss over the batch.
    fn eval_loss(&self, w: &ParamVector, batch: &Batch) -> Result<f64>;

    /// Minibatch gradient; for synthetic families this is the true gradient
    /// plus the batch's noise realization.
    fn grad(&self, w: &ParamVector, batch: &Batch) -> Result<ParamVector>;

    /// Noise-free gradient. Only synthetic families support it.
    fn true_grad(&self, w: &ParamVector) -> Result<ParamVector>;

    /// Gradient of `log p_w(y | x)` for one example. Classifiers only.
    fn log_prob_grad(&self, w: &ParamVector, input: &[f64], label: usize) -> Result<ParamVector>;

    fn known_constants(&self) -> Option<KnownConstants>;

    fn is_classifier(&self) -> bool {
        false
    }

    /// Seeded initial weights.
    fn init_weights(&self, seed: u64) -> ParamVector;
}

fn check_batch_dim(expected: usize, batch: &Batch) -> Result<()> {
    if batch.n_features() != expected {
        return Err(Error::Config(format!(
            "batch has {} features, objective expects {}",
            batch.n_features(),
            expected
        )));
    }
    Ok(())
}

fn check_loss_finite(loss: f64, family: &str) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::Numerical(format!(
            "non-finite loss {loss} from {family} objective"
        )))
    }
}

/// `f(w) = 1/2 * sum_i a_i w_i^2` with Gaussian gradient noise.
#[derive(Debug, Clone)]
pub struct NoisyQuadratic {
    curvature: Vec<f64>,
    noise_std: f64,
    ball_radius: f64,
    partition: Partition,
}

impl NoisyQuadratic {
    /// Diagonal curvatures must be positive.
    pub fn new(curvature: Vec<f64>, noise_std: f64, ball_radius: f64) -> Result<Self> {
        if curvature.is_empty() || curvature.iter().any(|&a| !a.is_finite() || a <= 0.0) {
            return Err(Error::Config(
                "quadratic curvature entries must be positive and finite".into(),
            ));
        }
        if noise_std < 0.0 || ball_radius <= 0.0 {
            return Err(Error::Config(
                "need noise_std >= 0 and ball_radius > 0".into(),
            ));
        }
        let partition = Partition::single("w", curvature.len());
        Ok(NoisyQuadratic {
            curvature,
            noise_std,
            ball_radius,
            partition,
        })
    }

    /// Identity curvature in `dim` dimensions.
    pub fn isotropic(dim: usize, noise_std: f64, ball_radius: f64) -> Result<Self> {
        NoisyQuadratic::new(vec![1.0; dim], noise_std, ball_radius)
    }

    pub fn curvature(&self) -> &[f64] {
        &self.curvature
    }

    fn noise_scale(&self) -> f64 {
        self.noise_std / (self.curvature.len() as f64).sqrt()
    }
}

impl Objective for NoisyQuadratic {
    fn dim(&self) -> usize {
        self.curvature.len()
    }

    fn partition(&self) -> &Partition {
        &self.partition
    }

    fn eval_loss(&self, w: &ParamVector, batch: &Batch) -> Result<f64> {
        check_batch_dim(self.dim(), batch)?;
        let quad: f64 = self
            .curvature
            .iter()
            .zip(w.values())
            .map(|(a, x)| 0.5 * a * x * x)
            .sum();
        let scale = self.noise_scale();
        let noise: f64 = batch
            .mean_row()
            .iter()
            .zip(w.values())
            .map(|(z, x)| scale * z * x)
            .sum();
        check_loss_finite(quad + noise, "noisy-quadratic")
    }

    fn grad(&self, w: &ParamVector, batch: &Batch) -> Result<ParamVector> {
        check_batch_dim(self.dim(), batch)?;
        let scale = self.noise_scale();
        let values: Vec<f64> = self
            .curvature
            .iter()
            .zip(w.values())
            .zip(batch.mean_row())
            .map(|((a, x), z)| a * x + scale * z)
            .collect();
        let g = ParamVector::new(values, self.partition.clone())?;
        g.check_finite("noisy-quadratic gradient")?;
        Ok(g)
    }

    fn true_grad(&self, w: &ParamVector) -> Result<ParamVector> {
        let values: Vec<f64> = self
            .curvature
            .iter()
            .zip(w.values())
            .map(|(a, x)| a * x)
            .collect();
        ParamVector::new(values, self.partition.clone())
    }

    fn log_prob_grad(&self, _w: &ParamVector, _x: &[f64], _y: usize) -> Result<ParamVector> {
        Err(Error::Unsupported(
            "log_prob_grad needs a classifier objective".into(),
        ))
    }

    fn known_constants(&self) -> Option<KnownConstants> {
        let l = self.curvature.iter().cloned().fold(f64::MIN, f64::max);
        Some(KnownConstants {
            smoothness: l,
            grad_bound: l * self.ball_radius,
            noise_std: self.noise_std,
            ball_radius: self.ball_radius,
        })
    }

    fn init_weights(&self, seed: u64) -> ParamVector {
        random_ball_point(self.dim(), self.ball_radius / 2.0, seed, &self.partition)
    }
}

/// `f(w) = 1/2 ||w||^2 + amp * sum_i cos(freq * w_i)`.
///
/// Non-convex whenever `amp * freq^2 > 1`; the gradient is
/// `w - amp * freq * sin(freq * w)` elementwise.
#[derive(Debug, Clone)]
pub struct TrigNonconvex {
    dim: usize,
    amp: f64,
    freq: f64,
    noise_std: f64,
    ball_radius: f64,
    partition: Partition,
}

impl TrigNonconvex {
    pub fn new(dim: usize, amp: f64, freq: f64, noise_std: f64, ball_radius: f64) -> Result<Self> {
        if dim == 0 || amp < 0.0 || freq <= 0.0 || noise_std < 0.0 || ball_radius <= 0.0 {
            return Err(Error::Config(
                "trig objective needs dim >= 1, amp >= 0, freq > 0, noise_std >= 0, radius > 0"
                    .into(),
            ));
        }
        Ok(TrigNonconvex {
            dim,
            amp,
            freq,
            noise_std,
            ball_radius,
            partition: Partition::single("w", dim),
        })
    }

    pub fn amp(&self) -> f64 {
        self.amp
    }

    pub fn freq(&self) -> f64 {
        self.freq
    }

    fn noise_scale(&self) -> f64 {
        self.noise_std / (self.dim as f64).sqrt()
    }
}

impl Objective for TrigNonconvex {
    fn dim(&self) -> usize {
        self.dim
    }

    fn partition(&self) -> &Partition {
        &self.partition
    }

    fn eval_loss(&self, w: &ParamVector, batch: &Batch) -> Result<f64> {
        check_batch_dim(self.dim, batch)?;
        let base: f64 = w
            .values()
            .iter()
            .map(|&x| 0.5 * x * x + self.amp * (self.freq * x).cos())
            .sum();
        let scale = self.noise_scale();
        let noise: f64 = batch
            .mean_row()
            .iter()
            .zip(w.values())
            .map(|(z, x)| scale * z * x)
            .sum();
        check_loss_finite(base + noise, "trig-nonconvex")
    }

    fn grad(&self, w: &ParamVector, batch: &Batch) -> Result<ParamVector> {
        check_batch_dim(self.dim, batch)?;
        let scale = self.noise_scale();
        let values: Vec<f64> = w
            .values()
            .iter()
            .zip(batch.mean_row())
            .map(|(&x, z)| x - self.amp * self.freq * (self.freq * x).sin() + scale * z)
            .collect();
        let g = ParamVector::new(values, self.partition.clone())?;
        g.check_finite("trig-nonconvex gradient")?;
        Ok(g)
    }

    fn true_grad(&self, w: &ParamVector) -> Result<ParamVector> {
        let values: Vec<f64> = w
            .values()
            .iter()
            .map(|&x| x - self.amp * self.freq * (self.freq * x).sin())
            .collect();
        ParamVector::new(values, self.partition.clone())
    }

    fn log_prob_grad(&self, _w: &ParamVector, _x: &[f64], _y: usize) -> Result<ParamVector> {
        Err(Error::Unsupported(
            "log_prob_grad needs a classifier objective".into(),
        ))
    }

    fn known_constants(&self) -> Option<KnownConstants> {
        // Hessian is diag(1 - amp*freq^2*cos(freq*w)), so |lambda| <= 1 + amp*freq^2.
        let l = 1.0 + self.amp * self.freq * self.freq;
        // ||grad f|| <= ||w|| + amp*freq*sqrt(d) on the ball.
        let g = self.ball_radius + self.amp * self.freq * (self.dim as f64).sqrt();
        Some(KnownConstants {
            smoothness: l,
            grad_bound: g,
            noise_std: self.noise_std,
            ball_radius: self.ball_radius,
        })
    }

    fn init_weights(&self, seed: u64) -> ParamVector {
        random_ball_point(self.dim, self.ball_radius / 2.0, seed, &self.partition)
    }
}

/// Seeded point on the sphere of `radius` (deterministic start for runs).
fn random_ball_point(dim: usize, radius: f64, seed: u64, partition: &Partition) -> ParamVector {
    let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::child_seed(
        seed,
        crate::seed::tags::WEIGHT_INIT,
    ));
    let mut values: Vec<f64> = (0..dim)
        .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    for v in &mut values {
        *v *= radius / norm;
    }
    ParamVector::new(values, partition.clone()).expect("partition length matches dim")
}

/// The concrete objective families, dispatched by enum.
#[derive(Debug, Clone)]
pub enum StochasticObjective {
    NoisyQuadratic(NoisyQuadratic),
    TrigNonconvex(TrigNonconvex),
    MlpClassifier(MlpClassifier),
}

impl StochasticObjective {
    pub fn family_name(&self) -> &'static str {
        match self {
            StochasticObjective::NoisyQuadratic(_) => "noisy-quadratic",
            StochasticObjective::TrigNonconvex(_) => "trig-nonconvex",
            StochasticObjective::MlpClassifier(_) => "mlp-classifier",
        }
    }
}

macro_rules! dispatch {
    ($self:expr, $inner:ident => $body:expr) => {
        match $self {
            StochasticObjective::NoisyQuadratic($inner) => $body,
            StochasticObjective::TrigNonconvex($inner) => $body,
            StochasticObjective::MlpClassifier($inner) => $body,
        }
    };
}

impl Objective for StochasticObjective {
    fn dim(&self) -> usize {
        dispatch!(self, o => o.dim())
    }

    fn partition(&self) -> &Partition {
        dispatch!(self, o => o.partition())
    }

    fn eval_loss(&self, w: &ParamVector, batch: &Batch) -> Result<f64> {
        dispatch!(self, o => o.eval_loss(w, batch))
    }

    fn grad(&self, w: &ParamVector, batch: &Batch) -> Result<ParamVector> {
        dispatch!(self, o => o.grad(w, batch))
    }

    fn true_grad(&self, w: &ParamVector) -> Result<ParamVector> {
        dispatch!(self, o => o.true_grad(w))
    }

    fn log_prob_grad(&self, w: &ParamVector, input: &[f64], label: usize) -> Result<ParamVector> {
        dispatch!(self, o => o.log_prob_grad(w, input, label))
    }

    fn known_constants(&self) -> Option<KnownConstants> {
        dispatch!(self, o => o.known_constants())
    }

    fn is_classifier(&self) -> bool {
        dispatch!(self, o => o.is_classifier())
    }

    fn init_weights(&self, seed: u64) -> ParamVector {
        dispatch!(self, o => o.init_weights(seed))
    }
}
