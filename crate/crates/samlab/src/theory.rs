//! Numerical bench for the convergence analysis.
//!
//! Every inequality the analysis rests on is checked on objectives whose
//! constants (smoothness L, ball gradient bound G, noise level sigma) are
//! known exactly:
//!
//! - the perturbed-gradient alignment bound (deterministic),
//! - its stochastic version, in expectation over noise draws,
//! - the per-step descent inequality for both the dense and the masked
//!   two-step update (the masked version pays an extra `||e_t||^2` term for
//!   the perturbation mass the mask removes),
//! - the `C/sqrt(T) + C' log(T)/sqrt(T)` averaged-gradient bounds under
//!   1/sqrt(t) schedules, checked at every prefix of a real run.
//!
//! Expectations are sample means; a Monte-Carlo check passes when no
//! violation exceeds three standard errors. Deterministic checks pass only
//! with zero violations.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::data::Batch;
use crate::error::{Error, Result};
use crate::mask::{drop_grow_update, random_mask, DropCriterion, SparseMask};
use crate::objective::Objective;
use crate::optim::{self, OptimizerConfig, OptimizerKind, OptimizerState, ScheduleRule};
use crate::param::ParamVector;
use crate::seed;

const GRAD_FLOOR: f64 = 1e-8;

/// Constants of the working-ball analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AssumptionConstants {
    pub smoothness: f64,
    pub grad_bound: f64,
    pub noise_std: f64,
    pub ball_radius: f64,
}

impl AssumptionConstants {
    /// Pull the constants from an objective that knows them.
    pub fn from_objective<O: Objective + ?Sized>(obj: &O) -> Result<Self> {
        let k = obj.known_constants().ok_or_else(|| {
            Error::Unsupported("objective does not expose assumption constants".into())
        })?;
        Ok(AssumptionConstants {
            smoothness: k.smoothness,
            grad_bound: k.grad_bound,
            noise_std: k.noise_std,
            ball_radius: k.ball_radius,
        })
    }
}

/// Outcome of one inequality check.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    /// Which inequality was checked.
    pub check: String,
    pub trials: usize,
    pub violations: usize,
    /// Minimum slack (RHS-side room) seen across trials; negative means an
    /// observed violation.
    pub worst_margin: f64,
    /// Standard error attached to the worst margin, for Monte-Carlo checks.
    pub mc_stderr: Option<f64>,
    /// Full inequality instantiation, echoed for audit.
    pub constants: BTreeMap<String, f64>,
    pub passed: bool,
}

impl BoundReport {
    fn new(check: &str, constants: BTreeMap<String, f64>) -> Self {
        BoundReport {
            check: check.to_string(),
            trials: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
            mc_stderr: None,
            constants,
            passed: true,
        }
    }

    fn record(&mut self, margin: f64, stderr: Option<f64>) {
        self.trials += 1;
        let tolerance = stderr.map_or(0.0, |s| 3.0 * s);
        if margin < -tolerance {
            self.violations += 1;
            self.passed = false;
        }
        if margin < self.worst_margin {
            self.worst_margin = margin;
            self.mc_stderr = stderr;
        }
    }
}

/// Uniform point in the ball of `radius` whose true gradient is not
/// numerically degenerate.
fn sample_ball_point<O: Objective + ?Sized>(
    obj: &O,
    radius: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(ParamVector, ParamVector)> {
    let d = obj.dim();
    for _ in 0..1000 {
        let mut values: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
        for v in &mut values {
            *v *= r / norm;
        }
        let w = ParamVector::new(values, obj.partition().clone())?;
        let g = obj.true_grad(&w)?;
        if g.norm() > GRAD_FLOOR {
            return Ok((w, g));
        }
    }
    Err(Error::Numerical(
        "could not sample a ball point with non-degenerate gradient".into(),
    ))
}

fn mean_and_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Deterministic alignment bound: at any point, the true gradient and the
/// true gradient at the normalized-ascent point satisfy
/// `<g(w), g(w + rho g/||g||)> >= ||g(w)||^2 - rho L G`.
pub fn verify_alignment_bound<O: Objective + ?Sized>(
    obj: &O,
    constants: &AssumptionConstants,
    rho: f64,
    n_points: usize,
    seed_value: u64,
) -> Result<BoundReport> {
    if rho.is_nan() || rho <= 0.0 {
        return Err(Error::InvalidArgument("rho must be positive".into()));
    }
    let l = constants.smoothness;
    let g_bound = constants.grad_bound;
    let mut echo = BTreeMap::new();
    echo.insert("smoothness".into(), l);
    echo.insert("grad_bound".into(), g_bound);
    echo.insert("rho".into(), rho);
    let mut report = BoundReport::new("alignment: <g, g(w + rho g/|g|)> >= |g|^2 - rho*L*G", echo);

    let mut rng = seed::stream_rng(seed_value, 101);
    for _ in 0..n_points {
        let (w, grad) = sample_ball_point(obj, constants.ball_radius, &mut rng)?;
        let ascent = w.add_scaled(&grad, rho / grad.norm());
        let lhs = grad.dot(&obj.true_grad(&ascent)?);
        let rhs = grad.norm_sq() - rho * l * g_bound;
        report.record(lhs - rhs, None);
    }
    Ok(report)
}

/// Stochastic alignment bound for the two-step iteration, in expectation:
/// `E<grad f(w), g(w_half)> >= 1/2 |grad f|^2 - L^2 rho^2 - L rho G`, with
/// the half point formed from the same noisy draw. With `mask` given, the
/// masked variant is checked instead; its bound doubles the `rho^2` term
/// and subtracts `L^2 E||e_t||^2` for the removed perturbation mass.
pub fn verify_stochastic_alignment<O: Objective + ?Sized>(
    obj: &O,
    constants: &AssumptionConstants,
    rho: f64,
    n_points: usize,
    mc_reps: usize,
    seed_value: u64,
    mask: Option<&SparseMask>,
) -> Result<BoundReport> {
    if rho.is_nan() || rho <= 0.0 {
        return Err(Error::InvalidArgument("rho must be positive".into()));
    }
    if mc_reps == 0 || n_points == 0 {
        return Err(Error::InvalidArgument(
            "need n_points >= 1, mc_reps >= 1".into(),
        ));
    }
    let l = constants.smoothness;
    let g_bound = constants.grad_bound;
    let rho_coeff = if mask.is_some() { 2.0 } else { 1.0 };
    let mut echo = BTreeMap::new();
    echo.insert("smoothness".into(), l);
    echo.insert("grad_bound".into(), g_bound);
    echo.insert("rho".into(), rho);
    echo.insert("rho_sq_coeff".into(), rho_coeff);
    echo.insert("mc_reps".into(), mc_reps as f64);
    let name = if mask.is_some() {
        "masked stochastic alignment (with e_t correction)"
    } else {
        "stochastic alignment: E<grad, g(w_half)> >= |grad|^2/2 - L^2 rho^2 - L rho G"
    };
    let mut report = BoundReport::new(name, echo);

    let mut rng = seed::stream_rng(seed_value, 102);
    let d = obj.dim();
    for _ in 0..n_points {
        let (w, grad) = sample_ball_point(obj, constants.ball_radius, &mut rng)?;
        let base_rhs = 0.5 * grad.norm_sq() - rho_coeff * l * l * rho * rho - l * rho * g_bound;
        let mut margins = Vec::with_capacity(mc_reps);
        for _ in 0..mc_reps {
            let batch = Batch::noise(&mut rng, d);
            let g1 = obj.grad(&w, &batch)?;
            let (eps_full, _) = optim::compute_perturbation(&g1, rho);
            let (eps, e_sq) = match mask {
                Some(m) => {
                    let masked = m.apply(&eps_full);
                    let e_sq = eps_full.add_scaled(&masked, -1.0).norm_sq();
                    (masked, e_sq)
                }
                None => (eps_full, 0.0),
            };
            let half = w.add_scaled(&eps, 1.0);
            let inner = grad.dot(&obj.grad(&half, &batch)?);
            // Move the per-draw e_t correction to the sample side so the
            // margin is a plain mean of i.i.d. terms.
            margins.push(inner - (base_rhs - l * l * e_sq));
        }
        let (mean, stderr) = mean_and_stderr(&margins);
        report.record(mean, Some(stderr));
    }
    Ok(report)
}

/// Mask configuration for theory runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TheoryMask {
    AllOnes,
    AllZeros,
    FixedRandom {
        sparsity: f64,
    },
    /// Drop/grow every step on the latest first-step gradient, with the
    /// cosine-decayed drop count over the step horizon.
    Dynamic {
        sparsity: f64,
        alpha: f64,
        criterion: DropCriterion,
    },
}

impl TheoryMask {
    fn build(&self, dim: usize, rng: &mut ChaCha8Rng) -> Result<SparseMask> {
        match *self {
            TheoryMask::AllOnes => Ok(SparseMask::all_ones(dim)),
            TheoryMask::AllZeros => Ok(SparseMask::all_zeros(dim)),
            TheoryMask::FixedRandom { sparsity } | TheoryMask::Dynamic { sparsity, .. } => {
                random_mask(dim, sparsity, rng)
            }
        }
    }
}

/// One-step descent inequality from random states, Monte-Carlo over noise:
///
/// `E f(w') <= f(w) - eta/2 |grad f(w)|^2 + L eta^2 sigma^2
///            + c eta L^2 rho^2 + (1 - L eta) eta L G rho  [+ e_t term]`
///
/// with `c = 1` for the dense update and `c = 2` plus
/// `(1 + L eta) eta L^2 ||e_t||^2` for the masked one.
#[allow(clippy::too_many_arguments)]
pub fn verify_descent<O: Objective + ?Sized>(
    obj: &O,
    constants: &AssumptionConstants,
    eta: f64,
    rho: f64,
    kind: OptimizerKind,
    n_states: usize,
    mc_reps: usize,
    seed_value: u64,
    mask: Option<TheoryMask>,
) -> Result<BoundReport> {
    let l = constants.smoothness;
    if eta > 1.0 / l {
        return Err(Error::InvalidArgument(format!(
            "descent precondition needs eta <= 1/L = {}, got {eta}",
            1.0 / l
        )));
    }
    let g_bound = constants.grad_bound;
    let sigma = constants.noise_std;
    let rho_coeff = match kind {
        OptimizerKind::Ssam => 2.0,
        _ => 1.0,
    };
    let mut echo = BTreeMap::new();
    echo.insert("smoothness".into(), l);
    echo.insert("grad_bound".into(), g_bound);
    echo.insert("noise_std".into(), sigma);
    echo.insert("eta".into(), eta);
    echo.insert("rho".into(), rho);
    echo.insert("rho_sq_coeff".into(), rho_coeff);
    echo.insert("mc_reps".into(), mc_reps as f64);
    let mut report = BoundReport::new(&format!("one-step descent ({kind})"), echo);

    let cfg = OptimizerConfig {
        kind,
        eta0: eta,
        rho0: rho,
        schedule: ScheduleRule::Constant,
        momentum: 0.0,
        weight_decay: 0.0,
    };
    let d = obj.dim();
    let noiseless = Batch::noiseless(d);
    let mut rng = seed::stream_rng(seed_value, 103);

    for _ in 0..n_states {
        let (w, grad) = sample_ball_point(obj, constants.ball_radius, &mut rng)?;
        let f_w = obj.eval_loss(&w, &noiseless)?;
        let base_rhs = f_w - 0.5 * eta * grad.norm_sq()
            + l * eta * eta * sigma * sigma
            + rho_coeff * eta * l * l * rho * rho
            + (1.0 - l * eta) * eta * l * g_bound * rho;
        let mask_instance = match (kind, mask) {
            (OptimizerKind::Ssam, Some(spec)) => spec.build(d, &mut rng)?,
            (OptimizerKind::Ssam, None) => SparseMask::all_ones(d),
            _ => SparseMask::all_ones(d),
        };
        let mut margins = Vec::with_capacity(mc_reps);
        for _ in 0..mc_reps {
            let mut state = OptimizerState::new(w.clone(), mask_instance.clone(), seed_value)?;
            let batch = Batch::noise(&mut rng, d);
            let info = optim::step(&mut state, obj, &batch, &cfg)?;
            let f_next = obj.eval_loss(&state.w, &noiseless)?;
            let e_term = if kind == OptimizerKind::Ssam {
                (1.0 + l * eta) * eta * l * l * info.masked_out_norm_sq
            } else {
                0.0
            };
            margins.push(base_rhs + e_term - f_next);
        }
        let (mean, stderr) = mean_and_stderr(&margins);
        report.record(mean, Some(stderr));
    }
    Ok(report)
}

/// Averaged per-step record of repeated runs under 1/sqrt(t) schedules.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTrace {
    /// Mean true `||grad f(w_t)||^2` at the pre-step iterate, t = 1..=T.
    pub grad_sq: Vec<f64>,
    /// Mean true loss at the iterate after `p` steps, p = 0..=T
    /// (`loss[0]` is the shared start).
    pub loss: Vec<f64>,
    /// Schedule values actually used at each step.
    pub eta: Vec<f64>,
    pub rho: Vec<f64>,
    /// Mean `||e_t||^2` per step (zero for dense runs).
    pub e_sq: Vec<f64>,
    pub repeats: usize,
    pub eta0: f64,
    pub rho0: f64,
    pub kind: OptimizerKind,
}

impl ConvergenceTrace {
    pub fn steps(&self) -> usize {
        self.grad_sq.len()
    }

    /// `(1/T') sum_{t<=T'} E||grad f(w_t)||^2` for a prefix.
    pub fn averaged_grad_sq(&self, prefix: usize) -> f64 {
        self.grad_sq[..prefix].iter().sum::<f64>() / prefix as f64
    }
}

/// Run the iteration for `steps` steps, `repeats` times with independent
/// noise, from a common seeded start inside the ball.
///
/// Preconditions from the analysis are enforced: `eta0 <= 1/L`,
/// `rho0 <= G eta0` for the dense update and `rho0 <= G eta0 / 2` for the
/// masked one. A trajectory leaving the ball aborts with a domain
/// violation, since G is no longer a valid gradient bound there.
#[allow(clippy::too_many_arguments)]
pub fn run_convergence<O: Objective + ?Sized>(
    obj: &O,
    constants: &AssumptionConstants,
    kind: OptimizerKind,
    eta0: f64,
    rho0: f64,
    steps: usize,
    repeats: usize,
    seed_value: u64,
    mask: Option<TheoryMask>,
) -> Result<ConvergenceTrace> {
    let l = constants.smoothness;
    if eta0 > 1.0 / l {
        return Err(Error::InvalidArgument(format!(
            "need eta0 <= 1/L = {}, got {eta0}",
            1.0 / l
        )));
    }
    let rho_cap = match kind {
        OptimizerKind::Ssam => constants.grad_bound * eta0 / 2.0,
        _ => constants.grad_bound * eta0,
    };
    if rho0 > rho_cap {
        return Err(Error::InvalidArgument(format!(
            "need rho0 <= {rho_cap} for {kind}, got {rho0}"
        )));
    }
    if steps == 0 || repeats == 0 {
        return Err(Error::InvalidArgument(
            "need steps >= 1 and repeats >= 1".into(),
        ));
    }

    let cfg = OptimizerConfig {
        kind,
        eta0,
        rho0,
        schedule: ScheduleRule::InverseSqrt,
        momentum: 0.0,
        weight_decay: 0.0,
    };
    let d = obj.dim();
    let noiseless = Batch::noiseless(d);
    let w_start = obj.init_weights(seed_value);

    let mut grad_sq = vec![0.0; steps];
    let mut loss = vec![0.0; steps + 1];
    let mut e_sq = vec![0.0; steps];
    let mut eta = vec![0.0; steps];
    let mut rho = vec![0.0; steps];

    for rep in 0..repeats {
        let mut rng = seed::stream_rng(seed_value, 200 + rep as u64);
        let initial_mask = match (kind, mask) {
            (OptimizerKind::Ssam, Some(spec)) => spec.build(d, &mut rng)?,
            _ => SparseMask::all_ones(d),
        };
        let mut state = OptimizerState::new(w_start.clone(), initial_mask, seed_value)?;
        for t in 0..steps {
            let g_true = obj.true_grad(&state.w)?;
            grad_sq[t] += g_true.norm_sq();
            loss[t] += obj.eval_loss(&state.w, &noiseless)?;

            let batch = Batch::noise(&mut rng, d);
            let info = optim::step(&mut state, obj, &batch, &cfg)?;
            e_sq[t] += info.masked_out_norm_sq;
            if rep == 0 {
                eta[t] = info.eta_t;
                rho[t] = info.rho_t;
            }

            let norm = state.w.norm();
            if norm > constants.ball_radius {
                return Err(Error::DomainViolation(format!(
                    "iterate left the working ball at step {} (||w|| = {norm:.3} > {}); \
                     the gradient bound no longer applies",
                    t + 1,
                    constants.ball_radius
                )));
            }

            if let (
                OptimizerKind::Ssam,
                Some(TheoryMask::Dynamic {
                    alpha, criterion, ..
                }),
            ) = (kind, mask)
            {
                let (updated, _) = drop_grow_update(
                    &state.mask,
                    &info.first_grad,
                    (t + 1) as u64,
                    steps as u64,
                    alpha,
                    criterion,
                    &mut rng,
                )?;
                state.mask = updated;
            }
        }
        loss[steps] += obj.eval_loss(&state.w, &noiseless)?;
    }

    let n = repeats as f64;
    for v in grad_sq
        .iter_mut()
        .chain(loss.iter_mut())
        .chain(e_sq.iter_mut())
    {
        *v /= n;
    }
    Ok(ConvergenceTrace {
        grad_sq,
        loss,
        eta,
        rho,
        e_sq,
        repeats,
        eta0,
        rho0,
        kind,
    })
}

/// Which averaged-gradient bound to instantiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateBound {
    /// Dense two-step update: `C1/sqrt(T) + C2 log(T)/sqrt(T)`.
    Dense,
    /// Masked update: `C3/sqrt(T) + C4 log(T)/sqrt(T)`, where C3 adds the
    /// accumulated `e_t` allowance `2 L^2 rho0^2 (1 + eta0 L) pi^2/6`.
    Masked,
}

/// `C2 = 2 (L sigma^2 eta0 + L G rho0)` for the dense bound.
pub fn dense_log_constant(constants: &AssumptionConstants, eta0: f64, rho0: f64) -> f64 {
    2.0 * (constants.smoothness * constants.noise_std * constants.noise_std * eta0
        + constants.smoothness * constants.grad_bound * rho0)
}

/// `C4` for the masked bound; the derivation lands on the same expression
/// as the dense `C2`, which the identity test pins.
pub fn masked_log_constant(constants: &AssumptionConstants, eta0: f64, rho0: f64) -> f64 {
    let l = constants.smoothness;
    let sigma = constants.noise_std;
    2.0 * (l * sigma * sigma * eta0 + l * constants.grad_bound * rho0)
}

/// Check the averaged-gradient bound at every prefix `T >= 2` of a trace.
///
/// The `f` gap in `C1`/`C3` uses the iterate reached after the prefix's
/// last step, matching the telescoped per-step inequality; the `log` is
/// natural.
pub fn check_bound(
    trace: &ConvergenceTrace,
    constants: &AssumptionConstants,
    which: RateBound,
) -> Result<BoundReport> {
    let t_max = trace.steps();
    if t_max < 2 {
        return Err(Error::InvalidArgument(
            "trace needs at least 2 steps".into(),
        ));
    }
    for (t, &eta_t) in trace.eta.iter().enumerate() {
        let expect = trace.eta0 / ((t + 1) as f64).sqrt();
        if (eta_t - expect).abs() > 1e-12 * (1.0 + expect) {
            return Err(Error::Config(
                "trace was not produced under the 1/sqrt(t) schedule".into(),
            ));
        }
    }
    let l = constants.smoothness;
    let eta0 = trace.eta0;
    let rho0 = trace.rho0;
    let log_constant = match which {
        RateBound::Dense => dense_log_constant(constants, eta0, rho0),
        RateBound::Masked => masked_log_constant(constants, eta0, rho0),
    };
    // The masked bound's leading constant carries an extra
    // `eta0 L^2 rho0^2 (1 + eta0 L) pi^2/6` inside the `2/eta0 * (...)`
    // bracket, covering the summed e_t terms.
    let mask_allowance = match which {
        RateBound::Dense => 0.0,
        RateBound::Masked => {
            eta0 * l * l * rho0 * rho0 * (1.0 + eta0 * l) * std::f64::consts::PI.powi(2) / 6.0
        }
    };

    let mut echo = BTreeMap::new();
    echo.insert("smoothness".into(), l);
    echo.insert("grad_bound".into(), constants.grad_bound);
    echo.insert("noise_std".into(), constants.noise_std);
    echo.insert("eta0".into(), eta0);
    echo.insert("rho0".into(), rho0);
    echo.insert("log_constant".into(), log_constant);
    echo.insert("mask_allowance".into(), mask_allowance);
    let name = match which {
        RateBound::Dense => "averaged-gradient rate bound (dense)",
        RateBound::Masked => "averaged-gradient rate bound (masked)",
    };
    let mut report = BoundReport::new(name, echo);

    for prefix in 2..=t_max {
        let lhs = trace.averaged_grad_sq(prefix);
        let gap = trace.loss[0] - trace.loss[prefix];
        let c_lead = 2.0 / eta0 * (gap + mask_allowance);
        let sqrt_t = (prefix as f64).sqrt();
        let rhs = c_lead / sqrt_t + log_constant * (prefix as f64).ln() / sqrt_t;
        report.record(rhs - lhs, None);
    }
    Ok(report)
}
