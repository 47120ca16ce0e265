//! Hessian-vector products via central finite differences of the gradient.

use crate::data::Batch;
use crate::error::{Error, Result};
use crate::objective::{Objective, StochasticObjective};
use crate::param::ParamVector;

/// Matrix-free Hessian access at a fixed reference point.
///
/// Synthetic objectives differentiate the noiseless gradient; classifiers
/// differentiate the minibatch gradient on one fixed batch, which makes the
/// spectrum a well-defined property of `(weights, batch)`.
pub struct HvpOracle<'a> {
    objective: &'a StochasticObjective,
    center: ParamVector,
    probe_batch: Option<Batch>,
    step: f64,
}

impl<'a> HvpOracle<'a> {
    /// Oracle over the true gradient (synthetic families).
    pub fn new(objective: &'a StochasticObjective, center: ParamVector) -> Result<Self> {
        if objective.is_classifier() {
            return Err(Error::Unsupported(
                "classifier objectives need a probe batch; use with_batch".into(),
            ));
        }
        Ok(Self::build(objective, center, None))
    }

    /// Oracle over the minibatch gradient on a fixed batch.
    pub fn with_batch(
        objective: &'a StochasticObjective,
        center: ParamVector,
        batch: Batch,
    ) -> Result<Self> {
        if batch.n_features() != expected_features(objective) {
            return Err(Error::Config(format!(
                "probe batch has {} features, objective expects {}",
                batch.n_features(),
                expected_features(objective)
            )));
        }
        Ok(Self::build(objective, center, Some(batch)))
    }

    fn build(
        objective: &'a StochasticObjective,
        center: ParamVector,
        probe_batch: Option<Batch>,
    ) -> Self {
        // cbrt(machine epsilon) balances truncation against roundoff for a
        // first derivative of the gradient.
        let step = f64::EPSILON.cbrt() * (1.0 + center.norm());
        HvpOracle {
            objective,
            center,
            probe_batch,
            step,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &ParamVector {
        &self.center
    }

    fn grad_at(&self, w: &ParamVector) -> Result<ParamVector> {
        match &self.probe_batch {
            Some(batch) => self.objective.grad(w, batch),
            None => self.objective.true_grad(w),
        }
    }

    /// `H v` by the symmetric difference
    /// `(grad(w + h v̂) - grad(w - h v̂)) * ||v|| / (2 h)`.
    pub fn hvp(&self, v: &ParamVector) -> Result<ParamVector> {
        if v.len() != self.dim() {
            return Err(Error::Config(format!(
                "direction length {} does not match dimension {}",
                v.len(),
                self.dim()
            )));
        }
        let norm = v.norm();
        if norm == 0.0 {
            return Err(Error::InvalidArgument(
                "hessian-vector product of the zero direction".into(),
            ));
        }
        let unit = v.scaled(1.0 / norm);
        let plus = self.grad_at(&self.center.add_scaled(&unit, self.step))?;
        let minus = self.grad_at(&self.center.add_scaled(&unit, -self.step))?;
        let mut out = plus.add_scaled(&minus, -1.0);
        out.scale_in_place(norm / (2.0 * self.step));
        out.check_finite("hessian-vector product")?;
        Ok(out)
    }
}

fn expected_features(objective: &StochasticObjective) -> usize {
    match objective {
        StochasticObjective::MlpClassifier(mlp) => mlp.n_inputs(),
        other => other.dim(),
    }
}
