//! Relative training-cost model.
//!
//! Costs are expressed as multiples of one SGD step (one forward + one
//! backward). SAM pays the full pass twice. A sparse perturbation still
//! needs the full first forward+backward and the full second forward, but
//! the second backward only touches the perturbed fraction, hence
//! `1 + c_f + (1 - s) * c_b` with the forward fraction calibrated at 0.3.

use serde::{Deserialize, Serialize};

use crate::optim::OptimizerKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// Fraction of a step spent in the forward pass, in (0, 1).
    pub forward_fraction: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            forward_fraction: 0.3,
        }
    }
}

impl CostModel {
    pub fn backward_fraction(&self) -> f64 {
        1.0 - self.forward_fraction
    }
}

/// Relative cost of one optimizer step at perturbation sparsity `s`.
pub fn flops_estimate(model: &CostModel, kind: OptimizerKind, sparsity: f64) -> f64 {
    match kind {
        OptimizerKind::Sgd => 1.0,
        OptimizerKind::Sam => 2.0,
        OptimizerKind::Ssam => {
            1.0 + model.forward_fraction + (1.0 - sparsity) * model.backward_fraction()
        }
    }
}
