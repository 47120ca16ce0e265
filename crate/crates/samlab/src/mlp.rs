//! A small tanh MLP classifier with hand-derived gradients.
//!
//! input -> hidden (tanh) -> softmax cross-entropy. No autodiff: the
//! backward pass is written out so every gradient is auditable against
//! finite differences. Weights live in a flat [`ParamVector`] with groups
//! `w1`, `b1`, `w2`, `b2`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Batch;
use crate::error::{Error, Result};
use crate::objective::{KnownConstants, Objective};
use crate::param::{ParamVector, Partition};

const MAX_PARAMS: usize = 10_000;

#[derive(Debug, Clone)]
pub struct MlpClassifier {
    n_inputs: usize,
    n_hidden: usize,
    n_classes: usize,
    partition: Partition,
}

impl MlpClassifier {
    pub fn new(n_inputs: usize, n_hidden: usize, n_classes: usize) -> Result<Self> {
        if n_inputs == 0 || n_hidden == 0 || n_classes < 2 {
            return Err(Error::Config(
                "mlp needs n_inputs >= 1, n_hidden >= 1, n_classes >= 2".into(),
            ));
        }
        let n_params = n_hidden * n_inputs + n_hidden + n_classes * n_hidden + n_classes;
        if n_params > MAX_PARAMS {
            return Err(Error::Config(format!(
                "mlp has {n_params} parameters, limit is {MAX_PARAMS}"
            )));
        }
        let partition = Partition::from_group_lens(&[
            ("w1", n_hidden * n_inputs),
            ("b1", n_hidden),
            ("w2", n_classes * n_hidden),
            ("b2", n_classes),
        ])?;
        Ok(MlpClassifier {
            n_inputs,
            n_hidden,
            n_classes,
            partition,
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_params(&self) -> usize {
        self.partition.total_len()
    }

    fn offsets(&self) -> (usize, usize, usize, usize) {
        let w1 = 0;
        let b1 = w1 + self.n_hidden * self.n_inputs;
        let w2 = b1 + self.n_hidden;
        let b2 = w2 + self.n_classes * self.n_hidden;
        (w1, b1, w2, b2)
    }

    /// Hidden activations, class probabilities and per-class `-log p` for
    /// one input.
    fn forward(&self, w: &[f64], x: &[f64]) -> ForwardPass {
        let (o_w1, o_b1, o_w2, o_b2) = self.offsets();
        let mut hidden = vec![0.0; self.n_hidden];
        for j in 0..self.n_hidden {
            let row = &w[o_w1 + j * self.n_inputs..o_w1 + (j + 1) * self.n_inputs];
            let mut z = w[o_b1 + j];
            for (wi, xi) in row.iter().zip(x) {
                z += wi * xi;
            }
            hidden[j] = z.tanh();
        }
        let mut logits = vec![0.0; self.n_classes];
        for c in 0..self.n_classes {
            let row = &w[o_w2 + c * self.n_hidden..o_w2 + (c + 1) * self.n_hidden];
            let mut z = w[o_b2 + c];
            for (wi, hj) in row.iter().zip(&hidden) {
                z += wi * hj;
            }
            logits[c] = z;
        }
        // Stable softmax: shift by the max logit.
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        let log_norm = total.ln() + max;
        ForwardPass {
            hidden,
            probs,
            logits,
            log_norm,
        }
    }

    /// Per-example cross-entropy gradient accumulated into `acc`.
    fn accumulate_ce_grad(&self, w: &[f64], x: &[f64], y: usize, scale: f64, acc: &mut [f64]) {
        let (o_w1, o_b1, o_w2, o_b2) = self.offsets();
        let ForwardPass { hidden, probs, .. } = self.forward(w, x);

        // Output layer: d loss / d logits = probs - onehot(y).
        let mut dlogits = probs;
        dlogits[y] -= 1.0;

        let mut dhidden = vec![0.0; self.n_hidden];
        for c in 0..self.n_classes {
            let d = dlogits[c] * scale;
            acc[o_b2 + c] += d;
            let row = o_w2 + c * self.n_hidden;
            for j in 0..self.n_hidden {
                acc[row + j] += d * hidden[j];
                dhidden[j] += dlogits[c] * w[row + j];
            }
        }
        // tanh'(z) = 1 - tanh(z)^2.
        for j in 0..self.n_hidden {
            let d = dhidden[j] * (1.0 - hidden[j] * hidden[j]) * scale;
            acc[o_b1 + j] += d;
            let row = o_w1 + j * self.n_inputs;
            for (i, xi) in x.iter().enumerate() {
                acc[row + i] += d * xi;
            }
        }
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.n_features() != self.n_inputs {
            return Err(Error::Config(format!(
                "batch has {} features, mlp expects {}",
                batch.n_features(),
                self.n_inputs
            )));
        }
        if batch.n_classes() > self.n_classes {
            return Err(Error::Config(format!(
                "batch labels span {} classes, mlp has {}",
                batch.n_classes(),
                self.n_classes
            )));
        }
        Ok(())
    }

    /// Fraction of rows whose argmax logit matches the label.
    pub fn accuracy(&self, w: &ParamVector, batch: &Batch) -> Result<f64> {
        self.check_batch(batch)?;
        let mut hits = 0usize;
        for i in 0..batch.n_samples() {
            let pass = self.forward(w.values(), batch.input_row(i));
            let pred = pass
                .logits
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(c, _)| c)
                .unwrap();
            if pred == batch.target(i) {
                hits += 1;
            }
        }
        Ok(hits as f64 / batch.n_samples() as f64)
    }
}

struct ForwardPass {
    hidden: Vec<f64>,
    probs: Vec<f64>,
    logits: Vec<f64>,
    log_norm: f64,
}

impl Objective for MlpClassifier {
    fn dim(&self) -> usize {
        self.n_params()
    }

    fn partition(&self) -> &Partition {
        &self.partition
    }

    fn eval_loss(&self, w: &ParamVector, batch: &Batch) -> Result<f64> {
        self.check_batch(batch)?;
        let mut total = 0.0;
        for i in 0..batch.n_samples() {
            let pass = self.forward(w.values(), batch.input_row(i));
            // -log p(y|x) = log_norm - logit_y; stays finite even when the
            // softmax saturates.
            total += pass.log_norm - pass.logits[batch.target(i)];
        }
        let loss = total / batch.n_samples() as f64;
        if !loss.is_finite() {
            w.check_finite("mlp loss")?;
            return Err(Error::Numerical(format!(
                "non-finite loss {loss} from mlp-classifier"
            )));
        }
        Ok(loss)
    }

    fn grad(&self, w: &ParamVector, batch: &Batch) -> Result<ParamVector> {
        self.check_batch(batch)?;
        let scale = 1.0 / batch.n_samples() as f64;
        let mut acc = vec![0.0; self.n_params()];
        for i in 0..batch.n_samples() {
            self.accumulate_ce_grad(
                w.values(),
                batch.input_row(i),
                batch.target(i),
                scale,
                &mut acc,
            );
        }
        let g = ParamVector::new(acc, self.partition.clone())?;
        g.check_finite("mlp gradient")?;
        Ok(g)
    }

    fn true_grad(&self, _w: &ParamVector) -> Result<ParamVector> {
        Err(Error::Unsupported(
            "population gradient unavailable for mlp-classifier".into(),
        ))
    }

    fn log_prob_grad(&self, w: &ParamVector, input: &[f64], label: usize) -> Result<ParamVector> {
        if input.len() != self.n_inputs {
            return Err(Error::Config(format!(
                "input has {} features, mlp expects {}",
                input.len(),
                self.n_inputs
            )));
        }
        if label >= self.n_classes {
            return Err(Error::Config(format!(
                "label {label} out of range for {} classes",
                self.n_classes
            )));
        }
        // grad log p(y|x) = -(cross-entropy gradient) for the same example.
        let mut acc = vec![0.0; self.n_params()];
        self.accumulate_ce_grad(w.values(), input, label, -1.0, &mut acc);
        ParamVector::new(acc, self.partition.clone())
    }

    fn known_constants(&self) -> Option<KnownConstants> {
        None
    }

    fn is_classifier(&self) -> bool {
        true
    }

    fn init_weights(&self, seed: u64) -> ParamVector {
        let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::child_seed(
            seed,
            crate::seed::tags::WEIGHT_INIT,
        ));
        let bound1 = 1.0 / (self.n_inputs as f64).sqrt();
        let bound2 = 1.0 / (self.n_hidden as f64).sqrt();
        let (_, _, o_w2, _) = self.offsets();
        let values: Vec<f64> = (0..self.n_params())
            .map(|i| {
                let bound = if i < o_w2 { bound1 } else { bound2 };
                rng.random_range(-bound..bound)
            })
            .collect();
        ParamVector::new(values, self.partition.clone()).expect("init length matches partition")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_uniform_cross_entropy() {
        let mlp = MlpClassifier::new(4, 3, 2).unwrap();
        let w = ParamVector::zeros(mlp.partition().clone());
        let batch = Batch::new(vec![0.5, -0.5, 1.0, 2.0], 4, vec![1], 2).unwrap();
        let loss = mlp.eval_loss(&w, &batch).unwrap();
        assert!((loss - (2.0f64).ln()).abs() < 1e-12, "loss {loss}");
    }

    #[test]
    fn output_bias_gradient_is_softmax_minus_onehot() {
        let mlp = MlpClassifier::new(2, 3, 2).unwrap();
        let w = ParamVector::zeros(mlp.partition().clone());
        // Balanced two-sample batch, zero weights: probs are (0.5, 0.5).
        let batch = Batch::new(vec![1.0, 0.0, 0.0, 1.0], 2, vec![0, 1], 2).unwrap();
        let g = mlp.grad(&w, &batch).unwrap();
        let b2 = g.group("b2").unwrap();
        // Mean of (0.5-1, 0.5) and (0.5, 0.5-1) = (0, 0).
        assert!(b2.iter().all(|v| v.abs() < 1e-12));
        for v in g.values() {
            assert!(v.abs() < 1.0);
        }
    }

    #[test]
    fn grad_matches_finite_difference() {
        let mlp = MlpClassifier::new(3, 4, 3).unwrap();
        let w = mlp.init_weights(11);
        let batch = Batch::new(vec![0.2, -1.0, 0.5, 1.5, 0.3, -0.7], 3, vec![2, 0], 3).unwrap();
        let g = mlp.grad(&w, &batch).unwrap();
        let h = 1e-6;
        for i in (0..mlp.n_params()).step_by(5) {
            let mut wp = w.clone();
            wp.values_mut()[i] += h;
            let mut wm = w.clone();
            wm.values_mut()[i] -= h;
            let fd = (mlp.eval_loss(&wp, &batch).unwrap() - mlp.eval_loss(&wm, &batch).unwrap())
                / (2.0 * h);
            assert!(
                (fd - g.values()[i]).abs() < 1e-6 * (1.0 + fd.abs()),
                "coord {i}: fd {fd} vs grad {}",
                g.values()[i]
            );
        }
    }

    #[test]
    fn log_prob_grad_is_negated_ce_grad() {
        use rand::Rng;
        let mlp = MlpClassifier::new(3, 4, 2).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for case in 0..5 {
            let w = mlp.init_weights(rng.random());
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y = rng.random_range(0..2);
            let batch = Batch::new(x.clone(), 3, vec![y], 2).unwrap();
            let ce = mlp.grad(&w, &batch).unwrap();
            let lp = mlp.log_prob_grad(&w, &x, y).unwrap();
            for (a, b) in ce.values().iter().zip(lp.values()) {
                assert!((a + b).abs() < 1e-10, "case {case}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_weight_logistic_log_prob_grad_is_half() {
        // At zero weights the network is a symmetric two-class logistic:
        // p(y|x) = 1/2 and only the output biases carry gradient, with the
        // true-label component at exactly +1/2.
        let mlp = MlpClassifier::new(1, 1, 2).unwrap();
        let w = ParamVector::zeros(mlp.partition().clone());
        let g = mlp.log_prob_grad(&w, &[1.0], 1).unwrap();
        let b2 = g.group("b2").unwrap();
        assert_eq!(b2, &[-0.5, 0.5]);
        for v in g.group("w1").unwrap().iter().chain(g.group("b1").unwrap()) {
            assert_eq!(*v, 0.0);
        }
    }

    #[test]
    fn saturated_correct_prediction_has_tiny_log_prob_grad() {
        let mlp = MlpClassifier::new(1, 1, 2).unwrap();
        // Drive the correct logit far above the other one.
        let mut w = ParamVector::zeros(mlp.partition().clone());
        {
            let values = w.values_mut();
            values[0] = 5.0; // w1
            values[2] = 20.0; // w2 row for class 0
            values[3] = -20.0; // w2 row for class 1
        }
        let g = mlp.log_prob_grad(&w, &[3.0], 0).unwrap();
        assert!(g.norm() < 1e-6, "norm {}", g.norm());
    }

    #[test]
    fn init_weights_respect_fan_in_bound() {
        let mlp = MlpClassifier::new(16, 8, 4).unwrap();
        let w = mlp.init_weights(0);
        let b1 = 1.0 / 4.0;
        let b2 = 1.0 / (8.0f64).sqrt();
        for v in w.group("w1").unwrap() {
            assert!(v.abs() <= b1);
        }
        for v in w.group("w2").unwrap() {
            assert!(v.abs() <= b2);
        }
        // Seeded: same seed, same weights.
        assert_eq!(w, mlp.init_weights(0));
        assert_ne!(w, mlp.init_weights(1));
    }
}
