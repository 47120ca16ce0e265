//! Sparse perturbation masks.
//!
//! Generation strategies:
//! - top-k empirical-Fisher selection (the stable but costlier route),
//! - dynamic drop/grow updates with a cosine-decayed drop count,
//! - uniform random masks and the drop-criterion ablations.
//!
//! Cardinality is the load-bearing invariant: a mask of sparsity `s` over
//! `d` coordinates has exactly `round((1 - s) * d)` active bits, and every
//! operation here preserves that count exactly.

use std::io::{Read, Write};
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::param::ParamVector;

/// Binary coordinate mask with its target sparsity.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMask {
    bits: Vec<bool>,
    sparsity: f64,
}

/// Active-bit count for sparsity `s` over `d` coordinates.
///
/// `f64::round` ties away from zero, which pins the invariant across
/// platforms.
pub fn target_active(dim: usize, sparsity: f64) -> usize {
    ((1.0 - sparsity) * dim as f64).round() as usize
}

impl SparseMask {
    pub fn from_bits(bits: Vec<bool>, sparsity: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&sparsity) {
            return Err(Error::InvalidArgument(format!(
                "sparsity {sparsity} outside [0, 1)"
            )));
        }
        let want = target_active(bits.len(), sparsity);
        let have = bits.iter().filter(|&&b| b).count();
        if want != have {
            return Err(Error::InvalidArgument(format!(
                "mask has {have} active bits, sparsity {sparsity} over {} requires {want}",
                bits.len()
            )));
        }
        Ok(SparseMask { bits, sparsity })
    }

    /// Dense mask: every coordinate perturbed.
    pub fn all_ones(dim: usize) -> Self {
        SparseMask {
            bits: vec![true; dim],
            sparsity: 0.0,
        }
    }

    /// Degenerate mask with no active coordinates. The stored sparsity is
    /// the closest value below 1 whose rounded cardinality is zero.
    pub fn all_zeros(dim: usize) -> Self {
        SparseMask {
            bits: vec![false; dim],
            sparsity: 1.0 - 0.4 / dim as f64,
        }
    }

    pub fn dim(&self) -> usize {
        self.bits.len()
    }

    pub fn sparsity(&self) -> f64 {
        self.sparsity
    }

    pub fn active_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.bits[i]).collect()
    }

    pub fn inactive_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| !self.bits[i]).collect()
    }

    /// Zero out the masked coordinates of `v`; active ones pass through
    /// untouched (bitwise), so an all-ones mask is an exact identity.
    pub fn apply(&self, v: &ParamVector) -> ParamVector {
        assert_eq!(self.dim(), v.len(), "mask/vector length mismatch");
        let mut out = v.clone();
        for (value, &keep) in out.values_mut().iter_mut().zip(&self.bits) {
            if !keep {
                *value = 0.0;
            }
        }
        out
    }

    // ---- serialization ----------------------------------------------------

    const MAGIC: [u8; 4] = *b"SMK1";

    /// Compact binary form: magic, d (u64 LE), s (f64 LE), bit-packed
    /// payload (LSB-first within each byte).
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(20 + self.dim() / 8 + 1);
        bytes.extend_from_slice(&Self::MAGIC);
        bytes.extend_from_slice(&(self.dim() as u64).to_le_bytes());
        bytes.extend_from_slice(&self.sparsity.to_le_bytes());
        let mut packed = vec![0u8; self.dim().div_ceil(8)];
        for (i, &bit) in self.bits.iter().enumerate() {
            if bit {
                packed[i / 8] |= 1 << (i % 8);
            }
        }
        bytes.extend_from_slice(&packed);
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&bytes).map_err(|e| Error::io(path, e))
    }

    pub fn read_binary(path: &Path) -> Result<SparseMask> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .map_err(|e| Error::io(path, e))?
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io(path, e))?;
        if bytes.len() < 20 || bytes[..4] != Self::MAGIC {
            return Err(Error::format(path, "bad mask magic at byte offset 0"));
        }
        let dim = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
        let sparsity = f64::from_le_bytes(bytes[12..20].try_into().unwrap());
        let payload = &bytes[20..];
        if payload.len() != dim.div_ceil(8) {
            return Err(Error::format(
                path,
                format!(
                    "payload is {} bytes, expected {}",
                    payload.len(),
                    dim.div_ceil(8)
                ),
            ));
        }
        let bits = (0..dim)
            .map(|i| payload[i / 8] & (1 << (i % 8)) != 0)
            .collect();
        SparseMask::from_bits(bits, sparsity)
            .map_err(|e| Error::format(path, format!("inconsistent mask file: {e}")))
    }

    /// Debug-friendly JSON: dimension, sparsity and the active index list.
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let doc = MaskJson {
            dim: self.dim(),
            sparsity: self.sparsity,
            active: self.active_indices(),
        };
        let text = serde_json::to_string_pretty(&doc)
            .map_err(|e| Error::Config(format!("mask json encode: {e}")))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<SparseMask> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: MaskJson = serde_json::from_str(&text)
            .map_err(|e| Error::format(path, format!("mask json decode: {e}")))?;
        let mut bits = vec![false; doc.dim];
        for i in doc.active {
            if i >= doc.dim {
                return Err(Error::format(
                    path,
                    format!("active index {i} >= dim {}", doc.dim),
                ));
            }
            bits[i] = true;
        }
        SparseMask::from_bits(bits, doc.sparsity)
            .map_err(|e| Error::format(path, format!("inconsistent mask file: {e}")))
    }
}

#[derive(Serialize, Deserialize)]
struct MaskJson {
    dim: usize,
    sparsity: f64,
    active: Vec<usize>,
}

/// Indices of the `k` largest values; ties broken toward the lower index.
///
/// Selection runs through a bounded min-heap rather than a full sort. The
/// returned indices are in ascending order.
pub fn arg_topk(values: &[f64], k: usize) -> Result<Vec<usize>> {
    use std::cmp::Ordering;
    use std::collections::BinaryHeap;

    if k > values.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds vector length {}",
            values.len()
        )));
    }
    if k == 0 {
        return Ok(Vec::new());
    }

    // Heap entry ordered so the heap root is the current *worst* kept entry:
    // smallest value, with the higher index losing ties.
    #[derive(PartialEq)]
    struct Entry(f64, usize);
    impl Eq for Entry {}
    impl PartialOrd for Entry {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Entry {
        fn cmp(&self, other: &Self) -> Ordering {
            // Max-heap: greater() pops first. We want the weakest entry on
            // top, so reverse the keep-order (higher value, lower index).
            other
                .0
                .partial_cmp(&self.0)
                .unwrap_or(Ordering::Equal)
                .then(self.1.cmp(&other.1))
        }
    }

    let mut heap: BinaryHeap<Entry> = BinaryHeap::with_capacity(k + 1);
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite score {v} at index {i} in top-k selection"
            )));
        }
        heap.push(Entry(v, i));
        if heap.len() > k {
            heap.pop();
        }
    }
    let mut indices: Vec<usize> = heap.into_iter().map(|e| e.1).collect();
    indices.sort_unstable();
    Ok(indices)
}

/// Per-coordinate empirical Fisher values.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherEstimate {
    values: Vec<f64>,
    n_samples: usize,
}

impl FisherEstimate {
    /// Wrap precomputed per-coordinate values (must be finite and >= 0).
    pub fn from_values(values: Vec<f64>, n_samples: usize) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite() && *v >= 0.0));
        FisherEstimate { values, n_samples }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }
}

/// Mean over the batch of the squared per-example log-probability gradient.
pub fn empirical_fisher<O: Objective + ?Sized>(
    obj: &O,
    w: &ParamVector,
    samples: &crate::data::Batch,
) -> Result<FisherEstimate> {
    if !obj.is_classifier() {
        return Err(Error::Unsupported(
            "empirical Fisher needs a classifier objective".into(),
        ));
    }
    let n = samples.n_samples();
    let mut acc = vec![0.0; obj.dim()];
    for i in 0..n {
        let g = obj.log_prob_grad(w, samples.input_row(i), samples.target(i))?;
        for (a, gi) in acc.iter_mut().zip(g.values()) {
            *a += gi * gi;
        }
    }
    for a in &mut acc {
        *a /= n as f64;
    }
    Ok(FisherEstimate {
        values: acc,
        n_samples: n,
    })
}

/// Mask activating the top `round((1-s)*d)` Fisher coordinates.
pub fn fisher_mask(fisher: &FisherEstimate, sparsity: f64) -> Result<SparseMask> {
    if !(0.0..1.0).contains(&sparsity) {
        return Err(Error::InvalidArgument(format!(
            "sparsity {sparsity} outside [0, 1)"
        )));
    }
    let d = fisher.values.len();
    let k = target_active(d, sparsity);
    let top = arg_topk(&fisher.values, k)?;
    let mut bits = vec![false; d];
    for i in top {
        bits[i] = true;
    }
    SparseMask::from_bits(bits, sparsity)
}

/// Uniformly random mask with exact cardinality, deterministic given `rng`.
pub fn random_mask(dim: usize, sparsity: f64, rng: &mut ChaCha8Rng) -> Result<SparseMask> {
    if !(0.0..1.0).contains(&sparsity) {
        return Err(Error::InvalidArgument(format!(
            "sparsity {sparsity} outside [0, 1)"
        )));
    }
    let k = target_active(dim, sparsity);
    let picks = rand::seq::index::sample(rng, dim, k);
    let mut bits = vec![false; dim];
    for i in picks {
        bits[i] = true;
    }
    SparseMask::from_bits(bits, sparsity)
}

/// Cosine-decayed drop fraction: `(alpha/2) * (1 + cos(t * pi / total))`.
pub fn cosine_decay(t: u64, total: u64, alpha: f64) -> Result<f64> {
    if t > total {
        return Err(Error::InvalidArgument(format!(
            "decay step {t} past horizon {total}"
        )));
    }
    if total == 0 {
        return Err(Error::InvalidArgument("decay horizon must be >= 1".into()));
    }
    Ok(alpha / 2.0 * (1.0 + (t as f64 * std::f64::consts::PI / total as f64).cos()))
}

/// Which active coordinates a drop/grow update removes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropCriterion {
    /// Smallest |g| first: perturbing already-flat coordinates buys nothing.
    Flattest,
    /// Largest |g| first (ablation; expected to hurt).
    Sharpest,
    /// Uniformly at random (ablation).
    Random,
}

/// One dynamic-sparse-training update: drop `n_drop` active coordinates by
/// the criterion, grow the same number of previously inactive ones uniformly
/// at random. Cardinality is preserved exactly.
///
/// `n_drop = round(cosine_decay(t, total, alpha) * (1 - s) * d)`, clamped to
/// what the active and inactive sets can support; the flag in the result
/// reports whether clamping happened.
pub fn drop_grow_update(
    mask: &SparseMask,
    grad: &ParamVector,
    t: u64,
    total: u64,
    alpha: f64,
    criterion: DropCriterion,
    rng: &mut ChaCha8Rng,
) -> Result<(SparseMask, bool)> {
    if grad.len() != mask.dim() {
        return Err(Error::Config(format!(
            "gradient length {} does not match mask length {}",
            grad.len(),
            mask.dim()
        )));
    }
    let d = mask.dim();
    let decay = cosine_decay(t, total, alpha)?;
    let want_drop = (decay * (1.0 - mask.sparsity()) * d as f64).round() as usize;

    let active = mask.active_indices();
    let inactive = mask.inactive_indices();
    let n_drop = want_drop.min(active.len()).min(inactive.len());
    let clamped = n_drop < want_drop;
    if n_drop == 0 {
        return Ok((mask.clone(), clamped));
    }

    let dropped: Vec<usize> = match criterion {
        DropCriterion::Flattest | DropCriterion::Sharpest => {
            let mut scored: Vec<(f64, usize)> = active
                .iter()
                .map(|&i| (grad.values()[i].abs(), i))
                .collect();
            // Total order on (score, index): ties break toward the lower
            // index under either criterion, keeping updates deterministic.
            match criterion {
                DropCriterion::Flattest => scored.select_nth_unstable_by(n_drop - 1, |a, b| {
                    a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1))
                }),
                _ => scored.select_nth_unstable_by(n_drop - 1, |a, b| {
                    b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1))
                }),
            };
            scored[..n_drop].iter().map(|&(_, i)| i).collect()
        }
        DropCriterion::Random => rand::seq::index::sample(rng, active.len(), n_drop)
            .into_iter()
            .map(|j| active[j])
            .collect(),
    };

    // Growth pool is the set inactive *before* the drop: freshly dropped
    // coordinates do not immediately regrow.
    let grown: Vec<usize> = rand::seq::index::sample(rng, inactive.len(), n_drop)
        .into_iter()
        .map(|j| inactive[j])
        .collect();

    let mut bits = mask.bits.clone();
    for i in dropped {
        bits[i] = false;
    }
    for i in grown {
        bits[i] = true;
    }
    let updated = SparseMask::from_bits(bits, mask.sparsity())?;
    Ok((updated, clamped))
}

/// When and how masks regenerate during training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskKind {
    /// Top-k empirical Fisher over a fresh sample draw.
    Fisher,
    /// Drop/grow on the most recent first-step gradient.
    Dynamic,
    /// Fresh uniformly random mask.
    Random,
    /// Keep the initial mask for the whole run.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskPolicy {
    pub kind: MaskKind,
    /// Drop criterion (dynamic masks only).
    pub drop_criterion: DropCriterion,
    /// Drop ratio in [0, 1] (dynamic masks only).
    pub alpha: f64,
    /// Mask update interval in epochs, >= 1.
    pub update_every: u64,
    /// Fisher sample count, >= 1 (fisher masks only).
    pub fisher_samples: usize,
}

impl Default for MaskPolicy {
    fn default() -> Self {
        MaskPolicy {
            kind: MaskKind::Fixed,
            drop_criterion: DropCriterion::Flattest,
            alpha: 0.5,
            update_every: 1,
            fisher_samples: 128,
        }
    }
}

impl MaskPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config("alpha must be in [0, 1]".into()));
        }
        if self.update_every < 1 {
            return Err(Error::Config("update_every must be >= 1".into()));
        }
        if self.fisher_samples < 1 {
            return Err(Error::Config("fisher_samples must be >= 1".into()));
        }
        Ok(())
    }
}

/// Inputs a regeneration may need, borrowed from the training loop.
pub struct RegenContext<'a, O: Objective + ?Sized> {
    pub objective: &'a O,
    pub weights: &'a ParamVector,
    pub current_mask: &'a SparseMask,
    /// Most recent first-step gradient (dynamic masks).
    pub last_grad: Option<&'a ParamVector>,
    /// Pool the Fisher pass samples from (classifier runs).
    pub train_data: Option<&'a Dataset>,
    pub sparsity: f64,
    pub total_epochs: u64,
}

/// Regenerate the mask at an epoch boundary if the policy calls for it.
///
/// `epoch` counts completed epochs starting at 1. Returns the fresh mask, or
/// `None` when the policy is fixed or the interval has not elapsed.
pub fn maybe_regenerate<O: Objective + ?Sized>(
    epoch: u64,
    policy: &MaskPolicy,
    ctx: &RegenContext<'_, O>,
    rng: &mut ChaCha8Rng,
) -> Result<Option<SparseMask>> {
    if epoch == 0 {
        return Err(Error::InvalidArgument("epoch counter starts at 1".into()));
    }
    if policy.kind == MaskKind::Fixed || !epoch.is_multiple_of(policy.update_every) {
        return Ok(None);
    }
    let mask = match policy.kind {
        MaskKind::Fixed => unreachable!(),
        MaskKind::Random => random_mask(ctx.current_mask.dim(), ctx.sparsity, rng)?,
        MaskKind::Fisher => {
            let data = ctx
                .train_data
                .ok_or_else(|| Error::Unsupported("fisher mask needs a training dataset".into()))?;
            let n = policy.fisher_samples.min(data.len());
            let picks = rand::seq::index::sample(rng, data.len(), n).into_vec();
            let batch = data.batch(&picks);
            let fisher = empirical_fisher(ctx.objective, ctx.weights, &batch)?;
            fisher_mask(&fisher, ctx.sparsity)?
        }
        MaskKind::Dynamic => {
            let grad = ctx.last_grad.ok_or_else(|| {
                Error::InvalidArgument("dynamic mask update needs a gradient".into())
            })?;
            let (mask, _) = drop_grow_update(
                ctx.current_mask,
                grad,
                epoch,
                ctx.total_epochs,
                policy.alpha,
                policy.drop_criterion,
                rng,
            )?;
            mask
        }
    };
    Ok(Some(mask))
}
