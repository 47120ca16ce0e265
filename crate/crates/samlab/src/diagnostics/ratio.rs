//! Per-coordinate relative gradient-difference ratios.
//!
//! For gradients `a` (two-step) and `b` (plain), each coordinate scores
//! `r_i = log10 |(a_i - b_i) / b_i|`. Coordinates where the denominator is
//! numerically zero are excluded and counted. Ratios clamp to [-40, 40] so
//! exact agreement (log of zero) stays plottable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param::ParamVector;

pub const RATIO_CLAMP: f64 = 40.0;
pub const RATIO_BINS: usize = 80;
const DENOM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioHistogram {
    /// `RATIO_BINS + 1` edges spanning [-RATIO_CLAMP, RATIO_CLAMP].
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Fraction of included coordinates with `r < 0`.
    pub fraction_below_zero: f64,
    /// Coordinates skipped for a zero denominator.
    pub excluded_count: usize,
}

impl RatioHistogram {
    pub fn included_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// CSV rows `bin_lo,bin_hi,count` with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.bin_edges[i],
                self.bin_edges[i + 1],
                c
            ));
        }
        out
    }
}

pub fn grad_diff_ratio(g_two_step: &ParamVector, g_plain: &ParamVector) -> Result<RatioHistogram> {
    if g_two_step.len() != g_plain.len() {
        return Err(Error::Config(format!(
            "gradient lengths differ: {} vs {}",
            g_two_step.len(),
            g_plain.len()
        )));
    }
    let width = 2.0 * RATIO_CLAMP / RATIO_BINS as f64;
    let bin_edges: Vec<f64> = (0..=RATIO_BINS)
        .map(|i| -RATIO_CLAMP + i as f64 * width)
        .collect();
    let mut counts = vec![0u64; RATIO_BINS];
    let mut excluded = 0usize;
    let mut below_zero = 0u64;

    for (a, b) in g_two_step.values().iter().zip(g_plain.values()) {
        if b.abs() < DENOM_FLOOR {
            excluded += 1;
            continue;
        }
        let raw = ((a - b) / b).abs().log10();
        let r = raw.clamp(-RATIO_CLAMP, RATIO_CLAMP);
        if r < 0.0 {
            below_zero += 1;
        }
        let mut bin = ((r + RATIO_CLAMP) / width) as usize;
        if bin >= RATIO_BINS {
            bin = RATIO_BINS - 1;
        }
        counts[bin] += 1;
    }

    let included: u64 = counts.iter().sum();
    let fraction_below_zero = if included > 0 {
        below_zero as f64 / included as f64
    } else {
        0.0
    };
    Ok(RatioHistogram {
        bin_edges,
        counts,
        fraction_below_zero,
        excluded_count: excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wvec(values: &[f64]) -> ParamVector {
        ParamVector::from_values(values.to_vec())
    }

    #[test]
    fn identical_gradients_clamp_to_minus_forty() {
        let g = wvec(&[1.0, -2.0, 0.5]);
        let hist = grad_diff_ratio(&g, &g).unwrap();
        assert_eq!(hist.excluded_count, 0);
        assert_eq!(hist.fraction_below_zero, 1.0);
        // log10(0) clamps to the leftmost bin.
        assert_eq!(hist.counts[0], 3);
    }

    #[test]
    fn doubled_gradient_gives_ratio_zero() {
        let b = wvec(&[1.0, -2.0, 0.5]);
        let a = b.scaled(2.0);
        let hist = grad_diff_ratio(&a, &b).unwrap();
        // |(2b - b)/b| = 1, log10 = 0: not below zero.
        assert_eq!(hist.fraction_below_zero, 0.0);
        let mid = RATIO_BINS / 2;
        assert_eq!(hist.counts[mid], 3);
    }

    #[test]
    fn formula_spot_check() {
        let b = wvec(&[1.0, 1.0]);
        let a = wvec(&[1.1, 10.0]);
        let hist = grad_diff_ratio(&a, &b).unwrap();
        // r = (-1, log10(9) ~ 0.954): one coordinate below zero.
        assert!((hist.fraction_below_zero - 0.5).abs() < 1e-12);
        let width = 2.0 * RATIO_CLAMP / RATIO_BINS as f64;
        let bin_minus_one = ((-1.0 + RATIO_CLAMP) / width) as usize;
        assert_eq!(hist.counts[bin_minus_one], 1);
    }

    #[test]
    fn zero_denominators_are_excluded_and_counted() {
        let b = wvec(&[0.0, 1.0, 1e-13]);
        let a = wvec(&[5.0, 2.0, 1.0]);
        let hist = grad_diff_ratio(&a, &b).unwrap();
        assert_eq!(hist.excluded_count, 2);
        assert_eq!(hist.included_count(), 1);
    }

    #[test]
    fn length_mismatch_is_config_error() {
        let err = grad_diff_ratio(&wvec(&[1.0]), &wvec(&[1.0, 2.0])).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn invariant_under_power_of_two_scaling() {
        let b = wvec(&[0.7, -1.3, 2.9, 0.04]);
        let a = wvec(&[0.9, -1.0, 3.0, 0.2]);
        let base = grad_diff_ratio(&a, &b).unwrap();
        for k in [-3i32, 1, 5] {
            let c = (2.0f64).powi(k);
            let scaled = grad_diff_ratio(&a.scaled(c), &b.scaled(c)).unwrap();
            assert_eq!(base, scaled, "scale 2^{k}");
        }
    }
}
