//! Loss-geometry and efficiency diagnostics.

mod flops;
mod lanczos;
mod landscape;
mod ratio;

pub use flops::{flops_estimate, CostModel};
pub use lanczos::{lanczos_spectrum, DenseSymmetric, HessianOperator, SpectrumReport};
pub use landscape::{filter_normalize, landscape_slice, LandscapeGrid};
pub use ratio::{grad_diff_ratio, RatioHistogram};
