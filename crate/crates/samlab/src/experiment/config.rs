//! Experiment configuration: JSON on disk, validated on load.
//!
//! Unknown keys are rejected everywhere so a typo'd field fails loudly
//! instead of silently running defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mask::{DropCriterion, MaskKind, MaskPolicy};
use crate::mlp::MlpClassifier;
use crate::objective::{NoisyQuadratic, StochasticObjective, TrigNonconvex};
use crate::optim::{OptimizerConfig, OptimizerKind};

use super::ablation::AblationGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub objective: ObjectiveConfig,
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub mask: MaskSettings,
    pub epochs: u64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub ablation: Option<AblationGrid>,
    #[serde(default)]
    pub spectrum: SpectrumSettings,
    #[serde(default)]
    pub landscape: LandscapeSettings,
    #[serde(default)]
    pub ratio: RatioSettings,
    #[serde(default)]
    pub theory: TheorySettings,
}

fn default_batch_size() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ObjectiveConfig {
    NoisyQuadratic {
        #[serde(default = "default_dimension")]
        dimension: usize,
        /// Diagonal curvatures; identity when omitted.
        #[serde(default)]
        curvature: Option<Vec<f64>>,
        #[serde(default)]
        noise_std: f64,
        #[serde(default = "default_radius")]
        ball_radius: f64,
        #[serde(default = "default_steps_per_epoch")]
        steps_per_epoch: usize,
    },
    TrigNonconvex {
        #[serde(default = "default_dimension")]
        dimension: usize,
        #[serde(default = "default_amp")]
        amp: f64,
        #[serde(default = "default_freq")]
        freq: f64,
        #[serde(default)]
        noise_std: f64,
        #[serde(default = "default_radius")]
        ball_radius: f64,
        #[serde(default = "default_steps_per_epoch")]
        steps_per_epoch: usize,
    },
    MlpClassifier {
        #[serde(default)]
        dataset: DatasetConfig,
        #[serde(default = "default_hidden")]
        hidden: usize,
        /// Held-out fraction when the dataset has no predefined split.
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
    },
}

fn default_dimension() -> usize {
    10
}
fn default_radius() -> f64 {
    10.0
}
fn default_steps_per_epoch() -> usize {
    50
}
fn default_amp() -> f64 {
    0.5
}
fn default_freq() -> f64 {
    2.0
}
fn default_hidden() -> usize {
    16
}
fn default_test_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetConfig {
    /// Synthetic Gaussian blobs, the desk-scale default task.
    Blobs {
        #[serde(default = "default_blob_samples")]
        n_samples: usize,
        #[serde(default = "default_blob_features")]
        n_features: usize,
        #[serde(default = "default_blob_classes")]
        n_classes: usize,
        #[serde(default = "default_blob_separation")]
        separation: f64,
    },
    Csv {
        path: PathBuf,
        #[serde(default)]
        n_classes: Option<usize>,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
    },
}

fn default_blob_samples() -> usize {
    400
}
fn default_blob_features() -> usize {
    20
}
fn default_blob_classes() -> usize {
    2
}
fn default_blob_separation() -> f64 {
    2.0
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig::Blobs {
            n_samples: default_blob_samples(),
            n_features: default_blob_features(),
            n_classes: default_blob_classes(),
            separation: default_blob_separation(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskSettings {
    pub sparsity: f64,
    pub kind: MaskKind,
    pub drop_criterion: DropCriterion,
    pub alpha: f64,
    pub update_every: u64,
    pub fisher_samples: usize,
}

impl Default for MaskSettings {
    fn default() -> Self {
        MaskSettings {
            sparsity: 0.5,
            kind: MaskKind::Fixed,
            drop_criterion: DropCriterion::Flattest,
            alpha: 0.5,
            update_every: 1,
            fisher_samples: 128,
        }
    }
}

impl MaskSettings {
    pub fn policy(&self) -> MaskPolicy {
        MaskPolicy {
            kind: self.kind,
            drop_criterion: self.drop_criterion,
            alpha: self.alpha,
            update_every: self.update_every,
            fisher_samples: self.fisher_samples,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSettings {
    pub top_k: usize,
    pub iterations: usize,
    /// Probe batch size for classifier Hessians.
    pub probe_samples: usize,
}

impl Default for SpectrumSettings {
    fn default() -> Self {
        SpectrumSettings {
            top_k: 5,
            iterations: 30,
            probe_samples: 256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeSettings {
    pub resolution: usize,
    pub range: f64,
    pub probe_samples: usize,
}

impl Default for LandscapeSettings {
    fn default() -> Self {
        LandscapeSettings {
            resolution: 51,
            range: 1.0,
            probe_samples: 256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatioSettings {
    /// Perturbation radius used for the two-step gradient.
    pub rho: f64,
    pub probe_samples: usize,
}

impl Default for RatioSettings {
    fn default() -> Self {
        RatioSettings {
            rho: 0.05,
            probe_samples: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheorySettings {
    pub rho_grid: Vec<f64>,
    pub points: usize,
    pub mc_reps: usize,
    pub descent_states: usize,
    pub descent_reps: usize,
    pub descent_eta: f64,
    pub rate_steps: usize,
    pub rate_repeats: usize,
    pub rate_eta0: f64,
    pub rate_rho0: f64,
    pub rate_sparsity: f64,
}

impl Default for TheorySettings {
    fn default() -> Self {
        TheorySettings {
            rho_grid: vec![0.01, 0.05, 0.1],
            points: 200,
            mc_reps: 2000,
            descent_states: 200,
            descent_reps: 8,
            descent_eta: 0.5,
            rate_steps: 2000,
            rate_repeats: 10,
            rate_eta0: 0.5,
            rate_rho0: 0.05,
            rate_sparsity: 0.5,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if !(0.0..1.0).contains(&self.mask.sparsity) {
            return Err(Error::Config("sparsity must be in [0, 1)".into()));
        }
        self.mask.policy().validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        match &self.objective {
            ObjectiveConfig::NoisyQuadratic {
                dimension,
                curvature,
                noise_std,
                ball_radius,
                steps_per_epoch,
            } => {
                if *dimension == 0 || *steps_per_epoch == 0 {
                    return Err(Error::Config(
                        "dimension and steps_per_epoch must be >= 1".into(),
                    ));
                }
                if let Some(c) = curvature {
                    if c.len() != *dimension {
                        return Err(Error::Config(format!(
                            "curvature has {} entries for dimension {dimension}",
                            c.len()
                        )));
                    }
                }
                if *noise_std < 0.0 || *ball_radius <= 0.0 {
                    return Err(Error::Config(
                        "need noise_std >= 0 and ball_radius > 0".into(),
                    ));
                }
            }
            ObjectiveConfig::TrigNonconvex {
                dimension,
                amp,
                freq,
                noise_std,
                ball_radius,
                steps_per_epoch,
            } => {
                if *dimension == 0 || *steps_per_epoch == 0 {
                    return Err(Error::Config(
                        "dimension and steps_per_epoch must be >= 1".into(),
                    ));
                }
                if *amp < 0.0 || *freq <= 0.0 || *noise_std < 0.0 || *ball_radius <= 0.0 {
                    return Err(Error::Config(
                        "need amp >= 0, freq > 0, noise_std >= 0, ball_radius > 0".into(),
                    ));
                }
            }
            ObjectiveConfig::MlpClassifier {
                dataset,
                hidden,
                test_fraction,
            } => {
                if *hidden == 0 {
                    return Err(Error::Config("hidden must be >= 1".into()));
                }
                if !(0.0..1.0).contains(test_fraction) {
                    return Err(Error::Config("test_fraction must be in [0, 1)".into()));
                }
                match dataset {
                    DatasetConfig::Csv { path, .. } => require_exists(path)?,
                    DatasetConfig::Idx { images, labels } => {
                        require_exists(images)?;
                        require_exists(labels)?;
                    }
                    DatasetConfig::Blobs {
                        n_samples,
                        n_features,
                        n_classes,
                        ..
                    } => {
                        if *n_samples < 2 || *n_features == 0 || *n_classes < 2 {
                            return Err(Error::Config(
                                "blobs need n_samples >= 2, n_features >= 1, n_classes >= 2".into(),
                            ));
                        }
                    }
                }
            }
        }
        if self.optimizer.kind == OptimizerKind::Ssam
            && self.mask.kind == MaskKind::Fisher
            && !matches!(self.objective, ObjectiveConfig::MlpClassifier { .. })
        {
            return Err(Error::Config(
                "fisher masks need a classifier objective".into(),
            ));
        }
        if let Some(grid) = &self.ablation {
            grid.validate()?;
        }
        if self.spectrum.top_k == 0 || self.spectrum.iterations < self.spectrum.top_k {
            return Err(Error::Config(
                "spectrum needs 1 <= top_k <= iterations".into(),
            ));
        }
        if self.landscape.resolution < 2 || self.landscape.range <= 0.0 {
            return Err(Error::Config(
                "landscape needs resolution >= 2 and range > 0".into(),
            ));
        }
        Ok(())
    }

    /// Instantiate the objective; classifier configs also load their data.
    pub fn build_objective(&self) -> Result<(StochasticObjective, Option<Dataset>)> {
        match &self.objective {
            ObjectiveConfig::NoisyQuadratic {
                dimension,
                curvature,
                noise_std,
                ball_radius,
                ..
            } => {
                let diag = curvature.clone().unwrap_or_else(|| vec![1.0; *dimension]);
                let obj = NoisyQuadratic::new(diag, *noise_std, *ball_radius)?;
                Ok((StochasticObjective::NoisyQuadratic(obj), None))
            }
            ObjectiveConfig::TrigNonconvex {
                dimension,
                amp,
                freq,
                noise_std,
                ball_radius,
                ..
            } => {
                let obj = TrigNonconvex::new(*dimension, *amp, *freq, *noise_std, *ball_radius)?;
                Ok((StochasticObjective::TrigNonconvex(obj), None))
            }
            ObjectiveConfig::MlpClassifier {
                dataset, hidden, ..
            } => {
                let data = match dataset {
                    DatasetConfig::Blobs {
                        n_samples,
                        n_features,
                        n_classes,
                        separation,
                    } => Dataset::synthetic_blobs(
                        *n_samples,
                        *n_features,
                        *n_classes,
                        *separation,
                        self.seed,
                    ),
                    DatasetConfig::Csv { path, n_classes } => Dataset::load_csv(path, *n_classes)?,
                    DatasetConfig::Idx { images, labels } => Dataset::load_idx(images, labels)?,
                };
                let mlp = MlpClassifier::new(data.n_features(), *hidden, data.n_classes())?;
                Ok((StochasticObjective::MlpClassifier(mlp), Some(data)))
            }
        }
    }

    /// Steps one epoch runs for on synthetic objectives.
    pub fn synthetic_steps_per_epoch(&self) -> usize {
        match &self.objective {
            ObjectiveConfig::NoisyQuadratic {
                steps_per_epoch, ..
            }
            | ObjectiveConfig::TrigNonconvex {
                steps_per_epoch, ..
            } => *steps_per_epoch,
            ObjectiveConfig::MlpClassifier { .. } => 0,
        }
    }

    pub fn test_fraction(&self) -> f64 {
        match &self.objective {
            ObjectiveConfig::MlpClassifier { test_fraction, .. } => *test_fraction,
            _ => 0.0,
        }
    }
}

fn require_exists(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "referenced path does not exist: {}",
            path.display()
        )))
    }
}

/// Load and validate a config file. Parse failures carry line/column from
/// the JSON parser; constraint violations name the offending field.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}
