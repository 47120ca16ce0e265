//! Ablation sweeps: a Cartesian grid of hyperparameter overrides, one run
//! per cell, and a one-row-per-cell summary table.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{DropCriterion, MaskKind};
use crate::optim::OptimizerKind;

use super::config::ExperimentConfig;
use super::record::RunStatus;
use super::train::train;

/// Mask strategies the sweeps compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyTag {
    Fisher,
    Random,
    DynamicFlattest,
    DynamicSharpest,
    DynamicRandom,
    Fixed,
}

impl StrategyTag {
    pub fn name(&self) -> &'static str {
        match self {
            StrategyTag::Fisher => "fisher",
            StrategyTag::Random => "random",
            StrategyTag::DynamicFlattest => "dynamic-flattest",
            StrategyTag::DynamicSharpest => "dynamic-sharpest",
            StrategyTag::DynamicRandom => "dynamic-random",
            StrategyTag::Fixed => "fixed",
        }
    }

    fn mask_kind(&self) -> (MaskKind, DropCriterion) {
        match self {
            StrategyTag::Fisher => (MaskKind::Fisher, DropCriterion::Flattest),
            StrategyTag::Random => (MaskKind::Random, DropCriterion::Flattest),
            StrategyTag::DynamicFlattest => (MaskKind::Dynamic, DropCriterion::Flattest),
            StrategyTag::DynamicSharpest => (MaskKind::Dynamic, DropCriterion::Sharpest),
            StrategyTag::DynamicRandom => (MaskKind::Dynamic, DropCriterion::Random),
            StrategyTag::Fixed => (MaskKind::Fixed, DropCriterion::Flattest),
        }
    }
}

/// Grid axes; absent axes keep the base config's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationGrid {
    pub sparsity: Vec<f64>,
    pub rho0: Vec<f64>,
    pub fisher_samples: Vec<usize>,
    pub update_every: Vec<u64>,
    pub strategy: Vec<StrategyTag>,
}

impl AblationGrid {
    pub fn validate(&self) -> Result<()> {
        if self.n_cells() == 0 {
            return Err(Error::Config("ablation grid has no cells".into()));
        }
        Ok(())
    }

    fn n_cells(&self) -> usize {
        let axis = |n: usize| n.max(1);
        let any = !self.sparsity.is_empty()
            || !self.rho0.is_empty()
            || !self.fisher_samples.is_empty()
            || !self.update_every.is_empty()
            || !self.strategy.is_empty();
        if !any {
            return 0;
        }
        axis(self.sparsity.len())
            * axis(self.rho0.len())
            * axis(self.fisher_samples.len())
            * axis(self.update_every.len())
            * axis(self.strategy.len())
    }
}

/// One cell of the Cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationCell {
    pub index: usize,
    pub sparsity: Option<f64>,
    pub rho0: Option<f64>,
    pub fisher_samples: Option<usize>,
    pub update_every: Option<u64>,
    pub strategy: Option<StrategyTag>,
}

/// Expand the grid in row-major order (strategy fastest).
pub fn expand_grid(grid: &AblationGrid) -> Vec<AblationCell> {
    fn opts<T: Copy>(axis: &[T]) -> Vec<Option<T>> {
        if axis.is_empty() {
            vec![None]
        } else {
            axis.iter().map(|v| Some(*v)).collect()
        }
    }
    let mut cells = Vec::new();
    let mut index = 0;
    for &sparsity in &opts(&grid.sparsity) {
        for &rho0 in &opts(&grid.rho0) {
            for &fisher_samples in &opts(&grid.fisher_samples) {
                for &update_every in &opts(&grid.update_every) {
                    for &strategy in &opts(&grid.strategy) {
                        cells.push(AblationCell {
                            index,
                            sparsity,
                            rho0,
                            fisher_samples,
                            update_every,
                            strategy,
                        });
                        index += 1;
                    }
                }
            }
        }
    }
    cells
}

fn apply_cell(base: &ExperimentConfig, cell: &AblationCell) -> ExperimentConfig {
    let mut config = base.clone();
    if let Some(s) = cell.sparsity {
        config.mask.sparsity = s;
    }
    if let Some(rho0) = cell.rho0 {
        config.optimizer.rho0 = rho0;
        if rho0 > 0.0 && config.optimizer.kind == OptimizerKind::Sgd {
            config.optimizer.kind = OptimizerKind::Sam;
        }
    }
    if let Some(n) = cell.fisher_samples {
        config.mask.fisher_samples = n;
    }
    if let Some(t) = cell.update_every {
        config.mask.update_every = t;
    }
    if let Some(tag) = cell.strategy {
        let (kind, criterion) = tag.mask_kind();
        config.mask.kind = kind;
        config.mask.drop_criterion = criterion;
        config.optimizer.kind = OptimizerKind::Ssam;
        if config.optimizer.rho0 == 0.0 {
            config.optimizer.rho0 = 0.05;
        }
    }
    // Shared base seed with an axis-indexed offset per cell.
    config.seed = base.seed.wrapping_add(cell.index as u64);
    config.ablation = None;
    config
}

/// Per-cell summary line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub cell: usize,
    pub sparsity: f64,
    pub rho0: f64,
    pub fisher_samples: usize,
    pub update_every: u64,
    pub strategy: String,
    pub final_loss: Option<f64>,
    pub train_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub mask_gen_total_ms: f64,
    pub status: String,
}

pub const SUMMARY_HEADER: &str = "cell,sparsity,rho0,fisher_samples,update_every,strategy,\
final_loss,train_accuracy,test_accuracy,mask_gen_total_ms,status";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SummaryRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.cell,
            self.sparsity,
            self.rho0,
            self.fisher_samples,
            self.update_every,
            self.strategy,
            fmt_opt(self.final_loss),
            fmt_opt(self.train_accuracy),
            fmt_opt(self.test_accuracy),
            self.mask_gen_total_ms,
            self.status
        )
    }
}

/// Run every cell (worker threads pull cells off a shared queue), write
/// each record under `out/cell_NNN/`, and return the summary rows in cell
/// order. A failing cell gets a failure row; the others proceed.
pub fn run_ablation(
    base: &ExperimentConfig,
    out_dir: &Path,
    threads: usize,
) -> Result<Vec<SummaryRow>> {
    let grid = base
        .ablation
        .as_ref()
        .ok_or_else(|| Error::Config("config has no ablation grid".into()))?;
    grid.validate()?;
    let cells = expand_grid(grid);
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<SummaryRow>>> = Mutex::new(vec![None; cells.len()]);
    let workers = threads.max(1).min(cells.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= cells.len() {
                    break;
                }
                let cell = &cells[i];
                let config = apply_cell(base, cell);
                let row = run_cell(&config, cell, out_dir);
                results.lock().unwrap()[i] = Some(row);
            });
        }
    });

    let rows: Vec<SummaryRow> = results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every cell produced a row"))
        .collect();

    let mut text = String::from(SUMMARY_HEADER);
    text.push('\n');
    for row in &rows {
        text.push_str(&row.to_csv_line());
        text.push('\n');
    }
    let summary_path = out_dir.join("summary.csv");
    std::fs::write(&summary_path, text).map_err(|e| Error::io(&summary_path, e))?;
    Ok(rows)
}

fn run_cell(config: &ExperimentConfig, cell: &AblationCell, out_dir: &Path) -> SummaryRow {
    let strategy = cell
        .strategy
        .map(|s| s.name().to_string())
        .unwrap_or_else(|| format!("{:?}", config.mask.kind).to_lowercase());
    let mut row = SummaryRow {
        cell: cell.index,
        sparsity: config.mask.sparsity,
        rho0: config.optimizer.rho0,
        fisher_samples: config.mask.fisher_samples,
        update_every: config.mask.update_every,
        strategy,
        final_loss: None,
        train_accuracy: None,
        test_accuracy: None,
        mask_gen_total_ms: 0.0,
        status: String::new(),
    };
    match train(config) {
        Ok(run) => {
            let cell_dir = out_dir.join(format!("cell_{:03}", cell.index));
            if let Err(e) = run.record.write_to(&cell_dir) {
                row.status = format!("io-error: {e}");
                return row;
            }
            row.final_loss = run.record.metrics.final_loss;
            row.train_accuracy = run.record.metrics.train_accuracy;
            row.test_accuracy = run.record.metrics.test_accuracy;
            row.mask_gen_total_ms = run.record.metrics.mask_gen_total_ms;
            row.status = match run.record.metrics.status {
                RunStatus::Completed => "completed".into(),
                RunStatus::NumericalFailure => "numerical-failure".into(),
            };
        }
        Err(e) => {
            row.status = format!("error: {e}");
        }
    }
    row
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_expansion_is_cartesian() {
        let grid = AblationGrid {
            sparsity: vec![0.5, 0.9],
            rho0: vec![0.01, 0.05, 0.1],
            ..AblationGrid::default()
        };
        let cells = expand_grid(&grid);
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0].sparsity, Some(0.5));
        assert_eq!(cells[0].rho0, Some(0.01));
        assert_eq!(cells[5].sparsity, Some(0.9));
        assert_eq!(cells[5].rho0, Some(0.1));
        for (i, c) in cells.iter().enumerate() {
            assert_eq!(c.index, i);
        }
    }

    #[test]
    fn empty_grid_is_rejected() {
        assert!(AblationGrid::default().validate().is_err());
    }

    #[test]
    fn ablation_writes_one_row_and_record_per_cell() {
        let base: ExperimentConfig = serde_json::from_str(
            r#"{
                "objective": {"family": "noisy-quadratic", "dimension": 4, "steps_per_epoch": 5},
                "optimizer": {"kind": "sam", "eta0": 0.1, "rho0": 0.05},
                "epochs": 2,
                "seed": 5,
                "ablation": {"rho0": [0.01, 0.05, 0.1]}
            }"#,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let rows = run_ablation(&base, dir.path(), 2).unwrap();
        assert_eq!(rows.len(), 3);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.cell, i);
            assert_eq!(row.status, "completed");
            assert!(dir.path().join(format!("cell_{i:03}/steps.csv")).exists());
        }
        let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(summary.lines().count(), 4);
        assert!(summary.starts_with(SUMMARY_HEADER));
    }

    #[test]
    fn failing_cell_does_not_stop_others() {
        // The huge-radius cell overflows after one step; the tame cell
        // must still complete and both must appear in the summary.
        let base: ExperimentConfig = serde_json::from_str(
            r#"{
                "objective": {"family": "noisy-quadratic", "dimension": 4, "steps_per_epoch": 3},
                "optimizer": {"kind": "sgd", "eta0": 0.1},
                "epochs": 1,
                "seed": 5,
                "ablation": {"rho0": [0.0, 1e306]}
            }"#,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let rows = run_ablation(&base, dir.path(), 1).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].status, "completed");
        assert_eq!(rows[1].status, "numerical-failure");
    }
}
