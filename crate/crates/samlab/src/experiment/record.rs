//! Run records: per-step CSV rows plus a JSON sidecar holding the config
//! snapshot and final metrics. Reading is the exact inverse of writing.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::ExperimentConfig;

pub const CSV_HEADER: &str = "step,epoch,loss,grad_norm_sq,rho_t,eta_t,sparsity,mask_regen,wall_ms";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub step: u64,
    pub epoch: u64,
    pub loss: f64,
    pub grad_norm_sq: f64,
    pub rho_t: f64,
    pub eta_t: f64,
    pub sparsity: f64,
    pub mask_regen: bool,
    pub wall_ms: f64,
}

impl StepRow {
    /// One CSV line, no trailing newline. Floats use the shortest
    /// round-trippable form.
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.step,
            self.epoch,
            self.loss,
            self.grad_norm_sq,
            self.rho_t,
            self.eta_t,
            self.sparsity,
            self.mask_regen,
            self.wall_ms
        )
    }

    pub fn from_csv_line(line: &str, path: &Path, line_no: usize) -> Result<StepRow> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::format(
                path,
                format!("line {line_no}: {} fields, expected 9", fields.len()),
            ));
        }
        let bad = |what: &str| Error::format(path, format!("line {line_no}: bad {what}"));
        Ok(StepRow {
            step: fields[0].parse().map_err(|_| bad("step"))?,
            epoch: fields[1].parse().map_err(|_| bad("epoch"))?,
            loss: fields[2].parse().map_err(|_| bad("loss"))?,
            grad_norm_sq: fields[3].parse().map_err(|_| bad("grad_norm_sq"))?,
            rho_t: fields[4].parse().map_err(|_| bad("rho_t"))?,
            eta_t: fields[5].parse().map_err(|_| bad("eta_t"))?,
            sparsity: fields[6].parse().map_err(|_| bad("sparsity"))?,
            mask_regen: fields[7].parse().map_err(|_| bad("mask_regen"))?,
            wall_ms: fields[8].parse().map_err(|_| bad("wall_ms"))?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Completed,
    /// The run hit non-finite numbers and stopped early; the rows up to the
    /// failure are preserved.
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalMetrics {
    pub status: RunStatus,
    pub final_loss: Option<f64>,
    pub train_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    /// Total time spent generating masks (initial + regenerations).
    pub mask_gen_total_ms: f64,
    pub mask_regen_count: u64,
    #[serde(default)]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub rows: Vec<StepRow>,
    pub metrics: FinalMetrics,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    config: ExperimentConfig,
    metrics: FinalMetrics,
}

impl RunRecord {
    /// The full steps.csv content (header plus one line per row).
    pub fn rows_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.to_csv_line());
            out.push('\n');
        }
        out
    }

    /// Write `steps.csv` and `run.json` into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_path = dir.join("steps.csv");
        std::fs::write(&csv_path, self.rows_csv()).map_err(|e| Error::io(&csv_path, e))?;
        let sidecar = Sidecar {
            config: self.config.clone(),
            metrics: self.metrics.clone(),
        };
        let json_path = dir.join("run.json");
        let text = serde_json::to_string_pretty(&sidecar)
            .map_err(|e| Error::Config(format!("run.json encode: {e}")))?;
        std::fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))
    }

    /// Inverse of [`RunRecord::write_to`].
    pub fn read_from(dir: &Path) -> Result<RunRecord> {
        let json_path = dir.join("run.json");
        let text = std::fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
        let sidecar: Sidecar = serde_json::from_str(&text)
            .map_err(|e| Error::format(&json_path, format!("run.json decode: {e}")))?;

        let csv_path = dir.join("steps.csv");
        let text = std::fs::read_to_string(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header == CSV_HEADER => {}
            Some((_, header)) => {
                return Err(Error::format(
                    &csv_path,
                    format!("unexpected header '{header}'"),
                ))
            }
            None => return Err(Error::format(&csv_path, "empty file")),
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            rows.push(StepRow::from_csv_line(line, &csv_path, i + 1)?);
        }
        let mut prev = 0;
        for row in &rows {
            if row.step <= prev {
                return Err(Error::format(
                    &csv_path,
                    format!("steps not strictly increasing at step {}", row.step),
                ));
            }
            prev = row.step;
        }
        Ok(RunRecord {
            config: sidecar.config,
            rows,
            metrics: sidecar.metrics,
        })
    }
}
