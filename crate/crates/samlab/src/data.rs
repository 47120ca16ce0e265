//! Minibatches, in-memory datasets and the loaders that produce them.
//!
//! A [`Batch`] plays two roles. For classifier objectives it is a slice of
//! labelled examples. For the synthetic families it carries the raw noise
//! draw of one stochastic-gradient query: a single row of standard normal
//! values that the objective scales by `sigma / sqrt(d)`. Attaching the noise
//! to the batch (instead of drawing inside the gradient) makes every gradient
//! evaluation a pure function of `(weights, batch)`, which is what lets the
//! two SAM gradient calls share one noise realization and lets zero-radius
//! SAM reproduce SGD bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::seed;

/// A minibatch: row-major inputs plus integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    inputs: Vec<f64>,
    n_features: usize,
    targets: Vec<usize>,
    n_classes: usize,
}

impl Batch {
    pub fn new(
        inputs: Vec<f64>,
        n_features: usize,
        targets: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self> {
        if n_features == 0 || targets.is_empty() || inputs.len() != targets.len() * n_features {
            return Err(Error::Config(format!(
                "batch shape mismatch: {} values, {} features, {} targets",
                inputs.len(),
                n_features,
                targets.len()
            )));
        }
        if let Some(bad) = targets.iter().find(|&&y| y >= n_classes) {
            return Err(Error::Config(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        Ok(Batch {
            inputs,
            n_features,
            targets,
            n_classes,
        })
    }

    /// Noise batch for a synthetic objective: one row of standard normals.
    pub fn noise(rng: &mut ChaCha8Rng, dim: usize) -> Self {
        let inputs = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        Batch {
            inputs,
            n_features: dim,
            targets: vec![0],
            n_classes: 1,
        }
    }

    /// All-zero noise row: evaluating on it gives the true loss/gradient.
    pub fn noiseless(dim: usize) -> Self {
        Batch {
            inputs: vec![0.0; dim],
            n_features: dim,
            targets: vec![0],
            n_classes: 1,
        }
    }

    pub fn n_samples(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn input_row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn target(&self, i: usize) -> usize {
        self.targets[i]
    }

    /// Mean over rows, coordinate by coordinate.
    pub fn mean_row(&self) -> Vec<f64> {
        let n = self.n_samples() as f64;
        let mut out = vec![0.0; self.n_features];
        for i in 0..self.n_samples() {
            for (o, v) in out.iter_mut().zip(self.input_row(i)) {
                *o += v;
            }
        }
        for o in &mut out {
            *o /= n;
        }
        out
    }
}

/// On-disk dataset formats the loader understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Idx,
    Csv,
}

/// An in-memory labelled dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<f64>,
    n_features: usize,
    targets: Vec<usize>,
    n_classes: usize,
}

impl Dataset {
    pub fn new(
        inputs: Vec<f64>,
        n_features: usize,
        targets: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self> {
        Batch::new(inputs.clone(), n_features, targets.clone(), n_classes)?;
        Ok(Dataset {
            inputs,
            n_features,
            targets,
            n_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn input_row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn target(&self, i: usize) -> usize {
        self.targets[i]
    }

    /// Batch holding the rows at `indices`, in order.
    pub fn batch(&self, indices: &[usize]) -> Batch {
        let mut inputs = Vec::with_capacity(indices.len() * self.n_features);
        let mut targets = Vec::with_capacity(indices.len());
        for &i in indices {
            inputs.extend_from_slice(self.input_row(i));
            targets.push(self.targets[i]);
        }
        Batch {
            inputs,
            n_features: self.n_features,
            targets,
            n_classes: self.n_classes,
        }
    }

    /// The whole dataset as one batch.
    pub fn as_batch(&self) -> Batch {
        Batch {
            inputs: self.inputs.clone(),
            n_features: self.n_features,
            targets: self.targets.clone(),
            n_classes: self.n_classes,
        }
    }

    /// Seeded split into (train, test) with `test_fraction` held out.
    pub fn split(&self, test_fraction: f64, seed_value: u64) -> (Dataset, Dataset) {
        let n = self.len();
        let n_test = ((n as f64) * test_fraction).round() as usize;
        let n_test = n_test
            .min(n.saturating_sub(1))
            .max(if n > 1 { 1 } else { 0 });
        let mut rng = ChaCha8Rng::seed_from_u64(seed::child_seed(seed_value, 0x511));
        let picks = rand::seq::index::sample(&mut rng, n, n_test).into_vec();
        let mut is_test = vec![false; n];
        for p in picks {
            is_test[p] = true;
        }
        let train_idx: Vec<usize> = (0..n).filter(|&i| !is_test[i]).collect();
        let test_idx: Vec<usize> = (0..n).filter(|&i| is_test[i]).collect();
        (self.subset(&train_idx), self.subset(&test_idx))
    }

    fn subset(&self, indices: &[usize]) -> Dataset {
        let b = self.batch(indices);
        Dataset {
            inputs: b.inputs,
            n_features: b.n_features,
            targets: b.targets,
            n_classes: self.n_classes,
        }
    }

    /// Two-class (or k-class) Gaussian blobs with unit covariance.
    ///
    /// Class means sit `separation` apart along seeded random directions, so
    /// the task is linearly separable only up to the configured overlap.
    pub fn synthetic_blobs(
        n_samples: usize,
        n_features: usize,
        n_classes: usize,
        separation: f64,
        seed_value: u64,
    ) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::child_seed(seed_value, 0xb10b));
        // Seeded unit direction per class, scaled to +/- separation/2 around 0.
        let mut means = Vec::with_capacity(n_classes);
        for _ in 0..n_classes {
            let mut dir: Vec<f64> = (0..n_features)
                .map(|_| rng.sample(StandardNormal))
                .collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            for v in &mut dir {
                *v *= separation / 2.0 / norm;
            }
            means.push(dir);
        }
        // With two classes put them at opposite ends for a `separation` gap.
        if n_classes == 2 {
            means[1] = means[0].iter().map(|v| -v).collect();
        }
        let mut inputs = Vec::with_capacity(n_samples * n_features);
        let mut targets = Vec::with_capacity(n_samples);
        for i in 0..n_samples {
            let class = i % n_classes;
            for mean in &means[class] {
                let z: f64 = rng.sample(StandardNormal);
                inputs.push(mean + z);
            }
            targets.push(class);
        }
        Dataset {
            inputs,
            n_features,
            targets,
            n_classes,
        }
    }

    /// Load an IDX image/label pair (the classic big-endian digit format).
    ///
    /// `images` must start with magic `0x00000803`, `labels` with
    /// `0x00000801`. Pixels are scaled to `[0, 1]`; labels validated < 10.
    pub fn load_idx(images: &Path, labels: &Path) -> Result<Dataset> {
        let image_bytes = read_all(images)?;
        let label_bytes = read_all(labels)?;

        let magic = be_u32(&image_bytes, 0, images)?;
        if magic != 0x0000_0803 {
            return Err(Error::format(
                images,
                format!("bad image magic 0x{magic:08x} at byte offset 0 (want 0x00000803)"),
            ));
        }
        let n = be_u32(&image_bytes, 4, images)? as usize;
        let rows = be_u32(&image_bytes, 8, images)? as usize;
        let cols = be_u32(&image_bytes, 12, images)? as usize;
        let pixels = n * rows * cols;
        if image_bytes.len() != 16 + pixels {
            return Err(Error::format(
                images,
                format!(
                    "payload is {} bytes, header promises {} (truncation at byte offset {})",
                    image_bytes.len() - 16,
                    pixels,
                    image_bytes.len()
                ),
            ));
        }

        let magic = be_u32(&label_bytes, 0, labels)?;
        if magic != 0x0000_0801 {
            return Err(Error::format(
                labels,
                format!("bad label magic 0x{magic:08x} at byte offset 0 (want 0x00000801)"),
            ));
        }
        let n_labels = be_u32(&label_bytes, 4, labels)? as usize;
        if n_labels != n || label_bytes.len() != 8 + n {
            return Err(Error::format(
                labels,
                format!("label count {n_labels} does not match {n} images"),
            ));
        }

        let inputs: Vec<f64> = image_bytes[16..]
            .iter()
            .map(|&b| b as f64 / 255.0)
            .collect();
        let mut targets = Vec::with_capacity(n);
        for (i, &b) in label_bytes[8..].iter().enumerate() {
            if b >= 10 {
                return Err(Error::format(
                    labels,
                    format!("label {b} out of range at byte offset {}", 8 + i),
                ));
            }
            targets.push(b as usize);
        }
        Dataset::new(inputs, rows * cols, targets, 10)
    }

    /// Load from a single path by format. For `csv` the path is the file
    /// itself; for `idx` it is the images file, with the labels file
    /// inferred by the conventional `images -> labels` / `idx3 -> idx1`
    /// name substitutions.
    pub fn load(path: &Path, format: DataFormat) -> Result<Dataset> {
        match format {
            DataFormat::Csv => Dataset::load_csv(path, None),
            DataFormat::Idx => {
                let name = path
                    .file_name()
                    .and_then(|n| n.to_str())
                    .ok_or_else(|| Error::format(path, "path has no file name"))?;
                let labels_name = name.replace("images", "labels").replace("idx3", "idx1");
                if labels_name == name {
                    return Err(Error::format(
                        path,
                        "cannot infer the labels file: name contains neither 'images' nor 'idx3'",
                    ));
                }
                let labels = path.with_file_name(labels_name);
                if !labels.exists() {
                    return Err(Error::format(
                        &labels,
                        "inferred labels file does not exist",
                    ));
                }
                Dataset::load_idx(path, &labels)
            }
        }
    }

    /// Load a CSV with a header row; the column named `label` holds the
    /// class, all other columns are features.
    ///
    /// When `n_classes` is given, labels are validated against it; otherwise
    /// the class count is inferred as `max(label) + 1`.
    pub fn load_csv(path: &Path, n_classes: Option<usize>) -> Result<Dataset> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines().enumerate();

        let header = match lines.next() {
            Some((_, line)) => line.map_err(|e| Error::io(path, e))?,
            None => return Err(Error::format(path, "empty file")),
        };
        let columns: Vec<&str> = header.split(',').map(str::trim).collect();
        let label_col = columns
            .iter()
            .position(|c| *c == "label")
            .ok_or_else(|| Error::format(path, "header has no 'label' column"))?;
        let n_features = columns.len() - 1;
        if n_features == 0 {
            return Err(Error::format(path, "no feature columns"));
        }

        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        for (idx, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != columns.len() {
                return Err(Error::format(
                    path,
                    format!(
                        "line {}: {} fields, header has {}",
                        idx + 1,
                        fields.len(),
                        columns.len()
                    ),
                ));
            }
            for (col, field) in fields.iter().enumerate() {
                if col == label_col {
                    let label: usize = field.parse().map_err(|_| {
                        Error::format(path, format!("line {}: bad label '{field}'", idx + 1))
                    })?;
                    targets.push(label);
                } else {
                    let value: f64 = field.parse().map_err(|_| {
                        Error::format(path, format!("line {}: bad number '{field}'", idx + 1))
                    })?;
                    inputs.push(value);
                }
            }
        }
        if targets.is_empty() {
            return Err(Error::format(path, "no data rows"));
        }
        let inferred = targets.iter().copied().max().unwrap() + 1;
        let classes = n_classes.unwrap_or(inferred);
        if let Some(bad) = targets.iter().find(|&&y| y >= classes) {
            return Err(Error::format(
                path,
                format!("label {bad} out of range for {classes} classes"),
            ));
        }
        Dataset::new(inputs, n_features, targets, classes)
    }
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut buf = Vec::new();
    file.read_to_end(&mut buf).map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::format(
            path,
            format!("truncated header at byte offset {offset}"),
        ));
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}
