//! Flat parameter vectors with a named-group partition.
//!
//! The partition drives filter normalization and per-layer reporting: every
//! coordinate belongs to exactly one contiguous named group.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One contiguous group of coordinates, e.g. a weight matrix or bias vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpan {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// Ordered list of disjoint, contiguous groups covering `[0, d)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    spans: Vec<GroupSpan>,
}

impl Partition {
    pub fn new(spans: Vec<GroupSpan>) -> Result<Self> {
        let mut expected = 0usize;
        for span in &spans {
            if span.offset != expected {
                return Err(Error::Config(format!(
                    "partition group '{}' starts at {} but {} expected",
                    span.name, span.offset, expected
                )));
            }
            if span.len == 0 {
                return Err(Error::Config(format!(
                    "partition group '{}' is empty",
                    span.name
                )));
            }
            expected += span.len;
        }
        if spans.is_empty() {
            return Err(Error::Config("partition has no groups".into()));
        }
        Ok(Partition { spans })
    }

    /// Single group named `name` covering the whole vector.
    pub fn single(name: &str, len: usize) -> Self {
        Partition {
            spans: vec![GroupSpan {
                name: name.to_string(),
                offset: 0,
                len,
            }],
        }
    }

    /// Build from `(name, len)` pairs laid out back to back.
    pub fn from_group_lens(groups: &[(&str, usize)]) -> Result<Self> {
        let mut spans = Vec::with_capacity(groups.len());
        let mut offset = 0;
        for (name, len) in groups {
            spans.push(GroupSpan {
                name: name.to_string(),
                offset,
                len: *len,
            });
            offset += len;
        }
        Partition::new(spans)
    }

    pub fn total_len(&self) -> usize {
        self.spans.iter().map(|s| s.len).sum()
    }

    pub fn spans(&self) -> &[GroupSpan] {
        &self.spans
    }

    /// Group that owns coordinate `index`.
    pub fn group_of(&self, index: usize) -> Option<&GroupSpan> {
        self.spans
            .iter()
            .find(|s| index >= s.offset && index < s.offset + s.len)
    }
}

/// Flat weight vector plus its group partition.
///
/// Arithmetic preserves the partition; the length invariant is enforced at
/// construction and dimension checks are `assert!`s (programmer error).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    values: Vec<f64>,
    partition: Partition,
}

impl ParamVector {
    pub fn new(values: Vec<f64>, partition: Partition) -> Result<Self> {
        if values.len() != partition.total_len() {
            return Err(Error::Config(format!(
                "value vector of length {} does not match partition length {}",
                values.len(),
                partition.total_len()
            )));
        }
        Ok(ParamVector { values, partition })
    }

    pub fn zeros(partition: Partition) -> Self {
        let d = partition.total_len();
        ParamVector {
            values: vec![0.0; d],
            partition,
        }
    }

    pub fn zeros_like(other: &ParamVector) -> Self {
        ParamVector {
            values: vec![0.0; other.len()],
            partition: other.partition.clone(),
        }
    }

    /// Single-group vector named "w".
    pub fn from_values(values: Vec<f64>) -> Self {
        let partition = Partition::single("w", values.len());
        ParamVector { values, partition }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn group(&self, name: &str) -> Option<&[f64]> {
        self.partition
            .spans
            .iter()
            .find(|s| s.name == name)
            .map(|s| &self.values[s.offset..s.offset + s.len])
    }

    /// `self + c * other`, elementwise.
    pub fn add_scaled(&self, other: &ParamVector, c: f64) -> ParamVector {
        assert_eq!(self.len(), other.len(), "length mismatch in add_scaled");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + c * b)
            .collect();
        ParamVector {
            values,
            partition: self.partition.clone(),
        }
    }

    pub fn axpy_in_place(&mut self, c: f64, other: &ParamVector) {
        assert_eq!(self.len(), other.len(), "length mismatch in axpy");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    pub fn scaled(&self, c: f64) -> ParamVector {
        ParamVector {
            values: self.values.iter().map(|v| c * v).collect(),
            partition: self.partition.clone(),
        }
    }

    pub fn scale_in_place(&mut self, c: f64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &ParamVector) -> ParamVector {
        assert_eq!(self.len(), other.len(), "length mismatch in hadamard");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        ParamVector {
            values,
            partition: self.partition.clone(),
        }
    }

    pub fn dot(&self, other: &ParamVector) -> f64 {
        assert_eq!(self.len(), other.len(), "length mismatch in dot");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Error out on the first non-finite coordinate, naming its group.
    pub fn check_finite(&self, context: &str) -> Result<()> {
        for (i, v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                let group = self
                    .partition
                    .group_of(i)
                    .map(|s| s.name.clone())
                    .unwrap_or_else(|| "?".into());
                return Err(Error::Numerical(format!(
                    "non-finite value {v} at coordinate {i} (group '{group}') during {context}"
                )));
            }
        }
        Ok(())
    }
}
