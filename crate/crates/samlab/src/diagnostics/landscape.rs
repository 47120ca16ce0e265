//! Filter-normalized loss-landscape slices.
//!
//! Two seeded random directions are rescaled so each parameter group
//! matches the corresponding weight-group norm, then the loss is evaluated
//! on a regular grid in their span. The normalization makes slices
//! comparable across runs whose weight scales differ.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::data::Batch;
use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::param::ParamVector;
use crate::seed;

const GROUP_NORM_FLOOR: f64 = 1e-12;

/// Loss values over a `resolution x resolution` grid spanning
/// `[-range, range]^2` (endpoints included).
#[derive(Debug, Clone, Serialize)]
pub struct LandscapeGrid {
    /// Axis coordinates, identical for x and y.
    pub coords: Vec<f64>,
    /// Row-major: `losses[iy * resolution + ix]`.
    pub losses: Vec<f64>,
    pub resolution: usize,
    pub range: f64,
}

impl LandscapeGrid {
    pub fn loss_at(&self, ix: usize, iy: usize) -> f64 {
        self.losses[iy * self.resolution + ix]
    }

    /// CSV rows `x,y,loss` with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,loss\n");
        for (iy, y) in self.coords.iter().enumerate() {
            for (ix, x) in self.coords.iter().enumerate() {
                out.push_str(&format!("{},{},{}\n", x, y, self.loss_at(ix, iy)));
            }
        }
        out
    }
}

/// Rescale each group of `direction` to the norm of the same group of
/// `reference`. Groups whose direction norm is ~0 are left as zero.
pub fn filter_normalize(direction: &ParamVector, reference: &ParamVector) -> Result<ParamVector> {
    if direction.partition() != reference.partition() {
        return Err(Error::Config(
            "direction and reference have different partitions".into(),
        ));
    }
    let mut out = direction.clone();
    for span in reference.partition().spans() {
        let lo = span.offset;
        let hi = span.offset + span.len;
        let dir_norm = slice_norm(&direction.values()[lo..hi]);
        let ref_norm = slice_norm(&reference.values()[lo..hi]);
        let scale = if dir_norm < GROUP_NORM_FLOOR {
            0.0
        } else {
            ref_norm / dir_norm
        };
        for v in &mut out.values_mut()[lo..hi] {
            *v *= scale;
        }
    }
    Ok(out)
}

fn slice_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Evaluate the loss over `w + x d1 + y d2` for two seeded filter-normalized
/// random directions.
pub fn landscape_slice<O: Objective + ?Sized>(
    obj: &O,
    w: &ParamVector,
    batch: &Batch,
    resolution: usize,
    range: f64,
    seed_value: u64,
) -> Result<LandscapeGrid> {
    let mut rng = seed::stream_rng(seed_value, seed::tags::DIAGNOSTICS);
    let mut draw_direction = || -> Result<ParamVector> {
        let values: Vec<f64> = (0..w.len()).map(|_| rng.sample(StandardNormal)).collect();
        filter_normalize(&ParamVector::new(values, w.partition().clone())?, w)
    };
    let d1 = draw_direction()?;
    let d2 = draw_direction()?;
    landscape_slice_along(obj, w, batch, &d1, &d2, resolution, range)
}

/// Same grid with caller-supplied directions (no normalization applied).
///
/// Coordinates are `range * (2i - (res-1)) / (res-1)`, so the endpoints are
/// exact and an odd resolution hits `(0, 0)` exactly, where the loss equals
/// the unperturbed loss bit for bit.
pub fn landscape_slice_along<O: Objective + ?Sized>(
    obj: &O,
    w: &ParamVector,
    batch: &Batch,
    d1: &ParamVector,
    d2: &ParamVector,
    resolution: usize,
    range: f64,
) -> Result<LandscapeGrid> {
    if resolution < 2 {
        return Err(Error::InvalidArgument(
            "landscape resolution must be at least 2".into(),
        ));
    }
    if range.is_nan() || range <= 0.0 {
        return Err(Error::InvalidArgument(
            "landscape range must be positive".into(),
        ));
    }
    let last = (resolution - 1) as f64;
    let coords: Vec<f64> = (0..resolution)
        .map(|i| range * (2.0 * i as f64 - last) / last)
        .collect();

    let mut losses = Vec::with_capacity(resolution * resolution);
    for &y in &coords {
        for &x in &coords {
            let point = w.add_scaled(d1, x).add_scaled(d2, y);
            losses.push(obj.eval_loss(&point, batch)?);
        }
    }
    Ok(LandscapeGrid {
        coords,
        losses,
        resolution,
        range,
    })
}
