//! Top-of-spectrum Hessian estimation via the Lanczos iteration.
//!
//! The operator only needs matrix-vector products, so it runs equally well
//! against a finite-difference [`crate::hvp::HvpOracle`] or a dense test
//! matrix. Full reorthogonalization (two passes per step) keeps the Krylov
//! basis clean enough for the tight tolerances the spectra are checked at;
//! the basis is tiny at this scale so the extra work is irrelevant.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hvp::HvpOracle;
use crate::param::ParamVector;
use crate::seed;

const BREAKDOWN_TOL: f64 = 1e-12;

/// Anything that can apply a symmetric operator to a vector.
pub trait HessianOperator {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[f64]) -> Result<Vec<f64>>;
}

impl HessianOperator for HvpOracle<'_> {
    fn dim(&self) -> usize {
        self.dim()
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let direction = ParamVector::new(v.to_vec(), self.center().partition().clone())?;
        Ok(self.hvp(&direction)?.values().to_vec())
    }
}

/// Dense symmetric matrix operator for tests and demos.
#[derive(Debug, Clone)]
pub struct DenseSymmetric {
    n: usize,
    data: Vec<f64>,
}

impl DenseSymmetric {
    /// Row-major `n x n` data; must be symmetric.
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Config(format!(
                "need {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let a = data[i * n + j];
                let b = data[j * n + i];
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::Config(format!(
                        "matrix is not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(DenseSymmetric { n, data })
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let mut data = vec![0.0; n * n];
        for (i, &v) in values.iter().enumerate() {
            data[i * n + i] = v;
        }
        DenseSymmetric { n, data }
    }
}

impl HessianOperator for DenseSymmetric {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let out = self
            .data
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect();
        Ok(out)
    }
}

/// Top Ritz values with residual estimates.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    /// Largest estimates first. May be shorter than requested after an
    /// early breakdown.
    pub eigenvalues: Vec<f64>,
    /// `|beta_m * y_last|` per reported eigenpair; small means converged.
    pub residuals: Vec<f64>,
    /// `lambda_1 / lambda_5`, when at least five estimates exist and the
    /// fifth is nonzero.
    pub ratio_1_5: Option<f64>,
    /// The iteration found an invariant subspace before `iters` steps.
    pub breakdown: bool,
    /// Lanczos steps actually performed.
    pub iterations: usize,
}

/// Run `iters` Lanczos steps from a seeded random start and return the top
/// `k` Ritz values of the resulting tridiagonal matrix.
pub fn lanczos_spectrum(
    op: &dyn HessianOperator,
    k: usize,
    iters: usize,
    seed_value: u64,
) -> Result<SpectrumReport> {
    let d = op.dim();
    if k == 0 || k > iters || iters > d {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k <= iters <= dim, got k={k}, iters={iters}, dim={d}"
        )));
    }

    let mut rng = seed::stream_rng(seed_value, seed::tags::DIAGNOSTICS);
    let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    normalize(&mut v);

    let mut basis: Vec<Vec<f64>> = vec![v.clone()];
    let mut alphas: Vec<f64> = Vec::with_capacity(iters);
    let mut betas: Vec<f64> = Vec::new();
    let mut v_prev: Vec<f64> = vec![0.0; d];
    let mut beta_prev = 0.0;
    let mut final_beta = 0.0;
    let mut breakdown = false;

    for j in 0..iters {
        let mut w = op.apply(&v)?;
        let alpha = dot(&v, &w);
        alphas.push(alpha);
        for i in 0..d {
            w[i] -= alpha * v[i] + beta_prev * v_prev[i];
        }
        // Full reorthogonalization; the second pass mops up what the first
        // leaves behind when w is nearly in the span of the basis.
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                for i in 0..d {
                    w[i] -= c * q[i];
                }
            }
        }
        let beta = norm(&w);
        final_beta = beta;
        if j + 1 == iters {
            break;
        }
        if beta < BREAKDOWN_TOL {
            breakdown = true;
            break;
        }
        betas.push(beta);
        v_prev = std::mem::replace(&mut v, w);
        for x in &mut v {
            *x /= beta;
        }
        basis.push(v.clone());
        beta_prev = beta;
    }

    let m = alphas.len();
    let (mut ritz, vectors) = tridiagonal_eigen(&alphas, &betas)?;

    // Pair each Ritz value with its residual |beta_m * (last eigvec row)|.
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| (ritz[i], (final_beta * vectors[m - 1][i]).abs()))
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    ritz = pairs.iter().map(|p| p.0).collect();
    let residuals: Vec<f64> = pairs.iter().map(|p| p.1).collect();

    let take = k.min(m);
    let eigenvalues: Vec<f64> = ritz[..take].to_vec();
    let residuals = residuals[..take].to_vec();
    let ratio_1_5 = if eigenvalues.len() >= 5 && eigenvalues[4] != 0.0 {
        Some(eigenvalues[0] / eigenvalues[4])
    } else {
        None
    };

    Ok(SpectrumReport {
        eigenvalues,
        residuals,
        ratio_1_5,
        breakdown,
        iterations: m,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(a: &mut [f64]) {
    let n = norm(a).max(1e-300);
    for x in a {
        *x /= n;
    }
}

/// Implicit-shift QL eigendecomposition of a symmetric tridiagonal matrix.
///
/// Returns eigenvalues (unsorted) and the eigenvector matrix as rows of
/// components: `vectors[row][col]` is component `row` of eigenvector `col`.
fn tridiagonal_eigen(diag: &[f64], offdiag: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = diag.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty tridiagonal matrix".into()));
    }
    if offdiag.len() + 1 != n && !(n == 1 && offdiag.is_empty()) {
        return Err(Error::InvalidArgument(format!(
            "off-diagonal length {} does not fit dimension {n}",
            offdiag.len()
        )));
    }
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(offdiag);
    let mut z: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    for l in 0..n {
        let mut iterations = 0;
        'sweep: loop {
            // Look for a negligible off-diagonal to split at.
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > 64 {
                return Err(Error::Numerical(
                    "tridiagonal QL failed to converge in 64 sweeps".into(),
                ));
            }
            // Wilkinson-style shift from the 2x2 at l.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0f64, 1.0f64);
            let mut p = 0.0;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    continue 'sweep;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for row in z.iter_mut() {
                    f = row[i + 1];
                    row[i + 1] = s * row[i] + c * f;
                    row[i] = c * row[i] - s * f;
                }
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok((d, z))
}
