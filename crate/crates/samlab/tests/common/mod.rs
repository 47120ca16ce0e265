//! Independent numerical oracles for the integration tests.
//!
//! Nothing here shares code with the library's own numerics: the
//! eigensolver is cyclic Jacobi (the library uses Lanczos + tridiagonal
//! QL), and derivatives come from central differences of scalar losses.

#![allow(dead_code)]

/// All eigenvalues of a symmetric `n x n` matrix (row-major), sorted
/// descending, via cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(matrix: &[f64], n: usize) -> Vec<f64> {
    assert_eq!(matrix.len(), n * n);
    let mut a = matrix.to_vec();
    let frobenius: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i * n + j] * a[i * n + j];
            }
        }
        if off.sqrt() <= 1e-15 * frobenius.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    eig.sort_by(|x, y| y.partial_cmp(x).unwrap());
    eig
}

/// Central-difference gradient of a scalar function.
pub fn finite_diff_grad<F: FnMut(&[f64]) -> f64>(mut f: F, point: &[f64], h: f64) -> Vec<f64> {
    let mut shifted = point.to_vec();
    let mut grad = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        shifted[i] = point[i] + h;
        let plus = f(&shifted);
        shifted[i] = point[i] - h;
        let minus = f(&shifted);
        shifted[i] = point[i];
        grad.push((plus - minus) / (2.0 * h));
    }
    grad
}

#[cfg(test)]
mod self_checks {
    use super::*;

    #[test]
    fn jacobi_recovers_diagonal() {
        let m = vec![3.0, 0.0, 0.0, 1.0];
        let eig = jacobi_eigenvalues(&m, 2);
        assert!((eig[0] - 3.0).abs() < 1e-12);
        assert!((eig[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_recovers_2x2_offdiagonal() {
        // [[2,1],[1,2]]: eigenvalues 3 and 1.
        let m = vec![2.0, 1.0, 1.0, 2.0];
        let eig = jacobi_eigenvalues(&m, 2);
        assert!((eig[0] - 3.0).abs() < 1e-12);
        assert!((eig[1] - 1.0).abs() < 1e-12);
    }
}
