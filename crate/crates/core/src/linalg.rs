//! Small dense helpers shared by the sampling and ambiguity code.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Eigenvalues below `-tol` are reported; those in `[-tol, 0)` are zeroed.
pub const PSD_TOL: f64 = 1e-10;

/// Symmetrises `m` and zeroes negative eigenvalues no larger in magnitude
/// than [`PSD_TOL`] (scaled by the matrix size). Larger negative eigenvalues
/// are an error.
pub fn psd_clip(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    if sym.nrows() == 0 {
        return Ok(sym);
    }
    let scale = sym.diagonal().iter().map(|v| v.abs()).fold(1.0, f64::max);
    let eig = sym.clone().symmetric_eigen();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min >= 0.0 {
        return Ok(sym);
    }
    if min < -PSD_TOL * scale {
        return Err(Error::NotPsd { eigenvalue: min });
    }
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let q = &eig.eigenvectors;
    let out = q * DMatrix::from_diagonal(&clipped) * q.transpose();
    Ok((&out + out.transpose()) * 0.5)
}

/// Lower-triangular `L` with `L L' = m` for a PSD matrix. Pivots that fall to
/// zero (within rounding) leave their column zero instead of failing, so
/// rank-deficient matrices are accepted.
pub fn psd_cholesky(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    let scale = m.diagonal().iter().map(|v| v.abs()).fold(0.0, f64::max);
    let tiny = 1e-14 * scale.max(f64::MIN_POSITIVE);
    for j in 0..n {
        let d = m[(j, j)] - (0..j).map(|k| l[(j, k)] * l[(j, k)]).sum::<f64>();
        if d <= tiny {
            continue;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let s = m[(i, j)] - (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum::<f64>();
            l[(i, j)] = s / ljj;
        }
    }
    l
}

/// Column means and unbiased covariance of `rows` (each row one observation).
pub fn mean_covariance(rows: &[Vec<f64>]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::TooFewSamples { need: 2, got: n });
    }
    let w = rows[0].len();
    let mut mean = DVector::<f64>::zeros(w);
    for r in rows {
        for (k, v) in r.iter().enumerate() {
            mean[k] += v;
        }
    }
    mean /= n as f64;
    let mut cov = DMatrix::<f64>::zeros(w, w);
    for r in rows {
        for a in 0..w {
            let da = r[a] - mean[a];
            for b in a..w {
                cov[(a, b)] += da * (r[b] - mean[b]);
            }
        }
    }
    for a in 0..w {
        for b in a..w {
            let v = cov[(a, b)] / (n - 1) as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok((mean, cov))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_of_rank_one_matrix() {
        let v = DVector::from_vec(vec![1.0, 2.0, -1.0]);
        let m = &v * v.transpose();
        let l = psd_cholesky(&m);
        assert!((&l * l.transpose() - &m).abs().max() < 1e-12);
    }

    #[test]
    fn clip_rejects_clearly_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(psd_clip(&m), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn covariance_of_two_points() {
        let (m, c) = mean_covariance(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(m.as_slice(), &[0.5, 0.5]);
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]));
    }
}
