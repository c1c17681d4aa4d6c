//! Small dense kernels on column slices.
//!
//! Solvers in this crate work column by column, so design matrices are kept
//! in column-major order and these helpers operate on plain `&[f64]`.

use ndarray::Array2;

use crate::error::{Error, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "cholesky needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::SingularDesign);
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in j + 1..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / d;
        }
    }
    Ok(l)
}

/// Solves `A x = b` given the lower Cholesky factor of `A`.
pub fn cholesky_solve(l: &Array2<f64>, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut z = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            z[i] -= l[[i, k]] * z[k];
        }
        z[i] /= l[[i, i]];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            z[i] -= l[[k, i]] * z[k];
        }
        z[i] /= l[[i, i]];
    }
    z
}

/// Least-squares solution of `min ||y - A x||` with `A` given by its columns,
/// via Householder QR.
///
/// Fails with [`Error::SingularDesign`] when a diagonal entry of R is
/// negligible relative to the largest one, which covers duplicated and
/// collinear columns.
pub fn least_squares(columns: &[&[f64]], y: &[f64]) -> Result<Vec<f64>> {
    let k = columns.len();
    let n = y.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    if k > n {
        return Err(Error::SingularDesign);
    }
    let mut a: Vec<Vec<f64>> = columns.iter().map(|c| c.to_vec()).collect();
    let mut rhs = y.to_vec();
    let mut diag = vec![0.0; k];

    for j in 0..k {
        let norm = a[j][j..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            diag[j] = 0.0;
            continue;
        }
        let alpha = if a[j][j] > 0.0 { -norm } else { norm };
        // v = x - alpha e1, stored in place of the column tail
        let mut v: Vec<f64> = a[j][j..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        diag[j] = alpha;
        if vnorm2 == 0.0 {
            continue;
        }
        for col in a.iter_mut().skip(j + 1) {
            let s = 2.0 * dot(&v, &col[j..]) / vnorm2;
            for (ci, vi) in col[j..].iter_mut().zip(&v) {
                *ci -= s * vi;
            }
        }
        let s = 2.0 * dot(&v, &rhs[j..]) / vnorm2;
        for (ri, vi) in rhs[j..].iter_mut().zip(&v) {
            *ri -= s * vi;
        }
    }

    let scale = diag.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    if scale == 0.0 || diag.iter().any(|d| d.abs() <= 1e-10 * scale) {
        return Err(Error::SingularDesign);
    }

    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = rhs[i];
        for (jj, xj) in x.iter().enumerate().skip(i + 1) {
            s -= a[jj][i] * xj;
        }
        x[i] = s / diag[i];
    }
    Ok(x)
}
