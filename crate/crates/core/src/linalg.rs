//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Lower Cholesky factor `L` with `A = L L^T`. Reports the first leading
/// minor (1-based) that is not positive.
pub fn cholesky(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension {
            context: "cholesky (square matrix)",
            expected: n,
            actual: a.ncols(),
        });
    }
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite { minor: j + 1 });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Inverse of an SPD matrix through its Cholesky factor. The result is
/// symmetrized.
pub fn spd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let l = cholesky(a)?;
    let n = a.nrows();
    // L^{-1} by forward substitution, then A^{-1} = L^{-T} L^{-1}.
    let mut linv = DMatrix::<f64>::zeros(n, n);
    for col in 0..n {
        for i in col..n {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in col..i {
                s -= l[(i, k)] * linv[(k, col)];
            }
            linv[(i, col)] = s / l[(i, i)];
        }
    }
    let inv = linv.transpose() * &linv;
    Ok(symmetrize(&inv))
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

pub fn outer(a: &DVector<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    a * b.transpose()
}

/// Row-major upper triangle (including the diagonal), `n(n+1)/2` entries.
pub fn upper_triangle(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            out.push(a[(i, j)]);
        }
    }
    out
}

pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> DVector<f64> {
    symmetrize(a).symmetric_eigenvalues()
}
