//! Dense linear-algebra helpers shared by the pipeline and the oracles.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use ndarray_linalg::{Eig, Eigh, UPLO};

use crate::error::{Error, Result};

pub use ndarray_linalg::c64;

/// Eigendecomposition of a symmetric matrix, eigenvalues in descending order.
///
/// Only the lower triangle of `a` is read.
pub fn sym_eigen(a: ArrayView2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    check_square(a)?;
    if a.nrows() == 0 {
        return Ok((Array1::zeros(0), Array2::zeros((0, 0))));
    }
    let (vals, vecs) = a
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Solver(e.to_string()))?;
    let n = vals.len();
    let vals = Array1::from_iter((0..n).rev().map(|i| vals[i]));
    let vecs = vecs.slice(s![.., ..;-1]).to_owned();
    Ok((vals, vecs))
}

/// Eigenvalues only, descending.
pub fn sym_eigenvalues(a: ArrayView2<f64>) -> Result<Array1<f64>> {
    Ok(sym_eigen(a)?.0)
}

/// Dense real eigendecomposition of a general square matrix.
pub fn general_eigen(a: ArrayView2<f64>) -> Result<(Array1<c64>, Array2<c64>)> {
    check_square(a)?;
    if a.nrows() == 0 {
        return Ok((Array1::zeros(0), Array2::zeros((0, 0))));
    }
    a.to_owned()
        .eig()
        .map_err(|e| Error::Solver(e.to_string()))
}

/// Rank-revealing Cholesky with diagonal pivoting.
///
/// Returns `L` of shape `d x r` with rows in the original order such that
/// `L Lᵀ` reproduces `g` up to a Schur-complement remainder whose diagonal is
/// below `rel_tol * tr(g)`. Rows of `g` that are bitwise duplicates produce
/// bitwise-identical rows of `L`.
pub fn pivoted_cholesky(g: ArrayView2<f64>, rel_tol: f64) -> Result<Array2<f64>> {
    check_square(g)?;
    let d = g.nrows();
    let trace: f64 = g.diag().sum();
    if !trace.is_finite() {
        return Err(Error::Solver("non-finite Gram matrix".into()));
    }
    let mut resid: Vec<f64> = g.diag().to_vec();
    if let Some(&min) = resid.iter().min_by(|a, b| a.total_cmp(b)) {
        if min < -1e-10 * trace.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::NotPsd {
                min_eigenvalue: min,
            });
        }
    }
    let stop = rel_tol * trace.max(0.0);
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut used = vec![false; d];
    while cols.len() < d {
        let mut pivot = None;
        let mut best = f64::NEG_INFINITY;
        for (j, &r) in resid.iter().enumerate() {
            if !used[j] && r > best {
                best = r;
                pivot = Some(j);
            }
        }
        let p = match pivot {
            Some(p) if best > stop && best > 0.0 => p,
            _ => break,
        };
        let mut col: Vec<f64> = g.column(p).to_vec();
        for prev in &cols {
            let lp = prev[p];
            if lp != 0.0 {
                for (c, &l) in col.iter_mut().zip(prev) {
                    *c -= l * lp;
                }
            }
        }
        let cp = col[p];
        if !(cp > stop && cp > 0.0) {
            // Incremental residual overestimated this pivot; retire it.
            used[p] = true;
            resid[p] = cp;
            continue;
        }
        let scale = cp.sqrt();
        for c in col.iter_mut() {
            *c /= scale;
        }
        for (j, r) in resid.iter_mut().enumerate() {
            *r -= col[j] * col[j];
        }
        used[p] = true;
        cols.push(col);
    }
    let mut l = Array2::zeros((d, cols.len()));
    for (k, col) in cols.iter().enumerate() {
        l.column_mut(k).assign(&ArrayView1::from(col.as_slice()));
    }
    Ok(l)
}

/// Frobenius norm.
pub fn frobenius(a: ArrayView2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Spectral norm of a symmetric matrix.
pub fn sym_op_norm(a: ArrayView2<f64>) -> Result<f64> {
    let vals = sym_eigenvalues(a)?;
    Ok(vals.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

/// Submatrix `a[rows, cols]`.
pub fn submatrix(a: ArrayView2<f64>, rows: &[usize], cols: &[usize]) -> Array2<f64> {
    a.select(Axis(0), rows).select(Axis(1), cols)
}

pub fn dot(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.dot(&b)
}

pub fn norm(a: ArrayView1<f64>) -> f64 {
    a.dot(&a).sqrt()
}

fn check_square(a: ArrayView2<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    Ok(())
}
