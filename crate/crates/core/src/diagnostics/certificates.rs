use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{frobenius, submatrix, sym_eigen, sym_eigenvalues};

/// Slack for the PSD check: smallest eigenvalue ≥ `-PSD_TOL · max(1, λ_max)`.
pub const PSD_TOL: f64 = 1e-8;

/// Allowed deviation of kernel diagonal entries from 1.
pub const UNIT_DIAG_TOL: f64 = 1e-8;

/// Both sides of the block-separation inequality, measured from the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationCertificate {
    pub index_set: Vec<usize>,
    /// `‖K1[I, Iᶜ]‖_F / n`.
    pub eps1: f64,
    /// `‖K2[I, I]‖₂ / n`.
    pub eps2: f64,
    /// `4 (eps1² + eps2)`.
    pub xi: f64,
    pub lhs: f64,
    pub satisfied: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorollaryCheck {
    pub eigen_index: usize,
    pub eigenvalue: f64,
    /// `λ − λ_max(Λ[Iᶜ, Iᶜ])`.
    pub gap: f64,
    /// `2 √(eps1² + eps2) / gap`.
    pub bound: f64,
    /// `‖v[Iᶜ]‖₂` for the unit eigenvector.
    pub actual_tail_norm: f64,
    pub satisfied: bool,
}

/// Sorted, deduplicated index set and its complement.
pub(crate) fn split_indices(n: usize, index_set: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut inside: Vec<usize> = index_set.to_vec();
    inside.sort_unstable();
    inside.dedup();
    if let Some(&bad) = inside.iter().find(|&&i| i >= n) {
        return Err(Error::invalid(format!("index {bad} out of range for {n} samples")));
    }
    if inside.is_empty() || inside.len() == n {
        return Err(Error::invalid("index set must be a nonempty proper subset"));
    }
    let mut mask = vec![false; n];
    for &i in &inside {
        mask[i] = true;
    }
    let outside = (0..n).filter(|&i| !mask[i]).collect();
    Ok((inside, outside))
}

/// Rejects kernels that are not square, PSD and unit-diagonal.
pub fn check_kernel(k: ArrayView2<f64>) -> Result<()> {
    if k.nrows() != k.ncols() {
        return Err(Error::DimensionMismatch {
            expected: k.nrows(),
            found: k.ncols(),
        });
    }
    if let Some((i, &v)) = k.diag().iter().enumerate().find(|(_, v)| (*v - 1.0).abs() > UNIT_DIAG_TOL) {
        return Err(Error::invalid(format!("kernel diagonal entry {i} is {v}, expected 1")));
    }
    let vals = sym_eigenvalues(k)?;
    let max = vals.first().copied().unwrap_or(0.0);
    let min = vals.last().copied().unwrap_or(0.0);
    if min < -PSD_TOL * max.max(1.0) {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    Ok(())
}

struct Setup {
    inside: Vec<usize>,
    outside: Vec<usize>,
    eps1: f64,
    eps2: f64,
    lambda: Array2<f64>,
}

fn setup(k1: ArrayView2<f64>, k2: ArrayView2<f64>, index_set: &[usize]) -> Result<Setup> {
    check_kernel(k1)?;
    check_kernel(k2)?;
    if k1.nrows() != k2.nrows() {
        return Err(Error::CountMismatch {
            a: k1.nrows(),
            b: k2.nrows(),
        });
    }
    let n = k1.nrows();
    let (inside, outside) = split_indices(n, index_set)?;
    let nf = n as f64;
    let eps1 = frobenius(submatrix(k1, &inside, &outside).view()) / nf;
    let k2ii = submatrix(k2, &inside, &inside);
    let eps2 = sym_eigenvalues(k2ii.view())?.iter().fold(0.0f64, |m, v| m.max(v.abs())) / nf;
    let mut lambda = (&k1 - &k2) / nf;
    let t = lambda.t().to_owned();
    lambda = (lambda + t) * 0.5;
    Ok(Setup {
        inside,
        outside,
        eps1,
        eps2,
        lambda,
    })
}

/// Closest entry of `vals` to `x`; the smaller value wins ties.
fn nearest(vals: &Array1<f64>, x: f64) -> f64 {
    let mut best = f64::NAN;
    let mut dist = f64::INFINITY;
    for &v in vals.iter() {
        let d = (v - x).abs();
        if d < dist || (d == dist && v < best) {
            dist = d;
            best = v;
        }
    }
    best
}

/// Measures `eps1`, `eps2` on the kernels and evaluates
/// `Σᵢ (λᵢ − λᵢᴵ)² ‖vᵢ[I]‖² + (λᵢ − λᵢᴵᶜ)² ‖vᵢ[Iᶜ]‖²`, where `λᵢᴵ` is the
/// eigenvalue of `Λ[I, I]` closest to `λᵢ`.
///
/// With measured constants the inequality `lhs ≤ xi` always holds; a
/// `satisfied: false` result indicates a numerical or implementation fault.
pub fn theorem1_certificate(k1: ArrayView2<f64>, k2: ArrayView2<f64>, index_set: &[usize]) -> Result<SeparationCertificate> {
    let s = setup(k1, k2, index_set)?;
    let (vals, vecs) = sym_eigen(s.lambda.view())?;
    let in_vals = sym_eigenvalues(submatrix(s.lambda.view(), &s.inside, &s.inside).view())?;
    let out_vals = sym_eigenvalues(submatrix(s.lambda.view(), &s.outside, &s.outside).view())?;
    let mut lhs = 0.0;
    for (i, &l) in vals.iter().enumerate() {
        let v = vecs.column(i);
        let in_sq: f64 = s.inside.iter().map(|&j| v[j] * v[j]).sum();
        let out_sq: f64 = s.outside.iter().map(|&j| v[j] * v[j]).sum();
        lhs += (l - nearest(&in_vals, l)).powi(2) * in_sq + (l - nearest(&out_vals, l)).powi(2) * out_sq;
    }
    let xi = 4.0 * (s.eps1 * s.eps1 + s.eps2);
    Ok(SeparationCertificate {
        index_set: s.inside,
        eps1: s.eps1,
        eps2: s.eps2,
        xi,
        lhs,
        satisfied: lhs <= xi * (1.0 + 1e-9) + 1e-12,
    })
}

/// Tail bound `‖v[Iᶜ]‖ ≤ 2√(eps1² + eps2)/γ` for the eigenpair at
/// `eigen_index` (eigenvalues sorted descending).
///
/// Returns [`Error::CorollaryInapplicable`] when the gap is not positive.
pub fn corollary1_check(
    k1: ArrayView2<f64>,
    k2: ArrayView2<f64>,
    index_set: &[usize],
    eigen_index: usize,
) -> Result<CorollaryCheck> {
    let s = setup(k1, k2, index_set)?;
    let (vals, vecs) = sym_eigen(s.lambda.view())?;
    if eigen_index >= vals.len() {
        return Err(Error::invalid(format!(
            "eigen index {eigen_index} out of range for {} eigenpairs",
            vals.len()
        )));
    }
    let out_vals = sym_eigenvalues(submatrix(s.lambda.view(), &s.outside, &s.outside).view())?;
    let lambda = vals[eigen_index];
    let gap = lambda - out_vals[0];
    if !(gap > 0.0) {
        return Err(Error::CorollaryInapplicable { gap });
    }
    let v = vecs.column(eigen_index);
    let tail = s.outside.iter().map(|&j| v[j] * v[j]).sum::<f64>().sqrt();
    let bound = 2.0 * (s.eps1 * s.eps1 + s.eps2).sqrt() / gap;
    Ok(CorollaryCheck {
        eigen_index,
        eigenvalue: lambda,
        gap,
        bound,
        actual_tail_norm: tail,
        satisfied: tail <= bound * (1.0 + 1e-9) + 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identical_kernels_certify_with_zero_lhs() {
        let k = array![[1.0, 0.5, 0.1], [0.5, 1.0, 0.2], [0.1, 0.2, 1.0]];
        let c = theorem1_certificate(k.view(), k.view(), &[0]).unwrap();
        assert_eq!(c.lhs, 0.0);
        assert!(c.satisfied);
        assert!(matches!(
            corollary1_check(k.view(), k.view(), &[0], 0),
            Err(Error::CorollaryInapplicable { .. })
        ));
    }

    #[test]
    fn rejects_bad_inputs() {
        let k = Array2::<f64>::eye(3);
        assert!(theorem1_certificate(k.view(), k.view(), &[]).is_err());
        assert!(theorem1_certificate(k.view(), k.view(), &[0, 1, 2]).is_err());
        assert!(theorem1_certificate(k.view(), k.view(), &[5]).is_err());
        let not_psd = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(matches!(
            theorem1_certificate(not_psd.view(), not_psd.view(), &[0]),
            Err(Error::NotPsd { .. })
        ));
        let not_unit = array![[2.0, 0.0], [0.0, 1.0]];
        assert!(check_kernel(not_unit.view()).is_err());
    }

    #[test]
    fn nearest_prefers_smaller_on_tie() {
        assert_eq!(nearest(&array![1.0, 3.0], 2.0), 1.0);
        assert_eq!(nearest(&array![3.0, 1.0], 2.0), 1.0);
    }

    #[test]
    fn eps_values_are_measured() {
        // Two blocks {0,1} and {2,3} under K1; identity under K2.
        let k1 = array![[1.0, 1.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0], [0.0, 0.0, 1.0, 1.0]];
        let k2 = Array2::eye(4);
        let c = theorem1_certificate(k1.view(), k2.view(), &[1, 0]).unwrap();
        assert_eq!(c.index_set, vec![0, 1]);
        assert_eq!(c.eps1, 0.0);
        assert!((c.eps2 - 0.25).abs() < 1e-12);
        assert!(c.satisfied);
    }
}
