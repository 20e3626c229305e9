use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::PairedDataset;
use crate::kernels::{build_feature_map, exact_kernel_matrix, KernelSpec};
use crate::linalg::sym_eigen;
use crate::spec::DEFAULT_ORACLE_CAP;

/// Eigenvector residual of the random-feature proxy against the exact
/// Gaussian difference matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RffResidualReport {
    pub n: usize,
    pub m: usize,
    pub delta: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub seed: u64,
    /// `Σᵢ ‖Λ v̂ᵢ − λ̂ᵢ v̂ᵢ‖²` over a full eigenbasis of `Λ̂`.
    pub residual_sum: f64,
    /// `128 ln(2/δ) / m`.
    pub bound: f64,
    pub satisfied: bool,
}

/// `128 ln(2/δ) / m`.
pub fn rff_bound(m: usize, delta: f64) -> f64 {
    128.0 * (2.0 / delta).ln() / m as f64
}

/// Compares the exact Gaussian `Λ` with its `m`-frequency approximation `Λ̂`.
///
/// Both sides use frequencies drawn from `seed`. The sum runs over all `n`
/// eigenvectors of the dense `Λ̂`, including its null space, so it equals
/// `‖Λ − Λ̂‖_F²` up to rounding.
pub fn rff_residual(
    paired: &PairedDataset,
    sigma1: f64,
    sigma2: f64,
    m: usize,
    delta: f64,
    seed: u64,
) -> Result<RffResidualReport> {
    let n = paired.n();
    if n > DEFAULT_ORACLE_CAP {
        return Err(Error::CapExceeded {
            n,
            cap: DEFAULT_ORACLE_CAP,
        });
    }
    if m == 0 {
        return Err(Error::invalid("m must be at least 1"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    let spec1 = KernelSpec::gaussian_rff(sigma1, m, seed);
    let spec2 = KernelSpec::gaussian_rff(sigma2, m, seed);
    let nf = n as f64;

    let exact = (exact_kernel_matrix(paired.a().data(), &spec1)? - exact_kernel_matrix(paired.b().data(), &spec2)?) / nf;

    let f1 = build_feature_map(&spec1, paired.a().d())?.apply_rows(paired.a().data())?;
    let f2 = build_feature_map(&spec2, paired.b().d())?.apply_rows(paired.b().data())?;
    let mut approx = (f1.dot(&f1.t()) - f2.dot(&f2.t())) / nf;
    let t = approx.t().to_owned();
    approx = (approx + t) * 0.5;

    let (vals, vecs) = sym_eigen(approx.view())?;
    let mut resid = exact.dot(&vecs);
    for (k, &l) in vals.iter().enumerate() {
        let v = vecs.column(k);
        resid.column_mut(k).scaled_add(-l, &v);
    }
    let residual_sum: f64 = resid.iter().map(|x| x * x).sum();
    let bound = rff_bound(m, delta);
    Ok(RffResidualReport {
        n,
        m,
        delta,
        sigma1,
        sigma2,
        seed,
        residual_sum,
        bound,
        satisfied: residual_sum <= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{pair, EmbeddingSet};
    use ndarray::Array2;

    #[test]
    fn bound_value() {
        assert!((rff_bound(2000, 0.05) - 0.2361).abs() < 1e-4);
    }

    #[test]
    fn residual_matches_frobenius_gap() {
        let data = Array2::from_shape_fn((40, 3), |(i, j)| ((i * 5 + j * 11) as f64 * 0.37).sin() * 2.0);
        let set = EmbeddingSet::with_default_ids(data).unwrap();
        let p = pair(set.clone(), set).unwrap();
        let r = rff_residual(&p, 1.0, 1.0, 50, 0.05, 3).unwrap();
        // Identical sides: Λ = 0 and Λ̂ = 0, so the residual vanishes.
        assert!(r.residual_sum < 1e-20);
        assert!(r.satisfied);
        assert!(rff_residual(&p, 1.0, 1.0, 50, 1.5, 3).is_err());
        assert!(rff_residual(&p, 1.0, 1.0, 0, 0.05, 3).is_err());
    }
}
