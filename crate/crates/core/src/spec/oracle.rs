use ndarray::{Array1, Array2};

use super::gamma::{orient, pair_order};
use crate::error::{Error, Result};
use crate::io::PairedDataset;
use crate::kernels::{kernel_matrix, FeatureMap};
use crate::linalg::sym_eigen;

/// Default sample cap for the dense `n x n` path.
pub const DEFAULT_ORACLE_CAP: usize = 2000;

/// An eigenpair of the dense difference matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct OraclePair {
    pub lambda: f64,
    pub u: Array1<f64>,
}

/// `Λ = (K₁ − K₂)/n` built from explicit kernel matrices.
pub fn difference_matrix(paired: &PairedDataset, map1: &FeatureMap, map2: &FeatureMap) -> Result<Array2<f64>> {
    let n = paired.n() as f64;
    let k1 = kernel_matrix(paired.a().data(), map1)?;
    let k2 = kernel_matrix(paired.b().data(), map2)?;
    let mut lam = (k1 - k2) / n;
    let t = lam.t().to_owned();
    lam = (lam + t) * 0.5;
    Ok(lam)
}

/// All `n` eigenpairs of `Λ`, sorted by descending eigenvalue, with the same
/// sign convention as the streaming path.
pub fn spec_direct_oracle(paired: &PairedDataset, map1: &FeatureMap, map2: &FeatureMap) -> Result<Vec<OraclePair>> {
    spec_direct_oracle_with_cap(paired, map1, map2, DEFAULT_ORACLE_CAP)
}

pub fn spec_direct_oracle_with_cap(
    paired: &PairedDataset,
    map1: &FeatureMap,
    map2: &FeatureMap,
    cap: usize,
) -> Result<Vec<OraclePair>> {
    if paired.n() > cap {
        return Err(Error::CapExceeded { n: paired.n(), cap });
    }
    let lam = difference_matrix(paired, map1, map2)?;
    let (vals, vecs) = sym_eigen(lam.view())?;
    let mut out: Vec<OraclePair> = vals
        .iter()
        .zip(vecs.columns())
        .map(|(&lambda, col)| {
            let mut u = col.to_owned();
            orient(&mut u);
            OraclePair { lambda, u }
        })
        .collect();
    out.sort_by(|a, b| pair_order(a.lambda, a.u.view(), b.lambda, b.u.view()));
    Ok(out)
}
