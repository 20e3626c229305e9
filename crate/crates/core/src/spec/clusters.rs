use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::covariance::{check_maps, map_chunk, PairedSource};
use super::gamma::{orient, pair_order, GammaEigenpair};
use crate::error::{Error, Result};
use crate::io::PairedDataset;
use crate::kernels::FeatureMap;

/// Pre-normalization norm below which a mapped vector is treated as null.
pub const NULL_NORM: f64 = 1e-12;

/// Eigenvalues at or below this magnitude are not reported as clusters.
pub const ZERO_EIGENVALUE: f64 = 1e-10;

const MAP_CHUNK: usize = 4096;

/// An eigenpair of `Γ` together with its sample-space image.
#[derive(Clone, Debug, PartialEq)]
pub struct SpecEigenpair {
    pub lambda: f64,
    pub v: Array1<f64>,
    pub u: Array1<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// Positive eigenvalue: grouped by the first embedding, not the second.
    A,
    /// Negative eigenvalue: grouped by the second embedding, not the first.
    B,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub rank: usize,
    pub eigenvalue: f64,
    pub side: Side,
    pub sample_ids: Vec<String>,
    pub weights: Vec<f64>,
    #[serde(skip)]
    pub indices: Vec<usize>,
}

/// Maps `Γ`-space eigenvectors to unit sample-space vectors `u = [Φ₁ Φ₂] v`.
pub fn map_eigenvectors(
    paired: &PairedDataset,
    map1: &FeatureMap,
    map2: &FeatureMap,
    pairs: &[GammaEigenpair],
) -> Result<Vec<SpecEigenpair>> {
    map_eigenvectors_source(paired, map1, map2, pairs)
}

/// [`map_eigenvectors`] over any [`PairedSource`], one pass over the rows.
pub fn map_eigenvectors_source<S: PairedSource + ?Sized>(
    source: &S,
    map1: &FeatureMap,
    map2: &FeatureMap,
    pairs: &[GammaEigenpair],
) -> Result<Vec<SpecEigenpair>> {
    check_maps(source, map1, map2)?;
    let (d1, d2) = (map1.output_dim(), map2.output_dim());
    let k = pairs.len();
    let mut v1 = Array2::zeros((d1, k));
    let mut v2 = Array2::zeros((d2, k));
    for (j, p) in pairs.iter().enumerate() {
        if p.v.len() != d1 + d2 {
            return Err(Error::DimensionMismatch {
                expected: d1 + d2,
                found: p.v.len(),
            });
        }
        v1.column_mut(j).assign(&p.v.slice(ndarray::s![..d1]));
        v2.column_mut(j).assign(&p.v.slice(ndarray::s![d1..]));
    }
    let n = source.n();
    let mut u = Array2::zeros((n, k));
    let mut start = 0;
    while start < n {
        let end = (start + MAP_CHUNK).min(n);
        let (f1, f2) = map_chunk(source, start..end, map1, map2)?;
        let block = f1.dot(&v1) + f2.dot(&v2);
        u.slice_mut(ndarray::s![start..end, ..]).assign(&block);
        start = end;
    }

    let mut out = Vec::with_capacity(k);
    for (j, p) in pairs.iter().enumerate() {
        let mut col = u.column(j).to_owned();
        let norm = col.dot(&col).sqrt();
        if !(norm >= NULL_NORM) {
            continue;
        }
        col /= norm;
        orient(&mut col);
        out.push(SpecEigenpair {
            lambda: p.lambda,
            v: p.v.clone(),
            u: col,
        });
    }
    // Λ has rank at most n.
    if out.len() > n {
        out.sort_by(|a, b| b.lambda.abs().total_cmp(&a.lambda.abs()));
        out.truncate(n);
    }
    out.sort_by(|a, b| pair_order(a.lambda, a.u.view(), b.lambda, b.u.view()));
    Ok(out)
}

/// Indices of the `r` largest entries of `u`, lower index first on ties.
pub fn top_entries(u: &Array1<f64>, r: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..u.len()).collect();
    idx.sort_by(|&a, &b| u[b].total_cmp(&u[a]).then(a.cmp(&b)));
    idx.truncate(r);
    idx
}

/// Top-`r` samples of the `top_k` most positive (side A) and `top_k` most
/// negative (side B) eigenpairs. `pairs` must be sorted by descending λ.
pub fn extract_clusters(
    pairs: &[SpecEigenpair],
    top_k: usize,
    top_r: usize,
    ids: &[String],
) -> Result<Vec<ClusterReport>> {
    if top_k == 0 || top_r == 0 {
        return Err(Error::invalid("top_k and top_r must be at least 1"));
    }
    let positive = pairs.iter().filter(|p| p.lambda > ZERO_EIGENVALUE).take(top_k);
    let negative = pairs
        .iter()
        .rev()
        .filter(|p| p.lambda < -ZERO_EIGENVALUE)
        .take(top_k);
    let mut out = Vec::new();
    for (side, iter) in [(Side::A, positive.collect::<Vec<_>>()), (Side::B, negative.collect())] {
        for (rank, p) in iter.into_iter().enumerate() {
            if p.u.len() != ids.len() {
                return Err(Error::CountMismatch {
                    a: p.u.len(),
                    b: ids.len(),
                });
            }
            let indices = top_entries(&p.u, top_r);
            out.push(ClusterReport {
                rank: rank + 1,
                eigenvalue: p.lambda,
                side,
                sample_ids: indices.iter().map(|&i| ids[i].clone()).collect(),
                weights: indices.iter().map(|&i| p.u[i]).collect(),
                indices,
            });
        }
    }
    Ok(out)
}
