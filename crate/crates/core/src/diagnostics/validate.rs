use ndarray::{Array1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::clustering::kmeans;
use super::metrics::{ami, nmi};
use crate::error::{Error, Result};
use crate::io::{LabelVector, PairedDataset};
use crate::spec::{Side, SpecResult};

/// Agreement of the side-A clusters with k-means on each embedding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterValidation {
    pub k: usize,
    pub runs: usize,
    pub ami_a: f64,
    pub ami_b: f64,
    pub nmi_a: f64,
    pub nmi_b: f64,
    pub centroid_rankings: Vec<CentroidRanking>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<LabelAgreement>,
}

/// Cosine similarity to a cluster's centroid, per embedding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CentroidRanking {
    pub rank: usize,
    pub size: usize,
    pub in_mean_a: f64,
    pub out_mean_a: f64,
    /// Fraction of the `size` most centroid-similar samples that are members.
    pub precision_a: f64,
    pub in_mean_b: f64,
    pub out_mean_b: f64,
    pub precision_b: f64,
}

/// SPEC labels against externally supplied labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelAgreement {
    pub ami: f64,
    pub nmi: f64,
}

/// Label `r` for members of the side-A cluster of rank `r`, 0 for the rest.
/// A sample in several clusters keeps the lowest rank.
pub fn spec_labels(result: &SpecResult, n: usize) -> Result<Vec<usize>> {
    let mut labels = vec![0usize; n];
    let mut any = false;
    for c in result.clusters.iter().filter(|c| c.side == Side::A) {
        any = true;
        for &i in &c.indices {
            if i >= n {
                return Err(Error::invalid(format!("cluster index {i} out of range")));
            }
            if labels[i] == 0 {
                labels[i] = c.rank;
            }
        }
    }
    if !any {
        return Err(Error::NoClusters);
    }
    Ok(labels)
}

fn mean_scores(features: ArrayView2<f64>, labels: &[usize], k: usize, runs: usize, seed: u64) -> Result<(f64, f64)> {
    let fits = kmeans(features, k, runs, seed)?;
    let mut a = 0.0;
    let mut n = 0.0;
    for f in &fits {
        a += ami(labels, f)?;
        n += nmi(labels, f)?;
    }
    let r = fits.len() as f64;
    Ok((a / r, n / r))
}

fn centroid_stats(features: ArrayView2<f64>, members: &[usize]) -> (f64, f64, f64) {
    let n = features.nrows();
    let centroid: Array1<f64> = features.select(Axis(0), members).mean_axis(Axis(0)).expect("nonempty cluster");
    let cn = centroid.dot(&centroid).sqrt();
    let sims: Vec<f64> = features
        .rows()
        .into_iter()
        .map(|r| {
            let rn = r.dot(&r).sqrt();
            if rn == 0.0 || cn == 0.0 {
                0.0
            } else {
                r.dot(&centroid) / (rn * cn)
            }
        })
        .collect();
    let mut is_member = vec![false; n];
    for &i in members {
        is_member[i] = true;
    }
    let (mut sin, mut sout, mut nout) = (0.0, 0.0, 0usize);
    for (i, &s) in sims.iter().enumerate() {
        if is_member[i] {
            sin += s;
        } else {
            sout += s;
            nout += 1;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sims[b].total_cmp(&sims[a]).then(a.cmp(&b)));
    let hits = order[..members.len()].iter().filter(|&&i| is_member[i]).count();
    let out_mean = if nout == 0 { 0.0 } else { sout / nout as f64 };
    (sin / members.len() as f64, out_mean, hits as f64 / members.len() as f64)
}

/// Averages AMI and NMI of the SPEC labeling against `runs` k-means
/// labelings of each embedding's raw features.
pub fn validate_clusters(
    result: &SpecResult,
    paired: &PairedDataset,
    k: usize,
    runs: usize,
    seed: u64,
) -> Result<ClusterValidation> {
    let n = paired.n();
    let labels = spec_labels(result, n)?;
    let (ami_a, nmi_a) = mean_scores(paired.a().data(), &labels, k, runs, seed)?;
    let (ami_b, nmi_b) = mean_scores(paired.b().data(), &labels, k, runs, seed)?;
    let centroid_rankings = result
        .clusters
        .iter()
        .filter(|c| c.side == Side::A && !c.indices.is_empty())
        .map(|c| {
            let (in_mean_a, out_mean_a, precision_a) = centroid_stats(paired.a().data(), &c.indices);
            let (in_mean_b, out_mean_b, precision_b) = centroid_stats(paired.b().data(), &c.indices);
            CentroidRanking {
                rank: c.rank,
                size: c.indices.len(),
                in_mean_a,
                out_mean_a,
                precision_a,
                in_mean_b,
                out_mean_b,
                precision_b,
            }
        })
        .collect();
    Ok(ClusterValidation {
        k,
        runs,
        ami_a,
        ami_b,
        nmi_a,
        nmi_b,
        centroid_rankings,
        reference: None,
    })
}

/// AMI and NMI of the SPEC labeling against given labels.
pub fn compare_with_labels(result: &SpecResult, labels: &LabelVector) -> Result<LabelAgreement> {
    let spec = spec_labels(result, labels.len())?;
    Ok(LabelAgreement {
        ami: ami(&spec, labels.labels())?,
        nmi: nmi(&spec, labels.labels())?,
    })
}
