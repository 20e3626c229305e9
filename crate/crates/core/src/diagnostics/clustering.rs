use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const KMEANS_MAX_ITER: usize = 300;
pub const KMEANS_REL_TOL: f64 = 1e-6;

/// One Lloyd run.
#[derive(Clone, Debug, PartialEq)]
pub struct KMeansFit {
    pub labels: Vec<usize>,
    pub centroids: Array2<f64>,
    pub inertia: f64,
    pub iterations: usize,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Random generator for run `run` under `seed`; runs are independent streams.
fn run_rng(seed: u64, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    rng
}

fn plus_plus(x: ArrayView2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = x.nrows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), x.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                if target < d {
                    pick = Some(i);
                    break;
                }
                target -= d;
                pick = Some(i);
            }
            pick.expect("positive total has a positive entry")
        } else {
            // Every point coincides with a centre; take an unused index.
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), x.row(next)));
        }
    }
    let mut c = Array2::zeros((k, x.ncols()));
    for (j, &i) in chosen.iter().enumerate() {
        c.row_mut(j).assign(&x.row(i));
    }
    c
}

/// Nearest centroid for every point (lowest index on ties) and the inertia.
fn assign(x: ArrayView2<f64>, c: &Array2<f64>, labels: &mut [usize], dists: &mut [f64]) -> f64 {
    let mut inertia = 0.0;
    for i in 0..x.nrows() {
        let mut best = 0;
        let mut bd = f64::INFINITY;
        for j in 0..c.nrows() {
            let d = sq_dist(x.row(i), c.row(j));
            if d < bd {
                bd = d;
                best = j;
            }
        }
        labels[i] = best;
        dists[i] = bd;
        inertia += bd;
    }
    inertia
}

/// A single k-means++ seeded Lloyd run.
pub fn kmeans_single(features: ArrayView2<f64>, k: usize, seed: u64, run: usize) -> Result<KMeansFit> {
    let n = features.nrows();
    if k < 2 {
        return Err(Error::invalid("k must be at least 2"));
    }
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds the {n} samples")));
    }
    let mut rng = run_rng(seed, run);
    let mut centroids = plus_plus(features, k, &mut rng);
    let mut labels = vec![0usize; n];
    let mut dists = vec![0.0; n];
    let mut inertia = assign(features, &centroids, &mut labels, &mut dists);
    let mut iterations = 0;
    while iterations < KMEANS_MAX_ITER {
        iterations += 1;
        let mut sums = Array2::<f64>::zeros(centroids.raw_dim());
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            sums.row_mut(l).scaled_add(1.0, &features.row(i));
            counts[l] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                centroids.row_mut(j).assign(&(&sums.row(j) / counts[j] as f64));
            } else {
                // Re-seed an empty cluster at the point farthest from its centre.
                let far = (0..n)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .expect("n >= k >= 2");
                centroids.row_mut(j).assign(&features.row(far));
                dists[far] = 0.0;
            }
        }
        let next = assign(features, &centroids, &mut labels, &mut dists);
        let change = (inertia - next).abs();
        inertia = next;
        if inertia == 0.0 || change <= KMEANS_REL_TOL * inertia {
            break;
        }
    }
    Ok(KMeansFit {
        labels,
        centroids,
        inertia,
        iterations,
    })
}

/// `runs` independent k-means labelings; run `r` depends only on `(seed, r)`.
pub fn kmeans(features: ArrayView2<f64>, k: usize, runs: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    Ok(kmeans_fits(features, k, runs, seed)?
        .into_iter()
        .map(|f| f.labels)
        .collect())
}

pub fn kmeans_fits(features: ArrayView2<f64>, k: usize, runs: usize, seed: u64) -> Result<Vec<KMeansFit>> {
    if runs == 0 {
        return Err(Error::invalid("runs must be at least 1"));
    }
    (0..runs)
        .into_par_iter()
        .map(|r| kmeans_single(features, k, seed, r))
        .collect()
}
