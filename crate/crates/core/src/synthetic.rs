//! Seeded synthetic data for demos, benchmarks and tests.

use ndarray::{Array2, Axis};
use ndarray_linalg::QR;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::io::{pair, EmbeddingSet, PairedDataset};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n x d` matrix of i.i.d. standard normal entries.
pub fn gaussian_matrix(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut r = rng(seed);
    gaussian_with(&mut r, n, d)
}

fn gaussian_with(r: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, d), || StandardNormal.sample(&mut *r))
}

/// Haar-distributed orthogonal `d x d` matrix.
pub fn random_orthogonal(d: usize, seed: u64) -> Result<Array2<f64>> {
    let g = gaussian_matrix(d, d, seed);
    let (mut q, r) = g.qr().map_err(|e| Error::Solver(e.to_string()))?;
    for j in 0..d {
        if r[[j, j]] < 0.0 {
            q.column_mut(j).mapv_inplace(|x| -x);
        }
    }
    Ok(q)
}

/// Rows scaled to unit Euclidean norm.
pub fn normalize_rows(mut x: Array2<f64>) -> Array2<f64> {
    for mut row in x.rows_mut() {
        let n = row.dot(&row).sqrt();
        if n > 0.0 {
            row /= n;
        }
    }
    x
}

/// Two embeddings where the first isolates a planted block and the second
/// is isotropic noise.
#[derive(Clone, Debug)]
pub struct PlantedInstance {
    pub paired: PairedDataset,
    /// Sorted indices of the planted block.
    pub block: Vec<usize>,
}

/// Embedding A places the block near `3·e₀` and every other sample on the
/// unit sphere of the coordinates orthogonal to `e₀`; embedding B is
/// `N(0, I_d)` for all samples.
///
/// Under a normalized kernel the block is the leading direction of A only
/// when `block_fraction > (1 − block_fraction)/(d − 1)`; with a 10% block
/// that needs `d ≥ 11`.
pub fn planted_instance(n: usize, block_fraction: f64, d: usize, seed: u64) -> Result<PlantedInstance> {
    if d < 2 {
        return Err(Error::invalid("planted instance needs d >= 2"));
    }
    let size = (block_fraction * n as f64).round() as usize;
    if size == 0 || size >= n {
        return Err(Error::invalid("block must be a nonempty proper subset"));
    }
    let mut r = rng(seed);
    let mut block: Vec<usize> = sample(&mut r, n, size).into_vec();
    block.sort_unstable();
    let mut in_block = vec![false; n];
    for &i in &block {
        in_block[i] = true;
    }
    let mut a = Array2::zeros((n, d));
    for (i, mut row) in a.axis_iter_mut(Axis(0)).enumerate() {
        if in_block[i] {
            row[0] = 3.0;
            for j in 1..d {
                let z: f64 = StandardNormal.sample(&mut r);
                row[j] = 0.05 * z;
            }
        } else {
            let mut norm = 0.0;
            for j in 1..d {
                let z: f64 = StandardNormal.sample(&mut r);
                row[j] = z;
                norm += z * z;
            }
            row.mapv_inplace(|x| x / norm.sqrt());
        }
    }
    let b = gaussian_with(&mut r, n, d);
    let paired = pair(EmbeddingSet::with_default_ids(a)?, EmbeddingSet::with_default_ids(b)?)?;
    Ok(PlantedInstance { paired, block })
}

/// `n` points around `centers` random centres with coordinates `N(0, spread²)`,
/// each point perturbed by `N(0, 1)` noise. Returns the points and their centre labels.
pub fn gaussian_blobs(n: usize, d: usize, centers: usize, spread: f64, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let mut r = rng(seed);
    let c = gaussian_with(&mut r, centers.max(1), d) * spread;
    let mut x = gaussian_with(&mut r, n, d);
    let mut labels = Vec::with_capacity(n);
    for mut row in x.rows_mut() {
        let l = r.random_range(0..centers.max(1));
        row += &c.row(l);
        labels.push(l);
    }
    (x, labels)
}

/// Unit-diagonal PSD kernel matrix `F Fᵀ` from `n` random unit vectors in
/// `rank` dimensions.
pub fn random_unit_kernel(n: usize, rank: usize, seed: u64) -> Array2<f64> {
    let f = normalize_rows(gaussian_matrix(n, rank, seed));
    let mut k = f.dot(&f.t());
    k.diag_mut().fill(1.0);
    k
}
