use std::cmp::Ordering;

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use super::covariance::DifferentialCovariance;
use crate::error::{Error, Result};
use crate::linalg::{frobenius, general_eigen, pivoted_cholesky, sym_eigen};

/// Relative truncation level for the rank-revealing factorization of `G`.
pub const CHOLESKY_REL_TOL: f64 = 1e-13;

/// Largest imaginary part, relative to `‖Γ‖_F`, tolerated from the general solver.
pub const IMAGINARY_REL_TOL: f64 = 1e-8;

/// The non-symmetric `(d₁+d₂)`-square matrix `[[C1, C12], [-C12ᵀ, -C2]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaMatrix {
    data: Array2<f64>,
    d1: usize,
}

impl GammaMatrix {
    /// Wraps a dense matrix after checking the block structure.
    pub fn from_dense(data: Array2<f64>, d1: usize) -> Result<Self> {
        if data.nrows() != data.ncols() || d1 > data.nrows() {
            return Err(Error::DimensionMismatch {
                expected: data.nrows(),
                found: data.ncols(),
            });
        }
        let g = GammaMatrix { data, d1 };
        if !g.blocks_consistent() {
            return Err(Error::invalid("matrix lacks the [[C1, C12], [-C12ᵀ, -C2]] structure"));
        }
        Ok(g)
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.data.nrows() - self.d1
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn frobenius(&self) -> f64 {
        frobenius(self.data.view())
    }

    /// `G = SΓ = [[C1, C12], [C12ᵀ, C2]]`, symmetric PSD when built from features.
    pub fn gram(&self) -> Array2<f64> {
        let mut g = self.data.clone();
        g.slice_mut(s![self.d1.., ..]).mapv_inplace(|x| -x);
        g
    }

    /// Exact block identities: symmetric diagonal blocks, off-diagonal
    /// blocks negated transposes of each other.
    pub fn blocks_consistent(&self) -> bool {
        let d1 = self.d1;
        let a = &self.data;
        let tl = a.slice(s![..d1, ..d1]);
        let br = a.slice(s![d1.., d1..]);
        let tr = a.slice(s![..d1, d1..]);
        let bl = a.slice(s![d1.., ..d1]);
        tl == tl.t() && br == br.t() && bl.iter().zip(tr.t().iter()).all(|(x, y)| *x == -*y)
    }
}

/// Assembles `Γ` from the covariance blocks.
pub fn build_gamma(cov: &DifferentialCovariance) -> GammaMatrix {
    let (d1, d2) = (cov.d1(), cov.d2());
    let mut data = Array2::zeros((d1 + d2, d1 + d2));
    data.slice_mut(s![..d1, ..d1]).assign(&cov.c1);
    data.slice_mut(s![..d1, d1..]).assign(&cov.c12);
    data.slice_mut(s![d1.., ..d1]).assign(&cov.c12.t().mapv(|x| -x));
    data.slice_mut(s![d1.., d1..]).assign(&cov.c2.mapv(|x| -x));
    let g = GammaMatrix { data, d1 };
    debug_assert!(g.blocks_consistent());
    g
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenStrategy {
    /// Dense real eigensolver applied to `Γ` directly.
    General,
    /// Symmetric eigenproblem `Lᵀ S L` where `G = L Lᵀ`.
    #[default]
    SymmetricReduction,
}

impl std::str::FromStr for EigenStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "general" => Ok(EigenStrategy::General),
            "symmetric_reduction" | "symmetric-reduction" => Ok(EigenStrategy::SymmetricReduction),
            other => Err(Error::invalid(format!("unknown eigen strategy {other:?}"))),
        }
    }
}

/// A right eigenvector of `Γ`, unit norm.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaEigenpair {
    pub lambda: f64,
    pub v: Array1<f64>,
}

/// Symmetric form of `Γ`: `G ≈ L Lᵀ` and `M = Lᵀ S L = W diag(μ) Wᵀ`.
///
/// For each column `w` of `W`, `S L w` is a right and `L w` a left
/// eigenvector of `Γ` with eigenvalue `μ`, and `(L w)ᵀ (S L w) = μ`.
#[derive(Clone, Debug)]
pub struct GammaReduction {
    pub factor: Array2<f64>,
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
    pub d1: usize,
}

impl GammaReduction {
    pub fn rank(&self) -> usize {
        self.values.len()
    }

    /// `L w_k`, unnormalized.
    pub fn left_vector(&self, k: usize) -> Array1<f64> {
        self.factor.dot(&self.vectors.column(k))
    }

    /// `S L w_k`, unnormalized.
    pub fn right_vector(&self, k: usize) -> Array1<f64> {
        let mut v = self.left_vector(k);
        v.slice_mut(s![self.d1..]).mapv_inplace(|x| -x);
        v
    }
}

/// Factors the Gram matrix of `Γ` and solves the reduced symmetric problem.
pub fn reduce_gamma(gamma: &GammaMatrix) -> Result<GammaReduction> {
    let g = gamma.gram();
    let l = pivoted_cholesky(g.view(), CHOLESKY_REL_TOL)?;
    let d1 = gamma.d1();
    let l1 = l.slice(s![..d1, ..]);
    let l2 = l.slice(s![d1.., ..]);
    let mut m = l1.t().dot(&l1) - l2.t().dot(&l2);
    let mt = m.t().to_owned();
    m = (m + mt) * 0.5;
    let (values, vectors) = sym_eigen(m.view())?;
    Ok(GammaReduction {
        factor: l,
        values,
        vectors,
        d1,
    })
}

/// Real eigenpairs of `Γ`, sorted by descending eigenvalue.
///
/// The symmetric reduction falls back to the general solver if the Gram
/// matrix is found not to be positive semi-definite.
pub fn eigendecompose_gamma(gamma: &GammaMatrix, strategy: EigenStrategy) -> Result<Vec<GammaEigenpair>> {
    if gamma.data().iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("Γ has non-finite entries"));
    }
    let mut pairs = match strategy {
        EigenStrategy::SymmetricReduction => match reduce_gamma(gamma) {
            Ok(red) => from_reduction(&red),
            Err(e @ (Error::NotPsd { .. } | Error::Solver(_))) => {
                log::warn!("symmetric reduction failed ({e}); using the general solver");
                general_pairs(gamma)?
            }
            Err(e) => return Err(e),
        },
        EigenStrategy::General => general_pairs(gamma)?,
    };
    sort_pairs(&mut pairs);
    Ok(pairs)
}

fn from_reduction(red: &GammaReduction) -> Vec<GammaEigenpair> {
    (0..red.rank())
        .filter_map(|k| {
            let mut v = red.right_vector(k);
            let nv = v.dot(&v).sqrt();
            if nv == 0.0 {
                return None;
            }
            v /= nv;
            orient(&mut v);
            Some(GammaEigenpair {
                lambda: red.values[k],
                v,
            })
        })
        .collect()
}

fn general_pairs(gamma: &GammaMatrix) -> Result<Vec<GammaEigenpair>> {
    let (vals, vecs) = general_eigen(gamma.data().view())?;
    let bound = IMAGINARY_REL_TOL * gamma.frobenius();
    let max_imag = vals.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
    if max_imag > bound {
        return Err(Error::ImaginaryResidue { max_imag, bound });
    }
    let mut out = Vec::with_capacity(vals.len());
    for (k, z) in vals.iter().enumerate() {
        let mut v: Array1<f64> = vecs.index_axis(Axis(1), k).mapv(|c| c.re);
        let nv = v.dot(&v).sqrt();
        if nv > 0.0 {
            v /= nv;
        }
        orient(&mut v);
        out.push(GammaEigenpair { lambda: z.re, v });
    }
    Ok(out)
}

/// Flips `v` so that its largest-magnitude entry is positive; the first such
/// entry wins ties.
pub(crate) fn orient(v: &mut Array1<f64>) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.mapv_inplace(|x| -x);
    }
}

/// Descending eigenvalue, then descending first differing vector entry.
pub(crate) fn pair_order(la: f64, va: ArrayView1<f64>, lb: f64, vb: ArrayView1<f64>) -> Ordering {
    lb.total_cmp(&la).then_with(|| {
        for (x, y) in va.iter().zip(vb.iter()) {
            match y.total_cmp(x) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    })
}

fn sort_pairs(pairs: &mut [GammaEigenpair]) {
    pairs.sort_by(|a, b| pair_order(a.lambda, a.v.view(), b.lambda, b.v.view()));
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn cov(c1: Array2<f64>, c2: Array2<f64>, c12: Array2<f64>) -> DifferentialCovariance {
        DifferentialCovariance {
            c1,
            c2,
            c12,
            n_seen: 1,
        }
    }

    #[test]
    fn assembles_blocks() {
        let g = build_gamma(&cov(array![[1.0]], array![[1.0]], array![[0.0]]));
        assert_eq!(g.data(), &array![[1.0, 0.0], [0.0, -1.0]]);
        let g = build_gamma(&cov(
            Array2::eye(2),
            Array2::eye(3),
            Array2::from_shape_fn((2, 3), |(i, j)| (i + 2 * j) as f64),
        ));
        assert_eq!(g.dim(), 5);
        assert!(g.blocks_consistent());
        assert_eq!(g.data()[[3, 1]], -g.data()[[1, 3]]);
    }

    #[test]
    fn from_dense_rejects_broken_blocks() {
        assert!(GammaMatrix::from_dense(array![[1.0, 2.0], [2.0, -1.0]], 1).is_err());
        assert!(GammaMatrix::from_dense(array![[1.0, 2.0], [-2.0, -1.0]], 1).is_ok());
    }

    #[test]
    fn diagonal_two_by_two_both_strategies() {
        let g = build_gamma(&cov(array![[1.0]], array![[1.0]], array![[0.0]]));
        for strategy in [EigenStrategy::General, EigenStrategy::SymmetricReduction] {
            let pairs = eigendecompose_gamma(&g, strategy).unwrap();
            assert_eq!(pairs.len(), 2);
            assert_abs_diff_eq!(pairs[0].lambda, 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(pairs[1].lambda, -1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(pairs[0].v[0], 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn identical_blocks_give_exact_zero_spectrum() {
        let c = array![[0.6, 0.2], [0.2, 0.4]];
        let g = build_gamma(&cov(c.clone(), c.clone(), c));
        let pairs = eigendecompose_gamma(&g, EigenStrategy::SymmetricReduction).unwrap();
        assert!(pairs.iter().all(|p| p.lambda.abs() <= 1e-10));
    }

    #[test]
    fn reduction_vectors_are_eigenvectors() {
        let c1 = array![[0.5, 0.1], [0.1, 0.5]];
        let c2 = array![[0.3, 0.0], [0.0, 0.7]];
        let c12 = array![[0.2, -0.1], [0.05, 0.1]];
        let g = build_gamma(&cov(c1, c2, c12));
        let red = reduce_gamma(&g).unwrap();
        for k in 0..red.rank() {
            let mu = red.values[k];
            let r = red.right_vector(k);
            let l = red.left_vector(k);
            let res = g.data().dot(&r) - &r * mu;
            assert!(res.dot(&res).sqrt() < 1e-12);
            let resl = g.data().t().dot(&l) - &l * mu;
            assert!(resl.dot(&resl).sqrt() < 1e-12);
            assert_abs_diff_eq!(l.dot(&r), mu, epsilon = 1e-12);
        }
    }

    #[test]
    fn strategy_parses() {
        assert_eq!("general".parse::<EigenStrategy>().unwrap(), EigenStrategy::General);
        assert!("qr".parse::<EigenStrategy>().is_err());
    }
}
