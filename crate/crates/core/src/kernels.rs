//! Finite-dimensional kernel feature maps.
//!
//! Three kernels are available, each realized through an explicit map `φ`
//! so that `k(x, y) = φ(x)ᵀφ(y)`:
//!
//! | kind           | `φ(x)`                                                   | width |
//! |----------------|----------------------------------------------------------|-------|
//! | `linear`       | `x`                                                      | `d`   |
//! | `cosine`       | `x / ‖x‖₂`                                               | `d`   |
//! | `gaussian_rff` | `m^{-1/2} [cos ω₁ᵀx, sin ω₁ᵀx, …, cos ω_mᵀx, sin ω_mᵀx]` | `2m`  |
//!
//! Random Fourier frequencies for the Gaussian kernel
//! `exp(-‖x-y‖² / 2σ²)` are drawn i.i.d. from `N(0, σ⁻² I)`, which is its
//! spectral density. The cosine and RFF maps produce unit-norm features, so
//! their kernels satisfy `k(x, x) = 1`.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{encode_specemb1, EmbeddingSet};
use crate::linalg;

/// Default number of random Fourier features.
pub const DEFAULT_RFF_DIM: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Linear,
    Cosine,
    #[serde(alias = "gaussian", alias = "rbf")]
    GaussianRff,
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(KernelKind::Linear),
            "cosine" => Ok(KernelKind::Cosine),
            "gaussian" | "gaussian_rff" | "gaussian-rff" | "rbf" => Ok(KernelKind::GaussianRff),
            other => Err(Error::invalid(format!("unknown kernel {other:?}"))),
        }
    }
}

fn default_rff_dim() -> usize {
    DEFAULT_RFF_DIM
}

/// Kernel family and its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// Bandwidth, required for `gaussian_rff`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Number of Fourier frequencies `m` (the map has width `2m`).
    #[serde(default = "default_rff_dim")]
    pub rff_dim: usize,
    #[serde(default)]
    pub seed: u64,
}

impl KernelSpec {
    pub fn linear() -> Self {
        KernelSpec {
            kind: KernelKind::Linear,
            sigma: None,
            rff_dim: DEFAULT_RFF_DIM,
            seed: 0,
        }
    }

    pub fn cosine() -> Self {
        KernelSpec {
            kind: KernelKind::Cosine,
            ..Self::linear()
        }
    }

    pub fn gaussian_rff(sigma: f64, rff_dim: usize, seed: u64) -> Self {
        KernelSpec {
            kind: KernelKind::GaussianRff,
            sigma: Some(sigma),
            rff_dim,
            seed,
        }
    }

    /// True when `k(x, x) = 1` for every valid `x`.
    pub fn is_normalized(&self) -> bool {
        !matches!(self.kind, KernelKind::Linear)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == KernelKind::GaussianRff {
            match self.sigma {
                Some(s) if s.is_finite() && s > 0.0 => {}
                Some(s) => return Err(Error::invalid(format!("bandwidth must be positive, got {s}"))),
                None => return Err(Error::invalid("gaussian_rff kernel needs a bandwidth")),
            }
            if self.rff_dim == 0 {
                return Err(Error::invalid("rff_dim must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Sampled Fourier frequencies, one row per frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct RffBasis {
    omegas: Array2<f64>,
    sigma: f64,
    seed: u64,
}

impl RffBasis {
    /// Draws `m` frequencies in `d` dimensions from `N(0, σ⁻² I)`.
    /// Identical arguments give bit-identical bases.
    pub fn sample(seed: u64, m: usize, d: usize, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!("bandwidth must be positive, got {sigma}")));
        }
        if m == 0 || d == 0 {
            return Err(Error::invalid("basis needs m >= 1 and d >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inv = 1.0 / sigma;
        let omegas = Array2::from_shape_simple_fn((m, d), || {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * inv
        });
        Ok(RffBasis {
            omegas,
            sigma,
            seed,
        })
    }

    /// Wraps explicit frequencies, e.g. a transformed copy of a sampled basis.
    pub fn from_omegas(omegas: Array2<f64>, sigma: f64, seed: u64) -> Result<Self> {
        if omegas.is_empty() {
            return Err(Error::invalid("empty frequency matrix"));
        }
        Ok(RffBasis {
            omegas,
            sigma,
            seed,
        })
    }

    pub fn omegas(&self) -> ArrayView2<'_, f64> {
        self.omegas.view()
    }

    pub fn m(&self) -> usize {
        self.omegas.nrows()
    }

    pub fn dim(&self) -> usize {
        self.omegas.ncols()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Writes the `m x d` frequency matrix in the `SPECEMB1` layout.
    pub fn write_specemb1(&self, path: &Path) -> Result<()> {
        let bytes = encode_specemb1(self.omegas.view())?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
}

/// An explicit kernel feature map from `input_dim` to `output_dim`.
#[derive(Clone, Debug)]
pub struct FeatureMap {
    spec: KernelSpec,
    basis: Option<RffBasis>,
    input_dim: usize,
    output_dim: usize,
}

/// Builds the feature map for `spec` on inputs of width `input_dim`.
pub fn build_feature_map(spec: &KernelSpec, input_dim: usize) -> Result<FeatureMap> {
    spec.validate()?;
    if input_dim == 0 {
        return Err(Error::invalid("input_dim must be at least 1"));
    }
    match spec.kind {
        KernelKind::Linear | KernelKind::Cosine => Ok(FeatureMap {
            spec: spec.clone(),
            basis: None,
            input_dim,
            output_dim: input_dim,
        }),
        KernelKind::GaussianRff => {
            let sigma = spec.sigma.expect("validated");
            let basis = RffBasis::sample(spec.seed, spec.rff_dim, input_dim, sigma)?;
            Ok(FeatureMap::from_basis(basis))
        }
    }
}

impl FeatureMap {
    /// A Gaussian RFF map over an explicit basis.
    pub fn from_basis(basis: RffBasis) -> Self {
        let spec = KernelSpec::gaussian_rff(basis.sigma, basis.m(), basis.seed);
        FeatureMap {
            input_dim: basis.dim(),
            output_dim: 2 * basis.m(),
            spec,
            basis: Some(basis),
        }
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn basis(&self) -> Option<&RffBasis> {
        self.basis.as_ref()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Maps one vector.
    pub fn apply(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        let rows = x.insert_axis(Axis(0));
        Ok(self.apply_rows(rows)?.index_axis_move(Axis(0), 0))
    }

    /// Maps every row of `x`.
    pub fn apply_rows(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: x.ncols(),
            });
        }
        match self.spec.kind {
            KernelKind::Linear => Ok(x.to_owned()),
            KernelKind::Cosine => {
                let mut out = x.to_owned();
                for mut row in out.rows_mut() {
                    let norm = linalg::norm(row.view());
                    if norm == 0.0 {
                        return Err(Error::ZeroVector);
                    }
                    row.mapv_inplace(|v| v / norm);
                }
                Ok(out)
            }
            KernelKind::GaussianRff => {
                let basis = self.basis.as_ref().expect("rff map carries a basis");
                let proj = x.dot(&basis.omegas.t());
                let m = basis.m();
                let scale = 1.0 / (m as f64).sqrt();
                let mut out = Array2::zeros((x.nrows(), 2 * m));
                for (mut dst, src) in out.rows_mut().into_iter().zip(proj.rows()) {
                    for (j, &t) in src.iter().enumerate() {
                        let (s, c) = t.sin_cos();
                        dst[2 * j] = c * scale;
                        dst[2 * j + 1] = s * scale;
                    }
                }
                Ok(out)
            }
        }
    }
}

/// `φ(x)ᵀφ(y)` under the given map.
pub fn kernel_value(x: ArrayView1<f64>, y: ArrayView1<f64>, map: &FeatureMap) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(map.apply(x)?.dot(&map.apply(y)?))
}

/// `exp(-‖x-y‖² / 2σ²)`, evaluated directly.
pub fn exact_gaussian_kernel(x: ArrayView1<f64>, y: ArrayView1<f64>, sigma: f64) -> f64 {
    let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-sq / (2.0 * sigma * sigma)).exp()
}

/// `n x n` kernel matrix under the map, `Φ Φᵀ`.
pub fn kernel_matrix(x: ArrayView2<f64>, map: &FeatureMap) -> Result<Array2<f64>> {
    let phi = map.apply_rows(x)?;
    Ok(phi.dot(&phi.t()))
}

/// `n x n` kernel matrix of the exact kernel named by `spec`; Gaussian
/// entries are evaluated in closed form instead of through Fourier features.
pub fn exact_kernel_matrix(x: ArrayView2<f64>, spec: &KernelSpec) -> Result<Array2<f64>> {
    spec.validate()?;
    match spec.kind {
        KernelKind::Linear | KernelKind::Cosine => {
            let map = build_feature_map(spec, x.ncols())?;
            kernel_matrix(x, &map)
        }
        KernelKind::GaussianRff => {
            let sigma = spec.sigma.expect("validated");
            let n = x.nrows();
            let mut k = Array2::zeros((n, n));
            for i in 0..n {
                k[[i, i]] = 1.0;
                for j in 0..i {
                    let v = exact_gaussian_kernel(x.row(i), x.row(j), sigma);
                    k[[i, j]] = v;
                    k[[j, i]] = v;
                }
            }
            Ok(k)
        }
    }
}

/// Largest eigenvalue of the kernel covariance `(1/n) Φᵀ Φ` of a feature
/// matrix, computed on whichever Gram form is smaller.
pub fn top_covariance_eigenvalue(features: ArrayView2<f64>) -> Result<f64> {
    let (n, d) = features.dim();
    let gram = if n <= d {
        features.dot(&features.t())
    } else {
        features.t().dot(&features)
    };
    let vals = linalg::sym_eigenvalues(gram.view())?;
    Ok(vals.first().copied().unwrap_or(0.0) / n as f64)
}

const SIGMA_MIN: f64 = 1e-6;
const SIGMA_MAX: f64 = 1e6;
const BANDWIDTH_STEPS: usize = 100;

/// Finds a Gaussian bandwidth whose RFF kernel covariance has its top
/// eigenvalue within `tol` of `target`.
///
/// The top eigenvalue increases with σ (all kernel values tend to 1), so the
/// search bisects `log σ` over `[1e-6, 1e6]`. The first probe is σ = 1.
pub fn select_bandwidth(
    emb: &EmbeddingSet,
    target: f64,
    tol: f64,
    m: usize,
    seed: u64,
) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::invalid(format!("target eigenvalue must lie in (0, 1), got {target}")));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let mut lo = SIGMA_MIN.ln();
    let mut hi = SIGMA_MAX.ln();
    let mut last = (f64::NAN, f64::NAN);
    for _ in 0..BANDWIDTH_STEPS {
        let mid = 0.5 * (lo + hi);
        let sigma = mid.exp();
        let map = build_feature_map(&KernelSpec::gaussian_rff(sigma, m, seed), emb.d())?;
        let top = top_covariance_eigenvalue(map.apply_rows(emb.data())?.view())?;
        last = (sigma, top);
        if (top - target).abs() <= tol {
            return Ok(sigma);
        }
        if top < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::BandwidthUnreachable {
        target,
        sigma: last.0,
        reached: last.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn output_widths() {
        let lin = build_feature_map(&KernelSpec::linear(), 5).unwrap();
        assert_eq!(lin.output_dim(), 5);
        let rff = build_feature_map(&KernelSpec::gaussian_rff(1.0, 2000, 3), 768).unwrap();
        assert_eq!(rff.output_dim(), 4000);
        assert_eq!(rff.basis().unwrap().omegas().dim(), (2000, 768));
    }

    #[test]
    fn invalid_specs() {
        assert!(build_feature_map(&KernelSpec::gaussian_rff(0.0, 10, 0), 2).is_err());
        assert!(build_feature_map(&KernelSpec::gaussian_rff(1.0, 0, 0), 2).is_err());
        let mut no_sigma = KernelSpec::gaussian_rff(1.0, 10, 0);
        no_sigma.sigma = None;
        assert!(no_sigma.validate().is_err());
        assert!(build_feature_map(&KernelSpec::linear(), 0).is_err());
    }

    #[test]
    fn same_seed_same_basis() {
        let a = RffBasis::sample(11, 50, 7, 0.3).unwrap();
        let b = RffBasis::sample(11, 50, 7, 0.3).unwrap();
        assert!(a
            .omegas()
            .iter()
            .zip(b.omegas().iter())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        let c = RffBasis::sample(12, 50, 7, 0.3).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn apply_examples() {
        let cos = build_feature_map(&KernelSpec::cosine(), 2).unwrap();
        let y = cos.apply(array![3.0, 4.0].view()).unwrap();
        assert_abs_diff_eq!(y[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(y[1], 0.8, epsilon = 1e-15);

        let lin = build_feature_map(&KernelSpec::linear(), 2).unwrap();
        assert_eq!(lin.apply(array![1.0, 2.0].view()).unwrap(), array![1.0, 2.0]);

        let rff = build_feature_map(&KernelSpec::gaussian_rff(0.7, 300, 1), 3).unwrap();
        let f = rff.apply(array![0.2, -1.0, 4.0].view()).unwrap();
        assert_abs_diff_eq!(linalg::norm(f.view()), 1.0, epsilon = 1e-13);
    }

    #[test]
    fn interleaved_layout() {
        let omegas = array![[1.0, 0.0], [0.0, 2.0]];
        let map = FeatureMap::from_basis(RffBasis::from_omegas(omegas, 1.0, 0).unwrap());
        let x = array![0.3, 0.5];
        let f = map.apply(x.view()).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let expected = [0.3f64.cos() * s, 0.3f64.sin() * s, 1.0f64.cos() * s, 1.0f64.sin() * s];
        for (a, b) in f.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn cosine_zero_vector_is_an_error() {
        let cos = build_feature_map(&KernelSpec::cosine(), 2).unwrap();
        assert!(matches!(cos.apply(array![0.0, 0.0].view()), Err(Error::ZeroVector)));
    }

    #[test]
    fn self_kernel_is_one() {
        let x = array![0.4, -2.0, 1.5];
        let cos = build_feature_map(&KernelSpec::cosine(), 3).unwrap();
        assert_abs_diff_eq!(kernel_value(x.view(), x.view(), &cos).unwrap(), 1.0, epsilon = 1e-15);
        let rff = build_feature_map(&KernelSpec::gaussian_rff(1.0, 2000, 9), 3).unwrap();
        assert_abs_diff_eq!(kernel_value(x.view(), x.view(), &rff).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_gaussian_examples() {
        let x = array![1.0, 2.0];
        assert_eq!(exact_gaussian_kernel(x.view(), x.view(), 0.5), 1.0);
        let sigma = 0.8;
        let y = array![1.0 + sigma * 2f64.sqrt(), 2.0];
        assert_abs_diff_eq!(
            exact_gaussian_kernel(x.view(), y.view(), sigma),
            (-1.0f64).exp(),
            epsilon = 1e-15
        );
        let z = array![0.0, 0.0];
        let mut prev = 0.0;
        for sigma in [0.5, 1.0, 2.0, 10.0, 100.0, 1e4] {
            let v = exact_gaussian_kernel(x.view(), z.view(), sigma);
            assert!(v > prev);
            prev = v;
        }
        assert!(1.0 - prev < 1e-7);
    }

    #[test]
    fn mismatched_dims() {
        let lin = build_feature_map(&KernelSpec::linear(), 2).unwrap();
        assert!(kernel_value(array![1.0].view(), array![1.0, 2.0].view(), &lin).is_err());
        assert!(lin.apply(array![1.0, 2.0, 3.0].view()).is_err());
    }
}
