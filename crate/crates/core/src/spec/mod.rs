//! Streaming comparison of two embeddings of the same samples.
//!
//! Kernel features of both embeddings are folded into the covariance blocks
//! `C1`, `C2`, `C12` in one pass. The block matrix `Γ` built from them has the
//! same nonzero eigenvalues as the `n x n` difference of normalized kernel
//! matrices, and its eigenvectors map back to sample space through the
//! features. Cost is linear in `n`.

mod clusters;
mod covariance;
mod gamma;
mod oracle;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Result, StageExt};
use crate::io::{load_embedding_auto, pair, PairedDataset};
use crate::kernels::{build_feature_map, FeatureMap, KernelSpec};
use crate::report::ReportFormat;

pub use clusters::{
    extract_clusters, map_eigenvectors, map_eigenvectors_source, top_entries, ClusterReport, Side, SpecEigenpair,
    NULL_NORM, ZERO_EIGENVALUE,
};
pub use covariance::{accumulate, accumulate_source, CovarianceAccumulator, DifferentialCovariance, PairedSource};
pub use gamma::{
    build_gamma, eigendecompose_gamma, reduce_gamma, EigenStrategy, GammaEigenpair, GammaMatrix, GammaReduction,
    CHOLESKY_REL_TOL, IMAGINARY_REL_TOL,
};
pub use oracle::{difference_matrix, spec_direct_oracle, spec_direct_oracle_with_cap, OraclePair, DEFAULT_ORACLE_CAP};

pub const DEFAULT_TOP_K: usize = 10;
pub const DEFAULT_TOP_R: usize = 100;
pub const DEFAULT_CHUNK_SIZE: usize = 4096;

fn default_top_k() -> usize {
    DEFAULT_TOP_K
}

fn default_top_r() -> usize {
    DEFAULT_TOP_R
}

fn default_chunk_size() -> usize {
    DEFAULT_CHUNK_SIZE
}

fn default_kernel() -> KernelSpec {
    KernelSpec::cosine()
}

/// A complete, replayable comparison run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecConfig {
    pub emb_a: PathBuf,
    pub emb_b: PathBuf,
    #[serde(default = "default_kernel")]
    pub kernel_a: KernelSpec,
    #[serde(default = "default_kernel")]
    pub kernel_b: KernelSpec,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default = "default_top_r")]
    pub top_r: usize,
    /// Seeds every random choice, including both Fourier bases.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: ReportFormat,
    #[serde(default = "default_chunk_size")]
    pub chunk_size: usize,
    #[serde(default)]
    pub strategy: EigenStrategy,
}

impl SpecConfig {
    pub fn new(emb_a: impl Into<PathBuf>, emb_b: impl Into<PathBuf>) -> Self {
        SpecConfig {
            emb_a: emb_a.into(),
            emb_b: emb_b.into(),
            kernel_a: default_kernel(),
            kernel_b: default_kernel(),
            top_k: DEFAULT_TOP_K,
            top_r: DEFAULT_TOP_R,
            seed: 0,
            output: None,
            format: ReportFormat::default(),
            chunk_size: DEFAULT_CHUNK_SIZE,
            strategy: EigenStrategy::default(),
        }
    }

    /// In-memory options with the run seed applied to both kernels.
    pub fn options(&self) -> SpecOptions {
        let mut kernel_a = self.kernel_a.clone();
        let mut kernel_b = self.kernel_b.clone();
        kernel_a.seed = self.seed;
        kernel_b.seed = self.seed;
        SpecOptions {
            kernel_a,
            kernel_b,
            top_k: self.top_k,
            top_r: self.top_r,
            chunk_size: self.chunk_size,
            strategy: self.strategy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.options().validate()
    }

    /// The config as it is echoed in reports, with effective kernel seeds.
    pub fn echo(&self) -> SpecConfig {
        let opts = self.options();
        SpecConfig {
            kernel_a: opts.kernel_a,
            kernel_b: opts.kernel_b,
            ..self.clone()
        }
    }
}

/// Comparison parameters for data already in memory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecOptions {
    pub kernel_a: KernelSpec,
    pub kernel_b: KernelSpec,
    pub top_k: usize,
    pub top_r: usize,
    pub chunk_size: usize,
    pub strategy: EigenStrategy,
}

impl Default for SpecOptions {
    fn default() -> Self {
        SpecOptions {
            kernel_a: default_kernel(),
            kernel_b: default_kernel(),
            top_k: DEFAULT_TOP_K,
            top_r: DEFAULT_TOP_R,
            chunk_size: DEFAULT_CHUNK_SIZE,
            strategy: EigenStrategy::default(),
        }
    }
}

impl SpecOptions {
    pub fn with_kernels(kernel_a: KernelSpec, kernel_b: KernelSpec) -> Self {
        SpecOptions {
            kernel_a,
            kernel_b,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        use crate::error::Error;
        self.kernel_a.validate()?;
        self.kernel_b.validate()?;
        if self.top_k == 0 || self.top_r == 0 {
            return Err(Error::invalid("top_k and top_r must be at least 1"));
        }
        if self.chunk_size == 0 {
            return Err(Error::invalid("chunk_size must be at least 1"));
        }
        Ok(())
    }

    pub fn feature_maps(&self, paired: &PairedDataset) -> Result<(FeatureMap, FeatureMap)> {
        Ok((
            build_feature_map(&self.kernel_a, paired.a().d())?,
            build_feature_map(&self.kernel_b, paired.b().d())?,
        ))
    }
}

#[derive(Clone, Debug)]
pub struct SpecResult {
    /// Retained eigenpairs, descending eigenvalue.
    pub eigenpairs: Vec<SpecEigenpair>,
    pub clusters: Vec<ClusterReport>,
    /// Largest eigenvalue magnitude of `Γ`.
    pub spec_diff: f64,
    pub config: serde_json::Value,
    pub diagnostics: Option<serde_json::Value>,
}

impl SpecResult {
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigenpairs.iter().map(|p| p.lambda).collect()
    }

    pub fn side_a(&self) -> impl Iterator<Item = &ClusterReport> {
        self.clusters.iter().filter(|c| c.side == Side::A)
    }
}

/// Loads both embeddings and runs [`compare`]; the config is echoed in the result.
pub fn run_spec(config: &SpecConfig) -> Result<SpecResult> {
    config.validate().stage("config")?;
    let a = load_embedding_auto(&config.emb_a).stage("load")?;
    let b = load_embedding_auto(&config.emb_b).stage("load")?;
    let paired = pair(a, b).stage("load")?;
    let mut result = compare(&paired, &config.options())?;
    result.config = serde_json::to_value(config.echo()).expect("config serializes");
    Ok(result)
}

/// The full pipeline on a paired dataset.
pub fn compare(paired: &PairedDataset, options: &SpecOptions) -> Result<SpecResult> {
    options.validate().stage("config")?;
    let (map1, map2) = options.feature_maps(paired).stage("kernels")?;
    let cov = accumulate(paired, &map1, &map2, options.chunk_size).stage("accumulate")?;
    let gamma = build_gamma(&cov);
    let pairs = eigendecompose_gamma(&gamma, options.strategy).stage("eigendecompose")?;
    let spec_diff = pairs.iter().fold(0.0f64, |m, p| m.max(p.lambda.abs()));
    let eigenpairs = map_eigenvectors(paired, &map1, &map2, &pairs).stage("map")?;
    let clusters = extract_clusters(&eigenpairs, options.top_k, options.top_r, paired.ids()).stage("clusters")?;
    log::info!(
        "n={} d1={} d2={} retained {} eigenpairs, spec_diff {:e}",
        paired.n(),
        map1.output_dim(),
        map2.output_dim(),
        eigenpairs.len(),
        spec_diff
    );
    Ok(SpecResult {
        eigenpairs,
        clusters,
        spec_diff,
        config: serde_json::to_value(options).expect("options serialize"),
        diagnostics: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::EmbeddingSet;
    use ndarray::Array2;

    #[test]
    fn identical_inputs_have_no_difference() {
        let data = Array2::from_shape_fn((30, 4), |(i, j)| ((i * 13 + j * 5) % 17) as f64 - 8.0 + 0.1 * j as f64);
        let set = EmbeddingSet::with_default_ids(data).unwrap();
        let paired = pair(set.clone(), set).unwrap();
        let res = compare(&paired, &SpecOptions::default()).unwrap();
        assert!(res.spec_diff <= 1e-10);
        assert!(res.clusters.is_empty());
    }

    #[test]
    fn options_apply_run_seed() {
        let mut cfg = SpecConfig::new("a.csv", "b.csv");
        cfg.kernel_a = KernelSpec::gaussian_rff(1.0, 10, 99);
        cfg.seed = 7;
        assert_eq!(cfg.options().kernel_a.seed, 7);
        assert_eq!(cfg.echo().kernel_a.seed, 7);
        cfg.top_k = 0;
        assert!(cfg.validate().is_err());
    }
}
