//! Command-line flags and their config-file equivalents.
//!
//! Every flag group is both a `clap` argument set and a serde table, so a
//! config file uses the flag names in snake_case. Values given on the
//! command line win over the file.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use embspec::align::SpecDiffMethod;
use embspec::kernels::KernelKind;
use embspec::report::ReportFormat;
use embspec::spec::EigenStrategy;
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

/// Implements `overlay`, which fills unset fields from a base value.
macro_rules! overlay {
    ($name:ident { $($field:ident),* $(,)? }) => {
        impl $name {
            pub fn overlay(self, base: $name) -> $name {
                $name { $($field: self.$field.or(base.$field)),* }
            }
        }
    };
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct Common {
    /// Seeds every random choice (Fourier bases, k-means, start weights).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path; stdout when absent (align-demo requires it).
    #[arg(long)]
    pub out: Option<PathBuf>,
}
overlay!(Common { seed, out });

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct DataArgs {
    /// First embedding (CSV or SPECEMB1 binary).
    #[arg(long)]
    pub emb_a: Option<PathBuf>,
    /// Second embedding of the same samples.
    #[arg(long)]
    pub emb_b: Option<PathBuf>,
    /// linear, cosine or gaussian.
    #[arg(long)]
    pub kernel_a: Option<KernelKind>,
    /// Kernel for embedding B.
    #[arg(long)]
    pub kernel_b: Option<KernelKind>,
    /// Gaussian bandwidth for embedding A.
    #[arg(long)]
    pub sigma_a: Option<f64>,
    /// Gaussian bandwidth for embedding B.
    #[arg(long)]
    pub sigma_b: Option<f64>,
    /// Fourier frequencies per Gaussian kernel.
    #[arg(long)]
    pub rff_dim: Option<usize>,
    /// Samples per accumulation chunk.
    #[arg(long)]
    pub chunk_size: Option<usize>,
}
overlay!(DataArgs {
    emb_a,
    emb_b,
    kernel_a,
    kernel_b,
    sigma_a,
    sigma_b,
    rff_dim,
    chunk_size,
});

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct ReportArgs {
    /// Eigenvectors reported per side.
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Samples listed per cluster.
    #[arg(long)]
    pub top_r: Option<usize>,
    /// json or markdown.
    #[arg(long)]
    pub format: Option<ReportFormat>,
    /// symmetric_reduction or general.
    #[arg(long)]
    pub strategy: Option<EigenStrategy>,
    /// Reference labels, one integer per line, for agreement scores.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}
overlay!(ReportArgs {
    top_k,
    top_r,
    format,
    strategy,
    labels,
});

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct DiffArgs {
    /// dense or power.
    #[arg(long)]
    pub method: Option<SpecDiffMethod>,
    /// Print the full result as JSON instead of a single number.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub json: Option<bool>,
}
overlay!(DiffArgs { method, json });

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct AlignArgs {
    /// Raw inputs X, one row per sample.
    #[arg(long)]
    pub raw: Option<PathBuf>,
    /// Reference features F for the same samples.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Rows of the trained map W; defaults to the reference width.
    #[arg(long)]
    pub out_dim: Option<usize>,
    /// Gradient step size.
    #[arg(long)]
    pub step: Option<f64>,
    /// Maximum number of gradient steps.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Weight of the spec-diff term.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Stop after this many steps without a new lowest spec-diff.
    #[arg(long)]
    pub patience: Option<usize>,
}
overlay!(AlignArgs {
    raw,
    reference,
    out_dim,
    step,
    steps,
    beta,
    patience,
});

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct DiagnoseArgs {
    /// Index set I, one sample index per line; defaults to the top side-A cluster.
    #[arg(long)]
    pub indices: Option<PathBuf>,
    /// Eigenpair checked by corollary1, 0 = largest eigenvalue.
    #[arg(long)]
    pub eigen_index: Option<usize>,
    /// Failure probability for the random-feature bound.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Clusters per k-means run.
    #[arg(long)]
    pub k: Option<usize>,
    /// k-means restarts averaged by validate.
    #[arg(long)]
    pub runs: Option<usize>,
}
overlay!(DiagnoseArgs {
    indices,
    eigen_index,
    delta,
    k,
    runs,
});

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct BandwidthArgs {
    /// Target top eigenvalue of the kernel covariance.
    #[arg(long)]
    pub target: Option<f64>,
    /// Accepted distance from the target.
    #[arg(long)]
    pub tol: Option<f64>,
}
overlay!(BandwidthArgs { target, tol });

/// Everything a config file may set.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct FileConfig {
    #[serde(flatten)]
    pub common: Common,
    #[serde(flatten)]
    pub data: DataArgs,
    #[serde(flatten)]
    pub report: ReportArgs,
    #[serde(flatten)]
    pub diff: DiffArgs,
    #[serde(flatten)]
    pub align: AlignArgs,
    #[serde(flatten)]
    pub diagnose: DiagnoseArgs,
    #[serde(flatten)]
    pub bandwidth: BandwidthArgs,
}

impl FileConfig {
    /// Reads a JSON or TOML file, chosen by extension (`.toml`, otherwise JSON).
    /// Unknown keys are rejected.
    pub fn load(path: &Path) -> Result<FileConfig, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
        let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        let value: serde_json::Value = if is_toml {
            toml::from_str(&text).map_err(|e| Failure::usage(format!("config {}: {e}", path.display())))?
        } else {
            serde_json::from_str(&text).map_err(|e| Failure::usage(format!("config {}: {e}", path.display())))?
        };
        let known = serde_json::to_value(FileConfig::default()).expect("config serializes");
        if let (Some(given), Some(known)) = (value.as_object(), known.as_object()) {
            let mut unknown: Vec<&String> = given.keys().filter(|k| !known.contains_key(*k)).collect();
            unknown.sort();
            if !unknown.is_empty() {
                return Err(Failure::usage(format!("config {}: unknown keys {unknown:?}", path.display())));
            }
        } else {
            return Err(Failure::usage(format!("config {}: expected a table of settings", path.display())));
        }
        serde_json::from_value(value).map_err(|e| Failure::usage(format!("config {}: {e}", path.display())))
    }

    /// Loads `path` if given, otherwise the empty config.
    pub fn load_optional(path: Option<&Path>) -> Result<FileConfig, Failure> {
        path.map_or_else(|| Ok(FileConfig::default()), FileConfig::load)
    }
}
