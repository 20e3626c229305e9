use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use embspec::align::{align_descent, spec_diff_with, write_trajectory, AlignConfig, SpecDiffOptions};
use embspec::diagnostics::{
    compare_with_labels, corollary1_check, rff_residual, theorem1_certificate, validate_clusters,
};
use embspec::io::{load_embedding_auto, load_labels, pair, PairedDataset};
use embspec::kernels::{build_feature_map, exact_kernel_matrix, select_bandwidth, KernelKind, KernelSpec, DEFAULT_RFF_DIM};
use embspec::report::render_report;
use embspec::spec::{compare, SpecConfig, SpecResult, DEFAULT_ORACLE_CAP, DEFAULT_TOP_K, DEFAULT_TOP_R};
use embspec::Error;
use serde_json::json;

use crate::failure::Failure;
use crate::settings::{AlignArgs, BandwidthArgs, Common, DataArgs, DiagnoseArgs, DiffArgs, FileConfig, ReportArgs};

pub const DEFAULT_STEP: f64 = 1e-2;
pub const DEFAULT_STEPS: usize = 500;
pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_KMEANS_RUNS: usize = 50;
pub const DEFAULT_BANDWIDTH_TOL: f64 = 0.01;

#[derive(Args, Debug)]
pub struct CompareCmd {
    /// JSON or TOML file with defaults for any flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Args, Debug)]
pub struct DiffCmd {
    /// JSON or TOML file with defaults for any flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub diff: DiffArgs,
}

#[derive(Args, Debug)]
pub struct AlignCmd {
    /// JSON or TOML file with defaults for any flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub align: AlignArgs,
}

#[derive(Args, Debug)]
pub struct DiagnoseOpts {
    /// JSON or TOML file with defaults for any flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub report: ReportArgs,
    #[command(flatten)]
    pub diagnose: DiagnoseArgs,
}

#[derive(Subcommand, Debug)]
pub enum DiagnoseCmd {
    /// Separation certificate for an index set (exact kernels, n ≤ 2000).
    Theorem1(DiagnoseOpts),
    /// Eigenvector tail bound outside an index set.
    Corollary1(DiagnoseOpts),
    /// Eigenvector residual of the random-feature proxy.
    RffResidual(DiagnoseOpts),
    /// AMI/NMI of the cluster labeling against k-means on each embedding.
    Validate(DiagnoseOpts),
}

#[derive(Args, Debug)]
pub struct BandwidthCmd {
    /// JSON or TOML file with defaults for any flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub bandwidth: BandwidthArgs,
}

/// Writes `text` to `out`, or to stdout.
fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn to_json(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

fn kernel(kind: Option<KernelKind>, sigma: Option<f64>, rff_dim: Option<usize>, flag: &str) -> Result<KernelSpec, Failure> {
    match kind.unwrap_or(KernelKind::Cosine) {
        KernelKind::Linear => Ok(KernelSpec::linear()),
        KernelKind::Cosine => Ok(KernelSpec::cosine()),
        KernelKind::GaussianRff => {
            let sigma = sigma.ok_or_else(|| Failure::usage(format!("--sigma-{flag} is required for a gaussian kernel")))?;
            Ok(KernelSpec::gaussian_rff(sigma, rff_dim.unwrap_or(DEFAULT_RFF_DIM), 0))
        }
    }
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, Failure> {
    path.as_deref().ok_or_else(|| Failure::usage(format!("{flag} is required")))
}

fn spec_config(common: &Common, data: &DataArgs, report: &ReportArgs) -> Result<SpecConfig, Failure> {
    let mut cfg = SpecConfig::new(required(&data.emb_a, "--emb-a")?, required(&data.emb_b, "--emb-b")?);
    cfg.kernel_a = kernel(data.kernel_a, data.sigma_a, data.rff_dim, "a")?;
    cfg.kernel_b = kernel(data.kernel_b, data.sigma_b, data.rff_dim, "b")?;
    cfg.top_k = report.top_k.unwrap_or(DEFAULT_TOP_K);
    cfg.top_r = report.top_r.unwrap_or(DEFAULT_TOP_R);
    cfg.seed = common.seed.unwrap_or(0);
    cfg.output = common.out.clone();
    cfg.format = report.format.unwrap_or_default();
    if let Some(c) = data.chunk_size {
        cfg.chunk_size = c;
    }
    cfg.strategy = report.strategy.unwrap_or_default();
    cfg.validate()?;
    Ok(cfg)
}

fn load_pair(a: &Path, b: &Path) -> Result<PairedDataset, Failure> {
    Ok(pair(load_embedding_auto(a)?, load_embedding_auto(b)?)?)
}

/// Runs the comparison and echoes the effective config into the result.
fn run_compare(cfg: &SpecConfig) -> Result<(PairedDataset, SpecResult), Failure> {
    let paired = load_pair(&cfg.emb_a, &cfg.emb_b)?;
    let mut result = compare(&paired, &cfg.options())?;
    result.config = serde_json::to_value(cfg.echo()).expect("config serializes");
    Ok((paired, result))
}

fn label_agreement(path: &Path, paired: &PairedDataset, result: &SpecResult) -> Result<Option<serde_json::Value>, Failure> {
    let labels = load_labels(path)?;
    labels.check_len(paired.n())?;
    match compare_with_labels(result, &labels) {
        Ok(a) => Ok(Some(serde_json::to_value(a).expect("agreement serializes"))),
        Err(Error::NoClusters) => {
            log::warn!("no side-A clusters; label agreement skipped");
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn cmd_compare(cmd: CompareCmd) -> Result<(), Failure> {
    let file = FileConfig::load_optional(cmd.config.as_deref())?;
    let common = cmd.common.overlay(file.common);
    let data = cmd.data.overlay(file.data);
    let report = cmd.report.overlay(file.report);
    let cfg = spec_config(&common, &data, &report)?;
    let (paired, mut result) = run_compare(&cfg)?;
    if let Some(path) = &report.labels {
        if let Some(agreement) = label_agreement(path, &paired, &result)? {
            result.diagnostics = Some(json!({ "labels": agreement }));
        }
    }
    emit(common.out.as_deref(), &render_report(&result, cfg.format))
}

pub fn cmd_diff(cmd: DiffCmd) -> Result<(), Failure> {
    let file = FileConfig::load_optional(cmd.config.as_deref())?;
    let common = cmd.common.overlay(file.common);
    let data = cmd.data.overlay(file.data);
    let diff = cmd.diff.overlay(file.diff);
    let seed = common.seed.unwrap_or(0);
    let paired = load_pair(required(&data.emb_a, "--emb-a")?, required(&data.emb_b, "--emb-b")?)?;
    let mut ka = kernel(data.kernel_a, data.sigma_a, data.rff_dim, "a")?;
    let mut kb = kernel(data.kernel_b, data.sigma_b, data.rff_dim, "b")?;
    ka.seed = seed;
    kb.seed = seed;
    let map1 = build_feature_map(&ka, paired.a().d())?;
    let map2 = build_feature_map(&kb, paired.b().d())?;
    let mut options = SpecDiffOptions {
        method: diff.method.unwrap_or_default(),
        seed,
        ..Default::default()
    };
    if let Some(c) = data.chunk_size {
        options.chunk_size = c;
    }
    let result = spec_diff_with(&paired, &map1, &map2, &options)?;
    if result.degenerate {
        log::warn!(
            "top eigenvalue magnitude is not unique (relative gap {:e}); the value is exact but its eigenvectors are not",
            result.relative_gap
        );
    }
    let text = if diff.json.unwrap_or(false) {
        to_json(&serde_json::to_value(&result).expect("result serializes"))
    } else {
        format!("{}\n", result.rho)
    };
    emit(common.out.as_deref(), &text)
}

pub fn cmd_align_demo(cmd: AlignCmd) -> Result<(), Failure> {
    let file = FileConfig::load_optional(cmd.config.as_deref())?;
    let common = cmd.common.overlay(file.common);
    let align = cmd.align.overlay(file.align);
    let out = common
        .out
        .clone()
        .ok_or_else(|| Failure::usage("--out is required for the trajectory CSV"))?;
    let paired = load_pair(required(&align.raw, "--raw")?, required(&align.reference, "--reference")?)?;
    let mut cfg = AlignConfig::new(
        align.out_dim.unwrap_or(paired.b().d()),
        align.step.unwrap_or(DEFAULT_STEP),
        align.steps.unwrap_or(DEFAULT_STEPS),
    );
    cfg.seed = common.seed.unwrap_or(0);
    cfg.patience = align.patience;
    if let Some(beta) = align.beta {
        cfg.beta = beta;
    }
    let write = |history: &[embspec::align::AlignRecord]| -> Result<(), Failure> {
        let f = fs::File::create(&out).map_err(|e| Failure::usage(format!("cannot write {}: {e}", out.display())))?;
        write_trajectory(history, std::io::BufWriter::new(f))?;
        Ok(())
    };
    match align_descent(paired.a().data(), paired.b().data(), &cfg) {
        Ok(state) => {
            write(&state.history)?;
            log::info!(
                "{} steps, spec-diff {:e} -> {:e}, monotone fraction {:.3}",
                state.history.len() - 1,
                state.initial_spec_diff(),
                state.final_spec_diff(),
                state.monotone_fraction()
            );
            emit(None, &format!("{}\n", state.final_spec_diff()))
        }
        Err(e) => {
            if let Error::Divergence { history, .. } = e.root() {
                write(history)?;
            }
            Err(e.into())
        }
    }
}

fn read_indices(path: &Path) -> Result<Vec<usize>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (row, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        out.push(
            line.parse()
                .map_err(|_| Failure::usage(format!("{}:{}: {line:?} is not an index", path.display(), row + 1)))?,
        );
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

struct Diagnose {
    common: Common,
    data: DataArgs,
    report: ReportArgs,
    diagnose: DiagnoseArgs,
}

impl Diagnose {
    fn resolve(opts: DiagnoseOpts) -> Result<Self, Failure> {
        let file = FileConfig::load_optional(opts.config.as_deref())?;
        Ok(Diagnose {
            common: opts.common.overlay(file.common),
            data: opts.data.overlay(file.data),
            report: opts.report.overlay(file.report),
            diagnose: opts.diagnose.overlay(file.diagnose),
        })
    }

    fn config(&self) -> Result<SpecConfig, Failure> {
        spec_config(&self.common, &self.data, &self.report)
    }

    /// The given index set, or the top side-A cluster of a comparison.
    fn index_set(&self, cfg: &SpecConfig, paired: &PairedDataset) -> Result<Vec<usize>, Failure> {
        if let Some(path) = &self.diagnose.indices {
            return read_indices(path);
        }
        let mut opts = cfg.options();
        opts.top_k = 1;
        let result = compare(paired, &opts)?;
        let top = result.side_a().next().ok_or(Error::NoClusters)?;
        let mut set = top.indices.clone();
        set.sort_unstable();
        Ok(set)
    }

    fn exact_kernels(&self, cfg: &SpecConfig, paired: &PairedDataset) -> Result<(ndarray::Array2<f64>, ndarray::Array2<f64>), Failure> {
        if paired.n() > DEFAULT_ORACLE_CAP {
            return Err(Error::CapExceeded {
                n: paired.n(),
                cap: DEFAULT_ORACLE_CAP,
            }
            .into());
        }
        Ok((
            exact_kernel_matrix(paired.a().data(), &cfg.kernel_a)?,
            exact_kernel_matrix(paired.b().data(), &cfg.kernel_b)?,
        ))
    }
}

pub fn cmd_diagnose(cmd: DiagnoseCmd) -> Result<(), Failure> {
    match cmd {
        DiagnoseCmd::Theorem1(opts) => {
            let d = Diagnose::resolve(opts)?;
            let cfg = d.config()?;
            let paired = load_pair(&cfg.emb_a, &cfg.emb_b)?;
            let set = d.index_set(&cfg, &paired)?;
            let (k1, k2) = d.exact_kernels(&cfg, &paired)?;
            let cert = theorem1_certificate(k1.view(), k2.view(), &set)?;
            emit(d.common.out.as_deref(), &to_json(&json!({ "theorem1": cert })))?;
            if !cert.satisfied {
                return Err(Failure::Certificate(format!("lhs {:e} exceeds xi {:e}", cert.lhs, cert.xi)));
            }
            Ok(())
        }
        DiagnoseCmd::Corollary1(opts) => {
            let d = Diagnose::resolve(opts)?;
            let cfg = d.config()?;
            let paired = load_pair(&cfg.emb_a, &cfg.emb_b)?;
            let set = d.index_set(&cfg, &paired)?;
            let (k1, k2) = d.exact_kernels(&cfg, &paired)?;
            let index = d.diagnose.eigen_index.unwrap_or(0);
            match corollary1_check(k1.view(), k2.view(), &set, index) {
                Ok(check) => {
                    emit(
                        d.common.out.as_deref(),
                        &to_json(&json!({ "corollary1": { "applicable": true, "check": check } })),
                    )?;
                    if !check.satisfied {
                        return Err(Failure::Certificate(format!(
                            "tail norm {:e} exceeds bound {:e}",
                            check.actual_tail_norm, check.bound
                        )));
                    }
                    Ok(())
                }
                Err(Error::CorollaryInapplicable { gap }) => {
                    log::warn!("eigengap {gap:e} is not positive; the tail bound does not apply");
                    emit(
                        d.common.out.as_deref(),
                        &to_json(&json!({ "corollary1": { "applicable": false, "gap": gap } })),
                    )
                }
                Err(e) => Err(e.into()),
            }
        }
        DiagnoseCmd::RffResidual(opts) => {
            let d = Diagnose::resolve(opts)?;
            let sigma_a = d.data.sigma_a.ok_or_else(|| Failure::usage("--sigma-a is required"))?;
            let sigma_b = d.data.sigma_b.ok_or_else(|| Failure::usage("--sigma-b is required"))?;
            let paired = load_pair(required(&d.data.emb_a, "--emb-a")?, required(&d.data.emb_b, "--emb-b")?)?;
            let report = rff_residual(
                &paired,
                sigma_a,
                sigma_b,
                d.data.rff_dim.unwrap_or(DEFAULT_RFF_DIM),
                d.diagnose.delta.unwrap_or(DEFAULT_DELTA),
                d.common.seed.unwrap_or(0),
            )?;
            if !report.satisfied {
                // The bound holds with probability 1 − δ, so a miss is not a bug.
                log::warn!("residual {:e} exceeds bound {:e}", report.residual_sum, report.bound);
            }
            emit(d.common.out.as_deref(), &to_json(&json!({ "rff_residual": report })))
        }
        DiagnoseCmd::Validate(opts) => {
            let d = Diagnose::resolve(opts)?;
            let cfg = d.config()?;
            let (paired, result) = run_compare(&cfg)?;
            let mut validation = validate_clusters(
                &result,
                &paired,
                d.diagnose.k.unwrap_or(cfg.top_k),
                d.diagnose.runs.unwrap_or(DEFAULT_KMEANS_RUNS),
                cfg.seed,
            )?;
            if let Some(path) = &d.report.labels {
                let labels = load_labels(path)?;
                labels.check_len(paired.n())?;
                validation.reference = Some(compare_with_labels(&result, &labels)?);
            }
            emit(d.common.out.as_deref(), &to_json(&json!({ "validation": validation })))
        }
    }
}

pub fn cmd_bandwidth(cmd: BandwidthCmd) -> Result<(), Failure> {
    let file = FileConfig::load_optional(cmd.config.as_deref())?;
    let common = cmd.common.overlay(file.common);
    let data = cmd.data.overlay(file.data);
    let bw = cmd.bandwidth.overlay(file.bandwidth);
    let target = bw.target.ok_or_else(|| Failure::usage("--target is required"))?;
    let emb = load_embedding_auto(required(&data.emb_a, "--emb-a")?)?;
    let sigma = select_bandwidth(
        &emb,
        target,
        bw.tol.unwrap_or(DEFAULT_BANDWIDTH_TOL),
        data.rff_dim.unwrap_or(DEFAULT_RFF_DIM),
        common.seed.unwrap_or(0),
    )?;
    emit(common.out.as_deref(), &format!("{sigma}\n"))
}
