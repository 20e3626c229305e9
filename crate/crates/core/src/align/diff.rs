use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::power::{power_top_eigenpair, PowerSide};
use crate::error::{Error, Result, StageExt};
use crate::io::PairedDataset;
use crate::kernels::FeatureMap;
use crate::spec::{accumulate, build_gamma, reduce_gamma, GammaMatrix, DEFAULT_CHUNK_SIZE};

/// Relative gap `(|λ₁| − |λ₂|)/|λ₁|` below which the top eigenvalue is
/// considered not unique.
pub const DEGENERACY_REL_GAP: f64 = 1e-6;

/// Spectral radii below this fraction of `tr(C1) + tr(C2)` are reported as 0.
pub const ZERO_RHO_REL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecDiffMethod {
    /// Symmetric reduction of `Γ`; exact and reports degeneracy.
    #[default]
    Dense,
    /// Power iteration on `Γ` and `Γᵀ`, falling back to `Dense` when it
    /// fails to converge.
    Power,
}

impl std::str::FromStr for SpecDiffMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(SpecDiffMethod::Dense),
            "power" => Ok(SpecDiffMethod::Power),
            other => Err(Error::invalid(format!("unknown spec-diff method {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecDiffOptions {
    pub method: SpecDiffMethod,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub chunk_size: usize,
}

impl Default for SpecDiffOptions {
    fn default() -> Self {
        SpecDiffOptions {
            method: SpecDiffMethod::Dense,
            tol: 1e-12,
            max_iter: 20_000,
            seed: 0,
            chunk_size: DEFAULT_CHUNK_SIZE,
        }
    }
}

/// Spectral radius of `Γ` with its bi-normalized left and right eigenvectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecDiffResult {
    pub rho: f64,
    pub lambda_top: f64,
    pub u_left: Vec<f64>,
    pub u_right: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Top magnitude not unique; the gradient is undefined here.
    pub degenerate: bool,
    pub relative_gap: f64,
}

impl SpecDiffResult {
    fn zero(dim: usize) -> Self {
        SpecDiffResult {
            rho: 0.0,
            lambda_top: 0.0,
            u_left: vec![0.0; dim],
            u_right: vec![0.0; dim],
            iterations: 0,
            converged: true,
            degenerate: false,
            relative_gap: 1.0,
        }
    }

    pub fn left(&self) -> Array1<f64> {
        Array1::from(self.u_left.clone())
    }

    pub fn right(&self) -> Array1<f64> {
        Array1::from(self.u_right.clone())
    }
}

/// `ρ(Γ)` for two embeddings of the same samples.
pub fn spec_diff(paired: &PairedDataset, map1: &FeatureMap, map2: &FeatureMap) -> Result<SpecDiffResult> {
    spec_diff_with(paired, map1, map2, &SpecDiffOptions::default())
}

pub fn spec_diff_with(
    paired: &PairedDataset,
    map1: &FeatureMap,
    map2: &FeatureMap,
    options: &SpecDiffOptions,
) -> Result<SpecDiffResult> {
    let cov = accumulate(paired, map1, map2, options.chunk_size).stage("accumulate")?;
    spec_diff_gamma(&build_gamma(&cov), options).stage("spec_diff")
}

/// [`spec_diff`] on an assembled `Γ`.
pub fn spec_diff_gamma(gamma: &GammaMatrix, options: &SpecDiffOptions) -> Result<SpecDiffResult> {
    match options.method {
        SpecDiffMethod::Dense => dense(gamma),
        SpecDiffMethod::Power => match power(gamma, options) {
            Err(e @ Error::NonConvergence { .. }) => {
                log::warn!("{e}; falling back to the dense solver");
                dense(gamma)
            }
            other => other,
        },
    }
}

fn dense(gamma: &GammaMatrix) -> Result<SpecDiffResult> {
    let red = reduce_gamma(gamma)?;
    let dim = gamma.dim();
    if red.rank() == 0 {
        return Ok(SpecDiffResult::zero(dim));
    }
    let mut order: Vec<usize> = (0..red.rank()).collect();
    order.sort_by(|&i, &j| red.values[j].abs().total_cmp(&red.values[i].abs()).then(i.cmp(&j)));
    let top = order[0];
    let mu = red.values[top];
    let rho = mu.abs();
    // tr(G) bounds every eigenvalue; anything this far below it is rounding.
    let trace: f64 = red.factor.iter().map(|x| x * x).sum();
    if rho <= ZERO_RHO_REL * trace {
        return Ok(SpecDiffResult::zero(dim));
    }
    let second = order.get(1).map(|&k| red.values[k].abs()).unwrap_or(0.0);
    let relative_gap = (rho - second) / rho;
    let scale = 1.0 / rho.sqrt();
    let u_left = red.left_vector(top) * scale;
    let u_right = red.right_vector(top) * (scale * mu.signum());
    Ok(SpecDiffResult {
        rho,
        lambda_top: mu,
        u_left: u_left.to_vec(),
        u_right: u_right.to_vec(),
        iterations: 0,
        converged: true,
        degenerate: relative_gap < DEGENERACY_REL_GAP,
        relative_gap,
    })
}

fn power(gamma: &GammaMatrix, options: &SpecDiffOptions) -> Result<SpecDiffResult> {
    let right = power_top_eigenpair(gamma, PowerSide::Right, options.tol, options.max_iter, options.seed)?;
    if right.lambda == 0.0 {
        return Ok(SpecDiffResult {
            iterations: right.iterations,
            ..SpecDiffResult::zero(gamma.dim())
        });
    }
    let left = power_top_eigenpair(gamma, PowerSide::Left, options.tol, options.max_iter, options.seed)?;
    let overlap = left.vector.dot(&right.vector);
    if overlap.abs() < f64::EPSILON {
        return Err(Error::Solver("left and right eigenvectors are orthogonal".into()));
    }
    Ok(SpecDiffResult {
        rho: right.lambda.abs(),
        lambda_top: right.lambda,
        u_left: (left.vector / overlap).to_vec(),
        u_right: right.vector.to_vec(),
        iterations: right.iterations + left.iterations,
        converged: true,
        degenerate: false,
        relative_gap: f64::NAN,
    })
}
