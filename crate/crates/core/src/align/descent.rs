use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::diff::SpecDiffResult;
use super::gradient::{grad_norm, gradient_from, linear_spec_diff, subgradient};
use crate::error::{Error, Result};

/// Standard deviation of the perturbation applied at degenerate points.
pub const JITTER_STD: f64 = 1e-8;

/// Attempts to leave a degenerate point before giving up.
pub const MAX_JITTER_RETRIES: usize = 20;

/// Spec-diff growth factor over the initial value that aborts descent.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

/// A differentiable task loss on the parameter matrix.
pub trait TaskLoss {
    /// Loss value and gradient with respect to `W`.
    fn evaluate(&self, w: ArrayView2<f64>) -> (f64, Array2<f64>);
}

/// The constant zero loss.
pub struct NoTask;

impl TaskLoss for NoTask {
    fn evaluate(&self, w: ArrayView2<f64>) -> (f64, Array2<f64>) {
        (0.0, Array2::zeros(w.raw_dim()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignConfig {
    /// Weight of the spec-diff penalty.
    pub beta: f64,
    pub step: f64,
    pub iterations: usize,
    /// Output width of the trainable map.
    pub out_dim: usize,
    /// Seeds the initial `W` and the jitter.
    pub seed: u64,
    /// Stop after this many consecutive steps without a new lowest spec-diff.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patience: Option<usize>,
}

impl AlignConfig {
    pub fn new(out_dim: usize, step: f64, iterations: usize) -> Self {
        AlignConfig {
            beta: 1.0,
            step,
            iterations,
            out_dim,
            seed: 0,
            patience: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step >= 0.0 && self.step.is_finite()) {
            return Err(Error::invalid(format!("step must be non-negative, got {}", self.step)));
        }
        if !self.beta.is_finite() {
            return Err(Error::invalid("beta must be finite"));
        }
        if self.out_dim == 0 {
            return Err(Error::invalid("out_dim must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignRecord {
    pub iteration: usize,
    pub spec_diff: f64,
    pub task_loss: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Debug)]
pub struct AlignState {
    pub w: Array2<f64>,
    pub beta: f64,
    pub step: f64,
    pub history: Vec<AlignRecord>,
    /// Perturbations applied to leave degenerate points.
    pub jitter_retries: usize,
    /// Steps taken along a subgradient because jitter did not restore a gap.
    pub degenerate_steps: usize,
    /// Descent ended before `iterations` because of `patience`.
    pub stopped_early: bool,
}

impl AlignState {
    pub fn initial_spec_diff(&self) -> f64 {
        self.history[0].spec_diff
    }

    pub fn final_spec_diff(&self) -> f64 {
        self.history.last().expect("history has the initial row").spec_diff
    }

    /// Fraction of steps that did not increase spec-diff.
    pub fn monotone_fraction(&self) -> f64 {
        let steps = self.history.len().saturating_sub(1);
        if steps == 0 {
            return 1.0;
        }
        let ok = self
            .history
            .windows(2)
            .filter(|w| w[1].spec_diff <= w[0].spec_diff)
            .count();
        ok as f64 / steps as f64
    }
}

/// Random `out_dim x d_x` start with entries `N(0, 1/d_x)`.
pub fn initial_weights(out_dim: usize, in_dim: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (in_dim.max(1) as f64).sqrt();
    Array2::from_shape_simple_fn((out_dim, in_dim), || {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * scale
    })
}

/// Gradient descent on `task + β · spec_diff` from a seeded random start.
pub fn align_descent(raw_inputs: ArrayView2<f64>, reference: ArrayView2<f64>, config: &AlignConfig) -> Result<AlignState> {
    let w0 = initial_weights(config.out_dim, raw_inputs.ncols(), config.seed);
    align_descent_from(raw_inputs, reference, w0, config, &NoTask)
}

struct Point {
    diff: SpecDiffResult,
    task: f64,
    grad: Array2<f64>,
}

/// Gradient descent from an explicit start with a task loss.
///
/// History row 0 is the start; row `i` is the state after step `i`, with
/// the gradient norm at that state. A point where the top eigenvalue is not
/// unique is perturbed with `N(0, JITTER_STD²)` noise and re-evaluated.
pub fn align_descent_from(
    raw_inputs: ArrayView2<f64>,
    reference: ArrayView2<f64>,
    w0: Array2<f64>,
    config: &AlignConfig,
    task: &dyn TaskLoss,
) -> Result<AlignState> {
    config.validate()?;
    if w0.ncols() != raw_inputs.ncols() {
        return Err(Error::DimensionMismatch {
            expected: raw_inputs.ncols(),
            found: w0.ncols(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x6a09_e667_f3bc_c908);
    let jitter = Normal::new(0.0, JITTER_STD).expect("valid normal");
    let mut retries = 0usize;
    let mut degenerate_steps = 0usize;

    let mut eval = |w: &mut Array2<f64>, retries: &mut usize, degenerate_steps: &mut usize| -> Result<Point> {
        let mut attempts = 0;
        loop {
            let diff = linear_spec_diff(raw_inputs, w.view(), reference)?;
            let (task_value, task_grad) = task.evaluate(w.view());
            if config.beta == 0.0 {
                return Ok(Point {
                    diff,
                    task: task_value,
                    grad: task_grad,
                });
            }
            let spec_grad = match gradient_from(raw_inputs, w.view(), reference, &diff) {
                Ok(g) => g,
                Err(Error::DegenerateTop { relative_gap }) if attempts < MAX_JITTER_RETRIES => {
                    log::debug!("degenerate top eigenvalue (relative gap {relative_gap:e}); perturbing W");
                    w.mapv_inplace(|x| x + jitter.sample(&mut rng));
                    attempts += 1;
                    *retries += 1;
                    continue;
                }
                Err(Error::DegenerateTop { relative_gap }) => {
                    log::warn!(
                        "top eigenvalue still tied after {MAX_JITTER_RETRIES} perturbations \
                         (relative gap {relative_gap:e}); stepping along a subgradient"
                    );
                    *degenerate_steps += 1;
                    subgradient(raw_inputs, w.view(), reference, &diff)
                }
                Err(e) => return Err(e),
            };
            return Ok(Point {
                diff,
                task: task_value,
                grad: task_grad + spec_grad * config.beta,
            });
        }
    };

    let mut w = w0;
    let mut point = eval(&mut w, &mut retries, &mut degenerate_steps)?;
    let initial = point.diff.rho;
    let mut history = vec![AlignRecord {
        iteration: 0,
        spec_diff: initial,
        task_loss: point.task,
        grad_norm: grad_norm(&point.grad),
    }];
    let mut best = initial;
    let mut since_best = 0usize;
    let mut stopped_early = false;
    for iteration in 1..=config.iterations {
        if config.step != 0.0 {
            w.scaled_add(-config.step, &point.grad);
        }
        point = eval(&mut w, &mut retries, &mut degenerate_steps)?;
        let value = point.diff.rho;
        history.push(AlignRecord {
            iteration,
            spec_diff: value,
            task_loss: point.task,
            grad_norm: grad_norm(&point.grad),
        });
        if !value.is_finite() || value > DIVERGENCE_FACTOR * initial && initial > 0.0 {
            return Err(Error::Divergence {
                iteration,
                value,
                initial,
                history,
            });
        }
        if value < best {
            best = value;
            since_best = 0;
        } else {
            since_best += 1;
        }
        if config.patience.is_some_and(|p| since_best >= p) {
            stopped_early = true;
            break;
        }
    }
    Ok(AlignState {
        w,
        beta: config.beta,
        step: config.step,
        history,
        jitter_retries: retries,
        degenerate_steps,
        stopped_early,
    })
}

/// Writes `iteration,spec_diff,task_loss,grad_norm` rows.
pub fn write_trajectory<W: std::io::Write>(history: &[AlignRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "iteration,spec_diff,task_loss,grad_norm")?;
    for r in history {
        writeln!(out, "{},{:e},{:e},{:e}", r.iteration, r.spec_diff, r.task_loss, r.grad_norm)?;
    }
    out.flush()
}
