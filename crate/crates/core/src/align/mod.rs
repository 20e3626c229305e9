//! Spectral radius of `Γ` as a distance between embeddings, its gradient
//! for a linear trainable map, and plain gradient descent on it.

mod descent;
mod diff;
mod gradient;
mod power;

pub use descent::{
    align_descent, align_descent_from, initial_weights, write_trajectory, AlignConfig, AlignRecord, AlignState,
    NoTask, TaskLoss, DIVERGENCE_FACTOR, JITTER_STD, MAX_JITTER_RETRIES,
};
pub use diff::{
    spec_diff, spec_diff_gamma, spec_diff_with, SpecDiffMethod, SpecDiffOptions, SpecDiffResult, DEGENERACY_REL_GAP,
    ZERO_RHO_REL,
};
pub use gradient::{gradient_from, linear_gamma, linear_spec_diff, spec_diff_gradient};
pub use power::{power_top_eigenpair, PowerResult, PowerSide};
