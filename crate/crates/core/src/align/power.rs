use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spec::GammaMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerSide {
    /// Iterate with `Γ`, giving a right eigenvector.
    Right,
    /// Iterate with `Γᵀ`, giving a left eigenvector.
    Left,
}

/// Outcome of a power iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerResult {
    pub lambda: f64,
    /// Unit-norm eigenvector estimate.
    pub vector: Array1<f64>,
    pub iterations: usize,
}

/// Dominant-magnitude eigenpair of `Γ` or `Γᵀ` by power iteration.
///
/// Stops once successive Rayleigh quotients differ by less than `tol` and
/// the residual `‖Γv − λv‖` is below `√tol · max(1, ‖Γ‖_F)`. If an iterate
/// is mapped to (numerically) zero the matrix acts nilpotently on the start
/// vector and `λ = 0` is returned.
pub fn power_top_eigenpair(
    gamma: &GammaMatrix,
    side: PowerSide,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<PowerResult> {
    if !(tol > 0.0) {
        return Err(Error::invalid("power iteration tolerance must be positive"));
    }
    let a: Array2<f64> = match side {
        PowerSide::Right => gamma.data().clone(),
        PowerSide::Left => gamma.data().t().to_owned(),
    };
    let dim = a.nrows();
    let fro = gamma.frobenius();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Array1<f64> = Array1::from_iter((0..dim).map(|_| StandardNormal.sample(&mut rng)));
    let nv = v.dot(&v).sqrt();
    if dim == 0 || nv == 0.0 {
        return Ok(PowerResult {
            lambda: 0.0,
            vector: v,
            iterations: 0,
        });
    }
    v /= nv;
    if fro == 0.0 {
        return Ok(PowerResult {
            lambda: 0.0,
            vector: v,
            iterations: 0,
        });
    }

    let res_tol = tol.sqrt() * fro.max(1.0);
    let mut prev = f64::NAN;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let w = a.dot(&v);
        let nw = w.dot(&w).sqrt();
        if nw <= 1e-12 * fro {
            return Ok(PowerResult {
                lambda: 0.0,
                vector: v,
                iterations: it,
            });
        }
        let rq = v.dot(&w);
        let r = &w - &(&v * rq);
        residual = r.dot(&r).sqrt();
        if (rq - prev).abs() < tol && residual <= res_tol {
            return Ok(PowerResult {
                lambda: rq,
                vector: v,
                iterations: it,
            });
        }
        prev = rq;
        v = w / nw;
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual,
    })
}
