use ndarray::{s, Array2, ArrayView1, ArrayView2, Axis};

use super::diff::{spec_diff_gamma, SpecDiffOptions, SpecDiffResult};
use crate::error::{Error, Result};
use crate::spec::{build_gamma, DifferentialCovariance, GammaMatrix};

/// `Γ` for the linear embedding `x ↦ Wx` against fixed reference features,
/// both under the linear kernel.
pub fn linear_gamma(
    raw_inputs: ArrayView2<f64>,
    w: ArrayView2<f64>,
    reference: ArrayView2<f64>,
) -> Result<GammaMatrix> {
    check_shapes(raw_inputs, w, reference)?;
    let n = raw_inputs.nrows() as f64;
    let p = raw_inputs.dot(&w.t());
    let cov = DifferentialCovariance {
        c1: p.t().dot(&p) / n,
        c2: reference.t().dot(&reference) / n,
        c12: p.t().dot(&reference) / n,
        n_seen: raw_inputs.nrows(),
    };
    Ok(build_gamma(&cov))
}

/// `ρ(Γ)` of the linear embedding against the reference.
pub fn linear_spec_diff(
    raw_inputs: ArrayView2<f64>,
    w: ArrayView2<f64>,
    reference: ArrayView2<f64>,
) -> Result<SpecDiffResult> {
    spec_diff_gamma(&linear_gamma(raw_inputs, w, reference)?, &SpecDiffOptions::default())
}

/// Gradient of `ρ(Γ)` with respect to `W`.
///
/// With left eigenvector `(a; c)` and right eigenvector `(b; e)` held fixed
/// and `Σx = XᵀX/n`, `Σxf = XᵀF/n`,
///
/// ```text
/// ∇ = sign(λ) [ (a bᵀ + b aᵀ) W Σx + (a eᵀ − b cᵀ) Σxfᵀ ]
/// ```
///
/// The rows of `raw_inputs` may be a mini-batch; every term is a sample mean.
pub fn spec_diff_gradient(
    raw_inputs: ArrayView2<f64>,
    w: ArrayView2<f64>,
    reference: ArrayView2<f64>,
) -> Result<Array2<f64>> {
    let diff = linear_spec_diff(raw_inputs, w, reference)?;
    gradient_from(raw_inputs, w, reference, &diff)
}

/// Gradient at a point whose spec-diff has already been computed.
pub fn gradient_from(
    raw_inputs: ArrayView2<f64>,
    w: ArrayView2<f64>,
    reference: ArrayView2<f64>,
    diff: &SpecDiffResult,
) -> Result<Array2<f64>> {
    check_shapes(raw_inputs, w, reference)?;
    if diff.rho == 0.0 {
        return Ok(Array2::zeros(w.raw_dim()));
    }
    if diff.degenerate {
        return Err(Error::DegenerateTop {
            relative_gap: diff.relative_gap,
        });
    }
    Ok(subgradient(raw_inputs, w, reference, diff))
}

/// The gradient formula applied to whichever top eigenpair the solver
/// returned, without the uniqueness check. At a degenerate point this is one
/// element of the subdifferential.
pub(crate) fn subgradient(
    raw_inputs: ArrayView2<f64>,
    w: ArrayView2<f64>,
    reference: ArrayView2<f64>,
    diff: &SpecDiffResult,
) -> Array2<f64> {
    if diff.rho == 0.0 {
        return Array2::zeros(w.raw_dim());
    }
    let d1 = w.nrows();
    let n = raw_inputs.nrows() as f64;
    let left = diff.left();
    let right = diff.right();
    let (a, c) = (left.slice(s![..d1]), left.slice(s![d1..]));
    let (b, e) = (right.slice(s![..d1]), right.slice(s![d1..]));

    let sigma_x = raw_inputs.t().dot(&raw_inputs) / n;
    let sigma_xf = raw_inputs.t().dot(&reference) / n;
    let sym = outer(a, b) + outer(b, a);
    let cross = outer(a, e) - outer(b, c);
    let grad = sym.dot(&w).dot(&sigma_x) + cross.dot(&sigma_xf.t());
    grad * diff.lambda_top.signum()
}

fn outer(x: ArrayView1<f64>, y: ArrayView1<f64>) -> Array2<f64> {
    let xc = x.insert_axis(Axis(1));
    let yr = y.insert_axis(Axis(0));
    xc.dot(&yr)
}

fn check_shapes(raw_inputs: ArrayView2<f64>, w: ArrayView2<f64>, reference: ArrayView2<f64>) -> Result<()> {
    if raw_inputs.nrows() != reference.nrows() {
        return Err(Error::CountMismatch {
            a: raw_inputs.nrows(),
            b: reference.nrows(),
        });
    }
    if raw_inputs.nrows() == 0 {
        return Err(Error::invalid("no samples"));
    }
    if w.ncols() != raw_inputs.ncols() {
        return Err(Error::DimensionMismatch {
            expected: raw_inputs.ncols(),
            found: w.ncols(),
        });
    }
    Ok(())
}

/// Frobenius norm of a gradient.
pub(crate) fn grad_norm(g: &Array2<f64>) -> f64 {
    g.iter().map(|x| x * x).sum::<f64>().sqrt()
}
