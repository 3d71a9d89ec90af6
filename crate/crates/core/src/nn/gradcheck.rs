use super::loss::Loss;
use super::matrix::Matrix;
use super::net::{forward, forward_backward, Mode, NetSpec, Params};
use super::ParamSlices;
use crate::error::{Error, Result};
use crate::Scalar;

/// Central differences of a scalar function at `x`.
pub fn central_difference<T: Scalar>(
    mut f: impl FnMut(&[T]) -> Result<T>,
    x: &[T],
    eps: T,
) -> Result<Vec<T>> {
    let mut probe = x.to_vec();
    let two = T::lit(2.0);
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + eps;
            let up = f(&probe)?;
            probe[i] = orig - eps;
            let down = f(&probe)?;
            probe[i] = orig;
            Ok((up - down) / (two * eps))
        })
        .collect()
}

/// `max_i |a_i - n_i| / max(1, |a_i|)`.
pub fn max_relative_error<T: Scalar>(analytic: &[T], numeric: &[T]) -> T {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(T::one()))
        .fold(T::zero(), T::max)
}

fn check_eps<T: Scalar>(eps: T) -> Result<()> {
    if eps < T::lit(1e-7) || eps > T::lit(1e-3) {
        return Err(Error::param(format!("epsilon {eps} outside [1e-7, 1e-3]")));
    }
    Ok(())
}

/// Compares infer-mode analytic gradients (parameters and inputs) against
/// central differences and returns the worst relative error.
pub fn finite_diff_check<T: Scalar>(
    params: &Params<T>,
    spec: &NetSpec,
    x: &Matrix<T>,
    targets: &[T],
    loss: Loss,
    eps: T,
) -> Result<T> {
    check_eps(eps)?;
    let report = forward_backward(params, spec, x, targets, loss, Mode::Infer, 0)?;
    let eval = |p: &Params<T>, x: &Matrix<T>| -> Result<T> {
        let out = forward(p, spec, x, Mode::Infer, 0)?;
        Ok(super::loss::evaluate(loss, &out, targets)?.0)
    };

    let mut worst = T::zero();
    let grads = report.params.slices();
    let n_slices = grads.len();
    for si in 0..n_slices {
        let base: Vec<T> = params.slices()[si].to_vec();
        let numeric = central_difference(
            |v| {
                let mut p = params.clone();
                p.slices_mut()[si].copy_from_slice(v);
                eval(&p, x)
            },
            &base,
            eps,
        )?;
        worst = worst.max(max_relative_error(grads[si], &numeric));
    }
    let numeric = central_difference(
        |v| {
            let xm = Matrix::from_vec(x.rows(), x.cols(), v.to_vec())?;
            eval(params, &xm)
        },
        x.as_slice(),
        eps,
    )?;
    Ok(worst.max(max_relative_error(report.inputs.as_slice(), &numeric)))
}
