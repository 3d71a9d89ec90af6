use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    /// Mean over rows of `(y - t)^2`; output width must be 1.
    Mse,
    /// Mean over rows of `-log softmax(y)[t]`; targets hold class indices.
    CrossEntropy,
}

pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of one categorical prediction and its gradient w.r.t. the logits.
pub fn softmax_cross_entropy<T: Scalar>(logits: &[T], target: usize) -> (T, Vec<T>) {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let sum: T = logits.iter().map(|&v| (v - max).exp()).sum();
    let log_z = max + sum.ln();
    let loss = log_z - logits[target];
    let grad = logits
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let p = (v - log_z).exp();
            if i == target {
                p - T::one()
            } else {
                p
            }
        })
        .collect();
    (loss, grad)
}

/// Loss value and d loss / d output.
pub fn evaluate<T: Scalar>(loss: Loss, output: &Matrix<T>, targets: &[T]) -> Result<(T, Matrix<T>)> {
    let n = output.rows();
    if targets.len() != n || n == 0 {
        return Err(Error::shape(format!(
            "{} targets for {} output rows",
            targets.len(),
            n
        )));
    }
    let inv_n = T::one() / T::from_usize_lossy(n);
    let mut grad = Matrix::zeros(n, output.cols());
    let mut total = T::zero();
    match loss {
        Loss::Mse => {
            if output.cols() != 1 {
                return Err(Error::shape("mse expects a single output column"));
            }
            for (r, &t) in targets.iter().enumerate() {
                let e = output.get(r, 0) - t;
                total = total + e * e;
                grad.set(r, 0, T::lit(2.0) * e * inv_n);
            }
        }
        Loss::CrossEntropy => {
            for (r, &t) in targets.iter().enumerate() {
                let class = t
                    .to_usize()
                    .filter(|&c| c < output.cols() && T::from_usize_lossy(c) == t)
                    .ok_or_else(|| Error::shape(format!("invalid class target {t}")))?;
                let (l, g) = softmax_cross_entropy(output.row(r), class);
                total = total + l;
                for (dst, v) in grad.row_mut(r).iter_mut().zip(g) {
                    *dst = v * inv_n;
                }
            }
        }
    }
    Ok((total * inv_n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_logits_cost_log_classes() {
        let (l, g) = softmax_cross_entropy(&[0.3f64; 4], 2);
        assert!((l - 4f64.ln()).abs() < 1e-12);
        assert!((g.iter().sum::<f64>()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn softmax_rows_sum_to_one(v in prop::collection::vec(-30.0f64..30.0, 1..10)) {
            let s = softmax(&v);
            prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let t = v.len() / 2;
            prop_assert!(softmax_cross_entropy(&v, t).0 >= 0.0);
        }
    }
}
