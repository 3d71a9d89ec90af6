//! Global pooling of per-position token states into one sequence vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{softmax, Matrix};
use crate::scalar::dot;
use crate::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    /// `w_i = ω·exp(h_i) / Σ_j ω·exp(h_j)`. Weights can be negative when ω has
    /// negative entries.
    #[default]
    Attention,
    /// `w = softmax(ω·h_i)`.
    Softmax,
}

impl Pooling {
    pub fn name(self) -> &'static str {
        match self {
            Pooling::Attention => "attention",
            Pooling::Softmax => "softmax",
        }
    }
}

const DENOM_FLOOR: f64 = 1e-12;

/// Pooled vector and the per-position weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Pooled<T> {
    pub vector: Vec<T>,
    pub weights: Vec<T>,
}

fn weighted_sum<T: Scalar>(states: &Matrix<T>, weights: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); states.cols()];
    for (row, &w) in states.row_iter().zip(weights) {
        for (o, &h) in out.iter_mut().zip(row) {
            *o = *o + w * h;
        }
    }
    out
}

/// Attention pooling over the rows of `states` (`L x d_h`).
pub fn attention_pool<T: Scalar>(states: &Matrix<T>, omega: &[T]) -> Result<Pooled<T>> {
    pool(Pooling::Attention, states, omega)
}

pub fn pool<T: Scalar>(kind: Pooling, states: &Matrix<T>, omega: &[T]) -> Result<Pooled<T>> {
    if states.cols() != omega.len() || states.rows() == 0 {
        return Err(Error::shape(format!(
            "pooling {}x{} states with a {}-vector",
            states.rows(),
            states.cols(),
            omega.len()
        )));
    }
    let weights = match kind {
        Pooling::Attention => {
            // a_i = ω·exp(h_i - c); the common factor exp(c) cancels in the ratio
            let c = states.as_slice().iter().copied().fold(T::neg_infinity(), T::max);
            let scores: Vec<T> = states
                .row_iter()
                .map(|h| h.iter().zip(omega).fold(T::zero(), |acc, (&v, &w)| acc + w * (v - c).exp()))
                .collect();
            let denom: T = scores.iter().copied().sum();
            let log_abs = denom.abs().ln() + c;
            if !(log_abs > T::lit(DENOM_FLOOR.ln())) {
                return Err(Error::AttentionUnderflow);
            }
            scores.into_iter().map(|a| a / denom).collect()
        }
        Pooling::Softmax => {
            let scores: Vec<T> = states.row_iter().map(|h| dot(h, omega)).collect();
            softmax(&scores)
        }
    };
    Ok(Pooled {
        vector: weighted_sum(states, &weights),
        weights,
    })
}

/// Gradients of a pooled vector with respect to the token states and ω,
/// given `grad` = d loss / d pooled.
pub fn pool_backward<T: Scalar>(
    kind: Pooling,
    states: &Matrix<T>,
    omega: &[T],
    pooled: &Pooled<T>,
    grad: &[T],
) -> (Matrix<T>, Vec<T>) {
    let mut d_states = Matrix::zeros(states.rows(), states.cols());
    let mut d_omega = vec![T::zero(); omega.len()];
    let g_dot_h = dot(grad, &pooled.vector);
    match kind {
        Pooling::Attention => {
            let c = states.as_slice().iter().copied().fold(T::neg_infinity(), T::max);
            let denom_scaled: T = states
                .row_iter()
                .map(|h| h.iter().zip(omega).fold(T::zero(), |acc, (&v, &w)| acc + w * (v - c).exp()))
                .sum();
            for (i, h) in states.row_iter().enumerate() {
                let w = pooled.weights[i];
                // d loss / d a_i, expressed with scaled exponentials
                let da = (dot(grad, h) - g_dot_h) / denom_scaled;
                let row = d_states.row_mut(i);
                for k in 0..h.len() {
                    let e = (h[k] - c).exp();
                    row[k] = w * grad[k] + da * omega[k] * e;
                    d_omega[k] = d_omega[k] + da * e;
                }
            }
        }
        Pooling::Softmax => {
            for (i, h) in states.row_iter().enumerate() {
                let w = pooled.weights[i];
                let ds = w * (dot(grad, h) - g_dot_h);
                let row = d_states.row_mut(i);
                for k in 0..h.len() {
                    row[k] = w * grad[k] + ds * omega[k];
                    d_omega[k] = d_omega[k] + ds * h[k];
                }
            }
        }
    }
    (d_states, d_omega)
}
