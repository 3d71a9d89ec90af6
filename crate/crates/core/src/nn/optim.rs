use serde::{Deserialize, Serialize};

use super::ParamSlices;
use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scheme {
    SgdMomentum {
        #[serde(default)]
        momentum: f64,
    },
    /// First-order steps scaled by running second-moment estimates.
    Adaptive {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub scheme: Scheme,
    pub step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Adaptive {
                beta1: default_beta1(),
                beta2: default_beta2(),
                eps: default_eps(),
            },
            step: 1e-3,
        }
    }
}

impl OptimizerConfig {
    pub fn sgd(step: f64, momentum: f64) -> Self {
        Self {
            scheme: Scheme::SgdMomentum { momentum },
            step,
        }
    }

    pub fn adaptive(step: f64) -> Self {
        Self {
            step,
            ..Self::default()
        }
    }
}

/// Optimizer settings plus per-parameter accumulators.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState<T> {
    pub config: OptimizerConfig,
    pub steps: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new<P: ParamSlices<T>>(config: OptimizerConfig, params: &P) -> Result<Self> {
        if !(config.step > 0.0) {
            return Err(Error::param("optimizer step must be positive"));
        }
        let zeros: Vec<Vec<T>> = params.slices().iter().map(|s| vec![T::zero(); s.len()]).collect();
        let second = match config.scheme {
            Scheme::Adaptive { .. } => zeros.clone(),
            Scheme::SgdMomentum { .. } => Vec::new(),
        };
        Ok(Self {
            config,
            steps: 0,
            first: zeros,
            second,
        })
    }

    /// One in-place step.
    pub fn step<P: ParamSlices<T>>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let gs = grads.slices();
        if gs.iter().any(|s| s.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("gradient".into()));
        }
        let mut ps = params.slices_mut();
        if ps.len() != gs.len()
            || ps.len() != self.first.len()
            || ps.iter().zip(&gs).any(|(p, g)| p.len() != g.len())
        {
            return Err(Error::shape("gradient shapes do not match parameters"));
        }
        self.steps += 1;
        let lr = T::lit(self.config.step);
        match self.config.scheme {
            Scheme::SgdMomentum { momentum } => {
                let mu = T::lit(momentum);
                for ((p, g), v) in ps.iter_mut().zip(&gs).zip(&mut self.first) {
                    for ((w, &gi), vi) in p.iter_mut().zip(g.iter()).zip(v.iter_mut()) {
                        *vi = mu * *vi + gi;
                        *w = *w - lr * *vi;
                    }
                }
            }
            Scheme::Adaptive { beta1, beta2, eps } => {
                let (b1, b2) = (T::lit(beta1), T::lit(beta2));
                let one = T::one();
                let t = self.steps as i32;
                let c1 = one - b1.powi(t);
                let c2 = one - b2.powi(t);
                let eps = T::lit(eps);
                for (((p, g), m), v) in ps.iter_mut().zip(&gs).zip(&mut self.first).zip(&mut self.second) {
                    for (((w, &gi), mi), vi) in p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *mi = b1 * *mi + (one - b1) * gi;
                        *vi = b2 * *vi + (one - b2) * gi * gi;
                        let mhat = *mi / c1;
                        let vhat = *vi / c2;
                        *w = *w - lr * mhat / (vhat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Pure form of [`OptimizerState::step`].
pub fn apply_update<T: Scalar, P: ParamSlices<T> + Clone>(
    params: &P,
    grads: &P,
    state: &OptimizerState<T>,
) -> Result<(P, OptimizerState<T>)> {
    let mut p = params.clone();
    let mut s = state.clone();
    s.step(&mut p, grads)?;
    Ok((p, s))
}
