use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::loss::{self, Loss};
use super::matrix::{axpy, Matrix};
use super::ParamSlices;
use crate::error::{Error, Result};
use crate::random::{self, Rng};
use crate::scalar::dot;
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply<T: Scalar>(self, v: T) -> T {
        match self {
            Activation::Relu => v.max(T::zero()),
            Activation::Identity => v,
        }
    }

    /// Subgradient; relu uses 0 at exactly 0.
    #[inline]
    fn derivative<T: Scalar>(self, pre: T) -> T {
        match self {
            Activation::Relu if pre > T::zero() => T::one(),
            Activation::Relu => T::zero(),
            Activation::Identity => T::one(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
    /// Applied to this layer's output in train mode.
    #[serde(default)]
    pub dropout: f64,
}

/// Feed-forward architecture: an input width followed by dense layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub input: usize,
    pub layers: Vec<LayerSpec>,
}

impl NetSpec {
    pub fn new(input: usize, layers: Vec<LayerSpec>) -> Result<Self> {
        let spec = Self { input, layers };
        spec.validate()?;
        Ok(spec)
    }

    /// `input -> hidden (relu, dropout) -> ... -> out (identity)`.
    pub fn mlp(input: usize, hidden: &[usize], output: usize, dropout_first: f64) -> Result<Self> {
        let mut layers: Vec<LayerSpec> = hidden
            .iter()
            .enumerate()
            .map(|(i, &w)| LayerSpec {
                width: w,
                activation: Activation::Relu,
                dropout: if i == 0 { dropout_first } else { 0.0 },
            })
            .collect();
        layers.push(LayerSpec {
            width: output,
            activation: Activation::Identity,
            dropout: 0.0,
        });
        Self::new(input, layers)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::shape("network needs at least one layer"));
        }
        if self.input == 0 || self.layers.iter().any(|l| l.width == 0) {
            return Err(Error::shape("layer widths must be positive"));
        }
        if let Some(l) = self.layers.iter().find(|l| !(0.0..1.0).contains(&l.dropout)) {
            return Err(Error::param(format!("dropout {} outside [0, 1)", l.dropout)));
        }
        Ok(())
    }

    pub fn output(&self) -> usize {
        self.layers.last().map_or(self.input, |l| l.width)
    }

    /// Fan-in of layer `i`.
    pub fn fan_in(&self, i: usize) -> usize {
        if i == 0 {
            self.input
        } else {
            self.layers[i - 1].width
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense<T> {
    /// `fan_in x width`, so a row batch maps as `x · W + b`.
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

/// Weights and biases for every layer of a [`NetSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params<T> {
    pub layers: Vec<Dense<T>>,
}

impl<T: Scalar> Params<T> {
    pub fn zeros(spec: &NetSpec) -> Self {
        let layers = spec
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| Dense {
                weight: Matrix::zeros(spec.fan_in(i), l.width),
                bias: vec![T::zero(); l.width],
            })
            .collect();
        Self { layers }
    }

    /// Gaussian init scaled by fan-in (He for relu layers), zero biases.
    pub fn init(spec: &NetSpec, seed: u64) -> Self {
        let mut rng = random::seeded(seed);
        let mut p = Self::zeros(spec);
        for (i, (dense, l)) in p.layers.iter_mut().zip(&spec.layers).enumerate() {
            let gain = match l.activation {
                Activation::Relu => 2.0,
                Activation::Identity => 1.0,
            };
            let std = T::lit((gain / spec.fan_in(i) as f64).sqrt());
            for w in dense.weight.as_mut_slice() {
                *w = random::normal::<T>(&mut rng) * std;
            }
        }
        p
    }

    pub fn matches(&self, spec: &NetSpec) -> bool {
        self.layers.len() == spec.layers.len()
            && self.layers.iter().enumerate().all(|(i, d)| {
                d.weight.shape() == (spec.fan_in(i), spec.layers[i].width)
                    && d.bias.len() == spec.layers[i].width
            })
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|d| d.weight.is_finite() && d.bias.iter().all(|v| v.is_finite()))
    }
}

impl<T: Scalar> ParamSlices<T> for Params<T> {
    fn slices(&self) -> Vec<&[T]> {
        self.layers
            .iter()
            .flat_map(|d| [d.weight.as_slice(), d.bias.as_slice()])
            .collect()
    }

    fn slices_mut(&mut self) -> Vec<&mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|d| [d.weight.as_mut_slice(), d.bias.as_mut_slice()])
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Infer,
}

/// Intermediate values of one forward pass, consumed by [`backward`].
#[derive(Clone, Debug)]
pub struct Tape<T> {
    inputs: Vec<Matrix<T>>,
    pre: Vec<Matrix<T>>,
    /// Per-element dropout scale (0 or 1/keep) per layer, if dropout was active.
    masks: Vec<Option<Vec<T>>>,
    output: Matrix<T>,
}

impl<T: Scalar> Tape<T> {
    pub fn output(&self) -> &Matrix<T> {
        &self.output
    }
}

fn check_input<T: Scalar>(params: &Params<T>, spec: &NetSpec, x: &Matrix<T>) -> Result<()> {
    if x.cols() != spec.input {
        return Err(Error::shape(format!(
            "input has {} columns, network expects {}",
            x.cols(),
            spec.input
        )));
    }
    if !params.matches(spec) {
        return Err(Error::shape("parameters do not match network spec"));
    }
    Ok(())
}

/// Runs the network on a row batch, recording what backward needs.
pub fn forward_tape<T: Scalar>(
    params: &Params<T>,
    spec: &NetSpec,
    x: &Matrix<T>,
    mode: Mode,
    rng: &mut Rng,
) -> Result<Tape<T>> {
    check_input(params, spec, x)?;
    let n = spec.layers.len();
    let mut inputs = Vec::with_capacity(n);
    let mut pre = Vec::with_capacity(n);
    let mut masks = Vec::with_capacity(n);
    let mut cur = x.clone();
    for (dense, layer) in params.layers.iter().zip(&spec.layers) {
        let mut z = cur.matmul(&dense.weight)?;
        for r in 0..z.rows() {
            for (v, &b) in z.row_mut(r).iter_mut().zip(&dense.bias) {
                *v = *v + b;
            }
        }
        let mut out = z.clone();
        for v in out.as_mut_slice() {
            *v = layer.activation.apply(*v);
        }
        let mask = if mode == Mode::Train && layer.dropout > 0.0 {
            let keep = 1.0 - layer.dropout;
            let scale = T::lit(1.0 / keep);
            let m: Vec<T> = (0..out.as_slice().len())
                .map(|_| if rng.random::<f64>() < keep { scale } else { T::zero() })
                .collect();
            for (v, &s) in out.as_mut_slice().iter_mut().zip(&m) {
                *v = *v * s;
            }
            Some(m)
        } else {
            None
        };
        inputs.push(cur);
        pre.push(z);
        masks.push(mask);
        cur = out;
    }
    Ok(Tape {
        inputs,
        pre,
        masks,
        output: cur,
    })
}

/// Deterministic in infer mode; in train mode dropout masks come from `seed`.
pub fn forward<T: Scalar>(
    params: &Params<T>,
    spec: &NetSpec,
    x: &Matrix<T>,
    mode: Mode,
    seed: u64,
) -> Result<Matrix<T>> {
    let mut rng = random::seeded(seed);
    Ok(forward_tape(params, spec, x, mode, &mut rng)?.output)
}

/// Back-propagates `grad_out` (d loss / d output) through a recorded pass.
/// Returns parameter gradients and the gradient with respect to the input batch.
pub fn backward<T: Scalar>(
    params: &Params<T>,
    spec: &NetSpec,
    tape: &Tape<T>,
    grad_out: &Matrix<T>,
) -> Result<(Params<T>, Matrix<T>)> {
    if grad_out.shape() != tape.output.shape() {
        return Err(Error::shape("output gradient shape differs from forward output"));
    }
    let mut grads = Params::zeros(spec);
    let mut g = grad_out.clone();
    for li in (0..spec.layers.len()).rev() {
        let layer = &spec.layers[li];
        let dense = &params.layers[li];
        let pre = &tape.pre[li];
        let input = &tape.inputs[li];
        if let Some(mask) = &tape.masks[li] {
            for (v, &s) in g.as_mut_slice().iter_mut().zip(mask) {
                *v = *v * s;
            }
        }
        for (v, &z) in g.as_mut_slice().iter_mut().zip(pre.as_slice()) {
            *v = *v * layer.activation.derivative(z);
        }
        let gd = &mut grads.layers[li];
        let mut gin = Matrix::zeros(input.rows(), input.cols());
        for r in 0..g.rows() {
            let grow = g.row(r);
            for (b, &v) in gd.bias.iter_mut().zip(grow) {
                *b = *b + v;
            }
            for (k, &a) in input.row(r).iter().enumerate() {
                if a != T::zero() {
                    axpy(a, grow, gd.weight.row_mut(k));
                }
            }
            let gin_row = gin.row_mut(r);
            for (k, gi) in gin_row.iter_mut().enumerate() {
                *gi = dot(grow, dense.weight.row(k));
            }
        }
        g = gin;
    }
    Ok((grads, g))
}

/// Loss value with exact gradients for parameters and inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct GradReport<T> {
    pub loss: T,
    pub params: Params<T>,
    pub inputs: Matrix<T>,
}

pub fn forward_backward<T: Scalar>(
    params: &Params<T>,
    spec: &NetSpec,
    x: &Matrix<T>,
    targets: &[T],
    loss: Loss,
    mode: Mode,
    seed: u64,
) -> Result<GradReport<T>> {
    let mut rng = random::seeded(seed);
    let tape = forward_tape(params, spec, x, mode, &mut rng)?;
    if !tape.output.is_finite() {
        return Err(Error::NonFinite("network output".into()));
    }
    let (value, grad_out) = loss::evaluate(loss, &tape.output, targets)?;
    let (pg, xg) = backward(params, spec, &tape, &grad_out)?;
    if !value.is_finite() || !pg.is_finite() || !xg.is_finite() {
        return Err(Error::NonFinite("loss or gradient".into()));
    }
    Ok(GradReport {
        loss: value,
        params: pg,
        inputs: xg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(width_in: usize, width: usize, act: Activation, dropout: f64) -> NetSpec {
        NetSpec::new(
            width_in,
            vec![LayerSpec {
                width,
                activation: act,
                dropout,
            }],
        )
        .unwrap()
    }

    #[test]
    fn zero_weights_return_bias() {
        let spec = single(3, 2, Activation::Identity, 0.0);
        let mut p = Params::<f64>::zeros(&spec);
        p.layers[0].bias = vec![0.5, -1.5];
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![-4.0, 0.0, 9.0]]).unwrap();
        let y = forward(&p, &spec, &x, Mode::Infer, 0).unwrap();
        for row in y.row_iter() {
            assert_eq!(row, &[0.5, -1.5]);
        }
    }

    #[test]
    fn zero_dropout_train_equals_infer() {
        let spec = NetSpec::mlp(4, &[6], 2, 0.0).unwrap();
        let p = Params::<f64>::init(&spec, 3);
        let x = Matrix::from_rows(&[vec![0.1, -0.2, 0.3, 0.4]]).unwrap();
        let a = forward(&p, &spec, &x, Mode::Train, 9).unwrap();
        let b = forward(&p, &spec, &x, Mode::Infer, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn relu_clamps_negative() {
        let spec = single(1, 1, Activation::Relu, 0.0);
        let mut p = Params::<f64>::zeros(&spec);
        p.layers[0].weight.set(0, 0, -1.0);
        let y = forward(&p, &spec, &Matrix::row_vector(&[2.0]), Mode::Infer, 0).unwrap();
        assert_eq!(y.as_slice(), &[0.0]);
    }

    #[test]
    fn scalar_product_gradients() {
        let spec = single(1, 1, Activation::Identity, 0.0);
        let mut p = Params::<f64>::zeros(&spec);
        p.layers[0].weight.set(0, 0, 2.0);
        let r = forward_backward(&p, &spec, &Matrix::row_vector(&[3.0]), &[0.0], Loss::Mse, Mode::Infer, 0).unwrap();
        assert_eq!(r.loss, 36.0);
        assert_eq!(r.params.layers[0].weight.get(0, 0), 36.0);
        assert_eq!(r.inputs.as_slice(), &[24.0]);
    }

    #[test]
    fn perfect_fit_has_zero_gradient() {
        let spec = NetSpec::mlp(2, &[3], 1, 0.0).unwrap();
        let p = Params::<f64>::init(&spec, 1);
        let x = Matrix::from_rows(&[vec![0.3, -0.7], vec![1.0, 0.2]]).unwrap();
        let y = forward(&p, &spec, &x, Mode::Infer, 0).unwrap();
        let r = forward_backward(&p, &spec, &x, y.as_slice(), Loss::Mse, Mode::Infer, 0).unwrap();
        assert_eq!(r.loss, 0.0);
        assert!(r.params.slices().iter().all(|s| s.iter().all(|&v| v == 0.0)));
        assert!(r.inputs.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_mismatch_errors() {
        let spec = NetSpec::mlp(2, &[3], 1, 0.0).unwrap();
        let p = Params::<f64>::init(&spec, 1);
        let x = Matrix::row_vector(&[1.0, 2.0, 3.0]);
        assert!(matches!(forward(&p, &spec, &x, Mode::Infer, 0), Err(Error::Shape(_))));
    }

    #[test]
    fn dropout_mean_matches_infer() {
        let spec = NetSpec::mlp(3, &[5], 2, 0.3).unwrap();
        let p = Params::<f64>::init(&spec, 21);
        let x = Matrix::row_vector(&[0.4, -0.1, 0.9]);
        let infer = forward(&p, &spec, &x, Mode::Infer, 0).unwrap();
        // the first layer is the dropout layer; its expected output equals infer
        let first = NetSpec::new(3, vec![spec.layers[0]]).unwrap();
        let fp = Params {
            layers: vec![p.layers[0].clone()],
        };
        let base = forward(&fp, &first, &x, Mode::Infer, 0).unwrap();
        let draws = 10_000;
        let mut acc = vec![0.0; base.cols()];
        for s in 0..draws {
            let y = forward(&fp, &first, &x, Mode::Train, s).unwrap();
            for (a, v) in acc.iter_mut().zip(y.as_slice()) {
                *a += v;
            }
        }
        for (a, b) in acc.iter().zip(base.as_slice()) {
            let mean = a / draws as f64;
            assert!((mean - b).abs() <= 0.02 * b.abs().max(1e-12), "{mean} vs {b}");
        }
        assert_eq!(infer.cols(), 2);
    }
}
