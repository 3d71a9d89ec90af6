//! Surrogate regression over latent vectors and model-based optimization.

mod ascent;
mod propose;

pub use ascent::{gradient_ascent, lbfgs_ascend, Ascent, LbfgsConfig, NegSquaredDistance, Objective, Quadratic};
pub use propose::{propose_designs, rank_designs, Decoder, Design, DesignSet, MboAlgorithm, MboConfig, StartPolicy};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{self, forward, forward_backward, Loss, Matrix, Mode, NetSpec, OptimizerConfig, OptimizerState, Params};
use crate::random;
use crate::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateConfig {
    pub hidden: usize,
    pub dropout: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            hidden: 256,
            dropout: 0.2,
            epochs: 40,
            batch_size: 128,
            optimizer: OptimizerConfig::adaptive(1e-3),
            seed: 0,
        }
    }
}

/// Scalar regressor `d -> hidden (relu, dropout) -> 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateModel<T> {
    pub spec: NetSpec,
    pub params: Params<T>,
}

#[derive(Clone, Debug)]
pub struct SurrogateFit<T> {
    pub model: SurrogateModel<T>,
    /// Infer-mode training MSE before the first update.
    pub initial_mse: T,
    pub final_mse: T,
}

impl<T: Scalar> SurrogateModel<T> {
    pub fn new(dim: usize, hidden: usize, dropout: f64, seed: u64) -> Result<Self> {
        let spec = NetSpec::mlp(dim, &[hidden], 1, dropout)?;
        let params = Params::init(&spec, seed);
        Ok(Self { spec, params })
    }

    pub fn dim(&self) -> usize {
        self.spec.input
    }

    fn check(&self, z: &[T]) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::shape(format!("latent has {} dims, surrogate expects {}", z.len(), self.dim())));
        }
        Ok(())
    }

    pub fn predict(&self, z: &[T]) -> Result<T> {
        self.check(z)?;
        Ok(forward(&self.params, &self.spec, &Matrix::row_vector(z), Mode::Infer, 0)?.get(0, 0))
    }

    pub fn predict_batch(&self, zs: &[Vec<T>]) -> Result<Vec<T>> {
        let mut out = Vec::with_capacity(zs.len());
        for chunk in zs.chunks(1024) {
            let x = Matrix::from_rows(chunk)?;
            out.extend(forward(&self.params, &self.spec, &x, Mode::Infer, 0)?.into_vec());
        }
        Ok(out)
    }

    /// `∂f/∂z` in infer mode.
    pub fn input_gradient(&self, z: &[T]) -> Result<Vec<T>> {
        self.check(z)?;
        Ok(self.value_and_gradients(std::slice::from_ref(&z.to_vec()))?.1.remove(0))
    }

    fn value_and_gradients(&self, zs: &[Vec<T>]) -> Result<(Vec<T>, Vec<Vec<T>>)> {
        let x = Matrix::from_rows(zs)?;
        let mut rng = random::seeded(0);
        let tape = nn::forward_tape(&self.params, &self.spec, &x, Mode::Infer, &mut rng)?;
        let ones = Matrix::from_vec(zs.len(), 1, vec![T::one(); zs.len()])?;
        let (_, gin) = nn::backward(&self.params, &self.spec, &tape, &ones)?;
        Ok((
            tape.output().as_slice().to_vec(),
            gin.row_iter().map(|r| r.to_vec()).collect(),
        ))
    }

    pub fn mse(&self, nodes: &[Vec<T>], labels: &[T]) -> Result<T> {
        let pred = self.predict_batch(nodes)?;
        let n = T::from_usize_lossy(labels.len());
        Ok(pred.iter().zip(labels).map(|(&p, &y)| (p - y) * (p - y)).sum::<T>() / n)
    }

    pub fn to_text(&self) -> String {
        nn::net_to_string(&self.spec, &self.params)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (spec, params) = nn::net_from_str(text)?;
        if spec.output() != 1 {
            return Err(Error::Format("surrogate must have one output".into()));
        }
        Ok(Self { spec, params })
    }
}

impl<T: Scalar> Objective<T> for SurrogateModel<T> {
    fn dim(&self) -> usize {
        self.spec.input
    }

    fn value(&self, z: &[T]) -> Result<T> {
        self.predict(z)
    }

    fn value_and_gradient(&self, z: &[T]) -> Result<(T, Vec<T>)> {
        self.check(z)?;
        let (mut v, mut g) = self.value_and_gradients(std::slice::from_ref(&z.to_vec()))?;
        Ok((v.remove(0), g.remove(0)))
    }

    fn batch_value_and_gradient(&self, zs: &[Vec<T>]) -> Result<(Vec<T>, Vec<Vec<T>>)> {
        let mut vals = Vec::with_capacity(zs.len());
        let mut grads = Vec::with_capacity(zs.len());
        for chunk in zs.chunks(1024) {
            let (v, g) = self.value_and_gradients(chunk)?;
            vals.extend(v);
            grads.extend(g);
        }
        Ok((vals, grads))
    }
}

/// Minibatch MSE regression with dropout; seed-reproducible.
pub fn train_surrogate<T: Scalar>(nodes: &[Vec<T>], labels: &[T], cfg: &SurrogateConfig) -> Result<SurrogateFit<T>> {
    if nodes.len() != labels.len() {
        return Err(Error::shape("one label per node required"));
    }
    if nodes.len() < 2 {
        return Err(Error::param("surrogate needs at least two training points"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::param("batch size must be positive"));
    }
    let dim = nodes[0].len();
    let mut model = SurrogateModel::new(dim, cfg.hidden, cfg.dropout, random::derive_seed(cfg.seed, 1))?;
    let initial_mse = model.mse(nodes, labels)?;
    let mut opt = OptimizerState::new(cfg.optimizer, &model.params)?;
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    let mut shuffle = random::seeded(random::derive_seed(cfg.seed, 2));
    let mut draw = 0u64;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle);
        for batch in order.chunks(cfg.batch_size) {
            let rows: Vec<Vec<T>> = batch.iter().map(|&i| nodes[i].clone()).collect();
            let ys: Vec<T> = batch.iter().map(|&i| labels[i]).collect();
            let x = Matrix::from_rows(&rows)?;
            let seed = random::derive_seed(cfg.seed, 1000 + draw);
            draw += 1;
            let report = forward_backward(&model.params, &model.spec, &x, &ys, Loss::Mse, Mode::Train, seed)
                .map_err(|_| Error::Diverged { epoch })?;
            opt.step(&mut model.params, &report.params)
                .map_err(|_| Error::Diverged { epoch })?;
        }
        if !model.params.is_finite() {
            return Err(Error::Diverged { epoch });
        }
    }
    let final_mse = model.mse(nodes, labels)?;
    if !final_mse.is_finite() {
        return Err(Error::Diverged { epoch: cfg.epochs });
    }
    Ok(SurrogateFit { model, initial_mse, final_mse })
}
