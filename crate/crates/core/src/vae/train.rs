use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{kl_diag_gaussian, pool_backward, VaeArch, VaeModel, VaeParams};
use crate::data::{Alphabet, Sequence};
use crate::error::{Error, Result};
use crate::nn::{self, softmax_cross_entropy, Matrix, Mode, OptimizerConfig, OptimizerState};
use crate::random;
use crate::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VaeTrainConfig {
    pub arch: VaeArch,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    pub kl_weight: f64,
}

impl Default for VaeTrainConfig {
    fn default() -> Self {
        Self {
            arch: VaeArch::default(),
            epochs: 30,
            batch_size: 64,
            seed: 0,
            optimizer: OptimizerConfig::adaptive(3e-3),
            kl_weight: 1e-2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VaeLoss<T> {
    pub total: T,
    /// Mean over the batch of the summed per-position cross-entropy.
    pub ce: T,
    /// Mean over the batch of the posterior KL term.
    pub kl: T,
}

/// Loss of one batch with latents drawn by reparameterization from `seed`.
pub fn vae_loss<T: Scalar>(batch: &[Sequence], model: &VaeModel<T>, seed: u64) -> Result<VaeLoss<T>> {
    Ok(vae_loss_and_grad(batch, model, seed)?.0)
}

/// Loss together with exact gradients for every model parameter.
pub fn vae_loss_and_grad<T: Scalar>(
    batch: &[Sequence],
    model: &VaeModel<T>,
    seed: u64,
) -> Result<(VaeLoss<T>, VaeParams<T>)> {
    let refs: Vec<&Sequence> = batch.iter().collect();
    loss_and_grad(&refs, model, seed)
}

fn loss_and_grad<T: Scalar>(batch: &[&Sequence], model: &VaeModel<T>, seed: u64) -> Result<(VaeLoss<T>, VaeParams<T>)> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = random::seeded(seed);
    let fwd = model.encode_forward(batch, &mut rng)?;
    let b = batch.len();
    let d = model.latent_dim();
    let a = model.alphabet.len();
    let eta = T::lit(model.kl_weight);
    let inv_b = T::one() / T::from_usize_lossy(b);

    let mu = fwd.mu_tape.output();
    let ls = fwd.ls_tape.output();
    let eps = Matrix::from_vec(b, d, random::normal_vec::<T>(&mut rng, b * d))?;
    let mut x = Matrix::zeros(b, d);
    for ((xv, (&m, &l)), &e) in x
        .as_mut_slice()
        .iter_mut()
        .zip(mu.as_slice().iter().zip(ls.as_slice()))
        .zip(eps.as_slice())
    {
        *xv = m + l.exp() * e;
    }
    let dec_tape = nn::forward_tape(&model.params.decoder, &model.decoder_spec, &x, Mode::Infer, &mut rng)?;
    let logits = dec_tape.output();

    let mut ce = T::zero();
    let mut d_logits = Matrix::zeros(b, logits.cols());
    for (bi, s) in batch.iter().enumerate() {
        let row = logits.row(bi);
        let drow = d_logits.row_mut(bi);
        for (pos, &sym) in s.indices().iter().enumerate() {
            let seg = pos * a..(pos + 1) * a;
            let (l, g) = softmax_cross_entropy(&row[seg.clone()], sym as usize);
            ce = ce + l;
            for (dst, gv) in drow[seg].iter_mut().zip(g) {
                *dst = gv * inv_b;
            }
        }
    }
    let kl: T = (0..b).map(|bi| kl_diag_gaussian(mu.row(bi), ls.row(bi))).sum();
    let ce = ce * inv_b;
    let kl = kl * inv_b;
    let loss = VaeLoss {
        total: ce + eta * kl,
        ce,
        kl,
    };
    if !loss.total.is_finite() {
        return Err(Error::NonFinite("vae loss".into()));
    }

    let (dec_grads, dx) = nn::backward(&model.params.decoder, &model.decoder_spec, &dec_tape, &d_logits)?;
    let mut d_mu = Matrix::zeros(b, d);
    let mut d_ls = Matrix::zeros(b, d);
    for i in 0..b * d {
        let m = mu.as_slice()[i];
        let l = ls.as_slice()[i];
        let sigma = l.exp();
        let g = dx.as_slice()[i];
        d_mu.as_mut_slice()[i] = g + eta * m * inv_b;
        d_ls.as_mut_slice()[i] = g * sigma * eps.as_slice()[i] + eta * (sigma * sigma - T::one()) * inv_b;
    }
    let (mu_grads, dp1) = nn::backward(&model.params.mu, &model.mu_spec, &fwd.mu_tape, &d_mu)?;
    let (ls_grads, dp2) = nn::backward(&model.params.log_sigma, &model.log_sigma_spec, &fwd.ls_tape, &d_ls)?;

    let states = fwd.token_tape.output();
    let dh = model.arch.hidden_dim;
    let mut d_states = Matrix::zeros(states.rows(), dh);
    let mut d_omega = vec![T::zero(); dh];
    for bi in 0..b {
        let grad: Vec<T> = dp1.row(bi).iter().zip(dp2.row(bi)).map(|(&p, &q)| p + q).collect();
        let rows = model.sequence_states(states, bi);
        let (ds, dw) = pool_backward(model.arch.pooling, &rows, &model.params.omega, &fwd.pooled[bi], &grad);
        let start = bi * model.length * dh;
        d_states.as_mut_slice()[start..start + model.length * dh].copy_from_slice(ds.as_slice());
        for (o, v) in d_omega.iter_mut().zip(dw) {
            *o = *o + v;
        }
    }
    let (token_grads, _) = nn::backward(&model.params.token, &model.token_spec, &fwd.token_tape, &d_states)?;
    debug_assert_eq!(fwd.pooled_batch.rows(), b);

    let grads = VaeParams {
        token: token_grads,
        omega: d_omega,
        mu: mu_grads,
        log_sigma: ls_grads,
        decoder: dec_grads,
    };
    if !grads.is_finite() {
        return Err(Error::NonFinite("vae gradient".into()));
    }
    Ok((loss, grads))
}

/// Trained model plus its loss trajectory.
#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    pub model: VaeModel<T>,
    /// Mean loss over the corpus at initialization.
    pub initial_loss: f64,
    /// Mean minibatch loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

pub fn train_vae<T: Scalar>(corpus: &[Sequence], alphabet: &Alphabet, cfg: &VaeTrainConfig) -> Result<TrainOutcome<T>> {
    if corpus.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(Error::param("epochs and batch size must be positive"));
    }
    let length = corpus[0].len();
    if let Some(i) = corpus.iter().position(|s| s.len() != length) {
        return Err(Error::LengthMismatch {
            row: i + 1,
            expected: length,
            found: corpus[i].len(),
        });
    }
    let mut model = VaeModel::<T>::new(alphabet.clone(), length, cfg.arch.clone(), cfg.kl_weight, cfg.seed)?;
    let mut opt = OptimizerState::new(cfg.optimizer, &model.params)?;
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut shuffle_rng = random::seeded(random::derive_seed(cfg.seed, 100));

    let initial_loss = mean_loss(corpus, &model, random::derive_seed(cfg.seed, 101))?;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut draw = 0u64;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut acc = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sequence> = chunk.iter().map(|&i| &corpus[i]).collect();
            draw += 1;
            let (loss, grads) = loss_and_grad(&batch, &model, random::derive_seed(cfg.seed, 1_000 + draw))
                .map_err(|e| match e {
                    Error::NonFinite(_) => Error::Diverged { epoch },
                    other => other,
                })?;
            acc += loss.total.to_f64_lossy() * batch.len() as f64;
            opt.step(&mut model.params, &grads)?;
        }
        let mean = acc / corpus.len() as f64;
        if !mean.is_finite() || !model.params.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        epoch_losses.push(mean);
    }
    Ok(TrainOutcome {
        model,
        initial_loss,
        epoch_losses,
    })
}

fn mean_loss<T: Scalar>(corpus: &[Sequence], model: &VaeModel<T>, seed: u64) -> Result<f64> {
    let mut acc = 0.0;
    for (i, chunk) in corpus.chunks(256).enumerate() {
        let refs: Vec<&Sequence> = chunk.iter().collect();
        let (l, _) = loss_and_grad(&refs, model, random::derive_seed(seed, i as u64))?;
        acc += l.total.to_f64_lossy() * chunk.len() as f64;
    }
    Ok(acc / corpus.len() as f64)
}

/// Fraction of positions recovered by `decode(encode(s))`.
pub fn reconstruction_accuracy<T: Scalar>(model: &VaeModel<T>, seqs: &[Sequence]) -> Result<f64> {
    let z = model.encode_batch(seqs)?;
    let mut hit = 0usize;
    let mut total = 0usize;
    for (s, zi) in seqs.iter().zip(&z) {
        let r = model.decode(zi)?;
        hit += s.indices().iter().zip(r.indices()).filter(|(a, b)| a == b).count();
        total += s.len();
    }
    Ok(hit as f64 / total.max(1) as f64)
}
