//! Sequence VAE: position-aware token encoder, global pooling, Gaussian
//! latent heads, and a feed-forward decoder to per-position logits.

mod pooling;
mod train;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{Alphabet, Sequence};
use crate::error::{Error, Result};
use crate::nn::{self, Matrix, Mode, NetSpec, ParamSlices, Params};
use crate::random::{self, Rng};
use crate::Scalar;

pub use pooling::{attention_pool, pool, pool_backward, Pooled, Pooling};
pub use train::{reconstruction_accuracy, train_vae, vae_loss, vae_loss_and_grad, TrainOutcome, VaeLoss, VaeTrainConfig};

/// Architecture knobs for a [`VaeModel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VaeArch {
    pub latent_dim: usize,
    pub hidden_dim: usize,
    /// Hidden widths of the token net before its final `d_h` layer.
    pub token_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub pooling: Pooling,
}

impl Default for VaeArch {
    fn default() -> Self {
        Self {
            latent_dim: 16,
            hidden_dim: 32,
            token_hidden: Vec::new(),
            decoder_hidden: vec![64],
            pooling: Pooling::Attention,
        }
    }
}

/// KL divergence of `N(mu, exp(log_sigma)^2)` from `N(0, I)`.
pub fn kl_diag_gaussian<T: Scalar>(mu: &[T], log_sigma: &[T]) -> T {
    let half = T::lit(0.5);
    mu.iter()
        .zip(log_sigma)
        .map(|(&m, &ls)| {
            let var = (ls + ls).exp();
            half * (m * m + var - T::one() - (ls + ls))
        })
        .sum()
}

/// Trainable parameters, also used as the gradient container.
#[derive(Clone, Debug, PartialEq)]
pub struct VaeParams<T> {
    pub token: Params<T>,
    pub omega: Vec<T>,
    pub mu: Params<T>,
    pub log_sigma: Params<T>,
    pub decoder: Params<T>,
}

impl<T: Scalar> ParamSlices<T> for VaeParams<T> {
    fn slices(&self) -> Vec<&[T]> {
        let mut v = self.token.slices();
        v.push(&self.omega);
        v.extend(self.mu.slices());
        v.extend(self.log_sigma.slices());
        v.extend(self.decoder.slices());
        v
    }

    fn slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut v = self.token.slices_mut();
        v.push(&mut self.omega);
        v.extend(self.mu.slices_mut());
        v.extend(self.log_sigma.slices_mut());
        v.extend(self.decoder.slices_mut());
        v
    }
}

impl<T: Scalar> VaeParams<T> {
    fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VaeModel<T> {
    pub alphabet: Alphabet,
    pub length: usize,
    pub arch: VaeArch,
    /// KL weight of the training objective.
    pub kl_weight: f64,
    pub seed: u64,
    pub token_spec: NetSpec,
    pub mu_spec: NetSpec,
    pub log_sigma_spec: NetSpec,
    pub decoder_spec: NetSpec,
    pub params: VaeParams<T>,
}

/// Forward intermediates for one batch.
pub(crate) struct VaeForward<T> {
    pub token_tape: nn::Tape<T>,
    pub pooled: Vec<Pooled<T>>,
    pub pooled_batch: Matrix<T>,
    pub mu_tape: nn::Tape<T>,
    pub ls_tape: nn::Tape<T>,
}

impl<T: Scalar> VaeModel<T> {
    pub fn new(alphabet: Alphabet, length: usize, arch: VaeArch, kl_weight: f64, seed: u64) -> Result<Self> {
        if arch.latent_dim < 2 {
            return Err(Error::param("latent dimension must be at least 2"));
        }
        if length == 0 || arch.hidden_dim == 0 {
            return Err(Error::param("sequence length and hidden width must be positive"));
        }
        if !kl_weight.is_finite() || kl_weight < 0.0 {
            return Err(Error::param("kl weight must be finite and non-negative"));
        }
        let a = alphabet.len();
        let token_spec = NetSpec::new(a + length, tail(&arch.token_hidden, arch.hidden_dim))?;
        let mu_spec = NetSpec::mlp(arch.hidden_dim, &[], arch.latent_dim, 0.0)?;
        let log_sigma_spec = mu_spec.clone();
        let decoder_spec = NetSpec::mlp(arch.latent_dim, &arch.decoder_hidden, length * a, 0.0)?;

        let mut log_sigma = Params::init(&log_sigma_spec, random::derive_seed(seed, 3));
        // start with small posterior variance
        for d in &mut log_sigma.layers {
            for w in d.weight.as_mut_slice() {
                *w = *w * T::lit(0.1);
            }
            for b in &mut d.bias {
                *b = T::lit(-1.0);
            }
        }
        let omega = match arch.pooling {
            Pooling::Attention => vec![T::one() / T::from_usize_lossy(arch.hidden_dim); arch.hidden_dim],
            Pooling::Softmax => vec![T::zero(); arch.hidden_dim],
        };
        let params = VaeParams {
            token: Params::init(&token_spec, random::derive_seed(seed, 1)),
            omega,
            mu: Params::init(&mu_spec, random::derive_seed(seed, 2)),
            log_sigma,
            decoder: Params::init(&decoder_spec, random::derive_seed(seed, 4)),
        };
        Ok(Self {
            alphabet,
            length,
            arch,
            kl_weight,
            seed,
            token_spec,
            mu_spec,
            log_sigma_spec,
            decoder_spec,
            params,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.arch.latent_dim
    }

    fn check_seq(&self, s: &Sequence) -> Result<()> {
        if s.len() != self.length {
            return Err(Error::shape(format!(
                "sequence length {} differs from model length {}",
                s.len(),
                self.length
            )));
        }
        if s.indices().iter().any(|&v| v as usize >= self.alphabet.len()) {
            return Err(Error::shape("symbol index outside the model alphabet"));
        }
        Ok(())
    }

    /// One-hot symbol and position for every token, `B*L` rows.
    fn token_inputs(&self, batch: &[&Sequence]) -> Result<Matrix<T>> {
        let a = self.alphabet.len();
        let width = a + self.length;
        let mut x = Matrix::zeros(batch.len() * self.length, width);
        for (b, s) in batch.iter().enumerate() {
            self.check_seq(s)?;
            for (pos, &sym) in s.indices().iter().enumerate() {
                let r = b * self.length + pos;
                x.set(r, sym as usize, T::one());
                x.set(r, a + pos, T::one());
            }
        }
        Ok(x)
    }

    pub(crate) fn encode_forward(&self, batch: &[&Sequence], rng: &mut Rng) -> Result<VaeForward<T>> {
        let x = self.token_inputs(batch)?;
        let token_tape = nn::forward_tape(&self.params.token, &self.token_spec, &x, Mode::Infer, rng)?;
        let states = token_tape.output();
        let dh = self.arch.hidden_dim;
        let mut pooled = Vec::with_capacity(batch.len());
        let mut pooled_batch = Matrix::zeros(batch.len(), dh);
        for b in 0..batch.len() {
            let rows = self.sequence_states(states, b);
            let p = pool(self.arch.pooling, &rows, &self.params.omega)?;
            pooled_batch.row_mut(b).copy_from_slice(&p.vector);
            pooled.push(p);
        }
        let mu_tape = nn::forward_tape(&self.params.mu, &self.mu_spec, &pooled_batch, Mode::Infer, rng)?;
        let ls_tape = nn::forward_tape(&self.params.log_sigma, &self.log_sigma_spec, &pooled_batch, Mode::Infer, rng)?;
        Ok(VaeForward {
            token_tape,
            pooled,
            pooled_batch,
            mu_tape,
            ls_tape,
        })
    }

    pub(crate) fn sequence_states(&self, states: &Matrix<T>, b: usize) -> Matrix<T> {
        let dh = states.cols();
        let start = b * self.length * dh;
        Matrix::from_vec(self.length, dh, states.as_slice()[start..start + self.length * dh].to_vec())
            .expect("token state block has L rows")
    }

    /// Posterior mean of one sequence (no sampling).
    pub fn encode(&self, s: &Sequence) -> Result<Vec<T>> {
        Ok(self.encode_batch(std::slice::from_ref(s))?.pop().expect("one row"))
    }

    pub fn encode_batch(&self, seqs: &[Sequence]) -> Result<Vec<Vec<T>>> {
        let mut rng = random::seeded(0);
        let mut out = Vec::with_capacity(seqs.len());
        for chunk in seqs.chunks(512) {
            let refs: Vec<&Sequence> = chunk.iter().collect();
            let f = self.encode_forward(&refs, &mut rng)?;
            out.extend(f.mu_tape.output().row_iter().map(<[T]>::to_vec));
        }
        Ok(out)
    }

    /// Decoder logits, `L * |A|` values, position-major.
    pub fn logits(&self, z: &[T]) -> Result<Vec<T>> {
        if z.len() != self.latent_dim() {
            return Err(Error::shape(format!(
                "latent has {} values, model expects {}",
                z.len(),
                self.latent_dim()
            )));
        }
        let out = nn::forward(&self.params.decoder, &self.decoder_spec, &Matrix::row_vector(z), Mode::Infer, 0)?;
        Ok(out.into_vec())
    }

    /// Per-position argmax of the decoder logits; ties go to the lower symbol index.
    pub fn decode(&self, z: &[T]) -> Result<Sequence> {
        let logits = self.logits(z)?;
        Ok(argmax_sequence(&logits, self.alphabet.len()))
    }

    /// Writes the model as a metadata header followed by its networks.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "latsmooth-vae 1");
        let _ = writeln!(s, "alphabet {}", String::from(self.alphabet.clone()));
        let _ = writeln!(s, "alphabet_size {}", self.alphabet.len());
        let _ = writeln!(s, "length {}", self.length);
        let _ = writeln!(s, "latent_dim {}", self.arch.latent_dim);
        let _ = writeln!(s, "hidden_dim {}", self.arch.hidden_dim);
        let _ = writeln!(s, "kl_weight {}", self.kl_weight);
        let _ = writeln!(s, "seed {}", self.seed);
        let _ = writeln!(s, "pooling {}", self.arch.pooling.name());
        let om: Vec<String> = self.params.omega.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "omega {}", om.join(" "));
        nn::write_net(&mut s, &self.token_spec, &self.params.token);
        nn::write_net(&mut s, &self.mu_spec, &self.params.mu);
        nn::write_net(&mut s, &self.log_sigma_spec, &self.params.log_sigma);
        nn::write_net(&mut s, &self.decoder_spec, &self.params.decoder);
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut field = |key: &str| -> Result<String> {
            let l = lines.next().ok_or_else(|| Error::Format(format!("missing '{key}'")))?;
            let rest = l
                .trim()
                .strip_prefix(key)
                .ok_or_else(|| Error::Format(format!("expected '{key}', found '{l}'")))?;
            Ok(rest.trim().to_string())
        };
        let magic = field("latsmooth-vae")?;
        if magic != "1" {
            return Err(Error::Format(format!("unsupported model version {magic}")));
        }
        let alphabet = Alphabet::new(&field("alphabet")?)?;
        let parse = |v: String, what: &str| -> Result<usize> {
            v.parse().map_err(|_| Error::Format(format!("bad {what}")))
        };
        let a_size = parse(field("alphabet_size")?, "alphabet_size")?;
        if a_size != alphabet.len() {
            return Err(Error::Format("alphabet_size disagrees with alphabet".into()));
        }
        let length = parse(field("length")?, "length")?;
        let latent_dim = parse(field("latent_dim")?, "latent_dim")?;
        let hidden_dim = parse(field("hidden_dim")?, "hidden_dim")?;
        let kl_weight: f64 = field("kl_weight")?
            .parse()
            .map_err(|_| Error::Format("bad kl_weight".into()))?;
        let seed: u64 = field("seed")?.parse().map_err(|_| Error::Format("bad seed".into()))?;
        let pooling = match field("pooling")?.as_str() {
            "attention" => Pooling::Attention,
            "softmax" => Pooling::Softmax,
            other => return Err(Error::Format(format!("unknown pooling '{other}'"))),
        };
        let omega: Vec<T> = field("omega")?
            .split_whitespace()
            .map(|t| t.parse::<T>().map_err(|_| Error::Format(format!("bad omega value '{t}'"))))
            .collect::<Result<_>>()?;
        let mut rest = lines;
        let (token_spec, token) = nn::read_net(&mut rest)?;
        let (mu_spec, mu) = nn::read_net(&mut rest)?;
        let (log_sigma_spec, log_sigma) = nn::read_net(&mut rest)?;
        let (decoder_spec, decoder) = nn::read_net(&mut rest)?;
        if omega.len() != hidden_dim
            || token_spec.input != a_size + length
            || token_spec.output() != hidden_dim
            || mu_spec.output() != latent_dim
            || decoder_spec.output() != length * a_size
        {
            return Err(Error::shape("stored networks disagree with the model header"));
        }
        let token_hidden = token_spec.layers[..token_spec.layers.len() - 1].iter().map(|l| l.width).collect();
        let decoder_hidden = decoder_spec.layers[..decoder_spec.layers.len() - 1].iter().map(|l| l.width).collect();
        Ok(Self {
            alphabet,
            length,
            arch: VaeArch {
                latent_dim,
                hidden_dim,
                token_hidden,
                decoder_hidden,
                pooling,
            },
            kl_weight,
            seed,
            token_spec,
            mu_spec,
            log_sigma_spec,
            decoder_spec,
            params: VaeParams {
                token,
                omega,
                mu,
                log_sigma,
                decoder,
            },
        })
    }
}

fn tail(hidden: &[usize], out: usize) -> Vec<nn::LayerSpec> {
    let mut layers: Vec<nn::LayerSpec> = hidden
        .iter()
        .map(|&w| nn::LayerSpec {
            width: w,
            activation: nn::Activation::Relu,
            dropout: 0.0,
        })
        .collect();
    layers.push(nn::LayerSpec {
        width: out,
        activation: nn::Activation::Identity,
        dropout: 0.0,
    });
    layers
}

/// Per-position argmax with lowest-index tie breaking.
pub fn argmax_sequence<T: Scalar>(logits: &[T], alphabet_size: usize) -> Sequence {
    Sequence(
        logits
            .chunks_exact(alphabet_size)
            .map(|pos| {
                let mut best = 0;
                for (i, &v) in pos.iter().enumerate().skip(1) {
                    if v > pos[best] {
                        best = i;
                    }
                }
                best as u8
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kl_closed_forms() {
        assert_eq!(kl_diag_gaussian(&[0.0f64], &[0.0]), 0.0);
        assert!((kl_diag_gaussian(&[1.0f64], &[0.0]) - 0.5).abs() < 1e-15);
        // sigma^2 = e  <=>  log sigma = 1/2
        let v = kl_diag_gaussian(&[0.0f64], &[0.5]);
        assert!((v - 0.5 * (std::f64::consts::E - 2.0)).abs() < 1e-12);
        assert!((v - 0.3591).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn kl_non_negative(mu in prop::collection::vec(-3.0f64..3.0, 1..6), ls in prop::collection::vec(-3.0f64..3.0, 6)) {
            let ls = &ls[..mu.len()];
            let kl = kl_diag_gaussian(&mu, ls);
            prop_assert!(kl >= 0.0);
            if kl < 1e-12 {
                prop_assert!(mu.iter().chain(ls).all(|v| v.abs() < 1e-5));
            }
        }
    }

    #[test]
    fn argmax_tie_goes_low() {
        let s = argmax_sequence(&[1.0f64, 1.0, 0.0, 0.5, 2.0, 2.0, 2.0, -1.0], 4);
        assert_eq!(s.0, vec![0, 0]);
    }

    #[test]
    fn encode_is_deterministic_and_checks_length() {
        let m = VaeModel::<f64>::new(Alphabet::dna(), 6, VaeArch::default(), 0.01, 3).unwrap();
        let s = Alphabet::dna().encode("ACGTAC", 1).unwrap();
        assert_eq!(m.encode(&s).unwrap(), m.encode(&s).unwrap());
        let short = Alphabet::dna().encode("ACG", 1).unwrap();
        assert!(m.encode(&short).is_err());
        let z = m.encode(&s).unwrap();
        assert_eq!(m.decode(&z).unwrap(), m.decode(&z).unwrap());
        assert!(m.decode(&z[..3]).is_err());
    }

    #[test]
    fn text_round_trip() {
        let arch = VaeArch {
            token_hidden: vec![5],
            pooling: Pooling::Softmax,
            ..VaeArch::default()
        };
        let m = VaeModel::<f64>::new(Alphabet::dna(), 5, arch, 0.02, 8).unwrap();
        let back = VaeModel::<f64>::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
    }
}
