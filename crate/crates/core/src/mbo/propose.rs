use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::ascent::{gradient_ascent, lbfgs_ascend, LbfgsConfig};
use super::SurrogateModel;
use crate::data::Sequence;
use crate::error::{Error, Result};
use crate::vae::VaeModel;
use crate::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MboAlgorithm {
    #[default]
    GradientAscent,
    Lbfgs,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "n")]
pub enum StartPolicy {
    /// All nodes for graphs of at most 5000 nodes, else the top 2000.
    #[default]
    Auto,
    AllNodes,
    TopByPrediction(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MboConfig {
    pub algorithm: MboAlgorithm,
    pub step: f64,
    pub iterations: usize,
    pub lbfgs: LbfgsConfig,
    /// Design budget `K`.
    pub budget: usize,
    pub starts: StartPolicy,
}

impl Default for MboConfig {
    fn default() -> Self {
        Self {
            algorithm: MboAlgorithm::GradientAscent,
            step: 0.005,
            iterations: 400,
            lbfgs: LbfgsConfig::default(),
            budget: 128,
            starts: StartPolicy::Auto,
        }
    }
}

impl MboConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) {
            return Err(Error::param("MBO step must be positive"));
        }
        if self.budget == 0 {
            return Err(Error::param("design budget must be at least 1"));
        }
        if self.lbfgs.memory == 0 {
            return Err(Error::param("L-BFGS memory must be at least 1"));
        }
        if let StartPolicy::TopByPrediction(0) = self.starts {
            return Err(Error::param("top-by-prediction needs n >= 1"));
        }
        Ok(())
    }
}

/// Maps a latent vector back to a sequence.
pub trait Decoder<T> {
    fn decode(&self, z: &[T]) -> Result<Sequence>;
}

impl<T: Scalar> Decoder<T> for VaeModel<T> {
    fn decode(&self, z: &[T]) -> Result<Sequence> {
        VaeModel::decode(self, z)
    }
}

impl<T, F: Fn(&[T]) -> Result<Sequence>> Decoder<T> for F {
    fn decode(&self, z: &[T]) -> Result<Sequence> {
        self(z)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Design<T> {
    pub sequence: Sequence,
    pub latent: Vec<T>,
    pub score: T,
}

/// Distinct sequences with non-increasing surrogate scores.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignSet<T> {
    pub designs: Vec<Design<T>>,
}

impl<T: Scalar> DesignSet<T> {
    pub fn len(&self) -> usize {
        self.designs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.designs.is_empty()
    }

    pub fn sequences(&self) -> Vec<Sequence> {
        self.designs.iter().map(|d| d.sequence.clone()).collect()
    }
}

/// Keeps the best-scoring copy of each sequence, sorts by score descending
/// (stable, so ties keep first-occurrence order) and keeps the top `k`.
pub fn rank_designs<T: Scalar>(candidates: Vec<Design<T>>, k: usize) -> DesignSet<T> {
    let mut slot: HashMap<Sequence, usize> = HashMap::new();
    let mut unique: Vec<Design<T>> = Vec::new();
    for c in candidates {
        match slot.get(&c.sequence) {
            Some(&i) => {
                if c.score > unique[i].score {
                    unique[i].score = c.score;
                    unique[i].latent = c.latent;
                }
            }
            None => {
                slot.insert(c.sequence.clone(), unique.len());
                unique.push(c);
            }
        }
    }
    unique.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(std::cmp::Ordering::Equal));
    unique.truncate(k);
    DesignSet { designs: unique }
}

fn select_starts<T: Scalar>(model: &SurrogateModel<T>, nodes: &[Vec<T>], policy: StartPolicy) -> Result<Vec<Vec<T>>> {
    let top = match policy {
        StartPolicy::AllNodes => return Ok(nodes.to_vec()),
        StartPolicy::Auto if nodes.len() <= 5000 => return Ok(nodes.to_vec()),
        StartPolicy::Auto => 2000,
        StartPolicy::TopByPrediction(n) => n,
    };
    let scores = model.predict_batch(nodes)?;
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    Ok(order.into_iter().take(top).map(|i| nodes[i].clone()).collect())
}

/// Ascends the surrogate from the selected graph nodes, decodes the final
/// latents and ranks the unique sequences by surrogate score.
pub fn propose_designs<T: Scalar, D: Decoder<T> + ?Sized>(
    model: &SurrogateModel<T>,
    nodes: &[Vec<T>],
    decoder: &D,
    cfg: &MboConfig,
) -> Result<DesignSet<T>> {
    cfg.validate()?;
    if nodes.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if nodes.iter().any(|n| n.len() != model.dim()) {
        return Err(Error::shape("graph and surrogate dimensions differ"));
    }
    let starts = select_starts(model, nodes, cfg.starts)?;
    let ascent = match cfg.algorithm {
        MboAlgorithm::GradientAscent => gradient_ascent(model, &starts, T::lit(cfg.step), cfg.iterations)?,
        MboAlgorithm::Lbfgs => lbfgs_ascend(model, &starts, &cfg.lbfgs)?,
    };
    let scores = model.predict_batch(&ascent.points)?;
    let candidates = ascent
        .points
        .into_iter()
        .zip(scores)
        .map(|(latent, score)| {
            Ok(Design {
                sequence: decoder.decode(&latent)?,
                latent,
                score,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rank_designs(candidates, cfg.budget))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;

    fn design(seq: &[u8], score: f64) -> Design<f64> {
        Design { sequence: Sequence(seq.to_vec()), latent: vec![score], score }
    }

    #[test]
    fn dedupe_keeps_max_score() {
        let set = rank_designs(vec![design(&[1], 0.7), design(&[2], 0.8), design(&[1], 0.9)], 10);
        assert_eq!(set.len(), 2);
        assert_eq!(set.designs[0].sequence, Sequence(vec![1]));
        assert_eq!(set.designs[0].score, 0.9);
        assert_eq!(set.designs[0].latent, vec![0.9]);
    }

    #[test]
    fn ties_keep_first_occurrence_and_truncate() {
        let set = rank_designs(vec![design(&[3], 0.5), design(&[1], 0.5), design(&[2], 0.6)], 2);
        assert_eq!(set.sequences(), vec![Sequence(vec![2]), Sequence(vec![3])]);
    }

    #[test]
    fn collapsed_population_is_single_design() {
        let model = SurrogateModel::<f64>::new(2, 8, 0.2, 1).unwrap();
        let mut rng = random::seeded(0);
        let nodes: Vec<Vec<f64>> = (0..20).map(|_| random::normal_vec(&mut rng, 2)).collect();
        let constant = |_: &[f64]| Ok(Sequence(vec![0, 1, 2]));
        let cfg = MboConfig { iterations: 5, ..MboConfig::default() };
        let set = propose_designs(&model, &nodes, &constant, &cfg).unwrap();
        assert_eq!(set.len(), 1);
    }

    #[test]
    fn budget_larger_than_unique_returns_all_sorted() {
        let model = SurrogateModel::<f64>::new(2, 8, 0.2, 1).unwrap();
        let mut rng = random::seeded(1);
        let nodes: Vec<Vec<f64>> = (0..30).map(|_| random::normal_vec(&mut rng, 2)).collect();
        // four sign quadrants
        let quadrant = |z: &[f64]| Ok(Sequence(vec![(z[0] > 0.0) as u8, (z[1] > 0.0) as u8]));
        for algorithm in [MboAlgorithm::GradientAscent, MboAlgorithm::Lbfgs] {
            let cfg = MboConfig { iterations: 3, algorithm, budget: 500, ..MboConfig::default() };
            let set = propose_designs(&model, &nodes, &quadrant, &cfg).unwrap();
            assert!(set.len() <= 4 && !set.is_empty());
            assert!(set.designs.windows(2).all(|w| w[0].score >= w[1].score));
            assert_eq!(set, propose_designs(&model, &nodes, &quadrant, &cfg).unwrap());
        }
    }

    #[test]
    fn start_policies() {
        let model = SurrogateModel::<f64>::new(1, 8, 0.0, 2).unwrap();
        let nodes: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        assert_eq!(select_starts(&model, &nodes, StartPolicy::Auto).unwrap().len(), 10);
        let top = select_starts(&model, &nodes, StartPolicy::TopByPrediction(3)).unwrap();
        let best = model.predict_batch(&nodes).unwrap().into_iter().fold(f64::MIN, f64::max);
        assert_eq!(model.predict(&top[0]).unwrap(), best);
        let big: Vec<Vec<f64>> = (0..5001).map(|i| vec![i as f64 * 1e-3]).collect();
        assert_eq!(select_starts(&model, &big, StartPolicy::Auto).unwrap().len(), 2000);
        assert!(MboConfig { budget: 0, ..MboConfig::default() }.validate().is_err());
    }
}
