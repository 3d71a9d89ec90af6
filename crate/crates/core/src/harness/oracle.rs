//! Exact fitness oracles. These are evaluation-only: nothing in the training
//! or optimization path takes an oracle.

use std::collections::HashMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{Alphabet, LabeledDataset, Sequence};
use crate::error::{Error, Result};
use crate::random;

/// NK landscape with circular neighborhoods: site `i` interacts with sites
/// `i+1 .. i+K (mod L)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NkLandscape {
    pub length: usize,
    pub alphabet_size: usize,
    pub k: usize,
    pub seed: u64,
    /// One table of `alphabet_size^(k+1)` contributions per site.
    tables: Vec<Vec<f64>>,
}

impl NkLandscape {
    pub fn new(length: usize, alphabet_size: usize, k: usize, seed: u64) -> Result<Self> {
        if length == 0 || alphabet_size < 2 {
            return Err(Error::param("NK landscape needs L >= 1 and |A| >= 2"));
        }
        if k >= length {
            return Err(Error::param(format!("NK epistasis K={k} must be < L={length}")));
        }
        let entries = alphabet_size
            .checked_pow(k as u32 + 1)
            .filter(|&e| e <= 1 << 24)
            .ok_or_else(|| Error::param("NK table too large"))?;
        let mut rng = random::seeded(seed);
        let tables = (0..length)
            .map(|_| (0..entries).map(|_| rng.random::<f64>()).collect())
            .collect();
        Ok(Self {
            length,
            alphabet_size,
            k,
            seed,
            tables,
        })
    }

    pub fn tables(&self) -> &[Vec<f64>] {
        &self.tables
    }

    /// Table slot for site `i`: base-|A| number with `s_i` as the most significant digit.
    fn slot(&self, s: &[u8], i: usize) -> usize {
        (0..=self.k).fold(0, |acc, j| acc * self.alphabet_size + s[(i + j) % self.length] as usize)
    }

    pub fn fitness(&self, s: &Sequence) -> Result<f64> {
        let idx = s.indices();
        if idx.len() != self.length || idx.iter().any(|&v| v as usize >= self.alphabet_size) {
            return Err(Error::OracleMiss(s.to_string()));
        }
        let total: f64 = (0..self.length).map(|i| self.tables[i][self.slot(idx, i)]).sum();
        Ok(total / self.length as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExactOracle {
    Table(HashMap<Sequence, f64>),
    Nk(NkLandscape),
}

impl ExactOracle {
    pub fn nk(length: usize, alphabet_size: usize, k: usize, seed: u64) -> Result<Self> {
        NkLandscape::new(length, alphabet_size, k, seed).map(ExactOracle::Nk)
    }

    /// Exact lookup over a dataset that enumerates the whole space.
    pub fn table(data: &LabeledDataset) -> Result<Self> {
        let mut map = HashMap::with_capacity(data.len());
        for (s, &y) in data.sequences.iter().zip(&data.labels) {
            if map.insert(s.clone(), y).is_some() {
                return Err(Error::DuplicateSequence(data.alphabet.decode(s)));
            }
        }
        let space = (data.alphabet.len() as f64).powi(data.seq_len() as i32);
        if (map.len() as f64) < space {
            return Err(Error::param(format!(
                "table oracle needs all {space} sequences, got {}",
                map.len()
            )));
        }
        Ok(ExactOracle::Table(map))
    }

    pub fn fitness(&self, s: &Sequence) -> Result<f64> {
        match self {
            ExactOracle::Table(map) => map.get(s).copied().ok_or_else(|| Error::OracleMiss(s.to_string())),
            ExactOracle::Nk(nk) => nk.fitness(s),
        }
    }
}

/// Every sequence of `A^length` in lexicographic index order.
pub fn enumerate_space(alphabet_size: usize, length: usize) -> Result<Vec<Sequence>> {
    let total = alphabet_size
        .checked_pow(length as u32)
        .filter(|&t| t <= 1 << 24)
        .ok_or_else(|| Error::param("sequence space too large to enumerate"))?;
    Ok((0..total)
        .map(|mut code| {
            let mut v = vec![0u8; length];
            for slot in v.iter_mut().rev() {
                *slot = (code % alphabet_size) as u8;
                code /= alphabet_size;
            }
            Sequence(v)
        })
        .collect())
}

/// `n` sequences drawn uniformly (with replacement) from `A^length`.
pub fn sample_space(alphabet_size: usize, length: usize, n: usize, seed: u64) -> Vec<Sequence> {
    let mut rng = random::seeded(seed);
    (0..n)
        .map(|_| Sequence((0..length).map(|_| rng.random_range(0..alphabet_size) as u8).collect()))
        .collect()
}

/// Full labeled space for an NK landscape.
pub fn nk_dataset(nk: &NkLandscape, alphabet: &Alphabet) -> Result<LabeledDataset> {
    if alphabet.len() != nk.alphabet_size {
        return Err(Error::param("alphabet size differs from the landscape"));
    }
    let seqs = enumerate_space(nk.alphabet_size, nk.length)?;
    let labels = seqs.iter().map(|s| nk.fitness(s)).collect::<Result<Vec<_>>>()?;
    LabeledDataset::new(format!("nk-L{}-A{}-K{}-s{}", nk.length, nk.alphabet_size, nk.k, nk.seed), alphabet.clone(), seqs, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn additive_landscape_optimum_is_per_site_argmax() {
        let nk = NkLandscape::new(8, 4, 0, 17).unwrap();
        let best_site: Vec<u8> = nk
            .tables()
            .iter()
            .map(|t| {
                (0..t.len())
                    .max_by(|&a, &b| t[a].total_cmp(&t[b]))
                    .unwrap() as u8
            })
            .collect();
        let space = enumerate_space(4, 8).unwrap();
        let best = space
            .iter()
            .max_by(|a, b| nk.fitness(a).unwrap().total_cmp(&nk.fitness(b).unwrap()))
            .unwrap();
        assert_eq!(best.0, best_site);
    }

    #[test]
    fn deterministic_and_bounded() {
        let a = NkLandscape::new(6, 4, 2, 5).unwrap();
        let b = NkLandscape::new(6, 4, 2, 5).unwrap();
        for s in enumerate_space(4, 6).unwrap() {
            let fa = a.fitness(&s).unwrap();
            assert_eq!(fa, b.fitness(&s).unwrap());
            assert!((0.0..=1.0).contains(&fa));
        }
        assert!(NkLandscape::new(4, 4, 4, 0).is_err());
    }

    #[test]
    fn neighborhood_wraps_around() {
        let nk = NkLandscape::new(3, 2, 1, 9).unwrap();
        let s = Sequence(vec![1, 0, 1]);
        let t = nk.tables();
        // sites (0,1), (1,2), (2,0) with the first site most significant
        let expect = (t[0][2] + t[1][1] + t[2][3]) / 3.0;
        assert!((nk.fitness(&s).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn table_oracle_lookup_and_errors() {
        let a = Alphabet::new("AB").unwrap();
        let seqs = enumerate_space(2, 2).unwrap();
        let data = LabeledDataset::new("t", a.clone(), seqs.clone(), vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let o = ExactOracle::table(&data).unwrap();
        assert_eq!(o.fitness(&seqs[2]).unwrap(), 0.3);
        assert!(matches!(o.fitness(&Sequence(vec![0, 0, 0])), Err(Error::OracleMiss(_))));

        let mut dup = seqs.clone();
        dup[3] = dup[0].clone();
        let data = LabeledDataset::new("t", a, dup, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let err = ExactOracle::table(&data).unwrap_err();
        assert_eq!(err.to_string(), "duplicate sequence AA");
    }
}
