//! Sequences, labeled datasets, and the dataset-level operations used to
//! build benchmark splits.

mod distance;
mod io;
mod split;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use distance::{levenshtein, levenshtein_within};
pub use io::{parse_fasta, parse_fasta_str, parse_labeled_csv, parse_labeled_csv_str, write_labeled_csv};
pub use split::{percentile, percentile_gap_split, subsample, SplitOptions, SubsampleMode};

/// Ordered set of distinct symbols. Index `i` is the symbol's one-hot slot.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Alphabet {
    symbols: Vec<char>,
    #[serde(skip)]
    lookup: HashMap<char, u8>,
}

impl Alphabet {
    pub fn new(symbols: &str) -> Result<Self> {
        let symbols: Vec<char> = symbols.chars().collect();
        if symbols.len() < 2 {
            return Err(Error::InvalidAlphabet("needs at least two symbols".into()));
        }
        if symbols.len() > u8::MAX as usize {
            return Err(Error::InvalidAlphabet("too many symbols".into()));
        }
        let mut lookup = HashMap::with_capacity(symbols.len());
        for (i, &c) in symbols.iter().enumerate() {
            if lookup.insert(c, i as u8).is_some() {
                return Err(Error::InvalidAlphabet(format!("duplicate symbol '{c}'")));
            }
        }
        Ok(Self { symbols, lookup })
    }

    pub fn dna() -> Self {
        Self::new("ACGT").expect("valid alphabet")
    }

    pub fn protein() -> Self {
        Self::new("ACDEFGHIKLMNPQRSTVWY").expect("valid alphabet")
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn index_of(&self, c: char) -> Option<u8> {
        self.lookup.get(&c).copied()
    }

    pub fn symbol(&self, idx: u8) -> char {
        self.symbols[idx as usize]
    }

    /// Parses a string into a sequence. `row` is only used for error reporting.
    pub fn encode(&self, s: &str, row: usize) -> Result<Sequence> {
        s.chars()
            .map(|c| self.index_of(c).ok_or(Error::InvalidSymbol { row, symbol: c }))
            .collect::<Result<Vec<_>>>()
            .map(Sequence)
    }

    pub fn decode(&self, seq: &Sequence) -> String {
        seq.0.iter().map(|&i| self.symbol(i)).collect()
    }
}

impl TryFrom<String> for Alphabet {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        Alphabet::new(&s)
    }
}

impl From<Alphabet> for String {
    fn from(a: Alphabet) -> String {
        a.symbols.iter().collect()
    }
}

/// A sequence of alphabet indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Sequence(pub Vec<u8>);

impl Sequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub name: String,
    pub alphabet: Alphabet,
    pub sequences: Vec<Sequence>,
    pub labels: Vec<f64>,
}

impl LabeledDataset {
    /// Builds a dataset and checks the length, shape, and finiteness invariants.
    pub fn new(
        name: impl Into<String>,
        alphabet: Alphabet,
        sequences: Vec<Sequence>,
        labels: Vec<f64>,
    ) -> Result<Self> {
        if sequences.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if sequences.len() != labels.len() {
            return Err(Error::shape(format!(
                "{} sequences but {} labels",
                sequences.len(),
                labels.len()
            )));
        }
        let len = sequences[0].len();
        for (i, s) in sequences.iter().enumerate() {
            if s.len() != len {
                return Err(Error::LengthMismatch {
                    row: i + 1,
                    expected: len,
                    found: s.len(),
                });
            }
            if let Some(&bad) = s.0.iter().find(|&&v| v as usize >= alphabet.len()) {
                return Err(Error::MalformedRow {
                    row: i + 1,
                    msg: format!("symbol index {bad} outside alphabet of size {}", alphabet.len()),
                });
            }
        }
        if let Some(i) = labels.iter().position(|y| !y.is_finite()) {
            return Err(Error::MalformedRow {
                row: i + 1,
                msg: "label is not finite".into(),
            });
        }
        Ok(Self {
            name: name.into(),
            alphabet,
            sequences,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn seq_len(&self) -> usize {
        self.sequences.first().map_or(0, Sequence::len)
    }

    pub fn best_label(&self) -> f64 {
        self.labels.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn fitness_range(&self) -> Result<FitnessRange> {
        let lo = self.labels.iter().copied().fold(f64::INFINITY, f64::min);
        FitnessRange::new(lo, self.best_label())
    }

    /// Keeps the items at `indices`, in that order.
    pub fn select(&self, name: impl Into<String>, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Self {
            name: name.into(),
            alphabet: self.alphabet.clone(),
            sequences: indices.iter().map(|&i| self.sequences[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        })
    }
}

/// Lowest and highest known fitness, used for min-max normalization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitnessRange {
    pub y_min: f64,
    pub y_max: f64,
}

impl FitnessRange {
    pub fn new(y_min: f64, y_max: f64) -> Result<Self> {
        if !(y_min < y_max) || !y_min.is_finite() || !y_max.is_finite() {
            return Err(Error::param(format!(
                "fitness range requires y_min < y_max, got ({y_min}, {y_max})"
            )));
        }
        Ok(Self { y_min, y_max })
    }
}

/// Min-max normalization. Values outside the range map outside `[0, 1]`.
pub fn normalize_fitness(y: f64, range: FitnessRange) -> f64 {
    (y - range.y_min) / (range.y_max - range.y_min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alphabet_rejects_duplicates_and_singletons() {
        assert!(Alphabet::new("A").is_err());
        assert!(Alphabet::new("ACA").is_err());
        let a = Alphabet::dna();
        for (i, &c) in a.symbols().iter().enumerate() {
            assert_eq!(a.index_of(c), Some(i as u8));
        }
    }

    #[test]
    fn normalize_examples() {
        let r = FitnessRange::new(0.0, 2.0).unwrap();
        assert_eq!(normalize_fitness(0.0, r), 0.0);
        assert_eq!(normalize_fitness(2.0, r), 1.0);
        assert_eq!(normalize_fitness(0.5, r), 0.25);
        assert!(normalize_fitness(-1.0, r) < 0.0);
        assert!(FitnessRange::new(1.0, 1.0).is_err());
    }

    #[test]
    fn dataset_checks_lengths() {
        let a = Alphabet::dna();
        let s1 = a.encode("ACGT", 1).unwrap();
        let s2 = a.encode("ACG", 2).unwrap();
        let err = LabeledDataset::new("x", a, vec![s1, s2], vec![1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { row: 2, .. }));
    }
}
