use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{levenshtein_within, LabeledDataset};
use crate::error::{Error, Result};
use crate::random;

/// Linear-interpolation percentile (`p` in `[0, 100]`) of unsorted values.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of empty slice");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = (p.clamp(0.0, 100.0) / 100.0) * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (rank - lo as f64)
}

/// Difficulty filter parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitOptions {
    /// Keep sequences with fitness strictly below this percentile.
    pub percentile: f64,
    /// Minimum edit distance to every sequence of the top set.
    pub gap: usize,
    /// Sequences at or above this percentile form the top set.
    #[serde(default = "default_top_percentile")]
    pub top_percentile: f64,
}

fn default_top_percentile() -> f64 {
    99.0
}

impl SplitOptions {
    pub fn new(percentile: f64, gap: usize) -> Self {
        Self {
            percentile,
            gap,
            top_percentile: default_top_percentile(),
        }
    }

    /// Indices (ascending) of the items passing the filter.
    pub fn select(&self, data: &LabeledDataset) -> Result<Vec<usize>> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if !(self.percentile > 0.0 && self.percentile <= 100.0) {
            return Err(Error::param(format!(
                "percentile must be in (0, 100], got {}",
                self.percentile
            )));
        }
        let threshold = percentile(&data.labels, self.percentile);
        let top: Vec<&[u8]> = if self.gap == 0 {
            Vec::new()
        } else {
            let top_cut = percentile(&data.labels, self.top_percentile);
            data.labels
                .iter()
                .zip(&data.sequences)
                .filter(|(&y, _)| y >= top_cut)
                .map(|(_, s)| s.indices())
                .collect()
        };
        let picked: Vec<usize> = (0..data.len())
            .filter(|&i| data.labels[i] < threshold)
            .filter(|&i| {
                let s = data.sequences[i].indices();
                !top.iter().any(|t| levenshtein_within(s, t, self.gap))
            })
            .collect();
        if picked.is_empty() {
            return Err(Error::EmptySplit);
        }
        Ok(picked)
    }
}

/// Items below the `percentile`-th fitness percentile that are at least
/// `gap` edits away from every top-1-percentile sequence. Order is preserved.
pub fn percentile_gap_split(data: &LabeledDataset, percentile: f64, gap: usize) -> Result<LabeledDataset> {
    let opts = SplitOptions::new(percentile, gap);
    let idx = opts.select(data)?;
    data.select(format!("{}-p{percentile}-g{gap}", data.name), &idx)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubsampleMode {
    Random,
    Lowest,
}

/// Keeps `ceil(ratio * n)` items, returned in their original order.
pub fn subsample(data: &LabeledDataset, ratio: f64, mode: SubsampleMode, seed: u64) -> Result<LabeledDataset> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::param(format!("ratio must be in (0, 1], got {ratio}")));
    }
    let n = data.len();
    let m = ((ratio * n as f64).ceil() as usize).min(n);
    if m == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut idx: Vec<usize> = match mode {
        SubsampleMode::Random => {
            let mut rng = random::seeded(seed);
            index::sample(&mut rng, n, m).into_vec()
        }
        SubsampleMode::Lowest => {
            let mut order: Vec<usize> = (0..n).collect();
            // stable: ties keep original index order
            order.sort_by(|&a, &b| data.labels[a].total_cmp(&data.labels[b]));
            order.truncate(m);
            order
        }
    };
    idx.sort_unstable();
    data.select(format!("{}-{:?}-{ratio}", data.name, mode).to_lowercase(), &idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{levenshtein, Alphabet};

    fn dataset(rows: &[(&str, f64)]) -> LabeledDataset {
        let a = Alphabet::dna();
        let seqs = rows.iter().enumerate().map(|(i, (s, _))| a.encode(s, i + 1).unwrap()).collect();
        let labels = rows.iter().map(|r| r.1).collect();
        LabeledDataset::new("toy", a, seqs, labels).unwrap()
    }

    fn toy10() -> LabeledDataset {
        dataset(&[
            ("AAAA", 0.1),
            ("CCCC", 0.2),
            ("GGGG", 0.3),
            ("TTTT", 0.4),
            ("TTTA", 0.05), // one edit from the best
            ("ACAC", 0.6),
            ("GTGT", 0.7),
            ("AGAG", 0.8),
            ("CTCT", 0.9),
            ("TTTT", 1.0),
        ])
    }

    // exhaustive filter written directly from the definition
    fn brute(data: &LabeledDataset, p: f64, gap: usize) -> Vec<usize> {
        let thr = percentile(&data.labels, p);
        let top_cut = percentile(&data.labels, 99.0);
        (0..data.len())
            .filter(|&i| data.labels[i] < thr)
            .filter(|&i| {
                (0..data.len())
                    .filter(|&j| data.labels[j] >= top_cut)
                    .all(|j| levenshtein(&data.sequences[i].0, &data.sequences[j].0) >= gap)
            })
            .collect()
    }

    #[test]
    fn percentile_interpolates() {
        assert_eq!(percentile(&[3.0, 1.0, 2.0, 4.0], 50.0), 2.5);
        assert_eq!(percentile(&[5.0], 30.0), 5.0);
        assert_eq!(percentile(&[1.0, 2.0], 100.0), 2.0);
    }

    #[test]
    fn gap_zero_is_percentile_filter() {
        let d = toy10();
        let idx = SplitOptions::new(50.0, 0).select(&d).unwrap();
        let thr = percentile(&d.labels, 50.0);
        let expect: Vec<usize> = (0..10).filter(|&i| d.labels[i] < thr).collect();
        assert_eq!(idx, expect);
    }

    #[test]
    fn adjacent_low_point_excluded() {
        let d = toy10();
        let idx = SplitOptions::new(50.0, 2).select(&d).unwrap();
        assert_eq!(idx, brute(&d, 50.0, 2));
        assert!(!idx.contains(&4));
        assert!(idx.contains(&0));
        // TTTT at index 3 duplicates the best sequence
        assert!(!idx.contains(&3));
    }

    #[test]
    fn full_percentile_drops_only_the_max() {
        let d = toy10();
        let idx = SplitOptions::new(100.0, 0).select(&d).unwrap();
        assert_eq!(idx, brute(&d, 100.0, 0));
        assert_eq!(idx, (0..9).collect::<Vec<_>>());
    }

    #[test]
    fn empty_split_is_error() {
        let d = dataset(&[("AAAA", 1.0), ("CCCC", 1.0)]);
        let err = percentile_gap_split(&d, 50.0, 0).unwrap_err();
        assert_eq!(err.to_string(), "difficulty filter selected zero sequences");
    }

    #[test]
    fn lowest_mode() {
        let d = dataset(&[("AAAA", 3.0), ("CCCC", 1.0), ("GGGG", 2.0), ("TTTT", 0.0)]);
        let s = subsample(&d, 0.5, SubsampleMode::Lowest, 0).unwrap();
        let mut got = s.labels.clone();
        got.sort_by(f64::total_cmp);
        assert_eq!(got, vec![0.0, 1.0]);
    }

    #[test]
    fn random_mode_full_ratio_and_determinism() {
        let d = toy10();
        let full = subsample(&d, 1.0, SubsampleMode::Random, 3).unwrap();
        assert_eq!(full.sequences, d.sequences);
        let a = subsample(&d, 0.3, SubsampleMode::Random, 11).unwrap();
        let b = subsample(&d, 0.3, SubsampleMode::Random, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
    }
}
