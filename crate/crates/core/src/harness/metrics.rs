use serde::{Deserialize, Serialize};

use super::oracle::ExactOracle;
use crate::data::{levenshtein, normalize_fitness, FitnessRange, Sequence};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Median min-max normalized oracle fitness.
    pub fitness: f64,
    /// Median pairwise edit distance; 0 for a single design.
    pub diversity: f64,
    /// Median over designs of the edit distance to the nearest training sequence.
    pub novelty: f64,
    pub k_effective: usize,
}

/// Median with the two middle values averaged for even counts.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut v = values.to_vec();
    let n = v.len();
    let mid = n / 2;
    let (_, &mut hi, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        hi
    } else {
        let lo = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo + hi) / 2.0
    }
}

pub fn evaluate_designs(
    designs: &[Sequence],
    oracle: &ExactOracle,
    train: &[Sequence],
    range: FitnessRange,
) -> Result<MetricsReport> {
    if designs.is_empty() {
        return Err(Error::param("cannot evaluate an empty design set"));
    }
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let fit = designs
        .iter()
        .map(|s| Ok(normalize_fitness(oracle.fitness(s)?, range)))
        .collect::<Result<Vec<_>>>()?;
    let mut pairs = Vec::with_capacity(designs.len() * (designs.len() - 1) / 2);
    for i in 0..designs.len() {
        for j in i + 1..designs.len() {
            pairs.push(levenshtein(designs[i].indices(), designs[j].indices()) as f64);
        }
    }
    let nearest: Vec<f64> = designs
        .iter()
        .map(|s| {
            train
                .iter()
                .map(|t| levenshtein(s.indices(), t.indices()))
                .min()
                .unwrap_or(0) as f64
        })
        .collect();
    Ok(MetricsReport {
        fitness: median(&fit),
        diversity: if pairs.is_empty() { 0.0 } else { median(&pairs) },
        novelty: median(&nearest),
        k_effective: designs.len(),
    })
}

/// Slow recomputation with its own edit distance and median, used to
/// cross-check [`evaluate_designs`].
pub fn evaluate_designs_reference(
    designs: &[Sequence],
    oracle: &ExactOracle,
    train: &[Sequence],
    range: FitnessRange,
) -> Result<MetricsReport> {
    fn edit(a: &[u8], b: &[u8]) -> usize {
        let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in t.iter_mut().enumerate() {
            row[0] = i;
        }
        for j in 0..=b.len() {
            t[0][j] = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let sub = t[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
                t[i][j] = sub.min(t[i - 1][j] + 1).min(t[i][j - 1] + 1);
            }
        }
        t[a.len()][b.len()]
    }
    fn sorted_median(mut v: Vec<f64>) -> f64 {
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite metrics"));
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        }
    }
    if designs.is_empty() {
        return Err(Error::param("cannot evaluate an empty design set"));
    }
    let mut fit = Vec::new();
    for s in designs {
        let y = oracle.fitness(s)?;
        fit.push((y - range.y_min) / (range.y_max - range.y_min));
    }
    let mut pairs = Vec::new();
    for (i, a) in designs.iter().enumerate() {
        for b in &designs[..i] {
            pairs.push(edit(&a.0, &b.0) as f64);
        }
    }
    let mut nearest = Vec::new();
    for s in designs {
        let mut best = usize::MAX;
        for t in train {
            best = best.min(edit(&s.0, &t.0));
        }
        nearest.push(best as f64);
    }
    Ok(MetricsReport {
        fitness: sorted_median(fit),
        diversity: if pairs.is_empty() { 0.0 } else { sorted_median(pairs) },
        novelty: sorted_median(nearest),
        k_effective: designs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;
    use proptest::prelude::*;
    use rand::Rng as _;

    fn nk() -> ExactOracle {
        ExactOracle::nk(6, 4, 1, 3).unwrap()
    }

    fn seq(v: &[u8]) -> Sequence {
        Sequence(v.to_vec())
    }

    #[test]
    fn median_cases() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[7.0]), 7.0);
    }

    #[test]
    fn singleton_and_training_copies() {
        let train = vec![seq(&[0, 1, 2, 3, 0, 1]), seq(&[1, 1, 1, 1, 1, 1])];
        let range = FitnessRange::new(0.0, 1.0).unwrap();
        let one = evaluate_designs(&train[..1], &nk(), &train, range).unwrap();
        assert_eq!(one.diversity, 0.0);
        assert_eq!(one.novelty, 0.0);
        assert_eq!(one.k_effective, 1);
        let both = evaluate_designs(&train, &nk(), &train, range).unwrap();
        assert_eq!(both.novelty, 0.0);
    }

    #[test]
    fn diversity_of_three_pairs() {
        // pairwise edit distances 2, 4, 6
        let a = seq(&[0, 0, 0, 0, 0, 0]);
        let b = seq(&[1, 1, 0, 0, 0, 0]);
        let c = seq(&[1, 1, 2, 2, 2, 2]);
        let d: Vec<usize> = [(&a, &b), (&a, &c), (&b, &c)]
            .iter()
            .map(|(x, y)| levenshtein(&x.0, &y.0))
            .collect();
        assert_eq!(d, vec![2, 6, 4]);
        let range = FitnessRange::new(0.0, 1.0).unwrap();
        let m = evaluate_designs(&[a.clone(), b, c], &nk(), &[a], range).unwrap();
        assert_eq!(m.diversity, 4.0);
    }

    #[test]
    fn oracle_miss_propagates() {
        let range = FitnessRange::new(0.0, 1.0).unwrap();
        assert!(evaluate_designs(&[seq(&[0, 1])], &nk(), &[seq(&[0, 1])], range).is_err());
        assert!(evaluate_designs(&[], &nk(), &[seq(&[0, 1])], range).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn matches_reference(seed in 0u64..100_000, n in 1usize..20, t in 1usize..20) {
            let mut rng = random::seeded(seed);
            let mut draw = |k: usize| -> Vec<Sequence> {
                (0..k).map(|_| Sequence((0..6).map(|_| rng.random_range(0..4u8)).collect())).collect()
            };
            let designs = draw(n);
            let train = draw(t);
            let range = FitnessRange::new(0.1, 0.9).unwrap();
            let fast = evaluate_designs(&designs, &nk(), &train, range).unwrap();
            let slow = evaluate_designs_reference(&designs, &nk(), &train, range).unwrap();
            prop_assert_eq!(fast, slow);
        }
    }
}
