//! Convex-hull membership by phase-1 simplex, point-set distances, and the
//! experiments that check where synthetic nodes land relative to the hull of
//! the training embeddings.

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::random;
use crate::scalar::sq_dist;

pub const DEFAULT_HULL_TOL: f64 = 1e-7;
const PIVOT_EPS: f64 = 1e-11;

/// Is `z` a convex combination of `points`?
#[derive(Clone, Debug, PartialEq)]
pub struct HullQuery<'a> {
    pub z: &'a [f64],
    pub points: &'a [Vec<f64>],
    /// Accept when the phase-1 objective ends at or below this.
    pub tolerance: f64,
}

impl<'a> HullQuery<'a> {
    pub fn new(z: &'a [f64], points: &'a [Vec<f64>]) -> Self {
        Self { z, points, tolerance: DEFAULT_HULL_TOL }
    }

    pub fn contains(&self) -> Result<bool> {
        let d = self.z.len();
        if self.points.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if self.points.iter().any(|p| p.len() != d) {
            return Err(Error::shape("query and hull points differ in dimension"));
        }
        // an axis that separates z from every point settles it without the LP
        for k in 0..d {
            let (lo, hi) = self
                .points
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[k]), hi.max(p[k])));
            if self.z[k] > hi + self.tolerance || self.z[k] < lo - self.tolerance {
                return Ok(false);
            }
        }
        Ok(phase_one(self.z, self.points) <= self.tolerance)
    }
}

pub fn in_convex_hull(z: &[f64], points: &[Vec<f64>]) -> Result<bool> {
    HullQuery::new(z, points).contains()
}

/// Minimum of the phase-1 objective `Σ artificials` for
/// `{λ ≥ 0 : Σ λ_i x_i = z, Σ λ_i = 1}`, using Bland's rule.
fn phase_one(z: &[f64], points: &[Vec<f64>]) -> f64 {
    let d = z.len();
    let n = points.len();
    let m = d + 1;
    let width = n + m + 1;
    let rhs = width - 1;
    let mut t = vec![0.0; m * width];
    for r in 0..m {
        let row = &mut t[r * width..(r + 1) * width];
        for (j, p) in points.iter().enumerate() {
            row[j] = if r < d { p[r] } else { 1.0 };
        }
        row[rhs] = if r < d { z[r] } else { 1.0 };
        if row[rhs] < 0.0 {
            for v in row[..n].iter_mut() {
                *v = -*v;
            }
            row[rhs] = -row[rhs];
        }
        row[n + r] = 1.0;
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    // reduced costs of the phase-1 objective, and its current value
    let mut cost = vec![0.0; width];
    for r in 0..m {
        for j in 0..n {
            cost[j] -= t[r * width + j];
        }
        cost[rhs] += t[r * width + rhs];
    }
    loop {
        if cost[rhs] <= 0.0 {
            return cost[rhs].max(0.0);
        }
        let Some(enter) = (0..n + m).find(|&j| cost[j] < -PIVOT_EPS) else {
            return cost[rhs];
        };
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..m {
            let a = t[r * width + enter];
            if a > PIVOT_EPS {
                let ratio = t[r * width + rhs] / a;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((lr, best)) => {
                        if ratio < best || (ratio == best && basis[r] < basis[lr]) {
                            Some((r, ratio))
                        } else {
                            Some((lr, best))
                        }
                    }
                };
            }
        }
        // the phase-1 objective is bounded below, so a pivot row always exists
        let Some((pr, _)) = leave else {
            return cost[rhs];
        };
        let piv = t[pr * width + enter];
        for v in t[pr * width..(pr + 1) * width].iter_mut() {
            *v /= piv;
        }
        let pivot_row: Vec<f64> = t[pr * width..(pr + 1) * width].to_vec();
        for r in 0..m {
            if r == pr {
                continue;
            }
            let f = t[r * width + enter];
            if f != 0.0 {
                for (v, &p) in t[r * width..(r + 1) * width].iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
            }
        }
        // w = value + Σ c_j x_j: coefficients subtract, the value adds
        let f = cost[enter];
        for (v, &p) in cost[..rhs].iter_mut().zip(&pivot_row) {
            *v -= f * p;
        }
        cost[rhs] += f * pivot_row[rhs];
        basis[pr] = enter;
    }
}

pub fn min_distance_to_set(z: &[f64], points: &[Vec<f64>]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(points.iter().map(|p| sq_dist(z, p)).fold(f64::INFINITY, f64::min).sqrt())
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise hull vertices by the monotone chain.
pub fn hull_2d(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &q in &p {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], q) <= 0.0 {
            lower.pop();
        }
        lower.push(q);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &q in p.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], q) <= 0.0 {
            upper.pop();
        }
        upper.push(q);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Geometric membership test for the plane; boundary counts as inside.
pub fn hull_2d_oracle(z: [f64; 2], points: &[[f64; 2]]) -> Result<bool> {
    let h = hull_2d(points);
    if h.len() < 3 {
        return Err(Error::Degenerate("collinear points have no planar hull".into()));
    }
    Ok((0..h.len()).all(|i| cross(h[i], h[(i + 1) % h.len()], z) >= -1e-9))
}

/// Training points for the hull experiments.
#[derive(Clone, Debug, PartialEq)]
pub enum PropSource {
    /// Fresh `N(0, I_d)` draws for every dimension.
    Gaussian,
    /// A fixed pool of embeddings; `N` of them are drawn without replacement.
    Latents(Vec<Vec<f64>>),
}

impl PropSource {
    pub fn name(&self) -> &'static str {
        match self {
            PropSource::Gaussian => "gaussian",
            PropSource::Latents(_) => "vae-latents",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropEntry {
    pub d: usize,
    pub n: usize,
    pub trials: usize,
    pub outside: usize,
    pub fraction_outside: f64,
    /// Mean over outside nodes of the distance to the nearest training point;
    /// zero when no node fell outside.
    pub mean_min_distance: f64,
    pub max_min_distance: f64,
    pub bound: f64,
    pub beta: f64,
    pub c_beta: f64,
    /// `exp(d / (2(C_β² + 2)))`; the outside-hull regime wants `n` far below it.
    pub n_threshold: f64,
    pub source: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PropReport {
    pub entries: Vec<PropEntry>,
}

pub fn c_beta(beta: f64) -> f64 {
    (1.0 + beta) / (1.0 - beta)
}

pub fn distance_bound(beta: f64, d: usize) -> f64 {
    2.0 * (1.0 - beta) * (d as f64).sqrt()
}

pub fn n_threshold(beta: f64, d: usize) -> f64 {
    let c = c_beta(beta);
    (d as f64 / (2.0 * (c * c + 2.0))).exp()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropConfig {
    pub dims: Vec<usize>,
    pub n: usize,
    pub beta: f64,
    pub trials: usize,
    pub source: PropSource,
    pub seed: u64,
}

fn validate(cfg: &PropConfig) -> Result<()> {
    if !(cfg.beta > 0.0 && cfg.beta < 1.0) {
        return Err(Error::param("beta must be in (0, 1)"));
    }
    if cfg.n == 0 || cfg.dims.is_empty() {
        return Err(Error::param("need at least one dimension and one training point"));
    }
    if cfg.dims.iter().any(|&d| d < 2) {
        return Err(Error::param("dimensions must be at least 2"));
    }
    if let PropSource::Latents(pool) = &cfg.source {
        if pool.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if cfg.dims.iter().any(|&d| d != pool[0].len()) {
            return Err(Error::param(format!(
                "latent source has dimension {}, requested {:?}",
                pool[0].len(),
                cfg.dims
            )));
        }
    }
    Ok(())
}

fn run_dim(cfg: &PropConfig, index: usize, d: usize) -> Result<PropEntry> {
    let mut rng = random::seeded(random::derive_seed(cfg.seed, index as u64));
    let xs: Vec<Vec<f64>> = match &cfg.source {
        PropSource::Gaussian => (0..cfg.n).map(|_| random::normal_vec(&mut rng, d)).collect(),
        PropSource::Latents(pool) => {
            let take = cfg.n.min(pool.len());
            let mut idx = sample(&mut rng, pool.len(), take).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| pool[i].clone()).collect()
        }
    };
    let mut outside = 0;
    let mut dist_sum = 0.0;
    let mut dist_max: f64 = 0.0;
    for _ in 0..cfg.trials {
        let anchor = &xs[rng.random_range(0..xs.len())];
        let eps: Vec<f64> = random::normal_vec(&mut rng, d);
        let z: Vec<f64> = anchor
            .iter()
            .zip(&eps)
            .map(|(&a, &e)| cfg.beta * a + (1.0 - cfg.beta) * e)
            .collect();
        if !in_convex_hull(&z, &xs)? {
            outside += 1;
            let dist = min_distance_to_set(&z, &xs)?;
            dist_sum += dist;
            dist_max = dist_max.max(dist);
        }
    }
    Ok(PropEntry {
        d,
        n: xs.len(),
        trials: cfg.trials,
        outside,
        fraction_outside: if cfg.trials == 0 { 0.0 } else { outside as f64 / cfg.trials as f64 },
        mean_min_distance: if outside == 0 { 0.0 } else { dist_sum / outside as f64 },
        max_min_distance: dist_max,
        bound: distance_bound(cfg.beta, d),
        beta: cfg.beta,
        c_beta: c_beta(cfg.beta),
        n_threshold: n_threshold(cfg.beta, d),
        source: cfg.source.name().to_string(),
    })
}

/// Synthetic nodes `β·x̄ + (1-β)·ε` tested against the hull of their
/// training set, one entry per dimension. `threads > 1` runs dimensions
/// concurrently; results are identical.
pub fn run_props(cfg: &PropConfig, threads: usize) -> Result<PropReport> {
    validate(cfg)?;
    let entries = if threads <= 1 || cfg.dims.len() == 1 {
        cfg.dims.iter().enumerate().map(|(i, &d)| run_dim(cfg, i, d)).collect::<Result<Vec<_>>>()?
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = cfg
                .dims
                .iter()
                .enumerate()
                .map(|(i, &d)| s.spawn(move || run_dim(cfg, i, d)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("hull worker panicked"))
                .collect::<Result<Vec<_>>>()
        })?
    };
    Ok(PropReport { entries })
}

/// Fraction of synthetic nodes outside the hull.
pub fn outside_fraction_study(cfg: &PropConfig) -> Result<PropReport> {
    run_props(cfg, 1)
}

/// Distance of outside nodes to the training set against `2(1-β)√d`.
pub fn distance_bound_study(cfg: &PropConfig) -> Result<PropReport> {
    run_props(cfg, 1)
}
