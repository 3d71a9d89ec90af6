//! Latent graph construction: synthetic nodes by noisy interpolation, brute
//! force kNN edges, inverse-distance weights, and node degrees.

use std::fmt::Write as _;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::random;
use crate::scalar::sq_dist;
use crate::Scalar;

/// Where Alg.-1 style sampling draws the anchor `x̄` from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleFrom {
    /// The growing node set, so synthetic nodes can seed new ones.
    #[default]
    All,
    /// Training nodes only.
    Originals,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoothingParams {
    /// Target node count `N`.
    pub nodes: usize,
    /// Interpolation weight on the anchor, in `(0, 1)`.
    pub beta: f64,
    pub k: usize,
    pub gamma: f64,
    pub alpha: f64,
    /// Propagation rounds `m`.
    pub layers: usize,
    pub dist_floor: f64,
    pub seed: u64,
    pub sample_from: SampleFrom,
    /// Reset known labels after every propagation round.
    pub clamp: bool,
}

impl Default for SmoothingParams {
    fn default() -> Self {
        Self {
            nodes: 20_000,
            beta: 0.5,
            k: 8,
            gamma: 1.0,
            alpha: 0.2,
            layers: 1,
            dist_floor: 1e-8,
            seed: 0,
            sample_from: SampleFrom::All,
            clamp: false,
        }
    }
}

impl SmoothingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::param(format!("beta must be in (0, 1), got {}", self.beta)));
        }
        if self.k == 0 {
            return Err(Error::param("k must be at least 1"));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::param("gamma must be positive"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::param(format!("alpha must be in [0, 1], got {}", self.alpha)));
        }
        if !(self.dist_floor > 0.0) {
            return Err(Error::param("distance floor must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphNode<T> {
    pub coords: Vec<T>,
    pub is_synthetic: bool,
    /// Present exactly for original (training) nodes.
    pub known_label: Option<T>,
}

/// Undirected edge with `i < j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge<T> {
    pub i: usize,
    pub j: usize,
    pub dist: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatentGraph<T> {
    pub nodes: Vec<GraphNode<T>>,
    /// Sorted by `(i, j)`, no duplicates.
    pub edges: Vec<Edge<T>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor<T> {
    pub index: usize,
    pub dist: T,
}

/// The `k` nearest points to `points[index]` by Euclidean distance, nearest
/// first; equal distances resolve to the lower index.
pub fn knn<T: Scalar>(index: usize, points: &[Vec<T>], k: usize) -> Result<Vec<Neighbor<T>>> {
    knn_with(index, points, k, &mut Vec::new())
}

fn knn_with<T: Scalar>(
    index: usize,
    points: &[Vec<T>],
    k: usize,
    scratch: &mut Vec<(T, usize)>,
) -> Result<Vec<Neighbor<T>>> {
    if k >= points.len() {
        return Err(Error::TooManyNeighbors { k, n: points.len() });
    }
    let q = &points[index];
    scratch.clear();
    scratch.extend(
        points
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != index)
            .map(|(j, p)| (sq_dist(q, p), j)),
    );
    let cmp = |a: &(T, usize), b: &(T, usize)| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
    };
    if k < scratch.len() {
        scratch.select_nth_unstable_by(k - 1, cmp);
    }
    let best = &mut scratch[..k];
    best.sort_unstable_by(cmp);
    Ok(best
        .iter()
        .map(|&(d2, j)| Neighbor { index: j, dist: d2.sqrt() })
        .collect())
}

/// Union of every node's kNN edges as canonical undirected pairs.
/// `threads > 1` splits the queries across scoped threads; output is identical.
pub fn knn_edges<T: Scalar>(points: &[Vec<T>], k: usize, threads: usize) -> Result<Vec<Edge<T>>> {
    if k >= points.len() {
        return Err(Error::TooManyNeighbors { k, n: points.len() });
    }
    let per_node: Vec<Vec<Neighbor<T>>> = if threads <= 1 {
        let mut scratch = Vec::with_capacity(points.len());
        (0..points.len())
            .map(|i| knn_with(i, points, k, &mut scratch))
            .collect::<Result<_>>()?
    } else {
        let chunk = points.len().div_ceil(threads);
        let parts: Vec<Result<Vec<Vec<Neighbor<T>>>>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..points.len())
                .step_by(chunk)
                .map(|start| {
                    s.spawn(move || {
                        let mut scratch = Vec::with_capacity(points.len());
                        (start..(start + chunk).min(points.len()))
                            .map(|i| knn_with(i, points, k, &mut scratch))
                            .collect::<Result<Vec<_>>>()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("knn worker panicked")).collect()
        });
        let mut all = Vec::with_capacity(points.len());
        for p in parts {
            all.extend(p?);
        }
        all
    };
    let mut edges: Vec<Edge<T>> = per_node
        .iter()
        .enumerate()
        .flat_map(|(i, ns)| {
            ns.iter().map(move |n| Edge {
                i: i.min(n.index),
                j: i.max(n.index),
                dist: n.dist,
            })
        })
        .collect();
    edges.sort_unstable_by_key(|e| (e.i, e.j));
    edges.dedup_by(|a, b| a.i == b.i && a.j == b.j);
    Ok(edges)
}

/// Appends synthetic nodes `z = β·x̄ + (1-β)·ε` until there are `params.nodes`
/// nodes, then connects everything with kNN edges.
pub fn create_graph<T: Scalar>(embeddings: &[Vec<T>], labels: &[T], params: &SmoothingParams) -> Result<LatentGraph<T>> {
    create_graph_threaded(embeddings, labels, params, 1)
}

pub fn create_graph_threaded<T: Scalar>(
    embeddings: &[Vec<T>],
    labels: &[T],
    params: &SmoothingParams,
    threads: usize,
) -> Result<LatentGraph<T>> {
    params.validate()?;
    if embeddings.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if embeddings.len() != labels.len() {
        return Err(Error::shape("one label per embedding required"));
    }
    if params.nodes < embeddings.len() {
        return Err(Error::param(format!(
            "graph size {} is smaller than the {} training nodes",
            params.nodes,
            embeddings.len()
        )));
    }
    let d = embeddings[0].len();
    if embeddings.iter().any(|e| e.len() != d) {
        return Err(Error::shape("embeddings differ in dimension"));
    }
    let n_train = embeddings.len();
    let mut points: Vec<Vec<T>> = Vec::with_capacity(params.nodes);
    points.extend(embeddings.iter().cloned());
    let beta = T::lit(params.beta);
    let keep = T::one() - beta;
    let mut rng = random::seeded(params.seed);
    while points.len() < params.nodes {
        let pool = match params.sample_from {
            SampleFrom::All => points.len(),
            SampleFrom::Originals => n_train,
        };
        let anchor = rng.random_range(0..pool);
        let z: Vec<T> = (0..d)
            .map(|c| beta * points[anchor][c] + keep * random::normal::<T>(&mut rng))
            .collect();
        points.push(z);
    }
    let edges = knn_edges(&points, params.k, threads)?;
    let nodes = points
        .into_iter()
        .enumerate()
        .map(|(i, coords)| GraphNode {
            coords,
            is_synthetic: i >= n_train,
            known_label: (i < n_train).then(|| labels[i]),
        })
        .collect();
    Ok(LatentGraph { nodes, edges })
}

impl<T: Scalar> LatentGraph<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn coords(&self) -> Vec<Vec<T>> {
        self.nodes.iter().map(|n| n.coords.clone()).collect()
    }

    pub fn num_original(&self) -> usize {
        self.nodes.iter().filter(|n| !n.is_synthetic).count()
    }

    /// Line-oriented debug dump.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (i, n) in self.nodes.iter().enumerate() {
            let _ = write!(s, "node {i} {}", n.is_synthetic);
            match n.known_label {
                Some(y) => {
                    let _ = write!(s, " {y}");
                }
                None => s.push_str(" -"),
            }
            for c in &n.coords {
                let _ = write!(s, " {c}");
            }
            s.push('\n');
        }
        for e in &self.edges {
            let _ = writeln!(s, "edge {} {} {}", e.i, e.j, e.dist);
        }
        s
    }
}

/// Symmetric sparse matrix stored as sorted per-row adjacency lists.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSym<T> {
    rows: Vec<Vec<(usize, T)>>,
}

impl<T: Scalar> SparseSym<T> {
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, T)>) -> Self {
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
        for (i, j, w) in edges {
            rows[i].push((j, w));
            rows[j].push((i, w));
        }
        for r in &mut rows {
            r.sort_unstable_by_key(|e| e.0);
        }
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[(usize, T)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.rows[i]
            .binary_search_by_key(&j, |e| e.0)
            .map_or(T::zero(), |p| self.rows[i][p].1)
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let n = self.len();
        let mut m = vec![vec![T::zero(); n]; n];
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, w) in r {
                m[i][j] = w;
            }
        }
        m
    }

    /// Multiplies every stored weight by `c`.
    pub fn scaled(&self, c: T) -> Self {
        Self {
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|&(j, w)| (j, w * c)).collect())
                .collect(),
        }
    }
}

/// `A_ij = γ / max(dist_ij, floor)` on graph edges, zero elsewhere.
pub fn weighted_adjacency<T: Scalar>(graph: &LatentGraph<T>, gamma: f64, dist_floor: f64) -> SparseSym<T> {
    let g = T::lit(gamma);
    let floor = T::lit(dist_floor);
    SparseSym::from_edges(
        graph.len(),
        graph.edges.iter().map(|e| (e.i, e.j, g / e.dist.max(floor))),
    )
}

/// Row sums of `A`; every node must have positive degree.
pub fn degree_matrix<T: Scalar>(a: &SparseSym<T>) -> Result<Vec<T>> {
    (0..a.len())
        .map(|i| {
            let d: T = a.row(i).iter().map(|e| e.1).sum();
            if d > T::zero() {
                Ok(d)
            } else {
                Err(Error::ZeroDegree(i))
            }
        })
        .collect()
}
