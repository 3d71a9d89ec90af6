//! Symmetric-normalized label propagation over the latent graph.

use std::fmt::Write as _;

use crate::error::Result;
use crate::graph::{degree_matrix, weighted_adjacency, LatentGraph, SmoothingParams, SparseSym};
use crate::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct LabelVector<T> {
    pub values: Vec<T>,
    pub known_mask: Vec<bool>,
}

impl<T: Scalar> LabelVector<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// CSV dump `node_index,is_synthetic,label`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("node_index,is_synthetic,label\n");
        for (i, (v, known)) in self.values.iter().zip(&self.known_mask).enumerate() {
            let _ = writeln!(s, "{i},{},{v}", !known);
        }
        s
    }
}

/// Known labels for originals, zero for synthetics.
pub fn init_labels<T: Scalar>(graph: &LatentGraph<T>) -> LabelVector<T> {
    LabelVector {
        values: graph.nodes.iter().map(|n| n.known_label.unwrap_or_else(T::zero)).collect(),
        known_mask: graph.nodes.iter().map(|n| n.known_label.is_some()).collect(),
    }
}

/// `α·D^-1/2·A·D^-1/2·y + (1-α)·y`, by sparse row traversal.
pub fn propagate_step<T: Scalar>(a: &SparseSym<T>, degree: &[T], y: &[T], alpha: T) -> Vec<T> {
    let inv_sqrt: Vec<T> = degree.iter().map(|d| d.sqrt().recip()).collect();
    let keep = T::one() - alpha;
    (0..y.len())
        .map(|i| {
            let acc: T = a.row(i).iter().map(|&(j, w)| w * inv_sqrt[j] * y[j]).sum();
            alpha * inv_sqrt[i] * acc + keep * y[i]
        })
        .collect()
}

/// Runs `steps` propagation rounds on a raw vector.
pub fn propagate<T: Scalar>(a: &SparseSym<T>, degree: &[T], y: &[T], alpha: T, steps: usize) -> Vec<T> {
    let mut cur = y.to_vec();
    for _ in 0..steps {
        cur = propagate_step(a, degree, &cur, alpha);
    }
    cur
}

/// Initial labels followed by `params.layers` propagation rounds. Known
/// labels drift freely unless `params.clamp` is set.
pub fn smooth<T: Scalar>(graph: &LatentGraph<T>, params: &SmoothingParams) -> Result<LabelVector<T>> {
    let init = init_labels(graph);
    let a = weighted_adjacency(graph, params.gamma, params.dist_floor);
    let degree = degree_matrix(&a)?;
    let alpha = T::lit(params.alpha);
    let mut values = init.values.clone();
    for _ in 0..params.layers {
        values = propagate_step(&a, &degree, &values, alpha);
        if params.clamp {
            for (v, (&known, &y0)) in values.iter_mut().zip(init.known_mask.iter().zip(&init.values)) {
                if known {
                    *v = y0;
                }
            }
        }
    }
    Ok(LabelVector { values, known_mask: init.known_mask })
}
