//! Graphs, feature and mask matrices, the normalized Laplacian, and the
//! seeded generators for missingness patterns and dataset splits.

mod laplacian;
mod mask;
mod split;

pub use laplacian::{normalized_laplacian, CountingOperator, Laplacian, LinearOperator};
pub use mask::{generate_mask, MaskMatrix, Mechanism};
pub use split::{split_dataset, DatasetSplit, Proportions};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("graph must have at least one node")]
    Empty,
    #[error("self-loop at node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("edge ({u}, {v}) references a node outside 0..{n}")]
    NodeOutOfRange { u: usize, v: usize, n: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite feature value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("mask entry at ({row}, {col}) is {value}, expected 0 or 1")]
    InvalidMaskEntry { row: usize, col: usize, value: f64 },
    #[error("missing rate must lie in [0, 1), got {0}")]
    InvalidRate(f64),
    #[error("invalid split proportions {0:?}")]
    InvalidProportions([f64; 3]),
    #[error("{count} items cannot populate train/val/test sets of sizes {sizes:?}")]
    SplitTooSmall { count: usize, sizes: [usize; 3] },
}

/// Simple undirected graph without self-loops or parallel edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
    degree: Vec<usize>,
}

impl Graph {
    /// Builds a graph from an edge list. Edges are stored as `(min, max)`;
    /// self-loops and repeated pairs (in either orientation) are rejected.
    pub fn new(n_nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, GraphError> {
        if n_nodes == 0 {
            return Err(GraphError::Empty);
        }
        let mut seen = HashSet::new();
        let mut stored = Vec::new();
        let mut degree = vec![0usize; n_nodes];
        for (u, v) in edges {
            if u >= n_nodes || v >= n_nodes {
                return Err(GraphError::NodeOutOfRange { u, v, n: n_nodes });
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                return Err(GraphError::DuplicateEdge(u, v));
            }
            degree[u] += 1;
            degree[v] += 1;
            stored.push(key);
        }
        Ok(Self { n_nodes, edges: stored, degree })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degree(&self) -> &[usize] {
        &self.degree
    }

    /// Dense 0/1 adjacency matrix.
    pub fn adjacency_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.n_nodes, self.n_nodes));
        for &(u, v) in &self.edges {
            a[[u, v]] = 1.0;
            a[[v, u]] = 1.0;
        }
        a
    }
}

/// An `N x D` matrix of finite attribute values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix(Array2<f64>);

impl FeatureMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self, GraphError> {
        if let Some(((row, col), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(GraphError::NonFinite { row, col });
        }
        Ok(Self(values))
    }

    pub fn n_rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn d_features(&self) -> usize {
        self.0.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

impl std::ops::Deref for FeatureMatrix {
    type Target = Array2<f64>;

    fn deref(&self) -> &Array2<f64> {
        &self.0
    }
}
