use super::{Graph, GraphError};
use ndarray::{Array2, ArrayView2, ArrayViewMut2};
use serde::{Deserialize, Serialize};
use std::cell::Cell;

/// A square linear operator that can be applied to a block of column vectors.
///
/// Filtering code is written against this trait so the sparse Laplacian, a
/// dense reference, or an instrumented wrapper can be swapped in.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    /// Writes `A z` into `out`. Both blocks are `dim x H`; this counts as one
    /// matrix-vector product per column.
    fn apply_block(&self, z: ArrayView2<'_, f64>, out: ArrayViewMut2<'_, f64>);
}

/// Symmetric normalized Laplacian `I - D^{-1/2} A D^{-1/2}` in CSR form.
///
/// Isolated nodes get `D^{-1/2} = 0`, so their row is an identity row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Laplacian {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

pub fn normalized_laplacian(g: &Graph) -> Laplacian {
    let n = g.n_nodes();
    let inv_sqrt: Vec<f64> = g.degree().iter().map(|&d| if d == 0 { 0.0 } else { 1.0 / (d as f64).sqrt() }).collect();
    let mut neighbours: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(u, v) in g.edges() {
        neighbours[u].push(v);
        neighbours[v].push(u);
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(n + 2 * g.n_edges());
    let mut values = Vec::with_capacity(n + 2 * g.n_edges());
    row_ptr.push(0);
    for (i, nb) in neighbours.iter_mut().enumerate() {
        nb.push(i);
        nb.sort_unstable();
        for &j in nb.iter() {
            col_idx.push(j);
            values.push(if i == j { 1.0 } else { -inv_sqrt[i] * inv_sqrt[j] });
        }
        row_ptr.push(col_idx.len());
    }
    Laplacian { dim: n, row_ptr, col_idx, values }
}

impl Laplacian {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored entries (diagonal plus two per edge).
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates the stored entries of row `i` as `(column, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    /// Sparse product `L v`.
    pub fn spmv(&self, v: &[f64]) -> Result<Vec<f64>, GraphError> {
        if v.len() != self.dim {
            return Err(GraphError::DimensionMismatch { expected: self.dim, got: v.len() });
        }
        Ok((0..self.dim).map(|i| self.row(i).map(|(j, w)| w * v[j]).sum()).collect())
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.dim, self.dim));
        for i in 0..self.dim {
            for (j, w) in self.row(i) {
                m[[i, j]] = w;
            }
        }
        m
    }
}

impl LinearOperator for Laplacian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_block(&self, z: ArrayView2<'_, f64>, mut out: ArrayViewMut2<'_, f64>) {
        assert_eq!(z.nrows(), self.dim, "operand rows");
        assert_eq!(out.dim(), z.dim(), "output shape");
        let h = z.ncols();
        match (z.as_slice(), out.as_slice_mut()) {
            (Some(zs), Some(os)) => {
                for i in 0..self.dim {
                    let dst = &mut os[i * h..(i + 1) * h];
                    dst.fill(0.0);
                    for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                        let w = self.values[p];
                        let src = &zs[self.col_idx[p] * h..(self.col_idx[p] + 1) * h];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += w * s;
                        }
                    }
                }
            }
            _ => {
                out.fill(0.0);
                for i in 0..self.dim {
                    for (j, w) in self.row(i) {
                        for c in 0..h {
                            out[[i, c]] += w * z[[j, c]];
                        }
                    }
                }
            }
        }
    }
}

/// Dense matrices act as operators too; used as references in tests.
impl LinearOperator for Array2<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply_block(&self, z: ArrayView2<'_, f64>, mut out: ArrayViewMut2<'_, f64>) {
        out.assign(&self.dot(&z));
    }
}

/// Wraps an operator and counts single-column products.
pub struct CountingOperator<'a, A: LinearOperator> {
    inner: &'a A,
    column_products: Cell<usize>,
}

impl<'a, A: LinearOperator> CountingOperator<'a, A> {
    pub fn new(inner: &'a A) -> Self {
        Self { inner, column_products: Cell::new(0) }
    }

    pub fn column_products(&self) -> usize {
        self.column_products.get()
    }
}

impl<A: LinearOperator> LinearOperator for CountingOperator<'_, A> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply_block(&self, z: ArrayView2<'_, f64>, out: ArrayViewMut2<'_, f64>) {
        self.column_products.set(self.column_products.get() + z.ncols());
        self.inner.apply_block(z, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array1;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }
        Graph::new(n, edges).unwrap()
    }

    fn dense_reference(g: &Graph) -> Array2<f64> {
        let a = g.adjacency_dense();
        let n = g.n_nodes();
        let d: Array1<f64> = a.sum_axis(ndarray::Axis(1));
        let mut l = Array2::eye(n);
        for i in 0..n {
            for j in 0..n {
                if d[i] > 0.0 && d[j] > 0.0 {
                    l[[i, j]] -= a[[i, j]] / (d[i] * d[j]).sqrt();
                }
            }
        }
        l
    }

    #[test]
    fn single_edge() {
        let g = Graph::new(2, [(0, 1)]).unwrap();
        let l = normalized_laplacian(&g).to_dense();
        assert_eq!(l, ndarray::arr2(&[[1.0, -1.0], [-1.0, 1.0]]));
    }

    #[test]
    fn isolated_node_row_is_identity() {
        let g = Graph::new(3, [(0, 1)]).unwrap();
        let l = normalized_laplacian(&g).to_dense();
        assert_eq!(l.row(2).to_vec(), vec![0.0, 0.0, 1.0]);
        assert_eq!(l.column(2).to_vec(), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn matches_dense_construction() {
        let g = random_graph(20, 0.2, 7);
        let l = normalized_laplacian(&g).to_dense();
        let r = dense_reference(&g);
        for (a, b) in l.iter().zip(r.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        for i in 0..20 {
            for j in 0..20 {
                assert_abs_diff_eq!(l[[i, j]], l[[j, i]], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn spmv_basics() {
        let k3 = Graph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let l = normalized_laplacian(&k3);
        assert_eq!(l.spmv(&[0.0; 3]).unwrap(), vec![0.0; 3]);
        for y in l.spmv(&[2.5; 3]).unwrap() {
            assert_abs_diff_eq!(y, 0.0, epsilon = 1e-15);
        }
        assert_eq!(l.spmv(&[1.0; 4]), Err(GraphError::DimensionMismatch { expected: 3, got: 4 }));
    }

    #[test]
    fn spmv_matches_dense_product() {
        let g = random_graph(30, 0.15, 11);
        let l = normalized_laplacian(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dense = l.to_dense().dot(&Array1::from(v.clone()));
        for (a, b) in l.spmv(&v).unwrap().iter().zip(dense.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn block_apply_handles_non_contiguous_views() {
        let g = random_graph(12, 0.3, 5);
        let l = normalized_laplacian(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let z = Array2::from_shape_fn((12, 3), |_| rng.random_range(-1.0..1.0));
        let zt = z.t().to_owned();
        let mut out = Array2::zeros((3, 12));
        l.apply_block(zt.t(), out.view_mut().reversed_axes());
        let expect = l.to_dense().dot(&z);
        for (a, b) in out.t().iter().zip(expect.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn counting_operator_counts_columns() {
        let g = random_graph(8, 0.4, 1);
        let l = normalized_laplacian(&g);
        let counter = CountingOperator::new(&l);
        let z = Array2::<f64>::ones((8, 5));
        let mut out = Array2::zeros((8, 5));
        counter.apply_block(z.view(), out.view_mut());
        counter.apply_block(z.view(), out.view_mut());
        assert_eq!(counter.column_products(), 10);
    }
}
