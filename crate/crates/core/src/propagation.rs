//! Sparse propagation matrices over a chosen edge set.
//!
//! Every matrix carries one self-loop per node in addition to both directions
//! of each chosen edge, so an edgeless subgraph still propagates each node's
//! own features.

use alloc::{format, vec, vec::Vec};

use crate::{
    dense::Matrix,
    graph::{EdgeId, Graph, NodeId, SpanningSubgraph},
    Error, Result,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PropagationKind {
    /// `D̂^{-1/2} (A + I) D̂^{-1/2}` with `d̂ = degree + 1`.
    GcnSymmetric,
    /// `D̂^{-1} (A + I)`: each row averages the node and its neighbours.
    MeanRow,
}

#[derive(Debug, Clone)]
struct Csr {
    row_ptr: Vec<usize>,
    col_idx: Vec<NodeId>,
    values: Vec<f64>,
}

impl Csr {
    fn row(&self, i: usize) -> (&[NodeId], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    fn transpose(&self, n: usize) -> Csr {
        let mut counts = vec![0usize; n + 1];
        for &c in &self.col_idx {
            counts[c as usize + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut col_idx = vec![0; self.col_idx.len()];
        let mut values = vec![0.0; self.values.len()];
        for i in 0..n {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                let slot = &mut counts[c as usize];
                col_idx[*slot] = i as NodeId;
                values[*slot] = v;
                *slot += 1;
            }
        }
        Csr { row_ptr, col_idx, values }
    }

    fn spmm(&self, h: &Matrix) -> Matrix {
        let n = self.row_ptr.len() - 1;
        let d = h.cols();
        let mut out = Matrix::zeros(n, d);
        let row_kernel = |i: usize, dst: &mut [f64]| {
            let (cols, vals) = self.row(i);
            for (&c, &w) in cols.iter().zip(vals) {
                for (o, &x) in dst.iter_mut().zip(h.row(c as usize)) {
                    *o += w * x;
                }
            }
        };
        if d == 0 {
            return out;
        }
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            out.as_mut_slice().par_chunks_mut(d).enumerate().for_each(|(i, dst)| row_kernel(i, dst));
        }
        #[cfg(not(feature = "parallel"))]
        {
            out.as_mut_slice().chunks_mut(d).enumerate().for_each(|(i, dst)| row_kernel(i, dst));
        }
        out
    }
}

/// Sparse `n x n` propagation matrix in CSR form.
///
/// For the symmetric kind the transpose is the matrix itself, bit for bit;
/// the row-mean kind keeps an explicit transposed copy for backpropagation.
#[derive(Debug, Clone)]
pub struct PropagationMatrix {
    kind: PropagationKind,
    num_nodes: usize,
    num_edges: usize,
    csr: Csr,
    transposed: Option<Csr>,
}

/// Builds the propagation matrix of a spanning subgraph. Degrees are taken
/// over the active edges only.
pub fn build_propagation(sub: &SpanningSubgraph<'_>, kind: PropagationKind) -> PropagationMatrix {
    PropagationMatrix::build(sub.graph(), kind, |e| sub.contains(e))
}

/// L2 norm of every column of `p`.
pub fn column_norms(p: &PropagationMatrix) -> Vec<f64> {
    let mut sq = vec![0.0; p.num_nodes];
    for (&c, &v) in p.csr.col_idx.iter().zip(&p.csr.values) {
        sq[c as usize] += v * v;
    }
    sq.into_iter().map(libm::sqrt).collect()
}

impl PropagationMatrix {
    /// Matrix over the full edge set of `graph`.
    pub fn full(graph: &Graph, kind: PropagationKind) -> Self {
        Self::build(graph, kind, |_| true)
    }

    fn build(graph: &Graph, kind: PropagationKind, keep: impl Fn(EdgeId) -> bool) -> Self {
        let n = graph.num_nodes();
        let mut deg_hat = vec![1u64; n];
        let mut num_edges = 0;
        for (e, &(u, v)) in graph.edges().iter().enumerate() {
            if keep(e as EdgeId) {
                deg_hat[u as usize] += 1;
                deg_hat[v as usize] += 1;
                num_edges += 1;
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::with_capacity(2 * num_edges + n);
        let mut values = Vec::with_capacity(2 * num_edges + n);
        let weight = |v: usize, u: usize| match kind {
            PropagationKind::GcnSymmetric => 1.0 / libm::sqrt((deg_hat[v] * deg_hat[u]) as f64),
            PropagationKind::MeanRow => 1.0 / deg_hat[v] as f64,
        };
        for v in 0..n {
            let mut self_done = false;
            for (u, e) in graph.neighbors(v as NodeId) {
                if !keep(e) {
                    continue;
                }
                if !self_done && u as usize > v {
                    col_idx.push(v as NodeId);
                    values.push(weight(v, v));
                    self_done = true;
                }
                col_idx.push(u);
                values.push(weight(v, u as usize));
            }
            if !self_done {
                col_idx.push(v as NodeId);
                values.push(weight(v, v));
            }
            row_ptr.push(col_idx.len());
        }
        let csr = Csr { row_ptr, col_idx, values };
        let transposed = match kind {
            PropagationKind::GcnSymmetric => None,
            PropagationKind::MeanRow => Some(csr.transpose(n)),
        };
        Self { kind, num_nodes: n, num_edges, csr, transposed }
    }

    pub fn kind(&self) -> PropagationKind {
        self.kind
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of undirected edges the matrix was built over.
    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn nnz(&self) -> usize {
        self.csr.values.len()
    }

    /// Column indices and values of row `v`, sorted by column.
    pub fn row(&self, v: usize) -> (&[NodeId], &[f64]) {
        self.csr.row(v)
    }

    pub fn get(&self, v: usize, u: usize) -> f64 {
        let (cols, vals) = self.row(v);
        match cols.binary_search(&(u as NodeId)) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.num_nodes, self.num_nodes);
        for v in 0..self.num_nodes {
            let (cols, vals) = self.row(v);
            for (&u, &w) in cols.iter().zip(vals) {
                m[(v, u as usize)] = w;
            }
        }
        m
    }

    /// `P · h`
    pub fn spmm(&self, h: &Matrix) -> Result<Matrix> {
        self.check_rows(h)?;
        Ok(self.csr.spmm(h))
    }

    /// `Pᵀ · h`
    pub fn spmm_t(&self, h: &Matrix) -> Result<Matrix> {
        self.check_rows(h)?;
        Ok(self.transposed.as_ref().unwrap_or(&self.csr).spmm(h))
    }

    fn check_rows(&self, h: &Matrix) -> Result<()> {
        if h.rows() != self.num_nodes {
            return Err(Error::Shape(format!(
                "propagation over {} nodes applied to {} rows",
                self.num_nodes,
                h.rows()
            )));
        }
        Ok(())
    }

    /// Whether this matrix was built over exactly the full edge set of `graph`.
    pub fn covers(&self, graph: &Graph) -> bool {
        self.num_nodes == graph.num_nodes()
            && self.num_edges == graph.num_edges()
            && (0..self.num_nodes).all(|v| {
                self.csr.row_ptr[v + 1] - self.csr.row_ptr[v] == graph.degree(v as NodeId) as usize + 1
            })
    }
}
