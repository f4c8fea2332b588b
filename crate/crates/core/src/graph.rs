//! Immutable original graph, node data, and mutable spanning subgraphs.

use alloc::{format, vec, vec::Vec};

use crate::{dense::Matrix, Error, Result};

pub type NodeId = u32;
/// Index into [`Graph::edges`].
pub type EdgeId = u32;

const ABSENT: u32 = u32::MAX;

/// Undirected graph stored as a canonical edge list (`u < v`, sorted, no
/// duplicates, no self-loops) plus its symmetrized CSR.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<(NodeId, NodeId)>,
    row_ptr: Vec<usize>,
    col_idx: Vec<NodeId>,
    /// Canonical edge behind each CSR entry.
    entry_edge: Vec<EdgeId>,
    degree: Vec<u32>,
}

impl Graph {
    /// Builds a graph from arbitrary `(u, v)` pairs. Reversed duplicates
    /// collapse into one canonical edge and self-loops are dropped, since
    /// self-loops are injected at propagation time.
    pub fn from_edges<I>(num_nodes: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, u64)>,
    {
        if num_nodes > ABSENT as usize {
            return Err(Error::Graph(format!("{num_nodes} nodes exceeds the u32 id space")));
        }
        let mut edges = Vec::new();
        for (u, v) in pairs {
            for id in [u, v] {
                if id >= num_nodes as u64 {
                    return Err(Error::NodeRange { id, num_nodes });
                }
            }
            if u == v {
                continue;
            }
            let (a, b) = if u < v { (u, v) } else { (v, u) };
            edges.push((a as NodeId, b as NodeId));
        }
        edges.sort_unstable();
        edges.dedup();
        if edges.len() >= ABSENT as usize {
            return Err(Error::Graph(format!("{} edges exceeds the u32 id space", edges.len())));
        }
        Ok(Self::from_canonical(num_nodes, edges))
    }

    fn from_canonical(num_nodes: usize, edges: Vec<(NodeId, NodeId)>) -> Self {
        let mut degree = vec![0u32; num_nodes];
        for &(u, v) in &edges {
            degree[u as usize] += 1;
            degree[v as usize] += 1;
        }
        let mut row_ptr = Vec::with_capacity(num_nodes + 1);
        row_ptr.push(0usize);
        for &d in &degree {
            row_ptr.push(row_ptr.last().unwrap() + d as usize);
        }
        let nnz = 2 * edges.len();
        let mut col_idx = vec![0 as NodeId; nnz];
        let mut entry_edge = vec![0 as EdgeId; nnz];
        let mut fill = row_ptr[..num_nodes].to_vec();
        // Edges are sorted by (u, v), so pushing in this order leaves every
        // row sorted by column: row w first receives its smaller neighbours
        // (as the `v` side), then its larger ones (as the `u` side).
        for pass in 0..2 {
            for (e, &(u, v)) in edges.iter().enumerate() {
                let (row, col) = if pass == 0 { (v, u) } else { (u, v) };
                let slot = &mut fill[row as usize];
                col_idx[*slot] = col;
                entry_edge[*slot] = e as EdgeId;
                *slot += 1;
            }
        }
        Self { num_nodes, edges, row_ptr, col_idx, entry_edge, degree }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> (NodeId, NodeId) {
        self.edges[e as usize]
    }

    /// Degree over the symmetrized edge set, self-loops excluded.
    pub fn degree(&self, v: NodeId) -> u32 {
        self.degree[v as usize]
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degree
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[NodeId] {
        &self.col_idx
    }

    /// Sorted neighbours of `v` with the canonical edge id of each link.
    pub fn neighbors(&self, v: NodeId) -> impl Iterator<Item = (NodeId, EdgeId)> + '_ {
        let range = self.row_ptr[v as usize]..self.row_ptr[v as usize + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.entry_edge[range].iter().copied())
    }
}

/// Which evaluation split a node belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
    None,
}

/// A graph together with node features, labels and splits.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: Graph,
    pub features: Matrix,
    /// `None` marks an unlabeled node.
    pub labels: Vec<Option<u32>>,
    pub splits: Vec<Split>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(graph: Graph, features: Matrix, labels: Vec<Option<u32>>, splits: Vec<Split>) -> Result<Self> {
        let n = graph.num_nodes();
        if features.rows() != n {
            return Err(Error::Shape(format!("feature matrix has {} rows, graph has {n} nodes", features.rows())));
        }
        if labels.len() != n {
            return Err(Error::Shape(format!("{} labels for {n} nodes", labels.len())));
        }
        if splits.len() != n {
            return Err(Error::Shape(format!("{} split entries for {n} nodes", splits.len())));
        }
        for (v, (split, label)) in splits.iter().zip(&labels).enumerate() {
            if *split != Split::None && label.is_none() {
                return Err(Error::Graph(format!("node {v} is in a split but unlabeled")));
            }
        }
        let num_classes = labels.iter().flatten().map(|&c| c as usize + 1).max().unwrap_or(0);
        Ok(Self { graph, features, labels, splits, num_classes })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn mask(&self, split: Split) -> Vec<bool> {
        self.splits.iter().map(|&s| s == split).collect()
    }
}

/// A spanning subgraph: every node of the parent, a subset of its edges.
///
/// Membership is kept in a dense slot table so inserts, removals and uniform
/// picks over the active set are all O(1).
#[derive(Debug, Clone)]
pub struct SpanningSubgraph<'g> {
    graph: &'g Graph,
    slot: Vec<u32>,
    active: Vec<EdgeId>,
}

impl<'g> SpanningSubgraph<'g> {
    pub fn empty(graph: &'g Graph) -> Self {
        Self { graph, slot: vec![ABSENT; graph.num_edges()], active: Vec::new() }
    }

    pub fn full(graph: &'g Graph) -> Self {
        let mut sub = Self::empty(graph);
        for e in 0..graph.num_edges() as EdgeId {
            sub.insert(e);
        }
        sub
    }

    pub fn with_edges<I: IntoIterator<Item = EdgeId>>(graph: &'g Graph, edges: I) -> Result<Self> {
        let mut sub = Self::empty(graph);
        for e in edges {
            if e as usize >= graph.num_edges() {
                return Err(Error::Graph(format!("edge index {e} out of range for {} edges", graph.num_edges())));
            }
            sub.insert(e);
        }
        Ok(sub)
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    /// Active edges in insertion order (perturbed by removals).
    pub fn active(&self) -> &[EdgeId] {
        &self.active
    }

    /// Active edges in ascending order.
    pub fn sorted_active(&self) -> Vec<EdgeId> {
        let mut edges = self.active.clone();
        edges.sort_unstable();
        edges
    }

    pub fn contains(&self, e: EdgeId) -> bool {
        self.slot[e as usize] != ABSENT
    }

    /// Returns `true` if the edge was newly added.
    pub fn insert(&mut self, e: EdgeId) -> bool {
        if self.contains(e) {
            return false;
        }
        self.slot[e as usize] = self.active.len() as u32;
        self.active.push(e);
        true
    }

    /// Returns `true` if the edge was present.
    pub fn remove(&mut self, e: EdgeId) -> bool {
        let pos = self.slot[e as usize];
        if pos == ABSENT {
            return false;
        }
        self.slot[e as usize] = ABSENT;
        let last = self.active.pop().unwrap();
        if last != e {
            self.active[pos as usize] = last;
            self.slot[last as usize] = pos;
        }
        true
    }

    /// `|active| / |E|`, or 0 for an edgeless parent.
    pub fn edge_ratio(&self) -> f64 {
        if self.graph.num_edges() == 0 {
            0.0
        } else {
            self.active.len() as f64 / self.graph.num_edges() as f64
        }
    }
}
