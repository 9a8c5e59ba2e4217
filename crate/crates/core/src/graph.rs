//! Sparse graph storage, the symmetric-normalized propagation operator and
//! induced-subgraph views.

use std::cell::OnceCell;

use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::mask::NodeMask;

/// Train/validation/test node sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: NodeMask,
    pub val: NodeMask,
    pub test: NodeMask,
}

impl Splits {
    pub fn empty(n: usize) -> Self {
        Splits {
            train: NodeMask::empty(n),
            val: NodeMask::empty(n),
            test: NodeMask::empty(n),
        }
    }
}

/// Raw material for [`Graph::build`].
#[derive(Debug, Clone)]
pub struct GraphInput {
    pub num_nodes: usize,
    pub num_classes: usize,
    /// Node pairs in any orientation; duplicates and self-loops are tolerated.
    pub edges: Vec<(usize, usize)>,
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub splits: Splits,
}

/// What `Graph::build` had to clean up in the edge list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildReport {
    pub input_pairs: usize,
    pub self_loops_dropped: usize,
    pub duplicates_merged: usize,
}

/// Immutable undirected graph with node features, labels and split masks.
///
/// Adjacency is stored in compressed rows with both directions of every
/// edge present, columns sorted within each row, no self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_classes: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    // undirected edge id of every stored entry
    entry_edge: Vec<usize>,
    edges: Vec<(usize, usize)>,
    features: Matrix,
    labels: Vec<usize>,
    splits: Splits,
}

impl Graph {
    pub fn build(input: GraphInput) -> Result<(Graph, BuildReport)> {
        let GraphInput {
            num_nodes: n,
            num_classes,
            edges: raw_edges,
            features,
            labels,
            splits,
        } = input;

        if features.rows() != n {
            return Err(Error::DimensionMismatch {
                context: "feature rows vs node count",
                expected: n,
                actual: features.rows(),
            });
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                context: "label count vs node count",
                expected: n,
                actual: labels.len(),
            });
        }
        for (node, &label) in labels.iter().enumerate() {
            if label >= num_classes {
                return Err(Error::LabelOutOfRange {
                    node,
                    label,
                    num_classes,
                });
            }
        }
        splits.train.check_len(n, "train mask length")?;
        splits.val.check_len(n, "val mask length")?;
        splits.test.check_len(n, "test mask length")?;
        let named = [
            ("train", &splits.train),
            ("val", &splits.val),
            ("test", &splits.test),
        ];
        for v in 0..n {
            let mut owner: Option<&'static str> = None;
            for (name, mask) in named {
                if mask.get(v) {
                    if let Some(first) = owner {
                        return Err(Error::MaskOverlap {
                            node: v,
                            first,
                            second: name,
                        });
                    }
                    owner = Some(name);
                }
            }
        }

        let mut report = BuildReport {
            input_pairs: raw_edges.len(),
            ..BuildReport::default()
        };
        let mut edges = Vec::with_capacity(raw_edges.len());
        for &(u, v) in &raw_edges {
            for node in [u, v] {
                if node >= n {
                    return Err(Error::NodeOutOfRange { node, num_nodes: n });
                }
            }
            if u == v {
                report.self_loops_dropped += 1;
                continue;
            }
            edges.push((u.min(v), u.max(v)));
        }
        edges.sort_unstable();
        let before = edges.len();
        edges.dedup();
        report.duplicates_merged = before - edges.len();

        let mut degree = vec![0usize; n];
        for &(u, v) in &edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        for d in &degree {
            row_ptr.push(row_ptr.last().unwrap() + d);
        }
        let nnz = *row_ptr.last().unwrap();
        let mut col_idx = vec![0usize; nnz];
        let mut entry_edge = vec![0usize; nnz];
        let mut cursor = row_ptr[..n].to_vec();
        // Edges are sorted by (u, v) with u < v. Filling (v, u) first for
        // every edge in order keeps each row's columns ascending: a row w sees
        // its lower neighbours (as v) before its higher ones (as u).
        for pass in 0..2 {
            for (id, &(u, v)) in edges.iter().enumerate() {
                let (row, col) = if pass == 0 { (v, u) } else { (u, v) };
                col_idx[cursor[row]] = col;
                entry_edge[cursor[row]] = id;
                cursor[row] += 1;
            }
        }

        let graph = Graph {
            num_classes,
            row_ptr,
            col_idx,
            entry_edge,
            edges,
            features,
            labels,
            splits,
        };
        debug_assert!(graph.check_structure());
        Ok((graph, report))
    }

    /// Same graph with different split masks.
    pub fn with_splits(&self, splits: Splits) -> Result<Graph> {
        let (g, _) = Graph::build(GraphInput {
            splits,
            ..self.to_input()
        })?;
        Ok(g)
    }

    pub fn to_input(&self) -> GraphInput {
        GraphInput {
            num_nodes: self.num_nodes(),
            num_classes: self.num_classes,
            edges: self.edges.clone(),
            features: self.features.clone(),
            labels: self.labels.clone(),
            splits: self.splits.clone(),
        }
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    /// Undirected edge count.
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Undirected edges `(u, v)` with `u < v`, sorted. Position is the edge id.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[v]..self.row_ptr[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.row_ptr[v + 1] - self.row_ptr[v]
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn splits(&self) -> &Splits {
        &self.splits
    }

    pub fn train_mask(&self) -> &NodeMask {
        &self.splits.train
    }

    pub fn val_mask(&self) -> &NodeMask {
        &self.splits.val
    }

    pub fn test_mask(&self) -> &NodeMask {
        &self.splits.test
    }

    fn check_structure(&self) -> bool {
        let n = self.num_nodes();
        self.row_ptr.windows(2).all(|w| w[0] <= w[1])
            && (0..n).all(|u| {
                let row = self.neighbors(u);
                row.windows(2).all(|w| w[0] < w[1])
                    && row
                        .iter()
                        .all(|&v| v != u && self.neighbors(v).binary_search(&u).is_ok())
            })
    }
}

/// Square sparse matrix in compressed row form with sorted columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored `(row, col, value)` triplets in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1])
                .map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let cols = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
        match cols.binary_search(&c) {
            Ok(k) => self.values[self.row_ptr[r] + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for (r, c, v) in self.entries() {
            m[(r, c)] = v;
        }
        m
    }

    /// `self · x`. Each output row is accumulated in ascending column order.
    pub fn spmm(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows() != self.n {
            return Err(Error::DimensionMismatch {
                context: "sparse product rows",
                expected: self.n,
                actual: x.rows(),
            });
        }
        let mut out = Matrix::zeros(self.n, x.cols());
        for r in 0..self.n {
            let out_row = out.row_mut(r);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let a = self.values[k];
                for (o, &b) in out_row.iter_mut().zip(x.row(self.col_idx[k])) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · x`, scattering rows in storage order.
    pub fn spmm_transpose(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows() != self.n {
            return Err(Error::DimensionMismatch {
                context: "transposed sparse product rows",
                expected: self.n,
                actual: x.rows(),
            });
        }
        let mut out = Matrix::zeros(self.n, x.cols());
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let a = self.values[k];
                let dst = out.row_mut(self.col_idx[k]);
                for (o, &b) in dst.iter_mut().zip(x.row(r)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Keeps only the stored entries for which `keep(k, row, col)` holds.
    fn filter(&self, mut keep: impl FnMut(usize, usize, usize) -> bool) -> SparseMatrix {
        let mut row_ptr = Vec::with_capacity(self.n + 1);
        let mut col_idx = Vec::with_capacity(self.col_idx.len());
        let mut values = Vec::with_capacity(self.values.len());
        row_ptr.push(0);
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                if keep(k, r, c) {
                    col_idx.push(c);
                    values.push(self.values[k]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix {
            n: self.n,
            row_ptr,
            col_idx,
            values,
        }
    }
}

const DIAGONAL: usize = usize::MAX;

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` with `D̃` the degree matrix of `A + I`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    matrix: SparseMatrix,
    // undirected edge id per stored entry, DIAGONAL for self-loops
    entry_edge: Vec<usize>,
}

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn spmm(&self, x: &Matrix) -> Result<Matrix> {
        self.matrix.spmm(x)
    }

    /// Operator restricted to an active node set: every entry touching an
    /// inactive node is removed, self-loops included. Degrees are those of
    /// the full graph.
    pub fn masked(&self, mask: &NodeMask) -> Result<SparseMatrix> {
        mask.check_len(self.matrix.n, "node mask length")?;
        Ok(self.matrix.filter(|_, r, c| mask.get(r) && mask.get(c)))
    }

    /// Operator with the listed undirected edges removed in both directions.
    /// Self-loops are always kept.
    pub fn without_edges(&self, edge_keep: &[bool]) -> Result<SparseMatrix> {
        let num_edges = self.entry_edge.iter().filter(|&&e| e != DIAGONAL).count() / 2;
        if edge_keep.len() != num_edges {
            return Err(Error::DimensionMismatch {
                context: "edge keep mask length",
                expected: num_edges,
                actual: edge_keep.len(),
            });
        }
        Ok(self.matrix.filter(|k, _, _| {
            let e = self.entry_edge[k];
            e == DIAGONAL || edge_keep[e]
        }))
    }
}

/// Builds the normalized operator of `g`.
pub fn normalize(g: &Graph) -> NormalizedAdjacency {
    let (matrix, entry_edge) = normalize_filtered(g, None, None);
    NormalizedAdjacency { matrix, entry_edge }
}

/// Normalized operator of the subgraph that keeps only active nodes and kept
/// edges, with degrees recomputed on that subgraph. Inactive nodes get no
/// entries at all.
pub fn renormalized(
    g: &Graph,
    mask: Option<&NodeMask>,
    edge_keep: Option<&[bool]>,
) -> Result<SparseMatrix> {
    let n = g.num_nodes();
    if let Some(mask) = mask {
        mask.check_len(n, "node mask length")?;
    }
    if let Some(keep) = edge_keep {
        if keep.len() != g.num_edges() {
            return Err(Error::DimensionMismatch {
                context: "edge keep mask length",
                expected: g.num_edges(),
                actual: keep.len(),
            });
        }
    }
    Ok(normalize_filtered(g, mask, edge_keep).0)
}

fn normalize_filtered(
    g: &Graph,
    mask: Option<&NodeMask>,
    edge_keep: Option<&[bool]>,
) -> (SparseMatrix, Vec<usize>) {
    let n = g.num_nodes();
    let active = |v: usize| mask.is_none_or(|m| m.get(v));
    let kept = |k: usize| {
        let (u, v) = g.edges[g.entry_edge[k]];
        edge_keep.is_none_or(|keep| keep[g.entry_edge[k]]) && active(u) && active(v)
    };

    let mut deg = vec![0usize; n];
    for (u, d) in deg.iter_mut().enumerate() {
        *d = (g.row_ptr[u]..g.row_ptr[u + 1])
            .filter(|&k| kept(k))
            .count();
    }

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(g.col_idx.len() + n);
    let mut values = Vec::with_capacity(g.col_idx.len() + n);
    let mut entry_edge = Vec::with_capacity(g.col_idx.len() + n);
    row_ptr.push(0);
    for u in 0..n {
        if active(u) {
            let mut diag_done = false;
            for k in g.row_ptr[u]..g.row_ptr[u + 1] {
                let v = g.col_idx[k];
                if !diag_done && v > u {
                    col_idx.push(u);
                    values.push(1.0 / (deg[u] + 1) as f64);
                    entry_edge.push(DIAGONAL);
                    diag_done = true;
                }
                if kept(k) {
                    col_idx.push(v);
                    // one rounding from the exact integer product keeps the
                    // operator exactly symmetric and as accurate as possible
                    values.push(1.0 / (((deg[u] + 1) * (deg[v] + 1)) as f64).sqrt());
                    entry_edge.push(g.entry_edge[k]);
                }
            }
            if !diag_done {
                col_idx.push(u);
                values.push(1.0 / (deg[u] + 1) as f64);
                entry_edge.push(DIAGONAL);
            }
        }
        row_ptr.push(col_idx.len());
    }
    (
        SparseMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        },
        entry_edge,
    )
}

/// An active-node view of a graph. Node ids are those of the parent.
#[derive(Debug)]
pub struct SubgraphView<'g> {
    graph: &'g Graph,
    mask: NodeMask,
    induced: OnceCell<Vec<(usize, usize)>>,
}

/// View of `g` restricted to the nodes selected by `mask`.
pub fn induce(g: &Graph, mask: NodeMask) -> Result<SubgraphView<'_>> {
    mask.check_len(g.num_nodes(), "node mask length")?;
    Ok(SubgraphView {
        graph: g,
        mask,
        induced: OnceCell::new(),
    })
}

impl<'g> SubgraphView<'g> {
    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn mask(&self) -> &NodeMask {
        &self.mask
    }

    /// Undirected edges with both endpoints active, in parent edge order.
    pub fn edges(&self) -> &[(usize, usize)] {
        self.induced.get_or_init(|| {
            self.graph
                .edges()
                .iter()
                .copied()
                .filter(|&(u, v)| self.mask.get(u) && self.mask.get(v))
                .collect()
        })
    }

    /// The parent's normalized operator with inactive rows and columns removed.
    pub fn operator(&self, adj: &NormalizedAdjacency) -> Result<SparseMatrix> {
        adj.masked(&self.mask)
    }

    /// Normalized operator of the induced subgraph with its own degrees.
    pub fn renormalized_operator(&self) -> Result<SparseMatrix> {
        renormalized(self.graph, Some(&self.mask), None)
    }

    pub fn spmm(&self, adj: &NormalizedAdjacency, x: &Matrix) -> Result<Matrix> {
        self.operator(adj)?.spmm(x)
    }
}
