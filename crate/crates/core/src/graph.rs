//! Signed directed graphs: representation, edge-list ingestion, train/test
//! splits, random node features, and perturbation accounting.

use std::collections::HashMap;
use std::fmt::Write as _;

use ndarray::Array2;
use rand::distr::{Distribution, Uniform};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// A directed edge carrying a sign in {+1, -1}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub src: u32,
    pub dst: u32,
    pub sign: i8,
}

impl Edge {
    pub fn new(src: u32, dst: u32, sign: i8) -> Self {
        Edge { src, dst, sign }
    }
}

/// A signed directed graph over dense 0-based node indices.
///
/// Invariants enforced at construction: no self-loops, no duplicate
/// `(src, dst)` pairs, signs exactly +1 or -1, endpoints below `node_count`.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedDiGraph {
    node_count: usize,
    edges: Vec<Edge>,
    node_labels: Option<Vec<String>>,
}

/// Input edge-list flavor: `signed` files carry +1/-1 in the third column,
/// `rated` files carry arbitrary nonzero ratings whose sign is taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeListFormat {
    Signed,
    Rated,
}

impl SignedDiGraph {
    /// Build a graph from pre-indexed edges, validating all invariants.
    pub fn new(node_count: usize, edges: Vec<Edge>) -> Result<Self> {
        let mut seen = HashMap::with_capacity(edges.len());
        for (k, e) in edges.iter().enumerate() {
            if e.sign != 1 && e.sign != -1 {
                return Err(Error::MalformedLine {
                    line: k + 1,
                    reason: format!("sign {} is not +1/-1", e.sign),
                });
            }
            if e.src == e.dst {
                return Err(Error::SelfLoop {
                    line: k + 1,
                    node: e.src.to_string(),
                });
            }
            if e.src as usize >= node_count || e.dst as usize >= node_count {
                return Err(Error::MalformedLine {
                    line: k + 1,
                    reason: format!("edge ({}, {}) outside node range", e.src, e.dst),
                });
            }
            if seen.insert((e.src, e.dst), k).is_some() {
                return Err(Error::DuplicateEdge {
                    line: k + 1,
                    src: e.src.to_string(),
                    dst: e.dst.to_string(),
                });
            }
        }
        Ok(SignedDiGraph {
            node_count,
            edges,
            node_labels: None,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn positive_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| e.sign > 0).count()
    }

    pub fn negative_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| e.sign < 0).count()
    }

    /// External id of a node, when the graph was ingested from a file.
    pub fn node_label(&self, idx: u32) -> Option<&str> {
        self.node_labels
            .as_ref()
            .and_then(|v| v.get(idx as usize))
            .map(String::as_str)
    }

    /// Parse an edge list: one edge per line, fields separated by whitespace
    /// or commas, `#` comments skipped, at least `src dst value` per line.
    /// Node ids are remapped to dense 0-based indices in first-seen order.
    pub fn parse_edge_list(text: &str, format: EdgeListFormat) -> Result<Self> {
        let mut ids: HashMap<String, u32> = HashMap::new();
        let mut labels: Vec<String> = Vec::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut seen: HashMap<(u32, u32), usize> = HashMap::new();

        let intern = |tok: &str, labels: &mut Vec<String>, ids: &mut HashMap<String, u32>| {
            *ids.entry(tok.to_string()).or_insert_with(|| {
                labels.push(tok.to_string());
                (labels.len() - 1) as u32
            })
        };

        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|f| !f.is_empty())
                .collect();
            if fields.len() < 3 {
                return Err(Error::MalformedLine {
                    line,
                    reason: format!("expected at least 3 fields, got {}", fields.len()),
                });
            }
            let (src_tok, dst_tok, val_tok) = (fields[0], fields[1], fields[2]);
            if src_tok == dst_tok {
                return Err(Error::SelfLoop {
                    line,
                    node: src_tok.to_string(),
                });
            }
            let value: f64 = val_tok.parse().map_err(|_| Error::MalformedLine {
                line,
                reason: format!("unparsable value {val_tok:?}"),
            })?;
            if !value.is_finite() {
                return Err(Error::MalformedLine {
                    line,
                    reason: format!("non-finite value {val_tok:?}"),
                });
            }
            let sign = match format {
                EdgeListFormat::Signed => {
                    if value == 1.0 {
                        1
                    } else if value == -1.0 {
                        -1
                    } else {
                        return Err(Error::MalformedLine {
                            line,
                            reason: format!("sign column must be +1/-1, got {val_tok:?}"),
                        });
                    }
                }
                EdgeListFormat::Rated => {
                    if value == 0.0 {
                        return Err(Error::ZeroRating {
                            line,
                            src: src_tok.to_string(),
                            dst: dst_tok.to_string(),
                        });
                    }
                    if value > 0.0 {
                        1
                    } else {
                        -1
                    }
                }
            };
            let s = intern(src_tok, &mut labels, &mut ids);
            let d = intern(dst_tok, &mut labels, &mut ids);
            if seen.insert((s, d), line).is_some() {
                return Err(Error::DuplicateEdge {
                    line,
                    src: src_tok.to_string(),
                    dst: dst_tok.to_string(),
                });
            }
            edges.push(Edge::new(s, d, sign));
        }
        Ok(SignedDiGraph {
            node_count: labels.len(),
            edges,
            node_labels: Some(labels),
        })
    }

    /// Canonical serialization: `src<TAB>dst<TAB>sign` per edge, sign written
    /// as `+1` or `-1`, edges in stored order. Graphs ingested from a file
    /// keep their external ids; otherwise the dense indices are written.
    pub fn to_canonical(&self) -> String {
        let mut out = String::with_capacity(self.edges.len() * 12);
        for e in &self.edges {
            let s = if e.sign > 0 { "+1" } else { "-1" };
            match (self.node_label(e.src), self.node_label(e.dst)) {
                (Some(a), Some(b)) => {
                    let _ = writeln!(out, "{a}\t{b}\t{s}");
                }
                _ => {
                    let _ = writeln!(out, "{}\t{}\t{}", e.src, e.dst, s);
                }
            }
        }
        out
    }

    /// Adjacency matrix with `a_ij = sign(i -> j)`.
    pub fn to_adjacency(&self) -> SignedMatrix {
        let triplets: Vec<(u32, u32, f64)> = self
            .edges
            .iter()
            .map(|e| (e.src, e.dst, f64::from(e.sign)))
            .collect();
        SignedMatrix::from_triplets(self.node_count, &triplets)
    }

    /// Reconstruct a graph from a sign matrix; edges come out in row-major
    /// order and external labels are dropped.
    pub fn from_adjacency(m: &SignedMatrix) -> Result<Self> {
        let edges = m
            .entries()
            .map(|(i, j, v)| Edge::new(i, j, if v > 0.0 { 1 } else { -1 }))
            .collect();
        SignedDiGraph::new(m.dim(), edges)
    }

    /// Copy of this graph with signs taken from `m`, which must share the
    /// graph's support. Node numbering, labels, and edge order are kept, so
    /// serializations stay line-aligned with the original.
    pub fn with_signs_from(&self, m: &SignedMatrix) -> Result<Self> {
        if m.dim() != self.node_count {
            return Err(Error::DimensionMismatch(self.node_count, m.dim()));
        }
        let mut out = self.clone();
        for e in &mut out.edges {
            let v = m.get(e.src, e.dst);
            if v == 0.0 {
                return Err(Error::TopologyMismatch);
            }
            e.sign = if v > 0.0 { 1 } else { -1 };
        }
        if m.nnz() != out.edges.len() {
            return Err(Error::TopologyMismatch);
        }
        Ok(out)
    }
}

/// Square matrix with an explicit sparsity support.
///
/// Graph-derived matrices hold exactly +1/-1 on the support; the augmenter
/// reuses the same container for real-valued matrices on the same support.
/// Values of zero on the diagonal and off support are implicit.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedMatrix {
    n: usize,
    /// Out-edges per row, sorted by column.
    rows: Vec<Vec<(u32, f64)>>,
    /// In-edges per column, sorted by row.
    cols: Vec<Vec<(u32, f64)>>,
    nnz: usize,
}

impl SignedMatrix {
    /// Build from `(row, col, value)` triplets. Duplicates and diagonal
    /// entries must have been rejected upstream; they are debug-asserted.
    pub fn from_triplets(n: usize, triplets: &[(u32, u32, f64)]) -> Self {
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        let mut cols: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            debug_assert!(i != j, "diagonal entry ({i},{j})");
            debug_assert!((i as usize) < n && (j as usize) < n);
            rows[i as usize].push((j, v));
            cols[j as usize].push((i, v));
        }
        for r in &mut rows {
            r.sort_unstable_by_key(|&(j, _)| j);
            debug_assert!(r.windows(2).all(|w| w[0].0 < w[1].0), "duplicate entry");
        }
        for c in &mut cols {
            c.sort_unstable_by_key(|&(i, _)| i);
        }
        SignedMatrix {
            n,
            rows,
            cols,
            nnz: triplets.len(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.nnz
    }

    pub fn get(&self, i: u32, j: u32) -> f64 {
        let row = &self.rows[i as usize];
        match row.binary_search_by_key(&j, |&(c, _)| c) {
            Ok(k) => row[k].1,
            Err(_) => 0.0,
        }
    }

    /// Out-edges of row `i`: `(col, value)` sorted by column.
    pub fn out_row(&self, i: u32) -> &[(u32, f64)] {
        &self.rows[i as usize]
    }

    /// In-edges of column `j`: `(row, value)` sorted by row.
    pub fn in_col(&self, j: u32) -> &[(u32, f64)] {
        &self.cols[j as usize]
    }

    /// All entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().map(move |&(j, v)| (i as u32, j, v)))
    }

    /// True when both matrices have the same dimension and nonzero pattern.
    pub fn same_support(&self, other: &SignedMatrix) -> bool {
        self.n == other.n
            && self.nnz == other.nnz
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.0 == y.0))
    }

    /// New matrix on the same support with values transformed entry-wise.
    pub fn map_values(&self, mut f: impl FnMut(u32, u32, f64) -> f64) -> SignedMatrix {
        let mut out = self.clone();
        for (i, r) in out.rows.iter_mut().enumerate() {
            for (j, v) in r.iter_mut() {
                *v = f(i as u32, *j, *v);
            }
        }
        out.sync_cols();
        out
    }

    fn sync_cols(&mut self) {
        for c in &mut self.cols {
            c.clear();
        }
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, v) in r {
                self.cols[j as usize].push((i as u32, v));
            }
        }
        for c in &mut self.cols {
            c.sort_unstable_by_key(|&(i, _)| i);
        }
    }

    /// Negate a single entry in place. Internal: callers own the matrix.
    pub(crate) fn flip(&mut self, i: u32, j: u32) {
        let row = &mut self.rows[i as usize];
        if let Ok(k) = row.binary_search_by_key(&j, |&(c, _)| c) {
            row[k].1 = -row[k].1;
        }
        let col = &mut self.cols[j as usize];
        if let Ok(k) = col.binary_search_by_key(&i, |&(r, _)| r) {
            col[k].1 = -col[k].1;
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.n, self.n));
        for (i, j, v) in self.entries() {
            m[(i as usize, j as usize)] = v;
        }
        m
    }

    /// Sparse matrix from the nonzeros of a dense one (diagonal ignored).
    pub fn from_dense(m: &Array2<f64>) -> SignedMatrix {
        let n = m.nrows();
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && m[(i, j)] != 0.0 {
                    triplets.push((i as u32, j as u32, m[(i, j)]));
                }
            }
        }
        SignedMatrix::from_triplets(n, &triplets)
    }
}

/// Entry-wise L0 distance between the signs of two same-support matrices.
pub fn perturbation_distance(a: &SignedMatrix, b: &SignedMatrix) -> Result<usize> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    if !a.same_support(b) {
        return Err(Error::TopologyMismatch);
    }
    let mut count = 0;
    for (x, y) in a.entries().zip(b.entries()) {
        if x.2.signum() != y.2.signum() {
            count += 1;
        }
    }
    Ok(count)
}

/// Fraction of edges whose signs agree: `1 - perturbation_distance / |E|`.
pub fn overlap_ratio(a: &SignedMatrix, b: &SignedMatrix) -> Result<f64> {
    if a.nnz() == 0 {
        return Err(Error::EmptyGraph);
    }
    let dist = perturbation_distance(a, b)?;
    Ok(1.0 - dist as f64 / a.nnz() as f64)
}

/// A train/test partition of a graph's edges.
#[derive(Clone, Debug)]
pub struct EdgeSplit {
    pub train_graph: SignedDiGraph,
    pub test_edges: Vec<Edge>,
}

/// Uniform train/test split without replacement; `|train| = round(ratio·|E|)`.
pub fn split_edges(g: &SignedDiGraph, ratio: f64, seed: u64) -> Result<EdgeSplit> {
    if g.edge_count() < 2 {
        return Err(Error::EmptyGraph);
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "split ratio {ratio} outside (0,1)"
        )));
    }
    let m = g.edge_count();
    let n_train = (ratio * m as f64).round() as usize;
    let mut rng = rng::stream(seed);
    let mut chosen = sample(&mut rng, m, n_train).into_vec();
    chosen.sort_unstable();
    let mut in_train = vec![false; m];
    for &k in &chosen {
        in_train[k] = true;
    }
    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(m - n_train);
    for (k, e) in g.edges().iter().enumerate() {
        if in_train[k] {
            train.push(*e);
        } else {
            test.push(*e);
        }
    }
    let train_graph = SignedDiGraph::new(g.node_count(), train)?;
    Ok(EdgeSplit {
        train_graph,
        test_edges: test,
    })
}

/// Node feature matrix: `n x d`, entries i.i.d. uniform in [-1, 1].
pub type FeatureMatrix = Array2<f64>;

pub fn random_features(n: usize, d: usize, seed: u64) -> FeatureMatrix {
    assert!(n >= 1 && d >= 1, "feature matrix must be at least 1x1");
    let mut rng = rng::stream(seed);
    let dist = Uniform::new_inclusive(-1.0f64, 1.0).expect("valid range");
    Array2::from_shape_fn((n, d), |_| dist.sample(&mut rng))
}
