//! Undirected graphs in compressed sparse row form, plus degree-normalized
//! adjacency operators.
//!
//! Invariants maintained by every constructor:
//! - `row_offsets.len() == num_nodes + 1`, rows strictly sorted, no duplicates;
//! - storage is symmetric: `v ∈ neighbors(u)` iff `u ∈ neighbors(v)`;
//! - self-loops only exist after an explicit [`Graph::add_self_loops`] call.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type NodeId = usize;

/// Symmetric CSR graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    num_nodes: usize,
    /// Undirected edge count; a self-loop counts once.
    num_edges: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<NodeId>,
    has_self_loops: bool,
}

impl Graph {
    /// Builds a symmetric graph from (possibly one-directional) edge pairs.
    ///
    /// Self-loop pairs `(u, u)` are dropped. With `dedupe` set, repeated
    /// edges collapse to one; otherwise any repetition is a data error.
    pub fn from_edges(num_nodes: usize, edges: &[(NodeId, NodeId)], dedupe: bool) -> Result<Self> {
        if num_nodes == 0 {
            return Err(Error::Data("graph must have at least one node".into()));
        }
        for &(u, v) in edges {
            for ix in [u, v] {
                if ix >= num_nodes {
                    return Err(Error::IndexRange {
                        index: ix,
                        num_nodes,
                    });
                }
            }
        }

        let mut degree = vec![0usize; num_nodes];
        for &(u, v) in edges {
            if u == v {
                continue;
            }
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut row_offsets = Vec::with_capacity(num_nodes + 1);
        row_offsets.push(0usize);
        for d in &degree {
            row_offsets.push(row_offsets.last().unwrap() + d);
        }
        let mut col_indices = vec![0usize; *row_offsets.last().unwrap()];
        let mut cursor = row_offsets[..num_nodes].to_vec();
        for &(u, v) in edges {
            if u == v {
                continue;
            }
            col_indices[cursor[u]] = v;
            cursor[u] += 1;
            col_indices[cursor[v]] = u;
            cursor[v] += 1;
        }

        // Sort each row, then collapse or reject duplicates.
        let mut dedup_cols = Vec::with_capacity(col_indices.len());
        let mut dedup_offsets = Vec::with_capacity(num_nodes + 1);
        dedup_offsets.push(0usize);
        for u in 0..num_nodes {
            let row = &mut col_indices[row_offsets[u]..row_offsets[u + 1]];
            row.sort_unstable();
            let mut prev: Option<NodeId> = None;
            for &v in row.iter() {
                if prev == Some(v) {
                    if dedupe {
                        continue;
                    }
                    return Err(Error::Data(format!(
                        "duplicate edge between {u} and {v} (pass dedupe to collapse)"
                    )));
                }
                dedup_cols.push(v);
                prev = Some(v);
            }
            dedup_offsets.push(dedup_cols.len());
        }

        debug_assert_eq!(dedup_cols.len() % 2, 0);
        Ok(Graph {
            num_nodes,
            num_edges: dedup_cols.len() / 2,
            row_offsets: dedup_offsets,
            col_indices: dedup_cols,
            has_self_loops: false,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Undirected edge count (self-loops count once).
    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn has_self_loops(&self) -> bool {
        self.has_self_loops
    }

    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.col_indices[self.row_offsets[v]..self.row_offsets[v + 1]]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.row_offsets[v + 1] - self.row_offsets[v]
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[NodeId] {
        &self.col_indices
    }

    /// Returns a copy with one self-loop added per node.
    ///
    /// Fails if loops are already present: applying this twice would silently
    /// change degree-based normalization.
    pub fn add_self_loops(&self) -> Result<Graph> {
        if self.has_self_loops {
            return Err(Error::Contract(
                "graph already has self-loops; refusing to add a second set".into(),
            ));
        }
        let n = self.num_nodes;
        let mut col_indices = Vec::with_capacity(self.col_indices.len() + n);
        let mut row_offsets = Vec::with_capacity(n + 1);
        row_offsets.push(0usize);
        for u in 0..n {
            let row = self.neighbors(u);
            let split = row.partition_point(|&v| v < u);
            col_indices.extend_from_slice(&row[..split]);
            col_indices.push(u);
            col_indices.extend_from_slice(&row[split..]);
            row_offsets.push(col_indices.len());
        }
        Ok(Graph {
            num_nodes: n,
            num_edges: self.num_edges + n,
            row_offsets,
            col_indices,
            has_self_loops: true,
        })
    }

    /// True when every node is reachable from node 0.
    pub fn is_connected(&self) -> bool {
        let n = self.num_nodes;
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1usize;
        while let Some(u) = stack.pop() {
            for &v in self.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == n
    }

    /// Iterates each undirected edge once as `(u, v)` with `u <= v`.
    pub fn edge_iter(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (0..self.num_nodes).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| v >= u)
                .map(move |v| (u, v))
        })
    }
}

/// Parses a whitespace-separated edge list.
///
/// Lines starting with `#` and blank lines are ignored. The first data line
/// is read as an `N M` header when `N >= 1` and exactly `M` data lines
/// follow; otherwise every line is an edge and `N` is the largest index + 1.
/// Under an accepted header, any index `>= N` is a range error. Headerless
/// files whose first edge could pass as a consistent header (first value
/// positive and second value equal to the remaining line count) are
/// misread as declaring one; writing a header, as [`write_edge_list`] always
/// does, avoids the ambiguity.
///
/// Self-loop lines are dropped; the result never has self-loops.
pub fn load_edge_list(path: impl AsRef<Path>, dedupe: bool) -> Result<Graph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new(); // (line_no, u, v)
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let (a, b) = match (it.next(), it.next(), it.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => return Err(Error::parse(path, line_no, "expected `u v`")),
        };
        let u: usize = a
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("invalid node index `{a}`")))?;
        let v: usize = b
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("invalid node index `{b}`")))?;
        pairs.push((line_no, u, v));
    }
    if pairs.is_empty() {
        return Err(Error::Data(format!(
            "{}: no edges or header found",
            path.display()
        )));
    }

    let (n_decl, m_decl) = (pairs[0].1, pairs[0].2);
    let has_header = n_decl >= 1 && pairs.len() - 1 == m_decl;
    let (num_nodes, edge_pairs) = if has_header {
        for &(line_no, u, v) in &pairs[1..] {
            for ix in [u, v] {
                if ix >= n_decl {
                    return Err(Error::parse(
                        path,
                        line_no,
                        format!("node index {ix} out of declared range {n_decl}"),
                    ));
                }
            }
        }
        (n_decl, &pairs[1..])
    } else {
        let max_ix = pairs.iter().map(|&(_, u, v)| u.max(v)).max().unwrap();
        (max_ix + 1, &pairs[..])
    };

    let edges: Vec<(usize, usize)> = edge_pairs.iter().map(|&(_, u, v)| (u, v)).collect();
    Graph::from_edges(num_nodes, &edges, dedupe)
}

/// Writes `N M` followed by one `u v` line per undirected edge, `u <= v`,
/// ascending. Round-trips through [`load_edge_list`]. Self-loop graphs are
/// refused: loaders drop loop lines, so they would not survive the trip.
pub fn write_edge_list(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if g.has_self_loops {
        return Err(Error::Contract(
            "edge-list files store loop-free graphs only".into(),
        ));
    }
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", g.num_nodes(), g.num_edges());
    for (u, v) in g.edge_iter() {
        let _ = writeln!(out, "{u} {v}");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Degree-normalized adjacency `D^(r-1) A D^(-r)` over a graph that already
/// carries self-loops. Shares the graph structure; only edge values are owned.
#[derive(Debug, Clone)]
pub struct NormalizedAdjacency {
    graph: Arc<Graph>,
    /// One value per stored edge, aligned with `graph.col_indices()`.
    values: Vec<f64>,
    exponent_r: f64,
}

/// Builds the normalized operator with convention exponent `r ∈ [0, 1]`:
/// entry `(i, j)` is `deg(i)^(r-1) * deg(j)^(-r)`.
///
/// `r = 0` gives the row-stochastic walk operator, `r = 0.5` the symmetric
/// one (the two exponents coincide, so `value(i, j) == value(j, i)` exactly).
pub fn normalize(graph: Arc<Graph>, r: f64) -> Result<NormalizedAdjacency> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Param(format!(
            "normalization exponent must lie in [0, 1], got {r}"
        )));
    }
    if !graph.has_self_loops() {
        return Err(Error::Contract(
            "normalization requires the self-looped graph".into(),
        ));
    }
    let n = graph.num_nodes();
    // Self-loops guarantee deg >= 1, so the powers are finite.
    let out_pow: Vec<f64> = (0..n).map(|v| (graph.degree(v) as f64).powf(r - 1.0)).collect();
    let in_pow: Vec<f64> = (0..n).map(|v| (graph.degree(v) as f64).powf(-r)).collect();
    let mut values = Vec::with_capacity(graph.col_indices().len());
    for i in 0..n {
        for &j in graph.neighbors(i) {
            values.push(out_pow[i] * in_pow[j]);
        }
    }
    Ok(NormalizedAdjacency {
        graph,
        values,
        exponent_r: r,
    })
}

impl NormalizedAdjacency {
    pub fn graph(&self) -> &Arc<Graph> {
        &self.graph
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn exponent_r(&self) -> f64 {
        self.exponent_r
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Neighbor ids and edge values for one row, in column order.
    pub fn row(&self, v: NodeId) -> (&[NodeId], &[f64]) {
        let lo = self.graph.row_offsets()[v];
        let hi = self.graph.row_offsets()[v + 1];
        (&self.graph.col_indices()[lo..hi], &self.values[lo..hi])
    }

    /// Value at `(i, j)`, zero when the edge is absent.
    pub fn value_at(&self, i: NodeId, j: NodeId) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(pos) => vals[pos],
            Err(_) => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn path3() -> Graph {
        Graph::from_edges(3, &[(0, 1), (1, 2)], true).unwrap()
    }

    #[test]
    fn from_edges_symmetrizes_and_sorts() {
        let g = Graph::from_edges(4, &[(2, 0), (3, 2), (0, 1)], true).unwrap();
        assert_eq!(g.num_edges(), 3);
        assert_eq!(g.neighbors(0), &[1, 2]);
        assert_eq!(g.neighbors(2), &[0, 3]);
        assert_eq!(g.degree(3), 1);
    }

    #[test]
    fn from_edges_drops_self_loops() {
        let g = Graph::from_edges(3, &[(0, 1), (2, 2)], true).unwrap();
        assert_eq!(g.num_edges(), 1);
        assert!(!g.has_self_loops());
        assert!(g.neighbors(2).is_empty());
    }

    #[test]
    fn duplicate_edges_collapse_or_error() {
        let edges = [(0, 1), (1, 0), (1, 2)];
        let g = Graph::from_edges(3, &edges, true).unwrap();
        assert_eq!(g.num_edges(), 2);
        let err = Graph::from_edges(3, &edges, false).unwrap_err();
        assert!(err.to_string().contains("duplicate edge"));
    }

    #[test]
    fn out_of_range_index_rejected() {
        let err = Graph::from_edges(3, &[(0, 7)], true).unwrap_err();
        assert!(matches!(err, Error::IndexRange { index: 7, num_nodes: 3 }));
    }

    #[test]
    fn add_self_loops_inserts_sorted_diagonal() {
        let g = path3().add_self_loops().unwrap();
        assert!(g.has_self_loops());
        assert_eq!(g.num_edges(), 2 + 3);
        assert_eq!(g.neighbors(0), &[0, 1]);
        assert_eq!(g.neighbors(1), &[0, 1, 2]);
        assert_eq!(g.neighbors(2), &[1, 2]);
        assert!(g.add_self_loops().is_err());
    }

    #[test]
    fn connectivity() {
        assert!(path3().is_connected());
        let split = Graph::from_edges(4, &[(0, 1), (2, 3)], true).unwrap();
        assert!(!split.is_connected());
    }

    #[test]
    fn load_headerless_two_edges() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("edges.txt");
        std::fs::write(&p, "0 1\n1 2\n").unwrap();
        let g = load_edge_list(&p, true).unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.num_edges(), 2);
        assert_eq!(g.neighbors(1), &[0, 2]);
    }

    #[test]
    fn load_dedupes_reversed_pair() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("edges.txt");
        std::fs::write(&p, "0 1\n1 0\n").unwrap();
        let g = load_edge_list(&p, true).unwrap();
        assert_eq!(g.num_edges(), 1);
    }

    #[test]
    fn load_honors_header_and_isolated_nodes() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("edges.txt");
        std::fs::write(&p, "# comment\n5 2\n0 1\n1 2\n").unwrap();
        let g = load_edge_list(&p, true).unwrap();
        assert_eq!(g.num_nodes(), 5);
        assert_eq!(g.num_edges(), 2);
        assert_eq!(g.degree(4), 0);
    }

    #[test]
    fn load_rejects_index_beyond_header() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("edges.txt");
        std::fs::write(&p, "3 2\n0 1\n5 1\n").unwrap();
        let err = load_edge_list(&p, true).unwrap_err();
        assert!(err.to_string().contains("out of declared range"));
        assert!(err.to_string().contains(":3:"));
    }

    #[test]
    fn load_reports_malformed_line() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("edges.txt");
        std::fs::write(&p, "0 1\nnope\n").unwrap();
        let err = load_edge_list(&p, true).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn edge_list_round_trip() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("edges.txt");
        let g = Graph::from_edges(6, &[(0, 1), (1, 2), (4, 1)], true).unwrap();
        write_edge_list(&g, &p).unwrap();
        let back = load_edge_list(&p, true).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn writer_refuses_self_loops() {
        let dir = tempdir().unwrap();
        let g = path3().add_self_loops().unwrap();
        assert!(write_edge_list(&g, dir.path().join("x.txt")).is_err());
    }

    #[test]
    fn normalize_requires_loops_and_valid_r() {
        let g = Arc::new(path3());
        assert!(normalize(Arc::clone(&g), 0.5).is_err());
        let looped = Arc::new(path3().add_self_loops().unwrap());
        assert!(normalize(Arc::clone(&looped), -0.1).is_err());
        assert!(normalize(Arc::clone(&looped), 1.5).is_err());
        assert!(normalize(looped, 1.0).is_ok());
    }

    #[test]
    fn normalize_symmetric_matches_hand_value() {
        // Path 0-1-2 with loops: deg = [2, 3, 2].
        let g = Arc::new(path3().add_self_loops().unwrap());
        let adj = normalize(g, 0.5).unwrap();
        let expect = 1.0 / (2.0f64 * 3.0).sqrt();
        assert!((adj.value_at(0, 1) - expect).abs() < 1e-15);
        assert!((adj.value_at(0, 1) - 0.408_248_290_463_863).abs() < 1e-12);
        assert_eq!(adj.value_at(0, 1).to_bits(), adj.value_at(1, 0).to_bits());
        assert_eq!(adj.value_at(0, 2), 0.0);
    }

    #[test]
    fn normalize_row_stochastic_rows_sum_to_one() {
        let g = Arc::new(
            Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 3)], true)
                .unwrap()
                .add_self_loops()
                .unwrap(),
        );
        let adj = normalize(g, 0.0).unwrap();
        for v in 0..adj.num_nodes() {
            let (_, vals) = adj.row(v);
            let sum: f64 = vals.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "row {v} sums to {sum}");
        }
    }
}
