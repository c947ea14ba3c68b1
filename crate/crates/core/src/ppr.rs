//! Personalized PageRank importance scores.
//!
//! Two routes to the same quantity. The exact route solves the dense linear
//! system `(I - (1-a) A^T) y = a e_s` per source and is only for small
//! graphs. The scalable route is local forward push with per-node residual
//! threshold `epsilon * deg`, guaranteeing
//! `0 <= ppr(v) - p(v) <= epsilon * deg(v)` entrywise on the self-looped
//! graph. Push order is a FIFO queue over CSR neighbor order, so a given
//! (graph, source, alpha, epsilon) always yields identical output.

use std::collections::VecDeque;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Graph, NormalizedAdjacency};

pub const SCORES_MAGIC: &[u8; 4] = b"RMS1";

/// Keep at most this many entries per source row unless told otherwise.
pub const DEFAULT_TOP_K: usize = 256;

/// Exact solves are dense in memory; refuse beyond this many nodes.
const EXACT_DENSE_BOUND: usize = 5000;

/// Sparse importance rows, one per requested source.
#[derive(Debug, Clone, PartialEq)]
pub struct PprScores {
    alpha: f64,
    epsilon: f64,
    /// `rows[v]` is `None` for nodes that were not requested as sources;
    /// present rows are sorted by node id.
    rows: Vec<Option<Vec<(usize, f64)>>>,
}

impl PprScores {
    pub fn new(alpha: f64, epsilon: f64, rows: Vec<Option<Vec<(usize, f64)>>>) -> Self {
        PprScores {
            alpha,
            epsilon,
            rows,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn num_nodes(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, source: usize) -> Option<&[(usize, f64)]> {
        self.rows[source].as_deref()
    }

    /// Score of `node` under `source`, zero for absent entries.
    pub fn score(&self, source: usize, node: usize) -> f64 {
        match &self.rows[source] {
            Some(row) => match row.binary_search_by_key(&node, |e| e.0) {
                Ok(pos) => row[pos].1,
                Err(_) => 0.0,
            },
            None => 0.0,
        }
    }

    /// Binary layout: magic, u64 node count, f64 alpha, f64 epsilon, then per
    /// node a u64 flag+length (u64::MAX for absent) followed by (u64 id,
    /// f64 score) pairs, little-endian.
    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        buf.extend_from_slice(SCORES_MAGIC);
        buf.extend_from_slice(&(self.rows.len() as u64).to_le_bytes());
        buf.extend_from_slice(&self.alpha.to_le_bytes());
        buf.extend_from_slice(&self.epsilon.to_le_bytes());
        for row in &self.rows {
            match row {
                None => buf.extend_from_slice(&u64::MAX.to_le_bytes()),
                Some(entries) => {
                    buf.extend_from_slice(&(entries.len() as u64).to_le_bytes());
                    for &(id, score) in entries {
                        buf.extend_from_slice(&(id as u64).to_le_bytes());
                        buf.extend_from_slice(&score.to_le_bytes());
                    }
                }
            }
        }
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&buf).map_err(|e| Error::io(path, e))
    }

    pub fn read_binary(path: impl AsRef<Path>) -> Result<PprScores> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .map_err(|e| Error::io(path, e))?
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io(path, e))?;
        let bad = |msg: &str| Error::Data(format!("{}: {msg}", path.display()));
        if bytes.len() < 28 || &bytes[..4] != SCORES_MAGIC {
            return Err(bad("not a score file"));
        }
        let n = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
        let alpha = f64::from_le_bytes(bytes[12..20].try_into().unwrap());
        let epsilon = f64::from_le_bytes(bytes[20..28].try_into().unwrap());
        let mut at = 28usize;
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            if at + 8 > bytes.len() {
                return Err(bad("truncated score file"));
            }
            let len = u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
            at += 8;
            if len == u64::MAX {
                rows.push(None);
                continue;
            }
            let len = len as usize;
            let mut entries = Vec::with_capacity(len.min(1 << 20));
            for _ in 0..len {
                if at + 16 > bytes.len() {
                    return Err(bad("truncated score file"));
                }
                let id = u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()) as usize;
                let score = f64::from_le_bytes(bytes[at + 8..at + 16].try_into().unwrap());
                if id >= n || !score.is_finite() {
                    return Err(bad("invalid score entry"));
                }
                entries.push((id, score));
                at += 16;
            }
            if entries.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(bad("score row not sorted by node id"));
            }
            rows.push(Some(entries));
        }
        if at != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        Ok(PprScores {
            alpha,
            epsilon,
            rows,
        })
    }
}

/// LU factorization with partial pivoting, factors stored in place.
struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl DenseLu {
    fn factor(n: usize, mut a: Vec<f64>) -> Result<DenseLu> {
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (pivot_row, pivot_abs) = (k..n)
                .map(|r| (r, a[r * n + k].abs()))
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .unwrap();
            if pivot_abs < 1e-12 {
                return Err(Error::Numeric("singular linear system".into()));
            }
            if pivot_row != k {
                for c in 0..n {
                    a.swap(k * n + c, pivot_row * n + c);
                }
                perm.swap(k, pivot_row);
            }
            let pivot = a[k * n + k];
            for r in (k + 1)..n {
                let factor = a[r * n + k] / pivot;
                a[r * n + k] = factor;
                for c in (k + 1)..n {
                    a[r * n + c] -= factor * a[k * n + c];
                }
            }
        }
        Ok(DenseLu { n, lu: a, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 1..n {
            for c in 0..r {
                y[r] -= self.lu[r * n + c] * y[c];
            }
        }
        for r in (0..n).rev() {
            for c in (r + 1)..n {
                y[r] -= self.lu[r * n + c] * y[c];
            }
            y[r] /= self.lu[r * n + r];
        }
        y
    }
}

/// Exact importance matrix: row `s` solves `(I - (1-a) A^T) y = a e_s`.
///
/// Every node is a source. Alpha may be 1 (identity scores). Dense; graphs
/// beyond a few thousand nodes are refused.
pub fn ppr_exact(adj: &NormalizedAdjacency, alpha: f64) -> Result<PprScores> {
    if !(0.0 < alpha && alpha <= 1.0) {
        return Err(Error::Param(format!(
            "restart probability must lie in (0, 1], got {alpha}"
        )));
    }
    let n = adj.num_nodes();
    if n > EXACT_DENSE_BOUND {
        return Err(Error::Param(format!(
            "exact importance solve is dense and capped at {EXACT_DENSE_BOUND} nodes, got {n}"
        )));
    }
    let mut system = vec![0.0f64; n * n];
    for i in 0..n {
        system[i * n + i] = 1.0;
        let (cols, vals) = adj.row(i);
        for (&j, &w) in cols.iter().zip(vals) {
            // Transposed operator: column j of A contributes to row j here.
            system[j * n + i] -= (1.0 - alpha) * w;
        }
    }
    let lu = DenseLu::factor(n, system)?;
    let mut rhs = vec![0.0f64; n];
    let mut rows = Vec::with_capacity(n);
    for s in 0..n {
        rhs[s] = alpha;
        let y = lu.solve(&rhs);
        rhs[s] = 0.0;
        let entries: Vec<(usize, f64)> = y
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(j, &v)| (j, v))
            .collect();
        rows.push(Some(entries));
    }
    Ok(PprScores {
        alpha,
        epsilon: 0.0,
        rows,
    })
}

/// Reusable forward-push state; entries touched by the previous source are
/// reset individually, so batch cost scales with work done, not nodes.
struct PushScratch {
    reserve: Vec<f64>,
    residual: Vec<f64>,
    queued: Vec<bool>,
    touched: Vec<usize>,
}

impl PushScratch {
    fn new(n: usize) -> Self {
        PushScratch {
            reserve: vec![0.0; n],
            residual: vec![0.0; n],
            queued: vec![false; n],
            touched: Vec::new(),
        }
    }

    fn reset(&mut self) {
        for &v in &self.touched {
            self.reserve[v] = 0.0;
            self.residual[v] = 0.0;
            self.queued[v] = false;
        }
        self.touched.clear();
    }
}

fn push_from(
    g: &Graph,
    scratch: &mut PushScratch,
    source: usize,
    alpha: f64,
    epsilon: f64,
) -> Vec<(usize, f64)> {
    scratch.reset();
    scratch.residual[source] = 1.0;
    scratch.touched.push(source);
    let mut queue: VecDeque<usize> = VecDeque::new();

    let push = |u: usize,
                scratch: &mut PushScratch,
                queue: &mut VecDeque<usize>| {
        let r = scratch.residual[u];
        scratch.residual[u] = 0.0;
        scratch.reserve[u] += alpha * r;
        let share = (1.0 - alpha) * r / g.degree(u) as f64;
        for &w in g.neighbors(u) {
            // First contact: queued nodes always hold residual, so this test
            // finds exactly the never-touched ones.
            if scratch.residual[w] == 0.0 && scratch.reserve[w] == 0.0 {
                scratch.touched.push(w);
            }
            scratch.residual[w] += share;
            if scratch.residual[w] > epsilon * g.degree(w) as f64 && !scratch.queued[w] {
                scratch.queued[w] = true;
                queue.push_back(w);
            }
        }
    };

    // The source always pushes once, even when epsilon is loose enough that
    // its residual never crosses the threshold.
    push(source, scratch, &mut queue);
    while let Some(u) = queue.pop_front() {
        scratch.queued[u] = false;
        if scratch.residual[u] > epsilon * g.degree(u) as f64 {
            push(u, scratch, &mut queue);
        }
    }

    let mut out: Vec<(usize, f64)> = scratch
        .touched
        .iter()
        .filter(|&&v| scratch.reserve[v] > 0.0)
        .map(|&v| (v, scratch.reserve[v]))
        .collect();
    out.sort_unstable_by_key(|e| e.0);
    out
}

/// Forward-push importance row for one source on the self-looped graph.
pub fn ppr_push(g: &Graph, source: usize, alpha: f64, epsilon: f64) -> Result<Vec<(usize, f64)>> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::Param(format!(
            "restart probability must lie in (0, 1) for push, got {alpha}"
        )));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Param(format!(
            "push tolerance must be positive, got {epsilon}"
        )));
    }
    if !g.has_self_loops() {
        return Err(Error::Contract(
            "push runs on the self-looped graph (degrees must be positive)".into(),
        ));
    }
    if source >= g.num_nodes() {
        return Err(Error::IndexRange {
            index: source,
            num_nodes: g.num_nodes(),
        });
    }
    let mut scratch = PushScratch::new(g.num_nodes());
    Ok(push_from(g, &mut scratch, source, alpha, epsilon))
}

/// Batch push over many sources, parallel with per-worker scratch. Rows are
/// truncated to the `top_k` strongest entries (ties broken toward smaller
/// node ids) and re-sorted by node id.
pub fn ppr_all(
    g: &Graph,
    alpha: f64,
    epsilon: f64,
    sources: &[usize],
    top_k: usize,
) -> Result<PprScores> {
    if top_k == 0 {
        return Err(Error::Param("row truncation must keep at least one entry".into()));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::Param(format!(
            "restart probability must lie in (0, 1) for push, got {alpha}"
        )));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Param(format!(
            "push tolerance must be positive, got {epsilon}"
        )));
    }
    if !g.has_self_loops() {
        return Err(Error::Contract(
            "push runs on the self-looped graph (degrees must be positive)".into(),
        ));
    }
    let n = g.num_nodes();
    if let Some(&bad) = sources.iter().find(|&&s| s >= n) {
        return Err(Error::IndexRange {
            index: bad,
            num_nodes: n,
        });
    }
    let computed: Vec<(usize, Vec<(usize, f64)>)> = sources
        .par_iter()
        .map_init(
            || PushScratch::new(n),
            |scratch, &s| {
                let mut row = push_from(g, scratch, s, alpha, epsilon);
                if row.len() > top_k {
                    row.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                    row.truncate(top_k);
                    row.sort_unstable_by_key(|e| e.0);
                }
                (s, row)
            },
        )
        .collect();
    let mut rows: Vec<Option<Vec<(usize, f64)>>> = vec![None; n];
    for (s, row) in computed {
        rows[s] = Some(row);
    }
    Ok(PprScores {
        alpha,
        epsilon,
        rows,
    })
}
