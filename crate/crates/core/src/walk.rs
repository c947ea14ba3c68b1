//! Mask-filtered random walks and the walk matrices that replace operator
//! powers.
//!
//! For hop `h`, each node launches `walks_t` walks of exactly `h` steps.
//! A walk contributes its endpoint only when the endpoint lies at true
//! shortest-path distance `h` from the source (membership in the hop mask);
//! everything else is discarded as noise. Accepted endpoint counts are
//! normalized into a sparse row-stochastic matrix `W^h`, and `W^h · X`
//! stands in for `A^h · X`.
//!
//! Determinism: the walk for coordinate (node, hop, t) draws from its own
//! seeded stream ([`crate::rng::task_rng`]), retries included, so output is
//! independent of worker count and scheduling.

use std::collections::VecDeque;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::graph::Graph;
use crate::mask::{build_hop_mask, HopMask};
use crate::ppr::PprScores;
use crate::propagate::{HopFeatures, PropagationMode};
use crate::rng::task_rng;

pub const WALK_MAGIC: &[u8; 4] = b"RMW1";

/// Additive floor on importance weights so unscored neighbors stay reachable.
pub const BIAS_FLOOR: f64 = 1e-12;

/// Transition bias for walk steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasMode {
    /// Uniform over neighbors.
    Uniform,
    /// Neighbor weight = importance of the neighbor under the walk's source.
    Ppr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    /// Deepest hop to estimate.
    pub depth_h: usize,
    /// Walks launched per (node, hop).
    pub walks_t: usize,
    pub bias: BiasMode,
    pub seed: u64,
    /// Extra attempts per walk after a rejection; retries continue the same
    /// random stream.
    pub max_retries: usize,
    /// Normalize rows by walks launched instead of walks accepted. Rows then
    /// sum to the acceptance rate rather than to one.
    pub divide_by_total: bool,
}

impl WalkConfig {
    pub fn new(depth_h: usize, walks_t: usize, bias: BiasMode, seed: u64) -> Self {
        WalkConfig {
            depth_h,
            walks_t,
            bias,
            seed,
            max_retries: 0,
            divide_by_total: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth_h == 0 {
            return Err(Error::Param("walk depth must be at least 1".into()));
        }
        if self.walks_t == 0 {
            return Err(Error::Param("walk count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Sparse row-stochastic estimate of one hop's reach.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkMatrix {
    hop: usize,
    /// Per source, `(endpoint, weight)` sorted by endpoint; empty when every
    /// walk was rejected.
    rows: Vec<Vec<(usize, f64)>>,
    /// Walks whose endpoint passed the mask.
    accepted: u64,
    /// Walks launched, retries included.
    attempted: u64,
}

/// Coverage summary for one hop's walk matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkStats {
    pub hop: usize,
    pub num_nodes: usize,
    /// Sources with at least one accepted walk.
    pub nonempty_rows: usize,
    /// accepted / attempted over the whole hop.
    pub acceptance_rate: f64,
}

impl WalkMatrix {
    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn num_nodes(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, v: usize) -> &[(usize, f64)] {
        &self.rows[v]
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn attempted(&self) -> u64 {
        self.attempted
    }

    pub fn stats(&self) -> WalkStats {
        WalkStats {
            hop: self.hop,
            num_nodes: self.rows.len(),
            nonempty_rows: self.rows.iter().filter(|r| !r.is_empty()).count(),
            acceptance_rate: if self.attempted == 0 {
                0.0
            } else {
                self.accepted as f64 / self.attempted as f64
            },
        }
    }

    /// `W · X`: each output row is the weight-blend of endpoint feature rows.
    /// Rejected-everywhere sources yield zero rows.
    pub fn multiply(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        if x.num_rows() != self.rows.len() {
            return Err(Error::Shape(format!(
                "feature rows {} != walk matrix nodes {}",
                x.num_rows(),
                self.rows.len()
            )));
        }
        let d = x.num_cols();
        let mut out = FeatureMatrix::zeros(self.rows.len(), d);
        out.data_mut()
            .par_chunks_mut(d)
            .enumerate()
            .for_each(|(i, dst)| {
                for &(j, w) in &self.rows[i] {
                    for (o, s) in dst.iter_mut().zip(x.row(j)) {
                        *o += w * s;
                    }
                }
            });
        Ok(out)
    }

    /// Binary layout: magic, u64 nodes, u64 hop, u64 accepted, u64 attempted,
    /// then per row a u64 length and (u64 endpoint, f64 weight) pairs.
    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        buf.extend_from_slice(WALK_MAGIC);
        buf.extend_from_slice(&(self.rows.len() as u64).to_le_bytes());
        buf.extend_from_slice(&(self.hop as u64).to_le_bytes());
        buf.extend_from_slice(&self.accepted.to_le_bytes());
        buf.extend_from_slice(&self.attempted.to_le_bytes());
        for row in &self.rows {
            buf.extend_from_slice(&(row.len() as u64).to_le_bytes());
            for &(id, w) in row {
                buf.extend_from_slice(&(id as u64).to_le_bytes());
                buf.extend_from_slice(&w.to_le_bytes());
            }
        }
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&buf).map_err(|e| Error::io(path, e))
    }

    pub fn read_binary(path: impl AsRef<Path>) -> Result<WalkMatrix> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .map_err(|e| Error::io(path, e))?
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io(path, e))?;
        let bad = |msg: &str| Error::Data(format!("{}: {msg}", path.display()));
        if bytes.len() < 36 || &bytes[..4] != WALK_MAGIC {
            return Err(bad("not a walk-matrix file"));
        }
        let u = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        let n = u(4) as usize;
        let hop = u(12) as usize;
        let accepted = u(20);
        let attempted = u(28);
        let mut at = 36usize;
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            if at + 8 > bytes.len() {
                return Err(bad("truncated walk-matrix file"));
            }
            let len = u(at) as usize;
            at += 8;
            let mut row = Vec::with_capacity(len.min(1 << 20));
            for _ in 0..len {
                if at + 16 > bytes.len() {
                    return Err(bad("truncated walk-matrix file"));
                }
                let id = u(at) as usize;
                let w = f64::from_le_bytes(bytes[at + 8..at + 16].try_into().unwrap());
                if id >= n || !w.is_finite() {
                    return Err(bad("invalid walk entry"));
                }
                row.push((id, w));
                at += 16;
            }
            if row.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(bad("walk row not sorted by endpoint"));
            }
            rows.push(row);
        }
        if at != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        Ok(WalkMatrix {
            hop,
            rows,
            accepted,
            attempted,
        })
    }
}

/// One step: sample the next node among `cur`'s neighbors. Walks run on
/// loop-free graphs, so no self transition exists. Biased mode weights each
/// candidate by its score in `bias_row` plus [`BIAS_FLOOR`]. Returns `None`
/// for stranded walkers (no candidates).
fn step(
    g: &Graph,
    cur: usize,
    bias_row: Option<&[(usize, f64)]>,
    rng: &mut ChaCha8Rng,
    weights: &mut Vec<f64>,
) -> Option<usize> {
    let nbrs = g.neighbors(cur);
    match bias_row {
        None => {
            // Uniform; the graph is loop-free so every neighbor qualifies.
            if nbrs.is_empty() {
                return None;
            }
            Some(nbrs[rng.gen_range(0..nbrs.len())])
        }
        Some(scores) => {
            if nbrs.is_empty() {
                return None;
            }
            weights.clear();
            let mut total = 0.0f64;
            for &w in nbrs {
                let s = match scores.binary_search_by_key(&w, |e| e.0) {
                    Ok(pos) => scores[pos].1,
                    Err(_) => 0.0,
                };
                let val = s + BIAS_FLOOR;
                total += val;
                weights.push(total);
            }
            let x = rng.gen::<f64>() * total;
            let pos = weights.partition_point(|&c| c <= x);
            Some(nbrs[pos.min(nbrs.len() - 1)])
        }
    }
}

/// Runs one walk of exactly `hop_h` steps from `source` and applies the mask
/// test to the endpoint. `bias_row` carries the source's importance scores
/// (uniform steps when absent). Returns the endpoint or `None` on rejection.
pub fn single_walk(
    g: &Graph,
    mask: &HopMask,
    source: usize,
    hop_h: usize,
    bias_row: Option<&[(usize, f64)]>,
    rng: &mut ChaCha8Rng,
) -> Option<usize> {
    let mut weights = Vec::new();
    walk_once(g, mask, source, hop_h, bias_row, rng, &mut weights)
}

fn walk_once(
    g: &Graph,
    mask: &HopMask,
    source: usize,
    hop_h: usize,
    bias_row: Option<&[(usize, f64)]>,
    rng: &mut ChaCha8Rng,
    weights: &mut Vec<f64>,
) -> Option<usize> {
    let mut cur = source;
    for _ in 0..hop_h {
        cur = step(g, cur, bias_row, rng, weights)?;
    }
    if mask.contains(source, hop_h, cur) {
        Some(cur)
    } else {
        None
    }
}

/// Builds the hop-`hop_h` walk matrix. `bias` must be given exactly in
/// `BiasMode::Ppr` and must score every node as a source.
pub fn walk_matrix(
    g: &Graph,
    mask: &HopMask,
    hop_h: usize,
    cfg: &WalkConfig,
    bias: Option<&PprScores>,
) -> Result<WalkMatrix> {
    cfg.validate()?;
    let n = g.num_nodes();
    if g.has_self_loops() {
        return Err(Error::Contract(
            "walks run on the raw (loop-free) graph".into(),
        ));
    }
    if mask.num_nodes() != n {
        return Err(Error::Shape(format!(
            "mask nodes {} != graph nodes {n}",
            mask.num_nodes()
        )));
    }
    if hop_h == 0 || hop_h > mask.depth() {
        return Err(Error::Param(format!(
            "hop {hop_h} outside mask depth 1..={}",
            mask.depth()
        )));
    }
    match (cfg.bias, bias) {
        (BiasMode::Uniform, None) | (BiasMode::Ppr, Some(_)) => {}
        (BiasMode::Uniform, Some(_)) => {
            return Err(Error::Contract(
                "importance scores supplied but bias mode is uniform".into(),
            ))
        }
        (BiasMode::Ppr, None) => {
            return Err(Error::Contract(
                "importance-biased walks need importance scores".into(),
            ))
        }
    }
    if let Some(scores) = bias {
        if scores.num_nodes() != n {
            return Err(Error::Shape(format!(
                "importance rows {} != graph nodes {n}",
                scores.num_nodes()
            )));
        }
        if let Some(v) = (0..n).find(|&v| scores.row(v).is_none()) {
            return Err(Error::Contract(format!(
                "importance scores missing source row for node {v}"
            )));
        }
    }

    struct RowResult {
        entries: Vec<(usize, f64)>,
        accepted: u64,
        attempted: u64,
    }

    let per_row: Vec<RowResult> = (0..n)
        .into_par_iter()
        .map_init(
            || (Vec::<usize>::new(), Vec::<f64>::new()),
            |(endpoints, weights), v| {
                endpoints.clear();
                let bias_row = bias.and_then(|s| s.row(v));
                let mut attempted = 0u64;
                for t in 0..cfg.walks_t {
                    let mut rng = task_rng(cfg.seed, v, hop_h, t);
                    for _ in 0..=cfg.max_retries {
                        attempted += 1;
                        if let Some(end) =
                            walk_once(g, mask, v, hop_h, bias_row, &mut rng, weights)
                        {
                            endpoints.push(end);
                            break;
                        }
                    }
                }
                endpoints.sort_unstable();
                let accepted = endpoints.len() as u64;
                let denom = if cfg.divide_by_total {
                    (cfg.walks_t * (cfg.max_retries + 1)) as f64
                } else {
                    accepted as f64
                };
                let mut entries: Vec<(usize, f64)> = Vec::new();
                let mut i = 0usize;
                while i < endpoints.len() {
                    let id = endpoints[i];
                    let mut count = 0usize;
                    while i < endpoints.len() && endpoints[i] == id {
                        count += 1;
                        i += 1;
                    }
                    entries.push((id, count as f64 / denom));
                }
                RowResult {
                    entries,
                    accepted,
                    attempted,
                }
            },
        )
        .collect();

    let mut rows = Vec::with_capacity(n);
    let mut accepted = 0u64;
    let mut attempted = 0u64;
    for r in per_row {
        accepted += r.accepted;
        attempted += r.attempted;
        rows.push(r.entries);
    }
    Ok(WalkMatrix {
        hop: hop_h,
        rows,
        accepted,
        attempted,
    })
}

/// Full masked-walk preprocessing: builds the hop mask, estimates every hop
/// up to `cfg.depth_h` by walks, and multiplies each estimate into the raw
/// features. Hop 0 of the result is the raw input itself.
pub fn rmask_features(
    g: &Graph,
    x0: &FeatureMatrix,
    cfg: &WalkConfig,
    bias: Option<&PprScores>,
) -> Result<(HopFeatures, Vec<WalkStats>)> {
    cfg.validate()?;
    if x0.num_rows() != g.num_nodes() {
        return Err(Error::Shape(format!(
            "feature rows {} != graph nodes {}",
            x0.num_rows(),
            g.num_nodes()
        )));
    }
    let mask = build_hop_mask(g, cfg.depth_h)?;
    let mut hops = Vec::with_capacity(cfg.depth_h + 1);
    let mut stats = Vec::with_capacity(cfg.depth_h);
    hops.push(x0.clone());
    for h in 1..=cfg.depth_h {
        let wm = walk_matrix(g, &mask, h, cfg, bias)?;
        stats.push(wm.stats());
        hops.push(wm.multiply(x0)?);
    }
    Ok((HopFeatures::new(hops, PropagationMode::Rmask)?, stats))
}

/// Breadth-first distances from one source; used for endpoint verification.
#[doc(hidden)]
pub fn bfs_distances(g: &Graph, source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.num_nodes()];
    dist[source] = Some(0);
    let mut q = VecDeque::from([source]);
    while let Some(u) = q.pop_front() {
        let du = dist[u].unwrap();
        for &w in g.neighbors(u) {
            if dist[w].is_none() {
                dist[w] = Some(du + 1);
                q.push_back(w);
            }
        }
    }
    dist
}
