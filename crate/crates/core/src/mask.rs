//! Hop-exact neighbor masks and operator-support noise accounting.
//!
//! `HopMask[v][h]` holds exactly the nodes whose shortest-path distance from
//! `v` is `h` — the targets that hop `h` of a propagation stack is supposed
//! to reach. The noise report measures how much of the self-looped operator
//! power `A^h` instead lands on strictly closer nodes: with self-loops,
//! `A^h` is structurally nonzero at `(i, j)` iff `dist(i, j) <= h`, so the
//! share of already-covered pairs is `|support(A^(h-1))| / |support(A^h)|`.

use std::collections::VecDeque;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NormalizedAdjacency};

pub const MASK_MAGIC: &[u8; 4] = b"RMM1";

/// Default node-count ceiling for the dense support computation.
pub const DENSE_SUPPORT_BOUND: usize = 5000;

/// Per-node exact-distance neighbor lists for hops `1..=depth`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HopMask {
    depth: usize,
    /// `per_node[v][h-1]` is sorted ascending.
    per_node: Vec<Vec<Vec<usize>>>,
}

impl HopMask {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn num_nodes(&self) -> usize {
        self.per_node.len()
    }

    /// Nodes at exact distance `h` from `v` (`1 <= h <= depth`), sorted.
    pub fn hop_set(&self, v: usize, h: usize) -> &[usize] {
        &self.per_node[v][h - 1]
    }

    pub fn contains(&self, v: usize, h: usize, u: usize) -> bool {
        self.hop_set(v, h).binary_search(&u).is_ok()
    }

    /// Total `(source, target)` pairs across all hops.
    pub fn pair_count(&self) -> u64 {
        self.per_node
            .iter()
            .flat_map(|lists| lists.iter())
            .map(|l| l.len() as u64)
            .sum()
    }

    /// Binary layout: magic, u64 node count, u64 depth, then per node and
    /// hop a u64 length followed by u64 node ids, all little-endian.
    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        buf.extend_from_slice(MASK_MAGIC);
        buf.extend_from_slice(&(self.num_nodes() as u64).to_le_bytes());
        buf.extend_from_slice(&(self.depth as u64).to_le_bytes());
        for lists in &self.per_node {
            for list in lists {
                buf.extend_from_slice(&(list.len() as u64).to_le_bytes());
                for &u in list {
                    buf.extend_from_slice(&(u as u64).to_le_bytes());
                }
            }
        }
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&buf).map_err(|e| Error::io(path, e))
    }

    pub fn read_binary(path: impl AsRef<Path>) -> Result<HopMask> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .map_err(|e| Error::io(path, e))?
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io(path, e))?;
        let bad = |msg: &str| Error::Data(format!("{}: {msg}", path.display()));
        if bytes.len() < 20 || &bytes[..4] != MASK_MAGIC {
            return Err(bad("not a hop-mask file"));
        }
        let mut at = 4usize;
        let mut take_u64 = |bytes: &[u8]| -> Result<u64> {
            let end = at + 8;
            if end > bytes.len() {
                return Err(bad("truncated hop-mask file"));
            }
            let v = u64::from_le_bytes(bytes[at..end].try_into().unwrap());
            at = end;
            Ok(v)
        };
        let n = take_u64(&bytes)? as usize;
        let depth = take_u64(&bytes)? as usize;
        let mut per_node = Vec::with_capacity(n);
        for _ in 0..n {
            let mut lists = Vec::with_capacity(depth);
            for _ in 0..depth {
                let len = take_u64(&bytes)? as usize;
                let mut list = Vec::with_capacity(len.min(1 << 20));
                for _ in 0..len {
                    let u = take_u64(&bytes)? as usize;
                    if u >= n {
                        return Err(bad("node id out of range"));
                    }
                    list.push(u);
                }
                if list.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(bad("hop list not strictly sorted"));
                }
                lists.push(list);
            }
            per_node.push(lists);
        }
        if at != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        Ok(HopMask { depth, per_node })
    }
}

/// Builds the exact-distance mask by one bounded breadth-first sweep per
/// node, parallel over sources. The graph must be loop-free: distances are a
/// property of the raw topology.
pub fn build_hop_mask(g: &Graph, depth: usize) -> Result<HopMask> {
    if depth == 0 {
        return Err(Error::Param("mask depth must be at least 1".into()));
    }
    if g.has_self_loops() {
        return Err(Error::Contract(
            "hop distances are defined on the raw (loop-free) graph".into(),
        ));
    }
    let n = g.num_nodes();
    let per_node: Vec<Vec<Vec<usize>>> = (0..n)
        .into_par_iter()
        .map_init(
            || (vec![u32::MAX; n], 0u32),
            |(stamp, epoch), v| {
                // Epoch-stamped visited set: no per-source clearing.
                *epoch += 1;
                let e = *epoch;
                stamp[v] = e;
                let mut frontier = vec![v];
                let mut lists = Vec::with_capacity(depth);
                for _ in 0..depth {
                    let mut next = Vec::new();
                    for &u in &frontier {
                        for &w in g.neighbors(u) {
                            if stamp[w] != e {
                                stamp[w] = e;
                                next.push(w);
                            }
                        }
                    }
                    next.sort_unstable();
                    frontier = next.clone();
                    lists.push(next);
                }
                lists
            },
        )
        .collect();
    Ok(HopMask { depth, per_node })
}

/// One hop's support accounting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseHopStat {
    pub hop: usize,
    /// Pairs whose shortest-path distance is exactly `hop`.
    pub exact_pairs: u64,
    /// Share of `support(A^hop)` already covered by `support(A^(hop-1))`.
    pub noise_fraction: f64,
}

/// Support growth of successive self-looped operator powers.
///
/// `noise_fraction` is an interpretive upper-bound proxy: it counts pairs
/// receiving redundant (strictly-closer) mass, not the mass itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseReport {
    /// What the fraction measures, for consumers reading the JSON.
    pub definition: String,
    pub num_nodes: usize,
    pub per_hop: Vec<NoiseHopStat>,
}

/// Dense bit-matrix over node pairs; rows are 64-bit words.
struct BitMatrix {
    n: usize,
    words_per_row: usize,
    words: Vec<u64>,
}

impl BitMatrix {
    fn identity(n: usize) -> Self {
        let words_per_row = n.div_ceil(64);
        let mut words = vec![0u64; n * words_per_row];
        for i in 0..n {
            words[i * words_per_row + i / 64] |= 1u64 << (i % 64);
        }
        BitMatrix {
            n,
            words_per_row,
            words,
        }
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.words[i * self.words_per_row..(i + 1) * self.words_per_row]
    }

    fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// `self := structure(adj) · other` in boolean arithmetic.
    fn assign_bool_product(&mut self, adj: &NormalizedAdjacency, other: &BitMatrix) {
        let wpr = self.words_per_row;
        self.words
            .par_chunks_mut(wpr)
            .enumerate()
            .for_each(|(i, dst)| {
                dst.iter_mut().for_each(|w| *w = 0);
                let (cols, _) = adj.row(i);
                for &j in cols {
                    for (d, s) in dst.iter_mut().zip(other.row(j)) {
                        *d |= s;
                    }
                }
            });
        debug_assert_eq!(self.n, other.n);
    }
}

/// Computes the noise report for hops `1..=depth` via dense boolean powers.
///
/// Memory is quadratic in bits, so node counts above `dense_bound`
/// (default [`DENSE_SUPPORT_BOUND`]) are refused outright.
pub fn noise_report(
    g: &Graph,
    adj: &NormalizedAdjacency,
    depth: usize,
    dense_bound: usize,
) -> Result<NoiseReport> {
    if depth == 0 {
        return Err(Error::Param("noise report needs depth >= 1".into()));
    }
    let n = g.num_nodes();
    if adj.num_nodes() != n {
        return Err(Error::Shape(format!(
            "operator nodes {} != graph nodes {n}",
            adj.num_nodes()
        )));
    }
    if !adj.graph().has_self_loops() {
        return Err(Error::Contract(
            "noise accounting assumes the self-looped operator".into(),
        ));
    }
    if n > dense_bound {
        return Err(Error::Param(format!(
            "graph has {n} nodes; dense support accounting is capped at {dense_bound} \
             (quadratic memory) — raise the bound explicitly to force it"
        )));
    }
    let mut cur = BitMatrix::identity(n);
    let mut next = BitMatrix::identity(n);
    let mut prev_total = cur.count_ones(); // |support(A^0)| = N
    let mut per_hop = Vec::with_capacity(depth);
    for h in 1..=depth {
        next.assign_bool_product(adj, &cur);
        std::mem::swap(&mut cur, &mut next);
        let total = cur.count_ones();
        per_hop.push(NoiseHopStat {
            hop: h,
            exact_pairs: total - prev_total,
            noise_fraction: prev_total as f64 / total as f64,
        });
        prev_total = total;
    }
    Ok(NoiseReport {
        definition: "noise_fraction(h) = |support(A^(h-1))| / |support(A^h)|: the share of \
                     operator-power support pairs whose shortest-path distance is below h"
            .into(),
        num_nodes: n,
        per_hop,
    })
}

/// Reference distance computation for cross-checking the BFS mask.
#[doc(hidden)]
pub fn all_pairs_distances(g: &Graph) -> Vec<Vec<Option<usize>>> {
    let n = g.num_nodes();
    let mut dist = vec![vec![None; n]; n];
    for s in 0..n {
        dist[s][s] = Some(0);
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            let du = dist[s][u].unwrap();
            for &w in g.neighbors(u) {
                if dist[s][w].is_none() {
                    dist[s][w] = Some(du + 1);
                    q.push_back(w);
                }
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::normalize;
    use std::sync::Arc;
    use tempfile::tempdir;

    fn path4() -> Graph {
        Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3)], true).unwrap()
    }

    #[test]
    fn mask_exact_distances_on_path() {
        let mask = build_hop_mask(&path4(), 3).unwrap();
        assert_eq!(mask.hop_set(0, 1), &[1]);
        assert_eq!(mask.hop_set(0, 2), &[2]);
        assert_eq!(mask.hop_set(0, 3), &[3]);
        assert_eq!(mask.hop_set(1, 1), &[0, 2]);
        assert_eq!(mask.hop_set(1, 2), &[3]);
        assert!(mask.hop_set(1, 3).is_empty());
        assert!(mask.contains(0, 2, 2));
        assert!(!mask.contains(0, 2, 1));
    }

    #[test]
    fn mask_rejects_loops_and_zero_depth() {
        assert!(build_hop_mask(&path4(), 0).is_err());
        let looped = path4().add_self_loops().unwrap();
        assert!(build_hop_mask(&looped, 2).is_err());
    }

    #[test]
    fn mask_rows_are_disjoint_across_hops() {
        let g = Graph::from_edges(
            7,
            &[(0, 1), (0, 2), (1, 3), (2, 3), (3, 4), (4, 5), (5, 6), (6, 0)],
            true,
        )
        .unwrap();
        let mask = build_hop_mask(&g, 4).unwrap();
        let dist = all_pairs_distances(&g);
        for v in 0..7 {
            for h in 1..=4 {
                for &u in mask.hop_set(v, h) {
                    assert_eq!(dist[v][u], Some(h), "node {u} at hop {h} of {v}");
                }
            }
            // Every reachable node within depth appears in exactly one list.
            let total: usize = (1..=4).map(|h| mask.hop_set(v, h).len()).sum();
            let expect = dist[v]
                .iter()
                .filter(|d| matches!(d, Some(x) if (1..=4).contains(x)))
                .count();
            assert_eq!(total, expect);
        }
    }

    #[test]
    fn mask_binary_round_trip() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("mask.rmm");
        let mask = build_hop_mask(&path4(), 2).unwrap();
        mask.write_binary(&p).unwrap();
        let back = HopMask::read_binary(&p).unwrap();
        assert_eq!(mask, back);
    }

    #[test]
    fn noise_fractions_on_path3() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)], true).unwrap();
        let adj = normalize(Arc::new(g.add_self_loops().unwrap()), 0.5).unwrap();
        let rep = noise_report(&g, &adj, 2, DENSE_SUPPORT_BOUND).unwrap();
        // support sizes: A^0 = 3 (diagonal), A^1 = 7, A^2 = 9.
        assert_eq!(rep.per_hop[0].exact_pairs, 4);
        assert!((rep.per_hop[0].noise_fraction - 3.0 / 7.0).abs() < 1e-12);
        assert_eq!(rep.per_hop[1].exact_pairs, 2);
        assert!((rep.per_hop[1].noise_fraction - 7.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn noise_fraction_saturates_at_one_on_clique() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)], true).unwrap();
        let adj = normalize(Arc::new(g.add_self_loops().unwrap()), 0.5).unwrap();
        let rep = noise_report(&g, &adj, 3, DENSE_SUPPORT_BOUND).unwrap();
        assert_eq!(rep.per_hop[1].noise_fraction, 1.0);
        assert_eq!(rep.per_hop[2].noise_fraction, 1.0);
        assert_eq!(rep.per_hop[1].exact_pairs, 0);
    }

    #[test]
    fn noise_report_respects_dense_bound() {
        let g = path4();
        let adj = normalize(Arc::new(g.add_self_loops().unwrap()), 0.5).unwrap();
        let err = noise_report(&g, &adj, 2, 3).unwrap_err();
        assert!(err.to_string().contains("capped at 3"));
    }

    #[test]
    fn support_counts_match_distance_oracle() {
        let g = Graph::from_edges(
            8,
            &[(0, 1), (1, 2), (2, 3), (3, 0), (2, 4), (4, 5), (5, 6), (6, 7), (7, 4)],
            true,
        )
        .unwrap();
        let adj = normalize(Arc::new(g.add_self_loops().unwrap()), 0.0).unwrap();
        let rep = noise_report(&g, &adj, 5, DENSE_SUPPORT_BOUND).unwrap();
        let dist = all_pairs_distances(&g);
        for stat in &rep.per_hop {
            let expect = dist
                .iter()
                .flatten()
                .filter(|d| **d == Some(stat.hop))
                .count() as u64;
            assert_eq!(stat.exact_pairs, expect, "hop {}", stat.hop);
        }
    }
}
