//! Deterministic synthetic graphs and a citation-style benchmark bundle.
//!
//! Everything here is seeded and reproducible byte for byte. The citation
//! generator builds a homophilous community graph with sparse bag-of-words
//! features and a standard few-labels-per-class split, sized like the
//! classic citation benchmarks, for exercising the full pipeline without
//! shipping datasets.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Result;
use crate::features::{FeatureMatrix, LabeledSplit};
use crate::graph::Graph;
use crate::rng::seeded_rng;

/// Connected bounded-degree graph: an n-cycle plus `extra_matchings` random
/// perfect matchings (degree at most `2 + extra_matchings`).
pub fn ring_with_matchings(n: usize, extra_matchings: usize, seed: u64) -> Result<Graph> {
    let mut rng = seeded_rng(seed);
    let mut edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    for round in 0..extra_matchings {
        let mut nodes: Vec<usize> = (0..n).collect();
        nodes.shuffle(&mut rng);
        for pair in nodes.chunks_exact(2) {
            edges.push((pair[0], pair[1]));
        }
        let _ = round;
    }
    // Matchings may duplicate ring edges; collapse them.
    Graph::from_edges(n, &edges, true)
}

/// Erdős–Rényi graph: each pair independently kept with probability `p`.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    let mut rng = seeded_rng(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, &edges, true)
}

/// Erdős–Rényi conditioned on connectivity: resamples with stepped seeds and
/// finally chains any stragglers.
pub fn erdos_renyi_connected(n: usize, p: f64, seed: u64) -> Result<Graph> {
    for attempt in 0..16u64 {
        let g = erdos_renyi(n, p, seed.wrapping_add(attempt.wrapping_mul(0x9e3779b9)))?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    // Deterministic fallback: add a spanning path on top.
    let mut rng = seeded_rng(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    edges.extend((1..n).map(|i| (i - 1, i)));
    Graph::from_edges(n, &edges, true)
}

/// Dense matrix with entries uniform in [-1, 1).
pub fn random_features(rows: usize, cols: usize, seed: u64) -> FeatureMatrix {
    let mut rng = seeded_rng(seed);
    let mut m = FeatureMatrix::zeros(rows, cols);
    for v in m.data_mut() {
        *v = rng.gen::<f64>() * 2.0 - 1.0;
    }
    m
}

/// Knobs for the citation-style benchmark.
#[derive(Debug, Clone)]
pub struct CitationParams {
    pub nodes: usize,
    pub classes: usize,
    /// Vocabulary size (feature dimensionality).
    pub vocab: usize,
    /// Words sampled per node (before bag collapse).
    pub words_per_node: usize,
    /// Vocabulary block size owned by each class.
    pub class_vocab: usize,
    /// Probability that a sampled word comes from the class block.
    pub topical_fraction: f64,
    /// Expected within-class degree per node.
    pub intra_degree: f64,
    /// Expected cross-class degree per node.
    pub inter_degree: f64,
    pub train_per_class: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub seed: u64,
}

impl Default for CitationParams {
    /// Scaled like the classic 2708-paper citation benchmark: 7 classes,
    /// 1433-word vocabulary, ~20 training labels per class, 500 validation
    /// and 1000 test nodes, mean degree around 4, strong homophily.
    fn default() -> Self {
        CitationParams {
            nodes: 2708,
            classes: 7,
            vocab: 1433,
            words_per_node: 18,
            class_vocab: 260,
            topical_fraction: 0.77,
            intra_degree: 3.3,
            inter_degree: 0.7,
            train_per_class: 20,
            val_size: 500,
            test_size: 1000,
            seed: 20260814,
        }
    }
}

/// A generated graph-learning task: graph, features, labels, and split.
#[derive(Debug, Clone)]
pub struct CitationBundle {
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub split: LabeledSplit,
}

/// Generates the benchmark bundle. Deterministic in `params.seed`.
pub fn citation_benchmark(params: &CitationParams) -> Result<CitationBundle> {
    let p = params;
    let n = p.nodes;
    let mut rng = seeded_rng(p.seed);

    // Labels: near-equal class sizes, then shuffled so class id and node id
    // are independent.
    let mut labels: Vec<usize> = (0..n).map(|i| i % p.classes).collect();
    labels.shuffle(&mut rng);

    // Community graph: Bernoulli per pair with homophily-controlled rates.
    let class_size = n as f64 / p.classes as f64;
    let p_intra = (p.intra_degree / (class_size - 1.0)).min(1.0);
    let p_inter = (p.inter_degree / (n as f64 - class_size)).min(1.0);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let rate = if labels[u] == labels[v] { p_intra } else { p_inter };
            if rng.gen::<f64>() < rate {
                edges.push((u, v));
            }
        }
    }
    // Keep the benchmark connected so propagation reaches everywhere: chain
    // each non-first component head to the previous component deterministically.
    let mut graph = Graph::from_edges(n, &edges, true)?;
    if !graph.is_connected() {
        let mut comp = vec![usize::MAX; n];
        let mut heads = Vec::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            heads.push(s);
            comp[s] = heads.len() - 1;
            let mut stack = vec![s];
            while let Some(u) = stack.pop() {
                for &w in graph.neighbors(u) {
                    if comp[w] == usize::MAX {
                        comp[w] = comp[s];
                        stack.push(w);
                    }
                }
            }
        }
        edges.extend(heads.windows(2).map(|w| (w[0], w[1])));
        graph = Graph::from_edges(n, &edges, true)?;
    }

    // Bag-of-words features: each class owns a vocabulary block; nodes mix
    // topical words with background noise.
    let mut features = FeatureMatrix::zeros(n, p.vocab);
    for v in 0..n {
        let block_start = (labels[v] * p.class_vocab) % p.vocab;
        for _ in 0..p.words_per_node {
            let word = if rng.gen::<f64>() < p.topical_fraction {
                (block_start + rng.gen_range(0..p.class_vocab)) % p.vocab
            } else {
                rng.gen_range(0..p.vocab)
            };
            features.set(v, word, 1.0);
        }
    }

    // Split: shuffle nodes once; take the first `train_per_class` of each
    // class for train, then fill val and test from the remainder.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut train = Vec::new();
    let mut per_class = vec![0usize; p.classes];
    let mut rest = Vec::new();
    for &v in &order {
        if per_class[labels[v]] < p.train_per_class {
            per_class[labels[v]] += 1;
            train.push(v);
        } else {
            rest.push(v);
        }
    }
    let val: Vec<usize> = rest.iter().copied().take(p.val_size).collect();
    let test: Vec<usize> = rest
        .iter()
        .copied()
        .skip(p.val_size)
        .take(p.test_size)
        .collect();
    let split = LabeledSplit::new(labels, train, val, test)?;

    Ok(CitationBundle {
        graph,
        features,
        split,
    })
}
