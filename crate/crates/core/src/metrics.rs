//! Representation-smoothness metrics.
//!
//! Node smoothness is the mean cosine similarity between a node's feature
//! row and every other row; graph smoothness is the mean over nodes. A value
//! near 1 means the rows have collapsed toward one direction. Zero-norm rows
//! contribute cosine 0 against everything.
//!
//! The graph-level score is computed through an exact algebraic shortcut:
//! with unit-normalized nonzero rows `x̂` and `s = Σ x̂`, the sum of all
//! pairwise cosines is `‖s‖² - z` where `z` counts nonzero rows, so
//! `GSL = (‖s‖² - z) / (N (N - 1))`. An O(N²·d) pairwise reference lives
//! alongside for cross-checking.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Fixed reduction granularity: partial sums are produced per chunk and
/// folded in chunk order, keeping results identical for any worker count.
const CHUNK: usize = 1024;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothnessResult {
    /// Graph-level smoothness (mean node smoothness).
    pub gsl: f64,
    /// Per-node smoothness, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_node: Option<Vec<f64>>,
}

fn check_shape(x: &FeatureMatrix) -> Result<()> {
    if x.num_rows() < 2 {
        return Err(Error::Shape(format!(
            "smoothness needs at least 2 rows, got {}",
            x.num_rows()
        )));
    }
    if x.num_cols() == 0 {
        return Err(Error::Shape("smoothness needs at least 1 column".into()));
    }
    Ok(())
}

fn row_norms(x: &FeatureMatrix) -> Vec<f64> {
    let mut norms = vec![0.0f64; x.num_rows()];
    norms
        .par_chunks_mut(CHUNK)
        .enumerate()
        .for_each(|(chunk_ix, dst)| {
            let base = chunk_ix * CHUNK;
            for (k, out) in dst.iter_mut().enumerate() {
                let row = x.row(base + k);
                *out = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            }
        });
    norms
}

/// Smoothness of one node: mean cosine against all other rows.
pub fn nsl(x: &FeatureMatrix, node: usize) -> Result<f64> {
    check_shape(x)?;
    let n = x.num_rows();
    if node >= n {
        return Err(Error::IndexRange {
            index: node,
            num_nodes: n,
        });
    }
    let norms = row_norms(x);
    if norms[node] == 0.0 {
        return Ok(0.0);
    }
    let base = x.row(node);
    let mut total = 0.0f64;
    for j in 0..n {
        if j == node || norms[j] == 0.0 {
            continue;
        }
        let dot: f64 = base.iter().zip(x.row(j)).map(|(a, b)| a * b).sum();
        total += dot / (norms[node] * norms[j]);
    }
    Ok(total / (n - 1) as f64)
}

/// Graph smoothness via the sum-vector identity. O(N·d).
pub fn gsl(x: &FeatureMatrix) -> Result<SmoothnessResult> {
    let (gsl, _, _) = gsl_parts(x)?;
    Ok(SmoothnessResult {
        gsl,
        per_node: None,
    })
}

/// Graph smoothness plus the per-node breakdown, still O(N·d): node i's sum
/// of cosines is `x̂_i · s - 1` for nonzero rows.
pub fn gsl_with_per_node(x: &FeatureMatrix) -> Result<SmoothnessResult> {
    let (gsl, norms, s) = gsl_parts(x)?;
    let n = x.num_rows();
    let mut per_node = vec![0.0f64; n];
    per_node
        .par_chunks_mut(CHUNK)
        .enumerate()
        .for_each(|(chunk_ix, dst)| {
            let base = chunk_ix * CHUNK;
            for (k, out) in dst.iter_mut().enumerate() {
                let i = base + k;
                if norms[i] == 0.0 {
                    *out = 0.0;
                    continue;
                }
                let dot: f64 = x.row(i).iter().zip(&s).map(|(a, b)| a * b).sum();
                *out = (dot / norms[i] - 1.0) / (n - 1) as f64;
            }
        });
    Ok(SmoothnessResult {
        gsl,
        per_node: Some(per_node),
    })
}

fn gsl_parts(x: &FeatureMatrix) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    check_shape(x)?;
    let n = x.num_rows();
    let d = x.num_cols();
    let norms = row_norms(x);

    // s = sum of unit rows; chunk partials folded sequentially in order.
    let partials: Vec<(Vec<f64>, usize)> = (0..n)
        .into_par_iter()
        .chunks(CHUNK)
        .map(|ixs| {
            let mut acc = vec![0.0f64; d];
            let mut nonzero = 0usize;
            for i in ixs {
                if norms[i] == 0.0 {
                    continue;
                }
                nonzero += 1;
                let inv = 1.0 / norms[i];
                for (a, v) in acc.iter_mut().zip(x.row(i)) {
                    *a += inv * v;
                }
            }
            (acc, nonzero)
        })
        .collect();
    let mut s = vec![0.0f64; d];
    let mut z = 0usize;
    for (acc, nonzero) in partials {
        for (a, v) in s.iter_mut().zip(&acc) {
            *a += v;
        }
        z += nonzero;
    }
    let s_sq: f64 = s.iter().map(|v| v * v).sum();
    let gsl = (s_sq - z as f64) / (n as f64 * (n - 1) as f64);
    Ok((gsl, norms, s))
}

/// Pairwise O(N²·d) reference implementation of graph smoothness.
pub fn gsl_brute_force(x: &FeatureMatrix) -> Result<f64> {
    check_shape(x)?;
    let n = x.num_rows();
    let norms = row_norms(x);
    let mut total = 0.0f64;
    for i in 0..n {
        if norms[i] == 0.0 {
            continue;
        }
        for j in (i + 1)..n {
            if norms[j] == 0.0 {
                continue;
            }
            let dot: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| a * b).sum();
            total += dot / (norms[i] * norms[j]);
        }
    }
    Ok(2.0 * total / (n as f64 * (n - 1) as f64))
}
