//! Parameter-free feature propagation and hop-combination operators.
//!
//! Propagation repeatedly applies the normalized adjacency to the feature
//! matrix and keeps every intermediate hop. Combination collapses the kept
//! hops into one design matrix: concatenation, averaging, or geometric
//! weighting. Row work is parallel per node; each output row is accumulated
//! left-to-right over the CSR row, so results are bit-stable across worker
//! counts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::graph::{Graph, NormalizedAdjacency};
use crate::mask::HopMask;

/// How a hop stack was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagationMode {
    /// Plain operator powers: hop k holds `A^k X`.
    Baseline,
    /// Masked-walk estimates: hop k holds `W^k X`.
    Rmask,
}

/// Feature matrices for hops `0..=depth`, hop 0 being the raw input.
#[derive(Debug, Clone)]
pub struct HopFeatures {
    hops: Vec<FeatureMatrix>,
    mode: PropagationMode,
}

impl HopFeatures {
    pub fn new(hops: Vec<FeatureMatrix>, mode: PropagationMode) -> Result<Self> {
        let first = hops
            .first()
            .ok_or_else(|| Error::Shape("hop stack must contain hop 0".into()))?;
        let (r, c) = (first.num_rows(), first.num_cols());
        if hops.iter().any(|h| h.num_rows() != r || h.num_cols() != c) {
            return Err(Error::Shape("hop matrices must share dimensions".into()));
        }
        Ok(HopFeatures { hops, mode })
    }

    /// Largest hop index (0 when only the raw features are present).
    pub fn depth(&self) -> usize {
        self.hops.len() - 1
    }

    pub fn mode(&self) -> PropagationMode {
        self.mode
    }

    pub fn hop(&self, k: usize) -> &FeatureMatrix {
        &self.hops[k]
    }

    pub fn hops(&self) -> &[FeatureMatrix] {
        &self.hops
    }
}

/// Sparse-times-dense product `A · X` with deterministic row accumulation.
pub fn spmm(adj: &NormalizedAdjacency, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    let n = adj.num_nodes();
    if x.num_rows() != n {
        return Err(Error::Shape(format!(
            "feature rows {} != graph nodes {n}",
            x.num_rows()
        )));
    }
    let d = x.num_cols();
    let mut out = FeatureMatrix::zeros(n, d);
    out.data_mut()
        .par_chunks_mut(d)
        .enumerate()
        .for_each(|(i, dst)| {
            let (cols, vals) = adj.row(i);
            for (&j, &w) in cols.iter().zip(vals) {
                let src = x.row(j);
                for (o, s) in dst.iter_mut().zip(src) {
                    *o += w * s;
                }
            }
        });
    Ok(out)
}

/// Runs `depth` propagation steps, returning hops `0..=depth`.
pub fn propagate(
    adj: &NormalizedAdjacency,
    x0: &FeatureMatrix,
    depth: usize,
) -> Result<HopFeatures> {
    if x0.num_rows() != adj.num_nodes() {
        return Err(Error::Shape(format!(
            "feature rows {} != graph nodes {}",
            x0.num_rows(),
            adj.num_nodes()
        )));
    }
    let mut hops = Vec::with_capacity(depth + 1);
    hops.push(x0.clone());
    for _ in 0..depth {
        let next = spmm(adj, hops.last().unwrap())?;
        hops.push(next);
    }
    HopFeatures::new(hops, PropagationMode::Baseline)
}

/// Dense infinite-power limit of the normalized operator.
///
/// For a connected self-loop-free graph with raw degrees `d`, entry `(i, j)`
/// of the limit is `(d_i + 1)^r (d_j + 1)^(1-r) / (2M + N)` where `M` is the
/// edge count: the outer product of the operator's dominant left/right
/// eigenvector pair, which every row converges to because the self-looped
/// operator is aperiodic.
pub fn stationary_matrix(g: &Graph, r: f64) -> Result<FeatureMatrix> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Param(format!(
            "normalization exponent must lie in [0, 1], got {r}"
        )));
    }
    if g.has_self_loops() {
        return Err(Error::Contract(
            "stationary limit is defined from the raw (loop-free) graph".into(),
        ));
    }
    if !g.is_connected() {
        return Err(Error::Contract(
            "stationary limit holds per connected component; graph is disconnected".into(),
        ));
    }
    let n = g.num_nodes();
    let denom = (2 * g.num_edges() + n) as f64;
    let lift: Vec<f64> = (0..n).map(|v| (g.degree(v) + 1) as f64).collect();
    let row_pow: Vec<f64> = lift.iter().map(|&d| d.powf(r)).collect();
    let col_pow: Vec<f64> = lift.iter().map(|&d| d.powf(1.0 - r)).collect();
    let mut out = FeatureMatrix::zeros(n, n);
    for i in 0..n {
        let dst = out.row_mut(i);
        for j in 0..n {
            dst[j] = row_pow[i] * col_pow[j] / denom;
        }
    }
    Ok(out)
}

/// Hop-combination method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineMethod {
    /// Concatenate hops side by side (dimension grows per hop).
    SignConcat,
    /// Arithmetic mean of the included hops.
    S2gcAverage,
    /// Weighted sum with geometric weights `beta * (1 - beta)^k` on hop k.
    GbpWeighted,
}

/// Which hops to combine and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombineSpec {
    pub method: CombineMethod,
    /// Geometric decay; required by `GbpWeighted`, rejected otherwise.
    pub beta: Option<f64>,
    /// Whether hop 0 participates (ignored when `hops` is given).
    pub include_raw: bool,
    /// Explicit strictly increasing hop selection; `None` means all hops,
    /// honoring `include_raw`.
    pub hops: Option<Vec<usize>>,
    /// Rescale geometric weights to sum to one over the included hops.
    pub gbp_renormalize: bool,
}

impl CombineSpec {
    pub fn concat(include_raw: bool) -> Self {
        CombineSpec {
            method: CombineMethod::SignConcat,
            beta: None,
            include_raw,
            hops: None,
            gbp_renormalize: false,
        }
    }

    pub fn average(include_raw: bool) -> Self {
        CombineSpec {
            method: CombineMethod::S2gcAverage,
            beta: None,
            include_raw,
            hops: None,
            gbp_renormalize: false,
        }
    }

    pub fn gbp(beta: f64, include_raw: bool) -> Self {
        CombineSpec {
            method: CombineMethod::GbpWeighted,
            beta: Some(beta),
            include_raw,
            hops: None,
            gbp_renormalize: false,
        }
    }

    /// Restricts combination to the given hop indices.
    pub fn with_hops(mut self, hops: Vec<usize>) -> Self {
        self.hops = Some(hops);
        self
    }

    pub fn validate(&self) -> Result<()> {
        match (self.method, self.beta) {
            (CombineMethod::GbpWeighted, Some(b)) => {
                if !(0.0 < b && b < 1.0) {
                    return Err(Error::Param(format!(
                        "geometric decay must lie in (0, 1), got {b}"
                    )));
                }
            }
            (CombineMethod::GbpWeighted, None) => {
                return Err(Error::Param(
                    "geometric combination requires a decay value".into(),
                ))
            }
            (_, Some(_)) => {
                return Err(Error::Param(
                    "decay value is only meaningful for geometric combination".into(),
                ))
            }
            (_, None) => {}
        }
        if let Some(hops) = &self.hops {
            if hops.is_empty() {
                return Err(Error::Param("hop selection must be non-empty".into()));
            }
            if hops.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Param(
                    "hop selection must be strictly increasing".into(),
                ));
            }
        }
        Ok(())
    }

    /// Resolves the hop indices to combine for a stack of depth `depth`.
    fn resolve_hops(&self, depth: usize) -> Result<Vec<usize>> {
        self.validate()?;
        let hops = match &self.hops {
            Some(h) => h.clone(),
            None => {
                let lo = if self.include_raw { 0 } else { 1 };
                if lo > depth {
                    return Err(Error::Param(
                        "hop stack has no hops beyond the raw features".into(),
                    ));
                }
                (lo..=depth).collect()
            }
        };
        if let Some(&bad) = hops.iter().find(|&&h| h > depth) {
            return Err(Error::Param(format!(
                "hop {bad} requested but stack depth is {depth}"
            )));
        }
        Ok(hops)
    }
}

/// Geometric hop weight `beta * (1 - beta)^k`.
pub fn gbp_weight(hop: usize, beta: f64) -> f64 {
    beta * (1.0 - beta).powi(hop as i32)
}

/// Collapses a hop stack into one design matrix according to `spec`.
pub fn combine(hf: &HopFeatures, spec: &CombineSpec) -> Result<FeatureMatrix> {
    let hops = spec.resolve_hops(hf.depth())?;
    let selected: Vec<&FeatureMatrix> = hops.iter().map(|&k| hf.hop(k)).collect();
    match spec.method {
        CombineMethod::SignConcat => FeatureMatrix::hstack(&selected),
        CombineMethod::S2gcAverage => {
            let mut out = selected[0].clone();
            for m in &selected[1..] {
                for (o, v) in out.data_mut().iter_mut().zip(m.data()) {
                    *o += v;
                }
            }
            let inv = 1.0 / selected.len() as f64;
            for o in out.data_mut() {
                *o *= inv;
            }
            Ok(out)
        }
        CombineMethod::GbpWeighted => {
            let beta = spec.beta.unwrap();
            let mut weights: Vec<f64> = hops.iter().map(|&k| gbp_weight(k, beta)).collect();
            if spec.gbp_renormalize {
                let total: f64 = weights.iter().sum();
                for w in &mut weights {
                    *w /= total;
                }
            }
            let mut out = FeatureMatrix::zeros(selected[0].num_rows(), selected[0].num_cols());
            for (m, &w) in selected.iter().zip(&weights) {
                for (o, v) in out.data_mut().iter_mut().zip(m.data()) {
                    *o += w * v;
                }
            }
            Ok(out)
        }
    }
}

/// Diagnostic: relative operator mass landing on exact-hop-k neighbors.
///
/// Entry `k-1` is the mean `A^k`-row value over the source's exact-distance-k
/// set, taken from the L2-normalized source row of `A^k`; zero when that set
/// is empty. A decaying profile shows late hops directing ever less relative
/// weight at the nodes they are nominally responsible for.
pub fn hop_weight_profile(
    adj: &NormalizedAdjacency,
    mask: &HopMask,
    source: usize,
) -> Result<Vec<f64>> {
    let n = adj.num_nodes();
    if mask.num_nodes() != n {
        return Err(Error::Shape(format!(
            "mask nodes {} != graph nodes {n}",
            mask.num_nodes()
        )));
    }
    if source >= n {
        return Err(Error::IndexRange {
            index: source,
            num_nodes: n,
        });
    }
    let mut row = vec![0.0f64; n];
    row[source] = 1.0;
    let mut scratch = vec![0.0f64; n];
    let mut profile = Vec::with_capacity(mask.depth());
    for h in 1..=mask.depth() {
        scratch.iter_mut().for_each(|v| *v = 0.0);
        for u in 0..n {
            let x = row[u];
            if x == 0.0 {
                continue;
            }
            let (cols, vals) = adj.row(u);
            for (&j, &w) in cols.iter().zip(vals) {
                scratch[j] += x * w;
            }
        }
        std::mem::swap(&mut row, &mut scratch);
        let exact = mask.hop_set(source, h);
        if exact.is_empty() {
            profile.push(0.0);
            continue;
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            profile.push(0.0);
            continue;
        }
        let mean = exact.iter().map(|&j| row[j] / norm).sum::<f64>() / exact.len() as f64;
        profile.push(mean);
    }
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::normalize;
    use std::sync::Arc;

    fn looped_path3() -> Arc<Graph> {
        Arc::new(
            Graph::from_edges(3, &[(0, 1), (1, 2)], true)
                .unwrap()
                .add_self_loops()
                .unwrap(),
        )
    }

    #[test]
    fn spmm_row_stochastic_averages_neighbors() {
        let adj = normalize(looped_path3(), 0.0).unwrap();
        let x = FeatureMatrix::from_vec(3, 1, vec![0.0, 3.0, 6.0]).unwrap();
        let y = spmm(&adj, &x).unwrap();
        assert!((y.at(0, 0) - 1.5).abs() < 1e-12);
        assert!((y.at(1, 0) - 3.0).abs() < 1e-12);
        assert!((y.at(2, 0) - 4.5).abs() < 1e-12);
    }

    #[test]
    fn propagate_keeps_all_hops_and_hop0_identity() {
        let adj = normalize(looped_path3(), 0.5).unwrap();
        let x = FeatureMatrix::from_vec(3, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let hf = propagate(&adj, &x, 3).unwrap();
        assert_eq!(hf.depth(), 3);
        assert_eq!(hf.mode(), PropagationMode::Baseline);
        assert_eq!(hf.hop(0), &x);
        let manual = spmm(&adj, &spmm(&adj, &x).unwrap()).unwrap();
        assert_eq!(hf.hop(2), &manual);
    }

    #[test]
    fn stationary_matrix_matches_row_stochastic_structure() {
        // Path of 3, r = 0: rows identical, row sums 1.
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)], true).unwrap();
        let s = stationary_matrix(&g, 0.0).unwrap();
        let denom = (2 * 2 + 3) as f64;
        for i in 0..3 {
            assert!((s.at(i, 0) - 2.0 / denom).abs() < 1e-15);
            assert!((s.at(i, 1) - 3.0 / denom).abs() < 1e-15);
            assert!((s.at(i, 2) - 2.0 / denom).abs() < 1e-15);
            let sum: f64 = s.row(i).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_matrix_rejects_bad_inputs() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)], true).unwrap();
        assert!(stationary_matrix(&g.add_self_loops().unwrap(), 0.5).is_err());
        let disc = Graph::from_edges(4, &[(0, 1), (2, 3)], true).unwrap();
        assert!(stationary_matrix(&disc, 0.5).is_err());
    }

    #[test]
    fn combine_concat_grows_columns() {
        let adj = normalize(looped_path3(), 0.5).unwrap();
        let x = FeatureMatrix::from_vec(3, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let hf = propagate(&adj, &x, 2).unwrap();
        let c = combine(&hf, &CombineSpec::concat(true)).unwrap();
        assert_eq!(c.num_cols(), 6);
        assert_eq!(&c.row(1)[..2], hf.hop(0).row(1));
        assert_eq!(&c.row(1)[4..], hf.hop(2).row(1));
        let no_raw = combine(&hf, &CombineSpec::concat(false)).unwrap();
        assert_eq!(no_raw.num_cols(), 4);
    }

    #[test]
    fn combine_average_divides_by_hop_count() {
        let a = FeatureMatrix::from_vec(2, 1, vec![1.0, 2.0]).unwrap();
        let b = FeatureMatrix::from_vec(2, 1, vec![3.0, 4.0]).unwrap();
        let hf = HopFeatures::new(vec![a, b], PropagationMode::Baseline).unwrap();
        let c = combine(&hf, &CombineSpec::average(true)).unwrap();
        assert_eq!(c.row(0), &[2.0]);
        assert_eq!(c.row(1), &[3.0]);
    }

    #[test]
    fn combine_gbp_uses_true_hop_indices() {
        let a = FeatureMatrix::from_vec(1, 1, vec![1.0]).unwrap();
        let b = FeatureMatrix::from_vec(1, 1, vec![1.0]).unwrap();
        let c = FeatureMatrix::from_vec(1, 1, vec![1.0]).unwrap();
        let hf = HopFeatures::new(vec![a, b, c], PropagationMode::Baseline).unwrap();
        let beta = 0.3;
        // Selecting hops [0, 2] must weight hop 2 by beta*(1-beta)^2.
        let spec = CombineSpec::gbp(beta, true).with_hops(vec![0, 2]);
        let got = combine(&hf, &spec).unwrap().at(0, 0);
        let expect = gbp_weight(0, beta) + gbp_weight(2, beta);
        assert!((got - expect).abs() < 1e-15);

        let mut renorm = CombineSpec::gbp(beta, true);
        renorm.gbp_renormalize = true;
        let got = combine(&hf, &renorm).unwrap().at(0, 0);
        assert!((got - 1.0).abs() < 1e-12);
    }

    #[test]
    fn combine_spec_validation() {
        assert!(CombineSpec::gbp(0.0, true).validate().is_err());
        assert!(CombineSpec::gbp(1.0, true).validate().is_err());
        assert!(CombineSpec::gbp(0.5, true).validate().is_ok());
        let mut avg_with_beta = CombineSpec::average(true);
        avg_with_beta.beta = Some(0.5);
        assert!(avg_with_beta.validate().is_err());
        assert!(CombineSpec::concat(true)
            .with_hops(vec![2, 1])
            .validate()
            .is_err());
        assert!(CombineSpec::concat(true)
            .with_hops(vec![])
            .validate()
            .is_err());

        let a = FeatureMatrix::zeros(2, 2);
        let hf = HopFeatures::new(vec![a.clone(), a], PropagationMode::Baseline).unwrap();
        let over = CombineSpec::concat(true).with_hops(vec![0, 3]);
        assert!(combine(&hf, &over).is_err());
    }
}
