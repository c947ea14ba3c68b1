//! Command implementations. Every command validates its inputs up front,
//! writes UTF-8 JSON artifacts under the output directory, and keeps wall
//! clock measurements out of the deterministic result files so reruns with
//! the same config and seed are byte-identical.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::distributions::{Bernoulli, Distribution};
use rand::seq::SliceRandom;
use rmask_core::classifier::{accuracy, grad_check, train, Activation, ModelParams};
use rmask_core::rng::seeded_rng;
use rmask_core::synthetic::random_features;
use rmask_core::walk::WalkStats;
use rmask_core::{
    build_hop_mask, combine, gsl, load_edge_list, load_features, load_labeled_split, noise_report,
    normalize, ppr_all, propagate, walk_matrix, write_edge_list, BiasMode, Error, Graph,
    HopFeatures, LabeledSplit, PropagationMode, Result,
};
use serde::Serialize;

use crate::config::PipelineConfig;

const DENSE_NOISE_BOUND: usize = 5000;

fn elapsed_ms(start: Instant) -> u64 {
    start.elapsed().as_millis() as u64
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn ensure_out_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn hop_path(out: &Path, k: usize) -> PathBuf {
    out.join(format!("hop_{k}.rmf"))
}

fn echo_effective_config(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let text = cfg.effective_json()?;
    let path = out.join("effective_config.json");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn graph_features_path(cfg: &PipelineConfig) -> Result<&Path> {
    cfg.graph
        .features
        .as_deref()
        .ok_or_else(|| Error::Param("config: graph.features is required for this command".into()))
}

fn load_graph(cfg: &PipelineConfig) -> Result<Graph> {
    load_edge_list(&cfg.graph.edge_list, true)
}

fn load_split(cfg: &PipelineConfig, expected_n: usize) -> Result<LabeledSplit> {
    let labels = cfg
        .graph
        .labels
        .as_deref()
        .ok_or_else(|| Error::Param("config: graph.labels is required for this command".into()))?;
    let splits = cfg
        .graph
        .splits
        .as_ref()
        .ok_or_else(|| Error::Param("config: graph.splits is required for this command".into()))?;
    load_labeled_split(labels, &splits.train, &splits.val, &splits.test, expected_n)
}

#[derive(Serialize)]
struct PreprocessTiming {
    load_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mask_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ppr_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    walk_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    prop_ms: Option<u64>,
}

#[derive(Serialize)]
struct CoverageReport {
    num_nodes: usize,
    walks_per_node_hop: usize,
    per_hop: Vec<WalkStats>,
}

struct PreprocessResult {
    hops: HopFeatures,
    timing: PreprocessTiming,
}

/// Runs the propagation stage and writes hop_<k>.rmf plus coverage and
/// timing JSON. Returns the in-memory hop stack for pipeline reuse.
fn preprocess_impl(cfg: &PipelineConfig, out: &Path) -> Result<PreprocessResult> {
    let p = &cfg.propagation;
    let t_load = Instant::now();
    let graph = load_graph(cfg)?;
    let x0 = load_features(graph_features_path(cfg)?)?;
    if x0.num_rows() != graph.num_nodes() {
        return Err(Error::Shape(format!(
            "feature rows {} != graph nodes {}",
            x0.num_rows(),
            graph.num_nodes()
        )));
    }
    let load_ms = elapsed_ms(t_load);

    let result = match p.mode {
        PropagationMode::Rmask => {
            let t_mask = Instant::now();
            let mask = build_hop_mask(&graph, p.depth_h)?;
            let mask_ms = elapsed_ms(t_mask);

            let t_ppr = Instant::now();
            let bias = match p.bias {
                BiasMode::Uniform => None,
                BiasMode::Ppr => {
                    let looped = Arc::new(graph.add_self_loops()?);
                    let sources: Vec<usize> = (0..graph.num_nodes()).collect();
                    Some(ppr_all(&looped, p.alpha, p.epsilon, &sources, p.top_k)?)
                }
            };
            let ppr_ms = elapsed_ms(t_ppr);

            let t_walk = Instant::now();
            let wcfg = p.walk_config();
            let mut hops = vec![x0.clone()];
            let mut stats = Vec::with_capacity(p.depth_h);
            for h in 1..=p.depth_h {
                let wm = walk_matrix(&graph, &mask, h, &wcfg, bias.as_ref())?;
                stats.push(wm.stats());
                hops.push(wm.multiply(&x0)?);
            }
            let walk_ms = elapsed_ms(t_walk);

            write_json(
                &out.join("coverage.json"),
                &CoverageReport {
                    num_nodes: graph.num_nodes(),
                    walks_per_node_hop: p.walks_t,
                    per_hop: stats,
                },
            )?;
            PreprocessResult {
                hops: HopFeatures::new(hops, PropagationMode::Rmask)?,
                timing: PreprocessTiming {
                    load_ms,
                    mask_ms: Some(mask_ms),
                    ppr_ms: Some(ppr_ms),
                    walk_ms: Some(walk_ms),
                    prop_ms: None,
                },
            }
        }
        PropagationMode::Baseline => {
            let t_prop = Instant::now();
            let adj = normalize(Arc::new(graph.add_self_loops()?), p.r)?;
            let hops = propagate(&adj, &x0, p.depth_h)?;
            let prop_ms = elapsed_ms(t_prop);
            PreprocessResult {
                hops,
                timing: PreprocessTiming {
                    load_ms,
                    mask_ms: None,
                    ppr_ms: None,
                    walk_ms: None,
                    prop_ms: Some(prop_ms),
                },
            }
        }
    };

    for (k, hop) in result.hops.hops().iter().enumerate() {
        hop.write_binary(hop_path(out, k))?;
    }
    write_json(&out.join("timing.json"), &result.timing)?;
    Ok(result)
}

pub fn cmd_preprocess(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    ensure_out_dir(out)?;
    echo_effective_config(cfg, out)?;
    preprocess_impl(cfg, out)?;
    Ok(())
}

#[derive(Serialize)]
struct MetricsOut {
    val_acc: f64,
    test_acc: f64,
}

#[derive(Serialize)]
struct TrainTiming {
    train_ms: u64,
}

struct TrainResult {
    train_ms: u64,
}

/// Combines a hop stack, trains the classifier, and writes metrics,
/// history, and the checkpoint. Wall time goes to a separate file so the
/// metrics JSON stays byte-identical across reruns.
fn train_impl(cfg: &PipelineConfig, out: &Path, hops: &HopFeatures) -> Result<TrainResult> {
    let combined = combine(hops, &cfg.combine.spec())?;
    let split = load_split(cfg, combined.num_rows())?;
    let t_train = Instant::now();
    let outcome = train(&combined, &split, &cfg.train.train_config())?;
    let train_ms = elapsed_ms(t_train);

    let metrics = MetricsOut {
        val_acc: accuracy(&outcome.predictions, split.labels(), split.val()),
        test_acc: accuracy(&outcome.predictions, split.labels(), split.test()),
    };
    write_json(&out.join("metrics.json"), &metrics)?;

    let mut history = String::new();
    for line in &outcome.history {
        history.push_str(
            &serde_json::to_string(line)
                .map_err(|e| Error::Data(format!("history serialization: {e}")))?,
        );
        history.push('\n');
    }
    let hist_path = out.join("history.jsonl");
    std::fs::write(&hist_path, history).map_err(|e| Error::io(&hist_path, e))?;
    outcome.params.write_binary(out.join("model.rmc"))?;
    Ok(TrainResult { train_ms })
}

fn read_hop_stack(cfg: &PipelineConfig, out: &Path) -> Result<HopFeatures> {
    let mut hops = Vec::with_capacity(cfg.propagation.depth_h + 1);
    for k in 0..=cfg.propagation.depth_h {
        hops.push(load_features(hop_path(out, k))?);
    }
    HopFeatures::new(hops, cfg.propagation.mode)
}

pub fn cmd_train(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    ensure_out_dir(out)?;
    echo_effective_config(cfg, out)?;
    let hops = read_hop_stack(cfg, out)?;
    let result = train_impl(cfg, out, &hops)?;
    write_json(
        &out.join("timing_train.json"),
        &TrainTiming {
            train_ms: result.train_ms,
        },
    )
}

#[derive(Serialize)]
struct Breakdown {
    preprocess_ms: u64,
    train_ms: u64,
    total_ms: u64,
}

pub fn cmd_pipeline(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    ensure_out_dir(out)?;
    echo_effective_config(cfg, out)?;
    let t_total = Instant::now();
    let t_pre = Instant::now();
    let pre = preprocess_impl(cfg, out)?;
    let preprocess_ms = elapsed_ms(t_pre);
    let result = train_impl(cfg, out, &pre.hops)?;
    write_json(
        &out.join("breakdown.json"),
        &Breakdown {
            preprocess_ms,
            train_ms: result.train_ms,
            total_ms: elapsed_ms(t_total),
        },
    )
}

#[derive(Serialize)]
struct HopSmoothness {
    hop: usize,
    file: String,
    gsl: f64,
}

#[derive(Serialize)]
struct SmoothnessOut {
    per_hop: Vec<HopSmoothness>,
}

/// Measures the smoothness of each given feature file; the i-th file is
/// reported as hop i.
pub fn cmd_metrics(files: &[PathBuf], out: &Path) -> Result<()> {
    if files.is_empty() {
        return Err(Error::Param("metrics needs at least one feature file".into()));
    }
    ensure_out_dir(out)?;
    let mut per_hop = Vec::with_capacity(files.len());
    for (hop, file) in files.iter().enumerate() {
        let x = load_features(file)?;
        per_hop.push(HopSmoothness {
            hop,
            file: file.display().to_string(),
            gsl: gsl(&x)?.gsl,
        });
    }
    write_json(&out.join("gsl.json"), &SmoothnessOut { per_hop })
}

pub fn cmd_noise(
    cfg: &PipelineConfig,
    out: &Path,
    depth: Option<usize>,
    dense_bound: Option<usize>,
) -> Result<()> {
    ensure_out_dir(out)?;
    echo_effective_config(cfg, out)?;
    let graph = load_graph(cfg)?;
    let adj = normalize(Arc::new(graph.add_self_loops()?), cfg.propagation.r)?;
    let report = noise_report(
        &graph,
        &adj,
        depth.unwrap_or(cfg.propagation.depth_h),
        dense_bound.unwrap_or(DENSE_NOISE_BOUND),
    )?;
    write_json(&out.join("noise.json"), &report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SparsifyKind {
    Feature,
    Edge,
    Label,
}

impl std::str::FromStr for SparsifyKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "feature" => Ok(SparsifyKind::Feature),
            "edge" => Ok(SparsifyKind::Edge),
            "label" => Ok(SparsifyKind::Label),
            other => Err(format!(
                "unknown sparsify kind {other:?} (expected feature, edge, or label)"
            )),
        }
    }
}

#[derive(Serialize)]
struct SparsifyManifest {
    kind: SparsifyKind,
    level: f64,
    seed: u64,
    num_nodes: usize,
    num_edges: usize,
    train_size: usize,
}

/// Derives a degraded copy of the input bundle: zero a share of feature
/// entries, keep a share of edges, or shrink the per-class training
/// budget. The untouched parts are copied through so the output directory
/// is a complete bundle.
pub fn cmd_sparsify(
    cfg: &PipelineConfig,
    out: &Path,
    kind: SparsifyKind,
    level: f64,
    seed: u64,
) -> Result<()> {
    ensure_out_dir(out)?;
    echo_effective_config(cfg, out)?;
    let graph = load_graph(cfg)?;
    let mut features = load_features(graph_features_path(cfg)?)?;
    if features.num_rows() != graph.num_nodes() {
        return Err(Error::Shape(format!(
            "feature rows {} != graph nodes {}",
            features.num_rows(),
            graph.num_nodes()
        )));
    }
    let mut split = load_split(cfg, graph.num_nodes())?;
    let mut rng = seeded_rng(seed);
    let mut graph_out = graph;

    match kind {
        SparsifyKind::Feature => {
            if !(0.0..=0.9).contains(&level) {
                return Err(Error::Param(format!(
                    "feature mask rate must lie in [0.0, 0.9], got {level}"
                )));
            }
            if level > 0.0 {
                let bern = Bernoulli::new(level)
                    .map_err(|e| Error::Param(format!("mask rate: {e}")))?;
                for v in features.data_mut() {
                    if bern.sample(&mut rng) {
                        *v = 0.0;
                    }
                }
            }
        }
        SparsifyKind::Edge => {
            if !(0.1..=1.0).contains(&level) {
                return Err(Error::Param(format!(
                    "edge keep rate must lie in [0.1, 1.0], got {level}"
                )));
            }
            if level < 1.0 {
                let bern = Bernoulli::new(level)
                    .map_err(|e| Error::Param(format!("keep rate: {e}")))?;
                let kept: Vec<(usize, usize)> = graph_out
                    .edge_iter()
                    .filter(|_| bern.sample(&mut rng))
                    .collect();
                graph_out = Graph::from_edges(graph_out.num_nodes(), &kept, false)?;
            }
        }
        SparsifyKind::Label => {
            if level.fract() != 0.0 || !(1.0..=20.0).contains(&level) {
                return Err(Error::Param(format!(
                    "per-class train budget must be an integer in [1, 20], got {level}"
                )));
            }
            let budget = level as usize;
            let num_classes = split.num_classes();
            let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
            for &v in split.train() {
                per_class[split.labels()[v]].push(v);
            }
            let mut new_train = Vec::new();
            for class in &mut per_class {
                if class.len() < budget {
                    return Err(Error::Data(format!(
                        "a class has only {} training nodes; budget {budget} is unreachable",
                        class.len()
                    )));
                }
                class.shuffle(&mut rng);
                new_train.extend(class.iter().take(budget));
            }
            split = split.with_train(new_train)?;
        }
    }

    write_edge_list(&graph_out, out.join("graph.edges"))?;
    features.write_binary(out.join("features.rmf"))?;
    split.write_labels(out.join("labels.txt"))?;
    rmask_core::features::write_index_file(out.join("train.idx"), split.train())?;
    rmask_core::features::write_index_file(out.join("val.idx"), split.val())?;
    rmask_core::features::write_index_file(out.join("test.idx"), split.test())?;
    write_json(
        &out.join("manifest.json"),
        &SparsifyManifest {
            kind,
            level,
            seed,
            num_nodes: graph_out.num_nodes(),
            num_edges: graph_out.num_edges(),
            train_size: split.train().len(),
        },
    )
}

#[derive(Serialize)]
struct GradCheckOut {
    one_layer_max_rel_err: f64,
    two_layer_max_rel_err: f64,
    threshold: f64,
    pass: bool,
}

/// Self-check: analytic gradients against central finite differences for a
/// logistic model and a one-hidden-layer model on random data.
pub fn cmd_gradcheck(out: &Path, seed: u64) -> Result<()> {
    ensure_out_dir(out)?;
    let threshold = 1e-5;
    let rows = 24;
    let cols = 6;
    let classes = 3;
    let x = random_features(rows, cols, seed ^ 0x9e37_79b9_7f4a_7c15);
    let labels: Vec<usize> = (0..rows).map(|i| i % classes).collect();
    let one = ModelParams::init(&[cols, classes], Activation::Relu, seed)?;
    let two = ModelParams::init(&[cols, 5, classes], Activation::Relu, seed.wrapping_add(1))?;
    let one_err = grad_check(&one, &x, &labels, 1e-5)?;
    let two_err = grad_check(&two, &x, &labels, 1e-5)?;
    let pass = one_err < threshold && two_err < threshold;
    write_json(
        &out.join("gradcheck.json"),
        &GradCheckOut {
            one_layer_max_rel_err: one_err,
            two_layer_max_rel_err: two_err,
            threshold,
            pass,
        },
    )?;
    if !pass {
        return Err(Error::Numeric(format!(
            "gradient check failed: one-layer {one_err:.3e}, two-layer {two_err:.3e} \
             against threshold {threshold:.0e}"
        )));
    }
    Ok(())
}
