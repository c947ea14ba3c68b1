//! Minimal node classifier over combined hop features: logistic regression
//! or a one-hidden-layer ReLU network, trained full-batch with Adam,
//! softmax cross-entropy, inverted dropout, and early stopping on
//! validation accuracy.
//!
//! Training is bit-deterministic for a fixed (features, split, config):
//! initialization and dropout draw from one seeded stream, batch rows are
//! visited in sorted node order, and no reduction depends on worker count.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, LabeledSplit};
use crate::rng::seeded_rng;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RMC1";

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    /// No nonlinearity; only meaningful for stacked linear layers in tests.
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `fan_in x fan_out`, row-major.
    pub weight: FeatureMatrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layers: Vec<Layer>,
    pub activation: Activation,
}

impl ModelParams {
    /// Glorot-uniform initialization: weights drawn layer by layer, row-major,
    /// from `±sqrt(6 / (fan_in + fan_out))`; biases start at zero.
    pub fn init(dims: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Param(
                "model needs at least input and output dimensions".into(),
            ));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Param("layer dimensions must be positive".into()));
        }
        let mut rng = seeded_rng(seed);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let mut weight = FeatureMatrix::zeros(fan_in, fan_out);
            for v in weight.data_mut() {
                *v = rng.gen_range(-limit..limit);
            }
            layers.push(Layer {
                weight,
                bias: vec![0.0; fan_out],
            });
        }
        Ok(ModelParams { layers, activation })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.num_rows()
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().unwrap().weight.num_cols()
    }

    pub fn num_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.data().len() + l.bias.len())
            .sum()
    }

    /// Binary layout: magic, u8 activation, u64 layer count, then per layer
    /// u64 fan_in, u64 fan_out, f64 weights row-major, f64 biases.
    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.push(match self.activation {
            Activation::Relu => 0u8,
            Activation::Identity => 1u8,
        });
        buf.extend_from_slice(&(self.layers.len() as u64).to_le_bytes());
        for l in &self.layers {
            buf.extend_from_slice(&(l.weight.num_rows() as u64).to_le_bytes());
            buf.extend_from_slice(&(l.weight.num_cols() as u64).to_le_bytes());
            for &v in l.weight.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            for &v in &l.bias {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&buf).map_err(|e| Error::io(path, e))
    }

    pub fn read_binary(path: impl AsRef<Path>) -> Result<ModelParams> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .map_err(|e| Error::io(path, e))?
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io(path, e))?;
        let bad = |msg: &str| Error::Data(format!("{}: {msg}", path.display()));
        if bytes.len() < 13 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(bad("not a model checkpoint"));
        }
        let activation = match bytes[4] {
            0 => Activation::Relu,
            1 => Activation::Identity,
            _ => return Err(bad("unknown activation tag")),
        };
        let count = u64::from_le_bytes(bytes[5..13].try_into().unwrap()) as usize;
        let mut at = 13usize;
        let mut take = |len: usize| -> Result<&[u8]> {
            if at + len > bytes.len() {
                return Err(bad("truncated checkpoint"));
            }
            let s = &bytes[at..at + len];
            at += len;
            Ok(s)
        };
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let fan_in = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
            let fan_out = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
            let mut data = Vec::with_capacity(fan_in * fan_out);
            for chunk in take(fan_in * fan_out * 8)?.chunks_exact(8) {
                data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
            }
            let weight = FeatureMatrix::from_vec(fan_in, fan_out, data)?;
            let mut bias = Vec::with_capacity(fan_out);
            for chunk in take(fan_out * 8)?.chunks_exact(8) {
                bias.push(f64::from_le_bytes(chunk.try_into().unwrap()));
            }
            layers.push(Layer { weight, bias });
        }
        if at != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        if layers.is_empty() {
            return Err(bad("checkpoint has no layers"));
        }
        Ok(ModelParams { layers, activation })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// 0 trains plain logistic regression; otherwise one ReLU hidden layer.
    pub hidden_dim: usize,
    pub learning_rate: f64,
    /// L2 penalty added to weight gradients (biases excluded).
    pub weight_decay: f64,
    /// Inverted-dropout rate on layer inputs during training.
    pub dropout: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement tolerated before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Standardize each column to train-set mean 0 / stddev 1 first.
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_dim: 0,
            learning_rate: 0.01,
            weight_decay: 0.0,
            dropout: 0.0,
            max_epochs: 300,
            patience: 100,
            seed: 0,
            standardize: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Param(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Param(format!(
                "weight decay must be finite and non-negative, got {}",
                self.weight_decay
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Param(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::Param("training needs at least one epoch".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the latest epoch attaining the best validation
    /// accuracy (final epoch when no validation nodes exist).
    pub params: ModelParams,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    /// Best-epoch predictions for every node, computed on the same
    /// (possibly standardized) features the model was trained on.
    pub predictions: Vec<usize>,
}

/// Per-column affine transform fitted on the train rows: subtract the mean,
/// divide by the population stddev. Constant columns are only centered.
pub fn standardize_columns(x: &FeatureMatrix, train: &[usize]) -> Result<FeatureMatrix> {
    if train.is_empty() {
        return Err(Error::Param("standardization needs train rows".into()));
    }
    let d = x.num_cols();
    let m = train.len() as f64;
    let mut mean = vec![0.0f64; d];
    for &i in train {
        for (a, v) in mean.iter_mut().zip(x.row(i)) {
            *a += v;
        }
    }
    for a in &mut mean {
        *a /= m;
    }
    let mut var = vec![0.0f64; d];
    for &i in train {
        for ((a, v), mu) in var.iter_mut().zip(x.row(i)).zip(&mean) {
            let c = v - mu;
            *a += c * c;
        }
    }
    let scale: Vec<f64> = var
        .iter()
        .map(|&v| {
            let sd = (v / m).sqrt();
            if sd < 1e-12 {
                1.0
            } else {
                1.0 / sd
            }
        })
        .collect();
    let mut out = x.clone();
    for i in 0..out.num_rows() {
        for ((v, mu), s) in out.row_mut(i).iter_mut().zip(&mean).zip(&scale) {
            *v = (*v - mu) * s;
        }
    }
    Ok(out)
}

// ---- dense helpers -------------------------------------------------------

/// `a (m x k) · b (k x n)`.
fn matmul(a: &FeatureMatrix, b: &FeatureMatrix) -> FeatureMatrix {
    let (m, k, n) = (a.num_rows(), a.num_cols(), b.num_cols());
    debug_assert_eq!(k, b.num_rows());
    let mut out = FeatureMatrix::zeros(m, n);
    for i in 0..m {
        let arow = a.row(i);
        let dst = out.row_mut(i);
        for (kk, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            for (o, &bv) in dst.iter_mut().zip(b.row(kk)) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `aᵀ · b` where `a` is `k x m` and `b` is `k x n`; result is `m x n`.
fn matmul_at_b(a: &FeatureMatrix, b: &FeatureMatrix) -> FeatureMatrix {
    let (k, m, n) = (a.num_rows(), a.num_cols(), b.num_cols());
    debug_assert_eq!(k, b.num_rows());
    let mut out = FeatureMatrix::zeros(m, n);
    for kk in 0..k {
        let arow = a.row(kk);
        let brow = b.row(kk);
        for (i, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let dst = out.row_mut(i);
            for (o, &bv) in dst.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `a (m x k) · bᵀ` where `b` is `n x k`.
fn matmul_a_bt(a: &FeatureMatrix, b: &FeatureMatrix) -> FeatureMatrix {
    let (m, k, n) = (a.num_rows(), a.num_cols(), b.num_rows());
    debug_assert_eq!(k, b.num_cols());
    let mut out = FeatureMatrix::zeros(m, n);
    for i in 0..m {
        let arow = a.row(i);
        let dst = out.row_mut(i);
        for (j, o) in dst.iter_mut().enumerate() {
            let brow = b.row(j);
            let mut acc = 0.0;
            for (&av, &bv) in arow.iter().zip(brow) {
                acc += av * bv;
            }
            *o = acc;
        }
    }
    out
}

// ---- forward / backward --------------------------------------------------

struct ForwardCache {
    /// Inputs actually fed to each layer (after dropout where applicable).
    layer_inputs: Vec<FeatureMatrix>,
    /// Pre-activation outputs of each layer.
    pre_acts: Vec<FeatureMatrix>,
    logits: FeatureMatrix,
}

fn apply_activation(z: &FeatureMatrix, activation: Activation) -> FeatureMatrix {
    match activation {
        Activation::Identity => z.clone(),
        Activation::Relu => {
            let mut a = z.clone();
            for v in a.data_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            a
        }
    }
}

fn linear(x: &FeatureMatrix, layer: &Layer) -> FeatureMatrix {
    let mut z = matmul(x, &layer.weight);
    for i in 0..z.num_rows() {
        for (v, b) in z.row_mut(i).iter_mut().zip(&layer.bias) {
            *v += b;
        }
    }
    z
}

fn dropout_mask(
    x: &FeatureMatrix,
    rate: f64,
    rng: &mut ChaCha8Rng,
) -> FeatureMatrix {
    let mut out = x.clone();
    if rate == 0.0 {
        return out;
    }
    let keep_scale = 1.0 / (1.0 - rate);
    for v in out.data_mut() {
        // One draw per entry regardless of value keeps the stream aligned.
        if rng.gen::<f64>() < rate {
            *v = 0.0;
        } else {
            *v *= keep_scale;
        }
    }
    out
}

fn forward_train(
    params: &ModelParams,
    x: &FeatureMatrix,
    dropout: f64,
    rng: &mut ChaCha8Rng,
) -> ForwardCache {
    let mut layer_inputs = Vec::with_capacity(params.layers.len());
    let mut pre_acts = Vec::with_capacity(params.layers.len());
    let mut cur = dropout_mask(x, dropout, rng);
    for (ix, layer) in params.layers.iter().enumerate() {
        let z = linear(&cur, layer);
        layer_inputs.push(cur);
        if ix + 1 == params.layers.len() {
            pre_acts.push(z.clone());
            return ForwardCache {
                layer_inputs,
                pre_acts,
                logits: z,
            };
        }
        let a = apply_activation(&z, params.activation);
        pre_acts.push(z);
        cur = dropout_mask(&a, dropout, rng);
    }
    unreachable!("models always have at least one layer");
}

/// Evaluation forward pass: no dropout.
fn forward_eval(params: &ModelParams, x: &FeatureMatrix) -> FeatureMatrix {
    let mut cur = x.clone();
    for (ix, layer) in params.layers.iter().enumerate() {
        let z = linear(&cur, layer);
        cur = if ix + 1 == params.layers.len() {
            z
        } else {
            apply_activation(&z, params.activation)
        };
    }
    cur
}

/// Row-wise softmax probabilities and mean cross-entropy against `labels`.
fn softmax_loss(logits: &FeatureMatrix, labels: &[usize]) -> (FeatureMatrix, f64) {
    let (b, c) = (logits.num_rows(), logits.num_cols());
    let mut probs = FeatureMatrix::zeros(b, c);
    let mut loss = 0.0f64;
    for i in 0..b {
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0f64;
        for &v in row {
            denom += (v - max).exp();
        }
        let lse = max + denom.ln();
        loss += lse - row[labels[i]];
        let dst = probs.row_mut(i);
        for (p, &v) in dst.iter_mut().zip(row) {
            *p = (v - lse).exp();
        }
    }
    (probs, loss / b as f64)
}

struct Gradients {
    weights: Vec<FeatureMatrix>,
    biases: Vec<Vec<f64>>,
}

/// Full-batch backprop of mean cross-entropy. `weight_decay` adds `λ·W` to
/// each weight gradient.
fn backward(
    params: &ModelParams,
    cache: &ForwardCache,
    labels: &[usize],
    weight_decay: f64,
) -> (Gradients, f64) {
    let (probs, loss) = softmax_loss(&cache.logits, labels);
    let b = probs.num_rows();
    let mut delta = probs;
    for (i, &y) in labels.iter().enumerate() {
        let row = delta.row_mut(i);
        row[y] -= 1.0;
        for v in row.iter_mut() {
            *v /= b as f64;
        }
    }

    let count = params.layers.len();
    let mut weights = vec![FeatureMatrix::zeros(0, 0); count];
    let mut biases = vec![Vec::new(); count];
    for ix in (0..count).rev() {
        let input = &cache.layer_inputs[ix];
        let mut gw = matmul_at_b(input, &delta);
        if weight_decay != 0.0 {
            for (g, w) in gw.data_mut().iter_mut().zip(params.layers[ix].weight.data()) {
                *g += weight_decay * w;
            }
        }
        let mut gb = vec![0.0f64; delta.num_cols()];
        for i in 0..delta.num_rows() {
            for (a, v) in gb.iter_mut().zip(delta.row(i)) {
                *a += v;
            }
        }
        weights[ix] = gw;
        biases[ix] = gb;
        if ix == 0 {
            break;
        }
        // Pull the error through the linear map, the activation, and the
        // dropout scaling baked into layer_inputs.
        let mut upstream = matmul_a_bt(&delta, &params.layers[ix].weight);
        let pre = &cache.pre_acts[ix - 1];
        match params.activation {
            Activation::Identity => {}
            Activation::Relu => {
                for (u, &z) in upstream.data_mut().iter_mut().zip(pre.data()) {
                    if z <= 0.0 {
                        *u = 0.0;
                    }
                }
            }
        }
        // layer_inputs[ix] = dropout(act(pre)): recover each entry's mask
        // scale as kept/raw. Entries with raw == 0 come from non-positive
        // pre-activations, where the error is already zeroed above.
        let act = apply_activation(pre, params.activation);
        for ((u, &kept), &raw) in upstream
            .data_mut()
            .iter_mut()
            .zip(cache.layer_inputs[ix].data())
            .zip(act.data())
        {
            if raw != 0.0 {
                *u *= kept / raw;
            }
        }
        delta = upstream;
    }
    (Gradients { weights, biases }, loss)
}

// ---- Adam ----------------------------------------------------------------

struct AdamState {
    m_w: Vec<FeatureMatrix>,
    v_w: Vec<FeatureMatrix>,
    m_b: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
    t: usize,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl AdamState {
    fn new(params: &ModelParams) -> Self {
        AdamState {
            m_w: params
                .layers
                .iter()
                .map(|l| FeatureMatrix::zeros(l.weight.num_rows(), l.weight.num_cols()))
                .collect(),
            v_w: params
                .layers
                .iter()
                .map(|l| FeatureMatrix::zeros(l.weight.num_rows(), l.weight.num_cols()))
                .collect(),
            m_b: params.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
            v_b: params.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut ModelParams, grads: &Gradients, lr: f64) {
        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - ADAM_BETA1.powi(t);
        let bc2 = 1.0 - ADAM_BETA2.powi(t);
        for (ix, layer) in params.layers.iter_mut().enumerate() {
            let gw = &grads.weights[ix];
            for ((w, &g), (m, v)) in layer
                .weight
                .data_mut()
                .iter_mut()
                .zip(gw.data())
                .zip(self.m_w[ix].data_mut().iter_mut().zip(self.v_w[ix].data_mut()))
            {
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                let mhat = *m / bc1;
                let vhat = *v / bc2;
                *w -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
            }
            for ((b, &g), (m, v)) in layer
                .bias
                .iter_mut()
                .zip(&grads.biases[ix])
                .zip(self.m_b[ix].iter_mut().zip(self.v_b[ix].iter_mut()))
            {
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                let mhat = *m / bc1;
                let vhat = *v / bc2;
                *b -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
            }
        }
    }
}

// ---- public API ------------------------------------------------------------

/// Trains on the split's train rows, early-stopping on validation accuracy,
/// and returns the best-validation parameters plus the per-epoch history.
pub fn train(x: &FeatureMatrix, split: &LabeledSplit, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if x.num_rows() != split.num_nodes() {
        return Err(Error::Shape(format!(
            "feature rows {} != labeled nodes {}",
            x.num_rows(),
            split.num_nodes()
        )));
    }
    if split.train().is_empty() {
        return Err(Error::Param("train set is empty".into()));
    }
    if x.num_cols() == 0 {
        return Err(Error::Shape("features need at least one column".into()));
    }

    let x = if cfg.standardize {
        standardize_columns(x, split.train())?
    } else {
        x.clone()
    };

    let x_train = x.gather_rows(split.train());
    let y_train: Vec<usize> = split.train().iter().map(|&i| split.labels()[i]).collect();
    let x_val = x.gather_rows(split.val());
    let y_val: Vec<usize> = split.val().iter().map(|&i| split.labels()[i]).collect();

    let dims: Vec<usize> = if cfg.hidden_dim == 0 {
        vec![x.num_cols(), split.num_classes()]
    } else {
        vec![x.num_cols(), cfg.hidden_dim, split.num_classes()]
    };
    let mut params = ModelParams::init(&dims, Activation::Relu, cfg.seed)?;
    let mut adam = AdamState::new(&params);
    // Dropout stream is separate from init so depth changes don't shift it.
    let mut dropout_rng = seeded_rng(cfg.seed ^ 0x5bd1_e995_9d03_4c81);

    let has_val = !split.val().is_empty();
    let mut best_params = params.clone();
    let mut best_val_acc = f64::NEG_INFINITY;
    let mut best_epoch = 0usize;
    let mut since_best = 0usize;
    let mut history = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        let cache = forward_train(&params, &x_train, cfg.dropout, &mut dropout_rng);
        let (grads, loss) = backward(&params, &cache, &y_train, cfg.weight_decay);
        if !loss.is_finite() {
            return Err(Error::Numeric(format!(
                "training loss diverged at epoch {epoch}"
            )));
        }
        adam.step(&mut params, &grads, cfg.learning_rate);

        let val_acc = if has_val {
            let logits = forward_eval(&params, &x_val);
            fraction_correct(&argmax_rows(&logits), &y_val)
        } else {
            0.0
        };
        history.push(EpochStats {
            epoch,
            train_loss: loss,
            val_acc,
        });

        if has_val {
            let improved = val_acc > best_val_acc;
            // Ties keep the later epoch: at equal validation accuracy the
            // longer-trained weights fit the training set better.
            if val_acc >= best_val_acc {
                best_val_acc = val_acc;
                best_epoch = epoch;
                best_params = params.clone();
            }
            if improved {
                since_best = 0;
            } else {
                since_best += 1;
                if since_best > cfg.patience {
                    break;
                }
            }
        }
    }

    if !has_val {
        best_params = params;
        best_val_acc = 0.0;
        best_epoch = history.len();
    }
    let predictions = argmax_rows(&forward_eval(&best_params, &x));
    Ok(TrainOutcome {
        params: best_params,
        history,
        best_epoch,
        best_val_acc,
        predictions,
    })
}

fn argmax_rows(logits: &FeatureMatrix) -> Vec<usize> {
    (0..logits.num_rows())
        .map(|i| {
            let row = logits.row(i);
            let mut best = 0usize;
            for (j, &v) in row.iter().enumerate() {
                // Strict comparison keeps the smallest index on ties.
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

fn fraction_correct(pred: &[usize], truth: &[usize]) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / pred.len() as f64
}

/// Class predictions for every row; argmax ties resolve to the smaller index.
pub fn predict(params: &ModelParams, x: &FeatureMatrix) -> Result<Vec<usize>> {
    if x.num_cols() != params.input_dim() {
        return Err(Error::Shape(format!(
            "feature columns {} != model input {}",
            x.num_cols(),
            params.input_dim()
        )));
    }
    Ok(argmax_rows(&forward_eval(params, x)))
}

/// Fraction of `indices` where the prediction matches the label; 0 for an
/// empty index set.
pub fn accuracy(pred: &[usize], labels: &[usize], indices: &[usize]) -> f64 {
    if indices.is_empty() {
        return 0.0;
    }
    let hits = indices
        .iter()
        .filter(|&&i| pred[i] == labels[i])
        .count();
    hits as f64 / indices.len() as f64
}

/// Compares analytic gradients of the mean cross-entropy (no dropout, no
/// weight decay) against central finite differences, entry by entry, and
/// returns the worst relative error `|a - n| / max(|a|, |n|, 1e-3)`. The
/// magnitude floor absorbs finite-difference roundoff on near-zero entries.
pub fn grad_check(
    params: &ModelParams,
    x: &FeatureMatrix,
    labels: &[usize],
    step: f64,
) -> Result<f64> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Param(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    if x.num_rows() != labels.len() {
        return Err(Error::Shape(format!(
            "feature rows {} != labels {}",
            x.num_rows(),
            labels.len()
        )));
    }
    if x.num_cols() != params.input_dim() {
        return Err(Error::Shape(format!(
            "feature columns {} != model input {}",
            x.num_cols(),
            params.input_dim()
        )));
    }
    let classes = params.num_classes();
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::Data(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }

    let mut probe = params.clone();
    let cache = forward_train(&probe, x, 0.0, &mut seeded_rng(0));
    let (grads, _) = backward(&probe, &cache, labels, 0.0);

    let loss_at = |p: &ModelParams| -> f64 {
        let logits = forward_eval(p, x);
        softmax_loss(&logits, labels).1
    };

    let mut worst = 0.0f64;
    let mut check = |analytic: f64, plus: f64, minus: f64| {
        let numeric = (plus - minus) / (2.0 * step);
        let denom = analytic.abs().max(numeric.abs()).max(1e-3);
        let rel = (analytic - numeric).abs() / denom;
        if rel > worst {
            worst = rel;
        }
    };

    for ix in 0..probe.layers.len() {
        for k in 0..probe.layers[ix].weight.data().len() {
            let orig = probe.layers[ix].weight.data()[k];
            probe.layers[ix].weight.data_mut()[k] = orig + step;
            let plus = loss_at(&probe);
            probe.layers[ix].weight.data_mut()[k] = orig - step;
            let minus = loss_at(&probe);
            probe.layers[ix].weight.data_mut()[k] = orig;
            check(grads.weights[ix].data()[k], plus, minus);
        }
        for k in 0..probe.layers[ix].bias.len() {
            let orig = probe.layers[ix].bias[k];
            probe.layers[ix].bias[k] = orig + step;
            let plus = loss_at(&probe);
            probe.layers[ix].bias[k] = orig - step;
            let minus = loss_at(&probe);
            probe.layers[ix].bias[k] = orig;
            check(grads.biases[ix][k], plus, minus);
        }
    }
    Ok(worst)
}
