//! Pixel-decoupled classifier.
//!
//! After the fixed DoG layer every remaining layer is a 1x1x1 convolution,
//! which is the same thing as one fully connected network evaluated
//! independently at each voxel. This module implements that network:
//! ReLU hidden layers, a 5-way softmax output, and cross-entropy loss.

mod data;
mod train;

pub use data::{sample_case, Dataset, SamplingConfig, TrainSample};
pub use train::{train, TrainConfig, TrainOutcome, WeightInit};

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureTensor;
use crate::volume::{LabelVolume, MultiChannelVolume, TissueClass, Volume3D};

/// 72 features -> three hidden layers of 100 -> 5 classes.
pub const DEFAULT_LAYER_SIZES: [usize; 5] = [72, 100, 100, 100, 5];

/// One dense layer; `weights` is `outputs x inputs`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn row(&self, o: usize) -> &[f64] {
        &self.weights[o * self.inputs..(o + 1) * self.inputs]
    }

    fn apply(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.outputs).map(|o| dot(self.row(o), input) + self.biases[o]));
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Weights and biases for every layer plus the feature names the network
/// was trained on.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    layers: Vec<Layer>,
    feature_manifest: Vec<String>,
}

impl NetworkParams {
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        check_sizes(layer_sizes)?;
        Ok(NetworkParams {
            layers: layer_sizes
                .windows(2)
                .map(|w| Layer::zeros(w[0], w[1]))
                .collect(),
            feature_manifest: Vec::new(),
        })
    }

    /// Uniform in `+-sqrt(6 / (fan_in + fan_out))` per layer, biases zero.
    pub fn glorot(layer_sizes: &[usize], rng: &mut impl Rng) -> Result<Self> {
        let mut p = Self::zeros(layer_sizes)?;
        for layer in &mut p.layers {
            let limit = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(p)
    }

    pub fn from_layers(layers: Vec<Layer>, feature_manifest: Vec<String>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("network needs at least one layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.inputs == 0 || l.outputs == 0 {
                return Err(Error::invalid(format!("layer {i} has a zero dimension")));
            }
            if l.weights.len() != l.inputs * l.outputs || l.biases.len() != l.outputs {
                return Err(Error::invalid(format!(
                    "layer {i} arrays do not match {}x{}",
                    l.outputs, l.inputs
                )));
            }
            if i > 0 && layers[i - 1].outputs != l.inputs {
                return Err(Error::invalid(format!(
                    "layer {i} expects {} inputs but layer {} has {} outputs",
                    l.inputs,
                    i - 1,
                    layers[i - 1].outputs
                )));
            }
            if l.weights.iter().chain(&l.biases).any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("layer {i} has non-finite parameters")));
            }
        }
        if !feature_manifest.is_empty() && feature_manifest.len() != layers[0].inputs {
            return Err(Error::invalid(format!(
                "feature manifest lists {} names for {} inputs",
                feature_manifest.len(),
                layers[0].inputs
            )));
        }
        Ok(NetworkParams {
            layers,
            feature_manifest,
        })
    }

    pub fn with_feature_manifest(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.input_len() {
            return Err(Error::invalid(format!(
                "feature manifest lists {} names for {} inputs",
                names.len(),
                self.input_len()
            )));
        }
        self.feature_manifest = names;
        Ok(self)
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs)
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn feature_manifest(&self) -> &[String] {
        &self.feature_manifest
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_len(&self) -> usize {
        self.layers.last().map(|l| l.outputs).unwrap_or(0)
    }

    /// Number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Logits and softmax probabilities for one feature vector.
    pub fn forward(&self, features: &[f64]) -> Result<Forward> {
        if features.len() != self.input_len() {
            return Err(Error::invalid(format!(
                "network expects {} features, got {}",
                self.input_len(),
                features.len()
            )));
        }
        let mut scratch = Scratch::default();
        let logits = self.logits_into(features, &mut scratch).to_vec();
        let probabilities = softmax(&logits);
        Ok(Forward {
            logits,
            probabilities,
        })
    }

    fn logits_into<'s>(&self, x: &[f64], s: &'s mut Scratch) -> &'s [f64] {
        let (a, b) = (&mut s.a, &mut s.b);
        a.clear();
        a.extend_from_slice(x);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.apply(a, b);
            if i < last {
                relu_in_place(b);
            }
            std::mem::swap(a, b);
        }
        a
    }
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(Error::invalid(format!(
            "layer sizes need at least an input and an output, all positive, got {sizes:?}"
        )));
    }
    Ok(())
}

#[derive(Default)]
struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
}

fn relu_in_place(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Forward {
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
}

/// Softmax with max subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// First index of the maximum; ties go to the smaller index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Gradients with the same shape as the network's layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    fn zeros_like(p: &NetworkParams) -> Self {
        Gradients {
            layers: p
                .layers
                .iter()
                .map(|l| Layer::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += y;
            }
            for (x, y) in a.biases.iter_mut().zip(&b.biases) {
                *x += y;
            }
        }
    }

    fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w *= s);
            l.biases.iter_mut().for_each(|b| *b *= s);
        }
    }
}

/// Samples per partial gradient. Fixed so the reduction order, and hence
/// the result bits, do not depend on the thread count.
const GRAD_CHUNK: usize = 32;

/// Mean cross-entropy plus `(l2 / 2) * sum(W^2)`, and its gradient.
///
/// Biases are not regularized. The ReLU derivative at 0 is taken as 0.
pub fn loss_and_grad(
    params: &NetworkParams,
    batch: &[TrainSample<'_>],
    l2: f64,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::invalid("loss needs a non-empty batch"));
    }
    validate_batch(params, batch)?;

    let partials: Vec<(f64, Gradients)> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut g = Gradients::zeros_like(params);
            let mut ws = BackpropScratch::new(params);
            let mut loss = 0.0;
            for s in chunk {
                loss += backprop_one(params, s, &mut g, &mut ws);
            }
            (loss, g)
        })
        .collect();

    let mut iter = partials.into_iter();
    let (mut loss, mut grads) = iter.next().expect("non-empty batch");
    for (l, g) in iter {
        loss += l;
        grads.add_assign(&g);
    }
    let n = batch.len() as f64;
    loss /= n;
    grads.scale(1.0 / n);

    if l2 > 0.0 {
        let mut sq = 0.0;
        for (gl, pl) in grads.layers.iter_mut().zip(&params.layers) {
            for (g, w) in gl.weights.iter_mut().zip(&pl.weights) {
                *g += l2 * w;
                sq += w * w;
            }
        }
        loss += 0.5 * l2 * sq;
    }
    Ok((loss, grads))
}

/// Mean cross-entropy plus the L2 term, without gradients.
pub fn loss(params: &NetworkParams, batch: &[TrainSample<'_>], l2: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("loss needs a non-empty batch"));
    }
    validate_batch(params, batch)?;
    let sums: Vec<f64> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut s = Scratch::default();
            chunk
                .iter()
                .map(|t| cross_entropy(params.logits_into(t.features, &mut s), t.label))
                .sum()
        })
        .collect();
    let mut total = sums.iter().sum::<f64>() / batch.len() as f64;
    if l2 > 0.0 {
        let sq: f64 = params
            .layers
            .iter()
            .flat_map(|l| l.weights.iter())
            .map(|w| w * w)
            .sum();
        total += 0.5 * l2 * sq;
    }
    Ok(total)
}

fn validate_batch(params: &NetworkParams, batch: &[TrainSample<'_>]) -> Result<()> {
    let classes = params.output_len();
    for (i, s) in batch.iter().enumerate() {
        if s.features.len() != params.input_len() {
            return Err(Error::invalid(format!(
                "sample {i} has {} features, network expects {}",
                s.features.len(),
                params.input_len()
            )));
        }
        if s.label as usize >= classes {
            return Err(Error::invalid(format!(
                "sample {i} label {} outside 0..{classes}",
                s.label
            )));
        }
    }
    Ok(())
}

/// `-ln softmax(z)[label]` via log-sum-exp.
fn cross_entropy(logits: &[f64], label: u8) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[label as usize]
}

struct BackpropScratch {
    /// post-activation outputs per layer, `acts[0]` is the input
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    prev_delta: Vec<f64>,
}

impl BackpropScratch {
    fn new(p: &NetworkParams) -> Self {
        let sizes = p.layer_sizes();
        BackpropScratch {
            acts: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            delta: Vec::new(),
            prev_delta: Vec::new(),
        }
    }
}

/// Accumulates the unscaled gradient of one sample into `g` and returns its
/// cross-entropy.
fn backprop_one(
    p: &NetworkParams,
    s: &TrainSample<'_>,
    g: &mut Gradients,
    ws: &mut BackpropScratch,
) -> f64 {
    let last = p.layers.len() - 1;
    ws.acts[0].copy_from_slice(s.features);
    for (i, layer) in p.layers.iter().enumerate() {
        let (before, after) = ws.acts.split_at_mut(i + 1);
        let input = &before[i];
        let out = &mut after[0];
        for (o, dst) in out.iter_mut().enumerate() {
            let z = dot(layer.row(o), input) + layer.biases[o];
            *dst = if i < last && z < 0.0 { 0.0 } else { z };
        }
    }

    let logits = &ws.acts[last + 1];
    let loss = cross_entropy(logits, s.label);
    ws.delta.clear();
    ws.delta.extend(softmax(logits));
    ws.delta[s.label as usize] -= 1.0;

    for i in (0..=last).rev() {
        let layer = &p.layers[i];
        let input = &ws.acts[i];
        let gl = &mut g.layers[i];
        for (o, &d) in ws.delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            gl.biases[o] += d;
            let grow = &mut gl.weights[o * layer.inputs..(o + 1) * layer.inputs];
            for (gw, &a) in grow.iter_mut().zip(input) {
                *gw += d * a;
            }
        }
        if i > 0 {
            ws.prev_delta.clear();
            ws.prev_delta.resize(layer.inputs, 0.0);
            for (o, &d) in ws.delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (pd, &w) in ws.prev_delta.iter_mut().zip(layer.row(o)) {
                    *pd += w * d;
                }
            }
            // hidden activations are ReLU outputs: a > 0 iff z > 0
            for (pd, &a) in ws.prev_delta.iter_mut().zip(input) {
                if a <= 0.0 {
                    *pd = 0.0;
                }
            }
            std::mem::swap(&mut ws.delta, &mut ws.prev_delta);
        }
    }
    loss
}

/// Per-voxel classification with argmax labeling.
pub fn predict_volume(
    params: &NetworkParams,
    features: &FeatureTensor,
) -> Result<(LabelVolume, MultiChannelVolume)> {
    predict_volume_with(params, features, |p| argmax(p) as u8)
}

/// Per-voxel classification with a caller-supplied labeling rule applied to
/// each voxel's class probabilities.
pub fn predict_volume_with<L>(
    params: &NetworkParams,
    features: &FeatureTensor,
    labeler: L,
) -> Result<(LabelVolume, MultiChannelVolume)>
where
    L: Fn(&[f64]) -> u8 + Sync,
{
    if features.feature_count() != params.input_len() {
        return Err(Error::invalid(format!(
            "network expects {} features, tensor has {}",
            params.input_len(),
            features.feature_count()
        )));
    }
    let classes = params.output_len();
    if classes != TissueClass::COUNT {
        return Err(Error::invalid(format!(
            "network has {classes} outputs, volume prediction needs {}",
            TissueClass::COUNT
        )));
    }
    let dims = features.dims();
    let f = features.feature_count();
    const CHUNK: usize = 4096;
    let chunks: Vec<(Vec<u8>, Vec<f64>)> = features
        .data()
        .par_chunks(CHUNK * f)
        .map(|block| {
            let mut s = Scratch::default();
            let n = block.len() / f;
            let mut labels = Vec::with_capacity(n);
            let mut probs = Vec::with_capacity(n * classes);
            for x in block.chunks_exact(f) {
                let p = softmax(params.logits_into(x, &mut s));
                labels.push(labeler(&p));
                probs.extend_from_slice(&p);
            }
            (labels, probs)
        })
        .collect();

    let mut labels = Vec::with_capacity(dims.len());
    let mut prob_channels = vec![Vec::with_capacity(dims.len()); classes];
    for (l, p) in chunks {
        labels.extend(l);
        for voxel in p.chunks_exact(classes) {
            for (c, &v) in voxel.iter().enumerate() {
                prob_channels[c].push(v);
            }
        }
    }
    let labels = LabelVolume::new(dims, labels)?;
    let channels = prob_channels
        .into_iter()
        .map(|d| Volume3D::from_vec(dims, d))
        .collect::<Result<Vec<_>>>()?;
    let names = TissueClass::ALL.iter().map(|c| c.name().to_string()).collect();
    Ok((labels, MultiChannelVolume::new(channels, names)?))
}

#[cfg(test)]
mod tests;
