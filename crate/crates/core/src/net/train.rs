use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{loss, loss_and_grad, Dataset, Gradients, NetworkParams, TrainSample};
use crate::error::{Error, Result};
use crate::volume::TissueClass;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightInit {
    /// Uniform `+-sqrt(6 / (fan_in + fan_out))`.
    Glorot,
    Zero,
}

/// Optimizer and architecture settings for [`train`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub rng_seed: u64,
    /// Draw each batch uniformly over present classes, then uniformly
    /// within the class.
    pub class_balance: bool,
    pub l2: f64,
    pub init: WeightInit,
    pub hidden_layers: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-2,
            momentum: 0.9,
            batch_size: 256,
            epochs: 10,
            rng_seed: 0,
            class_balance: true,
            l2: 1e-4,
            init: WeightInit::Glorot,
            hidden_layers: vec![100, 100, 100],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be positive"));
        }
        if !(self.l2 >= 0.0) || !self.l2.is_finite() {
            return Err(Error::invalid(format!("l2 must be >= 0, got {}", self.l2)));
        }
        if self.hidden_layers.contains(&0) {
            return Err(Error::invalid("hidden layer sizes must be positive"));
        }
        Ok(())
    }

    pub fn layer_sizes(&self, inputs: usize) -> Vec<usize> {
        std::iter::once(inputs)
            .chain(self.hidden_layers.iter().copied())
            .chain(std::iter::once(TissueClass::COUNT))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub params: NetworkParams,
    /// `loss_trace[0]` is the full-dataset loss at initialization;
    /// `loss_trace[e]` for `e >= 1` is the mean mini-batch loss of epoch `e`.
    pub loss_trace: Vec<f64>,
}

/// Mini-batch SGD with momentum.
///
/// The update is `v <- momentum * v - lr * g; w <- w + v`. An epoch is
/// `ceil(n / batch_size)` batches. Everything random flows from one
/// ChaCha8 stream seeded with `rng_seed`, so identical inputs give
/// bit-identical parameters.
pub fn train(data: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let counts = data.class_counts();
    let present: Vec<usize> = (0..TissueClass::COUNT).filter(|&c| counts[c] > 0).collect();
    if present.len() < 2 {
        return Err(Error::Degenerate(format!(
            "training data covers {} class(es), need at least 2",
            present.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let sizes = config.layer_sizes(data.dim());
    let mut params = match config.init {
        WeightInit::Glorot => NetworkParams::glorot(&sizes, &mut rng)?,
        WeightInit::Zero => NetworkParams::zeros(&sizes)?,
    };
    let all = data.samples();
    let mut trace = vec![loss(&params, &all, config.l2)?];

    let members: Vec<Vec<usize>> = present
        .iter()
        .map(|&c| {
            (0..data.len())
                .filter(|&i| data.labels()[i] as usize == c)
                .collect()
        })
        .collect();
    let n = data.len();
    let batches = n.div_ceil(config.batch_size);
    let mut velocity = Gradients::zeros_like(&params);
    let mut order: Vec<usize> = (0..n).collect();
    let mut batch: Vec<TrainSample<'_>> = Vec::with_capacity(config.batch_size);

    for _epoch in 0..config.epochs {
        if !config.class_balance {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        for b in 0..batches {
            batch.clear();
            if config.class_balance {
                for _ in 0..config.batch_size {
                    let class = &members[rng.random_range(0..members.len())];
                    batch.push(all[class[rng.random_range(0..class.len())]]);
                }
            } else {
                let lo = b * config.batch_size;
                let hi = (lo + config.batch_size).min(n);
                batch.extend(order[lo..hi].iter().map(|&i| all[i]));
            }
            let (l, g) = loss_and_grad(&params, &batch, config.l2)?;
            epoch_loss += l;
            apply_momentum(&mut params, &mut velocity, &g, config);
        }
        trace.push(epoch_loss / batches as f64);
    }
    if params
        .layers()
        .iter()
        .any(|l| l.weights.iter().chain(&l.biases).any(|v| !v.is_finite()))
    {
        return Err(Error::Degenerate(
            "training diverged to non-finite parameters; lower learning_rate".into(),
        ));
    }
    Ok(TrainOutcome {
        params,
        loss_trace: trace,
    })
}

fn apply_momentum(
    params: &mut NetworkParams,
    velocity: &mut Gradients,
    grads: &Gradients,
    config: &TrainConfig,
) {
    let (mu, lr) = (config.momentum, config.learning_rate);
    for ((p, v), g) in params
        .layers_mut()
        .iter_mut()
        .zip(&mut velocity.layers)
        .zip(&grads.layers)
    {
        for ((w, vw), gw) in p.weights.iter_mut().zip(&mut v.weights).zip(&g.weights) {
            *vw = mu * *vw - lr * gw;
            *w += *vw;
        }
        for ((b, vb), gb) in p.biases.iter_mut().zip(&mut v.biases).zip(&g.biases) {
            *vb = mu * *vb - lr * gb;
            *b += *vb;
        }
    }
}
