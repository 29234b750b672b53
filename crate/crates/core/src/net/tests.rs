use super::*;
use crate::volume::Dims;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn random_params(sizes: &[usize], seed: u64) -> NetworkParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = NetworkParams::glorot(sizes, &mut rng).unwrap();
    for l in p.layers_mut() {
        for b in &mut l.biases {
            *b = rng.random_range(-0.5..0.5);
        }
    }
    p
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Straight-line evaluation of the layer recurrence.
fn reference_probs(p: &NetworkParams, x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    let n = p.layers().len();
    for (i, l) in p.layers().iter().enumerate() {
        let mut z = vec![0.0; l.outputs];
        for o in 0..l.outputs {
            let mut acc = l.biases[o];
            for j in 0..l.inputs {
                acc += l.weights[o * l.inputs + j] * a[j];
            }
            z[o] = if i + 1 < n { acc.max(0.0) } else { acc };
        }
        a = z;
    }
    let m = a.iter().cloned().fold(f64::MIN, f64::max);
    let e: Vec<f64> = a.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

#[test]
fn zero_network_is_uniform() {
    let p = NetworkParams::zeros(&DEFAULT_LAYER_SIZES).unwrap();
    let out = p.forward(&[0.3; 72]).unwrap();
    assert_eq!(out.logits, vec![0.0; 5]);
    for q in out.probabilities {
        assert!((q - 0.2).abs() <= 1e-15);
    }
}

#[test]
fn softmax_shift_invariant() {
    let z = [0.3, -1.2, 4.0, 2.2, 0.0];
    let a = softmax(&z);
    let b = softmax(&z.map(|v| v + 123.4));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-12);
    }
    assert!((a.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    // no overflow for large logits
    let big = softmax(&[1000.0, 999.0, -1000.0]);
    assert!(big.iter().all(|v| v.is_finite()));
}

#[test]
fn forward_matches_reference() {
    let p = random_params(&DEFAULT_LAYER_SIZES, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..20 {
        let x = random_vec(72, &mut rng);
        let got = p.forward(&x).unwrap().probabilities;
        let want = reference_probs(&p, &x);
        assert!((got.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for (a, b) in got.iter().zip(&want) {
            assert!((0.0..=1.0).contains(a));
            assert!((a - b).abs() <= 1e-10);
        }
    }
}

#[test]
fn forward_rejects_wrong_length() {
    let p = NetworkParams::zeros(&DEFAULT_LAYER_SIZES).unwrap();
    assert!(matches!(p.forward(&[0.0; 71]), Err(Error::InvalidInput(_))));
}

#[test]
fn zero_network_loss_is_ln5() {
    let p = NetworkParams::zeros(&DEFAULT_LAYER_SIZES).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let xs: Vec<Vec<f64>> = (0..4).map(|_| random_vec(72, &mut rng)).collect();
    let batch: Vec<TrainSample> = xs
        .iter()
        .enumerate()
        .map(|(i, x)| TrainSample { features: x, label: (i % 5) as u8 })
        .collect();
    let (l, _) = loss_and_grad(&p, &batch, 0.0).unwrap();
    assert!((l - 5f64.ln()).abs() <= 1e-12);
}

/// Central finite differences over every parameter of a small network.
pub(crate) fn finite_difference_check(seed: u64) -> f64 {
    let sizes = [7, 6, 5, 4, 5];
    let p = random_params(&sizes, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
    let xs: Vec<Vec<f64>> = (0..3).map(|_| random_vec(7, &mut rng)).collect();
    let batch: Vec<TrainSample> = xs
        .iter()
        .enumerate()
        .map(|(i, x)| TrainSample { features: x, label: (2 * i + seed as usize) as u8 % 5 })
        .collect();
    let l2 = 1e-3;
    let (_, g) = loss_and_grad(&p, &batch, l2).unwrap();
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for li in 0..p.layers().len() {
        let nw = p.layers()[li].weights.len();
        let nb = p.layers()[li].biases.len();
        for k in 0..nw + nb {
            let perturbed = |delta: f64| {
                let mut q = p.clone();
                let l = &mut q.layers_mut()[li];
                if k < nw {
                    l.weights[k] += delta;
                } else {
                    l.biases[k - nw] += delta;
                }
                loss(&q, &batch, l2).unwrap()
            };
            let numeric = (perturbed(eps) - perturbed(-eps)) / (2.0 * eps);
            let analytic = if k < nw {
                g.layers[li].weights[k]
            } else {
                g.layers[li].biases[k - nw]
            };
            let denom = analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic - numeric).abs() / denom);
        }
    }
    worst
}

#[test]
fn gradient_matches_finite_differences() {
    for seed in 0..5 {
        let err = finite_difference_check(seed);
        assert!(err <= 1e-5, "seed {seed}: relative error {err}");
    }
}

#[test]
fn duplicated_batch_has_same_loss_and_grad() {
    let p = random_params(&[7, 6, 5, 4, 5], 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let xs: Vec<Vec<f64>> = (0..5).map(|_| random_vec(7, &mut rng)).collect();
    let batch: Vec<TrainSample> = xs
        .iter()
        .enumerate()
        .map(|(i, x)| TrainSample { features: x, label: (i % 5) as u8 })
        .collect();
    let doubled: Vec<TrainSample> = batch.iter().chain(&batch).copied().collect();
    let (l1, g1) = loss_and_grad(&p, &batch, 1e-3).unwrap();
    let (l2, g2) = loss_and_grad(&p, &doubled, 1e-3).unwrap();
    assert!((l1 - l2).abs() <= 1e-12);
    for (a, b) in g1.layers.iter().zip(&g2.layers) {
        for (x, y) in a.weights.iter().chain(&a.biases).zip(b.weights.iter().chain(&b.biases)) {
            assert!((x - y).abs() <= 1e-12);
        }
    }
}

#[test]
fn empty_batch_rejected() {
    let p = NetworkParams::zeros(&[3, 5]).unwrap();
    assert!(matches!(loss_and_grad(&p, &[], 0.0), Err(Error::InvalidInput(_))));
}

#[test]
fn argmax_prefers_lower_index_on_ties() {
    assert_eq!(argmax(&[0.2, 0.4, 0.4, 0.0]), 1);
    assert_eq!(argmax(&[0.5, 0.5]), 0);
}

fn tensor(dims: Dims, f: usize, seed: u64) -> FeatureTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = random_vec(dims.len() * f, &mut rng);
    FeatureTensor::new(dims, (0..f).map(|i| format!("f{i}")).collect(), data).unwrap()
}

#[test]
fn predict_volume_matches_per_voxel_forward() {
    let p = random_params(&[6, 8, 5], 21);
    let t = tensor(Dims::cube(2).unwrap(), 6, 22);
    let (labels, probs) = predict_volume(&p, &t).unwrap();
    for i in 0..8 {
        let fw = p.forward(t.voxel(i)).unwrap();
        assert_eq!(labels.labels()[i] as usize, argmax(&fw.probabilities));
        let s: f64 = (0..5).map(|c| probs.channel(c).data()[i]).sum();
        assert!((s - 1.0).abs() <= 1e-10);
    }
}

#[test]
fn dominating_bias_labels_everything() {
    let mut p = random_params(&[4, 5, 5], 1);
    p.layers_mut()[1].biases[2] = 1e6;
    let t = tensor(Dims::new(3, 2, 2).unwrap(), 4, 2);
    let (labels, _) = predict_volume(&p, &t).unwrap();
    assert!(labels.labels().iter().all(|&l| l == 2));
}

#[test]
fn predict_rejects_feature_mismatch() {
    let p = NetworkParams::zeros(&[5, 5]).unwrap();
    let t = tensor(Dims::cube(2).unwrap(), 4, 2);
    assert!(matches!(predict_volume(&p, &t), Err(Error::InvalidInput(_))));
}

#[test]
fn argmax_ignores_per_voxel_logit_shift() {
    let p = random_params(&[4, 6, 5], 8);
    let mut shifted = p.clone();
    for b in &mut shifted.layers_mut()[1].biases {
        *b += 17.0;
    }
    let t = tensor(Dims::cube(3).unwrap(), 4, 9);
    assert_eq!(predict_volume(&p, &t).unwrap().0, predict_volume(&shifted, &t).unwrap().0);
}

/// Two well-separated Gaussian clusters in `dim` dimensions.
pub(crate) fn toy_clusters(dim: usize, per_class: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dir: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut ds = Dataset::new(dim);
    for i in 0..2 * per_class {
        let (label, sign) = if i % 2 == 0 { (0u8, 1.0) } else { (3u8, -1.0) };
        let x: Vec<f64> = dir
            .iter()
            .map(|d| {
                let n: f64 = StandardNormal.sample(&mut rng);
                sign * 2.0 * d / norm + 0.1 * n
            })
            .collect();
        ds.push(&x, label).unwrap();
    }
    ds
}

pub(crate) fn accuracy(p: &NetworkParams, ds: &Dataset) -> f64 {
    let correct = (0..ds.len())
        .filter(|&i| {
            let s = ds.sample(i);
            argmax(&p.forward(s.features).unwrap().probabilities) == s.label as usize
        })
        .count();
    correct as f64 / ds.len() as f64
}

#[test]
fn toy_training_separates_clusters() {
    let ds = toy_clusters(72, 200, 5);
    let cfg = TrainConfig {
        epochs: 20,
        batch_size: 32,
        rng_seed: 3,
        ..TrainConfig::default()
    };
    let out = train(&ds, &cfg).unwrap();
    assert_eq!(out.loss_trace.len(), 21);
    assert!(out.loss_trace[20] < out.loss_trace[1]);
    assert!(accuracy(&out.params, &ds) >= 0.99);
}

#[test]
fn zero_init_initial_loss_and_determinism() {
    let ds = toy_clusters(10, 30, 1);
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 16,
        init: WeightInit::Zero,
        hidden_layers: vec![8, 8],
        ..TrainConfig::default()
    };
    let a = train(&ds, &cfg).unwrap();
    assert!((a.loss_trace[0] - 5f64.ln()).abs() <= 1e-6);
    let b = train(&ds, &cfg).unwrap();
    assert_eq!(a, b);
    let c = train(&ds, &TrainConfig { class_balance: false, ..cfg.clone() }).unwrap();
    assert_eq!(c, train(&ds, &TrainConfig { class_balance: false, ..cfg }).unwrap());
}

#[test]
fn single_class_rejected() {
    let mut ds = Dataset::new(2);
    ds.push(&[0.0, 1.0], 1).unwrap();
    ds.push(&[1.0, 1.0], 1).unwrap();
    assert!(matches!(train(&ds, &TrainConfig::default()), Err(Error::Degenerate(_))));
}

#[test]
fn invalid_config_rejected() {
    let ds = toy_clusters(3, 4, 0);
    for cfg in [
        TrainConfig { momentum: 1.0, ..TrainConfig::default() },
        TrainConfig { learning_rate: 0.0, ..TrainConfig::default() },
        TrainConfig { batch_size: 0, ..TrainConfig::default() },
        TrainConfig { l2: -1.0, ..TrainConfig::default() },
    ] {
        assert!(matches!(train(&ds, &cfg), Err(Error::InvalidInput(_))));
    }
}

#[test]
fn sample_case_caps_each_class() {
    let d = Dims::new(4, 4, 1).unwrap();
    let t = tensor(d, 3, 4);
    let labels = LabelVolume::new(d, (0..16).map(|i| if i < 12 { 0 } else { 4 }).collect()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let ds = sample_case(&t, &labels, &SamplingConfig { max_per_class: Some(5) }, &mut rng).unwrap();
    assert_eq!(ds.class_counts(), [5, 0, 0, 0, 4]);
    let all = sample_case(&t, &labels, &SamplingConfig { max_per_class: None }, &mut rng).unwrap();
    assert_eq!(all.len(), 16);
    assert_eq!(all.sample(13).features, t.voxel(13));
}
