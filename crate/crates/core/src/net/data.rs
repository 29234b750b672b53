use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureTensor;
use crate::volume::{LabelVolume, TissueClass};

/// One labeled feature vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainSample<'a> {
    pub features: &'a [f64],
    pub label: u8,
}

/// Flat storage of labeled feature vectors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(dim: usize) -> Self {
        Dataset {
            dim,
            features: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push(&mut self, features: &[f64], label: u8) -> Result<()> {
        if features.len() != self.dim {
            return Err(Error::invalid(format!(
                "sample has {} features, dataset holds {}",
                features.len(),
                self.dim
            )));
        }
        if label as usize >= TissueClass::COUNT {
            return Err(Error::invalid(format!("label {label} outside 0..=4")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sample has non-finite features"));
        }
        self.features.extend_from_slice(features);
        self.labels.push(label);
        Ok(())
    }

    pub fn append(&mut self, other: &Dataset) -> Result<()> {
        if other.is_empty() {
            return Ok(());
        }
        if self.is_empty() && self.dim != other.dim {
            self.dim = other.dim;
        }
        if other.dim != self.dim {
            return Err(Error::invalid(format!(
                "cannot merge datasets of {} and {} features",
                self.dim, other.dim
            )));
        }
        self.features.extend_from_slice(&other.features);
        self.labels.extend_from_slice(&other.labels);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn sample(&self, i: usize) -> TrainSample<'_> {
        TrainSample {
            features: &self.features[i * self.dim..(i + 1) * self.dim],
            label: self.labels[i],
        }
    }

    pub fn samples(&self) -> Vec<TrainSample<'_>> {
        (0..self.len()).map(|i| self.sample(i)).collect()
    }

    pub fn class_counts(&self) -> [usize; TissueClass::COUNT] {
        let mut c = [0; TissueClass::COUNT];
        for &l in &self.labels {
            c[l as usize] += 1;
        }
        c
    }
}

/// Voxel subsampling applied when turning a case into training samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    /// Cap on voxels drawn per class per case; `None` keeps every voxel.
    pub max_per_class: Option<usize>,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            max_per_class: Some(4000),
        }
    }
}

/// Draws up to `max_per_class` voxels of each class without replacement.
/// Selected voxels keep their scan order.
pub fn sample_case(
    features: &FeatureTensor,
    labels: &LabelVolume,
    config: &SamplingConfig,
    rng: &mut impl Rng,
) -> Result<Dataset> {
    if features.dims() != labels.dims() {
        return Err(Error::invalid(format!(
            "feature dims {} differ from label dims {}",
            features.dims(),
            labels.dims()
        )));
    }
    let mut members: [Vec<usize>; TissueClass::COUNT] = Default::default();
    for (i, &l) in labels.labels().iter().enumerate() {
        members[l as usize].push(i);
    }
    let mut chosen = Vec::new();
    for m in &members {
        match config.max_per_class {
            Some(cap) if m.len() > cap => {
                let mut picked: Vec<usize> = rand::seq::index::sample(rng, m.len(), cap)
                    .into_iter()
                    .map(|j| m[j])
                    .collect();
                picked.sort_unstable();
                chosen.extend(picked);
            }
            _ => chosen.extend_from_slice(m),
        }
    }
    chosen.sort_unstable();
    let mut ds = Dataset::new(features.feature_count());
    for i in chosen {
        ds.push(features.voxel(i), labels.labels()[i])?;
    }
    Ok(ds)
}
