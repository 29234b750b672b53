//! Stage helpers shared by the command line and the end-to-end tests.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dog::FilterBank;
use crate::error::{Error, Result};
use crate::features::{extract_features, normalize_channels, FeatureTensor};
use crate::net::{sample_case, train, Dataset, SamplingConfig, TrainConfig, TrainOutcome};
use crate::volume::{LabelVolume, MultiChannelVolume};

/// Normalizes every channel and extracts DoG features.
pub fn featurize(image: &MultiChannelVolume, bank: &FilterBank) -> Result<FeatureTensor> {
    extract_features(&normalize_channels(image)?, bank)
}

/// Pools sampled voxels from every case. Sampling draws from one ChaCha8
/// stream seeded with `seed`, consumed in case order.
pub fn training_set(
    cases: &[(&FeatureTensor, &LabelVolume)],
    sampling: &SamplingConfig,
    seed: u64,
) -> Result<Dataset> {
    let first = cases
        .first()
        .ok_or_else(|| Error::invalid("no training cases"))?;
    let names = first.0.names();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ds = Dataset::new(first.0.feature_count());
    for (i, (f, l)) in cases.iter().enumerate() {
        if f.names() != names {
            return Err(Error::invalid(format!(
                "case {i} features do not match case 0 feature names"
            )));
        }
        ds.append(&sample_case(f, l, sampling, &mut rng)?)?;
    }
    Ok(ds)
}

/// Samples, trains, and attaches the feature manifest to the result.
pub fn train_on_cases(
    cases: &[(&FeatureTensor, &LabelVolume)],
    sampling: &SamplingConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let ds = training_set(cases, sampling, config.rng_seed)?;
    let mut out = train(&ds, config)?;
    out.params = out.params.with_feature_manifest(cases[0].0.names().to_vec())?;
    Ok(out)
}
