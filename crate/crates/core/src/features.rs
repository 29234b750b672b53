//! Per-voxel feature construction from a multi-channel volume and a DoG bank.
//!
//! Feature order, per input channel and with channels outermost:
//!
//! | offset            | feature                       |
//! |-------------------|-------------------------------|
//! | 0                 | intensity                     |
//! | 1                 | gradient magnitude            |
//! | 2 .. 2+K          | DoG_k * intensity             |
//! | 2+K .. 2+2K       | DoG_k * gradient magnitude    |
//!
//! With K = 8 filters each channel contributes 18 features, so four
//! modalities give 72.

use crate::conv::{convolve_many, ConvMode};
use crate::dog::FilterBank;
use crate::error::{Error, Result};
use crate::volume::{gradient_magnitude, zscore_normalize, Dims, MultiChannelVolume, Volume3D};

/// Features per input channel for a bank of `bank_len` filters.
pub fn features_per_channel(bank_len: usize) -> usize {
    2 + 2 * bank_len
}

/// Voxel-major feature storage: the `F` features of a voxel are contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTensor {
    dims: Dims,
    names: Vec<String>,
    data: Vec<f64>,
}

impl FeatureTensor {
    pub fn new(dims: Dims, names: Vec<String>, data: Vec<f64>) -> Result<Self> {
        let f = names.len();
        if f == 0 {
            return Err(Error::invalid("feature tensor needs at least one feature"));
        }
        if data.len() != dims.len() * f {
            return Err(Error::invalid(format!(
                "feature tensor {dims} x {f} needs {} values, got {}",
                dims.len() * f,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature tensor contains non-finite values"));
        }
        Ok(FeatureTensor { dims, names, data })
    }

    /// Builds a tensor from one volume per feature.
    pub fn from_channels(names: Vec<String>, channels: &[Volume3D]) -> Result<Self> {
        if names.len() != channels.len() || channels.is_empty() {
            return Err(Error::invalid(format!(
                "{} feature names for {} feature volumes",
                names.len(),
                channels.len()
            )));
        }
        let dims = channels[0].dims();
        if let Some(bad) = channels.iter().find(|c| c.dims() != dims) {
            return Err(Error::invalid(format!(
                "feature volume dims {} differ from {dims}",
                bad.dims()
            )));
        }
        let f = channels.len();
        let mut data = vec![0.0; dims.len() * f];
        for (j, ch) in channels.iter().enumerate() {
            for (v, &x) in ch.data().iter().enumerate() {
                data[v * f + j] = x;
            }
        }
        Self::new(dims, names, data)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn feature_count(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Feature vector of the voxel at linear index `i`.
    pub fn voxel(&self, i: usize) -> &[f64] {
        let f = self.feature_count();
        &self.data[i * f..(i + 1) * f]
    }

    pub fn at(&self, x: usize, y: usize, z: usize) -> &[f64] {
        self.voxel(self.dims.index(x, y, z))
    }

    /// One feature as a volume.
    pub fn channel(&self, j: usize) -> Volume3D {
        let f = self.feature_count();
        let data = self.data.iter().skip(j).step_by(f).copied().collect();
        Volume3D::from_vec_unchecked(self.dims, data)
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// Feature names in extraction order.
pub fn feature_names(channel_names: &[String], bank: &FilterBank) -> Vec<String> {
    let mut names = Vec::with_capacity(channel_names.len() * features_per_channel(bank.len()));
    for ch in channel_names {
        names.push(format!("{ch}:intensity"));
        names.push(format!("{ch}:gradient"));
        for source in ["intensity", "gradient"] {
            for (k, f) in bank.filters().iter().enumerate() {
                names.push(format!("{ch}:dog{k}[sigma={:.6}]:{source}", f.sigma));
            }
        }
    }
    names
}

/// Builds the per-voxel feature tensor. Inputs should already be
/// normalized; see [`normalize_channels`].
pub fn extract_features(image: &MultiChannelVolume, bank: &FilterBank) -> Result<FeatureTensor> {
    if bank.is_empty() {
        return Err(Error::invalid("filter bank is empty"));
    }
    let mut sources = Vec::with_capacity(2 * image.channel_count());
    for ch in image.channels() {
        sources.push(ch.clone());
        sources.push(gradient_magnitude(ch)?);
    }
    let source_refs: Vec<&Volume3D> = sources.iter().collect();
    let filters: Vec<&Volume3D> = bank.filters().iter().map(|f| &f.kernel).collect();
    let k = filters.len();
    // image-major: responses[s * k + j] = filter j applied to source s
    let responses = convolve_many(&source_refs, &filters, ConvMode::Same)?;

    let mut ordered: Vec<&Volume3D> = Vec::with_capacity(image.channel_count() * features_per_channel(k));
    for c in 0..image.channel_count() {
        let (int_src, grad_src) = (2 * c, 2 * c + 1);
        ordered.push(&sources[int_src]);
        ordered.push(&sources[grad_src]);
        ordered.extend(&responses[int_src * k..(int_src + 1) * k]);
        ordered.extend(&responses[grad_src * k..(grad_src + 1) * k]);
    }

    let dims = image.dims();
    let f = ordered.len();
    let mut data = vec![0.0; dims.len() * f];
    for (j, vol) in ordered.iter().enumerate() {
        for (v, &x) in vol.data().iter().enumerate() {
            data[v * f + j] = x;
        }
    }
    FeatureTensor::new(dims, feature_names(image.names(), bank), data)
}

/// Z-scores every channel over its nonzero voxels.
pub fn normalize_channels(image: &MultiChannelVolume) -> Result<MultiChannelVolume> {
    let channels = image
        .channels()
        .iter()
        .zip(image.names())
        .map(|(c, name)| {
            zscore_normalize(c, None).map_err(|e| match e {
                Error::Degenerate(m) => Error::Degenerate(format!("channel '{name}': {m}")),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    MultiChannelVolume::new(channels, image.names().to_vec())
}

/// Rows of the feature vectors at `coords`, in order.
pub fn gather_voxels(
    features: &FeatureTensor,
    coords: &[(usize, usize, usize)],
) -> Result<FeatureMatrix> {
    let d = features.dims();
    let cols = features.feature_count();
    let mut data = Vec::with_capacity(coords.len() * cols);
    for &(x, y, z) in coords {
        if !d.contains(x, y, z) {
            return Err(Error::invalid(format!(
                "voxel ({x}, {y}, {z}) is outside {d}"
            )));
        }
        data.extend_from_slice(features.at(x, y, z));
    }
    Ok(FeatureMatrix {
        rows: coords.len(),
        cols,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dog::{build_bank, DoGSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_bank(n: usize) -> FilterBank {
        build_bank(&DoGSpec {
            sigmas: crate::dog::default_sigmas()[..n].to_vec(),
            support: 5,
            zero_dc: true,
        })
        .unwrap()
    }

    fn random_image(channels: usize, d: Dims, seed: u64) -> MultiChannelVolume {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = (0..channels)
            .map(|_| Volume3D::from_fn(d, |_, _, _| rng.random_range(-1.0..1.0)))
            .collect();
        MultiChannelVolume::unnamed(ch).unwrap()
    }

    #[test]
    fn feature_counts() {
        let bank = small_bank(8);
        let d = Dims::cube(6).unwrap();
        let f4 = extract_features(&random_image(4, d, 1), &bank).unwrap();
        assert_eq!(f4.feature_count(), 72);
        let f1 = extract_features(&random_image(1, d, 1), &bank).unwrap();
        assert_eq!(f1.feature_count(), 18);
        assert_eq!(f1.data().len(), d.len() * 18);
    }

    #[test]
    fn zero_input_gives_zero_features() {
        let bank = small_bank(3);
        let d = Dims::cube(5).unwrap();
        let img = MultiChannelVolume::unnamed(vec![Volume3D::zeros(d); 2]).unwrap();
        let f = extract_features(&img, &bank).unwrap();
        assert!(f.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn layout_matches_documented_order() {
        let bank = small_bank(2);
        let d = Dims::new(6, 5, 4).unwrap();
        let img = random_image(2, d, 7);
        let f = extract_features(&img, &bank).unwrap();
        let per = features_per_channel(2);
        for c in 0..2 {
            let ch = img.channel(c);
            let grad = gradient_magnitude(ch).unwrap();
            assert_eq!(&f.channel(c * per), ch);
            assert_eq!(f.channel(c * per + 1), grad);
            for k in 0..2 {
                let kern = &bank.filters()[k].kernel;
                let di = crate::conv::convolve_direct(ch, kern, ConvMode::Same).unwrap();
                let dg = crate::conv::convolve_direct(&grad, kern, ConvMode::Same).unwrap();
                for (a, b) in f.channel(c * per + 2 + k).data().iter().zip(di.data()) {
                    assert!((a - b).abs() <= 1e-10);
                }
                for (a, b) in f.channel(c * per + 4 + k).data().iter().zip(dg.data()) {
                    assert!((a - b).abs() <= 1e-10);
                }
            }
        }
        assert_eq!(f.names()[0], "c0:intensity");
        assert_eq!(f.names()[per + 1], "c1:gradient");
    }

    #[test]
    fn extraction_is_reproducible() {
        let bank = small_bank(2);
        let img = random_image(1, Dims::cube(5).unwrap(), 3);
        assert_eq!(
            extract_features(&img, &bank).unwrap(),
            extract_features(&img, &bank).unwrap()
        );
    }

    #[test]
    fn gather_rows() {
        let bank = small_bank(1);
        let d = Dims::cube(2).unwrap();
        let f = extract_features(&random_image(1, d, 4), &bank).unwrap();
        let m = gather_voxels(&f, &[(1, 0, 1)]).unwrap();
        assert_eq!(m.row(0), f.at(1, 0, 1));
        let m = gather_voxels(&f, &[(0, 1, 0), (0, 1, 0)]).unwrap();
        assert_eq!(m.row(0), m.row(1));
        let all: Vec<_> = (0..d.len()).map(|i| d.coords(i)).collect();
        let m = gather_voxels(&f, &all).unwrap();
        assert_eq!((m.rows, m.cols), (8, 4));
        for (i, &(x, y, z)) in all.iter().enumerate() {
            for j in 0..4 {
                assert_eq!(m.row(i)[j], f.data()[(x + 2 * (y + 2 * z)) * 4 + j]);
            }
        }
        assert!(gather_voxels(&f, &[(2, 0, 0)]).is_err());
    }

    #[test]
    fn normalize_names_failing_channel() {
        let d = Dims::cube(3).unwrap();
        let img = MultiChannelVolume::new(
            vec![Volume3D::filled(d, 1.0)],
            vec!["flair".into()],
        )
        .unwrap();
        let err = normalize_channels(&img).unwrap_err().to_string();
        assert!(err.contains("flair"), "{err}");
    }
}
