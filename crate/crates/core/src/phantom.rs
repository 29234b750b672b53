//! Synthetic multi-modal tumor phantoms with known labels.
//!
//! The tumor is a set of concentric spheres inside a spherical "brain":
//! enhancing core, then non-enhancing, necrosis and an edema halo. Voxels
//! outside the brain are exactly zero in every channel. Inside, each voxel
//! gets its class mean for the channel plus Gaussian noise drawn from a
//! ChaCha8 stream seeded with `rng_seed`; the geometry does not depend on
//! the seed or the noise level.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Dims, LabelVolume, MultiChannelVolume, TissueClass, Volume3D};

pub const CHANNEL_NAMES: [&str; 4] = ["t1pre", "t1post", "t2", "flair"];

/// Mean intensity per class (rows, by label) and channel (columns).
pub const DEFAULT_CONTRAST: [[f64; 4]; 5] = [
    [1.0, 1.0, 1.0, 1.0],
    [0.5, 0.6, 2.2, 1.4],
    [0.8, 0.9, 1.8, 2.2],
    [0.7, 1.0, 1.4, 1.7],
    [0.9, 2.4, 1.2, 1.6],
];

/// Radii at the reference size of 64 voxels.
const REFERENCE_EDGE: f64 = 64.0;
const REFERENCE_RADII: TumorRadii = TumorRadii {
    enhancing: 5.0,
    non_enhancing: 8.0,
    necrosis: 11.0,
    edema: 16.0,
    brain: 28.0,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TumorRadii {
    pub enhancing: f64,
    pub non_enhancing: f64,
    pub necrosis: f64,
    pub edema: f64,
    pub brain: f64,
}

impl TumorRadii {
    fn as_array(&self) -> [f64; 5] {
        [self.enhancing, self.non_enhancing, self.necrosis, self.edema, self.brain]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    pub dims: Dims,
    pub rng_seed: u64,
    /// Voxel coordinates; need not be integral.
    pub center: [f64; 3],
    pub radii: TumorRadii,
    /// `contrast[label][channel]`.
    pub contrast: Vec<Vec<f64>>,
    pub channel_names: Vec<String>,
    pub noise_sigma: f64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec::for_dims(Dims { nx: 64, ny: 64, nz: 64 }, 0)
    }
}

impl PhantomSpec {
    /// Centered phantom with radii scaled to the smallest extent.
    pub fn for_dims(dims: Dims, rng_seed: u64) -> Self {
        let scale = dims.nx.min(dims.ny).min(dims.nz) as f64 / REFERENCE_EDGE;
        let r = REFERENCE_RADII;
        PhantomSpec {
            dims,
            rng_seed,
            center: [
                (dims.nx as f64 - 1.0) / 2.0,
                (dims.ny as f64 - 1.0) / 2.0,
                (dims.nz as f64 - 1.0) / 2.0,
            ],
            radii: TumorRadii {
                enhancing: r.enhancing * scale,
                non_enhancing: r.non_enhancing * scale,
                necrosis: r.necrosis * scale,
                edema: r.edema * scale,
                brain: r.brain * scale,
            },
            contrast: DEFAULT_CONTRAST.iter().map(|row| row.to_vec()).collect(),
            channel_names: CHANNEL_NAMES.iter().map(|s| s.to_string()).collect(),
            noise_sigma: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.radii.as_array();
        if r.iter().any(|v| !v.is_finite()) || !(r[0] > 0.0) {
            return Err(Error::invalid(format!("radii must be finite and positive, got {r:?}")));
        }
        if r.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid(format!(
                "radii must increase strictly (enhancing < non-enhancing < necrosis < edema < brain), got {r:?}"
            )));
        }
        let c = self.center;
        let extents = self.dims.as_array();
        for axis in 0..3 {
            let (lo, hi) = (c[axis] - r[4], c[axis] + r[4]);
            if !c[axis].is_finite() || lo < 0.0 || hi > (extents[axis] - 1) as f64 {
                return Err(Error::invalid(format!(
                    "brain sphere (center {:?}, radius {}) exceeds volume {}",
                    c, r[4], self.dims
                )));
            }
        }
        if self.channel_names.is_empty() {
            return Err(Error::invalid("phantom needs at least one channel"));
        }
        if self.contrast.len() != TissueClass::COUNT
            || self.contrast.iter().any(|row| row.len() != self.channel_names.len())
        {
            return Err(Error::invalid(format!(
                "contrast table must be {} classes x {} channels",
                TissueClass::COUNT,
                self.channel_names.len()
            )));
        }
        if self.contrast.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("contrast table has non-finite means"));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::invalid(format!("noise_sigma must be >= 0, got {}", self.noise_sigma)));
        }
        Ok(())
    }

    /// `None` outside the brain.
    pub fn class_at(&self, x: usize, y: usize, z: usize) -> Option<TissueClass> {
        let dx = x as f64 - self.center[0];
        let dy = y as f64 - self.center[1];
        let dz = z as f64 - self.center[2];
        let d2 = dx * dx + dy * dy + dz * dz;
        let r = &self.radii;
        let class = if d2 < r.enhancing * r.enhancing {
            TissueClass::Enhancing
        } else if d2 < r.non_enhancing * r.non_enhancing {
            TissueClass::NonEnhancing
        } else if d2 < r.necrosis * r.necrosis {
            TissueClass::Necrosis
        } else if d2 < r.edema * r.edema {
            TissueClass::Edema
        } else if d2 < r.brain * r.brain {
            TissueClass::NonTumor
        } else {
            return None;
        };
        Some(class)
    }
}

pub fn generate(spec: &PhantomSpec) -> Result<(MultiChannelVolume, LabelVolume)> {
    spec.validate()?;
    let dims = spec.dims;
    let n = dims.len();
    let mut inside = vec![false; n];
    let mut labels = vec![0u8; n];
    for idx in 0..n {
        let (x, y, z) = dims.coords(idx);
        if let Some(c) = spec.class_at(x, y, z) {
            inside[idx] = true;
            labels[idx] = c.label();
        }
    }

    let noise = Normal::new(0.0, spec.noise_sigma).expect("sigma validated");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let mut channels = Vec::with_capacity(spec.channel_names.len());
    for ch in 0..spec.channel_names.len() {
        let mut data = vec![0.0; n];
        for idx in 0..n {
            if inside[idx] {
                let mean = spec.contrast[labels[idx] as usize][ch];
                data[idx] = if spec.noise_sigma > 0.0 {
                    mean + noise.sample(&mut rng)
                } else {
                    mean
                };
            }
        }
        channels.push(Volume3D::from_vec(dims, data)?);
    }
    Ok((
        MultiChannelVolume::new(channels, spec.channel_names.clone())?,
        LabelVolume::new(dims, labels)?,
    ))
}
