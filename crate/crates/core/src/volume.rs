//! Dense 3-D volume containers and voxel-level operations.
//!
//! All volumes store their samples in x-fastest linear order:
//! `index(x, y, z) = x + nx * (y + ny * z)`.

use crate::error::{Error, Result};

/// Voxel counts along each axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::invalid(format!(
                "volume dims must be positive, got {nx}x{ny}x{nz}"
            )));
        }
        Ok(Dims { nx, ny, nz })
    }

    pub fn cube(n: usize) -> Result<Self> {
        Self::new(n, n, n)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Voxel count, or `None` if it overflows `usize`.
    pub fn checked_len(&self) -> Option<usize> {
        self.nx.checked_mul(self.ny)?.checked_mul(self.nz)
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        debug_assert!(x < self.nx && y < self.ny && z < self.nz);
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let x = idx % self.nx;
        let rest = idx / self.nx;
        (x, rest % self.ny, rest / self.ny)
    }

    pub fn contains(&self, x: usize, y: usize, z: usize) -> bool {
        x < self.nx && y < self.ny && z < self.nz
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

/// A dense scalar volume.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume3D {
    dims: Dims,
    data: Vec<f64>,
}

impl Volume3D {
    pub fn zeros(dims: Dims) -> Self {
        Volume3D {
            dims,
            data: vec![0.0; dims.len()],
        }
    }

    pub fn filled(dims: Dims, value: f64) -> Self {
        Volume3D {
            dims,
            data: vec![value; dims.len()],
        }
    }

    /// Wraps `data`, checking its length and that every sample is finite.
    pub fn from_vec(dims: Dims, data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::invalid(format!(
                "volume {dims} needs {} samples, got {}",
                dims.len(),
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite sample {} at voxel {:?}",
                data[i],
                dims.coords(i)
            )));
        }
        Ok(Volume3D { dims, data })
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dims.len());
        for z in 0..dims.nz {
            for y in 0..dims.ny {
                for x in 0..dims.nx {
                    data.push(f(x, y, z));
                }
            }
        }
        Volume3D { dims, data }
    }

    /// Used by kernels whose arithmetic cannot produce non-finite values
    /// from finite inputs.
    pub(crate) fn from_vec_unchecked(dims: Dims, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dims.len());
        Volume3D { dims, data }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.dims.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, value: f64) {
        let i = self.dims.index(x, y, z);
        self.data[i] = value;
    }

    /// Compensated (Neumaier) sum of all samples.
    pub fn sum(&self) -> f64 {
        compensated_sum(self.data.iter().copied())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Volume3D {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// An ordered set of co-registered channels sharing one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiChannelVolume {
    channels: Vec<Volume3D>,
    names: Vec<String>,
}

impl MultiChannelVolume {
    pub fn new(channels: Vec<Volume3D>, names: Vec<String>) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| Error::invalid("multi-channel volume needs at least one channel"))?;
        if names.len() != channels.len() {
            return Err(Error::invalid(format!(
                "{} channels but {} channel names",
                channels.len(),
                names.len()
            )));
        }
        let dims = first.dims();
        for (c, name) in channels.iter().zip(&names) {
            if c.dims() != dims {
                return Err(Error::invalid(format!(
                    "channel '{name}' has dims {}, expected {dims}",
                    c.dims()
                )));
            }
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(Error::invalid(format!("duplicate channel name '{name}'")));
            }
        }
        Ok(MultiChannelVolume { channels, names })
    }

    /// Names channels `c0`, `c1`, ...
    pub fn unnamed(channels: Vec<Volume3D>) -> Result<Self> {
        let names = (0..channels.len()).map(|i| format!("c{i}")).collect();
        Self::new(channels, names)
    }

    pub fn dims(&self) -> Dims {
        self.channels[0].dims()
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn channels(&self) -> &[Volume3D] {
        &self.channels
    }

    pub fn channel(&self, i: usize) -> &Volume3D {
        &self.channels[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn into_parts(self) -> (Vec<Volume3D>, Vec<String>) {
        (self.channels, self.names)
    }
}

/// Tumor class of a voxel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum TissueClass {
    NonTumor = 0,
    Necrosis = 1,
    Edema = 2,
    NonEnhancing = 3,
    Enhancing = 4,
}

impl TissueClass {
    pub const ALL: [TissueClass; 5] = [
        TissueClass::NonTumor,
        TissueClass::Necrosis,
        TissueClass::Edema,
        TissueClass::NonEnhancing,
        TissueClass::Enhancing,
    ];

    pub const COUNT: usize = 5;

    pub fn from_label(label: u8) -> Option<Self> {
        Self::ALL.get(label as usize).copied()
    }

    pub fn label(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            TissueClass::NonTumor => "non-tumor",
            TissueClass::Necrosis => "necrosis",
            TissueClass::Edema => "edema",
            TissueClass::NonEnhancing => "non-enhancing",
            TissueClass::Enhancing => "enhancing",
        }
    }
}

/// Per-voxel class labels in `0..=4`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelVolume {
    dims: Dims,
    labels: Vec<u8>,
}

impl LabelVolume {
    pub fn new(dims: Dims, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != dims.len() {
            return Err(Error::invalid(format!(
                "label volume {dims} needs {} labels, got {}",
                dims.len(),
                labels.len()
            )));
        }
        if let Some(i) = labels.iter().position(|&l| l as usize >= TissueClass::COUNT) {
            return Err(Error::invalid(format!(
                "label {} at voxel {:?} is outside 0..=4",
                labels[i],
                dims.coords(i)
            )));
        }
        Ok(LabelVolume { dims, labels })
    }

    pub fn filled(dims: Dims, class: TissueClass) -> Self {
        LabelVolume {
            dims,
            labels: vec![class.label(); dims.len()],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> u8 {
        self.labels[self.dims.index(x, y, z)]
    }

    /// Voxel count per class, indexed by label.
    pub fn histogram(&self) -> [usize; TissueClass::COUNT] {
        let mut h = [0; TissueClass::COUNT];
        for &l in &self.labels {
            h[l as usize] += 1;
        }
        h
    }
}

/// A boolean voxel mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    dims: Dims,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(dims: Dims, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != dims.len() {
            return Err(Error::invalid(format!(
                "mask {dims} needs {} voxels, got {}",
                dims.len(),
                bits.len()
            )));
        }
        Ok(Mask { dims, bits })
    }

    pub fn from_predicate(v: &Volume3D, pred: impl Fn(f64) -> bool) -> Self {
        Mask {
            dims: v.dims(),
            bits: v.data().iter().map(|&x| pred(x)).collect(),
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Gradient magnitude with unit voxel spacing.
///
/// Interior voxels use central differences `(I[i+1] - I[i-1]) / 2`; the
/// first and last voxel along each axis use one-sided differences.
pub fn gradient_magnitude(v: &Volume3D) -> Result<Volume3D> {
    let d = v.dims();
    if d.nx < 2 || d.ny < 2 || d.nz < 2 {
        return Err(Error::invalid(format!(
            "gradient needs at least 2 voxels on every axis, got {d}"
        )));
    }
    let data = v.data();
    let sx = 1;
    let sy = d.nx;
    let sz = d.nx * d.ny;

    #[inline]
    fn diff(data: &[f64], i: usize, pos: usize, n: usize, stride: usize) -> f64 {
        if pos == 0 {
            data[i + stride] - data[i]
        } else if pos == n - 1 {
            data[i] - data[i - stride]
        } else {
            0.5 * (data[i + stride] - data[i - stride])
        }
    }

    let mut out = Vec::with_capacity(d.len());
    for z in 0..d.nz {
        for y in 0..d.ny {
            for x in 0..d.nx {
                let i = d.index(x, y, z);
                let gx = diff(data, i, x, d.nx, sx);
                let gy = diff(data, i, y, d.ny, sy);
                let gz = diff(data, i, z, d.nz, sz);
                out.push((gx * gx + gy * gy + gz * gz).sqrt());
            }
        }
    }
    Ok(Volume3D::from_vec_unchecked(d, out))
}

/// Z-score standardization over a mask.
///
/// Without an explicit mask the nonzero voxels are used, which on
/// skull-stripped scans approximates the brain. Voxels outside the mask are
/// set to zero. Uses the population standard deviation.
pub fn zscore_normalize(v: &Volume3D, mask: Option<&Mask>) -> Result<Volume3D> {
    let owned;
    let mask = match mask {
        Some(m) => {
            if m.dims() != v.dims() {
                return Err(Error::invalid(format!(
                    "mask dims {} differ from volume dims {}",
                    m.dims(),
                    v.dims()
                )));
            }
            m
        }
        None => {
            owned = Mask::from_predicate(v, |x| x != 0.0);
            &owned
        }
    };
    let n = mask.count();
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "normalization mask selects {n} voxel(s), need at least 2"
        )));
    }
    let selected = || {
        v.data()
            .iter()
            .zip(mask.bits())
            .filter_map(|(&x, &b)| b.then_some(x))
    };
    let mean = selected().sum::<f64>() / n as f64;
    let var = selected().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    if !(std > 0.0) || !std.is_finite() {
        return Err(Error::Degenerate(
            "zero variance over normalization mask".into(),
        ));
    }
    let out = v
        .data()
        .iter()
        .zip(mask.bits())
        .map(|(&x, &b)| if b { (x - mean) / std } else { 0.0 })
        .collect();
    Ok(Volume3D::from_vec_unchecked(v.dims(), out))
}
