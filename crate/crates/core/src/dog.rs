//! Analytic 3-D Difference-of-Gaussian filter bank.
//!
//! Each filter is `G(sigma) - G(sigma / sqrt 2)` where `G(s)` is the
//! normalized isotropic Gaussian `(2 pi s^2)^(-3/2) exp(-r^2 / (2 s^2))`,
//! sampled at integer offsets from the middle voxel of an odd cube.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Dims, Volume3D};

pub const DEFAULT_SUPPORT: usize = 33;

/// `sqrt(2)^k` for `k = 1..=8`: sqrt 2, 2, 2 sqrt 2, ..., 16.
pub fn default_sigmas() -> Vec<f64> {
    (1..=8)
        .map(|k: i32| {
            let pow2 = f64::from(1u32 << (k / 2));
            if k % 2 == 0 {
                pow2
            } else {
                SQRT_2 * pow2
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DoGSpec {
    pub sigmas: Vec<f64>,
    pub support: usize,
    /// Normalize each Gaussian term to unit discrete sum so the filter sums
    /// to zero after truncation.
    pub zero_dc: bool,
}

impl Default for DoGSpec {
    fn default() -> Self {
        DoGSpec {
            sigmas: default_sigmas(),
            support: DEFAULT_SUPPORT,
            zero_dc: true,
        }
    }
}

impl DoGSpec {
    pub fn validate(&self) -> Result<()> {
        check_support(self.support)?;
        if self.sigmas.is_empty() {
            return Err(Error::invalid("DoG spec needs at least one sigma"));
        }
        for s in &self.sigmas {
            check_sigma(*s)?;
        }
        if let Some(w) = self.sigmas.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::invalid(format!(
                "sigmas must be strictly increasing, got {} then {}",
                w[0], w[1]
            )));
        }
        Ok(())
    }
}

fn check_support(support: usize) -> Result<()> {
    if support % 2 == 0 {
        return Err(Error::invalid(format!(
            "filter support must be odd and positive, got {support}"
        )));
    }
    Ok(())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    Ok(())
}

/// Samples `f(r^2)` on a `support^3` grid centered at the middle voxel.
///
/// Values depend only on the integer `r^2`, so all signed coordinate
/// permutations of an offset receive bit-identical samples.
fn radial(support: usize, f: impl Fn(f64) -> f64) -> Volume3D {
    let c = (support / 2) as i64;
    let max_r2 = 3 * c * c;
    let table: Vec<f64> = (0..=max_r2).map(|r2| f(r2 as f64)).collect();
    let dims = Dims::cube(support).expect("support is positive");
    Volume3D::from_fn(dims, |x, y, z| {
        let (dx, dy, dz) = (x as i64 - c, y as i64 - c, z as i64 - c);
        table[(dx * dx + dy * dy + dz * dz) as usize]
    })
}

/// Sampled normalized 3-D Gaussian; optionally rescaled to unit discrete sum.
pub fn gaussian3d(sigma: f64, support: usize, normalized_discrete: bool) -> Result<Volume3D> {
    check_sigma(sigma)?;
    check_support(support)?;
    let norm = (2.0 * PI * sigma * sigma).powf(-1.5);
    let denom = 2.0 * sigma * sigma;
    let g = radial(support, |r2| norm * (-r2 / denom).exp());
    if normalized_discrete {
        let s = g.sum();
        if !(s > 0.0) {
            return Err(Error::Degenerate(format!(
                "gaussian sigma={sigma} underflows on support {support}"
            )));
        }
        Ok(g.map(|v| v / s))
    } else {
        Ok(g)
    }
}

/// `G(sigma) - G(sigma / sqrt 2)`.
///
/// With `zero_dc` both terms are first normalized to unit discrete sum, so
/// the filter sums to zero and annihilates constant inputs.
pub fn dog_filter(sigma: f64, support: usize, zero_dc: bool) -> Result<Volume3D> {
    let wide = gaussian3d(sigma, support, zero_dc)?;
    let narrow = gaussian3d(sigma / SQRT_2, support, zero_dc)?;
    let data = wide
        .data()
        .iter()
        .zip(narrow.data())
        .map(|(a, b)| a - b)
        .collect();
    Ok(Volume3D::from_vec_unchecked(wide.dims(), data))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Dog,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BankFilter {
    pub kernel: Volume3D,
    pub sigma: f64,
    pub kind: FilterKind,
}

/// An ordered set of equally sized 3-D kernels.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterBank {
    filters: Vec<BankFilter>,
    zero_dc: bool,
}

impl FilterBank {
    pub fn new(filters: Vec<BankFilter>, zero_dc: bool) -> Result<Self> {
        let first = filters
            .first()
            .ok_or_else(|| Error::invalid("filter bank is empty"))?;
        let d = first.kernel.dims();
        if d.nx != d.ny || d.ny != d.nz || d.nx % 2 == 0 {
            return Err(Error::invalid(format!(
                "bank filters must be odd cubes, got {d}"
            )));
        }
        if let Some(bad) = filters.iter().find(|f| f.kernel.dims() != d) {
            return Err(Error::invalid(format!(
                "bank filters must share dims: {} vs {d}",
                bad.kernel.dims()
            )));
        }
        Ok(FilterBank { filters, zero_dc })
    }

    pub fn filters(&self) -> &[BankFilter] {
        &self.filters
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    pub fn support(&self) -> usize {
        self.filters[0].kernel.dims().nx
    }

    pub fn zero_dc(&self) -> bool {
        self.zero_dc
    }

    pub fn sigmas(&self) -> Vec<f64> {
        self.filters.iter().map(|f| f.sigma).collect()
    }
}

/// One DoG filter per sigma, in spec order.
pub fn build_bank(spec: &DoGSpec) -> Result<FilterBank> {
    spec.validate()?;
    let filters = spec
        .sigmas
        .iter()
        .map(|&sigma| {
            Ok(BankFilter {
                kernel: dog_filter(sigma, spec.support, spec.zero_dc)?,
                sigma,
                kind: FilterKind::Dog,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    FilterBank::new(filters, spec.zero_dc)
}
