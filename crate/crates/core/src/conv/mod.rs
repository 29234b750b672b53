//! True 3-D linear convolution.
//!
//! `(I * f)[p] = sum_t I[t] * f[p - t]` with out-of-range samples treated as
//! zero. [`convolve_direct`] evaluates the sum literally; [`convolve_fft`]
//! goes through the frequency domain and agrees with it to rounding.

mod direct;
mod fft;

pub use direct::convolve_direct;
pub use fft::{convolve_fft, next_fast_len, FftConvolver, Spectrum};

use rayon::prelude::*;

use crate::dog::FilterBank;
use crate::error::{Error, Result};
use crate::volume::{Dims, MultiChannelVolume, Volume3D};

/// Which part of the full linear convolution to return.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConvMode {
    /// Output has the image dims, cropped around the kernel center.
    /// Requires odd kernel dims.
    Same,
    /// Output has dims `n + m - 1` per axis.
    Full,
}

/// Crop of the full convolution grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Window {
    pub offset: [usize; 3],
    pub dims: Dims,
}

pub(crate) fn output_window(image: Dims, filter: Dims, mode: ConvMode) -> Result<Window> {
    match mode {
        ConvMode::Full => Ok(Window {
            offset: [0; 3],
            dims: Dims::new(
                image.nx + filter.nx - 1,
                image.ny + filter.ny - 1,
                image.nz + filter.nz - 1,
            )?,
        }),
        ConvMode::Same => {
            if filter.nx % 2 == 0 || filter.ny % 2 == 0 || filter.nz % 2 == 0 {
                return Err(Error::invalid(format!(
                    "same-mode convolution needs odd kernel dims, got {filter}"
                )));
            }
            Ok(Window {
                offset: [filter.nx / 2, filter.ny / 2, filter.nz / 2],
                dims: image,
            })
        }
    }
}

/// Output dims for `mode` without computing anything.
pub fn output_dims(image: Dims, filter: Dims, mode: ConvMode) -> Result<Dims> {
    output_window(image, filter, mode).map(|w| w.dims)
}

/// Convolves every image with every filter.
///
/// Results are image-major: entry `i * filters.len() + j` is
/// `images[i] * filters[j]`. Each filter and each image is transformed once.
/// Pairs are independent, so the parallel schedule does not affect results.
pub fn convolve_many(
    images: &[&Volume3D],
    filters: &[&Volume3D],
    mode: ConvMode,
) -> Result<Vec<Volume3D>> {
    let (Some(first_img), Some(first_filter)) = (images.first(), filters.first()) else {
        return Err(Error::invalid("convolve_many needs at least one image and one filter"));
    };
    let idims = first_img.dims();
    let fdims = first_filter.dims();
    if let Some(bad) = images.iter().find(|v| v.dims() != idims) {
        return Err(Error::invalid(format!(
            "images must share dims: {} vs {idims}",
            bad.dims()
        )));
    }
    if let Some(bad) = filters.iter().find(|v| v.dims() != fdims) {
        return Err(Error::invalid(format!(
            "filters must share dims: {} vs {fdims}",
            bad.dims()
        )));
    }
    output_window(idims, fdims, mode)?;

    let plan = FftConvolver::for_shapes(idims, fdims)?;
    let filter_spectra = filters
        .par_iter()
        .map(|f| plan.forward(f))
        .collect::<Result<Vec<_>>>()?;

    let mut out = Vec::with_capacity(images.len() * filters.len());
    // one image spectrum alive at a time bounds memory at paper scale
    for img in images {
        let spec = plan.forward(img)?;
        let results = filter_spectra
            .par_iter()
            .map(|fs| plan.convolve_spectra(&spec, fs, idims, fdims, mode))
            .collect::<Result<Vec<_>>>()?;
        out.extend(results);
    }
    Ok(out)
}

/// Convolves each channel with each bank filter; channel-major order.
pub fn convolve_bank(
    image: &MultiChannelVolume,
    bank: &FilterBank,
    mode: ConvMode,
) -> Result<Vec<Volume3D>> {
    if bank.is_empty() {
        return Err(Error::invalid("filter bank is empty"));
    }
    let images: Vec<&Volume3D> = image.channels().iter().collect();
    let filters: Vec<&Volume3D> = bank.filters().iter().map(|f| &f.kernel).collect();
    convolve_many(&images, &filters, mode)
}
