//! 3-D real-input FFT convolution.
//!
//! The x axis uses a real-to-complex transform, so spectra hold
//! `(px / 2 + 1) * py * pz` complex coefficients; y and z use complex
//! transforms along strided lines.

use std::sync::Arc;

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{output_window, ConvMode, Window};
use crate::error::{Error, Result};
use crate::volume::{Dims, Volume3D};

/// Smallest `m >= n` whose prime factors are all in {2, 3, 5, 7}.
pub fn next_fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5, 7] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Forward transform of a zero-padded real volume.
#[derive(Clone, Debug)]
pub struct Spectrum {
    padded: Dims,
    data: Vec<Complex64>,
}

impl Spectrum {
    pub fn padded_dims(&self) -> Dims {
        self.padded
    }

    /// In-place element-wise product.
    fn mul_assign(&mut self, other: &Spectrum) {
        debug_assert_eq!(self.padded, other.padded);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a *= b;
        }
    }
}

/// FFT plans for one padded grid size, reusable across many convolutions.
pub struct FftConvolver {
    padded: Dims,
    half_x: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
    fwd_z: Arc<dyn Fft<f64>>,
    inv_z: Arc<dyn Fft<f64>>,
}

impl FftConvolver {
    /// Plans for linear convolution of `image`-sized inputs with
    /// `filter`-sized kernels.
    pub fn for_shapes(image: Dims, filter: Dims) -> Result<Self> {
        let full = |n: usize, m: usize| {
            n.checked_add(m - 1)
                .map(next_fast_len)
                .ok_or_else(|| Error::Resource(format!("padded size overflows for {n}+{m}")))
        };
        let padded = Dims::new(
            full(image.nx, filter.nx)?,
            full(image.ny, filter.ny)?,
            full(image.nz, filter.nz)?,
        )?;
        Self::new(padded)
    }

    pub fn new(padded: Dims) -> Result<Self> {
        let half_x = padded.nx / 2 + 1;
        half_x
            .checked_mul(padded.ny)
            .and_then(|v| v.checked_mul(padded.nz))
            .and_then(|v| v.checked_mul(std::mem::size_of::<Complex64>()))
            .filter(|&bytes| bytes <= isize::MAX as usize)
            .ok_or_else(|| Error::Resource(format!("spectrum for padded grid {padded} is too large")))?;
        let mut rp = RealFftPlanner::<f64>::new();
        let mut cp = FftPlanner::<f64>::new();
        Ok(FftConvolver {
            padded,
            half_x,
            r2c: rp.plan_fft_forward(padded.nx),
            c2r: rp.plan_fft_inverse(padded.nx),
            fwd_y: cp.plan_fft_forward(padded.ny),
            inv_y: cp.plan_fft_inverse(padded.ny),
            fwd_z: cp.plan_fft_forward(padded.nz),
            inv_z: cp.plan_fft_inverse(padded.nz),
        })
    }

    pub fn padded_dims(&self) -> Dims {
        self.padded
    }

    fn spectrum_len(&self) -> usize {
        self.half_x * self.padded.ny * self.padded.nz
    }

    fn alloc_spectrum(&self) -> Result<Vec<Complex64>> {
        let len = self.spectrum_len();
        let mut v = Vec::new();
        v.try_reserve_exact(len).map_err(|e| {
            Error::Resource(format!(
                "cannot allocate {len} spectrum coefficients for {}: {e}",
                self.padded
            ))
        })?;
        v.resize(len, Complex64::new(0.0, 0.0));
        Ok(v)
    }

    /// Zero-pads `v` to the planned grid and transforms it.
    pub fn forward(&self, v: &Volume3D) -> Result<Spectrum> {
        let d = v.dims();
        let p = self.padded;
        if d.nx > p.nx || d.ny > p.ny || d.nz > p.nz {
            return Err(Error::invalid(format!(
                "volume {d} does not fit padded grid {p}"
            )));
        }
        let hx = self.half_x;
        let mut data = self.alloc_spectrum()?;

        // x: real-to-complex on the rows that carry data
        let mut line = self.r2c.make_input_vec();
        let mut scratch = self.r2c.make_scratch_vec();
        for z in 0..d.nz {
            for y in 0..d.ny {
                line.fill(0.0);
                let src = &v.data()[d.index(0, y, z)..][..d.nx];
                line[..d.nx].copy_from_slice(src);
                let row = (y + p.ny * z) * hx;
                self.r2c
                    .process_with_scratch(&mut line, &mut data[row..row + hx], &mut scratch)
                    .map_err(|e| Error::Resource(format!("real FFT failed: {e}")))?;
            }
        }

        // y: only planes z < nz are nonzero so far
        let mut col = vec![Complex64::new(0.0, 0.0); p.ny];
        let mut cscratch =
            vec![Complex64::new(0.0, 0.0); self.fwd_y.get_inplace_scratch_len().max(self.fwd_z.get_inplace_scratch_len())];
        for z in 0..d.nz {
            let plane = z * p.ny * hx;
            for kx in 0..hx {
                for (y, c) in col.iter_mut().enumerate() {
                    *c = data[plane + y * hx + kx];
                }
                self.fwd_y.process_with_scratch(&mut col, &mut cscratch);
                for (y, c) in col.iter().enumerate() {
                    data[plane + y * hx + kx] = *c;
                }
            }
        }

        self.z_pass(&mut data, &self.fwd_z, &mut cscratch);
        Ok(Spectrum { padded: p, data })
    }

    fn z_pass(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>, scratch: &mut Vec<Complex64>) {
        let p = self.padded;
        let hx = self.half_x;
        let stride = p.ny * hx;
        // gather a block of adjacent x-columns at once for locality
        const BLOCK: usize = 8;
        let mut block = vec![Complex64::new(0.0, 0.0); BLOCK * p.nz];
        scratch.resize(fft.get_inplace_scratch_len().max(scratch.len()), Complex64::new(0.0, 0.0));
        for y in 0..p.ny {
            let mut kx = 0;
            while kx < hx {
                let w = BLOCK.min(hx - kx);
                let base = y * hx + kx;
                for z in 0..p.nz {
                    let src = &data[base + z * stride..][..w];
                    for (j, s) in src.iter().enumerate() {
                        block[j * p.nz + z] = *s;
                    }
                }
                fft.process_with_scratch(&mut block[..w * p.nz], scratch);
                for z in 0..p.nz {
                    let dst = &mut data[base + z * stride..][..w];
                    for (j, d) in dst.iter_mut().enumerate() {
                        *d = block[j * p.nz + z];
                    }
                }
                kx += w;
            }
        }
    }

    /// Inverse transform, returning only the voxels inside `win`.
    fn inverse_window(&self, mut spec: Spectrum, win: &Window) -> Result<Volume3D> {
        let p = self.padded;
        let hx = self.half_x;
        let mut cscratch = vec![
            Complex64::new(0.0, 0.0);
            self.inv_y.get_inplace_scratch_len().max(self.inv_z.get_inplace_scratch_len())
        ];
        self.z_pass(&mut spec.data, &self.inv_z, &mut cscratch);

        let data = &mut spec.data;
        let (z0, z1) = (win.offset[2], win.offset[2] + win.dims.nz);
        let (y0, y1) = (win.offset[1], win.offset[1] + win.dims.ny);
        let mut col = vec![Complex64::new(0.0, 0.0); p.ny];
        for z in z0..z1 {
            let plane = z * p.ny * hx;
            for kx in 0..hx {
                for (y, c) in col.iter_mut().enumerate() {
                    *c = data[plane + y * hx + kx];
                }
                self.inv_y.process_with_scratch(&mut col, &mut cscratch);
                for (y, c) in col.iter().enumerate() {
                    data[plane + y * hx + kx] = *c;
                }
            }
        }

        let scale = 1.0 / (p.nx * p.ny * p.nz) as f64;
        let o = win.dims;
        let mut out = vec![0.0; o.len()];
        let mut line = self.c2r.make_output_vec();
        let mut rscratch = self.c2r.make_scratch_vec();
        let mut row = vec![Complex64::new(0.0, 0.0); hx];
        for z in z0..z1 {
            for y in y0..y1 {
                let start = (y + p.ny * z) * hx;
                row.copy_from_slice(&data[start..start + hx]);
                // Hermitian symmetry makes these exactly real; drop rounding.
                row[0].im = 0.0;
                if p.nx % 2 == 0 {
                    row[hx - 1].im = 0.0;
                }
                self.c2r
                    .process_with_scratch(&mut row, &mut line, &mut rscratch)
                    .map_err(|e| Error::Resource(format!("inverse real FFT failed: {e}")))?;
                let dst = &mut out[o.index(0, y - y0, z - z0)..][..o.nx];
                for (d, s) in dst.iter_mut().zip(&line[win.offset[0]..win.offset[0] + o.nx]) {
                    *d = s * scale;
                }
            }
        }
        Ok(Volume3D::from_vec_unchecked(o, out))
    }

    /// Multiplies two spectra and returns the cropped spatial result.
    pub fn convolve_spectra(
        &self,
        image: &Spectrum,
        filter: &Spectrum,
        image_dims: Dims,
        filter_dims: Dims,
        mode: ConvMode,
    ) -> Result<Volume3D> {
        let win = output_window(image_dims, filter_dims, mode)?;
        if image.padded != self.padded || filter.padded != self.padded {
            return Err(Error::invalid("spectra were planned for a different grid"));
        }
        let mut prod = image.clone();
        prod.mul_assign(filter);
        self.inverse_window(prod, &win)
    }
}

/// Linear convolution through the frequency domain.
///
/// Both operands are zero-padded to at least `n + m - 1` per axis, rounded
/// up to a 7-smooth length, so the circular product equals the linear one.
pub fn convolve_fft(image: &Volume3D, filter: &Volume3D, mode: ConvMode) -> Result<Volume3D> {
    // validate mode before planning
    output_window(image.dims(), filter.dims(), mode)?;
    let plan = FftConvolver::for_shapes(image.dims(), filter.dims())?;
    let si = plan.forward(image)?;
    let sf = plan.forward(filter)?;
    plan.convolve_spectra(&si, &sf, image.dims(), filter.dims(), mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_lengths() {
        assert_eq!(next_fast_len(1), 1);
        assert_eq!(next_fast_len(11), 12);
        assert_eq!(next_fast_len(13), 14);
        assert_eq!(next_fast_len(17), 18);
        assert_eq!(next_fast_len(96), 96);
        assert_eq!(next_fast_len(97), 98);
        assert_eq!(next_fast_len(272), 280);
    }

    #[test]
    fn pathological_grid_is_resource_error() {
        let huge = Dims::new(1 << 30, 1 << 30, 1 << 30).unwrap();
        assert!(matches!(FftConvolver::new(huge), Err(Error::Resource(_))));
    }
}
