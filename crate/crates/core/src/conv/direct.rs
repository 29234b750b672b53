use super::{output_window, ConvMode};
use crate::error::Result;
use crate::volume::Volume3D;

/// Zero-padded linear convolution evaluated in the spatial domain.
///
/// Cost is `O(m^3 * n^3)`. This is the reference the FFT path is checked
/// against.
pub fn convolve_direct(image: &Volume3D, filter: &Volume3D, mode: ConvMode) -> Result<Volume3D> {
    let win = output_window(image.dims(), filter.dims(), mode)?;
    let n = image.dims();
    let m = filter.dims();
    let o = win.dims;
    let img = image.data();
    let mut out = vec![0.0; o.len()];

    for kz in 0..m.nz {
        // image z = off + q - k must lie in [0, nz)
        let Some((qz0, qz1)) = valid_range(win.offset[2], kz, n.nz, o.nz) else {
            continue;
        };
        for ky in 0..m.ny {
            let Some((qy0, qy1)) = valid_range(win.offset[1], ky, n.ny, o.ny) else {
                continue;
            };
            for kx in 0..m.nx {
                let Some((qx0, qx1)) = valid_range(win.offset[0], kx, n.nx, o.nx) else {
                    continue;
                };
                let weight = filter.get(kx, ky, kz);
                if weight == 0.0 {
                    continue;
                }
                let ix0 = win.offset[0] + qx0 - kx;
                let run = qx1 - qx0;
                for qz in qz0..qz1 {
                    let iz = win.offset[2] + qz - kz;
                    for qy in qy0..qy1 {
                        let iy = win.offset[1] + qy - ky;
                        let src = &img[n.index(ix0, iy, iz)..][..run];
                        let dst = &mut out[o.index(qx0, qy, qz)..][..run];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += weight * s;
                        }
                    }
                }
            }
        }
    }
    Ok(Volume3D::from_vec_unchecked(o, out))
}

/// Output positions `q` in `[0, out_len)` such that `offset + q - k` is a
/// valid image index in `[0, n)`.
#[inline]
fn valid_range(offset: usize, k: usize, n: usize, out_len: usize) -> Option<(usize, usize)> {
    // offset + q - k >= 0  <=>  q >= k - offset
    let lo = k.saturating_sub(offset);
    // offset + q - k < n  <=>  q < n + k - offset
    let hi = (n + k).checked_sub(offset)?.min(out_len);
    (lo < hi).then_some((lo, hi))
}
