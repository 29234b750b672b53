//! Minimal NIfTI-1 single-file (`.nii`) reader.
//!
//! Supports uncompressed files with datatype u8 (2), i16 (4) or f32 (16),
//! in either byte order. Orientation fields are parsed and returned but not
//! used for computation.

use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::{Dims, LabelVolume, Volume3D};

pub const HEADER_SIZE: usize = 348;
pub const MAGIC_SINGLE_FILE: &[u8; 4] = b"n+1\0";

const DT_UINT8: i16 = 2;
const DT_INT16: i16 = 4;
const DT_FLOAT32: i16 = 16;

/// Header fields retained alongside the voxel data.
#[derive(Clone, Debug, PartialEq)]
pub struct NiftiMeta {
    pub little_endian: bool,
    pub datatype: i16,
    pub pixdim: [f32; 3],
    pub vox_offset: usize,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub qform_code: i16,
    pub sform_code: i16,
    /// quatern_b, quatern_c, quatern_d, qoffset_x, qoffset_y, qoffset_z
    pub quatern: [f32; 6],
    pub srow: [[f32; 4]; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct NiftiVolume {
    pub volume: Volume3D,
    pub meta: NiftiMeta,
}

struct Reader<'a> {
    bytes: &'a [u8],
    le: bool,
}

impl Reader<'_> {
    fn i16(&self, o: usize) -> i16 {
        let b = [self.bytes[o], self.bytes[o + 1]];
        if self.le {
            i16::from_le_bytes(b)
        } else {
            i16::from_be_bytes(b)
        }
    }

    fn i32(&self, o: usize) -> i32 {
        let b: [u8; 4] = self.bytes[o..o + 4].try_into().expect("4 bytes");
        if self.le {
            i32::from_le_bytes(b)
        } else {
            i32::from_be_bytes(b)
        }
    }

    fn f32(&self, o: usize) -> f32 {
        f32::from_bits(self.i32(o) as u32)
    }
}

fn unsupported(field: &'static str, message: impl Into<String>) -> Error {
    Error::UnsupportedFormat {
        field,
        message: message.into(),
    }
}

/// Parses an in-memory `.nii` file.
pub fn parse_nifti1(bytes: &[u8]) -> Result<NiftiVolume> {
    if bytes.starts_with(&[0x1f, 0x8b]) {
        return Err(unsupported(
            "compression",
            "gzip-compressed NIfTI is not supported; decompress first",
        ));
    }
    if bytes.len() < HEADER_SIZE {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated NIfTI header: expected {HEADER_SIZE} bytes, found {}", bytes.len()),
        ));
    }
    let le_size = i32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes"));
    let be_size = i32::from_be_bytes(bytes[0..4].try_into().expect("4 bytes"));
    let le = if le_size == HEADER_SIZE as i32 {
        true
    } else if be_size == HEADER_SIZE as i32 {
        false
    } else {
        return Err(unsupported(
            "sizeof_hdr",
            format!("expected 348, found {le_size}"),
        ));
    };
    let r = Reader { bytes, le };

    if &bytes[344..348] != MAGIC_SINGLE_FILE {
        return Err(unsupported(
            "magic",
            format!(
                "expected \"n+1\\0\" (single-file NIfTI-1), found {:?}",
                String::from_utf8_lossy(&bytes[344..348])
            ),
        ));
    }

    let mut dim = [0i16; 8];
    for (i, d) in dim.iter_mut().enumerate() {
        *d = r.i16(40 + 2 * i);
    }
    let ndim = dim[0];
    if !(1..=7).contains(&ndim) {
        return Err(unsupported("dim", format!("dim[0] = {ndim} is outside 1..=7")));
    }
    let mut extents = [1usize; 3];
    for axis in 1..=ndim as usize {
        let n = dim[axis];
        if n < 1 {
            return Err(unsupported("dim", format!("dim[{axis}] = {n} must be >= 1")));
        }
        if axis <= 3 {
            extents[axis - 1] = n as usize;
        } else if n != 1 {
            return Err(unsupported(
                "dim",
                format!("only 3-D volumes are supported, dim[{axis}] = {n}"),
            ));
        }
    }
    let dims = Dims::new(extents[0], extents[1], extents[2])?;

    let datatype = r.i16(70);
    let bitpix = r.i16(72);
    let (size, expected_bitpix) = match datatype {
        DT_UINT8 => (1usize, 8),
        DT_INT16 => (2, 16),
        DT_FLOAT32 => (4, 32),
        other => {
            return Err(unsupported(
                "datatype",
                format!("datatype {other} not supported (u8=2, i16=4, f32=16)"),
            ))
        }
    };
    if bitpix != expected_bitpix {
        return Err(unsupported(
            "bitpix",
            format!("bitpix {bitpix} does not match datatype {datatype}"),
        ));
    }

    let vox_offset_f = r.f32(108);
    if !(vox_offset_f >= HEADER_SIZE as f32) || vox_offset_f.fract() != 0.0 || vox_offset_f > 1e12 {
        return Err(unsupported(
            "vox_offset",
            format!("vox_offset {vox_offset_f} must be an integer >= 348"),
        ));
    }
    let vox_offset = vox_offset_f as usize;
    let need = dims
        .len()
        .checked_mul(size)
        .and_then(|n| n.checked_add(vox_offset))
        .ok_or_else(|| Error::format(40, "declared volume size overflows"))?;
    if bytes.len() < need {
        return Err(Error::format(
            bytes.len() as u64,
            format!(
                "truncated NIfTI data: expected {} bytes from offset {vox_offset}, found {}",
                need - vox_offset,
                bytes.len().saturating_sub(vox_offset)
            ),
        ));
    }

    let scl_slope = r.f32(112);
    let scl_inter = r.f32(116);
    // slope 0 (or non-finite) means unscaled
    let scaled = scl_slope != 0.0 && scl_slope.is_finite();
    let inter = if scaled && scl_inter.is_finite() { f64::from(scl_inter) } else { 0.0 };
    let slope = f64::from(scl_slope);

    let payload = &bytes[vox_offset..need];
    let mut data = Vec::with_capacity(dims.len());
    for i in 0..dims.len() {
        let raw = match datatype {
            DT_UINT8 => f64::from(payload[i]),
            DT_INT16 => f64::from(r_payload_i16(payload, i, le)),
            _ => f64::from(r_payload_f32(payload, i, le)),
        };
        data.push(if scaled { raw * slope + inter } else { raw });
    }
    let volume = Volume3D::from_vec(dims, data).map_err(|e| match e {
        Error::InvalidInput(m) => unsupported("data", m),
        other => other,
    })?;

    let mut quatern = [0f32; 6];
    for (i, q) in quatern.iter_mut().enumerate() {
        *q = r.f32(256 + 4 * i);
    }
    let mut srow = [[0f32; 4]; 3];
    for (row, s) in srow.iter_mut().enumerate() {
        for (c, v) in s.iter_mut().enumerate() {
            *v = r.f32(280 + 16 * row + 4 * c);
        }
    }
    let meta = NiftiMeta {
        little_endian: le,
        datatype,
        pixdim: [r.f32(80), r.f32(84), r.f32(88)],
        vox_offset,
        scl_slope,
        scl_inter,
        qform_code: r.i16(252),
        sform_code: r.i16(254),
        quatern,
        srow,
    };
    Ok(NiftiVolume { volume, meta })
}

fn r_payload_i16(p: &[u8], i: usize, le: bool) -> i16 {
    let b = [p[2 * i], p[2 * i + 1]];
    if le {
        i16::from_le_bytes(b)
    } else {
        i16::from_be_bytes(b)
    }
}

fn r_payload_f32(p: &[u8], i: usize, le: bool) -> f32 {
    let b: [u8; 4] = p[4 * i..4 * i + 4].try_into().expect("4 bytes");
    if le {
        f32::from_le_bytes(b)
    } else {
        f32::from_be_bytes(b)
    }
}

pub fn read_nifti1(path: impl AsRef<Path>) -> Result<NiftiVolume> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_nifti1(&bytes).map_err(|e| match e {
        Error::UnsupportedFormat { field, message } => Error::UnsupportedFormat {
            field,
            message: format!("{}: {message}", path.display()),
        },
        Error::Format { offset, message } => Error::Format {
            offset,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

/// Reads a label map; every (scaled) value must be an integer in `0..=4`.
pub fn read_nifti1_labels(path: impl AsRef<Path>) -> Result<LabelVolume> {
    let nv = read_nifti1(path)?;
    let labels = nv
        .volume
        .data()
        .iter()
        .map(|&v| super::rvol::integer_label(v))
        .collect::<Result<Vec<_>>>()?;
    LabelVolume::new(nv.volume.dims(), labels)
}
