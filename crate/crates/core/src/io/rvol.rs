//! RVOL: the project's raw volume container.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "RVL1"
//! 4       4     nx   (u32 LE)
//! 8       4     ny   (u32 LE)
//! 12      4     nz   (u32 LE)
//! 16      4     nc   (u32 LE, channel count)
//! 20      4     dtype (u32 LE: 1 = f32, 2 = f64, 3 = u8)
//! 24      ...   payload, channel-major then x-fastest, little-endian
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::{Dims, LabelVolume, MultiChannelVolume, Volume3D};

pub const MAGIC: &[u8; 4] = b"RVL1";
pub const HEADER_LEN: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DType {
    F32 = 1,
    F64 = 2,
    U8 = 3,
}

impl DType {
    pub fn code(self) -> u32 {
        self as u32
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            1 => Some(DType::F32),
            2 => Some(DType::F64),
            3 => Some(DType::U8),
            _ => None,
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
            DType::U8 => 1,
        }
    }
}

impl std::str::FromStr for DType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" | "binary32" => Ok(DType::F32),
            "f64" | "binary64" => Ok(DType::F64),
            "u8" => Ok(DType::U8),
            other => Err(Error::invalid(format!(
                "unknown dtype '{other}', expected f32, f64 or u8"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RvolHeader {
    pub dims: Dims,
    pub channels: usize,
    pub dtype: DType,
}

impl RvolHeader {
    /// Payload size in bytes, or `None` on overflow.
    pub fn payload_len(&self) -> Option<usize> {
        self.dims
            .checked_len()?
            .checked_mul(self.channels)?
            .checked_mul(self.dtype.size())
    }

    pub fn encode(&self) -> Result<[u8; HEADER_LEN]> {
        let field = |v: usize, name: &str| {
            u32::try_from(v).map_err(|_| Error::invalid(format!("{name}={v} does not fit in u32")))
        };
        let mut h = [0u8; HEADER_LEN];
        h[..4].copy_from_slice(MAGIC);
        let fields = [
            field(self.dims.nx, "nx")?,
            field(self.dims.ny, "ny")?,
            field(self.dims.nz, "nz")?,
            field(self.channels, "nc")?,
            self.dtype.code(),
        ];
        for (i, v) in fields.into_iter().enumerate() {
            h[4 + 4 * i..8 + 4 * i].copy_from_slice(&v.to_le_bytes());
        }
        Ok(h)
    }

    pub fn decode(h: &[u8; HEADER_LEN]) -> Result<Self> {
        if &h[..4] != MAGIC {
            return Err(Error::format(
                0,
                format!("bad magic {:?}, expected \"RVL1\"", String::from_utf8_lossy(&h[..4])),
            ));
        }
        let u32_at = |o: usize| u32::from_le_bytes(h[o..o + 4].try_into().expect("4 bytes"));
        let names = ["nx", "ny", "nz", "nc"];
        let mut vals = [0usize; 4];
        for (i, name) in names.iter().enumerate() {
            let v = u32_at(4 + 4 * i);
            if v == 0 {
                return Err(Error::format(4 + 4 * i as u64, format!("{name} must be >= 1")));
            }
            vals[i] = v as usize;
        }
        let code = u32_at(20);
        let dtype = DType::from_code(code)
            .ok_or_else(|| Error::format(20, format!("unknown dtype code {code}")))?;
        Ok(RvolHeader {
            dims: Dims::new(vals[0], vals[1], vals[2])?,
            channels: vals[3],
            dtype,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    F32(Vec<f32>),
    F64(Vec<f64>),
    U8(Vec<u8>),
}

/// A decoded RVOL record.
#[derive(Clone, Debug, PartialEq)]
pub struct Rvol {
    pub header: RvolHeader,
    pub payload: Payload,
}

impl Rvol {
    /// Reads one record, consuming exactly header plus declared payload.
    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut h = [0u8; HEADER_LEN];
        let got = read_up_to(&mut r, &mut h)?;
        if got < HEADER_LEN {
            if got >= 4 && &h[..4] != MAGIC {
                return Err(Error::format(0, "bad magic, expected \"RVL1\""));
            }
            return Err(Error::format(
                got as u64,
                format!("truncated header: expected {HEADER_LEN} bytes, found {got}"),
            ));
        }
        let header = RvolHeader::decode(&h)?;
        let len = header.payload_len().ok_or_else(|| {
            Error::format(4, "declared payload size overflows")
        })?;
        let mut buf = Vec::new();
        r.take(len as u64)
            .read_to_end(&mut buf)
            .map_err(|e| Error::io("rvol payload", e))?;
        if buf.len() != len {
            return Err(Error::format(
                (HEADER_LEN + buf.len()) as u64,
                format!(
                    "truncated payload: expected {len} bytes, found {}",
                    buf.len()
                ),
            ));
        }
        let payload = match header.dtype {
            DType::U8 => Payload::U8(buf),
            DType::F32 => Payload::F32(
                buf.chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                    .collect(),
            ),
            DType::F64 => Payload::F64(
                buf.chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                    .collect(),
            ),
        };
        Ok(Rvol { header, payload })
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        Self::read_from(bytes)
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let len = self
            .header
            .payload_len()
            .ok_or_else(|| Error::invalid("payload size overflows"))?;
        let count = match &self.payload {
            Payload::F32(v) => v.len() * 4,
            Payload::F64(v) => v.len() * 8,
            Payload::U8(v) => v.len(),
        };
        let matches_dtype = matches!(
            (&self.payload, self.header.dtype),
            (Payload::F32(_), DType::F32) | (Payload::F64(_), DType::F64) | (Payload::U8(_), DType::U8)
        );
        if count != len || !matches_dtype {
            return Err(Error::invalid("payload does not match header"));
        }
        let mut out = Vec::with_capacity(HEADER_LEN + len);
        out.extend_from_slice(&self.header.encode()?);
        match &self.payload {
            Payload::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            Payload::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            Payload::U8(v) => out.extend_from_slice(v),
        }
        Ok(out)
    }

    /// Payload widened to f64, channel-major.
    pub fn values(&self) -> Vec<f64> {
        match &self.payload {
            Payload::F32(v) => v.iter().map(|&x| f64::from(x)).collect(),
            Payload::F64(v) => v.clone(),
            Payload::U8(v) => v.iter().map(|&x| f64::from(x)).collect(),
        }
    }

    pub fn to_multichannel(&self, names: Option<Vec<String>>) -> Result<MultiChannelVolume> {
        let dims = self.header.dims;
        let n = dims.len();
        let values = self.values();
        let channels = values
            .chunks_exact(n)
            .map(|c| Volume3D::from_vec(dims, c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        match names {
            Some(names) => MultiChannelVolume::new(channels, names),
            None => MultiChannelVolume::unnamed(channels),
        }
    }

    /// Interprets a single-channel record as labels. Real dtypes are
    /// accepted when every value is an integer in `0..=4`.
    pub fn to_labels(&self) -> Result<LabelVolume> {
        if self.header.channels != 1 {
            return Err(Error::invalid(format!(
                "label file must have 1 channel, found {}",
                self.header.channels
            )));
        }
        let labels = match &self.payload {
            Payload::U8(v) => v.clone(),
            _ => self
                .values()
                .into_iter()
                .map(integer_label)
                .collect::<Result<Vec<_>>>()?,
        };
        LabelVolume::new(self.header.dims, labels)
    }

    pub fn from_volume(vol: &MultiChannelVolume, dtype: DType) -> Result<Self> {
        let header = RvolHeader {
            dims: vol.dims(),
            channels: vol.channel_count(),
            dtype,
        };
        let all = vol.channels().iter().flat_map(|c| c.data().iter().copied());
        Ok(Rvol {
            header,
            payload: narrow(all, dtype)?,
        })
    }

    pub fn from_labels(labels: &LabelVolume) -> Self {
        Rvol {
            header: RvolHeader {
                dims: labels.dims(),
                channels: 1,
                dtype: DType::U8,
            },
            payload: Payload::U8(labels.labels().to_vec()),
        }
    }
}

pub(crate) fn integer_label(v: f64) -> Result<u8> {
    if v.fract() == 0.0 && (0.0..=4.0).contains(&v) {
        Ok(v as u8)
    } else {
        Err(Error::invalid(format!("label value {v} is not an integer in 0..=4")))
    }
}

/// Converts f64 samples to the target dtype, refusing lossy narrowing to
/// integers and overflow to infinity.
fn narrow(values: impl Iterator<Item = f64>, dtype: DType) -> Result<Payload> {
    Ok(match dtype {
        DType::F64 => Payload::F64(values.collect()),
        DType::F32 => Payload::F32(
            values
                .map(|v| {
                    let n = v as f32;
                    if n.is_finite() {
                        Ok(n)
                    } else {
                        Err(Error::invalid(format!("{v} overflows binary32")))
                    }
                })
                .collect::<Result<_>>()?,
        ),
        DType::U8 => Payload::U8(
            values
                .map(|v| {
                    if v.fract() == 0.0 && (0.0..=255.0).contains(&v) {
                        Ok(v as u8)
                    } else {
                        Err(Error::invalid(format!("{v} is not representable as u8")))
                    }
                })
                .collect::<Result<_>>()?,
        ),
    })
}

fn read_up_to(r: &mut impl Read, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(Error::io("rvol header", e)),
        }
    }
    Ok(filled)
}

pub fn read_rvol(path: impl AsRef<Path>) -> Result<Rvol> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Rvol::read_from(std::io::BufReader::new(file)).map_err(|e| with_path(e, path))
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Format { offset, message } => Error::Format {
            offset,
            message: format!("{}: {message}", path.display()),
        },
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    }
}

pub fn write_rvol(rvol: &Rvol, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = rvol.encode()?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn write_volume(vol: &MultiChannelVolume, dtype: DType, path: impl AsRef<Path>) -> Result<()> {
    write_rvol(&Rvol::from_volume(vol, dtype)?, path)
}

pub fn write_labels(labels: &LabelVolume, path: impl AsRef<Path>) -> Result<()> {
    write_rvol(&Rvol::from_labels(labels), path)
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<MultiChannelVolume> {
    read_rvol(path)?.to_multichannel(None)
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelVolume> {
    read_rvol(path)?.to_labels()
}
