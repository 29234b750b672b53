//! Network checkpoints.
//!
//! A checkpoint is a short text header followed by raw little-endian f64
//! parameters:
//!
//! ```text
//! gbmseg-checkpoint
//! format_version = 1
//! layer_sizes = 72,100,100,100,5
//! feature = t1pre:intensity
//! ...
//! train_config = {"learning_rate":0.01,...}
//! loss_trace = 1.6094379124341003,0.91,...
//! payload_bytes = 238800
//! end
//! <payload>
//! ```
//!
//! The payload holds, for each layer in order, its `outputs x inputs`
//! weights (row-major) and then its biases.

use std::path::Path;

use super::text::{check_value, parse_entries, parse_num};
use crate::error::{Error, Result};
use crate::net::{Layer, NetworkParams, TrainConfig};

pub const CHECKPOINT_MAGIC: &str = "gbmseg-checkpoint\n";
pub const FORMAT_VERSION: u32 = 1;
const END_LINE: &str = "end\n";
/// Headers longer than this are rejected before any parsing.
const MAX_HEADER: usize = 16 << 20;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: NetworkParams,
    pub train_config: Option<TrainConfig>,
    pub loss_trace: Vec<f64>,
}

impl Checkpoint {
    pub fn new(params: NetworkParams) -> Self {
        Checkpoint {
            params,
            train_config: None,
            loss_trace: Vec::new(),
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let sizes = self.params.layer_sizes();
        let mut header = String::from(CHECKPOINT_MAGIC);
        header.push_str(&format!("format_version = {FORMAT_VERSION}\n"));
        header.push_str(&format!("layer_sizes = {}\n", join(&sizes)));
        for name in self.params.feature_manifest() {
            check_value("feature name", name)?;
            header.push_str(&format!("feature = {name}\n"));
        }
        if let Some(cfg) = &self.train_config {
            let json = serde_json::to_string(cfg).expect("config serializes");
            header.push_str(&format!("train_config = {json}\n"));
        }
        if !self.loss_trace.is_empty() {
            if self.loss_trace.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("loss trace has non-finite values"));
            }
            header.push_str(&format!("loss_trace = {}\n", join(&self.loss_trace)));
        }
        let n_params = self.params.param_count();
        header.push_str(&format!("payload_bytes = {}\n", n_params * 8));
        header.push_str(END_LINE);

        let mut out = header.into_bytes();
        out.reserve(n_params * 8);
        for layer in self.params.layers() {
            for v in layer.weights.iter().chain(&layer.biases) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if !bytes.starts_with(CHECKPOINT_MAGIC.as_bytes()) {
            return Err(Error::format(0, "not a checkpoint: missing 'gbmseg-checkpoint' line"));
        }
        let search = &bytes[..bytes.len().min(MAX_HEADER)];
        let end = find_end(search)
            .ok_or_else(|| Error::format(search.len() as u64, "checkpoint header has no 'end' line"))?;
        let header_len = end + END_LINE.len();
        let header = std::str::from_utf8(&bytes[CHECKPOINT_MAGIC.len()..end])
            .map_err(|e| Error::format((CHECKPOINT_MAGIC.len() + e.valid_up_to()) as u64, "header is not UTF-8"))?;

        let mut version = None;
        let mut sizes: Option<Vec<usize>> = None;
        let mut features = Vec::new();
        let mut train_config = None;
        let mut loss_trace = Vec::new();
        let mut payload_bytes: Option<usize> = None;
        for e in parse_entries(header, CHECKPOINT_MAGIC.len() as u64)? {
            match e.key {
                "format_version" => version = Some(parse_num::<u32>(&e)?),
                "layer_sizes" => {
                    sizes = Some(
                        e.value
                            .split(',')
                            .map(|s| s.trim().parse::<usize>())
                            .collect::<std::result::Result<_, _>>()
                            .map_err(|_| Error::format(e.offset, format!("bad layer_sizes {:?}", e.value)))?,
                    )
                }
                "feature" => {
                    check_value("feature name", e.value)
                        .map_err(|_| Error::format(e.offset, format!("bad feature name {:?}", e.value)))?;
                    features.push(e.value.to_string())
                }
                "train_config" => {
                    let cfg: TrainConfig = serde_json::from_str(e.value)
                        .map_err(|err| Error::format(e.offset, format!("train_config: {err}")))?;
                    train_config = Some(cfg);
                }
                "loss_trace" => {
                    loss_trace = e
                        .value
                        .split(',')
                        .map(|s| s.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
                        .collect::<Option<_>>()
                        .ok_or_else(|| Error::format(e.offset, "bad loss_trace"))?;
                }
                "payload_bytes" => payload_bytes = Some(parse_num(&e)?),
                other => {
                    return Err(Error::format(e.offset, format!("unknown checkpoint key '{other}'")))
                }
            }
        }
        match version {
            Some(FORMAT_VERSION) => {}
            Some(v) => {
                return Err(Error::UnsupportedFormat {
                    field: "format_version",
                    message: format!("checkpoint version {v}, this build reads {FORMAT_VERSION}"),
                })
            }
            None => return Err(Error::format(0, "checkpoint has no format_version")),
        }
        let sizes = sizes.ok_or_else(|| Error::format(0, "checkpoint has no layer_sizes"))?;
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::format(0, format!("invalid layer_sizes {sizes:?}")));
        }
        let n_params = sizes
            .windows(2)
            .try_fold(0usize, |acc, w| {
                w[0].checked_add(1)?.checked_mul(w[1])?.checked_add(acc)
            })
            .ok_or_else(|| Error::format(0, "layer_sizes overflow"))?;
        let expected = n_params
            .checked_mul(8)
            .ok_or_else(|| Error::format(0, "layer_sizes overflow"))?;
        let declared = payload_bytes.ok_or_else(|| Error::format(0, "checkpoint has no payload_bytes"))?;
        if declared != expected {
            return Err(Error::format(0, format!(
                "payload_bytes {declared} does not match layer_sizes ({expected} bytes)"
            )));
        }
        let payload = &bytes[header_len..];
        if payload.len() < expected {
            return Err(Error::format(
                bytes.len() as u64,
                format!("truncated checkpoint payload: expected {expected} bytes, found {}", payload.len()),
            ));
        }
        if payload.len() > expected {
            return Err(Error::format(
                (header_len + expected) as u64,
                format!("{} trailing bytes after checkpoint payload", payload.len() - expected),
            ));
        }

        let mut values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let layers: Vec<Layer> = sizes
            .windows(2)
            .map(|w| Layer {
                inputs: w[0],
                outputs: w[1],
                weights: values.by_ref().take(w[0] * w[1]).collect(),
                biases: values.by_ref().take(w[1]).collect(),
            })
            .collect();
        let params = NetworkParams::from_layers(layers, features)?;
        Ok(Checkpoint {
            params,
            train_config,
            loss_trace,
        })
    }
}

fn find_end(bytes: &[u8]) -> Option<usize> {
    let pat = b"\nend\n";
    bytes.windows(pat.len()).position(|w| w == pat).map(|p| p + 1)
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

pub fn write_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, ckpt.encode()?).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::decode(&bytes).map_err(|e| match e {
        Error::Format { offset, message } => Error::Format {
            offset,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn sample() -> Checkpoint {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let params = NetworkParams::glorot(&[3, 4, 5], &mut rng)
            .unwrap()
            .with_feature_manifest(vec!["a".into(), "b".into(), "c d".into()])
            .unwrap();
        Checkpoint {
            params,
            train_config: Some(TrainConfig::default()),
            loss_trace: vec![5f64.ln(), 0.1 + 0.2, 1e-300],
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = sample();
        let bytes = c.encode().unwrap();
        assert_eq!(Checkpoint::decode(&bytes).unwrap(), c);
        let bare = Checkpoint::new(NetworkParams::zeros(&[2, 5]).unwrap());
        assert_eq!(Checkpoint::decode(&bare.encode().unwrap()).unwrap(), bare);
    }

    #[test]
    fn payload_length_is_checked() {
        let bytes = sample().encode().unwrap();
        let short = &bytes[..bytes.len() - 1];
        assert!(matches!(Checkpoint::decode(short), Err(Error::Format { .. })));
        let mut long = bytes.clone();
        long.push(0);
        assert!(Checkpoint::decode(&long).is_err());
    }

    #[test]
    fn header_errors() {
        assert!(Checkpoint::decode(b"nope").is_err());
        assert!(Checkpoint::decode(b"gbmseg-checkpoint\nformat_version = 1\n").is_err());
        let v2 = b"gbmseg-checkpoint\nformat_version = 2\nlayer_sizes = 1,1\npayload_bytes = 16\nend\n";
        assert!(matches!(
            Checkpoint::decode(v2),
            Err(Error::UnsupportedFormat { field: "format_version", .. })
        ));
        let huge = b"gbmseg-checkpoint\nformat_version = 1\nlayer_sizes = 18446744073709551615,2\npayload_bytes = 8\nend\n";
        assert!(Checkpoint::decode(huge).is_err());
        let nan = {
            let mut b = b"gbmseg-checkpoint\nformat_version = 1\nlayer_sizes = 1,1\npayload_bytes = 16\nend\n".to_vec();
            b.extend_from_slice(&f64::NAN.to_le_bytes());
            b.extend_from_slice(&0f64.to_le_bytes());
            b
        };
        assert!(Checkpoint::decode(&nan).is_err());
    }
}
