//! Pipeline configuration file.
//!
//! Plain `key = value` lines; `#` starts a comment. Every key is optional.
//!
//! | key                     | default                     |
//! |-------------------------|-----------------------------|
//! | `dog.sigmas`            | `sqrt(2)^k`, k = 1..8       |
//! | `dog.support`           | `33`                        |
//! | `dog.zero_dc`           | `true`                      |
//! | `train.learning_rate`   | `0.01`                      |
//! | `train.momentum`        | `0.9`                       |
//! | `train.batch_size`      | `256`                       |
//! | `train.epochs`          | `10`                        |
//! | `train.rng_seed`        | `0`                         |
//! | `train.class_balance`   | `true`                      |
//! | `train.l2`              | `0.0001`                    |
//! | `train.init`            | `glorot` (or `zero`)        |
//! | `train.hidden_layers`   | `100,100,100`               |
//! | `sampling.max_per_class`| `4000` (`all` disables)     |
//! | `features.dtype`        | `f32` (or `f64`)            |
//! | `threads`               | available parallelism       |
//! | `paths.filters`         | unset                       |
//! | `paths.checkpoint`      | unset                       |
//!
//! Lists are comma separated.

use std::path::{Path, PathBuf};

use crate::dog::DoGSpec;
use crate::error::{Error, Result};
use crate::io::rvol::DType;
use crate::io::text::{parse_entries, Entry};
use crate::net::{SamplingConfig, TrainConfig, WeightInit};

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub dog: DoGSpec,
    pub train: TrainConfig,
    pub sampling: SamplingConfig,
    pub feature_dtype: DType,
    pub threads: Option<usize>,
    pub filters: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            dog: DoGSpec::default(),
            train: TrainConfig::default(),
            sampling: SamplingConfig::default(),
            feature_dtype: DType::F32,
            threads: None,
            filters: None,
            checkpoint: None,
        }
    }
}

fn bad(e: &Entry<'_>, what: &str) -> Error {
    Error::format(e.offset, format!("config key '{}': expected {what}, got {:?}", e.key, e.value))
}

fn num<T: std::str::FromStr>(e: &Entry<'_>, what: &str) -> Result<T> {
    e.value.parse().map_err(|_| bad(e, what))
}

fn boolean(e: &Entry<'_>) -> Result<bool> {
    match e.value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(e, "true or false")),
    }
}

fn list<T: std::str::FromStr>(e: &Entry<'_>, what: &str) -> Result<Vec<T>> {
    e.value.split(',').map(|s| s.trim().parse().map_err(|_| bad(e, what))).collect()
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = PipelineConfig::default();
        let mut seen = std::collections::HashSet::new();
        for e in parse_entries(text, 0)? {
            if !seen.insert(e.key) {
                return Err(Error::format(e.offset, format!("config key '{}' given twice", e.key)));
            }
            match e.key {
                "dog.sigmas" => c.dog.sigmas = list(&e, "a list of numbers")?,
                "dog.support" => c.dog.support = num(&e, "an odd integer")?,
                "dog.zero_dc" => c.dog.zero_dc = boolean(&e)?,
                "train.learning_rate" => c.train.learning_rate = num(&e, "a number")?,
                "train.momentum" => c.train.momentum = num(&e, "a number")?,
                "train.batch_size" => c.train.batch_size = num(&e, "an integer")?,
                "train.epochs" => c.train.epochs = num(&e, "an integer")?,
                "train.rng_seed" => c.train.rng_seed = num(&e, "an integer")?,
                "train.class_balance" => c.train.class_balance = boolean(&e)?,
                "train.l2" => c.train.l2 = num(&e, "a number")?,
                "train.init" => {
                    c.train.init = match e.value {
                        "glorot" => WeightInit::Glorot,
                        "zero" => WeightInit::Zero,
                        _ => return Err(bad(&e, "glorot or zero")),
                    }
                }
                "train.hidden_layers" => {
                    c.train.hidden_layers = if e.value.is_empty() {
                        Vec::new()
                    } else {
                        list(&e, "a list of integers")?
                    }
                }
                "sampling.max_per_class" => {
                    c.sampling.max_per_class = match e.value {
                        "all" => None,
                        _ => Some(num(&e, "an integer or 'all'")?),
                    }
                }
                "features.dtype" => {
                    c.feature_dtype = match e.value {
                        "f32" => DType::F32,
                        "f64" => DType::F64,
                        _ => return Err(bad(&e, "f32 or f64")),
                    }
                }
                "threads" => {
                    let t: usize = num(&e, "a positive integer")?;
                    if t == 0 {
                        return Err(bad(&e, "a positive integer"));
                    }
                    c.threads = Some(t);
                }
                "paths.filters" => c.filters = Some(PathBuf::from(e.value)),
                "paths.checkpoint" => c.checkpoint = Some(PathBuf::from(e.value)),
                other => {
                    return Err(Error::format(e.offset, format!("unknown config key '{other}'")));
                }
            }
        }
        c.dog.validate()?;
        c.train.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Format { offset, message } => Error::Format {
                offset,
                message: format!("{}: {message}", path.display()),
            },
            Error::InvalidInput(m) => Error::InvalidInput(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}
