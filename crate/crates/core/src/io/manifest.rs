//! Case manifests and feature files.
//!
//! A case manifest is line-oriented text:
//!
//! ```text
//! case_id = p7
//! channel t1pre = t1pre.rvol
//! channel flair = flair.nii
//! labels = labels.lbl
//! note = synthetic phantom, seed 7
//! ```
//!
//! Paths are relative to the manifest's directory.
//!
//! A feature file `X.feat` is an RVOL record with one channel per feature;
//! `X.feat.manifest` lists the feature names in channel order.

use std::path::{Path, PathBuf};

use super::rvol::{read_rvol, write_rvol, DType, Rvol};
use super::text::{check_value, parse_entries, parse_num};
use crate::error::{Error, Result};
use crate::features::FeatureTensor;

pub const CASE_MANIFEST_NAME: &str = "case.manifest";
pub const FEATURE_FORMAT: &str = "gbmseg-features/1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaseChannel {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaseManifest {
    pub case_id: String,
    pub channels: Vec<CaseChannel>,
    pub labels: Option<PathBuf>,
    pub notes: Vec<String>,
}

impl CaseManifest {
    pub fn parse(text: &str) -> Result<Self> {
        let mut case_id = None;
        let mut channels: Vec<CaseChannel> = Vec::new();
        let mut labels = None;
        let mut notes = Vec::new();
        for e in parse_entries(text, 0)? {
            match e.key {
                "case_id" => {
                    if case_id.replace(e.value.to_string()).is_some() {
                        return Err(Error::format(e.offset, "duplicate case_id"));
                    }
                }
                "labels" => {
                    if labels.replace(PathBuf::from(e.value)).is_some() {
                        return Err(Error::format(e.offset, "duplicate labels entry"));
                    }
                }
                "note" => notes.push(e.value.to_string()),
                key => {
                    let Some(name) = key.strip_prefix("channel ").map(str::trim) else {
                        return Err(Error::format(e.offset, format!("unknown key '{key}'")));
                    };
                    if name.is_empty() || name.contains(char::is_whitespace) {
                        return Err(Error::format(e.offset, format!("bad channel name {name:?}")));
                    }
                    if channels.iter().any(|c| c.name == name) {
                        return Err(Error::format(e.offset, format!("duplicate channel '{name}'")));
                    }
                    channels.push(CaseChannel {
                        name: name.to_string(),
                        path: PathBuf::from(e.value),
                    });
                }
            }
            if e.value.is_empty() {
                return Err(Error::format(e.offset, format!("empty value for '{}'", e.key)));
            }
        }
        let case_id = case_id.ok_or_else(|| Error::format(0, "case manifest has no case_id"))?;
        if channels.is_empty() {
            return Err(Error::format(0, "case manifest lists no channels"));
        }
        Ok(CaseManifest {
            case_id,
            channels,
            labels,
            notes,
        })
    }

    pub fn to_text(&self) -> Result<String> {
        check_value("case_id", &self.case_id)?;
        let mut out = format!("case_id = {}\n", self.case_id);
        for c in &self.channels {
            check_value("channel name", &c.name)?;
            if c.name.contains(char::is_whitespace) {
                return Err(Error::invalid(format!("channel name {:?} contains spaces", c.name)));
            }
            let p = path_str(&c.path)?;
            out.push_str(&format!("channel {} = {p}\n", c.name));
        }
        if let Some(l) = &self.labels {
            out.push_str(&format!("labels = {}\n", path_str(l)?));
        }
        for n in &self.notes {
            check_value("note", n)?;
            out.push_str(&format!("note = {n}\n"));
        }
        Ok(out)
    }

    /// Parses the manifest at `path`, resolves relative paths against its
    /// directory and checks that every referenced file exists.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m = Self::parse(&text).map_err(|e| match e {
            Error::Format { offset, message } => Error::Format {
                offset,
                message: format!("{}: {message}", path.display()),
            },
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for c in &mut m.channels {
            c.path = base.join(&c.path);
        }
        if let Some(l) = &mut m.labels {
            *l = base.join(&*l);
        }
        for p in m.channels.iter().map(|c| &c.path).chain(m.labels.iter()) {
            if !p.is_file() {
                return Err(Error::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "referenced by case manifest"),
                ));
            }
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()?).map_err(|e| Error::io(path, e))
    }
}

fn path_str(p: &Path) -> Result<&str> {
    let s = p
        .to_str()
        .ok_or_else(|| Error::invalid(format!("path {} is not UTF-8", p.display())))?;
    check_value("path", s)?;
    Ok(s)
}

/// Sidecar listing feature names of a feature file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureManifest {
    pub names: Vec<String>,
}

impl FeatureManifest {
    pub fn parse(text: &str) -> Result<Self> {
        let entries = parse_entries(text, 0)?;
        let mut format = None;
        let mut count: Option<usize> = None;
        let mut names = Vec::new();
        for e in &entries {
            match e.key {
                "format" => format = Some(e.value),
                "count" => count = Some(parse_num(e)?),
                "feature" => {
                    if e.value.is_empty() {
                        return Err(Error::format(e.offset, "empty feature name"));
                    }
                    names.push(e.value.to_string());
                }
                other => return Err(Error::format(e.offset, format!("unknown key '{other}'"))),
            }
        }
        if format != Some(FEATURE_FORMAT) {
            return Err(Error::format(0, format!("feature manifest must declare format = {FEATURE_FORMAT}")));
        }
        match count {
            Some(c) if c == names.len() && c > 0 => Ok(FeatureManifest { names }),
            Some(c) => Err(Error::format(
                0,
                format!("feature manifest declares {c} features but lists {}", names.len()),
            )),
            None => Err(Error::format(0, "feature manifest has no count")),
        }
    }

    pub fn to_text(&self) -> Result<String> {
        let mut out = format!("format = {FEATURE_FORMAT}\ncount = {}\n", self.names.len());
        for n in &self.names {
            check_value("feature name", n)?;
            out.push_str(&format!("feature = {n}\n"));
        }
        Ok(out)
    }
}

pub fn feature_manifest_path(feat: &Path) -> PathBuf {
    let mut s = feat.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

pub fn write_features(features: &FeatureTensor, dtype: DType, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = features.feature_count();
    let channels: Vec<_> = (0..f).map(|j| features.channel(j)).collect();
    let mc = crate::volume::MultiChannelVolume::new(channels, features.names().to_vec())?;
    write_rvol(&Rvol::from_volume(&mc, dtype)?, path)?;
    let manifest = FeatureManifest {
        names: features.names().to_vec(),
    };
    let mpath = feature_manifest_path(path);
    std::fs::write(&mpath, manifest.to_text()?).map_err(|e| Error::io(mpath, e))
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureTensor> {
    let path = path.as_ref();
    let mpath = feature_manifest_path(path);
    let text = std::fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest = FeatureManifest::parse(&text)?;
    let rvol = read_rvol(path)?;
    if rvol.header.channels != manifest.names.len() {
        return Err(Error::invalid(format!(
            "{} has {} channels but its manifest names {} features",
            path.display(),
            rvol.header.channels,
            manifest.names.len()
        )));
    }
    let mc = rvol.to_multichannel(Some(manifest.names.clone()))?;
    let (channels, names) = mc.into_parts();
    FeatureTensor::from_channels(names, &channels)
}
