//! Filter-bank directories: one RVOL file per filter plus `manifest.json`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::rvol::{read_rvol, write_rvol, DType, Payload, Rvol, RvolHeader};
use crate::dog::{BankFilter, FilterBank, FilterKind};
use crate::error::{Error, Result};
use crate::volume::Volume3D;

pub const MANIFEST_NAME: &str = "manifest.json";
pub const BANK_FORMAT: &str = "gbmseg-bank/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankManifest {
    pub format: String,
    pub support: usize,
    pub zero_dc: bool,
    pub filters: Vec<BankEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankEntry {
    pub file: String,
    pub sigma: f64,
    pub kind: FilterKind,
}

impl BankManifest {
    pub fn parse(text: &str) -> Result<Self> {
        let m: BankManifest = serde_json::from_str(text).map_err(|e| {
            Error::format(0, format!("bank manifest line {} column {}: {e}", e.line(), e.column()))
        })?;
        if m.format != BANK_FORMAT {
            return Err(Error::format(0, format!(
                "bank manifest format '{}', expected '{BANK_FORMAT}'",
                m.format
            )));
        }
        if m.filters.is_empty() {
            return Err(Error::format(0, "bank manifest lists no filters"));
        }
        for f in &m.filters {
            // file names stay inside the bank directory
            if f.file.is_empty()
                || f.file.contains(['/', '\\'])
                || f.file == "."
                || f.file == ".."
            {
                return Err(Error::format(0, format!("bad filter file name {:?}", f.file)));
            }
        }
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

pub fn filter_file_name(index: usize) -> String {
    format!("filter_{index:02}.rvol")
}

/// Writes the bank to `dir` (created if needed).
pub fn write_bank(bank: &FilterBank, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(bank.len());
    for (i, f) in bank.filters().iter().enumerate() {
        let file = filter_file_name(i);
        let rvol = Rvol {
            header: RvolHeader {
                dims: f.kernel.dims(),
                channels: 1,
                dtype: DType::F64,
            },
            payload: Payload::F64(f.kernel.data().to_vec()),
        };
        write_rvol(&rvol, dir.join(&file))?;
        entries.push(BankEntry {
            file,
            sigma: f.sigma,
            kind: f.kind,
        });
    }
    let manifest = BankManifest {
        format: BANK_FORMAT.to_string(),
        support: bank.support(),
        zero_dc: bank.zero_dc(),
        filters: entries,
    };
    let path = dir.join(MANIFEST_NAME);
    std::fs::write(&path, manifest.to_json()).map_err(|e| Error::io(path, e))
}

pub fn read_bank(dir: impl AsRef<Path>) -> Result<FilterBank> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST_NAME);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest = BankManifest::parse(&text)?;
    let mut filters = Vec::with_capacity(manifest.filters.len());
    for entry in &manifest.filters {
        let fpath = dir.join(&entry.file);
        let rvol = read_rvol(&fpath)?;
        let d = rvol.header.dims;
        if rvol.header.channels != 1 || d.nx != manifest.support || d.ny != manifest.support || d.nz != manifest.support {
            return Err(Error::invalid(format!(
                "{}: expected a single {s}x{s}x{s} kernel, found {d} x {} channels",
                fpath.display(),
                rvol.header.channels,
                s = manifest.support
            )));
        }
        filters.push(BankFilter {
            kernel: Volume3D::from_vec(d, rvol.values())?,
            sigma: entry.sigma,
            kind: entry.kind,
        });
    }
    FilterBank::new(filters, manifest.zero_dc)
}
