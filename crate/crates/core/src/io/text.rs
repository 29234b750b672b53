//! Line-oriented `key = value` text used by manifests and checkpoint headers.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Entry<'a> {
    pub key: &'a str,
    pub value: &'a str,
    /// Byte offset of the line start.
    pub offset: u64,
}

/// Splits `text` into entries; blank lines and `#` comments are skipped.
pub(crate) fn parse_entries(text: &str, base_offset: u64) -> Result<Vec<Entry<'_>>> {
    let mut out = Vec::new();
    let mut offset = base_offset;
    for raw in text.split_inclusive('\n') {
        let line = raw.trim_end_matches(['\n', '\r']);
        let trimmed = line.trim();
        if !trimmed.is_empty() && !trimmed.starts_with('#') {
            let (key, value) = trimmed.split_once('=').ok_or_else(|| {
                Error::format(offset, format!("expected 'key = value', got {trimmed:?}"))
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::format(offset, "empty key"));
            }
            out.push(Entry {
                key,
                value: value.trim(),
                offset,
            });
        }
        offset += raw.len() as u64;
    }
    Ok(out)
}

/// Rejects values that would not survive a write/parse round trip.
pub(crate) fn check_value(what: &str, value: &str) -> Result<()> {
    if value.contains(['\n', '\r']) || value.trim() != value || value.is_empty() {
        return Err(Error::invalid(format!(
            "{what} {value:?} must be non-empty, single-line, without surrounding spaces"
        )));
    }
    Ok(())
}

pub(crate) fn parse_num<T: std::str::FromStr>(e: &Entry<'_>) -> Result<T> {
    e.value
        .parse()
        .map_err(|_| Error::format(e.offset, format!("bad value {:?} for '{}'", e.value, e.key)))
}
