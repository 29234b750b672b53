//! File formats: RVOL volumes, NIfTI-1 input, filter banks, case and
//! feature manifests, and network checkpoints.

pub mod bank;
pub mod checkpoint;
pub mod manifest;
pub mod nifti;
pub mod rvol;
pub(crate) mod text;

pub use bank::{read_bank, write_bank, BankManifest};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use manifest::{read_features, write_features, CaseChannel, CaseManifest, FeatureManifest};
pub use nifti::{parse_nifti1, read_nifti1, read_nifti1_labels, NiftiMeta, NiftiVolume};
pub use rvol::{read_labels, read_rvol, read_volume, write_labels, write_rvol, write_volume, DType, Rvol};

use std::path::Path;

use crate::error::Result;
use crate::volume::{LabelVolume, Volume3D};

fn is_nifti(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "nii")
}

/// Reads a single-channel intensity volume from `.nii` or RVOL.
pub fn read_scalar_volume(path: impl AsRef<Path>) -> Result<Volume3D> {
    let path = path.as_ref();
    if is_nifti(path) {
        return Ok(read_nifti1(path)?.volume);
    }
    let mc = read_volume(path)?;
    if mc.channel_count() != 1 {
        return Err(crate::Error::invalid(format!(
            "{} holds {} channels, expected 1",
            path.display(),
            mc.channel_count()
        )));
    }
    Ok(mc.into_parts().0.remove(0))
}

/// Reads a label map from `.nii` or RVOL.
pub fn read_label_file(path: impl AsRef<Path>) -> Result<LabelVolume> {
    let path = path.as_ref();
    if is_nifti(path) {
        read_nifti1_labels(path)
    } else {
        read_labels(path)
    }
}
