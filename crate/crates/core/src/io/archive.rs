//! Versioned single-file model archive.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detector::{feature_digest, DetectorBundle};
use crate::digest;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchiveDigests {
    pub features: String,
    pub codebook: String,
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArchive {
    pub format_version: u32,
    pub seed: u64,
    pub digests: ArchiveDigests,
    pub bundle: DetectorBundle,
}

impl ModelArchive {
    pub fn new(bundle: DetectorBundle, seed: u64) -> Self {
        let digests = ArchiveDigests {
            features: feature_digest(&bundle.layout, &bundle.gesturelet),
            codebook: digest::of(&bundle.codebook),
            model: digest::of(&bundle.model),
        };
        Self {
            format_version: FORMAT_VERSION,
            seed,
            digests,
            bundle,
        }
    }

    /// Checks the recorded digests against the parts and the parts against
    /// each other.
    pub fn verify(&self) -> Result<()> {
        let b = &self.bundle;
        let features = feature_digest(&b.layout, &b.gesturelet);
        if self.digests.features != features || b.codebook.config_digest != features {
            return Err(Error::DigestMismatch("feature configuration".into()));
        }
        let codebook = digest::of(&b.codebook);
        if self.digests.codebook != codebook || b.model.codebook_digest != codebook {
            return Err(Error::DigestMismatch("codebook".into()));
        }
        if self.digests.model != digest::of(&b.model) {
            return Err(Error::DigestMismatch("model".into()));
        }
        b.verify()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("archives always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let parse = |e: serde_json::Error| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        };
        let raw: serde_json::Value = serde_json::from_str(text).map_err(parse)?;
        let version = raw
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: "missing integer format_version".into(),
            })?;
        if version != u64::from(FORMAT_VERSION) {
            return Err(Error::VersionUnsupported(u32::try_from(version).unwrap_or(u32::MAX)));
        }
        let archive: Self = serde_json::from_str(text).map_err(parse)?;
        archive.verify()?;
        Ok(archive)
    }
}

pub fn save_model(path: impl AsRef<Path>, archive: &ModelArchive) -> Result<()> {
    std::fs::write(path, archive.to_json())?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelArchive> {
    ModelArchive::from_json(&std::fs::read_to_string(path)?)
}
