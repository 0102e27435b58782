//! Dump manifests: a JSON index of per-layer tensor files.

use std::fs;
use std::path::{Path, PathBuf};

use hintscout_core::TensorBlob;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::read_blob_file;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DumpManifest {
    pub model_name: String,
    pub dataset_name: String,
    pub sample_count: usize,
    pub layers: Vec<LayerEntry>,
    /// Free-form producer notes, e.g. which checkpoint was dumped.
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub metadata: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerEntry {
    /// 1-based sub-block position.
    pub index: usize,
    pub name: String,
    /// Path of the tensor file, relative to the manifest.
    pub file: String,
    pub channels: usize,
}

impl LayerEntry {
    fn label(&self) -> String {
        format!("layer {} ({})", self.index, self.name)
    }
}

impl DumpManifest {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut m: DumpManifest = serde_json::from_str(text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        m.check()?;
        m.layers.sort_by_key(|l| l.index);
        Ok(m)
    }

    fn check(&self) -> Result<()> {
        if self.sample_count == 0 {
            return Err(Error::Manifest("sample_count must be positive".into()));
        }
        if self.layers.is_empty() {
            return Err(Error::Manifest("no layers listed".into()));
        }
        let mut sorted: Vec<&LayerEntry> = self.layers.iter().collect();
        sorted.sort_by_key(|l| l.index);
        for (expected, entry) in (1..).zip(&sorted) {
            if entry.index != expected {
                return Err(Error::Manifest(format!(
                    "layer indices must be contiguous from 1: {} found where index {expected} was expected",
                    entry.label()
                )));
            }
            if entry.channels == 0 {
                return Err(Error::Manifest(format!(
                    "{}: channels must be positive",
                    entry.label()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LoadedLayer {
    pub entry: LayerEntry,
    pub blob: TensorBlob,
}

#[derive(Debug, Clone)]
pub struct Dump {
    pub manifest: DumpManifest,
    /// In layer-index order.
    pub layers: Vec<LoadedLayer>,
    /// Lowercase hex SHA-256 of the manifest bytes as read.
    pub manifest_sha256: String,
}

impl Dump {
    pub fn names(&self) -> Vec<String> {
        self.layers.iter().map(|l| l.entry.name.clone()).collect()
    }
}

/// Read a manifest and every tensor it lists, checking sample and channel
/// counts against the manifest.
pub fn load_dump(manifest_path: &Path) -> Result<Dump> {
    let bytes = fs::read(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| Error::Manifest(format!("{} is not UTF-8", manifest_path.display())))?;
    let manifest = DumpManifest::parse(text, manifest_path)?;
    let base = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();

    let layers = manifest
        .layers
        .par_iter()
        .map(|entry| load_layer(&base, entry, manifest.sample_count))
        .collect::<Result<Vec<_>>>()?;

    Ok(Dump {
        manifest,
        layers,
        manifest_sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

fn load_layer(base: &Path, entry: &LayerEntry, n: usize) -> Result<LoadedLayer> {
    let path: PathBuf = base.join(&entry.file);
    if !path.is_file() {
        return Err(Error::Manifest(format!(
            "{}: file {} not found",
            entry.label(),
            path.display()
        )));
    }
    let blob = read_blob_file(&path).map_err(|e| Error::Manifest(format!("{}: {e}", entry.label())))?;
    if blob.samples() != n {
        return Err(Error::Manifest(format!(
            "{}: tensor has N={} but the manifest says N={n}",
            entry.label(),
            blob.samples()
        )));
    }
    if blob.channels() != entry.channels {
        return Err(Error::Manifest(format!(
            "{}: tensor has C={} but the manifest says C={}",
            entry.label(),
            blob.channels(),
            entry.channels
        )));
    }
    Ok(LoadedLayer {
        entry: entry.clone(),
        blob,
    })
}
