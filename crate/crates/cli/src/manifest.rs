// SPDX-License-Identifier: Apache-2.0

//! Dataset manifest: designs, their seeds, split tags and golden labels.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sog_ppa::frontend::WordDesign;
use sog_ppa::golden::GoldenLabels;

use crate::CliError;

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub design: String,
    pub clock_period_ns: f64,
    pub seed: u64,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub golden: Option<GoldenLabels>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    /// Liberty file relative to the manifest's directory; the built-in
    /// fixture library when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub library: Option<String>,
    pub entries: Vec<ManifestEntry>,
}

/// A manifest together with the directory its paths are relative to.
#[derive(Clone, Debug)]
pub struct LoadedManifest {
    pub manifest: Manifest,
    pub dir: PathBuf,
}

/// Accepts the manifest file or a directory containing `manifest.json`.
pub fn manifest_path(arg: &Path) -> PathBuf {
    if arg.is_dir() {
        arg.join(MANIFEST_FILE)
    } else {
        arg.to_path_buf()
    }
}

impl LoadedManifest {
    pub fn load(arg: &Path) -> Result<Self, CliError> {
        let path = manifest_path(arg);
        let manifest: Manifest = crate::read_json(&path)?;
        if manifest.version != MANIFEST_VERSION {
            return Err(CliError::Invalid(format!(
                "{}: manifest version {} (expected {MANIFEST_VERSION})",
                path.display(),
                manifest.version
            )));
        }
        let dir = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        for e in &manifest.entries {
            let p = dir.join(&e.design);
            if !p.is_file() {
                return Err(CliError::Invalid(format!("design file {} does not exist", p.display())));
            }
        }
        Ok(LoadedManifest { manifest, dir })
    }

    pub fn design(&self, entry: &ManifestEntry) -> Result<WordDesign, CliError> {
        crate::read_design(&self.dir.join(&entry.design))
    }

    pub fn library_path(&self) -> Option<PathBuf> {
        self.manifest.library.as_ref().map(|l| self.dir.join(l))
    }
}

/// Copy `rel` from `from` into `to` unless both directories are the same.
pub fn copy_relative(from: &Path, to: &Path, rel: &str) -> Result<(), CliError> {
    let src = from.join(rel);
    let dst = to.join(rel);
    let same = match (fs::canonicalize(&src), fs::canonicalize(&dst)) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    };
    if same {
        return Ok(());
    }
    if let Some(parent) = dst.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::copy(&src, &dst).map_err(|e| CliError::io(&src, e))?;
    Ok(())
}
