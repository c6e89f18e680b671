//! Trajectory archives: one CLF1 file per sample plus `manifest.json`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::spectral::clf1;
use crate::trajectory::Trajectory;

pub const MANIFEST_NAME: &str = "manifest.json";
pub const ARCHIVE_FORMAT: &str = "clab-trajectory";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub times: Vec<f64>,
    /// File names relative to the archive directory, one per time.
    pub files: Vec<String>,
    #[serde(default)]
    pub config: Value,
    #[serde(default)]
    pub residuals: Value,
    /// Successive-difference norms of the Picard iterates.
    #[serde(default)]
    pub iterate_history: Vec<f64>,
}

/// Write every sample and the manifest; each file is written atomically.
pub fn write_archive(dir: &Path, traj: &Trajectory, config: Value, residuals: Value, iterate_history: Vec<f64>) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let files: Vec<String> = (0..traj.len()).map(|i| format!("sample_{i:05}.clf1")).collect();
    for (name, f) in files.iter().zip(traj.fields()) {
        clf1::write_atomic(&dir.join(name), &clf1::encode(f))?;
    }
    let manifest = Manifest {
        format: ARCHIVE_FORMAT.into(),
        version: 1,
        times: traj.times().to_vec(),
        files,
        config,
        residuals,
        iterate_history,
    };
    clf1::write_atomic(&dir.join(MANIFEST_NAME), &serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn read_archive(dir: &Path) -> Result<(Trajectory, Manifest)> {
    let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST_NAME))?)?;
    if manifest.format != ARCHIVE_FORMAT || manifest.version != 1 {
        return Err(Error::Format(format!(
            "unsupported archive {} version {}",
            manifest.format, manifest.version
        )));
    }
    if manifest.files.len() != manifest.times.len() {
        return Err(Error::Format("manifest lists a different number of files and times".into()));
    }
    let fields = manifest
        .files
        .iter()
        .map(|name| clf1::read(&dir.join(name)))
        .collect::<Result<Vec<_>>>()?;
    let traj = Trajectory::new(manifest.times.clone(), fields)?;
    Ok((traj, manifest))
}
