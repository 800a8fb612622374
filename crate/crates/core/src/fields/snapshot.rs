//! Snapshot file format: one little-endian f64 array per field in axis-major
//! (C) order, plus a JSON manifest with the grid, physical parameters, time
//! stamp, and field names.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GridSpec, ScalarField};
use crate::error::CoreError;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotManifest {
    pub grid: GridSpec,
    pub time: f64,
    pub fields: Vec<String>,
    pub mu: f64,
    pub lambda: f64,
    pub rho_floor: f64,
    pub vacuum_threshold: f64,
    /// Run-loop metadata; absent for snapshots written outside a run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_rho_mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_p_mass: Option<f64>,
}

pub fn write_manifest(dir: &Path, manifest: &SnapshotManifest) -> Result<(), CoreError> {
    fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| CoreError::SnapshotManifest(e.to_string()))?;
    fs::write(dir.join(MANIFEST_NAME), json)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<SnapshotManifest, CoreError> {
    let json = fs::read_to_string(dir.join(MANIFEST_NAME))?;
    serde_json::from_str(&json).map_err(|e| CoreError::SnapshotManifest(e.to_string()))
}

pub fn write_field(dir: &Path, name: &str, field: &ScalarField) -> Result<(), CoreError> {
    fs::create_dir_all(dir)?;
    let mut buf = Vec::with_capacity(field.values().len() * 8);
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = fs::File::create(dir.join(format!("{name}.bin")))?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn read_field(dir: &Path, name: &str, grid: &GridSpec) -> Result<ScalarField, CoreError> {
    let mut file = fs::File::open(dir.join(format!("{name}.bin")))?;
    let mut buf = Vec::new();
    file.read_to_end(&mut buf)?;
    let expected = grid.node_count() * 8;
    if buf.len() != expected {
        return Err(CoreError::SnapshotIo(format!(
            "field '{name}': expected {expected} bytes, found {}",
            buf.len()
        )));
    }
    let values = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    ScalarField::new(grid.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GridSpec::new(2, 8, 1.0).unwrap();
        let f = ScalarField::from_fn(&grid, |x| x[0] * 3.0 - x[1]);
        write_field(dir.path(), "rho", &f).unwrap();
        let g = read_field(dir.path(), "rho", &grid).unwrap();
        assert_eq!(f.values(), g.values());
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = SnapshotManifest {
            grid: GridSpec::new(3, 8, 2.0).unwrap(),
            time: 0.25,
            fields: vec!["rho".into(), "m0".into()],
            mu: 1.0,
            lambda: 0.1,
            rho_floor: 1e-10,
            vacuum_threshold: 1e-8,
            step: Some(12),
            dt: Some(1e-3),
            clip_rho_mass: None,
            clip_p_mass: None,
        };
        write_manifest(dir.path(), &manifest).unwrap();
        let back = read_manifest(dir.path()).unwrap();
        assert_eq!(back.fields, manifest.fields);
        assert_eq!(back.step, Some(12));
        assert_eq!(back.grid, manifest.grid);
    }

    #[test]
    fn truncated_field_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GridSpec::new(2, 8, 1.0).unwrap();
        std::fs::write(dir.path().join("p.bin"), [0u8; 24]).unwrap();
        assert!(read_field(dir.path(), "p", &grid).is_err());
    }
}
