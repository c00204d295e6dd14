//! Extracted-feature datasets: the JSON interchange between `features
//! extract`, `select`, `domain train` and `model train`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_values, FeatureDescriptor, GridKind};
use crate::manifest::{read_manifest, resolve_frame_path};
use crate::pnm::read_frame;
use crate::util::{read_json_file, write_json_file};

pub const FEATURE_SET_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub path: String,
    pub label: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    pub values: Vec<f64>,
}

/// Features of every frame of a manifest, with the grid and quantization
/// they were extracted under.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub version: u32,
    pub grid: GridKind,
    pub levels: usize,
    pub descriptors: Vec<FeatureDescriptor>,
    pub records: Vec<FeatureRecord>,
}

impl FeatureSet {
    /// Load every frame of `manifest_path` and extract its features.
    pub fn extract_from_manifest(
        manifest_path: &Path,
        grid: GridKind,
        levels: usize,
    ) -> Result<FeatureSet> {
        let records = read_manifest(manifest_path)?;
        if records.is_empty() {
            return Err(Error::malformed(manifest_path, "manifest is empty"));
        }
        let feature_grid = grid.grid();
        let mut out = Vec::with_capacity(records.len());
        for record in &records {
            let frame = read_frame(&resolve_frame_path(manifest_path, record))?.into_gray();
            let values = extract_values(&frame, &feature_grid, levels)?;
            out.push(FeatureRecord {
                path: record.path.clone(),
                label: record.label,
                domain: record.domain.clone(),
                values,
            });
        }
        Ok(FeatureSet {
            version: FEATURE_SET_VERSION,
            grid,
            levels,
            descriptors: feature_grid.descriptors(),
            records: out,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json_file(self, path)
    }

    pub fn load(path: &Path) -> Result<FeatureSet> {
        let set: FeatureSet = read_json_file(path)?;
        if set.version != FEATURE_SET_VERSION {
            return Err(Error::malformed(
                path,
                format!("unsupported feature set version {}", set.version),
            ));
        }
        Ok(set)
    }

    pub fn feature_rows(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.values.clone()).collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.label).collect()
    }

    /// Sorted unique domain names plus each record's index into that list.
    /// Errors if any record lacks a domain tag.
    pub fn domain_classes(&self) -> Result<(Vec<String>, Vec<usize>)> {
        let mut names: Vec<String> = Vec::new();
        for record in &self.records {
            let domain = record.domain.as_ref().ok_or_else(|| {
                Error::invalid(format!("record {:?} has no domain tag", record.path))
            })?;
            if !names.iter().any(|n| n == domain) {
                names.push(domain.clone());
            }
        }
        names.sort();
        let indices = self
            .records
            .iter()
            .map(|r| {
                let d = r.domain.as_ref().expect("checked above");
                names.iter().position(|n| n == d).expect("collected above")
            })
            .collect();
        Ok((names, indices))
    }
}
