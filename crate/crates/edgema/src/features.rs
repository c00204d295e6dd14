//! Texture feature vectors: grids of GLCM offsets and the per-offset
//! property values, in a fixed deterministic order.
//!
//! Ordering is angle-major (0, 45, 90, 135 degrees), then distance
//! ascending, then the six properties in `TexturePropertySet` order. The
//! full grid spans distances 1..=30 for each angle (720 features); the
//! reduced grid keeps the two best distances per angle (48 features).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::GrayFrame;
use crate::glcm::{Angle, Glcm, GlcmOffset};

/// Number of features in the full 4-angle x 30-distance grid.
pub const FULL_FEATURE_COUNT: usize = 720;
/// Number of features in the reduced 4-angle x 2-distance grid.
pub const REDUCED_FEATURE_COUNT: usize = 48;
/// Default quantization level count for feature extraction.
pub const DEFAULT_LEVELS: usize = 32;

/// One of the six texture properties, in canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextureProperty {
    Contrast,
    Correlation,
    Homogeneity,
    AngularSecondMoment,
    Dissimilarity,
    Energy,
}

impl TextureProperty {
    pub const ALL: [TextureProperty; 6] = [
        TextureProperty::Contrast,
        TextureProperty::Correlation,
        TextureProperty::Homogeneity,
        TextureProperty::AngularSecondMoment,
        TextureProperty::Dissimilarity,
        TextureProperty::Energy,
    ];
}

/// Identifies one feature: which offset it came from and which property.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub angle: Angle,
    pub distance: u32,
    pub property: TextureProperty,
}

/// Extracted feature values with their matching descriptors.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub descriptors: Vec<FeatureDescriptor>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// An ordered list of GLCM offsets to extract features from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureGrid {
    offsets: Vec<GlcmOffset>,
}

impl FeatureGrid {
    /// All four angles, distances 1..=30: 120 offsets, 720 features.
    pub fn full() -> FeatureGrid {
        let mut offsets = Vec::with_capacity(120);
        for angle in Angle::ALL {
            for d in 1..=30 {
                offsets.push(GlcmOffset { angle, distance: d });
            }
        }
        FeatureGrid { offsets }
    }

    /// The two best distances per angle: d={5,9} at 0, {4,11} at 45,
    /// {2,4} at 90, {2,6} at 135. 8 offsets, 48 features.
    pub fn reduced() -> FeatureGrid {
        let spec: [(Angle, [u32; 2]); 4] = [
            (Angle::Deg0, [5, 9]),
            (Angle::Deg45, [4, 11]),
            (Angle::Deg90, [2, 4]),
            (Angle::Deg135, [2, 6]),
        ];
        let offsets = spec
            .iter()
            .flat_map(|&(angle, ds)| ds.into_iter().map(move |d| GlcmOffset { angle, distance: d }))
            .collect();
        FeatureGrid { offsets }
    }

    pub fn from_offsets(offsets: Vec<GlcmOffset>) -> Result<FeatureGrid> {
        if offsets.is_empty() {
            return Err(Error::invalid("feature grid must not be empty"));
        }
        Ok(FeatureGrid { offsets })
    }

    pub fn offsets(&self) -> &[GlcmOffset] {
        &self.offsets
    }

    pub fn feature_count(&self) -> usize {
        self.offsets.len() * TextureProperty::ALL.len()
    }

    pub fn descriptors(&self) -> Vec<FeatureDescriptor> {
        self.offsets
            .iter()
            .flat_map(|off| {
                TextureProperty::ALL.iter().map(|&property| FeatureDescriptor {
                    angle: off.angle,
                    distance: off.distance,
                    property,
                })
            })
            .collect()
    }
}

/// Named grid choice for configs and CLI flags.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Full,
    Reduced,
}

impl GridKind {
    pub fn grid(self) -> FeatureGrid {
        match self {
            GridKind::Full => FeatureGrid::full(),
            GridKind::Reduced => FeatureGrid::reduced(),
        }
    }
}

impl std::fmt::Display for GridKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GridKind::Full => write!(f, "full"),
            GridKind::Reduced => write!(f, "reduced"),
        }
    }
}

/// Quantize `frame` to `levels`, compute one GLCM per grid offset and emit
/// the six properties of each, in grid order.
pub fn extract_features(
    frame: &GrayFrame,
    grid: &FeatureGrid,
    levels: usize,
) -> Result<FeatureVector> {
    let values = extract_values(frame, grid, levels)?;
    Ok(FeatureVector {
        values,
        descriptors: grid.descriptors(),
    })
}

/// Same as [`extract_features`] without materializing descriptors; the
/// batch paths use this.
pub fn extract_values(frame: &GrayFrame, grid: &FeatureGrid, levels: usize) -> Result<Vec<f64>> {
    if frame.width() < 2 || frame.height() < 2 {
        return Err(Error::invalid(format!(
            "frame must be at least 2x2 for feature extraction, got {}x{}",
            frame.width(),
            frame.height()
        )));
    }
    if grid.offsets.is_empty() {
        return Err(Error::invalid("feature grid must not be empty"));
    }
    if !(2..=256).contains(&levels) {
        return Err(Error::invalid(format!(
            "quantization levels must be in 2..=256, got {levels}"
        )));
    }
    let quantized = frame.quantize(levels)?;
    let mut values = Vec::with_capacity(grid.feature_count());
    for &offset in &grid.offsets {
        let props = Glcm::compute(&quantized, offset, levels).properties();
        values.extend_from_slice(&props.as_array());
    }
    Ok(values)
}

/// Per-feature affine normalization fitted on a training set; maps each
/// feature to zero mean and unit deviation. Deviations below 1e-9 are
/// clamped so constant features stay finite.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Standardizer> {
        let first = rows
            .first()
            .ok_or_else(|| Error::invalid("cannot fit a standardizer on an empty set"))?;
        let dim = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for row in rows {
            if row.len() != dim {
                return Err(Error::invalid("inconsistent feature dimensions"));
            }
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n;
        }
        let mut var = vec![0.0; dim];
        for row in rows {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                let d = v - m;
                *s += d * d;
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt().max(1e-9)).collect();
        Ok(Standardizer { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn apply_all(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.apply(r)).collect()
    }
}
