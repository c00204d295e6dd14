//! Gray-level co-occurrence matrices and the six Haralick-style texture
//! properties derived from them.
//!
//! `Glcm::compute` counts directed pixel pairs at a fixed (angle, distance)
//! offset. The raw directed counts stay available for verification; the
//! probability matrix is the symmetrized, normalized form used by the
//! texture properties.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::GrayFrame;

/// Co-occurrence direction. Offsets are (row step, column step) per distance
/// d: 0 deg -> (0, d), 45 deg -> (-d, d), 90 deg -> (-d, 0), 135 deg -> (-d, -d).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub enum Angle {
    Deg0,
    Deg45,
    Deg90,
    Deg135,
}

impl Angle {
    pub const ALL: [Angle; 4] = [Angle::Deg0, Angle::Deg45, Angle::Deg90, Angle::Deg135];

    pub fn degrees(self) -> u16 {
        match self {
            Angle::Deg0 => 0,
            Angle::Deg45 => 45,
            Angle::Deg90 => 90,
            Angle::Deg135 => 135,
        }
    }

    /// (row step, column step) for distance `d`.
    pub fn displacement(self, d: u32) -> (isize, isize) {
        let d = d as isize;
        match self {
            Angle::Deg0 => (0, d),
            Angle::Deg45 => (-d, d),
            Angle::Deg90 => (-d, 0),
            Angle::Deg135 => (-d, -d),
        }
    }
}

impl TryFrom<u16> for Angle {
    type Error = String;

    fn try_from(value: u16) -> std::result::Result<Self, String> {
        match value {
            0 => Ok(Angle::Deg0),
            45 => Ok(Angle::Deg45),
            90 => Ok(Angle::Deg90),
            135 => Ok(Angle::Deg135),
            other => Err(format!("angle must be one of 0/45/90/135, got {other}")),
        }
    }
}

impl From<Angle> for u16 {
    fn from(a: Angle) -> u16 {
        a.degrees()
    }
}

/// One co-occurrence offset: a direction plus a pixel distance >= 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GlcmOffset {
    pub angle: Angle,
    pub distance: u32,
}

impl GlcmOffset {
    pub fn new(angle: Angle, distance: u32) -> Result<Self> {
        if distance == 0 {
            return Err(Error::invalid("glcm offset distance must be >= 1"));
        }
        Ok(Self { angle, distance })
    }

    pub fn displacement(self) -> (isize, isize) {
        self.angle.displacement(self.distance)
    }
}

/// Co-occurrence matrix over `levels` quantized gray levels.
#[derive(Clone, Debug, PartialEq)]
pub struct Glcm {
    levels: usize,
    counts: Vec<u64>,
    probs: Vec<f64>,
}

impl Glcm {
    /// Count directed pixel pairs of `frame` at `offset`, then symmetrize and
    /// normalize into probabilities.
    ///
    /// `frame` is expected to be quantized to `levels`; intensities at or
    /// above `levels` are ignored. An offset larger than the frame yields the
    /// all-zero matrix.
    ///
    /// # Panics
    /// If `levels` is outside 2..=256.
    pub fn compute(frame: &GrayFrame, offset: GlcmOffset, levels: usize) -> Glcm {
        assert!(
            (2..=256).contains(&levels),
            "glcm levels must be in 2..=256, got {levels}"
        );
        let (dr, dc) = offset.displacement();
        let (h, w) = (frame.height() as isize, frame.width() as isize);
        let mut counts = vec![0u64; levels * levels];

        let row_range = (-dr).max(0)..(h - dr).min(h);
        let col_range = (-dc).max(0)..(w - dc).min(w);
        for r in row_range {
            for c in col_range.clone() {
                let i = frame.intensity(r as usize, c as usize) as usize;
                let j = frame.intensity((r + dr) as usize, (c + dc) as usize) as usize;
                if i < levels && j < levels {
                    counts[i * levels + j] += 1;
                }
            }
        }

        let mut probs = vec![0.0; levels * levels];
        let total: u64 = counts.iter().sum();
        if total > 0 {
            let denom = (2 * total) as f64;
            for i in 0..levels {
                for j in 0..levels {
                    let sym = counts[i * levels + j] + counts[j * levels + i];
                    probs[i * levels + j] = sym as f64 / denom;
                }
            }
        }

        Glcm {
            levels,
            counts,
            probs,
        }
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Raw directed pair count for (i, j), before symmetrization.
    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.levels + j]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Symmetrized, normalized co-occurrence probability for (i, j).
    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.levels + j]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// The six texture properties of this matrix.
    pub fn properties(&self) -> TexturePropertySet {
        texture_properties(self)
    }

    #[cfg(test)]
    pub(crate) fn from_probs(levels: usize, probs: Vec<f64>) -> Glcm {
        assert_eq!(probs.len(), levels * levels);
        Glcm {
            levels,
            counts: vec![0; levels * levels],
            probs,
        }
    }
}

/// The six scalar texture properties of a normalized GLCM.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TexturePropertySet {
    pub contrast: f64,
    pub correlation: f64,
    pub homogeneity: f64,
    pub angular_second_moment: f64,
    pub dissimilarity: f64,
    pub energy: f64,
}

impl TexturePropertySet {
    /// Values in the canonical feature order: contrast, correlation,
    /// homogeneity, angular second moment, dissimilarity, energy.
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.contrast,
            self.correlation,
            self.homogeneity,
            self.angular_second_moment,
            self.dissimilarity,
            self.energy,
        ]
    }
}

/// Compute contrast, correlation, homogeneity, angular second moment,
/// dissimilarity and energy from a normalized GLCM.
///
/// Correlation is defined as 1 when either marginal deviation is zero.
pub fn texture_properties(glcm: &Glcm) -> TexturePropertySet {
    let n = glcm.levels;
    let p = &glcm.probs;

    let mut contrast = 0.0;
    let mut dissimilarity = 0.0;
    let mut homogeneity = 0.0;
    let mut asm = 0.0;
    let mut mu_i = 0.0;
    let mut mu_j = 0.0;
    for i in 0..n {
        for j in 0..n {
            let pij = p[i * n + j];
            let diff = i as f64 - j as f64;
            contrast += pij * diff * diff;
            dissimilarity += pij * diff.abs();
            homogeneity += pij / (1.0 + diff * diff);
            asm += pij * pij;
            mu_i += i as f64 * pij;
            mu_j += j as f64 * pij;
        }
    }

    let mut var_i = 0.0;
    let mut var_j = 0.0;
    let mut cov = 0.0;
    for i in 0..n {
        for j in 0..n {
            let pij = p[i * n + j];
            let di = i as f64 - mu_i;
            let dj = j as f64 - mu_j;
            var_i += di * di * pij;
            var_j += dj * dj * pij;
            cov += di * dj * pij;
        }
    }
    let sigma = var_i.sqrt() * var_j.sqrt();
    let correlation = if sigma == 0.0 { 1.0 } else { cov / sigma };

    TexturePropertySet {
        contrast,
        correlation,
        homogeneity,
        angular_second_moment: asm,
        dissimilarity,
        energy: asm.sqrt(),
    }
}
