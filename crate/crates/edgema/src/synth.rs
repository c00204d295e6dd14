//! Synthetic multi-domain stream generator: procedural class textures
//! (stripes, checkers, blobs) pushed through per-domain appearance
//! transforms (gamma, gain, additive noise), written as PGM frames plus a
//! JSONL manifest with ground-truth labels and domains.

use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::GrayFrame;
use crate::manifest::{write_manifest, ManifestRecord};
use crate::pnm::write_pgm;
use crate::util::mix_seed;

/// Appearance transform of one domain. Pixels go through
/// v -> gain * (v/255)^gamma, rescaled to 8 bits, plus Gaussian noise of
/// `noise_sigma` gray levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub gain: f64,
    pub noise_sigma: f64,
    pub gamma: f64,
}

impl DomainSpec {
    pub fn label(&self, index: usize) -> String {
        self.name.clone().unwrap_or_else(|| format!("d{index}"))
    }
}

/// Procedural texture family of one object class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TextureClass {
    /// Sinusoidal horizontal bands with a random phase per frame.
    Stripes { period: f64 },
    /// Two-level checkerboard with random cell offsets per frame.
    Checker { size: usize },
    /// Sparse bright discs on a dark background.
    Blobs { density: f64 },
}

/// One schedule entry: a domain, a class mixture, and an optional frame
/// count (defaulting to the spec's `frames_per_segment`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub domain: usize,
    pub class_mix: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    #[serde(default = "default_dim")]
    pub width: usize,
    #[serde(default = "default_dim")]
    pub height: usize,
    #[serde(default = "default_fps")]
    pub fps: f64,
    pub domains: Vec<DomainSpec>,
    pub classes: Vec<TextureClass>,
    #[serde(default = "default_frames_per_segment")]
    pub frames_per_segment: usize,
    pub schedule: Vec<SegmentSpec>,
    pub seed: u64,
}

fn default_dim() -> usize {
    64
}

fn default_fps() -> f64 {
    25.0
}

fn default_frames_per_segment() -> usize {
    100
}

impl SynthSpec {
    pub fn load(path: &Path) -> Result<SynthSpec> {
        crate::util::read_json_file(path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::util::write_json_file(self, path)
    }

    fn validate(&self) -> Result<()> {
        if self.width < 2 || self.height < 2 {
            return Err(Error::invalid("synthetic frames must be at least 2x2"));
        }
        if self.fps.is_nan() || self.fps <= 0.0 {
            return Err(Error::invalid("fps must be positive"));
        }
        if self.domains.is_empty() || self.classes.is_empty() || self.schedule.is_empty() {
            return Err(Error::invalid(
                "domains, classes and schedule must be non-empty",
            ));
        }
        for d in &self.domains {
            let bad = |v: f64| v.is_nan() || v <= 0.0;
            if bad(d.gain) || bad(d.gamma) || d.noise_sigma.is_nan() || d.noise_sigma < 0.0 {
                return Err(Error::invalid(
                    "domain transforms need gain > 0, gamma > 0, noise_sigma >= 0",
                ));
            }
        }
        for (i, seg) in self.schedule.iter().enumerate() {
            if seg.domain >= self.domains.len() {
                return Err(Error::invalid(format!(
                    "segment {i} references domain {} of {}",
                    seg.domain,
                    self.domains.len()
                )));
            }
            if seg.class_mix.len() != self.classes.len() {
                return Err(Error::invalid(format!(
                    "segment {i} class mix has {} entries, expected {}",
                    seg.class_mix.len(),
                    self.classes.len()
                )));
            }
            let sum: f64 = seg.class_mix.iter().sum();
            if seg.class_mix.iter().any(|&p| p.is_nan() || p < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "segment {i} class mix must be a probability vector"
                )));
            }
            if seg.frames == Some(0) || (seg.frames.is_none() && self.frames_per_segment == 0) {
                return Err(Error::invalid(format!("segment {i} has zero frames")));
            }
        }
        Ok(())
    }
}

/// Render the configured stream into `out_dir` as zero-padded PGM files
/// plus `manifest.jsonl`, and return the manifest records.
///
/// Everything is derived from the spec seed: the class draw of frame i and
/// its rendering noise use decorrelated per-frame generators, so identical
/// specs produce byte-identical frame files.
pub fn synth_generate(spec: &SynthSpec, out_dir: &Path) -> Result<Vec<ManifestRecord>> {
    spec.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut schedule_rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, 0));
    let mut records = Vec::new();
    let mut frame_index = 0usize;
    for segment in &spec.schedule {
        let count = segment.frames.unwrap_or(spec.frames_per_segment);
        let domain = &spec.domains[segment.domain];
        let domain_label = domain.label(segment.domain);
        for _ in 0..count {
            let class = draw_class(&mut schedule_rng, &segment.class_mix);
            let mut frame_rng =
                ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, 1 + frame_index as u64));
            let frame = render_frame(spec, &spec.classes[class], domain, &mut frame_rng);
            let file_name = format!("frame_{frame_index:06}.pgm");
            write_pgm(&frame, &out_dir.join(&file_name))?;
            records.push(ManifestRecord {
                path: file_name,
                label: class,
                timestamp: frame_index as f64 / spec.fps,
                domain: Some(domain_label.clone()),
            });
            frame_index += 1;
        }
    }
    write_manifest(&records, &out_dir.join("manifest.jsonl"))?;
    Ok(records)
}

fn draw_class(rng: &mut ChaCha8Rng, mix: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    for (i, &p) in mix.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return i;
        }
    }
    mix.len() - 1
}

fn render_frame(
    spec: &SynthSpec,
    class: &TextureClass,
    domain: &DomainSpec,
    rng: &mut ChaCha8Rng,
) -> GrayFrame {
    let (w, h) = (spec.width, spec.height);
    let mut texture = vec![0.0f64; w * h];
    match class {
        TextureClass::Stripes { period } => {
            let period = period.max(2.0);
            let phase: f64 = rng.random::<f64>() * period;
            for r in 0..h {
                let v = 130.0 + 70.0 * (TAU * (r as f64 + phase) / period).sin();
                for c in 0..w {
                    texture[r * w + c] = v;
                }
            }
        }
        TextureClass::Checker { size } => {
            let size = (*size).max(1);
            let off_r = rng.random_range(0..size);
            let off_c = rng.random_range(0..size);
            for r in 0..h {
                for c in 0..w {
                    let cell = ((r + off_r) / size + (c + off_c) / size) % 2;
                    texture[r * w + c] = if cell == 0 { 70.0 } else { 190.0 };
                }
            }
        }
        TextureClass::Blobs { density } => {
            for t in texture.iter_mut() {
                *t = 60.0;
            }
            let dots = ((density * (w * h) as f64).round() as usize).max(1);
            for _ in 0..dots {
                let cr = rng.random_range(0..h) as isize;
                let cc = rng.random_range(0..w) as isize;
                for dr in -2isize..=2 {
                    for dc in -2isize..=2 {
                        if dr * dr + dc * dc > 4 {
                            continue;
                        }
                        let (r, c) = (cr + dr, cc + dc);
                        if r >= 0 && c >= 0 && (r as usize) < h && (c as usize) < w {
                            texture[r as usize * w + c as usize] = 210.0;
                        }
                    }
                }
            }
        }
    }

    let intensities = texture
        .into_iter()
        .map(|t| {
            let shaped = domain.gain * (t / 255.0).powf(domain.gamma) * 255.0;
            let noisy = if domain.noise_sigma > 0.0 {
                shaped + domain.noise_sigma * gaussian(rng)
            } else {
                shaped
            };
            noisy.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayFrame::new(w, h, intensities).expect("dimensions validated")
}

/// Standard normal draw via Box-Muller.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}
