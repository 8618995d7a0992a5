//! Impulse-noise injection and outlier masks.
//!
//! Randomness comes from ChaCha8 seeded with `seed_from_u64`; uniforms are
//! the top 53 bits of each `u64` scaled by `2^-53`. Pixels are visited in
//! column-major order, so a given `(seed, kind, density, shape)` always
//! corrupts the same pixels on every platform.

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ImageGrid, U_MAX, U_MIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    #[serde(rename = "rv")]
    RandomValued,
    #[serde(rename = "sp")]
    SaltAndPepper,
    Mixed,
}

impl NoiseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::RandomValued => "rv",
            NoiseKind::SaltAndPepper => "sp",
            NoiseKind::Mixed => "mixed",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rv" | "random-valued" | "random" => Ok(NoiseKind::RandomValued),
            "sp" | "salt-and-pepper" | "saltpepper" => Ok(NoiseKind::SaltAndPepper),
            "mixed" | "mix" => Ok(NoiseKind::Mixed),
            other => Err(Error::InvalidParameter(format!("unknown noise kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub density: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, density: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&density) {
            return Err(Error::InvalidParameter(format!(
                "noise density {density} outside [0, 1]"
            )));
        }
        Ok(Self {
            kind,
            density,
            seed,
        })
    }
}

struct Uniform(ChaCha8Rng);

impl Uniform {
    fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    fn next(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// A corrupted image together with the flat indices that were replaced.
#[derive(Debug, Clone, PartialEq)]
pub struct Corruption {
    pub image: ImageGrid,
    pub indices: Vec<usize>,
}

/// Applies impulse noise to `clean` (typically `K u0`).
///
/// Random-valued pixels are replaced by `Uniform[0, 1]` with probability
/// `r`; salt-and-pepper pixels by 0 or 1 with probability `r / 2` each.
/// Mixed noise picks a mechanism per pixel with probability 1/2 and then
/// corrupts at density `r` within it.
pub fn corrupt_with_indices(clean: &ImageGrid, spec: &NoiseSpec) -> Result<Corruption> {
    clean.ensure_unit_range()?;
    let r = spec.density;
    let mut rng = Uniform::new(spec.seed);
    let mut data = clean.data().to_vec();
    let mut indices = Vec::new();
    for (i, px) in data.iter_mut().enumerate() {
        let kind = match spec.kind {
            NoiseKind::Mixed => {
                if rng.next() < 0.5 {
                    NoiseKind::RandomValued
                } else {
                    NoiseKind::SaltAndPepper
                }
            }
            k => k,
        };
        let p = rng.next();
        let replaced = match kind {
            NoiseKind::RandomValued if p < r => Some(U_MIN + (U_MAX - U_MIN) * rng.next()),
            NoiseKind::SaltAndPepper if p < r / 2.0 => Some(U_MIN),
            NoiseKind::SaltAndPepper if p < r => Some(U_MAX),
            _ => None,
        };
        if let Some(value) = replaced {
            *px = value;
            indices.push(i);
        }
    }
    Ok(Corruption {
        image: clean.with_data(data)?,
        indices,
    })
}

pub fn corrupt(clean: &ImageGrid, spec: &NoiseSpec) -> Result<ImageGrid> {
    corrupt_with_indices(clean, spec).map(|c| c.image)
}

/// Binary prior `o`: 0 marks a pixel known to be an outlier, whose
/// fidelity term is switched off.
#[derive(Debug, Clone, PartialEq)]
pub struct OutlierMask {
    o: Vec<f64>,
}

impl OutlierMask {
    pub fn new(o: Vec<f64>) -> Result<Self> {
        if let Some(i) = o.iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidParameter(format!(
                "mask entry {i} = {} is not binary",
                o[i]
            )));
        }
        Ok(Self { o })
    }

    pub fn ones(n: usize) -> Self {
        Self { o: vec![1.0; n] }
    }

    pub fn values(&self) -> &[f64] {
        &self.o
    }

    pub fn len(&self) -> usize {
        self.o.len()
    }

    pub fn is_empty(&self) -> bool {
        self.o.is_empty()
    }

    pub fn known_outliers(&self) -> usize {
        self.o.iter().filter(|&&v| v == 0.0).count()
    }
}

/// How to derive `o` from an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskRule {
    /// All ones: any pixel may be an outlier.
    Rv,
    /// Pixels at the range extremes are known outliers.
    Sp,
}

impl MaskRule {
    pub fn for_noise(kind: NoiseKind) -> Self {
        match kind {
            NoiseKind::SaltAndPepper => MaskRule::Sp,
            // half of mixed outliers are random-valued and cannot be located
            NoiseKind::RandomValued | NoiseKind::Mixed => MaskRule::Rv,
        }
    }
}

impl FromStr for MaskRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rv" | "ones" => Ok(MaskRule::Rv),
            "sp" | "extremes" => Ok(MaskRule::Sp),
            other => Err(Error::InvalidParameter(format!("unknown mask rule {other:?}"))),
        }
    }
}

pub fn build_mask_with_rule(b: &ImageGrid, rule: MaskRule) -> OutlierMask {
    match rule {
        MaskRule::Rv => OutlierMask::ones(b.len()),
        MaskRule::Sp => OutlierMask {
            o: b.data()
                .iter()
                .map(|&v| if v == U_MIN || v == U_MAX { 0.0 } else { 1.0 })
                .collect(),
        },
    }
}

pub fn build_mask(b: &ImageGrid, kind: NoiseKind) -> OutlierMask {
    build_mask_with_rule(b, MaskRule::for_noise(kind))
}
