//! Per-pixel feature vectors: raw band vectors or externally supplied latent
//! vectors, optionally L2-normalized.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::raster::{read_band_stack, BandStack};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Raw,
    Latent,
}

/// Which space pixels are compared in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpace {
    pub kind: FeatureKind,
    pub dimension: usize,
    pub normalize: bool,
}

impl FeatureSpace {
    pub const DEFAULT_LATENT_DIM: usize = 64;

    pub fn raw(dimension: usize) -> Self {
        Self {
            kind: FeatureKind::Raw,
            dimension,
            normalize: true,
        }
    }

    pub fn latent(dimension: usize) -> Self {
        Self {
            kind: FeatureKind::Latent,
            dimension,
            normalize: true,
        }
    }

    pub fn with_normalize(self, normalize: bool) -> Self {
        Self { normalize, ..self }
    }

    /// True when decision vectors are the raw band values themselves.
    pub fn is_identity(&self) -> bool {
        self.kind == FeatureKind::Raw && !self.normalize
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::Config("feature dimension must be at least 1".into()));
        }
        Ok(())
    }
}

/// `v / ||v||`.
pub fn l2_normalize(v: &[f32]) -> Result<Vec<f32>> {
    let mut out = v.to_vec();
    normalize_in_place(&mut out)?;
    Ok(out)
}

pub fn normalize_in_place(v: &mut [f32]) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::DegenerateVector("non-finite component"));
    }
    let norm = v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::DegenerateVector("zero norm"));
    }
    for x in v.iter_mut() {
        *x = ((*x as f64) / norm) as f32;
    }
    Ok(())
}

/// H×W feature vectors, pixel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureField {
    height: usize,
    width: usize,
    dimension: usize,
    vectors: Vec<f32>,
    valid: Vec<bool>,
}

impl FeatureField {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn is_valid_index(&self, index: usize) -> bool {
        self.valid[index]
    }

    /// Vector at row-major pixel `index`. Meaningless at invalid pixels.
    pub fn vector(&self, index: usize) -> &[f32] {
        &self.vectors[index * self.dimension..(index + 1) * self.dimension]
    }

    pub fn at(&self, row: usize, col: usize) -> Option<&[f32]> {
        let idx = row * self.width + col;
        self.valid[idx].then(|| self.vector(idx))
    }
}

/// Extracts features for every pixel of `stack`. `latent` must be given iff
/// `space` is latent and must match the stack's extent.
pub fn extract_features(
    stack: &BandStack,
    space: &FeatureSpace,
    latent: Option<&BandStack>,
) -> Result<FeatureField> {
    space.validate()?;
    let source = match (space.kind, latent) {
        (FeatureKind::Raw, _) => {
            if stack.bands() != space.dimension {
                return Err(Error::DimensionMismatch(format!(
                    "raw feature space has {} dims but stack has {} bands",
                    space.dimension,
                    stack.bands()
                )));
            }
            stack
        }
        (FeatureKind::Latent, None) => return Err(Error::MissingLatent),
        (FeatureKind::Latent, Some(l)) => {
            if l.bands() != space.dimension {
                return Err(Error::DimensionMismatch(format!(
                    "latent feature space has {} dims but latent file has {}",
                    space.dimension,
                    l.bands()
                )));
            }
            if (l.height(), l.width()) != (stack.height(), stack.width()) {
                return Err(Error::DimensionMismatch(format!(
                    "latent field {}x{} vs stack {}x{}",
                    l.height(),
                    l.width(),
                    stack.height(),
                    stack.width()
                )));
            }
            l
        }
    };

    let dim = space.dimension;
    let pixels = stack.pixels();
    let input_valid: Vec<bool> = stack
        .valid_mask()
        .iter()
        .zip(source.valid_mask())
        .map(|(&a, &b)| a && b)
        .collect();

    const CHUNK_PIXELS: usize = 4096;
    let chunks = par::map_range(pixels.div_ceil(CHUNK_PIXELS), |ci| {
        let start = ci * CHUNK_PIXELS;
        let end = (start + CHUNK_PIXELS).min(pixels);
        let mut vectors = vec![0.0f32; (end - start) * dim];
        let mut ok = vec![false; end - start];
        for (j, v) in vectors.chunks_exact_mut(dim).enumerate() {
            if !input_valid[start + j] {
                continue;
            }
            source.pixel_into(start + j, v);
            ok[j] = v.iter().all(|x| x.is_finite()) && (!space.normalize || normalize_in_place(v).is_ok());
            if !ok[j] {
                v.iter_mut().for_each(|x| *x = 0.0);
            }
        }
        (vectors, ok)
    });
    let mut vectors = Vec::with_capacity(pixels * dim);
    let mut valid = Vec::with_capacity(pixels);
    for (v, ok) in chunks {
        vectors.extend_from_slice(&v);
        valid.extend_from_slice(&ok);
    }

    Ok(FeatureField {
        height: stack.height(),
        width: stack.width(),
        dimension: dim,
        vectors,
        valid,
    })
}

/// [`extract_features`] reading the latent field from a BST1 file.
pub fn extract_features_from_path(
    stack: &BandStack,
    space: &FeatureSpace,
    latent_path: Option<&Path>,
) -> Result<FeatureField> {
    let latent = match (space.kind, latent_path) {
        (FeatureKind::Latent, Some(p)) => Some(read_band_stack(p)?),
        (FeatureKind::Latent, None) => return Err(Error::MissingLatent),
        (FeatureKind::Raw, _) => None,
    };
    extract_features(stack, space, latent.as_ref())
}
