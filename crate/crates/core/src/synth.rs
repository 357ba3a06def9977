//! Synthetic labeled scenes: land, water and cloud pixels drawn from
//! Gaussian blobs in 13-band reflectance space, laid out in square patches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::raster::{default_band_names, BandStack, Class, LabelMask, SENTINEL2_BANDS};

/// Blob means per class (land, water, cloud), B01..B12.
pub const CLASS_MEANS: [[f32; 13]; 3] = [
    [0.08, 0.07, 0.09, 0.08, 0.14, 0.25, 0.30, 0.33, 0.35, 0.12, 0.02, 0.22, 0.14],
    [0.09, 0.08, 0.07, 0.05, 0.04, 0.03, 0.03, 0.02, 0.02, 0.01, 0.01, 0.01, 0.01],
    [0.55, 0.55, 0.56, 0.58, 0.58, 0.59, 0.60, 0.60, 0.60, 0.30, 0.10, 0.45, 0.35],
];

#[derive(Clone, Debug)]
pub struct SceneConfig {
    pub height: usize,
    pub width: usize,
    /// Side of the square patches that share one class.
    pub patch: usize,
    pub sigma: f32,
    /// Probability that a pixel is invalid (label 0, masked out).
    pub invalid_fraction: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            height: 256,
            width: 256,
            patch: 16,
            sigma: 0.02,
            invalid_fraction: 0.0,
            seed: 0,
        }
    }
}

/// Smallest Euclidean distance between two class means.
pub fn min_mean_separation() -> f64 {
    let mut best = f64::INFINITY;
    for a in 0..3 {
        for b in a + 1..3 {
            let d: f64 = CLASS_MEANS[a]
                .iter()
                .zip(&CLASS_MEANS[b])
                .map(|(x, y)| ((x - y) as f64).powi(2))
                .sum::<f64>()
                .sqrt();
            best = best.min(d);
        }
    }
    best
}

pub fn blob_scene(config: &SceneConfig) -> (BandStack, LabelMask) {
    let (h, w) = (config.height, config.width);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let patch = config.patch.max(1);
    let (ph, pw) = (h.div_ceil(patch), w.div_ceil(patch));
    let patch_class: Vec<Class> = (0..ph * pw)
        .map(|_| Class::TRAINABLE[rng.random_range(0..3)])
        .collect();

    let noise = Normal::new(0.0f32, config.sigma).expect("sigma is finite and non-negative");
    let bands = SENTINEL2_BANDS.len();
    let mut data = vec![0.0f32; h * w * bands];
    let mut valid = vec![true; h * w];
    let mut labels = vec![0u8; h * w];
    for r in 0..h {
        for c in 0..w {
            let idx = r * w + c;
            let class = patch_class[(r / patch) * pw + c / patch];
            let mean = &CLASS_MEANS[class.id() as usize - 1];
            for (b, m) in mean.iter().enumerate() {
                data[b * h * w + idx] = m + noise.sample(&mut rng);
            }
            if config.invalid_fraction > 0.0 && rng.random::<f64>() < config.invalid_fraction {
                valid[idx] = false;
            } else {
                labels[idx] = class.id();
            }
        }
    }
    let stack = BandStack::with_mask(h, w, default_band_names(bands), data, valid).expect("finite synthetic data");
    let labels = LabelMask::new(h, w, labels).expect("class ids in range");
    (stack, labels)
}

/// A `dim`-band latent field: a fixed random linear map of each pixel's band
/// vector, so latent vectors are deterministic functions of the raw ones.
pub fn projected_latent(stack: &BandStack, dim: usize, seed: u64) -> BandStack {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0f32, 1.0).unwrap();
    let bands = stack.bands();
    let weights: Vec<f32> = (0..dim * bands).map(|_| normal.sample(&mut rng)).collect();
    let n = stack.pixels();
    let mut data = vec![0.0f32; dim * n];
    let mut px = vec![0.0f32; bands];
    for i in 0..n {
        stack.pixel_into(i, &mut px);
        for k in 0..dim {
            let row = &weights[k * bands..(k + 1) * bands];
            data[k * n + i] = row.iter().zip(&px).map(|(a, b)| a * b).sum();
        }
    }
    let data = data
        .into_iter()
        .map(|v| if v.is_finite() { v } else { 0.0 })
        .collect();
    BandStack::with_mask(
        stack.height(),
        stack.width(),
        default_band_names(dim),
        data,
        stack.valid_mask().to_vec(),
    )
    .expect("projection preserves shape")
}
