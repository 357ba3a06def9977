//! Mini-batch K-means whose assignment decisions are made in the latent space
//! while every center also tracks the running mean of its points in the raw
//! band space.
//!
//! Each sampled point moves its center by `1/count` toward itself in both
//! spaces, so after fitting `raw` is exactly the mean of the raw vectors of
//! the points that were folded into the center, in assignment order.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KMeansInit {
    #[serde(rename = "kmeans_pp")]
    KMeansPlusPlus,
    RandomPoints,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub m: usize,
    pub batch_size: usize,
    pub max_iterations: usize,
    pub seed: u64,
    pub init: KMeansInit,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            m: 500,
            batch_size: 1024,
            max_iterations: 100,
            seed: 42,
            init: KMeansInit::KMeansPlusPlus,
        }
    }
}

impl KMeansConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Index-aligned latent/raw vectors; entry `j` in both describes one pixel.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DualPointSet {
    latent_dim: usize,
    raw_dim: usize,
    latent: Vec<f32>,
    raw: Vec<f32>,
}

impl DualPointSet {
    pub fn new(latent_dim: usize, raw_dim: usize) -> Self {
        Self {
            latent_dim,
            raw_dim,
            latent: Vec::new(),
            raw: Vec::new(),
        }
    }

    pub fn with_capacity(latent_dim: usize, raw_dim: usize, n: usize) -> Self {
        Self {
            latent_dim,
            raw_dim,
            latent: Vec::with_capacity(n * latent_dim),
            raw: Vec::with_capacity(n * raw_dim),
        }
    }

    /// Points whose raw and latent representations coincide.
    pub fn single_space(dim: usize, points: Vec<f32>) -> Result<Self> {
        Self::from_flat(dim, dim, points.clone(), points)
    }

    pub fn from_flat(latent_dim: usize, raw_dim: usize, latent: Vec<f32>, raw: Vec<f32>) -> Result<Self> {
        if latent_dim == 0 || raw_dim == 0 {
            return Err(Error::DimensionMismatch("point dimensions must be positive".into()));
        }
        if !latent.len().is_multiple_of(latent_dim) || !raw.len().is_multiple_of(raw_dim) {
            return Err(Error::DimensionMismatch("flat buffers are not whole vectors".into()));
        }
        if latent.len() / latent_dim != raw.len() / raw_dim {
            return Err(Error::DimensionMismatch(format!(
                "{} latent vs {} raw points",
                latent.len() / latent_dim,
                raw.len() / raw_dim
            )));
        }
        Ok(Self {
            latent_dim,
            raw_dim,
            latent,
            raw,
        })
    }

    pub fn push(&mut self, latent: &[f32], raw: &[f32]) -> Result<()> {
        if latent.len() != self.latent_dim || raw.len() != self.raw_dim {
            return Err(Error::DimensionMismatch(format!(
                "point ({}, {}) into set ({}, {})",
                latent.len(),
                raw.len(),
                self.latent_dim,
                self.raw_dim
            )));
        }
        self.latent.extend_from_slice(latent);
        self.raw.extend_from_slice(raw);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.latent.len().checked_div(self.latent_dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn raw_dim(&self) -> usize {
        self.raw_dim
    }

    pub fn latent(&self, i: usize) -> &[f32] {
        &self.latent[i * self.latent_dim..(i + 1) * self.latent_dim]
    }

    pub fn raw(&self, i: usize) -> &[f32] {
        &self.raw[i * self.raw_dim..(i + 1) * self.raw_dim]
    }

    fn check_finite(&self) -> Result<()> {
        if let Some(i) = self.latent.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("latent point {}", i / self.latent_dim)));
        }
        if let Some(i) = self.raw.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("raw point {}", i / self.raw_dim)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualCenter {
    pub latent: Vec<f64>,
    pub raw: Vec<f64>,
    /// Number of sampled points folded into this center.
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitSummary {
    pub centers: Vec<DualCenter>,
    /// Total center updates: sampled assignments plus reseeds.
    pub updates: u64,
    pub reseeded: usize,
    /// Empty centers that could not be reseeded because every point already
    /// coincides with a center.
    pub dropped: usize,
}

#[inline]
pub(crate) fn sq_dist(center: &[f64], point: &[f32]) -> f64 {
    center
        .iter()
        .zip(point)
        .map(|(&c, &p)| {
            let d = c - p as f64;
            d * d
        })
        .sum()
}

/// Nearest center by squared distance; ties go to the lower index.
#[inline]
fn nearest(centers: &[Vec<f64>], point: &[f32]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = sq_dist(c, point);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn to_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

fn seed_center(points: &DualPointSet, i: usize) -> DualCenter {
    DualCenter {
        latent: to_f64(points.latent(i)),
        raw: to_f64(points.raw(i)),
        count: 0,
    }
}

/// k-means++ seeding in the latent space. Returns fewer than `m` centers
/// when the set has fewer distinct latent vectors.
pub fn kmeanspp_init(points: &DualPointSet, m: usize, seed: u64) -> Result<Vec<DualCenter>> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(kmeanspp_with(points, m, &mut rng))
}

fn kmeanspp_with(points: &DualPointSet, m: usize, rng: &mut ChaCha8Rng) -> Vec<DualCenter> {
    let n = points.len();
    let first = rng.random_range(0..n);
    let mut centers = vec![seed_center(points, first)];
    let mut d2 = par::map_range(n, |i| sq_dist(&centers[0].latent, points.latent(i)));

    while centers.len() < m {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = None;
        for (i, &d) in d2.iter().enumerate() {
            acc += d;
            if acc > target && d > 0.0 {
                chosen = Some(i);
                break;
            }
        }
        // Rounding can leave `target` at the very top of the range.
        let chosen = chosen.or_else(|| d2.iter().rposition(|&d| d > 0.0)).expect("total > 0");
        let center = seed_center(points, chosen);
        d2 = par::map_range(n, |i| d2[i].min(sq_dist(&center.latent, points.latent(i))));
        centers.push(center);
    }
    centers
}

/// Uniformly sampled distinct (in latent space) points.
pub fn random_init(points: &DualPointSet, m: usize, seed: u64) -> Result<Vec<DualCenter>> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(random_with(points, m, &mut rng))
}

fn random_with(points: &DualPointSet, m: usize, rng: &mut ChaCha8Rng) -> Vec<DualCenter> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.shuffle(rng);
    let mut chosen: Vec<usize> = Vec::with_capacity(m);
    for i in order {
        if chosen.len() == m {
            break;
        }
        if chosen.iter().all(|&c| points.latent(c) != points.latent(i)) {
            chosen.push(i);
        }
    }
    chosen.into_iter().map(|i| seed_center(points, i)).collect()
}

#[inline]
fn step_toward(center: &mut [f64], point: &[f32], count: u64) {
    if count == 1 {
        for (c, &p) in center.iter_mut().zip(point) {
            *c = p as f64;
        }
    } else {
        let eta = 1.0 / count as f64;
        for (c, &p) in center.iter_mut().zip(point) {
            *c += eta * (p as f64 - *c);
        }
    }
}

pub fn fit(points: &DualPointSet, config: &KMeansConfig) -> Result<Vec<DualCenter>> {
    fit_with_summary(points, config).map(|s| s.centers)
}

pub fn fit_with_summary(points: &DualPointSet, config: &KMeansConfig) -> Result<FitSummary> {
    config.validate()?;
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    points.check_finite()?;

    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut centers = match config.init {
        KMeansInit::KMeansPlusPlus => kmeanspp_with(points, config.m, &mut rng),
        KMeansInit::RandomPoints => random_with(points, config.m, &mut rng),
    };
    let mut latent: Vec<Vec<f64>> = centers.iter_mut().map(|c| std::mem::take(&mut c.latent)).collect();
    let mut raw: Vec<Vec<f64>> = centers.iter_mut().map(|c| std::mem::take(&mut c.raw)).collect();
    let mut counts = vec![0u64; latent.len()];
    let mut updates = 0u64;

    let mut batch = vec![0usize; config.batch_size];
    for _ in 0..config.max_iterations {
        for slot in batch.iter_mut() {
            *slot = rng.random_range(0..n);
        }
        // Assignments use the centers as they stood at the start of the batch.
        let assigned = par::map_slice(&batch, |&i| nearest(&latent, points.latent(i)).0);
        for (&i, &c) in batch.iter().zip(&assigned) {
            counts[c] += 1;
            step_toward(&mut latent[c], points.latent(i), counts[c]);
            step_toward(&mut raw[c], points.raw(i), counts[c]);
            updates += 1;
        }
    }

    let empty: Vec<usize> = (0..counts.len()).filter(|&c| counts[c] == 0).collect();
    let mut reseeded = 0;
    let mut dropped = Vec::new();
    if !empty.is_empty() {
        let live: Vec<Vec<f64>> = (0..counts.len()).filter(|&c| counts[c] > 0).map(|c| latent[c].clone()).collect();
        let mut d2 = par::map_range(n, |i| nearest(&live, points.latent(i)).1);
        for e in empty {
            let (far, dist) = d2
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &d)| if d > best.1 { (i, d) } else { best });
            if dist <= 0.0 {
                dropped.push(e);
                continue;
            }
            latent[e] = to_f64(points.latent(far));
            raw[e] = to_f64(points.raw(far));
            counts[e] = 1;
            updates += 1;
            reseeded += 1;
            let new_center = &latent[e];
            d2 = par::map_range(n, |i| d2[i].min(sq_dist(new_center, points.latent(i))));
        }
    }

    let centers: Vec<DualCenter> = latent
        .into_iter()
        .zip(raw)
        .zip(counts)
        .enumerate()
        .filter(|(i, _)| !dropped.contains(i))
        .map(|(_, ((latent, raw), count))| DualCenter { latent, raw, count })
        .collect();
    Ok(FitSummary {
        centers,
        updates,
        reseeded,
        dropped: dropped.len(),
    })
}

/// Mean squared latent distance from each point to its nearest center.
pub fn quantization_error(centers: &[DualCenter], points: &DualPointSet) -> Result<f64> {
    if centers.is_empty() {
        return Err(Error::Config("quantization error needs at least one center".into()));
    }
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let latent: Vec<Vec<f64>> = centers.iter().map(|c| c.latent.clone()).collect();
    let per_point = par::map_range(points.len(), |i| nearest(&latent, points.latent(i)).1);
    Ok(per_point.iter().sum::<f64>() / points.len() as f64)
}
