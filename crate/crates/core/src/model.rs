//! Per-class prototype sets, exponential-kernel similarity, the K-nearest
//! prototype vote, tiled whole-image prediction and the model file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureKind, FeatureSpace};
use crate::kmeans::{self, sq_dist, DualCenter, DualPointSet, KMeansConfig};
use crate::par;
use crate::raster::{
    pad_stack, plan_tiles, stitch_labels, BandStack, Class, LabelMask, DEFAULT_TILE_SIZE,
};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prototype {
    pub class_id: u8,
    pub support_count: u64,
    /// Mean band vector of the pixels folded into this prototype.
    pub raw_center: Vec<f64>,
    /// Center in the decision space. Absent when that space is the raw band
    /// space itself, in which case `raw_center` is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent_center: Option<Vec<f64>>,
}

impl Prototype {
    pub fn class(&self) -> Class {
        Class::from_id(self.class_id).unwrap_or(Class::Invalid)
    }

    pub fn decision_center(&self) -> &[f64] {
        self.latent_center.as_deref().unwrap_or(&self.raw_center)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub m_per_class: usize,
    pub k_neighbors: usize,
    pub feature: FeatureSpace,
    pub kmeans: KMeansConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            m_per_class: 500,
            k_neighbors: 10,
            feature: FeatureSpace::latent(FeatureSpace::DEFAULT_LATENT_DIM),
            kmeans: KMeansConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_per_class == 0 {
            return Err(Error::Config("m_per_class must be at least 1".into()));
        }
        if self.k_neighbors == 0 {
            return Err(Error::Config("k_neighbors must be at least 1".into()));
        }
        self.feature.validate()?;
        KMeansConfig {
            m: self.m_per_class,
            ..self.kmeans.clone()
        }
        .validate()
    }
}

pub fn default_class_names() -> BTreeMap<u8, String> {
    Class::TRAINABLE.iter().map(|c| (c.id(), c.name().to_string())).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdssModel {
    pub format_version: u32,
    pub config: ModelConfig,
    pub band_names: Vec<String>,
    pub class_names: BTreeMap<u8, String>,
    pub prototypes: Vec<Prototype>,
}

/// Outcome of the K-nearest-prototype vote for one pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelDecision {
    pub label: Class,
    /// Indices into `IdssModel::prototypes`, most similar first.
    pub neighbor_ids: Vec<usize>,
    pub neighbor_similarities: Vec<f64>,
    pub votes: BTreeMap<u8, usize>,
}

/// `exp(-d²)`.
pub fn kernel(sq_distance: f64) -> f64 {
    (-sq_distance).exp()
}

pub fn similarity(f: &[f32], p: &Prototype) -> Result<f64> {
    let center = p.decision_center();
    if f.len() != center.len() {
        return Err(Error::DimensionMismatch(format!(
            "feature has {} dims, prototype {}",
            f.len(),
            center.len()
        )));
    }
    Ok(kernel(sq_dist(center, f)))
}

/// One labeled training image. `latent` is required for latent-space models.
#[derive(Clone, Debug)]
pub struct TrainingImage {
    pub stack: BandStack,
    pub labels: LabelMask,
    pub latent: Option<BandStack>,
}

fn class_seed(seed: u64, class: Class) -> u64 {
    seed ^ (class.id() as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn train(images: &[TrainingImage], config: &ModelConfig) -> Result<IdssModel> {
    config.validate()?;
    let first = images
        .first()
        .ok_or_else(|| Error::Config("no training images".into()))?;
    let band_names = first.stack.band_names().to_vec();
    let raw_dim = band_names.len();
    let latent_dim = config.feature.dimension;

    let mut sets: Vec<DualPointSet> = Class::TRAINABLE
        .iter()
        .map(|_| DualPointSet::new(latent_dim, raw_dim))
        .collect();
    let mut raw = vec![0.0f32; raw_dim];
    for (i, img) in images.iter().enumerate() {
        if img.stack.bands() != raw_dim {
            return Err(Error::DimensionMismatch(format!(
                "training image {i} has {} bands, expected {raw_dim}",
                img.stack.bands()
            )));
        }
        if (img.labels.height(), img.labels.width()) != (img.stack.height(), img.stack.width()) {
            return Err(Error::DimensionMismatch(format!(
                "training image {i}: labels {}x{} vs stack {}x{}",
                img.labels.height(),
                img.labels.width(),
                img.stack.height(),
                img.stack.width()
            )));
        }
        let field = extract_features(&img.stack, &config.feature, img.latent.as_ref())?;
        for (idx, &label) in img.labels.labels().iter().enumerate() {
            if label == Class::Invalid.id() || !field.is_valid_index(idx) {
                continue;
            }
            img.stack.pixel_into(idx, &mut raw);
            sets[label as usize - 1].push(field.vector(idx), &raw)?;
        }
    }
    for (class, set) in Class::TRAINABLE.iter().zip(&sets) {
        if set.is_empty() {
            return Err(Error::MissingClass(class.name().to_string()));
        }
    }

    let jobs: Vec<(Class, &DualPointSet)> = Class::TRAINABLE.iter().copied().zip(&sets).collect();
    let fitted = par::map_slice(&jobs, |(class, set)| {
        let kc = KMeansConfig {
            m: config.m_per_class,
            seed: class_seed(config.kmeans.seed, *class),
            ..config.kmeans.clone()
        };
        kmeans::fit(set, &kc).map(|centers| (*class, centers))
    });

    let identity = config.feature.is_identity();
    let mut prototypes = Vec::new();
    for result in fitted {
        let (class, centers) = result?;
        prototypes.extend(centers.into_iter().map(|c: DualCenter| Prototype {
            class_id: class.id(),
            support_count: c.count,
            raw_center: c.raw,
            latent_center: (!identity).then_some(c.latent),
        }));
    }

    Ok(IdssModel {
        format_version: FORMAT_VERSION,
        config: ModelConfig {
            kmeans: KMeansConfig {
                m: config.m_per_class,
                ..config.kmeans.clone()
            },
            ..config.clone()
        },
        band_names,
        class_names: default_class_names(),
        prototypes,
    })
}

impl IdssModel {
    pub fn parameter_count(&self) -> usize {
        self.prototypes.len() * self.config.feature.dimension
    }

    pub fn feature_dim(&self) -> usize {
        self.config.feature.dimension
    }

    pub fn effective_k(&self) -> usize {
        self.config.k_neighbors.min(self.prototypes.len())
    }

    pub fn prototypes_per_class(&self) -> BTreeMap<u8, usize> {
        let mut out = BTreeMap::new();
        for p in &self.prototypes {
            *out.entry(p.class_id).or_insert(0) += 1;
        }
        out
    }

    pub fn class_name(&self, class_id: u8) -> &str {
        self.class_names
            .get(&class_id)
            .map(String::as_str)
            .or_else(|| Class::from_id(class_id).map(Class::name))
            .unwrap_or("?")
    }

    fn check_feature(&self, f: &[f32]) -> Result<()> {
        if self.prototypes.is_empty() {
            return Err(Error::EmptyModel);
        }
        if f.len() != self.feature_dim() {
            return Err(Error::DimensionMismatch(format!(
                "feature has {} dims, model expects {}",
                f.len(),
                self.feature_dim()
            )));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature vector".into()));
        }
        Ok(())
    }

    /// Fills `ranked` with the K nearest prototypes as
    /// `(squared distance, class id, prototype index)`, nearest first.
    /// Equal distances order by class id, then by index.
    fn rank_into(&self, f: &[f32], ranked: &mut Vec<(f64, u8, usize)>) {
        ranked.clear();
        ranked.extend(
            self.prototypes
                .iter()
                .enumerate()
                .map(|(i, p)| (sq_dist(p.decision_center(), f), p.class_id, i)),
        );
        let k = self.effective_k();
        let cmp = |a: &(f64, u8, usize), b: &(f64, u8, usize)| {
            a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
        };
        if k < ranked.len() {
            ranked.select_nth_unstable_by(k - 1, cmp);
            ranked.truncate(k);
        }
        ranked.sort_unstable_by(cmp);
    }

    /// Majority class among `ranked`; ties go to the larger summed
    /// similarity, then to the smaller class id.
    fn vote(ranked: &[(f64, u8, usize)]) -> (Class, [usize; 4], [f64; 4]) {
        let mut votes = [0usize; 4];
        let mut sums = [0.0f64; 4];
        for &(d, class, _) in ranked {
            votes[class as usize] += 1;
            sums[class as usize] += kernel(d);
        }
        let mut best = Class::TRAINABLE[0];
        for &c in &Class::TRAINABLE[1..] {
            let (i, b) = (c.id() as usize, best.id() as usize);
            if votes[i] > votes[b] || (votes[i] == votes[b] && sums[i] > sums[b]) {
                best = c;
            }
        }
        (best, votes, sums)
    }

    /// Decides the label of one feature vector against all prototypes pooled
    /// across classes.
    pub fn decide(&self, f: &[f32]) -> Result<PixelDecision> {
        self.check_feature(f)?;
        let mut ranked = Vec::with_capacity(self.prototypes.len());
        self.rank_into(f, &mut ranked);
        let (label, votes, _) = Self::vote(&ranked);
        Ok(PixelDecision {
            label,
            neighbor_ids: ranked.iter().map(|r| r.2).collect(),
            neighbor_similarities: ranked.iter().map(|r| kernel(r.0)).collect(),
            votes: Class::TRAINABLE
                .iter()
                .filter(|c| votes[c.id() as usize] > 0)
                .map(|c| (c.id(), votes[c.id() as usize]))
                .collect(),
        })
    }

    /// Label only, reusing `scratch` between calls.
    pub fn decide_label(&self, f: &[f32], scratch: &mut Vec<(f64, u8, usize)>) -> Result<Class> {
        self.check_feature(f)?;
        self.rank_into(f, scratch);
        Ok(Self::vote(scratch).0)
    }

    fn check_inputs(&self, stack: &BandStack, latent: Option<&BandStack>) -> Result<()> {
        if self.prototypes.is_empty() {
            return Err(Error::EmptyModel);
        }
        if stack.bands() != self.band_names.len() {
            return Err(Error::DimensionMismatch(format!(
                "stack has {} bands, model expects {}",
                stack.bands(),
                self.band_names.len()
            )));
        }
        if self.config.feature.kind == FeatureKind::Latent && latent.is_none() {
            return Err(Error::MissingLatent);
        }
        Ok(())
    }

    /// Classifies every pixel of `stack` using 256-pixel tiles.
    pub fn predict_mask(&self, stack: &BandStack, latent: Option<&BandStack>) -> Result<LabelMask> {
        self.predict_mask_tiled(stack, latent, DEFAULT_TILE_SIZE)
    }

    /// Pads to whole tiles, classifies each tile, stitches and crops.
    /// Invalid pixels get [`Class::Invalid`].
    pub fn predict_mask_tiled(
        &self,
        stack: &BandStack,
        latent: Option<&BandStack>,
        tile_size: usize,
    ) -> Result<LabelMask> {
        self.check_inputs(stack, latent)?;
        let latent = if self.config.feature.kind == FeatureKind::Latent { latent } else { None };
        let grid = plan_tiles(stack.height(), stack.width(), tile_size)?;
        let padded = pad_stack(stack, &grid)?;
        let padded_latent = match latent {
            Some(l) => {
                if (l.height(), l.width()) != (stack.height(), stack.width()) {
                    return Err(Error::DimensionMismatch(format!(
                        "latent field {}x{} vs stack {}x{}",
                        l.height(),
                        l.width(),
                        stack.height(),
                        stack.width()
                    )));
                }
                Some(pad_stack(l, &grid)?)
            }
            None => None,
        };

        let tiles = par::map_slice(&grid.tiles, |&origin| -> Result<_> {
            let tile = padded.window(origin.row, origin.col, tile_size, tile_size)?;
            let tile_latent = padded_latent
                .as_ref()
                .map(|l| l.window(origin.row, origin.col, tile_size, tile_size))
                .transpose()?;
            let field = extract_features(&tile, &self.config.feature, tile_latent.as_ref())?;
            let rows = par::map_range(tile_size, |r| -> Result<Vec<u8>> {
                let mut scratch = Vec::with_capacity(self.prototypes.len());
                (0..tile_size)
                    .map(|c| {
                        let idx = r * tile_size + c;
                        if !field.is_valid_index(idx) {
                            return Ok(Class::Invalid.id());
                        }
                        self.decide_label(field.vector(idx), &mut scratch).map(Class::id)
                    })
                    .collect()
            });
            let mut labels = Vec::with_capacity(tile_size * tile_size);
            for row in rows {
                labels.extend(row?);
            }
            Ok((origin, LabelMask::new(tile_size, tile_size, labels)?))
        });
        let tiles: Vec<_> = tiles.into_iter().collect::<Result<_>>()?;
        stitch_labels(&tiles, &grid)
    }
}

// ---------------------------------------------------------------------------
// Model file

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    feature: FeatureSpace,
    band_names: Vec<String>,
    class_names: BTreeMap<u8, String>,
    m_per_class: usize,
    k_neighbors: usize,
    kmeans: KMeansConfig,
    prototypes: Vec<Prototype>,
}

impl IdssModel {
    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format_version: self.format_version,
            feature: self.config.feature,
            band_names: self.band_names.clone(),
            class_names: self.class_names.clone(),
            m_per_class: self.config.m_per_class,
            k_neighbors: self.config.k_neighbors,
            kmeans: self.config.kmeans.clone(),
            prototypes: self.prototypes.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).map_err(|e| Error::Schema(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        match value.get("format_version").and_then(|v| v.as_i64()) {
            Some(v) if v == FORMAT_VERSION as i64 => {}
            Some(v) => {
                return Err(Error::Version {
                    found: v,
                    expected: FORMAT_VERSION,
                })
            }
            None => return Err(Error::Schema("missing integer format_version".into())),
        }
        let file: ModelFile = serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
        let model = IdssModel {
            format_version: file.format_version,
            config: ModelConfig {
                m_per_class: file.m_per_class,
                k_neighbors: file.k_neighbors,
                feature: file.feature,
                kmeans: file.kmeans,
            },
            band_names: file.band_names,
            class_names: file.class_names,
            prototypes: file.prototypes,
        };
        model.validate()?;
        Ok(model)
    }

    /// Structural checks applied on load.
    pub fn validate(&self) -> Result<()> {
        let schema = |m: String| Err(Error::Schema(m));
        if self.config.k_neighbors == 0 {
            return schema("k_neighbors must be at least 1".into());
        }
        if self.config.feature.dimension == 0 {
            return schema("feature dimension must be at least 1".into());
        }
        if self.band_names.is_empty() {
            return schema("band_names is empty".into());
        }
        let d = self.band_names.len();
        let identity = self.config.feature.is_identity();
        if identity && self.config.feature.dimension != d {
            return schema(format!(
                "raw feature dimension {} != {d} bands",
                self.config.feature.dimension
            ));
        }
        for (i, p) in self.prototypes.iter().enumerate() {
            if !matches!(Class::from_id(p.class_id), Some(c) if c != Class::Invalid) {
                return schema(format!("prototype {i}: class_id {} is not trainable", p.class_id));
            }
            if p.support_count == 0 {
                return schema(format!("prototype {i}: support_count is 0"));
            }
            if p.raw_center.len() != d {
                return schema(format!("prototype {i}: raw_center has {} values, expected {d}", p.raw_center.len()));
            }
            match (&p.latent_center, identity) {
                (Some(_), true) => {
                    return schema(format!("prototype {i}: latent_center present in a raw-space model"))
                }
                (None, false) => return schema(format!("prototype {i}: latent_center missing")),
                (Some(l), false) if l.len() != self.config.feature.dimension => {
                    return schema(format!(
                        "prototype {i}: latent_center has {} values, expected {}",
                        l.len(),
                        self.config.feature.dimension
                    ))
                }
                _ => {}
            }
            let finite = p.raw_center.iter().chain(p.latent_center.iter().flatten()).all(|v| v.is_finite());
            if !finite {
                return schema(format!("prototype {i}: non-finite center"));
            }
        }
        Ok(())
    }
}

pub fn save_model(model: &IdssModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model.to_json()?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<IdssModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    IdssModel::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::default_band_names;

    pub(crate) fn raw_model(protos: &[(u8, &[f64])], k: usize) -> IdssModel {
        let d = protos[0].1.len();
        IdssModel {
            format_version: FORMAT_VERSION,
            config: ModelConfig {
                m_per_class: 1,
                k_neighbors: k,
                feature: FeatureSpace::raw(d).with_normalize(false),
                kmeans: KMeansConfig::default(),
            },
            band_names: default_band_names(d),
            class_names: default_class_names(),
            prototypes: protos
                .iter()
                .map(|(c, v)| Prototype {
                    class_id: *c,
                    support_count: 1,
                    raw_center: v.to_vec(),
                    latent_center: None,
                })
                .collect(),
        }
    }

    #[test]
    fn similarity_closed_form() {
        let p = Prototype {
            class_id: 1,
            support_count: 1,
            raw_center: vec![0.0, 0.0],
            latent_center: None,
        };
        assert_eq!(similarity(&[0.0, 0.0], &p).unwrap(), 1.0);
        assert!((similarity(&[1.0, 0.0], &p).unwrap() - 0.367879441).abs() < 1e-9);
        assert!(similarity(&[1.0], &p).is_err());
        // Antipodal unit vectors: squared distance 4.
        let q = Prototype {
            raw_center: vec![1.0, 0.0],
            ..p
        };
        let s = similarity(&[-1.0, 0.0], &q).unwrap();
        assert!(s >= (-4.0f64).exp() - 1e-15 && (s - 0.018316).abs() < 1e-6);
    }

    #[test]
    fn unanimous_and_clamped_votes() {
        let m = raw_model(&[(2, &[0.0]), (2, &[0.1]), (1, &[5.0])], 2);
        let d = m.decide(&[0.0]).unwrap();
        assert_eq!(d.label, Class::Water);
        assert_eq!(d.votes, BTreeMap::from([(2, 2)]));
        assert_eq!(d.neighbor_ids, vec![0, 1]);

        let m = raw_model(&[(1, &[0.0]), (2, &[1.0]), (3, &[2.0])], 10);
        let d = m.decide(&[0.0]).unwrap();
        assert_eq!(d.neighbor_ids.len(), 3);
        assert_eq!(d.label, Class::Land);
    }

    #[test]
    fn tie_breaks() {
        // 1 vs 1: water is closer, so its similarity sum is larger.
        let m = raw_model(&[(1, &[1.0]), (2, &[0.5])], 2);
        assert_eq!(m.decide(&[0.0]).unwrap().label, Class::Water);
        // Equal votes and equal sums: smaller class id wins.
        let m = raw_model(&[(3, &[1.0]), (2, &[-1.0])], 2);
        assert_eq!(m.decide(&[0.0]).unwrap().label, Class::Water);
        let m = raw_model(&[(3, &[1.0]), (1, &[-1.0])], 2);
        assert_eq!(m.decide(&[0.0]).unwrap().label, Class::Land);
    }

    #[test]
    fn decide_errors() {
        let mut m = raw_model(&[(1, &[0.0, 0.0])], 1);
        assert!(m.decide(&[0.0]).is_err());
        assert!(m.decide(&[f32::NAN, 0.0]).is_err());
        m.prototypes.clear();
        assert!(matches!(m.decide(&[0.0, 0.0]), Err(Error::EmptyModel)));
    }

    #[test]
    fn parameter_counts() {
        let mut m = raw_model(&[(1, &[0.0; 13])], 1);
        m.prototypes = (0..1500)
            .map(|i| Prototype {
                class_id: (i % 3) as u8 + 1,
                support_count: 1,
                raw_center: vec![0.0; 13],
                latent_center: None,
            })
            .collect();
        assert_eq!(m.parameter_count(), 19_500);
        m.prototypes.clear();
        assert_eq!(m.parameter_count(), 0);
    }

    #[test]
    fn single_prototype_file() {
        let text = r#"{
  "format_version": 1,
  "feature": {"kind": "raw", "dimension": 2, "normalize": false},
  "band_names": ["B01", "B02"],
  "class_names": {"1": "Land", "2": "Water", "3": "Cloud"},
  "m_per_class": 1,
  "k_neighbors": 10,
  "kmeans": {"m": 1, "batch_size": 8, "max_iterations": 1, "seed": 0, "init": "kmeans_pp"},
  "prototypes": [{"class_id": 3, "support_count": 4, "raw_center": [0.5, 0.25]}]
}"#;
        let m = IdssModel::from_json(text).unwrap();
        assert_eq!(m.parameter_count(), 2);
        for f in [[0.0f32, 0.0], [100.0, -3.0], [0.5, 0.25]] {
            assert_eq!(m.decide(&f).unwrap().label, Class::Cloud);
        }
        let bumped = text.replace("\"format_version\": 1", "\"format_version\": 7");
        assert!(matches!(
            IdssModel::from_json(&bumped),
            Err(Error::Version { found: 7, .. })
        ));
        let bad_class = text.replace("\"class_id\": 3", "\"class_id\": 0");
        assert!(matches!(IdssModel::from_json(&bad_class), Err(Error::Schema(_))));
        let missing_latent = text.replace("\"normalize\": false", "\"normalize\": true");
        assert!(matches!(IdssModel::from_json(&missing_latent), Err(Error::Schema(_))));
    }

    #[test]
    fn train_clamps_degenerate_class() {
        // 4x4 image: top half land (varied), third row water (identical), last row cloud.
        let mut stack = BandStack::zeros(4, 4, 2);
        let mut labels = LabelMask::filled(4, 4, Class::Land);
        for r in 0..4 {
            for c in 0..4 {
                let v = match r {
                    0 | 1 => [0.1 + 0.01 * (r * 4 + c) as f32, 0.5],
                    2 => [0.02, 0.03],
                    _ => [0.9, 0.9 - 0.01 * c as f32],
                };
                stack.set_pixel(r, c, &v).unwrap();
                labels.set(r, c, [Class::Land, Class::Land, Class::Water, Class::Cloud][r]);
            }
        }
        let config = ModelConfig {
            m_per_class: 5,
            k_neighbors: 3,
            feature: FeatureSpace::raw(2).with_normalize(false),
            kmeans: KMeansConfig {
                batch_size: 16,
                max_iterations: 10,
                ..KMeansConfig::default()
            },
        };
        let img = TrainingImage {
            stack,
            labels,
            latent: None,
        };
        let model = train(std::slice::from_ref(&img), &config).unwrap();
        let per = model.prototypes_per_class();
        assert_eq!(per[&2], 1);
        assert_eq!(per[&1], 5);
        assert_eq!(per[&3], 4);
        let water = model.prototypes.iter().find(|p| p.class_id == 2).unwrap();
        assert_eq!(water.raw_center, vec![0.02f32 as f64, 0.03f32 as f64]);
        assert!(model.prototypes.iter().all(|p| p.latent_center.is_none()));

        // Missing class is reported by name.
        let mut no_cloud = img.clone();
        for c in 0..4 {
            no_cloud.labels.set(3, c, Class::Invalid);
        }
        match train(&[no_cloud], &config) {
            Err(Error::MissingClass(name)) => assert_eq!(name, "Cloud"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn predict_invalid_passthrough_and_guards() {
        let m = raw_model(&[(2, &[0.2, 0.1]), (1, &[0.5, 0.5])], 1);
        let mut stack = BandStack::zeros(3, 5, 2);
        for r in 0..3 {
            for c in 0..5 {
                stack.set_pixel(r, c, &[0.2, 0.1]).unwrap();
            }
        }
        stack.invalidate(1, 1);
        let mask = m.predict_mask_tiled(&stack, None, 2).unwrap();
        assert_eq!((mask.height(), mask.width()), (3, 5));
        assert_eq!(mask.get(1, 1), Class::Invalid);
        assert_eq!(mask.count(Class::Water), 14);

        let mut all_invalid = stack.clone();
        for r in 0..3 {
            for c in 0..5 {
                all_invalid.invalidate(r, c);
            }
        }
        assert_eq!(m.predict_mask(&all_invalid, None).unwrap(), LabelMask::filled(3, 5, Class::Invalid));
        assert!(m.predict_mask(&BandStack::zeros(2, 2, 3), None).is_err());

        let mut latent_model = m.clone();
        latent_model.config.feature = FeatureSpace::latent(4);
        assert!(matches!(latent_model.predict_mask(&stack, None), Err(Error::MissingLatent)));
    }
}
