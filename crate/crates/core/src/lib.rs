//! Interpretable prototype-based semantic segmentation for multispectral
//! rasters.
//!
//! Pixels are mapped into a feature space ([`features`]), each class is
//! summarised by cluster centers that live in both the decision space and
//! the raw band space ([`kmeans`]), and new pixels are labeled by a vote
//! among their most similar prototypes ([`model`]). Prototypes render as
//! IF…THEN rules ([`explain`]). [`raster`] holds the I/O and tiling
//! pipeline, [`eval`] the IoU/Recall metrics and [`baselines`] NDWI.

pub mod baselines;
pub mod error;
pub mod eval;
pub mod explain;
pub mod features;
pub mod kmeans;
pub mod model;
pub mod par;
pub mod raster;
pub mod synth;

pub use error::{Error, Result};
pub use features::{FeatureKind, FeatureSpace};
pub use kmeans::{DualCenter, DualPointSet, KMeansConfig, KMeansInit};
pub use model::{IdssModel, ModelConfig, PixelDecision, Prototype, TrainingImage};
pub use raster::{BandStack, Class, LabelMask, TileGrid};
