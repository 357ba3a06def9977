//! NDWI water index, `(green - nir) / (green + nir)` on B03 and B08, and
//! its two-class threshold classifier.

use crate::error::{Error, Result};
use crate::raster::{BandStack, Class, LabelMask};

pub const GREEN_BAND: &str = "B03";
pub const NIR_BAND: &str = "B08";

/// Thresholds of the two NDWI comparison rows.
pub const NDWI_THRESHOLD_1: f64 = -0.22;
pub const NDWI_THRESHOLD_2: f64 = 0.0;

#[derive(Clone, Debug, PartialEq)]
pub struct IndexMap {
    height: usize,
    width: usize,
    values: Vec<f32>,
    defined: Vec<bool>,
}

impl IndexMap {
    /// `values[i]` is ignored where `defined[i]` is false.
    pub fn new(height: usize, width: usize, values: Vec<f32>, defined: Vec<bool>) -> Result<Self> {
        if values.len() != height * width || defined.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "index map buffers do not match {height}x{width}"
            )));
        }
        if values.iter().zip(&defined).any(|(v, &d)| d && !v.is_finite()) {
            return Err(Error::NonFinite("defined index value".into()));
        }
        Ok(Self {
            height,
            width,
            values,
            defined,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f32> {
        let i = row * self.width + col;
        self.defined[i].then_some(self.values[i])
    }

    pub fn values(&self) -> impl Iterator<Item = Option<f32>> + '_ {
        self.values.iter().zip(&self.defined).map(|(&v, &d)| d.then_some(v))
    }

    /// Single-band stack, undefined pixels masked out and stored as 0.
    pub fn to_band_stack(&self) -> BandStack {
        let data = self
            .values
            .iter()
            .zip(&self.defined)
            .map(|(&v, &d)| if d { v } else { 0.0 })
            .collect();
        BandStack::with_mask(self.height, self.width, vec!["NDWI".to_string()], data, self.defined.clone())
            .expect("index map invariants")
    }
}

pub fn ndwi(stack: &BandStack) -> Result<IndexMap> {
    let g = stack
        .band_index(GREEN_BAND)
        .ok_or_else(|| Error::MissingBand(GREEN_BAND.into()))?;
    let n = stack
        .band_index(NIR_BAND)
        .ok_or_else(|| Error::MissingBand(NIR_BAND.into()))?;
    let (green, nir) = (stack.band(g), stack.band(n));
    let mut values = vec![0.0f32; stack.pixels()];
    let mut defined = vec![false; stack.pixels()];
    for i in 0..stack.pixels() {
        if !stack.valid_mask()[i] {
            continue;
        }
        let (gv, nv) = (green[i] as f64, nir[i] as f64);
        let denom = gv + nv;
        if denom == 0.0 {
            continue;
        }
        let v = (gv - nv) / denom;
        if v.is_finite() {
            values[i] = v as f32;
            defined[i] = true;
        }
    }
    IndexMap::new(stack.height(), stack.width(), values, defined)
}

/// Water where the index is strictly above `threshold`, land elsewhere,
/// invalid where undefined. Never predicts cloud.
pub fn threshold_classify(index: &IndexMap, threshold: f64) -> LabelMask {
    let labels = index
        .values()
        .map(|v| match v {
            None => Class::Invalid.id(),
            Some(x) if x as f64 > threshold => Class::Water.id(),
            Some(_) => Class::Land.id(),
        })
        .collect();
    LabelMask::new(index.height, index.width, labels).expect("labels in range")
}
