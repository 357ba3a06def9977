//! Raster data model, BST1 interchange I/O, the pad/tile/stitch pipeline and
//! mask rendering.
//!
//! BST1 layout (all little-endian):
//!
//! ```text
//! 0..4    magic "BST1"
//! 4..16   u32 height, u32 width, u32 bands
//! 16..    height*width*bands f32, band-sequential, row-major per band
//! ```
//!
//! Optional siblings share the stem: `<stem>.msk` holds one byte per pixel
//! (1 valid, 0 invalid) and `<stem>.lbl` holds one class id per pixel.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"BST1";
pub const HEADER_LEN: usize = 16;
pub const DEFAULT_TILE_SIZE: usize = 256;

/// Sentinel-2 MSI band names in product order.
pub const SENTINEL2_BANDS: [&str; 13] = [
    "B01", "B02", "B03", "B04", "B05", "B06", "B07", "B08", "B8A", "B09", "B10", "B11", "B12",
];

/// Band names used when a file carries none: the Sentinel-2 set for
/// 13-band stacks, `B01..Bnn` otherwise.
pub fn default_band_names(bands: usize) -> Vec<String> {
    if bands == SENTINEL2_BANDS.len() {
        SENTINEL2_BANDS.iter().map(|s| s.to_string()).collect()
    } else {
        (1..=bands).map(|i| format!("B{i:02}")).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Class {
    Invalid = 0,
    Land = 1,
    Water = 2,
    Cloud = 3,
}

impl Class {
    pub const TRAINABLE: [Class; 3] = [Class::Land, Class::Water, Class::Cloud];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Class> {
        match id {
            0 => Some(Class::Invalid),
            1 => Some(Class::Land),
            2 => Some(Class::Water),
            3 => Some(Class::Cloud),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Class::Invalid => "Invalid",
            Class::Land => "Land",
            Class::Water => "Water",
            Class::Cloud => "Cloud",
        }
    }

    /// RGB colour used by [`write_mask_png`].
    pub fn color(self) -> [u8; 3] {
        match self {
            Class::Invalid => [0, 0, 0],
            Class::Land => [0, 255, 0],
            Class::Water => [0, 0, 255],
            Class::Cloud => [255, 255, 0],
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `<stem>.<ext>` next to `path`.
pub fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

/// An H×W×C raster of reflectances with a per-pixel validity mask.
#[derive(Clone, Debug, PartialEq)]
pub struct BandStack {
    height: usize,
    width: usize,
    band_names: Vec<String>,
    data: Vec<f32>,
    valid: Vec<bool>,
}

impl BandStack {
    /// Builds a stack with every pixel valid. `data` is band-sequential.
    pub fn new(height: usize, width: usize, band_names: Vec<String>, data: Vec<f32>) -> Result<Self> {
        let valid = vec![true; height * width];
        Self::with_mask(height, width, band_names, data, valid)
    }

    pub fn with_mask(
        height: usize,
        width: usize,
        band_names: Vec<String>,
        data: Vec<f32>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        let pixels = height * width;
        let bands = band_names.len();
        if bands == 0 {
            return Err(Error::DimensionMismatch("band stack needs at least one band".into()));
        }
        if data.len() != pixels * bands {
            return Err(Error::DimensionMismatch(format!(
                "data length {} != {height}x{width}x{bands}",
                data.len()
            )));
        }
        if valid.len() != pixels {
            return Err(Error::DimensionMismatch(format!(
                "valid mask length {} != {height}x{width}",
                valid.len()
            )));
        }
        if let Some(i) = first_nonfinite_valid(&data, &valid, pixels) {
            return Err(Error::NonFinite(format!(
                "band {} pixel {} holds {}",
                i / pixels,
                i % pixels,
                data[i]
            )));
        }
        Ok(Self {
            height,
            width,
            band_names,
            data,
            valid,
        })
    }

    pub fn zeros(height: usize, width: usize, bands: usize) -> Self {
        Self {
            height,
            width,
            band_names: default_band_names(bands),
            data: vec![0.0; height * width * bands],
            valid: vec![true; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.band_names.len()
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn band_names(&self) -> &[String] {
        &self.band_names
    }

    pub fn set_band_names(&mut self, names: Vec<String>) -> Result<()> {
        if names.len() != self.bands() {
            return Err(Error::DimensionMismatch(format!(
                "{} band names for {} bands",
                names.len(),
                self.bands()
            )));
        }
        self.band_names = names;
        Ok(())
    }

    pub fn band_index(&self, name: &str) -> Option<usize> {
        self.band_names.iter().position(|b| b == name)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn band(&self, band: usize) -> &[f32] {
        let n = self.pixels();
        &self.data[band * n..(band + 1) * n]
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.valid[row * self.width + col]
    }

    pub fn value(&self, band: usize, row: usize, col: usize) -> f32 {
        self.data[band * self.pixels() + row * self.width + col]
    }

    /// Copies the band vector of pixel `index` (row-major) into `out`.
    pub fn pixel_into(&self, index: usize, out: &mut [f32]) {
        let n = self.pixels();
        for (b, o) in out.iter_mut().enumerate() {
            *o = self.data[b * n + index];
        }
    }

    pub fn pixel(&self, row: usize, col: usize) -> Vec<f32> {
        let mut v = vec![0.0; self.bands()];
        self.pixel_into(row * self.width + col, &mut v);
        v
    }

    /// Marks a pixel invalid. Its stored values are kept.
    pub fn invalidate(&mut self, row: usize, col: usize) {
        self.valid[row * self.width + col] = false;
    }

    pub fn set_pixel(&mut self, row: usize, col: usize, values: &[f32]) -> Result<()> {
        if values.len() != self.bands() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {}-band stack",
                values.len(),
                self.bands()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("pixel ({row}, {col})")));
        }
        let n = self.pixels();
        let idx = row * self.width + col;
        for (b, &v) in values.iter().enumerate() {
            self.data[b * n + idx] = v;
        }
        self.valid[idx] = true;
        Ok(())
    }

    /// Copies out the `height`×`width` window at `(row, col)`.
    pub fn window(&self, row: usize, col: usize, height: usize, width: usize) -> Result<BandStack> {
        if row + height > self.height || col + width > self.width {
            return Err(Error::DimensionMismatch(format!(
                "window {height}x{width}@({row},{col}) exceeds {}x{}",
                self.height, self.width
            )));
        }
        let n = self.pixels();
        let mut data = Vec::with_capacity(height * width * self.bands());
        for b in 0..self.bands() {
            let plane = &self.data[b * n..(b + 1) * n];
            for r in row..row + height {
                let start = r * self.width + col;
                data.extend_from_slice(&plane[start..start + width]);
            }
        }
        let mut valid = Vec::with_capacity(height * width);
        for r in row..row + height {
            let start = r * self.width + col;
            valid.extend_from_slice(&self.valid[start..start + width]);
        }
        Ok(BandStack {
            height,
            width,
            band_names: self.band_names.clone(),
            data,
            valid,
        })
    }
}

fn first_nonfinite_valid(data: &[f32], valid: &[bool], pixels: usize) -> Option<usize> {
    if pixels == 0 {
        return None;
    }
    data.iter()
        .enumerate()
        .find(|&(i, v)| !v.is_finite() && valid[i % pixels])
        .map(|(i, _)| i)
}

/// Per-pixel class ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMask {
    height: usize,
    width: usize,
    labels: Vec<u8>,
}

impl LabelMask {
    pub fn new(height: usize, width: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "label length {} != {height}x{width}",
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| Class::from_id(l).is_none()) {
            return Err(Error::DimensionMismatch(format!("label id {bad} out of range 0..=3")));
        }
        Ok(Self {
            height,
            width,
            labels,
        })
    }

    pub fn filled(height: usize, width: usize, class: Class) -> Self {
        Self {
            height,
            width,
            labels: vec![class.id(); height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, row: usize, col: usize) -> Class {
        Class::from_id(self.labels[row * self.width + col]).expect("label invariant")
    }

    pub fn set(&mut self, row: usize, col: usize, class: Class) {
        self.labels[row * self.width + col] = class.id();
    }

    pub fn count(&self, class: Class) -> usize {
        self.labels.iter().filter(|&&l| l == class.id()).count()
    }

    pub fn same_shape(&self, other: &LabelMask) -> bool {
        self.height == other.height && self.width == other.width
    }
}

// ---------------------------------------------------------------------------
// BST1 I/O

pub fn read_band_stack(path: impl AsRef<Path>) -> Result<BandStack> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let stack = decode_band_stack(&bytes, path)?;
    let msk = sibling(path, "msk");
    if msk.exists() {
        let mask = fs::read(&msk).map_err(|e| Error::io(&msk, e))?;
        let valid = decode_mask(&mask, stack.pixels(), &msk)?;
        // Re-validate finiteness against the real mask.
        let pixels = stack.pixels();
        if let Some(i) = first_nonfinite_valid(&stack.data, &valid, pixels) {
            return Err(Error::format(
                path,
                (HEADER_LEN + 4 * i) as u64,
                format!("non-finite value {} at a valid pixel", stack.data[i]),
            ));
        }
        return Ok(BandStack { valid, ..stack });
    }
    if let Some(i) = first_nonfinite_valid(&stack.data, &stack.valid, stack.pixels()) {
        return Err(Error::format(
            path,
            (HEADER_LEN + 4 * i) as u64,
            format!("non-finite value {} at a valid pixel", stack.data[i]),
        ));
    }
    Ok(stack)
}

/// Decodes header and payload; validity is all-true and finiteness unchecked.
fn decode_band_stack(bytes: &[u8], path: &Path) -> Result<BandStack> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::format(path, 0, "bad magic (expected \"BST1\")"));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(path, bytes.len() as u64, "truncated header"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (height, width, bands) = (word(0), word(1), word(2));
    if bands == 0 {
        return Err(Error::format(path, 12, "band count is zero"));
    }
    let count = height
        .checked_mul(width)
        .and_then(|p| p.checked_mul(bands))
        .ok_or_else(|| Error::format(path, 4, "header dimensions overflow"))?;
    let expected = HEADER_LEN + 4 * count;
    if bytes.len() < expected {
        return Err(Error::format(
            path,
            bytes.len() as u64,
            format!("truncated payload: expected {expected} bytes"),
        ));
    }
    if bytes.len() > expected {
        return Err(Error::format(path, expected as u64, "trailing bytes after payload"));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(BandStack {
        height,
        width,
        band_names: default_band_names(bands),
        data,
        valid: vec![true; height * width],
    })
}

fn decode_mask(bytes: &[u8], pixels: usize, path: &Path) -> Result<Vec<bool>> {
    if bytes.len() != pixels {
        return Err(Error::format(
            path,
            bytes.len().min(pixels) as u64,
            format!("mask holds {} bytes, expected {pixels}", bytes.len()),
        ));
    }
    bytes
        .iter()
        .enumerate()
        .map(|(i, &b)| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::format(path, i as u64, format!("mask byte {other} is not 0/1"))),
        })
        .collect()
}

/// Writes `<path>` and, when any pixel is invalid, `<stem>.msk`. A stale
/// `.msk` next to an all-valid stack is removed so read-back is exact.
pub fn write_band_stack(stack: &BandStack, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_band_stack(stack)).map_err(|e| Error::io(path, e))?;
    let msk = sibling(path, "msk");
    if stack.valid.iter().all(|&v| v) {
        if msk.exists() {
            fs::remove_file(&msk).map_err(|e| Error::io(&msk, e))?;
        }
    } else {
        let bytes: Vec<u8> = stack.valid.iter().map(|&v| v as u8).collect();
        fs::write(&msk, bytes).map_err(|e| Error::io(&msk, e))?;
    }
    Ok(())
}

pub fn encode_band_stack(stack: &BandStack) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * stack.data.len());
    out.extend_from_slice(MAGIC);
    for dim in [stack.height, stack.width, stack.bands()] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for v in &stack.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Reads a headerless `.lbl` file; its length must be `height * width`.
pub fn read_label_mask(path: impl AsRef<Path>, height: usize, width: usize) -> Result<LabelMask> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != height * width {
        return Err(Error::format(
            path,
            bytes.len().min(height * width) as u64,
            format!("label file holds {} bytes, expected {height}x{width}", bytes.len()),
        ));
    }
    if let Some(i) = bytes.iter().position(|&b| Class::from_id(b).is_none()) {
        return Err(Error::format(path, i as u64, format!("label id {} out of range", bytes[i])));
    }
    Ok(LabelMask {
        height,
        width,
        labels: bytes,
    })
}

pub fn write_label_mask(mask: &LabelMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, &mask.labels).map_err(|e| Error::io(path, e))
}

/// Renders the mask as an 8-bit RGB PNG using [`Class::color`].
pub fn write_mask_png(mask: &LabelMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), mask.width as u32, mask.height as u32);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let rgb = mask_rgb(mask);
    let to_io = |e: png::EncodingError| Error::io(path, std::io::Error::other(e));
    let mut writer = encoder.write_header().map_err(to_io)?;
    writer.write_image_data(&rgb).map_err(to_io)?;
    writer.finish().map_err(to_io)
}

pub fn mask_rgb(mask: &LabelMask) -> Vec<u8> {
    mask.labels
        .iter()
        .flat_map(|&l| Class::from_id(l).unwrap_or(Class::Invalid).color())
        .collect()
}

// ---------------------------------------------------------------------------
// Tiling

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TileOrigin {
    pub row: usize,
    pub col: usize,
}

impl fmt::Display for TileOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TileGrid {
    pub tile_size: usize,
    pub original_height: usize,
    pub original_width: usize,
    pub padded_height: usize,
    pub padded_width: usize,
    pub tiles: Vec<TileOrigin>,
}

impl TileGrid {
    pub fn tile_count(&self) -> usize {
        self.tiles.len()
    }
}

pub fn plan_tiles(height: usize, width: usize, tile_size: usize) -> Result<TileGrid> {
    if height == 0 || width == 0 || tile_size == 0 {
        return Err(Error::Tiling(format!(
            "sizes must be positive (height {height}, width {width}, tile {tile_size})"
        )));
    }
    let padded_height = height.div_ceil(tile_size) * tile_size;
    let padded_width = width.div_ceil(tile_size) * tile_size;
    let tiles = (0..padded_height)
        .step_by(tile_size)
        .flat_map(|row| (0..padded_width).step_by(tile_size).map(move |col| TileOrigin { row, col }))
        .collect();
    Ok(TileGrid {
        tile_size,
        original_height: height,
        original_width: width,
        padded_height,
        padded_width,
        tiles,
    })
}

fn check_grid(grid: &TileGrid, height: usize, width: usize) -> Result<()> {
    if grid.original_height != height || grid.original_width != width {
        return Err(Error::Tiling(format!(
            "grid planned for {}x{} applied to {height}x{width}",
            grid.original_height, grid.original_width
        )));
    }
    Ok(())
}

/// Zero-pads to the grid's padded extent; padding is marked invalid.
pub fn pad_stack(stack: &BandStack, grid: &TileGrid) -> Result<BandStack> {
    check_grid(grid, stack.height, stack.width)?;
    let (ph, pw) = (grid.padded_height, grid.padded_width);
    if (ph, pw) == (stack.height, stack.width) {
        return Ok(stack.clone());
    }
    let bands = stack.bands();
    let mut data = vec![0.0f32; ph * pw * bands];
    let mut valid = vec![false; ph * pw];
    for b in 0..bands {
        let src = stack.band(b);
        let dst = &mut data[b * ph * pw..(b + 1) * ph * pw];
        for r in 0..stack.height {
            dst[r * pw..r * pw + stack.width].copy_from_slice(&src[r * stack.width..(r + 1) * stack.width]);
        }
    }
    for r in 0..stack.height {
        valid[r * pw..r * pw + stack.width].copy_from_slice(&stack.valid[r * stack.width..(r + 1) * stack.width]);
    }
    Ok(BandStack {
        height: ph,
        width: pw,
        band_names: stack.band_names.clone(),
        data,
        valid,
    })
}

/// Cuts `mask` into grid tiles, padding with [`Class::Invalid`].
pub fn split_labels(mask: &LabelMask, grid: &TileGrid) -> Result<Vec<(TileOrigin, LabelMask)>> {
    check_grid(grid, mask.height, mask.width)?;
    let ts = grid.tile_size;
    Ok(grid
        .tiles
        .iter()
        .map(|&origin| {
            let mut tile = LabelMask::filled(ts, ts, Class::Invalid);
            for r in 0..ts {
                let src_r = origin.row + r;
                if src_r >= mask.height {
                    break;
                }
                let cols = ts.min(mask.width.saturating_sub(origin.col));
                let src = &mask.labels[src_r * mask.width + origin.col..][..cols];
                tile.labels[r * ts..r * ts + cols].copy_from_slice(src);
            }
            (origin, tile)
        })
        .collect())
}

/// Reassembles tiles and crops to the original extent.
pub fn stitch_labels(tiles: &[(TileOrigin, LabelMask)], grid: &TileGrid) -> Result<LabelMask> {
    let ts = grid.tile_size;
    let expected: BTreeSet<TileOrigin> = grid.tiles.iter().copied().collect();
    let mut seen = BTreeSet::new();
    for (origin, tile) in tiles {
        if !expected.contains(origin) {
            return Err(Error::Tiling(format!("tile origin {origin} is not on the grid")));
        }
        if !seen.insert(*origin) {
            return Err(Error::Tiling(format!("duplicate tile origin {origin}")));
        }
        if tile.height != ts || tile.width != ts {
            return Err(Error::Tiling(format!(
                "tile at {origin} is {}x{}, expected {ts}x{ts}",
                tile.height, tile.width
            )));
        }
    }
    let missing: Vec<String> = expected.difference(&seen).map(|o| o.to_string()).collect();
    if !missing.is_empty() {
        return Err(Error::Tiling(format!("missing tiles at {}", missing.join(", "))));
    }

    let (h, w) = (grid.original_height, grid.original_width);
    let mut out = LabelMask::filled(h, w, Class::Invalid);
    for (origin, tile) in tiles {
        if origin.row >= h || origin.col >= w {
            continue;
        }
        let rows = ts.min(h - origin.row);
        let cols = ts.min(w - origin.col);
        for r in 0..rows {
            let dst = (origin.row + r) * w + origin.col;
            out.labels[dst..dst + cols].copy_from_slice(&tile.labels[r * ts..r * ts + cols]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn decodes_minimal_file() {
        let dir = tmp();
        let path = dir.path().join("a.bst");
        let mut bytes = MAGIC.to_vec();
        for d in [2u32, 2, 1] {
            bytes.extend_from_slice(&d.to_le_bytes());
        }
        for v in [1.0f32, 2.0, 3.0, 4.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(&path, bytes).unwrap();
        let s = read_band_stack(&path).unwrap();
        assert_eq!((s.height(), s.width(), s.bands()), (2, 2, 1));
        assert_eq!(s.value(0, 0, 1), 2.0);
        assert_eq!(s.value(0, 1, 0), 3.0);
        assert!(s.valid_mask().iter().all(|&v| v));
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let dir = tmp();
        let path = dir.path().join("bad.bst");
        fs::write(&path, b"XXXX\0\0\0\0\0\0\0\0\0\0\0\0").unwrap();
        assert!(matches!(read_band_stack(&path), Err(Error::Format { offset: 0, .. })));

        let mut bytes = MAGIC.to_vec();
        for d in [2u32, 2, 1] {
            bytes.extend_from_slice(&d.to_le_bytes());
        }
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        fs::write(&path, &bytes).unwrap();
        match read_band_stack(&path) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 20),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nonfinite_at_valid_pixel_names_offset() {
        let dir = tmp();
        let path = dir.path().join("nan.bst");
        let mut s = BandStack::zeros(1, 2, 1);
        s.invalidate(0, 1);
        s.data[1] = f32::NAN;
        write_band_stack(&s, &path).unwrap();
        // NaN behind the mask is fine.
        assert!(read_band_stack(&path).unwrap().data()[1].is_nan());
        fs::remove_file(sibling(&path, "msk")).unwrap();
        match read_band_stack(&path) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 20),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn file_sizes() {
        assert_eq!(encode_band_stack(&BandStack::zeros(1, 1, 1)).len(), 20);
        assert_eq!(
            encode_band_stack(&BandStack::zeros(256, 256, 13)).len(),
            HEADER_LEN + 256 * 256 * 13 * 4
        );
    }

    #[test]
    fn mask_sibling_round_trip() {
        let dir = tmp();
        let path = dir.path().join("m.bst");
        let mut s = BandStack::zeros(3, 2, 2);
        s.invalidate(2, 1);
        write_band_stack(&s, &path).unwrap();
        assert_eq!(fs::read(sibling(&path, "msk")).unwrap(), vec![1, 1, 1, 1, 1, 0]);
        assert_eq!(read_band_stack(&path).unwrap(), s);
        // Overwriting with an all-valid stack drops the stale mask.
        write_band_stack(&BandStack::zeros(3, 2, 2), &path).unwrap();
        assert!(!sibling(&path, "msk").exists());
    }

    #[test]
    fn label_file_checks() {
        let dir = tmp();
        let path = dir.path().join("x.lbl");
        fs::write(&path, [0u8, 1, 2, 3]).unwrap();
        let m = read_label_mask(&path, 2, 2).unwrap();
        assert_eq!(m.get(1, 1), Class::Cloud);
        assert!(read_label_mask(&path, 3, 2).is_err());
        fs::write(&path, [0u8, 1, 9, 3]).unwrap();
        assert!(matches!(read_label_mask(&path, 2, 2), Err(Error::Format { offset: 2, .. })));
    }

    #[test]
    fn plan_examples() {
        let g = plan_tiles(300, 500, 256).unwrap();
        assert_eq!((g.padded_height, g.padded_width, g.tile_count()), (512, 512, 4));
        let g = plan_tiles(256, 256, 256).unwrap();
        assert_eq!((g.padded_height, g.padded_width, g.tile_count()), (256, 256, 1));
        let g = plan_tiles(1, 1, 256).unwrap();
        assert_eq!((g.padded_height, g.padded_width, g.tile_count()), (256, 256, 1));
        assert!(plan_tiles(0, 5, 256).is_err());
    }

    #[test]
    fn pad_examples() {
        let mut s = BandStack::zeros(300, 500, 2);
        s.set_pixel(0, 0, &[7.0, 8.0]).unwrap();
        let grid = plan_tiles(300, 500, 256).unwrap();
        let p = pad_stack(&s, &grid).unwrap();
        assert_eq!((p.height(), p.width()), (512, 512));
        assert_eq!(p.pixel(0, 0), vec![7.0, 8.0]);
        assert!(!p.is_valid(511, 511));
        assert!(p.is_valid(299, 499));
        assert!(!p.is_valid(299, 500));
        assert_eq!(p.value(1, 511, 511), 0.0);

        let exact = BandStack::zeros(256, 256, 1);
        let g = plan_tiles(256, 256, 256).unwrap();
        assert_eq!(pad_stack(&exact, &g).unwrap(), exact);

        assert!(pad_stack(&exact, &grid).is_err());
    }

    #[test]
    fn stitch_errors() {
        let mask = LabelMask::filled(300, 500, Class::Land);
        let grid = plan_tiles(300, 500, 256).unwrap();
        let mut tiles = split_labels(&mask, &grid).unwrap();
        let out = stitch_labels(&tiles, &grid).unwrap();
        assert_eq!((out.height(), out.width()), (300, 500));
        assert_eq!(out, mask);

        let dropped = tiles.remove(3);
        let err = stitch_labels(&tiles, &grid).unwrap_err().to_string();
        assert!(err.contains("(256, 256)"), "{err}");

        tiles.push(tiles[0].clone());
        assert!(stitch_labels(&tiles, &grid).unwrap_err().to_string().contains("duplicate"));
        tiles.pop();

        tiles.push((dropped.0, LabelMask::filled(10, 10, Class::Land)));
        assert!(stitch_labels(&tiles, &grid).is_err());
    }

    #[test]
    fn png_palette() {
        let dir = tmp();
        let path = dir.path().join("m.png");
        let mask = LabelMask::new(2, 2, vec![0, 1, 2, 3]).unwrap();
        write_mask_png(&mask, &path).unwrap();
        let decoder = png::Decoder::new(std::io::BufReader::new(fs::File::open(&path).unwrap()));
        let mut reader = decoder.read_info().unwrap();
        let mut buf = vec![0; reader.output_buffer_size().unwrap()];
        let info = reader.next_frame(&mut buf).unwrap();
        assert_eq!((info.width, info.height), (2, 2));
        assert_eq!(info.color_type, png::ColorType::Rgb);
        assert_eq!(
            &buf[..12],
            &[0, 0, 0, 0, 255, 0, 0, 0, 255, 255, 255, 0]
        );
        assert!(mask_rgb(&LabelMask::filled(3, 3, Class::Land))
            .chunks(3)
            .all(|c| c == [0, 255, 0]));
    }

    fn arb_stack() -> impl Strategy<Value = BandStack> {
        (1usize..6, 1usize..6, 1usize..4).prop_flat_map(|(h, w, c)| {
            (
                prop::collection::vec(-1e6f32..1e6, h * w * c),
                prop::collection::vec(any::<bool>(), h * w),
            )
                .prop_map(move |(data, valid)| {
                    BandStack::with_mask(h, w, default_band_names(c), data, valid).unwrap()
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn bst1_round_trip_is_bit_exact(stack in arb_stack()) {
            let dir = tmp();
            let path = dir.path().join("r.bst");
            write_band_stack(&stack, &path).unwrap();
            let back = read_band_stack(&path).unwrap();
            prop_assert_eq!(back.valid_mask(), stack.valid_mask());
            let a: Vec<u32> = back.data().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = stack.data().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn padding_is_bounded_and_never_valid(h in 1usize..2048, w in 1usize..2048, ts in prop::sample::select(vec![64usize, 128, 256])) {
            let g = plan_tiles(h, w, ts).unwrap();
            prop_assert!(g.padded_height - h < ts && g.padded_width - w < ts);
            prop_assert_eq!(g.padded_height % ts, 0);
            prop_assert_eq!(g.tile_count(), (g.padded_height / ts) * (g.padded_width / ts));
            if h * w <= 300 * 300 {
                let p = pad_stack(&BandStack::zeros(h, w, 1), &g).unwrap();
                for r in 0..p.height() {
                    for c in 0..p.width() {
                        prop_assert_eq!(p.is_valid(r, c), r < h && c < w);
                    }
                }
            }
        }

        #[test]
        fn split_stitch_identity(h in 1usize..2048, w in 1usize..2048, ts in prop::sample::select(vec![64usize, 128, 256]), seed in any::<u64>()) {
            let mut state = seed | 1;
            let labels = (0..h * w).map(|_| {
                state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                (state % 4) as u8
            }).collect();
            let mask = LabelMask::new(h, w, labels).unwrap();
            let g = plan_tiles(h, w, ts).unwrap();
            let tiles = split_labels(&mask, &g).unwrap();
            prop_assert_eq!(stitch_labels(&tiles, &g).unwrap(), mask);
        }
    }
}
