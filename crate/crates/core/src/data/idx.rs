//! IDX image/label files (the MNIST distribution format).
//!
//! Layout: a 4-byte big-endian magic number, one big-endian u32 per
//! dimension, then unsigned bytes. Images use magic `0x00000803`
//! (count, rows, cols); labels use `0x00000801` (count).

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use super::{DataError, Dataset};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn u32_be(&mut self) -> Result<u32, DataError> {
        let chunk = self.take(4)?;
        Ok(u32::from_be_bytes(chunk.try_into().expect("took 4 bytes")))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DataError> {
        let end = self.pos.checked_add(n).ok_or(DataError::TruncatedFile)?;
        let chunk = self
            .bytes
            .get(self.pos..end)
            .ok_or(DataError::TruncatedFile)?;
        self.pos = end;
        Ok(chunk)
    }
}

fn expect_magic(cur: &mut Cursor<'_>, expected: u32) -> Result<(), DataError> {
    let found = cur.u32_be()?;
    if found != expected {
        return Err(DataError::BadMagic { expected, found });
    }
    Ok(())
}

/// Parsed image file: `count` images of `rows * cols` raw bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages, DataError> {
    let mut cur = Cursor { bytes, pos: 0 };
    expect_magic(&mut cur, IMAGES_MAGIC)?;
    let count = cur.u32_be()? as usize;
    let rows = cur.u32_be()? as usize;
    let cols = cur.u32_be()? as usize;
    let total = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or(DataError::TruncatedFile)?;
    let pixels = cur.take(total)?.to_vec();
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, DataError> {
    let mut cur = Cursor { bytes, pos: 0 };
    expect_magic(&mut cur, LABELS_MAGIC)?;
    let count = cur.u32_be()? as usize;
    Ok(cur.take(count)?.to_vec())
}

/// Builds a dataset from parsed files; pixels are scaled by 1/255 and the
/// class count is one more than the largest label.
pub fn dataset_from_idx(images: &IdxImages, labels: &[u8]) -> Result<Dataset, DataError> {
    if images.count != labels.len() {
        return Err(DataError::DimensionMismatch(format!(
            "{} images but {} labels",
            images.count,
            labels.len()
        )));
    }
    let dim = images.rows * images.cols;
    if dim == 0 {
        return Err(DataError::DimensionMismatch(
            "images have zero pixels".into(),
        ));
    }
    let features = images.pixels.iter().map(|&p| p as f64 / 255.0).collect();
    let labels: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
    let class_count = labels.iter().copied().max().map_or(0, |m| m + 1).max(2);
    Dataset::new(features, labels, dim, class_count)
}

pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset, DataError> {
    let images = parse_idx_images(&fs::read(images_path)?)?;
    let labels = parse_idx_labels(&fs::read(labels_path)?)?;
    dataset_from_idx(&images, &labels)
}

pub fn write_idx_images<W: Write>(mut out: W, images: &IdxImages) -> io::Result<()> {
    out.write_all(&IMAGES_MAGIC.to_be_bytes())?;
    for d in [images.count, images.rows, images.cols] {
        out.write_all(&(d as u32).to_be_bytes())?;
    }
    out.write_all(&images.pixels)
}

pub fn write_idx_labels<W: Write>(mut out: W, labels: &[u8]) -> io::Result<()> {
    out.write_all(&LABELS_MAGIC.to_be_bytes())?;
    out.write_all(&(labels.len() as u32).to_be_bytes())?;
    out.write_all(labels)
}
