use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::{ClassId, Matrix};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    let b = bytes.get(offset..offset + 4).ok_or(Error::TruncatedFile {
        expected: offset + 4,
        found: bytes.len(),
    })?;
    Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let found = be_u32(bytes, 0)?;
    if found != expected {
        return Err(Error::BadMagic { expected, found });
    }
    Ok(())
}

/// Decoded IDX image file: pixels scaled by 1/255, one flattened image
/// (row-major) per column.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Matrix,
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    check_magic(bytes, IMAGES_MAGIC)?;
    let n = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let d = rows * cols;
    let expected = 16 + n * d;
    if bytes.len() < expected {
        return Err(Error::TruncatedFile {
            expected,
            found: bytes.len(),
        });
    }
    let data = &bytes[16..expected];
    let pixels = DMatrix::from_fn(d, n, |p, i| data[i * d + p] as f64 / 255.0);
    Ok(IdxImages { rows, cols, pixels })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<ClassId>> {
    check_magic(bytes, LABELS_MAGIC)?;
    let n = be_u32(bytes, 4)? as usize;
    let expected = 8 + n;
    if bytes.len() < expected {
        return Err(Error::TruncatedFile {
            expected,
            found: bytes.len(),
        });
    }
    Ok(bytes[8..expected].iter().map(|&b| b as ClassId).collect())
}

/// Loads an image/label file pair.
pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<(IdxImages, Vec<ClassId>)> {
    let img = parse_idx_images(&std::fs::read(images.as_ref())?)?;
    let lab = parse_idx_labels(&std::fs::read(labels.as_ref())?)?;
    if img.pixels.ncols() != lab.len() {
        return Err(Error::CountMismatch {
            images: img.pixels.ncols(),
            labels: lab.len(),
        });
    }
    Ok((img, lab))
}

/// Encodes `n` images of `rows×cols` bytes, stored back to back.
pub fn write_idx_images(out: &mut impl Write, rows: usize, cols: usize, data: &[u8]) -> Result<()> {
    let d = rows * cols;
    if d == 0 || !data.len().is_multiple_of(d) {
        return Err(Error::dims(format!(
            "{} bytes is not a whole number of {rows}x{cols} images",
            data.len()
        )));
    }
    out.write_all(&IMAGES_MAGIC.to_be_bytes())?;
    out.write_all(&((data.len() / d) as u32).to_be_bytes())?;
    out.write_all(&(rows as u32).to_be_bytes())?;
    out.write_all(&(cols as u32).to_be_bytes())?;
    out.write_all(data)?;
    Ok(())
}

pub fn write_idx_labels(out: &mut impl Write, labels: &[u8]) -> Result<()> {
    out.write_all(&LABELS_MAGIC.to_be_bytes())?;
    out.write_all(&(labels.len() as u32).to_be_bytes())?;
    out.write_all(labels)?;
    Ok(())
}
