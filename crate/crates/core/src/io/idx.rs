//! Reader for the IDX image/label format.

use std::path::Path;

use crate::covariance::Dataset;
use crate::error::{LaeError, Result};
use crate::linalg::{c, CMatrix};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| LaeError::Format(format!("{what}: truncated header")))
}

/// Raw images: (count, rows, cols, pixel bytes).
pub fn parse_images(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8])> {
    let magic = read_u32(bytes, 0, "image file")?;
    if magic != IMAGE_MAGIC {
        return Err(LaeError::Format(format!(
            "image file: bad magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x}"
        )));
    }
    let count = read_u32(bytes, 4, "image file")? as usize;
    let rows = read_u32(bytes, 8, "image file")? as usize;
    let cols = read_u32(bytes, 12, "image file")? as usize;
    let len = count * rows * cols;
    let pixels = bytes.get(16..16 + len).ok_or_else(|| {
        LaeError::Format(format!(
            "image file: truncated, expected {len} pixel bytes but found {}",
            bytes.len().saturating_sub(16)
        ))
    })?;
    Ok((count, rows, cols, pixels))
}

pub fn parse_labels(bytes: &[u8]) -> Result<&[u8]> {
    let magic = read_u32(bytes, 0, "label file")?;
    if magic != LABEL_MAGIC {
        return Err(LaeError::Format(format!(
            "label file: bad magic 0x{magic:08x}, expected 0x{LABEL_MAGIC:08x}"
        )));
    }
    let count = read_u32(bytes, 4, "label file")? as usize;
    bytes.get(8..8 + count).ok_or_else(|| {
        LaeError::Format(format!(
            "label file: truncated, expected {count} labels but found {}",
            bytes.len().saturating_sub(8)
        ))
    })
}

/// Images as columns with pixels scaled to `[0, 1]`, optionally filtered by
/// label and capped, in file order.
pub fn load_idx_images(
    path: &Path,
    label_path: Option<&Path>,
    digit: Option<u8>,
    cap: Option<usize>,
) -> Result<Dataset> {
    let image_bytes = std::fs::read(path)?;
    let (count, rows, cols, pixels) = parse_images(&image_bytes)?;
    let label_bytes = label_path.map(std::fs::read).transpose()?;
    let labels = label_bytes.as_deref().map(parse_labels).transpose()?;
    if let Some(l) = labels {
        if l.len() != count {
            return Err(LaeError::Format(format!(
                "label count {} does not match image count {count}",
                l.len()
            )));
        }
    }
    if digit.is_some() && labels.is_none() {
        return Err(LaeError::Config("a digit filter needs a label file".into()));
    }
    let n = rows * cols;
    let selected: Vec<usize> = (0..count)
        .filter(|&i| match (digit, labels) {
            (Some(d), Some(l)) => l[i] == d,
            _ => true,
        })
        .take(cap.unwrap_or(usize::MAX))
        .collect();
    let x = CMatrix::from_fn(n, selected.len(), |i, j| {
        c(f64::from(pixels[selected[j] * n + i]) / 255.0, 0.0)
    });
    Dataset::from_columns(x, None)
}
