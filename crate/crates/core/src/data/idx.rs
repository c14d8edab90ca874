//! Reader and writer for the IDX container used by the MNIST digit files.
//!
//! Images: magic `0x00000803`, then big-endian u32 count, rows, cols, then
//! `count * rows * cols` unsigned bytes. Labels: magic `0x00000801`, count,
//! then one byte per label.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::io::ByteReader;
use crate::nn::Matrix;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn open(path: &Path) -> Result<ByteReader<BufReader<File>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(ByteReader::new(BufReader::new(file), &path.display().to_string()))
}

/// Raw image bytes plus `(count, rows, cols)`.
pub fn read_images(path: &Path) -> Result<(Vec<u8>, usize, usize, usize)> {
    let mut r = open(path)?;
    let magic = r.u32_be()?;
    if magic != IMAGES_MAGIC {
        return Err(r.format_error(0, format!("bad image magic {magic:#010x}")));
    }
    let count = r.u32_be()? as usize;
    let rows = r.u32_be()? as usize;
    let cols = r.u32_be()? as usize;
    let mut pixels = vec![0u8; count * rows * cols];
    r.fill(&mut pixels)?;
    if !r.at_end()? {
        return Err(r.format_error(r.offset(), "trailing bytes after image payload"));
    }
    Ok((pixels, count, rows, cols))
}

pub fn read_labels(path: &Path) -> Result<Vec<u8>> {
    let mut r = open(path)?;
    let magic = r.u32_be()?;
    if magic != LABELS_MAGIC {
        return Err(r.format_error(0, format!("bad label magic {magic:#010x}")));
    }
    let count = r.u32_be()? as usize;
    let mut labels = vec![0u8; count];
    r.fill(&mut labels)?;
    if !r.at_end()? {
        return Err(r.format_error(r.offset(), "trailing bytes after label payload"));
    }
    Ok(labels)
}

/// Loads an image/label file pair. Pixels are scaled to `[0, 1]` and each
/// image is flattened row-major; the class count is `max(label) + 1`.
pub fn load_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let (pixels, count, rows, cols) = read_images(images)?;
    let ys = read_labels(labels)?;
    if ys.len() != count {
        return Err(Error::Format {
            path: labels.display().to_string(),
            offset: 4,
            message: format!("{} labels for {count} images", ys.len()),
        });
    }
    let data = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    let features = Matrix::from_vec(count, rows * cols, data)?;
    let classes = ys.iter().map(|&y| y as usize + 1).max().unwrap_or(0);
    Dataset::new(features, Some(ys.iter().map(|&y| y as usize).collect()), classes)
}

/// Writes an IDX image/label pair; mainly for fixtures.
pub fn write_idx(
    images: &Path,
    labels: &Path,
    pixels: &[u8],
    rows: usize,
    cols: usize,
    ys: &[u8],
) -> Result<()> {
    let count = ys.len();
    if pixels.len() != count * rows * cols {
        return Err(Error::input("pixel buffer does not match count × rows × cols"));
    }
    let write = |path: &Path, header: &[u32], payload: &[u8]| -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for h in header {
            w.write_all(&h.to_be_bytes()).map_err(|e| Error::io(path, e))?;
        }
        w.write_all(payload).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    };
    write(images, &[IMAGES_MAGIC, count as u32, rows as u32, cols as u32], pixels)?;
    write(labels, &[LABELS_MAGIC, count as u32], ys)
}
