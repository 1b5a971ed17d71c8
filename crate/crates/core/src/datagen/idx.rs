//! Reader (and fixture writer) for the big-endian IDX format used by MNIST.

use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Images flattened row-major and scaled to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxData {
    pub features: Vec<f64>,
    pub n_rows: usize,
    pub n_features: usize,
    pub labels: Vec<usize>,
}

impl IdxData {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_u32(cur: &mut Cursor<&[u8]>, path: &Path) -> Result<u32> {
    cur.read_u32::<BigEndian>().map_err(|e| Error::io(path, e))
}

fn check_magic(cur: &mut Cursor<&[u8]>, path: &Path, expected: u32) -> Result<()> {
    let magic = read_u32(cur, path)?;
    if magic != expected {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: 0,
            msg: format!("magic number {magic:#010x}, expected {expected:#010x}"),
        });
    }
    Ok(())
}

pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<IdxData> {
    let (images_path, labels_path) = (images_path.as_ref(), labels_path.as_ref());

    let bytes = read_all(images_path)?;
    let mut cur = Cursor::new(bytes.as_slice());
    check_magic(&mut cur, images_path, IMAGES_MAGIC)?;
    let n_images = read_u32(&mut cur, images_path)? as usize;
    let rows = read_u32(&mut cur, images_path)? as usize;
    let cols = read_u32(&mut cur, images_path)? as usize;
    let n_features = rows * cols;
    let mut pixels = vec![0u8; n_images * n_features];
    cur.read_exact(&mut pixels).map_err(|e| Error::io(images_path, e))?;
    let features = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();

    let bytes = read_all(labels_path)?;
    let mut cur = Cursor::new(bytes.as_slice());
    check_magic(&mut cur, labels_path, LABELS_MAGIC)?;
    let n_labels = read_u32(&mut cur, labels_path)? as usize;
    if n_labels != n_images {
        return Err(Error::Format {
            path: labels_path.to_path_buf(),
            offset: 4,
            msg: format!("{n_labels} labels for {n_images} images"),
        });
    }
    let mut raw = vec![0u8; n_labels];
    cur.read_exact(&mut raw).map_err(|e| Error::io(labels_path, e))?;

    Ok(IdxData {
        features,
        n_rows: n_images,
        n_features,
        labels: raw.into_iter().map(usize::from).collect(),
    })
}

/// Write an IDX image file. `pixels.len()` must equal `n * rows * cols`.
pub fn write_images(path: impl AsRef<Path>, rows: u32, cols: u32, pixels: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let per = (rows * cols) as usize;
    if per == 0 || !pixels.len().is_multiple_of(per) {
        return Err(Error::config("pixel buffer is not a whole number of images"));
    }
    let mut buf = Vec::with_capacity(16 + pixels.len());
    buf.write_u32::<BigEndian>(IMAGES_MAGIC).unwrap();
    buf.write_u32::<BigEndian>((pixels.len() / per) as u32).unwrap();
    buf.write_u32::<BigEndian>(rows).unwrap();
    buf.write_u32::<BigEndian>(cols).unwrap();
    buf.write_all(pixels).unwrap();
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(8 + labels.len());
    buf.write_u32::<BigEndian>(LABELS_MAGIC).unwrap();
    buf.write_u32::<BigEndian>(labels.len() as u32).unwrap();
    buf.write_all(labels).unwrap();
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}
