//! Big-endian IDX files as used by MNIST.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Result, SolaError};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Greyscale images scaled to `[0, 1]`, stored row-major one after another.
#[derive(Clone, Debug, PartialEq)]
pub struct MnistImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<f64>,
}

impl MnistImages {
    pub fn pixels_per_image(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, i: usize) -> &[f64] {
        let n = self.pixels_per_image();
        &self.pixels[i * n..(i + 1) * n]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum IdxData {
    Images(MnistImages),
    Labels(Vec<u8>),
}

pub fn load_idx(path: impl AsRef<Path>) -> Result<IdxData> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| SolaError::io(path, e))?;
    parse_idx(&bytes)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).ok_or(SolaError::ShortRead)?;
        let out = self.bytes.get(self.pos..end).ok_or(SolaError::ShortRead)?;
        self.pos = end;
        Ok(out)
    }
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxData> {
    let mut r = Reader { bytes, pos: 0 };
    match r.u32()? {
        IMAGES_MAGIC => {
            let count = r.u32()? as usize;
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let len = count
                .checked_mul(rows)
                .and_then(|v| v.checked_mul(cols))
                .ok_or(SolaError::ShortRead)?;
            let pixels = r.take(len)?.iter().map(|&b| f64::from(b) / 255.0).collect();
            Ok(IdxData::Images(MnistImages {
                count,
                rows,
                cols,
                pixels,
            }))
        }
        LABELS_MAGIC => {
            let count = r.u32()? as usize;
            Ok(IdxData::Labels(r.take(count)?.to_vec()))
        }
        _ => Err(SolaError::NotIdx),
    }
}

pub fn write_idx_images(path: impl AsRef<Path>, rows: usize, cols: usize, pixels: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let per = rows * cols;
    if per == 0 || pixels.len() % per != 0 {
        return Err(SolaError::invalid("pixel buffer is not a whole number of images"));
    }
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGES_MAGIC, (pixels.len() / per) as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    write_all(path, &out)
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    write_all(path.as_ref(), &out)
}

fn write_all(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| SolaError::io(path, e))?;
    f.write_all(bytes).map_err(|e| SolaError::io(path, e))
}
