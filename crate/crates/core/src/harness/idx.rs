//! IDX image/label files (the MNIST distribution format).
//!
//! Headers are big-endian: a magic word (`0x00000803` for `u8` images of
//! shape `n x rows x cols`, `0x00000801` for `n` `u8` labels) followed by one
//! `u32` per dimension, then the raw bytes.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Square grayscale images with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImages {
    /// Side length `D` of every image.
    pub dim: usize,
    /// `D x D` pixel matrices (row index first) with values in `[0, 255]`.
    pub images: Vec<Matrix>,
    pub labels: Vec<u8>,
}

impl LabeledImages {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Indices of the samples carrying `label`, in file order.
    pub fn indices_of(&self, label: u8) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == label)
            .map(|(i, _)| i)
            .collect()
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format(at as u64, "truncated header"))
}

/// Parses an IDX image file into `(dim, images)`; images must be square.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, Vec<Matrix>)> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::format(0, format!("bad image magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    if rows != cols || rows == 0 {
        return Err(Error::format(8, format!("expected square images, header says {rows}x{cols}")));
    }
    let px = rows * cols;
    let body = &bytes[16..];
    if body.len() < n * px {
        let complete = body.len() / px;
        return Err(Error::format(
            (16 + complete * px) as u64,
            format!("header promises {n} images, data holds {complete}"),
        ));
    }
    if body.len() > n * px {
        return Err(Error::format((16 + n * px) as u64, "trailing bytes after image data"));
    }
    let images = body
        .chunks_exact(px)
        .map(|img| Matrix::from_fn(rows, cols, |r, c| img[r * cols + c] as f64))
        .collect();
    Ok((rows, images))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(Error::format(0, format!("bad label magic {magic:#010x}, expected {LABELS_MAGIC:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() != n {
        return Err(Error::format(
            (8 + body.len().min(n)) as u64,
            format!("header promises {n} labels, data holds {}", body.len()),
        ));
    }
    Ok(body.to_vec())
}

/// Loads an image file and its label file.
pub fn load_idx_images(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<LabeledImages> {
    let (dim, imgs) = parse_idx_images(&fs::read(images)?)?;
    let labels = parse_idx_labels(&fs::read(labels)?)?;
    if labels.len() != imgs.len() {
        return Err(Error::format(
            4,
            format!("{} images but {} labels", imgs.len(), labels.len()),
        ));
    }
    Ok(LabeledImages {
        dim,
        images: imgs,
        labels,
    })
}

/// Loads the standard `train-*` and `t10k-*` files from an MNIST directory.
pub fn load_mnist_dir(dir: impl AsRef<Path>) -> Result<(LabeledImages, LabeledImages)> {
    let d = dir.as_ref();
    let train = load_idx_images(d.join("train-images-idx3-ubyte"), d.join("train-labels-idx1-ubyte"))?;
    let test = load_idx_images(d.join("t10k-images-idx3-ubyte"), d.join("t10k-labels-idx1-ubyte"))?;
    Ok((train, test))
}

/// Writes images (rounded and clamped to `u8`) and labels as two IDX files.
pub fn write_idx<W: Write>(set: &LabeledImages, images: &mut W, labels: &mut W) -> Result<()> {
    let n = u32::try_from(set.len()).map_err(|_| Error::arg("too many images"))?;
    let d = set.dim as u32;
    images.write_all(&IMAGES_MAGIC.to_be_bytes())?;
    for v in [n, d, d] {
        images.write_all(&v.to_be_bytes())?;
    }
    for img in &set.images {
        for r in 0..set.dim {
            for c in 0..set.dim {
                images.write_all(&[img[(r, c)].round().clamp(0.0, 255.0) as u8])?;
            }
        }
    }
    labels.write_all(&LABELS_MAGIC.to_be_bytes())?;
    labels.write_all(&n.to_be_bytes())?;
    labels.write_all(&set.labels)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(dim: usize) -> LabeledImages {
        LabeledImages {
            dim,
            images: vec![
                Matrix::from_fn(dim, dim, |r, c| (r * dim + c) as f64),
                Matrix::from_fn(dim, dim, |r, c| 255.0 - (r + c) as f64),
            ],
            labels: vec![3, 7],
        }
    }

    fn encode(set: &LabeledImages) -> (Vec<u8>, Vec<u8>) {
        let (mut i, mut l) = (Vec::new(), Vec::new());
        write_idx(set, &mut i, &mut l).unwrap();
        (i, l)
    }

    #[test]
    fn two_image_round_trip() {
        let set = fixture(4);
        let (i, l) = encode(&set);
        let (dim, imgs) = parse_idx_images(&i).unwrap();
        assert_eq!(dim, 4);
        assert_eq!(imgs, set.images);
        assert_eq!(parse_idx_labels(&l).unwrap(), set.labels);
        // row-major pixel order
        assert_eq!(i[16 + 1], 1);
        assert_eq!(imgs[0][(0, 1)], 1.0);
    }

    #[test]
    fn mnist_sized_header() {
        let (i, _) = encode(&fixture(28));
        let (dim, imgs) = parse_idx_images(&i).unwrap();
        assert_eq!(dim, 28);
        assert_eq!(imgs[1].shape(), (28, 28));
    }

    #[test]
    fn bad_inputs() {
        let set = fixture(3);
        let (i, l) = encode(&set);
        assert!(matches!(parse_idx_images(&l), Err(Error::Format { offset: 0, .. })));
        assert!(matches!(parse_idx_labels(&i), Err(Error::Format { offset: 0, .. })));
        match parse_idx_images(&i[..i.len() - 2]) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 16 + 9),
            other => panic!("{other:?}"),
        }
        assert!(parse_idx_images(&i[..10]).is_err());
        assert!(parse_idx_labels(&l[..l.len() - 1]).is_err());
    }

    #[test]
    fn count_mismatch_between_files() {
        let dir = tempfile::tempdir().unwrap();
        let set = fixture(3);
        let (i, _) = encode(&set);
        let one = LabeledImages {
            images: vec![set.images[0].clone()],
            labels: vec![1],
            dim: 3,
        };
        let (_, l1) = encode(&one);
        std::fs::write(dir.path().join("img"), i).unwrap();
        std::fs::write(dir.path().join("lbl"), l1).unwrap();
        assert!(load_idx_images(dir.path().join("img"), dir.path().join("lbl")).is_err());
    }
}
