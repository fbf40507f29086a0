//! IDX binary dataset ingestion (the MNIST distribution format).
//!
//! Big-endian throughout: magic 0x00000803 for image files (u8 tensor,
//! 3 dimensions) and 0x00000801 for label files (u8 tensor, 1 dimension).

use std::fs;
use std::path::Path;

use super::data::{Dataset, Matrix};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, thiserror::Error)]
pub enum IdxError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic {
        path: String,
        found: u32,
        expected: u32,
    },
    #[error("{path}: truncated file (need {needed} bytes, have {have})")]
    Truncated {
        path: String,
        needed: usize,
        have: usize,
    },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
}

/// Raw contents of an IDX image/label pair: pixel bytes per image
/// (row-major), and one label byte per image.
pub struct RawIdx {
    pub pixels: Vec<u8>,
    pub labels: Vec<u8>,
    pub count: usize,
    pub image_dim: usize,
}

fn read_u32_be(bytes: &[u8], offset: usize, path: &str) -> Result<u32, IdxError> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(IdxError::Truncated {
            path: path.to_string(),
            needed: end,
            have: bytes.len(),
        });
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

/// Reads an image/label IDX pair without any scaling or encoding, so the
/// byte-for-byte content can be checked against fixtures.
pub fn read_idx_raw(images_path: &Path, labels_path: &Path) -> Result<RawIdx, IdxError> {
    let img_name = images_path.display().to_string();
    let lbl_name = labels_path.display().to_string();
    let img_bytes = fs::read(images_path).map_err(|source| IdxError::Io {
        path: img_name.clone(),
        source,
    })?;
    let lbl_bytes = fs::read(labels_path).map_err(|source| IdxError::Io {
        path: lbl_name.clone(),
        source,
    })?;

    let magic = read_u32_be(&img_bytes, 0, &img_name)?;
    if magic != IMAGES_MAGIC {
        return Err(IdxError::BadMagic {
            path: img_name,
            found: magic,
            expected: IMAGES_MAGIC,
        });
    }
    let count = read_u32_be(&img_bytes, 4, &img_name)? as usize;
    let rows = read_u32_be(&img_bytes, 8, &img_name)? as usize;
    let cols = read_u32_be(&img_bytes, 12, &img_name)? as usize;
    let image_dim = rows * cols;
    let needed = 16 + count * image_dim;
    if img_bytes.len() < needed {
        return Err(IdxError::Truncated {
            path: img_name,
            needed,
            have: img_bytes.len(),
        });
    }

    let magic = read_u32_be(&lbl_bytes, 0, &lbl_name)?;
    if magic != LABELS_MAGIC {
        return Err(IdxError::BadMagic {
            path: lbl_name,
            found: magic,
            expected: LABELS_MAGIC,
        });
    }
    let label_count = read_u32_be(&lbl_bytes, 4, &lbl_name)? as usize;
    let needed = 8 + label_count;
    if lbl_bytes.len() < needed {
        return Err(IdxError::Truncated {
            path: lbl_name,
            needed,
            have: lbl_bytes.len(),
        });
    }
    if count != label_count {
        return Err(IdxError::CountMismatch {
            images: count,
            labels: label_count,
        });
    }

    Ok(RawIdx {
        pixels: img_bytes[16..16 + count * image_dim].to_vec(),
        labels: lbl_bytes[8..8 + label_count].to_vec(),
        count,
        image_dim,
    })
}

/// Loads an IDX image/label pair as a [`Dataset`]: pixels scaled to
/// [0, 1] by division by 255, labels one-hot encoded with 10 classes.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset, IdxError> {
    let raw = read_idx_raw(images_path, labels_path)?;
    let data: Vec<f64> = raw.pixels.iter().map(|&b| f64::from(b) / 255.0).collect();
    let inputs = Matrix::new(raw.count, raw.image_dim, data);
    let targets = Dataset::one_hot(&raw.labels, 10);
    Ok(Dataset::new(inputs, targets))
}

/// Writes an image/label IDX pair (u8 pixels, u8 labels). Inverse of
/// [`read_idx_raw`]; used to build fixtures and export synthetic sets.
pub fn write_idx(
    images_path: &Path,
    labels_path: &Path,
    pixels: &[u8],
    labels: &[u8],
    rows: usize,
    cols: usize,
) -> std::io::Result<()> {
    let count = labels.len();
    assert_eq!(
        pixels.len(),
        count * rows * cols,
        "write_idx: pixel buffer does not match count * rows * cols"
    );
    let mut img = Vec::with_capacity(16 + pixels.len());
    img.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    img.extend_from_slice(&(count as u32).to_be_bytes());
    img.extend_from_slice(&(rows as u32).to_be_bytes());
    img.extend_from_slice(&(cols as u32).to_be_bytes());
    img.extend_from_slice(pixels);
    fs::write(images_path, img)?;

    let mut lbl = Vec::with_capacity(8 + count);
    lbl.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    lbl.extend_from_slice(&(count as u32).to_be_bytes());
    lbl.extend_from_slice(labels);
    fs::write(labels_path, lbl)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_paths(dir: &tempfile::TempDir) -> (std::path::PathBuf, std::path::PathBuf) {
        (
            dir.path().join("images-idx3-ubyte"),
            dir.path().join("labels-idx1-ubyte"),
        )
    }

    #[test]
    fn fixture_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = fixture_paths(&dir);
        // two 2x2 "images"
        let pixels: Vec<u8> = vec![0, 64, 128, 255, 10, 20, 30, 40];
        let labels: Vec<u8> = vec![3, 7];
        write_idx(&img, &lbl, &pixels, &labels, 2, 2).unwrap();

        let raw = read_idx_raw(&img, &lbl).unwrap();
        assert_eq!(raw.pixels, pixels);
        assert_eq!(raw.labels, labels);
        assert_eq!(raw.count, 2);
        assert_eq!(raw.image_dim, 4);

        let ds = load_idx(&img, &lbl).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.inputs.row(0), &[0.0, 64.0 / 255.0, 128.0 / 255.0, 1.0]);
        assert_eq!(ds.targets.row(0)[3], 1.0);
        assert_eq!(ds.targets.row(1)[7], 1.0);
    }

    #[test]
    fn truncated_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = fixture_paths(&dir);
        write_idx(&img, &lbl, &[1, 2, 3, 4], &[0], 2, 2).unwrap();
        // chop the image file mid-header
        let bytes = fs::read(&img).unwrap();
        fs::write(&img, &bytes[..10]).unwrap();
        match load_idx(&img, &lbl) {
            Err(IdxError::Truncated { .. }) => {}
            other => panic!("expected Truncated, got {other:?}"),
        }
    }

    #[test]
    fn truncated_body_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = fixture_paths(&dir);
        write_idx(&img, &lbl, &[1, 2, 3, 4], &[0], 2, 2).unwrap();
        let bytes = fs::read(&img).unwrap();
        fs::write(&img, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(
            load_idx(&img, &lbl),
            Err(IdxError::Truncated { .. })
        ));
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = fixture_paths(&dir);
        write_idx(&img, &lbl, &[1, 2, 3, 4], &[0], 2, 2).unwrap();
        let mut bytes = fs::read(&img).unwrap();
        bytes[3] = 0x99;
        fs::write(&img, &bytes).unwrap();
        assert!(matches!(
            load_idx(&img, &lbl),
            Err(IdxError::BadMagic { .. })
        ));
    }

    #[test]
    fn count_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = fixture_paths(&dir);
        let (img2, lbl2) = (dir.path().join("i2"), dir.path().join("l2"));
        write_idx(&img, &lbl, &[1, 2, 3, 4], &[0], 2, 2).unwrap();
        write_idx(&img2, &lbl2, &[1, 2, 3, 4, 5, 6, 7, 8], &[0, 1], 2, 2).unwrap();
        assert!(matches!(
            load_idx(&img, &lbl2),
            Err(IdxError::CountMismatch { .. })
        ));
    }

    /// Checks header constants against the real MNIST training files when
    /// a directory is supplied; the files are not shipped with the repo.
    #[test]
    #[ignore = "requires MNIST_DIR pointing at the original IDX files"]
    fn real_mnist_headers() {
        let dir = std::env::var("MNIST_DIR").expect("set MNIST_DIR to run");
        let ds = load_idx(
            Path::new(&dir).join("train-images-idx3-ubyte").as_path(),
            Path::new(&dir).join("train-labels-idx1-ubyte").as_path(),
        )
        .unwrap();
        assert_eq!(ds.len(), 60_000);
        assert_eq!(ds.input_dim(), 784);
        assert_eq!(ds.output_dim(), 10);
    }
}
