//! Dataset generation and ingestion: Bars-And-Stripes, IDX files, binarization.

use std::fs;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("BAS side length {0} outside supported range 2..=5")]
    SideOutOfRange(usize),
    #[error("label {0} outside 0..=9")]
    LabelOutOfRange(u8),
    #[error("{path}: wrong IDX magic {found:#x}, expected {expected:#x}")]
    WrongMagic { path: String, found: u32, expected: u32 },
    #[error("{path}: truncated IDX file (needed {needed} bytes, have {have})")]
    Truncated { path: String, needed: usize, have: usize },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A collection of equally sized sample vectors with optional labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Vec<f64>>,
    pub labels: Option<Vec<u8>>,
    pub dims: (usize, usize),
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_dim(&self) -> usize {
        self.dims.0 * self.dims.1
    }
}

/// All n×n Bars-And-Stripes patterns: images constant along rows or constant
/// along columns, each of the 2^{n+1} − 2 unique patterns exactly once.
///
/// Canonical order: row patterns by binary code 0..2^n (row i set iff bit i),
/// then column patterns by code, skipping the all-0 and all-1 images already
/// produced by the row pass.
pub fn generate_bas(n: usize) -> Result<Dataset, DataError> {
    if !(2..=5).contains(&n) {
        return Err(DataError::SideOutOfRange(n));
    }
    let mut samples = Vec::with_capacity((1usize << (n + 1)) - 2);
    for code in 0..(1usize << n) {
        let mut img = vec![0.0; n * n];
        for row in 0..n {
            if code >> row & 1 == 1 {
                for col in 0..n {
                    img[row * n + col] = 1.0;
                }
            }
        }
        samples.push(img);
    }
    for code in 1..((1usize << n) - 1) {
        let mut img = vec![0.0; n * n];
        for col in 0..n {
            if code >> col & 1 == 1 {
                for row in 0..n {
                    img[row * n + col] = 1.0;
                }
            }
        }
        samples.push(img);
    }
    Ok(Dataset { samples, labels: None, dims: (n, n) })
}

const IMAGES_MAGIC: u32 = 2051;
const LABELS_MAGIC: u32 = 2049;

fn read_file(path: &Path) -> Result<Vec<u8>, DataError> {
    fs::read(path).map_err(|source| DataError::Io { path: path.display().to_string(), source })
}

fn be_u32(bytes: &[u8], offset: usize, name: &str) -> Result<u32, DataError> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(DataError::Truncated {
            path: name.to_string(),
            needed: end,
            have: bytes.len(),
        });
    }
    Ok(u32::from_be_bytes([bytes[offset], bytes[offset + 1], bytes[offset + 2], bytes[offset + 3]]))
}

/// Parses an MNIST-style IDX image/label file pair; pixels scaled to [0, 1].
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset, DataError> {
    let img_bytes = read_file(images_path)?;
    let lbl_bytes = read_file(labels_path)?;
    parse_idx(
        &img_bytes,
        &lbl_bytes,
        &images_path.display().to_string(),
        &labels_path.display().to_string(),
    )
}

/// Parses IDX image and label payloads already in memory; `img_name` and
/// `lbl_name` only label error messages.
pub fn parse_idx(
    img_bytes: &[u8],
    lbl_bytes: &[u8],
    img_name: &str,
    lbl_name: &str,
) -> Result<Dataset, DataError> {
    let magic = be_u32(img_bytes, 0, img_name)?;
    if magic != IMAGES_MAGIC {
        return Err(DataError::WrongMagic {
            path: img_name.to_string(),
            found: magic,
            expected: IMAGES_MAGIC,
        });
    }
    let count = be_u32(img_bytes, 4, img_name)? as usize;
    let rows = be_u32(img_bytes, 8, img_name)? as usize;
    let cols = be_u32(img_bytes, 12, img_name)? as usize;
    let pixel_bytes = count * rows * cols;
    if img_bytes.len() < 16 + pixel_bytes {
        return Err(DataError::Truncated {
            path: img_name.to_string(),
            needed: 16 + pixel_bytes,
            have: img_bytes.len(),
        });
    }

    let magic = be_u32(lbl_bytes, 0, lbl_name)?;
    if magic != LABELS_MAGIC {
        return Err(DataError::WrongMagic {
            path: lbl_name.to_string(),
            found: magic,
            expected: LABELS_MAGIC,
        });
    }
    let lbl_count = be_u32(lbl_bytes, 4, lbl_name)? as usize;
    if lbl_bytes.len() < 8 + lbl_count {
        return Err(DataError::Truncated {
            path: lbl_name.to_string(),
            needed: 8 + lbl_count,
            have: lbl_bytes.len(),
        });
    }
    if lbl_count != count {
        return Err(DataError::CountMismatch { images: count, labels: lbl_count });
    }

    let dim = rows * cols;
    let samples = (0..count)
        .map(|i| {
            img_bytes[16 + i * dim..16 + (i + 1) * dim]
                .iter()
                .map(|&p| p as f64 / 255.0)
                .collect()
        })
        .collect();
    let labels = lbl_bytes[8..8 + count].to_vec();
    Ok(Dataset { samples, labels: Some(labels), dims: (rows, cols) })
}

/// Writes a dataset back out as an IDX file pair (pixels rescaled to bytes).
/// Round-trips bit-exactly with [`load_idx`] for byte-valued inputs.
pub fn write_idx(d: &Dataset, images_path: &Path, labels_path: &Path) -> Result<(), DataError> {
    let (rows, cols) = d.dims;
    let mut img = Vec::with_capacity(16 + d.len() * rows * cols);
    img.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    img.extend_from_slice(&(d.len() as u32).to_be_bytes());
    img.extend_from_slice(&(rows as u32).to_be_bytes());
    img.extend_from_slice(&(cols as u32).to_be_bytes());
    for s in &d.samples {
        for &p in s {
            img.push((p * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    let write = |path: &Path, bytes: &[u8]| -> Result<(), DataError> {
        let mut f = fs::File::create(path)
            .map_err(|source| DataError::Io { path: path.display().to_string(), source })?;
        f.write_all(bytes)
            .map_err(|source| DataError::Io { path: path.display().to_string(), source })
    };
    write(images_path, &img)?;

    let labels = d.labels.clone().unwrap_or_else(|| vec![0; d.len()]);
    let mut lbl = Vec::with_capacity(8 + labels.len());
    lbl.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    lbl.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    lbl.extend_from_slice(&labels);
    write(labels_path, &lbl)
}

/// Thresholds every pixel to {0, 1}.
pub fn binarize(d: &Dataset, threshold: f64) -> Dataset {
    Dataset {
        samples: d
            .samples
            .iter()
            .map(|s| s.iter().map(|&p| if p >= threshold { 1.0 } else { 0.0 }).collect())
            .collect(),
        labels: d.labels.clone(),
        dims: d.dims,
    }
}

/// Embedded 8×8 handwritten-digit fixture (1797 labeled images).
pub fn load_digit_fixture() -> Dataset {
    parse_idx(
        include_bytes!("../assets/digits-images-idx3-ubyte"),
        include_bytes!("../assets/digits-labels-idx1-ubyte"),
        "embedded digits images",
        "embedded digits labels",
    )
    .expect("embedded digit fixture is well formed")
}

/// Nearest-neighbor upscale of every image to the given dimensions.
pub fn upscale_nearest(d: &Dataset, rows: usize, cols: usize) -> Dataset {
    let (r0, c0) = d.dims;
    let samples = d
        .samples
        .iter()
        .map(|s| {
            let mut out = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                let sr = r * r0 / rows;
                for c in 0..cols {
                    let sc = c * c0 / cols;
                    out.push(s[sr * c0 + sc]);
                }
            }
            out
        })
        .collect();
    Dataset { samples, labels: d.labels.clone(), dims: (rows, cols) }
}

/// First `n` samples (all of them if the set is smaller).
pub fn take_first(d: &Dataset, n: usize) -> Dataset {
    let n = n.min(d.len());
    Dataset {
        samples: d.samples[..n].to_vec(),
        labels: d.labels.as_ref().map(|l| l[..n].to_vec()),
        dims: d.dims,
    }
}

fn shift_image(s: &[f64], rows: usize, cols: usize, dr: i64, dc: i64) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows as i64 {
        let sr = r - dr;
        if sr < 0 || sr >= rows as i64 {
            continue;
        }
        for c in 0..cols as i64 {
            let sc = c - dc;
            if sc < 0 || sc >= cols as i64 {
                continue;
            }
            out[(r * cols as i64 + c) as usize] = s[(sr * cols as i64 + sc) as usize];
        }
    }
    out
}

/// Handwritten-digit stand-in for a 28×28 digit corpus, built from the
/// embedded 8×8 fixture: upscaled to 28×28, the training pool expanded to
/// `train_n` images by deterministic random ±2-pixel translations, the test
/// set held out before augmentation.
pub fn digit_surrogate(train_n: usize, test_n: usize, seed: u64) -> (Dataset, Dataset) {
    use rand::Rng;
    use rand::SeedableRng;
    let full = upscale_nearest(&load_digit_fixture(), 28, 28);
    let labels = full.labels.as_ref().expect("fixture is labeled");
    let test_n = test_n.min(full.len() / 4);
    let test = Dataset {
        samples: full.samples[full.len() - test_n..].to_vec(),
        labels: Some(labels[full.len() - test_n..].to_vec()),
        dims: (28, 28),
    };
    let pool = full.len() - test_n;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(train_n);
    let mut out_labels = Vec::with_capacity(train_n);
    for i in 0..train_n {
        let idx = i % pool;
        let (dr, dc) = if i < pool {
            (0, 0)
        } else {
            (rng.gen_range(-2i64..=2), rng.gen_range(-2i64..=2))
        };
        samples.push(shift_image(&full.samples[idx], 28, 28, dr, dc));
        out_labels.push(labels[idx]);
    }
    (Dataset { samples, labels: Some(out_labels), dims: (28, 28) }, test)
}

/// Loads a real 28×28 digit corpus from `$MNIST_DIR` (standard IDX file
/// names) when that variable is set, otherwise falls back to the embedded
/// surrogate. Returns (train, test) truncated to the requested sizes.
pub fn mnist_or_surrogate(
    train_n: usize,
    test_n: usize,
    seed: u64,
) -> Result<(Dataset, Dataset), DataError> {
    if let Ok(dir) = std::env::var("MNIST_DIR") {
        let dir = Path::new(&dir);
        let train = load_idx(
            &dir.join("train-images-idx3-ubyte"),
            &dir.join("train-labels-idx1-ubyte"),
        )?;
        let test = load_idx(
            &dir.join("t10k-images-idx3-ubyte"),
            &dir.join("t10k-labels-idx1-ubyte"),
        )?;
        Ok((take_first(&train, train_n), take_first(&test, test_n)))
    } else {
        Ok(digit_surrogate(train_n, test_n, seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn bas_counts() {
        assert_eq!(generate_bas(2).unwrap().len(), 6);
        assert_eq!(generate_bas(3).unwrap().len(), 14);
        assert_eq!(generate_bas(4).unwrap().len(), 30);
        assert_eq!(generate_bas(5).unwrap().len(), 62);
    }

    #[test]
    fn bas_side_out_of_range() {
        assert!(generate_bas(1).is_err());
        assert!(generate_bas(6).is_err());
    }

    fn as_bits(img: &[f64]) -> Vec<u8> {
        img.iter().map(|&p| p as u8).collect()
    }

    #[test]
    fn bas_patterns_unique_and_striped() {
        for n in 2..=5 {
            let d = generate_bas(n).unwrap();
            let mut seen = HashSet::new();
            for img in &d.samples {
                assert!(seen.insert(as_bits(img)), "duplicate pattern at n = {n}");
                let rows_const = (0..n).all(|r| (1..n).all(|c| img[r * n + c] == img[r * n]));
                let cols_const = (0..n).all(|c| (1..n).all(|r| img[r * n + c] == img[c]));
                assert!(rows_const || cols_const);
            }
        }
    }

    #[test]
    fn bas_closed_under_transpose() {
        for n in 2..=5 {
            let d = generate_bas(n).unwrap();
            let set: HashSet<Vec<u8>> = d.samples.iter().map(|s| as_bits(s)).collect();
            for img in &d.samples {
                let mut t = vec![0.0; n * n];
                for r in 0..n {
                    for c in 0..n {
                        t[c * n + r] = img[r * n + c];
                    }
                }
                assert!(set.contains(&as_bits(&t)));
            }
        }
    }

    fn fixture_pair(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
        (dir.join("images-idx3-ubyte"), dir.join("labels-idx1-ubyte"))
    }

    /// Byte-level fixture written independently of write_idx: two 2×2 images.
    fn write_fixture(images: &Path, labels: &Path) {
        let mut img: Vec<u8> = vec![];
        img.extend_from_slice(&2051u32.to_be_bytes());
        img.extend_from_slice(&2u32.to_be_bytes());
        img.extend_from_slice(&2u32.to_be_bytes());
        img.extend_from_slice(&2u32.to_be_bytes());
        img.extend_from_slice(&[0, 51, 102, 255, 255, 204, 153, 0]);
        fs::write(images, &img).unwrap();
        let mut lbl: Vec<u8> = vec![];
        lbl.extend_from_slice(&2049u32.to_be_bytes());
        lbl.extend_from_slice(&2u32.to_be_bytes());
        lbl.extend_from_slice(&[3, 7]);
        fs::write(labels, &lbl).unwrap();
    }

    #[test]
    fn idx_fixture_parses_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let (images, labels) = fixture_pair(dir.path());
        write_fixture(&images, &labels);
        let d = load_idx(&images, &labels).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.dims, (2, 2));
        assert_eq!(d.labels.as_deref(), Some(&[3u8, 7][..]));
        let expected: Vec<f64> = [0, 51, 102, 255].iter().map(|&p| p as f64 / 255.0).collect();
        assert_eq!(d.samples[0], expected);
    }

    #[test]
    fn idx_wrong_magic() {
        let dir = tempfile::tempdir().unwrap();
        let (images, labels) = fixture_pair(dir.path());
        write_fixture(&images, &labels);
        // Labels file in the images slot.
        let err = load_idx(&labels, &images).unwrap_err();
        assert!(matches!(err, DataError::WrongMagic { found: 2049, .. }), "{err}");
    }

    #[test]
    fn idx_truncated() {
        let dir = tempfile::tempdir().unwrap();
        let (images, labels) = fixture_pair(dir.path());
        write_fixture(&images, &labels);
        let bytes = fs::read(&images).unwrap();
        fs::write(&images, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_idx(&images, &labels).unwrap_err(), DataError::Truncated { .. }));
    }

    #[test]
    fn idx_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let (images, labels) = fixture_pair(dir.path());
        write_fixture(&images, &labels);
        let mut lbl: Vec<u8> = vec![];
        lbl.extend_from_slice(&2049u32.to_be_bytes());
        lbl.extend_from_slice(&3u32.to_be_bytes());
        lbl.extend_from_slice(&[1, 2, 3]);
        fs::write(&labels, &lbl).unwrap();
        assert!(matches!(load_idx(&images, &labels).unwrap_err(), DataError::CountMismatch { .. }));
    }

    #[test]
    fn idx_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (images, labels) = fixture_pair(dir.path());
        write_fixture(&images, &labels);
        let d = load_idx(&images, &labels).unwrap();
        let (images2, labels2) = (dir.path().join("i2"), dir.path().join("l2"));
        write_idx(&d, &images2, &labels2).unwrap();
        assert_eq!(fs::read(&images).unwrap(), fs::read(&images2).unwrap());
        assert_eq!(fs::read(&labels).unwrap(), fs::read(&labels2).unwrap());
    }

    #[test]
    fn binarize_cases() {
        let d = Dataset {
            samples: vec![vec![0.0, 0.2, 0.5, 0.9]],
            labels: None,
            dims: (2, 2),
        };
        assert_eq!(binarize(&d, 0.5).samples[0], vec![0.0, 0.0, 1.0, 1.0]);
        assert_eq!(binarize(&d, 0.0).samples[0], vec![1.0, 1.0, 1.0, 1.0]);
        let once = binarize(&d, 0.5);
        assert_eq!(binarize(&once, 0.5), once);
    }

    #[test]
    fn digit_fixture_shape() {
        let d = load_digit_fixture();
        assert_eq!(d.len(), 1797);
        assert_eq!(d.dims, (8, 8));
        let labels = d.labels.as_ref().unwrap();
        assert!(labels.iter().all(|&l| l <= 9));
        // All ten classes present.
        let classes: HashSet<u8> = labels.iter().copied().collect();
        assert_eq!(classes.len(), 10);
        assert!(d.samples.iter().flatten().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn upscale_preserves_values_and_shape() {
        let d = Dataset {
            samples: vec![vec![0.0, 1.0, 0.5, 0.25]],
            labels: Some(vec![3]),
            dims: (2, 2),
        };
        let up = upscale_nearest(&d, 4, 4);
        assert_eq!(up.dims, (4, 4));
        assert_eq!(up.samples[0][0], 0.0); // top-left quadrant
        assert_eq!(up.samples[0][3], 1.0); // top-right quadrant
        assert_eq!(up.samples[0][12], 0.5); // bottom-left quadrant
        assert_eq!(up.samples[0][15], 0.25);
        assert_eq!(up.labels, Some(vec![3]));
    }

    #[test]
    fn shift_pads_with_zeros() {
        let s = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(shift_image(&s, 2, 2, 0, 0), s);
        // Shift right by one: left column zero, original left column moves right.
        assert_eq!(shift_image(&s, 2, 2, 0, 1), vec![0.0, 1.0, 0.0, 3.0]);
        // Shift down by one.
        assert_eq!(shift_image(&s, 2, 2, 1, 0), vec![0.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn surrogate_shapes_and_determinism() {
        let (train, test) = digit_surrogate(2000, 300, 9);
        assert_eq!(train.len(), 2000);
        assert_eq!(test.len(), 300);
        assert_eq!(train.dims, (28, 28));
        assert_eq!(test.dims, (28, 28));
        let (train2, _) = digit_surrogate(2000, 300, 9);
        assert_eq!(train, train2);
        // Test images never appear in the training pool (held out pre-augmentation).
        let train_set: HashSet<Vec<u64>> = train
            .samples
            .iter()
            .map(|s| s.iter().map(|p| p.to_bits()).collect())
            .collect();
        let leaked = test
            .samples
            .iter()
            .filter(|s| train_set.contains(&s.iter().map(|p| p.to_bits()).collect::<Vec<u64>>()))
            .count();
        assert_eq!(leaked, 0);
    }
}
