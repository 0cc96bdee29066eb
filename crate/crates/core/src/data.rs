//! Dataset generation and ingestion: the Bars-and-Stripes generator, IDX
//! image loading with nearest-neighbor downscaling and binarization, and
//! on-disk persistence.
//!
//! # Dataset container
//!
//! A dataset file is a little-endian binary container:
//!
//! ```text
//! magic    4 bytes   b"QDS1"
//! width    u32
//! height   u32
//! count    u32
//! split    u8        0 = train, 1 = test
//! name_len u16
//! name     name_len bytes of UTF-8
//! images   count blocks of ceil(width*height/8) bytes,
//!          pixels packed row-major, MSB first, no row padding
//! ```
//!
//! PBM (P4) import/export is provided for single images: `P4`, whitespace,
//! width, height, then rows packed MSB-first with each row padded to a byte
//! boundary. Bit 1 (black) maps to pixel value 1.

use std::path::Path;

use crate::bits::{BinaryImage, BitVector};
use crate::error::{Error, Result};
use crate::rng;

const DATASET_MAGIC: &[u8; 4] = b"QDS1";

/// Default cutoff for [`binarize`].
pub const DEFAULT_BINARIZE_THRESHOLD: u8 = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::invalid(format!(
                "unknown split {other:?}, expected train or test"
            ))),
        }
    }
}

/// A named collection of equally sized binary images.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    name: String,
    width: usize,
    height: usize,
    split: Split,
    images: Vec<BitVector>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        width: usize,
        height: usize,
        split: Split,
        images: Vec<BitVector>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("dataset dimensions must be positive"));
        }
        for (i, img) in images.iter().enumerate() {
            if img.len() != width * height {
                return Err(Error::invalid(format!(
                    "image {i} has {} pixels, expected {}x{} = {}",
                    img.len(),
                    width,
                    height,
                    width * height
                )));
            }
        }
        Ok(Dataset {
            name: name.into(),
            width,
            height,
            split,
            images,
        })
    }

    pub fn from_images(
        name: impl Into<String>,
        split: Split,
        images: Vec<BinaryImage>,
    ) -> Result<Self> {
        let (w, h) = match images.first() {
            Some(first) => (first.width(), first.height()),
            None => return Err(Error::EmptyData("dataset with no images")),
        };
        for (i, img) in images.iter().enumerate() {
            if (img.width(), img.height()) != (w, h) {
                return Err(Error::invalid(format!(
                    "image {i} is {}x{}, dataset is {w}x{h}",
                    img.width(),
                    img.height()
                )));
            }
        }
        Dataset::new(name, w, h, split, images.into_iter().map(|im| im.pixels().clone()).collect())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn bits(&self, i: usize) -> &BitVector {
        &self.images[i]
    }

    pub fn images(&self) -> &[BitVector] {
        &self.images
    }

    pub fn image(&self, i: usize) -> BinaryImage {
        BinaryImage::from_pixels(self.width, self.height, self.images[i].clone())
            .expect("dataset invariant: image length matches dimensions")
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let name = self.name.as_bytes();
        if name.len() > u16::MAX as usize {
            return Err(Error::invalid("dataset name longer than 65535 bytes"));
        }
        let count = u32::try_from(self.images.len())
            .map_err(|_| Error::invalid("dataset has more than u32::MAX images"))?;
        let mut out = Vec::new();
        out.extend_from_slice(DATASET_MAGIC);
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&count.to_le_bytes());
        out.push(match self.split {
            Split::Train => 0,
            Split::Test => 1,
        });
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name);
        for img in &self.images {
            out.extend_from_slice(&pack_bits(img.as_slice()));
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut off = 0usize;
        let magic = take(bytes, &mut off, 4, "magic")?;
        if magic != DATASET_MAGIC {
            return Err(Error::Parse {
                offset: 0,
                message: format!("bad dataset magic {magic:?}, expected {DATASET_MAGIC:?}"),
            });
        }
        let width = read_le_u32(bytes, &mut off, "width")? as usize;
        let height = read_le_u32(bytes, &mut off, "height")? as usize;
        let count = read_le_u32(bytes, &mut off, "count")? as usize;
        let split_off = off;
        let split = match take(bytes, &mut off, 1, "split")?[0] {
            0 => Split::Train,
            1 => Split::Test,
            other => {
                return Err(Error::Parse {
                    offset: split_off as u64,
                    message: format!("invalid split byte {other}"),
                })
            }
        };
        let name_len = u16::from_le_bytes(
            take(bytes, &mut off, 2, "name length")?.try_into().unwrap(),
        ) as usize;
        let name_off = off;
        let name = std::str::from_utf8(take(bytes, &mut off, name_len, "name")?)
            .map_err(|e| Error::Parse {
                offset: (name_off + e.valid_up_to()) as u64,
                message: "dataset name is not valid UTF-8".into(),
            })?
            .to_string();
        let stride = (width * height).div_ceil(8);
        let mut images = Vec::with_capacity(count);
        for i in 0..count {
            let block = take(bytes, &mut off, stride, "image block")?;
            let bits = unpack_bits(block, width * height);
            images.push(BitVector::new(bits).map_err(|e| Error::Parse {
                offset: off as u64,
                message: format!("image {i}: {e}"),
            })?);
        }
        if off != bytes.len() {
            return Err(Error::Parse {
                offset: off as u64,
                message: format!("{} trailing bytes after last image", bytes.len() - off),
            });
        }
        Dataset::new(name, width, height, split, images)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_bytes()?)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Dataset::from_bytes(&std::fs::read(path)?)
    }
}

/// True when every row is constant or every column is constant.
pub fn is_bars_or_stripes(img: &BinaryImage) -> bool {
    let rows_constant = (0..img.height())
        .all(|r| (1..img.width()).all(|c| img.get(r, c) == img.get(r, 0)));
    let cols_constant = (0..img.width())
        .all(|c| (1..img.height()).all(|r| img.get(r, c) == img.get(0, c)));
    rows_constant || cols_constant
}

/// Sample `count` Bars-and-Stripes images: orientation uniform, then each
/// line all-0 or all-1 with probability 1/2. Constant images belong to both
/// orientations and are not excluded.
pub fn gen_bas(
    width: usize,
    height: usize,
    count: usize,
    seed: u64,
    split: Split,
) -> Result<Dataset> {
    use rand::Rng;
    if width == 0 || height == 0 {
        return Err(Error::invalid("image dimensions must be positive"));
    }
    if count == 0 {
        return Err(Error::invalid("count must be at least 1"));
    }
    let mut rng = rng::stream(seed, &[0x626173]);
    let mut images = Vec::with_capacity(count);
    for _ in 0..count {
        let rows_oriented = rng.gen_bool(0.5);
        let lines = if rows_oriented { height } else { width };
        let values: Vec<u8> = (0..lines).map(|_| u8::from(rng.gen_bool(0.5))).collect();
        let img = BitVector::from_fn(width * height, |i| {
            let (r, c) = (i / width, i % width);
            values[if rows_oriented { r } else { c }]
        })?;
        images.push(img);
    }
    Dataset::new(
        format!("bas-{width}x{height}-{split}"),
        width,
        height,
        split,
        images,
    )
}

/// Row-major 8-bit grayscale image, the unit IDX files decode to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn from_pixels(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if pixels.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                got: pixels.len(),
            });
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        assert!(row < self.height && col < self.width);
        self.pixels[row * self.width + col]
    }
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;

/// Decode an IDX unsigned-byte image container (big-endian magic
/// `0x00000803`, then count, rows, cols, then raw pixels).
pub fn parse_idx(bytes: &[u8]) -> Result<Vec<GrayImage>> {
    let mut off = 0usize;
    let magic = read_be_u32(bytes, &mut off, "magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Parse {
            offset: 0,
            message: format!("bad IDX magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}"),
        });
    }
    let count = read_be_u32(bytes, &mut off, "image count")? as usize;
    let rows = read_be_u32(bytes, &mut off, "row count")? as usize;
    let cols = read_be_u32(bytes, &mut off, "column count")? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::Parse {
            offset: 8,
            message: format!("IDX dimensions {rows}x{cols} must be positive"),
        });
    }
    let mut images = Vec::with_capacity(count);
    for _ in 0..count {
        let pixels = take(bytes, &mut off, rows * cols, "pixel data")?;
        images.push(GrayImage::from_pixels(cols, rows, pixels.to_vec())?);
    }
    if off != bytes.len() {
        return Err(Error::Parse {
            offset: off as u64,
            message: format!("{} trailing bytes after last image", bytes.len() - off),
        });
    }
    Ok(images)
}

pub fn load_idx(path: impl AsRef<Path>) -> Result<Vec<GrayImage>> {
    parse_idx(&std::fs::read(path)?)
}

/// Nearest-neighbor resample: output pixel (r, c) copies source pixel
/// (floor(r*H/target_h), floor(c*W/target_w)).
pub fn downscale_nn(img: &GrayImage, target_w: usize, target_h: usize) -> Result<GrayImage> {
    if target_w == 0 || target_h == 0 {
        return Err(Error::invalid("target dimensions must be positive"));
    }
    let mut pixels = Vec::with_capacity(target_w * target_h);
    for r in 0..target_h {
        let src_r = r * img.height() / target_h;
        for c in 0..target_w {
            let src_c = c * img.width() / target_w;
            pixels.push(img.get(src_r, src_c));
        }
    }
    GrayImage::from_pixels(target_w, target_h, pixels)
}

/// Pixels at or above `threshold` become 1.
pub fn binarize(img: &GrayImage, threshold: u8) -> BinaryImage {
    let bits = img.pixels().iter().map(|&p| u8::from(p >= threshold)).collect();
    BinaryImage::from_pixels(
        img.width(),
        img.height(),
        BitVector::new(bits).expect("u8::from yields 0 or 1"),
    )
    .expect("pixel count matches dimensions")
}

fn pack_bits(bits: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        out[i / 8] |= b << (7 - i % 8);
    }
    out
}

fn unpack_bits(bytes: &[u8], n: usize) -> Vec<u8> {
    (0..n).map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1).collect()
}

/// Encode as binary PBM (P4). Bit 1 is black.
pub fn to_pbm_bytes(img: &BinaryImage) -> Vec<u8> {
    let mut out = format!("P4\n{} {}\n", img.width(), img.height()).into_bytes();
    for r in 0..img.height() {
        let row: Vec<u8> = (0..img.width()).map(|c| img.get(r, c)).collect();
        out.extend_from_slice(&pack_bits(&row));
    }
    out
}

/// Decode binary PBM (P4), accepting `#` comments and arbitrary whitespace
/// in the header.
pub fn from_pbm_bytes(bytes: &[u8]) -> Result<BinaryImage> {
    let mut off = 0usize;
    let magic = pbm_token(bytes, &mut off)?;
    if magic != b"P4" {
        return Err(Error::Parse {
            offset: 0,
            message: format!(
                "bad PBM magic {:?}, expected \"P4\"",
                String::from_utf8_lossy(&magic)
            ),
        });
    }
    let width = pbm_dimension(bytes, &mut off, "width")?;
    let height = pbm_dimension(bytes, &mut off, "height")?;
    // exactly one whitespace byte separates the header from raster data
    off += 1;
    let stride = width.div_ceil(8);
    let mut pixels = Vec::with_capacity(width * height);
    for _ in 0..height {
        let row = take(bytes, &mut off, stride, "raster row")?;
        pixels.extend(unpack_bits(row, width));
    }
    BinaryImage::from_pixels(width, height, BitVector::new(pixels)?)
}

fn pbm_dimension(bytes: &[u8], off: &mut usize, what: &str) -> Result<usize> {
    let start = *off;
    let tok = pbm_token(bytes, off)?;
    let text = std::str::from_utf8(&tok).ok();
    match text.and_then(|t| t.parse::<usize>().ok()) {
        Some(v) if v > 0 => Ok(v),
        _ => Err(Error::Parse {
            offset: start as u64,
            message: format!(
                "invalid PBM {what} {:?}",
                String::from_utf8_lossy(&tok)
            ),
        }),
    }
}

/// Next header token, skipping whitespace and `#` comments. Leaves `off` at
/// the byte after the token.
fn pbm_token(bytes: &[u8], off: &mut usize) -> Result<Vec<u8>> {
    loop {
        while *off < bytes.len() && bytes[*off].is_ascii_whitespace() {
            *off += 1;
        }
        if *off < bytes.len() && bytes[*off] == b'#' {
            while *off < bytes.len() && bytes[*off] != b'\n' {
                *off += 1;
            }
            continue;
        }
        break;
    }
    let start = *off;
    while *off < bytes.len() && !bytes[*off].is_ascii_whitespace() {
        *off += 1;
    }
    if start == *off {
        return Err(Error::Parse {
            offset: start as u64,
            message: "unexpected end of PBM header".into(),
        });
    }
    Ok(bytes[start..*off].to_vec())
}

pub fn write_pbm(img: &BinaryImage, path: impl AsRef<Path>) -> Result<()> {
    Ok(std::fs::write(path, to_pbm_bytes(img))?)
}

pub fn read_pbm(path: impl AsRef<Path>) -> Result<BinaryImage> {
    from_pbm_bytes(&std::fs::read(path)?)
}

fn take<'a>(bytes: &'a [u8], off: &mut usize, n: usize, what: &str) -> Result<&'a [u8]> {
    if bytes.len() < *off + n {
        return Err(Error::Parse {
            offset: bytes.len() as u64,
            message: format!(
                "unexpected end of file reading {what}: need {n} bytes at offset {}, have {}",
                *off,
                bytes.len() - *off
            ),
        });
    }
    let slice = &bytes[*off..*off + n];
    *off += n;
    Ok(slice)
}

fn read_be_u32(bytes: &[u8], off: &mut usize, what: &str) -> Result<u32> {
    Ok(u32::from_be_bytes(
        take(bytes, off, 4, what)?.try_into().unwrap(),
    ))
}

fn read_le_u32(bytes: &[u8], off: &mut usize, what: &str) -> Result<u32> {
    Ok(u32::from_le_bytes(
        take(bytes, off, 4, what)?.try_into().unwrap(),
    ))
}
