//! Binary state carriers shared by every stage of the pipeline.
//!
//! A [`BitVector`] is an ordered sequence over {0, 1}; a [`BinaryImage`] wraps
//! one in row-major order with explicit width and height. Both are immutable
//! after construction.

use crate::error::{Error, Result};
use ndarray::Array1;

/// Ordered sequence of bits, each stored as a `u8` that is exactly 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitVector {
    bits: Vec<u8>,
}

impl BitVector {
    /// Validates that every entry is 0 or 1.
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::invalid(format!(
                "bit {} at index {} is not 0 or 1",
                bits[pos], pos
            )));
        }
        Ok(BitVector { bits })
    }

    pub fn zeros(n: usize) -> Self {
        BitVector { bits: vec![0; n] }
    }

    pub fn ones(n: usize) -> Self {
        BitVector { bits: vec![1; n] }
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize) -> u8) -> Result<Self> {
        BitVector::new((0..n).map(f).collect())
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> u8 {
        self.bits[i]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.bits
    }

    pub fn iter(&self) -> std::slice::Iter<'_, u8> {
        self.bits.iter()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    /// Copy of the sub-vector `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start > end || end > self.len() {
            return Err(Error::invalid(format!(
                "slice [{start}, {end}) out of bounds for length {}",
                self.len()
            )));
        }
        Ok(BitVector {
            bits: self.bits[start..end].to_vec(),
        })
    }

    pub fn concat(&self, other: &BitVector) -> Self {
        let mut bits = self.bits.clone();
        bits.extend_from_slice(&other.bits);
        BitVector { bits }
    }

    /// Bits as 0.0/1.0 floats, the form linear algebra works on.
    pub fn to_f64(&self) -> Array1<f64> {
        Array1::from_iter(self.bits.iter().map(|&b| b as f64))
    }

    pub(crate) fn from_raw_unchecked(bits: Vec<u8>) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        BitVector { bits }
    }
}

impl std::fmt::Display for BitVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.bits {
            write!(f, "{}", b)?;
        }
        Ok(())
    }
}

/// Number of positions at which `a` and `b` differ.
pub fn hamming(a: &BitVector, b: &BitVector) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.iter().zip(b.iter()).filter(|(x, y)| x != y).count())
}

/// Normalized agreement in [-1, 1]: the mean of (2a_i - 1)(2b_i - 1).
///
/// Equals `1 - 2 * hamming(a, b) / n`; 1 for identical vectors, -1 for
/// complementary ones. Errors on empty input.
pub fn overlap(a: &BitVector, b: &BitVector) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::EmptyData("overlap of empty vectors"));
    }
    let d = hamming(a, b)?;
    Ok(1.0 - 2.0 * d as f64 / a.len() as f64)
}

/// Row-major binary image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    pixels: BitVector,
}

impl BinaryImage {
    /// `pixels` must hold exactly `width * height` bits, row-major.
    pub fn from_pixels(width: usize, height: usize, pixels: BitVector) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if pixels.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                got: pixels.len(),
            });
        }
        Ok(BinaryImage {
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

    pub fn pixels(&self) -> &BitVector {
        &self.pixels
    }

    /// Pixel at row `r`, column `c`.
    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.pixels.get(r * self.width + c)
    }

    /// Pixel with indices clamped to the image border (edge replication).
    pub fn get_clamped(&self, r: isize, c: isize) -> u8 {
        let r = r.clamp(0, self.height as isize - 1) as usize;
        let c = c.clamp(0, self.width as isize - 1) as usize;
        self.get(r, c)
    }

    /// Rebuild an image of the same shape from a flat bit vector.
    pub fn with_pixels(&self, pixels: BitVector) -> Result<Self> {
        BinaryImage::from_pixels(self.width, self.height, pixels)
    }
}
