//! Raster images, intensity point operations and the two matrix-product
//! notions for images viewed as matrices.
//!
//! [`Image`] holds 8-bit samples exactly as they come from disk. Every
//! computation that needs real arithmetic goes through [`RealImage`], a single
//! plane of `f64`. Converting back always uses [`quantize`]: round half away
//! from zero, then clamp to `[0, 255]`.

mod histogram;
mod pnm;

pub use histogram::{equalize, histogram, Histogram};
pub use pnm::{load_pnm, save_pnm};

use crate::error::{arg_err, shape_err, Result};

/// An 8-bit raster, row-major, channels interleaved.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(arg_err(format!("image dimensions must be positive, got {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(arg_err(format!("channels must be 1 or 3, got {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(shape_err(format!(
                "{}x{}x{} image needs {} samples, got {}",
                width,
                height,
                channels,
                width * height * channels,
                data.len()
            )));
        }
        Ok(Image { width, height, channels, data })
    }

    /// Single-channel image from row-major samples.
    pub fn gray(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, 1, data)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds a gray image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::gray(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn is_gray(&self) -> bool {
        self.channels == 1
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    /// Sample at column `x`, row `y`, channel `c`. Panics when out of range.
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        assert!(x < self.width && y < self.height && c < self.channels);
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn set(&mut self, x: usize, y: usize, c: usize, v: u8) {
        assert!(x < self.width && y < self.height && c < self.channels);
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Luma conversion `0.299 R + 0.587 G + 0.114 B`. Gray images are returned as-is.
    pub fn to_gray(&self) -> Image {
        if self.is_gray() {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| quantize(0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64))
            .collect();
        Image { width: self.width, height: self.height, channels: 1, data }
    }

    /// One channel promoted to reals in `[0, 255]`.
    pub fn channel_plane(&self, c: usize) -> Result<RealImage> {
        if c >= self.channels {
            return Err(arg_err(format!("channel {c} out of range for {}-channel image", self.channels)));
        }
        let data = self.data.iter().skip(c).step_by(self.channels).map(|&v| v as f64).collect();
        RealImage::new(self.width, self.height, data)
    }

    /// Gray plane (luma for RGB input) in `[0, 255]`.
    pub fn to_real(&self) -> RealImage {
        let g = self.to_gray();
        RealImage {
            width: g.width,
            height: g.height,
            data: g.data.iter().map(|&v| v as f64).collect(),
        }
    }

    /// Reassembles an image from per-channel planes.
    pub fn from_planes(planes: &[RealImage]) -> Result<Image> {
        let first = planes.first().ok_or_else(|| arg_err("no planes"))?;
        if planes.len() != 1 && planes.len() != 3 {
            return Err(arg_err(format!("expected 1 or 3 planes, got {}", planes.len())));
        }
        if planes.iter().any(|p| p.width != first.width || p.height != first.height) {
            return Err(shape_err("planes differ in size"));
        }
        let n = first.width * first.height;
        let mut data = Vec::with_capacity(n * planes.len());
        for i in 0..n {
            for p in planes {
                data.push(quantize(p.data[i]));
            }
        }
        Image::new(first.width, first.height, planes.len(), data)
    }

    /// Applies `f` to every channel plane independently.
    pub fn map_planes(&self, mut f: impl FnMut(&RealImage) -> Result<RealImage>) -> Result<Image> {
        let planes = (0..self.channels)
            .map(|c| self.channel_plane(c).and_then(|p| f(&p)))
            .collect::<Result<Vec<_>>>()?;
        Image::from_planes(&planes)
    }
}

/// Round half away from zero, then clamp to `[0, 255]`. NaN maps to 0.
pub fn quantize(v: f64) -> u8 {
    let r = v.round();
    if r.is_nan() {
        0
    } else {
        r.clamp(0.0, 255.0) as u8
    }
}

/// A single plane of finite reals, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RealImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RealImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(arg_err(format!("image dimensions must be positive, got {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(shape_err(format!(
                "{width}x{height} plane needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(arg_err(format!("non-finite value at index {i}")));
        }
        Ok(RealImage { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        RealImage { width, height, data: vec![0.0; width * height] }
    }

    pub fn filled(width: usize, height: usize, v: f64) -> Self {
        RealImage { width, height, data: vec![v; width * height] }
    }

    /// Builds a plane from rows; all rows must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(shape_err("ragged rows"));
        }
        Self::new(width, height, rows.concat())
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        RealImage { width, height, data }
    }

    /// `n x n` identity matrix.
    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |x, y| if x == y { 1.0 } else { 0.0 })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Value at column `x`, row `y`.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> RealImage {
        RealImage { width: self.width, height: self.height, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Elementwise combination of two equally sized planes.
    pub fn zip_with(&self, other: &RealImage, f: impl Fn(f64, f64) -> f64) -> Result<RealImage> {
        self.check_same_dims(other)?;
        Ok(RealImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Sum of squares.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Quantizes to a gray [`Image`].
    pub fn to_image(&self) -> Image {
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.data.iter().map(|&v| quantize(v)).collect(),
        }
    }

    /// Copies a `width x height` window starting at `(x0, y0)`, zero-filling
    /// anything that falls outside.
    pub fn crop_or_pad(&self, x0: usize, y0: usize, width: usize, height: usize) -> RealImage {
        RealImage::from_fn(width, height, |x, y| {
            let (sx, sy) = (x + x0, y + y0);
            if sx < self.width && sy < self.height {
                self.get(sx, sy)
            } else {
                0.0
            }
        })
    }

    fn check_same_dims(&self, other: &RealImage) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(shape_err(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }
}

/// Per-pixel linear remap `clamp(round(gain * v + bias))`, applied to every channel.
pub fn point_op(img: &Image, gain: f64, bias: f64) -> Result<Image> {
    if !gain.is_finite() || !bias.is_finite() {
        return Err(arg_err("gain and bias must be finite"));
    }
    let data = img.data.iter().map(|&v| quantize(gain * v as f64 + bias)).collect();
    Image::new(img.width, img.height, img.channels, data)
}

/// Pixel-by-pixel product of two planes of equal size.
pub fn elementwise_product(a: &RealImage, b: &RealImage) -> Result<RealImage> {
    a.zip_with(b, |x, y| x * y)
}

/// Matrix product treating each plane as a `height x width` matrix.
pub fn matrix_product(a: &RealImage, b: &RealImage) -> Result<RealImage> {
    if a.width != b.height {
        return Err(shape_err(format!(
            "inner dimensions differ: left has {} columns, right has {} rows",
            a.width, b.height
        )));
    }
    let (rows, cols, inner) = (a.height, b.width, a.width);
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        for k in 0..inner {
            let aik = a.data[i * inner + k];
            let brow = &b.data[k * cols..(k + 1) * cols];
            for (o, &bkj) in out[i * cols..(i + 1) * cols].iter_mut().zip(brow) {
                *o += aik * bkj;
            }
        }
    }
    Ok(RealImage { width: cols, height: rows, data: out })
}
