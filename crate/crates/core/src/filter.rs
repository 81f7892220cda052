//! Linear convolution with small masks, standard kernels and gradient-based
//! edge detection.

use crate::error::{arg_err, Error, Result};
use crate::image::{Image, RealImage};

/// An odd-sided mask `w(s, t)` with `s` in `-a..=a` (columns) and `t` in
/// `-b..=b` (rows).
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    width: usize,
    height: usize,
    coeffs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BorderMode {
    /// Samples outside the image read as 0.
    ZeroPad,
    /// Samples outside the image read the nearest edge pixel.
    #[default]
    ClampToEdge,
}

impl Kernel {
    pub fn new(width: usize, height: usize, coeffs: Vec<f64>) -> Result<Self> {
        if width.is_multiple_of(2) || height.is_multiple_of(2) {
            return Err(arg_err(format!("kernel sides must be odd, got {width}x{height}")));
        }
        if coeffs.len() != width * height {
            return Err(Error::Shape(format!("{width}x{height} kernel needs {} coefficients", width * height)));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(arg_err("kernel coefficients must be finite"));
        }
        Ok(Kernel { width, height, coeffs })
    }

    /// Parses `"W H"` followed by `W*H` whitespace-separated reals.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let mut dim = |name: &str| -> Result<usize> {
            tokens
                .next()
                .ok_or_else(|| arg_err(format!("kernel file missing {name}")))?
                .parse()
                .map_err(|_| arg_err(format!("kernel file has malformed {name}")))
        };
        let (w, h) = (dim("width")?, dim("height")?);
        let coeffs = tokens
            .map(|t| t.parse::<f64>().map_err(|_| arg_err(format!("malformed coefficient {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Kernel::new(w, h, coeffs)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Horizontal half extent `a`.
    pub fn half_width(&self) -> isize {
        (self.width / 2) as isize
    }

    /// Vertical half extent `b`.
    pub fn half_height(&self) -> isize {
        (self.height / 2) as isize
    }

    /// `w(s, t)`.
    pub fn at(&self, s: isize, t: isize) -> f64 {
        let col = (s + self.half_width()) as usize;
        let row = (t + self.half_height()) as usize;
        self.coeffs[row * self.width + col]
    }

    /// The mask rotated by 180 degrees, turning convolution into correlation and back.
    pub fn flipped(&self) -> Kernel {
        let mut coeffs = self.coeffs.clone();
        coeffs.reverse();
        Kernel { coeffs, ..*self }
    }

    pub fn sum(&self) -> f64 {
        self.coeffs.iter().sum()
    }
}

/// Horizontal Sobel derivative mask, for use with [`convolve`].
pub const SOBEL_X: [f64; 9] = [1.0, 0.0, -1.0, 2.0, 0.0, -2.0, 1.0, 0.0, -1.0];
/// Vertical Sobel derivative mask.
pub const SOBEL_Y: [f64; 9] = [1.0, 2.0, 1.0, 0.0, 0.0, 0.0, -1.0, -2.0, -1.0];

/// `n x n` averaging mask.
pub fn mean_kernel(n: usize) -> Result<Kernel> {
    if n.is_multiple_of(2) {
        return Err(arg_err(format!("mean kernel size must be odd, got {n}")));
    }
    let v = 1.0 / (n * n) as f64;
    Kernel::new(n, n, vec![v; n * n])
}

/// Sampled isotropic Gaussian of side `2 * ceil(3 sigma) + 1`, normalized to sum 1.
pub fn gaussian_kernel(sigma: f64) -> Result<Kernel> {
    if sigma.is_nan() || sigma <= 0.0 || !sigma.is_finite() {
        return Err(arg_err(format!("sigma must be positive, got {sigma}")));
    }
    let r = (3.0 * sigma).ceil() as isize;
    let side = (2 * r + 1) as usize;
    let mut coeffs = Vec::with_capacity(side * side);
    for t in -r..=r {
        for s in -r..=r {
            coeffs.push((-((s * s + t * t) as f64) / (2.0 * sigma * sigma)).exp());
        }
    }
    let total: f64 = coeffs.iter().sum();
    coeffs.iter_mut().for_each(|c| *c /= total);
    Kernel::new(side, side, coeffs)
}

#[inline]
fn fetch(img: &RealImage, x: isize, y: isize, border: BorderMode) -> f64 {
    let (w, h) = (img.width() as isize, img.height() as isize);
    if x >= 0 && y >= 0 && x < w && y < h {
        return img.get(x as usize, y as usize);
    }
    match border {
        BorderMode::ZeroPad => 0.0,
        BorderMode::ClampToEdge => img.get(x.clamp(0, w - 1) as usize, y.clamp(0, h - 1) as usize),
    }
}

/// Full-size linear convolution `sum_s sum_t w(s, t) f(x - s, y - t)`.
pub fn convolve(img: &RealImage, k: &Kernel, border: BorderMode) -> RealImage {
    let (a, b) = (k.half_width(), k.half_height());
    RealImage::from_fn(img.width(), img.height(), |x, y| {
        let (x, y) = (x as isize, y as isize);
        let mut acc = 0.0;
        for t in -b..=b {
            for s in -a..=a {
                acc += k.at(s, t) * fetch(img, x - s, y - t, border);
            }
        }
        acc
    })
}

/// Central differences `((f(x+1) - f(x-1)) / 2)` along each axis, edges clamped.
pub fn gradient(img: &RealImage) -> Result<(RealImage, RealImage)> {
    if img.width() < 3 || img.height() < 3 {
        return Err(arg_err(format!("gradient needs at least 3x3, got {}x{}", img.width(), img.height())));
    }
    let c = BorderMode::ClampToEdge;
    let gx = RealImage::from_fn(img.width(), img.height(), |x, y| {
        let (x, y) = (x as isize, y as isize);
        (fetch(img, x + 1, y, c) - fetch(img, x - 1, y, c)) / 2.0
    });
    let gy = RealImage::from_fn(img.width(), img.height(), |x, y| {
        let (x, y) = (x as isize, y as isize);
        (fetch(img, x, y + 1, c) - fetch(img, x, y - 1, c)) / 2.0
    });
    Ok((gx, gy))
}

/// Gradient magnitude normalized by its maximum, then binarized at `threshold`.
///
/// RGB input is reduced to luma first. A flat image has no edges.
pub fn edge_magnitude(img: &Image, threshold: f64) -> Result<Image> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(arg_err(format!("threshold must lie in [0, 1], got {threshold}")));
    }
    let (gx, gy) = gradient(&img.to_real())?;
    let mag = gx.zip_with(&gy, f64::hypot)?;
    let peak = mag.max();
    Ok(mag
        .map(|m| if peak > 0.0 && m / peak >= threshold { 255.0 } else { 0.0 })
        .to_image())
}
