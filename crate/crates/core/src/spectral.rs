//! Two-dimensional discrete Fourier transform with the symmetric unitary
//! kernel `exp(-+2 pi i (u x / M + v y / N)) / sqrt(M N)` in both directions,
//! a radix-2 fast path, and ideal low-pass filtering.
//!
//! `x` and `u` run along the width `M`, `y` and `v` along the height `N`.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{arg_err, Error, Result};
use crate::image::{quantize, Image, RealImage};

/// Largest imaginary part tolerated when an inverse transform is read back as real.
pub const MAX_IMAGINARY_RESIDUE: f64 = 1e-6;

/// Complex coefficients `T(u, v)`, row-major with `v` selecting the row.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralPlane {
    width: usize,
    height: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralPlane {
    pub fn new(width: usize, height: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if width == 0 || height == 0 || coeffs.len() != width * height {
            return Err(Error::Shape(format!("{width}x{height} spectrum needs {} coefficients", width * height)));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(arg_err("spectrum contains non-finite coefficients"));
        }
        Ok(SpectralPlane { width, height, coeffs })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        SpectralPlane { width, height, coeffs: vec![Complex64::new(0.0, 0.0); width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn get(&self, u: usize, v: usize) -> Complex64 {
        self.coeffs[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, c: Complex64) {
        self.coeffs[v * self.width + u] = c;
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(Complex64::norm_sqr).sum()
    }

    /// `u,v,re,im` header plus one row per coefficient.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("u,v,re,im\n");
        for v in 0..self.height {
            for u in 0..self.width {
                let c = self.get(u, v);
                s.push_str(&format!("{u},{v},{},{}\n", c.re, c.im));
            }
        }
        s
    }
}

/// `exp(sign * 2 pi i k / n)` for `k` in `0..n`.
fn twiddles(n: usize, sign: f64) -> Vec<Complex64> {
    (0..n).map(|k| Complex64::from_polar(1.0, sign * 2.0 * PI * k as f64 / n as f64)).collect()
}

/// Naive 1-D DFT of `line` (no scaling), indices reduced mod n so the
/// exponent table stays exact.
fn dft_line(line: &[Complex64], table: &[Complex64]) -> Vec<Complex64> {
    let n = line.len();
    (0..n)
        .map(|k| line.iter().enumerate().map(|(j, &f)| f * table[(k * j) % n]).sum())
        .collect()
}

/// Runs `line_op` over every row, then every column, and applies the
/// `1 / sqrt(MN)` scale. `line_op` receives the twiddle table for the axis length.
fn transform(
    mut data: Vec<Complex64>,
    width: usize,
    height: usize,
    sign: f64,
    line_op: impl Fn(&mut [Complex64], &[Complex64]),
) -> Vec<Complex64> {
    let (tw, th) = (twiddles(width, sign), twiddles(height, sign));
    for row in data.chunks_exact_mut(width) {
        line_op(row, &tw);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); height];
    for x in 0..width {
        for (y, c) in col.iter_mut().enumerate() {
            *c = data[y * width + x];
        }
        line_op(&mut col, &th);
        for (y, &c) in col.iter().enumerate() {
            data[y * width + x] = c;
        }
    }
    let scale = 1.0 / ((width * height) as f64).sqrt();
    data.iter_mut().for_each(|c| *c *= scale);
    data
}

fn complexify(img: &RealImage) -> Vec<Complex64> {
    img.data().iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

fn dft_in_place(line: &mut [Complex64], table: &[Complex64]) {
    let out = dft_line(line, table);
    line.copy_from_slice(&out);
}

fn to_real(width: usize, height: usize, data: Vec<Complex64>) -> Result<RealImage> {
    let max_imag = data.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    if max_imag >= MAX_IMAGINARY_RESIDUE {
        return Err(Error::ImaginaryResidue { max_imag });
    }
    RealImage::new(width, height, data.into_iter().map(|c| c.re).collect())
}

/// Forward transform by direct summation along each axis.
pub fn dft2(img: &RealImage) -> SpectralPlane {
    let (w, h) = (img.width(), img.height());
    SpectralPlane { width: w, height: h, coeffs: transform(complexify(img), w, h, -1.0, dft_in_place) }
}

/// Inverse of [`dft2`]. Fails if the result is not real to within
/// [`MAX_IMAGINARY_RESIDUE`].
pub fn idft2(sp: &SpectralPlane) -> Result<RealImage> {
    let data = transform(sp.coeffs.clone(), sp.width, sp.height, 1.0, dft_in_place);
    to_real(sp.width, sp.height, data)
}

/// In-place iterative radix-2 Cooley-Tukey, unscaled. `line.len()` must be a power of two.
fn fft_line(line: &mut [Complex64], table: &[Complex64]) {
    let n = line.len();
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if i < j {
            line.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..len / 2 {
                let w = table[k * stride];
                let a = line[start + k];
                let b = line[start + k + len / 2] * w;
                line[start + k] = a + b;
                line[start + k + len / 2] = a - b;
            }
        }
        len <<= 1;
    }
}

fn check_pow2(width: usize, height: usize) -> Result<()> {
    if !width.is_power_of_two() || !height.is_power_of_two() {
        return Err(arg_err(format!("fft needs power-of-two dimensions, got {width}x{height}")));
    }
    Ok(())
}

/// Same values as [`dft2`] in `O(MN log MN)`; dimensions must be powers of two.
pub fn fft2(img: &RealImage) -> Result<SpectralPlane> {
    let (w, h) = (img.width(), img.height());
    check_pow2(w, h)?;
    Ok(SpectralPlane { width: w, height: h, coeffs: transform(complexify(img), w, h, -1.0, fft_line) })
}

pub fn ifft2(sp: &SpectralPlane) -> Result<RealImage> {
    check_pow2(sp.width, sp.height)?;
    let data = transform(sp.coeffs.clone(), sp.width, sp.height, 1.0, fft_line);
    to_real(sp.width, sp.height, data)
}

/// Signed frequency: indices above `n / 2` wrap to negative.
fn centered(k: usize, n: usize) -> f64 {
    if k > n / 2 {
        k as f64 - n as f64
    } else {
        k as f64
    }
}

/// Distance from DC to the farthest coefficient, `hypot(M / 2, N / 2)` in
/// whole frequency steps.
pub fn max_centered_distance(width: usize, height: usize) -> f64 {
    ((width / 2) as f64).hypot((height / 2) as f64)
}

/// Ideal disc low-pass: zeroes coefficients whose centered distance from DC
/// exceeds `radius_frac` times the largest centered distance, so a fraction
/// of 1 passes everything.
pub fn lowpass(sp: &SpectralPlane, radius_frac: f64) -> Result<SpectralPlane> {
    if !(radius_frac > 0.0 && radius_frac <= 1.0) {
        return Err(arg_err(format!("radius fraction must lie in (0, 1], got {radius_frac}")));
    }
    let radius = radius_frac * max_centered_distance(sp.width, sp.height);
    let mut out = sp.clone();
    for v in 0..sp.height {
        for u in 0..sp.width {
            let d = centered(u, sp.width).hypot(centered(v, sp.height));
            if d > radius {
                out.set(u, v, Complex64::new(0.0, 0.0));
            }
        }
    }
    Ok(out)
}

/// Log-magnitude display `log(1 + |T|)` with DC moved to the center and
/// the range stretched to `[0, 255]`.
pub fn spectrum_image(sp: &SpectralPlane) -> Image {
    let (m, n) = (sp.width, sp.height);
    let g: Vec<f64> = sp.coeffs.iter().map(|c| c.norm().ln_1p()).collect();
    let peak = g.iter().copied().fold(0.0, f64::max);
    let shifted = RealImage::from_fn(m, n, |x, y| {
        let u = (x + m - m / 2) % m;
        let v = (y + n - n / 2) % n;
        let val = g[v * m + u];
        if peak > 0.0 {
            255.0 * val / peak
        } else {
            0.0
        }
    });
    Image::gray(m, n, shifted.data().iter().map(|&v| quantize(v)).collect()).expect("same shape")
}

/// Low-pass filters a plane of any size: zero-pads to the next power of two,
/// filters in the frequency domain, inverts and crops back.
pub fn lowpass_plane(img: &RealImage, radius_frac: f64) -> Result<RealImage> {
    let (w, h) = (img.width(), img.height());
    let padded = img.crop_or_pad(0, 0, w.next_power_of_two(), h.next_power_of_two());
    let filtered = ifft2(&lowpass(&fft2(&padded)?, radius_frac)?)?;
    Ok(filtered.crop_or_pad(0, 0, w, h))
}

/// Spectrum of a plane of any size, zero-padded to powers of two.
pub fn padded_spectrum(img: &RealImage) -> SpectralPlane {
    let padded = img.crop_or_pad(0, 0, img.width().next_power_of_two(), img.height().next_power_of_two());
    fft2(&padded).expect("padded to powers of two")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_plane(w: usize, h: usize, seed: u64) -> RealImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RealImage::from_fn(w, h, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn constant_has_only_dc() {
        let (m, n, c) = (6usize, 4usize, 2.5);
        let sp = dft2(&RealImage::filled(m, n, c));
        for v in 0..n {
            for u in 0..m {
                let expect = if (u, v) == (0, 0) { c * ((m * n) as f64).sqrt() } else { 0.0 };
                assert!((sp.get(u, v) - Complex64::new(expect, 0.0)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn impulse_is_flat() {
        let mut img = RealImage::zeros(5, 3);
        img.set(0, 0, 1.0);
        let sp = dft2(&img);
        let expect = 1.0 / 15f64.sqrt();
        assert!(sp.coeffs().iter().all(|c| (c.norm() - expect).abs() < 1e-12));
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(idft2(&SpectralPlane::zeros(4, 3)).unwrap(), RealImage::zeros(4, 3));
        let mut sp = SpectralPlane::zeros(4, 2);
        sp.set(0, 0, Complex64::new(8f64.sqrt(), 0.0));
        let img = idft2(&sp).unwrap();
        assert!(img.data().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn complex_only_spectrum_is_rejected() {
        let mut sp = SpectralPlane::zeros(2, 2);
        sp.set(0, 0, Complex64::new(0.0, 1.0));
        assert!(matches!(idft2(&sp), Err(Error::ImaginaryResidue { .. })));
        assert!(matches!(ifft2(&sp), Err(Error::ImaginaryResidue { .. })));
    }

    #[test]
    fn fft_rejects_odd_sizes() {
        assert!(fft2(&RealImage::zeros(6, 4)).is_err());
        assert!(ifft2(&SpectralPlane::zeros(4, 3)).is_err());
    }

    #[test]
    fn fft_trivial_and_equivalent() {
        let one = fft2(&RealImage::filled(1, 1, 3.25)).unwrap();
        assert_eq!(one.coeffs(), &[Complex64::new(3.25, 0.0)]);
        for (w, h) in [(2, 2), (4, 8), (16, 2), (32, 32)] {
            let img = random_plane(w, h, (w * 100 + h) as u64);
            let a = fft2(&img).unwrap();
            let b = dft2(&img);
            let err = a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            assert!(err < 1e-9, "{w}x{h}: {err}");
        }
    }

    #[test]
    fn round_trip_and_conjugate_symmetry() {
        let img = random_plane(16, 8, 3);
        let sp = fft2(&img).unwrap();
        let back = ifft2(&sp).unwrap();
        assert!(back.data().iter().zip(img.data()).all(|(a, b)| (a - b).abs() < 1e-9));
        let (m, n) = (16, 8);
        for v in 0..n {
            for u in 0..m {
                let mirror = sp.get((m - u) % m, (n - v) % n).conj();
                assert!((sp.get(u, v) - mirror).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn lowpass_examples() {
        let img = random_plane(8, 8, 11);
        let sp = fft2(&img).unwrap();
        assert_eq!(lowpass(&sp, 1.0).unwrap(), sp);
        assert!(lowpass(&sp, 0.0).is_err());
        assert!(lowpass(&sp, 1.5).is_err());

        let flat = RealImage::filled(8, 8, 4.0);
        let out = ifft2(&lowpass(&fft2(&flat).unwrap(), 0.05).unwrap()).unwrap();
        assert!(out.data().iter().all(|v| (v - 4.0).abs() < 1e-9));
    }

    #[test]
    fn lowpass_blurs_step_without_adding_energy() {
        let step = RealImage::from_fn(32, 32, |x, _| if x < 16 { 0.0 } else { 255.0 });
        let sp = fft2(&step).unwrap();
        let filtered = lowpass(&sp, 0.1).unwrap();
        assert!(filtered.energy() <= sp.energy());
        let out = ifft2(&filtered).unwrap();
        // Parseval: spatial energy equals spectral energy
        assert!((out.energy() - filtered.energy()).abs() <= 1e-8 * filtered.energy());
        assert!(out.energy() <= step.energy() * (1.0 + 1e-12));
        // the step is smeared: intermediate values appear, and ringing overshoots the range
        assert!(out.data().iter().any(|&v| v > 20.0 && v < 235.0));
        assert!(out.data().iter().any(|&v| !(-1e-6..=255.0 + 1e-6).contains(&v)));
    }

    #[test]
    fn lowpass_plane_handles_odd_sizes() {
        let img = RealImage::filled(5, 3, 10.0);
        let out = lowpass_plane(&img, 1.0).unwrap();
        assert_eq!((out.width(), out.height()), (5, 3));
        assert!(out.data().iter().all(|v| (v - 10.0).abs() < 1e-9));
    }

    #[test]
    fn spectrum_display() {
        let img = spectrum_image(&fft2(&RealImage::filled(8, 4, 9.0)).unwrap());
        assert_eq!((img.width(), img.height()), (8, 4));
        for y in 0..4 {
            for x in 0..8 {
                let expect = if (x, y) == (4, 2) { 255 } else { 0 };
                assert_eq!(img.get(x, y, 0), expect);
            }
        }
    }

    #[test]
    fn sinusoid_gives_two_dots_on_horizontal_axis() {
        let (m, n, k) = (16usize, 16usize, 3usize);
        let img = RealImage::from_fn(m, n, |x, _| (2.0 * PI * (k * x) as f64 / m as f64).cos());
        let sp = fft2(&img).unwrap();
        let disp = spectrum_image(&sp);
        let bright: Vec<(usize, usize)> = (0..n)
            .flat_map(|y| (0..m).map(move |x| (x, y)))
            .filter(|&(x, y)| disp.get(x, y, 0) == 255)
            .collect();
        assert_eq!(bright, vec![(m / 2 - k, n / 2), (m / 2 + k, n / 2)]);
    }

    #[test]
    fn csv_layout() {
        let csv = dft2(&RealImage::filled(2, 1, 1.0)).to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "u,v,re,im");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,0,"));
    }
}
