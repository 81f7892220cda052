//! Moravec and Harris corner detectors with non-maximum suppression.

use crate::error::{arg_err, Result};
use crate::filter::{convolve, gaussian_kernel, gradient, BorderMode};
use crate::image::{Image, RealImage};

/// Per-pixel corner strength.
pub type ResponseMap = RealImage;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corner {
    pub x: usize,
    pub y: usize,
    pub score: f64,
}

/// Gaussian-smoothed gradient outer products.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureTensor {
    pub ixx: RealImage,
    pub ixy: RealImage,
    pub iyy: RealImage,
}

impl StructureTensor {
    pub fn compute(img: &RealImage, sigma: f64) -> Result<Self> {
        let g = gaussian_kernel(sigma)?;
        let (gx, gy) = gradient(img)?;
        let smooth = |p: RealImage| convolve(&p, &g, BorderMode::ClampToEdge);
        Ok(StructureTensor {
            ixx: smooth(gx.map(|v| v * v)),
            ixy: smooth(gx.zip_with(&gy, |a, b| a * b)?),
            iyy: smooth(gy.map(|v| v * v)),
        })
    }

    /// `det - k * trace^2` at every pixel.
    pub fn harris_response(&self, k: f64) -> ResponseMap {
        RealImage::from_fn(self.ixx.width(), self.ixx.height(), |x, y| {
            let (a, b, c) = (self.ixx.get(x, y), self.ixy.get(x, y), self.iyy.get(x, y));
            let tr = a + c;
            a * c - b * b - k * tr * tr
        })
    }
}

const FOUR_OFFSETS: [(isize, isize); 4] = [(1, 0), (0, 1), (1, 1), (-1, 1)];
const EIGHT_OFFSETS: [(isize, isize); 8] = [(1, 0), (0, 1), (1, 1), (-1, 1), (-1, 0), (0, -1), (-1, -1), (1, -1)];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoravecParams {
    /// Odd side of the rectangular summation window.
    pub window: usize,
    /// Corners must exceed this fraction of the strongest response.
    pub threshold_frac: f64,
    pub eight_offsets: bool,
    pub nms_radius: usize,
}

impl Default for MoravecParams {
    fn default() -> Self {
        MoravecParams { window: 3, threshold_frac: 0.01, eight_offsets: false, nms_radius: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarrisParams {
    pub sigma: f64,
    pub k: f64,
    pub threshold_frac: f64,
    pub nms_radius: usize,
}

impl Default for HarrisParams {
    fn default() -> Self {
        HarrisParams { sigma: 1.0, k: 0.05, threshold_frac: 0.01, nms_radius: 3 }
    }
}

/// Moravec response `F = min over offsets of E(u, v)`, where `E` sums squared
/// differences between the window and its shifted copy. Pixels whose shifted
/// window would leave the image get 0.
pub fn moravec_response(img: &RealImage, window: usize, eight_offsets: bool) -> Result<ResponseMap> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(arg_err(format!("window must be odd and at least 3, got {window}")));
    }
    if window > img.width() || window > img.height() {
        return Err(arg_err(format!(
            "window {window} larger than {}x{} image",
            img.width(),
            img.height()
        )));
    }
    let offsets: &[(isize, isize)] = if eight_offsets { &EIGHT_OFFSETS } else { &FOUR_OFFSETS };
    let r = (window / 2) as isize;
    let (w, h) = (img.width() as isize, img.height() as isize);
    // one extra pixel of margin for the unit offsets
    let margin = r + 1;
    Ok(RealImage::from_fn(img.width(), img.height(), |m, n| {
        let (m, n) = (m as isize, n as isize);
        if m < margin || n < margin || m >= w - margin || n >= h - margin {
            return 0.0;
        }
        offsets
            .iter()
            .map(|&(u, v)| {
                let mut e = 0.0;
                for y in n - r..=n + r {
                    for x in m - r..=m + r {
                        let d = img.get((x + u) as usize, (y + v) as usize) - img.get(x as usize, y as usize);
                        e += d * d;
                    }
                }
                e
            })
            .fold(f64::INFINITY, f64::min)
    }))
}

pub fn moravec(img: &Image, params: &MoravecParams) -> Result<Vec<Corner>> {
    let f = moravec_response(&img.to_real(), params.window, params.eight_offsets)?;
    let floor = params.threshold_frac * f.max();
    local_maxima(&f, params.nms_radius, floor)
}

pub fn harris(img: &Image, params: &HarrisParams) -> Result<Vec<Corner>> {
    if params.sigma.is_nan() || params.sigma <= 0.0 {
        return Err(arg_err(format!("sigma must be positive, got {}", params.sigma)));
    }
    let q = StructureTensor::compute(&img.to_real(), params.sigma)?.harris_response(params.k);
    let floor = params.threshold_frac * q.max();
    local_maxima(&q, params.nms_radius, floor)
}

/// Strictly positive local maxima within a Chebyshev `radius`, at least `min_value`.
///
/// Among equal values inside a neighborhood only the one with the smallest
/// `(y, x)` survives, so a plateau yields a single corner.
pub fn local_maxima(map: &ResponseMap, radius: usize, min_value: f64) -> Result<Vec<Corner>> {
    if radius == 0 {
        return Err(arg_err("suppression radius must be at least 1"));
    }
    let (w, h) = (map.width(), map.height());
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let v = map.get(x, y);
            if !(v > 0.0 && v >= min_value) {
                continue;
            }
            let beaten = (y.saturating_sub(radius)..=(y + radius).min(h - 1)).any(|ny| {
                (x.saturating_sub(radius)..=(x + radius).min(w - 1)).any(|nx| {
                    let nv = map.get(nx, ny);
                    nv > v || (nv == v && (ny, nx) < (y, x))
                })
            });
            if !beaten {
                out.push(Corner { x, y, score: v });
            }
        }
    }
    Ok(out)
}

/// Draws a 3x3 cross at every corner, white on a copy of the gray image.
pub fn annotate(img: &Image, corners: &[Corner]) -> Image {
    let mut out = img.to_gray();
    let (w, h) = (out.width() as isize, out.height() as isize);
    for c in corners {
        for (dx, dy) in [(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)] {
            let (x, y) = (c.x as isize + dx, c.y as isize + dy);
            if x >= 0 && y >= 0 && x < w && y < h {
                out.set(x as usize, y as usize, 0, 255);
            }
        }
    }
    out
}

/// `x,y,score` header plus one row per corner.
pub fn corners_csv(corners: &[Corner]) -> String {
    let mut s = String::from("x,y,score\n");
    for c in corners {
        s.push_str(&format!("{},{},{}\n", c.x, c.y, c.score));
    }
    s
}
