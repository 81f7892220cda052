//! Affine coordinate maps and inverse-mapped image warps with nearest or
//! bilinear intensity interpolation.
//!
//! A map sends a source coordinate `(x, y)` to
//! `(t11 x + t12 y + tx, t21 x + t22 y + ty)`. Pixel coordinates follow the
//! raster: `x` grows to the right, `y` grows downward. Warps iterate over
//! output pixels and pull from the inverse map so the result has no holes;
//! anything that lands outside the source is filled with 0.

use crate::error::{arg_err, Error, Result};
use crate::image::{Image, RealImage};

/// Queries within this distance of the image border count as inside.
const DOMAIN_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub t11: f64,
    pub t12: f64,
    pub t21: f64,
    pub t22: f64,
    pub tx: f64,
    pub ty: f64,
}

/// The elementary map families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    /// Standard rotation matrix `[[cos, -sin], [sin, cos]]` about the origin.
    Rotation { degrees: f64 },
    /// Axis scaling; factors below 1 shrink.
    Scale { sx: f64, sy: f64 },
    Reflection(Axis),
    Shear { kx: f64, ky: f64 },
    Translation { dx: f64, dy: f64 },
}

/// Mirror axis for [`Transform::Reflection`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Mirror across the x axis (`y -> -y`).
    X,
    /// Mirror across the y axis (`x -> -x`).
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InterpMode {
    Nearest,
    #[default]
    Bilinear,
}

impl AffineMap {
    pub const IDENTITY: AffineMap = AffineMap { t11: 1.0, t12: 0.0, t21: 0.0, t22: 1.0, tx: 0.0, ty: 0.0 };

    pub fn determinant(&self) -> f64 {
        self.t11 * self.t22 - self.t12 * self.t21
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        apply_coords(self, x, y)
    }

    /// `other` after `self`: the returned map sends `p` to `other(self(p))`.
    pub fn then(&self, other: &AffineMap) -> AffineMap {
        AffineMap {
            t11: other.t11 * self.t11 + other.t12 * self.t21,
            t12: other.t11 * self.t12 + other.t12 * self.t22,
            t21: other.t21 * self.t11 + other.t22 * self.t21,
            t22: other.t21 * self.t12 + other.t22 * self.t22,
            tx: other.t11 * self.tx + other.t12 * self.ty + other.tx,
            ty: other.t21 * self.tx + other.t22 * self.ty + other.ty,
        }
    }

    pub fn inverse(&self) -> Result<AffineMap> {
        let det = self.determinant();
        if det == 0.0 || !det.is_finite() {
            return Err(arg_err("affine map is singular"));
        }
        let (i11, i12, i21, i22) = (self.t22 / det, -self.t12 / det, -self.t21 / det, self.t11 / det);
        Ok(AffineMap {
            t11: i11,
            t12: i12,
            t21: i21,
            t22: i22,
            tx: -(i11 * self.tx + i12 * self.ty),
            ty: -(i21 * self.tx + i22 * self.ty),
        })
    }

    /// Conjugates the map so it acts about `(cx, cy)` instead of the origin.
    pub fn about(&self, cx: f64, cy: f64) -> AffineMap {
        let to_origin = AffineMap { tx: -cx, ty: -cy, ..AffineMap::IDENTITY };
        let back = AffineMap { tx: cx, ty: cy, ..AffineMap::IDENTITY };
        to_origin.then(self).then(&back)
    }

    /// Rotation that turns the picture counterclockwise as displayed
    /// (y axis pointing down), about the center of a `width x height` raster.
    pub fn rotate_about_center(degrees_ccw: f64, width: usize, height: usize) -> AffineMap {
        let r = make_map(Transform::Rotation { degrees: -degrees_ccw }).expect("rotation is always valid");
        r.about((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0)
    }
}

impl Default for AffineMap {
    fn default() -> Self {
        AffineMap::IDENTITY
    }
}

pub fn apply_coords(m: &AffineMap, x: f64, y: f64) -> (f64, f64) {
    (m.t11 * x + m.t12 * y + m.tx, m.t21 * x + m.t22 * y + m.ty)
}

/// cos/sin with exact values at multiples of 90 degrees.
fn snapped_trig(degrees: f64) -> (f64, f64) {
    let snap = |v: f64| if (v - v.round()).abs() < 1e-12 { v.round() } else { v };
    let r = degrees.to_radians();
    (snap(r.cos()), snap(r.sin()))
}

pub fn make_map(kind: Transform) -> Result<AffineMap> {
    let id = AffineMap::IDENTITY;
    Ok(match kind {
        Transform::Rotation { degrees } => {
            let (c, s) = snapped_trig(degrees);
            AffineMap { t11: c, t12: -s, t21: s, t22: c, ..id }
        }
        Transform::Scale { sx, sy } => {
            if sx == 0.0 || sy == 0.0 || !sx.is_finite() || !sy.is_finite() {
                return Err(arg_err(format!("scale factors must be finite and nonzero, got ({sx}, {sy})")));
            }
            AffineMap { t11: sx, t22: sy, ..id }
        }
        Transform::Reflection(Axis::X) => AffineMap { t22: -1.0, ..id },
        Transform::Reflection(Axis::Y) => AffineMap { t11: -1.0, ..id },
        Transform::Shear { kx, ky } => AffineMap { t12: kx, t21: ky, ..id },
        Transform::Translation { dx, dy } => AffineMap { tx: dx, ty: dy, ..id },
    })
}

fn in_domain(img: &RealImage, x: f64, y: f64) -> bool {
    let (w, h) = ((img.width() - 1) as f64, (img.height() - 1) as f64);
    x >= -DOMAIN_SLACK && y >= -DOMAIN_SLACK && x <= w + DOMAIN_SLACK && y <= h + DOMAIN_SLACK
}

/// Intensity at a real-valued position. Nearest rounds half up on both axes;
/// bilinear interpolates along x, then along y.
pub fn interpolate(img: &RealImage, x: f64, y: f64, mode: InterpMode) -> Result<f64> {
    if !in_domain(img, x, y) {
        return Err(Error::OutOfDomain(format!(
            "({x}, {y}) outside [0, {}] x [0, {}]",
            img.width() - 1,
            img.height() - 1
        )));
    }
    Ok(sample(img, x, y, mode))
}

/// Assumes `(x, y)` passed the domain check.
fn sample(img: &RealImage, x: f64, y: f64, mode: InterpMode) -> f64 {
    let (wmax, hmax) = (img.width() - 1, img.height() - 1);
    let x = x.clamp(0.0, wmax as f64);
    let y = y.clamp(0.0, hmax as f64);
    match mode {
        InterpMode::Nearest => {
            let nx = ((x + 0.5).floor() as usize).min(wmax);
            let ny = ((y + 0.5).floor() as usize).min(hmax);
            img.get(nx, ny)
        }
        InterpMode::Bilinear => {
            let x0 = (x.floor() as usize).min(wmax.saturating_sub(1));
            let y0 = (y.floor() as usize).min(hmax.saturating_sub(1));
            let x1 = (x0 + 1).min(wmax);
            let y1 = (y0 + 1).min(hmax);
            let (fx, fy) = (x - x0 as f64, y - y0 as f64);
            let top = img.get(x0, y0) + fx * (img.get(x1, y0) - img.get(x0, y0));
            let bottom = img.get(x0, y1) + fx * (img.get(x1, y1) - img.get(x0, y1));
            top + fy * (bottom - top)
        }
    }
}

/// Warps one real plane. Output pixel `p` takes the source value at `m^-1(p)`.
pub fn warp_real(img: &RealImage, m: &AffineMap, mode: InterpMode, out_size: (usize, usize)) -> Result<RealImage> {
    let inv = m.inverse()?;
    let (w, h) = out_size;
    if w == 0 || h == 0 {
        return Err(arg_err("output size must be positive"));
    }
    Ok(RealImage::from_fn(w, h, |x, y| {
        let (sx, sy) = inv.apply(x as f64, y as f64);
        if in_domain(img, sx, sy) {
            sample(img, sx, sy, mode)
        } else {
            0.0
        }
    }))
}

/// Warps every channel of an 8-bit image.
pub fn warp(img: &Image, m: &AffineMap, mode: InterpMode, out_size: (usize, usize)) -> Result<Image> {
    img.map_planes(|p| warp_real(p, m, mode, out_size))
}

/// Resamples a plane to a new size, aligning corner pixels of input and output.
pub fn resize(img: &RealImage, width: usize, height: usize, mode: InterpMode) -> Result<RealImage> {
    if width == 0 || height == 0 {
        return Err(arg_err("output size must be positive"));
    }
    let ratio = |out: usize, inp: usize| {
        if out <= 1 || inp <= 1 {
            1.0
        } else {
            (out - 1) as f64 / (inp - 1) as f64
        }
    };
    let m = make_map(Transform::Scale { sx: ratio(width, img.width()), sy: ratio(height, img.height()) })?;
    warp_real(img, &m, mode, (width, height))
}
