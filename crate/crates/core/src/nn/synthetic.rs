//! Seeded synthetic datasets that need no downloads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::autograd::Tensor;
use crate::error::Result;
use crate::image::{quantize, Image};

/// Class names of [`shapes`], in label order.
pub const SHAPE_CLASSES: [&str; 2] = ["circle", "square"];

/// Filled circle (label 0) or axis-aligned square (label 1) on a dark,
/// noisy `size x size` background. Position, extent, contrast and noise
/// are jittered per sample.
pub fn shape_image(label: usize, size: usize, rng: &mut impl Rng) -> Image {
    let s = size as f64;
    let half = rng.gen_range(0.2 * s..0.34 * s);
    let cx = rng.gen_range(half + 0.5..s - half - 0.5);
    let cy = rng.gen_range(half + 0.5..s - half - 0.5);
    let fg = rng.gen_range(170.0..250.0);
    let bg = rng.gen_range(0.0..60.0);
    let noise = 20.0;
    let mut data = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
            let inside = if label == 0 { dx.hypot(dy) <= half } else { dx.abs() <= half && dy.abs() <= half };
            let base = if inside { fg } else { bg };
            data.push(quantize(base + rng.gen_range(-noise..noise)));
        }
    }
    Image::gray(size, size, data).expect("sized by construction")
}

/// `n` labelled images, classes alternating so both are equally represented.
pub fn shapes(n: usize, size: usize, seed: u64) -> Vec<(Image, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|i| (shape_image(i % 2, size, &mut rng), i % 2)).collect()
}

/// [`shapes`] wrapped as a dataset.
pub fn shapes_dataset(n: usize, size: usize, seed: u64) -> Result<Dataset> {
    Dataset::from_images(&shapes(n, size, seed), SHAPE_CLASSES.iter().map(|s| s.to_string()).collect())
}

/// Points in the plane split by the line `x + 2y = 0.3` with a margin of at
/// least `margin` on both sides. Label 1 is the side where `x + 2y > 0.3`.
pub fn separable_points(n: usize, margin: f64, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let norm = 5f64.sqrt();
    let mut inputs = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    while inputs.len() < n {
        let (x, y): (f64, f64) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let d = (x + 2.0 * y - 0.3) / norm;
        if d.abs() < margin {
            continue;
        }
        inputs.push(Tensor::new(vec![2], vec![x, y])?);
        labels.push(usize::from(d > 0.0));
    }
    Dataset::new(inputs, labels, vec!["below".into(), "above".into()])
}
