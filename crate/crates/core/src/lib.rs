//! Image filtering, frequency-domain analysis, corner detection and a small
//! define-by-run autodiff engine that powers a CNN trainer plus three
//! pixel-space optimization procedures: adversarial perturbation, deep dream
//! and Gram-matrix style transfer.
//!
//! Everything is written from first principles on `f64` arithmetic. The
//! companion guide in `book/` walks through the math behind each module; its
//! code listings compile and run as doctests of this crate.
//!
//! ```
//! use pixforge::filter::{convolve, mean_kernel, BorderMode};
//! use pixforge::image::RealImage;
//!
//! let img = RealImage::from_fn(5, 5, |x, y| (x + y) as f64);
//! let smooth = convolve(&img, &mean_kernel(3).unwrap(), BorderMode::ZeroPad);
//! assert!((smooth.get(2, 2) - 4.0).abs() < 1e-12);
//! ```

pub mod autograd;
pub mod error;
pub mod features;
pub mod filter;
pub mod geometry;
pub mod image;
pub mod imageopt;
pub mod nn;
pub mod spectral;

pub use error::{Error, Result};
pub use image::{Image, RealImage};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/images.md")]
    mod images {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/filters.md")]
    mod filters {}
    #[doc = include_str!("../../../book/src/spectral.md")]
    mod spectral {}
    #[doc = include_str!("../../../book/src/corners.md")]
    mod corners {}
    #[doc = include_str!("../../../book/src/autograd.md")]
    mod autograd {}
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/pixel-optimization.md")]
    mod pixel_optimization {}
}
