use super::{quantize, Image};
use crate::error::{arg_err, Result};

/// Intensity counts for one channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    bins: [u64; 256],
    total: u64,
}

impl Histogram {
    pub fn bins(&self) -> &[u64; 256] {
        &self.bins
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Running sums; `cdf[v]` counts samples with intensity `<= v`.
    pub fn cumulative(&self) -> [u64; 256] {
        let mut acc = 0;
        let mut out = [0; 256];
        for (o, &b) in out.iter_mut().zip(&self.bins) {
            acc += b;
            *o = acc;
        }
        out
    }

    /// Cumulative counts normalized by the total.
    pub fn cdf(&self) -> [f64; 256] {
        let t = self.total as f64;
        self.cumulative().map(|c| c as f64 / t)
    }

    /// `intensity,count` header followed by 256 rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("intensity,count\n");
        for (v, c) in self.bins.iter().enumerate() {
            s.push_str(&format!("{v},{c}\n"));
        }
        s
    }
}

pub fn histogram(img: &Image, channel: usize) -> Result<Histogram> {
    if channel >= img.channels() {
        return Err(arg_err(format!("channel {channel} out of range for {}-channel image", img.channels())));
    }
    let mut bins = [0u64; 256];
    for &v in img.data().iter().skip(channel).step_by(img.channels()) {
        bins[v as usize] += 1;
    }
    Ok(Histogram { bins, total: (img.width() * img.height()) as u64 })
}

/// Histogram equalization, per channel.
///
/// Each intensity `v` maps to `round(255 * (cdf(v) - cdf_min) / (total - cdf_min))`
/// where `cdf_min` is the cumulative count at the darkest occupied bin. A
/// channel with a single occupied bin has a zero denominator and maps to 0.
pub fn equalize(img: &Image) -> Image {
    let luts: Vec<[u8; 256]> = (0..img.channels())
        .map(|c| {
            let h = histogram(img, c).expect("channel in range");
            let cum = h.cumulative();
            let cdf_min = h.bins.iter().position(|&b| b > 0).map_or(0, |v| cum[v]);
            let denom = h.total - cdf_min;
            let mut lut = [0u8; 256];
            if denom > 0 {
                for (l, &c) in lut.iter_mut().zip(&cum) {
                    *l = quantize(255.0 * c.saturating_sub(cdf_min) as f64 / denom as f64);
                }
            }
            lut
        })
        .collect();
    let ch = img.channels();
    let data = img.data().iter().enumerate().map(|(i, &v)| luts[i % ch][v as usize]).collect();
    Image::new(img.width(), img.height(), ch, data).expect("same shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_image_single_bin() {
        let img = Image::filled(10, 10, 1, 7).unwrap();
        let h = histogram(&img, 0).unwrap();
        assert_eq!(h.bins()[7], 100);
        assert_eq!(h.bins().iter().sum::<u64>(), 100);
        assert_eq!(h.total(), 100);
    }

    #[test]
    fn extremes() {
        let img = Image::gray(2, 1, vec![0, 255]).unwrap();
        let h = histogram(&img, 0).unwrap();
        assert_eq!((h.bins()[0], h.bins()[255]), (1, 1));
        assert!(histogram(&img, 1).is_err());
    }

    #[test]
    fn csv_has_256_rows() {
        let h = histogram(&Image::filled(2, 2, 1, 3).unwrap(), 0).unwrap();
        let csv = h.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 257);
        assert_eq!(lines[0], "intensity,count");
        assert_eq!(lines[4], "3,4");
    }

    #[test]
    fn equalize_two_levels() {
        let img = Image::gray(2, 1, vec![100, 200]).unwrap();
        assert_eq!(equalize(&img).data(), &[0, 255]);
    }

    #[test]
    fn equalize_uniform_is_identity() {
        let img = Image::gray(16, 16, (0..=255).collect()).unwrap();
        assert_eq!(equalize(&img), img);
    }

    #[test]
    fn equalize_constant() {
        let img = Image::filled(4, 3, 1, 90).unwrap();
        let out = equalize(&img);
        assert!(out.data().iter().all(|&v| v == out.data()[0]));
    }

    #[test]
    fn equalize_rgb_per_channel() {
        let img = Image::new(2, 1, 3, vec![10, 50, 50, 20, 50, 60]).unwrap();
        assert_eq!(equalize(&img).data(), &[0, 0, 0, 255, 0, 255]);
    }

    proptest! {
        #[test]
        fn totals_match_pixel_count(w in 1usize..12, h in 1usize..12, seed in any::<u64>()) {
            let img = Image::from_fn(w, h, |x, y| ((x * 31 + y * 17) as u64 ^ seed) as u8).unwrap();
            let hist = histogram(&img, 0).unwrap();
            prop_assert_eq!(hist.total(), (w * h) as u64);
            prop_assert_eq!(hist.bins().iter().sum::<u64>(), hist.total());
        }

        #[test]
        fn equalize_idempotent_up_to_quantization(data in proptest::collection::vec(any::<u8>(), 1..200)) {
            let n = data.len();
            let img = Image::gray(n, 1, data).unwrap();
            let once = equalize(&img);
            let twice = equalize(&once);
            let a = histogram(&once, 0).unwrap().cdf();
            let b = histogram(&twice, 0).unwrap().cdf();
            let worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            prop_assert!(worst <= 2.0 / 255.0, "cdf drift {}", worst);
        }
    }
}
