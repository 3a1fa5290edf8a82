//! Iterative intermeans threshold selection and binarization.

use super::PipelineError;
use crate::imagecore::{BinaryImage, GrayImage};

/// Hard cap on threshold refinements.
const MAX_ITERATIONS: usize = 256;

/// Weighted means of the bins at or below `t` and strictly above `t`.
/// An empty side takes the other side's mean.
pub fn class_means(hist: &[u64], t: usize) -> (f64, f64) {
    let side = |range: std::ops::Range<usize>| {
        let (mut mass, mut moment) = (0.0, 0.0);
        for i in range {
            mass += hist[i] as f64;
            moment += i as f64 * hist[i] as f64;
        }
        (mass > 0.0).then(|| moment / mass)
    };
    let split = (t + 1).min(hist.len());
    match (side(0..split), side(split..hist.len())) {
        (Some(b), Some(a)) => (b, a),
        (Some(b), None) => (b, b),
        (None, Some(a)) => (a, a),
        (None, None) => (0.0, 0.0),
    }
}

fn midpoint(hist: &[u64], t: usize) -> f64 {
    let (below, above) = class_means(hist, t);
    (below + above) / 2.0
}

/// Intermeans threshold on a histogram, in bin units.
///
/// Starts from the histogram mean and repeatedly moves `T` to the rounded
/// average of the class means below and above it, stopping once `T` no
/// longer changes. A cycle (rare, from rounding) resolves to the visited
/// `T` closest to its own midpoint.
pub fn intermeans_bin(hist: &[u64]) -> Result<usize, PipelineError> {
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return Err(PipelineError::EmptyHistogram);
    }
    let moment: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let last = hist.len() - 1;
    let mut t = ((moment / total as f64).round() as usize).min(last);
    let mut visited = vec![t];
    for _ in 0..MAX_ITERATIONS {
        let next = (midpoint(hist, t).round() as usize).min(last);
        if next == t {
            return Ok(t);
        }
        if visited.contains(&next) {
            let best = visited
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    let ra = (a as f64 - midpoint(hist, a)).abs();
                    let rb = (b as f64 - midpoint(hist, b)).abs();
                    ra.total_cmp(&rb).then(a.cmp(&b))
                })
                .expect("visited is non-empty");
            return Ok(best);
        }
        visited.push(next);
        t = next;
    }
    Ok(t)
}

/// Threshold level in `[0, 1]` for a grayscale image quantised to 8 bits.
pub fn intermeans_threshold(img: &GrayImage, bins: usize) -> Result<f64, PipelineError> {
    if !(2..=256).contains(&bins) {
        return Err(PipelineError::InvalidParameter("threshold histogram needs 2..=256 bins"));
    }
    let mut hist = vec![0u64; bins];
    for q in img.to_u8() {
        hist[q as usize * bins / 256] += 1;
    }
    let t = intermeans_bin(&hist)?;
    Ok(t as f64 / (bins - 1) as f64)
}

/// Foreground where the pixel is strictly above `level - offset`.
pub fn binarize(img: &GrayImage, level: f64, offset: f64) -> Result<BinaryImage, PipelineError> {
    if !(0.0..=1.0).contains(&level) || !offset.is_finite() || level - offset < 0.0 {
        return Err(PipelineError::InvalidLevel { level, offset });
    }
    let cut = level - offset;
    let data = img.data().iter().map(|&v| v > cut).collect();
    Ok(BinaryImage::new(img.width(), img.height(), data).expect("same shape as input"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_threshold_is_its_level() {
        for level in [0u8, 17, 128, 255] {
            let img = GrayImage::filled(4, 4, level as f64 / 255.0);
            let t = intermeans_threshold(&img, 256).unwrap();
            assert!((t - level as f64 / 255.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_spikes() {
        let img = GrayImage::from_fn(10, 10, |x, _| if x < 5 { 50.0 / 255.0 } else { 200.0 / 255.0 });
        let t = intermeans_threshold(&img, 256).unwrap();
        assert_eq!(t, 125.0 / 255.0);
    }

    #[test]
    fn empty_histogram_is_an_error() {
        assert!(matches!(intermeans_bin(&[0; 256]), Err(PipelineError::EmptyHistogram)));
    }

    #[test]
    fn binarize_boundaries() {
        let img = GrayImage::new(2, 1, vec![0.493, 0.492]).unwrap();
        let b = binarize(&img, 0.5, 0.008).unwrap();
        assert_eq!(b.data(), &[true, false]);

        let img = GrayImage::new(3, 1, vec![0.4, 0.5, 0.6]).unwrap();
        assert_eq!(binarize(&img, 0.5, 0.0).unwrap().data(), &[false, false, true]);
    }

    #[test]
    fn binarize_rejects_negative_cut() {
        let img = GrayImage::filled(1, 1, 0.0);
        assert!(matches!(binarize(&img, 0.005, 0.008), Err(PipelineError::InvalidLevel { .. })));
        assert!(binarize(&img, 1.5, 0.0).is_err());
    }
}
