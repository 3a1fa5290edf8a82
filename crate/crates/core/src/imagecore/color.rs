//! sRGB to CIE 1976 L*a*b* (D65) and HSV conversion.

use super::{ChannelWeights, ImageError, PlanarImage, RgbImage};

/// D65 reference white, 2° observer, Y normalised to 1.
const WHITE_D65: [f64; 3] = [0.950_47, 1.0, 1.088_83];

const SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

const DELTA: f64 = 6.0 / 29.0;

fn srgb_to_linear(c: u8) -> f64 {
    let c = c as f64 / 255.0;
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// Converts one 8-bit sRGB pixel to `(L*, a*, b*)`.
pub fn srgb_pixel_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let lin = rgb.map(srgb_to_linear);
    let mut xyz = [0.0; 3];
    for (row, out) in SRGB_TO_XYZ.iter().zip(xyz.iter_mut()) {
        *out = row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2];
    }
    let fx = lab_f(xyz[0] / WHITE_D65[0]);
    let fy = lab_f(xyz[1] / WHITE_D65[1]);
    let fz = lab_f(xyz[2] / WHITE_D65[2]);
    let l = (116.0 * fy - 16.0).clamp(0.0, 100.0);
    [l, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Hexcone HSV with hue scaled to `[0, 1)`.
pub fn srgb_pixel_to_hsv(rgb: [u8; 3]) -> [f64; 3] {
    let [r, g, b] = rgb.map(|c| c as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta == 0.0 {
        0.0
    } else {
        let sector = if max == r {
            ((g - b) / delta).rem_euclid(6.0)
        } else if max == g {
            (b - r) / delta + 2.0
        } else {
            (r - g) / delta + 4.0
        };
        let h = sector / 6.0;
        if h >= 1.0 {
            h - 1.0
        } else {
            h
        }
    };
    [h, s, v]
}

fn convert(img: &RgbImage, f: impl Fn([u8; 3]) -> [f64; 3]) -> PlanarImage {
    let n = img.width() * img.height();
    let mut planes = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for (i, px) in img.pixels().enumerate() {
        let v = f(px);
        planes[0][i] = v[0];
        planes[1][i] = v[1];
        planes[2][i] = v[2];
    }
    PlanarImage::from_planes(img.width(), img.height(), planes).expect("conversion preserves shape")
}

pub fn rgb_to_lab(img: &RgbImage) -> PlanarImage {
    convert(img, srgb_pixel_to_lab)
}

pub fn rgb_to_hsv(img: &RgbImage) -> PlanarImage {
    convert(img, srgb_pixel_to_hsv)
}

/// Scales channel `c` by `w[c]`.
pub fn apply_channel_weights(img: &PlanarImage, w: ChannelWeights) -> Result<PlanarImage, ImageError> {
    if img.channels() != 3 {
        return Err(ImageError::ChannelCount(img.channels()));
    }
    let mut out = img.clone();
    for (c, &wc) in w.get().iter().enumerate() {
        for v in out.plane_mut(c) {
            // keeps -0.0 out of the planes when a weight is zero
            *v = if wc == 0.0 { 0.0 } else { *v * wc };
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn black_and_white_endpoints() {
        let [l, a, b] = srgb_pixel_to_lab([0, 0, 0]);
        assert!(l.abs() < 1e-12 && a.abs() < 1e-12 && b.abs() < 1e-12);
        let [l, a, b] = srgb_pixel_to_lab([255, 255, 255]);
        assert!((l - 100.0).abs() < 0.01);
        assert!(a.abs() < 0.01 && b.abs() < 0.01);
    }

    #[test]
    fn hsv_simple_cases() {
        assert_eq!(srgb_pixel_to_hsv([255, 0, 0]), [0.0, 1.0, 1.0]);
        let [_, s, v] = srgb_pixel_to_hsv([128, 128, 128]);
        assert_eq!(s, 0.0);
        assert!((v - 128.0 / 255.0).abs() < 1e-15);
    }

    #[test]
    fn hue_of_magenta_side_wraps_below_one() {
        let [h, _, _] = srgb_pixel_to_hsv([255, 0, 1]);
        assert!((0.0..1.0).contains(&h));
        assert!(h > 0.99);
    }

    #[test]
    fn weights_scale_planes() {
        let img = PlanarImage::from_planes(2, 1, [vec![1.0, 2.0], vec![5.0, 5.0], vec![-3.0, 4.0]]).unwrap();
        let out = apply_channel_weights(&img, ChannelWeights::new([0.0, 2.0, 0.0]).unwrap()).unwrap();
        assert_eq!(out.plane(0), &[0.0, 0.0]);
        assert_eq!(out.plane(1), &[10.0, 10.0]);
        assert_eq!(out.plane(2), &[0.0, 0.0]);

        let same = apply_channel_weights(&img, ChannelWeights::new([1.0, 1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(same, img);
    }

    #[test]
    fn default_weights_keep_lightness_only() {
        let rgb = RgbImage::from_fn(4, 3, |x, y| [(x * 60) as u8, (y * 90) as u8, 30]);
        let lab = rgb_to_lab(&rgb);
        let out = apply_channel_weights(&lab, ChannelWeights::default()).unwrap();
        assert_eq!(out.plane(0), lab.plane(0));
        assert!(out.plane(1).iter().chain(out.plane(2)).all(|&v| v == 0.0));
    }

    #[test]
    fn weights_reject_single_channel() {
        let img = PlanarImage::new(2, 2, 1, vec![0.0; 4]).unwrap();
        assert!(matches!(apply_channel_weights(&img, ChannelWeights::default()), Err(ImageError::ChannelCount(1))));
    }

    #[test]
    fn all_zero_weights_rejected() {
        assert!(ChannelWeights::new([0.0; 3]).is_err());
    }
}
