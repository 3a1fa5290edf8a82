use pnkit_core::imagecore::{
    apply_channel_weights, resize_image, rgb_to_hsv, rgb_to_lab, srgb_pixel_to_hsv, srgb_pixel_to_lab, ChannelWeights,
    PlanarImage, RgbImage,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Closed-form L*a*b* (D65) back to 8-bit sRGB using the published inverse matrix.
fn lab_to_srgb(lab: [f64; 3]) -> [u8; 3] {
    let [l, a, b] = lab;
    let fy = (l + 16.0) / 116.0;
    let fx = fy + a / 500.0;
    let fz = fy - b / 200.0;
    let d = 6.0 / 29.0;
    let inv = |t: f64| if t > d { t * t * t } else { 3.0 * d * d * (t - 4.0 / 29.0) };
    let (x, y, z) = (0.95047 * inv(fx), inv(fy), 1.08883 * inv(fz));
    let lin = [
        3.2404542 * x - 1.5371385 * y - 0.4985314 * z,
        -0.9692660 * x + 1.8760108 * y + 0.0415560 * z,
        0.0556434 * x - 0.2040259 * y + 1.0572252 * z,
    ];
    lin.map(|c| {
        let c = c.clamp(0.0, 1.0);
        let s = if c <= 0.0031308 { 12.92 * c } else { 1.055 * c.powf(1.0 / 2.4) - 0.055 };
        (s * 255.0).round() as u8
    })
}

#[test]
fn lab_round_trip_on_random_pixels() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut pixels: Vec<[u8; 3]> = (0..1000).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    pixels.extend([[0, 0, 0], [255, 255, 255], [255, 0, 0], [0, 255, 0], [0, 0, 255], [1, 1, 1]]);
    for p in pixels {
        let back = lab_to_srgb(srgb_pixel_to_lab(p));
        for c in 0..3 {
            assert!((back[c] as i32 - p[c] as i32).abs() <= 1, "{p:?} -> {back:?}");
        }
    }
}

#[test]
fn pure_red_matches_reference_lab() {
    // published CIELAB coordinates of sRGB red under D65
    let [l, a, b] = srgb_pixel_to_lab([255, 0, 0]);
    assert!((l - 53.2408).abs() < 0.01 && (a - 80.0925).abs() < 0.01 && (b - 67.2032).abs() < 0.01);
    let [l, a, b] = srgb_pixel_to_lab([255, 255, 255]);
    assert!((l - 100.0).abs() < 1e-6 && a.abs() < 0.01 && b.abs() < 0.01);
}

#[test]
fn hsv_matches_hexcone_formula() {
    // (64, 192, 128): max is green, hue = 60 * ((b - r) / delta + 2) degrees
    let (r, g, b) = (64.0 / 255.0, 192.0 / 255.0, 128.0 / 255.0);
    let delta: f64 = g - r;
    let hue = 60.0 * ((b - r) / delta + 2.0) / 360.0;
    let [h, s, v] = srgb_pixel_to_hsv([64, 192, 128]);
    assert!((h - hue).abs() < 1e-12 && (s - delta / g).abs() < 1e-12 && (v - g).abs() < 1e-12);
    let [_, s, v] = srgb_pixel_to_hsv([128, 128, 128]);
    assert_eq!((s, v), (0.0, 128.0 / 255.0));
}

/// Per-pixel bilinear reference with half-pixel centres and edge clamping.
fn bilinear_reference(img: &RgbImage, w: usize, h: usize, x: usize, y: usize, c: usize) -> u8 {
    let sx = ((x as f64 + 0.5) * img.width() as f64 / w as f64 - 0.5).clamp(0.0, (img.width() - 1) as f64);
    let sy = ((y as f64 + 0.5) * img.height() as f64 / h as f64 - 0.5).clamp(0.0, (img.height() - 1) as f64);
    let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(img.width() - 1), (y0 + 1).min(img.height() - 1));
    let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
    let p = |xx: usize, yy: usize| img.pixel(xx, yy)[c] as f64;
    let v = p(x0, y0) * (1.0 - fx) * (1.0 - fy)
        + p(x1, y0) * fx * (1.0 - fy)
        + p(x0, y1) * (1.0 - fx) * fy
        + p(x1, y1) * fx * fy;
    v.round() as u8
}

#[test]
fn checkerboard_resize_matches_bilinear_reference() {
    let img = RgbImage::from_fn(765, 573, |x, y| if (x / 2 + y / 2) % 2 == 0 { [250, 30, 90] } else { [10, 200, 140] });
    let out = resize_image(&img, 512, 512);
    assert_eq!((out.width(), out.height()), (512, 512));
    for y in 0..512 {
        for x in 0..512 {
            let got = out.pixel(x, y);
            for c in 0..3 {
                let want = bilinear_reference(&img, 512, 512, x, y, c);
                // rounding of an exact .5 may go either way between the two formulations
                assert!((got[c] as i32 - want as i32).abs() <= 1, "({x},{y},{c}) {} vs {want}", got[c]);
            }
        }
    }
}

#[test]
fn large_constant_downsample() {
    let img = RgbImage::filled(1024, 1024, [77, 77, 77]);
    let out = resize_image(&img, 512, 512);
    assert!(out.pixels().all(|p| p == [77, 77, 77]));
}

fn arb_image() -> impl Strategy<Value = RgbImage> {
    (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<u8>(), w * h * 3).prop_map(move |d| RgbImage::new(w, h, d).unwrap())
    })
}

proptest! {
    #[test]
    fn conversions_are_finite_and_in_range(img in arb_image()) {
        let lab = rgb_to_lab(&img);
        let l = lab.plane(0);
        prop_assert!(lab.data().iter().all(|v| v.is_finite()));
        prop_assert!(l.iter().all(|v| (0.0..=100.0).contains(v)));
        let hsv = rgb_to_hsv(&img);
        prop_assert!(hsv.plane(0).iter().all(|h| (0.0..1.0).contains(h)));
        prop_assert!(hsv.plane(1).iter().chain(hsv.plane(2)).all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn resize_is_identity_at_target(img in arb_image()) {
        prop_assert_eq!(resize_image(&img, img.width(), img.height()), img.clone());
    }

    #[test]
    fn resize_keeps_constants(w in 1usize..40, h in 1usize..40, tw in 1usize..40, th in 1usize..40, v in any::<u8>()) {
        let out = resize_image(&RgbImage::filled(w, h, [v, v / 2, 255 - v]), tw, th);
        prop_assert!(out.pixels().all(|p| p == [v, v / 2, 255 - v]));
    }

    #[test]
    fn weights_are_linear(img in arb_image(), w in prop::array::uniform3(-3.0f64..3.0), alpha in 0.1f64..4.0) {
        prop_assume!(w.iter().any(|v| *v != 0.0));
        let lab = rgb_to_lab(&img);
        let a = apply_channel_weights(&lab, ChannelWeights::new(w).unwrap()).unwrap();
        let scaled = ChannelWeights::new(w.map(|v| v * alpha)).unwrap();
        let b = apply_channel_weights(&lab, scaled).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            prop_assert!((x * alpha - y).abs() <= 1e-9 * (1.0 + y.abs()));
        }
        let same = apply_channel_weights(&lab, ChannelWeights::new([1.0; 3]).unwrap()).unwrap();
        prop_assert_eq!(same, lab);
    }
}

#[test]
fn weight_zero_two_zero_scales_middle_plane() {
    let img = PlanarImage::from_planes(3, 2, [vec![1.0; 6], vec![5.0; 6], vec![-2.0; 6]]).unwrap();
    let out = apply_channel_weights(&img, ChannelWeights::new([0.0, 2.0, 0.0]).unwrap()).unwrap();
    assert!(out.plane(0).iter().all(|&v| v == 0.0));
    assert!(out.plane(1).iter().all(|&v| v == 10.0));
    assert!(out.plane(2).iter().all(|&v| v == 0.0));
}
