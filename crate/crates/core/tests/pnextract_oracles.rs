use std::collections::VecDeque;

use pnkit_core::imagecore::{BinaryImage, GrayImage, PlanarImage, RgbImage};
use pnkit_core::pnextract::{
    binarize, box_filter_10, clahe, colorize, complement, gaussian_filter, hist_eq, intermeans_bin,
    intermeans_threshold, pca_grayscale, remove_small_components, subtract_enhanced, Connectivity, TileGrid,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Mat3 = [[f64; 3]; 3];

fn covariance(pixels: &[[f64; 3]]) -> Mat3 {
    let n = pixels.len() as f64;
    let mean: Vec<f64> = (0..3).map(|c| pixels.iter().map(|p| p[c]).sum::<f64>() / n).collect();
    let mut cov = [[0.0; 3]; 3];
    for (i, row) in cov.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = pixels.iter().map(|p| (p[i] - mean[i]) * (p[j] - mean[j])).sum::<f64>() / (n - 1.0);
        }
    }
    cov
}

fn char_poly(c: &Mat3, l: f64) -> f64 {
    let m = |i: usize, j: usize| c[i][j] - if i == j { l } else { 0.0 };
    m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
        + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
}

#[test]
fn four_pixel_pca_matches_characteristic_polynomial() {
    let px = [[1.0, 2.0, 0.0], [3.0, 1.0, 0.0], [2.0, 4.0, 0.0], [0.0, 3.0, 0.0]];
    let planes = [0, 1, 2].map(|c| px.iter().map(|p| p[c]).collect::<Vec<f64>>());
    let img = PlanarImage::from_planes(2, 2, planes).unwrap();
    let (_, pca) = pca_grayscale(&img).unwrap();
    let cov = covariance(&px);
    // by hand: variances 5/3, covariance -2/3, so eigenvalues 7/3, 1, 0
    let expected = [7.0 / 3.0, 1.0, 0.0];
    for k in 0..3 {
        let l = pca.eigenvalues[k];
        assert!((l - expected[k]).abs() < 1e-9, "{:?}", pca.eigenvalues);
        assert!(char_poly(&cov, l).abs() < 1e-9);
        let v = pca.coefficient_column(k);
        for i in 0..3 {
            let cv: f64 = (0..3).map(|j| cov[i][j] * v[j]).sum();
            assert!((cv - l * v[i]).abs() < 1e-9);
        }
    }
}

fn arb_planar() -> impl Strategy<Value = PlanarImage> {
    (2usize..10, 1usize..10).prop_flat_map(|(w, h)| {
        prop::collection::vec(-50.0f64..50.0, w * h * 3).prop_map(move |d| PlanarImage::new(w, h, 3, d).unwrap())
    })
}

proptest! {
    #[test]
    fn pca_basis_is_orthonormal_and_preserves_trace(img in arb_planar()) {
        let (gray, pca) = pca_grayscale(&img).unwrap();
        let cols: Vec<[f64; 3]> = (0..3).map(|k| pca.coefficient_column(k)).collect();
        for a in 0..3 {
            for b in 0..3 {
                let dot: f64 = (0..3).map(|i| cols[a][i] * cols[b][i]).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() < 1e-9);
            }
        }
        prop_assert!(pca.eigenvalues[0] >= pca.eigenvalues[1] && pca.eigenvalues[1] >= pca.eigenvalues[2]);
        prop_assert!(pca.eigenvalues.iter().all(|&l| l >= 0.0));
        let pixels: Vec<[f64; 3]> = (0..img.pixel_count()).map(|i| [0, 1, 2].map(|c| img.plane(c)[i])).collect();
        let cov = covariance(&pixels);
        let trace = cov[0][0] + cov[1][1] + cov[2][2];
        let sum: f64 = pca.eigenvalues.iter().sum();
        prop_assert!((trace - sum).abs() <= 1e-9 * (1.0 + trace.abs()));
        let (lo, hi) = gray.min_max();
        prop_assert!(lo >= 0.0 && hi <= 1.0);
    }
}

fn bin(v: f64, bins: usize) -> usize {
    ((v * bins as f64).floor() as usize).min(bins - 1)
}

/// Contrast-limited mapping of one tile, straight from its pixels.
fn tile_map(pixels: &[f64], bins: usize, clip: f64) -> Vec<f64> {
    let n = pixels.len() as f64;
    let counts: Vec<f64> = (0..bins).map(|b| pixels.iter().filter(|&&v| bin(v, bins) == b).count() as f64).collect();
    let limit = clip * n;
    let excess: f64 = counts.iter().map(|&c| (c - limit).max(0.0)).sum();
    let clipped: Vec<f64> = counts.iter().map(|&c| c.min(limit) + excess / bins as f64).collect();
    (0..bins).map(|b| (clipped[..=b].iter().sum::<f64>() / n).min(1.0)).collect()
}

fn clahe_reference(img: &GrayImage, tiles: usize, bins: usize, clip: f64) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let span = |i: usize, len: usize| (i * len / tiles, (i + 1) * len / tiles);
    let mut maps = vec![vec![Vec::new(); tiles]; tiles];
    for (ty, row) in maps.iter_mut().enumerate() {
        for (tx, m) in row.iter_mut().enumerate() {
            let (x0, x1) = span(tx, w);
            let (y0, y1) = span(ty, h);
            let px: Vec<f64> =
                (y0..y1).flat_map(|y| (x0..x1).map(move |x| (x, y))).map(|(x, y)| img.get(x, y)).collect();
            *m = tile_map(&px, bins, clip);
        }
    }
    let centre = |i: usize, len: usize| {
        let (a, b) = span(i, len);
        (a + b - 1) as f64 / 2.0
    };
    let weights = |p: usize, len: usize| -> Vec<(usize, f64)> {
        let p = p as f64;
        let cs: Vec<f64> = (0..tiles).map(|i| centre(i, len)).collect();
        if p <= cs[0] {
            return vec![(0, 1.0)];
        }
        if p >= cs[tiles - 1] {
            return vec![(tiles - 1, 1.0)];
        }
        let i = (0..tiles - 1).find(|&i| cs[i] <= p && p < cs[i + 1]).unwrap();
        let f = (p - cs[i]) / (cs[i + 1] - cs[i]);
        vec![(i, 1.0 - f), (i + 1, f)]
    };
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let b = bin(img.get(x, y), bins);
            let mut v = 0.0;
            for &(ty, wy) in &weights(y, h) {
                for &(tx, wx) in &weights(x, w) {
                    v += wy * wx * maps[ty][tx][b];
                }
            }
            out.push(v.clamp(0.0, 1.0));
        }
    }
    out
}

#[test]
fn clahe_constant_tiles_match_tile_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let levels: Vec<f64> = (0..64).map(|_| rng.random_range(0.0..1.0)).collect();
    let img = GrayImage::from_fn(16, 16, |x, y| levels[(y / 2) * 8 + x / 2]);
    let out = clahe(&img, TileGrid::new(8, 8), 128, 0.01).unwrap();
    let reference = clahe_reference(&img, 8, 128, 0.01);
    for (a, b) in out.data().iter().zip(&reference) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn clahe_random_image_matches_tile_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let img = GrayImage::from_fn(45, 38, |_, _| rng.random_range(0.0..1.0));
    for (tiles, clip) in [(4, 0.01), (3, 0.05), (1, 1.0)] {
        let out = clahe(&img, TileGrid::new(tiles, tiles), 128, clip).unwrap();
        let reference = clahe_reference(&img, tiles, 128, clip);
        for (a, b) in out.data().iter().zip(&reference) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn two_valued_image_equalises_to_half_and_one() {
    let img = GrayImage::from_fn(10, 10, |x, _| if x < 5 { 0.2 } else { 0.8 });
    let out = clahe(&img, TileGrid::new(1, 1), 128, 1.0).unwrap();
    let global = hist_eq(&img, 128);
    for ((o, g), i) in out.data().iter().zip(global.data()).zip(img.data()) {
        let want = if *i == 0.2 { 0.5 } else { 1.0 };
        assert!((o - want).abs() < 1e-12 && (g - want).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn equalisers_keep_range_and_dims(w in 8usize..30, h in 8usize..30, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = GrayImage::from_fn(w, h, |_, _| rng.random_range(0.0..=1.0));
        for out in [clahe(&img, TileGrid::default(), 128, 0.01).unwrap(), hist_eq(&img, 128)] {
            prop_assert_eq!((out.width(), out.height()), (w, h));
            let (lo, hi) = out.min_max();
            prop_assert!(lo >= 0.0 && hi <= 1.0);
        }
    }

    #[test]
    fn smoothers_stay_within_input_bounds(w in 1usize..25, h in 1usize..25, seed in any::<u64>(), sigma in 0.3f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = GrayImage::from_fn(w, h, |_, _| rng.random_range(0.2..0.9));
        let (lo, hi) = img.min_max();
        for out in [box_filter_10(&img), gaussian_filter(&img, sigma).unwrap()] {
            let (a, b) = out.min_max();
            prop_assert!(a >= lo - 1e-12 && b <= hi + 1e-12);
        }
        let c = GrayImage::filled(w, h, 0.37);
        for out in [box_filter_10(&c), gaussian_filter(&c, sigma).unwrap()] {
            prop_assert!(out.data().iter().all(|v| (v - 0.37).abs() < 1e-6));
        }
    }
}

#[test]
fn gaussian_impulse_response_is_the_sampled_kernel() {
    let sigma: f64 = 2.0;
    let radius = (3.0 * sigma).ceil() as i64;
    let g = |d: i64| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp();
    let norm: f64 = (-radius..=radius).map(g).sum();
    let img = GrayImage::from_fn(41, 41, |x, y| if x == 20 && y == 20 { 1.0 } else { 0.0 });
    let out = gaussian_filter(&img, sigma).unwrap();
    for y in 0..41i64 {
        for x in 0..41i64 {
            let (dx, dy) = (x - 20, y - 20);
            let want = if dx.abs() <= radius && dy.abs() <= radius { g(dx) * g(dy) / (norm * norm) } else { 0.0 };
            assert!((out.get(x as usize, y as usize) - want).abs() < 1e-12);
        }
    }
}

#[test]
fn subtraction_clamps_at_zero() {
    let a = GrayImage::filled(3, 3, 0.7);
    let b = GrayImage::filled(3, 3, 0.2);
    assert!(subtract_enhanced(&a, &b).unwrap().data().iter().all(|v| (v - 0.5).abs() < 1e-12));
    assert!(subtract_enhanced(&b, &a).unwrap().data().iter().all(|&v| v == 0.0));
    assert!(subtract_enhanced(&a, &a).unwrap().data().iter().all(|&v| v == 0.0));
}

fn midpoint(hist: &[u64], t: usize) -> f64 {
    let mean = |r: std::ops::Range<usize>| {
        let m: u64 = hist[r.clone()].iter().sum();
        (m > 0).then(|| r.map(|i| i as f64 * hist[i] as f64).sum::<f64>() / m as f64)
    };
    match (mean(0..t + 1), mean(t + 1..hist.len())) {
        (Some(a), Some(b)) => (a + b) / 2.0,
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => unreachable!(),
    }
}

#[test]
fn intermeans_agrees_with_exhaustive_fixed_point_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for case in 0..100 {
        let m1 = rng.random_range(0.05..0.5);
        let m2 = rng.random_range(0.5..0.95);
        let s1 = rng.random_range(0.01..0.12);
        let s2 = rng.random_range(0.01..0.12);
        let frac = rng.random_range(0.1..0.9);
        let (n1, n2) = (Normal::new(m1, s1).unwrap(), Normal::new(m2, s2).unwrap());
        let img = GrayImage::from_fn(48, 48, |_, _| {
            let v: f64 = if rng.random::<f64>() < frac { n1.sample(&mut rng) } else { n2.sample(&mut rng) };
            v.clamp(0.0, 1.0)
        });
        let mut hist = vec![0u64; 256];
        for v in img.data() {
            hist[(v * 255.0).round() as usize] += 1;
        }
        let fixed: Vec<usize> = (0..256).filter(|&t| (t as f64 - midpoint(&hist, t)).abs() <= 1.0).collect();
        let t = intermeans_bin(&hist).unwrap();
        assert!(fixed.contains(&t), "case {case}: {t} not in {fixed:?}");
        let level = intermeans_threshold(&img, 256).unwrap();
        assert!((level - t as f64 / 255.0).abs() < 1e-12);
    }
}

#[test]
fn two_spikes_give_the_midpoint() {
    let mut hist = vec![0u64; 256];
    hist[50] = 500;
    hist[200] = 500;
    assert_eq!(intermeans_bin(&hist).unwrap(), 125);
}

fn flood_fill_filter(img: &BinaryImage, min_px: usize, eight: bool) -> Vec<bool> {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let mut seen = vec![false; (w * h) as usize];
    let mut keep = vec![false; (w * h) as usize];
    let steps: Vec<(i64, i64)> = if eight {
        (-1..=1).flat_map(|dy| (-1..=1).map(move |dx| (dx, dy))).filter(|&d| d != (0, 0)).collect()
    } else {
        vec![(1, 0), (-1, 0), (0, 1), (0, -1)]
    };
    for start in 0..(w * h) {
        if seen[start as usize] || !img.data()[start as usize] {
            continue;
        }
        let mut queue = VecDeque::from([start]);
        seen[start as usize] = true;
        let mut members = Vec::new();
        while let Some(p) = queue.pop_front() {
            members.push(p);
            let (x, y) = (p % w, p / w);
            for (dx, dy) in &steps {
                let (nx, ny) = (x + dx, y + dy);
                if nx >= 0 && ny >= 0 && nx < w && ny < h {
                    let q = ny * w + nx;
                    if !seen[q as usize] && img.data()[q as usize] {
                        seen[q as usize] = true;
                        queue.push_back(q);
                    }
                }
            }
        }
        if members.len() >= min_px {
            members.iter().for_each(|&p| keep[p as usize] = true);
        }
    }
    keep
}

#[test]
fn component_filter_matches_flood_fill() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let density = rng.random_range(0.2..0.6);
        let img = BinaryImage::from_fn(64, 64, |_, _| rng.random::<f64>() < density);
        let min_px = rng.random_range(1..40);
        for (conn, eight) in [(Connectivity::Four, false), (Connectivity::Eight, true)] {
            let out = remove_small_components(&img, min_px, conn);
            assert_eq!(out.data(), &flood_fill_filter(&img, min_px, eight)[..]);
            assert!(out.data().iter().zip(img.data()).all(|(o, i)| !o || *i));
        }
    }
}

#[test]
fn binarize_boundary_arithmetic() {
    let img = GrayImage::new(2, 1, vec![0.493, 0.492]).unwrap();
    let b = binarize(&img, 0.5, 0.008).unwrap();
    assert_eq!(b.data(), &[true, false]);
    let plain = binarize(&img, 0.4925, 0.0).unwrap();
    assert_eq!(plain.data(), &[true, false]);
}

proptest! {
    #[test]
    fn lower_offset_never_removes_pixels(seed in any::<u64>(), level in 0.02f64..1.0, a in 0.001f64..0.011, b in 0.001f64..0.011) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = GrayImage::from_fn(20, 20, |_, _| rng.random_range(0.0..=1.0));
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let small = binarize(&img, level, lo).unwrap();
        let large = binarize(&img, level, hi).unwrap();
        prop_assert!(small.data().iter().zip(large.data()).all(|(s, l)| !s || *l));
    }

    #[test]
    fn complement_is_an_involution(seed in any::<u64>(), w in 1usize..12, h in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bin = BinaryImage::from_fn(w, h, |_, _| rng.random());
        let gray = GrayImage::from_fn(w, h, |_, _| f64::from(rng.random_range(0u8..=255)) / 255.0);
        let rgb = RgbImage::from_fn(w, h, |_, _| [rng.random(), rng.random(), rng.random()]);
        prop_assert_eq!(complement(&complement(&bin)), bin.clone());
        let g2 = complement(&complement(&gray));
        prop_assert!(g2.data().iter().zip(gray.data()).all(|(a, b)| (a - b).abs() < 1e-15));
        prop_assert_eq!(complement(&complement(&rgb)), rgb.clone());
        prop_assert!(complement(&bin).data().iter().zip(bin.data()).all(|(a, b)| a != b));
        prop_assert!(complement(&rgb).data().iter().zip(rgb.data()).all(|(a, b)| *a == 255 - b));
    }
}

#[test]
fn checkerboard_colorize_selects_per_pixel() {
    let src = RgbImage::from_fn(9, 7, |x, y| [(x * 20) as u8, (y * 30) as u8, 77]);
    let mask = BinaryImage::from_fn(9, 7, |x, y| (x + y) % 2 == 0);
    let out = colorize(&mask, &src, [255, 255, 255]).unwrap();
    for y in 0..7 {
        for x in 0..9 {
            let want = if mask.get(x, y) { src.pixel(x, y) } else { [255, 255, 255] };
            assert_eq!(out.pixel(x, y), want);
        }
    }
    assert!(colorize(&BinaryImage::zeros(9, 6), &src, [0, 0, 0]).is_err());
}
