use super::RgbImage;

/// Bilinear resampling with pixel-centre alignment and edge clamping.
///
/// Same-size input is returned unchanged.
pub fn resize_image(img: &RgbImage, width: usize, height: usize) -> RgbImage {
    assert!(width > 0 && height > 0, "target dimensions must be positive");
    if img.width() == width && img.height() == height {
        return img.clone();
    }
    let xs = axis_taps(img.width(), width);
    let ys = axis_taps(img.height(), height);
    let src = img.data();
    let sw = img.width();
    let mut out = Vec::with_capacity(width * height * 3);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for c in 0..3 {
                let p00 = src[(y0 * sw + x0) * 3 + c] as f64;
                let p01 = src[(y0 * sw + x1) * 3 + c] as f64;
                let p10 = src[(y1 * sw + x0) * 3 + c] as f64;
                let p11 = src[(y1 * sw + x1) * 3 + c] as f64;
                let top = p00 + (p01 - p00) * fx;
                let bottom = p10 + (p11 - p10) * fx;
                let v = top + (bottom - top) * fy;
                out.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RgbImage::new(width, height, out).expect("resize output has target shape")
}

/// For each output coordinate: the two source indices and the blend weight.
fn axis_taps(src_len: usize, dst_len: usize) -> Vec<(usize, usize, f64)> {
    let scale = src_len as f64 / dst_len as f64;
    let max = (src_len - 1) as f64;
    (0..dst_len)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, max);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(src_len - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_at_target_size() {
        let img = RgbImage::from_fn(7, 5, |x, y| [(x * 30) as u8, (y * 40) as u8, ((x + y) * 10) as u8]);
        assert_eq!(resize_image(&img, 7, 5), img);
    }

    #[test]
    fn constant_is_preserved() {
        let img = RgbImage::filled(1024, 1024, [90, 90, 90]);
        let out = resize_image(&img, 512, 512);
        assert_eq!((out.width(), out.height()), (512, 512));
        assert!(out.data().iter().all(|&v| v == 90));
    }

    #[test]
    fn upsampling_single_pixel() {
        let img = RgbImage::filled(1, 1, [1, 2, 3]);
        let out = resize_image(&img, 3, 2);
        assert!(out.pixels().all(|p| p == [1, 2, 3]));
    }
}
