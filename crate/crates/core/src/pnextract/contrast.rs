//! Global and contrast-limited adaptive histogram equalization.

use super::PipelineError;
use crate::imagecore::GrayImage;

/// Histogram bin of a `[0, 1]` value.
#[inline]
pub(crate) fn bin_of(v: f64, bins: usize) -> usize {
    ((v * bins as f64) as usize).min(bins - 1)
}

/// Maps each bin to its normalised cumulative count.
fn cdf_mapping(hist: &[f64], total: f64) -> Vec<f64> {
    let mut acc = 0.0;
    hist.iter()
        .map(|&h| {
            acc += h;
            (acc / total).clamp(0.0, 1.0)
        })
        .collect()
}

/// Global histogram equalization through the normalised CDF.
pub fn hist_eq(img: &GrayImage, bins: usize) -> GrayImage {
    assert!(bins >= 2, "need at least two bins");
    let mut hist = vec![0.0; bins];
    for &v in img.data() {
        hist[bin_of(v, bins)] += 1.0;
    }
    let map = cdf_mapping(&hist, img.data().len() as f64);
    let data = img.data().iter().map(|&v| map[bin_of(v, bins)]).collect();
    GrayImage::from_raw(img.width(), img.height(), data)
}

/// Tile grid for CLAHE, `cols x rows`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileGrid {
    pub cols: usize,
    pub rows: usize,
}

impl TileGrid {
    pub const fn new(cols: usize, rows: usize) -> Self {
        Self { cols, rows }
    }
}

impl Default for TileGrid {
    fn default() -> Self {
        Self::new(8, 8)
    }
}

/// Tile `i` of `n` over `len` pixels spans `[start, end)`.
fn tile_span(i: usize, n: usize, len: usize) -> (usize, usize) {
    (i * len / n, (i + 1) * len / n)
}

/// Interpolation neighbours and weight of coordinate `p` along one axis.
fn axis_neighbours(p: usize, centers: &[f64]) -> (usize, usize, f64) {
    let p = p as f64;
    let last = centers.len() - 1;
    if p <= centers[0] {
        return (0, 0, 0.0);
    }
    if p >= centers[last] {
        return (last, last, 0.0);
    }
    let i = centers.partition_point(|&c| c <= p) - 1;
    let w = (p - centers[i]) / (centers[i + 1] - centers[i]);
    (i, i + 1, w)
}

/// Contrast-limited adaptive histogram equalization.
///
/// Each tile's histogram is clipped at `clip * tile_pixels`; clipped mass is
/// spread evenly over all bins. Tile mappings are blended bilinearly between
/// tile centres and held constant beyond the outermost centres.
pub fn clahe(img: &GrayImage, tiles: TileGrid, bins: usize, clip: f64) -> Result<GrayImage, PipelineError> {
    let (w, h) = (img.width(), img.height());
    if tiles.cols == 0 || tiles.rows == 0 || w < tiles.cols || h < tiles.rows {
        return Err(PipelineError::TileTooSmall { width: w, height: h, cols: tiles.cols, rows: tiles.rows });
    }
    if bins < 2 {
        return Err(PipelineError::InvalidParameter("CLAHE needs at least two bins"));
    }
    if !(clip > 0.0) {
        return Err(PipelineError::InvalidParameter("CLAHE clip fraction must be positive"));
    }

    let data = img.data();
    let mut maps = Vec::with_capacity(tiles.rows * tiles.cols);
    for ty in 0..tiles.rows {
        let (y0, y1) = tile_span(ty, tiles.rows, h);
        for tx in 0..tiles.cols {
            let (x0, x1) = tile_span(tx, tiles.cols, w);
            let mut hist = vec![0.0; bins];
            for y in y0..y1 {
                for &v in &data[y * w + x0..y * w + x1] {
                    hist[bin_of(v, bins)] += 1.0;
                }
            }
            let total = ((y1 - y0) * (x1 - x0)) as f64;
            let limit = clip * total;
            let mut excess = 0.0;
            for b in hist.iter_mut() {
                if *b > limit {
                    excess += *b - limit;
                    *b = limit;
                }
            }
            let share = excess / bins as f64;
            hist.iter_mut().for_each(|b| *b += share);
            maps.push(cdf_mapping(&hist, total));
        }
    }

    let centers = |n: usize, len: usize| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let (a, b) = tile_span(i, n, len);
                (a + b - 1) as f64 / 2.0
            })
            .collect()
    };
    let cx = centers(tiles.cols, w);
    let cy = centers(tiles.rows, h);
    let xn: Vec<_> = (0..w).map(|x| axis_neighbours(x, &cx)).collect();

    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let (r0, r1, fy) = axis_neighbours(y, &cy);
        for (x, &(c0, c1, fx)) in xn.iter().enumerate() {
            let b = bin_of(data[y * w + x], bins);
            let m = |r: usize, c: usize| maps[r * tiles.cols + c][b];
            let top = m(r0, c0) * (1.0 - fx) + m(r0, c1) * fx;
            let bottom = m(r1, c0) * (1.0 - fx) + m(r1, c1) * fx;
            out.push((top * (1.0 - fy) + bottom * fy).clamp(0.0, 1.0));
        }
    }
    Ok(GrayImage::from_raw(w, h, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hist_eq_three_levels() {
        let mut data = vec![0.1; 10];
        data.extend(vec![0.5; 20]);
        data.extend(vec![0.9; 70]);
        let img = GrayImage::new(10, 10, data).unwrap();
        let out = hist_eq(&img, 128);
        let expect = |v: f64| {
            if v == 0.1 {
                0.1
            } else if v == 0.5 {
                0.3
            } else {
                1.0
            }
        };
        for (o, i) in out.data().iter().zip(img.data()) {
            assert!((o - expect(*i)).abs() < 1e-12);
        }
    }

    #[test]
    fn hist_eq_uniform_is_near_fixed_point() {
        let bins = 128;
        let img = GrayImage::from_fn(bins, 4, |x, _| (x as f64 + 0.5) / bins as f64);
        let out = hist_eq(&img, bins);
        for (o, i) in out.data().iter().zip(img.data()) {
            assert!((o - i).abs() <= 1.0 / bins as f64);
        }
    }

    #[test]
    fn hist_eq_constant_is_constant() {
        let out = hist_eq(&GrayImage::filled(5, 7, 0.3), 128);
        let first = out.data()[0];
        assert!(out.data().iter().all(|&v| v == first));
    }

    #[test]
    fn clahe_two_valued_single_tile_no_clip() {
        let img = GrayImage::from_fn(8, 8, |x, _| if x < 4 { 0.2 } else { 0.8 });
        let out = clahe(&img, TileGrid::new(1, 1), 128, 1.0).unwrap();
        for (o, i) in out.data().iter().zip(img.data()) {
            let expect = if *i == 0.2 { 0.5 } else { 1.0 };
            assert!((o - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn clahe_constant_stays_constant_with_default_clip() {
        let bins = 128;
        for &v in &[0.1, 0.5, 0.77] {
            let out = clahe(&GrayImage::filled(64, 64, v), TileGrid::default(), bins, 0.01).unwrap();
            let first = out.data()[0];
            assert!(out.data().iter().all(|&o| (o - first).abs() < 1e-12));
            assert!((first - v).abs() <= 2.0 / bins as f64, "{v} -> {first}");
        }
    }

    #[test]
    fn clahe_rejects_small_images() {
        let img = GrayImage::filled(7, 20, 0.5);
        assert!(matches!(clahe(&img, TileGrid::default(), 128, 0.01), Err(PipelineError::TileTooSmall { .. })));
    }

    #[test]
    fn axis_neighbours_clamp_outside_centres() {
        let c = [1.5, 5.5];
        assert_eq!(axis_neighbours(0, &c), (0, 0, 0.0));
        assert_eq!(axis_neighbours(7, &c), (1, 1, 0.0));
        assert_eq!(axis_neighbours(3, &c), (0, 1, 0.375));
    }
}
