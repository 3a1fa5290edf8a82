use serde::{Deserialize, Serialize};

use super::BofError;
use crate::imagecore::GrayImage;

pub const DESCRIPTOR_LEN: usize = 64;
pub const MIN_IMAGE_SIDE: usize = 32;

pub type Descriptor = [f64; DESCRIPTOR_LEN];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub scale: f64,
    pub response: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DescriptorSet {
    pub keypoints: Vec<Keypoint>,
    pub descriptors: Vec<Descriptor>,
}

impl DescriptorSet {
    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfParams {
    pub octaves: usize,
    /// Minimum Hessian determinant on [0, 1] intensities.
    pub threshold: f64,
    /// Strongest responses kept per image.
    pub max_keypoints: usize,
}

impl Default for SurfParams {
    fn default() -> Self {
        Self { octaves: 3, threshold: 1e-3, max_keypoints: 400 }
    }
}

impl SurfParams {
    pub fn validate(&self) -> Result<(), BofError> {
        if !(1..=4).contains(&self.octaves) {
            return Err(BofError::InvalidParameter("octaves must be 1..=4"));
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(BofError::InvalidParameter("detector threshold must be positive"));
        }
        if self.max_keypoints == 0 {
            return Err(BofError::InvalidParameter("max_keypoints must be positive"));
        }
        Ok(())
    }
}

/// Summed-area table with one row and column of zero padding.
struct Integral {
    w: usize,
    h: usize,
    table: Vec<f64>,
}

impl Integral {
    fn new(img: &GrayImage) -> Self {
        let (w, h) = (img.width(), img.height());
        let mut table = vec![0.0; (w + 1) * (h + 1)];
        for y in 0..h {
            let mut row = 0.0;
            for x in 0..w {
                row += img.get(x, y);
                table[(y + 1) * (w + 1) + x + 1] = table[y * (w + 1) + x + 1] + row;
            }
        }
        Self { w, h, table }
    }

    /// Sum over the inclusive rectangle `[x0, x1] x [y0, y1]`, clipped to the image.
    fn sum(&self, x0: isize, y0: isize, x1: isize, y1: isize) -> f64 {
        let cx = |v: isize| v.clamp(0, self.w as isize) as usize;
        let cy = |v: isize| v.clamp(0, self.h as isize) as usize;
        let (a, b) = (cx(x0), cx(x1 + 1));
        let (c, d) = (cy(y0), cy(y1 + 1));
        if a >= b || c >= d {
            return 0.0;
        }
        let at = |x: usize, y: usize| self.table[y * (self.w + 1) + x];
        at(b, d) - at(a, d) - at(b, c) + at(a, c)
    }
}

/// Box-filter approximation of the Hessian determinant for filter size
/// `size` (a multiple of 3 with odd lobe) centred on pixel `(x, y)`.
fn hessian_det(ii: &Integral, x: isize, y: isize, size: usize) -> f64 {
    let l = (size / 3) as isize;
    let half_long = (3 * l - 1) / 2;
    let half_short = l - 1;
    let half_band = (l - 1) / 2;
    let dyy = ii.sum(x - half_short, y - half_long, x + half_short, y + half_long)
        - 3.0 * ii.sum(x - half_short, y - half_band, x + half_short, y + half_band);
    let dxx = ii.sum(x - half_long, y - half_short, x + half_long, y + half_short)
        - 3.0 * ii.sum(x - half_band, y - half_short, x + half_band, y + half_short);
    let dxy = ii.sum(x - l, y - l, x - 1, y - 1) + ii.sum(x + 1, y + 1, x + l, y + l)
        - ii.sum(x + 1, y - l, x + l, y - 1)
        - ii.sum(x - l, y + 1, x - 1, y + l);
    let area = (size * size) as f64;
    let (dxx, dyy, dxy) = (dxx / area, dyy / area, dxy / area);
    dxx * dyy - (0.9 * dxy).powi(2)
}

/// Filter sizes of one octave: 9, 15, 21, 27 at the first, doubling the
/// increment each octave.
pub fn octave_filter_sizes(octave: usize) -> [usize; 4] {
    let step = 1usize << (octave + 1);
    [1, 2, 3, 4].map(|i| 3 * (step * i + 1))
}

struct ResponseLayer {
    size: usize,
    values: Vec<f64>,
}

fn detect(ii: &Integral, params: &SurfParams) -> Vec<Keypoint> {
    let mut found = Vec::new();
    for octave in 0..params.octaves {
        let step = 1usize << octave;
        let (gw, gh) = (ii.w.div_ceil(step), ii.h.div_ceil(step));
        let layers: Vec<ResponseLayer> = octave_filter_sizes(octave)
            .iter()
            .map(|&size| {
                let margin = size / 2 + 1;
                let mut values = vec![0.0; gw * gh];
                for gy in 0..gh {
                    for gx in 0..gw {
                        let (x, y) = (gx * step, gy * step);
                        // only where the whole filter lies inside the image
                        if x >= margin && y >= margin && x + margin <= ii.w && y + margin <= ii.h {
                            values[gy * gw + gx] = hessian_det(ii, x as isize, y as isize, size);
                        }
                    }
                }
                ResponseLayer { size, values }
            })
            .collect();
        for li in 1..layers.len() - 1 {
            for gy in 1..gh.saturating_sub(1) {
                for gx in 1..gw.saturating_sub(1) {
                    let v = layers[li].values[gy * gw + gx];
                    if v <= params.threshold {
                        continue;
                    }
                    let is_max = (li - 1..=li + 1).all(|lj| {
                        (gy - 1..=gy + 1).all(|ny| {
                            (gx - 1..=gx + 1)
                                .all(|nx| (lj == li && ny == gy && nx == gx) || layers[lj].values[ny * gw + nx] < v)
                        })
                    });
                    if is_max {
                        found.push(Keypoint {
                            x: (gx * step) as f64,
                            y: (gy * step) as f64,
                            scale: 1.2 * layers[li].size as f64 / 9.0,
                            response: v,
                        });
                    }
                }
            }
        }
    }
    found.sort_by(|a, b| {
        b.response
            .total_cmp(&a.response)
            .then(a.y.total_cmp(&b.y))
            .then(a.x.total_cmp(&b.x))
            .then(a.scale.total_cmp(&b.scale))
    });
    found.truncate(params.max_keypoints);
    found
}

/// Upright descriptor: Haar responses over a 20s window split into 4x4
/// cells, each contributing `(sum dx, sum |dx|, sum dy, sum |dy|)`.
fn describe(ii: &Integral, kp: &Keypoint) -> Option<Descriptor> {
    let s = kp.scale;
    let haar = ((2.0 * s).round() as isize).max(2);
    let half = haar / 2;
    let sigma = 3.3 * s;
    let mut d = [0.0; DESCRIPTOR_LEN];
    for i in 0..20 {
        for j in 0..20 {
            let ox = (j as f64 - 10.0 + 0.5) * s;
            let oy = (i as f64 - 10.0 + 0.5) * s;
            let px = (kp.x + ox).round() as isize;
            let py = (kp.y + oy).round() as isize;
            let dx = ii.sum(px, py - half, px + half - 1, py + half - 1)
                - ii.sum(px - half, py - half, px - 1, py + half - 1);
            let dy = ii.sum(px - half, py, px + half - 1, py + half - 1)
                - ii.sum(px - half, py - half, px + half - 1, py - 1);
            let g = (-(ox * ox + oy * oy) / (2.0 * sigma * sigma)).exp();
            let (dx, dy) = (g * dx, g * dy);
            let cell = (i / 5) * 4 + j / 5;
            d[cell * 4] += dx;
            d[cell * 4 + 1] += dx.abs();
            d[cell * 4 + 2] += dy;
            d[cell * 4 + 3] += dy.abs();
        }
    }
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 1e-12) {
        return None;
    }
    d.iter_mut().for_each(|v| *v /= norm);
    Some(d)
}

/// Upright SURF-style keypoints and unit-norm 64-value descriptors.
pub fn detect_describe(img: &GrayImage, params: &SurfParams) -> Result<DescriptorSet, BofError> {
    params.validate()?;
    if img.width() < MIN_IMAGE_SIDE || img.height() < MIN_IMAGE_SIDE {
        return Err(BofError::TooSmallImage { width: img.width(), height: img.height() });
    }
    let ii = Integral::new(img);
    let mut out = DescriptorSet::default();
    for kp in detect(&ii, params) {
        if let Some(d) = describe(&ii, &kp) {
            out.keypoints.push(kp);
            out.descriptors.push(d);
        }
    }
    Ok(out)
}
