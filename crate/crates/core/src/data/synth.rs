//! Synthetic pigment-network images with known ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::imagecore::{BinaryImage, RgbImage};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub width: usize,
    pub height: usize,
    /// Distance between grid lines, pixels.
    pub spacing: usize,
    pub line_width: usize,
    /// 0 leaves lines invisible, 1 draws them black.
    pub darkness: f64,
    pub background: [u8; 3],
    /// Node jitter as a fraction of half the spacing.
    pub irregularity: f64,
    /// Standard deviation of per-pixel background noise, in 8-bit levels.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            width: 512,
            height: 512,
            spacing: 24,
            line_width: 3,
            darkness: 0.55,
            background: [205, 160, 125],
            irregularity: 0.3,
            noise: 3.0,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), &'static str> {
        if self.width == 0 || self.height == 0 {
            return Err("image dimensions must be positive");
        }
        if self.line_width == 0 || self.spacing <= self.line_width {
            return Err("need spacing > line width >= 1");
        }
        if !(0.0..=1.0).contains(&self.darkness) || !(0.0..=1.0).contains(&self.irregularity) {
            return Err("darkness and irregularity must lie in [0, 1]");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err("noise must be a finite non-negative level");
        }
        Ok(())
    }
}

/// Squared distance from `(px, py)` to segment `a-b`.
fn dist2_to_segment(px: f64, py: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    (px - cx).powi(2) + (py - cy).powi(2)
}

/// Background texture only: the tint plus seeded noise.
pub fn synth_background(p: &SynthParams) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed ^ 0x6e6f_6973_6500);
    let noise = Normal::new(0.0, p.noise.max(f64::MIN_POSITIVE)).expect("valid normal");
    RgbImage::from_fn(p.width, p.height, |_, _| {
        let n = if p.noise > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        p.background.map(|c| (c as f64 + n).round().clamp(0.0, 255.0) as u8)
    })
}

/// Light background crossed by a jittered dark grid, and the grid mask.
pub fn synth_network_image(p: &SynthParams) -> (RgbImage, BinaryImage) {
    p.validate().expect("invalid synthetic parameters");
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let s = p.spacing as f64;
    let half = s / 2.0;
    let offset = (p.spacing / 2) as f64;
    // one extra node on each side so lines run off the image edges
    let cols = p.width / p.spacing + 3;
    let rows = p.height / p.spacing + 3;
    let mut nodes = vec![(0.0, 0.0); cols * rows];
    for j in 0..rows {
        for i in 0..cols {
            let base = (offset + (i as f64 - 1.0) * s, offset + (j as f64 - 1.0) * s);
            let jitter = p.irregularity * half;
            let (jx, jy) = if jitter > 0.0 {
                (rng.random_range(-jitter..=jitter), rng.random_range(-jitter..=jitter))
            } else {
                (0.0, 0.0)
            };
            nodes[j * cols + i] = (base.0 + jx, base.1 + jy);
        }
    }

    let mut mask = BinaryImage::zeros(p.width, p.height);
    let r = p.line_width as f64 / 2.0;
    let r2 = r * r;
    let mut draw = |a: (f64, f64), b: (f64, f64)| {
        let x0 = (a.0.min(b.0) - r).floor().max(0.0) as usize;
        let x1 = ((a.0.max(b.0) + r).ceil().max(0.0) as usize).min(p.width - 1);
        let y0 = (a.1.min(b.1) - r).floor().max(0.0) as usize;
        let y1 = ((a.1.max(b.1) + r).ceil().max(0.0) as usize).min(p.height - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                if dist2_to_segment(x as f64, y as f64, a, b) < r2 {
                    mask.set(x, y, true);
                }
            }
        }
    };
    for j in 0..rows {
        for i in 0..cols {
            let a = nodes[j * cols + i];
            if i + 1 < cols {
                draw(a, nodes[j * cols + i + 1]);
            }
            if j + 1 < rows {
                draw(a, nodes[(j + 1) * cols + i]);
            }
        }
    }

    let mut img = synth_background(p);
    for y in 0..p.height {
        for x in 0..p.width {
            if mask.get(x, y) {
                let px = img.pixel(x, y).map(|c| (c as f64 * (1.0 - p.darkness)).round() as u8);
                img.set_pixel(x, y, px);
            }
        }
    }
    (img, mask)
}
