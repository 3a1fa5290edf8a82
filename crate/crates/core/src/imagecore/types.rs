use super::ImageError;

/// 8-bit RGB raster, row-major, interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions);
        }
        if data.len() != width * height * 3 {
            return Err(ImageError::LengthMismatch { expected: width * height * 3, actual: data.len() });
        }
        Ok(Self { width, height, data })
    }

    /// Image filled with a single colour.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self { width, height, data }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }
}

/// Double-precision image with channel-planar storage.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl PlanarImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions);
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::ChannelCount(channels));
        }
        if data.len() != width * height * channels {
            return Err(ImageError::LengthMismatch { expected: width * height * channels, actual: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(ImageError::NonFinite);
        }
        Ok(Self { width, height, channels, data })
    }

    /// Builds a 3-channel image from three equally sized planes.
    pub fn from_planes(width: usize, height: usize, planes: [Vec<f64>; 3]) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(width * height * 3);
        for p in planes {
            if p.len() != width * height {
                return Err(ImageError::LengthMismatch { expected: width * height, actual: p.len() });
            }
            data.extend(p);
        }
        Self::new(width, height, 3, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub(crate) fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.width * self.height;
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// Single-channel double image with every value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions);
        }
        if data.len() != width * height {
            return Err(ImageError::LengthMismatch { expected: width * height, actual: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(ImageError::NonFinite);
        }
        if data.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(ImageError::OutOfRange);
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        assert!((0.0..=1.0).contains(&value), "gray value out of range");
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self { width, height, data }
    }

    /// Builds an image from values that are already known to be in range.
    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        debug_assert!(data.iter().all(|v| (0.0..=1.0).contains(v)));
        Self { width, height, data }
    }

    /// Luma of an RGB image (Rec. 601 weights), scaled to `[0, 1]`.
    pub fn from_rgb(img: &RgbImage) -> Self {
        let data = img
            .pixels()
            .map(|[r, g, b]| {
                ((0.298_936_021 * r as f64 + 0.587_043_074 * g as f64 + 0.114_020_904 * b as f64) / 255.0)
                    .clamp(0.0, 1.0)
            })
            .collect();
        Self { width: img.width(), height: img.height(), data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Quantizes to 8 bits by rounding `v * 255`.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| (v * 255.0).round() as u8).collect()
    }
}

/// Boolean raster; `true` marks foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions);
        }
        if data.len() != width * height {
            return Err(ImageError::LengthMismatch { expected: width * height, actual: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self { width, height, data: vec![false; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [bool] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&v| v)
    }
}

/// Per-channel multiplicative weights applied after colour conversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelWeights([f64; 3]);

impl ChannelWeights {
    pub fn new(w: [f64; 3]) -> Result<Self, ImageError> {
        if w.iter().any(|v| !v.is_finite()) {
            return Err(ImageError::NonFinite);
        }
        if w.iter().all(|&v| v == 0.0) {
            return Err(ImageError::ZeroWeights);
        }
        Ok(Self(w))
    }

    pub fn get(&self) -> [f64; 3] {
        self.0
    }
}

impl Default for ChannelWeights {
    fn default() -> Self {
        Self([1.0, 0.0, 0.0])
    }
}
