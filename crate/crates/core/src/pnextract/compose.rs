use super::PipelineError;
use crate::imagecore::{BinaryImage, GrayImage, RgbImage};

/// Image complement: `1 - m` for doubles, `255 - m` for bytes, logical
/// negation for masks.
pub trait Complement {
    fn complement(&self) -> Self;
}

impl Complement for BinaryImage {
    fn complement(&self) -> Self {
        let data = self.data().iter().map(|&v| !v).collect();
        BinaryImage::new(self.width(), self.height(), data).expect("same shape")
    }
}

impl Complement for GrayImage {
    fn complement(&self) -> Self {
        let data = self.data().iter().map(|&v| 1.0 - v).collect();
        GrayImage::from_raw(self.width(), self.height(), data)
    }
}

impl Complement for RgbImage {
    fn complement(&self) -> Self {
        let data = self.data().iter().map(|&v| 255 - v).collect();
        RgbImage::new(self.width(), self.height(), data).expect("same shape")
    }
}

pub fn complement<T: Complement>(img: &T) -> T {
    img.complement()
}

/// Source colours where the mask is set, `background` elsewhere.
pub fn colorize(mask: &BinaryImage, source: &RgbImage, background: [u8; 3]) -> Result<RgbImage, PipelineError> {
    if (mask.width(), mask.height()) != (source.width(), source.height()) {
        return Err(PipelineError::DimMismatch);
    }
    let mut data = Vec::with_capacity(source.data().len());
    for (&m, px) in mask.data().iter().zip(source.pixels()) {
        data.extend_from_slice(if m { &px } else { &background });
    }
    Ok(RgbImage::new(source.width(), source.height(), data).expect("same shape"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_values() {
        let g = GrayImage::new(1, 1, vec![0.25]).unwrap();
        assert_eq!(g.complement().data(), &[0.75]);
        let rgb = RgbImage::new(1, 1, vec![0, 10, 255]).unwrap();
        assert_eq!(rgb.complement().data(), &[255, 245, 0]);
        let b = BinaryImage::new(2, 1, vec![true, false]).unwrap();
        assert_eq!(b.complement().data(), &[false, true]);
    }

    #[test]
    fn colorize_extremes() {
        let src = RgbImage::from_fn(3, 3, |x, y| [x as u8, y as u8, 9]);
        let none = colorize(&BinaryImage::zeros(3, 3), &src, [255, 255, 255]).unwrap();
        assert!(none.pixels().all(|p| p == [255, 255, 255]));
        let all = colorize(&BinaryImage::from_fn(3, 3, |_, _| true), &src, [255, 255, 255]).unwrap();
        assert_eq!(all, src);
        assert!(colorize(&BinaryImage::zeros(2, 3), &src, [0; 3]).is_err());
    }
}
