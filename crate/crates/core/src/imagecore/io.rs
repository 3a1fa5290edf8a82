use std::path::Path;

use image::{DynamicImage, ImageFormat};

use super::{BinaryImage, GrayImage, ImageError, RgbImage};

/// Decodes a PNG, JPEG or BMP image from memory, dropping any alpha channel.
pub fn decode_image(bytes: &[u8]) -> Result<RgbImage, ImageError> {
    let format = image::guess_format(bytes).map_err(|_| ImageError::UnsupportedFormat)?;
    if !matches!(format, ImageFormat::Png | ImageFormat::Jpeg | ImageFormat::Bmp) {
        return Err(ImageError::UnsupportedFormat);
    }
    let decoded =
        image::load_from_memory_with_format(bytes, format).map_err(|e| ImageError::UnreadableFile(e.to_string()))?;
    let rgb = decoded.to_rgb8();
    let (w, h) = rgb.dimensions();
    RgbImage::new(w as usize, h as usize, rgb.into_raw())
}

pub fn load_image(path: impl AsRef<Path>) -> Result<RgbImage, ImageError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| ImageError::UnreadableFile(format!("{}: {e}", path.display())))?;
    decode_image(&bytes)
}

/// Encodes an RGB image as an 8-bit PNG.
pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>, ImageError> {
    let buf = image::RgbImage::from_raw(img.width() as u32, img.height() as u32, img.data().to_vec())
        .expect("buffer length matches dimensions");
    write_png(DynamicImage::ImageRgb8(buf))
}

pub fn encode_gray_png(img: &GrayImage) -> Result<Vec<u8>, ImageError> {
    let buf = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, img.to_u8())
        .expect("buffer length matches dimensions");
    write_png(DynamicImage::ImageLuma8(buf))
}

/// Foreground is written as 255, background as 0.
pub fn encode_binary_png(img: &BinaryImage) -> Result<Vec<u8>, ImageError> {
    let raw = img.data().iter().map(|&b| if b { 255 } else { 0 }).collect();
    let buf = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, raw)
        .expect("buffer length matches dimensions");
    write_png(DynamicImage::ImageLuma8(buf))
}

fn write_png(img: DynamicImage) -> Result<Vec<u8>, ImageError> {
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png).map_err(|e| ImageError::Write(e.to_string()))?;
    Ok(out.into_inner())
}

pub fn save_png(img: &RgbImage, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let path = path.as_ref();
    std::fs::write(path, encode_png(img)?).map_err(|e| ImageError::Write(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip() {
        let img = RgbImage::from_fn(3, 2, |x, y| [(x * 80) as u8, (y * 100) as u8, 7]);
        let bytes = encode_png(&img).unwrap();
        assert_eq!(decode_image(&bytes).unwrap(), img);
    }

    #[test]
    fn solid_red_png_decodes() {
        let img = RgbImage::filled(2, 2, [255, 0, 0]);
        let decoded = decode_image(&encode_png(&img).unwrap()).unwrap();
        assert!(decoded.pixels().all(|p| p == [255, 0, 0]));
    }

    #[test]
    fn alpha_is_dropped() {
        let rgba = image::RgbaImage::from_pixel(2, 1, image::Rgba([10, 20, 30, 0]));
        let mut buf = std::io::Cursor::new(Vec::new());
        DynamicImage::ImageRgba8(rgba).write_to(&mut buf, ImageFormat::Png).unwrap();
        let decoded = decode_image(&buf.into_inner()).unwrap();
        assert_eq!(decoded.pixel(1, 0), [10, 20, 30]);
    }

    #[test]
    fn bmp_decodes() {
        let rgb = image::RgbImage::from_pixel(765, 573, image::Rgb([120, 80, 60]));
        let mut buf = std::io::Cursor::new(Vec::new());
        DynamicImage::ImageRgb8(rgb).write_to(&mut buf, ImageFormat::Bmp).unwrap();
        let decoded = decode_image(&buf.into_inner()).unwrap();
        assert_eq!((decoded.width(), decoded.height()), (765, 573));
    }

    #[test]
    fn truncated_file_is_unreadable() {
        let img = RgbImage::filled(16, 16, [1, 2, 3]);
        let bytes = encode_png(&img).unwrap();
        let err = decode_image(&bytes[..bytes.len() / 2]).unwrap_err();
        assert!(matches!(err, ImageError::UnreadableFile(_)));
    }

    #[test]
    fn unknown_bytes_are_unsupported() {
        assert!(matches!(decode_image(b"not an image"), Err(ImageError::UnsupportedFormat)));
    }

    #[test]
    fn missing_file_is_unreadable() {
        assert!(matches!(load_image("/nonexistent/lesion.bmp"), Err(ImageError::UnreadableFile(_))));
    }
}
