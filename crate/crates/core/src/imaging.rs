//! PNG encoding for slice and overlay previews.

use crate::annotation::RgbaImage;
use crate::volume::SliceImage;

fn encode(width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().expect("in-memory PNG header");
        w.write_image_data(data).expect("in-memory PNG data");
    }
    out
}

/// 8-bit grayscale PNG of a slice.
pub fn slice_png(slice: &SliceImage) -> Vec<u8> {
    encode(slice.width, slice.height, png::ColorType::Grayscale, &slice.pixels)
}

/// 8-bit grayscale PNG of raw row-major pixels.
pub fn gray_png(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), width * height, "pixel buffer does not match {width}x{height}");
    encode(width, height, png::ColorType::Grayscale, pixels)
}

pub fn rgba_png(image: &RgbaImage) -> Vec<u8> {
    encode(image.width, image.height, png::ColorType::Rgba, &image.data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_round_trip() {
        let px: Vec<u8> = (0..12).map(|i| i * 20).collect();
        let bytes = gray_png(4, 3, &px);
        let mut reader = png::Decoder::new(std::io::Cursor::new(bytes)).read_info().unwrap();
        let mut buf = vec![0; reader.output_buffer_size().unwrap()];
        let info = reader.next_frame(&mut buf).unwrap();
        assert_eq!((info.width, info.height), (4, 3));
        assert_eq!(&buf[..12], &px[..]);
    }
}
