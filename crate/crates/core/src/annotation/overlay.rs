use crate::error::AnnotationError;
use crate::volume::{SliceImage, BACKGROUND};

/// 8-bit RGBA raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbaImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbaImage {
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 4] {
        let i = 4 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2], self.data[i + 3]]
    }
}

/// Blends `color` over foreground pixels of the grayscale slice.
///
/// Background pixels become opaque gray; foreground pixels get
/// `(1 - alpha) * gray + alpha * color` per channel, rounded half up.
pub fn composite_overlay(
    slice: &SliceImage,
    mask_slice: &[u8],
    color: [u8; 3],
    alpha: f64,
) -> Result<RgbaImage, AnnotationError> {
    if mask_slice.len() != slice.pixels.len() {
        return Err(AnnotationError::ShapeMismatch {
            slice: (slice.width, slice.height),
            mask: (mask_slice.len(), 1),
        });
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(AnnotationError::InvalidAlpha(alpha));
    }
    let mut data = Vec::with_capacity(slice.pixels.len() * 4);
    for (&gray, &label) in slice.pixels.iter().zip(mask_slice) {
        if label == BACKGROUND {
            data.extend_from_slice(&[gray, gray, gray, 255]);
        } else {
            let g = f64::from(gray);
            for c in color {
                let v = (1.0 - alpha) * g + alpha * f64::from(c);
                data.push((v + 0.5).floor().clamp(0.0, 255.0) as u8);
            }
            data.push(255);
        }
    }
    Ok(RgbaImage {
        width: slice.width,
        height: slice.height,
        data,
    })
}
