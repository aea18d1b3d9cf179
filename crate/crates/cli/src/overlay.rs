//! Slice rendering: grayscale background, contour overlays, boxes, text.

use crate::font;
use image::{Rgb, RgbImage};
use proseg_core::{BBox, Image2, Mask2};

pub const GREEN: Rgb<u8> = Rgb([60, 220, 60]);
pub const RED: Rgb<u8> = Rgb([230, 50, 50]);
pub const YELLOW: Rgb<u8> = Rgb([240, 220, 60]);

/// Min-max scales a slice to 8-bit grayscale. Constant slices render black.
pub fn slice_to_rgb(img: &Image2) -> RgbImage {
    let lo = img.data.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = img.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut out = RgbImage::new(img.width as u32, img.height as u32);
    for y in 0..img.height {
        for x in 0..img.width {
            let v = if span > 0.0 {
                ((img.get(x, y) - lo) / span * 255.0).round() as u8
            } else {
                0
            };
            out.put_pixel(x as u32, y as u32, Rgb([v, v, v]));
        }
    }
    out
}

/// True for foreground pixels with a 4-neighbor outside the mask (or on the
/// image border).
pub fn is_contour(mask: &Mask2, x: usize, y: usize) -> bool {
    if mask.get(x, y) != 1 {
        return false;
    }
    let neighbors = [
        (x as isize - 1, y as isize),
        (x as isize + 1, y as isize),
        (x as isize, y as isize - 1),
        (x as isize, y as isize + 1),
    ];
    neighbors.iter().any(|&(nx, ny)| {
        nx < 0
            || ny < 0
            || nx >= mask.width as isize
            || ny >= mask.height as isize
            || mask.get(nx as usize, ny as usize) == 0
    })
}

pub fn draw_contour(canvas: &mut RgbImage, mask: &Mask2, color: Rgb<u8>) {
    for y in 0..mask.height {
        for x in 0..mask.width {
            if is_contour(mask, x, y) {
                canvas.put_pixel(x as u32, y as u32, color);
            }
        }
    }
}

pub fn draw_box(canvas: &mut RgbImage, bbox: &BBox, color: Rgb<u8>) {
    let (w, h) = (canvas.width() as usize, canvas.height() as usize);
    let x1 = bbox.x1.min(w);
    let y1 = bbox.y1.min(h);
    for x in bbox.x0..x1 {
        canvas.put_pixel(x as u32, bbox.y0 as u32, color);
        canvas.put_pixel(x as u32, (y1 - 1) as u32, color);
    }
    for y in bbox.y0..y1 {
        canvas.put_pixel(bbox.x0 as u32, y as u32, color);
        canvas.put_pixel((x1 - 1) as u32, y as u32, color);
    }
}

pub fn draw_label(canvas: &mut RgbImage, text: &str, x: usize, y: usize, color: Rgb<u8>) {
    let (w, h) = (canvas.width() as usize, canvas.height() as usize);
    font::draw_text(text, x, y, 1, |px, py| {
        if px < w && py < h {
            canvas.put_pixel(px as u32, py as u32, color);
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contour_of_solid_block_is_its_ring() {
        let m = Mask2::from_fn(8, 8, |x, y| (2..6).contains(&x) && (2..6).contains(&y));
        let mut ring = 0;
        for y in 0..8 {
            for x in 0..8 {
                if is_contour(&m, x, y) {
                    ring += 1;
                    assert!(x == 2 || x == 5 || y == 2 || y == 5);
                }
            }
        }
        assert_eq!(ring, 12);
    }

    #[test]
    fn full_mask_contours_along_border() {
        let m = Mask2::from_fn(6, 6, |_, _| true);
        for y in 0..6 {
            for x in 0..6 {
                let border = x == 0 || y == 0 || x == 5 || y == 5;
                assert_eq!(is_contour(&m, x, y), border);
            }
        }
    }
}
