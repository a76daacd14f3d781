//! Depth-derived masks and motion blur.

use std::path::Path;

use image::{GrayImage, ImageBuffer, Luma, RgbImage};

use super::RendererError;

/// Normalised depth, 0 at the near bound and 1 at the far bound/background.
pub type DepthMap = ImageBuffer<Luma<f32>, Vec<f32>>;

pub const DEFAULT_MASK_EPSILON: f32 = 1e-3;

/// 255 where `depth < background_level - epsilon`, 0 elsewhere.
pub fn depth_to_mask(depth: &DepthMap, background_level: f32, epsilon: f32) -> GrayImage {
    let cut = background_level - epsilon;
    GrayImage::from_fn(depth.width(), depth.height(), |x, y| {
        Luma([if depth.get_pixel(x, y)[0] < cut { 255 } else { 0 }])
    })
}

pub fn save_depth_png(depth: &DepthMap, path: &Path) -> Result<(), RendererError> {
    let quantized: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(depth.width(), depth.height(), |x, y| {
        Luma([(depth.get_pixel(x, y)[0].clamp(0.0, 1.0) * 65535.0).round() as u16])
    });
    crate::imageio::save_png(&quantized, path).map_err(|e| RendererError::image(path, e))
}

pub fn load_depth_png(path: &Path) -> Result<DepthMap, RendererError> {
    let img = image::open(path).map_err(|e| RendererError::image(path, e))?.to_luma16();
    Ok(DepthMap::from_fn(img.width(), img.height(), |x, y| {
        Luma([f32::from(img.get_pixel(x, y)[0]) / 65535.0])
    }))
}

/// Sparse line kernel. Offsets are relative to the kernel centre.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionKernel {
    pub radius_x: u32,
    pub radius_y: u32,
    pub taps: Vec<(i32, i32, f64)>,
}

impl MotionKernel {
    pub fn identity() -> Self {
        Self {
            radius_x: 0,
            radius_y: 0,
            taps: vec![(0, 0, 1.0)],
        }
    }

    pub fn width(&self) -> u32 {
        2 * self.radius_x + 1
    }

    pub fn height(&self) -> u32 {
        2 * self.radius_y + 1
    }

    /// Row-major dense weights.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let mut rows = vec![vec![0.0; self.width() as usize]; self.height() as usize];
        for &(dx, dy, w) in &self.taps {
            rows[(dy + self.radius_y as i32) as usize][(dx + self.radius_x as i32) as usize] += w;
        }
        rows
    }

    pub fn sum(&self) -> f64 {
        self.taps.iter().map(|t| t.2).sum()
    }
}

/// Uniform-weight line of `length` pixels through the centre at `angle`
/// radians, counter-clockwise from +x with image y pointing down.
pub fn make_motion_kernel(length: u32, angle: f64) -> MotionKernel {
    let length = length.max(1);
    let half = f64::from(length - 1) / 2.0;
    let (sin, cos) = angle.sin_cos();
    // Dense sampling along the segment; rounding is symmetric about zero so
    // the kernel is point-symmetric.
    let steps = 4 * length as usize;
    let mut cells: Vec<(i32, i32)> = (0..=steps)
        .map(|i| {
            let t = -half + 2.0 * half * i as f64 / steps as f64;
            ((t * cos).round() as i32, (-t * sin).round() as i32)
        })
        .collect();
    cells.sort_unstable();
    cells.dedup();
    let w = 1.0 / cells.len() as f64;
    let radius_x = cells.iter().map(|c| c.0.unsigned_abs()).max().unwrap_or(0);
    let radius_y = cells.iter().map(|c| c.1.unsigned_abs()).max().unwrap_or(0);
    MotionKernel {
        radius_x,
        radius_y,
        taps: cells.into_iter().map(|(dx, dy)| (dx, dy, w)).collect(),
    }
}

/// 2D convolution of one plane with edge-replicate padding:
/// `out(x, y) = Σ k(dx, dy) · in(x - dx, y - dy)`.
pub fn convolve_plane(src: &[f32], width: u32, height: u32, kernel: &MotionKernel) -> Vec<f32> {
    let (w, h) = (width as i64, height as i64);
    assert_eq!(src.len() as i64, w * h, "plane size mismatch");
    let mut out = vec![0.0f32; src.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0f64;
            for &(dx, dy, k) in &kernel.taps {
                let sx = (x - i64::from(dx)).clamp(0, w - 1);
                let sy = (y - i64::from(dy)).clamp(0, h - 1);
                acc += k * f64::from(src[(sy * w + sx) as usize]);
            }
            out[(y * w + x) as usize] = acc as f32;
        }
    }
    out
}

pub fn apply_motion_blur(image: &RgbImage, kernel: &MotionKernel) -> RgbImage {
    let (w, h) = image.dimensions();
    let mut out = RgbImage::new(w, h);
    for c in 0..3 {
        let plane: Vec<f32> = image.pixels().map(|p| f32::from(p[c])).collect();
        let blurred = convolve_plane(&plane, w, h, kernel);
        for (p, v) in out.pixels_mut().zip(blurred) {
            p[c] = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn kernel_examples() {
        assert_eq!(make_motion_kernel(1, 0.7).dense(), vec![vec![1.0]]);
        assert_eq!(make_motion_kernel(5, 0.0).dense(), vec![vec![0.2; 5]]);
        let vertical = make_motion_kernel(5, FRAC_PI_2);
        assert_eq!((vertical.width(), vertical.height()), (1, 5));
        let diagonal = make_motion_kernel(7, FRAC_PI_4);
        assert_eq!(diagonal.width(), diagonal.height());
        for len in 1..40 {
            for a in 0..24 {
                let k = make_motion_kernel(len, f64::from(a) * 0.27);
                assert!((k.sum() - 1.0).abs() < 1e-9);
                // Point symmetry.
                for &(dx, dy, _) in &k.taps {
                    assert!(k.taps.iter().any(|t| t.0 == -dx && t.1 == -dy));
                }
            }
        }
    }

    #[test]
    fn mask_threshold_is_strict() {
        let mut depth = DepthMap::from_pixel(9, 9, Luma([1.0]));
        assert!(depth_to_mask(&depth, 1.0, DEFAULT_MASK_EPSILON).pixels().all(|p| p[0] == 0));
        depth.put_pixel(0, 0, Luma([1.0 - DEFAULT_MASK_EPSILON]));
        depth.put_pixel(1, 0, Luma([0.4]));
        let mask = depth_to_mask(&depth, 1.0, DEFAULT_MASK_EPSILON);
        assert_eq!(mask.get_pixel(0, 0)[0], 0);
        assert_eq!(mask.get_pixel(1, 0)[0], 255);
        assert_eq!(mask.pixels().filter(|p| p[0] == 255).count(), 1);
    }

    #[test]
    fn blur_identity_and_constant() {
        let img = RgbImage::from_fn(17, 11, |x, y| Rgb([(x * 13) as u8, (y * 21) as u8, (x * y) as u8]));
        assert_eq!(apply_motion_blur(&img, &MotionKernel::identity()), img);
        let flat = RgbImage::from_pixel(20, 20, Rgb([90, 180, 33]));
        assert_eq!(apply_motion_blur(&flat, &make_motion_kernel(9, 1.1)), flat);
    }

    #[test]
    fn depth_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.png");
        let depth = DepthMap::from_fn(5, 4, |x, y| Luma([(x + 5 * y) as f32 / 19.0]));
        save_depth_png(&depth, &path).unwrap();
        let back = load_depth_png(&path).unwrap();
        for (a, b) in depth.pixels().zip(back.pixels()) {
            assert!((a[0] - b[0]).abs() <= 0.5 / 65535.0 + 1e-7);
        }
    }
}
