//! Word image normalization and random geometric augmentation.
//!
//! Pixels are scaled to `[0, 1]` with 0 for background and 1 for ink.
//! Augmentation picks three fixed reference points in the middle of the
//! image, scales each of their coordinates by an independent factor drawn
//! from `U[0.8, 1.1]`, and warps the image with the affine map taking the
//! reference points to the scaled ones. Three correspondences determine an
//! affine map exactly (a homography with last row `[0, 0, 1]`), which covers
//! shear, rotation, translation, slant and scale.
//!
//! ```
//! use wordspot::augment::{warp_image, AffineTransform, WordImage};
//!
//! let img = WordImage::new(2, 3, vec![0.0, 1.0, 0.5, 0.25, 0.0, 1.0]).unwrap();
//! let shifted = warp_image(&img, &AffineTransform::translation(1.0, 0.0));
//! assert_eq!(shifted.pixels(), &[0.0, 0.0, 1.0, 0.0, 0.25, 0.0]);
//! ```

use image::GrayImage;
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Relative `(x, y)` positions of the augmentation reference points.
pub const REFERENCE_POINTS: [(f64, f64); 3] = [(0.35, 0.5), (0.65, 0.35), (0.65, 0.65)];
pub const SCALE_RANGE: (f64, f64) = (0.8, 1.1);
const MAX_ATTEMPTS: usize = 16;

/// Grayscale word image with ink = 1 and background = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct WordImage {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl WordImage {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::EmptyInput("word image"));
        }
        if pixels.len() != height * width {
            return Err(Error::shape(format!(
                "{} pixels for a {height}x{width} image",
                pixels.len()
            )));
        }
        if let Some(p) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Image(format!("pixel value {p} outside [0, 1]")));
        }
        Ok(Self { height, width, pixels })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// `1 x 1 x H x W` network input.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_image(self.height, self.width, self.pixels.clone()).expect("consistent shape")
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let s = t.shape();
        if s.n != 1 || s.c != 1 {
            return Err(Error::shape(format!("expected a 1x1xHxW tensor, got {s}")));
        }
        Self::new(s.h, s.w, t.data().to_vec())
    }

    /// 8-bit rendering in the document convention (dark ink on light paper).
    pub fn to_gray_image(&self) -> GrayImage {
        let raw = self
            .pixels
            .iter()
            .map(|&p| (255.0 - (p * 255.0).round()) as u8)
            .collect();
        GrayImage::from_raw(self.width as u32, self.height as u32, raw).expect("consistent shape")
    }
}

/// How ink is encoded in the raw 8-bit source.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum InkConvention {
    /// Scanned documents: dark ink on light paper, so values are inverted.
    #[default]
    DarkOnLight,
    /// Ink already bright on a dark background.
    LightOnDark,
}

pub fn normalize_pixels(raw: &GrayImage, convention: InkConvention) -> Result<WordImage> {
    let (w, h) = raw.dimensions();
    let pixels = raw
        .as_raw()
        .iter()
        .map(|&v| {
            let v = f64::from(v) / 255.0;
            match convention {
                InkConvention::DarkOnLight => 1.0 - v,
                InkConvention::LightOnDark => v,
            }
        })
        .collect();
    WordImage::new(h as usize, w as usize, pixels)
}

/// `x' = a*x + b*y + c`, `y' = d*x + e*y + f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTransform {
    pub matrix: [[f64; 3]; 2],
}

impl AffineTransform {
    pub fn identity() -> Self {
        Self {
            matrix: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        }
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Self {
            matrix: [[1.0, 0.0, dx], [0.0, 1.0, dy]],
        }
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let [r0, r1] = self.matrix;
        (r0[0] * x + r0[1] * y + r0[2], r1[0] * x + r1[1] * y + r1[2])
    }

    pub fn determinant(&self) -> f64 {
        self.matrix[0][0] * self.matrix[1][1] - self.matrix[0][1] * self.matrix[1][0]
    }

    pub fn inverse(&self) -> Result<Self> {
        let det = self.determinant();
        if det.abs() < 1e-12 {
            return Err(Error::DegenerateTransform(1));
        }
        let [[a, b, c], [d, e, f]] = self.matrix;
        let (ia, ib, id, ie) = (e / det, -b / det, -d / det, a / det);
        Ok(Self {
            matrix: [[ia, ib, -(ia * c + ib * f)], [id, ie, -(id * c + ie * f)]],
        })
    }

    /// The unique affine map sending each `src[i]` to `dst[i]`.
    pub fn from_points(src: [(f64, f64); 3], dst: [(f64, f64); 3]) -> Result<Self> {
        // Cramer's rule on [x y 1] * [a b c]^T = x' (and likewise for y').
        let det3 = |m: [[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let base = src.map(|(x, y)| [x, y, 1.0]);
        let det = det3(base);
        if det.abs() < 1e-12 {
            return Err(Error::DegenerateTransform(1));
        }
        let solve = |rhs: [f64; 3]| {
            let mut row = [0.0; 3];
            for (col, out) in row.iter_mut().enumerate() {
                let mut m = base;
                for i in 0..3 {
                    m[i][col] = rhs[i];
                }
                *out = det3(m) / det;
            }
            row
        };
        Ok(Self {
            matrix: [solve(dst.map(|p| p.0)), solve(dst.map(|p| p.1))],
        })
    }
}

/// Reference points in pixel coordinates for a `width x height` image.
pub fn reference_points(width: usize, height: usize) -> [(f64, f64); 3] {
    REFERENCE_POINTS.map(|(rx, ry)| (rx * width as f64, ry * height as f64))
}

fn triangle_area(p: [(f64, f64); 3]) -> f64 {
    0.5 * ((p[1].0 - p[0].0) * (p[2].1 - p[0].1) - (p[2].0 - p[0].0) * (p[1].1 - p[0].1))
}

/// Random augmentation transform for a `width x height` image.
pub fn sample_augmentation_transform<R: Rng + ?Sized>(
    width: usize,
    height: usize,
    rng: &mut R,
) -> Result<AffineTransform> {
    if width < 4 || height < 4 {
        return Err(Error::InvalidParameter(format!(
            "augmentation needs at least 4x4 pixels, got {width}x{height}"
        )));
    }
    let src = reference_points(width, height);
    let src_area = triangle_area(src).abs();
    for _ in 0..MAX_ATTEMPTS {
        let dst = src.map(|(x, y)| {
            (
                x * rng.random_range(SCALE_RANGE.0..=SCALE_RANGE.1),
                y * rng.random_range(SCALE_RANGE.0..=SCALE_RANGE.1),
            )
        });
        if triangle_area(dst).abs() > 1e-6 * src_area {
            return AffineTransform::from_points(src, dst);
        }
    }
    Err(Error::DegenerateTransform(MAX_ATTEMPTS))
}

fn bilinear(image: &WordImage, x: f64, y: f64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let px = |xi: f64, yi: f64| {
        if xi < 0.0 || yi < 0.0 || xi >= image.width as f64 || yi >= image.height as f64 {
            0.0
        } else {
            image.get(xi as usize, yi as usize)
        }
    };
    let top = px(x0, y0) * (1.0 - fx) + if fx > 0.0 { px(x0 + 1.0, y0) * fx } else { 0.0 };
    if fy == 0.0 {
        return top;
    }
    let bottom = px(x0, y0 + 1.0) * (1.0 - fx) + if fx > 0.0 { px(x0 + 1.0, y0 + 1.0) * fx } else { 0.0 };
    top * (1.0 - fy) + bottom * fy
}

/// Applies `transform` (source to destination) by inverse mapping each output
/// pixel and sampling bilinearly; samples outside the source are background.
pub fn warp_image(image: &WordImage, transform: &AffineTransform) -> WordImage {
    let Ok(inv) = transform.inverse() else {
        return WordImage {
            pixels: vec![0.0; image.pixels.len()],
            ..image.clone()
        };
    };
    let mut pixels = Vec::with_capacity(image.pixels.len());
    for y in 0..image.height {
        for x in 0..image.width {
            let (sx, sy) = inv.apply(x as f64, y as f64);
            pixels.push(bilinear(image, sx, sy).clamp(0.0, 1.0));
        }
    }
    WordImage {
        height: image.height,
        width: image.width,
        pixels,
    }
}

/// Samples a transform and warps a `1 x 1 x H x W` tensor; usable as a
/// training augmentation hook.
pub fn augment_tensor<R: Rng + ?Sized>(x: &Tensor, rng: &mut R) -> Result<Tensor> {
    let img = WordImage::from_tensor(x)?;
    let t = sample_augmentation_transform(img.width, img.height, rng)?;
    Ok(warp_image(&img, &t).to_tensor())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn ramp(h: usize, w: usize) -> WordImage {
        let px = (0..h * w).map(|i| (i % 7) as f64 / 6.0).collect();
        WordImage::new(h, w, px).unwrap()
    }

    #[test]
    fn pixel_conventions() {
        let raw = GrayImage::from_raw(3, 1, vec![0, 255, 51]).unwrap();
        let doc = normalize_pixels(&raw, InkConvention::DarkOnLight).unwrap();
        assert_eq!(doc.pixels(), &[1.0, 0.0, 0.8]);
        let bright = normalize_pixels(&raw, InkConvention::LightOnDark).unwrap();
        assert_eq!(bright.pixels(), &[0.0, 1.0, 0.2]);
        let white = GrayImage::from_pixel(4, 2, image::Luma([255]));
        assert!(normalize_pixels(&white, InkConvention::DarkOnLight)
            .unwrap()
            .pixels()
            .iter()
            .all(|&p| p == 0.0));
        assert!(normalize_pixels(&GrayImage::new(0, 0), InkConvention::DarkOnLight).is_err());
    }

    #[test]
    fn normalized_images_are_a_fixed_point() {
        let img = ramp(5, 9);
        let again = WordImage::new(img.height(), img.width(), img.pixels().to_vec()).unwrap();
        assert_eq!(again, img);
        let round = normalize_pixels(&img.to_gray_image(), InkConvention::DarkOnLight).unwrap();
        for (a, b) in round.pixels().iter().zip(img.pixels()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
        assert!(WordImage::new(1, 2, vec![0.0, 1.5]).is_err());
    }

    #[test]
    fn unit_scales_give_identity() {
        let src = reference_points(40, 20);
        let t = AffineTransform::from_points(src, src).unwrap();
        for (row, id) in t.matrix.iter().zip(AffineTransform::identity().matrix) {
            for (a, b) in row.iter().zip(id) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let img = ramp(20, 40);
        let out = warp_image(&img, &t);
        for (a, b) in out.pixels().iter().zip(img.pixels()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn integer_translation_is_exact_shift() {
        let img = ramp(6, 10);
        let out = warp_image(&img, &AffineTransform::translation(2.0, -1.0));
        for y in 0..6 {
            for x in 0..10 {
                let expect = if x >= 2 && y + 1 < 6 { img.get(x - 2, y + 1) } else { 0.0 };
                assert_eq!(out.get(x, y), expect, "({x}, {y})");
            }
        }
    }

    #[test]
    fn background_stays_background() {
        let img = WordImage::new(8, 12, vec![0.0; 96]).unwrap();
        let t = sample_augmentation_transform(12, 8, &mut seeded(3)).unwrap();
        assert!(warp_image(&img, &t).pixels().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn sampling_is_seeded_and_validated() {
        let a = sample_augmentation_transform(50, 30, &mut seeded(1)).unwrap();
        let b = sample_augmentation_transform(50, 30, &mut seeded(1)).unwrap();
        assert_eq!(a, b);
        assert!(sample_augmentation_transform(3, 30, &mut seeded(1)).is_err());
    }

    #[test]
    fn inverse_round_trips() {
        let t = sample_augmentation_transform(64, 32, &mut seeded(8)).unwrap();
        let inv = t.inverse().unwrap();
        let (x, y) = t.apply(13.5, 7.25);
        let (bx, by) = inv.apply(x, y);
        assert!((bx - 13.5).abs() < 1e-12 && (by - 7.25).abs() < 1e-12);
    }
}
