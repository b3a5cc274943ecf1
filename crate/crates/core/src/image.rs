//! Square-input preprocessing: resize & crop, letterbox padding, naive
//! resize, per-channel normalization, and patch-grid arithmetic.
//!
//! Resampling is a separable triangle (bilinear) filter evaluated at pixel
//! centers whose support widens with the downscale factor, so every source
//! pixel carries positive weight into some output pixel.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

/// An 8-bit RGB image, row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RawImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("zero-sized image {width}x{height}")));
        }
        if data.len() != width * height * 3 {
            return Err(Error::InvalidImage(format!(
                "expected {} bytes for {width}x{height} RGB, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(RawImage { width, height, data })
    }

    /// Image filled with one color.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self::new(width, height, data)
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

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }
}

/// How a non-square image is brought to a square input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Scheme {
    /// Scale the short side to the target, then center crop.
    ResizeCrop,
    /// Pad the short side to a square with the normalization mean, then resize.
    Letterbox,
    /// Scale both sides independently, warping the aspect ratio.
    NaiveResize,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::ResizeCrop, Scheme::Letterbox, Scheme::NaiveResize];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::ResizeCrop => "resize-crop",
            Scheme::Letterbox => "letterbox",
            Scheme::NaiveResize => "naive-resize",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|scheme| scheme.name() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "image scheme",
                name: String::from(s),
            })
    }
}

/// Per-channel normalization constants in `[0, 1]` pixel units.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NormStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl Default for NormStats {
    fn default() -> Self {
        NormStats {
            mean: [0.5; 3],
            std: [0.5; 3],
        }
    }
}

/// A normalized `side × side × 3` input (row-major, channels interleaved).
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedImage {
    pub side: usize,
    pub pixels: Vec<f64>,
    pub scheme: Scheme,
    /// Fraction of the square canvas that is padding; nonzero only for letterbox.
    pub pad_fraction: f64,
}

impl ProcessedImage {
    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.side + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }
}

/// Floating-point RGB plane used between preprocessing steps.
#[derive(Debug, Clone)]
struct Plane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Plane {
    fn from_raw(img: &RawImage) -> Self {
        Plane {
            width: img.width,
            height: img.height,
            data: img.data.iter().map(|&v| v as f64 / 255.0).collect(),
        }
    }
}

pub fn process_image(
    img: &RawImage,
    scheme: Scheme,
    target_side: usize,
    norm: &NormStats,
) -> Result<ProcessedImage> {
    if target_side == 0 {
        return Err(Error::InvalidArgument("target side must be at least 1".into()));
    }
    if norm.std.iter().any(|s| *s == 0.0 || !s.is_finite()) {
        return Err(Error::InvalidArgument("normalization std must be nonzero".into()));
    }
    let (w, h) = (img.width, img.height);
    let plane = Plane::from_raw(img);
    let (square, pad_fraction) = match scheme {
        Scheme::NaiveResize => (resize(&plane, target_side, target_side), 0.0),
        Scheme::ResizeCrop => {
            let (new_w, new_h) = if w <= h {
                (target_side, scaled_len(h, target_side, w))
            } else {
                (scaled_len(w, target_side, h), target_side)
            };
            let resized = resize(&plane, new_w, new_h);
            let left = (new_w - target_side) / 2;
            let top = (new_h - target_side) / 2;
            (crop(&resized, left, top, target_side, target_side), 0.0)
        }
        Scheme::Letterbox => {
            let side = w.max(h);
            let padded = pad_to_square(&plane, norm.mean);
            let fraction = 1.0 - w.min(h) as f64 / side as f64;
            (resize(&padded, target_side, target_side), fraction)
        }
    };
    debug_assert_eq!((square.width, square.height), (target_side, target_side));
    let mut pixels = square.data;
    for px in pixels.chunks_exact_mut(3) {
        for (c, v) in px.iter_mut().enumerate() {
            *v = (*v - norm.mean[c]) / norm.std[c];
        }
    }
    Ok(ProcessedImage {
        side: target_side,
        pixels,
        scheme,
        pad_fraction,
    })
}

/// `round(long · target / short)`, never below `target`.
fn scaled_len(long: usize, target: usize, short: usize) -> usize {
    let exact = long as f64 * target as f64 / short as f64;
    (libm::round(exact) as usize).max(target)
}

fn pad_to_square(src: &Plane, fill: [f64; 3]) -> Plane {
    let side = src.width.max(src.height);
    let left = (side - src.width) / 2;
    let top = (side - src.height) / 2;
    let mut data = Vec::with_capacity(side * side * 3);
    for _ in 0..side * side {
        data.extend_from_slice(&fill);
    }
    for y in 0..src.height {
        let dst = ((y + top) * side + left) * 3;
        let row = &src.data[y * src.width * 3..(y + 1) * src.width * 3];
        data[dst..dst + row.len()].copy_from_slice(row);
    }
    Plane {
        width: side,
        height: side,
        data,
    }
}

fn crop(src: &Plane, left: usize, top: usize, width: usize, height: usize) -> Plane {
    let mut data = Vec::with_capacity(width * height * 3);
    for y in top..top + height {
        let start = (y * src.width + left) * 3;
        data.extend_from_slice(&src.data[start..start + width * 3]);
    }
    Plane {
        width,
        height,
        data,
    }
}

/// Resampling weights for one axis: `(first source index, normalized weights)`
/// per output index.
fn axis_weights(in_len: usize, out_len: usize) -> Vec<(usize, Vec<f64>)> {
    let scale = in_len as f64 / out_len as f64;
    let filter_scale = scale.max(1.0);
    let support = filter_scale;
    (0..out_len)
        .map(|i| {
            let center = (i as f64 + 0.5) * scale;
            let lo = libm::floor(center - support + 0.5).max(0.0) as usize;
            let hi = (libm::floor(center + support + 0.5) as usize).min(in_len);
            let mut weights: Vec<f64> = (lo..hi)
                .map(|j| {
                    let x = (j as f64 + 0.5 - center) / filter_scale;
                    (1.0 - x.abs()).max(0.0)
                })
                .collect();
            let total: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= total;
            }
            (lo, weights)
        })
        .collect()
}

fn resize(src: &Plane, out_w: usize, out_h: usize) -> Plane {
    if (src.width, src.height) == (out_w, out_h) {
        return src.clone();
    }
    // horizontal pass
    let xw = axis_weights(src.width, out_w);
    let mut tmp = vec![0.0; out_w * src.height * 3];
    for y in 0..src.height {
        let row = &src.data[y * src.width * 3..(y + 1) * src.width * 3];
        for (x, (lo, weights)) in xw.iter().enumerate() {
            let mut acc = [0.0; 3];
            for (k, w) in weights.iter().enumerate() {
                let p = &row[(lo + k) * 3..(lo + k) * 3 + 3];
                for c in 0..3 {
                    acc[c] += w * p[c];
                }
            }
            tmp[(y * out_w + x) * 3..(y * out_w + x) * 3 + 3].copy_from_slice(&acc);
        }
    }
    // vertical pass
    let yw = axis_weights(src.height, out_h);
    let mut data = vec![0.0; out_w * out_h * 3];
    for (y, (lo, weights)) in yw.iter().enumerate() {
        let dst = &mut data[y * out_w * 3..(y + 1) * out_w * 3];
        for (k, w) in weights.iter().enumerate() {
            let src_row = &tmp[(lo + k) * out_w * 3..(lo + k + 1) * out_w * 3];
            for (d, s) in dst.iter_mut().zip(src_row) {
                *d += w * s;
            }
        }
    }
    Plane {
        width: out_w,
        height: out_h,
        data,
    }
}

/// Which source pixels receive positive weight when resampling an axis of
/// length `in_len` to `out_len`. Exposed for coverage checks.
pub fn axis_coverage(in_len: usize, out_len: usize) -> Vec<bool> {
    let mut covered = vec![false; in_len];
    if in_len == out_len {
        covered.iter_mut().for_each(|c| *c = true);
        return covered;
    }
    for (lo, weights) in axis_weights(in_len, out_len) {
        for (k, w) in weights.iter().enumerate() {
            if *w > 0.0 {
                covered[lo + k] = true;
            }
        }
    }
    covered
}

/// Geometry of a square patch tiling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGrid {
    pub patch_size: usize,
    pub patches_per_side: usize,
    pub total_patches: usize,
}

pub fn patch_grid(side: usize, patch_size: usize) -> Result<PatchGrid> {
    if patch_size == 0 || side == 0 || !side.is_multiple_of(patch_size) {
        return Err(Error::Granularity(format!(
            "side {side} is not divisible by patch size {patch_size}"
        )));
    }
    let per_side = side / patch_size;
    Ok(PatchGrid {
        patch_size,
        patches_per_side: per_side,
        total_patches: per_side * per_side,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gradient(width: usize, height: usize) -> RawImage {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.push((x * 255 / width.max(2).saturating_sub(1).max(1)).min(255) as u8);
                data.push((y * 255 / height.max(2).saturating_sub(1).max(1)).min(255) as u8);
                data.push(((x + y) % 256) as u8);
            }
        }
        RawImage::new(width, height, data).unwrap()
    }

    #[test]
    fn letterbox_hd_frame_pads_420_rows_each_side() {
        let img = RawImage::filled(1920, 1080, [255, 0, 0]).unwrap();
        let plane = Plane::from_raw(&img);
        let padded = pad_to_square(&plane, [0.5; 3]);
        assert_eq!((padded.width, padded.height), (1920, 1920));
        let fill_row = |y: usize| padded.data[y * 1920 * 3] == 0.5;
        assert!((0..420).all(fill_row));
        assert!(!fill_row(420));
        assert!(!fill_row(1499));
        assert!((1500..1920).all(fill_row));

        let out = process_image(&img, Scheme::Letterbox, 16, &NormStats::default()).unwrap();
        assert_eq!(out.pad_fraction, 0.4375);
        assert!(out.pad_fraction > 0.40);
    }

    #[test]
    fn odd_padding_remainder_goes_bottom_right() {
        let img = RawImage::filled(3, 6, [0, 0, 0]).unwrap();
        let padded = pad_to_square(&Plane::from_raw(&img), [0.5; 3]);
        // 3 columns of padding: one left, two right
        let is_fill = |x: usize| padded.data[x * 3] == 0.5;
        assert!(is_fill(0));
        assert!(!is_fill(1) && !is_fill(3));
        assert!(is_fill(4) && is_fill(5));
    }

    #[test]
    fn square_input_at_target_is_only_normalized() {
        let img = gradient(224, 224);
        for scheme in Scheme::ALL {
            let out = process_image(&img, scheme, 224, &NormStats::default()).unwrap();
            assert_eq!(out.pad_fraction, 0.0);
            for (v, raw) in out.pixels.iter().zip(img.data()) {
                assert_eq!(*v, (*raw as f64 / 255.0 - 0.5) / 0.5);
            }
        }
    }

    #[test]
    fn resize_crop_vga_geometry() {
        assert_eq!(scaled_len(640, 224, 480), 299);
        assert_eq!((299 - 224) / 2, 37);
        let out = process_image(&gradient(640, 480), Scheme::ResizeCrop, 224, &NormStats::default())
            .unwrap();
        assert_eq!(out.side, 224);
        assert_eq!(out.pixels.len(), 224 * 224 * 3);
    }

    #[test]
    fn letterbox_fill_normalizes_to_zero() {
        let img = RawImage::filled(40, 10, [255, 255, 255]).unwrap();
        let out = process_image(&img, Scheme::Letterbox, 40, &NormStats::default()).unwrap();
        assert_eq!(out.pixel(20, 0), [0.0; 3]);
        assert_eq!(out.pixel(20, 39), [0.0; 3]);
        assert_eq!(out.pixel(20, 20), [1.0; 3]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(RawImage::new(0, 5, vec![]).is_err());
        let img = RawImage::filled(4, 4, [1, 2, 3]).unwrap();
        assert!(process_image(&img, Scheme::Letterbox, 0, &NormStats::default()).is_err());
        let bad = NormStats {
            mean: [0.5; 3],
            std: [0.5, 0.0, 0.5],
        };
        assert!(process_image(&img, Scheme::NaiveResize, 4, &bad).is_err());
        assert!("squash".parse::<Scheme>().is_err());
        assert_eq!("letterbox".parse::<Scheme>().unwrap(), Scheme::Letterbox);
    }

    #[test]
    fn patch_grid_counts() {
        assert_eq!(patch_grid(224, 14).unwrap().total_patches, 256);
        assert_eq!(patch_grid(336, 14).unwrap().total_patches, 576);
        assert_eq!(patch_grid(448, 14).unwrap().total_patches, 4 * 256);
        assert_eq!(patch_grid(224, 16).unwrap().total_patches, 196);
        assert!(matches!(patch_grid(224, 15), Err(Error::Granularity(_))));
    }

    proptest! {
        #[test]
        fn output_is_always_target_square(w in 1usize..70, h in 1usize..70, t in 1usize..40, s in 0usize..3) {
            let scheme = Scheme::ALL[s];
            let out = process_image(&gradient(w, h), scheme, t, &NormStats::default()).unwrap();
            prop_assert_eq!(out.pixels.len(), t * t * 3);
            prop_assert!(out.pixels.iter().all(|v| v.is_finite()));
            if scheme != Scheme::Letterbox || w == h {
                prop_assert_eq!(out.pad_fraction, 0.0);
            } else {
                prop_assert!(out.pad_fraction > 0.0 && out.pad_fraction < 1.0);
            }
        }

        #[test]
        fn resampling_never_drops_source_pixels(n_in in 1usize..500, n_out in 1usize..300) {
            prop_assert!(axis_coverage(n_in, n_out).into_iter().all(|c| c));
        }

        #[test]
        fn doubling_side_quadruples_patches(k in 1usize..40, p in 1usize..20) {
            let s = k * p;
            prop_assert_eq!(
                patch_grid(2 * s, p).unwrap().total_patches,
                4 * patch_grid(s, p).unwrap().total_patches
            );
        }

        #[test]
        fn processing_is_deterministic(w in 1usize..50, h in 1usize..50, s in 0usize..3) {
            let img = gradient(w, h);
            let a = process_image(&img, Scheme::ALL[s], 17, &NormStats::default()).unwrap();
            let b = process_image(&img, Scheme::ALL[s], 17, &NormStats::default()).unwrap();
            prop_assert!(a.pixels.iter().zip(&b.pixels).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}
