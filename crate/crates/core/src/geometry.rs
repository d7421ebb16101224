//! Square crop sampling, center-anchored expansion and patch resampling.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Default encoder input resolution for extracted patches.
pub const DEFAULT_PATCH_SIZE: u32 = 224;

/// An 8-bit RGB image with a stable identifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageFrame {
    id: String,
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl ImageFrame {
    pub fn new(id: impl Into<String>, width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParams(format!(
                "image must be at least 1x1, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(Error::InvalidParams(format!(
                "pixel buffer holds {} bytes, {width}x{height} RGB needs {expected}",
                pixels.len()
            )));
        }
        Ok(Self {
            id: id.into(),
            width,
            height,
            pixels,
        })
    }

    /// Uniformly colored frame. Handy when only the geometry matters.
    pub fn filled(id: impl Into<String>, width: u32, height: u32, rgb: [u8; 3]) -> Result<Self> {
        let pixels = rgb
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * 3)
            .collect();
        Self::new(id, width, height, pixels)
    }

    /// Decodes a PNG or JPEG file into RGB8. The id is the file stem.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(Self::from_rgb(id, img.to_rgb8()))
    }

    pub fn from_rgb(id: impl Into<String>, img: image::RgbImage) -> Self {
        let (width, height) = img.dimensions();
        Self {
            id: id.into(),
            width,
            height,
            pixels: img.into_raw(),
        }
    }

    pub fn to_rgb(&self) -> image::RgbImage {
        image::RgbImage::from_raw(self.width, self.height, self.pixels.clone())
            .expect("buffer length checked at construction")
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// Side of the largest square that fits, `min(width, height)`.
    pub fn short_side(&self) -> u32 {
        self.width.min(self.height)
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }
}

/// Axis-aligned square window inside an image, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region {
    pub x0: u32,
    pub y0: u32,
    pub side: u32,
}

impl Region {
    pub const fn new(x0: u32, y0: u32, side: u32) -> Self {
        Self { x0, y0, side }
    }

    /// Top-left anchored square of side `min(width, height)`.
    pub fn full(image: &ImageFrame) -> Self {
        Self::new(0, 0, image.short_side())
    }

    pub fn x1(&self) -> u32 {
        self.x0 + self.side
    }

    pub fn y1(&self) -> u32 {
        self.y0 + self.side
    }

    pub fn fits(&self, image: &ImageFrame) -> bool {
        self.side >= 1
            && u64::from(self.x0) + u64::from(self.side) <= u64::from(image.width)
            && u64::from(self.y0) + u64::from(self.side) <= u64::from(image.height)
    }

    pub fn check(&self, image: &ImageFrame) -> Result<()> {
        if self.fits(image) {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "region {self:?} does not fit {}x{} image '{}'",
                image.width, image.height, image.id
            )))
        }
    }

    pub fn contains(&self, other: &Region) -> bool {
        self.x0 <= other.x0 && self.y0 <= other.y0 && self.x1() >= other.x1() && self.y1() >= other.y1()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropParams {
    pub n_crops: usize,
    pub ratio_lo: f64,
    pub ratio_hi: f64,
    pub seed: u64,
}

impl Default for CropParams {
    fn default() -> Self {
        Self {
            n_crops: 100,
            ratio_lo: 0.5,
            ratio_hi: 0.9,
            seed: 0,
        }
    }
}

impl CropParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_crops < 2 {
            return Err(Error::InvalidParams(format!(
                "n_crops must be >= 2, got {}",
                self.n_crops
            )));
        }
        let (lo, hi) = (self.ratio_lo, self.ratio_hi);
        if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi && hi <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "crop ratios must satisfy 0 < lo < hi <= 1, got ({lo}, {hi})"
            )));
        }
        Ok(())
    }
}

fn round_half_up(x: f64) -> u32 {
    (x + 0.5).floor() as u32
}

/// Draws `n_crops` square regions with side `round(gamma * min(H, W))`,
/// `gamma ~ U(ratio_lo, ratio_hi)`, placed uniformly over valid positions.
///
/// Each crop consumes three unit draws from the image's keyed stream, in the
/// order gamma, x0, y0.
pub fn sample_crops(image: &ImageFrame, params: &CropParams) -> Result<Vec<Region>> {
    params.validate()?;
    let short = image.short_side();
    if short < 2 {
        return Err(Error::InvalidParams(format!(
            "image '{}' is {}x{}; cropping needs min side >= 2",
            image.id, image.width, image.height
        )));
    }
    let mut rng = Stream::keyed(params.seed, &image.id);
    let span = params.ratio_hi - params.ratio_lo;
    let regions = (0..params.n_crops)
        .map(|_| {
            let gamma = params.ratio_lo + span * rng.unit();
            let side = round_half_up(gamma * f64::from(short)).clamp(1, short);
            let x0 = rng.below(image.width - side + 1);
            let y0 = rng.below(image.height - side + 1);
            Region::new(x0, y0, side)
        })
        .collect();
    Ok(regions)
}

/// Grows a region by `tau` around its center, then clamps it back inside the
/// image.
///
/// The new side is `round(tau * side)`, at least one pixel larger than before
/// and at most `min(H, W)`.
pub fn expand_region(region: Region, tau: f64, image: &ImageFrame) -> Result<Region> {
    if !(tau.is_finite() && tau > 1.0) {
        return Err(Error::InvalidParams(format!(
            "expansion scale must be > 1, got {tau}"
        )));
    }
    region.check(image)?;
    let cap = image.short_side();
    let grown = round_half_up(tau * f64::from(region.side)).max(region.side + 1);
    let side = grown.min(cap);
    let delta = (side - region.side) / 2;
    let x0 = region.x0.saturating_sub(delta).min(image.width - side);
    let y0 = region.y0.saturating_sub(delta).min(image.height - side);
    Ok(Region::new(x0, y0, side))
}

/// Bilinear resample of `region` to an `out_size` square (half-pixel centers,
/// edge clamped, rounded to nearest).
pub fn extract_patch(image: &ImageFrame, region: Region, out_size: u32) -> Result<ImageFrame> {
    region.check(image)?;
    if out_size == 0 {
        return Err(Error::InvalidParams("patch size must be >= 1".into()));
    }
    let scale = f64::from(region.side) / f64::from(out_size);
    let last = f64::from(region.side - 1);
    let taps: Vec<(u32, u32, f64)> = (0..out_size)
        .map(|o| {
            let s = ((f64::from(o) + 0.5) * scale - 0.5).clamp(0.0, last);
            let lo = s.floor() as u32;
            let hi = (lo + 1).min(region.side - 1);
            (lo, hi, s - f64::from(lo))
        })
        .collect();

    let mut pixels = Vec::with_capacity(out_size as usize * out_size as usize * 3);
    for &(ylo, yhi, fy) in &taps {
        for &(xlo, xhi, fx) in &taps {
            let p00 = image.pixel(region.x0 + xlo, region.y0 + ylo);
            let p01 = image.pixel(region.x0 + xhi, region.y0 + ylo);
            let p10 = image.pixel(region.x0 + xlo, region.y0 + yhi);
            let p11 = image.pixel(region.x0 + xhi, region.y0 + yhi);
            for c in 0..3 {
                let top = f64::from(p00[c]) * (1.0 - fx) + f64::from(p01[c]) * fx;
                let bottom = f64::from(p10[c]) * (1.0 - fx) + f64::from(p11[c]) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                pixels.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    let id = format!(
        "{}@{},{},{}",
        image.id, region.x0, region.y0, region.side
    );
    ImageFrame::new(id, out_size, out_size, pixels)
}
