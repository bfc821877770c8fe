//! Radiometric primitives and the dense containers shared by every module.
//!
//! Images are stored row-major (`index = y * width + x`) in `f64`. A
//! [`LinearImage`] holds linear-light RGB, an [`EncodedImage`] holds
//! display-encoded (gamma) RGB as read from or written to disk, and a
//! [`GrayMap`] holds one scalar per pixel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rec.709 luma weights applied to linear RGB.
pub const LUMA_WEIGHTS: [f64; 3] = [0.2126, 0.7152, 0.0722];

/// Pixels whose channel sum falls below this take the neutral chromaticity.
pub const CHROMA_EPS: f64 = 1e-4;

const NEUTRAL_CHROMA: [f64; 2] = [1.0 / 3.0, 1.0 / 3.0];

/// Rec.709 luminance of a single linear RGB triple.
#[inline]
pub fn luma(rgb: [f64; 3]) -> f64 {
    LUMA_WEIGHTS[0] * rgb[0] + LUMA_WEIGHTS[1] * rgb[1] + LUMA_WEIGHTS[2] * rgb[2]
}

/// `(r, g)` chromaticity of a single triple, neutral for near-black input.
#[inline]
pub fn chroma(rgb: [f64; 3]) -> [f64; 2] {
    let sum = rgb[0] + rgb[1] + rgb[2];
    if sum < CHROMA_EPS {
        NEUTRAL_CHROMA
    } else {
        [rgb[0] / sum, rgb[1] / sum]
    }
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width < 2 || height < 2 {
        return Err(Error::Invalid(format!(
            "image must be at least 2x2, got {width}x{height}"
        )));
    }
    if len != width * height {
        return Err(Error::LengthMismatch {
            context: "pixel buffer vs width*height",
            left: len,
            right: width * height,
        });
    }
    Ok(())
}

/// Pixel-graph stencil used by the smoothness terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Connectivity {
    #[default]
    Four,
    Eight,
}

/// Undirected weighted edge between two pixel indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Every unordered neighbor pair of a `width x height` grid, each listed once
/// with `a < b`.
pub fn neighbor_pairs(width: usize, height: usize, conn: Connectivity) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(width * height * if conn == Connectivity::Four { 2 } else { 4 });
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            if x + 1 < width {
                out.push((i, i + 1));
            }
            if y + 1 < height {
                out.push((i, i + width));
                if conn == Connectivity::Eight {
                    if x + 1 < width {
                        out.push((i, i + width + 1));
                    }
                    if x > 0 {
                        out.push((i, i + width - 1));
                    }
                }
            }
        }
    }
    out
}

/// Linear-light RGB image with every channel in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearImage {
    width: usize,
    height: usize,
    data: Vec<[f64; 3]>,
}

impl LinearImage {
    /// Builds an image, rejecting non-finite values and clamping the rest into `[0, 1]`.
    pub fn new(width: usize, height: usize, mut data: Vec<[f64; 3]>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        for (i, px) in data.iter_mut().enumerate() {
            for (c, v) in px.iter_mut().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidPixel {
                        x: i % width,
                        y: i / width,
                        channel: c,
                        value: *v,
                        reason: "non-finite",
                    });
                }
                *v = v.clamp(0.0, 1.0);
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self> {
        Self::new(width, height, vec![rgb; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self> {
        let data = (0..width * height).map(|i| f(i % width, i / width)).collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.data[y * self.width + x]
    }

    /// Same-shape image with each pixel mapped through `f`; results are clamped.
    pub fn map(&self, f: impl Fn([f64; 3]) -> [f64; 3]) -> Result<Self> {
        Self::new(self.width, self.height, self.data.iter().map(|&p| f(p)).collect())
    }

    pub fn into_pixels(self) -> Vec<[f64; 3]> {
        self.data
    }
}

/// Display-encoded RGB in `[0, 1]`. Values are validated by [`inverse_gamma`]
/// rather than on construction, so out-of-range data can be reported per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f64; 3]>,
}

/// One scalar per pixel: luminance maps, shade, LiDAR intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidPixel {
                x: i % width,
                y: i / width,
                channel: 0,
                value: data[i],
                reason: "non-finite",
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.data
    }
}

/// Power-law transfer function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaConfig {
    pub gamma: f64,
}

impl Default for GammaConfig {
    fn default() -> Self {
        Self { gamma: 2.2 }
    }
}

impl GammaConfig {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::Invalid(format!("gamma must be > 0, got {gamma}")));
        }
        Ok(Self { gamma })
    }
}

/// Linearizes display-encoded values: `out = in^gamma`.
pub fn inverse_gamma(img: &EncodedImage, cfg: GammaConfig) -> Result<LinearImage> {
    let cfg = GammaConfig::new(cfg.gamma)?;
    check_dims(img.width, img.height, img.data.len())?;
    let mut out = Vec::with_capacity(img.data.len());
    for (i, px) in img.data.iter().enumerate() {
        let mut lin = [0.0; 3];
        for c in 0..3 {
            let v = px[c];
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidPixel {
                    x: i % img.width,
                    y: i / img.width,
                    channel: c,
                    value: v,
                    reason: "encoded value outside [0, 1]",
                });
            }
            lin[c] = v.powf(cfg.gamma);
        }
        out.push(lin);
    }
    LinearImage::new(img.width, img.height, out)
}

/// Re-encodes linear values for display: `out = in^(1/gamma)`.
pub fn apply_gamma(img: &LinearImage, cfg: GammaConfig) -> EncodedImage {
    let inv = 1.0 / cfg.gamma;
    EncodedImage {
        width: img.width,
        height: img.height,
        data: img
            .data
            .iter()
            .map(|p| [p[0].powf(inv), p[1].powf(inv), p[2].powf(inv)])
            .collect(),
    }
}

/// Per-pixel Rec.709 luminance of a linear image.
pub fn luminance(img: &LinearImage) -> GrayMap {
    GrayMap {
        width: img.width,
        height: img.height,
        data: img.data.iter().map(|&p| luma(p)).collect(),
    }
}

/// Per-pixel `(r, g)` chromaticity.
pub fn chromaticity(img: &LinearImage) -> Vec<[f64; 2]> {
    img.data.iter().map(|&p| chroma(p)).collect()
}
