//! Files on disk: PNG images, LiDAR intensity (16-bit PNG + mask, or CSV),
//! sample manifests and saved synthetic scenes.
//!
//! Every floating-point array is stored as 16-bit PNG, so a save/load round
//! trip changes each value by at most half a quantization step (`0.5 / 65535`).

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, Rgb};
use serde::{Deserialize, Serialize};

use crate::annotate::{read_annotations, FieldMap};
use crate::annotate::AnnotationPair;
use crate::densify::SparseIntensity;
use crate::error::{Error, Result};
use crate::imagecore::{apply_gamma, inverse_gamma, EncodedImage, GammaConfig, GrayMap, LinearImage};

use super::synth::{HalfPlane, SynthConfig, SynthScene};

const Q16: f64 = 65535.0;

fn q16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * Q16).round() as u16
}

fn image_err(path: &Path, source: image::ImageError) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        source,
    }
}

fn dim_u32(path: &Path, v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Invalid(format!("{}: dimension {v} too large for PNG", path.display())))
}

fn open_png(path: &Path) -> Result<DynamicImage> {
    if !path.exists() {
        return Err(Error::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)));
    }
    image::open(path).map_err(|e| image_err(path, e))
}

fn is_16bit(img: &DynamicImage) -> bool {
    img.color().bytes_per_pixel() / img.color().channel_count() >= 2
}

/// Decodes an 8- or 16-bit PNG into `[0, 1]` RGB without any transfer
/// function. Gray images are replicated to three channels; alpha is dropped.
pub fn read_png(path: &Path) -> Result<EncodedImage> {
    let img = open_png(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = if is_16bit(&img) {
        img.to_rgb16()
            .pixels()
            .map(|p| p.0.map(|c| c as f64 / Q16))
            .collect()
    } else {
        img.to_rgb8().pixels().map(|p| p.0.map(|c| c as f64 / 255.0)).collect()
    };
    Ok(EncodedImage {
        width: w,
        height: h,
        data,
    })
}

/// Reads a display-encoded PNG and linearizes it.
pub fn load_image(path: &Path, gamma: GammaConfig) -> Result<LinearImage> {
    inverse_gamma(&read_png(path)?, gamma)
}

/// Writes `[0, 1]` RGB as a 16-bit PNG, values stored as given.
pub fn write_rgb16(path: &Path, width: usize, height: usize, data: &[[f64; 3]]) -> Result<()> {
    let raw: Vec<u16> = data.iter().flat_map(|p| p.map(q16)).collect();
    let buf: ImageBuffer<Rgb<u16>, Vec<u16>> = ImageBuffer::from_raw(dim_u32(path, width)?, dim_u32(path, height)?, raw)
        .ok_or_else(|| Error::Invalid(format!("{}: buffer does not match {width}x{height}", path.display())))?;
    buf.save_with_format(path, ImageFormat::Png).map_err(|e| image_err(path, e))
}

/// Gamma-encodes a linear image and writes it as a 16-bit PNG.
pub fn save_image(path: &Path, img: &LinearImage, gamma: GammaConfig) -> Result<()> {
    let enc = apply_gamma(img, gamma);
    write_rgb16(path, enc.width, enc.height, &enc.data)
}

/// Writes a linear image as a 16-bit PNG without encoding (lossless up to quantization).
pub fn save_linear(path: &Path, img: &LinearImage) -> Result<()> {
    write_rgb16(path, img.width(), img.height(), img.pixels())
}

pub fn load_linear(path: &Path) -> Result<LinearImage> {
    let e = read_png(path)?;
    LinearImage::new(e.width, e.height, e.data)
}

pub fn write_gray16(path: &Path, map: &GrayMap) -> Result<()> {
    let raw: Vec<u16> = map.values().iter().map(|&v| q16(v)).collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(dim_u32(path, map.width())?, dim_u32(path, map.height())?, raw)
            .ok_or_else(|| Error::Invalid(format!("{}: bad gray buffer", path.display())))?;
    buf.save_with_format(path, ImageFormat::Png).map_err(|e| image_err(path, e))
}

/// Writes `S / max S`, gamma encoded, and returns `max S`.
pub fn save_shade(path: &Path, shade: &GrayMap, gamma: GammaConfig) -> Result<f64> {
    let peak = shade.values().iter().fold(0.0f64, |m, &v| m.max(v));
    let inv = 1.0 / GammaConfig::new(gamma.gamma)?.gamma;
    let shown = shade
        .values()
        .iter()
        .map(|&s| if peak > 0.0 { (s / peak).powf(inv) } else { 0.0 })
        .collect();
    write_gray16(path, &GrayMap::new(shade.width(), shade.height(), shown)?)?;
    Ok(peak)
}

/// Reads an 8- or 16-bit PNG as one `[0, 1]` channel (luma of colour input).
pub fn read_gray(path: &Path) -> Result<GrayMap> {
    let img = open_png(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = if is_16bit(&img) {
        img.to_luma16().pixels().map(|p| p.0[0] as f64 / Q16).collect()
    } else {
        img.to_luma8().pixels().map(|p| p.0[0] as f64 / 255.0).collect()
    };
    GrayMap::new(w, h, data)
}

fn write_mask(path: &Path, width: usize, height: usize, mask: &[bool]) -> Result<()> {
    let raw: Vec<u8> = mask.iter().map(|&m| if m { 255 } else { 0 }).collect();
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_raw(dim_u32(path, width)?, dim_u32(path, height)?, raw)
        .ok_or_else(|| Error::Invalid(format!("{}: bad mask buffer", path.display())))?;
    buf.save_with_format(path, ImageFormat::Png).map_err(|e| image_err(path, e))
}

/// Non-zero pixels are observed.
fn read_mask(path: &Path) -> Result<((usize, usize), Vec<bool>)> {
    let img = open_png(path)?.to_luma16();
    let dims = (img.width() as usize, img.height() as usize);
    Ok((dims, img.pixels().map(|p| p.0[0] > 0).collect()))
}

/// Intensity as a 16-bit gray PNG plus an 8-bit mask PNG.
pub fn save_lidar_png(values: &Path, mask: &Path, lidar: &SparseIntensity) -> Result<()> {
    let (w, h) = lidar.dims();
    write_gray16(values, lidar.values())?;
    write_mask(mask, w, h, lidar.mask())
}

pub fn load_lidar_png(values: &Path, mask: &Path) -> Result<SparseIntensity> {
    let v = read_gray(values)?;
    let (dims, m) = read_mask(mask)?;
    if dims != v.dims() {
        return Err(Error::ShapeMismatch {
            expected: v.dims(),
            found: dims,
        });
    }
    SparseIntensity::new(v, m)
}

/// Reads `u,v,intensity` rows (header required) into a `width x height` map.
/// Intensities are divided by `divisor` and must then lie in `[0, 1]`.
/// Several rows on one pixel are averaged. Row numbers in errors count data
/// rows from 1.
pub fn read_lidar_csv(path: &Path, dims: (usize, usize), divisor: f64) -> Result<SparseIntensity> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_lidar_csv(BufReader::new(f), &path.display().to_string(), dims, divisor)
}

pub fn parse_lidar_csv<R: std::io::Read>(
    reader: R,
    source: &str,
    (width, height): (usize, usize),
    divisor: f64,
) -> Result<SparseIntensity> {
    if !(divisor > 0.0 && divisor.is_finite()) {
        return Err(Error::Invalid(format!("intensity divisor must be > 0, got {divisor}")));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header_err = |message: String| Error::Parse {
        path: source.to_string(),
        line: 0,
        message,
    };
    let headers = rdr.headers().map_err(|e| header_err(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["u", "v", "intensity"] {
        return Err(header_err(format!("expected header `u,v,intensity`, got `{}`", headers.iter().collect::<Vec<_>>().join(","))));
    }

    let mut sum = vec![0.0; width * height];
    let mut count = vec![0u32; width * height];
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let err = |message: String| Error::Parse {
            path: source.to_string(),
            line: row,
            message,
        };
        let rec = rec.map_err(|e| err(e.to_string()))?;
        if rec.len() != 3 {
            return Err(err(format!("expected 3 fields, got {}", rec.len())));
        }
        let coord = |k: usize, name: &str| -> Result<i64> {
            rec[k].parse::<i64>().map_err(|_| err(format!("{name} `{}` is not an integer", &rec[k])))
        };
        let (u, v) = (coord(0, "u")?, coord(1, "v")?);
        let raw: f64 = rec[2]
            .parse()
            .map_err(|_| err(format!("intensity `{}` is not a number", &rec[2])))?;
        if u < 0 || v < 0 || u as usize >= width || v as usize >= height {
            return Err(err(format!("coordinate ({u}, {v}) outside {width}x{height} image")));
        }
        let val = raw / divisor;
        if !(0.0..=1.0).contains(&val) {
            return Err(err(format!("intensity {raw} / {divisor} = {val} outside [0, 1]")));
        }
        let p = v as usize * width + u as usize;
        sum[p] += val;
        count[p] += 1;
    }
    let mask: Vec<bool> = count.iter().map(|&c| c > 0).collect();
    let values = sum.iter().zip(&count).map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect();
    SparseIntensity::new(GrayMap::new(width, height, values)?, mask)
}

/// Writes observed pixels as `u,v,intensity` rows, intensity multiplied by `divisor`.
pub fn write_lidar_csv(path: &Path, lidar: &SparseIntensity, divisor: f64) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let (width, _) = lidar.dims();
    let io = |e| Error::io(path, e);
    writeln!(w, "u,v,intensity").map_err(io)?;
    for (p, (&m, &v)) in lidar.mask().iter().zip(lidar.values().values()).enumerate() {
        if m {
            writeln!(w, "{},{},{}", p % width, p / width, v * divisor).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

fn default_divisor() -> f64 {
    1.0
}

/// One manifest entry. Paths are relative to the manifest's directory.
///
/// `lidar` ending in `.csv` is read as `u,v,intensity` rows scaled by
/// `lidar_divisor`; anything else is a 16-bit PNG that needs `lidar_mask`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub image: PathBuf,
    pub lidar: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lidar_mask: Option<PathBuf>,
    #[serde(default = "default_divisor")]
    pub lidar_divisor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<PathBuf>,
}

/// Loads a JSON array of [`Sample`]s. Empty manifests and duplicate ids are rejected.
pub fn read_manifest(path: &Path) -> Result<Vec<Sample>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let samples: Vec<Sample> = serde_json::from_reader(BufReader::new(f))?;
    if samples.is_empty() {
        return Err(Error::Invalid(format!("{}: manifest has no samples", path.display())));
    }
    let mut seen = HashSet::new();
    for s in &samples {
        if !seen.insert(s.id.as_str()) {
            return Err(Error::Invalid(format!("{}: duplicate sample id {:?}", path.display(), s.id)));
        }
    }
    Ok(samples)
}

pub fn write_manifest(path: &Path, samples: &[Sample]) -> Result<()> {
    write_json(path, &samples)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone)]
pub struct LoadedSample {
    pub id: String,
    pub image: LinearImage,
    pub lidar: SparseIntensity,
    pub annotations: Option<Vec<AnnotationPair>>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Loads one sample's image, intensity and optional pairs, resolving paths against `base`.
pub fn load_sample(sample: &Sample, base: &Path, gamma: GammaConfig, map: &FieldMap) -> Result<LoadedSample> {
    let image = load_image(&resolve(base, &sample.image), gamma)?;
    let lidar_path = resolve(base, &sample.lidar);
    let is_csv = lidar_path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let lidar = if is_csv {
        read_lidar_csv(&lidar_path, image.dims(), sample.lidar_divisor)?
    } else {
        let mask = sample.lidar_mask.as_ref().ok_or_else(|| {
            Error::Invalid(format!("sample {:?}: PNG intensity needs `lidar_mask`", sample.id))
        })?;
        load_lidar_png(&lidar_path, &resolve(base, mask))?
    };
    if lidar.dims() != image.dims() {
        return Err(Error::ShapeMismatch {
            expected: image.dims(),
            found: lidar.dims(),
        });
    }
    let annotations = match &sample.annotations {
        Some(p) => Some(read_annotations(&resolve(base, p), Some(image.dims()), map)?),
        None => None,
    };
    Ok(LoadedSample {
        id: sample.id.clone(),
        image,
        lidar,
        annotations,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SceneMeta {
    seed: u64,
    width: usize,
    height: usize,
    shadow: Option<HalfPlane>,
    config: SynthConfig,
}

pub const SCENE_META: &str = "scene.json";

/// Writes a scene to `dir`: linear arrays for exact reload, a gamma-encoded
/// `image.png` for the regular loaders, and a one-sample `manifest.json`.
/// Returns the manifest entry.
pub fn save_scene(dir: &Path, scene: &SynthScene, cfg: &SynthConfig, gamma: GammaConfig) -> Result<Sample> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (w, h) = scene.image.dims();
    save_image(&dir.join("image.png"), &scene.image, gamma)?;
    save_linear(&dir.join("image_linear.png"), &scene.image)?;
    save_linear(&dir.join("albedo.png"), &scene.albedo)?;
    write_gray16(&dir.join("shade.png"), &scene.shade)?;
    save_lidar_png(&dir.join("lidar.png"), &dir.join("lidar_mask.png"), &scene.lidar)?;

    let path = dir.join("regions.png");
    let raw = scene
        .regions
        .iter()
        .map(|&r| u16::try_from(r).map_err(|_| Error::Invalid(format!("region index {r} exceeds 16 bits"))))
        .collect::<Result<Vec<u16>>>()?;
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(dim_u32(&path, w)?, dim_u32(&path, h)?, raw)
        .ok_or_else(|| Error::Invalid("bad region buffer".into()))?;
    buf.save_with_format(&path, ImageFormat::Png).map_err(|e| image_err(&path, e))?;

    write_json(
        &dir.join(SCENE_META),
        &SceneMeta {
            seed: scene.seed,
            width: w,
            height: h,
            shadow: scene.shadow,
            config: *cfg,
        },
    )?;
    let sample = Sample {
        id: format!("synth-{}", scene.seed),
        image: "image.png".into(),
        lidar: "lidar.png".into(),
        lidar_mask: Some("lidar_mask.png".into()),
        lidar_divisor: 1.0,
        annotations: None,
    };
    write_manifest(&dir.join("manifest.json"), std::slice::from_ref(&sample))?;
    Ok(sample)
}

/// Reloads a scene written by [`save_scene`], with its generator config.
pub fn load_scene(dir: &Path) -> Result<(SynthScene, SynthConfig)> {
    let meta_path = dir.join(SCENE_META);
    let f = File::open(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: SceneMeta = serde_json::from_reader(BufReader::new(f))?;
    let image = load_linear(&dir.join("image_linear.png"))?;
    let albedo = load_linear(&dir.join("albedo.png"))?;
    let shade = read_gray(&dir.join("shade.png"))?;
    let lidar = load_lidar_png(&dir.join("lidar.png"), &dir.join("lidar_mask.png"))?;
    let regions_path = dir.join("regions.png");
    let regions: Vec<usize> = open_png(&regions_path)?
        .to_luma16()
        .pixels()
        .map(|p| p.0[0] as usize)
        .collect();
    let dims = (meta.width, meta.height);
    for found in [image.dims(), albedo.dims(), shade.dims(), lidar.dims()] {
        if found != dims {
            return Err(Error::ShapeMismatch { expected: dims, found });
        }
    }
    if regions.len() != image.len() {
        return Err(Error::LengthMismatch {
            context: "regions vs pixels",
            left: regions.len(),
            right: image.len(),
        });
    }
    Ok((
        SynthScene {
            image,
            albedo,
            shade,
            lidar,
            regions,
            shadow: meta.shadow,
            seed: meta.seed,
        },
        meta.config,
    ))
}
