//! Loss terms of the decomposition objective.
//!
//! Every function here is pure arithmetic over caller-supplied arrays. The
//! amplitude losses are means over pixels (and channels where applicable), so
//! the default weights do not depend on resolution. The latent-code and
//! discriminator terms take network outputs as plain slices; nothing here
//! trains or runs a network.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{chroma, luma, neighbor_pairs, Connectivity, Edge, GrayMap, LinearImage};

/// Albedo is floored here before taking logs.
pub const LOG_FLOOR: f64 = 1e-4;
/// LiDAR intensity is floored here inside the `F(I) / L` ratio.
pub const RATIO_FLOOR: f64 = 1e-3;
/// Discriminator scores are clamped into `[SCORE_CLAMP, 1 - SCORE_CLAMP]`.
pub const SCORE_CLAMP: f64 = 1e-7;

/// Weights of the eight-term objective; the adversarial term has unit weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub content: f64,
    pub kl: f64,
    pub image_recon: f64,
    pub prior_recon: f64,
    pub physical: f64,
    pub smooth: f64,
    pub intensity: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            content: 10.0,
            kl: 0.1,
            image_recon: 10.0,
            prior_recon: 0.1,
            physical: 5.0,
            smooth: 1.0,
            intensity: 20.0,
        }
    }
}

impl LossWeights {
    pub fn as_array(&self) -> [f64; 7] {
        [
            self.content,
            self.kl,
            self.image_recon,
            self.prior_recon,
            self.physical,
            self.smooth,
            self.intensity,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if self.as_array().iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(Error::Invalid(format!("loss weights must be finite and >= 0: {self:?}")))
        }
    }
}

/// Bandwidths of the diagonal feature covariance used by the smoothness weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AffinityConfig {
    pub connectivity: Connectivity,
    pub sigma_pos: f64,
    pub sigma_lum: f64,
    pub sigma_chroma: f64,
}

impl Default for AffinityConfig {
    fn default() -> Self {
        Self {
            connectivity: Connectivity::Four,
            sigma_pos: 0.1,
            sigma_lum: 0.1,
            sigma_chroma: 0.05,
        }
    }
}

impl AffinityConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.sigma_pos, self.sigma_lum, self.sigma_chroma]
            .iter()
            .all(|s| s.is_finite() && *s > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("affinity bandwidths must be > 0: {self:?}")))
        }
    }
}

/// Per-pixel feature: normalized position, luminance and chromaticity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub x: f64,
    pub y: f64,
    pub lum: f64,
    pub r: f64,
    pub g: f64,
}

/// Feature vectors of every pixel; positions are normalized to `[0, 1]`.
pub fn features(img: &LinearImage) -> Vec<FeatureVector> {
    let (w, h) = img.dims();
    let sx = 1.0 / (w - 1) as f64;
    let sy = 1.0 / (h - 1) as f64;
    img.pixels()
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let [r, g] = chroma(p);
            FeatureVector {
                x: (i % w) as f64 * sx,
                y: (i / w) as f64 * sy,
                lum: luma(p),
                r,
                g,
            }
        })
        .collect()
}

/// Gaussian affinity `exp(-0.5 d^T Sigma^-1 d)` with diagonal `Sigma`.
pub fn affinity(fi: &FeatureVector, fj: &FeatureVector, cfg: &AffinityConfig) -> f64 {
    let q = ((fi.x - fj.x) / cfg.sigma_pos).powi(2)
        + ((fi.y - fj.y) / cfg.sigma_pos).powi(2)
        + ((fi.lum - fj.lum) / cfg.sigma_lum).powi(2)
        + ((fi.r - fj.r) / cfg.sigma_chroma).powi(2)
        + ((fi.g - fj.g) / cfg.sigma_chroma).powi(2);
    (-0.5 * q).exp()
}

/// Affinity-weighted neighbor edges of the image graph, each unordered pair once.
pub fn affinity_edges(img: &LinearImage, cfg: &AffinityConfig) -> Vec<Edge> {
    let f = features(img);
    neighbor_pairs(img.width(), img.height(), cfg.connectivity)
        .into_iter()
        .map(|(a, b)| Edge {
            a,
            b,
            weight: affinity(&f[a], &f[b], cfg),
        })
        .collect()
}

fn check_shape(expected: (usize, usize), found: (usize, usize)) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { expected, found })
    }
}

fn check_len(context: &'static str, left: usize, right: usize) -> Result<()> {
    if left == right {
        Ok(())
    } else {
        Err(Error::LengthMismatch { context, left, right })
    }
}

/// Mean over pixels and channels of `|I - R * S|`, shade broadcast over channels.
pub fn physical_loss(image: &LinearImage, albedo: &LinearImage, shade: &GrayMap) -> Result<f64> {
    check_shape(image.dims(), albedo.dims())?;
    check_shape(image.dims(), shade.dims())?;
    let total: f64 = image
        .pixels()
        .iter()
        .zip(albedo.pixels())
        .zip(shade.values())
        .map(|((i, r), &s)| (0..3).map(|c| (i[c] - r[c] * s).abs()).sum::<f64>())
        .sum();
    Ok(total / (3 * image.len()) as f64)
}

/// Unnormalized `sum_edges v * |log R_a - log R_b|_1` over explicit edges.
pub fn smooth_loss_sum(albedo: &[[f64; 3]], edges: &[Edge]) -> f64 {
    let logs: Vec<[f64; 3]> = albedo
        .iter()
        .map(|p| p.map(|v| v.max(LOG_FLOOR).ln()))
        .collect();
    edges
        .iter()
        .map(|e| {
            let (la, lb) = (logs[e.a], logs[e.b]);
            e.weight * ((la[0] - lb[0]).abs() + (la[1] - lb[1]).abs() + (la[2] - lb[2]).abs())
        })
        .sum()
}

/// Affinity-weighted L1 difference of log-albedo between neighbors, divided
/// by the pixel count. Weights come from features of `image`.
pub fn smooth_loss(albedo: &LinearImage, image: &LinearImage, cfg: &AffinityConfig) -> Result<f64> {
    check_shape(image.dims(), albedo.dims())?;
    let edges = affinity_edges(image, cfg);
    Ok(smooth_loss_sum(albedo.pixels(), &edges) / albedo.len() as f64)
}

/// Scale and bias relating LiDAR intensity to albedo luminance (`s1`, `b1`)
/// and `F(I) / L` to shade luminance (`s2`, `b2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleBias {
    pub s1: f64,
    pub b1: f64,
    pub s2: f64,
    pub b2: f64,
}

impl Default for ScaleBias {
    fn default() -> Self {
        Self {
            s1: 1.0,
            b1: 0.0,
            s2: 1.0,
            b2: 0.0,
        }
    }
}

/// Masked mean of `|F(R) - s1 L - b1| + |F(S) - s2 F(I)/L - b2|`.
///
/// Shade is single-channel, so `F(S) = S`.
pub fn intensity_consistency_loss(
    image: &LinearImage,
    albedo: &LinearImage,
    shade: &GrayMap,
    lidar: &GrayMap,
    mask: &[bool],
    sb: &ScaleBias,
) -> Result<f64> {
    check_shape(image.dims(), albedo.dims())?;
    check_shape(image.dims(), shade.dims())?;
    check_shape(image.dims(), lidar.dims())?;
    check_len("mask vs pixels", mask.len(), image.len())?;
    let mut total = 0.0;
    let mut count = 0usize;
    for p in 0..image.len() {
        if !mask[p] {
            continue;
        }
        let l = lidar.values()[p];
        let fr = luma(albedo.pixels()[p]);
        let fi = luma(image.pixels()[p]);
        let s = shade.values()[p];
        total += (fr - sb.s1 * l - sb.b1).abs() + (s - sb.s2 * (fi / l.max(RATIO_FLOOR)) - sb.b2).abs();
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(total / count as f64)
}

/// Least-squares line `target ~ slope * source + intercept` over a mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Source was constant on the mask; the fit fell back to `(0, mean(target))`.
    pub degenerate: bool,
}

/// Closed-form masked least squares with the slope clamped to `>= 0`.
pub fn fit_scale_bias(target: &[f64], source: &[f64], mask: &[bool]) -> Result<LineFit> {
    check_len("fit target vs source", target.len(), source.len())?;
    check_len("fit mask vs source", mask.len(), source.len())?;
    let mut n = 0usize;
    let (mut ms, mut mt) = (0.0, 0.0);
    for ((&t, &s), &m) in target.iter().zip(source).zip(mask) {
        if m {
            n += 1;
            ms += s;
            mt += t;
        }
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    ms /= n as f64;
    mt /= n as f64;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for ((&t, &s), &m) in target.iter().zip(source).zip(mask) {
        if m {
            sxx += (s - ms) * (s - ms);
            sxy += (s - ms) * (t - mt);
        }
    }
    if sxx <= 1e-14 * n as f64 * (ms * ms).max(1e-12) {
        return Ok(LineFit {
            slope: 0.0,
            intercept: mt,
            degenerate: true,
        });
    }
    let slope = (sxy / sxx).max(0.0);
    Ok(LineFit {
        slope,
        intercept: mt - slope * ms,
        degenerate: false,
    })
}

fn mean_abs_diff(context: &'static str, a: &[f64], b: &[f64]) -> Result<f64> {
    check_len(context, a.len(), b.len())?;
    if a.is_empty() {
        return Err(Error::Invalid(format!("{context}: empty arrays")));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

fn mean(context: &'static str, a: &[f64]) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::Invalid(format!("{context}: empty array")));
    }
    Ok(a.iter().sum::<f64>() / a.len() as f64)
}

/// `mean|c_R - c_I| + mean|c_S - c_I|` over content codes.
pub fn content_loss(content_image: &[f64], content_albedo: &[f64], content_shade: &[f64]) -> Result<f64> {
    Ok(mean_abs_diff("albedo vs image content", content_albedo, content_image)?
        + mean_abs_diff("shade vs image content", content_shade, content_image)?)
}

/// Monte-Carlo estimate `mean(log p_R - log q_R) + mean(log p_S - log q_S)`.
pub fn kl_loss(logp_albedo: &[f64], logq_albedo: &[f64], logp_shade: &[f64], logq_shade: &[f64]) -> Result<f64> {
    check_len("albedo log-density samples", logp_albedo.len(), logq_albedo.len())?;
    check_len("shade log-density samples", logp_shade.len(), logq_shade.len())?;
    Ok(mean("albedo log p", logp_albedo)? - mean("albedo log q", logq_albedo)?
        + mean("shade log p", logp_shade)?
        - mean("shade log q", logq_shade)?)
}

/// Sum over domains of `mean|reconstructed - original|`.
pub fn image_recon_loss(domains: &[(&[f64], &[f64])]) -> Result<f64> {
    domains
        .iter()
        .map(|(rec, orig)| mean_abs_diff("image reconstruction", rec, orig))
        .sum()
}

/// Sum over domains of `mean|recovered prior - prior|`.
pub fn prior_recon_loss(domains: &[(&[f64], &[f64])]) -> Result<f64> {
    domains
        .iter()
        .map(|(rec, orig)| mean_abs_diff("prior reconstruction", rec, orig))
        .sum()
}

fn mean_log(context: &'static str, scores: &[f64], complement: bool) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Invalid(format!("{context}: empty score array")));
    }
    let total: f64 = scores
        .iter()
        .map(|&s| {
            let s = s.clamp(SCORE_CLAMP, 1.0 - SCORE_CLAMP);
            if complement {
                (1.0 - s).ln()
            } else {
                s.ln()
            }
        })
        .sum();
    Ok(total / scores.len() as f64)
}

/// `mean log(1 - D_R(fake)) + mean log D_R(real) + mean log(1 - D_S(fake)) + mean log D_S(real)`.
pub fn adversarial_loss(
    d_albedo_fake: &[f64],
    d_albedo_real: &[f64],
    d_shade_fake: &[f64],
    d_shade_real: &[f64],
) -> Result<f64> {
    Ok(mean_log("albedo fake", d_albedo_fake, true)?
        + mean_log("albedo real", d_albedo_real, false)?
        + mean_log("shade fake", d_shade_fake, true)?
        + mean_log("shade real", d_shade_real, false)?)
}

/// Latent codes, log-densities and discriminator scores produced by an
/// external encoder/generator/discriminator stack.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LatentBundle {
    pub content_image: Vec<f64>,
    pub content_albedo: Vec<f64>,
    pub content_shade: Vec<f64>,
    pub logp_albedo: Vec<f64>,
    pub logq_albedo: Vec<f64>,
    pub logp_shade: Vec<f64>,
    pub logq_shade: Vec<f64>,
    pub d_albedo_fake: Vec<f64>,
    pub d_albedo_real: Vec<f64>,
    pub d_shade_fake: Vec<f64>,
    pub d_shade_real: Vec<f64>,
}

impl LatentBundle {
    pub fn content_loss(&self) -> Result<f64> {
        content_loss(&self.content_image, &self.content_albedo, &self.content_shade)
    }

    pub fn kl_loss(&self) -> Result<f64> {
        kl_loss(&self.logp_albedo, &self.logq_albedo, &self.logp_shade, &self.logq_shade)
    }

    pub fn adversarial_loss(&self) -> Result<f64> {
        adversarial_loss(
            &self.d_albedo_fake,
            &self.d_albedo_real,
            &self.d_shade_fake,
            &self.d_shade_real,
        )
    }
}

/// The eight loss values entering the weighted objective.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub adversarial: f64,
    pub content: f64,
    pub kl: f64,
    pub image_recon: f64,
    pub prior_recon: f64,
    pub physical: f64,
    pub smooth: f64,
    pub intensity: f64,
}

/// `adv + sum_k lambda_k * part_k`.
pub fn total_objective(parts: &LossParts, w: &LossWeights) -> f64 {
    parts.adversarial
        + w.content * parts.content
        + w.kl * parts.kl
        + w.image_recon * parts.image_recon
        + w.prior_recon * parts.prior_recon
        + w.physical * parts.physical
        + w.smooth * parts.smooth
        + w.intensity * parts.intensity
}
