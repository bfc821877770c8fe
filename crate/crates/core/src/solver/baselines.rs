//! Non-learned comparison methods.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::imagecore::{chroma, luma, neighbor_pairs, Connectivity, Edge, GrayMap, LinearImage};
use crate::linalg::{pcg, WeightedLaplacian};
use crate::losses::{ScaleBias, LOG_FLOOR};

use super::Decomposition;

/// Albedo fixed to 1, shade is the image luminance. No reconstruction guarantee.
pub fn baseline_r(image: &LinearImage) -> Result<Decomposition> {
    let (w, h) = image.dims();
    Ok(Decomposition {
        albedo: LinearImage::filled(w, h, [1.0; 3])?,
        shade: GrayMap::new(w, h, image.pixels().iter().map(|&p| luma(p)).collect())?,
        scale_bias: ScaleBias::default(),
    })
}

/// Shade fixed to 1, albedo is the image.
pub fn baseline_s(image: &LinearImage) -> Result<Decomposition> {
    let (w, h) = image.dims();
    Ok(Decomposition {
        albedo: image.clone(),
        shade: GrayMap::filled(w, h, 1.0)?,
        scale_bias: ScaleBias::default(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetinexParams {
    /// Log-luminance gradients above this are attributed to albedo.
    pub threshold: f64,
    /// Also attribute gradients with a chromaticity change above `threshold`.
    pub use_color: bool,
}

impl Default for RetinexParams {
    fn default() -> Self {
        Self {
            threshold: 0.1,
            use_color: false,
        }
    }
}

/// Classic gradient-classification Retinex.
///
/// Neighbor differences of log luminance larger than `threshold` (or, with
/// `use_color`, a chromaticity change larger than `threshold`) are kept as
/// albedo gradients, the rest are zeroed. Log albedo luminance is recovered by
/// least-squares integration of the kept gradients; shade is the remaining
/// luminance ratio and color albedo is `I / S`, scaled so its brightest
/// channel is 1.
pub fn retinex(image: &LinearImage, threshold: f64, use_color: bool) -> Result<Decomposition> {
    if !(threshold > 0.0) {
        return Err(crate::Error::Invalid(format!("retinex threshold must be > 0, got {threshold}")));
    }
    let (w, h) = image.dims();
    let n = image.len();
    let px = image.pixels();
    let loglum: Vec<f64> = px.iter().map(|&p| luma(p).max(LOG_FLOOR).ln()).collect();
    let chr: Vec<[f64; 2]> = px.iter().map(|&p| chroma(p)).collect();

    let pairs = neighbor_pairs(w, h, Connectivity::Four);
    let mut rhs = vec![0.0; n];
    for &(a, b) in &pairs {
        let d = loglum[b] - loglum[a];
        let dc = ((chr[b][0] - chr[a][0]).powi(2) + (chr[b][1] - chr[a][1]).powi(2)).sqrt();
        let is_albedo = d.abs() > threshold || (use_color && dc > threshold);
        if is_albedo {
            rhs[b] += d;
            rhs[a] -= d;
        }
    }
    let edges: Vec<Edge> = pairs.iter().map(|&(a, b)| Edge { a, b, weight: 1.0 }).collect();
    // tiny ridge fixes the free additive constant
    let ridge = vec![1e-9; n];
    let op = WeightedLaplacian {
        data_weight: &ridge,
        edges: &edges,
        lambda: 1.0,
    };
    let mut log_albedo = vec![0.0; n];
    pcg(&op, &rhs, &mut log_albedo, 1e-10, 20 * n.max(100));

    let mut shade: Vec<f64> = loglum.iter().zip(&log_albedo).map(|(l, r)| (l - r).exp()).collect();
    let peak = px
        .iter()
        .zip(&shade)
        .map(|(p, s)| p[0].max(p[1]).max(p[2]) / s)
        .fold(0.0f64, f64::max);
    if peak > 0.0 {
        shade.iter_mut().for_each(|s| *s *= peak);
    }
    let albedo = px
        .iter()
        .zip(&shade)
        .map(|(p, s)| p.map(|v| (v / s).clamp(LOG_FLOOR, 1.0)))
        .collect();
    Ok(Decomposition {
        albedo: LinearImage::new(w, h, albedo)?,
        shade: GrayMap::new(w, h, shade)?,
        scale_bias: ScaleBias::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_r_examples() {
        let d = baseline_r(&LinearImage::filled(3, 3, [0.3; 3]).unwrap()).unwrap();
        assert!(d.albedo.pixels().iter().all(|p| *p == [1.0; 3]));
        assert!(d.shade.values().iter().all(|s| (s - 0.3).abs() < 1e-15));
        let d = baseline_r(&LinearImage::filled(3, 3, [0.0; 3]).unwrap()).unwrap();
        assert!(d.shade.values().iter().all(|&s| s == 0.0));
        let img = LinearImage::from_fn(4, 3, |x, y| [0.1 * x as f64, 0.2 * y as f64, 0.05]).unwrap();
        let d = baseline_r(&img).unwrap();
        for (s, p) in d.shade.values().iter().zip(img.pixels()) {
            assert_eq!(*s, luma(*p));
        }
    }

    #[test]
    fn baseline_s_examples() {
        let img = LinearImage::from_fn(4, 3, |x, y| [0.1 * x as f64, 0.2 * y as f64, 0.05]).unwrap();
        let d = baseline_s(&img).unwrap();
        assert_eq!(d.albedo, img);
        assert!(d.shade.values().iter().all(|&s| s == 1.0));
        let black = LinearImage::filled(2, 2, [0.0; 3]).unwrap();
        assert!(baseline_s(&black).unwrap().albedo.pixels().iter().all(|p| *p == [0.0; 3]));
        let white = LinearImage::filled(2, 2, [1.0; 3]).unwrap();
        assert!(baseline_s(&white).unwrap().albedo.pixels().iter().all(|p| *p == [1.0; 3]));
    }

    fn spread(v: impl Iterator<Item = f64>) -> f64 {
        let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
        hi - lo
    }

    #[test]
    fn retinex_constant_image() {
        let img = LinearImage::filled(8, 8, [0.2, 0.4, 0.3]).unwrap();
        for color in [false, true] {
            let d = retinex(&img, 0.1, color).unwrap();
            assert!(spread(d.shade.values().iter().copied()) < 1e-9);
            assert!(spread(d.albedo.pixels().iter().map(|p| p[1])) < 1e-9);
        }
    }

    #[test]
    fn retinex_step_goes_to_albedo() {
        let img = LinearImage::from_fn(16, 8, |x, _| [if x < 8 { 0.2 } else { 0.6 }; 3]).unwrap();
        let d = retinex(&img, 0.1, false).unwrap();
        assert!(spread(d.shade.values().iter().copied()) < 1e-6);
        let left = luma(d.albedo.get(2, 3));
        let right = luma(d.albedo.get(13, 3));
        assert!((right / left - 3.0).abs() < 1e-6);
    }

    #[test]
    fn retinex_ramp_goes_to_shade() {
        // log-luminance step per pixel = ln(1.03) < 0.1
        let img = LinearImage::from_fn(16, 8, |x, _| [0.3 * 1.03f64.powi(x as i32); 3]).unwrap();
        let d = retinex(&img, 0.1, true).unwrap();
        assert!(spread(d.albedo.pixels().iter().map(|p| p[0])) < 1e-6);
        let s = d.shade.values();
        assert!((s[15] / s[0] - 1.03f64.powi(15)).abs() < 1e-6);
        assert!(retinex(&img, 0.0, false).is_err());
    }
}
