//! LiDAR intensity densification.
//!
//! Sparse, occluded per-pixel intensity is completed into a dense map by
//! minimizing
//!
//! ```text
//! sum_p m(p) (x(p) - x0(p))^2  +  lambda * sum_(i,j) w(i,j) (x(i) - x(j))^2
//! ```
//!
//! over the 4-connected pixel graph, with `w(i,j) = exp(-|rgb_i - rgb_j|^2 / (2 sigma^2))`
//! taken from the guide image so intensity does not bleed across image edges.
//! The normal equations `(M + lambda L_w) x = M x0` are solved by
//! Jacobi-preconditioned conjugate gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{neighbor_pairs, Connectivity, Edge, GrayMap, LinearImage};
use crate::linalg::{pcg, WeightedLaplacian};

/// Per-pixel intensity plus its observation mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseIntensity {
    values: GrayMap,
    mask: Vec<bool>,
}

impl SparseIntensity {
    /// Validates that every observed value lies in `[0, 1]`. Unobserved values
    /// are ignored and stored as 0.
    pub fn new(values: GrayMap, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != values.len() {
            return Err(Error::LengthMismatch {
                context: "intensity mask vs values",
                left: mask.len(),
                right: values.len(),
            });
        }
        let (w, h) = values.dims();
        let mut data = values.into_values();
        for (i, (v, &m)) in data.iter_mut().zip(&mask).enumerate() {
            if !m {
                *v = 0.0;
            } else if !(0.0..=1.0).contains(v) {
                return Err(Error::InvalidPixel {
                    x: i % w,
                    y: i / w,
                    channel: 0,
                    value: *v,
                    reason: "observed intensity outside [0, 1]",
                });
            }
        }
        Ok(Self {
            values: GrayMap::new(w, h, data)?,
            mask,
        })
    }

    /// Fully observed intensity map.
    pub fn dense(values: GrayMap) -> Result<Self> {
        let n = values.len();
        Self::new(values, vec![true; n])
    }

    pub fn values(&self) -> &GrayMap {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dims()
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DensifyParams {
    pub lambda_reg: f64,
    pub sigma_rgb: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub connectivity: Connectivity,
}

impl Default for DensifyParams {
    fn default() -> Self {
        Self {
            lambda_reg: 1.0,
            sigma_rgb: 0.1,
            max_iters: 2000,
            tol: 1e-8,
            connectivity: Connectivity::Four,
        }
    }
}

impl DensifyParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lambda_reg > 0.0
            && self.sigma_rgb > 0.0
            && self.max_iters >= 1
            && self.tol > 0.0
            && self.lambda_reg.is_finite()
            && self.sigma_rgb.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("invalid densify parameters {self:?}")))
        }
    }
}

/// Dense intensity map together with the original observation mask.
#[derive(Debug, Clone)]
pub struct Densified {
    pub intensity: GrayMap,
    pub observed: Vec<bool>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Gaussian color-similarity weight on every neighbor pair of the guide image.
pub fn affinity_weights(img: &LinearImage, sigma_rgb: f64, conn: Connectivity) -> Vec<Edge> {
    let px = img.pixels();
    let inv = 1.0 / (2.0 * sigma_rgb * sigma_rgb);
    neighbor_pairs(img.width(), img.height(), conn)
        .into_iter()
        .map(|(a, b)| {
            let d2: f64 = (0..3).map(|c| (px[a][c] - px[b][c]).powi(2)).sum();
            Edge {
                a,
                b,
                weight: (-d2 * inv).exp(),
            }
        })
        .collect()
}

/// Completes `sparse` into a dense map guided by `img`.
pub fn densify(img: &LinearImage, sparse: &SparseIntensity, params: &DensifyParams) -> Result<Densified> {
    params.validate()?;
    if sparse.dims() != img.dims() {
        return Err(Error::ShapeMismatch {
            expected: img.dims(),
            found: sparse.dims(),
        });
    }
    let observed = sparse.observed_count();
    if observed == 0 {
        return Err(Error::EmptyMask);
    }

    let edges = affinity_weights(img, params.sigma_rgb, params.connectivity);
    let data_weight: Vec<f64> = sparse.mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
    let rhs: Vec<f64> = sparse
        .values
        .values()
        .iter()
        .zip(&data_weight)
        .map(|(v, d)| v * d)
        .collect();

    let mean = rhs.iter().sum::<f64>() / observed as f64;
    let mut x: Vec<f64> = sparse
        .mask
        .iter()
        .zip(sparse.values.values())
        .map(|(&m, &v)| if m { v } else { mean })
        .collect();

    let op = WeightedLaplacian {
        data_weight: &data_weight,
        edges: &edges,
        lambda: params.lambda_reg,
    };
    let outcome = pcg(&op, &rhs, &mut x, params.tol, params.max_iters);
    if !outcome.converged && outcome.relative_residual > 10.0 * params.tol {
        return Err(Error::NonConvergence {
            iterations: outcome.iterations,
            residual: outcome.relative_residual,
        });
    }

    x.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    let (w, h) = img.dims();
    Ok(Densified {
        intensity: GrayMap::new(w, h, x)?,
        observed: sparse.mask.clone(),
        iterations: outcome.iterations,
        relative_residual: outcome.relative_residual,
    })
}

/// Keeps each observed pixel independently with probability `keep_fraction`.
pub fn subsample_mask(sparse: &SparseIntensity, keep_fraction: f64, seed: u64) -> Result<SparseIntensity> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::Invalid(format!(
            "keep fraction must be in (0, 1], got {keep_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask = sparse
        .mask
        .iter()
        .map(|&m| m && rng.random::<f64>() < keep_fraction)
        .collect();
    SparseIntensity::new(sparse.values.clone(), mask)
}
