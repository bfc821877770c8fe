//! The measurable part of the decomposition energy as a function of log-shade.
//!
//! With `u = log S` and `R = I * exp(-u)` the reconstruction `I = R S` holds
//! identically, so only the smoothness and intensity-consistency terms remain:
//!
//! ```text
//! E(u) = w_smooth / N * sum_edges v_ab * sum_c H(log R_ac - log R_bc)
//!      + w_int / M * sum_mask [ H(F(R) - s1 L - b1) + H(S - s2 F(I)/L - b2) ]
//! ```
//!
//! `H` is the Huber function with a tiny threshold so that the gradient
//! exists everywhere while the value stays within `delta / 2` of `|t|`.

use crate::error::{Error, Result};
use crate::imagecore::{luma, Edge, GrayMap, LinearImage, LUMA_WEIGHTS};
use crate::losses::{affinity_edges, ScaleBias, LOG_FLOOR, RATIO_FLOOR};

use super::SolverConfig;

/// Shade never drops below this, even on black pixels.
pub const SHADE_FLOOR: f64 = 1e-6;

#[inline]
fn huber(t: f64, delta: f64) -> f64 {
    let a = t.abs();
    if a <= delta {
        0.5 * t * t / delta
    } else {
        a - 0.5 * delta
    }
}

#[inline]
fn huber_grad(t: f64, delta: f64) -> f64 {
    if t.abs() <= delta {
        t / delta
    } else {
        t.signum()
    }
}

/// Everything the energy needs that does not change with `u`.
#[derive(Debug, Clone)]
pub struct ObjectiveState {
    width: usize,
    height: usize,
    image: Vec<[f64; 3]>,
    log_image: Vec<[f64; 3]>,
    lum: Vec<f64>,
    lidar: Vec<f64>,
    ratio: Vec<f64>,
    mask: Vec<bool>,
    mask_count: usize,
    edges: Vec<Edge>,
    smooth_weight: f64,
    intensity_weight: f64,
    delta: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    pub scale_bias: ScaleBias,
}

impl ObjectiveState {
    pub fn new(image: &LinearImage, lidar: &GrayMap, mask: &[bool], cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        if lidar.dims() != image.dims() {
            return Err(Error::ShapeMismatch {
                expected: image.dims(),
                found: lidar.dims(),
            });
        }
        if mask.len() != image.len() {
            return Err(Error::LengthMismatch {
                context: "mask vs pixels",
                left: mask.len(),
                right: image.len(),
            });
        }
        let mask_count = mask.iter().filter(|&&m| m).count();
        if cfg.weights.intensity > 0.0 && mask_count == 0 {
            return Err(Error::EmptyMask);
        }

        let px = image.pixels();
        let lum: Vec<f64> = px.iter().map(|&p| luma(p)).collect();
        let ratio = lum
            .iter()
            .zip(lidar.values())
            .map(|(f, l)| f / l.max(RATIO_FLOOR))
            .collect();
        let (lower, upper) = px
            .iter()
            .map(|p| {
                let hi_c = p[0].max(p[1]).max(p[2]);
                let lo_c = p[0].min(p[1]).min(p[2]);
                let lo = hi_c.max(SHADE_FLOOR).ln();
                let hi = (lo_c / LOG_FLOOR).ln();
                (lo, if hi > lo { hi } else { lo })
            })
            .unzip();

        Ok(Self {
            width: image.width(),
            height: image.height(),
            image: px.to_vec(),
            log_image: px.iter().map(|p| p.map(f64::ln)).collect(),
            lum,
            lidar: lidar.values().to_vec(),
            ratio,
            mask: mask.to_vec(),
            mask_count,
            edges: affinity_edges(image, &cfg.affinity),
            smooth_weight: cfg.weights.smooth,
            intensity_weight: cfg.weights.intensity,
            delta: cfg.huber_delta,
            lower,
            upper,
            scale_bias: ScaleBias::default(),
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn uses_intensity(&self) -> bool {
        self.intensity_weight > 0.0
    }

    /// Per-pixel feasible interval for `u`: inside it every albedo channel
    /// lies in `[LOG_FLOOR, 1]` and `I = R S` holds exactly.
    pub fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.lower, &self.upper)
    }

    pub fn project(&self, u: &mut [f64]) {
        for ((v, &lo), &hi) in u.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(lo, hi);
        }
    }

    /// `log R` per channel with the floor and unit ceiling applied, plus a
    /// flag telling whether the channel is free (not clamped).
    #[inline]
    fn log_albedo(&self, p: usize, u: f64) -> ([f64; 3], [bool; 3]) {
        let floor = LOG_FLOOR.ln();
        let mut out = [0.0; 3];
        let mut free = [true; 3];
        for c in 0..3 {
            let v = self.log_image[p][c] - u;
            if v < floor {
                out[c] = floor;
                free[c] = false;
            } else if v > 0.0 {
                out[c] = 0.0;
                free[c] = false;
            } else {
                out[c] = v;
            }
        }
        (out, free)
    }

    /// Albedo luminance at pixel `p` and its derivative with respect to `u`.
    #[inline]
    fn albedo_luma(&self, p: usize, u: f64) -> (f64, f64) {
        let e = (-u).exp();
        let mut f = 0.0;
        let mut df = 0.0;
        for c in 0..3 {
            let r = self.image[p][c] * e;
            if r < LOG_FLOOR {
                f += LUMA_WEIGHTS[c] * LOG_FLOOR;
            } else if r > 1.0 {
                f += LUMA_WEIGHTS[c];
            } else {
                f += LUMA_WEIGHTS[c] * r;
                df -= LUMA_WEIGHTS[c] * r;
            }
        }
        (f, df)
    }

    /// Returns `(smooth, intensity)` loss values (unweighted, Huber-smoothed).
    pub fn terms(&self, u: &[f64]) -> (f64, f64) {
        let n = self.len() as f64;
        let logs: Vec<[f64; 3]> = u.iter().enumerate().map(|(p, &up)| self.log_albedo(p, up).0).collect();
        let mut smooth = 0.0;
        for e in &self.edges {
            let (la, lb) = (logs[e.a], logs[e.b]);
            smooth += e.weight
                * (huber(la[0] - lb[0], self.delta) + huber(la[1] - lb[1], self.delta) + huber(la[2] - lb[2], self.delta));
        }
        smooth /= n;

        let mut intensity = 0.0;
        if self.uses_intensity() {
            let sb = &self.scale_bias;
            for p in (0..self.len()).filter(|&p| self.mask[p]) {
                let (fr, _) = self.albedo_luma(p, u[p]);
                let s = u[p].exp();
                intensity += huber(fr - sb.s1 * self.lidar[p] - sb.b1, self.delta)
                    + huber(s - sb.s2 * self.ratio[p] - sb.b2, self.delta);
            }
            intensity /= self.mask_count as f64;
        }
        (smooth, intensity)
    }

    pub fn value(&self, u: &[f64]) -> f64 {
        let (smooth, intensity) = self.terms(u);
        self.smooth_weight * smooth + self.intensity_weight * intensity
    }

    /// Analytic gradient of [`value`](Self::value) with respect to `u`.
    pub fn gradient(&self, u: &[f64]) -> Vec<f64> {
        self.value_and_gradient(u).1
    }

    pub fn value_and_gradient(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let n = self.len();
        let mut grad = vec![0.0; n];
        let logs: Vec<([f64; 3], [bool; 3])> = u.iter().enumerate().map(|(p, &up)| self.log_albedo(p, up)).collect();

        let ws = self.smooth_weight / n as f64;
        let mut smooth = 0.0;
        for e in &self.edges {
            let ((la, fa), (lb, fb)) = (logs[e.a], logs[e.b]);
            for c in 0..3 {
                let t = la[c] - lb[c];
                smooth += e.weight * huber(t, self.delta);
                let g = ws * e.weight * huber_grad(t, self.delta);
                // d(log R_a)/du_a = -1 when free
                if fa[c] {
                    grad[e.a] -= g;
                }
                if fb[c] {
                    grad[e.b] += g;
                }
            }
        }
        let mut value = ws * smooth;

        if self.uses_intensity() {
            let wi = self.intensity_weight / self.mask_count as f64;
            let sb = self.scale_bias;
            let mut intensity = 0.0;
            for p in (0..n).filter(|&p| self.mask[p]) {
                let (fr, dfr) = self.albedo_luma(p, u[p]);
                let s = u[p].exp();
                let r1 = fr - sb.s1 * self.lidar[p] - sb.b1;
                let r2 = s - sb.s2 * self.ratio[p] - sb.b2;
                intensity += huber(r1, self.delta) + huber(r2, self.delta);
                grad[p] += wi * (huber_grad(r1, self.delta) * dfr + huber_grad(r2, self.delta) * s);
            }
            value += wi * intensity;
        }
        (value, grad)
    }

    /// Quadratic model of the energy around `u`: every Huber term is replaced
    /// by `t^2 / (2 max(|t|, floor))` with its argument linearized in `u`.
    /// Returns the per-pixel diagonal and the pairwise (Laplacian) weights;
    /// together they form a positive definite preconditioner whose gradient at
    /// `u` equals the true gradient when `floor` equals the Huber threshold.
    pub fn model_hessian(&self, u: &[f64], floor: f64) -> (Vec<f64>, Vec<Edge>) {
        let n = self.len();
        let floor = floor.max(self.delta);
        let mut diag = vec![0.0; n];
        let mut pair = Vec::with_capacity(self.edges.len());
        let ws = self.smooth_weight / n as f64;
        if ws > 0.0 {
            let logs: Vec<([f64; 3], [bool; 3])> = u.iter().enumerate().map(|(p, &up)| self.log_albedo(p, up)).collect();
            for e in &self.edges {
                let ((la, fa), (lb, fb)) = (logs[e.a], logs[e.b]);
                let mut both = 0.0;
                for c in 0..3 {
                    let k = ws * e.weight / (la[c] - lb[c]).abs().max(floor);
                    match (fa[c], fb[c]) {
                        (true, true) => both += k,
                        (true, false) => diag[e.a] += k,
                        (false, true) => diag[e.b] += k,
                        (false, false) => {}
                    }
                }
                if both > 0.0 {
                    pair.push(Edge {
                        a: e.a,
                        b: e.b,
                        weight: both,
                    });
                }
            }
        }
        if self.uses_intensity() {
            let wi = self.intensity_weight / self.mask_count as f64;
            let sb = self.scale_bias;
            for p in (0..n).filter(|&p| self.mask[p]) {
                let (fr, dfr) = self.albedo_luma(p, u[p]);
                let s = u[p].exp();
                let r1 = fr - sb.s1 * self.lidar[p] - sb.b1;
                let r2 = s - sb.s2 * self.ratio[p] - sb.b2;
                diag[p] += wi * (dfr * dfr / r1.abs().max(floor) + s * s / r2.abs().max(floor));
            }
        }
        (diag, pair)
    }

    /// Albedo luminance `F(R)` for every pixel at `u`.
    pub fn albedo_luminance(&self, u: &[f64]) -> Vec<f64> {
        u.iter().enumerate().map(|(p, &up)| self.albedo_luma(p, up).0).collect()
    }

    pub(crate) fn lidar(&self) -> &[f64] {
        &self.lidar
    }

    pub(crate) fn ratio(&self) -> &[f64] {
        &self.ratio
    }

    pub(crate) fn image(&self) -> &[[f64; 3]] {
        &self.image
    }

    pub(crate) fn image_luminance(&self) -> &[f64] {
        &self.lum
    }
}

/// Gradient of the energy at `u` under the fixed scale/bias held in `state`.
pub fn objective_gradient(u: &[f64], state: &ObjectiveState) -> Vec<f64> {
    state.gradient(u)
}
