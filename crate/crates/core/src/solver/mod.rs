//! Albedo/shade decomposition.
//!
//! [`decompose`] parameterizes shade as `u = log S` and alternates
//!
//! 1. a closed-form refit of the scale/bias pairs (`F(R) ~ L`, `S ~ F(I)/L`),
//!    kept only when it lowers the energy, and
//! 2. projected gradient descent on `u` with Armijo backtracking,
//!
//! so the recorded energy sequence never increases. The non-learned
//! baselines used in comparison tables live in [`baselines`].

pub mod baselines;
mod objective;

use serde::{Deserialize, Serialize};

pub use baselines::{baseline_r, baseline_s, retinex, RetinexParams};
pub use objective::{objective_gradient, ObjectiveState, SHADE_FLOOR};

use crate::error::{Error, Result};
use crate::imagecore::{GrayMap, LinearImage};
use crate::losses::{fit_scale_bias, AffinityConfig, LossWeights, ScaleBias, LOG_FLOOR};
use crate::linalg::{pcg, WeightedLaplacian};

/// Starting point for the log-shade field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShadeInit {
    /// `S = F(I)`: albedo starts as pure chromaticity.
    Luminance,
    /// `S` = brightest channel in the image: albedo starts as the image itself.
    #[default]
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub weights: LossWeights,
    pub affinity: AffinityConfig,
    pub max_outer: usize,
    pub max_inner: usize,
    pub armijo: f64,
    pub grad_tol: f64,
    /// Inner loop also stops once a step lowers the energy by less than this fraction.
    pub rel_tol: f64,
    pub init: ShadeInit,
    pub huber_delta: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            affinity: AffinityConfig::default(),
            max_outer: 10,
            max_inner: 200,
            armijo: 1e-4,
            grad_tol: 1e-6,
            rel_tol: 1e-5,
            init: ShadeInit::Constant,
            huber_delta: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.affinity.validate()?;
        let ok = self.max_outer >= 1
            && self.max_inner >= 1
            && self.armijo > 0.0
            && self.armijo < 1.0
            && self.grad_tol > 0.0
            && self.rel_tol >= 0.0
            && self.huber_delta > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("invalid solver configuration {self:?}")))
        }
    }
}

/// Albedo and single-channel shade with `I = R * S`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub albedo: LinearImage,
    pub shade: GrayMap,
    pub scale_bias: ScaleBias,
}

impl Decomposition {
    /// `max_p,c |I - R S|`.
    pub fn reconstruction_error(&self, image: &LinearImage) -> f64 {
        image
            .pixels()
            .iter()
            .zip(self.albedo.pixels())
            .zip(self.shade.values())
            .flat_map(|((i, r), &s)| (0..3).map(move |c| (i[c] - r[c] * s).abs()))
            .fold(0.0, f64::max)
    }
}

/// Optimization record of one [`decompose_traced`] call.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SolveTrace {
    /// Energy after every accepted change (scale/bias refit or descent step),
    /// starting with the initial energy.
    pub objectives: Vec<f64>,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub smooth: f64,
    pub intensity: f64,
}

impl SolveTrace {
    pub fn initial(&self) -> f64 {
        self.objectives.first().copied().unwrap_or(f64::NAN)
    }

    pub fn last(&self) -> f64 {
        self.objectives.last().copied().unwrap_or(f64::NAN)
    }
}

fn initial_log_shade(image: &LinearImage, state: &ObjectiveState, init: ShadeInit) -> Vec<f64> {
    let mut u: Vec<f64> = match init {
        ShadeInit::Luminance => state
            .image_luminance()
            .iter()
            .map(|&f| f.max(SHADE_FLOOR).ln())
            .collect(),
        ShadeInit::Constant => {
            let peak = image
                .pixels()
                .iter()
                .map(|p| p[0].max(p[1]).max(p[2]))
                .fold(SHADE_FLOOR, f64::max);
            vec![peak.ln(); image.len()]
        }
    };
    state.project(&mut u);
    u
}

fn refit_scale_bias(state: &ObjectiveState, u: &[f64]) -> Result<ScaleBias> {
    let fr = state.albedo_luminance(u);
    let shade: Vec<f64> = u.iter().map(|v| v.exp()).collect();
    let first = fit_scale_bias(&fr, state.lidar(), state.mask())?;
    let second = fit_scale_bias(&shade, state.ratio(), state.mask())?;
    if first.degenerate || second.degenerate {
        log::debug!("degenerate scale/bias fit (constant source on mask)");
    }
    Ok(ScaleBias {
        s1: first.slope,
        b1: first.intercept,
        s2: second.slope,
        b2: second.intercept,
    })
}

fn checked(v: f64, context: &'static str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { context })
    }
}

/// Residual magnitudes below this are treated as this when building the
/// preconditioner, which keeps its condition number bounded.
const MODEL_FLOOR: f64 = 1e-4;
const MODEL_CG_TOL: f64 = 1e-3;
const MODEL_CG_ITERS: usize = 100;

/// Projected preconditioned gradient descent with Armijo backtracking.
///
/// The gradient is preconditioned by the Hessian of a reweighted quadratic
/// model (graph Laplacian plus diagonal, solved approximately by CG), so
/// whole regions can move together. Returns the number of accepted steps.
fn descend(state: &ObjectiveState, u: &mut Vec<f64>, cfg: &SolverConfig, trace: &mut SolveTrace) -> Result<usize> {
    let mut g = state.gradient(u);
    let mut f = checked(state.value(u), "energy")?;
    let mut accepted = 0;
    let mut trial = u.clone();
    let (lower, upper) = state.bounds();

    for _ in 0..cfg.max_inner {
        // projected-gradient stationarity measure
        let pg = u
            .iter()
            .zip(&g)
            .zip(lower.iter().zip(upper))
            .map(|((&x, &gx), (&lo, &hi))| (x - (x - gx).clamp(lo, hi)).abs())
            .fold(0.0f64, f64::max);
        if pg <= cfg.grad_tol {
            break;
        }

        let (mut diag, pairs) = state.model_hessian(u, MODEL_FLOOR);
        // keeps the model definite where no term depends on u
        let ridge = 1e-12 * diag.iter().fold(0.0f64, |m, &d| m.max(d)).max(1e-300);
        diag.iter_mut().for_each(|d| *d += ridge);
        let op = WeightedLaplacian {
            data_weight: &diag,
            edges: &pairs,
            lambda: 1.0,
        };
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut dir = vec![0.0; u.len()];
        pcg(&op, &rhs, &mut dir, MODEL_CG_TOL, MODEL_CG_ITERS);
        let mut accepted_value = None;
        let mut alpha = 1.0;
        for _ in 0..60 {
            for i in 0..u.len() {
                trial[i] = u[i] + alpha * dir[i];
            }
            state.project(&mut trial);
            let decrease: f64 = trial.iter().zip(u.iter()).zip(&g).map(|((t, x), gx)| gx * (t - x)).sum();
            if decrease >= 0.0 {
                break;
            }
            let ft = checked(state.value(&trial), "energy")?;
            if ft <= f + cfg.armijo * decrease {
                accepted_value = Some(ft);
                break;
            }
            alpha *= 0.5;
        }
        let Some(ft) = accepted_value else {
            break;
        };

        // value() and gradient() sum in different orders; keep the value the
        // line search accepted so the recorded energy is monotone
        g = state.gradient(&trial);
        std::mem::swap(u, &mut trial);
        let stalled = f - ft <= cfg.rel_tol * f.abs();
        f = ft;
        accepted += 1;
        trace.objectives.push(f);
        if stalled {
            break;
        }
    }
    Ok(accepted)
}

/// Decomposes `image` into albedo and shade using dense intensity `lidar`
/// on the pixels selected by `mask`.
pub fn decompose(image: &LinearImage, lidar: &GrayMap, mask: &[bool], cfg: &SolverConfig) -> Result<Decomposition> {
    decompose_traced(image, lidar, mask, cfg).map(|(d, _)| d)
}

pub fn decompose_traced(
    image: &LinearImage,
    lidar: &GrayMap,
    mask: &[bool],
    cfg: &SolverConfig,
) -> Result<(Decomposition, SolveTrace)> {
    let mut state = ObjectiveState::new(image, lidar, mask, cfg)?;
    let mut u = initial_log_shade(image, &state, cfg.init);
    let mut trace = SolveTrace::default();

    // Identity scale/bias to start: refitting against the initial shade is
    // degenerate (a constant S regresses to s2 = 0, which pins S in place).
    let mut energy = checked(state.value(&u), "initial energy")?;
    trace.objectives.push(energy);

    for outer in 0..cfg.max_outer {
        if outer > 0 {
            // without an accepted refit the next descent would restart from
            // the point where the previous one stalled
            if !state.uses_intensity() {
                break;
            }
            let kept = state.scale_bias;
            state.scale_bias = refit_scale_bias(&state, &u)?;
            let refit = checked(state.value(&u), "energy after refit")?;
            if refit < energy {
                trace.objectives.push(refit);
            } else {
                state.scale_bias = kept;
                break;
            }
        }
        trace.outer_iterations += 1;
        let steps = descend(&state, &mut u, cfg, &mut trace)?;
        trace.inner_iterations += steps;
        energy = trace.last();
        if steps == 0 && outer > 0 {
            break;
        }
    }

    let (smooth, intensity) = state.terms(&u);
    trace.smooth = smooth;
    trace.intensity = intensity;
    Ok((assemble(image, &state, &u)?, trace))
}

fn assemble(image: &LinearImage, state: &ObjectiveState, u: &[f64]) -> Result<Decomposition> {
    let (w, h) = image.dims();
    let shade: Vec<f64> = u.iter().map(|v| v.exp()).collect();
    let albedo = state
        .image()
        .iter()
        .zip(&shade)
        .map(|(p, s)| p.map(|v| (v / s).clamp(LOG_FLOOR, 1.0)))
        .collect();
    Ok(Decomposition {
        albedo: LinearImage::new(w, h, albedo)?,
        shade: GrayMap::new(w, h, shade)?,
        scale_bias: state.scale_bias,
    })
}
