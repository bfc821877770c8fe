//! Named decomposition methods compared by the experiment runner.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::densify::{densify, DensifyParams, SparseIntensity};
use crate::error::{Error, Result};
use crate::imagecore::LinearImage;
use crate::solver::baselines::{baseline_r, baseline_s, retinex, RetinexParams};
use crate::solver::{decompose, Decomposition, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Densified intensity drives the consistency term on every pixel.
    Ours,
    /// Raw sparse intensity, consistency term on observed pixels only.
    OursNoLid,
    /// Smoothness only.
    OursNoInt,
    BaselineR,
    BaselineS,
    Retinex,
    ColorRetinex,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Ours,
        Method::OursNoLid,
        Method::OursNoInt,
        Method::BaselineR,
        Method::BaselineS,
        Method::Retinex,
        Method::ColorRetinex,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ours => "ours",
            Method::OursNoLid => "ours_no_lid",
            Method::OursNoInt => "ours_no_int",
            Method::BaselineR => "baseline_r",
            Method::BaselineS => "baseline_s",
            Method::Retinex => "retinex",
            Method::ColorRetinex => "color_retinex",
        }
    }

    /// Whether the method reads intensity at all.
    pub fn uses_lidar(self) -> bool {
        matches!(self, Method::Ours | Method::OursNoLid)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown method {s:?}")))
    }
}

/// Parameters shared by all methods.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodParams {
    pub solver: SolverConfig,
    pub densify: DensifyParams,
    pub retinex: RetinexParams,
}

pub fn run_method(
    method: Method,
    image: &LinearImage,
    lidar: &SparseIntensity,
    params: &MethodParams,
) -> Result<Decomposition> {
    if lidar.dims() != image.dims() {
        return Err(Error::ShapeMismatch {
            expected: image.dims(),
            found: lidar.dims(),
        });
    }
    match method {
        Method::Ours => {
            let dense = densify(image, lidar, &params.densify)?;
            let all = vec![true; image.len()];
            decompose(image, &dense.intensity, &all, &params.solver)
        }
        Method::OursNoLid => decompose(image, lidar.values(), lidar.mask(), &params.solver),
        Method::OursNoInt => {
            let mut cfg = params.solver;
            cfg.weights.intensity = 0.0;
            decompose(image, lidar.values(), lidar.mask(), &cfg)
        }
        Method::BaselineR => baseline_r(image),
        Method::BaselineS => baseline_s(image),
        Method::Retinex => retinex(image, params.retinex.threshold, false),
        Method::ColorRetinex => retinex(image, params.retinex.threshold, true),
    }
}
