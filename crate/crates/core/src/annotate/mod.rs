//! Pairwise albedo judgements: point sampling, pairing, answer aggregation
//! and a ground-truth driven annotator for synthetic scenes.

mod delaunay;
mod jsonl;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::judge;
use crate::imagecore::{luma, LinearImage};

pub use delaunay::{delaunay_pairs, delaunay_triangles};
pub use jsonl::{parse_annotations, read_annotations, write_annotations, FieldMap};

/// Relative albedo judgement for an ordered pair of points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Judgement {
    /// Same albedo.
    E,
    /// First endpoint darker.
    D,
    /// Second endpoint darker.
    L,
}

impl Judgement {
    pub const ALL: [Judgement; 3] = [Judgement::E, Judgement::D, Judgement::L];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Judgement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Judgement::E => "E",
            Judgement::D => "D",
            Judgement::L => "L",
        })
    }
}

/// Sub-pixel sample location; `(x, y)` lies in pixel `(floor x, floor y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist2(self, o: Point) -> f64 {
        (self.x - o.x).powi(2) + (self.y - o.y).powi(2)
    }

    /// Containing pixel, clamped into a `width x height` grid.
    pub fn pixel(self, width: usize, height: usize) -> [usize; 2] {
        let cx = (self.x.max(0.0).floor() as usize).min(width - 1);
        let cy = (self.y.max(0.0).floor() as usize).min(height - 1);
        [cx, cy]
    }
}

/// One labelled pair. Coordinates are integer pixels `[x, y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationPair {
    #[serde(default)]
    pub image_id: String,
    pub p1: [usize; 2],
    pub p2: [usize; 2],
    #[serde(rename = "J")]
    pub judgement: Judgement,
    #[serde(rename = "w")]
    pub weight: f64,
}

impl AnnotationPair {
    /// Checks `p1 != p2`, positive finite weight and, if given, image bounds.
    pub fn validate(&self, bounds: Option<(usize, usize)>) -> Result<()> {
        if self.p1 == self.p2 {
            return Err(Error::Invalid(format!("pair endpoints coincide at {:?}", self.p1)));
        }
        if !(self.weight.is_finite() && self.weight > 0.0) {
            return Err(Error::Invalid(format!("pair weight must be > 0, got {}", self.weight)));
        }
        if let Some((w, h)) = bounds {
            for p in [self.p1, self.p2] {
                if p[0] >= w || p[1] >= h {
                    return Err(Error::OutOfBounds {
                        x: p[0] as i64,
                        y: p[1] as i64,
                        width: w,
                        height: h,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Answer confidence levels and their weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confidence {
    Definitely,
    Probably,
    Guessing,
}

impl Confidence {
    pub fn weight(self) -> f64 {
        self.tenths() as f64 / 10.0
    }

    fn tenths(self) -> i32 {
        match self {
            Confidence::Definitely => 10,
            Confidence::Probably => 8,
            Confidence::Guessing => 3,
        }
    }
}

/// One annotator's response to a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatorAnswer {
    same_albedo: i8,
    first_darker: i8,
    pub confidence: Confidence,
}

impl AnnotatorAnswer {
    /// `same_albedo` and `first_darker` must each be `+1` or `-1`.
    pub fn new(same_albedo: i8, first_darker: i8, confidence: Confidence) -> Result<Self> {
        for (name, v) in [("same_albedo", same_albedo), ("first_darker", first_darker)] {
            if v != 1 && v != -1 {
                return Err(Error::Invalid(format!("{name} must be +1 or -1, got {v}")));
            }
        }
        Ok(Self {
            same_albedo,
            first_darker,
            confidence,
        })
    }

    pub fn same_albedo(&self) -> i8 {
        self.same_albedo
    }

    pub fn first_darker(&self) -> i8 {
        self.first_darker
    }
}

/// Combines exactly five answers into a judgement and weight.
///
/// `A1 > 0` gives `E`; otherwise the sign of `A2` picks `D` or `L`. A zero
/// `A2` comes back as `(L, 0.0)`; callers drop zero-weight pairs.
pub fn aggregate(answers: &[AnnotatorAnswer]) -> Result<(Judgement, f64)> {
    if answers.len() != 5 {
        return Err(Error::WrongAnswerCount(answers.len()));
    }
    // integer tenths keep the sums exact, so ties and signs do not depend on answer order
    let a1: i32 = answers.iter().map(|a| a.same_albedo as i32 * a.confidence.tenths()).sum();
    let a2: i32 = answers.iter().map(|a| a.first_darker as i32 * a.confidence.tenths()).sum();
    Ok(if a1 > 0 {
        (Judgement::E, a1 as f64 / 10.0)
    } else if a2 > 0 {
        (Judgement::D, a2 as f64 / 10.0)
    } else {
        (Judgement::L, -a2 as f64 / 10.0)
    })
}

/// Minimum pairwise distance used by [`poisson_disk`]: disks of radius
/// `r_frac * min(width, height)` around the samples do not overlap.
pub fn min_separation(width: usize, height: usize, r_frac: f64) -> f64 {
    2.0 * r_frac * width.min(height) as f64
}

/// Maximal Poisson-disk sample of `[0, width) x [0, height)`.
///
/// Bridson dart throwing (30 candidates per active point) followed by a sweep
/// over pixel centres that inserts any centre still uncovered, so no pixel
/// centre is farther than [`min_separation`] from the set.
pub fn poisson_disk(width: usize, height: usize, r_frac: f64, seed: u64) -> Result<Vec<Point>> {
    if width == 0 || height == 0 {
        return Err(Error::Invalid(format!("empty domain {width}x{height}")));
    }
    if !(r_frac > 0.0 && r_frac <= 0.5) {
        return Err(Error::Invalid(format!("r_frac must be in (0, 0.5], got {r_frac}")));
    }
    let d = min_separation(width, height, r_frac);
    let (wf, hf) = (width as f64, height as f64);
    let cell = d / std::f64::consts::SQRT_2;
    let gw = (wf / cell).ceil() as usize + 1;
    let gh = (hf / cell).ceil() as usize + 1;
    let mut grid: Vec<Option<usize>> = vec![None; gw * gh];
    let mut points: Vec<Point> = Vec::new();
    let d2 = d * d;

    let cell_of = |p: Point| ((p.x / cell) as usize, (p.y / cell) as usize);
    let fits = |p: Point, grid: &[Option<usize>], points: &[Point]| {
        let (cx, cy) = cell_of(p);
        for gy in cy.saturating_sub(2)..(cy + 3).min(gh) {
            for gx in cx.saturating_sub(2)..(cx + 3).min(gw) {
                if let Some(i) = grid[gy * gw + gx] {
                    if points[i].dist2(p) < d2 {
                        return false;
                    }
                }
            }
        }
        true
    };
    let insert = |p: Point, grid: &mut Vec<Option<usize>>, points: &mut Vec<Point>| {
        let (cx, cy) = cell_of(p);
        grid[cy * gw + cx] = Some(points.len());
        points.push(p);
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = Point::new(rng.random::<f64>() * wf, rng.random::<f64>() * hf);
    insert(first, &mut grid, &mut points);
    let mut active = vec![0usize];
    while !active.is_empty() {
        let slot = rng.random_range(0..active.len());
        let base = points[active[slot]];
        let mut placed = false;
        for _ in 0..30 {
            let radius = d * (1.0 + rng.random::<f64>());
            let theta = std::f64::consts::TAU * rng.random::<f64>();
            let p = Point::new(base.x + radius * theta.cos(), base.y + radius * theta.sin());
            if p.x < 0.0 || p.y < 0.0 || p.x >= wf || p.y >= hf {
                continue;
            }
            if fits(p, &grid, &points) {
                active.push(points.len());
                insert(p, &mut grid, &mut points);
                placed = true;
                break;
            }
        }
        if !placed {
            active.swap_remove(slot);
        }
    }

    for y in 0..height {
        for x in 0..width {
            let p = Point::new(x as f64 + 0.5, y as f64 + 0.5);
            if fits(p, &grid, &points) {
                insert(p, &mut grid, &mut points);
            }
        }
    }
    Ok(points)
}

/// Thresholds for discarding points before pairing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterThresholds {
    /// Points whose luminance is below this are under-saturated.
    pub lum_lo: f64,
    /// Points whose luminance is above this are over-saturated.
    pub lum_hi: f64,
    /// Sobel magnitude (per-pixel derivative scale) counted as an edge.
    pub edge_threshold: f64,
    /// Euclidean pixel radius searched for edges around a point.
    pub edge_radius: usize,
}

impl Default for FilterThresholds {
    fn default() -> Self {
        Self {
            lum_lo: 0.02,
            lum_hi: 0.98,
            edge_threshold: 0.1,
            edge_radius: 3,
        }
    }
}

/// Sobel gradient magnitude of image luminance, normalized by 1/8 so that a
/// linear ramp of slope `m` yields `m`. Borders replicate.
pub fn sobel_magnitude(img: &LinearImage) -> Vec<f64> {
    let (w, h) = img.dims();
    let lum: Vec<f64> = img.pixels().iter().map(|&p| luma(p)).collect();
    let at = |x: isize, y: isize| {
        let xc = x.clamp(0, w as isize - 1) as usize;
        let yc = y.clamp(0, h as isize - 1) as usize;
        lum[yc * w + xc]
    };
    let mut out = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            out[y as usize * w + x as usize] = (gx * gx + gy * gy).sqrt() / 8.0;
        }
    }
    out
}

/// Keeps points that are neither under- nor over-saturated and have no edge
/// within `edge_radius` pixels. Order is preserved.
pub fn filter_points(points: &[Point], img: &LinearImage, th: &FilterThresholds) -> Vec<Point> {
    let (w, h) = img.dims();
    let mag = sobel_magnitude(img);
    let r = th.edge_radius as isize;
    let near_edge = |cx: usize, cy: usize| {
        for dy in -r..=r {
            for dx in -r..=r {
                if dx * dx + dy * dy > r * r {
                    continue;
                }
                let (x, y) = (cx as isize + dx, cy as isize + dy);
                if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
                    continue;
                }
                if mag[y as usize * w + x as usize] > th.edge_threshold {
                    return true;
                }
            }
        }
        false
    };
    points
        .iter()
        .copied()
        .filter(|p| {
            let [cx, cy] = p.pixel(w, h);
            let l = luma(img.get(cx, cy));
            l >= th.lum_lo && l <= th.lum_hi && !near_edge(cx, cy)
        })
        .collect()
}

/// Sample, filter and triangulate. Fewer than two surviving points yield no pairs.
pub fn sample_pairs(
    img: &LinearImage,
    r_frac: f64,
    seed: u64,
    th: &FilterThresholds,
) -> Result<(Vec<Point>, Vec<(usize, usize)>)> {
    let (w, h) = img.dims();
    let pts = filter_points(&poisson_disk(w, h, r_frac, seed)?, img, th);
    if pts.len() < 2 {
        return Ok((pts, Vec::new()));
    }
    let pairs = delaunay_pairs(&pts)?;
    Ok((pts, pairs))
}

/// Labels every pair from ground-truth albedo luminance with the ratio rule; unit weights.
pub fn simulate_judgements(
    gt_albedo: &LinearImage,
    pairs: &[(usize, usize)],
    points: &[Point],
    delta: f64,
) -> Result<Vec<AnnotationPair>> {
    if !(delta > 0.0) {
        return Err(Error::Invalid(format!("delta must be > 0, got {delta}")));
    }
    let (w, h) = gt_albedo.dims();
    let mut out = Vec::with_capacity(pairs.len());
    for &(i, j) in pairs {
        let (a, b) = match (points.get(i), points.get(j)) {
            (Some(a), Some(b)) => (a.pixel(w, h), b.pixel(w, h)),
            _ => {
                return Err(Error::Invalid(format!(
                    "pair ({i}, {j}) indexes past {} points",
                    points.len()
                )))
            }
        };
        if a == b {
            continue;
        }
        let l1 = luma(gt_albedo.get(a[0], a[1]));
        let l2 = luma(gt_albedo.get(b[0], b[1]));
        out.push(AnnotationPair {
            image_id: String::new(),
            p1: a,
            p2: b,
            judgement: judge(l1, l2, delta),
            weight: 1.0,
        });
    }
    Ok(out)
}
