//! Scoring decompositions against pairwise judgements.

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotate::{AnnotationPair, Judgement};
use crate::densify::SparseIntensity;
use crate::error::{Error, Result};
use crate::imagecore::{luma, LinearImage};

/// Luminances are floored here before any ratio is taken.
pub const JUDGE_FLOOR: f64 = 1e-6;

pub const DEFAULT_DELTA: f64 = 0.1;

/// Ratio rule on two luminances: `D` if the second exceeds the first by more
/// than a factor `1 + delta`, `L` for the reverse, `E` otherwise.
pub fn judge(l1: f64, l2: f64, delta: f64) -> Judgement {
    let (a, b) = (l1.max(JUDGE_FLOOR), l2.max(JUDGE_FLOOR));
    let t = 1.0 + delta;
    if b / a > t {
        Judgement::D
    } else if a / b > t {
        Judgement::L
    } else {
        Judgement::E
    }
}

fn lum_at(r: &LinearImage, p: [usize; 2]) -> Result<f64> {
    let (w, h) = r.dims();
    if p[0] >= w || p[1] >= h {
        return Err(Error::OutOfBounds {
            x: p[0] as i64,
            y: p[1] as i64,
            width: w,
            height: h,
        });
    }
    Ok(luma(r.get(p[0], p[1])))
}

/// Predicted judgement for `pair` from albedo `r`.
pub fn classify_pair(r: &LinearImage, pair: &AnnotationPair, delta: f64) -> Result<Judgement> {
    if !(delta > 0.0) {
        return Err(Error::Invalid(format!("delta must be > 0, got {delta}")));
    }
    Ok(judge(lum_at(r, pair.p1)?, lum_at(r, pair.p2)?, delta))
}

fn predictions(annotations: &[AnnotationPair], r: &LinearImage, delta: f64) -> Result<Vec<Judgement>> {
    if annotations.is_empty() || annotations.iter().map(|a| a.weight).sum::<f64>() <= 0.0 {
        return Err(Error::EmptyAnnotations);
    }
    annotations.iter().map(|a| classify_pair(r, a, delta)).collect()
}

fn whdr_of(annotations: &[AnnotationPair], pred: &[Judgement]) -> f64 {
    let total: f64 = annotations.iter().map(|a| a.weight).sum();
    let wrong: f64 = annotations
        .iter()
        .zip(pred)
        .filter(|(a, p)| a.judgement != **p)
        .map(|(a, _)| a.weight)
        .fold(0.0, |acc, w| acc + w); // empty `sum` of f64 gives -0.0
    wrong / total
}

/// Weighted fraction of pairs whose predicted judgement disagrees with the label.
pub fn whdr(annotations: &[AnnotationPair], r: &LinearImage, delta: f64) -> Result<f64> {
    let pred = predictions(annotations, r, delta)?;
    Ok(whdr_of(annotations, &pred))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

pub const PRF_DEFINITION: &str = "weighted per-class precision/recall, unweighted macro average over classes \
present in the labels; F = 2PR/(P+R)";

fn prf_of(annotations: &[AnnotationPair], pred: &[Judgement]) -> Prf {
    let mut tp = [0.0; 3];
    let mut predicted = [0.0; 3];
    let mut actual = [0.0; 3];
    for (a, p) in annotations.iter().zip(pred) {
        predicted[p.index()] += a.weight;
        actual[a.judgement.index()] += a.weight;
        if a.judgement == *p {
            tp[p.index()] += a.weight;
        }
    }
    let mut ps = Vec::new();
    let mut rs = Vec::new();
    for c in 0..3 {
        if actual[c] <= 0.0 {
            continue;
        }
        ps.push(if predicted[c] > 0.0 { tp[c] / predicted[c] } else { 0.0 });
        rs.push(tp[c] / actual[c]);
    }
    let precision = ps.iter().sum::<f64>() / ps.len() as f64;
    let recall = rs.iter().sum::<f64>() / rs.len() as f64;
    let f_score = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Prf {
        precision,
        recall,
        f_score,
    }
}

/// Weighted three-class precision, recall and F-score; see [`PRF_DEFINITION`].
pub fn prf(annotations: &[AnnotationPair], r: &LinearImage, delta: f64) -> Result<Prf> {
    let pred = predictions(annotations, r, delta)?;
    Ok(prf_of(annotations, &pred))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    #[serde(rename = "E")]
    pub e: usize,
    #[serde(rename = "D")]
    pub d: usize,
    #[serde(rename = "L")]
    pub l: usize,
}

impl ClassCounts {
    pub fn of(annotations: &[AnnotationPair]) -> Self {
        let mut c = Self::default();
        for a in annotations {
            match a.judgement {
                Judgement::E => c.e += 1,
                Judgement::D => c.d += 1,
                Judgement::L => c.l += 1,
            }
        }
        c
    }

    pub fn get(&self, j: Judgement) -> usize {
        match j {
            Judgement::E => self.e,
            Judgement::D => self.d,
            Judgement::L => self.l,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub dataset: String,
    pub delta: f64,
    pub whdr: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub counts: ClassCounts,
    pub n_pairs: usize,
    pub prf_definition: String,
}

/// WHDR plus PRF in one pass.
pub fn evaluate(
    annotations: &[AnnotationPair],
    r: &LinearImage,
    delta: f64,
    method: &str,
    dataset: &str,
) -> Result<EvalReport> {
    let pred = predictions(annotations, r, delta)?;
    let p = prf_of(annotations, &pred);
    Ok(EvalReport {
        method: method.to_string(),
        dataset: dataset.to_string(),
        delta,
        whdr: whdr_of(annotations, &pred),
        precision: p.precision,
        recall: p.recall,
        f_score: p.f_score,
        counts: ClassCounts::of(annotations),
        n_pairs: annotations.len(),
        prf_definition: PRF_DEFINITION.to_string(),
    })
}

/// Aligned text table, one row per report.
pub fn format_table(reports: &[EvalReport]) -> String {
    let mw = reports.iter().map(|r| r.method.len()).chain([6]).max().unwrap();
    let dw = reports.iter().map(|r| r.dataset.len()).chain([7]).max().unwrap();
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<mw$}  {:<dw$}  {:>7}  {:>9}  {:>7}  {:>7}  {:>6}",
        "method", "dataset", "WHDR", "precision", "recall", "F-score", "pairs"
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{:<mw$}  {:<dw$}  {:>7.4}  {:>9.4}  {:>7.4}  {:>7.4}  {:>6}",
            r.method, r.dataset, r.whdr, r.precision, r.recall, r.f_score, r.n_pairs
        );
    }
    s
}

/// Keeps `m = min class count` pairs of each class, drawn uniformly without
/// replacement. Survivors keep their input order.
pub fn balanced_subsample(annotations: &[AnnotationPair], seed: u64) -> Result<Vec<AnnotationPair>> {
    let counts = ClassCounts::of(annotations);
    for j in Judgement::ALL {
        if counts.get(j) == 0 {
            return Err(Error::MissingClass(j));
        }
    }
    let m = Judgement::ALL.iter().map(|&j| counts.get(j)).min().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![false; annotations.len()];
    for j in Judgement::ALL {
        let idx: Vec<usize> = (0..annotations.len()).filter(|&i| annotations[i].judgement == j).collect();
        for k in sample(&mut rng, idx.len(), m) {
            keep[idx[k]] = true;
        }
    }
    Ok(annotations
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(a, _)| a.clone())
        .collect())
}

pub const HIST_BINS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityCorrelation {
    /// Pearson coefficient between image luminance and intensity on the mask.
    pub coefficient: f64,
    /// `HIST_BINS x HIST_BINS` counts, row = luminance bin, column = intensity bin.
    pub histogram: Vec<u64>,
}

fn bin(v: f64) -> usize {
    ((v.clamp(0.0, 1.0) * HIST_BINS as f64) as usize).min(HIST_BINS - 1)
}

/// Correlation between image luminance and observed intensity.
pub fn intensity_correlation(img: &LinearImage, sparse: &SparseIntensity) -> Result<IntensityCorrelation> {
    if sparse.dims() != img.dims() {
        return Err(Error::ShapeMismatch {
            expected: img.dims(),
            found: sparse.dims(),
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = img
        .pixels()
        .iter()
        .zip(sparse.values().values())
        .zip(sparse.mask())
        .filter(|(_, &m)| m)
        .map(|((&p, &l), _)| (luma(p), l))
        .unzip();
    if xs.is_empty() {
        return Err(Error::EmptyMask);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let mut histogram = vec![0u64; HIST_BINS * HIST_BINS];
    for (x, y) in xs.iter().zip(&ys) {
        histogram[bin(*x) * HIST_BINS + bin(*y)] += 1;
    }
    Ok(IntensityCorrelation {
        coefficient: (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0),
        histogram,
    })
}
