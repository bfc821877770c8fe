//! Independent reference implementations shared by the integration and
//! acceptance tests. Nothing here calls the library's own arithmetic: each
//! quantity is recomputed with plain loops or a dense linear solve.

#![allow(dead_code)]

use lidar_iid::densify::SparseIntensity;
use lidar_iid::imagecore::{GrayMap, LinearImage};
use lidar_iid::losses::{AffinityConfig, ScaleBias};
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize, lo: f64, hi: f64) -> LinearImage {
    LinearImage::from_fn(w, h, |_, _| [0; 3].map(|_| rng.random_range(lo..=hi))).unwrap()
}

pub fn random_gray(rng: &mut ChaCha8Rng, w: usize, h: usize, lo: f64, hi: f64) -> GrayMap {
    GrayMap::new(w, h, (0..w * h).map(|_| rng.random_range(lo..=hi)).collect()).unwrap()
}

/// Bernoulli mask with at least one set entry.
pub fn random_mask(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<bool> {
    let mut m: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < p).collect();
    if !m.iter().any(|&v| v) {
        let k = rng.random_range(0..n);
        m[k] = true;
    }
    m
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..=hi)).collect()
}

fn lum(p: [f64; 3]) -> f64 {
    0.2126 * p[0] + 0.7152 * p[1] + 0.0722 * p[2]
}

pub fn oracle_physical(i: &LinearImage, r: &LinearImage, s: &GrayMap) -> f64 {
    let (w, h) = i.dims();
    let mut total = 0.0;
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                total += (i.get(x, y)[c] - r.get(x, y)[c] * s.get(x, y)).abs();
            }
        }
    }
    total / (3 * w * h) as f64
}

/// `[x, y, lum, r, g]` for pixel `(x, y)`.
pub fn oracle_feature(img: &LinearImage, x: usize, y: usize) -> [f64; 5] {
    let (w, h) = img.dims();
    let p = img.get(x, y);
    let sum = p[0] + p[1] + p[2];
    let (r, g) = if sum < 1e-4 { (1.0 / 3.0, 1.0 / 3.0) } else { (p[0] / sum, p[1] / sum) };
    [x as f64 / (w - 1) as f64, y as f64 / (h - 1) as f64, lum(p), r, g]
}

pub fn oracle_affinity(fi: [f64; 5], fj: [f64; 5], cfg: &AffinityConfig) -> f64 {
    let sig = [cfg.sigma_pos, cfg.sigma_pos, cfg.sigma_lum, cfg.sigma_chroma, cfg.sigma_chroma];
    let mut q = 0.0;
    for k in 0..5 {
        q += (fi[k] - fj[k]) * (fi[k] - fj[k]) / (sig[k] * sig[k]);
    }
    (-q / 2.0).exp()
}

/// Forward neighbour offsets; each unordered pair is visited once.
fn offsets(eight: bool) -> Vec<(i64, i64)> {
    let mut v = vec![(1, 0), (0, 1)];
    if eight {
        v.extend([(1, 1), (-1, 1)]);
    }
    v
}

pub fn oracle_smooth(r: &LinearImage, img: &LinearImage, cfg: &AffinityConfig, eight: bool) -> f64 {
    let (w, h) = img.dims();
    let mut total = 0.0;
    for y in 0..h {
        for x in 0..w {
            for (dx, dy) in offsets(eight) {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let (nx, ny) = (nx as usize, ny as usize);
                let v = oracle_affinity(oracle_feature(img, x, y), oracle_feature(img, nx, ny), cfg);
                let mut l1 = 0.0;
                for c in 0..3 {
                    l1 += (r.get(x, y)[c].max(1e-4).ln() - r.get(nx, ny)[c].max(1e-4).ln()).abs();
                }
                total += v * l1;
            }
        }
    }
    total / (w * h) as f64
}

pub fn oracle_intensity(
    i: &LinearImage,
    r: &LinearImage,
    s: &GrayMap,
    l: &GrayMap,
    mask: &[bool],
    sb: &ScaleBias,
) -> f64 {
    let (w, h) = i.dims();
    let mut total = 0.0;
    let mut n = 0.0;
    for y in 0..h {
        for x in 0..w {
            if !mask[y * w + x] {
                continue;
            }
            let lv = l.get(x, y);
            let ratio = lum(i.get(x, y)) / lv.max(1e-3);
            total += (lum(r.get(x, y)) - sb.s1 * lv - sb.b1).abs() + (s.get(x, y) - sb.s2 * ratio - sb.b2).abs();
            n += 1.0;
        }
    }
    total / n
}

/// Least-squares line from the 2x2 normal equations, slope clamped at 0.
pub fn oracle_fit(target: &[f64], source: &[f64], mask: &[bool]) -> (f64, f64) {
    let mut a = Matrix2::zeros();
    let mut b = Vector2::zeros();
    let mut n = 0.0;
    let mut tsum = 0.0;
    for k in 0..target.len() {
        if mask[k] {
            a += Matrix2::new(source[k] * source[k], source[k], source[k], 1.0);
            b += Vector2::new(source[k] * target[k], target[k]);
            n += 1.0;
            tsum += target[k];
        }
    }
    let sol = a.lu().solve(&b).expect("non-singular fit");
    if sol[0] < 0.0 {
        (0.0, tsum / n)
    } else {
        (sol[0], sol[1])
    }
}

/// Masked squared error of a line.
pub fn fit_error(target: &[f64], source: &[f64], mask: &[bool], s: f64, b: f64) -> f64 {
    (0..target.len())
        .filter(|&k| mask[k])
        .map(|k| (target[k] - s * source[k] - b).powi(2))
        .sum()
}

/// Exhaustive grid search of `(s, b)` on `[0, 4] x [-1, 1]` with step 1e-3.
pub fn grid_fit(target: &[f64], source: &[f64], mask: &[bool]) -> (f64, f64) {
    let idx: Vec<usize> = (0..target.len()).filter(|&k| mask[k]).collect();
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for si in 0..=4000 {
        let s = si as f64 * 1e-3;
        for bi in 0..=2000 {
            let b = -1.0 + bi as f64 * 1e-3;
            let mut e = 0.0;
            for &k in &idx {
                let d = target[k] - s * source[k] - b;
                e += d * d;
            }
            if e < best.0 {
                best = (e, s, b);
            }
        }
    }
    (best.1, best.2)
}

pub fn oracle_mean_abs(a: &[f64], b: &[f64]) -> f64 {
    let mut t = 0.0;
    for k in 0..a.len() {
        t += (a[k] - b[k]).abs();
    }
    t / a.len() as f64
}

pub fn oracle_mean(a: &[f64]) -> f64 {
    let mut t = 0.0;
    for v in a {
        t += v;
    }
    t / a.len() as f64
}

pub fn oracle_mean_log(a: &[f64], complement: bool) -> f64 {
    let mut t = 0.0;
    for &v in a {
        let v = v.clamp(1e-7, 1.0 - 1e-7);
        t += if complement { (1.0 - v).ln() } else { v.ln() };
    }
    t / a.len() as f64
}

/// Dense solve of `(M + lambda L_w) x = M x0` on the 4-neighbour graph.
pub fn dense_densify(img: &LinearImage, sparse: &SparseIntensity, lambda: f64, sigma: f64) -> Vec<f64> {
    let (w, h) = img.dims();
    let n = w * h;
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for p in 0..n {
        if sparse.mask()[p] {
            a[(p, p)] += 1.0;
            rhs[p] = sparse.values().values()[p];
        }
    }
    for y in 0..h {
        for x in 0..w {
            for (dx, dy) in [(1usize, 0usize), (0, 1)] {
                let (nx, ny) = (x + dx, y + dy);
                if nx >= w || ny >= h {
                    continue;
                }
                let (i, j) = (y * w + x, ny * w + nx);
                let (pi, pj) = (img.get(x, y), img.get(nx, ny));
                let d2 = (pi[0] - pj[0]).powi(2) + (pi[1] - pj[1]).powi(2) + (pi[2] - pj[2]).powi(2);
                let wt = lambda * (-d2 / (2.0 * sigma * sigma)).exp();
                a[(i, i)] += wt;
                a[(j, j)] += wt;
                a[(i, j)] -= wt;
                a[(j, i)] -= wt;
            }
        }
    }
    a.lu().solve(&rhs).expect("non-singular densify system").iter().copied().collect()
}

fn circumcircle_contains(a: [f64; 2], b: [f64; 2], c: [f64; 2], p: [f64; 2]) -> bool {
    // orientation-normalized incircle determinant
    let m = DMatrix::from_row_slice(
        4,
        4,
        &[
            a[0], a[1], a[0] * a[0] + a[1] * a[1], 1.0,
            b[0], b[1], b[0] * b[0] + b[1] * b[1], 1.0,
            c[0], c[1], c[0] * c[0] + c[1] * c[1], 1.0,
            p[0], p[1], p[0] * p[0] + p[1] * p[1], 1.0,
        ],
    );
    let orient = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let det = m.determinant();
    if orient > 0.0 {
        det > 1e-9
    } else {
        det < -1e-9
    }
}

/// Edges of every triangle whose circumcircle holds no other point, O(n^4).
pub fn brute_delaunay_edges(pts: &[[f64; 2]]) -> Vec<(usize, usize)> {
    let n = pts.len();
    let mut edges = std::collections::BTreeSet::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (a, b, c) = (pts[i], pts[j], pts[k]);
                let orient = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
                if orient.abs() < 1e-12 {
                    continue;
                }
                let empty = (0..n)
                    .filter(|&q| q != i && q != j && q != k)
                    .all(|q| !circumcircle_contains(a, b, c, pts[q]));
                if empty {
                    edges.insert((i, j));
                    edges.insert((j, k));
                    edges.insert((i, k));
                }
            }
        }
    }
    edges.into_iter().collect()
}

/// Pearson correlation, two-pass.
pub fn oracle_pearson(a: &[f64], b: &[f64]) -> f64 {
    let ma = oracle_mean(a);
    let mb = oracle_mean(b);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for k in 0..a.len() {
        sab += (a[k] - ma) * (b[k] - mb);
        saa += (a[k] - ma).powi(2);
        sbb += (b[k] - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

/// Largest absolute gap between every losses-module operation and its oracle
/// on one random instance of at most 8x8 pixels.
pub fn loss_oracle_gap(seed: u64) -> f64 {
    use lidar_iid::imagecore::Connectivity;
    use lidar_iid::losses::{
        adversarial_loss, affinity, content_loss, features, fit_scale_bias, image_recon_loss,
        intensity_consistency_loss, kl_loss, physical_loss, prior_recon_loss, smooth_loss, total_objective,
        LossParts, LossWeights,
    };

    let mut r = rng(seed);
    let w = r.random_range(2..=8);
    let h = r.random_range(2..=8);
    let n = w * h;
    let image = random_image(&mut r, w, h, 0.0, 1.0);
    // some albedo values under the log floor
    let albedo = LinearImage::from_fn(w, h, |_, _| {
        [0; 3].map(|_| if r.random::<f64>() < 0.1 { r.random_range(0.0..1e-4) } else { r.random_range(0.0..=1.0) })
    })
    .unwrap();
    let shade = random_gray(&mut r, w, h, 0.0, 2.0);
    let lidar = random_gray(&mut r, w, h, 0.0, 1.0);
    let mask = random_mask(&mut r, n, 0.4);
    let sb = ScaleBias {
        s1: r.random_range(0.0..2.0),
        b1: r.random_range(-0.5..0.5),
        s2: r.random_range(0.0..2.0),
        b2: r.random_range(-0.5..0.5),
    };
    let eight = r.random::<bool>();
    let cfg = AffinityConfig {
        connectivity: if eight { Connectivity::Eight } else { Connectivity::Four },
        sigma_pos: r.random_range(0.05..1.0),
        sigma_lum: r.random_range(0.05..1.0),
        sigma_chroma: r.random_range(0.05..1.0),
    };

    let mut gap: f64 = 0.0;
    let mut track = |a: f64, b: f64| gap = gap.max((a - b).abs());

    track(physical_loss(&image, &albedo, &shade).unwrap(), oracle_physical(&image, &albedo, &shade));
    let feats = features(&image);
    for _ in 0..10 {
        let (i, j) = (r.random_range(0..n), r.random_range(0..n));
        let (fi, fj) = (oracle_feature(&image, i % w, i / w), oracle_feature(&image, j % w, j / w));
        let lib = feats[i];
        for (a, b) in [lib.x, lib.y, lib.lum, lib.r, lib.g].into_iter().zip(fi) {
            track(a, b);
        }
        track(affinity(&feats[i], &feats[j], &cfg), oracle_affinity(fi, fj, &cfg));
    }
    track(smooth_loss(&albedo, &image, &cfg).unwrap(), oracle_smooth(&albedo, &image, &cfg, eight));
    track(
        intensity_consistency_loss(&image, &albedo, &shade, &lidar, &mask, &sb).unwrap(),
        oracle_intensity(&image, &albedo, &shade, &lidar, &mask, &sb),
    );

    // fit on a mask with at least two distinct sources
    let source = random_vec(&mut r, n, 0.0, 1.0);
    let target = random_vec(&mut r, n, -1.0, 1.0);
    let mut fmask = random_mask(&mut r, n, 0.5);
    fmask[0] = true;
    fmask[1] = true;
    let fit = fit_scale_bias(&target, &source, &fmask).unwrap();
    let (s, b) = oracle_fit(&target, &source, &fmask);
    track(fit.slope, s);
    track(fit.intercept, b);

    let k = r.random_range(1..=16);
    let v: Vec<Vec<f64>> = (0..11).map(|_| random_vec(&mut r, k, -3.0, 3.0)).collect();
    track(
        content_loss(&v[0], &v[1], &v[2]).unwrap(),
        oracle_mean_abs(&v[1], &v[0]) + oracle_mean_abs(&v[2], &v[0]),
    );
    track(
        kl_loss(&v[3], &v[4], &v[5], &v[6]).unwrap(),
        oracle_mean(&v[3]) - oracle_mean(&v[4]) + oracle_mean(&v[5]) - oracle_mean(&v[6]),
    );
    let domains: [(&[f64], &[f64]); 2] = [(&v[7], &v[8]), (&v[9], &v[10])];
    let recon = oracle_mean_abs(&v[7], &v[8]) + oracle_mean_abs(&v[9], &v[10]);
    track(image_recon_loss(&domains).unwrap(), recon);
    track(prior_recon_loss(&domains).unwrap(), recon);
    // scores include exact 0 and 1 to hit the clamp
    let scores: Vec<Vec<f64>> = (0..4)
        .map(|_| {
            let mut s = random_vec(&mut r, k, 0.0, 1.0);
            s[0] = if r.random::<bool>() { 0.0 } else { 1.0 };
            s
        })
        .collect();
    track(
        adversarial_loss(&scores[0], &scores[1], &scores[2], &scores[3]).unwrap(),
        oracle_mean_log(&scores[0], true)
            + oracle_mean_log(&scores[1], false)
            + oracle_mean_log(&scores[2], true)
            + oracle_mean_log(&scores[3], false),
    );

    let parts = LossParts {
        adversarial: r.random_range(-5.0..0.0),
        content: r.random(),
        kl: r.random(),
        image_recon: r.random(),
        prior_recon: r.random(),
        physical: r.random(),
        smooth: r.random(),
        intensity: r.random(),
    };
    let lw = LossWeights::default();
    let wts = [lw.content, lw.kl, lw.image_recon, lw.prior_recon, lw.physical, lw.smooth, lw.intensity];
    let vals = [
        parts.content,
        parts.kl,
        parts.image_recon,
        parts.prior_recon,
        parts.physical,
        parts.smooth,
        parts.intensity,
    ];
    let mut expect = parts.adversarial;
    for i in 0..7 {
        expect += wts[i] * vals[i];
    }
    track(total_objective(&parts, &lw), expect);
    gap
}

/// Relative error `|g - g_fd| / |g_fd|` of the analytic objective gradient
/// against central differences with step `h` on a random instance.
pub fn gradient_fd_error(seed: u64, w: usize, h: usize, step: f64) -> f64 {
    use lidar_iid::solver::{objective_gradient, ObjectiveState, SolverConfig};

    let mut r = rng(seed);
    let n = w * h;
    let image = random_image(&mut r, w, h, 0.05, 0.95);
    let lidar = random_gray(&mut r, w, h, 0.05, 0.95);
    let mask = random_mask(&mut r, n, 0.5);
    let cfg = SolverConfig::default();
    let mut state = ObjectiveState::new(&image, &lidar, &mask, &cfg).unwrap();
    state.scale_bias = ScaleBias {
        s1: r.random_range(0.5..1.5),
        b1: r.random_range(-0.1..0.1),
        s2: r.random_range(0.5..1.5),
        b2: r.random_range(-0.1..0.1),
    };
    // strictly inside the feasible box, clear of the clamp kinks
    let (lo, hi) = state.bounds();
    let u: Vec<f64> = (0..n)
        .map(|p| {
            let margin = (hi[p] - lo[p]) * 0.1;
            r.random_range(lo[p] + margin..hi[p] - margin)
        })
        .collect();
    let g = objective_gradient(&u, &state);
    let (mut num, mut den) = (0.0, 0.0);
    let mut up = u.clone();
    for p in 0..n {
        up[p] = u[p] + step;
        let fp = state.value(&up);
        up[p] = u[p] - step;
        let fm = state.value(&up);
        up[p] = u[p];
        let fd = (fp - fm) / (2.0 * step);
        num += (g[p] - fd).powi(2);
        den += fd * fd;
    }
    (num / den).sqrt()
}

/// Max per-pixel gap between the iterative densifier and the dense solve,
/// and whether the result stays within the observed range.
pub fn densify_oracle_gap(seed: u64) -> (f64, bool) {
    use lidar_iid::densify::{densify, DensifyParams};

    let mut r = rng(seed);
    let n_max = 100;
    let w = r.random_range(2..=10);
    let h = r.random_range(2..=n_max / w);
    let n = w * h;
    // mild colors keep every edge weight well above zero
    let image = random_image(&mut r, w, h, 0.3, 0.7);
    let vals = random_gray(&mut r, w, h, 0.0, 1.0);
    let mask = random_mask(&mut r, n, 0.3);
    let sparse = SparseIntensity::new(vals, mask).unwrap();
    let params = DensifyParams {
        tol: 1e-12,
        max_iters: 10_000,
        ..DensifyParams::default()
    };
    let out = densify(&image, &sparse, &params).unwrap();
    let dense = dense_densify(&image, &sparse, params.lambda_reg, params.sigma_rgb);
    let gap = out
        .intensity
        .values()
        .iter()
        .zip(&dense)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let observed: Vec<f64> = (0..n).filter(|&p| sparse.mask()[p]).map(|p| sparse.values().values()[p]).collect();
    let lo = observed.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = observed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bounded = out.intensity.values().iter().all(|&v| v >= lo - 1e-9 && v <= hi + 1e-9);
    (gap, bounded)
}
