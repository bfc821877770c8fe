mod common;

use common::*;
use lidar_iid::densify::{densify, DensifyParams, SparseIntensity};
use lidar_iid::imagecore::{GrayMap, LinearImage};

#[test]
fn matches_dense_solve_on_random_instances() {
    for seed in 0..20 {
        let (gap, bounded) = densify_oracle_gap(seed);
        assert!(gap <= 1e-6, "seed {seed}: gap {gap:e}");
        assert!(bounded, "seed {seed}: maximum principle violated");
    }
}

#[test]
fn two_region_example() {
    // left half 0.2, right half 0.8, one observation per side
    let img = LinearImage::from_fn(8, 8, |x, _| [if x < 4 { 0.2 } else { 0.8 }; 3]).unwrap();
    let mut vals = vec![0.0; 64];
    let mut mask = vec![false; 64];
    vals[3 * 8 + 1] = 0.3;
    mask[3 * 8 + 1] = true;
    vals[4 * 8 + 6] = 0.9;
    mask[4 * 8 + 6] = true;
    let sparse = SparseIntensity::new(GrayMap::new(8, 8, vals).unwrap(), mask).unwrap();
    let params = DensifyParams {
        tol: 1e-12,
        ..DensifyParams::default()
    };
    let out = densify(&img, &sparse, &params).unwrap();
    let dense = dense_densify(&img, &sparse, params.lambda_reg, params.sigma_rgb);
    for (p, (a, b)) in out.intensity.values().iter().zip(&dense).enumerate() {
        assert!((a - b).abs() <= 1e-6, "pixel {p}: {a} vs {b}");
    }
    // each side takes its own observation almost exactly
    for y in 0..8 {
        assert!((out.intensity.get(0, y) - 0.3).abs() < 1e-3);
        assert!((out.intensity.get(7, y) - 0.9).abs() < 1e-3);
    }
}
