mod common;

use common::*;
use lidar_iid::annotate::{AnnotationPair, Judgement};
use lidar_iid::densify::SparseIntensity;
use lidar_iid::eval::{balanced_subsample, intensity_correlation, prf, whdr, ClassCounts};
use lidar_iid::imagecore::{luminance, GrayMap, LinearImage};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn random_pairs(seed: u64, w: usize, h: usize, n: usize) -> Vec<AnnotationPair> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| AnnotationPair {
            image_id: "x".into(),
            p1: [r.random_range(0..w), r.random_range(0..h)],
            p2: [r.random_range(0..w), r.random_range(0..h)],
            judgement: Judgement::ALL[r.random_range(0..3)],
            weight: r.random_range(0.1..2.0),
        })
        .collect()
}

fn scaled(img: &LinearImage, c: f64) -> LinearImage {
    img.map(|p| p.map(|v| v * c)).unwrap()
}

#[test]
fn correlation_matches_two_pass_oracle() {
    let mut r = rng(7);
    let img = random_image(&mut r, 32, 32, 0.0, 1.0);
    let lum = luminance(&img);
    let noise = Normal::new(0.0, 0.25).unwrap();
    let vals: Vec<f64> = lum.values().iter().map(|&l| (l + noise.sample(&mut r)).clamp(0.0, 1.0)).collect();
    let mask = random_mask(&mut r, 32 * 32, 0.5);
    let sparse = SparseIntensity::new(GrayMap::new(32, 32, vals.clone()).unwrap(), mask.clone()).unwrap();
    let got = intensity_correlation(&img, &sparse).unwrap();
    let a: Vec<f64> = (0..vals.len()).filter(|&p| mask[p]).map(|p| lum.values()[p]).collect();
    let b: Vec<f64> = (0..vals.len()).filter(|&p| mask[p]).map(|p| vals[p]).collect();
    let expect = oracle_pearson(&a, &b);
    assert!((got.coefficient - expect).abs() <= 1e-6, "{} vs {expect}", got.coefficient);
    assert!(got.coefficient > 0.2 && got.coefficient < 0.8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn whdr_is_a_rate_and_scale_free(seed in 0u64..10_000, c in 0.05f64..20.0, k in 0.1f64..10.0) {
        let mut r = rng(seed);
        // keep c * R inside [0, 1] so no channel is clipped
        let img = random_image(&mut r, 6, 6, 0.0, (1.0 / c).min(1.0));
        let ann = random_pairs(seed, 6, 6, 20);
        let base = whdr(&ann, &img, 0.1).unwrap();
        prop_assert!((0.0..=1.0).contains(&base));
        prop_assert_eq!(base, whdr(&ann, &scaled(&img, c), 0.1).unwrap());
        prop_assert_eq!(prf(&ann, &img, 0.1).unwrap(), prf(&ann, &scaled(&img, c), 0.1).unwrap());
        let heavier: Vec<AnnotationPair> = ann.iter().cloned().map(|mut p| { p.weight *= k; p }).collect();
        prop_assert!((base - whdr(&heavier, &img, 0.1).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn balanced_subsample_equalizes_classes(seed in 0u64..10_000, sub in 0u64..100) {
        let ann = random_pairs(seed, 8, 8, 40);
        let counts = ClassCounts::of(&ann);
        prop_assume!(counts.e > 0 && counts.d > 0 && counts.l > 0);
        let out = balanced_subsample(&ann, sub).unwrap();
        let m = counts.e.min(counts.d).min(counts.l);
        let oc = ClassCounts::of(&out);
        prop_assert_eq!((oc.e, oc.d, oc.l), (m, m, m));
        for p in &out {
            prop_assert!(ann.contains(p));
        }
        prop_assert_eq!(out, balanced_subsample(&ann, sub).unwrap());
    }
}
