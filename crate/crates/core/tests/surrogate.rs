use dpfts::surrogate::{FeaturePosterior, FeatureVariant, History, KernelSpec, RffMap};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn map(features: usize, dims: usize, seed: u64) -> RffMap {
    let k = KernelSpec::new(0.2, 0.7, 0.01).unwrap();
    RffMap::sample(&k, features, dims, seed, FeatureVariant::Paired).unwrap()
}

fn random_history(rng: &mut ChaCha8Rng, n: usize, dims: usize) -> History {
    let mut h = History::new();
    for _ in 0..n {
        let x: Vec<f64> = (0..dims).map(|_| rng.random()).collect();
        h.push(&x, rng.random_range(-1.0..1.0));
    }
    h
}

proptest! {
    #[test]
    fn paired_features_have_constant_norm(
        x in prop::collection::vec(-3.0f64..3.0, 2),
        seed in 0u64..1000,
    ) {
        let rff = map(32, 2, seed);
        let sq: f64 = rff.features(&x).iter().map(|v| v * v).sum();
        prop_assert!((sq - 0.7).abs() < 1e-12);
    }
}

#[test]
fn incremental_matches_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rff = map(24, 2, 1);
    for _ in 0..20 {
        let n = rng.random_range(1..15);
        let h = random_history(&mut rng, n, 2);
        let mut inc = FeaturePosterior::prior(rff.len(), 0.05).unwrap();
        for (x, &y) in h.inputs().iter().zip(h.outputs()) {
            inc.update(&rff.features(x), y);
        }
        let batch = FeaturePosterior::fit(&h, &rff, 0.05).unwrap();
        assert!((inc.nu() - batch.nu()).amax() < 1e-8);
        assert!((inc.precision() - batch.precision()).amax() < 1e-8);
        assert_eq!(inc.observations(), batch.observations());
    }
}

#[test]
fn variance_never_increases_with_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rff = map(40, 1, 2);
    let probes: Vec<Vec<f64>> = (0..25).map(|i| vec![i as f64 / 24.0]).collect();
    let mut post = FeaturePosterior::prior(rff.len(), 0.01).unwrap();
    let mut last: Vec<f64> = probes
        .iter()
        .map(|p| post.variance(&rff.features(p)))
        .collect();
    for _ in 0..30 {
        let x = [rng.random::<f64>()];
        post.update(&rff.features(&x), rng.random());
        let now: Vec<f64> = probes
            .iter()
            .map(|p| post.variance(&rff.features(p)))
            .collect();
        for (a, b) in now.iter().zip(&last) {
            assert!(*a <= b + 1e-10);
        }
        last = now;
    }
}

#[test]
fn same_seed_same_map_and_draws() {
    assert_eq!(map(50, 3, 11), map(50, 3, 11));
    assert_ne!(map(50, 3, 11), map(50, 3, 12));
    let rff = map(10, 1, 0);
    let h = random_history(&mut ChaCha8Rng::seed_from_u64(1), 6, 1);
    let post = FeaturePosterior::fit(&h, &rff, 0.1).unwrap();
    let a = post.sample_omega(1.0, &mut ChaCha8Rng::seed_from_u64(4));
    let b = post.sample_omega(1.0, &mut ChaCha8Rng::seed_from_u64(4));
    assert_eq!(a, b);
}

#[test]
fn omega_draws_have_posterior_moments() {
    let rff = map(6, 1, 3);
    let h = random_history(&mut ChaCha8Rng::seed_from_u64(2), 8, 1);
    let post = FeaturePosterior::fit(&h, &rff, 0.1).unwrap();
    let cov = post.weight_covariance();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let draws = 40_000;
    let m = rff.len();
    let samples: Vec<DVector<f64>> = (0..draws)
        .map(|_| post.sample_omega(1.0, &mut rng))
        .collect();
    let mean = samples.iter().fold(DVector::zeros(m), |acc, s| acc + s) / draws as f64;
    for j in 0..m {
        let se = (cov[(j, j)] / draws as f64).sqrt();
        assert!(
            (mean[j] - post.nu()[j]).abs() < 4.0 * se,
            "mean coordinate {j}"
        );
    }
    for j in 0..m {
        for k in 0..m {
            let emp = samples
                .iter()
                .map(|s| (s[j] - post.nu()[j]) * (s[k] - post.nu()[k]))
                .sum::<f64>()
                / draws as f64;
            // Var of a product of jointly normal variables is c_jj c_kk + c_jk².
            let se = ((cov[(j, j)] * cov[(k, k)] + cov[(j, k)].powi(2)) / draws as f64).sqrt();
            assert!(
                (emp - cov[(j, k)]).abs() < 5.0 * se,
                "covariance ({j}, {k})"
            );
        }
    }
    let exact = post.sample_omega(0.0, &mut rng);
    assert_eq!(&exact, post.nu());
}
