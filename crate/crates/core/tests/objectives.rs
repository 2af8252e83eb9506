use dpfts::domain::Domain;
use dpfts::objectives::{NoiseModel, Suite};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grid() -> Domain {
    Domain::unit_interval(1000).unwrap()
}

#[test]
fn base_function_is_normalized() {
    let s = Suite::synthetic(&grid(), 3, 0.03, 0.02, 4).unwrap();
    let base = s.base().unwrap();
    assert_eq!(base.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
    assert_eq!(base.iter().copied().fold(f64::NEG_INFINITY, f64::max), 1.0);
}

/// Chi-square statistics for sign balance (1 dof) and adjacent-pair
/// uniformity (3 dof) over every agent and grid point.
fn sign_statistics(seed: u64, agents: usize) -> (f64, f64) {
    let s = Suite::synthetic(&grid(), agents, 0.03, 0.02, seed).unwrap();
    let base = s.base().unwrap();
    let mut ones = 0usize;
    let mut pairs = [0usize; 4];
    let mut total = 0usize;
    for n in 0..agents {
        let signs: Vec<usize> = s
            .values(n)
            .iter()
            .zip(base)
            .map(|(v, b)| {
                assert!(((v - b).abs() - 0.02).abs() < 1e-12);
                usize::from(v > b)
            })
            .collect();
        ones += signs.iter().sum::<usize>();
        total += signs.len();
        for w in signs.chunks_exact(2) {
            pairs[2 * w[0] + w[1]] += 1;
        }
    }
    let half = total as f64 / 2.0;
    let chi1 = 2.0 * (ones as f64 - half).powi(2) / half;
    let quarter = pairs.iter().sum::<usize>() as f64 / 4.0;
    let chi3 = pairs
        .iter()
        .map(|&c| (c as f64 - quarter).powi(2) / quarter)
        .sum();
    (chi1, chi3)
}

#[test]
fn perturbation_signs_are_fair_and_independent() {
    // 10⁵ draws; 1% critical values are 6.635 (1 dof) and 11.345 (3 dof).
    let (chi1, chi3) = sign_statistics(1, 100);
    assert!(chi1 < 6.635, "sign balance chi-square {chi1}");
    assert!(chi3 < 11.345, "adjacent pair chi-square {chi3}");
}

#[test]
fn sign_statistic_is_chi_square_across_seeds() {
    // Summed over 60 seeds the balance statistic is χ²(60); its 0.5% and
    // 99.5% quantiles are 35.53 and 91.95.
    let sum: f64 = (100..160).map(|seed| sign_statistics(seed, 20).0).sum();
    assert!((35.53..=91.95).contains(&sum), "sum of statistics {sum}");
}

#[test]
fn agent_average_approaches_base() {
    let agents = 400;
    let d = 0.02;
    let s = Suite::synthetic(&grid(), agents, 0.03, d, 1).unwrap();
    let base = s.base().unwrap();
    let sd = d / (agents as f64).sqrt();
    for (id, &b) in base.iter().enumerate() {
        let mean = (0..agents).map(|n| s.values(n)[id]).sum::<f64>() / agents as f64;
        assert!((mean - b).abs() < 5.0 * sd, "id {id}");
    }
}

#[test]
fn same_seed_same_suite() {
    let a = Suite::synthetic(&grid(), 5, 0.03, 0.02, 9).unwrap();
    assert_eq!(a, Suite::synthetic(&grid(), 5, 0.03, 0.02, 9).unwrap());
    assert_ne!(a, Suite::synthetic(&grid(), 5, 0.03, 0.02, 10).unwrap());
}

#[test]
fn observation_noise_has_configured_variance() {
    let s = Suite::synthetic(&grid(), 1, 0.03, 0.02, 0).unwrap();
    let noise = NoiseModel::new(0.01).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let draws = 100_000;
    let resid: Vec<f64> = (0..draws)
        .map(|k| {
            let e = s.evaluate(0, k % 1000, &noise, &mut rng).unwrap();
            e.y - e.value
        })
        .collect();
    let mean = resid.iter().sum::<f64>() / draws as f64;
    let var = resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
    assert!((var / 0.01 - 1.0).abs() < 0.05, "variance {var}");
    let quiet = s
        .evaluate(0, 3, &NoiseModel::new(0.0).unwrap(), &mut rng)
        .unwrap();
    assert_eq!(quiet.y, quiet.value);
}

fn across_agent_variance(s: &Suite, id: usize) -> f64 {
    let n = s.agents();
    let vals: Vec<f64> = (0..n).map(|a| s.values(a)[id]).collect();
    let mean = vals.iter().sum::<f64>() / n as f64;
    vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64
}

#[test]
fn heterogeneity_scales_spread_by_alpha_squared() {
    let g = grid();
    let full = Suite::heterogeneous(&g, 20, 1.0, 0.05, 3).unwrap();
    let mixed = Suite::heterogeneous(&g, 20, 0.7, 0.05, 3).unwrap();
    for id in (0..1000).step_by(37) {
        let (a, b) = (
            across_agent_variance(&full, id),
            across_agent_variance(&mixed, id),
        );
        assert!(
            (b - 0.49 * a).abs() <= 1e-9 * a.max(1e-12),
            "id {id}: {b} vs 0.49 x {a}"
        );
    }
    let shared = Suite::heterogeneous(&g, 4, 0.0, 0.05, 3).unwrap();
    for n in 0..4 {
        assert_eq!(shared.values(n), shared.base().unwrap());
    }
}

#[test]
fn disk_round_trip() {
    let s = Suite::synthetic(&Domain::unit_interval(50).unwrap(), 4, 0.1, 0.02, 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("suite.txt");
    s.save(&path).unwrap();
    let back = Suite::load(&path).unwrap();
    assert_eq!(back.header(), s.header());
    for n in 0..4 {
        assert_eq!(back.values(n), s.values(n));
        assert_eq!(back.optimum(n), s.optimum(n));
    }
}

#[test]
fn malformed_files_are_rejected() {
    let header = r#"{"grid_size":2,"agents":2,"seed":0,"d":0.0}"#;
    let cases = [
        format!("{header}\n0 0.1 0.2\n"),
        format!("{header}\n0 0.1 0.2\n0 0.3 0.4\n"),
        format!("{header}\n0 0.1 0.2\n1 0.3\n"),
        format!("{header}\n0 0.1 0.2\n1 0.3 x\n"),
        "not json\n0 0.1 0.2\n".to_string(),
    ];
    for text in cases {
        assert!(
            Suite::read_from(text.as_bytes()).is_err(),
            "accepted {text:?}"
        );
    }
    let ok = format!("{header}\n1 0.3 0.4\n0 0.1 0.2\n");
    let s = Suite::read_from(ok.as_bytes()).unwrap();
    assert_eq!(s.values(1), &[0.2, 0.4]);
    assert_eq!(s.optimum(0), 0.3);
}
