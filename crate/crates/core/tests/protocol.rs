use dpfts::accountant::epsilon;
use dpfts::experiments::{run_experiment, Algo, DpSettings, ExperimentConfig, ExperimentResult};
use dpfts::protocol::{draw_branch, run, Branch, PSchedule, RunTrace};
use dpfts::rng::{derive_seed, stream, Stream};
use dpfts::surrogate::RffMap;

fn small(algo: Algo, regions: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::synthetic(algo, regions);
    c.agents = 16;
    c.domain.points = 200;
    c.features = 20;
    c.rounds = 12;
    c.n_init = 4;
    c.seeds = vec![0, 1];
    c
}

fn go(c: &ExperimentConfig) -> ExperimentResult {
    c.validate().unwrap();
    run_experiment(c, Some(1)).unwrap()
}

#[test]
fn one_row_per_query() {
    for algo in Algo::ALL {
        let c = small(algo, 2);
        for t in go(&c).traces {
            assert_eq!(t.rows.len(), c.agents * (c.rounds as usize + c.n_init));
            assert_eq!(t.rounds.len(), c.rounds as usize + 1);
            assert_eq!(t.rows_at(0).count(), c.agents * c.n_init);
            for r in 1..=c.rounds {
                assert_eq!(t.rows_at(r).count(), c.agents);
            }
        }
    }
}

/// φ(x)ᵀω of the owning region for every grid point, scanned from scratch.
fn scan_argmax(c: &ExperimentConfig, seed: u64, per_region: &[Vec<f64>]) -> usize {
    let problem = c.build_problem().unwrap();
    let rff = RffMap::sample(
        &c.kernel,
        c.features,
        1,
        derive_seed(seed, Stream::Features, &[]),
        c.feature_variant,
    )
    .unwrap();
    let mut best = (0, f64::NEG_INFINITY);
    for (id, x) in problem.domain.points().enumerate() {
        let w = &per_region[problem.partition.region_of(x).unwrap()];
        let v: f64 = rff.features(x).iter().zip(w).map(|(a, b)| a * b).sum();
        if v > best.1 {
            best = (id, v);
        }
    }
    best.0
}

fn check_broadcast_use(c: &ExperimentConfig, t: &RunTrace) -> usize {
    let mut checked = 0;
    for round in 1..=c.rounds {
        let used: Vec<usize> = t
            .rows_at(round)
            .filter(|r| r.branch == Branch::Broadcast)
            .map(|r| r.grid_id)
            .collect();
        if used.is_empty() {
            continue;
        }
        let prev = t
            .broadcasts
            .iter()
            .find(|b| b.round == round - 1)
            .unwrap_or_else(|| panic!("round {round} used a broadcast that was never produced"));
        let want = scan_argmax(c, t.seed, &prev.per_region);
        assert!(used.iter().all(|&id| id == want), "round {round}");
        checked += used.len();
    }
    checked
}

#[test]
fn broadcast_queries_follow_previous_round_argmax() {
    for (algo, p) in [(Algo::Fts, 1), (Algo::FtsDe, 2), (Algo::DpFtsDe, 4)] {
        let c = small(algo, p);
        let checked: usize = go(&c)
            .traces
            .iter()
            .map(|t| check_broadcast_use(&c, t))
            .sum();
        assert!(checked > 0, "{algo:?} never used a broadcast");
    }
}

#[test]
fn broadcasts_are_released_after_rounds_zero_to_t_minus_one() {
    let c = small(Algo::DpFtsDe, 2);
    for t in go(&c).traces {
        let rounds: Vec<u32> = t.broadcasts.iter().map(|b| b.round).collect();
        assert_eq!(rounds, (0..c.rounds).collect::<Vec<_>>());
        for b in &t.broadcasts {
            assert_eq!(b.regions(), 2);
            assert_eq!(b.features(), c.features);
        }
    }
}

#[test]
fn ledger_freezes_after_cutoff() {
    let mut c = small(Algo::DpFtsDe, 2);
    c.cutoff = Some(5);
    for t in go(&c).traces {
        for r in &t.rounds {
            // Releases happen after rounds 0..cutoff−1 only.
            let releases = (r.round + 1).min(5) as u64;
            let want = epsilon(c.dp.q, c.dp.z, releases, c.delta(), c.max_order)
                .unwrap()
                .epsilon;
            assert!((r.epsilon - want).abs() < 1e-12, "round {}", r.round);
        }
        for row in t.rows.iter().filter(|r| r.round > 5) {
            assert_eq!(row.branch, Branch::PostCutoff);
        }
        assert!(t.broadcasts.iter().all(|b| b.round < 5));
    }
}

fn same_runs(a: &ExperimentResult, b: &ExperimentResult) {
    for (x, y) in a.traces.iter().zip(&b.traces) {
        assert_eq!(x.rows, y.rows);
        assert_eq!(x.broadcasts, y.broadcasts);
    }
}

#[test]
fn private_presets_reduce_to_non_private_ones() {
    let open = DpSettings::disabled();
    for p in [1, 2, 4] {
        let mut dp = small(Algo::DpFtsDe, p);
        dp.dp = open;
        same_runs(&go(&dp), &go(&small(Algo::FtsDe, p)));
    }
    let mut dp = small(Algo::DpFtsDe, 1);
    dp.dp = open;
    same_runs(&go(&dp), &go(&small(Algo::Fts, 1)));
    let mut dp1 = small(Algo::DpFts, 1);
    dp1.dp = open;
    same_runs(&go(&dp1), &go(&small(Algo::Fts, 1)));
}

#[test]
fn ts_never_leaves_its_own_posterior() {
    let r = go(&small(Algo::Ts, 1));
    for t in &r.traces {
        assert!(t
            .rows
            .iter()
            .filter(|r| r.round > 0)
            .all(|r| r.branch == Branch::LocalTs));
        assert!(t.broadcasts.is_empty());
        assert_eq!(t.final_epsilon(), 0.0);
    }
    let mut always_local = small(Algo::FtsDe, 2);
    always_local.p_schedule = PSchedule::Constant { value: 1.0 };
    for t in go(&always_local).traces {
        assert!(t
            .rows
            .iter()
            .filter(|r| r.round > 0)
            .all(|r| r.branch == Branch::LocalTs));
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let c = small(Algo::DpFtsDe, 2);
    let problem = c.build_problem().unwrap();
    let proto = c.protocol();
    let one = run(&proto, &problem, &c.seeds, Some(1)).unwrap();
    let three = run(&proto, &problem, &c.seeds, Some(3)).unwrap();
    assert_eq!(one, three);
}

#[test]
fn branch_frequency_tracks_schedule() {
    let draws = 10_000;
    for (t, p) in [(3u32, 0.2), (7, 0.5), (20, 0.9)] {
        let mut rng = stream(99, Stream::Agent, &[t as u64]);
        let hits = (0..draws)
            .filter(|_| draw_branch(t, p, Some(30), &mut rng) == Branch::Broadcast)
            .count();
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        assert!(
            (hits as f64 / draws as f64 - (1.0 - p)).abs() < 3.0 * se,
            "t={t}"
        );
    }
    let mut rng = stream(0, Stream::Agent, &[]);
    assert!((0..100).all(|_| draw_branch(31, 0.0, Some(30), &mut rng) == Branch::PostCutoff));
}

#[test]
fn simple_regret_never_increases() {
    for algo in Algo::ALL {
        for t in go(&small(algo, 2)).traces {
            let mut best = vec![f64::INFINITY; t.agents];
            for row in &t.rows {
                assert!(row.simple_regret <= best[row.agent]);
                assert!(row.simple_regret >= 0.0);
                best[row.agent] = row.simple_regret;
            }
        }
    }
}
