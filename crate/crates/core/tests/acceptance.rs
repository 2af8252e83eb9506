//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Runs with `cargo test -p dpfts --test acceptance`. The process exits
//! non-zero on failures only when `DPFTS_ACCEPTANCE_STRICT=1`.

use std::time::{Duration, Instant};

use dpfts::accountant::{delta_default, epsilon, log_moment};
use dpfts::domain::{Assignment, Domain, GridSize, Partition};
use dpfts::experiments::{
    regret_curve, run_experiment, write_trace_csv, Algo, ExperimentConfig, ExperimentResult,
    RegretKind,
};
use dpfts::mechanism::{aggregate, clip, l2_norm, noise_std, DpParams};
use dpfts::protocol::{draw_branch, Branch, PSchedule};
use dpfts::rng::{stream, Stream};
use dpfts::surrogate::{FeaturePosterior, FeatureVariant, History, KernelSpec, RffMap};
use dpfts::weights::{WeightMatrix, WeightMode, WeightSchedule};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: u32, name: &str, elapsed: Duration, o: &Outcome) {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    println!(
        "[{tag}] {id} {name}: {} ({:.2} s)",
        o.detail,
        elapsed.as_secs_f64()
    );
}

fn within(got: f64, want: f64, rel: f64) -> bool {
    ((got - want) / want).abs() <= rel
}

fn c1_golden() -> Outcome {
    let start = Instant::now();
    let delta = delta_default(200);
    let cases = [
        (0.15, 1.0, 5.93),
        (0.25, 1.0, 9.91),
        (0.5, 1.0, 20.12),
        (0.25, 1.2, 7.39),
        (0.25, 1.5, 5.22),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (q, z, want) in cases {
        let got = epsilon(q, z, 40, delta, 64).unwrap().epsilon;
        pass &= within(got, want, 0.05);
        parts.push(format!("q={q} z={z}: {got:.3} vs {want}"));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 5.0;
    Outcome {
        pass,
        detail: format!("{}; {secs:.2} s < 5 s", parts.join(", ")),
    }
}

fn c2_gaussian_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for z in [0.5, 1.0, 2.0, 4.0] {
        for m in 1..=64u32 {
            let exact = (m * (m + 1)) as f64 / (2.0 * z * z);
            let got = log_moment(1.0, z, m).unwrap();
            worst = worst.max(((got - exact) / exact).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: worst <= 1e-6 && secs < 10.0,
        detail: format!("max relative error {worst:.2e} (≤ 1e-6), {secs:.2} s < 10 s"),
    }
}

fn c3_posterior_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for case in 0..100u64 {
        let m = 2 * rng.random_range(1..=32usize);
        let n = rng.random_range(0..=10usize);
        let lambda = rng.random_range(0.01..1.0);
        let kernel = KernelSpec::new(rng.random_range(0.05..0.5), 1.0, 0.0).unwrap();
        let rff = RffMap::sample(&kernel, m, 1, case, FeatureVariant::Paired).unwrap();
        let mut h = History::new();
        for _ in 0..n {
            let x = rng.random::<f64>();
            h.push(&[x], rng.random_range(-1.0..1.0));
        }
        let post = FeaturePosterior::fit(&h, &rff, lambda).unwrap();
        // Kernel-form posterior under k̂(x, x') = φ(x)ᵀφ(x'), by dense inverse.
        let phis: Vec<DVector<f64>> = h
            .inputs()
            .iter()
            .map(|x| DVector::from_vec(rff.features(x)))
            .collect();
        let gram =
            DMatrix::from_fn(n, n, |i, j| phis[i].dot(&phis[j])) + DMatrix::identity(n, n) * lambda;
        let inv = gram.try_inverse().unwrap();
        let y = DVector::from_column_slice(h.outputs());
        for _ in 0..5 {
            let x = rng.random::<f64>();
            let phi = DVector::from_vec(rff.features(&[x]));
            let kx = DVector::from_iterator(n, phis.iter().map(|p| p.dot(&phi)));
            let mean = (kx.transpose() * &inv * &y)[0];
            let var = phi.dot(&phi) - (kx.transpose() * &inv * &kx)[0];
            worst = worst
                .max((post.mean(phi.as_slice()) - mean).abs())
                .max((post.variance(phi.as_slice()) - var).abs());
        }
    }
    Outcome {
        pass: worst <= 1e-8,
        detail: format!("100 histories, max abs deviation {worst:.2e} (≤ 1e-8)"),
    }
}

fn c4_mechanism() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 37;
    let m = 20;
    let omegas: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..m).map(|_| rng.random_range(-5.0..5.0)).collect())
        .collect();
    let all: Vec<usize> = (0..n).collect();
    let (b, _) = aggregate(
        0,
        &omegas,
        &all,
        &WeightMatrix::uniform(1, n),
        &DpParams::disabled(1),
        &mut rng,
    )
    .unwrap();
    let mut dev: f64 = 0.0;
    for j in 0..m {
        let avg = omegas.iter().map(|w| w[j]).sum::<f64>() / n as f64;
        dev = dev.max((b.region(0)[j] - avg).abs());
    }

    let params = DpParams {
        q: 0.5,
        z: 1.3,
        clip: 5.0,
        regions: 2,
    };
    let assignment = Assignment::random(n, 2, &mut rng).unwrap();
    let weights = WeightSchedule::synthetic().weights(&assignment, 1);
    let expected = noise_std(&params, weights.max()).unwrap();
    let zeros = vec![vec![0.0; 50]; n];
    let mut sum = 0.0;
    let mut sq = 0.0;
    let mut count = 0usize;
    while count < 100_000 {
        let (b, _) = aggregate(1, &zeros, &all, &weights, &params, &mut rng).unwrap();
        for v in b.per_region.iter().flatten() {
            sum += v;
            sq += v * v;
            count += 1;
        }
    }
    let mean = sum / count as f64;
    let sd = (sq / count as f64 - mean * mean).sqrt();
    Outcome {
        pass: dev <= 1e-12 && within(sd, expected, 0.02),
        detail: format!(
            "average deviation {dev:.1e} (≤ 1e-12); noise sd {sd:.4} vs {expected:.4} over {count} draws (±2%)"
        ),
    }
}

/// The preset runs shared by criteria 5, 6, 7 and 9.
struct Matrix {
    ts: ExperimentResult,
    fts: ExperimentResult,
    fts_de2: ExperimentResult,
    fts_de4: ExperimentResult,
    dp_fts: ExperimentResult,
    dp_fts_de: ExperimentResult,
    elapsed: Duration,
}

fn run_matrix() -> Matrix {
    let start = Instant::now();
    let go = |algo, p| run_experiment(&ExperimentConfig::synthetic(algo, p), None).unwrap();
    Matrix {
        ts: go(Algo::Ts, 1),
        fts: go(Algo::Fts, 1),
        fts_de2: go(Algo::FtsDe, 2),
        fts_de4: go(Algo::FtsDe, 4),
        dp_fts: go(Algo::DpFts, 1),
        dp_fts_de: go(Algo::DpFtsDe, 2),
        elapsed: start.elapsed(),
    }
}

fn final_simple(r: &ExperimentResult) -> (f64, f64) {
    let c = regret_curve(&r.traces, RegretKind::Simple);
    let last = c.last().unwrap();
    (last.mean, last.stderr)
}

fn c5_clip(mx: &Matrix) -> Outcome {
    let de = dpfts::experiments::mean_clip_fraction(&mx.dp_fts_de.traces).unwrap();
    let single = dpfts::experiments::mean_clip_fraction(&mx.dp_fts.traces).unwrap();
    Outcome {
        pass: (0.002..=0.02).contains(&de) && single < de,
        detail: format!(
            "P=2 S=11: {:.3}% (in [0.2%, 2%]); P=1 S=8: {:.3}% (< P=2)",
            100.0 * de,
            100.0 * single
        ),
    }
}

fn c6_ordering(mx: &Matrix) -> Outcome {
    let chain = [
        ("FTS-DE(P=4)", final_simple(&mx.fts_de4)),
        ("FTS-DE(P=2)", final_simple(&mx.fts_de2)),
        ("FTS", final_simple(&mx.fts)),
        ("TS", final_simple(&mx.ts)),
    ];
    let mut pass = mx.elapsed.as_secs() < 30 * 60;
    let mut parts = Vec::new();
    for w in chain.windows(2) {
        let ((a, (ma, sa)), (b, (mb, sb))) = (w[0], w[1]);
        let pooled = (sa * sa + sb * sb).sqrt();
        let ok = mb - ma > pooled;
        pass &= ok;
        parts.push(format!(
            "{a} {ma:.4} < {b} {mb:.4} by {:.4} vs SE {pooled:.4} [{}]",
            mb - ma,
            if ok { "ok" } else { "violated" }
        ));
    }
    Outcome {
        pass,
        detail: format!(
            "{}; matrix {:.0} s",
            parts.join("; "),
            mx.elapsed.as_secs_f64()
        ),
    }
}

fn per_seed_final(r: &ExperimentResult) -> Vec<f64> {
    r.traces
        .iter()
        .map(|t| {
            let c = regret_curve(std::slice::from_ref(t), RegretKind::Simple);
            c.last().unwrap().mean
        })
        .collect()
}

fn c7_dp_utility(mx: &Matrix) -> Outcome {
    let de = per_seed_final(&mx.dp_fts_de);
    let single = per_seed_final(&mx.dp_fts);
    let wins = de.iter().zip(&single).filter(|(a, b)| a < b).count();
    let eps_de = mx.dp_fts_de.traces[0].final_epsilon();
    let eps_single = mx.dp_fts.traces[0].final_epsilon();
    Outcome {
        pass: 2 * wins > de.len() && (eps_de - eps_single).abs() < 1e-12,
        detail: format!(
            "DP-FTS-DE wins {wins}/{} seeds (majority needed); means {:.4} vs {:.4}; epsilon {eps_de:.3} both",
            de.len(),
            final_simple(&mx.dp_fts_de).0,
            final_simple(&mx.dp_fts).0
        ),
    }
}

fn c8_determinism() -> Outcome {
    let cfg = ExperimentConfig::synthetic(Algo::DpFtsDe, 2);
    let csv = |threads| {
        let r = run_experiment(&cfg, Some(threads)).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(cfg.algo.name(), &r.traces, &mut buf).unwrap();
        buf
    };
    let a = csv(1);
    let b = csv(4);
    Outcome {
        pass: a == b,
        detail: format!(
            "1 vs 4 worker threads, {} bytes each, identical: {}",
            a.len(),
            a == b
        ),
    }
}

fn c9_properties(mx: &Matrix) -> Outcome {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(9);

    // Weight rows are probability vectors.
    for mode in [
        WeightMode::Adaptive,
        WeightMode::FixedTemperature,
        WeightMode::Uniform,
    ] {
        for p in [1, 2, 4, 8] {
            let a = Assignment::random(50, p, &mut rng).unwrap();
            let s = WeightSchedule::synthetic().with_mode(mode);
            for t in 0..20 {
                let w = s.weights(&a, t);
                for i in 0..p {
                    let row = w.row(i);
                    if (row.iter().sum::<f64>() - 1.0).abs() > 1e-12 || row.iter().any(|&x| x < 0.0)
                    {
                        failures.push(format!("weights {mode:?} P={p} t={t} row {i}"));
                    }
                }
            }
        }
    }

    // Partition covers every grid point exactly once with equal volumes.
    for (dims, p) in [(1, 2), (1, 3), (2, 4), (3, 8)] {
        let d = Domain::grid(&vec![(0.0, 1.0); dims], GridSize::PerDim(9)).unwrap();
        let part = Partition::new(&d, p).unwrap();
        let mut hits = vec![0; d.len()];
        for i in 0..p {
            for id in part.points_in(i) {
                hits[id] += 1;
            }
        }
        let vols: Vec<f64> = part.regions().iter().map(|r| r.volume()).collect();
        if hits.iter().any(|&h| h != 1) || vols.iter().any(|v| (v - vols[0]).abs() > 1e-12) {
            failures.push(format!("partition D={dims} P={p}"));
        }
    }

    // Clipped vectors respect S/√P.
    for _ in 0..1000 {
        let v: Vec<f64> = (0..20).map(|_| rng.random_range(-10.0..10.0)).collect();
        let s = rng.random_range(0.1..20.0);
        let p = rng.random_range(1..9);
        if l2_norm(&clip(&v, s, p)) > s / (p as f64).sqrt() * (1.0 + 1e-12) {
            failures.push("clip bound".into());
            break;
        }
    }

    // ε grows with T and q, shrinks with z.
    let d = delta_default(200);
    let e = |q, z, t| epsilon(q, z, t, d, 64).unwrap().epsilon;
    if !(e(0.25, 1.0, 10) < e(0.25, 1.0, 20) && e(0.25, 1.0, 20) < e(0.25, 1.0, 40)) {
        failures.push("epsilon monotone in T".into());
    }
    if !(e(0.1, 1.0, 40) < e(0.25, 1.0, 40) && e(0.25, 1.0, 40) < e(0.5, 1.0, 40)) {
        failures.push("epsilon monotone in q".into());
    }
    if !(e(0.25, 2.0, 40) < e(0.25, 1.5, 40) && e(0.25, 1.5, 40) < e(0.25, 1.0, 40)) {
        failures.push("epsilon monotone in z".into());
    }

    // Simple regret never increases along any emitted trajectory; cumulative
    // regret never decreases.
    let all = [
        &mx.ts,
        &mx.fts,
        &mx.fts_de2,
        &mx.fts_de4,
        &mx.dp_fts,
        &mx.dp_fts_de,
    ];
    for r in all {
        for t in &r.traces {
            let mut last = vec![(f64::INFINITY, 0.0); t.agents];
            for row in &t.rows {
                let (s, c) = last[row.agent];
                if row.simple_regret > s || row.cum_regret < c {
                    failures.push(format!(
                        "regret monotonicity {} seed {}",
                        r.config.algo.name(),
                        t.seed
                    ));
                    break;
                }
                last[row.agent] = (row.simple_regret, row.cum_regret);
            }
        }
    }

    // Broadcast branch frequency matches 1 − p_t within 3 standard errors.
    for t in [2u32, 4, 9, 25] {
        let p = PSchedule::InvSqrt.p(t).unwrap().p;
        let draws = 10_000;
        let mut rng = stream(t as u64, Stream::Agent, &[]);
        let hits = (0..draws)
            .filter(|_| draw_branch(t, p, None, &mut rng) == Branch::Broadcast)
            .count();
        let f = hits as f64 / draws as f64;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        if (f - (1.0 - p)).abs() > 3.0 * se {
            failures.push(format!("branch frequency at t={t}: {f} vs {}", 1.0 - p));
        }
    }

    Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            "weights, partition, clip bound, epsilon monotonicity, regret monotonicity, branch frequency".into()
        } else {
            format!("violations: {}", failures.join(", "))
        },
    }
}

fn main() {
    let mut results = Vec::new();
    let mut run = |id, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        report(id, name, start.elapsed(), &o);
        results.push(o.pass);
    };
    run(1, "accountant golden numbers", &mut c1_golden);
    run(
        2,
        "pure-Gaussian log-moment oracle",
        &mut c2_gaussian_oracle,
    );
    run(
        3,
        "feature posterior equals kernel posterior",
        &mut c3_posterior_oracle,
    );
    run(4, "mechanism degeneracy and noise scale", &mut c4_mechanism);
    let mx = run_matrix();
    run(5, "clip fraction", &mut || c5_clip(&mx));
    run(6, "convergence ordering", &mut || c6_ordering(&mx));
    run(7, "DP utility ordering", &mut || c7_dp_utility(&mx));
    run(8, "determinism across thread counts", &mut c8_determinism);
    run(9, "property suites", &mut || c9_properties(&mx));
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    let strict = std::env::var("DPFTS_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && passed < results.len() {
        std::process::exit(1);
    }
}
