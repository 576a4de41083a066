//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Run with `cargo test -p grouptest-cli --test acceptance -- --nocapture`
//! to see the per-criterion lines during a green run.

use std::process::Command;
use std::time::{Duration, Instant};

use grouptest::decoders::{default_tau, DecoderConfig, Measurement};
use grouptest::designs::{ks_build, MatrixBuilder, TestMatrix};
use grouptest::gf::PrimeField;
use grouptest::oracle::{exact_comp_error_prob, is_d_disjunct, root_census};
use grouptest::recursive::{RecursiveScheme, SchemeNode};
use grouptest::rscode::{Regime, RsCode};
use grouptest::sim::{
    run_trials, sweep, FlatDecoder, Instance, SweepBase, SweepPoint, TrialConfig,
};
use num_rational::Ratio;

fn finish(name: &str, started: Instant, budget: Duration, mut failures: Vec<String>) {
    let elapsed = started.elapsed();
    if elapsed > budget {
        failures.push(format!(
            "runtime {:?} exceeded budget {:?}",
            elapsed, budget
        ));
    }
    if failures.is_empty() {
        println!("ACCEPTANCE {}: PASS ({:.1?})", name, elapsed);
    } else {
        println!("ACCEPTANCE {}: FAIL", name);
        for f in &failures {
            println!("  - {}", f);
        }
        panic!("{} failed: {:?}", name, failures);
    }
}

/// 3x4 matrix with column supports {0}, {1}, {2}, {0,1}.
fn overlap_matrix() -> TestMatrix {
    let mut b = MatrixBuilder::new(3, 4);
    b.set(0, 0);
    b.set(1, 1);
    b.set(2, 2);
    b.set(0, 3);
    b.set(1, 3);
    b.build("overlap example")
}

fn ks_matrix(q: u64, n: usize, k: usize, n_items: usize) -> TestMatrix {
    let code = RsCode::new(PrimeField::new(q).unwrap(), n, k).unwrap();
    ks_build(&code, n_items).unwrap()
}

#[test]
fn criterion_1_oracle_equivalence() {
    let started = Instant::now();
    let mut failures = Vec::new();

    let m = overlap_matrix();
    let exact = exact_comp_error_prob(&m, 2).unwrap();
    if exact != Ratio::new(2, 3) {
        failures.push(format!("exact error {:?}, expected 2/3", exact));
    }

    let cfg = TrialConfig::new(4, 2, 0.0, 10_000, 20240601);
    let rep = run_trials(
        &Instance::Matrix {
            matrix: &m,
            decoder: FlatDecoder::Comp,
        },
        &cfg,
    )
    .unwrap();
    let expect = 1.0 / 3.0;
    let sigma = (expect * (1.0 - expect) / cfg.trials as f64).sqrt();
    if (rep.success_rate - expect).abs() > 3.0 * sigma {
        failures.push(format!(
            "simulated success {} outside 3 sigma of {}",
            rep.success_rate, expect
        ));
    }

    finish(
        "1 (oracle equivalence)",
        started,
        Duration::from_secs(1),
        failures,
    );
}

#[test]
fn criterion_2_disjunctness() {
    let started = Instant::now();
    let mut failures = Vec::new();

    let m = ks_matrix(5, 5, 2, 25);
    if !is_d_disjunct(&m, 4).unwrap() {
        failures.push("q=5 n=5 k=2 matrix is not 4-disjunct".into());
    }
    for d in 1..=4usize {
        let p = exact_comp_error_prob(&m, d).unwrap();
        if p != Ratio::new(0, 1) {
            failures.push(format!("exact error {:?} at d={}, expected 0", p, d));
        }
    }
    let cfg = TrialConfig::new(25, 4, 0.0, 2000, 7);
    let rep = run_trials(
        &Instance::Matrix {
            matrix: &m,
            decoder: FlatDecoder::Comp,
        },
        &cfg,
    )
    .unwrap();
    if rep.success_rate != 1.0 {
        failures.push(format!(
            "success rate {} is not exactly 1.0",
            rep.success_rate
        ));
    }

    finish(
        "2 (disjunctness)",
        started,
        Duration::from_secs(10),
        failures,
    );
}

#[test]
fn criterion_3_root_census() {
    let started = Instant::now();
    let mut failures = Vec::new();

    for (q, k) in [(5u64, 2usize), (7, 3), (11, 3)] {
        let census = root_census(q, k).unwrap();
        if census.mean_roots() > Ratio::new(1, 1) {
            failures.push(format!("E[r] > 1 at q={} k={}", q, k));
        }
        if census.mean_square_roots() >= Ratio::new(6, 1) {
            failures.push(format!("E[r^2] >= 6 at q={} k={}", q, k));
        }
        let mut factorial: u64 = 1;
        for l in 1..k {
            factorial *= l as u64;
            if census.prob_roots(l) > Ratio::new(1, factorial) {
                failures.push(format!("Pr(r={}) > 1/{}! at q={} k={}", l, l, q, k));
            }
        }
    }

    finish(
        "3 (root census)",
        started,
        Duration::from_secs(30),
        failures,
    );
}

#[test]
fn criterion_4_figure2_qualitative() {
    let started = Instant::now();
    let mut failures = Vec::new();

    let ln2 = std::f64::consts::LN_2;
    let ks_ns: Vec<usize> = (4..=11).collect();
    let mut points = Vec::new();
    for &n in &ks_ns {
        points.push(SweepPoint::Ks { q: 41, n });
        points.push(SweepPoint::Bernoulli { t: 41 * n, nu: ln2 });
        points.push(SweepPoint::Ncc { t: 41 * n, nu: ln2 });
    }
    let base = SweepBase {
        n_items: 500,
        d: 10,
        p: 0.0,
        ncomp: false,
        tau: None,
        trials: 5000,
        seed: 20240602,
        with_replacement: false,
        threads: 0,
    };
    let rows = sweep(&base, &points);
    for row in &rows {
        if let Some(err) = &row.error {
            failures.push(format!("point {} t={} failed: {}", row.design, row.t, err));
        }
    }

    let rate = |design: &str, t: usize| -> Option<(f64, f64, f64)> {
        rows.iter()
            .find(|r| r.design == design && r.t == t)
            .and_then(|r| r.report.as_ref())
            .map(|rep| (rep.success_rate, rep.ci_lo, rep.ci_hi))
    };

    // upper half of the sweep: the explicit design dominates both baselines
    // up to two baseline CI widths
    for &n in &ks_ns[ks_ns.len() / 2..] {
        let t = 41 * n;
        let (ks_sr, _, _) = rate("ks", t).unwrap();
        for design in ["bernoulli", "ncc"] {
            let (b_sr, b_lo, b_hi) = rate(design, t).unwrap();
            let allowance = 2.0 * (b_hi - b_lo);
            if ks_sr < b_sr - allowance {
                failures.push(format!(
                    "at t={} ks rate {} trails {} rate {} by more than {}",
                    t, ks_sr, design, b_sr, allowance
                ));
            }
        }
    }

    // success is non-decreasing in n within overlapping confidence intervals
    for w in ks_ns.windows(2) {
        let (a_sr, a_lo, a_hi) = rate("ks", 41 * w[0]).unwrap();
        let (b_sr, b_lo, b_hi) = rate("ks", 41 * w[1]).unwrap();
        let allowance = (a_hi - a_lo) / 2.0 + (b_hi - b_lo) / 2.0;
        if b_sr < a_sr - allowance {
            failures.push(format!(
                "ks rate drops from {} (n={}) to {} (n={}) beyond CI allowance {}",
                a_sr, w[0], b_sr, w[1], allowance
            ));
        }
    }

    finish(
        "4 (figure-2 qualitative)",
        started,
        Duration::from_secs(300),
        failures,
    );
}

#[test]
fn criterion_5_noisy_decoder() {
    let started = Instant::now();
    let mut failures = Vec::new();

    let tau = default_tau(0.1).unwrap();
    if (tau - 3.0).abs() > 1e-12 {
        failures.push(format!("default tau for p=0.1 is {}, expected 3.0", tau));
    }
    let cfg_dec = DecoderConfig::new(0.1, 3.0).unwrap();

    let mut rates = Vec::new();
    for n in [10usize, 20, 30] {
        let m = ks_matrix(41, n, 2, 500);
        let cfg = TrialConfig::new(500, 10, 0.1, 5000, 20240603 + n as u64);
        let rep = run_trials(
            &Instance::Matrix {
                matrix: &m,
                decoder: FlatDecoder::Ncomp(cfg_dec),
            },
            &cfg,
        )
        .unwrap();
        rates.push((n, rep.success_rate, rep.ci_lo, rep.ci_hi));
    }

    // plain COMP drowns in noise at the same configuration
    let m30 = ks_matrix(41, 30, 2, 500);
    let cfg = TrialConfig::new(500, 10, 0.1, 5000, 20240604);
    let comp_rep = run_trials(
        &Instance::Matrix {
            matrix: &m30,
            decoder: FlatDecoder::Comp,
        },
        &cfg,
    )
    .unwrap();
    let ncomp30 = rates.last().unwrap().1;
    if ncomp30 <= comp_rep.success_rate {
        failures.push(format!(
            "threshold rate {} does not beat plain COMP rate {} under noise",
            ncomp30, comp_rep.success_rate
        ));
    }

    for w in rates.windows(2) {
        let (na, a_sr, a_lo, a_hi) = w[0];
        let (nb, b_sr, b_lo, b_hi) = w[1];
        let allowance = (a_hi - a_lo) / 2.0 + (b_hi - b_lo) / 2.0;
        if b_sr < a_sr - allowance {
            failures.push(format!(
                "noisy rate drops from {} (n={}) to {} (n={}) beyond CI allowance",
                a_sr, na, b_sr, nb
            ));
        }
    }

    finish(
        "5 (noisy decoder)",
        started,
        Duration::from_secs(240),
        failures,
    );
}

#[test]
fn criterion_6_recursive_scheme() {
    let started = Instant::now();
    let mut failures = Vec::new();

    // (a) hand-trace example
    let s16 = RecursiveScheme::build(16, 2, 0.1, Regime::Noiseless).unwrap();
    let mut y = Measurement::zeros(s16.predicted_tests());
    for item in [3usize, 12] {
        for r in s16.matrix().column_support(item) {
            y.set(r);
        }
    }
    let out = s16.decode(&y).unwrap();
    if out.items != vec![3, 12] {
        failures.push(format!(
            "hand trace decoded {:?}, expected [3, 12]",
            out.items
        ));
    }

    // (b) exact recursion identity at every split node
    for (n, d) in [(16usize, 2usize), (81, 3), (1000, 5)] {
        let s = RecursiveScheme::build(n, d, 0.1, Regime::Noiseless).unwrap();
        if !s.recursion_identity_holds() {
            failures.push(format!("recursion identity fails at N={} d={}", n, d));
        }
        fn walk(s: &RecursiveScheme, failures: &mut Vec<String>) {
            if let SchemeNode::Split {
                child, ks_layer, ..
            } = s.node()
            {
                if s.predicted_tests() != 2 * child.predicted_tests() + ks_layer.t() {
                    failures.push(format!(
                        "split at N={} is not 2*child + pooling rows",
                        s.n_items()
                    ));
                }
                walk(child, failures);
            }
        }
        walk(&s, &mut failures);
    }

    // (c) empirical error within budget and bounded final-stage work
    let s81 = RecursiveScheme::build(81, 3, 0.1, Regime::Noiseless).unwrap();
    let cfg = TrialConfig::new(81, 3, 0.0, 2000, 20240605);
    let rep = run_trials(&Instance::Scheme(&s81), &cfg).unwrap();
    let err = 1.0 - rep.success_rate;
    let sigma = (0.1f64 * 0.9 / cfg.trials as f64).sqrt();
    if err > 0.1 + 3.0 * sigma {
        failures.push(format!("empirical error {} exceeds 0.1 + 3 sigma", err));
    }
    let max_checks = rep.max_final_checks.unwrap();
    if max_checks > 9 {
        failures.push(format!(
            "final stage checked {} columns, budget is d^2 = 9",
            max_checks
        ));
    }

    finish(
        "6 (recursive scheme)",
        started,
        Duration::from_secs(120),
        failures,
    );
}

#[test]
fn criterion_7_sweep_determinism() {
    let started = Instant::now();
    let mut failures = Vec::new();

    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.json");
    std::fs::write(
        &grid,
        r#"{ "n_items": 60, "d": 3, "noise": 0.0, "decoder": "comp", "trials": 400, "seed": 11,
            "points": [ {"design":"ks","q":13,"n":5}, {"design":"bernoulli","t":52},
                        {"design":"ncc","t":52} ] }"#,
    )
    .unwrap();

    let mut outputs = Vec::new();
    for (i, threads) in ["1", "4", "1"].iter().enumerate() {
        let out = dir.path().join(format!("out{}.csv", i));
        let status = Command::new(env!("CARGO_BIN_EXE_grouptest"))
            .args(["sweep", "--grid"])
            .arg(&grid)
            .args(["--threads", threads, "--out"])
            .arg(&out)
            .status()
            .unwrap();
        if !status.success() {
            failures.push(format!("sweep run {} exited with {:?}", i, status.code()));
        }
        outputs.push(std::fs::read(&out).unwrap_or_default());
    }
    if outputs[0] != outputs[1] || outputs[0] != outputs[2] {
        failures.push("CSV bytes differ across worker counts or repeats".into());
    }
    if outputs[0].is_empty() {
        failures.push("sweep produced no output".into());
    }

    finish(
        "7 (sweep determinism)",
        started,
        Duration::from_secs(60),
        failures,
    );
}

#[test]
fn criterion_8_infeasibility_guard() {
    let started = Instant::now();
    let mut failures = Vec::new();

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.gtm");
    let result = Command::new(env!("CARGO_BIN_EXE_grouptest"))
        .args([
            "build",
            "--design",
            "ks",
            "--n-items",
            "1000000",
            "--defectives",
            "2",
            "--out",
        ])
        .arg(&out)
        .output()
        .unwrap();
    if result.status.code() != Some(3) {
        failures.push(format!("exit code {:?}, expected 3", result.status.code()));
    }
    let stderr = String::from_utf8_lossy(&result.stderr);
    if !stderr.contains("n <= q") || !stderr.contains("evaluation points") {
        failures.push(format!(
            "message does not cite the n <= q constraint: {:?}",
            stderr
        ));
    }
    if out.exists() {
        failures.push("output file was created despite the failure".into());
    }

    finish(
        "8 (infeasibility guard)",
        started,
        Duration::from_secs(10),
        failures,
    );
}
