//! Acceptance criteria 1 to 10, run in order with one PASS/FAIL line each.
//!
//! `cargo test --test acceptance -- --nocapture` shows the report.

use std::time::{Duration, Instant};

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use modsel::harness::config::{
    AkaikeParams, AkaikeSetting, CalibrateParams, HoldoutAdaptParams, SegmentParams,
    VerifyTailParams,
};
use modsel::harness::{self, Experiment, ExperimentConfig, RunRecord};
use modsel::problems::dp_segment;
use modsel::rng::{stream, StreamRole};
use modsel::PowerModulus;

const SEED: u64 = 20_061_208;

struct Outcome {
    passed: bool,
    detail: String,
    /// Bytes that a rerun with the same seed must reproduce.
    fingerprint: Vec<u8>,
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn config(replicates: usize, experiment: Experiment) -> ExperimentConfig {
    ExperimentConfig {
        seed: SEED,
        replicates,
        out_dir: None,
        experiment,
    }
}

fn run(c: &ExperimentConfig) -> RunRecord {
    harness::run(c).expect("experiment runs")
}

/// Per-replicate CSV followed by every curve CSV.
fn record_bytes(r: &RunRecord) -> Vec<u8> {
    let mut out = r.replicates.to_csv_bytes().unwrap();
    for (name, t) in &r.curves {
        out.extend(name.as_bytes());
        out.extend(t.to_csv_bytes().unwrap());
    }
    out
}

fn f64_bytes(values: impl IntoIterator<Item = f64>) -> Vec<u8> {
    values
        .into_iter()
        .flat_map(|v| v.to_bits().to_le_bytes())
        .collect()
}

// 1 ---------------------------------------------------------------------------

/// `sup_{x ∈ [0, 20]} (xy − c·x^p)` by a 401-point scan followed by repeated
/// 41-point zooms around the best point.
fn grid_sup(c: f64, p: f64, y: f64) -> f64 {
    let f = |x: f64| x * y - c * x.powf(p);
    let (mut lo, mut hi) = (0.0f64, 20.0f64);
    let mut points = 401;
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0.0;
    for _ in 0..12 {
        let step = (hi - lo) / (points - 1) as f64;
        for k in 0..points {
            let x = lo + step * k as f64;
            let v = f(x);
            if v > best {
                best = v;
                arg = x;
            }
        }
        lo = (arg - step).max(0.0);
        hi = arg + step;
        points = 41;
    }
    best
}

fn conjugate_correctness() -> Outcome {
    let mut worst = 0.0f64;
    let mut values = Vec::new();
    for c in [0.5, 1.0, 2.0] {
        for p in [2.0, 2.5, 3.0, 4.0] {
            let m = PowerModulus::new(c, p).unwrap();
            for k in 0..=400 {
                let y = 4.0 * k as f64 / 400.0;
                let closed = m.conjugate(y).unwrap();
                worst = worst.max((closed - grid_sup(c, p, y)).abs());
                values.push(closed);
            }
        }
    }
    Outcome {
        passed: worst <= 1e-6,
        detail: format!("max |closed form - grid sup| = {worst:.2e} over 12 moduli x 401 points"),
        fingerprint: f64_bytes(values),
    }
}

// 2 ---------------------------------------------------------------------------

fn rate_ordering() -> Outcome {
    let mut ns: Vec<u64> = (1..=1000).collect();
    let mut n = 1000.0f64;
    while n < 1e6 {
        n *= 1.05;
        ns.push(n.round() as u64);
    }
    ns.push(1_000_000);
    let mut bad = Vec::new();
    let mut checked = 0;
    let mut values = Vec::new();
    for c in [0.5, 1.0, 2.0] {
        for p in [2.0, 3.0, 4.0] {
            let m = PowerModulus::new(c, p).unwrap();
            for &n in &ns {
                let q = m.rate_quantities(n).unwrap();
                checked += 1;
                let ok = q.delta_tilde_n >= q.delta_n && (n < 2 || q.delta_tilde_n > q.delta_n);
                if !ok {
                    bad.push((c, p, n));
                }
                values.push(q.delta_n);
                values.push(q.delta_tilde_n);
            }
        }
    }
    Outcome {
        passed: bad.is_empty(),
        detail: format!(
            "{checked} (c, p, n) triples, n up to 1e6, {} violations {:?}",
            bad.len(),
            bad.first()
        ),
        fingerprint: f64_bytes(values),
    }
}

// 3, 4 ------------------------------------------------------------------------

fn verify_tail_record() -> RunRecord {
    let p = VerifyTailParams {
        n: 200,
        epsilon: 0.5,
        x: 2.0,
        ..Default::default()
    };
    assert_eq!(p.design.prob.len(), 8);
    assert_eq!(p.design.partitions.len(), 5);
    run(&config(10_000, Experiment::VerifyTail(p)))
}

fn tail_bound() -> Outcome {
    let r = verify_tail_record();
    let q = (-2.0f64).exp();
    let limit = q + 3.0 * (q * (1.0 - q) / 1e4).sqrt();
    let freq = r.aggregate("violation_frequency").unwrap();
    Outcome {
        passed: freq <= limit,
        detail: format!(
            "violation frequency {freq:.4} <= {limit:.4} (threshold {:.4})",
            r.aggregate("threshold").unwrap()
        ),
        fingerprint: record_bytes(&r),
    }
}

fn expectation_bound() -> Outcome {
    let r = verify_tail_record();
    let mean = r.aggregate("mean_selected_true_mean").unwrap();
    let se = r.aggregate("std_error_selected_true_mean").unwrap();
    let bound = r.aggregate("expectation_bound").unwrap();
    Outcome {
        passed: mean <= bound + 3.0 * se,
        detail: format!("mean P f = {mean:.5} (se {se:.1e}) <= bound {bound:.5}"),
        fingerprint: record_bytes(&r),
    }
}

// 5 ---------------------------------------------------------------------------

fn holdout_adaptivity() -> Outcome {
    let sweep = |h: f64| {
        let p = HoldoutAdaptParams {
            margin_h: h,
            dims: vec![2, 4, 8, 16, 32],
            sizes: vec![250, 500, 1000, 2000, 4000],
            train_ratio: 1.0,
            ..Default::default()
        };
        run(&config(500, Experiment::HoldoutAdapt(p)))
    };
    let fast = sweep(0.8);
    let slow = sweep(0.02);
    let (s_fast, s_slow) = (
        fast.aggregate("slope").unwrap(),
        slow.aggregate("slope").unwrap(),
    );
    let rows_ok = fast.curves["excess_vs_n"].len() == 5 && slow.curves["excess_vs_n"].len() == 5;
    let mut fingerprint = record_bytes(&fast);
    fingerprint.extend(record_bytes(&slow));
    Outcome {
        passed: rows_ok && s_fast <= -0.75 && s_slow >= -0.65,
        detail: format!("slope h=0.8: {s_fast:.3} <= -0.75; slope h=0.02: {s_slow:.3} >= -0.65"),
        fingerprint,
    }
}

// 6 ---------------------------------------------------------------------------

fn mallows_penalties() -> Outcome {
    let p = CalibrateParams {
        n: 512,
        d_max: 64,
        d_true: 8,
        sigma: 1.0,
        ..Default::default()
    };
    let r = run(&config(1000, Experiment::Calibrate(p)));
    let jump = r.aggregate("jump_alpha").unwrap();
    let opt = r.aggregate("optimal_alpha").unwrap();
    let ratio = opt / jump;
    Outcome {
        passed: (0.8..=1.2).contains(&jump) && (1.6..=2.4).contains(&opt) && (1.6..=2.6).contains(&ratio),
        detail: format!(
            "jump {jump:.3} in [0.8, 1.2]; optimum {opt:.3} in [1.6, 2.4]; ratio {ratio:.3} in [1.6, 2.6]"
        ),
        fingerprint: record_bytes(&r),
    }
}

// 7 ---------------------------------------------------------------------------

fn akaike_identity() -> Outcome {
    let (n, sigma) = (512usize, 1.0f64);
    let p = AkaikeParams {
        setting: AkaikeSetting::Mallows {
            n,
            d_true: 8,
            sigma,
            signal_level: 1.6,
        },
        dims: vec![2, 8, 32],
        ..Default::default()
    };
    let r = run(&config(10_000, Experiment::AkaikeCheck(p)));
    let mut passed = true;
    let mut parts = Vec::new();
    for d in [2usize, 8, 32] {
        let theory = d as f64 * sigma * sigma / n as f64;
        let v = r.aggregate(&format!("mean_v_hat_d{d}")).unwrap();
        let l = r.aggregate(&format!("mean_excess_within_d{d}")).unwrap();
        let (rv, rl) = ((v - theory).abs() / theory, (l - theory).abs() / theory);
        let gap = (v - l).abs() / l;
        passed &= rv <= 0.05 && rl <= 0.05 && gap <= 0.03;
        parts.push(format!("D={d}: v {rv:.3}, L {rl:.3}, gap {gap:.3}"));
    }
    Outcome {
        passed,
        detail: format!(
            "relative errors vs D/n (<= 0.05, gap <= 0.03): {}",
            parts.join("; ")
        ),
        fingerprint: record_bytes(&r),
    }
}

// 8 ---------------------------------------------------------------------------

/// Smallest rss for every segment count, by enumerating all cut sets.
fn brute_force_rss(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut best = vec![f64::INFINITY; n];
    for mask in 0u32..(1 << (n - 1)) {
        let mut rss = 0.0;
        let mut start = 0;
        for end in 1..=n {
            if end == n || mask & (1 << (end - 1)) != 0 {
                let seg = &x[start..end];
                let m = seg.iter().sum::<f64>() / seg.len() as f64;
                rss += seg.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
                start = end;
            }
        }
        let d = mask.count_ones() as usize;
        best[d] = best[d].min(rss);
    }
    best
}

fn dp_exactness() -> Outcome {
    let mut worst = 0.0f64;
    let mut values = Vec::new();
    for i in 0..200u64 {
        let mut rng = stream(SEED, i, StreamRole::Signal);
        let len = rng.random_range(1..=12usize);
        // every third signal has small integer values, to exercise ties
        let signal: Vec<f64> = (0..len)
            .map(|_| {
                if i % 3 == 0 {
                    rng.random_range(0..3u8) as f64
                } else {
                    let z: f64 = StandardNormal.sample(&mut rng as &mut dyn RngCore);
                    3.0 * z
                }
            })
            .collect();
        let dp = dp_segment(&signal, len).unwrap();
        let brute = brute_force_rss(&signal);
        for (d, seg) in dp.iter().enumerate() {
            assert_eq!(seg.segments(), d + 1);
            worst = worst.max((seg.rss - brute[d]).abs());
            values.push(seg.rss);
        }
    }
    Outcome {
        passed: worst <= 1e-9,
        detail: format!("200 signals, all segment counts, max |dp - brute force| = {worst:.1e}"),
        fingerprint: f64_bytes(values),
    }
}

// 9 ---------------------------------------------------------------------------

fn changepoint_calibration() -> Outcome {
    let p = SegmentParams {
        n: 400,
        levels: vec![0.0, 3.0, 0.0, 3.0],
        sigma: 1.0,
        ..Default::default()
    };
    let r = run(&config(200, Experiment::Segment(p)));
    let rate = r.aggregate("recovery_rate").unwrap();
    Outcome {
        passed: rate >= 0.9,
        detail: format!(
            "recovered 4 segments in {:.1}% of 200 replicates (>= 90%)",
            100.0 * rate
        ),
        fingerprint: record_bytes(&r),
    }
}

#[test]
fn acceptance_criteria() {
    let criteria = [
        Criterion {
            id: 1,
            name: "conjugate correctness",
            budget: Duration::from_secs(1),
            run: conjugate_correctness,
        },
        Criterion {
            id: 2,
            name: "rate ordering",
            budget: Duration::from_secs(1),
            run: rate_ordering,
        },
        Criterion {
            id: 3,
            name: "tail bound",
            budget: Duration::from_secs(60),
            run: tail_bound,
        },
        Criterion {
            id: 4,
            name: "expectation bound",
            budget: Duration::from_secs(60),
            run: expectation_bound,
        },
        Criterion {
            id: 5,
            name: "hold-out adaptivity",
            budget: Duration::from_secs(600),
            run: holdout_adaptivity,
        },
        Criterion {
            id: 6,
            name: "minimal/optimal penalties",
            budget: Duration::from_secs(300),
            run: mallows_penalties,
        },
        Criterion {
            id: 7,
            name: "Akaike identity",
            budget: Duration::from_secs(300),
            run: akaike_identity,
        },
        Criterion {
            id: 8,
            name: "DP exactness",
            budget: Duration::from_secs(30),
            run: dp_exactness,
        },
        Criterion {
            id: 9,
            name: "change-point calibration",
            budget: Duration::from_secs(300),
            run: changepoint_calibration,
        },
    ];

    let mut failures = Vec::new();
    let mut fingerprints = Vec::new();
    for c in &criteria {
        let start = Instant::now();
        let out = (c.run)();
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.budget;
        let passed = out.passed && in_time;
        println!(
            "criterion {:>2} {} {}: {} [{:.2}s, budget {}s]",
            c.id,
            if passed { "PASS" } else { "FAIL" },
            c.name,
            out.detail,
            elapsed.as_secs_f64(),
            c.budget.as_secs()
        );
        if !passed {
            failures.push(c.id);
        }
        fingerprints.push(out.fingerprint);
    }

    let mut diverged = Vec::new();
    for (c, first) in criteria.iter().zip(&fingerprints) {
        if (c.run)().fingerprint != *first {
            diverged.push(c.id);
        }
    }
    println!(
        "criterion 10 {} determinism: {} of {} criteria reproduced byte-for-byte{}",
        if diverged.is_empty() { "PASS" } else { "FAIL" },
        criteria.len() - diverged.len(),
        criteria.len(),
        if diverged.is_empty() {
            String::new()
        } else {
            format!(", diverged: {diverged:?}")
        }
    );
    if !diverged.is_empty() {
        failures.push(10);
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
