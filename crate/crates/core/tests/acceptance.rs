//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion does. Criteria run one after another so
//! that their wall-clock times are not inflated by each other.

use std::collections::HashMap;
use std::io::Write;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::Rng;

use kwise_probing::adversary::{self, AdversaryInstance, Sampling};
use kwise_probing::bounds::{self, BoundParams, Interval, IntervalSet};
use kwise_probing::field_hash::{
    self, FamilyKind, PolynomialHash, PrimeModulus, StarHash, MERSENNE_31,
};
use kwise_probing::harness::{
    self, trial_rng, DifferentialConfig, ExperimentSpec, OpKind, Scheme, Workload,
};
use kwise_probing::LinearTable;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn random_keys_spec(
    scheme: Scheme,
    k: usize,
    n: u64,
    r: u64,
    trials: u64,
    seed: u64,
) -> ExperimentSpec {
    ExperimentSpec {
        scheme,
        family: FamilyKind::Polynomial,
        k,
        n,
        r,
        alpha: n as f64 / r as f64,
        trials,
        seed,
        p: None,
        workload: Workload::RandomKeys,
        op_count: None,
        delete_fraction: None,
    }
}

/// Mean adversarial cost with the cw family grows by more than 4.3 per
/// quadrupling of r.
fn pairwise_blowup() -> Outcome {
    let mut rows = Vec::new();
    for log_r in [10, 12, 14] {
        let p = adversary::modulus_for_log_r(log_r).unwrap();
        let instance = AdversaryInstance::build(p, None, &mut trial_rng(1, u64::MAX)).unwrap();
        let sweep = adversary::sweep_multipliers(&instance, FamilyKind::Cw, 1, 1024).unwrap();
        assert!(sweep.evaluations >= 200);
        rows.push((
            sweep.r,
            sweep.mean_total_steps(),
            sweep.mean_displacement(),
            sweep.evaluations,
        ));
    }
    let ratios: Vec<f64> = rows.windows(2).map(|w| w[1].1 / w[0].1).collect();
    let disp: Vec<f64> = rows.windows(2).map(|w| w[1].2 / w[0].2).collect();
    let sizes: Vec<String> = rows
        .iter()
        .map(|(r, cost, _, evals)| format!("r={r}: {cost:.1} ({evals} evals)"))
        .collect();
    outcome(
        ratios.iter().all(|&x| x >= 4.3),
        format!(
            "{}; ratios {:.3}, {:.3} (displacement only: {:.3}, {:.3})",
            sizes.join(", "),
            ratios[0],
            ratios[1],
            disp[0],
            disp[1]
        ),
    )
}

/// 5-wise linear probing at load 1/2 costs a constant per insertion.
fn five_wise_constant_cost() -> Outcome {
    let (n, r) = (1 << 14, 1 << 15);
    let spec = random_keys_spec(Scheme::Linear, 5, n, r, 100, 2);
    let results = harness::run_experiment(&spec).unwrap();
    let eps = r as f64 / MERSENNE_31 as f64;
    let cap = 1.0 + bounds::t_alpha_eps(0.5, eps).unwrap();
    let means: Vec<f64> = results
        .iter()
        .map(|t| t.op(OpKind::Insert).mean())
        .collect();
    let worst = means.iter().cloned().fold(f64::MIN, f64::max);
    let grand = means.iter().sum::<f64>() / means.len() as f64;
    outcome(
        worst <= cap && grand <= 3.0,
        format!("worst trial mean {worst:.4} <= {cap:.4}, grand mean {grand:.4} <= 3.0"),
    )
}

/// The closed-form fourth central moment equals full enumeration over all
/// degree-3 polynomials.
fn moment_identity() -> Outcome {
    let mut cases = 0;
    let mut mismatches = Vec::new();
    for p in [5u64, 7] {
        let prime = PrimeModulus::new(p).unwrap();
        let functions: Vec<Vec<u64>> = (0..p.pow(4))
            .map(|code| {
                let coeffs = (0..4).map(|i| code / p.pow(i) % p).collect();
                let h = PolynomialHash::new(prime, p, coeffs).unwrap();
                (0..p).map(|x| h.eval_field(x)).collect()
            })
            .collect();
        let key_sets: Vec<Vec<u64>> = vec![(0..p).collect(), vec![0, 2, 3], vec![p - 1]];
        for r in 1..=p {
            for mask in 1u64..1 << r {
                let in_q: Vec<bool> = (0..p).map(|v| mask >> (v % r) & 1 == 1).collect();
                let hits = in_q.iter().filter(|&&b| b).count() as i128;
                for keys in &key_sets {
                    cases += 1;
                    let centre = keys.len() as i128 * hits;
                    let sum: i128 = functions
                        .iter()
                        .map(|vals| {
                            let x = keys
                                .iter()
                                .filter(|&&k| in_q[vals[k as usize] as usize])
                                .count() as i128;
                            (p as i128 * x - centre).pow(4)
                        })
                        .sum();
                    let enumerated = Ratio::new(sum, (p as i128).pow(8));
                    let prob = Ratio::new(hits, p as i128);
                    let closed = bounds::fourth_central_moment(&vec![prob; keys.len()]).unwrap();
                    if enumerated != closed {
                        mismatches.push((p, r, mask, keys.len()));
                    }
                }
            }
        }
    }
    outcome(
        mismatches.is_empty(),
        format!("{cases} (p, r, Q, S) cases, mismatches {mismatches:?}"),
    )
}

/// Sampled tail frequencies of 5-wise functions stay below the fourth-moment
/// bound plus three binomial standard errors.
fn lemma1_soundness() -> Outcome {
    let r = 1024u64;
    let p = PrimeModulus::new(MERSENNE_31).unwrap();
    let eps = r as f64 / p.get() as f64;
    let samples = 10_000u64;
    let qs = [4u64, 16, 64];
    let mut worst = (f64::MIN, String::new());
    let mut failures = Vec::new();
    let mut rng = trial_rng(4, 0);
    for alpha in [0.25, 0.5, 0.75] {
        let n = (alpha * r as f64) as u64;
        // a fixed key set of consecutive integers
        let keys: Vec<u64> = (0..n).collect();
        let mut loads = vec![Vec::with_capacity(samples as usize); qs.len()];
        for _ in 0..samples {
            let h = field_hash::sample(FamilyKind::Polynomial, 5, p, r, &mut rng).unwrap();
            let mut counts = [0u64; 3];
            for &x in &keys {
                let y = h.eval(x).unwrap();
                for (c, &q) in counts.iter_mut().zip(&qs) {
                    *c += u64::from(y < q);
                }
            }
            for (l, c) in loads.iter_mut().zip(counts) {
                l.push(c);
            }
        }
        for (qi, &q) in qs.iter().enumerate() {
            for d in [q as f64 / 4.0, q as f64 / 2.0, q as f64] {
                let params = BoundParams::from_counts(n, r, eps, q, d);
                let bound = bounds::lemma1_tail(&params).unwrap().clamped();
                let threshold = params.alpha * q as f64 * (1.0 + eps) + d;
                let hits = loads[qi].iter().filter(|&&c| c as f64 >= threshold).count();
                let freq = hits as f64 / samples as f64;
                let se = (bound * (1.0 - bound) / samples as f64).sqrt();
                let slack = bound + 3.0 * se - freq;
                let label = format!("alpha={alpha} q={q} d={d}: {freq:.4} vs {bound:.4}");
                if slack < 0.0 {
                    failures.push(label.clone());
                }
                if bound < 1.0 && freq / bound > worst.0 {
                    worst = (freq / bound, label);
                }
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "27 grid points, tightest nontrivial bound {}; failures {failures:?}",
            worst.1
        ),
    )
}

/// Linear probing never beats the interval-intersection lower bound.
fn lemma4_oracle() -> Outcome {
    let mut rng = trial_rng(5, 0);
    let mut violations = 0;
    let mut tight = 0.0f64;
    for _ in 0..500 {
        let r = rng.gen_range(4..400u64);
        let mut budget = rng.gen_range(1..r);
        let mut ivs = Vec::new();
        while budget > 0 {
            let len = rng.gen_range(1..=budget);
            ivs.push(Interval {
                start: rng.gen_range(0..r),
                len,
            });
            budget -= len;
        }
        let set = IntervalSet::from_intervals(r, ivs.clone()).unwrap();
        let lb = bounds::intersection_lower_bound(&set);
        let mut homes: Vec<usize> = ivs
            .iter()
            .flat_map(|iv| (0..iv.len).map(move |j| ((iv.start + j) % r) as usize))
            .collect();
        homes.shuffle(&mut rng);
        let mut table = LinearTable::new(r as usize).unwrap();
        for (key, &home) in homes.iter().enumerate() {
            table.insert(key as u64, home).unwrap();
        }
        let steps = table.probes_total() as f64;
        violations += usize::from(steps < lb);
        tight = tight.max(lb / steps);
    }
    let p = PrimeModulus::new(1009).unwrap();
    let instance = AdversaryInstance::build(p, None, &mut rng).unwrap();
    let stats =
        adversary::measure_cost(&instance, FamilyKind::Cw, 500, 5, Sampling::default()).unwrap();
    for t in &stats.trials {
        let lb = t.lower_bound.unwrap();
        violations += usize::from((t.total_steps as f64) < lb);
        tight = tight.max(lb / t.total_steps as f64);
    }
    outcome(
        violations == 0,
        format!("1000 instances, {violations} violations, largest bound/cost {tight:.3}"),
    )
}

/// Every pair of values is hit by exactly 1/9 of the star family at p=5, r=3.
fn star_pairwise() -> Outcome {
    let (p, r) = (5u64, 3u64);
    let prime = PrimeModulus::new(p).unwrap();
    let p_hat = StarHash::p_hat(prime, r);
    let mut counts: HashMap<(u64, u64, u64, u64), u64> = HashMap::new();
    let mut total = 0u64;
    for code in 0..p_hat.pow(p as u32) {
        let v: Vec<u64> = (0..p).map(|i| code / p_hat.pow(i as u32) % p_hat).collect();
        for a in 0..p {
            for b in 0..p {
                let h = StarHash::from_table(prime, r, a, b, v.clone()).unwrap();
                let vals: Vec<u64> = (0..p).map(|x| h.eval(x).unwrap()).collect();
                for x1 in 0..p {
                    for x2 in (0..p).filter(|&x2| x2 != x1) {
                        *counts
                            .entry((x1, x2, vals[x1 as usize], vals[x2 as usize]))
                            .or_default() += 1;
                    }
                }
                total += 1;
            }
        }
    }
    let cells = p * (p - 1) * r * r;
    let exact = counts.len() as u64 == cells && counts.values().all(|&c| c * r * r == total);
    outcome(
        exact,
        format!(
            "{total} functions, {} of {cells} cells populated, all at exactly 1/9: {exact}",
            counts.len()
        ),
    )
}

/// Blocked tables agree with a reference set over long random operation
/// streams, and keep the level invariant after every mutation.
fn blocked_correctness() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for scheme in [Scheme::BlockedBidirectional, Scheme::BlockedXor] {
        let report = harness::differential_test(scheme, 100_000, 7);
        ok &= report.is_clean() && report.ops_run == 100_000;
        notes.push(format!("{scheme} 10^5 ops: {:?}", report.mismatch));
        let mut cfg = DifferentialConfig::new(scheme, 10_000, 8);
        cfg.check_invariant = true;
        let report = harness::differential_run(&cfg);
        ok &= report.is_clean();
        notes.push(format!(
            "{scheme} instrumented 10^4 ops: {:?}",
            report.mismatch
        ));
    }
    outcome(ok, notes.join("; "))
}

/// Blocked probing costs stay below the analytic bounds.
fn blocked_bounds() -> Outcome {
    let r = 1u64 << 14;
    let eps = r as f64 / MERSENNE_31 as f64;
    let mut ok = true;
    let mut notes = Vec::new();
    for alpha in [0.3, 0.5, 0.7] {
        let n = (alpha * r as f64).round() as u64;
        let spec = random_keys_spec(Scheme::BlockedBidirectional, 5, n, r, 100, 8);
        let results = harness::run_experiment(&spec).unwrap();
        let b = bounds::theorem4_bounds(spec.alpha, eps).unwrap();
        let t = bounds::t_alpha_eps(spec.alpha, eps).unwrap();
        assert!(
            (b.unsuccessful - (1.0 + t)).abs() < 1e-12
                && (b.insert - (1.0 + 2.0 * t)).abs() < 1e-12
        );
        for (kind, cap, name) in [
            (OpKind::SearchMiss, b.unsuccessful, "U"),
            (OpKind::ProbeInsert, b.insert, "I"),
            (OpKind::Delete, b.delete, "D"),
        ] {
            let s = harness::summarize(&results, kind).unwrap();
            let pass = s.mean <= cap + 3.0 * s.std_error;
            ok &= pass;
            notes.push(format!("a={alpha} {name} {:.3}<={cap:.3}", s.mean));
        }
    }
    let n = (0.8 * r as f64).ceil() as u64;
    let spec = random_keys_spec(Scheme::BlockedBidirectional, 4, n, r, 100, 9);
    let results = harness::run_experiment(&spec).unwrap();
    let cap = bounds::theorem5_bound(0.8, eps).unwrap();
    let s = harness::summarize(&results, OpKind::SearchHit).unwrap();
    ok &= s.mean <= cap + 3.0 * s.std_error;
    notes.push(format!("a=0.8 4-wise S {:.3}<={cap:.3}", s.mean));
    outcome(ok, notes.join(", "))
}

#[test]
fn acceptance_criteria() {
    type Criterion = (u32, &'static str, fn() -> Outcome, Duration);
    let criteria: [Criterion; 8] = [
        (
            1,
            "pairwise blowup",
            pairwise_blowup,
            Duration::from_secs(120),
        ),
        (
            2,
            "5-wise constant cost",
            five_wise_constant_cost,
            Duration::from_secs(60),
        ),
        (
            3,
            "fourth moment identity",
            moment_identity,
            Duration::from_secs(60),
        ),
        (
            4,
            "tail bound soundness",
            lemma1_soundness,
            Duration::from_secs(180),
        ),
        (
            5,
            "intersection lower bound",
            lemma4_oracle,
            Duration::from_secs(600),
        ),
        (
            6,
            "star family pairwise independence",
            star_pairwise,
            Duration::from_secs(600),
        ),
        (
            7,
            "blocked probing correctness",
            blocked_correctness,
            Duration::from_secs(600),
        ),
        (
            8,
            "blocked probing bounds",
            blocked_bounds,
            Duration::from_secs(600),
        ),
    ];
    // Written straight to stderr so the lines survive libtest's output capture.
    let mut out = std::io::stderr().lock();
    let mut failed = Vec::new();
    writeln!(out).unwrap();
    for (id, name, run, limit) in criteria {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let passed = result.passed && elapsed <= limit;
        writeln!(
            out,
            "[{}] {id}. {name} ({:.1}s, limit {}s): {}",
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs(),
            result.detail
        )
        .unwrap();
        if !passed {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
