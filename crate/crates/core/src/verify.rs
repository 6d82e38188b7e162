//! Self-checks that compare the analytic code against brute-force oracles.
//! Each suite returns a list of named checks; the CLI exits nonzero when any
//! of them fails.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::adversary::{self, AdversaryInstance, Sampling};
use crate::bounds::{self, BoundParams, Interval, IntervalSet};
use crate::field_hash::{self, FamilyKind, PolynomialHash, PrimeModulus, StarHash, MERSENNE_31};
use crate::harness::{self, trial_rng, DifferentialConfig, Scheme};
use crate::linear_probe::LinearTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// Closed-form fourth central moment against full enumeration.
    Moments,
    /// Interval-intersection lower bound against linear probing costs.
    Lemma2,
    /// Exact pairwise independence of the star family.
    Pairwise,
    /// Tables against a reference set, with and without an injected fault.
    Differential,
    /// Sampled tail frequencies against the fourth-moment bound.
    Tail,
    /// Superlinear cost growth of the adversarial key set.
    Blowup,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Moments,
        Suite::Lemma2,
        Suite::Pairwise,
        Suite::Differential,
        Suite::Tail,
        Suite::Blowup,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Moments => "moments",
            Suite::Lemma2 => "lemma2",
            Suite::Pairwise => "pairwise",
            Suite::Differential => "differential",
            Suite::Tail => "tail",
            Suite::Blowup => "blowup",
        }
    }

    pub fn run(self) -> Vec<Check> {
        match self {
            Suite::Moments => moments(),
            Suite::Lemma2 => lemma2(),
            Suite::Pairwise => pairwise(),
            Suite::Differential => differential(),
            Suite::Tail => tail(),
            Suite::Blowup => blowup(),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.as_str() == s)
            .ok_or_else(|| format!("unknown suite `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {}: {}", self.name, self.detail)
    }
}

type Q = Ratio<i128>;

/// `E((X - mu)^4)` for `X = |{x in keys : h(x) mod r in q}|`, by averaging
/// over every degree-3 polynomial over `[p]`.
pub fn enumerated_fourth_moment(p: u64, r: u64, q: &[u64], keys: &[u64]) -> Q {
    let prime = PrimeModulus::new(p).expect("prime");
    let in_q: Vec<bool> = (0..p).map(|v| q.contains(&(v % r))).collect();
    let hits = in_q.iter().filter(|&&b| b).count() as i128;
    // work with p * (X - mu) to stay in integers
    let mu_p = keys.len() as i128 * hits;
    let mut sum: i128 = 0;
    let mut coeffs = vec![0u64; 4];
    for code in 0..p.pow(4) {
        let mut c = code;
        for slot in coeffs.iter_mut() {
            *slot = c % p;
            c /= p;
        }
        let h = PolynomialHash::new(prime, p, coeffs.clone()).expect("valid coefficients");
        let x = keys
            .iter()
            .filter(|&&k| in_q[h.eval_field(k) as usize])
            .count() as i128;
        sum += (p as i128 * x - mu_p).pow(4);
    }
    Q::new(sum, (p as i128).pow(8))
}

fn closed_form_fourth_moment(p: u64, r: u64, q: &[u64], keys: usize) -> Q {
    let hits = (0..p).filter(|v| q.contains(&(v % r))).count() as i128;
    let prob = Q::new(hits, p as i128);
    bounds::fourth_central_moment(&vec![prob; keys]).expect("probabilities in [0, 1]")
}

fn subsets(r: u64) -> impl Iterator<Item = Vec<u64>> {
    (1u64..1 << r).map(move |mask| (0..r).filter(|i| mask >> i & 1 == 1).collect())
}

fn moments() -> Vec<Check> {
    let mut checks = Vec::new();
    for p in [5u64, 7] {
        let keys: Vec<u64> = (0..p).collect();
        let mut mismatches = 0;
        let mut cases = 0;
        for r in [2, 3, p] {
            for q in subsets(r) {
                cases += 1;
                if enumerated_fourth_moment(p, r, &q, &keys)
                    != closed_form_fourth_moment(p, r, &q, keys.len())
                {
                    mismatches += 1;
                }
            }
        }
        checks.push(Check::new(
            format!("fourth moment, p = {p}"),
            mismatches == 0,
            format!("{mismatches} mismatches over {cases} (r, Q) cases"),
        ));
    }
    checks
}

/// `sum_{i < j} |I_i ∩ I_j|^2 / 2` by direct pairwise intersection.
pub fn pairwise_intersection_sum(set: &IntervalSet) -> f64 {
    let ivs = set.intervals();
    let mut total = 0.0;
    for (i, a) in ivs.iter().enumerate() {
        for b in &ivs[i + 1..] {
            let c = bounds::cyclic_intersection(*a, *b, set.r()) as f64;
            total += c * c / 2.0;
        }
    }
    total
}

/// A random family of intervals mod `r` with total length below `r`.
pub fn random_interval_set<R: Rng + ?Sized>(rng: &mut R, r: u64) -> IntervalSet {
    let mut budget = rng.gen_range(1..r);
    let mut ivs = Vec::new();
    while budget > 0 {
        let len = rng.gen_range(1..=budget.min(r / 2).max(1));
        ivs.push(Interval {
            start: rng.gen_range(0..r),
            len,
        });
        budget -= len;
    }
    IntervalSet::from_intervals(r, ivs).expect("intervals fit the ring")
}

/// Inserts one key per covered position (in random order) and returns the
/// total linear probing cost.
pub fn linear_cost_of_cover<R: Rng + ?Sized>(rng: &mut R, set: &IntervalSet) -> u64 {
    let r = set.r();
    let mut homes: Vec<usize> = set
        .intervals()
        .iter()
        .flat_map(|iv| (0..iv.len).map(move |j| ((iv.start + j) % r) as usize))
        .collect();
    homes.shuffle(rng);
    let mut table = LinearTable::new(r as usize).expect("r >= 2");
    for (key, home) in homes.into_iter().enumerate() {
        table
            .insert(key as u64, home)
            .expect("fewer keys than slots");
    }
    table.probes_total()
}

fn lemma2() -> Vec<Check> {
    let mut rng = trial_rng(0x1e44a, 0);
    let (mut below, mut sweep_mismatch) = (0, 0);
    let instances = 1000;
    for _ in 0..instances {
        let r = rng.gen_range(4..300);
        let set = random_interval_set(&mut rng, r);
        let lb = bounds::intersection_lower_bound(&set);
        if (lb - pairwise_intersection_sum(&set)).abs() > 1e-9 {
            sweep_mismatch += 1;
        }
        if (linear_cost_of_cover(&mut rng, &set) as f64) < lb {
            below += 1;
        }
    }
    vec![
        Check::new(
            "sweep equals pairwise sum",
            sweep_mismatch == 0,
            format!("{sweep_mismatch} of {instances} differ"),
        ),
        Check::new(
            "probing cost >= intersection bound",
            below == 0,
            format!("{below} of {instances} violate"),
        ),
    ]
}

/// Counts, over every member of the star family at `(p, r)`, how often
/// `(h(x1), h(x2)) = (y1, y2)`, and returns the largest deviation from
/// `1 / r^2` over all `x1 != x2` and `y1, y2`.
pub fn star_pairwise_deviation(p: u64, r: u64) -> Q {
    let prime = PrimeModulus::new(p).expect("prime");
    let p_hat = StarHash::p_hat(prime, r);
    let (pu, ru) = (p as usize, r as usize);
    let mut counts = vec![0i128; pu * pu * ru * ru];
    let mut total: i128 = 0;
    let mut v = vec![0u64; pu];
    for code in 0..p_hat.pow(p as u32) {
        let mut c = code;
        for slot in v.iter_mut() {
            *slot = c % p_hat;
            c /= p_hat;
        }
        for a in 0..p {
            for b in 0..p {
                let h = StarHash::from_table(prime, r, a, b, v.clone()).expect("valid table");
                let vals: Vec<usize> = (0..p).map(|x| h.eval(x).expect("x < p") as usize).collect();
                for x1 in 0..pu {
                    for x2 in 0..pu {
                        if x1 != x2 {
                            counts[((x1 * pu + x2) * ru + vals[x1]) * ru + vals[x2]] += 1;
                        }
                    }
                }
                total += 1;
            }
        }
    }
    let target = Q::new(1, (r * r) as i128);
    let mut worst = Q::from_integer(0);
    for x1 in 0..pu {
        for x2 in (0..pu).filter(|&x2| x2 != x1) {
            for y in 0..ru * ru {
                let freq = Q::new(counts[(x1 * pu + x2) * ru * ru + y], total);
                let dev = if freq > target {
                    freq - target
                } else {
                    target - freq
                };
                worst = worst.max(dev);
            }
        }
    }
    worst
}

fn pairwise() -> Vec<Check> {
    [(5, 3), (5, 2)]
        .into_iter()
        .map(|(p, r)| {
            let dev = star_pairwise_deviation(p, r);
            Check::new(
                format!("star family pairwise, p = {p}, r = {r}"),
                dev == Q::from_integer(0),
                format!("largest deviation from 1/{} is {dev}", r * r),
            )
        })
        .collect()
}

fn differential() -> Vec<Check> {
    let mut checks = Vec::new();
    for scheme in [
        Scheme::Linear,
        Scheme::BlockedBidirectional,
        Scheme::BlockedXor,
    ] {
        let report = harness::differential_test(scheme, 100_000, 7);
        checks.push(Check::new(
            format!("{scheme}, 10^5 mixed ops"),
            report.is_clean(),
            format!(
                "{} ops, first mismatch {:?}",
                report.ops_run, report.mismatch
            ),
        ));
    }
    for scheme in [Scheme::BlockedBidirectional, Scheme::BlockedXor] {
        let mut cfg = DifferentialConfig::new(scheme, 10_000, 8);
        cfg.check_invariant = true;
        let report = harness::differential_run(&cfg);
        checks.push(Check::new(
            format!("{scheme}, level invariant after every mutation"),
            report.is_clean(),
            format!(
                "{} ops, first mismatch {:?}",
                report.ops_run, report.mismatch
            ),
        ));
        cfg.disable_repair = true;
        let report = harness::differential_run(&cfg);
        checks.push(Check::new(
            format!("{scheme}, fault injection is detected"),
            !report.is_clean(),
            format!("mismatch after {} ops", report.ops_run),
        ));
    }
    checks
}

/// Fraction of `samples` 5-wise functions for which at least
/// `alpha q (1 + eps) + d` of `n` random keys hash into `[0, q)`, with
/// fresh keys per sample.
pub fn sampled_tail_frequency(
    r: u64,
    n: u64,
    q: u64,
    d: f64,
    eps: f64,
    samples: u64,
    seed: u64,
) -> f64 {
    let p = PrimeModulus::new(MERSENNE_31).expect("prime");
    let threshold = n as f64 / r as f64 * q as f64 * (1.0 + eps) + d;
    let mut rng = trial_rng(seed, 0);
    let mut hits = 0;
    for _ in 0..samples {
        let h = field_hash::sample(FamilyKind::Polynomial, 5, p, r, &mut rng).expect("valid range");
        let keys = rand::seq::index::sample(&mut rng, p.get() as usize, n as usize);
        let count = keys
            .iter()
            .filter(|&k| h.eval(k as u64).expect("k < p") < q)
            .count();
        if count as f64 >= threshold {
            hits += 1;
        }
    }
    hits as f64 / samples as f64
}

fn tail() -> Vec<Check> {
    let r = 1024;
    let eps = r as f64 / MERSENNE_31 as f64;
    let samples = 2000;
    let mut checks = Vec::new();
    for alpha in [0.25, 0.5, 0.75] {
        let n = (alpha * r as f64) as u64;
        for q in [4u64, 16, 64] {
            for d in [q as f64 / 4.0, q as f64 / 2.0, q as f64] {
                let bound = bounds::lemma1_tail(&BoundParams::from_counts(n, r, eps, q, d))
                    .expect("parameters in range")
                    .clamped();
                let freq = sampled_tail_frequency(r, n, q, d, eps, samples, q * 1000 + n);
                let se = (bound * (1.0 - bound) / samples as f64).sqrt();
                checks.push(Check::new(
                    format!("tail alpha = {alpha}, q = {q}, d = {d}"),
                    freq <= bound + 3.0 * se,
                    format!("frequency {freq:.4} vs bound {bound:.4}"),
                ));
            }
        }
    }
    checks
}

/// Mean adversarial insertion cost of the cw family at table size about
/// `2^log_r`, over `p - 1` trials that use every multiplier once.
pub fn adversarial_mean_cost(
    log_r: u32,
    seed: u64,
) -> Result<(u64, f64), adversary::AdversaryError> {
    let p = adversary::modulus_for_log_r(log_r)?;
    let instance = AdversaryInstance::build(p, None, &mut trial_rng(seed, u64::MAX))?;
    let stats = adversary::measure_cost(
        &instance,
        FamilyKind::Cw,
        p.get() - 1,
        seed,
        Sampling::stratified(),
    )?;
    Ok((instance.r(), stats.mean_total_steps))
}

fn blowup() -> Vec<Check> {
    let costs: Vec<(u64, f64)> = [10, 12, 14]
        .into_iter()
        .map(|log_r| adversarial_mean_cost(log_r, 1).expect("valid instance"))
        .collect();
    costs
        .windows(2)
        .map(|w| {
            let ratio = w[1].1 / w[0].1;
            Check::new(
                format!("cost ratio r = {} -> {}", w[0].0, w[1].0),
                ratio >= 4.3,
                format!("{:.1} -> {:.1}, ratio {ratio:.3}", w[0].1, w[1].1),
            )
        })
        .collect()
}
