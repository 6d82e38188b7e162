//! Experiment orchestration: seeded trials, per-operation probe statistics,
//! CSV output and differential testing against a reference map.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{self, AdversaryError, AdversaryInstance, Sampling};
use crate::blocked_probe::{BlockedTable, Traversal};
use crate::field_hash::{
    self, FamilyKind, FieldError, HashFunction, PrimeModulus, MAX_DEGREE, MERSENNE_31,
};
use crate::linear_probe::{LinearTable, TableError};

/// Fresh keys per trial used for unsuccessful searches and probe inserts.
pub const FRESH_KEYS: usize = 1000;

/// Largest modulus accepted for the star family, whose members store a
/// table of `p` values.
pub const MAX_STAR_MODULUS: u64 = 1 << 24;

/// The generator for trial `trial` of an experiment seeded with `seed`.
/// Every trial gets its own ChaCha stream, so results do not depend on the
/// order or concurrency in which trials run.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Linear,
    BlockedBidirectional,
    BlockedXor,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Linear => "linear",
            Scheme::BlockedBidirectional => "blocked-bidirectional",
            Scheme::BlockedXor => "blocked-xor",
        }
    }

    pub fn traversal(self) -> Option<Traversal> {
        match self {
            Scheme::Linear => None,
            Scheme::BlockedBidirectional => Some(Traversal::Bidirectional),
            Scheme::BlockedXor => Some(Traversal::Xor),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(Scheme::Linear),
            "blocked-bidirectional" => Ok(Scheme::BlockedBidirectional),
            "blocked-xor" => Ok(Scheme::BlockedXor),
            other => Err(HarnessError::Spec(format!("unknown scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Workload {
    /// Insert `n` random keys, then measure searches (and, for blocked
    /// schemes, inserts and deletes at that load).
    RandomKeys,
    /// The two-part key set that defeats pairwise independent families.
    Adversarial,
    /// Random keys followed by `op_count` mixed operations.
    MixedOps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Insert,
    SearchHit,
    SearchMiss,
    /// Inserting a fresh key into the table at its measured load.
    ProbeInsert,
    Delete,
}

impl OpKind {
    pub const ALL: [OpKind; 5] = [
        OpKind::Insert,
        OpKind::SearchHit,
        OpKind::SearchMiss,
        OpKind::ProbeInsert,
        OpKind::Delete,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OpKind::Insert => "insert",
            OpKind::SearchHit => "search_hit",
            OpKind::SearchMiss => "search_miss",
            OpKind::ProbeInsert => "probe_insert",
            OpKind::Delete => "delete",
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment spec: {0}")]
    Spec(String),
    #[error("no results to write")]
    EmptyResults,
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn default_k() -> usize {
    2
}

/// Experiment configuration; the JSON form uses these field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub scheme: Scheme,
    pub family: FamilyKind,
    #[serde(default = "default_k")]
    pub k: usize,
    pub n: u64,
    pub r: u64,
    pub alpha: f64,
    pub trials: u64,
    pub seed: u64,
    /// Field modulus. Defaults to `2^31 - 1`; for the adversarial workload to
    /// the smallest prime `p >= 4n + 1` with `p = 1 (mod 4)`, and for the star
    /// family to the smallest prime above `max(2r, n + 1000)`.
    #[serde(default)]
    pub p: Option<u64>,
    pub workload: Workload,
    #[serde(default)]
    pub op_count: Option<u64>,
    #[serde(default)]
    pub delete_fraction: Option<f64>,
}

fn spec_err<T>(msg: impl Into<String>) -> Result<T, HarnessError> {
    Err(HarnessError::Spec(msg.into()))
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let spec: ExperimentSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The independence degree of the configured family.
    pub fn degree(&self) -> usize {
        match self.family {
            FamilyKind::Polynomial => self.k,
            FamilyKind::Cw | FamilyKind::Star => 2,
        }
    }

    /// The field modulus the experiment hashes over.
    pub fn modulus(&self) -> Result<PrimeModulus, HarnessError> {
        Ok(match (self.p, self.workload) {
            (Some(p), _) => PrimeModulus::new(p)?,
            (None, Workload::Adversarial) => {
                field_hash::next_prime_congruent(4 * self.n + 1, 1, 4)?
            }
            (None, _) if self.family == FamilyKind::Star => {
                let lower = (2 * self.r).max(self.n + FRESH_KEYS as u64) + 1;
                field_hash::next_prime_congruent(lower, 1, 2)?
            }
            (None, _) => PrimeModulus::new(MERSENNE_31)?,
        })
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return spec_err("trials must be at least 1");
        }
        if self.n == 0 {
            return spec_err("n must be at least 1");
        }
        if self.n >= self.r {
            return spec_err(format!("n = {} must be below r = {}", self.n, self.r));
        }
        if !(0.0..1.0).contains(&self.alpha)
            || (self.alpha * self.r as f64 - self.n as f64).abs() >= 1.0
        {
            return spec_err(format!(
                "alpha = {} does not match n / r = {} / {}",
                self.alpha, self.n, self.r
            ));
        }
        match self.family {
            FamilyKind::Polynomial if !(1..=MAX_DEGREE).contains(&self.k) => {
                return spec_err(format!("k = {} outside 1..={MAX_DEGREE}", self.k))
            }
            FamilyKind::Cw | FamilyKind::Star if self.k != 2 => {
                return spec_err(format!(
                    "family {} is pairwise; k must be 2, got {}",
                    self.family, self.k
                ))
            }
            _ => {}
        }
        if self.scheme != Scheme::Linear && !self.r.is_power_of_two() {
            return spec_err(format!(
                "blocked schemes need r to be a power of two, got {}",
                self.r
            ));
        }
        let p = self.modulus()?;
        if self.family == FamilyKind::Star && p.get() > MAX_STAR_MODULUS {
            return spec_err(format!(
                "the star family stores p values per function; p = {} exceeds {MAX_STAR_MODULUS}",
                p.get()
            ));
        }
        if self.r > p.get() {
            return spec_err(format!(
                "r = {} exceeds the modulus p = {}",
                self.r,
                p.get()
            ));
        }
        match self.workload {
            Workload::RandomKeys => {}
            Workload::Adversarial => {
                if self.scheme != Scheme::Linear {
                    return spec_err("the adversarial workload runs on the linear scheme");
                }
                if self.family == FamilyKind::Polynomial {
                    return spec_err("the adversarial workload needs family cw or star");
                }
                let expect_r = p.get().div_ceil(2);
                if self.r != expect_r {
                    return spec_err(format!(
                        "the adversarial workload with p = {} uses r = {expect_r}, got {}",
                        p.get(),
                        self.r
                    ));
                }
            }
            Workload::MixedOps => {
                if self.op_count.is_none_or(|c| c == 0) {
                    return spec_err("mixed-ops needs op_count >= 1");
                }
                let df = self.delete_fraction.unwrap_or(0.0);
                if !(0.0..=1.0).contains(&df) {
                    return spec_err(format!("delete_fraction = {df} outside [0, 1]"));
                }
                if df > 0.0 && self.scheme == Scheme::Linear {
                    return spec_err(
                        "the linear scheme does not support deletes; set delete_fraction to 0",
                    );
                }
            }
        }
        if self.workload != Workload::Adversarial {
            // keys plus fresh probes are drawn without replacement from [p]
            if self.n + FRESH_KEYS as u64 > p.get() {
                return spec_err(format!(
                    "n + {FRESH_KEYS} exceeds the key universe [p] with p = {}",
                    p.get()
                ));
            }
        }
        Ok(())
    }
}

/// Count, sum and maximum of the probes spent on one kind of operation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpStats {
    pub count: u64,
    pub total: u64,
    pub max: u64,
}

impl OpStats {
    pub fn record(&mut self, probes: u64) {
        self.count += 1;
        self.total += probes;
        self.max = self.max.max(probes);
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.total as f64 / self.count as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: u64,
    pub seed: u64,
    /// Canonical description of the sampled hash function.
    pub function: String,
    pub ops: BTreeMap<OpKind, OpStats>,
}

impl TrialResult {
    fn new(trial: u64, seed: u64, function: String) -> Self {
        TrialResult {
            trial,
            seed,
            function,
            ops: BTreeMap::new(),
        }
    }

    fn record(&mut self, kind: OpKind, probes: u64) {
        self.ops.entry(kind).or_default().record(probes);
    }

    pub fn op(&self, kind: OpKind) -> OpStats {
        self.ops.get(&kind).copied().unwrap_or_default()
    }

    /// Probes over all operation kinds.
    pub fn total(&self) -> u64 {
        self.ops.values().map(|s| s.total).sum()
    }
}

enum AnyTable {
    Linear(LinearTable),
    Blocked(BlockedTable),
}

impl AnyTable {
    fn new(scheme: Scheme, r: usize) -> Result<Self, TableError> {
        Ok(match scheme.traversal() {
            None => AnyTable::Linear(LinearTable::new(r)?),
            Some(t) => AnyTable::Blocked(BlockedTable::new(r, t)?),
        })
    }

    fn insert(&mut self, key: u64, home: usize) -> Result<u64, TableError> {
        match self {
            AnyTable::Linear(t) => t.insert(key, home),
            AnyTable::Blocked(t) => t.insert(key, home),
        }
    }

    fn search(&self, key: u64, home: usize) -> Result<(bool, u64), TableError> {
        match self {
            AnyTable::Linear(t) => t.search(key, home),
            AnyTable::Blocked(t) => t.search(key, home),
        }
    }

    fn len(&self) -> usize {
        match self {
            AnyTable::Linear(t) => t.len(),
            AnyTable::Blocked(t) => t.len(),
        }
    }
}

fn home(h: &HashFunction, key: u64) -> Result<usize, HarnessError> {
    Ok(h.eval(key)? as usize)
}

/// Runs every trial of `spec`. Trial `t` draws everything from
/// `trial_rng(spec.seed, t)`; the output is sorted by trial index.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<TrialResult>, HarnessError> {
    spec.validate()?;
    if spec.workload == Workload::Adversarial {
        return run_adversarial(spec);
    }
    (0..spec.trials)
        .into_par_iter()
        .map(|t| run_trial(spec, t))
        .collect()
}

fn run_adversarial(spec: &ExperimentSpec) -> Result<Vec<TrialResult>, HarnessError> {
    let p = spec.modulus()?;
    let instance = AdversaryInstance::build(p, None, &mut trial_rng(spec.seed, u64::MAX))?;
    let stats = adversary::measure_cost(
        &instance,
        spec.family,
        spec.trials,
        spec.seed,
        Sampling::default(),
    )?;
    Ok(stats
        .trials
        .into_iter()
        .map(|t| {
            let mut result = TrialResult::new(t.trial, spec.seed, t.function);
            result.ops.insert(
                OpKind::Insert,
                OpStats {
                    count: instance.key_count(t.pair),
                    total: t.total_steps,
                    max: t.max_steps,
                },
            );
            result
        })
        .collect())
}

fn run_trial(spec: &ExperimentSpec, trial: u64) -> Result<TrialResult, HarnessError> {
    let mut rng = trial_rng(spec.seed, trial);
    let p = spec.modulus()?;
    let h = field_hash::sample(spec.family, spec.degree(), p, spec.r, &mut rng)?;
    let mut result = TrialResult::new(trial, spec.seed, h.canonical()?);

    let n = spec.n as usize;
    let drawn = index::sample(&mut rng, p.get() as usize, n + FRESH_KEYS).into_vec();
    let (stored, fresh) = drawn.split_at(n);
    let mut keys: Vec<u64> = stored.iter().map(|&k| k as u64).collect();
    let mut fresh: Vec<u64> = fresh.iter().map(|&k| k as u64).collect();

    let mut table = AnyTable::new(spec.scheme, spec.r as usize)?;
    for &key in &keys {
        let probes = table.insert(key, home(&h, key)?)?;
        result.record(OpKind::Insert, probes);
    }
    if let AnyTable::Linear(t) = &table {
        debug_assert_eq!(t.total_cost(), result.op(OpKind::Insert).total);
    }

    if spec.workload == Workload::MixedOps {
        mixed_ops(
            spec,
            &h,
            &mut table,
            &mut keys,
            &mut fresh,
            &mut rng,
            &mut result,
        )?;
        return Ok(result);
    }

    for &key in &keys {
        let (found, probes) = table.search(key, home(&h, key)?)?;
        debug_assert!(found);
        result.record(OpKind::SearchHit, probes);
    }
    for &key in &fresh {
        let (found, probes) = table.search(key, home(&h, key)?)?;
        debug_assert!(!found);
        result.record(OpKind::SearchMiss, probes);
    }
    if let AnyTable::Blocked(t) = &mut table {
        for &key in &fresh {
            let y = home(&h, key)?;
            result.record(OpKind::ProbeInsert, t.insert(key, y)?);
            result.record(OpKind::Delete, t.delete(key, y)?);
        }
    }
    Ok(result)
}

/// `op_count` operations at constant load: with probability
/// `delete_fraction` a random stored key is deleted and a fresh key
/// inserted; otherwise a search for a stored or a fresh key, evenly.
fn mixed_ops(
    spec: &ExperimentSpec,
    h: &HashFunction,
    table: &mut AnyTable,
    keys: &mut Vec<u64>,
    fresh: &mut Vec<u64>,
    rng: &mut ChaCha8Rng,
    result: &mut TrialResult,
) -> Result<(), HarnessError> {
    let df = spec.delete_fraction.unwrap_or(0.0);
    let p = h.modulus().get();
    let mut present: HashSet<u64> = keys.iter().copied().collect();
    present.extend(fresh.iter().copied());
    for _ in 0..spec.op_count.unwrap_or(0) {
        if rng.gen_bool(df) {
            let AnyTable::Blocked(t) = table else {
                unreachable!("validated: deletes need a blocked scheme")
            };
            let victim = keys.swap_remove(rng.gen_range(0..keys.len()));
            result.record(OpKind::Delete, t.delete(victim, home(h, victim)?)?);
            present.remove(&victim);
            let key = loop {
                let k = rng.gen_range(0..p);
                if present.insert(k) {
                    break k;
                }
            };
            result.record(OpKind::Insert, t.insert(key, home(h, key)?)?);
            keys.push(key);
        } else if rng.gen_bool(0.5) {
            let key = keys[rng.gen_range(0..keys.len())];
            result.record(OpKind::SearchHit, table.search(key, home(h, key)?)?.1);
        } else {
            let key = fresh[rng.gen_range(0..fresh.len())];
            result.record(OpKind::SearchMiss, table.search(key, home(h, key)?)?.1);
        }
    }
    debug_assert_eq!(table.len(), keys.len());
    fresh.clear();
    Ok(())
}

/// Mean over trials of the per-trial mean for `kind`, with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpSummary {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
}

pub fn summarize(results: &[TrialResult], kind: OpKind) -> Option<OpSummary> {
    let means: Vec<f64> = results
        .iter()
        .filter(|r| r.op(kind).count > 0)
        .map(|r| r.op(kind).mean())
        .collect();
    if means.is_empty() {
        return None;
    }
    let n = means.len() as f64;
    let mean = means.iter().sum::<f64>() / n;
    let var = if means.len() > 1 {
        means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Some(OpSummary {
        mean,
        std_error: (var / n).sqrt(),
        trials: means.len(),
    })
}

pub const CSV_HEADER: [&str; 13] = [
    "scheme",
    "family",
    "k",
    "n",
    "r",
    "alpha",
    "trial",
    "seed",
    "op",
    "count",
    "mean_probes",
    "max_probes",
    "total_steps",
];

/// One parsed row of an experiment CSV.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CsvRow {
    pub scheme: Scheme,
    pub family: FamilyKind,
    pub k: usize,
    pub n: u64,
    pub r: u64,
    pub alpha: f64,
    pub trial: u64,
    pub seed: u64,
    pub op: OpKind,
    pub count: u64,
    pub mean_probes: f64,
    pub max_probes: u64,
    pub total_steps: u64,
}

/// Writes one row per (trial, operation kind) that saw at least one operation.
pub fn emit_csv<W: io::Write>(
    spec: &ExperimentSpec,
    results: &[TrialResult],
    out: W,
) -> Result<(), HarnessError> {
    if results.is_empty() {
        return Err(HarnessError::EmptyResults);
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for result in results {
        for (kind, stats) in &result.ops {
            w.write_record([
                spec.scheme.to_string(),
                spec.family.to_string(),
                spec.degree().to_string(),
                spec.n.to_string(),
                spec.r.to_string(),
                format!("{:.6}", spec.alpha),
                result.trial.to_string(),
                result.seed.to_string(),
                kind.to_string(),
                stats.count.to_string(),
                format!("{:.6}", stats.mean()),
                stats.max.to_string(),
                stats.total.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<CsvRow>, HarnessError> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.iter().ne(CSV_HEADER) {
        return Err(HarnessError::Spec(format!(
            "unexpected CSV header {headers:?}"
        )));
    }
    Ok(reader.deserialize().collect::<Result<_, _>>()?)
}

/// One operation of a differential run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Insert(u64),
    Delete(u64),
    Search(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub step: u64,
    pub op: Op,
    pub detail: String,
}

/// Outcome of a differential run; `mismatch` is the first divergence.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DifferentialReport {
    pub ops_run: u64,
    pub mismatch: Option<Mismatch>,
}

impl DifferentialReport {
    pub fn is_clean(&self) -> bool {
        self.mismatch.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifferentialConfig {
    pub scheme: Scheme,
    pub op_count: u64,
    pub seed: u64,
    pub r: usize,
    /// Inserts that would push the load above this are replaced by a delete
    /// (blocked) or a search (linear).
    pub max_load: f64,
    /// Check the level invariant after every mutation (blocked only).
    pub check_invariant: bool,
    /// Fault injection: skip the repair after deletes.
    pub disable_repair: bool,
}

impl DifferentialConfig {
    pub fn new(scheme: Scheme, op_count: u64, seed: u64) -> Self {
        DifferentialConfig {
            scheme,
            op_count,
            seed,
            r: 1024,
            max_load: 0.9,
            check_invariant: false,
            disable_repair: false,
        }
    }
}

/// Replays random operations against the table and a `HashSet` model.
pub fn differential_test(scheme: Scheme, op_count: u64, seed: u64) -> DifferentialReport {
    differential_run(&DifferentialConfig::new(scheme, op_count, seed))
}

pub fn differential_run(cfg: &DifferentialConfig) -> DifferentialReport {
    let mut report = DifferentialReport::default();
    if cfg.op_count == 0 {
        return report;
    }
    let mut rng = trial_rng(cfg.seed, 0);
    let p = PrimeModulus::new(MERSENNE_31).expect("2^31 - 1 is prime");
    let h = field_hash::sample(FamilyKind::Polynomial, 5, p, cfg.r as u64, &mut rng)
        .expect("valid range");
    let mut table = AnyTable::new(cfg.scheme, cfg.r).expect("valid table size");
    if cfg.disable_repair {
        if let AnyTable::Blocked(t) = &mut table {
            t.disable_repair();
        }
    }
    let mut model: HashSet<u64> = HashSet::new();
    let universe = 4 * cfg.r as u64;
    let limit = ((cfg.max_load * cfg.r as f64) as usize).min(cfg.r - 1);
    let blocked = cfg.scheme != Scheme::Linear;

    for step in 0..cfg.op_count {
        let key = rng.gen_range(0..universe);
        let roll: f64 = rng.gen();
        let mut op = if roll < 0.45 {
            Op::Insert(key)
        } else if blocked && roll < 0.75 {
            Op::Delete(key)
        } else {
            Op::Search(key)
        };
        if matches!(op, Op::Insert(_)) && !model.contains(&key) && model.len() >= limit {
            op = if blocked {
                Op::Delete(*model.iter().next().expect("table is nonempty"))
            } else {
                Op::Search(key)
            };
        }
        report.ops_run = step + 1;
        if let Err(detail) = apply(&mut table, &mut model, &h, op) {
            report.mismatch = Some(Mismatch { step, op, detail });
            return report;
        }
        let mutated = !matches!(op, Op::Search(_));
        if cfg.check_invariant && mutated {
            if let AnyTable::Blocked(t) = &table {
                if let Err(v) = t.check_level_invariant() {
                    report.mismatch = Some(Mismatch {
                        step,
                        op,
                        detail: format!("level invariant broken: {v:?}"),
                    });
                    return report;
                }
            }
        }
    }
    for &key in &model {
        let y = h.eval(key).expect("key in [p]") as usize;
        if !table.search(key, y).map(|(f, _)| f).unwrap_or(false) {
            report.mismatch = Some(Mismatch {
                step: cfg.op_count,
                op: Op::Search(key),
                detail: "stored key not found in the final sweep".into(),
            });
            return report;
        }
    }
    report
}

fn apply(
    table: &mut AnyTable,
    model: &mut HashSet<u64>,
    h: &HashFunction,
    op: Op,
) -> Result<(), String> {
    let key = match op {
        Op::Insert(k) | Op::Delete(k) | Op::Search(k) => k,
    };
    let y = h.eval(key).map_err(|e| e.to_string())? as usize;
    match op {
        Op::Insert(_) => {
            let expected_new = !model.contains(&key);
            match (table.insert(key, y), expected_new) {
                (Ok(_), true) => {
                    model.insert(key);
                }
                (Err(TableError::Duplicate(_)), false) => {}
                (got, _) => {
                    return Err(format!(
                        "insert: expected new = {expected_new}, got {got:?}"
                    ))
                }
            }
        }
        Op::Delete(_) => {
            let AnyTable::Blocked(t) = table else {
                return Err("delete on a linear table".into());
            };
            t.delete(key, y).map_err(|e| e.to_string())?;
            model.remove(&key);
            if t.contains(key, y) {
                return Err("key still present after delete".into());
            }
        }
        Op::Search(_) => {
            let (found, _) = table.search(key, y).map_err(|e| e.to_string())?;
            if found != model.contains(&key) {
                return Err(format!(
                    "search: expected {}, got {found}",
                    model.contains(&key)
                ));
            }
        }
    }
    if table.len() != model.len() {
        return Err(format!(
            "size: expected {}, got {}",
            model.len(),
            table.len()
        ));
    }
    Ok(())
}
