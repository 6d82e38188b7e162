//! Adversarial key sets for pairwise independent families.
//!
//! `[p]` is cut into eight consecutive parts and the key set is the union of
//! two of them. Under `x -> ((a x + b) mod p) mod r` with `r = ceil(p / 2)`,
//! stepping `x` by `m = a^-1 mod p` advances the field value by one, so each
//! part is mapped onto at most `m` runs of consecutive slots. Small `m` means
//! few long runs that pile on top of each other, and linear probing pays
//! roughly `r^2 / m` steps. Averaged over the uniformly distributed `m` this
//! gives `Omega(r log r)` total cost for a set of `r / 2` keys.

use std::ops::Range;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::bounds::{intersection_lower_bound, IntervalSet};
use crate::field_hash::{
    self, mod_inverse, next_prime_congruent, CwHash, FamilyKind, FieldError, HashFunction,
    PrimeModulus, StarHash,
};
use crate::harness::trial_rng;
use crate::linear_probe::{LinearTable, TableError};

pub const PARTS: usize = 8;
pub const PAIRS: usize = PARTS * (PARTS - 1) / 2;
pub const MIN_MODULUS: u64 = 1000;

#[derive(Debug, Error)]
pub enum AdversaryError {
    #[error("modulus {0} is below the supported minimum {MIN_MODULUS}")]
    ModulusTooSmall(u64),
    #[error("modulus {0} is not 1 mod 4")]
    NotOneModFour(u64),
    #[error("part indices must be distinct and below {PARTS}, got ({0}, {1})")]
    BadPair(usize, usize),
    #[error("family `{0}` is not one of the pairwise families (cw, star)")]
    Family(FamilyKind),
    #[error("at least one trial is required")]
    NoTrials,
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Table(#[from] TableError),
}

/// The eight-way partition of `[p]` and a chosen pair of parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdversaryInstance {
    p: PrimeModulus,
    r: u64,
    parts: Vec<Range<u64>>,
    selection: (usize, usize),
}

/// How the two parts forming the key set are picked in each trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairProtocol {
    /// Always the instance's selection.
    Fixed,
    /// A fresh uniformly random pair per trial, drawn from the trial's generator.
    #[default]
    Randomized,
}

/// How the multiplier `a` of each trial's function is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Multiplier {
    /// Drawn uniformly as part of sampling the function.
    #[default]
    Uniform,
    /// Trial `t` uses `a = m^-1` with `m = 1 + (t mod (p - 1))`; `b` (and the
    /// star table) stay random. Over `p - 1` trials every nonzero `a` is used
    /// once, so the mean is exact in `a`. The cost is dominated by the rare
    /// small values of `m`, which independent draws mostly miss.
    Stratified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Sampling {
    pub pair: PairProtocol,
    pub multiplier: Multiplier,
}

impl Sampling {
    pub fn fixed_pair() -> Self {
        Sampling {
            pair: PairProtocol::Fixed,
            ..Sampling::default()
        }
    }

    pub fn stratified() -> Self {
        Sampling {
            multiplier: Multiplier::Stratified,
            ..Sampling::default()
        }
    }
}

/// The partition of `[p]` into eight consecutive parts whose sizes differ by
/// at most one (the first `p mod 8` parts are the larger ones).
pub fn partition(p: u64) -> Vec<Range<u64>> {
    let (base, extra) = (p / PARTS as u64, p % PARTS as u64);
    let mut start = 0;
    (0..PARTS as u64)
        .map(|i| {
            let len = base + u64::from(i < extra);
            let part = start..start + len;
            start += len;
            part
        })
        .collect()
}

/// A uniformly random unordered pair of distinct part indices, smaller first.
pub fn random_pair<R: Rng + ?Sized>(rng: &mut R) -> (usize, usize) {
    let picked = index::sample(rng, PARTS, 2);
    let (i, j) = (picked.index(0), picked.index(1));
    (i.min(j), i.max(j))
}

/// The modulus used for a table of (at least) `2^log_r` slots: the smallest
/// prime `p >= 4n + 1` with `p = 1 (mod 4)` for `n = 2^(log_r - 1)`.
pub fn modulus_for_log_r(log_r: u32) -> Result<PrimeModulus, FieldError> {
    let n = 1u64 << log_r.saturating_sub(1);
    next_prime_congruent(4 * n + 1, 1, 4)
}

impl AdversaryInstance {
    /// Builds the partition of `[p]`. Part indices are 0-based; `pair = None`
    /// draws a uniformly random pair from `rng`.
    pub fn build<R: Rng + ?Sized>(
        p: PrimeModulus,
        pair: Option<(usize, usize)>,
        rng: &mut R,
    ) -> Result<Self, AdversaryError> {
        if p.get() < MIN_MODULUS {
            return Err(AdversaryError::ModulusTooSmall(p.get()));
        }
        if p.get() % 4 != 1 {
            return Err(AdversaryError::NotOneModFour(p.get()));
        }
        let selection = match pair {
            Some((i, j)) if i == j || i >= PARTS || j >= PARTS => {
                return Err(AdversaryError::BadPair(i, j))
            }
            Some((i, j)) => (i.min(j), i.max(j)),
            None => random_pair(rng),
        };
        Ok(AdversaryInstance {
            p,
            r: p.get().div_ceil(2),
            parts: partition(p.get()),
            selection,
        })
    }

    pub fn modulus(&self) -> PrimeModulus {
        self.p
    }

    /// Table size `ceil(p / 2)`.
    pub fn r(&self) -> u64 {
        self.r
    }

    pub fn parts(&self) -> &[Range<u64>] {
        &self.parts
    }

    pub fn selection(&self) -> (usize, usize) {
        self.selection
    }

    pub fn keys(&self, pair: (usize, usize)) -> impl Iterator<Item = u64> + '_ {
        self.parts[pair.0].clone().chain(self.parts[pair.1].clone())
    }

    pub fn key_count(&self, pair: (usize, usize)) -> u64 {
        let len = |i: usize| self.parts[i].end - self.parts[i].start;
        len(pair.0) + len(pair.1)
    }
}

/// Splits the image of `part` under `x -> ((a x + b) mod p) mod r` into
/// intervals of `[r]`, so that the multiset of covered positions equals the
/// multiset of hash values. The part is walked in progressions of stride
/// `m = a^-1`, each of which maps to a run of consecutive field values; runs
/// are then cut where they wrap past `p` and at multiples of `r`.
pub fn decompose_image(
    part: Range<u64>,
    a: u64,
    b: u64,
    p: PrimeModulus,
    r: u64,
) -> Result<IntervalSet, FieldError> {
    let m = mod_inverse(a, p)?;
    let (pv, mut set) = (p.get(), IntervalSet::new(r));
    let mut push_linear = |lo: u64, hi: u64| {
        let mut c = lo;
        while c < hi {
            let end = hi.min((c / r + 1) * r);
            set.push(c % r, end - c)
                .expect("piece lies within one copy of [r]");
            c = end;
        }
    };
    let first_end = part.end.min(part.start.saturating_add(m));
    for x0 in part.start..first_end {
        let len = (part.end - 1 - x0) / m + 1;
        let s = p.add(p.mul(a, x0 % pv), b);
        if s + len <= pv {
            push_linear(s, s + len);
        } else {
            push_linear(s, pv);
            push_linear(0, s + len - pv);
        }
    }
    Ok(set)
}

/// One adversarial trial.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryTrial {
    pub trial: u64,
    pub a: u64,
    /// `a^-1 mod p`; `None` when `a = 0` (possible in the star family).
    pub m: Option<u64>,
    pub pair: (usize, usize),
    /// Canonical description of the sampled function.
    pub function: String,
    pub total_steps: u64,
    /// Largest number of probes spent on a single insertion.
    pub max_steps: u64,
    /// Interval-intersection lower bound for the trial, when the sampled
    /// function acts as `((a x + b) mod p) mod r` on the key set.
    pub lower_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostStats {
    pub mean_total_steps: f64,
    pub std: f64,
    pub trials: Vec<AdversaryTrial>,
}

impl CostStats {
    fn from_trials(trials: Vec<AdversaryTrial>) -> Self {
        let n = trials.len() as f64;
        let mean = trials.iter().map(|t| t.total_steps as f64).sum::<f64>() / n;
        let var = if trials.len() > 1 {
            trials
                .iter()
                .map(|t| (t.total_steps as f64 - mean).powi(2))
                .sum::<f64>()
                / (n - 1.0)
        } else {
            0.0
        };
        CostStats {
            mean_total_steps: mean,
            std: var.sqrt(),
            trials,
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        self.std / (self.trials.len() as f64).sqrt()
    }

    /// CSV rows `r,trial,a,m,total_steps` (m is 0 when undefined).
    pub fn write_csv<W: std::io::Write>(
        &self,
        r: u64,
        out: &mut csv::Writer<W>,
    ) -> csv::Result<()> {
        for t in &self.trials {
            out.write_record([
                r.to_string(),
                t.trial.to_string(),
                t.a.to_string(),
                t.m.unwrap_or(0).to_string(),
                t.total_steps.to_string(),
            ])?;
        }
        Ok(())
    }
}

pub const CSV_HEADER: [&str; 5] = ["r", "trial", "a", "m", "total_steps"];

/// A random member of `family` whose multiplier is `a = m^-1`.
fn with_inverse_multiplier<R: Rng + ?Sized>(
    family: FamilyKind,
    p: PrimeModulus,
    r: u64,
    m: u64,
    rng: &mut R,
) -> Result<HashFunction, AdversaryError> {
    let a = mod_inverse(m, p)?;
    let b = rng.gen_range(0..p.get());
    Ok(match family {
        FamilyKind::Cw => HashFunction::Cw(CwHash::new(p, r, a, b)?),
        FamilyKind::Star => HashFunction::Star(StarHash::from_seed(p, r, a, b, rng.gen())?),
        FamilyKind::Polynomial => return Err(AdversaryError::Family(family)),
    })
}

/// Total and largest per-key probes for inserting the pair's keys into an
/// empty table.
fn insertion_cost(
    instance: &AdversaryInstance,
    h: &HashFunction,
    pair: (usize, usize),
) -> Result<(u64, u64), AdversaryError> {
    let mut table = LinearTable::new(instance.r as usize)?;
    let mut max_steps = 0;
    for x in instance.keys(pair) {
        max_steps = max_steps.max(table.insert(x, h.eval(x)? as usize)?);
    }
    Ok((table.probes_total(), max_steps))
}

/// Runs a single trial: samples a function, inserts the key set into an
/// empty linear probing table of size `r` and records the total steps.
pub fn run_trial(
    instance: &AdversaryInstance,
    family: FamilyKind,
    seed: u64,
    trial: u64,
    sampling: Sampling,
) -> Result<AdversaryTrial, AdversaryError> {
    let mut rng = trial_rng(seed, trial);
    let (p, r) = (instance.p, instance.r);
    let h = match (family, sampling.multiplier) {
        (FamilyKind::Polynomial, _) => return Err(AdversaryError::Family(family)),
        (_, Multiplier::Uniform) => field_hash::sample(family, 2, p, r, &mut rng)?,
        (_, Multiplier::Stratified) => {
            with_inverse_multiplier(family, p, r, 1 + trial % (p.get() - 1), &mut rng)?
        }
    };
    let pair = match sampling.pair {
        PairProtocol::Fixed => instance.selection,
        PairProtocol::Randomized => random_pair(&mut rng),
    };
    let (a, b, linear_on_keys) = match &h {
        HashFunction::Cw(cw) => (cw.a(), cw.b(), true),
        HashFunction::Star(star) => {
            let agrees = star.a() != 0
                && instance
                    .keys(pair)
                    .all(|x| star.table()[x as usize] < p.get());
            (star.a(), star.b(), agrees)
        }
        HashFunction::Polynomial(_) => unreachable!(),
    };

    let (total_steps, max_steps) = insertion_cost(instance, &h, pair)?;
    let m = if a == 0 {
        None
    } else {
        Some(mod_inverse(a, p)?)
    };
    let lower_bound = if linear_on_keys {
        let mut set = decompose_image(instance.parts[pair.0].clone(), a, b, p, r)?;
        set.extend(&decompose_image(
            instance.parts[pair.1].clone(),
            a,
            b,
            p,
            r,
        )?);
        Some(intersection_lower_bound(&set))
    } else {
        None
    };
    Ok(AdversaryTrial {
        trial,
        a,
        m,
        pair,
        function: h.canonical()?,
        total_steps,
        max_steps,
        lower_bound,
    })
}

/// Mean and spread of the total insertion cost over `trials` independent
/// trials. Trial `t` draws everything from `trial_rng(seed, t)`, so the
/// result does not depend on how trials are scheduled.
pub fn measure_cost(
    instance: &AdversaryInstance,
    family: FamilyKind,
    trials: u64,
    seed: u64,
    sampling: Sampling,
) -> Result<CostStats, AdversaryError> {
    if trials == 0 {
        return Err(AdversaryError::NoTrials);
    }
    let results = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(instance, family, seed, t, sampling))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CostStats::from_trials(results))
}

/// Measures every one of the 28 pairs with a fixed pair and returns the pair
/// with the largest mean cost.
pub fn measure_worst_pair(
    instance: &AdversaryInstance,
    family: FamilyKind,
    trials: u64,
    seed: u64,
    multiplier: Multiplier,
) -> Result<((usize, usize), CostStats), AdversaryError> {
    let sampling = Sampling {
        pair: PairProtocol::Fixed,
        multiplier,
    };
    let mut worst: Option<((usize, usize), CostStats)> = None;
    for i in 0..PARTS {
        for j in i + 1..PARTS {
            let inst = AdversaryInstance {
                selection: (i, j),
                ..instance.clone()
            };
            let stats = measure_cost(&inst, family, trials, seed, sampling)?;
            if worst
                .as_ref()
                .is_none_or(|(_, w)| stats.mean_total_steps > w.mean_total_steps)
            {
                worst = Some(((i, j), stats));
            }
        }
    }
    Ok(worst.expect("28 pairs measured"))
}

/// Cost for one multiplier inverse `m`, averaged over the pairs evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub m: u64,
    pub mean_total_steps: f64,
    pub mean_keys: f64,
}

/// Estimate of the expected insertion cost over a uniform nonzero `a`, a
/// uniform pair of parts and uniform `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierSweep {
    pub r: u64,
    pub points: Vec<SweepPoint>,
    /// Functions times pairs actually inserted.
    pub evaluations: u64,
}

impl MultiplierSweep {
    pub fn mean_total_steps(&self) -> f64 {
        self.points
            .iter()
            .map(|pt| pt.mean_total_steps)
            .sum::<f64>()
            / self.points.len() as f64
    }

    /// Mean of `total_steps - keys`: probes beyond the first of each key,
    /// i.e. the steps spent passing occupied slots.
    pub fn mean_displacement(&self) -> f64 {
        self.points
            .iter()
            .map(|pt| pt.mean_total_steps - pt.mean_keys)
            .sum::<f64>()
            / self.points.len() as f64
    }

    /// Standard error of [`Self::mean_total_steps`] from collapsing
    /// neighbouring values of `m` into strata of two. Conservative, since
    /// neighbouring strata differ in mean as well.
    pub fn std_error(&self) -> f64 {
        let n = self.points.len() as f64;
        let ss: f64 = self
            .points
            .chunks_exact(2)
            .map(|c| (c[0].mean_total_steps - c[1].mean_total_steps).powi(2))
            .sum();
        ss.sqrt() / n
    }
}

/// `min over 1 <= k <= 64 of k * |k m mod p|`, with residues taken in
/// `(-p/2, p/2]`. Since `h(x + k m) = h(x) + k` before reduction mod `r`,
/// a small weight means keys a short distance apart land a short distance
/// apart, so the parts map onto few long runs.
pub fn structure_weight(m: u64, p: PrimeModulus) -> u64 {
    (1..=64u64)
        .map(|k| {
            let d = p.mul(k % p.get(), m % p.get());
            k * d.min(p.get() - d)
        })
        .min()
        .expect("nonempty range")
}

/// Evaluates every `m` in `[1, p)` once, with `a = m^-1` and `b` (and the
/// star table) drawn from `trial_rng(seed, m - 1)`. When
/// `structure_weight(m) < exact_pairs_below` the function is applied to all
/// 28 pairs and the costs averaged; other `m` use one random pair. Those
/// structured multipliers carry almost all of the variance, as their cost
/// swings between about `r^2 / m` and linear depending on the pair.
pub fn sweep_multipliers(
    instance: &AdversaryInstance,
    family: FamilyKind,
    seed: u64,
    exact_pairs_below: u64,
) -> Result<MultiplierSweep, AdversaryError> {
    let all_pairs: Vec<(usize, usize)> = (0..PARTS)
        .flat_map(|i| (i + 1..PARTS).map(move |j| (i, j)))
        .collect();
    let (p, r) = (instance.p, instance.r);
    let points = (1..p.get())
        .into_par_iter()
        .map(|m| {
            let mut rng = trial_rng(seed, m - 1);
            let h = with_inverse_multiplier(family, p, r, m, &mut rng)?;
            let pairs = if structure_weight(m, p) < exact_pairs_below {
                all_pairs.clone()
            } else {
                vec![random_pair(&mut rng)]
            };
            let (mut steps, mut keys) = (0u64, 0u64);
            for &pair in &pairs {
                steps += insertion_cost(instance, &h, pair)?.0;
                keys += instance.key_count(pair);
            }
            let k = pairs.len() as f64;
            Ok(SweepPoint {
                m,
                mean_total_steps: steps as f64 / k,
                mean_keys: keys as f64 / k,
            })
        })
        .collect::<Result<Vec<_>, AdversaryError>>()?;
    let exact = (1..p.get())
        .filter(|&m| structure_weight(m, p) < exact_pairs_below)
        .count() as u64;
    Ok(MultiplierSweep {
        r,
        evaluations: p.get() - 1 + exact * (PAIRS as u64 - 1),
        points,
    })
}
