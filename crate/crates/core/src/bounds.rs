//! Analytic bounds on probe counts and interval loads.
//!
//! Everything here is a pure function of its arguments. Probability bounds
//! are returned as [`TailBound`], which keeps the raw formula value and
//! exposes the `[0, 1]`-clamped value for composing into expectations.

use std::collections::HashMap;

use num_traits::Num;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("load factor {0} outside [0, 1)")]
    Alpha(f64),
    #[error("slack eps = {eps} violates the domain of the bound (must be below {limit})")]
    Eps { eps: f64, limit: f64 },
    #[error("deviation d = {0} must be positive")]
    Deviation(f64),
    #[error("interval length must be positive")]
    EmptyInterval,
    #[error("probability {0} outside [0, 1]")]
    Probability(String),
    #[error("no explicit constant is available for load factor {0} below 0.8")]
    NoExplicitConstant(f64),
    #[error("interval ({start}, {len}) does not fit a ring of size {r}")]
    Interval { start: u64, len: u64, r: u64 },
}

/// A probability bound: the raw formula value and its clamp to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TailBound(f64);

impl TailBound {
    pub fn raw(self) -> f64 {
        self.0
    }

    pub fn clamped(self) -> f64 {
        self.0.clamp(0.0, 1.0)
    }
}

/// Inputs to the tail bounds: load factor, uniformity slack, interval
/// length `q`, deviation `d` and key count `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    pub alpha: f64,
    pub eps: f64,
    pub q: u64,
    pub d: f64,
    pub n: u64,
}

impl BoundParams {
    /// `alpha = n / r`.
    pub fn from_counts(n: u64, r: u64, eps: f64, q: u64, d: f64) -> Self {
        BoundParams {
            alpha: n as f64 / r as f64,
            eps,
            q,
            d,
            n,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<(), BoundsError> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(BoundsError::Alpha(alpha));
    }
    Ok(())
}

/// Checks `0 <= eps < (1 - alpha) / alpha`.
fn check_alpha_eps(alpha: f64, eps: f64) -> Result<(), BoundsError> {
    check_alpha(alpha)?;
    let limit = if alpha > 0.0 {
        (1.0 - alpha) / alpha
    } else {
        f64::INFINITY
    };
    if !(eps >= 0.0 && eps < limit) {
        return Err(BoundsError::Eps { eps, limit });
    }
    Ok(())
}

fn check_eps_for_n(eps: f64, n: u64) -> Result<(), BoundsError> {
    let limit = 1.0 - 2.0 / n as f64;
    if !(eps >= 0.0 && eps < limit) {
        return Err(BoundsError::Eps { eps, limit });
    }
    Ok(())
}

/// The two expressions whose minimum is `T(alpha, eps)`:
/// `5.2 a (1+e)^2 / (1 - (1+e) a)^2 + 4 / (9 a) - 1` and
/// `3 a^2 (1+e)^2 / (1 - (1+e) a)^4 * (2 + 4 / (9 a))`.
pub fn t_branches(alpha: f64, eps: f64) -> Result<(f64, f64), BoundsError> {
    check_alpha_eps(alpha, eps)?;
    let s = 1.0 + eps;
    let gap = 1.0 - s * alpha;
    let first = 5.2 * alpha * s * s / (gap * gap) + 4.0 / (9.0 * alpha) - 1.0;
    let second = 3.0 * alpha * alpha * s * s / gap.powi(4) * (2.0 + 4.0 / (9.0 * alpha));
    Ok((first, second))
}

/// `T(alpha, eps)`, the expected-displacement bound shared by the linear
/// and blocked probing analyses. Defined as 0 at `alpha = 0`.
pub fn t_alpha_eps(alpha: f64, eps: f64) -> Result<f64, BoundsError> {
    check_alpha_eps(alpha, eps)?;
    if alpha == 0.0 {
        return Ok(0.0);
    }
    let (first, second) = t_branches(alpha, eps)?;
    Ok(first.min(second))
}

/// Fourth-moment bound on `Pr{|h(S) ∩ Q| >= alpha q (1 + eps) + d}` for a
/// 4-wise independent, `eps / r`-approximately uniform family.
pub fn lemma1_tail(params: &BoundParams) -> Result<TailBound, BoundsError> {
    let BoundParams {
        alpha,
        eps,
        q,
        d,
        n,
    } = *params;
    check_alpha(alpha)?;
    check_eps_for_n(eps, n)?;
    if d.is_nan() || d <= 0.0 {
        return Err(BoundsError::Deviation(d));
    }
    let (q, s) = (q as f64, 1.0 + eps);
    Ok(TailBound(
        (3.0 * alpha * alpha * q * q + alpha * q) * s * s / d.powi(4),
    ))
}

/// Bound on the probability that the interval `Q + h(x)` of length `q` is
/// fully loaded, for a fixed `x` outside `S` and a 5-wise independent family.
///
/// The `1 - 2/n` restriction on `eps` is applied in its `n -> inf` form.
pub fn lemma1_fully_loaded(alpha: f64, eps: f64, q: u64) -> Result<TailBound, BoundsError> {
    check_alpha_eps(alpha, eps)?;
    if eps >= 1.0 {
        return Err(BoundsError::Eps { eps, limit: 1.0 });
    }
    if q == 0 {
        return Err(BoundsError::EmptyInterval);
    }
    let (q, s) = (q as f64, 1.0 + eps);
    let gap = 1.0 - s * alpha;
    Ok(TailBound(
        (3.0 * alpha * alpha / (q * q) + alpha / (q * q * q)) * s * s / gap.powi(4),
    ))
}

/// Second-moment (Chebyshev) analogue of [`lemma1_tail`]: the variance of a
/// sum of pairwise independent indicators is at most its mean.
pub fn chebyshev_tail(params: &BoundParams) -> Result<TailBound, BoundsError> {
    let BoundParams {
        alpha, eps, q, d, ..
    } = *params;
    check_alpha(alpha)?;
    if d.is_nan() || d <= 0.0 {
        return Err(BoundsError::Deviation(d));
    }
    Ok(TailBound(alpha * q as f64 * (1.0 + eps) / (d * d)))
}

fn small<T: Num + Clone>(k: u32) -> T {
    (0..k).fold(T::zero(), |acc, _| acc + T::one())
}

/// Exact `E((X - mu)^4)` for `X` a sum of 4-wise independent indicators
/// with the given success probabilities:
/// `mu + 3mu^2 - 7s2 - 6mu s2 + 12s3 + 3s2^2 - 6s4` with `s_k = sum p_i^k`.
///
/// Works over any numeric field, e.g. `f64` or exact rationals.
pub fn fourth_central_moment<T>(probs: &[T]) -> Result<T, BoundsError>
where
    T: Num + Clone + PartialOrd + std::fmt::Debug,
{
    let (zero, one) = (T::zero(), T::one());
    if let Some(bad) = probs.iter().find(|p| **p < zero || **p > one) {
        return Err(BoundsError::Probability(format!("{bad:?}")));
    }
    let mut mu = T::zero();
    let mut s2 = T::zero();
    let mut s3 = T::zero();
    let mut s4 = T::zero();
    for p in probs {
        let p2 = p.clone() * p.clone();
        mu = mu + p.clone();
        s2 = s2 + p2.clone();
        s3 = s3 + p2.clone() * p.clone();
        s4 = s4 + p2.clone() * p2;
    }
    let c = |k: u32| small::<T>(k);
    let positive =
        mu.clone() + c(3) * mu.clone() * mu.clone() + c(12) * s3 + c(3) * s2.clone() * s2.clone();
    let negative = c(7) * s2.clone() + c(6) * mu * s2 + c(6) * s4;
    Ok(positive - negative)
}

/// Expected unsuccessful-search bound for blocked probing under a fully
/// random function, from the Chernoff-Hoeffding load bound
/// `exp(q (1 - alpha + ln alpha))`.
pub fn full_independence_unsuccessful_bound(alpha: f64) -> Result<f64, BoundsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(BoundsError::Alpha(alpha));
    }
    let exponent = 1.0 - alpha + alpha.ln();
    if exponent == 0.0 {
        return Err(BoundsError::Alpha(alpha));
    }
    Ok(1.0 + exponent.exp() / (std::f64::consts::LN_2 * exponent.abs()))
}

/// Expected-cost bounds for blocked probing under a 5-wise independent family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockedBounds {
    pub unsuccessful: f64,
    pub insert: f64,
    pub delete: f64,
    pub successful: f64,
}

/// Load factor at which the successful-search bound switches formulas.
pub fn successful_breakpoint(eps: f64) -> f64 {
    0.3 / (1.0 + eps)
}

pub fn theorem4_bounds(alpha: f64, eps: f64) -> Result<BlockedBounds, BoundsError> {
    let t = t_alpha_eps(alpha, eps)?;
    let s = 1.0 + eps;
    let gap = 1.0 - s * alpha;
    let successful = if alpha <= successful_breakpoint(eps) {
        1.0 + (alpha * alpha + alpha / 3.0) * 4.0 * s * s / gap.powi(3)
    } else {
        0.915 / (alpha * s) + 10.4 * s / gap + 0.673 / alpha - 1.0
            + (gap.powf(10.4) * (alpha * s).powf(8.0 / 9.0)).ln() / alpha
    };
    Ok(BlockedBounds {
        unsuccessful: 1.0 + t,
        insert: 1.0 + 2.0 * t,
        delete: 1.0 + 2.0 * t,
        successful,
    })
}

/// Successful-search bound for blocked probing under a 4-wise independent
/// family; only stated with explicit constants for `alpha >= 0.8`.
pub fn theorem5_bound(alpha: f64, eps: f64) -> Result<f64, BoundsError> {
    check_alpha_eps(alpha, eps)?;
    if alpha < 0.8 {
        return Err(BoundsError::NoExplicitConstant(alpha));
    }
    let s = 1.0 + eps;
    Ok(6.0 * s / (1.0 - s * alpha) - 2.7)
}

/// A cyclic interval `{start, ..., start + len - 1} mod r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    pub start: u64,
    pub len: u64,
}

/// A multiset of cyclic intervals on the ring `[r]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalSet {
    r: u64,
    intervals: Vec<Interval>,
}

impl IntervalSet {
    pub fn new(r: u64) -> Self {
        IntervalSet {
            r,
            intervals: Vec::new(),
        }
    }

    pub fn from_intervals(r: u64, intervals: Vec<Interval>) -> Result<Self, BoundsError> {
        let mut set = IntervalSet::new(r);
        for iv in intervals {
            set.push(iv.start, iv.len)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, start: u64, len: u64) -> Result<(), BoundsError> {
        if start >= self.r || len > self.r {
            return Err(BoundsError::Interval {
                start,
                len,
                r: self.r,
            });
        }
        if len > 0 {
            self.intervals.push(Interval { start, len });
        }
        Ok(())
    }

    pub fn extend(&mut self, other: &IntervalSet) {
        debug_assert_eq!(self.r, other.r);
        self.intervals.extend_from_slice(&other.intervals);
    }

    pub fn r(&self) -> u64 {
        self.r
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn total_len(&self) -> u64 {
        self.intervals.iter().map(|iv| iv.len).sum()
    }

    /// Multiplicity of every ring position.
    pub fn coverage(&self) -> Vec<u64> {
        let mut cover = vec![0u64; self.r as usize];
        for iv in &self.intervals {
            for j in 0..iv.len {
                cover[((iv.start + j) % self.r) as usize] += 1;
            }
        }
        cover
    }

    /// Linear pieces `[lo, hi)` of each interval, tagged with its index.
    fn segments(&self) -> Vec<(u64, u64, usize)> {
        let mut out = Vec::with_capacity(self.intervals.len() * 2);
        for (idx, iv) in self.intervals.iter().enumerate() {
            let end = iv.start + iv.len;
            if end <= self.r {
                out.push((iv.start, end, idx));
            } else {
                out.push((iv.start, self.r, idx));
                out.push((0, end - self.r, idx));
            }
        }
        out
    }
}

/// Number of positions shared by two cyclic intervals (which may meet in two
/// separate arcs).
pub fn cyclic_intersection(a: Interval, b: Interval, r: u64) -> u64 {
    let set = IntervalSet {
        r,
        intervals: vec![a, b],
    };
    let segs = set.segments();
    let mut total = 0;
    for &(lo1, hi1, i1) in &segs {
        for &(lo2, hi2, i2) in &segs {
            if i1 == 0 && i2 == 1 {
                total += hi1.min(hi2).saturating_sub(lo1.max(lo2));
            }
        }
    }
    total
}

/// `sum_{j1 < j2} |I_j1 ∩ I_j2|^2 / 2`: a lower bound on the total number of
/// linear-probing insertion steps for any key multiset whose home slots
/// coincide (as a multiset) with the union of the intervals.
pub fn intersection_lower_bound(set: &IntervalSet) -> f64 {
    let mut segs = set.segments();
    segs.sort_unstable();
    let mut overlaps: HashMap<(usize, usize), u64> = HashMap::new();
    let mut active: Vec<(u64, usize)> = Vec::new();
    for &(lo, hi, idx) in &segs {
        active.retain(|&(end, _)| end > lo);
        for &(end, other) in &active {
            if other != idx {
                let key = (other.min(idx), other.max(idx));
                *overlaps.entry(key).or_insert(0) += end.min(hi) - lo;
            }
        }
        active.push((hi, idx));
    }
    let twice: u128 = overlaps.values().map(|&c| (c as u128) * (c as u128)).sum();
    twice as f64 / 2.0
}
