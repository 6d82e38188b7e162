//! Prime-field arithmetic and the hash families used by the tables.
//!
//! Three families are supported, all mapping `[p]` to `[r]`:
//!
//! * [`PolynomialHash`]: degree `k - 1` polynomials over GF(p), reduced mod `r`.
//!   Exactly `k`-wise independent before the range reduction and
//!   `(r/p)/r`-approximately uniform after it.
//! * [`CwHash`]: the Carter-Wegman family `((a x + b) mod p) mod r`, `a != 0`.
//! * [`StarHash`]: a pairwise independent, exactly uniform variant of the
//!   Carter-Wegman family that substitutes a random table entry `v_x` for
//!   the linear value whenever `v_x >= p`.
//!
//! Every modulus is kept below 2^31 so that `a * x` with `a, x < p` fits in a
//! `u64` without widening.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Exclusive upper limit for a field modulus.
pub const MAX_MODULUS: u64 = 1 << 31;

/// The largest prime below [`MAX_MODULUS`] (a Mersenne prime).
pub const MERSENNE_31: u64 = (1 << 31) - 1;

/// Maximum supported independence degree for [`PolynomialHash`].
pub const MAX_DEGREE: usize = 5;

const PRIME_SEARCH_WINDOW: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("modulus {0} outside the supported range [5, 2^31)")]
    ModulusOutOfRange(u64),
    #[error("value {x} is outside the domain [0, {p})")]
    Domain { x: u64, p: u64 },
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("range size {r} must satisfy 1 <= r <= p = {p}")]
    BadRange { r: u64, p: u64 },
    #[error("independence degree {0} outside 1..=5")]
    BadDegree(usize),
    #[error("coefficient {c} is not reduced modulo {p}")]
    BadCoefficient { c: u64, p: u64 },
    #[error("no prime found in [{lower}, {lower} + 10^7) congruent to {residue} mod {modulus}")]
    NoPrimeFound {
        lower: u64,
        residue: u64,
        modulus: u64,
    },
    #[error("invalid residue class {residue} mod {modulus}")]
    BadResidue { residue: u64, modulus: u64 },
    #[error("star table has {len} entries, expected {p}")]
    BadStarTable { len: usize, p: u64 },
    #[error("star table entry {v} outside [0, {p_hat})")]
    BadStarEntry { v: u64, p_hat: u64 },
    #[error("a star function built from an explicit table has no canonical form")]
    NoCanonicalForm,
    #[error("malformed hash function description: {0}")]
    Parse(String),
}

fn mul_mod_u128(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod_u128(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod_u128(acc, base, m);
        }
        base = mul_mod_u128(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin test, exact for every `u64`.
///
/// The first twelve primes form a witness set with no strong pseudoprime
/// below 3.3 * 10^24.
pub fn is_prime(n: u64) -> bool {
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &w in &WITNESSES {
        if n.is_multiple_of(w) {
            return n == w;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &w in &WITNESSES {
        let mut x = pow_mod_u128(w, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod_u128(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// A prime `p` with `5 <= p < 2^31`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrimeModulus(u64);

impl PrimeModulus {
    pub fn new(p: u64) -> Result<Self, FieldError> {
        if !(5..MAX_MODULUS).contains(&p) {
            return Err(FieldError::ModulusOutOfRange(p));
        }
        if !is_prime(p) {
            return Err(FieldError::NotPrime(p));
        }
        Ok(PrimeModulus(p))
    }

    #[inline]
    pub fn get(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn mul(self, a: u64, b: u64) -> u64 {
        a * b % self.0
    }

    #[inline]
    pub fn add(self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.0 {
            s - self.0
        } else {
            s
        }
    }

    fn check(self, x: u64) -> Result<(), FieldError> {
        if x >= self.0 {
            Err(FieldError::Domain { x, p: self.0 })
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for PrimeModulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Smallest prime `p >= lower` with `p = residue (mod modulus)`.
pub fn next_prime_congruent(
    lower: u64,
    residue: u64,
    modulus: u64,
) -> Result<PrimeModulus, FieldError> {
    if modulus == 0 || residue >= modulus {
        return Err(FieldError::BadResidue { residue, modulus });
    }
    let lower = lower.max(5);
    let not_found = FieldError::NoPrimeFound {
        lower,
        residue,
        modulus,
    };
    let offset = (residue + modulus - lower % modulus) % modulus;
    let mut candidate = lower + offset;
    let limit = lower.saturating_add(PRIME_SEARCH_WINDOW);
    while candidate < limit {
        if candidate >= MAX_MODULUS {
            return Err(FieldError::ModulusOutOfRange(candidate));
        }
        if is_prime(candidate) {
            return PrimeModulus::new(candidate);
        }
        candidate += modulus;
    }
    Err(not_found)
}

/// Multiplicative inverse of `a` in GF(p), via the extended Euclidean algorithm.
pub fn mod_inverse(a: u64, p: PrimeModulus) -> Result<u64, FieldError> {
    p.check(a)?;
    if a == 0 {
        return Err(FieldError::ZeroInverse);
    }
    let (mut old_r, mut r) = (a as i64, p.get() as i64);
    let (mut old_s, mut s) = (1i64, 0i64);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    debug_assert_eq!(old_r, 1);
    Ok(old_s.rem_euclid(p.get() as i64) as u64)
}

fn check_range(p: PrimeModulus, r: u64) -> Result<(), FieldError> {
    if r == 0 || r > p.get() {
        Err(FieldError::BadRange { r, p: p.get() })
    } else {
        Ok(())
    }
}

/// `x -> ((c_0 + c_1 x + ... + c_{k-1} x^{k-1}) mod p) mod r`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolynomialHash {
    p: PrimeModulus,
    r: u64,
    coeffs: Vec<u64>,
}

impl PolynomialHash {
    /// `coeffs[i]` multiplies `x^i`.
    pub fn new(p: PrimeModulus, r: u64, coeffs: Vec<u64>) -> Result<Self, FieldError> {
        check_range(p, r)?;
        if coeffs.is_empty() || coeffs.len() > MAX_DEGREE {
            return Err(FieldError::BadDegree(coeffs.len()));
        }
        if let Some(&c) = coeffs.iter().find(|&&c| c >= p.get()) {
            return Err(FieldError::BadCoefficient { c, p: p.get() });
        }
        Ok(PolynomialHash { p, r, coeffs })
    }

    pub fn k(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    /// Polynomial value in `[p]`, before the range reduction.
    #[inline]
    pub fn eval_field(&self, x: u64) -> u64 {
        let p = self.p;
        self.coeffs
            .iter()
            .rev()
            .fold(0, |acc, &c| p.add(p.mul(acc, x), c))
    }

    #[inline]
    pub fn eval(&self, x: u64) -> Result<u64, FieldError> {
        self.p.check(x)?;
        Ok(self.eval_field(x) % self.r)
    }
}

/// `x -> ((a x + b) mod p) mod r` with `a != 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CwHash {
    p: PrimeModulus,
    r: u64,
    a: u64,
    b: u64,
}

impl CwHash {
    pub fn new(p: PrimeModulus, r: u64, a: u64, b: u64) -> Result<Self, FieldError> {
        check_range(p, r)?;
        p.check(b)?;
        p.check(a)?;
        if a == 0 {
            return Err(FieldError::BadCoefficient { c: 0, p: p.get() });
        }
        Ok(CwHash { p, r, a, b })
    }

    pub fn a(&self) -> u64 {
        self.a
    }

    pub fn b(&self) -> u64 {
        self.b
    }

    #[inline]
    pub fn eval_field(&self, x: u64) -> u64 {
        self.p.add(self.p.mul(self.a, x), self.b)
    }

    #[inline]
    pub fn eval(&self, x: u64) -> Result<u64, FieldError> {
        self.p.check(x)?;
        Ok(self.eval_field(x) % self.r)
    }
}

/// Where a [`StarHash`] got its `v` table from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StarTable {
    /// Regenerable from a 64-bit seed.
    Seeded(u64),
    /// Supplied verbatim (exhaustive enumeration, tests).
    Explicit,
}

/// `x -> g((a x + b) mod p, v_x) mod r` where `g(y, v) = v` if `v >= p`, else `y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StarHash {
    p: PrimeModulus,
    r: u64,
    a: u64,
    b: u64,
    v: Vec<u64>,
    source: StarTable,
}

impl StarHash {
    /// `ceil(p / r) * r`, the exclusive bound of the `v` entries.
    pub fn p_hat(p: PrimeModulus, r: u64) -> u64 {
        p.get().div_ceil(r) * r
    }

    pub fn from_table(
        p: PrimeModulus,
        r: u64,
        a: u64,
        b: u64,
        v: Vec<u64>,
    ) -> Result<Self, FieldError> {
        check_range(p, r)?;
        p.check(a)?;
        p.check(b)?;
        if v.len() as u64 != p.get() {
            return Err(FieldError::BadStarTable {
                len: v.len(),
                p: p.get(),
            });
        }
        let p_hat = Self::p_hat(p, r);
        if let Some(&bad) = v.iter().find(|&&e| e >= p_hat) {
            return Err(FieldError::BadStarEntry { v: bad, p_hat });
        }
        Ok(StarHash {
            p,
            r,
            a,
            b,
            v,
            source: StarTable::Explicit,
        })
    }

    /// Builds the table deterministically from `seed`.
    pub fn from_seed(
        p: PrimeModulus,
        r: u64,
        a: u64,
        b: u64,
        seed: u64,
    ) -> Result<Self, FieldError> {
        check_range(p, r)?;
        let p_hat = Self::p_hat(p, r);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..p.get()).map(|_| rng.gen_range(0..p_hat)).collect();
        let mut h = Self::from_table(p, r, a, b, v)?;
        h.source = StarTable::Seeded(seed);
        Ok(h)
    }

    pub fn a(&self) -> u64 {
        self.a
    }

    pub fn b(&self) -> u64 {
        self.b
    }

    pub fn table(&self) -> &[u64] {
        &self.v
    }

    pub fn source(&self) -> StarTable {
        self.source
    }

    /// True when every table entry is below `p`, i.e. the function coincides
    /// with a plain Carter-Wegman function (given `a != 0`).
    pub fn table_below_p(&self) -> bool {
        self.v.iter().all(|&e| e < self.p.get())
    }

    #[inline]
    pub fn eval(&self, x: u64) -> Result<u64, FieldError> {
        self.p.check(x)?;
        let vx = self.v[x as usize];
        let y = if vx >= self.p.get() {
            vx
        } else {
            self.p.add(self.p.mul(self.a, x), self.b)
        };
        Ok(y % self.r)
    }
}

/// Family tag used for sampling and in serialized descriptions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    Polynomial,
    Cw,
    Star,
}

impl FamilyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FamilyKind::Polynomial => "polynomial",
            FamilyKind::Cw => "cw",
            FamilyKind::Star => "star",
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FamilyKind {
    type Err = FieldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "polynomial" => Ok(FamilyKind::Polynomial),
            "cw" => Ok(FamilyKind::Cw),
            "star" => Ok(FamilyKind::Star),
            other => Err(FieldError::Parse(format!("unknown family `{other}`"))),
        }
    }
}

/// A sampled member of one of the supported families.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HashFunction {
    Polynomial(PolynomialHash),
    Cw(CwHash),
    Star(StarHash),
}

impl HashFunction {
    pub fn kind(&self) -> FamilyKind {
        match self {
            HashFunction::Polynomial(_) => FamilyKind::Polynomial,
            HashFunction::Cw(_) => FamilyKind::Cw,
            HashFunction::Star(_) => FamilyKind::Star,
        }
    }

    pub fn modulus(&self) -> PrimeModulus {
        match self {
            HashFunction::Polynomial(h) => h.p,
            HashFunction::Cw(h) => h.p,
            HashFunction::Star(h) => h.p,
        }
    }

    pub fn range(&self) -> u64 {
        match self {
            HashFunction::Polynomial(h) => h.r,
            HashFunction::Cw(h) => h.r,
            HashFunction::Star(h) => h.r,
        }
    }

    /// Independence degree of the family.
    pub fn k(&self) -> usize {
        match self {
            HashFunction::Polynomial(h) => h.k(),
            HashFunction::Cw(_) | HashFunction::Star(_) => 2,
        }
    }

    /// Uniformity slack `eps` such that the family is `eps / r`-approximately
    /// uniform: `r / p` for the mod-r reduced families, 0 for the star family.
    pub fn epsilon(&self) -> f64 {
        match self {
            HashFunction::Star(_) => 0.0,
            _ => self.range() as f64 / self.modulus().get() as f64,
        }
    }

    #[inline]
    pub fn eval(&self, x: u64) -> Result<u64, FieldError> {
        match self {
            HashFunction::Polynomial(h) => h.eval(x),
            HashFunction::Cw(h) => h.eval(x),
            HashFunction::Star(h) => h.eval(x),
        }
    }

    /// Canonical text form `family,k,p,r,c0,c1,...`.
    ///
    /// The Carter-Wegman and star families list `b, a` as `c0, c1`; the star
    /// family appends the seed of its `v` table.
    pub fn canonical(&self) -> Result<String, FieldError> {
        let (p, r) = (self.modulus(), self.range());
        let head = format!("{},{},{},{}", self.kind(), self.k(), p, r);
        let tail: Vec<u64> = match self {
            HashFunction::Polynomial(h) => h.coeffs.clone(),
            HashFunction::Cw(h) => vec![h.b, h.a],
            HashFunction::Star(h) => match h.source {
                StarTable::Seeded(seed) => vec![h.b, h.a, seed],
                StarTable::Explicit => return Err(FieldError::NoCanonicalForm),
            },
        };
        let tail: Vec<String> = tail.iter().map(u64::to_string).collect();
        Ok(format!("{head},{}", tail.join(",")))
    }
}

impl FromStr for HashFunction {
    type Err = FieldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.trim().split(',');
        let kind: FamilyKind = parts
            .next()
            .ok_or_else(|| FieldError::Parse(s.to_string()))?
            .parse()?;
        let nums = parts
            .map(|t| t.trim().parse::<u64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| FieldError::Parse(format!("{s}: {e}")))?;
        if nums.len() < 3 {
            return Err(FieldError::Parse(s.to_string()));
        }
        let (k, p, r, rest) = (
            nums[0] as usize,
            PrimeModulus::new(nums[1])?,
            nums[2],
            &nums[3..],
        );
        let arity = |want: usize| {
            if rest.len() == want {
                Ok(())
            } else {
                Err(FieldError::Parse(format!(
                    "{s}: expected {want} parameters"
                )))
            }
        };
        match kind {
            FamilyKind::Polynomial => {
                arity(k)?;
                Ok(HashFunction::Polynomial(PolynomialHash::new(
                    p,
                    r,
                    rest.to_vec(),
                )?))
            }
            FamilyKind::Cw => {
                arity(2)?;
                Ok(HashFunction::Cw(CwHash::new(p, r, rest[1], rest[0])?))
            }
            FamilyKind::Star => {
                arity(3)?;
                Ok(HashFunction::Star(StarHash::from_seed(
                    p, r, rest[1], rest[0], rest[2],
                )?))
            }
        }
    }
}

/// Draws a uniformly random member of the requested family.
///
/// `k` is only consulted for the polynomial family; the other two are
/// always pairwise.
pub fn sample<R: Rng + ?Sized>(
    kind: FamilyKind,
    k: usize,
    p: PrimeModulus,
    r: u64,
    rng: &mut R,
) -> Result<HashFunction, FieldError> {
    check_range(p, r)?;
    let p_val = p.get();
    Ok(match kind {
        FamilyKind::Polynomial => {
            if !(1..=MAX_DEGREE).contains(&k) {
                return Err(FieldError::BadDegree(k));
            }
            let coeffs = (0..k).map(|_| rng.gen_range(0..p_val)).collect();
            HashFunction::Polynomial(PolynomialHash::new(p, r, coeffs)?)
        }
        FamilyKind::Cw => {
            let a = rng.gen_range(1..p_val);
            let b = rng.gen_range(0..p_val);
            HashFunction::Cw(CwHash::new(p, r, a, b)?)
        }
        FamilyKind::Star => {
            let a = rng.gen_range(0..p_val);
            let b = rng.gen_range(0..p_val);
            let seed = rng.gen();
            HashFunction::Star(StarHash::from_seed(p, r, a, b, seed)?)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pm(p: u64) -> PrimeModulus {
        PrimeModulus::new(p).unwrap()
    }

    fn trial_division(n: u64) -> bool {
        n >= 2
            && (2..)
                .take_while(|d| d * d <= n)
                .all(|d| !n.is_multiple_of(d))
    }

    #[test]
    fn miller_rabin_matches_trial_division() {
        for n in 0..20_000 {
            assert_eq!(is_prime(n), trial_division(n), "n = {n}");
        }
        assert!(is_prime(MERSENNE_31));
        assert!(!is_prime(3_215_031_751)); // strong pseudoprime to bases 2, 3, 5, 7
        assert!(is_prime(18_446_744_073_709_551_557));
    }

    #[test]
    fn modulus_bounds() {
        assert_eq!(PrimeModulus::new(3), Err(FieldError::ModulusOutOfRange(3)));
        assert_eq!(PrimeModulus::new(9), Err(FieldError::NotPrime(9)));
        assert!(matches!(
            PrimeModulus::new(2_147_483_659),
            Err(FieldError::ModulusOutOfRange(_))
        ));
        assert_eq!(pm(MERSENNE_31).get(), MERSENNE_31);
    }

    #[test]
    fn next_prime_congruent_examples() {
        assert_eq!(next_prime_congruent(5, 1, 4).unwrap().get(), 5);
        assert_eq!(next_prime_congruent(17, 1, 4).unwrap().get(), 17);
        // 19 and 23 are 3 mod 4; 29 is the first prime >= 18 that is 1 mod 4.
        let brute = (18..).find(|&n| trial_division(n) && n % 4 == 1).unwrap();
        assert_eq!(brute, 29);
        assert_eq!(next_prime_congruent(18, 1, 4).unwrap().get(), 29);
    }

    #[test]
    fn next_prime_congruent_errors() {
        assert!(matches!(
            next_prime_congruent(100, 0, 4),
            Err(FieldError::NoPrimeFound { .. })
        ));
        assert!(matches!(
            next_prime_congruent(100, 5, 4),
            Err(FieldError::BadResidue { .. })
        ));
    }

    #[test]
    fn eval_poly_examples() {
        let h = PolynomialHash::new(pm(11), 4, vec![7]).unwrap();
        assert_eq!(h.eval(9), Ok(3));
        let h = PolynomialHash::new(pm(13), 13, vec![3, 2]).unwrap();
        assert_eq!(h.eval(4), Ok(11));
        let h = PolynomialHash::new(pm(13), 6, vec![1; 5]).unwrap();
        assert_eq!(h.eval(2), Ok(5));
        assert_eq!(h.eval(13), Err(FieldError::Domain { x: 13, p: 13 }));
    }

    #[test]
    fn eval_cw_examples() {
        let h = CwHash::new(pm(13), 6, 1, 0).unwrap();
        assert_eq!(h.eval(5), Ok(5));
        let h = CwHash::new(pm(13), 6, 2, 3).unwrap();
        assert_eq!(h.eval(10), Ok(4));
        assert_eq!(h.eval(12), Ok(1));
        assert!(h.eval(13).is_err());
        assert!(CwHash::new(pm(13), 6, 0, 3).is_err());
    }

    #[test]
    fn eval_star_examples() {
        let p = pm(5);
        assert_eq!(StarHash::p_hat(p, 3), 6);
        let v = vec![5, 1, 0, 2, 4];
        let h = StarHash::from_table(p, 3, 3, 4, v.clone()).unwrap();
        assert_eq!(h.eval(0), Ok(2));
        let h = StarHash::from_table(p, 3, 0, 0, v.clone()).unwrap();
        assert_eq!(h.eval(1), Ok(0));
        let h = StarHash::from_table(p, 3, 1, 0, v).unwrap();
        assert_eq!(h.eval(3), Ok(0));
        assert!(h.eval(5).is_err());
        assert!(StarHash::from_table(p, 3, 1, 0, vec![6, 0, 0, 0, 0]).is_err());
        assert!(StarHash::from_table(p, 3, 1, 0, vec![0; 4]).is_err());
    }

    #[test]
    fn mod_inverse_examples() {
        assert_eq!(mod_inverse(3, pm(7)), Ok(5));
        assert_eq!(mod_inverse(1, pm(101)), Ok(1));
        assert_eq!(mod_inverse(2, pm(13)), Ok(7));
        assert_eq!(mod_inverse(0, pm(13)), Err(FieldError::ZeroInverse));
    }

    #[test]
    fn mod_inverse_is_an_involutive_bijection() {
        for p in (5..=101).filter(|&n| trial_division(n)) {
            let p = pm(p);
            let mut seen = vec![false; p.get() as usize];
            for a in 1..p.get() {
                let m = mod_inverse(a, p).unwrap();
                assert_eq!(a * m % p.get(), 1);
                assert!(!seen[m as usize]);
                seen[m as usize] = true;
                assert_eq!(mod_inverse(m, p).unwrap(), a);
            }
        }
    }

    #[test]
    fn sampling_contracts() {
        let p = pm(5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = sample(FamilyKind::Star, 2, p, 3, &mut rng).unwrap();
        let HashFunction::Star(star) = &h else {
            panic!()
        };
        assert_eq!(star.table().len(), 5);
        assert!(star.table().iter().all(|&v| v < 6));

        let p = pm(13);
        for _ in 0..200 {
            let HashFunction::Cw(cw) = sample(FamilyKind::Cw, 2, p, 6, &mut rng).unwrap() else {
                panic!()
            };
            assert_ne!(cw.a(), 0);
        }

        let a = sample(
            FamilyKind::Polynomial,
            5,
            pm(MERSENNE_31),
            1 << 10,
            &mut ChaCha8Rng::seed_from_u64(9),
        );
        let b = sample(
            FamilyKind::Polynomial,
            5,
            pm(MERSENNE_31),
            1 << 10,
            &mut ChaCha8Rng::seed_from_u64(9),
        );
        assert_eq!(a, b);
        assert!(sample(FamilyKind::Polynomial, 6, p, 6, &mut rng).is_err());
        assert!(sample(FamilyKind::Polynomial, 0, p, 6, &mut rng).is_err());
    }

    #[test]
    fn polynomial_family_is_approximately_uniform() {
        let (p, r) = (13u64, 6u64);
        let mut counts = vec![vec![0u32; r as usize]; p as usize];
        for c0 in 0..p {
            for c1 in 0..p {
                let h = PolynomialHash::new(pm(p), r, vec![c0, c1]).unwrap();
                for x in 0..p {
                    counts[x as usize][h.eval(x).unwrap() as usize] += 1;
                }
            }
        }
        let total = (p * p) as f64;
        for row in &counts {
            for &c in row {
                assert!((c as f64 / total - 1.0 / r as f64).abs() < 1.0 / p as f64);
            }
        }
    }

    #[test]
    fn degree_three_is_three_wise_independent_before_reduction() {
        let p = 7u64;
        let points = [(0u64, 1u64, 2u64), (1, 3, 6), (0, 4, 5)];
        for &(x1, x2, x3) in &points {
            let mut joint = vec![0u32; (p * p * p) as usize];
            for c0 in 0..p {
                for c1 in 0..p {
                    for c2 in 0..p {
                        let h = PolynomialHash::new(pm(p), p, vec![c0, c1, c2]).unwrap();
                        let idx = (h.eval_field(x1) * p + h.eval_field(x2)) * p + h.eval_field(x3);
                        joint[idx as usize] += 1;
                    }
                }
            }
            assert!(joint.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn explicit_star_has_no_canonical_form() {
        let h = StarHash::from_table(pm(5), 3, 1, 0, vec![0; 5]).unwrap();
        assert_eq!(
            HashFunction::Star(h).canonical(),
            Err(FieldError::NoCanonicalForm)
        );
    }

    proptest! {
        #[test]
        fn canonical_form_round_trips(seed in any::<u64>(), kind in 0usize..3, k in 1usize..=5) {
            let kind = [FamilyKind::Polynomial, FamilyKind::Cw, FamilyKind::Star][kind];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = sample(kind, k, pm(1009), 505, &mut rng).unwrap();
            let text = h.canonical().unwrap();
            let back: HashFunction = text.parse().unwrap();
            prop_assert_eq!(&back, &h);
            for x in [0u64, 1, 500, 1008] {
                prop_assert_eq!(back.eval(x), h.eval(x));
            }
        }

        #[test]
        fn evaluation_is_pure_and_in_range(seed in any::<u64>(), x in 0u64..MERSENNE_31) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = sample(FamilyKind::Polynomial, 5, pm(MERSENNE_31), 1000, &mut rng).unwrap();
            let y = h.eval(x).unwrap();
            prop_assert!(y < 1000);
            prop_assert_eq!(h.eval(x).unwrap(), y);
        }
    }
}
