//! Prime generation and real Dirichlet-character evaluation.

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard cap on sieve limits; far beyond any default policy.
pub const SIEVE_LIMIT_CAP: u64 = 1 << 31;

/// Hard cap on character moduli; keeps full multiplicativity validation
/// (quadratic in the modulus) cheap.
pub const MODULUS_CAP: u64 = 10_000;

const SEGMENT: usize = 1 << 20;

/// Ascending table of all primes `<= limit`. Immutable after construction.
#[derive(Debug, Clone)]
pub struct PrimeTable {
    limit: u64,
    primes: Vec<u64>,
}

/// Runs a segmented Eratosthenes sieve up to `limit` inclusive.
pub fn sieve(limit: u64) -> Result<PrimeTable> {
    if limit < 2 {
        return Err(Error::Domain(format!("sieve limit must be >= 2, got {limit}")));
    }
    if limit > SIEVE_LIMIT_CAP {
        return Err(Error::Domain(format!(
            "sieve limit {limit} exceeds cap {SIEVE_LIMIT_CAP}"
        )));
    }

    let root = limit.isqrt() as usize;
    let base = simple_sieve(root.max(2));

    let mut primes = Vec::with_capacity(capacity_hint(limit));
    if limit >= 2 {
        primes.push(2);
    }

    // Odd-only segments: flags[i] covers the odd number lo + 2i.
    let mut flags = vec![true; SEGMENT];
    let mut lo: u64 = 3;
    while lo <= limit {
        let hi = (lo + 2 * SEGMENT as u64 - 2).min(limit | 1);
        let len = ((hi - lo) / 2 + 1) as usize;
        flags[..len].fill(true);
        for &p in &base {
            if p == 2 {
                continue;
            }
            if p * p > hi {
                break;
            }
            let mut start = p * p;
            if start < lo {
                let k = (lo - start).div_ceil(2 * p);
                start += 2 * p * k;
            }
            let mut i = ((start - lo) / 2) as usize;
            while i < len {
                flags[i] = false;
                i += p as usize;
            }
        }
        for (i, &f) in flags[..len].iter().enumerate() {
            if f {
                let n = lo + 2 * i as u64;
                if n <= limit {
                    primes.push(n);
                }
            }
        }
        lo = hi + 2;
    }

    Ok(PrimeTable { limit, primes })
}

impl PrimeTable {
    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    /// Number of primes in the table, i.e. pi(limit).
    pub fn count(&self) -> usize {
        self.primes.len()
    }

    /// Number of primes `<= x` for any `x <= limit`.
    pub fn count_leq(&self, x: u64) -> usize {
        self.primes.partition_point(|&p| p <= x)
    }

    /// Membership test by binary search; only valid for `n <= limit`.
    pub fn is_prime(&self, n: u64) -> bool {
        self.primes.binary_search(&n).is_ok()
    }
}

/// Plain odd-only sieve used for base primes; `limit >= 2`.
fn simple_sieve(limit: usize) -> Vec<u64> {
    let mut primes = vec![2u64];
    if limit < 3 {
        return primes;
    }
    let n_odd = (limit - 1) / 2;
    let mut composite = vec![false; n_odd + 1];
    let mut i = 1usize;
    while (2 * i + 1) * (2 * i + 1) <= limit {
        if !composite[i] {
            let p = 2 * i + 1;
            let mut j = (p * p - 1) / 2;
            while j <= n_odd {
                composite[j] = true;
                j += p;
            }
        }
        i += 1;
    }
    for (i, &c) in composite.iter().enumerate().skip(1) {
        if !c {
            primes.push(2 * i as u64 + 1);
        }
    }
    primes
}

fn capacity_hint(limit: u64) -> usize {
    let x = limit as f64;
    if x < 20.0 {
        8
    } else {
        (x / (x.ln() - 1.2)) as usize + 16
    }
}

/// Real Dirichlet character mod `modulus`, stored as its residue table
/// (`values[r]` is the value on the class `r`). Values lie in {-1, 0, 1}.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealCharacter {
    pub modulus: u64,
    pub values: Vec<i8>,
}

impl RealCharacter {
    /// Validates and constructs a character from its residue table.
    pub fn new(modulus: u64, values: Vec<i8>) -> Result<Self> {
        let chi = RealCharacter { modulus, values };
        chi.validate("character")?;
        Ok(chi)
    }

    /// The non-principal character mod 4: +1 on 1 mod 4, -1 on 3 mod 4.
    pub fn mod_four() -> Self {
        RealCharacter { modulus: 4, values: vec![0, 1, 0, -1] }
    }

    /// Checks the residue table: correct length, values in {-1,0,1},
    /// zero exactly on non-units, value 1 at the identity class, and
    /// complete multiplicativity over all residue pairs.
    pub fn validate(&self, field: &str) -> Result<()> {
        let q = self.modulus;
        if q < 1 {
            return Err(Error::validation(field, "modulus must be >= 1"));
        }
        if q > MODULUS_CAP {
            return Err(Error::validation(
                field,
                format!("modulus {q} exceeds cap {MODULUS_CAP}"),
            ));
        }
        if self.values.len() as u64 != q {
            return Err(Error::validation(
                field,
                format!("values has length {}, expected modulus {q}", self.values.len()),
            ));
        }
        for (r, &v) in self.values.iter().enumerate() {
            if !(-1..=1).contains(&v) {
                return Err(Error::validation(
                    field,
                    format!("values[{r}] = {v} is outside {{-1,0,1}}"),
                ));
            }
            let unit = (r as u64).gcd(&q) == 1;
            if unit && v == 0 {
                return Err(Error::validation(
                    field,
                    format!("values[{r}] = 0 on a unit residue class"),
                ));
            }
            if !unit && v != 0 {
                return Err(Error::validation(
                    field,
                    format!("values[{r}] = {v} must be 0 on a non-unit residue class"),
                ));
            }
        }
        let one = if q == 1 { 0 } else { 1 };
        if self.values[one] != 1 {
            return Err(Error::validation(field, "value on the class of 1 must be 1"));
        }
        for a in 0..q {
            for b in a..q {
                let lhs = self.values[((a * b) % q) as usize];
                let rhs = self.values[a as usize] * self.values[b as usize];
                if lhs != rhs {
                    return Err(Error::validation(
                        field,
                        format!("not multiplicative: chi({a}*{b}) != chi({a})*chi({b})"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Character value at `n >= 1` via residue lookup.
    pub fn value(&self, n: u64) -> i8 {
        self.values[(n % self.modulus) as usize]
    }
}

/// Completely multiplicative extension of the residue table to `n >= 1`.
pub fn char_value(chi: &RealCharacter, n: u64) -> i8 {
    chi.value(n)
}

/// Trial-division primality test; fine for validation and witness scans.
pub(crate) fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}
