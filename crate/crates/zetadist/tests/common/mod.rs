//! Shared test oracles: independent reference computations used to check the
//! library's numerics. Everything here is deliberately implemented with
//! different algorithms than the library (direct Dirichlet series with
//! Euler-Maclaurin tails, trial division, a local sieve for the von Mangoldt
//! sum) so agreement is meaningful. These are written and self-validated
//! first (see `oracle_selftest.rs`) and treated as frozen.

#![allow(dead_code)]

use num_complex::Complex64;

/// Riemann zeta at real s > 1: partial sum to `n` terms plus the
/// Euler-Maclaurin tail through the n^{-s-3} term. Error is O(n^{-s-5}),
/// far below f64 resolution for n >= 10^4.
pub fn zeta_series(s: f64, n: u64) -> f64 {
    assert!(s > 1.0 && n >= 10);
    let mut sum = 0.0;
    let mut comp = 0.0;
    // Ascending magnitude: largest index first.
    for k in (1..=n).rev() {
        kahan_add(&mut sum, &mut comp, (k as f64).powf(-s));
    }
    let nf = n as f64;
    let tail = nf.powf(1.0 - s) / (s - 1.0) - 0.5 * nf.powf(-s)
        + s * nf.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * nf.powf(-s - 3.0) / 720.0;
    sum + comp + tail
}

/// Riemann zeta at complex s = sigma + it (sigma > 1): direct Dirichlet
/// series with `n` terms and the Euler-Maclaurin tail estimate through the
/// n^{-s-1} term.
pub fn zeta_series_complex(sigma: f64, t: f64, n: u64) -> Complex64 {
    assert!(sigma > 1.0 && n >= 10);
    let s = Complex64::new(sigma, t);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut comp = Complex64::new(0.0, 0.0);
    for k in (1..=n).rev() {
        let term = (-s * (k as f64).ln()).exp();
        kahan_add_c(&mut sum, &mut comp, term);
    }
    let nf = n as f64;
    let npow = (-s * nf.ln()).exp(); // n^{-s}
    let tail = npow * nf / (s - 1.0) - 0.5 * npow + s * npow / nf / 12.0;
    sum + comp + tail
}

/// Dirichlet L(2, chi_4) = Catalan's constant, via the alternating series
/// over odd integers with a midpoint-quadrature tail. Error ~ K^{-4}.
pub fn l2_chi4() -> f64 {
    let k_max: u64 = 200_000;
    let f = |k: f64| (4.0 * k + 1.0).powi(-2) - (4.0 * k + 3.0).powi(-2);
    let mut sum = 0.0;
    let mut comp = 0.0;
    for k in (0..=k_max).rev() {
        kahan_add(&mut sum, &mut comp, f(k as f64));
    }
    // Integral of f over [K + 1/2, infinity): midpoint rule for the sum
    // over k > K.
    let k = k_max as f64 + 0.5;
    let tail = 0.25 * (1.0 / (4.0 * k + 1.0) - 1.0 / (4.0 * k + 3.0));
    sum + comp + tail
}

/// Partial sums of the von Mangoldt series: returns (S, tail) with
/// S = sum_{n <= limit} Lambda(n) / n^2 so that zeta'(2)/zeta(2) = -(S + tail'),
/// 0 <= tail' <= tail. Uses a local odd-only sieve, independent of the
/// library's prime machinery.
pub fn von_mangoldt_sum_at_2(limit: u64) -> (f64, f64) {
    let primes = simple_sieve(limit);
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &p in primes.iter().rev() {
        let lp = (p as f64).ln();
        let mut pk = p as f64 * p as f64; // p^{2k} for p^k, k = 1
        let mut n = p;
        loop {
            kahan_add(&mut sum, &mut comp, lp / pk);
            // Next prime power p^{k+1} while it stays within the limit.
            match n.checked_mul(p) {
                Some(next) if next <= limit => {
                    n = next;
                    pk *= p as f64 * p as f64;
                }
                _ => break,
            }
        }
    }
    // sum_{p > N} ln p / p^2 ~ 1/N; 1.3/N is a safe envelope for N >= 100,
    // plus the tiny neglected higher-power tail.
    let tail = 1.3 / limit as f64;
    (sum + comp, tail)
}

/// All primes <= limit by trial division. Slow and obviously correct.
pub fn primes_trial_division(limit: u64) -> Vec<u64> {
    let mut out = Vec::new();
    'outer: for n in 2..=limit {
        let mut d = 2;
        while d * d <= n {
            if n % d == 0 {
                continue 'outer;
            }
            d += 1;
        }
        out.push(n);
    }
    out
}

/// Odd-only Eratosthenes sieve, test-local. Returns all primes <= limit.
pub fn simple_sieve(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let n_odd = ((limit - 1) / 2) as usize; // odd numbers 3, 5, ..., index i -> 2i+3
    let mut composite = vec![false; n_odd];
    let mut i = 0usize;
    while (2 * i + 3) * (2 * i + 3) <= limit as usize {
        if !composite[i] {
            let p = 2 * i + 3;
            let mut j = (p * p - 3) / 2;
            while j < n_odd {
                composite[j] = true;
                j += p;
            }
        }
        i += 1;
    }
    let mut primes = vec![2];
    primes.extend(
        (0..n_odd)
            .filter(|&i| !composite[i])
            .map(|i| (2 * i + 3) as u64),
    );
    primes
}

/// Brute-force sum of all omitted log-series term magnitudes for a product
/// with m coefficient rows, |alpha| <= 1, a single direction of inner
/// product v: terms with p > prime_limit (up to brute_limit) at all powers,
/// plus terms with p <= prime_limit at powers r > power_limit. Used to
/// validate the certified truncation bound from below.
pub fn brute_force_omitted_mass(
    v: f64,
    m: usize,
    prime_limit: u64,
    power_limit: u32,
    brute_limit: u64,
) -> f64 {
    assert!(v > 1.0);
    let primes = simple_sieve(brute_limit);
    let mut total = 0.0;
    for &p in &primes {
        let x = (p as f64).powf(-v);
        if p > prime_limit {
            // Whole prime omitted: sum_{r>=1} x^r / r = -ln(1 - x).
            total += -(1.0 - x).ln();
        } else {
            // Only powers beyond power_limit omitted.
            let mut xr = x.powi(power_limit as i32);
            for r in (power_limit + 1)..(power_limit + 200) {
                xr *= x;
                let term = xr / r as f64;
                total += term;
                if term < 1e-300 {
                    break;
                }
            }
        }
    }
    total * m as f64
}

/// Known-digit cross-check constants (standard mathematical constants,
/// quoted to more digits than f64 carries).
#[allow(clippy::excessive_precision)]
pub const CATALAN_REFERENCE: f64 = 0.915_965_594_177_219_0;
#[allow(clippy::excessive_precision)]
pub const ZETA_3_REFERENCE: f64 = 1.202_056_903_159_594_2;

pub fn kahan_add(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

pub fn kahan_add_c(sum: &mut Complex64, comp: &mut Complex64, x: Complex64) {
    let (mut sr, mut cr) = (sum.re, comp.re);
    let (mut si, mut ci) = (sum.im, comp.im);
    kahan_add(&mut sr, &mut cr, x.re);
    kahan_add(&mut si, &mut ci, x.im);
    *sum = Complex64::new(sr, si);
    *comp = Complex64::new(cr, ci);
}
