//! Materialization of the finite Lévy measure behind a normalized Euler
//! product: explicit atoms, total mass, cumulants, and the compound
//! Poisson characteristic function rebuilt from the atoms.
//!
//! An atom lives at x = (r log p) a_l with mass (1/r) sum_k alpha_{lk}(p)^r
//! p^{-r<a_l, sigma>}. Two contributions merge iff they share the prime p
//! and the exact rational vector r a_l (lowest terms); the key is exact so
//! collisions like (a=1, r=2) vs (a=2, r=1) at 2 log p merge correctly.
//! Coefficient sums are exact rationals (i128 fast path, big rationals as
//! fallback); each merged mass is rounded to binary64 once, at
//! materialization.

use std::collections::BTreeMap;
use std::io;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::sieve;
use crate::error::{Error, Result};
use crate::product::{
    convergence_margin, dot, tail_bound_with_pi, ProductSpec, Rat, TruncationPolicy,
    ValidatedSpec,
};
use crate::util::{Kahan, KahanComplex, CHUNK};

/// One merged atom of the Lévy measure, with the provenance of its
/// smallest contributing term. `l` is 1-based to match reporting and the
/// CSV export; the location is (r log p) a_l, materialized to binary64.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevyAtom {
    pub p: u64,
    pub r: u32,
    pub l: usize,
    pub location: Vec<f64>,
    pub mass: f64,
}

/// Finite truncated Lévy measure: merged atoms (ordered by prime, then by
/// exact location key) plus a certified bound on everything left out.
#[derive(Debug, Clone)]
pub struct LevyMeasure {
    pub atoms: Vec<LevyAtom>,
    /// Bound on the total absolute mass outside the truncation (prime and
    /// power tails plus atoms dropped below the mass threshold).
    pub omitted_tail: f64,
    pub sigma: Vec<f64>,
    pub policy: TruncationPolicy,
    /// The product spec the measure was enumerated from.
    pub spec: ProductSpec,
}

/// Compound Poisson normal form of the generating triplet: zero Gaussian
/// part, the finite measure itself, zero drift.
#[derive(Debug, Clone)]
pub struct LkTriplet<'a> {
    pub gaussian: Vec<Vec<f64>>,
    pub levy: &'a LevyMeasure,
    pub drift: Vec<f64>,
}

/// Exact rational coefficient accumulator. Stays in reduced i128 form
/// until an operation would overflow, then upgrades to big rationals.
#[derive(Debug, Clone)]
enum Coef {
    Small { num: i128, den: i128 },
    Big(BigRational),
}

impl Coef {
    fn zero() -> Self {
        Coef::Small { num: 0, den: 1 }
    }

    fn is_zero(&self) -> bool {
        match self {
            Coef::Small { num, .. } => *num == 0,
            Coef::Big(b) => b.is_zero(),
        }
    }

    fn is_negative(&self) -> bool {
        match self {
            Coef::Small { num, .. } => *num < 0,
            Coef::Big(b) => b.is_negative(),
        }
    }

    fn add_fraction(&mut self, num: i128, den: i128) {
        debug_assert!(den > 0);
        match self {
            Coef::Small { num: a, den: b } => {
                let merged = (|| {
                    let lhs = a.checked_mul(den)?;
                    let rhs = num.checked_mul(*b)?;
                    let n = lhs.checked_add(rhs)?;
                    let d = b.checked_mul(den)?;
                    Some((n, d))
                })();
                match merged {
                    Some((n, d)) => {
                        let g = n.gcd(&d);
                        if g == 0 {
                            *self = Coef::Small { num: 0, den: 1 };
                        } else {
                            *self = Coef::Small { num: n / g, den: d / g };
                        }
                    }
                    None => {
                        let mut big = self.to_big();
                        big += BigRational::new(BigInt::from(num), BigInt::from(den));
                        *self = Coef::Big(big);
                    }
                }
            }
            Coef::Big(b) => {
                *b += BigRational::new(BigInt::from(num), BigInt::from(den));
            }
        }
    }

    fn add_big(&mut self, value: &BigRational) {
        let mut big = self.to_big();
        big += value;
        *self = Coef::Big(big);
    }

    fn to_big(&self) -> BigRational {
        match self {
            Coef::Small { num, den } => {
                BigRational::new(BigInt::from(*num), BigInt::from(*den))
            }
            Coef::Big(b) => b.clone(),
        }
    }

    fn to_f64(&self) -> f64 {
        match self {
            Coef::Small { num, den } => *num as f64 / *den as f64,
            Coef::Big(b) => b.to_f64().unwrap_or(0.0),
        }
    }
}

/// Exact merged coefficient of one location key at one prime.
#[derive(Debug, Clone)]
pub struct MergedTerm {
    /// r a_l in lowest terms; the atom location is this key times log p.
    pub key: Vec<Rat>,
    /// Smallest contributing power.
    pub rep_r: u32,
    /// 1-based direction index of the smallest contributing term.
    pub rep_l: usize,
    /// Exact sum of (1/r) sum_k alpha_{lk}(p)^r over contributing (l, r).
    pub coefficient: BigRational,
}

/// Location keys shared by every prime: the deduplicated sorted list of
/// r a_l (lowest terms) for r <= R, with the (l, r) -> key index map.
struct KeyTable {
    /// Sorted ascending; index is the key id.
    keys: Vec<Vec<Ratio<i64>>>,
    keys_f64: Vec<Vec<f64>>,
    /// <key, sigma>; the merged decay at p is exp(-exponent * ln p).
    exponents: Vec<f64>,
    /// Representative (r, l0) per key: smallest r, then smallest l (0-based).
    reps: Vec<(u32, usize)>,
    /// key id for direction l (0-based) and power r, at index l*R + (r-1).
    id_of: Vec<usize>,
    /// True when every power landing on the key from any direction is
    /// within the power limit, so the merged coefficient is exact for the
    /// untruncated measure. False keys are truncation boundary artifacts.
    complete: Vec<bool>,
}

/// Checks whether `key` equals r' a_l for some direction l only with
/// r' <= power_limit. A key reachable from some direction only beyond the
/// limit carries a partial merged sum whose sign is meaningless.
fn key_is_complete(key: &[Ratio<i64>], vspec: &ValidatedSpec, power_limit: u32) -> bool {
    let wide =
        |q: Ratio<i64>| Ratio::<i128>::new_raw(i128::from(*q.numer()), i128::from(*q.denom()));
    for l in 0..vspec.rank() {
        let dir = vspec.direction(l);
        let j0 = dir.iter().position(|e| !e.is_zero()).expect("directions are nonzero");
        let r = wide(key[j0]) / wide(dir[j0].ratio());
        if *r.denom() != 1 || *r.numer() < 1 {
            continue;
        }
        let hits_key = key.iter().zip(dir).all(|(kj, aj)| wide(*kj) == wide(aj.ratio()) * r);
        if hits_key && *r.numer() > i128::from(power_limit) {
            return false;
        }
    }
    true
}

impl KeyTable {
    fn build(vspec: &ValidatedSpec, sigma: &[f64], power_limit: u32) -> Self {
        let phi = vspec.rank();
        let r_max = power_limit as usize;
        let mut map: BTreeMap<Vec<Ratio<i64>>, Vec<(u32, usize)>> = BTreeMap::new();
        for l in 0..phi {
            for r in 1..=power_limit {
                let key: Vec<Ratio<i64>> =
                    vspec.direction(l).iter().map(|e| e.scale(i64::from(r)).ratio()).collect();
                map.entry(key).or_default().push((r, l));
            }
        }
        let mut keys = Vec::with_capacity(map.len());
        let mut reps = Vec::with_capacity(map.len());
        let mut id_of = vec![usize::MAX; phi * r_max];
        for (id, (key, contributors)) in map.into_iter().enumerate() {
            for &(r, l) in &contributors {
                id_of[l * r_max + (r as usize - 1)] = id;
            }
            reps.push(*contributors.iter().min().unwrap());
            keys.push(key);
        }
        let keys_f64: Vec<Vec<f64>> = keys
            .iter()
            .map(|key| key.iter().map(|q| *q.numer() as f64 / *q.denom() as f64).collect())
            .collect();
        let exponents = keys_f64.iter().map(|key| dot(key, sigma)).collect();
        let complete =
            keys.iter().map(|key| key_is_complete(key, vspec, power_limit)).collect();
        KeyTable { keys, keys_f64, exponents, reps, id_of, complete }
    }

    fn len(&self) -> usize {
        self.keys.len()
    }
}

/// Accumulates the exact merged coefficients for one prime into `coefs`
/// (indexed by key id; caller resets between primes).
fn accumulate_prime(
    vspec: &ValidatedSpec,
    table: &KeyTable,
    p: u64,
    power_limit: u32,
    strict: bool,
    coefs: &mut [Coef],
) {
    let phi = vspec.rank();
    let eta = vspec.tuple_size();
    let r_max = power_limit as usize;
    for l in 0..phi {
        if strict {
            // alpha in {-1, 0, +1}: alpha^r is 0, 1, or the parity sign.
            let mut plus = 0i128; // count of alpha == +1
            let mut minus = 0i128; // count of alpha == -1
            for k in 0..eta {
                let alpha = vspec.scheme(l, k).alpha(p);
                if alpha == 1.0 {
                    plus += 1;
                } else if alpha == -1.0 {
                    minus += 1;
                }
            }
            if plus == 0 && minus == 0 {
                continue;
            }
            for r in 1..=power_limit {
                let sum_k = if r % 2 == 0 { plus + minus } else { plus - minus };
                if sum_k != 0 {
                    coefs[table.id_of[l * r_max + (r as usize - 1)]]
                        .add_fraction(sum_k, i128::from(r));
                }
            }
        } else {
            for k in 0..eta {
                let alpha = vspec.scheme(l, k).alpha(p);
                if alpha == 0.0 {
                    continue;
                }
                // binary64 coefficients are exact rationals; powers and
                // division by r stay exact in big-rational arithmetic.
                let base = BigRational::from_float(alpha).unwrap();
                let mut power = base.clone();
                for r in 1..=power_limit {
                    let term = &power / BigRational::from_integer(BigInt::from(r));
                    coefs[table.id_of[l * r_max + (r as usize - 1)]].add_big(&term);
                    if r < power_limit {
                        power *= &base;
                    }
                }
            }
        }
    }
}

/// Exact merged coefficients at one prime for every location key with
/// r <= power_limit, zero coefficients included, ordered by key.
pub fn merged_coefficient_terms(
    vspec: &ValidatedSpec,
    sigma: &[f64],
    p: u64,
    power_limit: u32,
) -> Vec<MergedTerm> {
    let table = KeyTable::build(vspec, sigma, power_limit);
    let mut coefs = vec![Coef::zero(); table.len()];
    accumulate_prime(vspec, &table, p, power_limit, vspec.is_strict(), &mut coefs);
    table
        .keys
        .iter()
        .zip(&table.reps)
        .zip(&coefs)
        .map(|((key, &(rep_r, rep_l)), coef)| MergedTerm {
            key: key.iter().map(|&q| Rat::from_ratio(q)).collect(),
            rep_r,
            rep_l: rep_l + 1,
            coefficient: coef.to_big(),
        })
        .collect()
}

/// Relative threshold below which merged atoms are dropped into the tail.
const ATOM_DROP_RELATIVE: f64 = 1e-16;

/// Enumerates all merged atoms with p <= P and r <= R. Atoms whose mass
/// falls below 1e-16 times the (unmerged) total absolute mass are dropped
/// and their absolute mass added to `omitted_tail` on top of the analytic
/// tail bound.
pub fn enumerate_atoms(
    vspec: &ValidatedSpec,
    sigma: &[f64],
    policy: &TruncationPolicy,
) -> Result<LevyMeasure> {
    policy.validate()?;
    let margin = convergence_margin(vspec, sigma)?;
    if margin <= 1.0 {
        return Err(Error::Domain(format!("convergence margin v = {margin} must exceed 1")));
    }
    let table = sieve(policy.prime_limit)?;
    let primes = &table.primes()[..table.count_leq(policy.prime_limit)];
    let n = primes.len();
    let phi = vspec.rank();
    let eta = vspec.tuple_size();
    let m = phi * eta;
    let strict = vspec.is_strict();
    let keys = KeyTable::build(vspec, sigma, policy.power_limit);

    let ln_p: Vec<f64> = primes.iter().map(|&p| (p as f64).ln()).collect();
    let w: Vec<f64> = (0..phi).map(|l| dot(vspec.direction_f64(l), sigma)).collect();

    // Pass 1: unmerged total absolute mass, for the drop threshold.
    let n_chunks = n.div_ceil(CHUNK);
    let partials: Vec<Kahan> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Kahan::new();
            for i in (c * CHUNK..((c + 1) * CHUNK).min(n)).rev() {
                for (l, &wl) in w.iter().enumerate() {
                    let x = (-wl * ln_p[i]).exp();
                    for k in 0..eta {
                        let alpha = vspec.scheme(l, k).alpha(primes[i]).abs();
                        if alpha == 0.0 {
                            continue;
                        }
                        let z = alpha * x;
                        let mut zp = z;
                        for r in 1..=policy.power_limit {
                            acc.add(zp / f64::from(r));
                            zp *= z;
                            if zp == 0.0 {
                                break;
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut total_abs_acc = Kahan::new();
    for partial in partials.into_iter().rev() {
        total_abs_acc.combine(partial);
    }
    let threshold = ATOM_DROP_RELATIVE * total_abs_acc.value();

    // Pass 2: exact merge per prime, one rounding per atom.
    struct ChunkOut {
        atoms: Vec<LevyAtom>,
        dropped: Kahan,
    }
    let chunk_outs: Vec<ChunkOut> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut out = ChunkOut { atoms: Vec::new(), dropped: Kahan::new() };
            let mut coefs = vec![Coef::zero(); keys.len()];
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let p = primes[i];
                for coef in coefs.iter_mut() {
                    *coef = Coef::zero();
                }
                accumulate_prime(vspec, &keys, p, policy.power_limit, strict, &mut coefs);
                for (id, coef) in coefs.iter().enumerate() {
                    if coef.is_zero() {
                        continue;
                    }
                    let mass = coef.to_f64() * (-keys.exponents[id] * ln_p[i]).exp();
                    if mass.abs() < threshold || mass == 0.0 {
                        out.dropped.add(mass.abs());
                        continue;
                    }
                    let (rep_r, rep_l) = keys.reps[id];
                    out.atoms.push(LevyAtom {
                        p,
                        r: rep_r,
                        l: rep_l + 1,
                        location: keys.keys_f64[id].iter().map(|&e| e * ln_p[i]).collect(),
                        mass,
                    });
                }
            }
            out
        })
        .collect();

    let mut atoms = Vec::with_capacity(chunk_outs.iter().map(|c| c.atoms.len()).sum());
    let mut dropped = Kahan::new();
    for mut chunk in chunk_outs {
        atoms.append(&mut chunk.atoms);
        dropped.combine(chunk.dropped);
    }

    let analytic_tail = tail_bound_with_pi(policy, margin, m, n)?;
    Ok(LevyMeasure {
        atoms,
        omitted_tail: analytic_tail + dropped.value(),
        sigma: sigma.to_vec(),
        policy: *policy,
        spec: vspec.spec().clone(),
    })
}

/// Outcome of the ascending exact-sign scan over merged coefficients.
pub(crate) struct CertifyScan {
    /// First atom (smallest prime, then smallest key) whose exact merged
    /// coefficient is negative, if any.
    pub first_negative: Option<LevyAtom>,
    /// Minimum materialized mass among nonzero merged atoms scanned
    /// (0.0 when the measure is empty); only meaningful without negatives.
    pub min_mass: f64,
}

/// Scans primes in ascending order and reports the first exactly negative
/// merged coefficient, or the smallest positive merged mass seen. Signs
/// are decided in exact rational arithmetic; the mass is rounded once.
/// Only complete keys are judged: a location some direction reaches only
/// beyond the power limit holds a partial sum (the limit cut one of the
/// colliding powers), and its sign says nothing about the true measure.
/// Complete keys collect every colliding power, so their merged
/// coefficients equal the untruncated measure's masses exactly.
pub(crate) fn certify_scan(
    vspec: &ValidatedSpec,
    sigma: &[f64],
    policy: &TruncationPolicy,
) -> Result<CertifyScan> {
    policy.validate()?;
    let margin = convergence_margin(vspec, sigma)?;
    if margin <= 1.0 {
        return Err(Error::Domain(format!("convergence margin v = {margin} must exceed 1")));
    }
    let table = sieve(policy.prime_limit)?;
    let keys = KeyTable::build(vspec, sigma, policy.power_limit);
    let strict = vspec.is_strict();
    let mut coefs = vec![Coef::zero(); keys.len()];
    let mut min_mass = f64::INFINITY;
    let mut saw_atom = false;
    for &p in table.primes() {
        let ln_p = (p as f64).ln();
        for coef in coefs.iter_mut() {
            *coef = Coef::zero();
        }
        accumulate_prime(vspec, &keys, p, policy.power_limit, strict, &mut coefs);
        for (id, coef) in coefs.iter().enumerate() {
            if !keys.complete[id] || coef.is_zero() {
                continue;
            }
            let mass = coef.to_f64() * (-keys.exponents[id] * ln_p).exp();
            if coef.is_negative() {
                let (rep_r, rep_l) = keys.reps[id];
                return Ok(CertifyScan {
                    first_negative: Some(LevyAtom {
                        p,
                        r: rep_r,
                        l: rep_l + 1,
                        location: keys.keys_f64[id].iter().map(|&e| e * ln_p).collect(),
                        mass,
                    }),
                    min_mass: 0.0,
                });
            }
            saw_atom = true;
            min_mass = min_mass.min(mass);
        }
    }
    Ok(CertifyScan { first_negative: None, min_mass: if saw_atom { min_mass } else { 0.0 } })
}

/// Signed sum of all atom masses (the compound Poisson rate when the
/// measure is nonnegative). Matches Re eval_log at sigma within twice the
/// omitted tail.
pub fn total_mass(measure: &LevyMeasure) -> f64 {
    let mut acc = Kahan::new();
    for atom in measure.atoms.iter().rev() {
        acc.add(atom.mass);
    }
    acc.value()
}

/// Sum of |mass| * |x|^k over atoms (Euclidean norm); finite for every k
/// and stable under truncation refinement.
pub fn absolute_moment(measure: &LevyMeasure, k: u32) -> f64 {
    let mut acc = Kahan::new();
    for atom in measure.atoms.iter().rev() {
        let norm = atom.location.iter().map(|x| x * x).sum::<f64>().sqrt();
        acc.add(atom.mass.abs() * norm.powi(k as i32));
    }
    acc.value()
}

/// Characteristic function rebuilt from the atoms:
/// exp( sum mass (e^{-i<t,x>} - 1) ). Exactly 1 at t = 0.
pub fn cf_from_atoms(measure: &LevyMeasure, t: &[f64]) -> Result<Complex64> {
    let d = measure.sigma.len();
    if t.len() != d {
        return Err(Error::Domain(format!("t has {} entries, expected d = {d}", t.len())));
    }
    let atoms = &measure.atoms;
    let n_chunks = atoms.len().div_ceil(CHUNK);
    let partials: Vec<KahanComplex> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = KahanComplex::new();
            for atom in atoms[c * CHUNK..((c + 1) * CHUNK).min(atoms.len())].iter().rev() {
                let theta = dot(&atom.location, t);
                let (sin, cos) = theta.sin_cos();
                acc.add(atom.mass * Complex64::new(cos - 1.0, -sin));
            }
            acc
        })
        .collect();
    let mut acc = KahanComplex::new();
    for partial in partials.into_iter().rev() {
        acc.combine(partial);
    }
    Ok(acc.value().exp())
}

/// Mixed cumulant of order `kappa` (a multi-index over the d coordinates,
/// 1 <= |kappa| <= 4): sum of mass * prod_j (-x_j)^{kappa_j}. The sign
/// follows the e^{-i<t,x>} convention: the random variable jumps by -x.
pub fn cumulant(measure: &LevyMeasure, kappa: &[u32]) -> Result<f64> {
    let d = measure.sigma.len();
    if kappa.len() != d {
        return Err(Error::Domain(format!(
            "kappa has {} entries, expected d = {d}",
            kappa.len()
        )));
    }
    let order: u32 = kappa.iter().sum();
    if order == 0 {
        return Err(Error::Domain("cumulant order must be at least 1".into()));
    }
    if order > 4 {
        return Err(Error::Domain(format!("cumulant order {order} exceeds 4")));
    }
    let mut acc = Kahan::new();
    for atom in measure.atoms.iter().rev() {
        let mut term = atom.mass;
        for (x, &k) in atom.location.iter().zip(kappa) {
            term *= (-x).powi(k as i32);
        }
        acc.add(term);
    }
    Ok(acc.value())
}

/// Generating triplet in the compound Poisson gauge: (0, measure, 0).
/// A negative atom means the measure is not a Lévy measure, so the
/// distribution has no such representation.
pub fn lk_triplet(measure: &LevyMeasure) -> Result<LkTriplet<'_>> {
    if let Some(atom) = measure.atoms.iter().find(|a| a.mass < 0.0) {
        return Err(Error::NegativeMass(format!(
            "atom at p = {}, r = {}, l = {} has mass {}; no compound Poisson representation",
            atom.p, atom.r, atom.l, atom.mass
        )));
    }
    let d = measure.sigma.len();
    Ok(LkTriplet {
        gaussian: vec![vec![0.0; d]; d],
        levy: measure,
        drift: vec![0.0; d],
    })
}

/// Writes atoms as CSV with header `p,r,l,mass,x_1,...,x_d`, using
/// shortest round-trip decimal form for the binary64 fields.
pub fn export_csv<W: io::Write>(measure: &LevyMeasure, mut w: W) -> Result<()> {
    let d = measure.sigma.len();
    write!(w, "p,r,l,mass")?;
    for j in 1..=d {
        write!(w, ",x_{j}")?;
    }
    writeln!(w)?;
    for atom in &measure.atoms {
        write!(w, "{},{},{},{}", atom.p, atom.r, atom.l, atom.mass)?;
        for x in &atom.location {
            write!(w, ",{x}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Side-channel JSON for an atom export.
pub fn sidecar_json(measure: &LevyMeasure) -> serde_json::Value {
    serde_json::json!({
        "total_mass": total_mass(measure),
        "omitted_tail": measure.omitted_tail,
        "sigma": measure.sigma,
        "policy": measure.policy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::RealCharacter;
    use crate::product::{
        eval_log, normalized_cf, validate, CoefficientScheme, EvalPoint, ProductSpec,
    };

    fn spec(
        directions: Vec<Vec<Rat>>,
        coefficients: Vec<Vec<CoefficientScheme>>,
    ) -> ValidatedSpec {
        let d = directions[0].len();
        let tuple_size = coefficients[0].len();
        validate(ProductSpec { d, directions, tuple_size, coefficients, direction_mode_hint: None })
            .unwrap()
    }

    fn riemann() -> ValidatedSpec {
        spec(vec![vec![Rat::integer(1)]], vec![vec![CoefficientScheme::constant(1.0)]])
    }

    fn policy(p: u64, r: u32) -> TruncationPolicy {
        TruncationPolicy::new(p, r, 1e-4).unwrap()
    }

    #[test]
    fn riemann_atom_masses() {
        let measure = enumerate_atoms(&riemann(), &[2.0], &policy(100, 6)).unwrap();
        let at = |p: u64, r: u32| {
            measure.atoms.iter().find(|a| a.p == p && a.r == r).expect("atom present")
        };
        assert!((at(2, 1).mass - 0.25).abs() < 1e-15);
        assert!((at(2, 2).mass - 0.03125).abs() < 1e-15);
        assert!((at(3, 1).mass - 1.0 / 9.0).abs() < 1e-15);
        assert!((at(5, 3).mass - 5f64.powi(-6) / 3.0).abs() < 1e-18);
        assert!((at(2, 1).location[0] - 2f64.ln()).abs() < 1e-15);
        assert!((at(3, 2).location[0] - 2.0 * 3f64.ln()).abs() < 1e-14);
        for pair in measure.atoms.windows(2) {
            assert!(pair[0].p <= pair[1].p, "atoms ordered by prime");
        }
    }

    #[test]
    fn zeroed_prime_leaves_no_atoms() {
        let odd = spec(
            vec![vec![Rat::integer(1)]],
            vec![vec![CoefficientScheme::Table {
                default: 1.0,
                overrides: BTreeMap::from([(2u64, 0.0)]),
            }]],
        );
        let measure = enumerate_atoms(&odd, &[2.0], &policy(100, 6)).unwrap();
        assert!(measure.atoms.iter().all(|a| a.p != 2));
        assert!(measure.atoms.iter().all(|a| a.mass != 0.0));
    }

    #[test]
    fn colliding_locations_merge_exactly() {
        // Directions [1] and [2]: the key 2 receives 1/2 from (l=1, r=2)
        // and 1 from (l=2, r=1), so the merged coefficient is exactly 3/2.
        let two_dir = spec(
            vec![vec![Rat::integer(1)], vec![Rat::integer(2)]],
            vec![
                vec![CoefficientScheme::constant(1.0)],
                vec![CoefficientScheme::constant(1.0)],
            ],
        );
        let terms = merged_coefficient_terms(&two_dir, &[2.0], 7, 4);
        let key2 = terms.iter().find(|t| t.key == vec![Rat::integer(2)]).unwrap();
        assert_eq!(key2.coefficient, BigRational::new(BigInt::from(3), BigInt::from(2)));
        assert_eq!((key2.rep_r, key2.rep_l), (1, 2));

        let measure = enumerate_atoms(&two_dir, &[2.0], &policy(50, 4)).unwrap();
        let atom = measure
            .atoms
            .iter()
            .find(|a| a.p == 7 && (a.location[0] - 2.0 * 7f64.ln()).abs() < 1e-12)
            .unwrap();
        assert!((atom.mass - 1.5 * 7f64.powi(-4)).abs() < 1e-15);
    }

    #[test]
    fn opposite_coefficients_cancel_exactly() {
        // Row (1, -1): odd powers cancel, even powers double.
        let pair = spec(
            vec![vec![Rat::integer(1)]],
            vec![vec![CoefficientScheme::constant(1.0), CoefficientScheme::constant(-1.0)]],
        );
        let terms = merged_coefficient_terms(&pair, &[2.0], 5, 4);
        for term in &terms {
            let r = term.key[0].numer();
            if r % 2 == 1 {
                assert!(term.coefficient.is_zero(), "odd power should cancel");
            } else {
                assert_eq!(
                    term.coefficient,
                    BigRational::new(BigInt::from(2), BigInt::from(r))
                );
            }
        }
        let measure = enumerate_atoms(&pair, &[2.0], &policy(50, 5)).unwrap();
        assert!(measure.atoms.iter().all(|a| a.mass != 0.0));
    }

    #[test]
    fn character_row_matches_parity_closed_form() {
        // 1 and chi mod 4: at p = 3 (chi = -1) odd powers vanish and even
        // powers give 2/r; at p = 5 (chi = +1) every power gives 2/r.
        let dedekind = spec(
            vec![vec![Rat::integer(1)]],
            vec![vec![
                CoefficientScheme::constant(1.0),
                CoefficientScheme::Character(RealCharacter::mod_four()),
            ]],
        );
        for (p, parity_only) in [(3u64, true), (5u64, false)] {
            for term in merged_coefficient_terms(&dedekind, &[2.0], p, 6) {
                let r = term.key[0].numer();
                let expect = if parity_only && r % 2 == 1 {
                    BigRational::zero()
                } else {
                    BigRational::new(BigInt::from(2), BigInt::from(r))
                };
                assert_eq!(term.coefficient, expect, "p = {p}, r = {r}");
            }
        }
    }

    #[test]
    fn non_strict_coefficients_use_exact_big_rationals() {
        let half = spec(vec![vec![Rat::integer(1)]], vec![vec![CoefficientScheme::constant(0.5)]]);
        let terms = merged_coefficient_terms(&half, &[2.0], 3, 3);
        // 0.5 is exactly representable: coefficient at r is (1/2)^r / r.
        for term in &terms {
            let r = term.key[0].numer();
            assert_eq!(
                term.coefficient,
                BigRational::new(BigInt::from(1), BigInt::from(r) * BigInt::from(2).pow(r as u32))
            );
        }
    }

    #[test]
    fn total_mass_matches_log_at_sigma() {
        let vspec = spec(
            vec![vec![Rat::integer(1)]],
            vec![vec![CoefficientScheme::constant(1.0), CoefficientScheme::constant(-1.0)]],
        );
        let p = policy(10_000, 12);
        let measure = enumerate_atoms(&vspec, &[1.8], &p).unwrap();
        let (log, _) = eval_log(
            &vspec,
            &EvalPoint { sigma: vec![1.8], t: vec![0.0] },
            &p,
        )
        .unwrap();
        assert!((total_mass(&measure) - log.re).abs() <= 2.0 * measure.omitted_tail);
    }

    #[test]
    fn cf_from_atoms_matches_normalized_cf() {
        let vspec = riemann();
        let p = policy(10_000, 12);
        let measure = enumerate_atoms(&vspec, &[2.0], &p).unwrap();
        assert_eq!(cf_from_atoms(&measure, &[0.0]).unwrap(), Complex64::new(1.0, 0.0));
        for t in [0.5, 1.0, 2.0, 5.0] {
            let from_atoms = cf_from_atoms(&measure, &[t]).unwrap();
            let direct = normalized_cf(&vspec, &[2.0], &[t], &p).unwrap();
            assert!(
                (from_atoms - direct).norm() <= 4.0 * measure.omitted_tail,
                "t = {t}: {from_atoms} vs {direct}"
            );
            assert!(from_atoms.norm() <= 1.0 + 4.0 * measure.omitted_tail);
        }
    }

    #[test]
    fn first_cumulant_matches_prime_power_sum() {
        let measure = enumerate_atoms(&riemann(), &[2.0], &policy(1000, 10)).unwrap();
        let direct: f64 = sieve(1000)
            .unwrap()
            .primes()
            .iter()
            .flat_map(|&p| (1..=10).map(move |r| -((p as f64).ln()) * (p as f64).powi(-2 * r)))
            .sum();
        assert!((cumulant(&measure, &[1]).unwrap() - direct).abs() < 1e-12);
        assert!(cumulant(&measure, &[2]).unwrap() > 0.0);
        assert!(matches!(cumulant(&measure, &[0]), Err(Error::Domain(_))));
        assert!(matches!(cumulant(&measure, &[5]), Err(Error::Domain(_))));
    }

    #[test]
    fn triplet_requires_nonnegative_masses() {
        let measure = enumerate_atoms(&riemann(), &[2.0], &policy(100, 4)).unwrap();
        let triplet = lk_triplet(&measure).unwrap();
        assert_eq!(triplet.gaussian, vec![vec![0.0]]);
        assert_eq!(triplet.drift, vec![0.0]);

        let negative = spec(
            vec![vec![Rat::integer(1)]],
            vec![vec![CoefficientScheme::constant(-1.0)]],
        );
        let measure = enumerate_atoms(&negative, &[2.0], &policy(100, 4)).unwrap();
        assert!(matches!(lk_triplet(&measure), Err(Error::NegativeMass(_))));
    }

    #[test]
    fn csv_export_round_trips_masses() {
        let measure = enumerate_atoms(&riemann(), &[2.0], &policy(20, 3)).unwrap();
        let mut buffer = Vec::new();
        export_csv(&measure, &mut buffer).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("p,r,l,mass,x_1"));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first[0], "2");
        assert_eq!(first[3].parse::<f64>().unwrap(), measure.atoms[0].mass);
        assert_eq!(first[4].parse::<f64>().unwrap(), measure.atoms[0].location[0]);

        let sidecar = sidecar_json(&measure);
        assert!(sidecar["total_mass"].is_f64());
        assert_eq!(sidecar["sigma"], serde_json::json!([2.0]));
    }

    #[test]
    fn absolute_moments_grow_monotonically_under_refinement() {
        let coarse = enumerate_atoms(&riemann(), &[2.0], &policy(100, 4)).unwrap();
        let fine = enumerate_atoms(&riemann(), &[2.0], &policy(2000, 8)).unwrap();
        for k in 0..=8 {
            assert!(absolute_moment(&coarse, k) <= absolute_moment(&fine, k) + 1e-15);
        }
    }
}
