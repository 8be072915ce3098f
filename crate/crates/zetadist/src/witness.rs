//! Constructive disproof search: find t0 with D(t0) = log|f_sigma(t0)| > 0,
//! certifying that the normalized product is not a characteristic function
//! (a characteristic function never exceeds modulus 1).
//!
//! Existence of such t0 follows from simultaneous-approximation arguments,
//! which give no effective bound on |t0|. The search therefore scans a
//! deterministic grid along a reduced direction, refines the best cells,
//! and certifies candidates against the exact series evaluation with its
//! truncation tail; the certificate is the evaluated D itself, never the
//! phase-alignment heuristic that suggested the candidate.

use num_rational::{BigRational, Ratio};
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::sieve;
use crate::classify::DirectionCondition;
use crate::error::{Error, Result};
use crate::levy::enumerate_atoms;
use crate::product::{
    convergence_margin, dot, CfEvaluator, TruncationPolicy, ValidatedSpec,
};

/// Largest scalar parameter the grid may reach.
const T_MAX: f64 = 1e7;
/// Prime cutoff parameter for phase targets: primes up to 2K are targeted.
const DEFAULT_TARGET_K: u32 = 4;
/// Grid cells refined and certified, best first.
const CANDIDATES: usize = 48;
/// Golden-section iterations per refined candidate.
const REFINE_ITERS: u32 = 40;
/// A returned Kronecker witness must have |p^{iT} - 1| below this for
/// every plus target.
const PLUS_RESIDUAL_GATE: f64 = 0.5;
/// Cheap truncation used for the scan objective; certification always
/// runs at the caller's policy.
const SCAN_PRIME_LIMIT: u64 = 2_000;
const SCAN_POWER_LIMIT: u32 = 8;
/// Grid indices are processed in fixed chunks so the reduction is
/// deterministic regardless of worker count.
const SCAN_CHUNK: usize = 8192;
/// Best cells kept per chunk before the global merge.
const KEEP_PER_CHUNK: usize = 4;

/// Phase-alignment targets: the witness parameter T should take p^{iT}
/// near +1 on plus primes and q^{iT} near -1 on minus primes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PhaseTargets {
    pub plus_primes: Vec<u64>,
    pub minus_primes: Vec<u64>,
    /// Primes up to 2k were considered.
    pub k: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Grid-maximize D directly.
    DirectMax,
    /// Grid-minimize the phase residual toward the targets, then evaluate
    /// D at the aligned candidates.
    KroneckerTargets,
}

/// A certified point with |f_sigma(t0)| > 1.
#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub t0: Vec<f64>,
    /// Scalar search parameter: t0 = T v0.
    #[serde(rename = "T")]
    pub t_scalar: f64,
    pub v0: Vec<f64>,
    /// D(t0) = log|f_sigma(t0)| at the certification policy.
    #[serde(rename = "D")]
    pub d_value: f64,
    /// d_value minus the evaluation tail; positive means certified.
    pub certified_margin: f64,
    pub policy: TruncationPolicy,
    pub strategy: Strategy,
    pub budget_used: u64,
}

/// Search result: the witness when one was certified, plus what the
/// certification stage observed either way.
#[derive(Debug, Clone, Serialize)]
pub struct SearchOutcome {
    pub witness: Option<Witness>,
    /// Largest certified-path D seen (0 when nothing was certified).
    pub best_d: f64,
    /// Scalar parameter where best_d was seen.
    pub best_t: f64,
    pub evaluations: u64,
}

/// D(t) = log|f_sigma(t)| = Re log Z(sigma + it) - Re log Z(sigma), with
/// the evaluation tail (both log evaluations share one truncation bound).
/// D(0) = 0 exactly: the two evaluations are bit-identical at t = 0.
pub fn objective_d(
    vspec: &ValidatedSpec,
    sigma: &[f64],
    t: &[f64],
    policy: &TruncationPolicy,
) -> Result<(f64, f64)> {
    let ev = CfEvaluator::new(vspec, sigma, policy)?;
    let d = (ev.log_at(t)? - ev.log_sigma()).re;
    Ok((d, 2.0 * ev.tail()))
}

fn wide(q: Ratio<i64>) -> Ratio<i128> {
    Ratio::new_raw(i128::from(*q.numer()), i128::from(*q.denom()))
}

/// Exact merged coefficient sign data at the first-power locations a_l of
/// one prime. Strict coefficients only: alpha^r is decided by parity.
fn first_power_signs(vspec: &ValidatedSpec, p: u64) -> (bool, bool) {
    let phi = vspec.rank();
    let eta = vspec.tuple_size();
    let counts: Vec<(i128, i128)> = (0..phi)
        .map(|l| {
            let mut plus = 0i128;
            let mut minus = 0i128;
            for k in 0..eta {
                let alpha = vspec.scheme(l, k).alpha(p);
                if alpha == 1.0 {
                    plus += 1;
                } else if alpha == -1.0 {
                    minus += 1;
                }
            }
            (plus, minus)
        })
        .collect();

    let mut any_negative = false;
    let mut any_positive = false;
    for l in 0..phi {
        // Merged coefficient at location a_l: every row lp reaching a_l
        // with an integer power rp contributes (1/rp) sum_k alpha^rp.
        let target = vspec.direction(l);
        let mut coefficient = Ratio::<i128>::zero();
        for (lp, &(plus, minus)) in counts.iter().enumerate() {
            let dir = vspec.direction(lp);
            let j0 = dir.iter().position(|e| !e.is_zero()).expect("directions are nonzero");
            let rp = wide(target[j0].ratio()) / wide(dir[j0].ratio());
            if *rp.denom() != 1 || *rp.numer() < 1 {
                continue;
            }
            let hits = target.iter().zip(dir).all(|(tj, aj)| wide(tj.ratio()) == wide(aj.ratio()) * rp);
            if !hits {
                continue;
            }
            let sum_k = if rp.numer() % 2 == 0 { plus + minus } else { plus - minus };
            coefficient += Ratio::new(sum_k, *rp.numer());
        }
        if coefficient < Ratio::zero() {
            any_negative = true;
        } else if coefficient > Ratio::zero() {
            any_positive = true;
        }
    }
    (any_negative, any_positive)
}

/// Splits the primes up to 2k by the sign of their first-power merged
/// mass: negatives become minus targets, positives plus targets. The
/// sets are disjoint; a prime whose merged first-power coefficients are
/// all zero is targeted by neither.
pub fn derive_targets(vspec: &ValidatedSpec, sigma: &[f64], k: u32) -> Result<PhaseTargets> {
    if !vspec.is_strict() {
        return Err(Error::NonStrict(
            "phase targets require coefficients restricted to {-1, 0, 1}".into(),
        ));
    }
    if k == 0 {
        return Err(Error::Domain("target cutoff k must be positive".into()));
    }
    let margin = convergence_margin(vspec, sigma)?;
    if margin <= 1.0 {
        return Err(Error::Domain(format!("convergence margin v = {margin} must exceed 1")));
    }
    let mut plus_primes = Vec::new();
    let mut minus_primes = Vec::new();
    for &p in sieve(u64::from(2 * k))?.primes() {
        let (negative, positive) = first_power_signs(vspec, p);
        if negative {
            minus_primes.push(p);
        } else if positive {
            plus_primes.push(p);
        }
    }
    if minus_primes.is_empty() {
        return Err(Error::NoNegativeTargets(format!(
            "no prime up to {} contributes negative first-power mass; nothing to witness",
            2 * k
        )));
    }
    Ok(PhaseTargets { plus_primes, minus_primes, k })
}

/// Reduces the search to one dimension: t = T v0, so <a_l, t> = T omega_l.
///
/// - Independent directions: omega = (1, sqrt 2, sqrt 3, sqrt 5, ...) and
///   v0 solves <a_l, v0> = omega_l via the exact inverse Gram matrix.
/// - Declared-ratio directions: v0 = a_1 / <a_1, a_1>, omega_l the
///   declared ratios psi_l / psi_1.
/// - Collinear-rational: same v0, omega_l the exact rational ratios.
/// - Mixed: same v0, omega_l = <a_l, v0> (projection onto the first
///   direction; phases beyond its span are simply not steered).
pub fn reduce_direction(
    vspec: &ValidatedSpec,
    mode: &DirectionCondition,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let phi = vspec.rank();
    let d = vspec.d();
    let first_direction_v0 = |vspec: &ValidatedSpec| -> Vec<f64> {
        let a1 = vspec.direction_f64(0);
        let norm_sq = dot(a1, a1);
        a1.iter().map(|&e| e / norm_sq).collect()
    };
    match mode {
        DirectionCondition::Li { .. } => {
            let omega_primes = sieve(400)?;
            let mut omegas = vec![1.0];
            for l in 1..phi {
                omegas.push((omega_primes.primes()[l - 1] as f64).sqrt());
            }
            let rows: Vec<Vec<BigRational>> = (0..phi)
                .map(|l| vspec.direction(l).iter().map(|e| e.to_big()).collect())
                .collect();
            let inv_gram = invert_gram(&rows)
                .ok_or_else(|| Error::Internal("direction Gram matrix is singular".into()))?;
            // y = gram^{-1} omega, v0 = A^T y; the only inexact steps are
            // the final binary64 products.
            let y: Vec<f64> = (0..phi)
                .map(|l| (0..phi).map(|j| big_to_f64(&inv_gram[l][j]) * omegas[j]).sum())
                .collect();
            let mut v0 = vec![0.0; d];
            for (l, &yl) in y.iter().enumerate() {
                for (j, &alj) in vspec.direction_f64(l).iter().enumerate() {
                    v0[j] += alj * yl;
                }
            }
            for (l, omega) in omegas.iter().enumerate() {
                let got = dot(vspec.direction_f64(l), &v0);
                if (got - omega).abs() > 1e-12 * omega.abs().max(1.0) {
                    return Err(Error::Internal(format!(
                        "direction reduction failed: <a_{}, v0> = {got} but omega = {omega}",
                        l + 1,
                    )));
                }
            }
            Ok((v0, omegas))
        }
        DirectionCondition::Lr { psis, .. } => {
            let omegas = psis.iter().map(|&psi| psi / psis[0]).collect();
            Ok((first_direction_v0(vspec), omegas))
        }
        DirectionCondition::CollinearRational { ratios } => {
            let omegas = ratios.iter().map(|c| c.to_f64()).collect();
            Ok((first_direction_v0(vspec), omegas))
        }
        DirectionCondition::Mixed { .. } => {
            let v0 = first_direction_v0(vspec);
            let omegas = (0..phi).map(|l| dot(vspec.direction_f64(l), &v0)).collect();
            Ok((v0, omegas))
        }
    }
}

/// Exact inverse of the phi x phi Gram matrix A A^T by Gauss-Jordan.
fn invert_gram(rows: &[Vec<BigRational>]) -> Option<Vec<Vec<BigRational>>> {
    let phi = rows.len();
    let mut aug: Vec<Vec<BigRational>> = (0..phi)
        .map(|i| {
            let mut row: Vec<BigRational> = (0..phi)
                .map(|j| rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum())
                .collect();
            for j in 0..phi {
                row.push(if i == j { BigRational::one() } else { BigRational::zero() });
            }
            row
        })
        .collect();
    for col in 0..phi {
        let pivot = (col..phi).find(|&r| !aug[r][col].is_zero())?;
        aug.swap(col, pivot);
        let scale = aug[col][col].clone();
        for entry in aug[col].iter_mut() {
            *entry /= &scale;
        }
        let pivot_row = aug[col].clone();
        for (r, row) in aug.iter_mut().enumerate() {
            if r == col || row[col].is_zero() {
                continue;
            }
            let factor = row[col].clone();
            for (x, pv) in row.iter_mut().zip(&pivot_row) {
                *x -= &factor * pv;
            }
        }
    }
    Some(aug.into_iter().map(|row| row[phi..].to_vec()).collect())
}

fn big_to_f64(q: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    q.to_f64().expect("finite rational")
}

/// Top-k cells by (score descending, T ascending).
fn push_best(best: &mut Vec<(f64, f64)>, score: f64, t: f64, keep: usize) {
    let pos = best
        .iter()
        .position(|&(s, bt)| score > s || (score == s && t < bt))
        .unwrap_or(best.len());
    if pos < keep {
        best.insert(pos, (score, t));
        best.truncate(keep);
    }
}

fn golden_max(
    mut g: impl FnMut(f64) -> f64,
    mut a: f64,
    mut b: f64,
    iters: u32,
) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut gc = g(c);
    let mut gd = g(d);
    for _ in 0..iters {
        if gc >= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - INVPHI * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + INVPHI * (b - a);
            gd = g(d);
        }
    }
    if gc >= gd {
        (c, gc)
    } else {
        (d, gd)
    }
}

/// Searches for a witness along the reduced direction within the
/// evaluation budget. The grid stage uses a cheap truncation of the atom
/// series; every returned value is re-evaluated and certified at `policy`.
/// Deterministic for fixed (strategy, budget, policy) regardless of
/// worker count: grid chunks are merged in index order and candidates are
/// certified lowest T first.
pub fn search(
    vspec: &ValidatedSpec,
    sigma: &[f64],
    strategy: Strategy,
    budget: u64,
    policy: &TruncationPolicy,
) -> Result<SearchOutcome> {
    if budget == 0 {
        return Err(Error::Domain("search budget must be positive".into()));
    }
    let mode = crate::classify::direction_condition(vspec);
    let (v0, _omegas) = reduce_direction(vspec, &mode)?;

    // Cheap scan objective: D rebuilt from the atom series at a reduced
    // truncation. Identical regrouping of the same series, so it tracks
    // the exact objective up to the scan truncation's own tail.
    let scan_policy = TruncationPolicy::new(
        SCAN_PRIME_LIMIT.min(policy.prime_limit),
        SCAN_POWER_LIMIT.min(policy.power_limit),
        policy.target_tail_tol,
    )?;
    let measure = enumerate_atoms(vspec, sigma, &scan_policy)?;
    let rates: Vec<f64> = measure.atoms.iter().map(|atom| dot(&v0, &atom.location)).collect();
    let masses: Vec<f64> = measure.atoms.iter().map(|atom| atom.mass).collect();
    let d_scan = |t: f64| -> f64 {
        let mut sum = 0.0;
        for (&u, &m) in rates.iter().zip(&masses) {
            sum += m * ((t * u).cos() - 1.0);
        }
        sum
    };

    // Grid step bounded by the Lipschitz constant of the scan objective:
    // |dD/dT| <= sum |mass| |<v0, x>|.
    let lipschitz: f64 = rates.iter().zip(&masses).map(|(&u, &m)| (m * u).abs()).sum();
    let step = (0.5 / lipschitz.max(1e-12)).clamp(1e-4, 10.0);

    let targets = match strategy {
        Strategy::KroneckerTargets => Some(derive_targets(vspec, sigma, DEFAULT_TARGET_K)?),
        Strategy::DirectMax => None,
    };
    let log_plus: Vec<f64> = targets
        .as_ref()
        .map(|tg| tg.plus_primes.iter().map(|&p| (p as f64).ln()).collect())
        .unwrap_or_default();
    let log_minus: Vec<f64> = targets
        .as_ref()
        .map(|tg| tg.minus_primes.iter().map(|&p| (p as f64).ln()).collect())
        .unwrap_or_default();
    // Residual sum_plus |p^{iT}-1|^2 + sum_minus |q^{iT}+1|^2, via
    // |e^{ix} -+ 1|^2 = 2 -+ 2 cos x.
    let residual = |t: f64| -> f64 {
        let plus: f64 = log_plus.iter().map(|&lp| 2.0 - 2.0 * (t * lp).cos()).sum();
        let minus: f64 = log_minus.iter().map(|&lq| 2.0 + 2.0 * (t * lq).cos()).sum();
        plus + minus
    };
    let passes_gate = |t: f64| -> bool {
        log_plus
            .iter()
            .all(|&lp| 2.0 - 2.0 * (t * lp).cos() < PLUS_RESIDUAL_GATE * PLUS_RESIDUAL_GATE)
    };

    // Stage 1: deterministic grid, 80% of the budget, T = (j+1) step.
    let grid_points = ((budget as f64 * 0.8) as u64)
        .min((T_MAX / step).ceil() as u64)
        .max(1) as usize;
    let score = |t: f64| -> f64 {
        match strategy {
            Strategy::DirectMax => d_scan(t),
            Strategy::KroneckerTargets => -residual(t),
        }
    };
    let chunk_count = grid_points.div_ceil(SCAN_CHUNK);
    let per_chunk: Vec<Vec<(f64, f64)>> = (0..chunk_count)
        .into_par_iter()
        .map(|ci| {
            let lo = ci * SCAN_CHUNK;
            let hi = grid_points.min(lo + SCAN_CHUNK);
            let mut best = Vec::with_capacity(KEEP_PER_CHUNK);
            for j in lo..hi {
                let t = (j + 1) as f64 * step;
                push_best(&mut best, score(t), t, KEEP_PER_CHUNK);
            }
            best
        })
        .collect();
    let mut evaluations = grid_points as u64;

    let mut cells: Vec<(f64, f64)> = per_chunk.into_iter().flatten().collect();
    cells.sort_by(|a, b| {
        b.0.partial_cmp(&a.0).expect("finite scores").then(a.1.partial_cmp(&b.1).unwrap())
    });
    cells.truncate(CANDIDATES);
    if matches!(strategy, Strategy::KroneckerTargets) {
        cells.retain(|&(_, t)| passes_gate(t));
    }

    // Stage 2: golden-section refinement of D around each kept cell.
    let mut candidates: Vec<f64> = Vec::with_capacity(cells.len());
    for &(_, t) in &cells {
        if evaluations + u64::from(REFINE_ITERS) + 2 > budget {
            break;
        }
        let mut used = 0u64;
        let (refined, _) = golden_max(
            |x| {
                used += 1;
                d_scan(x)
            },
            (t - step).max(step * 1e-3),
            t + step,
            REFINE_ITERS,
        );
        evaluations += used;
        let accepted = match strategy {
            // Refinement must not drag a Kronecker candidate off its
            // phase alignment; fall back to the grid cell if it does.
            Strategy::KroneckerTargets if !passes_gate(refined) => t,
            _ => refined,
        };
        candidates.push(accepted);
    }
    candidates.sort_by(|a, b| a.partial_cmp(b).expect("finite parameters"));
    candidates.dedup();

    // Stage 3: certification at the caller's policy, lowest T first.
    let ev = CfEvaluator::new(vspec, sigma, policy)?;
    let tail = 2.0 * ev.tail();
    let mut best_d = 0.0;
    let mut best_t = 0.0;
    let mut witness = None;
    for &t in &candidates {
        if evaluations >= budget {
            break;
        }
        let t0: Vec<f64> = v0.iter().map(|&e| e * t).collect();
        let d_value = (ev.log_at(&t0)? - ev.log_sigma()).re;
        evaluations += 1;
        if d_value > best_d {
            best_d = d_value;
            best_t = t;
        }
        let certified_margin = d_value - tail;
        if certified_margin > 0.0 {
            witness = Some(Witness {
                t0,
                t_scalar: t,
                v0: v0.clone(),
                d_value,
                certified_margin,
                policy: *policy,
                strategy,
                budget_used: evaluations,
            });
            break;
        }
    }
    Ok(SearchOutcome { witness, best_d, best_t, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::RealCharacter;
    use crate::product::{validate, CoefficientScheme, ProductSpec, Rat};
    use std::collections::BTreeMap;

    fn spec_of(
        directions: Vec<Vec<Rat>>,
        coefficients: Vec<Vec<CoefficientScheme>>,
    ) -> ValidatedSpec {
        let d = directions[0].len();
        let tuple_size = coefficients[0].len();
        validate(ProductSpec { d, directions, tuple_size, coefficients, direction_mode_hint: None })
            .unwrap()
    }

    fn riemann() -> ValidatedSpec {
        spec_of(vec![vec![Rat::integer(1)]], vec![vec![CoefficientScheme::constant(1.0)]])
    }

    fn l1() -> ValidatedSpec {
        spec_of(
            vec![vec![Rat::integer(1)]],
            vec![vec![CoefficientScheme::Table {
                default: 1.0,
                overrides: BTreeMap::from([(2u64, -1.0)]),
            }]],
        )
    }

    fn chi4_times_zeta_2s() -> ValidatedSpec {
        spec_of(
            vec![vec![Rat::integer(1)], vec![Rat::integer(2)]],
            vec![
                vec![CoefficientScheme::Character(RealCharacter::mod_four())],
                vec![CoefficientScheme::constant(1.0)],
            ],
        )
    }

    #[test]
    fn objective_is_zero_at_origin_and_symmetric() {
        let vspec = riemann();
        let policy = TruncationPolicy::new(10_000, 10, 1e-3).unwrap();
        let (d0, tail) = objective_d(&vspec, &[2.0], &[0.0], &policy).unwrap();
        assert_eq!(d0, 0.0);
        assert!(tail > 0.0);

        let (dp, _) = objective_d(&vspec, &[2.0], &[1.7], &policy).unwrap();
        let (dm, _) = objective_d(&vspec, &[2.0], &[-1.7], &policy).unwrap();
        assert_eq!(dp, dm);
        // A characteristic function keeps D <= 0 away from zero too.
        assert!(dp < 0.0);
    }

    #[test]
    fn targets_for_override_and_collinear_specs() {
        let targets = derive_targets(&l1(), &[2.0], 4).unwrap();
        assert_eq!(targets.minus_primes, vec![2]);
        assert_eq!(targets.plus_primes, vec![3, 5, 7]);

        // chi4(s) zeta(2s): q = 3 mod 4 negative at location a_1; p = 2
        // enters positively through the second row's first power.
        let targets = derive_targets(&chi4_times_zeta_2s(), &[2.0], 4).unwrap();
        assert_eq!(targets.minus_primes, vec![3, 7]);
        assert_eq!(targets.plus_primes, vec![2, 5]);

        assert!(matches!(
            derive_targets(&riemann(), &[2.0], 4),
            Err(Error::NoNegativeTargets(_))
        ));
    }

    #[test]
    fn reduction_solves_independent_directions() {
        let vspec = spec_of(
            vec![
                vec![Rat::integer(1), Rat::integer(0)],
                vec![Rat::integer(1), Rat::integer(1)],
            ],
            vec![
                vec![CoefficientScheme::constant(1.0)],
                vec![CoefficientScheme::constant(1.0)],
            ],
        );
        let mode = crate::classify::direction_condition(&vspec);
        let (v0, omegas) = reduce_direction(&vspec, &mode).unwrap();
        assert_eq!(omegas, vec![1.0, 2f64.sqrt()]);
        assert!((v0[0] - 1.0).abs() < 1e-12);
        assert!((v0[1] - (2f64.sqrt() - 1.0)).abs() < 1e-12);
        for (l, &omega) in omegas.iter().enumerate() {
            assert!((dot(vspec.direction_f64(l), &v0) - omega).abs() <= 1e-12);
        }
    }

    #[test]
    fn reduction_handles_single_and_collinear_directions() {
        let single = spec_of(
            vec![vec![Rat::integer(2)]],
            vec![vec![CoefficientScheme::constant(1.0)]],
        );
        let mode = crate::classify::direction_condition(&single);
        let (v0, omegas) = reduce_direction(&single, &mode).unwrap();
        assert_eq!(omegas, vec![1.0]);
        assert!((v0[0] - 0.5).abs() < 1e-15);

        let collinear = chi4_times_zeta_2s();
        let mode = crate::classify::direction_condition(&collinear);
        let (v0, omegas) = reduce_direction(&collinear, &mode).unwrap();
        assert_eq!(v0, vec![1.0]);
        assert_eq!(omegas, vec![1.0, 2.0]);
    }

    #[test]
    fn search_certifies_override_witness() {
        let vspec = l1();
        let policy = TruncationPolicy::default_for_margin(2.0).unwrap();
        let outcome =
            search(&vspec, &[2.0], Strategy::KroneckerTargets, 20_000, &policy).unwrap();
        let witness = outcome.witness.expect("witness expected");
        assert!(witness.certified_margin > 0.0);
        assert_eq!(witness.t0, vec![witness.t_scalar]);
        // Plus-prime phases are aligned at the returned parameter.
        for p in [3u64, 5, 7] {
            let theta = witness.t_scalar * (p as f64).ln();
            let dist = (2.0 - 2.0 * theta.cos()).sqrt();
            assert!(dist < 0.5, "plus residual {dist} at p = {p}");
        }
        assert!(outcome.evaluations <= 20_000);
    }

    #[test]
    fn search_finds_nothing_for_characteristic_function() {
        let vspec = riemann();
        let policy = TruncationPolicy::new(10_000, 10, 1e-3).unwrap();
        let outcome = search(&vspec, &[2.0], Strategy::DirectMax, 5_000, &policy).unwrap();
        assert!(outcome.witness.is_none());
        let tail = 2.0 * crate::product::tail_bound(&policy, 2.0, 1).unwrap();
        assert!(outcome.best_d <= tail);
    }

    #[test]
    fn search_rejects_zero_budget() {
        let policy = TruncationPolicy::new(1_000, 5, 1e-3).unwrap();
        assert!(matches!(
            search(&riemann(), &[2.0], Strategy::DirectMax, 0, &policy),
            Err(Error::Domain(_))
        ));
    }
}
